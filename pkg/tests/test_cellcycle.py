import math

import numpy as np
import pytest

import oracles
from ifs_coupler import cellcycle, families
from ifs_coupler.certificate import build_certificate
from ifs_coupler.model import audit_assumptions


def test_zero_time_returns_state():
    law = cellcycle.logistic_law(0.5, 10.0)
    x = np.array([[0.3], [2.0]])
    np.testing.assert_array_equal(cellcycle.integrate_growth(law, x, 0.0, 64), x)


def test_exponential_doubling():
    law = cellcycle.linear_law(math.log(2))
    assert abs(cellcycle.integrate_growth(law, [1.0], 1.0, 64)[0] - 2.0) < 1e-8


def test_rk4_order():
    law = cellcycle.linear_law(1.0)
    err = [abs(cellcycle.integrate_growth(law, [1.0], 1.0, n)[0] - math.e) for n in (8, 16)]
    assert 12 <= err[0] / err[1] <= 20


def test_steps_precondition():
    with pytest.raises(ValueError):
        cellcycle.integrate_growth(cellcycle.zero_law(), [1.0], 1.0, 0)
    with pytest.raises(ValueError):
        cellcycle.CellModel(cellcycle.zero_law(), rk4_steps=4)


def test_division_map_examples():
    cell = cellcycle.CellModel(cellcycle.linear_law(0.3))
    assert cellcycle.division_map(cell, np.zeros(1), 0.7)[0] == 0.0
    dbl = cellcycle.CellModel(cellcycle.linear_law(math.log(2)))
    assert cellcycle.division_map(dbl, np.array([1.7]), 1.0)[0] == pytest.approx(1.7, abs=1e-8)


def test_linear_audit_closed_form():
    model = families.model_from_dict({"family": "cellcycle", "law": "linear", "k": 0.3})
    audit = audit_assumptions(model)
    assert audit.all_pass
    assert audit.a_hat == pytest.approx(oracles.linear_law_a(0.3), abs=1e-10)
    assert audit.a_hat == pytest.approx(0.583, abs=5e-4)
    assert build_certificate(audit).q < 1


def test_zero_law_is_pure_halving():
    audit = audit_assumptions(families.model_from_dict({"family": "cellcycle", "law": "zero"}))
    assert audit.a_hat == pytest.approx(0.5, abs=1e-12)


def test_diagonal_law_takes_max():
    model = families.model_from_dict({"family": "cellcycle", "law": "diagonal_linear", "k": [0.3, 0.1]})
    assert model.dim == 2
    audit = audit_assumptions(model, n_state_samples=64, pair_samples=64)
    assert audit.a_hat == pytest.approx(max(oracles.linear_law_a(0.3), oracles.linear_law_a(0.1)), abs=1e-10)


def test_semigroup_autonomous():
    law = cellcycle.logistic_law(0.8, 5.0)
    x = np.array([0.7])
    direct = cellcycle.integrate_growth(law, x, 0.9, 64)
    split = cellcycle.integrate_growth(law, cellcycle.integrate_growth(law, x, 0.4, 64), 0.5, 64)
    assert abs(direct[0] - split[0]) < 1e-6


def test_linear_map_lipschitz_on_pairs(rng):
    cell = cellcycle.CellModel(cellcycle.linear_law(0.3))
    x, y = rng.uniform(0, 4, (200, 1)), rng.uniform(0, 4, (200, 1))
    t = rng.uniform(0, 1, 200)
    lhs = np.abs(cellcycle.division_map(cell, x, t) - cellcycle.division_map(cell, y, t))[:, 0]
    assert np.all(lhs <= math.exp(0.3) / 2 * np.abs(x - y)[:, 0] + 1e-12)


def test_logistic_passes_audit_with_estimated_lambda():
    model = families.model_from_dict({"family": "cellcycle", "law": "logistic", "k": 0.5, "alpha": 0.2})
    audit = audit_assumptions(model)
    assert audit.all_pass and audit.a_hat < 1
