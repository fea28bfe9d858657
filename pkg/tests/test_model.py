import math

import numpy as np
import pytest

from ifs_coupler import densities, families
from ifs_coupler.errors import AuditError, ConfigError, EvaluationError, ModelError
from ifs_coupler.model import (AssumptionAudit, ModelSpec, audit_assumptions, drift_constants,
                               estimate_lipschitz_lambda, normalization_check)


def test_halving_audit_constants(halving):
    audit = audit_assumptions(halving)
    assert audit.all_pass
    assert audit.a_hat == pytest.approx(0.5, abs=1e-12)
    assert audit.c_tilde == pytest.approx(0.5, abs=1e-12)
    assert audit.c_bar == 0.0
    assert audit.delta == pytest.approx(1.0) and audit.m_sup == pytest.approx(1.0)


def test_identity_map_fails_contraction():
    audit = audit_assumptions(families.model_from_dict({"family": "identity"}))
    assert not audit.passes["II"]
    assert "II" in audit.failing()
    with pytest.raises(AuditError, match="II"):
        drift_constants(audit)


def test_tilted_audit_bounds(tilted):
    audit = audit_assumptions(tilted)
    assert audit.all_pass
    # density range is [(1 - 0.2 tanh 4), (1 + 0.2 tanh 4)] on [0, 4]
    assert audit.delta == pytest.approx(1 - 0.2 * math.tanh(4.0), abs=1e-9)
    assert audit.m_sup == pytest.approx(1 + 0.2 * math.tanh(4.0), abs=1e-9)
    # |p_x - p_y| integrates to (0.2 / 2) |tanh x - tanh y| <= 0.1 |x - y|
    assert 0.05 < audit.c_bar <= 0.1 + 1e-9


def test_rising_density_has_zero_delta():
    model = families.halving(density=densities.rising(1.0))
    audit = audit_assumptions(model)
    assert audit.delta == 0.0
    assert not audit.passes["V"]


def test_audit_round_trip(halving):
    audit = audit_assumptions(halving, n_state_samples=32, pair_samples=32)
    again = AssumptionAudit.from_dict(audit.to_dict())
    assert again.to_dict() == audit.to_dict()


def test_audit_requires_box(halving):
    halving.box = None
    with pytest.raises(ModelError, match="box"):
        audit_assumptions(halving)


def _custom(p, S=None):
    return ModelSpec(dim=1, horizon=1.0, map_S=S or (lambda x, t: 0.5 * x), density_p=p,
                     lipschitz_lambda=lambda t: np.full(np.shape(t), 0.5), ref_point=[1.0],
                     box=([0.0], [2.0]))


def test_unnormalized_density_flagged():
    model = _custom(lambda x, t: np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)), 0.9))
    audit = audit_assumptions(model, n_state_samples=16, pair_samples=16)
    assert not audit.normalized
    assert audit.max_mass_error == pytest.approx(0.1, abs=1e-9)
    assert not normalization_check(model, 1.0, 1e-6)


def test_negative_density_rejected():
    model = _custom(lambda x, t: 1.0 - 3.0 * np.broadcast_to(t, np.broadcast_shapes(np.shape(x)[:-1], np.shape(t))))
    with pytest.raises(ModelError, match="negative density"):
        audit_assumptions(model, n_state_samples=16, pair_samples=16)


def test_non_finite_map_names_location():
    def S(x, t):
        return np.where(np.asarray(t)[..., None] > 0.5, np.inf, 0.5 * np.asarray(x))

    model = _custom(densities.uniform(1.0).p, S)
    with pytest.raises(EvaluationError, match="t="):
        audit_assumptions(model, n_state_samples=8, pair_samples=8)


def test_lipschitz_estimate_for_linear_map():
    lam = estimate_lipschitz_lambda(lambda x, t: 0.7 * np.asarray(x) + np.asarray(t)[..., None],
                                    ([0.0, 0.0], [1.0, 1.0]), 1.0)
    np.testing.assert_allclose(lam(np.array([0.0, 0.3, 1.0])), 0.707, rtol=1e-6)


def test_model_document_errors():
    with pytest.raises(ConfigError, match="unknown model family"):
        families.model_from_dict({"family": "nope"})
    with pytest.raises(ConfigError):
        families.model_from_dict({"slope": 1})
    with pytest.raises(ConfigError):
        families.model_from_dict({"family": "cellcycle", "law": "cubic"})


def test_model_document_round_trip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"family": "halving", "density": {"name": "tilted", "alpha": 0.3}, "box": [[0], [2]]}')
    model = families.load_model(path)
    assert model.params["density"]["alpha"] == 0.3
    np.testing.assert_array_equal(model.box[1], [2.0])


def test_custom_family_registration():
    families.register_family("doubling_test", lambda doc: families.linear_ifs(2.0, 0.0))
    assert "doubling_test" in families.families()
    audit = audit_assumptions(families.model_from_dict({"family": "doubling_test"}), n_state_samples=8,
                              pair_samples=8)
    assert audit.a_hat == pytest.approx(2.0)
    assert not audit.passes["II"]
