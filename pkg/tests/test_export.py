import json
import math

import numpy as np
import pytest

from ifs_coupler import export
from ifs_coupler.kernel import Ensemble, simulate


def test_ensemble_round_trip(tmp_path, rng):
    pts = rng.normal(size=(50, 2))
    path = export.write_ensemble(tmp_path / "e.csv", Ensemble(pts, generation=3))
    raw = path.read_bytes()
    assert raw.startswith(b"#schema=ifs_coupler.ensemble/1\nindex,generation,x0,x1,time\n")
    assert b"\r" not in raw
    np.testing.assert_array_equal(export.read_ensemble(path), pts)


def test_trajectory_import(tmp_path, halving):
    traj = simulate(halving, 2.0, 5, seed=1)
    path = export.write_trajectory(tmp_path / "t.csv", traj)
    np.testing.assert_array_equal(export.read_ensemble(path), traj.states)


def test_read_rejects_other_schema(tmp_path):
    path = export.write_curve(tmp_path / "c.csv", [{"n": 0, "W1": 1.0, "FM": 1.0, "stderr": 0.0}])
    with pytest.raises(ValueError, match="schema"):
        export.read_ensemble(path)


def test_json_non_finite_and_numpy():
    text = export.json_text({"b": np.float64(math.inf), "a": np.arange(2), "c": math.nan, "d": np.bool_(True)})
    assert json.loads(text) == {"a": [0, 1], "b": "inf", "c": "nan", "d": True}
    assert text.index('"a"') < text.index('"b"')


def test_float_cells_round_trip():
    x = 0.1 + 0.2
    assert float(export._cell(x)) == x
