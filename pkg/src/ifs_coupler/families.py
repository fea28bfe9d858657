"""Built-in model families and JSON model documents.

A model document is a JSON object with a ``family`` key plus numeric
parameters, e.g.::

    {"family": "halving", "density": {"name": "tilted", "alpha": 0.2},
     "box": [[0.0], [4.0]], "ref_point": [0.0]}

    {"family": "cellcycle", "law": "linear", "k": 0.3, "alpha": 0.0,
     "T": 1.0, "rk4_steps": 64}

Custom families are added with :func:`register_family`.
"""

import json
from pathlib import Path

import numpy as np

from . import cellcycle, densities
from .errors import ConfigError
from .model import ModelSpec

_FAMILIES = {}


def register_family(name, builder):
    """Register ``builder(doc) -> ModelSpec`` under ``name``."""
    _FAMILIES[name] = builder


def families():
    return sorted(_FAMILIES)


def _vector(doc, key, dim, default):
    val = doc.get(key, default)
    arr = np.asarray(val, dtype=float).reshape(-1)
    if arr.size == 1 and dim > 1:
        arr = np.full(dim, arr[0])
    if arr.size != dim:
        raise ConfigError(f"{key!r} must have {dim} components")
    return arr


def _box(doc, dim, default):
    box = doc.get("box", default)
    if isinstance(box, dict):
        box = (box["lo"], box["hi"])
    lo, hi = box
    return _vector({"v": lo}, "v", dim, None), _vector({"v": hi}, "v", dim, None)


def linear_ifs(slope, offset, dim=1, horizon=1.0, density=None, box=None, ref_point=None, name="linear"):
    """``S(x, t) = slope * x + offset * t`` with modulus ``lambda = |slope|``."""
    slope = float(slope)
    offset = float(offset)
    dens = density if density is not None else densities.uniform(horizon)

    def S(x, t):
        return slope * np.asarray(x, dtype=float) + offset * np.asarray(t, dtype=float)[..., None]

    lo, hi = box if box is not None else (np.zeros(dim), np.full(dim, 4.0))
    return ModelSpec(
        dim=dim,
        horizon=horizon,
        map_S=S,
        density_p=dens.p,
        lipschitz_lambda=lambda t: np.full(np.shape(t), abs(slope)),
        ref_point=np.zeros(dim) if ref_point is None else ref_point,
        name=name,
        box=(lo, hi),
        separable=dens.separable,
        params={"slope": slope, "offset": offset, "density": {"name": dens.name, **dens.params}},
    )


def halving(horizon=1.0, density=None, box=None, ref_point=None):
    """``S(x, t) = (x + t) / 2``."""
    return linear_ifs(0.5, 0.5, 1, horizon, density, box, ref_point, name="halving")


def constant_map(ref_point, horizon=1.0, density=None, box=None):
    """``S(x, t) = x_bar``: every point jumps straight to the reference point."""
    ref = np.asarray(ref_point, dtype=float).reshape(-1)
    dim = ref.size
    dens = density if density is not None else densities.uniform(horizon)

    def S(x, t):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)) + (dim,)
        return np.broadcast_to(ref, shape).copy()

    lo, hi = box if box is not None else (ref - 4.0, ref + 4.0)
    return ModelSpec(
        dim=dim,
        horizon=horizon,
        map_S=S,
        density_p=dens.p,
        lipschitz_lambda=lambda t: np.zeros(np.shape(t)),
        ref_point=ref,
        name="constant",
        box=(lo, hi),
        separable=dens.separable,
        params={"density": {"name": dens.name, **dens.params}},
    )


def _horizon(doc):
    return float(doc.get("T", doc.get("horizon", 1.0)))


def _density(doc, horizon):
    if "density" in doc:
        return densities.from_doc(doc["density"], horizon)
    alpha = float(doc.get("alpha", 0.0))
    return densities.tilted(horizon, alpha) if alpha else densities.uniform(horizon)


def _linear_family(doc, slope, offset, name):
    dim = int(doc.get("dim", 1))
    T = _horizon(doc)
    return linear_ifs(
        slope,
        offset,
        dim=dim,
        horizon=T,
        density=_density(doc, T),
        box=_box(doc, dim, [[0.0] * dim, [4.0] * dim]),
        ref_point=_vector(doc, "ref_point", dim, [0.0] * dim),
        name=name,
    )


def _build_halving(doc):
    return _linear_family(doc, 0.5, 0.5, "halving")


def _build_linear(doc):
    return _linear_family(doc, doc.get("slope", 0.5), doc.get("offset", 0.5), "linear")


def _build_identity(doc):
    return _linear_family(doc, 1.0, 0.0, "identity")


def _build_constant(doc):
    dim = int(doc.get("dim", 1))
    T = _horizon(doc)
    ref = _vector(doc, "ref_point", dim, [0.0] * dim)
    return constant_map(ref, T, _density(doc, T), _box(doc, dim, [(ref - 4).tolist(), (ref + 4).tolist()]))


def _build_cellcycle(doc):
    law = doc.get("law", "linear")
    if law == "zero":
        growth = cellcycle.zero_law(int(doc.get("dim", 1)))
    elif law == "linear":
        growth = cellcycle.linear_law(doc.get("k", 0.3))
    elif law == "diagonal_linear":
        growth = cellcycle.diagonal_linear_law(doc.get("k", [0.3, 0.2]))
    elif law == "logistic":
        growth = cellcycle.logistic_law(doc.get("k", 0.5), doc.get("y_max", 10.0))
    else:
        raise ConfigError(f"unknown growth law {law!r}")
    dim = growth.dim or int(doc.get("dim", 1))
    T = _horizon(doc)
    cell = cellcycle.CellModel(
        growth=growth,
        horizon=T,
        density=_density(doc, T),
        rk4_steps=int(doc.get("rk4_steps", 64)),
        ref_point=_vector(doc, "ref_point", dim, [1.0] * dim),
        box=_box(doc, dim, [[0.0] * dim, [4.0] * dim]),
        dim=dim,
    )
    return cellcycle.as_model_spec(cell)


register_family("halving", _build_halving)
register_family("linear", _build_linear)
register_family("identity", _build_identity)
register_family("constant", _build_constant)
register_family("cellcycle", _build_cellcycle)


def model_from_dict(doc):
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigError("model document must be an object with a 'family' key")
    family = doc["family"]
    if family not in _FAMILIES:
        raise ConfigError(f"unknown model family {family!r} (known: {', '.join(families())})")
    params = {**doc.get("params", {}), **{k: v for k, v in doc.items() if k != "params"}}
    try:
        model = _FAMILIES[family](params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for family {family!r}: {exc}") from exc
    if "name" in doc:
        model.name = str(doc["name"])
    return model


def load_model(path):
    with open(Path(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
