"""IFS model definition and numerical audit of the standing assumptions.

The state space is R^d (audits restrict to a declared box).  All evaluators
broadcast: ``map_S(x, t)`` takes ``x`` of shape ``(..., d)`` and ``t`` of
shape ``(...)``; ``density_p`` returns shape ``(...)``; ``metric(x, y)``
reduces the last axis; ``lipschitz_lambda(t)`` is elementwise.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional
import warnings

import numpy as np
from scipy.stats import qmc

from . import streams
from .densities import SeparableDensity
from .errors import AuditError, EvaluationError, ModelError
from .quadrature import simpson, simpson_nodes

ASSUMPTIONS = ("I", "II", "III", "IV", "V")
DEFAULT_PANELS = 1024
MASS_TOL = 1e-6


def euclidean(x, y):
    return np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)


@dataclass(eq=False)
class ModelSpec:
    dim: int
    horizon: float
    map_S: Callable
    density_p: Callable
    lipschitz_lambda: Callable
    ref_point: np.ndarray
    metric: Callable = euclidean
    name: str = "custom"
    box: Optional[tuple] = None
    separable: Optional[SeparableDensity] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ModelError("dim must be a positive integer")
        self.dim = int(self.dim)
        self.horizon = float(self.horizon)
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ModelError("horizon must be finite and positive")
        self.ref_point = np.asarray(self.ref_point, dtype=float).reshape(self.dim)
        if self.box is not None:
            lo = np.asarray(self.box[0], dtype=float).reshape(self.dim)
            hi = np.asarray(self.box[1], dtype=float).reshape(self.dim)
            if np.any(hi < lo):
                raise ModelError("audit box has hi < lo")
            self.box = (lo, hi)

    def states(self, x):
        """Coerce ``x`` to an ``(n, dim)`` float array."""
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, self.dim) if self.dim != 1 or arr.size == 1 else arr[:, None]
        if arr.shape[-1] != self.dim:
            raise ModelError(f"state has dimension {arr.shape[-1]}, model has {self.dim}")
        return arr

    def state(self, x):
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.size != self.dim:
            raise ModelError(f"state has dimension {arr.size}, model has {self.dim}")
        return arr

    def V(self, x):
        return self.metric(x, self.ref_point)


def _check_finite(values, states, times, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i, j = np.argwhere(bad)[0][:2] if values.ndim > 1 else (np.argwhere(bad)[0][0], 0)
        x = states[i] if states.ndim > 1 else states
        t = times[j] if np.ndim(times) else times
        raise EvaluationError(f"non-finite {what} at x={np.asarray(x).tolist()}, t={float(t)!r}")


def density_rows(model, states, times):
    """Density values on ``states x times`` as an ``(n, m)`` array, validated."""
    states = np.asarray(states, dtype=float)
    times = np.asarray(times, dtype=float)
    if model.separable is not None:
        sep = model.separable
        vals = sep.weights(states) @ sep.basis(times)
    else:
        vals = np.asarray(model.density_p(states[:, None, :], times[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (len(states), len(times)))
    _check_finite(vals, states, times, "density")
    if np.any(vals < 0):
        i, j = np.argwhere(vals < 0)[0]
        raise ModelError(f"negative density at x={states[i].tolist()}, t={float(times[j])!r}")
    return vals


def normalization_check(model, x, tol, panels=DEFAULT_PANELS):
    """True iff the Simpson integral of ``p(x, .)`` over [0, T] is within ``tol`` of 1."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = model.state(x)
    nodes = simpson_nodes(model.horizon, panels)
    mass = simpson(density_rows(model, x[None, :], nodes)[0], model.horizon)
    return bool(abs(mass - 1.0) <= tol)


@dataclass
class AssumptionAudit:
    """Grid estimates of the model constants with a verdict per assumption.

    Suprema are maxima over the audit grid and infima are minima over it, so
    every number here is a grid estimate, not an exact value.
    """

    a_hat: float
    c_tilde: float
    c_bar: float
    delta: float
    m_sup: float
    grid: dict
    passes: dict
    normalized: bool = True
    max_mass_error: float = 0.0
    lipschitz_excess: float = 0.0

    @property
    def all_pass(self):
        return all(self.passes.get(k, False) for k in ASSUMPTIONS)

    def failing(self):
        return [k for k in ASSUMPTIONS if not self.passes.get(k, False)]

    def to_dict(self):
        return {
            "a_hat": self.a_hat,
            "c_tilde": self.c_tilde,
            "c_bar": self.c_bar,
            "delta": self.delta,
            "m_sup": self.m_sup,
            "grid": self.grid,
            "passes": dict(self.passes),
            "all_pass": self.all_pass,
            "normalized": self.normalized,
            "max_mass_error": self.max_mass_error,
            "lipschitz_excess": self.lipschitz_excess,
            "estimate_kind": "grid estimate",
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            a_hat=float(doc["a_hat"]),
            c_tilde=float(doc["c_tilde"]),
            c_bar=float(doc["c_bar"]),
            delta=float(doc["delta"]),
            m_sup=float(doc["m_sup"]),
            grid=dict(doc.get("grid", {})),
            passes={k: bool(v) for k, v in doc["passes"].items()},
            normalized=bool(doc.get("normalized", True)),
            max_mass_error=float(doc.get("max_mass_error", 0.0)),
            lipschitz_excess=float(doc.get("lipschitz_excess", 0.0)),
        )


def audit_states(model, n_state_samples, seed=0):
    """Sobol points in the box, then the box corners and the reference point (if inside).

    The Sobol sequence is a prefix sequence, so asking for more samples only
    adds points.
    """
    if model.box is None:
        raise ModelError("model has no audit box")
    if n_state_samples < 1:
        raise ValueError("n_state_samples must be positive")
    lo, hi = model.box
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        unit = qmc.Sobol(model.dim, scramble=True, rng=int(seed)).random(int(n_state_samples))
    pts = [lo + unit * (hi - lo)]
    if model.dim <= 8:
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * model.dim, indexing="ij")).reshape(model.dim, -1).T
        pts.append(lo + corners * (hi - lo))
    if np.all(model.ref_point >= lo) and np.all(model.ref_point <= hi):
        pts.append(model.ref_point[None, :])
    return np.concatenate(pts, axis=0)


def audit_pairs(model, pair_samples, seed=0):
    """Random pairs in the box; half are wide pairs and half are close pairs."""
    lo, hi = model.box
    rng = streams.substream(seed, purpose=streams.AUDIT)
    n_wide = (int(pair_samples) + 1) // 2
    n_close = int(pair_samples) - n_wide
    xs = lo + rng.random((n_wide + n_close, model.dim)) * (hi - lo)
    ys = lo + rng.random((n_wide, model.dim)) * (hi - lo)
    width = np.where(hi > lo, hi - lo, 1.0)
    close = np.clip(xs[n_wide:] + 1e-3 * width * rng.standard_normal((n_close, model.dim)), lo, hi)
    return xs, np.concatenate([ys, close], axis=0)


def _eval_map(model, states, times):
    out = np.asarray(model.map_S(states, times), dtype=float)
    if not np.all(np.isfinite(out)):
        idx = tuple(np.argwhere(~np.isfinite(out))[0])
        x = np.broadcast_to(states, out.shape)[idx[:-1]]
        t = np.broadcast_to(np.asarray(times)[..., None], out.shape)[idx]
        raise EvaluationError(f"non-finite map value at x={x.tolist()}, t={float(t)!r}")
    return out


def audit_assumptions(model, n_state_samples=256, n_time_panels=DEFAULT_PANELS, pair_samples=256, seed=0):
    """Estimate ``a``, ``c~``, ``c_bar``, ``delta``, ``M`` on the audit grid and judge (I)-(V)."""
    if model.box is None:
        raise ModelError("audit needs a declared box; the state space is not searched beyond it")
    if min(n_state_samples, n_time_panels, pair_samples) < 1:
        raise ValueError("sample counts must be positive")
    T = model.horizon
    nodes = simpson_nodes(T, n_time_panels)
    states = audit_states(model, n_state_samples, seed)
    xs, ys = audit_pairs(model, pair_samples, seed)

    rows = density_rows(model, states, nodes)
    masses = simpson(rows, T)
    max_mass_error = float(np.max(np.abs(masses - 1.0)))

    lam = np.asarray(model.lipschitz_lambda(nodes), dtype=float)
    lam = np.broadcast_to(lam, nodes.shape)
    _check_finite(lam, nodes, nodes, "lambda")
    a_hat = float(np.max(simpson(rows * lam[None, :], T)))

    # (I) on a thinned time grid; constraint holds up to a relative rounding slack
    stride = max(1, (len(nodes) - 1) // 256)
    t_chk = nodes[::stride]
    lam_chk = lam[::stride]
    sx = _eval_map(model, xs[:, None, :], np.broadcast_to(t_chk, (len(xs), len(t_chk))))
    sy = _eval_map(model, ys[:, None, :], np.broadcast_to(t_chk, (len(ys), len(t_chk))))
    d_in = model.metric(xs, ys)
    d_out = model.metric(sx, sy)
    bound = lam_chk[None, :] * d_in[:, None]
    excess = d_out - bound
    lip_ok = bool(np.all(excess <= 1e-9 * (1.0 + bound)))
    lipschitz_excess = float(max(0.0, np.max(excess)))

    s_ref = _eval_map(model, np.broadcast_to(model.ref_point, (len(nodes), model.dim)), nodes)
    c_tilde = float(np.max(model.metric(s_ref, model.ref_point)))

    px = density_rows(model, xs, nodes)
    py = density_rows(model, ys, nodes)
    l1 = simpson(np.abs(px - py), T)
    keep = d_in > 0
    c_bar = float(np.max(l1[keep] / d_in[keep])) if np.any(keep) else 0.0

    delta = float(min(rows.min(), px.min(), py.min()))
    m_sup = float(max(rows.max(), px.max(), py.max()))

    passes = {
        "I": lip_ok,
        "II": lip_ok and np.isfinite(a_hat) and a_hat < 1.0,
        "III": bool(np.isfinite(c_tilde)),
        "IV": bool(np.isfinite(c_bar)),
        "V": bool(delta > 0.0 and np.isfinite(m_sup)),
    }
    grid = {
        "box_lo": model.box[0].tolist(),
        "box_hi": model.box[1].tolist(),
        "n_states": int(len(states)),
        "n_state_samples": int(n_state_samples),
        "n_time_panels": int(n_time_panels),
        "n_pairs": int(len(xs)),
        "lipschitz_time_nodes": int(len(t_chk)),
        "seed": int(seed),
    }
    return AssumptionAudit(
        a_hat=a_hat,
        c_tilde=c_tilde,
        c_bar=c_bar,
        delta=delta,
        m_sup=m_sup,
        grid=grid,
        passes={k: bool(v) for k, v in passes.items()},
        normalized=bool(max_mass_error <= MASS_TOL),
        max_mass_error=max_mass_error,
        lipschitz_excess=lipschitz_excess,
    )


def drift_constants(audit):
    """``(a, c)`` of the drift inequality ``<V, P mu> <= a <V, mu> + c``."""
    failing = [k for k in ("I", "II", "III") if not audit.passes.get(k, False)]
    if failing:
        raise AuditError(f"drift constants unavailable: assumption ({', '.join(failing)}) failed", failing)
    return audit.a_hat, audit.c_tilde


def estimate_lipschitz_lambda(map_S, box, horizon, metric=euclidean, n_states=128, n_times=129, margin=0.01, seed=0):
    """Grid estimate of ``lambda(t)`` for maps without an analytic modulus.

    Takes the largest finite-difference stretch over sampled states and
    directions at each time node, inflates it by ``margin``, and
    interpolates linearly in t.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    dim = lo.size
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        unit = qmc.Sobol(dim, scramble=True, rng=int(seed)).random(n_states)
    xs = lo + unit * (hi - lo)
    width = float(np.max(hi - lo)) or 1.0
    h = 1e-6 * width
    rng = streams.substream(seed, purpose=streams.AUDIT, block=1)
    dirs = np.concatenate([np.eye(dim), rng.standard_normal((dim, dim))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    base = np.repeat(xs, len(dirs), axis=0)
    moved = base + h * np.tile(dirs, (n_states, 1))
    times = np.linspace(0.0, float(horizon), n_times)
    tt = np.broadcast_to(times, (len(base), n_times))
    s0 = np.asarray(map_S(base[:, None, :], tt), dtype=float)
    s1 = np.asarray(map_S(moved[:, None, :], tt), dtype=float)
    stretch = metric(s1, s0) / metric(moved, base)[:, None]
    lam_nodes = (1.0 + margin) * stretch.max(axis=0)

    def lam(t):
        return np.interp(np.asarray(t, dtype=float), times, lam_nodes)

    return lam
