"""Single-chain sampling of the Markov operator.

Division times are drawn by inverting ``F_x(t) = int_0^t p(x, s) ds`` on a
cumulative Simpson grid with linear interpolation between panel
boundaries.  Separable densities reuse one cached grid per basis function.
"""

from dataclasses import dataclass
import weakref

import numpy as np

from . import streams
from .errors import EvaluationError, ModelError
from .model import DEFAULT_PANELS, MASS_TOL, density_rows
from .quadrature import cumulative_simpson, simpson, simpson_nodes

GRID_NODES = 4096

_BASIS_CACHE = weakref.WeakKeyDictionary()


@dataclass
class Trajectory:
    states: np.ndarray  # (n + 1, d)
    times: np.ndarray  # (n,)
    seed: int

    def __len__(self):
        return len(self.states)


@dataclass
class Ensemble:
    points: np.ndarray  # (N, d)
    generation: int = 0
    seed: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if len(self.points) == 0:
            raise ValueError("ensemble must be nonempty")
        if self.generation < 0:
            raise ValueError("generation must be >= 0")

    def __len__(self):
        return len(self.points)


def time_grid(model, nodes=GRID_NODES):
    """Evaluation nodes and panel boundaries for a grid of ``nodes`` intervals."""
    panels = max(1, int(nodes) // 2)
    t_eval = simpson_nodes(model.horizon, panels)
    return t_eval, t_eval[::2]


def _basis_cumulative(model, nodes):
    per_model = _BASIS_CACHE.setdefault(model, {})
    if nodes not in per_model:
        t_eval, t_b = time_grid(model, nodes)
        basis = np.asarray(model.separable.basis(t_eval), dtype=float)
        per_model[nodes] = (cumulative_simpson(basis, model.horizon), t_b)
    return per_model[nodes]


def _check_mass(total, states):
    err = np.abs(total - 1.0)
    if np.any(err > MASS_TOL):
        i = int(np.argmax(err))
        x = np.asarray(states)[min(i, len(states) - 1)]
        raise ModelError(
            f"density mass {float(total[i])!r} at x={x.tolist()} is not 1 within {MASS_TOL}; "
            "model rejected instead of renormalized"
        )


def bisect_rows(value_at, n, width, target):
    """Per-row index ``lo`` with ``value_at(lo) <= target < value_at(lo + 1)``.

    ``value_at(k)`` returns the grid values at per-row column indices ``k``.
    """
    lo = np.zeros(n, dtype=np.intp)
    hi = np.full(n, width - 1, dtype=np.intp)
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        go = value_at(mid) <= target
        lo = np.where(go, mid, lo)
        hi = np.where(go, hi, mid)
    return lo, hi


def invert_cumulative(F, t_b, target, rows=None):
    """Invert nondecreasing cumulative rows at ``target`` by bisection plus linear interpolation.

    ``F`` has shape ``(R, m + 1)``.  Row ``rows[i]`` (default: row ``i``, or
    row 0 when ``R == 1``) is inverted at ``target[i]``.
    """
    F = np.asarray(F, dtype=float)
    target = np.asarray(target, dtype=float)
    n = len(target)
    if rows is None:
        rows = np.zeros(n, dtype=np.intp) if len(F) == 1 else np.arange(n)
    lo, hi = bisect_rows(lambda k: F[rows, k], n, F.shape[1], target)
    return _interpolate(F[rows, lo], F[rows, hi], t_b[lo], t_b[hi], target, t_b[-1])


def _interpolate(f_lo, f_hi, t_lo, t_hi, target, horizon):
    gap = f_hi - f_lo
    frac = np.divide(target - f_lo, gap, out=np.zeros_like(target), where=gap > 0)
    t = t_lo + np.clip(frac, 0.0, 1.0) * (t_hi - t_lo)
    return np.minimum(t, np.nextafter(horizon, 0.0))


def cumulative_rows(model, states, nodes=GRID_NODES):
    """Cumulative grids ``F_x`` for each state, shape ``(n, m + 1)``, mass-checked."""
    t_eval, t_b = time_grid(model, nodes)
    F = cumulative_simpson(density_rows(model, states, t_eval), model.horizon)
    if np.any(np.diff(F, axis=1) < 0):
        raise ModelError("cumulative grid is not monotone (negative density)")
    _check_mass(F[:, -1], states)
    return F, t_b


def draw_times(model, states, u, nodes=GRID_NODES):
    """Division times ``F_x^{-1}(u)`` for each row of ``states``."""
    states = np.asarray(states, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    sep = model.separable
    if sep is not None:
        H, t_b = _basis_cumulative(model, nodes)
        if sep.state_free:
            F = (np.asarray(sep.weights(states[:1]), dtype=float) @ H)
            _check_mass(F[:, -1], states[:1])
            return invert_cumulative(F, t_b, u * F[0, -1])
        W = np.asarray(sep.weights(states), dtype=float)
        if not np.all(np.isfinite(W)):
            raise EvaluationError("non-finite density weights")
        total = W @ H[:, -1]
        _check_mass(total, states)
        target = u * total
        lo, hi = bisect_rows(lambda k: np.einsum("nj,jn->n", W, H[:, k]), len(u), H.shape[1], target)
        f_lo = np.einsum("nj,jn->n", W, H[:, lo])
        f_hi = np.einsum("nj,jn->n", W, H[:, hi])
        if np.any(f_hi < f_lo):
            raise ModelError("cumulative grid is not monotone (negative density)")
        return _interpolate(f_lo, f_hi, t_b[lo], t_b[hi], target, model.horizon)
    out = np.empty(len(u))
    chunk = 128
    for start in range(0, len(u), chunk):
        sl = slice(start, start + chunk)
        F, t_b = cumulative_rows(model, states[sl], nodes)
        out[sl] = invert_cumulative(F, t_b, u[sl] * F[:, -1])
    return out


def sample_division_time(model, x, u):
    """Division time with cumulative probability ``u`` at state ``x``."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    x = model.state(x)
    return float(draw_times(model, x[None, :], [u])[0])


def step(model, x, rng):
    """One transition from ``x``; returns ``(x_next, t)``."""
    x = model.state(x)
    t = sample_division_time(model, x, rng.random())
    return np.asarray(model.map_S(x, np.float64(t)), dtype=float).reshape(model.dim), t


def simulate(model, x0, n, seed):
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = streams.substream(seed, purpose=streams.TRAJECTORY)
    states = np.empty((n + 1, model.dim))
    times = np.empty(n)
    states[0] = model.state(x0)
    for k in range(n):
        states[k + 1], times[k] = step(model, states[k], rng)
    return Trajectory(states, times, int(seed))


def advance(model, points, u):
    """Move every point with its own uniform; returns ``(next_points, times)``."""
    t = draw_times(model, points, u)
    nxt = np.asarray(model.map_S(points, t), dtype=float).reshape(points.shape)
    if not np.all(np.isfinite(nxt)):
        raise EvaluationError("non-finite map value during push-forward")
    return nxt, t


def push_forward(model, ens, seed, threads=None, purpose=streams.MAIN):
    """Apply one independent transition to each point of ``ens``.

    Point ``i`` uses substream ``(seed, purpose, ens.generation, i // BLOCK)``,
    so two ensembles of equal size pushed with the same seed share their
    division-time uniforms index by index.
    """
    pts = model.states(ens.points)
    gen = ens.generation

    def work(b, sl):
        u = streams.substream(seed, gen, b, purpose).random(sl.stop - sl.start)
        return advance(model, pts[sl], u)[0]

    parts = streams.map_blocks(work, len(pts), threads)
    return Ensemble(np.concatenate(parts, axis=0), gen + 1, int(seed))


def evolve(model, ens, generations, seed, threads=None, purpose=streams.MAIN):
    """Yield ``ens`` and its first ``generations`` push-forwards."""
    yield ens
    for _ in range(generations):
        ens = push_forward(model, ens, seed, threads, purpose)
        yield ens


def dual_apply(model, f, x, panels=DEFAULT_PANELS):
    """``Uf(x) = int_0^T f(S(x, t)) p(x, t) dt`` by composite Simpson.

    ``x`` may be one state or an ``(n, d)`` batch; ``f`` maps ``(..., d)``
    states to ``(...)`` values.
    """
    single = np.ndim(x) <= 1 and (model.dim > 1 or np.size(x) == 1)
    pts = model.states(x)
    nodes = simpson_nodes(model.horizon, panels)
    out = np.empty(len(pts))
    chunk = max(1, 2_000_000 // (len(nodes) * model.dim))
    for start in range(0, len(pts), chunk):
        sl = slice(start, start + chunk)
        block = pts[sl]
        images = np.asarray(model.map_S(block[:, None, :], np.broadcast_to(nodes, (len(block), len(nodes)))))
        vals = np.asarray(f(images), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("non-finite test-function value in dual operator")
        out[sl] = simpson(vals * density_rows(model, block, nodes), model.horizon)
    return float(out[0]) if single else out
