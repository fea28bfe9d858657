"""Coupled chains built from an overlap kernel and a product residual kernel.

From a pair ``(x, y)`` the overlap branch (probability ``kappa``, the mass of
``min(p(x, .), p(y, .))``) moves both coordinates with one shared division
time.  The residual branch draws the two times independently from
``(p(x, .) - min) / (1 - kappa)`` and ``(p(y, .) - min) / (1 - kappa)``.
Each coordinate on its own is then an exact single-chain transition.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import streams
from .errors import EvaluationError
from .kernel import GRID_NODES, draw_times, invert_cumulative, time_grid
from .model import DEFAULT_PANELS, density_rows
from .quadrature import cumulative_simpson, simpson, simpson_nodes

KAPPA_EPS = 1e-12
CHUNK = 128


@dataclass
class CoupledStep:
    x_next: np.ndarray
    y_next: np.ndarray
    theta: int
    t_shared: Optional[float] = None
    t_x: Optional[float] = None
    t_y: Optional[float] = None


@dataclass
class AugmentedTrajectory:
    pairs: np.ndarray  # (n + 1, 2, d)
    thetas: np.ndarray  # (n,), thetas[k - 1] is the branch of step k
    tau_hat: Optional[int]
    tau_censored: bool
    d_hat: Optional[int]
    seed: int
    kappas: np.ndarray = field(default=None)


@dataclass
class PairEnsemble:
    xs: np.ndarray
    ys: np.ndarray
    generation: int = 0
    seed: int = 0
    thetas: Optional[np.ndarray] = None
    kappas: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.xs)


def overlap_mass(model, x, y, panels=DEFAULT_PANELS):
    """``kappa = int_0^T min(p(x, t), p(y, t)) dt``, the total mass of the overlap kernel."""
    nodes = simpson_nodes(model.horizon, panels)
    rows = density_rows(model, np.stack([model.state(x), model.state(y)]), nodes)
    return float(np.clip(simpson(np.minimum(rows[0], rows[1]), model.horizon), 0.0, 1.0))


def _coupled_times(model, xs, ys, u, nodes):
    """Branches and times for pairs ``(xs[i], ys[i])`` from uniforms ``u[i] = (branch, tx, ty)``.

    ``xs``/``ys`` may have one row (a fixed pair reused for every draw) or
    one row per draw.
    """
    n = len(u)
    sep = model.separable
    if sep is not None and sep.state_free:
        t = draw_times(model, xs[:1], u[:, 1], nodes)
        return np.ones(n, dtype=np.int8), t, t.copy(), np.ones(n)
    t_eval, t_b = time_grid(model, nodes)
    T = model.horizon
    theta = np.empty(n, dtype=np.int8)
    tx = np.empty(n)
    ty = np.empty(n)
    kappa = np.empty(n)
    fixed = len(xs) == 1
    px_all = density_rows(model, xs[:1], t_eval) if fixed else None
    py_all = density_rows(model, ys[:1], t_eval) if fixed else None
    grids = None
    for start in range(0, n, CHUNK if not fixed else n):
        sl = slice(start, min(start + (CHUNK if not fixed else n), n))
        m = sl.stop - sl.start
        if grids is None or not fixed:
            if fixed:
                px, py = px_all, py_all
            else:
                px = density_rows(model, xs[sl], t_eval)
                py = density_rows(model, ys[sl], t_eval)
            low = np.minimum(px, py)
            M = cumulative_simpson(low, T)
            Rx = cumulative_simpson(px - low, T)
            Ry = cumulative_simpson(py - low, T)
            k = np.clip(M[:, -1], 0.0, 1.0)
            k = np.where(k >= 1.0 - KAPPA_EPS, 1.0, np.where(k <= KAPPA_EPS, 0.0, k))
            grids = M, Rx, Ry, k
        M, Rx, Ry, k = grids
        rows = np.zeros(m, dtype=np.intp) if fixed else np.arange(m)
        kk = k[rows]
        uu = u[sl]
        glue = uu[:, 0] < kk
        th = glue.astype(np.int8)
        t1 = np.empty(m)
        t2 = np.empty(m)
        if np.any(glue):
            r = rows[glue]
            t1[glue] = invert_cumulative(M, t_b, uu[glue, 1] * M[r, -1], rows=r)
            t2[glue] = t1[glue]
        rest = ~glue
        if np.any(rest):
            r = rows[rest]
            t1[rest] = invert_cumulative(Rx, t_b, uu[rest, 1] * Rx[r, -1], rows=r)
            t2[rest] = invert_cumulative(Ry, t_b, uu[rest, 2] * Ry[r, -1], rows=r)
        theta[sl], tx[sl], ty[sl], kappa[sl] = th, t1, t2, kk
    return theta, tx, ty, kappa


def coupled_draws(model, x, y, u, nodes=GRID_NODES):
    """Vectorized coupled steps from one fixed pair; ``u`` has shape ``(n, 3)``.

    Returns ``(x_next, y_next, theta, t_x, t_y)`` as arrays over draws.
    """
    xs = model.state(x)[None, :]
    ys = model.state(y)[None, :]
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    theta, tx, ty, _ = _coupled_times(model, xs, ys, u, nodes)
    xn = np.asarray(model.map_S(np.broadcast_to(xs, (len(u), model.dim)), tx), dtype=float)
    yn = np.asarray(model.map_S(np.broadcast_to(ys, (len(u), model.dim)), ty), dtype=float)
    return xn, yn, theta, tx, ty


def coupled_step(model, x, y, rng):
    xn, yn, theta, tx, ty = coupled_draws(model, x, y, rng.random((1, 3)))
    if theta[0] == 1:
        return CoupledStep(xn[0], yn[0], 1, t_shared=float(tx[0]))
    return CoupledStep(xn[0], yn[0], 0, t_x=float(tx[0]), t_y=float(ty[0]))


def coupling_time(thetas, horizon=None):
    """``(tau_hat, censored)`` from branch bits ``thetas[k - 1]`` of steps ``k = 1..n``.

    ``tau_hat`` is one past the last residual step (1 if there is none); it
    is censored when that residual step falls in the final 10% of the horizon.
    """
    thetas = np.asarray(thetas)
    horizon = len(thetas) if horizon is None else horizon
    zeros = np.flatnonzero(thetas == 0)
    if len(zeros) == 0:
        return 1, False
    last = int(zeros[-1]) + 1
    return last + 1, bool(last > 0.9 * horizon)


def v_bar(model, xs, ys):
    return model.V(xs) + model.V(ys)


def hitting_time(model, pairs, eps, c):
    """Least ``k >= 1`` with ``V(x_k) + V(y_k) < 2c / eps``; ``None`` if never."""
    vb = v_bar(model, pairs[1:, 0], pairs[1:, 1])
    hits = np.flatnonzero(vb < 2.0 * c / eps)
    return int(hits[0]) + 1 if len(hits) else None


def _check_eps(eps, a):
    upper = 1.0 if a is None else 1.0 - a
    if not 0.0 < eps < upper:
        raise ValueError(f"eps must lie in (0, {upper})")


def simulate_coupled(model, x0, y0, horizon, eps, c, seed, a=None):
    """Run the augmented chain for ``horizon`` steps from ``(x0, y0)``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    _check_eps(eps, a)
    rng = streams.substream(seed, purpose=streams.COUPLING)
    pairs = np.empty((horizon + 1, 2, model.dim))
    pairs[0, 0] = model.state(x0)
    pairs[0, 1] = model.state(y0)
    thetas = np.empty(horizon, dtype=np.int8)
    kappas = np.empty(horizon)
    for k in range(horizon):
        x, y = pairs[k]
        kappas[k] = overlap_mass(model, x, y)
        st = coupled_step(model, x, y, rng)
        pairs[k + 1, 0], pairs[k + 1, 1], thetas[k] = st.x_next, st.y_next, st.theta
    tau, censored = coupling_time(thetas, horizon)
    return AugmentedTrajectory(
        pairs=pairs,
        thetas=thetas,
        tau_hat=tau,
        tau_censored=censored,
        d_hat=hitting_time(model, pairs, eps, c),
        seed=int(seed),
        kappas=kappas,
    )


def coupled_push_forward(model, pairs, seed, threads=None, nodes=GRID_NODES):
    """One coupled step for every pair; records each pair's branch and overlap mass."""
    xs = model.states(pairs.xs)
    ys = model.states(pairs.ys)
    gen = pairs.generation

    def work(b, sl):
        u = streams.substream(seed, gen, b, streams.COUPLING).random((sl.stop - sl.start, 3))
        theta, tx, ty, kappa = _coupled_times(model, xs[sl], ys[sl], u, nodes)
        xn = np.asarray(model.map_S(xs[sl], tx), dtype=float).reshape(-1, model.dim)
        yn = np.asarray(model.map_S(ys[sl], ty), dtype=float).reshape(-1, model.dim)
        return xn, yn, theta, kappa

    parts = streams.map_blocks(work, len(xs), threads)
    xn = np.concatenate([p[0] for p in parts])
    yn = np.concatenate([p[1] for p in parts])
    if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(yn))):
        raise EvaluationError("non-finite map value during coupled push-forward")
    return PairEnsemble(
        xn,
        yn,
        gen + 1,
        int(seed),
        thetas=np.concatenate([p[2] for p in parts]),
        kappas=np.concatenate([p[3] for p in parts]),
    )


@dataclass
class CouplingRun:
    """Batch of augmented chains from a common starting pair."""

    thetas: np.ndarray  # (n_pairs, horizon)
    kappas: np.ndarray  # (n_pairs, horizon)
    tau_hat: np.ndarray  # (n_pairs,)
    censored: np.ndarray  # (n_pairs,) bool
    d_hat: np.ndarray  # (n_pairs,), -1 where K_eps was never reached
    first_path: np.ndarray  # (horizon + 1, 2, d) for pair 0
    horizon: int

    def tail_frequency(self, n):
        """Fraction of chains with coupling time ``> n / 2``, censored chains counted as exceeding."""
        return float(np.mean((self.tau_hat > n / 2.0) | self.censored))


def run_coupled_ensemble(model, x0, y0, n_pairs, horizon, eps, c, seed, threads=None, a=None):
    if horizon < 1 or n_pairs < 1:
        raise ValueError("horizon and n_pairs must be >= 1")
    _check_eps(eps, a)
    x0 = model.state(x0)
    y0 = model.state(y0)
    ens = PairEnsemble(np.tile(x0, (n_pairs, 1)), np.tile(y0, (n_pairs, 1)), 0, int(seed))
    thetas = np.empty((n_pairs, horizon), dtype=np.int8)
    kappas = np.empty((n_pairs, horizon))
    d_hat = np.full(n_pairs, -1, dtype=np.int64)
    path = np.empty((horizon + 1, 2, model.dim))
    path[0] = x0, y0
    level = 2.0 * c / eps
    for k in range(1, horizon + 1):
        ens = coupled_push_forward(model, ens, seed, threads)
        thetas[:, k - 1] = ens.thetas
        kappas[:, k - 1] = ens.kappas
        hit = (d_hat < 0) & (v_bar(model, ens.xs, ens.ys) < level)
        d_hat[hit] = k
        path[k] = ens.xs[0], ens.ys[0]
    # last residual step per chain (0 when there is none)
    zero = thetas == 0
    last = np.where(zero.any(axis=1), horizon - np.argmax(zero[:, ::-1], axis=1), 0)
    tau = last + 1
    censored = (last > 0) & (last > 0.9 * horizon)
    return CouplingRun(thetas, kappas, tau, censored, d_hat, path, horizon)
