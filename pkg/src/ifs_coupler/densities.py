"""Built-in division-time densities.

Each density is a broadcasting evaluator ``p(x, t)`` with ``x`` of shape
``(..., d)`` and ``t`` of shape ``(...)``.  Densities that factor as
``sum_j w_j(x) h_j(t)`` also carry a :class:`SeparableDensity`, which lets
the sampler cache cumulative grids of the ``h_j`` once per model.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SeparableDensity:
    """``p(x, t) = weights(x) @ basis(t)``.

    ``weights`` maps ``(n, d)`` states to ``(n, J)``; ``basis`` maps ``(m,)``
    times to ``(J, m)``.  ``state_free`` marks densities with no x-dependence.
    """

    weights: Callable
    basis: Callable
    state_free: bool = False


@dataclass(frozen=True, eq=False)
class Density:
    p: Callable
    name: str = "custom"
    separable: Optional[SeparableDensity] = None
    params: dict = field(default_factory=dict)


def uniform(horizon):
    T = float(horizon)

    def p(x, t):
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(np.shape(x)[:-1], t.shape)
        return np.full(shape, 1.0 / T)

    sep = SeparableDensity(
        weights=lambda xs: np.ones((len(xs), 1)),
        basis=lambda ts: np.full((1, len(ts)), 1.0 / T),
        state_free=True,
    )
    return Density(p, "uniform", sep, {"T": T})


def rising(horizon):
    """``p(t) = 2t / T^2``; vanishes at t = 0, so the lower bound delta is 0."""
    T = float(horizon)

    def p(x, t):
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(np.shape(x)[:-1], t.shape)
        return np.broadcast_to(2.0 * t / T**2, shape).copy()

    sep = SeparableDensity(
        weights=lambda xs: np.ones((len(xs), 1)),
        basis=lambda ts: (2.0 * np.asarray(ts, dtype=float) / T**2)[None, :],
        state_free=True,
    )
    return Density(p, "rising", sep, {"T": T})


def tilted(horizon, alpha):
    """``p(x, t) = (1 + alpha * tanh(|x|) * (2t/T - 1)) / T`` with ``|alpha| <= 0.5``.

    Normalized for every x, bounded in ``[(1-|alpha|)/T, (1+|alpha|)/T]``.
    """
    T = float(horizon)
    alpha = float(alpha)
    if abs(alpha) > 0.5:
        raise ValueError("tilted density needs |alpha| <= 0.5")

    def tilt(x):
        return alpha * np.tanh(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def p(x, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + tilt(x) * (2.0 * t / T - 1.0)) / T

    def weights(xs):
        return np.stack([np.ones(len(xs)), tilt(xs)], axis=1)

    def basis(ts):
        ts = np.asarray(ts, dtype=float)
        return np.stack([np.full(ts.shape, 1.0 / T), (2.0 * ts / T - 1.0) / T])

    return Density(p, "tilted", SeparableDensity(weights, basis), {"T": T, "alpha": alpha})


def from_doc(doc, horizon):
    """Build a density from ``"uniform"`` or ``{"name": ..., ...}``."""
    if doc is None:
        doc = "uniform"
    if isinstance(doc, str):
        doc = {"name": doc}
    name = doc.get("name", "uniform")
    if name == "uniform":
        return uniform(horizon)
    if name == "rising":
        return rising(horizon)
    if name == "tilted":
        return tilted(horizon, doc.get("alpha", 0.2))
    raise ValueError(f"unknown density {name!r}")
