"""Cell division cycle: ODE growth over one cycle, then halving at mitosis.

A cell starting the cycle with substance vector ``x`` grows along
``dy/dt = g(t, y)``; if it divides at age ``t`` each daughter receives half,
so the next generation starts at ``Pi(x, t) / 2``.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np

from . import densities
from .errors import EvaluationError
from .model import ModelSpec, estimate_lipschitz_lambda


@dataclass(frozen=True, eq=False)
class GrowthLaw:
    """Right-hand side ``g(t, y)`` (broadcasting over leading axes of ``y``).

    ``lipschitz`` is the analytic Lipschitz modulus of the halved flow,
    ``t -> Lip(Pi(., t)) / 2``, when one is known.
    """

    g: Callable
    name: str
    params: dict = field(default_factory=dict)
    dim: Optional[int] = None
    lipschitz: Optional[Callable] = None
    autonomous: bool = True


def zero_law(dim=1):
    return GrowthLaw(
        g=lambda t, y: np.zeros_like(y),
        name="zero",
        dim=dim,
        lipschitz=lambda t: np.full(np.shape(t), 0.5),
    )


def linear_law(k):
    k = float(k)
    return GrowthLaw(
        g=lambda t, y: k * y,
        name="linear",
        params={"k": k},
        lipschitz=lambda t: 0.5 * np.exp(k * np.asarray(t, dtype=float)),
    )


def diagonal_linear_law(ks):
    ks = np.asarray(ks, dtype=float).reshape(-1)
    return GrowthLaw(
        g=lambda t, y: ks * y,
        name="diagonal_linear",
        params={"k": ks.tolist()},
        dim=ks.size,
        # operator norm of diag(exp(k t)) / 2
        lipschitz=lambda t: 0.5 * np.exp(np.multiply.outer(np.asarray(t, dtype=float), ks)).max(axis=-1),
    )


def logistic_law(k, y_max):
    k = float(k)
    y_max = float(y_max)
    return GrowthLaw(
        g=lambda t, y: k * y * (1.0 - y / y_max),
        name="logistic",
        params={"k": k, "y_max": y_max},
        dim=1,
    )


def integrate_growth(law, x, t, steps):
    """Classical RK4 approximation of ``Pi(x, t)`` using ``steps`` equal substeps.

    ``x`` has shape ``(..., d)`` and ``t`` broadcasts against ``x[..., 0]``;
    every element integrates over its own ``[0, t]``.
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    y = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    h = (t / steps)[..., None]
    y = y + np.zeros_like(h)
    s = np.zeros_like(h)
    for _ in range(steps):
        k1 = law.g(s, y)
        k2 = law.g(s + h / 2, y + h / 2 * k1)
        k3 = law.g(s + h / 2, y + h / 2 * k2)
        k4 = law.g(s + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s + h
    if not np.all(np.isfinite(y)):
        raise EvaluationError("non-finite value while integrating the growth law")
    return y


@dataclass(eq=False)
class CellModel:
    growth: GrowthLaw
    horizon: float = 1.0
    density: densities.Density = None
    rk4_steps: int = 64
    ref_point: Optional[np.ndarray] = None
    box: Optional[tuple] = None
    dim: int = 1

    def __post_init__(self):
        if self.rk4_steps < 8:
            raise ValueError("rk4_steps must be >= 8")
        if self.growth.dim is not None:
            self.dim = self.growth.dim
        if self.density is None:
            self.density = densities.uniform(self.horizon)
        if self.ref_point is None:
            # a reference point off the fixed point 0 keeps the drift offset positive
            self.ref_point = np.ones(self.dim)
        if self.box is None:
            self.box = (np.zeros(self.dim), np.full(self.dim, 4.0))

    @property
    def steps(self):
        return max(1, math.ceil(self.rk4_steps * self.horizon))


def division_map(cell, x, t):
    """Daughter-cell state ``Pi(x, t) / 2``."""
    return 0.5 * integrate_growth(cell.growth, x, t, cell.steps)


def as_model_spec(cell):
    def S(x, t):
        return division_map(cell, x, t)

    lam = cell.growth.lipschitz
    if lam is None:
        lam = estimate_lipschitz_lambda(S, cell.box, cell.horizon)
    params = {
        "family": "cellcycle",
        "law": cell.growth.name,
        **cell.growth.params,
        "T": cell.horizon,
        "rk4_steps": cell.rk4_steps,
        "density": {"name": cell.density.name, **cell.density.params},
    }
    return ModelSpec(
        dim=cell.dim,
        horizon=cell.horizon,
        map_S=S,
        density_p=cell.density.p,
        lipschitz_lambda=lam,
        ref_point=cell.ref_point,
        name=f"cellcycle-{cell.growth.name}",
        box=cell.box,
        separable=cell.density.separable,
        params=params,
    )
