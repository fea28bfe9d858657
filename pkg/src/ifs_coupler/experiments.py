"""Distance-versus-generation experiments shared by the CLI and the certificate check."""

import math

import numpy as np

from . import streams
from .errors import RateFitError
from .kernel import Ensemble, evolve
from .metrics import EmpiricalMeasure, bounded_lipschitz, fit_rate, wasserstein1_1d

FM_ATOMS_1D = 256
FM_ATOMS_ND = 96


def noise_floor(chains):
    return 2.0 / math.sqrt(chains)


def distance_curve(model, start_x, start_y, n_max, seed, threads=None, fm_atoms=None):
    """Distances between two ensembles pushed with common random numbers, n = 0..n_max.

    Each row has ``W1`` (exact, one-dimensional models only; NaN otherwise),
    ``FM`` (exact bounded-Lipschitz distance of the first ``fm_atoms`` points
    of each ensemble) and ``stderr``, the standard error of the mean paired
    distance ``rho(x_i, y_i)``, which upper-bounds W1 under the pairing.
    """
    start_x = model.states(start_x)
    start_y = model.states(start_y)
    if len(start_x) != len(start_y):
        raise ValueError("ensembles must have equal size for common random numbers")
    if fm_atoms is None:
        fm_atoms = FM_ATOMS_1D if model.dim == 1 else FM_ATOMS_ND
    chains = len(start_x)
    gx = evolve(model, Ensemble(start_x), n_max, seed, threads)
    gy = evolve(model, Ensemble(start_y), n_max, seed, threads)
    rows = []
    for n, (ex, ey) in enumerate(zip(gx, gy)):
        px, py = ex.points, ey.points
        w1 = math.nan
        if model.dim == 1:
            w1 = wasserstein1_1d(EmpiricalMeasure.from_points(px), EmpiricalMeasure.from_points(py))
        k = min(fm_atoms, chains)
        fm = bounded_lipschitz(
            EmpiricalMeasure.from_points(px[:k]),
            EmpiricalMeasure.from_points(py[:k]),
            metric=None if model.metric.__name__ == "euclidean" else model.metric,
        )
        paired = model.metric(px, py)
        se = float(np.std(paired) / math.sqrt(chains))
        both = np.concatenate([px, py])
        diam = float(np.linalg.norm(both.max(axis=0) - both.min(axis=0)))
        rows.append({"n": n, "W1": w1, "FM": fm, "stderr": se, "paired_mean": float(paired.mean()),
                     "diameter_bound": diam})
    return rows


def metric_regime(curve):
    """W1 and FM agree once the joint support has diameter below 2 (shift f to fit in [-1, 1]).

    The bound is the bounding-box diagonal, exact in one dimension.
    """
    first = next((r["n"] for r in curve if r["diameter_bound"] < 2.0), None)
    return {"diameter_bound": [r["diameter_bound"] for r in curve], "w1_equals_fm_from_n": first}


def curve_values(curve):
    key = "W1" if all(math.isfinite(r["W1"]) for r in curve) else "FM"
    return key, [(r["n"], r[key]) for r in curve]


def fit_curve(curve, chains, window=None):
    """Fit the rate to a distance curve; returns ``(fit, flag)`` with exactly one of them None."""
    _, values = curve_values(curve)
    floor = noise_floor(chains)
    if window is None:
        window = (1, max(r["n"] for r in curve))
    try:
        return fit_rate(values, window=window, noise_floor=floor), None
    except RateFitError as exc:
        early = [v for n, v in values if 1 <= n < 3]
        if early and min(early) <= floor:
            return None, "contraction too fast to fit"
        return None, str(exc)


def stationary_standin(model, start, chains, burn_in, seed, threads=None):
    """Long burn-in ensemble standing in for the invariant measure."""
    pts = np.tile(model.state(start), (chains, 1))
    ens = Ensemble(pts)
    for ens in evolve(model, ens, burn_in, seed, threads, purpose=streams.BURN_IN):
        pass
    return ens.points


def converge(model, initial_points, n_max, burn_in, seed, threads=None, stationary_start=None):
    """Distance curve of ``P^n mu`` against the burn-in stand-in for ``mu_*``.

    ``initial_points=None`` starts from the stand-in itself.
    """
    chains = len(initial_points) if initial_points is not None else None
    if chains is None:
        raise ValueError("initial_points required")
    start = model.ref_point if stationary_start is None else stationary_start
    mu_star = stationary_standin(model, start, chains, burn_in, seed, threads)
    curve = distance_curve(model, initial_points, mu_star, n_max, seed, threads)
    fit, flag = fit_curve(curve, chains)
    return {"curve": curve, "fit": fit, "flag": flag, "noise_floor": noise_floor(chains), "mu_star": mu_star}
