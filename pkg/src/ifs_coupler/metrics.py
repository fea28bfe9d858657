"""Distances between empirical measures and exponential-rate fitting."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import RateFitError, SupportCapError

SUPPORT_CAP = 512


@dataclass(frozen=True)
class EmpiricalMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(weights) != len(atoms):
            raise ValueError("atoms and weights differ in length")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=float)
        n = len(points)
        return cls(points, np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, atoms, weights):
        """Normalize arbitrary positive weights."""
        weights = np.asarray(weights, dtype=float)
        return cls(atoms, weights / weights.sum())

    @property
    def dim(self):
        return self.atoms.shape[1]


def wasserstein1_1d(mu, nu):
    """Exact W1 on the line: the integral of ``|F_mu - F_nu|`` over merged atoms."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("wasserstein1_1d needs one-dimensional measures")
    z = np.concatenate([mu.atoms[:, 0], nu.atoms[:, 0]])
    w = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(z, kind="stable")
    z = z[order]
    diff = np.cumsum(w[order])[:-1]
    return float(np.sum(np.abs(diff) * np.diff(z)))


def _signed_support(mu, nu):
    z = np.concatenate([mu.atoms, nu.atoms])
    support, inverse = np.unique(z, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    # accumulate each side separately so identical measures cancel exactly
    pos = np.zeros(len(support))
    neg = np.zeros(len(support))
    np.add.at(pos, inverse[: len(mu.weights)], mu.weights)
    np.add.at(neg, inverse[len(mu.weights):], nu.weights)
    return support, pos - neg


def bounded_lipschitz(mu, nu, metric=None, cap=SUPPORT_CAP):
    """Fortet-Mourier distance ``sup { <f, mu - nu> : |f| <= 1, f 1-Lipschitz }``.

    Solved exactly as an LP over the merged support (Lipschitz extension from
    a finite set is free).  With the Euclidean metric in one dimension only
    adjacent atoms need constraints; otherwise all pairs are constrained.
    """
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    support, signed = _signed_support(mu, nu)
    n = len(support)
    if n > cap:
        raise SupportCapError(f"combined support {n} exceeds cap {cap}; subsample the measures first")
    if not np.any(signed):
        return 0.0
    if metric is None and mu.dim == 1:
        gaps = np.diff(support[:, 0])
        i = np.arange(n - 1)
        rows = np.concatenate([i, i, i + n - 1, i + n - 1])
        cols = np.concatenate([i + 1, i, i + 1, i])
        vals = np.concatenate([np.ones(n - 1), -np.ones(n - 1), -np.ones(n - 1), np.ones(n - 1)])
        b = np.concatenate([gaps, gaps])
    else:
        if metric is None:
            dist = np.linalg.norm(support[:, None, :] - support[None, :, :], axis=-1)
        else:
            dist = metric(support[:, None, :], support[None, :, :])
        i, j = np.triu_indices(n, 1)
        m = len(i)
        r = np.arange(m)
        rows = np.concatenate([r, r, r + m, r + m])
        cols = np.concatenate([i, j, i, j])
        vals = np.concatenate([np.ones(m), -np.ones(m), -np.ones(m), np.ones(m)])
        b = np.concatenate([dist[i, j], dist[i, j]])
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(b), n))
    res = linprog(-signed, A_ub=A, b_ub=b, bounds=(-1.0, 1.0), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(max(0.0, -res.fun))


def v_moment(mu, ref, metric=None):
    """``sum_i w_i rho(atom_i, ref)``."""
    ref = np.asarray(ref, dtype=float).reshape(1, -1)
    if metric is None:
        d = np.linalg.norm(mu.atoms - ref, axis=1)
    else:
        d = metric(mu.atoms, ref)
    return float(np.dot(mu.weights, d))


@dataclass(frozen=True)
class RateFit:
    C_hat: float
    q_hat: float
    r_squared: float
    n_range: tuple
    n_points: int
    slope_stderr: float

    def q_interval(self, z=2.0):
        """Approximate ``z``-sigma interval for ``q_hat`` from the slope standard error."""
        return math.exp(math.log(self.q_hat) - z * self.slope_stderr), math.exp(
            math.log(self.q_hat) + z * self.slope_stderr
        )

    def to_dict(self):
        return {
            "C_hat": self.C_hat,
            "q_hat": self.q_hat,
            "r_squared": self.r_squared,
            "n_range": list(self.n_range),
            "n_points": self.n_points,
            "slope_stderr": self.slope_stderr,
        }


def fit_rate(distances, window=None, noise_floor=0.0):
    """Least-squares fit of ``log value = log C + n log q``.

    ``distances`` is a sequence of ``(n, value)``; ``window`` an inclusive
    ``(n_min, n_max)``.  Values at or below ``noise_floor`` are excluded.
    """
    pts = np.asarray(list(distances), dtype=float).reshape(-1, 2)
    n, v = pts[:, 0], pts[:, 1]
    keep = np.isfinite(v) & (v > 0) & (v > noise_floor)
    if window is not None:
        keep &= (n >= window[0]) & (n <= window[1])
    n, v = n[keep], v[keep]
    if len(n) < 3:
        raise RateFitError(f"need at least 3 usable points above the noise floor, got {len(n)}")
    X = np.stack([np.ones_like(n), n], axis=1)
    y = np.log(v)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    dof = len(n) - 2
    sxx = float(np.sum((n - n.mean()) ** 2))
    stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 else 0.0
    q_hat = math.exp(coef[1])
    if not q_hat < 1.0 - 1e-12:
        raise RateFitError(f"non-contractive fit: q_hat = {q_hat:.6g} >= 1")
    return RateFit(
        C_hat=math.exp(coef[0]),
        q_hat=q_hat,
        r_squared=r2,
        n_range=(int(n.min()), int(n.max())),
        n_points=int(len(n)),
        slope_stderr=stderr,
    )
