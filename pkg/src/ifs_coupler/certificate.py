"""Explicit exponential-rate certificate ``||P^n mu - mu_*|| <= C q^n``.

The constant chain, from audited ``a, c, c_bar, delta, M`` and the free
choices ``eps``, ``a_tilde``, ``gamma``:

* small set ``K_eps = {V(x) + V(y) < 2c / eps}`` and contraction radius
  ``r = (1 - a) / (2 c_bar)`` (infinite when ``c_bar = 0``);
* ``n0 = min{n >= 1 : a^n 2c / eps < r}``;
* one-step overlap floor ``gamma_bar = delta (1 - a / a_tilde) / M`` and
  eventual-coupling mass ``s = gamma_bar^n0 / 2``;
* hitting-time moment ``E (a + eps)^(-gamma d) <= C1 Vbar + C2`` with the
  geometric series closed explicitly (see :func:`hitting_moment_constants`);
* ``eta = C1 2c / eps + C2``, ``beta = (a + eps)^gamma``, the least integer
  ``p >= 2`` with ``rho = (eta / (1 - s))^(1/p) (1 - s) < 1``, and
  ``q_tilde = beta^(1/p)``;
* ``q = max(sqrt a, sqrt q_tilde)`` and ``C6 = C5 + 2 C3``.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from .errors import CertificateError
from .model import ASSUMPTIONS

P_MAX = 10**6


@dataclass
class RateCertificate:
    a: float
    c: float
    c_bar: float
    delta: float
    m_sup: float
    eps: float
    gamma_exp: float
    a_tilde: float
    r: float
    n0: int
    gamma_small: float
    gamma_bar: float
    success_mass: float
    series_S: float
    C1: float
    C2: float
    eta: float
    beta: float
    p_holder: int
    rho: float
    q_tilde: float
    q: float
    C3: float
    C4: float
    C5: float
    C6: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def bound(self, n, vbar=0.0):
        """Pairwise bound ``q^n C6 (1 + Vbar)``."""
        return self.q**n * self.C6 * (1.0 + vbar)


def hitting_moment_constants(a, c, eps, gamma):
    """``(S, C1, C2)`` with ``E (a + eps)^(-gamma d) <= C1 Vbar(x0, y0) + C2``.

    Outside ``K_eps`` the drift gives ``P(d > n) <= (a + eps)^n c_hat`` with
    ``c_hat = eps (a Vbar + 2c) / (2c (a + eps))``.  Writing ``B = (a + eps)^(-gamma)``,
    ``E B^d <= B (1 + sum_{n>=1} B^n P(d > n)) <= B (1 + S c_hat)`` where
    ``S = sum_{n>=1} (a + eps)^((1 - gamma) n)``.
    """
    base = a + eps
    ratio = base ** (1.0 - gamma)
    S = ratio / (1.0 - ratio)
    B = base ** (-gamma)
    C1 = B * S * eps * a / (2.0 * c * base)
    C2 = B * (1.0 + S * eps / base)
    return S, C1, C2


def holder_exponent(eta, s):
    """Least integer ``p >= 2`` with ``(eta / (1 - s))^(1/p) (1 - s) < 1``."""
    log_ratio = math.log(eta) - math.log1p(-s)
    log_keep = math.log1p(-s)
    # condition: log_ratio / p + log_keep < 0
    if log_ratio <= 0:
        return 2
    p = P_MAX + 1 if log_keep == 0 else max(2, math.floor(log_ratio / -log_keep) + 1)
    if p > P_MAX:
        raise CertificateError(
            f"no Holder exponent p <= {P_MAX}: eta/(1-s) = {eta / (1 - s):.4g} against "
            f"1-s = {1 - s:.6g}; the limiting factor is the coupling mass s = {s:.3g}"
        )
    while log_ratio / p + log_keep >= 0:
        p += 1
    return p


def build_certificate(audit, eps=None, a_tilde=None, gamma_exp=0.5):
    """Assemble the certificate from an :class:`AssumptionAudit` (or a dict of constants)."""
    if hasattr(audit, "passes"):
        failing = [k for k in ASSUMPTIONS if not audit.passes.get(k, False)]
        if failing:
            raise CertificateError(f"assumption ({', '.join(failing)}) failed; no certificate")
        a, c, c_bar, delta, m_sup = audit.a_hat, audit.c_tilde, audit.c_bar, audit.delta, audit.m_sup
    else:
        a, c, c_bar, delta, m_sup = (float(audit[k]) for k in ("a", "c", "c_bar", "delta", "m_sup"))
    prov = {k: "audited" for k in ("a", "c", "c_bar", "delta", "m_sup")}
    if not 0.0 <= a < 1.0:
        raise CertificateError(f"a = {a} is not in [0, 1)")
    if not c > 0:
        raise CertificateError("drift offset c must be positive (pick a reference point not fixed by S)")
    if not 0 < delta <= m_sup < math.inf:
        raise CertificateError("need 0 < delta <= M < inf")
    if eps is None:
        eps, prov["eps"] = (1.0 - a) / 2.0, "defaulted"
    else:
        prov["eps"] = "supplied"
    if a_tilde is None:
        a_tilde, prov["a_tilde"] = (1.0 + a) / 2.0, "defaulted"
    else:
        prov["a_tilde"] = "supplied"
    prov["gamma_exp"] = "defaulted" if gamma_exp == 0.5 else "supplied"
    if not 0.0 < eps < 1.0 - a:
        raise CertificateError(f"eps must lie in (0, {1 - a})")
    if not a < a_tilde < 1.0:
        raise CertificateError(f"a_tilde must lie in ({a}, 1)")
    if not 0.0 < gamma_exp < 1.0:
        raise CertificateError("gamma_exp must lie in (0, 1)")

    r = math.inf if c_bar == 0 else (1.0 - a) / (2.0 * c_bar)
    n0 = 1
    if math.isfinite(r):
        while a**n0 * 2.0 * c / eps >= r:
            n0 += 1
            if n0 > 10**6:
                raise CertificateError("n0 does not exist below 1e6")
    gamma_small = 1.0 - a / a_tilde
    gamma_bar = delta * gamma_small / m_sup
    s = 0.5 * gamma_bar**n0
    if not s > 0:
        raise CertificateError(f"coupling mass gamma_bar^n0 / 2 underflows (gamma_bar={gamma_bar}, n0={n0})")
    S, C1, C2 = hitting_moment_constants(a, c, eps, gamma_exp)
    eta = C1 * 2.0 * c / eps + C2
    beta = (a + eps) ** gamma_exp
    p = holder_exponent(eta, s)
    rho = (eta / (1.0 - s)) ** (1.0 / p) * (1.0 - s)
    q_tilde = beta ** (1.0 / p)
    # (C1 Vbar + C2)^(1/p) <= max(1 + C2, C1) (1 + Vbar); the series sums to 1 / (1 - rho)
    C3 = max(1.0 + C2, C1) / (1.0 - rho)
    C4 = C3
    C5 = max(math.sqrt(a), 2.0 * c / (1.0 - a))
    C6 = C5 + 2.0 * C4
    q = max(math.sqrt(a), math.sqrt(q_tilde))
    for name in ("r", "n0", "gamma_small", "gamma_bar", "success_mass", "series_S", "C1", "C2", "eta",
                 "beta", "p_holder", "rho", "q_tilde", "q", "C3", "C4", "C5", "C6"):
        prov[name] = "derived"
    return RateCertificate(
        a=a, c=c, c_bar=c_bar, delta=delta, m_sup=m_sup, eps=eps, gamma_exp=gamma_exp, a_tilde=a_tilde,
        r=r, n0=n0, gamma_small=gamma_small, gamma_bar=gamma_bar, success_mass=s, series_S=S,
        C1=C1, C2=C2, eta=eta, beta=beta, p_holder=p, rho=rho, q_tilde=q_tilde, q=q,
        C3=C3, C4=C4, C5=C5, C6=C6, provenance=prov,
    )


def invariant_moment_bound(cert):
    """``<V, mu_*> <= c / (1 - a)`` from iterating the drift inequality."""
    return cert.c / (1.0 - cert.a)


def final_constant(cert, mu_V_moment, mustar_V_moment_bound=None):
    """``C = C6 (1 + <V, mu> + <V, mu_*>)``."""
    if mustar_V_moment_bound is None:
        mustar_V_moment_bound = invariant_moment_bound(cert)
    if not (mu_V_moment >= 0 and mustar_V_moment_bound >= 0):
        raise ValueError("moments must be nonnegative")
    if not (math.isfinite(mu_V_moment) and math.isfinite(mustar_V_moment_bound)):
        raise ValueError("moments must be finite")
    return cert.C6 * (1.0 + mu_V_moment + mustar_V_moment_bound)


def sensitivity_grid(audit, fractions=(0.25, 0.5, 0.75), gamma_exp=0.5):
    """``q`` over ``eps = f (1 - a)`` and ``a_tilde = a + g (1 - a)``, ``f, g`` in ``fractions``."""
    a = audit.a_hat if hasattr(audit, "a_hat") else float(audit["a"])
    rows = []
    for f in fractions:
        for g in fractions:
            eps = f * (1.0 - a)
            at = a + g * (1.0 - a)
            try:
                cert = build_certificate(audit, eps, at, gamma_exp)
                rows.append({"eps": eps, "a_tilde": at, "q": cert.q, "p_holder": cert.p_holder,
                             "n0": cert.n0, "C6": cert.C6, "status": "ok"})
            except CertificateError as exc:
                rows.append({"eps": eps, "a_tilde": at, "q": math.nan, "p_holder": -1,
                             "n0": -1, "C6": math.nan, "status": str(exc)})
    return rows


def format_certificate(cert):
    lines = [f"{'constant':<14}{'value':>24}  source"]
    for name, value in cert.to_dict().items():
        if name == "provenance":
            continue
        src = cert.provenance.get(name, "")
        text = f"{value:.10g}" if isinstance(value, float) else str(value)
        lines.append(f"{name:<14}{text:>24}  {src}")
    return "\n".join(lines)


def empirical_vs_certificate(model, cert, x0, y0, n_max, chains, seed, threads=None):
    """Compare simulated decay from ``delta_x0`` vs ``delta_y0`` with the certificate.

    Both ensembles share their division-time uniforms (common random
    numbers), so the empirical distance isolates the contraction of the
    dynamics.  The coupling-inequality tail term is replaced by the
    observed frequency of ``{tau > n/2}`` in a batch of coupled chains.
    """
    from .coupling import run_coupled_ensemble, v_bar
    from .experiments import distance_curve, fit_curve

    if chains < 1000:
        raise ValueError("chains must be >= 1000")
    x0 = model.state(x0)
    y0 = model.state(y0)
    start_x = np.tile(x0, (chains, 1))
    start_y = np.tile(y0, (chains, 1))
    curve = distance_curve(model, start_x, start_y, n_max, seed, threads)
    fit, flag = fit_curve(curve, chains)
    vb = float(v_bar(model, x0, y0))
    run = run_coupled_ensemble(model, x0, y0, chains, max(2 * n_max, 10), cert.eps, cert.c,
                               seed, threads)
    a, c = cert.a, cert.c
    rows = []
    for row in curve:
        n = row["n"]
        dist = row["FM"] if math.isfinite(row["FM"]) else row["W1"]
        tail = run.tail_frequency(n)
        ineq = a ** (n / 2) * (a ** (n / 2) * vb + 2 * c / (1 - a)) + 2 * tail
        rows.append({"n": n, "W1": row["W1"], "FM": row["FM"], "stderr": row["stderr"],
                     "tail_frequency": tail, "coupling_bound": ineq, "slack": ineq - dist,
                     "certified_bound": cert.bound(n, vb)})
    report = {
        "q": cert.q,
        "q_hat": fit.q_hat if fit else None,
        "fit": fit.to_dict() if fit else None,
        "flag": flag,
        "q_hat_within_certificate": bool(fit is not None and fit.q_hat <= cert.q + 0.02),
        "censoring_rate": float(run.censored.mean()),
        "vbar_start": vb,
        "rows": rows,
    }
    return report
