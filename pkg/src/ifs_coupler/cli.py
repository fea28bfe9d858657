"""Command-line experiment driver.

Each run reads one JSON config, writes CSV/JSON artifacts into ``--out`` and
echoes the fully materialized config into its JSON output.  Exit codes: 0
success, 1 usage or config error, 2 assumption-audit failure.
"""

import argparse
from dataclasses import asdict, dataclass, field, fields
import json
from pathlib import Path
import sys
from typing import Optional

import numpy as np

from . import certificate as cert_mod
from . import coupling, experiments, export, families, kernel
from .errors import AuditError, CertificateError, ConfigError, IFSCouplerError
from .model import audit_assumptions

EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2

DEFAULT_CELL_MODEL = {"family": "cellcycle", "law": "linear", "k": 0.3, "alpha": 0.0, "T": 1.0, "rk4_steps": 64}

# per-command defaults for fields left unset in the config
COMMAND_DEFAULTS = {
    "audit": {},
    "converge": {"chains": 10000, "n_max": 15, "burn_in": 200},
    "couple": {"chains": 1000, "horizon": 50},
    "certify": {},
    "cellcycle-demo": {"chains": 2000, "n_max": 15},
}


@dataclass
class ExperimentConfig:
    model: object
    seed: int
    chains: Optional[int] = None
    horizon: Optional[int] = None
    n_max: Optional[int] = None
    burn_in: Optional[int] = None
    eps: Optional[float] = None
    a_tilde: Optional[float] = None
    gamma_exp: float = 0.5
    initial: dict = field(default_factory=lambda: {"type": "dirac"})
    pairs: Optional[list] = None
    audit_states: int = 256
    audit_pairs: int = 256
    audit_panels: int = 1024
    fit: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        for name in ("chains", "horizon", "n_max"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{name} must be an integer >= 1")
        if self.burn_in is not None and (not isinstance(self.burn_in, int) or self.burn_in < 0):
            raise ConfigError("burn_in must be an integer >= 0")

    @classmethod
    def from_doc(cls, doc, seed=None, command=None, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        doc = dict(doc)
        if seed is not None:
            doc["seed"] = seed
        if "seed" not in doc:
            raise ConfigError("a seed is required (--seed or 'seed' in the config)")
        if "model" not in doc:
            if command == "cellcycle-demo":
                doc["model"] = dict(DEFAULT_CELL_MODEL)
            else:
                raise ConfigError("config has no 'model'")
        if isinstance(doc["model"], str):
            path = Path(base_dir) / doc["model"]
            try:
                doc["model"] = json.loads(path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError(f"cannot read model file {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"model file {path} is not valid JSON: {exc}") from exc
        for k, v in COMMAND_DEFAULTS.get(command, {}).items():
            if doc.get(k) is None:
                doc[k] = v
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="ifs-coupler", description="Coupling, rate certificates and convergence experiments for IFS Markov operators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("audit", "estimate the drift and density constants and check the assumptions"),
        ("converge", "distance curve of P^n mu against a burn-in stand-in for mu_*, plus a rate fit"),
        ("couple", "coupled pair ensembles: theta frequencies, coupling and hitting times"),
        ("certify", "explicit rate certificate and (eps, a_tilde) sensitivity grid"),
        ("cellcycle-demo", "cell-cycle model: audit, certificate and empirical decay"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, required=(name != "cellcycle-demo"), help="JSON config document")
        s.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        s.add_argument("--threads", type=int, default=None, help="worker threads (default $IFS_COUPLER_THREADS or 1)")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "certify":
            s.add_argument("--fit", type=Path, default=None, help="RateFit JSON from converge to compare against")
    return p


def _load_config(args):
    doc = {}
    base = Path(".")
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        base = args.config.parent
    if getattr(args, "fit", None) is not None:
        doc = {**doc, "fit": str(args.fit)}
    return ExperimentConfig.from_doc(doc, seed=args.seed, command=args.command, base_dir=base)


def _audit(model, cfg):
    return audit_assumptions(model, n_state_samples=cfg.audit_states, n_time_panels=cfg.audit_panels,
                             pair_samples=cfg.audit_pairs, seed=cfg.seed)


def _audit_failure(audit, out, stem, cfg):
    export.write_json(out / f"{stem}.json", {"config": cfg.to_dict(), "audit": audit.to_dict(),
                                             "error": f"assumption audit failed: {', '.join(audit.failing())}"})
    print(f"assumption audit failed: ({', '.join(audit.failing())})", file=sys.stderr)
    return EXIT_AUDIT


def cmd_audit(cfg, out, threads):
    model = families.model_from_dict(cfg.model)
    audit = _audit(model, cfg)
    export.write_json(out / "audit.json", {"config": cfg.to_dict(), "audit": audit.to_dict()})
    status = "pass" if audit.all_pass else f"FAIL ({', '.join(audit.failing())})"
    print(f"audit {model.name}: a={audit.a_hat:.6g} c={audit.c_tilde:.6g} c_bar={audit.c_bar:.6g} "
          f"delta={audit.delta:.6g} M={audit.m_sup:.6g} -> {status}")
    return EXIT_OK if audit.all_pass else EXIT_AUDIT


def _initial_points(model, cfg):
    init = dict(cfg.initial or {"type": "dirac"})
    kind = init.get("type", "dirac")
    n = cfg.chains
    if kind == "dirac":
        x = init.get("x", np.asarray(model.box[1], dtype=float).tolist())
        init["x"] = np.asarray(model.state(x)).tolist()
        return np.tile(model.state(x), (n, 1)), init
    if kind == "csv":
        if "path" not in init:
            raise ConfigError("initial type 'csv' needs a 'path'")
        try:
            pts = export.read_ensemble(init["path"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load initial ensemble: {exc}") from exc
        if pts.shape[1] != model.dim:
            raise ConfigError(f"initial ensemble has dimension {pts.shape[1]}, model has {model.dim}")
        # the ensemble is cycled (or truncated) to the configured chain count
        return pts[np.arange(n) % len(pts)], init
    if kind == "stationary":
        return None, init
    raise ConfigError(f"unknown initial measure type {kind!r}")


def cmd_converge(cfg, out, threads):
    model = families.model_from_dict(cfg.model)
    audit = _audit(model, cfg)
    if not audit.all_pass:
        return _audit_failure(audit, out, "ratefit", cfg)
    pts, init = _initial_points(model, cfg)
    mu_star = experiments.stationary_standin(model, model.ref_point, cfg.chains, cfg.burn_in, cfg.seed, threads)
    if pts is None:
        pts = mu_star.copy()
    curve = experiments.distance_curve(model, pts, mu_star, cfg.n_max, cfg.seed, threads)
    fit, flag = experiments.fit_curve(curve, cfg.chains)
    key, _ = experiments.curve_values(curve)
    export.write_curve(out / "curve.csv", curve)
    report = {
        "config": {**cfg.to_dict(), "initial": init},
        "distance": key,
        "metric_regime": experiments.metric_regime(curve),
        "noise_floor": experiments.noise_floor(cfg.chains),
        "fit": fit.to_dict() if fit else None,
        "q_interval": list(fit.q_interval()) if fit else None,
        "flag": flag,
        "audit": audit.to_dict(),
    }
    export.write_json(out / "ratefit.json", report)
    if fit:
        print(f"converge {model.name}: q_hat={fit.q_hat:.6g} C_hat={fit.C_hat:.6g} R2={fit.r_squared:.4f}")
    else:
        print(f"converge {model.name}: fit flagged: {flag}")
    return EXIT_OK


def _histogram(values):
    vals, counts = np.unique(np.asarray(values), return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(vals, counts)}


def cmd_couple(cfg, out, threads):
    model = families.model_from_dict(cfg.model)
    audit = _audit(model, cfg)
    if not audit.all_pass:
        return _audit_failure(audit, out, "couple", cfg)
    a, c = audit.a_hat, audit.c_tilde
    eps = (1.0 - a) / 2.0 if cfg.eps is None else float(cfg.eps)
    if not 0.0 < eps < 1.0 - a:
        raise ConfigError(f"eps = {eps} must lie in (0, 1 - a) = (0, {1.0 - a:.6g})")
    pairs = cfg.pairs
    if pairs is None:
        pairs = [[np.asarray(model.box[0]).tolist(), np.asarray(model.box[1]).tolist()]]
    results = []
    for i, (x0, y0) in enumerate(pairs):
        x0, y0 = model.state(x0), model.state(y0)
        run = coupling.run_coupled_ensemble(model, x0, y0, cfg.chains, cfg.horizon, eps, c, cfg.seed + i,
                                            threads, a=a)
        theta_freq = run.thetas.mean(axis=0)
        mean_kappa = run.kappas.mean(axis=0)
        export.write_coupling_steps(out / f"couple_steps_{i}.csv", theta_freq, mean_kappa)
        path = coupling.AugmentedTrajectory(run.first_path, run.thetas[0], int(run.tau_hat[0]),
                                            bool(run.censored[0]), None, cfg.seed + i)
        export.write_augmented(out / f"augmented_{i}.csv", path)
        results.append({
            "x0": x0.tolist(),
            "y0": y0.tolist(),
            "theta_frequency_overall": float(theta_freq.mean()),
            "mean_overlap_mass": float(mean_kappa.mean()),
            "tau_hat_histogram": _histogram(run.tau_hat[~run.censored]),
            "censored": int(run.censored.sum()),
            "censoring_rate": float(run.censored.mean()),
            "d_hat_histogram": _histogram(run.d_hat[run.d_hat > 0]),
            "never_hit": int((run.d_hat < 0).sum()),
            "small_set_level": 2.0 * c / eps,
        })
    export.write_json(out / "couple.json", {"config": {**cfg.to_dict(), "eps": eps, "pairs": [[r["x0"], r["y0"]] for r in results]},
                                            "pairs": results, "audit": audit.to_dict()})
    for r in results:
        print(f"couple {r['x0']} {r['y0']}: theta=1 freq {r['theta_frequency_overall']:.4f}, "
              f"censoring {r['censoring_rate']:.4f}")
    return EXIT_OK


def cmd_certify(cfg, out, threads):
    model = families.model_from_dict(cfg.model)
    audit = _audit(model, cfg)
    if not audit.all_pass:
        return _audit_failure(audit, out, "certificate", cfg)
    try:
        cert = cert_mod.build_certificate(audit, cfg.eps, cfg.a_tilde, cfg.gamma_exp)
    except CertificateError as exc:
        export.write_json(out / "certificate.json", {"config": cfg.to_dict(), "audit": audit.to_dict(),
                                                     "error": str(exc)})
        print(f"no certificate: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    grid = cert_mod.sensitivity_grid(audit, gamma_exp=cfg.gamma_exp)
    export.write_sensitivity(out / "sensitivity.csv", grid)
    report = {"config": {**cfg.to_dict(), "eps": cert.eps, "a_tilde": cert.a_tilde},
              "certificate": cert.to_dict(), "audit": audit.to_dict(),
              "invariant_V_moment_bound": cert_mod.invariant_moment_bound(cert)}
    if cfg.fit:
        try:
            doc = json.loads(Path(cfg.fit).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read fit file {cfg.fit}: {exc}") from exc
        fit = doc.get("fit", doc)
        q_hat = None if fit is None else fit.get("q_hat")
        report["comparison"] = {"q_hat": q_hat, "q": cert.q,
                                "q_hat_within_certificate": None if q_hat is None else bool(q_hat <= cert.q + 0.02)}
    export.write_json(out / "certificate.json", report)
    text = cert_mod.format_certificate(cert)
    (out / "certificate.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_cellcycle_demo(cfg, out, threads):
    if cfg.model.get("family") != "cellcycle":
        raise ConfigError("cellcycle-demo needs a model with family 'cellcycle'")
    model = families.model_from_dict(cfg.model)
    audit = _audit(model, cfg)
    if not audit.all_pass:
        return _audit_failure(audit, out, "cellcycle_demo", cfg)
    try:
        cert = cert_mod.build_certificate(audit, cfg.eps, cfg.a_tilde, cfg.gamma_exp)
    except CertificateError as exc:
        export.write_json(out / "cellcycle_demo.json", {"config": cfg.to_dict(), "audit": audit.to_dict(),
                                                        "error": str(exc)})
        print(f"no certificate: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    lo, hi = model.box
    comp = cert_mod.empirical_vs_certificate(model, cert, lo, hi, cfg.n_max, cfg.chains, cfg.seed, threads)
    export.write_curve(out / "cellcycle_curve.csv", comp["rows"])
    export.write_trajectory(out / "cellcycle_trajectory.csv", kernel.simulate(model, hi, cfg.n_max, cfg.seed))
    export.write_json(out / "cellcycle_demo.json", {
        "config": {**cfg.to_dict(), "eps": cert.eps, "a_tilde": cert.a_tilde},
        "audit": audit.to_dict(), "certificate": cert.to_dict(), "comparison": comp})
    qh = comp["q_hat"]
    print(f"cellcycle-demo: a={audit.a_hat:.6g} q={cert.q:.6g} q_hat={'n/a' if qh is None else f'{qh:.6g}'}"
          + (f" ({comp['flag']})" if comp["flag"] else ""))
    return EXIT_OK


COMMANDS = {
    "audit": cmd_audit,
    "converge": cmd_converge,
    "couple": cmd_couple,
    "certify": cmd_certify,
    "cellcycle-demo": cmd_cellcycle_demo,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = _load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except IFSCouplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
