"""Command-line front end: ``fpspec kappa``, ``fpspec scan`` and ``fpspec selftest``.

Output is written to ``--out`` (stdout by default). Exit status: 0 on success,
2 when the configuration is rejected, 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import AdmissibilityError, NumericalError, Tolerances, check_beta, make_params

log = logging.getLogger("fpspec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_ENV = "FPSPEC_CONFIG"
CONFIG_KEYS = ("beta", "eta", "eta_min", "eta_max", "points", "out", "format", "jobs", "tol",
               "check_scan", "seed")
SCAN_COLUMNS = ("eta", "re_mu", "im_mu", "oracle_re_mu", "oracle_im_mu", "rel_gap", "b_residual",
                "status")
# eta range used by ``kappa --check-scan`` and as the scan default
DEFAULT_ETA_MAX = 1e-2
DEFAULT_ETA_MIN = 1e-4
DEFAULT_POINTS = 10


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    beta: float = 3.0
    eta: list[float] | None = None
    eta_min: float = DEFAULT_ETA_MIN
    eta_max: float = DEFAULT_ETA_MAX
    points: int = DEFAULT_POINTS
    out: str | None = None
    format: str | None = None
    jobs: int = 1
    tol: float | None = None
    check_scan: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        check_beta(self.beta)
        if self.format not in (None, "csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.tol is not None and not 1e-14 <= self.tol <= 1e-4:
            raise ConfigError("--tol must lie in [1e-14, 1e-4]")
        if self.eta is not None:
            if len(self.eta) == 0:
                raise ConfigError("empty eta list")
            if any(not math.isfinite(e) for e in self.eta):
                raise ConfigError("eta values must be finite")
        elif self.command == "scan" or self.check_scan:
            if self.points < 1:
                raise ConfigError("empty eta list (--points must be positive)")
            if not 0 < self.eta_min <= self.eta_max:
                raise ConfigError("need 0 < eta_min <= eta_max")

    def etas(self) -> list[float]:
        if self.eta is not None:
            return list(self.eta)
        if self.points == 1:
            return [self.eta_max]
        return [float(e) for e in np.logspace(math.log10(self.eta_max), math.log10(self.eta_min),
                                              self.points)]

    def params(self):
        tol = Tolerances() if self.tol is None else Tolerances(root_rtol=self.tol)
        return make_params(self.beta, tol=tol)


def load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "eta" in data and not isinstance(data["eta"], list):
        data["eta"] = [data["eta"]]
    return data


def _eta_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eta list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--beta", type=float)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--tol", type=float, help="relative tolerance of the eigenvalue root")
    common.add_argument("--jobs", type=int, help="worker processes for the eta scan")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    eta = argparse.ArgumentParser(add_help=False)
    eta.add_argument("--eta", type=_eta_list,
                     help="comma-separated eta values, negatives allowed: --eta=1e-3,-1e-3")
    eta.add_argument("--eta-min", type=float)
    eta.add_argument("--eta-max", type=float)
    eta.add_argument("--points", type=int)

    parser = argparse.ArgumentParser(prog="fpspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    k = sub.add_parser("kappa", parents=[common, eta], help="diffusion coefficient from H0")
    k.add_argument("--check-scan", action="store_true", default=None,
                   help="cross-check against a fit of mu(eta) over the eta range")
    sub.add_parser("scan", parents=[common, eta], help="mu(eta) table with the oracle column")
    sub.add_parser("selftest", parents=[common], help="cross-module invariants")
    return parser


def make_config(argv=None, environ=None) -> RunConfig:
    """Parse argv on top of the JSON file named by FPSPEC_CONFIG (flags win)."""
    environ = os.environ if environ is None else environ
    parser = build_parser()
    ns = parser.parse_args(argv)
    values: dict = {}
    path = environ.get(CONFIG_ENV)
    if path:
        values.update(load_config_file(path))
    for key in CONFIG_KEYS:
        got = getattr(ns, key, None)
        if got is not None:
            values[key] = got
    cfg = RunConfig(ns.command, **values)
    cfg.extra["verbose"] = ns.verbose
    cfg.validate()
    return cfg


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return "%.17g" % float(x)


def _write(text: str, cfg: RunConfig) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _json_safe(obj.real), "im": _json_safe(obj.imag)}
    return obj


def _dump_json(payload: dict) -> str:
    return json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n"


def run_scan(cfg: RunConfig):
    """Rows for each requested eta (input order) plus the power-law fit of the positive ones.

    Negative eta is answered by conjugation from |eta|, eta = 0 by the trivial couple.
    """
    from .eigen import fit_power, scan

    params = cfg.params()
    etas = cfg.etas()
    magnitudes = sorted({abs(e) for e in etas if e != 0}, reverse=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = scan(magnitudes, params, with_oracle=True, jobs=cfg.jobs) if magnitudes else None
    by_eta = {r.eta: r for r in res.results} if res else {}
    errors = res.errors if res else {}
    rows = []
    for e in etas:
        if e == 0:
            rows.append({"eta": 0.0, "mu": 0j, "oracle": None, "rel_gap": None,
                         "b_residual": 0.0, "status": "ok"})
            continue
        r = by_eta.get(abs(e))
        if r is None:
            msg = errors.get(abs(e), "not computed")
            rows.append({"eta": e, "mu": None, "oracle": None, "rel_gap": None,
                         "b_residual": None, "status": "failed: " + msg.replace("\n", " ")})
            continue
        mu, orc = r.mu, r.oracle_mu
        if e < 0:
            mu = mu.conjugate()
            orc = None if orc is None else orc.conjugate()
        rows.append({"eta": e, "mu": mu, "oracle": orc, "rel_gap": r.rel_gap,
                     "b_residual": r.b_residual, "status": "ok"})
    fit_slope = fit_kappa = math.nan
    if res and len(res.results) >= 2:
        fit_slope, icpt = fit_power([r.eta for r in res.results], [r.mu for r in res.results])
        fit_kappa = math.exp(icpt)
    return rows, fit_slope, fit_kappa


def format_scan(rows, fit_slope, fit_kappa, fmt: str) -> str:
    if fmt == "json":
        payload = {"columns": list(SCAN_COLUMNS), "fit_slope": fit_slope, "fit_kappa": fit_kappa,
                   "rows": [_scan_record(r) for r in rows]}
        return _dump_json(payload)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for r in rows:
        rec = _scan_record(r)
        w.writerow([rec[c] if c == "status" else _fmt(rec[c]) for c in SCAN_COLUMNS])
    w.writerow(["fit_slope", _fmt(fit_slope)])
    w.writerow(["fit_kappa", _fmt(fit_kappa)])
    return buf.getvalue()


def _scan_record(r) -> dict:
    mu, orc = r["mu"], r["oracle"]
    return {"eta": r["eta"],
            "re_mu": None if mu is None else mu.real, "im_mu": None if mu is None else mu.imag,
            "oracle_re_mu": None if orc is None else orc.real,
            "oracle_im_mu": None if orc is None else orc.imag,
            "rel_gap": r["rel_gap"], "b_residual": r["b_residual"], "status": r["status"]}


def cmd_scan(cfg: RunConfig) -> int:
    rows, slope, kappa = run_scan(cfg)
    _write(format_scan(rows, slope, kappa, cfg.format or "csv"), cfg)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        log.error("eta=%g %s", r["eta"], r["status"])
    return EXIT_NUMERICAL if failed else EXIT_OK


def run_kappa(cfg: RunConfig) -> dict:
    from .eigen import scan
    from .kappa import kappa_report

    params = cfg.params()
    scan_results = None
    if cfg.check_scan:
        etas = sorted({abs(e) for e in cfg.etas() if e != 0}, reverse=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = scan(etas, params, jobs=cfg.jobs)
        if res.errors:
            raise NumericalError(f"scan failed at eta={sorted(res.errors)}")
        scan_results = res.results
    rep = kappa_report(params, scan_results)
    out = {"beta": params.beta, "gamma": params.gamma, "alpha": params.alpha,
           "c_beta_sq": params.c_beta_sq, "kappa_shoot": rep.kappa_shoot,
           "integral": rep.integral, "segments": rep.segments, "error_estimates": rep.errors}
    if scan_results is not None:
        out.update(kappa_scan=rep.kappa_scan, rel_gap=rep.rel_gap, scan_fit=rep.scan_fit,
                   scan_eta=[r.eta for r in scan_results])
    return out


def cmd_kappa(cfg: RunConfig) -> int:
    report = run_kappa(cfg)
    if (cfg.format or "json") == "json":
        _write(_dump_json(report), cfg)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("key", "value"))
        for key in ("beta", "gamma", "alpha", "c_beta_sq", "kappa_shoot", "integral",
                    "kappa_scan", "rel_gap"):
            if key in report:
                w.writerow((key, _fmt(report[key])))
        _write(buf.getvalue(), cfg)
    return EXIT_OK


# selftest: (name, check) where check returns (value, threshold); pass when value <= threshold

def _check_airy(cfg, params):
    from .airy import WRONSKIAN_AB, RotatedPair

    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for s, lam in zip(rng.uniform(-8, 8, 50), rng.uniform(-0.1, 0.1, 50)):
        worst = max(worst, abs(RotatedPair(lam).wronskian(s) - WRONSKIAN_AB) / WRONSKIAN_AB)
    return worst, 1e-9


def _check_psi_wronskian(cfg, params):
    from .basis0 import build_basis, solve_psi
    from .ode import wronskian

    b = build_basis(solve_psi(params), params, with_companion=False)
    return float(np.abs(wronskian(b.psi1, b.psi2) - 1).max()), 1e-8


def _check_t0(cfg, params):
    from .basis0 import apply_t0, build_basis, solve_psi

    b = build_basis(solve_psi(params), params, with_companion=False)
    return apply_t0(lambda v: np.exp(-v * v), b).meta["residual"], 1e-6


def _check_t_eta(cfg, params):
    from .basis_eta import apply_t_eta, make_basis_eta

    b = make_basis_eta(params, 0.02, 1e-3)
    return apply_t_eta(lambda v: np.exp(-v * v), b).meta["residual"], 1e-6


def _check_conjugation(cfg, params):
    # the oracle discretizes +eta and -eta separately; solve_mu itself conjugates
    from .eigen import oracle_mu

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = oracle_mu(1e-3, params)
        b = oracle_mu(-1e-3, params)
    return abs(a - b.conjugate()) / abs(a), 1e-8


def _check_oracle(cfg, params):
    from .eigen import solve_mu

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = solve_mu(1e-3, params, with_oracle=True)
    return r.rel_gap, 1e-2


def _check_h0(cfg, params):
    from .kappa import h0_defect, solve_h0

    return h0_defect(solve_h0(params)), 1e-6


def _check_kappa(cfg, params):
    from .kappa import compute_kappa, solve_h0

    rep = compute_kappa(solve_h0(params), params)
    # positivity, expressed as value <= threshold
    return -rep.kappa_shoot, 0.0


def _check_fractional(cfg, params):
    from .diffusion import frac_laplacian_fourier, frac_laplacian_pv

    x = np.linspace(-12, 12, 2401)
    pts = np.array([0.0, 0.7, 1.5])
    alpha = params.alpha
    pv = frac_laplacian_pv(lambda y: np.exp(-y * y / 2), x, alpha, points=pts)
    ft = frac_laplacian_fourier(lambda k: math.sqrt(2 * math.pi) * math.exp(-k * k / 2), pts, alpha)
    return float(np.abs(pv - ft).max() / np.abs(ft).max()), 1e-4


SELFTESTS = (
    ("airy wronskian", _check_airy),
    ("psi1/psi2 wronskian", _check_psi_wronskian),
    ("T0 residual", _check_t0),
    ("T_eta residual", _check_t_eta),
    ("conjugation symmetry", _check_conjugation),
    ("finite-difference oracle", _check_oracle),
    ("H0 ODE defect", _check_h0),
    ("kappa positive", _check_kappa),
    ("PV vs Fourier fractional Laplacian", _check_fractional),
)


def run_selftest(cfg: RunConfig) -> list[dict]:
    params = cfg.params()
    rows = []
    for name, check in SELFTESTS:
        t0 = time.perf_counter()
        try:
            value, limit = check(cfg, params)
            ok = bool(value <= limit)
            rows.append({"check": name, "value": float(value), "limit": float(limit),
                         "passed": ok, "seconds": time.perf_counter() - t0})
        except (NumericalError, ValueError) as exc:
            rows.append({"check": name, "value": None, "limit": None, "passed": False,
                         "error": str(exc), "seconds": time.perf_counter() - t0})
    return rows


def cmd_selftest(cfg: RunConfig) -> int:
    rows = run_selftest(cfg)
    if cfg.format == "json":
        # timings are left out so the output stays byte-stable
        _write(_dump_json({"beta": cfg.beta, "checks": [
            {k: v for k, v in r.items() if k != "seconds"} for r in rows]}), cfg)
    else:
        width = max(len(r["check"]) for r in rows)
        lines = [f"{'check':<{width}}  result  value      limit"]
        for r in rows:
            tag = "PASS" if r["passed"] else "FAIL"
            if r["value"] is None:
                lines.append(f"{r['check']:<{width}}  {tag}    error: {r['error']}")
            else:
                lines.append(f"{r['check']:<{width}}  {tag}    {r['value']:.3e}  {r['limit']:.1e}")
        _write("\n".join(lines) + "\n", cfg)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_NUMERICAL


COMMANDS = {"kappa": cmd_kappa, "scan": cmd_scan, "selftest": cmd_selftest}


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except SystemExit as exc:
        # argparse usage errors exit with status 2 already
        return int(exc.code or 0)
    except (AdmissibilityError, ConfigError) as exc:
        print(f"fpspec: configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[cfg.command](cfg)
    except (AdmissibilityError, ConfigError) as exc:
        print(f"fpspec: configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fpspec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
