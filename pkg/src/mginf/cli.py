"""Command-line front end: ``mginf validate|eval|moments|busy|simulate|sweep``.

Reports go to stdout (or ``--out``) as JSON or CSV; human-readable messages
go to stderr.  Exit codes: 0 success, 1 failed check or verdict, 2 usage or
parameter error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional, Sequence

import numpy as np

from mginf import battery
from mginf import busy_analytics as ba
from mginf import moments as mo
from mginf import service_law as sl
from mginf import simulator as sim
from mginf.errors import MGInfError, RhoTooLarge
from mginf.service_law import ServiceLawParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    lam: float = 1.0
    rho: float = 1.0
    p: float = 0.0
    beta: Optional[float] = None
    beta_fraction: Optional[float] = None
    cycles: int = 100_000
    replications: int = 8
    seed: int = 42
    renewal_origin: str = sim.IDLE_START
    renewal_t_max: Optional[float] = None
    renewal_points: int = 51
    renewal_replications: Optional[int] = None
    sweep: Optional[dict] = None
    t: Optional[list] = None
    u: Optional[list] = None
    n: int = 1
    method: str = "quadrature"
    eps: float = 1e-10
    m: int = 1024
    tail_tol: float = 1e-12
    grid: bool = False

    _RENEWAL_KEYS = {"origin": "renewal_origin", "t_max": "renewal_t_max",
                     "points": "renewal_points", "replications": "renewal_replications"}

    def to_dict(self) -> dict:
        d = asdict(self)
        out = {"lambda": d.pop("lam")}
        out.update({k: v for k, v in d.items() if not k.startswith("renewal_")})
        out["renewal"] = {k: d[attr] for k, attr in self._RENEWAL_KEYS.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict, source: str = "config") -> "RunConfig":
        if not isinstance(data, dict):
            raise UsageError(f"{source}: top-level JSON value must be an object")
        data = dict(data)
        kwargs: dict[str, Any] = {}
        if "lambda" in data:
            kwargs["lam"] = data.pop("lambda")
        renewal = data.pop("renewal", None) or {}
        if not isinstance(renewal, dict):
            raise UsageError(f"{source}: 'renewal' must be an object")
        for k, v in renewal.items():
            if k not in cls._RENEWAL_KEYS:
                raise UsageError(f"{source}: unknown renewal field {k!r}")
            kwargs[cls._RENEWAL_KEYS[k]] = v
        known = {f.name for f in fields(cls)}
        for k, v in data.items():
            if k not in known or k == "lam":
                raise UsageError(f"{source}: unknown field {k!r}")
            kwargs[k] = v
        return cls(**kwargs)

    def params(self) -> ServiceLawParams:
        if self.beta is not None and self.beta_fraction is not None:
            raise UsageError("give either beta or beta_fraction, not both")
        if self.beta_fraction is not None:
            return ServiceLawParams.from_fraction(self.lam, self.rho, self.p, self.beta_fraction)
        return sl.validate(self.lam, self.rho, 0.0 if self.beta is None else self.beta, self.p)


# --- output helpers ------------------------------------------------------

def _clean(obj):
    """Make ``obj`` strict-JSON serialisable (NaN/inf become null)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_header(cfg: RunConfig, prm: Optional[ServiceLawParams]) -> dict:
    out = {"config": cfg.to_dict()}
    if prm is not None:
        out["derived"] = prm.to_dict()
    return out


# --- commands ------------------------------------------------------------

def cmd_validate(cfg: RunConfig, args) -> int:
    if cfg.grid:
        points = battery.default_grid(cfg.lam)
        report = _report_header(cfg, None)
    else:
        prm = cfg.params()
        points = [prm]
        report = _report_header(cfg, prm)
    checks = battery.run_battery(points)
    report["n_points"] = len(points)
    report["checks"] = [c.to_dict() for c in checks]
    ok = all(c.status != "fail" for c in checks)
    report["all_pass"] = ok
    _emit(_dumps(report), args.out)
    for c in checks:
        print(f"{c.status:7s} {c.name} max_error={c.max_error:.3e} tol={c.tolerance:.1e}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_eval(cfg: RunConfig, args) -> int:
    prm = cfg.params()
    if cfg.t is None and cfg.u is None:
        raise UsageError("eval needs --t or --u")
    if cfg.t is not None and cfg.u is not None:
        raise UsageError("give --t or --u, not both")
    if cfg.t is not None:
        t = np.asarray(cfg.t, dtype=float)
        g = np.full_like(t, math.nan) if prm.degenerate else sl.pdf(prm, t)
        rows = zip(t, sl.cdf(prm, t), g, sl.survival(prm, t))
        text = _csv(["t", "cdf", "pdf", "survival"], rows)
    else:
        u = np.asarray(cfg.u, dtype=float)
        text = _csv(["u", "quantile"], zip(u, sl.quantile(prm, u)))
    _emit(text, args.out)
    return EXIT_OK


def cmd_moments(cfg: RunConfig, args) -> int:
    prm = cfg.params()
    n = cfg.n
    method = cfg.method
    bounds = None
    if prm.degenerate:
        est = mo.MomentEstimate(n, 0.0, method, 0.0, 0)
    else:
        b = mo.moment_bounds(prm, n)
        bounds = {"lower": b.lower, "upper": b.upper}
        if method == "series":
            try:
                est = mo.moment_series(prm, n, cfg.eps)
            except RhoTooLarge as exc:
                raise UsageError(f"series method requires rho < log 2: {exc}") from exc
        elif method == "grid":
            est = mo.moment_grid(prm, n, cfg.m, cfg.tail_tol)
        elif method == "quadrature":
            est = mo.moment_quadrature(prm, n)
        elif method == "bounds":
            est = mo.moment_bounds_midpoint(prm, n)
        else:
            raise UsageError(f"unknown method {method!r}")
    published_trunc = None
    if not prm.degenerate and prm.rho < mo.LOG2:
        _, m_a, m_b = mo.truncation_length(prm, n, cfg.eps)
        published_trunc = {"M_a": m_a, "M_b": m_b, "M_b_status": "paper-form, unverified"}
    report = _report_header(cfg, prm)
    report.update({
        "n": n,
        "method": method,
        "value": est.value,
        "error_bound": est.error_bound,
        "truncation": est.truncation,
        "bounds": bounds,
        "paper_truncation": published_trunc,
    })
    _emit(_dumps(report), args.out)
    return EXIT_OK


def _busy_report(prm: ServiceLawParams) -> dict:
    pk = ba.peakedness_report(prm)
    law = ba.conjectured_busy_law(prm)
    return {
        "pi": pk.pi,
        "qi": pk.qi,
        "pi_cycle": pk.pi_cycle,
        "qi_cycle": pk.qi_cycle,
        "busy_mean": ba.busy_period_mean(prm),
        "cycle_mean": ba.busy_cycle_mean(prm),
        "conjectured": {"q": law.atom_mass, "mu": law.rate},
    }


def cmd_busy(cfg: RunConfig, args) -> int:
    prm = cfg.params()
    report = _report_header(cfg, prm)
    report.update(_busy_report(prm))
    if prm.degenerate:
        _emit(_dumps(report), args.out if args.format != "csv" else None)
        print("renewal curve undefined at beta = -lambda", file=sys.stderr)
        return EXIT_USAGE
    t_max = cfg.renewal_t_max if cfg.renewal_t_max is not None else 20.0 / prm.a_rate
    curve = ba.renewal_curve(prm, t_max, cfg.renewal_points)
    comparison = ba.renewal_comparison(prm)
    report["renewal"] = comparison
    report["slope_ok"] = comparison["slope_ok"]
    table = _csv(
        ["t", "r_paper", "r_oracle_ordinary", "r_oracle_delayed"],
        zip(curve.t_grid, curve.r_paper, curve.r_oracle_ordinary, curve.r_oracle_delayed),
    )
    if args.format == "csv":
        _emit(table, args.out)
    else:
        _emit(_dumps(report), args.out)
        if args.csv:
            _emit(table, args.csv)
    return EXIT_OK


def _stats_dict(stats: sim.SimStats) -> dict:
    d = asdict(stats)
    return d


def cmd_simulate(cfg: RunConfig, args) -> int:
    prm = cfg.params()
    config = sim.SimConfig(
        params=prm,
        n_cycles=cfg.cycles,
        replications=cfg.replications,
        master_seed=cfg.seed,
        renewal_origin=cfg.renewal_origin,
        renewal_t_max=cfg.renewal_t_max,
        renewal_points=cfg.renewal_points,
        renewal_replications=cfg.renewal_replications,
    )
    batches = sim.simulate_cycles(config, workers=args.workers)
    stats = sim.estimate_stats(batches, prm)
    checks = sim.verdicts(stats, prm)
    report = _report_header(cfg, prm)
    report["stats"] = _stats_dict(stats)
    report["verdicts"] = checks
    table = None
    if cfg.renewal_t_max is not None:
        emp = sim.estimate_renewal_curve(config, workers=args.workers)
        adjudication = sim.renewal_adjudication(emp, prm)
        report["renewal"] = adjudication
        checks.append({
            "name": "renewal_slope_within_2pct",
            "estimate": adjudication["empirical_slope"],
            "target": adjudication["target_slope"],
            "pass": adjudication["slope_ok"],
        })
        if prm.degenerate:
            nan = np.full_like(emp.t_grid, math.nan)
            curves = (nan, nan, nan)
        else:
            curves = (
                ba.renewal_function_paper(prm, emp.t_grid),
                ba.renewal_oracle(prm, emp.t_grid, ba.ORDINARY),
                ba.renewal_oracle(prm, emp.t_grid, ba.DELAYED),
            )
        table = _csv(
            ["t", "empirical", "se", "r_paper", "r_oracle_ordinary", "r_oracle_delayed"],
            zip(emp.t_grid, emp.mean, emp.se, *curves),
        )
    ok = all(v["pass"] for v in checks)
    report["all_pass"] = ok
    if args.format == "csv":
        if table is None:
            raise UsageError("--format csv needs a renewal curve (--t-max)")
        _emit(table, args.out)
    else:
        _emit(_dumps(report), args.out)
        if args.csv and table is not None:
            _emit(table, args.csv)
    for v in checks:
        print(f"{'pass' if v['pass'] else 'FAIL':4s} {v['name']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


SWEEP_HEADER = (
    ["rho", "p", "beta_fraction", "beta", "pi", "qi", "pi_cycle", "qi_cycle", "busy_mean", "atom"]
    + [f"m{n}_{side}" for n in range(1, 5) for side in ("lower", "upper")]
)


def sweep_rows(lam: float, sweep: dict) -> list[list]:
    for key in ("rho", "p", "beta_fraction"):
        if key not in sweep or not isinstance(sweep[key], list):
            raise UsageError(f"sweep.{key} must be a list")
    rows = []
    for rho, p, frac in itertools.product(sweep["rho"], sweep["p"], sweep["beta_fraction"]):
        prm = ServiceLawParams.from_fraction(lam, rho, p, frac)
        pk = ba.peakedness_report(prm)
        row = [rho, p, frac, prm.beta, pk.pi, pk.qi, pk.pi_cycle, pk.qi_cycle,
               ba.busy_period_mean(prm), prm.atom]
        for n in range(1, 5):
            if prm.degenerate:
                row += [0.0, 0.0]
            else:
                b = mo.moment_bounds(prm, n)
                row += [b.lower, b.upper]
        rows.append(row)
    return rows


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise UsageError("sweep needs a config file with a 'sweep' object")
    if not isinstance(cfg.sweep, dict):
        raise UsageError("'sweep' must be an object")
    _emit(_csv(SWEEP_HEADER, sweep_rows(cfg.lam, cfg.sweep)), args.out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "eval": cmd_eval,
    "moments": cmd_moments,
    "busy": cmd_busy,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


# --- argument parsing ----------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    common.add_argument("--rho", type=float, help="traffic intensity")
    common.add_argument("--p", type=float)
    beta = common.add_mutually_exclusive_group()
    beta.add_argument("--beta", type=float)
    beta.add_argument("--beta-fraction", dest="beta_fraction", type=float,
                      help="beta as a fraction of [-lambda, beta_max]")
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="mginf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="run the identity battery")
    p.add_argument("--grid", action="store_true", default=None, help="use the 500-point default grid")

    p = sub.add_parser("eval", parents=[common], help="evaluate cdf/pdf or quantiles (CSV)")
    p.add_argument("--t", type=_float_list, help="comma-separated times")
    p.add_argument("--u", type=_float_list, help="comma-separated probability levels")

    p = sub.add_parser("moments", parents=[common], help="compute E[T^n]")
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=("series", "grid", "quadrature", "bounds"))
    p.add_argument("--eps", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--tail-tol", dest="tail_tol", type=float)

    p = sub.add_parser("busy", parents=[common], help="peakedness and renewal function")
    p.add_argument("--t-max", dest="renewal_t_max", type=float)
    p.add_argument("--points", dest="renewal_points", type=int)
    p.add_argument("--csv", help="also write the renewal CSV here")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo campaign")
    p.add_argument("--cycles", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--renewal-origin", dest="renewal_origin", choices=sim.ORIGINS)
    p.add_argument("--t-max", dest="renewal_t_max", type=float)
    p.add_argument("--points", dest="renewal_points", type=int)
    p.add_argument("--renewal-replications", dest="renewal_replications", type=int)
    p.add_argument("--workers", type=int, default=1, help="worker processes (does not change results)")
    p.add_argument("--csv", help="also write the renewal CSV here")

    sub.add_parser("sweep", parents=[common], help="Cartesian parameter sweep (CSV)")
    return parser


_NOT_CONFIG = {"command", "config", "out", "format", "csv", "workers"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: malformed JSON: {exc}") from exc
        except OSError as exc:
            raise UsageError(f"{args.config}: {exc}") from exc
    cfg = RunConfig.from_dict(base, source=args.config or "config")
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        setattr(cfg, key, value)
    if args.beta is not None:
        cfg.beta_fraction = None
    if args.beta_fraction is not None:
        cfg.beta = None
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, MGInfError, ValueError, TypeError) as exc:
        print(f"mginf {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
