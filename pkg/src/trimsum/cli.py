"""Command-line surface: config ingestion, runs, persistence, intervals.

Six subcommands: simulate (Monte Carlo distances), rates (log-log fits
over a finished run), audit (condition verdicts), ustat-check (projection
remainder diagnostics), bahadur (quantile linearization decay), and ci
(real-data confidence intervals).  Every run directory receives the
resolved config.json, a fixed-schema results.csv, and report.json.

Exit codes: 0 success; 1 usage or config problems (including unreadable
inputs); 2 audit runs whose report contains a fail verdict; 3 numerical
or statistical failures.  Errors are also emitted as one-line JSON
diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np
from scipy.special import ndtri

from . import conditions, dist, edgeworth, mc, orderstat, trim, ustat
from ._backend import BACKEND
from .errors import (ConfigError, DegenerateScaleError, IngestionError,
                     ScheduleError, TrimsumError)

_TARGET_CHOICES = ("normal", "gn", "hn")
# Config problems and unreadable inputs; everything else Trimsum maps to 3.
_USAGE_ERRORS = (ConfigError, IngestionError, ScheduleError)

_SIMULATE_HEADER = ["n", "k", "m", "alpha", "beta", "statistic",
                    "replications", "flagged", "d_normal", "d_gn", "d_hn"]
_RATES_HEADER = ["target", "points", "slope", "intercept", "r_squared", "stderr"]
_AUDIT_HEADER = ["condition", "verdict", "detail"]
_USTAT_HEADER = ["n", "k", "m", "correlation", "median_abs_remainder",
                 "p95_abs_remainder", "p99_abs_remainder", "median_ratio",
                 "delta_n", "flagged"]
_BAHADUR_HEADER = ["n", "k", "alpha", "median_abs_remainder", "bound"]
_CI_HEADER = ["method", "lower", "upper", "half_width", "quantile",
              "used_fallback"]


def _fmt(value) -> str:
    """One CSV cell: floats at 17 significant digits, ints plain."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _jsonable(obj):
    """Recursively strip numpy types so json.dump round-trips cleanly."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _write_run_dir(out: str, config: dict, header, rows, report: dict) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(os.path.join(out, "results.csv"), header, rows)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(doc).__name__}")
    return doc


def _check_keys(doc: dict, required, optional, context: str) -> None:
    unknown = set(doc) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"missing {context} keys: {sorted(missing)}")


def _model_from_config(doc) -> tuple:
    if not isinstance(doc, dict):
        raise ConfigError("'model' must be an object with id and params")
    _check_keys(doc, ("id",), ("params",), "model")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("model params must be an object")
    model = dist.make_model(doc["id"], **params)
    return model, {"id": doc["id"], "params": dict(params)}


def _schedule_from_config(doc) -> tuple:
    if not isinstance(doc, dict):
        raise ConfigError("'schedule' must be an object with rule and params")
    _check_keys(doc, ("rule", "params"), (), "schedule")
    rule, params = doc["rule"], doc["params"]
    if not isinstance(params, (list, tuple)):
        raise ConfigError("schedule params must be an array")
    if rule == "explicit":
        schedule = trim.TrimSchedule.explicit(*params)
    elif rule == "power":
        schedule = trim.TrimSchedule.power(*params)
    elif rule == "fractions":
        schedule = trim.TrimSchedule.fractions(*params)
    else:
        raise ConfigError(f"unknown schedule rule {rule!r}")
    return schedule, {"rule": rule, "params": list(schedule.params)}


def _keyed_sample(model, n: int, seed: int, g: int, r: int) -> np.ndarray:
    """Replication draw under the engine's (seed, g, r) convention."""
    u = dist._philox(seed, (g << 32) | r).random(n)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return np.asarray(model.quantile(u), dtype=float)


def _diag(exc: BaseException) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


# -- simulate ----------------------------------------------------------------

def _parse_simulate(doc: dict):
    _check_keys(doc, ("model", "schedule", "n_grid", "replications",
                      "statistic", "seed"), ("targets", "workers"), "simulate")
    model, model_cfg = _model_from_config(doc["model"])
    schedule, sched_cfg = _schedule_from_config(doc["schedule"])
    targets = doc.get("targets", ["normal"])
    workers = doc.get("workers")
    if workers is not None and not isinstance(workers, int):
        raise ConfigError(f"workers must be an integer or null, got {workers!r}")
    plan = mc.make_plan(model_cfg["id"], model_cfg["params"], schedule,
                        doc["n_grid"], doc["replications"], doc["statistic"],
                        tuple(targets), doc["seed"])
    resolved = {
        "model": model_cfg,
        "schedule": sched_cfg,
        "n_grid": list(plan.n_grid),
        "replications": plan.replications,
        "statistic": plan.statistic,
        "targets": list(plan.targets),
        "seed": plan.seed,
        "workers": workers,
    }
    return plan, workers, resolved


def _cmd_simulate(args) -> int:
    plan, workers, resolved = _parse_simulate(_load_json(args.config))
    results = mc.run_simulation(plan, workers=workers)
    rows = []
    for res in results:
        k, m, alpha, beta = trim.schedule_eval(plan.schedule, res.n)
        cells = {name: res.distances.get(name) for name in _TARGET_CHOICES}
        rows.append([res.n, k, m, alpha, beta, plan.statistic,
                     plan.replications, res.flagged,
                     cells["normal"], cells["gn"], cells["hn"]])
    report = {
        "command": "simulate",
        "backend": BACKEND,
        "grid": [{"n": res.n, "flagged": res.flagged,
                  "distances": dict(res.distances)} for res in results],
    }
    _write_run_dir(args.out, resolved, _SIMULATE_HEADER, rows, report)
    print(json.dumps({"out": args.out, "rows": len(rows)}))
    return 0


# -- rates -------------------------------------------------------------------

def _cmd_rates(args) -> int:
    path = os.path.join(args.in_dir, "results.csv")
    if not os.path.exists(path):
        raise IngestionError(f"no results.csv under {args.in_dir}")
    with open(path, newline="", encoding="utf-8") as fh:
        table = list(csv.DictReader(fh))
    column = f"d_{args.target}"
    points = []
    for row in table:
        cell = row.get(column, "")
        if cell == "":
            raise ConfigError(
                f"target {args.target!r} was not measured in {path}"
            )
        points.append((float(row["k"]), float(cell)))
    fit = mc.fit_rate(points)
    out_path = os.path.join(args.in_dir, "rates.csv")
    _write_csv(out_path, _RATES_HEADER,
               [[args.target, len(points), fit.slope, fit.intercept,
                 fit.r_squared, fit.stderr]])
    print(json.dumps({"target": args.target, "slope": fit.slope,
                      "stderr": fit.stderr, "out": out_path}))
    return 0


# -- audit -------------------------------------------------------------------

def _cmd_audit(args) -> int:
    doc = _load_json(args.config)
    _check_keys(doc, ("model", "schedule", "n_grid"), ("B",), "audit")
    model, model_cfg = _model_from_config(doc["model"])
    schedule, sched_cfg = _schedule_from_config(doc["schedule"])
    b_const = float(doc.get("B", 2.0))
    report = conditions.audit_conditions(model, schedule, doc["n_grid"], B=b_const)
    rows = []
    failed = False
    for name, entry in report.entries.items():
        failed = failed or entry.verdict == "fail"
        rows.append([name, entry.verdict,
                     json.dumps(_jsonable(entry.diagnostics), sort_keys=True)])
    doc_out = {
        "command": "audit",
        "model_id": report.model_id,
        "n_grid": list(report.n_grid),
        "B": report.B,
        "entries": {name: {"verdict": e.verdict,
                           "diagnostics": _jsonable(e.diagnostics)}
                    for name, e in report.entries.items()},
        "q_seq": _jsonable(report.q_seq),
        "psi_values": _jsonable(report.psi_values),
        "notes": list(report.notes),
    }
    if args.out:
        resolved = {"model": model_cfg, "schedule": sched_cfg,
                    "n_grid": [int(n) for n in doc["n_grid"]], "B": b_const}
        _write_run_dir(args.out, resolved, _AUDIT_HEADER, rows, doc_out)
    print(json.dumps(_jsonable(doc_out)))
    return 2 if failed else 0


# -- ustat-check -------------------------------------------------------------

def _cmd_ustat_check(args) -> int:
    doc = _load_json(args.config)
    _check_keys(doc, ("model", "schedule", "n_grid", "replications", "seed"),
                ("constants",), "ustat-check")
    model, model_cfg = _model_from_config(doc["model"])
    schedule, sched_cfg = _schedule_from_config(doc["schedule"])
    constants = tuple(doc.get("constants", (1.0, 2.0)))
    reps, seed = int(doc["replications"]), int(doc["seed"])
    rows = []
    moments = {}
    for g, n in enumerate(int(v) for v in doc["n_grid"]):
        k, m, _, _ = trim.schedule_eval(schedule, n)
        samples = [trim.sorted_sample(_keyed_sample(model, n, seed, g, r))
                   for r in range(reps)]
        summary = ustat.decomposition_remainder(samples, model, schedule,
                                                constants)
        analytic = ustat.analytic_moments(model, n, schedule)
        rows.append([n, k, m, summary.correlation,
                     summary.abs_remainder[0], summary.abs_remainder[1],
                     summary.abs_remainder[2], summary.ratio[0],
                     summary.delta_n, summary.flagged])
        moments[str(n)] = {
            "second": analytic.second,
            "epsilon_n": analytic.epsilon_n,
            "epsilon_bound": analytic.epsilon_bound,
            "third": analytic.third,
        }
    report = {"command": "ustat-check", "constants": list(constants),
              "rows": _jsonable(rows), "analytic_moments": moments}
    resolved = {"model": model_cfg, "schedule": sched_cfg,
                "n_grid": [int(v) for v in doc["n_grid"]],
                "replications": reps, "seed": seed,
                "constants": list(constants)}
    _write_run_dir(args.out, resolved, _USTAT_HEADER, rows, report)
    print(json.dumps({"out": args.out, "rows": len(rows)}))
    return 0


# -- bahadur -----------------------------------------------------------------

def _cmd_bahadur(args) -> int:
    doc = _load_json(args.config)
    _check_keys(doc, ("model", "schedule", "n_grid", "replications", "seed"),
                ("g_kind", "op", "log_scale", "constants"), "bahadur")
    model, model_cfg = _model_from_config(doc["model"])
    schedule, sched_cfg = _schedule_from_config(doc["schedule"])
    op = doc.get("op", "point")
    if op not in ("point", "integral"):
        raise ConfigError(f"op must be 'point' or 'integral', got {op!r}")
    runner = orderstat.bk_point if op == "point" else orderstat.bk_integral
    g_kind = doc.get("g_kind", "identity")
    log_scale = doc.get("log_scale", "k")
    constants = tuple(doc.get("constants", (1.0, 2.0)))
    reps, seed = int(doc["replications"]), int(doc["seed"])
    rows = []
    points = []
    for g, n in enumerate(int(v) for v in doc["n_grid"]):
        k, _, alpha, _ = trim.schedule_eval(schedule, n)
        remainders = np.empty(reps)
        bound = math.nan
        for r in range(reps):
            sample = trim.sorted_sample(_keyed_sample(model, n, seed, g, r))
            res = runner(sample, model, schedule, g_kind=g_kind,
                         constants=constants, log_scale=log_scale)
            remainders[r] = abs(res.remainder)
            bound = res.bound
        med = float(np.median(remainders))
        rows.append([n, k, alpha, med, bound])
        points.append((n, med))
    report = {"command": "bahadur", "op": op, "g_kind": g_kind,
              "log_scale": log_scale, "rows": _jsonable(rows)}
    if len(points) >= 3 and all(d > 0.0 for _, d in points):
        fit = mc.fit_rate(points)
        report["exponent"] = {"slope": fit.slope, "intercept": fit.intercept,
                              "r_squared": fit.r_squared, "stderr": fit.stderr}
    resolved = {"model": model_cfg, "schedule": sched_cfg,
                "n_grid": [int(v) for v in doc["n_grid"]],
                "replications": reps, "seed": seed, "g_kind": g_kind,
                "op": op, "log_scale": log_scale, "constants": list(constants)}
    _write_run_dir(args.out, resolved, _BAHADUR_HEADER, rows, report)
    print(json.dumps({"out": args.out, "rows": len(rows)}))
    return 0


# -- ci ----------------------------------------------------------------------

def _read_data(path: str) -> np.ndarray:
    """One numeric value per line; '#' starts a comment; blanks skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise IngestionError(f"data file not found: {path}")
    values = []
    bad = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            bad.append(lineno)
    if bad:
        shown = ", ".join(map(str, bad[:10]))
        if len(bad) > 10:
            shown += f", ... ({len(bad) - 10} more)"
        raise IngestionError(f"non-numeric values in {path} at lines {shown}")
    return np.asarray(values, dtype=float)


def _spacing_density(xs: np.ndarray, u: float, h: float, side: str) -> float:
    """Quantile-spacing density estimate f(F^{-1}(u)) = 2h / spacing.

    The window is the order-statistic pair at probabilities u -+ h.  An
    artifact convention: the bandwidth tracks the probability-window
    width used by the oscillation functionals, not any optimal rule.
    """
    n = xs.size
    i_lo = min(max(math.ceil(n * (u - h)), 1), n)
    i_hi = min(max(math.ceil(n * (u + h)), 1), n)
    spread = float(xs[i_hi - 1] - xs[i_lo - 1])
    if not spread > 0.0:
        raise DegenerateScaleError(
            f"flat quantile spacing around the {side} trim point; "
            f"the density plug-in needs distinct order statistics"
        )
    return 2.0 * h / spread


def ci_from_data(data_path: str, fractions: tuple, level: float) -> dict:
    """Normal and expansion-corrected intervals for a data file on disk."""
    values = _read_data(data_path)
    if values.size < 50:
        raise IngestionError(
            f"need at least 50 numeric values for interval estimation, "
            f"got {values.size}"
        )
    report = ci_report(values, fractions, level)
    report["data"] = data_path
    return report


def ci_report(values: np.ndarray, fractions: tuple, level: float) -> dict:
    """Normal and expansion-corrected intervals for the trimmed mean.

    The corrected limit solves the estimated Studentized expansion for
    the requested level; every population quantity is replaced by its
    plug-in (Winsorized sample moments, quantile-spacing density).  The
    normal baseline is always reported beside it.
    """
    alpha_req, beta_req = (float(v) for v in fractions)
    if not (alpha_req > 0.0 and beta_req > 0.0 and alpha_req + beta_req < 0.5):
        raise ConfigError(
            f"need alpha, beta > 0 and alpha + beta < 0.5, got "
            f"({alpha_req}, {beta_req})"
        )
    level = float(level)
    # The midpoint level is allowed: both intervals collapse to the point.
    if not (0.5 <= level < 1.0):
        raise ConfigError(f"need 0.5 <= level < 1, got {level}")
    sample = trim.sorted_sample(values)
    n = sample.n
    k, m, alpha, beta = trim.schedule_eval(
        trim.TrimSchedule.fractions(alpha_req, beta_req), n)
    xs = sample.values
    t_n = trim.trimmed_sum(sample, k, m)
    plug_mean, plug_var = trim.plugin_moments(sample, k, m)
    sigma_hat = math.sqrt(plug_var)
    lo_hat, hi_hat = float(xs[k - 1]), float(xs[n - m - 1])
    h_lo = alpha * min(0.5, k ** -0.25)
    h_hi = beta * min(0.5, m ** -0.25)
    f_lo = _spacing_density(xs, alpha, h_lo, "lower")
    f_hi = _spacing_density(xs, 1.0 - beta, h_hi, "upper")
    mid = xs[k:n - m]
    gamma3 = (k * (lo_hat - plug_mean) ** 3
              + math.fsum((mid - plug_mean) ** 3)
              + m * (hi_hat - plug_mean) ** 3) / n
    delta2 = (-(alpha ** 2) * (plug_mean - lo_hat) ** 2 / f_lo
              + beta ** 2 * (plug_mean - hi_hat) ** 2 / f_hi)
    root_n = math.sqrt(n)
    sig3 = sigma_hat ** 3
    terms = edgeworth.ExpansionTerms(
        lambda1=gamma3 / sig3,
        lambda2=delta2 / sig3,
        delta2w=delta2,
        b_n=0.5 / root_n * (-alpha * (1.0 - alpha) / f_lo
                            + beta * (1.0 - beta) / f_hi),
        sigma_w=sigma_hat,
        mu_trunc=t_n,
        q_alpha=alpha / (root_n * sigma_hat * f_lo),
        q_beta=beta / (root_n * sigma_hat * f_hi),
        n=n,
        trim=(k, m, alpha, beta),
    )
    scale = sigma_hat / root_n
    z = float(ndtri(level))
    inv = edgeworth.invert_expansion(terms, level)
    return {
        "command": "ci",
        "data": None,
        "n": n, "k": k, "m": m,
        "alpha": alpha, "beta": beta, "level": level,
        "point_estimate": t_n,
        "plug_mean": plug_mean,
        "plug_var": plug_var,
        "sigma_w_hat": sigma_hat,
        "density_hat": {"lower": f_lo, "upper": f_hi,
                        "bandwidth_lower": h_lo, "bandwidth_upper": h_hi,
                        "method": "quantile-spacing"},
        "terms_hat": {"lambda1": terms.lambda1, "lambda2": terms.lambda2,
                      "b_n": terms.b_n, "q_alpha": terms.q_alpha,
                      "q_beta": terms.q_beta},
        "normal": {"quantile": z, "half_width": scale * z,
                   "lower": t_n - scale * z, "upper": t_n + scale * z},
        "corrected": {"quantile": inv.x, "half_width": scale * inv.x,
                      "lower": t_n - scale * inv.x,
                      "upper": t_n + scale * inv.x,
                      "used_fallback": inv.used_fallback},
        "note": ("corrected limits invert the estimated Studentized "
                 "expansion; plug-in terms and the quantile-spacing "
                 "density are estimation conventions of this artifact, "
                 "not population theory"),
    }


def _cmd_ci(args) -> int:
    report = ci_from_data(args.data, (args.alpha, args.beta), args.level)
    if args.out:
        resolved = {"data": args.data, "alpha": args.alpha,
                    "beta": args.beta, "level": args.level}
        rows = [
            ["normal", report["normal"]["lower"], report["normal"]["upper"],
             report["normal"]["half_width"], report["normal"]["quantile"],
             None],
            ["corrected", report["corrected"]["lower"],
             report["corrected"]["upper"], report["corrected"]["half_width"],
             report["corrected"]["quantile"],
             report["corrected"]["used_fallback"]],
        ]
        _write_run_dir(args.out, resolved, _CI_HEADER, rows, report)
    print(json.dumps(_jsonable(report)))
    return 0


# -- wiring ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="trimsum")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a Monte Carlo plan")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("rates", help="fit log-log rates over a finished run")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--target", required=True, choices=_TARGET_CHOICES)
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("audit", help="run the condition audit")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("ustat-check", help="projection remainder diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ustat_check)

    p = sub.add_parser("bahadur", help="quantile linearization decay")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bahadur)

    p = sub.add_parser("ci", help="confidence interval from a data file")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ci)

    return parser


def run_command(argv) -> int:
    """Dispatch one CLI invocation; exceptions become exit codes."""
    try:
        args = _build_parser().parse_args(list(argv))
        return args.func(args)
    except _USAGE_ERRORS as exc:
        _diag(exc)
        return 1
    except TrimsumError as exc:
        _diag(exc)
        return 3
    except OSError as exc:
        _diag(exc)
        return 1


def main() -> None:
    raise SystemExit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
