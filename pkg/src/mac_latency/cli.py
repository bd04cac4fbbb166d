"""Command-line front end: single runs, parameter grids and the verification suite.

Exit codes: 0 ok, 1 configuration error, 2 soundness failure, 3 budget violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from .adversary import parse_rational
from .algorithms import ALGORITHMS
from .bounds import bound_table
from .errors import BudgetViolation, ConfigError, InvalidInput
from .experiments import (RANDOM_SEEDS, Point, default_horizon, expand_grid, grid_points,
                          run_point, verify, write_csv, write_summary)
from .metrics import LEMMAS, PACKET_COLUMNS, compute_latencies, packet_rows

EXIT_OK, EXIT_CONFIG, EXIT_SOUNDNESS, EXIT_BUDGET = 0, 1, 2, 3

CONFIG_KEYS = ("algorithm", "n", "rho", "lambda", "b", "J", "horizon", "adversary", "seed",
               "seeds", "threshold", "mbtf_variant", "lemmas")
GRID_KEYS = ("algorithm", "n", "rho", "lambda", "b", "J", "horizon", "adversary", "seed",
             "threshold", "mbtf_variant")

TRACE_COLUMNS = ("round", "transmitters", "jammed", "feedback", "injections")
BOUND_COLUMNS = ("algorithm", "asymptotic", "exact_formula", "latency_bound",
                 "latency_bound_float", "j_free_bound")


def read_config(path) -> dict:
    """Parse a flat ``key=value`` file; comma-separated values form a grid axis."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    base = os.path.dirname(os.path.abspath(path))
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value, got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lam":
            key = "lambda"
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        vals = [v.strip() for v in value.split(",")]
        if any(not v for v in vals):
            raise ConfigError(f"{path}:{no}: empty value for {key!r}")
        if key == "adversary":
            vals = [_resolve_script(v, base) for v in vals]
        out[key] = vals
    return out


def _resolve_script(spec, base):
    if spec.startswith("script:"):
        p = spec.split(":", 1)[1]
        if not os.path.isabs(p) and not os.path.exists(p):
            p = os.path.join(base, p)
        if not os.path.exists(p):
            raise ConfigError(f"adversary script {p} does not exist")
        return "script:" + p
    return spec


def _int(key, text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _mbtf_control(text):
    if text in (None, "auto"):
        return None
    if text == "control":
        return True
    if text == "silent":
        return False
    raise ConfigError(f"mbtf_variant must be auto, silent or control, got {text!r}")


def merge_settings(args) -> dict:
    """Config-file values overridden by command-line flags, all as lists of strings."""
    settings = read_config(args.config) if args.config else {}
    flags = {
        "algorithm": args.algorithm, "n": args.n, "rho": args.rho, "lambda": args.lam,
        "b": args.b, "J": args.J, "horizon": args.horizon, "adversary": args.adversary,
        "seed": args.seed, "seeds": args.seeds, "threshold": args.threshold,
        "mbtf_variant": args.mbtf_variant, "lemmas": args.lemmas,
    }
    for key, value in flags.items():
        if value is not None:
            settings[key] = [v.strip() for v in str(value).split(",")]
    return settings


def build_runs(settings) -> list:
    """Expand the settings into a list of (point, adversary, seed, horizon)."""
    grid = {k: settings[k] for k in GRID_KEYS if k in settings}
    if "algorithm" not in grid:
        raise ConfigError("no algorithm given (use --algorithm or algorithm= in the config)")
    if "n" not in grid:
        raise ConfigError("no station count given (use --n)")
    runs = []
    for combo in expand_grid(grid):
        alg = combo["algorithm"]
        if alg not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {alg!r}; expected one of {', '.join(ALGORITHMS)}")
        J = _int("J", combo["J"]) if "J" in combo else None
        if alg in ("jrrw", "of-jrrw") and J is not None and J < 0:
            raise ConfigError("J must be non-negative")
        point = Point(
            alg, _int("n", combo["n"]),
            parse_rational(combo.get("rho", "0")), parse_rational(combo.get("lambda", "0")),
            _int("b", combo.get("b", "1")), J,
            _int("threshold", combo["threshold"]) if "threshold" in combo else None,
            _mbtf_control(combo.get("mbtf_variant")),
        )
        horizon = _int("horizon", combo["horizon"]) if "horizon" in combo else None
        if horizon is not None and horizon < 0:
            raise ConfigError("horizon must be non-negative")
        runs.append((point, combo.get("adversary", "greedy-single"),
                     _int("seed", combo.get("seed", "0")), horizon))
    return runs


def _lemma_selection(settings):
    if "lemmas" not in settings:
        return True
    sel = settings["lemmas"]
    if sel == ["none"]:
        return False
    for lid in sel:
        if lid not in LEMMAS:
            raise ConfigError(f"unknown lemma id {lid!r}; expected one of {', '.join(LEMMAS)}")
    return sel


def write_trace_csv(trace, path) -> None:
    rows = ({
        "round": r.round,
        "transmitters": " ".join(f"{m.sender}:{m.token()}" for m in r.transmitters),
        "jammed": int(r.jammed),
        "feedback": r.feedback.token(),
        "injections": " ".join(f"{s}:{p}" for s, p in r.injections),
    } for r in trace.records)
    write_csv(path, TRACE_COLUMNS, rows)


def report_text(res) -> str:
    p, tr = res.point, res.trace
    lat = compute_latencies(tr)
    cfg = tr.config
    lines = [
        f"configuration  {res.config_id}",
        f"algorithm      {tr.algorithm.label}",
        f"channel        n={cfg.n} jamming={'yes' if cfg.jamming_enabled else 'no'} "
        f"collision-detection={'yes' if cfg.collision_detection else 'no'}",
        f"adversary      {res.adversary} type {p.atype}",
        f"horizon        {res.horizon}",
        f"packets        injected={len(lat.packets)} heard={len(lat.heard)} "
        f"in-flight={len(lat.in_flight)}",
        f"max latency    {'-' if lat.max_latency is None else lat.max_latency}"
        f" (oldest in flight: {'-' if lat.in_flight_lower_bound is None else lat.in_flight_lower_bound})",
        f"mean latency   {'-' if lat.mean_latency is None else f'{lat.mean_latency:.3f}'}",
        f"max queue      {res.max_queue}",
    ]
    b = res.bound
    if b.finite:
        lines.append(f"latency bound  {b.display()} ({float(b.value):.3f}) {b.provenance}")
        lines.append(f"ratio          {float(res.ratio):.6f} {'ok' if res.latency_ok else 'VIOLATED'}")
    else:
        lines.append(f"latency bound  {b.status}: {b.reason}")
    if res.queue_bound is not None and res.queue_bound.finite:
        qb = res.queue_bound
        lines.append(f"queue bound    {qb.display()} ({float(qb.value):.3f}) "
                     f"{'ok' if res.queue_ok else 'VIOLATED'}")
    for lid, lr in res.lemmas.items():
        verdict = "pass" if lr.ok else f"FAIL at round {lr.round}: {lr.details}"
        lines.append(f"check {lid:<17}{verdict} ({lr.checked} items)")
    return "\n".join(lines) + "\n"


def _write_bound_table(point, path):
    write_csv(path, BOUND_COLUMNS, bound_table(point.n, point.atype, point.J))


def cmd_run(settings, out) -> int:
    runs = build_runs(settings)
    lemmas = _lemma_selection(settings)
    results = []
    for point, adversary, seed, horizon in runs:
        if horizon is None:
            horizon = default_horizon(point)
        results.append(run_point(point, adversary, seed, horizon, lemmas=lemmas))
    single = len(results) == 1
    for res in results:
        sys.stdout.write(report_text(res))
        if not single:
            sys.stdout.write("\n")
    if out:
        from .plotting import plot_grid, plot_run

        os.makedirs(out, exist_ok=True)
        write_summary(os.path.join(out, "summary.csv"), results)
        if single:
            res = results[0]
            write_trace_csv(res.trace, os.path.join(out, "trace.csv"))
            write_csv(os.path.join(out, "metrics.csv"), PACKET_COLUMNS, packet_rows(res.trace))
            with open(os.path.join(out, "report.txt"), "w") as fh:
                fh.write(report_text(res))
            _write_bound_table(res.point, os.path.join(out, "bounds.csv"))
            plot_run(res.trace, out)
        else:
            for sub in ("traces", "metrics"):
                os.makedirs(os.path.join(out, sub), exist_ok=True)
            for res in results:
                cid = res.config_id
                write_trace_csv(res.trace, os.path.join(out, "traces", cid + ".csv"))
                write_csv(os.path.join(out, "metrics", cid + ".csv"), PACKET_COLUMNS,
                          packet_rows(res.trace))
            with open(os.path.join(out, "report.txt"), "w") as fh:
                fh.write("\n".join(report_text(r) for r in results))
            plot_grid([r.summary_row() for r in results], out)
    bad = [r for r in results if not (r.latency_ok and r.queue_ok)]
    return EXIT_SOUNDNESS if bad else EXIT_OK


def _verify_points(settings):
    if "algorithm" not in settings and "n" not in settings:
        if any(k in settings for k in ("rho", "lambda", "b", "J")):
            raise ConfigError("a verify grid needs algorithm= and n= as well")
        return grid_points()
    points = [p for p, _, _, _ in build_runs({k: v for k, v in settings.items()
                                              if k not in ("adversary", "seed", "horizon")})]
    seen, out = set(), []
    for p in points:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def cmd_verify(settings, out) -> int:
    points = _verify_points(settings)
    seeds = _int("seeds", settings["seeds"][0]) if "seeds" in settings else RANDOM_SEEDS
    lemmas = _lemma_selection(settings)

    def progress(res):
        if not res.ok:
            sys.stderr.write(f"FAIL {res.config_id}: {'; '.join(res.failures())}\n")

    report = verify(points, seeds=seeds, lemmas=lemmas, progress=progress)
    print(f"points: {len(points)}  runs: {report.runs}  not applicable: {len(report.not_applicable)}")
    for cid, status, reason in report.not_applicable:
        print(f"not-applicable {cid}: {status} ({reason})")
    for lid, (runs, checked) in sorted(report.lemma_counts.items()):
        print(f"check {lid}: {runs} runs, {checked} items")
    worst = max((Fraction(r["ratio"]) for r in report.rows if r["ratio"]), default=None)
    if worst is not None:
        print(f"largest latency ratio: {float(worst):.6f}")
    print(f"soundness failures: {len(report.failures)}")
    if out:
        from .plotting import plot_grid

        os.makedirs(out, exist_ok=True)
        write_summary(os.path.join(out, "summary.csv"), report.rows)
        write_csv(os.path.join(out, "failures.csv"), ("config_id", "failure"),
                  ({"config_id": c, "failure": m} for c, m in report.failures))
        plot_grid(report.rows, out)
    return EXIT_OK if report.ok else EXIT_SOUNDNESS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mac-latency",
        description="Simulate deterministic broadcast on an adversarial multiple access channel "
                    "and compare observed latency with the closed-form bounds.")
    p.add_argument("--config", metavar="FILE", help="key=value file; comma lists form a grid")
    p.add_argument("--algorithm", metavar="ID", help="one of " + ", ".join(ALGORITHMS))
    p.add_argument("--n", metavar="INT", help="number of stations")
    p.add_argument("--rho", metavar="P/Q", help="injection rate")
    p.add_argument("--lambda", dest="lam", metavar="P/Q", help="jamming rate")
    p.add_argument("--b", metavar="INT", help="burstiness")
    p.add_argument("--J", metavar="INT", help="jrrw/of-jrrw parameter (default: jamming burstiness)")
    p.add_argument("--horizon", metavar="INT", help="rounds to simulate (default: 4x the bound)")
    p.add_argument("--adversary", metavar="NAME", help="greedy-single[:i], greedy-round-robin, "
                   "greedy-behind-token, random, jrrw-tightness, mbtf-tightness or script:PATH")
    p.add_argument("--seed", metavar="INT", help="seed of the random adversary")
    p.add_argument("--out", metavar="DIR", help="write CSV files and figures here")
    p.add_argument("--verify", action="store_true", help="run the soundness grid and checks")
    p.add_argument("--seeds", metavar="INT", help="random adversaries per point in --verify")
    p.add_argument("--lemmas", metavar="IDS", help="comma list of checks to run, or none")
    p.add_argument("--threshold", metavar="INT",
                   help="override the void-round count that moves the token (fault injection)")
    p.add_argument("--mbtf-variant", choices=("auto", "silent", "control"),
                   help="MBTF token passing on an empty holder (default auto)")
    p.add_argument("--bound-table", action="store_true",
                   help="print the bound table for --n/--rho/--lambda/--b and exit")
    return p


def cmd_bound_table(settings, out) -> int:
    n = _int("n", settings.get("n", ["8"])[0])
    atype_point = Point("rrw", n, parse_rational(settings.get("rho", ["0"])[0]),
                        parse_rational(settings.get("lambda", ["0"])[0]),
                        _int("b", settings.get("b", ["1"])[0]))
    J = _int("J", settings["J"][0]) if "J" in settings else None
    rows = bound_table(n, atype_point.atype, J)
    if out:
        os.makedirs(out, exist_ok=True)
        write_csv(os.path.join(out, "bounds.csv"), BOUND_COLUMNS, rows)
    w = max(len(r["algorithm"]) for r in rows)
    for r in rows:
        print(f"{r['algorithm']:<{w}}  {r['latency_bound']:>14}  {r['exact_formula']}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = merge_settings(args)
        if args.bound_table:
            return cmd_bound_table(settings, args.out)
        if args.verify:
            return cmd_verify(settings, args.out)
        return cmd_run(settings, args.out)
    except BudgetViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
