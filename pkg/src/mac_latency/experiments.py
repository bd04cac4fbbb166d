"""Experiment points, the soundness grid, and per-run checks."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .adversary import AdversaryType, format_rational, make_adversary
from .algorithms import ALGORITHMS, make_algorithm
from .bounds import compare, latency_bound, queue_bound_mbtf
from .channel import ChannelConfig, run_simulation
from .errors import ConfigError
from .metrics import (PACKET_COLUMNS, SUMMARY_COLUMNS, applicable_lemmas, compute_latencies,
                      lemma_check, packet_rows, queue_occupancy)

GRID_N = (2, 4, 8, 16)
GRID_B = (1, 2, 5)
GRID_RATES = (
    (Fraction(1, 4), Fraction(0)),
    (Fraction(1, 2), Fraction(0)),
    (Fraction(3, 4), Fraction(0)),
    (Fraction(1, 4), Fraction(1, 4)),
    (Fraction(1, 2), Fraction(1, 4)),
    (Fraction(1, 4), Fraction(1, 2)),
)
RANDOM_SEEDS = 50

JAMMING_ALGORITHMS = ("jrrw", "of-jrrw", "c-rrw", "ofc-rrw")
JAM_FREE_ALGORITHMS = ("rrw", "of-rrw", "srr", "of-srr")


def channel_for(algorithm: str, n: int, lam=0) -> ChannelConfig:
    """The channel an algorithm is evaluated on.

    The jamming-tolerant ring algorithms always run with jamming, MBTF runs
    with jamming exactly when lambda > 0, and the search algorithms get
    collision detection.
    """
    jamming = algorithm in JAMMING_ALGORITHMS or (algorithm == "mbtf" and lam > 0)
    return ChannelConfig(n, jamming_enabled=jamming,
                         collision_detection=algorithm in ("srr", "of-srr"))


@dataclass(frozen=True)
class Point:
    algorithm: str
    n: int
    rho: Fraction
    lam: Fraction
    b: int
    J: Optional[int] = None
    threshold: Optional[int] = None  # mutant override of the token-move threshold
    mbtf_control: Optional[bool] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm in ("jrrw", "of-jrrw") and self.J is None:
            object.__setattr__(self, "J", self.atype.jamming_burstiness)
        elif self.algorithm not in ("jrrw", "of-jrrw"):
            object.__setattr__(self, "J", None)

    @property
    def atype(self) -> AdversaryType:
        return AdversaryType(self.rho, self.lam, self.b)

    @property
    def channel(self) -> ChannelConfig:
        return channel_for(self.algorithm, self.n, self.lam)

    def make_algorithm(self):
        return make_algorithm(self.algorithm, self.J, threshold=self.threshold,
                              mbtf_control=self.mbtf_control)

    def bound(self):
        return latency_bound(self.algorithm, self.n, self.atype, self.J)

    def config_id(self, adversary: str = "") -> str:
        alg = self.algorithm if self.J is None else f"{self.algorithm}-J{self.J}"
        if self.threshold is not None:
            alg += f"-T{self.threshold}"
        if self.mbtf_control is not None:
            alg += "-control" if self.mbtf_control else "-silent"
        parts = [alg, f"n{self.n}", "r" + format_rational(self.rho).replace("/", "_"),
                 "l" + format_rational(self.lam).replace("/", "_"), f"b{self.b}"]
        if adversary:
            parts.append(adversary.replace(":", "").replace("/", "_"))
        return "-".join(parts)


def grid_points(algorithms=ALGORITHMS, ns=GRID_N, bs=GRID_B, rates=GRID_RATES):
    """Every (algorithm, n, b, rates) combination on which a bound applies."""
    out = []
    for alg in algorithms:
        for n, b, (rho, lam) in itertools.product(ns, bs, rates):
            if rho + lam >= 1:
                continue
            if lam > 0 and alg in JAM_FREE_ALGORITHMS:
                continue
            p = Point(alg, n, Fraction(rho), Fraction(lam), b)
            if p.bound().finite:
                out.append(p)
    return out


def adversary_specs(point: Point, seeds: int = RANDOM_SEEDS):
    """(spec, seed) pairs run against a point in the soundness grid."""
    specs = [("greedy-single", 0), ("greedy-round-robin", 0), ("greedy-behind-token", 0)]
    family = point.make_algorithm().family
    if family == "ring" and point.n >= 2:
        specs.append(("jrrw-tightness", 0))
    if family == "list" and point.rho >= Fraction(1, 2):
        specs.append(("mbtf-tightness", 0))
    specs.extend(("random", s) for s in range(seeds))
    return specs


def default_horizon(point: Point, factor: int = 4) -> int:
    bound = point.bound()
    if not bound.finite:
        raise ConfigError(f"no finite bound for {point.config_id()} ({bound.status}); give a horizon")
    return max(1, math.ceil(factor * bound.value))


@dataclass
class RunResult:
    point: Point
    adversary: str
    seed: int
    horizon: int
    trace: object
    max_latency: Optional[int]     # over heard packets
    worst_latency: Optional[int]   # also counting in-flight packets by their age
    max_queue: int
    bound: object
    ratio: Optional[Fraction]
    queue_bound: object = None
    lemmas: dict = field(default_factory=dict)

    @property
    def config_id(self) -> str:
        return self.point.config_id(self.adversary)

    @property
    def latency_ok(self) -> bool:
        return self.ratio is None or self.ratio <= 1

    @property
    def queue_ok(self) -> bool:
        qb = self.queue_bound
        return qb is None or not qb.finite or self.max_queue <= qb.value

    def failures(self) -> list:
        out = []
        if not self.latency_ok:
            out.append(f"latency {self.worst_latency} > bound {self.bound.display()}")
        if not self.queue_ok:
            out.append(f"queue {self.max_queue} > bound {self.queue_bound.display()}")
        for lid, res in self.lemmas.items():
            if not res.ok:
                out.append(f"{lid}: {res.details}")
        return out

    @property
    def ok(self) -> bool:
        return not self.failures()

    def summary_row(self) -> dict:
        p = self.point
        return {
            "config_id": self.config_id,
            "algorithm": p.algorithm,
            "n": p.n,
            "rho": format_rational(p.rho),
            "lambda": format_rational(p.lam),
            "b": p.b,
            "J": "" if p.J is None else p.J,
            "max_latency": "" if self.worst_latency is None else self.worst_latency,
            "max_queue": self.max_queue,
            "bound": self.bound.display(),
            "ratio": "" if self.ratio is None else f"{float(self.ratio):.6f}",
        }


def run_point(point: Point, adversary: str = "greedy-single", seed: int = 0,
              horizon: Optional[int] = None, lemmas=True, adversary_obj=None) -> RunResult:
    """Simulate one point against one adversary and evaluate it.

    ``lemmas`` is True (all applicable lemma checks), False, or a list of ids.
    """
    if horizon is None:
        horizon = default_horizon(point)
    alg = point.make_algorithm()
    adv = adversary_obj or make_adversary(adversary, point.atype, seed=seed, J=point.J)
    trace = run_simulation(point.channel, alg, adv, horizon)
    lat = compute_latencies(trace)
    occ = queue_occupancy(trace)
    bound = point.bound()
    worst = lat.worst()
    cmp = compare(worst, bound)
    qb = queue_bound_mbtf(point.n, point.atype) if point.algorithm == "mbtf" else None
    name = adv.name if adversary_obj is not None else (
        f"random-{seed}" if adversary == "random" else adversary)
    if lemmas is True:
        ids = applicable_lemmas(alg)
    elif lemmas:
        ids = [lid for lid in lemmas if lid in applicable_lemmas(alg)]
    else:
        ids = []
    results = {lid: lemma_check(trace, lid) for lid in ids}
    return RunResult(point, name, seed, horizon, trace, lat.max_latency, worst,
                     occ.max_total, bound, cmp.ratio, qb, results)


@dataclass
class VerifyReport:
    rows: list = field(default_factory=list)          # summary rows of every run
    failures: list = field(default_factory=list)      # (config_id, message)
    not_applicable: list = field(default_factory=list)
    runs: int = 0
    lemma_counts: dict = field(default_factory=dict)  # lemma id -> (runs, checked items)

    @property
    def ok(self) -> bool:
        return not self.failures


def verify(points, seeds: int = RANDOM_SEEDS, lemmas=True, progress=None,
           keep=None) -> VerifyReport:
    """Run every point against its adversary set and collect soundness failures.

    Points without a finite bound are listed as not applicable. ``keep`` is an
    optional callback receiving each :class:`RunResult` (traces are large, so
    they are not retained here).
    """
    report = VerifyReport()
    for point in points:
        bound = point.bound()
        if not bound.finite:
            report.not_applicable.append((point.config_id(), bound.status, bound.reason))
            continue
        horizon = default_horizon(point)
        for spec, seed in adversary_specs(point, seeds):
            res = run_point(point, spec, seed, horizon, lemmas=lemmas)
            report.runs += 1
            report.rows.append(res.summary_row())
            for msg in res.failures():
                report.failures.append((res.config_id, msg))
            for lid, lr in res.lemmas.items():
                runs, checked = report.lemma_counts.get(lid, (0, 0))
                report.lemma_counts[lid] = (runs + 1, checked + lr.checked)
            if keep is not None:
                keep(res)
            if progress is not None:
                progress(res)
    return report


def expand_grid(values: dict) -> list:
    """Cross product of a dict of lists, in key order then value order."""
    keys = list(values)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(values[k] for k in keys))]


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def write_run_files(result: RunResult, trace_path, metrics_path) -> None:
    result.trace.write(trace_path)
    write_csv(metrics_path, PACKET_COLUMNS, packet_rows(result.trace))


def write_summary(path, results) -> None:
    write_csv(path, SUMMARY_COLUMNS, (r.summary_row() if isinstance(r, RunResult) else r
                                      for r in results))
