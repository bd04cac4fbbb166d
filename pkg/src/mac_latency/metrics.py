"""Trace analysis: latency, queue occupancy, phases, MBTF credit, lemma-level checks.

Everything here is a pure function of a :class:`~mac_latency.channel.Trace`.
The shared protocol state is recomputed from the recorded feedback alone, and
queue contents from the recorded injections and heard packets.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import Kind
from .errors import ConfigError


@dataclass(frozen=True)
class PacketStats:
    packet_id: int
    station: int
    injected_round: int
    heard_round: Optional[int] = None

    @property
    def latency(self) -> Optional[int]:
        if self.heard_round is None:
            return None
        return self.heard_round - self.injected_round


@dataclass
class LatencySummary:
    packets: list
    heard: list
    in_flight: list
    max_latency: Optional[int]
    mean_latency: Optional[float]
    histogram: Counter
    in_flight_lower_bound: Optional[int]  # max over queued packets of horizon - injected

    @property
    def empty(self) -> bool:
        return not self.packets

    def worst(self) -> Optional[int]:
        """Largest latency, counting in-flight packets by their lower bound."""
        vals = [v for v in (self.max_latency, self.in_flight_lower_bound) if v is not None]
        return max(vals) if vals else None


def compute_latencies(trace) -> LatencySummary:
    injected = {}
    heard_at = {}
    for rec in trace.records:
        fb = rec.feedback
        if fb.kind is Kind.HEARD and fb.message.payload is not None:
            pid = fb.message.payload
            if pid in heard_at:
                raise ConfigError(f"packet {pid} heard twice (rounds {heard_at[pid]} and {rec.round})")
            heard_at[pid] = rec.round
        for s, pid in rec.injections:
            injected[pid] = (s, rec.round)
    packets = []
    for pid in sorted(injected):
        s, r = injected[pid]
        packets.append(PacketStats(pid, s, r, heard_at.get(pid)))
    heard = [p for p in packets if p.heard_round is not None]
    in_flight = [p for p in packets if p.heard_round is None]
    lat = [p.latency for p in heard]
    h = trace.horizon
    return LatencySummary(
        packets=packets,
        heard=heard,
        in_flight=in_flight,
        max_latency=max(lat) if lat else None,
        mean_latency=sum(lat) / len(lat) if lat else None,
        histogram=Counter(lat),
        in_flight_lower_bound=max((h - p.injected_round for p in in_flight), default=None),
    )


@dataclass
class Occupancy:
    total: np.ndarray        # shape (h+1,), queued packets at the start of each round
    per_station: np.ndarray  # shape (h+1, n)

    @property
    def max_total(self) -> int:
        return int(self.total.max()) if len(self.total) else 0


def queue_occupancy(trace) -> Occupancy:
    """Queue sizes at round boundaries; entry t is taken before round t runs."""
    h, n = trace.horizon, trace.config.n
    delta = np.zeros((h + 1, n), dtype=np.int64)
    for rec in trace.records:
        t = rec.round
        for s, _ in rec.injections:
            delta[t + 1, s] += 1
        fb = rec.feedback
        if fb.kind is Kind.HEARD and fb.message.payload is not None:
            delta[t + 1, fb.message.sender] -= 1
    per_station = np.cumsum(delta, axis=0)
    return Occupancy(per_station.sum(axis=1), per_station)


# -- replay -----------------------------------------------------------------

@dataclass
class CreditWindow:
    """One big-station discovery and the delay rounds that follow it."""

    start: int               # discovery round
    position: int            # 1-based list position of the discovered station
    end: Optional[int] = None  # first round with the token at position+1
    credit_start: Optional[int] = None
    credit_end: Optional[int] = None
    delay: int = 0           # clear rounds strictly between start and end
    checkable: bool = True   # no injections and no further discovery inside
    reason: str = ""


@dataclass
class Replay:
    occ: np.ndarray          # (h+1,) queued packets at round starts
    eligible: np.ndarray     # (h+1,) old packets (older-go-first) or all packets
    heard: np.ndarray        # (h,) 1 where a packet was heard
    injected: np.ndarray     # (h,) packets injected per round
    jammed: np.ndarray       # (h,) jam flags
    phase_end: np.ndarray    # (h,) True where a phase or pass ends in step (d)
    phase_of: np.ndarray     # (h,) phase index of each round
    windows: list = field(default_factory=list)


def _credit(order, q, n):
    c = 0
    for i, s in enumerate(order):
        v = q[s] - (n - 1 - i)
        if v > 0:
            c += v
    return c


def replay(trace) -> Replay:
    cached = getattr(trace, "_replay_cache", None)
    if cached is not None:
        return cached
    alg, cfg = trace.algorithm, trace.config
    n, h = cfg.n, trace.horizon
    shared = alg.new_shared(cfg)
    older_first = alg.older_first
    is_list = alg.family == "list"
    q = [0] * n
    old = [0] * n
    total = total_old = 0
    occ = np.zeros(h + 1, dtype=np.int64)
    elig = np.zeros(h + 1, dtype=np.int64)
    heard = np.zeros(h, dtype=np.int64)
    injected = np.zeros(h, dtype=np.int64)
    jammed = np.zeros(h, dtype=bool)
    phase_end = np.zeros(h, dtype=bool)
    phase_of = np.zeros(h, dtype=np.int64)
    windows = []
    open_w = None
    moves = 0
    in_big_run = False
    phase = 0
    for rec in trace.records:
        t = rec.round
        occ[t] = total
        elig[t] = total_old if older_first else total
        phase_of[t] = phase
        fb = rec.feedback
        jammed[t] = rec.jammed
        if is_list:
            if open_w is not None and moves >= open_w.position:
                open_w.end = t
                open_w.credit_end = _credit(shared.order, q, n)
                windows.append(open_w)
                open_w = None
            if fb.kind is Kind.HEARD and fb.message.big_flag:
                idx = shared.order.index(fb.message.sender)
                if idx > 0 or not in_big_run:
                    if open_w is not None:
                        open_w.checkable, open_w.reason = False, "another discovery"
                        open_w.end = t
                        windows.append(open_w)
                    open_w = CreditWindow(t, idx + 1, credit_start=_credit(shared.order, q, n))
                    moves = 0
                in_big_run = True
            if open_w is not None and t > open_w.start and not rec.jammed:
                open_w.delay += 1
            if rec.injections and open_w is not None:
                open_w.checkable, open_w.reason = False, "injection inside the window"
        pe = shared.advance(fb)
        if is_list:
            if fb.kind is Kind.HEARD:
                forward = not fb.message.big_flag
            else:
                forward = not shared.control
            if forward:
                moves += 1
                in_big_run = False
        phase_end[t] = pe
        if pe:
            phase += 1
        if fb.kind is Kind.HEARD and fb.message.payload is not None:
            s = fb.message.sender
            heard[t] = 1
            if q[s] > 0:
                q[s] -= 1
                total -= 1
            if old[s] > 0:
                old[s] -= 1
                total_old -= 1
        for s, _ in rec.injections:
            q[s] += 1
            total += 1
        injected[t] = len(rec.injections)
        if pe and older_first:
            old = list(q)
            total_old = total
    occ[h] = total
    elig[h] = total_old if older_first else total
    if open_w is not None and moves >= open_w.position:
        open_w.end = h
        open_w.credit_end = _credit(shared.order, q, n)
        windows.append(open_w)
    result = Replay(occ, elig, heard, injected, jammed, phase_end, phase_of, windows)
    try:
        trace._replay_cache = result
    except AttributeError:
        pass
    return result


# -- phases and credit --------------------------------------------------------

@dataclass(frozen=True)
class PhaseStats:
    index: int
    start: int
    end: int          # inclusive
    length: int
    queued_start: int  # old packets at the start (all queued packets graduate then)
    injected: int      # packets injected during the phase
    complete: bool


def phase_stats(trace) -> list:
    if not trace.algorithm.phase_algorithm:
        raise ConfigError(f"{trace.algorithm.name} is not a phase algorithm")
    r = replay(trace)
    h = trace.horizon
    ends = np.flatnonzero(r.phase_end)
    out = []
    start = 0
    csum = np.concatenate(([0], np.cumsum(r.injected)))
    for i, e in enumerate(ends):
        e = int(e)
        out.append(PhaseStats(i, start, e, e - start + 1, int(r.occ[start]),
                              int(csum[e + 1] - csum[start]), True))
        start = e + 1
    if start < h:
        out.append(PhaseStats(len(out), start, h - 1, h - start, int(r.occ[start]),
                              int(csum[h] - csum[start]), False))
    return out


@dataclass
class CreditLedger:
    credit: list            # C(n,t) at the start of each round t, length h+1
    windows: list           # CreditWindow per big-station discovery
    delay_rounds: set

    def max_credit(self) -> int:
        return max(self.credit) if self.credit else 0


def credit_ledger(trace) -> CreditLedger:
    alg, cfg = trace.algorithm, trace.config
    if alg.family != "list":
        raise ConfigError("credit is defined for MBTF only")
    n = cfg.n
    shared = alg.new_shared(cfg)
    q = [0] * n
    credit = []
    for rec in trace.records:
        credit.append(_credit(shared.order, q, n))
        shared.advance(rec.feedback)
        fb = rec.feedback
        if fb.kind is Kind.HEARD and fb.message.payload is not None and q[fb.message.sender] > 0:
            q[fb.message.sender] -= 1
        for s, _ in rec.injections:
            q[s] += 1
    credit.append(_credit(shared.order, q, n))
    r = replay(trace)
    delay = set()
    for w in r.windows:
        stop = w.end if w.end is not None else trace.horizon
        delay.update(t for t in range(w.start + 1, stop) if not r.jammed[t])
    return CreditLedger(credit, list(r.windows), delay)


# -- lemma checks -------------------------------------------------------------

@dataclass(frozen=True)
class LemmaResult:
    lemma: str
    ok: bool
    round: Optional[int] = None
    details: str = ""
    checked: int = 0

    def __bool__(self):
        return self.ok


LEMMAS = ("jrrw-drain", "crrw-drain", "search-progress", "two-phase", "phase-recurrence", "credit")

LEMMA_ALGORITHMS = {
    "jrrw-drain": ("of-jrrw", "of-rrw"),
    "crrw-drain": ("ofc-rrw",),
    "search-progress": ("srr", "of-srr"),
    "two-phase": ("rrw", "of-rrw", "jrrw", "of-jrrw", "c-rrw", "ofc-rrw", "srr", "of-srr"),
    "phase-recurrence": ("rrw", "of-rrw", "jrrw", "of-jrrw", "c-rrw", "ofc-rrw", "srr", "of-srr"),
    "credit": ("mbtf",),
}


def applicable_lemmas(algorithm) -> list:
    name = getattr(algorithm, "name", algorithm)
    return [lid for lid in LEMMAS if name in LEMMA_ALGORITHMS[lid]]


def _drain_check(trace, lemma_id, additive):
    r = replay(trace)
    lam = trace.adversary_type.lam
    b = trace.adversary_type.b
    h = trace.horizon
    if h == 0:
        return LemmaResult(lemma_id, True)
    x = r.eligible[:h]
    p, qd = lam.numerator, lam.denominator
    # ceil((x + additive + b) / (1 - lam)) with 1 - lam = (qd - p)/qd
    num = (x + additive + b) * qd
    den = qd - p
    w = -((-num) // den)
    H = np.concatenate(([0], np.cumsum(r.heard)))
    t = np.arange(h)
    ok_range = (x > 0) & (t + w <= h)
    idx = np.flatnonzero(ok_range)
    got = H[t[idx] + w[idx]] - H[t[idx]]
    bad = np.flatnonzero(got < x[idx])
    if bad.size:
        i = int(idx[bad[0]])
        return LemmaResult(lemma_id, False, i,
                           f"{int(x[i])} old packets at round {i} but only {int(got[bad[0]])} heard "
                           f"in the next {int(w[i])} rounds", int(idx.size))
    return LemmaResult(lemma_id, True, checked=int(idx.size))


def _search_check(trace):
    r = replay(trace)
    n, h = trace.config.n, trace.horizon
    if h == 0:
        return LemmaResult("search-progress", True)
    L = (n - 1).bit_length()
    x = r.eligible[:h]
    H = np.concatenate(([0], np.cumsum(r.heard)))
    t = np.arange(h)
    first = None
    checked = 0
    for y in range(1, int(x.max(initial=0)) + 1):
        w = min(y * L, 2 * n + y)
        idx = np.flatnonzero((x >= y) & (t + w <= h))
        if not idx.size:
            break
        checked += idx.size
        got = H[idx + w] - H[idx]
        bad = np.flatnonzero(got < y)
        if bad.size:
            i = int(idx[bad[0]])
            if first is None or i < first[0]:
                first = (i, y, w, int(got[bad[0]]))
    if first:
        i, y, w, got = first
        return LemmaResult("search-progress", False, i,
                           f"{int(x[i])} eligible packets at round {i}: only {got} of {y} heard "
                           f"in the next {w} rounds", checked)
    return LemmaResult("search-progress", True, checked=checked)


def _two_phase_check(trace):
    r = replay(trace)
    h = trace.horizon
    lat = compute_latencies(trace)
    n_phases = int(r.phase_end.sum())  # phases 0..n_phases-1 are complete
    checked = 0
    for p in lat.packets:
        k = int(r.phase_of[p.injected_round])
        if p.heard_round is not None:
            checked += 1
            hk = int(r.phase_of[p.heard_round])
            if hk > k + 1:
                return LemmaResult("two-phase", False, p.heard_round,
                                   f"packet {p.packet_id} injected in phase {k} heard in phase {hk}",
                                   checked)
        elif k + 1 < n_phases:
            return LemmaResult("two-phase", False, p.injected_round,
                               f"packet {p.packet_id} injected in phase {k} still queued after "
                               f"phase {k + 1} ended", checked)
    return LemmaResult("two-phase", True, checked=checked)


def _recurrence_check(trace):
    rho, b = trace.adversary_type.rho, trace.adversary_type.b
    phases = phase_stats(trace)
    checked = 0
    for cur, nxt in zip(phases, phases[1:]):
        if not cur.complete:
            break
        checked += 1
        if nxt.queued_start > rho * cur.length + b:
            return LemmaResult("phase-recurrence", False, nxt.start,
                               f"phase {nxt.index} starts with {nxt.queued_start} old packets > "
                               f"rho*{cur.length} + {b}", checked)
    return LemmaResult("phase-recurrence", True, checked=checked)


def _credit_check(trace):
    r = replay(trace)
    checked = 0
    for w in r.windows:
        if not w.checkable or w.end is None:
            continue
        checked += 1
        if w.credit_start - w.credit_end != w.delay:
            return LemmaResult("credit", False, w.start,
                               f"discovery at round {w.start} (position {w.position}): credit "
                               f"{w.credit_start} -> {w.credit_end} over {w.delay} delay rounds",
                               checked)
    return LemmaResult("credit", True, checked=checked)


def lemma_check(trace, lemma_id: str) -> LemmaResult:
    """Scan a trace for the first violation of a structural lemma."""
    if lemma_id not in LEMMAS:
        raise ConfigError(f"unknown lemma id {lemma_id!r}; expected one of {', '.join(LEMMAS)}")
    alg = trace.algorithm
    if alg.name not in LEMMA_ALGORITHMS[lemma_id]:
        raise ConfigError(f"lemma {lemma_id} does not apply to {alg.name}")
    n = trace.config.n
    if lemma_id == "jrrw-drain":
        J = alg.J if alg.J is not None else 0
        return _drain_check(trace, lemma_id, n * (J + 1))
    if lemma_id == "crrw-drain":
        return _drain_check(trace, lemma_id, n)
    if lemma_id == "search-progress":
        return _search_check(trace)
    if lemma_id == "two-phase":
        return _two_phase_check(trace)
    if lemma_id == "phase-recurrence":
        return _recurrence_check(trace)
    return _credit_check(trace)


# -- tabular output ------------------------------------------------------------

PACKET_COLUMNS = ("packet_id", "station", "injected", "heard", "latency")
SUMMARY_COLUMNS = ("config_id", "algorithm", "n", "rho", "lambda", "b", "J",
                   "max_latency", "max_queue", "bound", "ratio")


def packet_rows(trace):
    for p in compute_latencies(trace).packets:
        yield {
            "packet_id": p.packet_id,
            "station": p.station,
            "injected": p.injected_round,
            "heard": "" if p.heard_round is None else p.heard_round,
            "latency": "" if p.latency is None else p.latency,
        }


def slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
