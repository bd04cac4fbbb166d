"""Leaky-bucket adversary types and exact budget accounting.

All rate arithmetic is done on integers scaled by the rate's denominator, so
a window whose budget ``rate * length + b`` is exactly integral is decided
without rounding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from ..errors import BudgetViolation, ConfigError

_RATIONAL = re.compile(r"^\s*(\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"`` or ``"p"`` into a non-negative Fraction."""
    if isinstance(text, Fraction):
        value = text
    elif isinstance(text, int) and not isinstance(text, bool):
        value = Fraction(text)
    else:
        m = _RATIONAL.match(str(text))
        if not m:
            raise ConfigError(f"not a rational p/q: {text!r}")
        q = int(m.group(2)) if m.group(2) is not None else 1
        if q == 0:
            raise ConfigError(f"zero denominator in {text!r}")
        value = Fraction(int(m.group(1)), q)
    if value < 0:
        raise ConfigError(f"rate must be non-negative: {text!r}")
    return value


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class AdversaryType:
    """Injection rate ``rho``, jamming rate ``lam`` and burstiness ``b``."""

    rho: Fraction
    lam: Fraction = Fraction(0)
    b: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rho", parse_rational(self.rho))
        object.__setattr__(self, "lam", parse_rational(self.lam))
        if self.rho > 1:
            raise ConfigError(f"injection rate must lie in [0, 1], got {self.rho}")
        if self.lam >= 1:
            raise ConfigError(f"jamming rate must be < 1, got {self.lam}")
        if not isinstance(self.b, int) or isinstance(self.b, bool) or self.b < 0:
            raise ConfigError(f"burstiness must be a non-negative integer, got {self.b!r}")

    @property
    def stable(self) -> bool:
        return self.rho + self.lam < 1

    @property
    def injection_burstiness(self) -> int:
        return int((self.rho + self.b) // 1)

    @property
    def jamming_burstiness(self) -> int:
        return int(Fraction(self.b) / (1 - self.lam) // 1)

    def __str__(self):
        return f"({format_rational(self.rho)},{format_rational(self.lam)},{self.b})"


class TokenBucket:
    """Online form of the windowed budget ``count(window) <= rate*|window| + burst``.

    The level before round ``t`` is the least slack over all windows ending
    at ``t``; it refills by ``rate`` each round and is capped at
    ``burst + rate``, the slack of the one-round window. Levels are kept
    scaled by the rate's denominator.
    """

    def __init__(self, rate, burst: int, kind: str = "inject"):
        rate = parse_rational(rate)
        self.kind = kind
        self._p = rate.numerator
        self._q = rate.denominator
        self._cap = burst * self._q + self._p
        self._level = self._cap
        self._start = 0  # earliest round of the binding window
        self.round = 0

    def allowance(self) -> int:
        """Whole units that may be consumed in the current round."""
        return self._level // self._q

    def consume(self, k: int) -> None:
        need = k * self._q
        if need > self._level:
            length = self.round - self._start + 1
            budget = Fraction(self._p * length, self._q) + (self._cap - self._p) // self._q
            raise BudgetViolation((self._start, self.round), self.kind,
                                  count=None, budget=budget)
        self._level -= need

    def tick(self) -> None:
        refilled = self._level + self._p
        if refilled >= self._cap:
            self._level = self._cap
            self._start = self.round + 1
        else:
            self._level = refilled
        self.round += 1

    def permits(self, k: int) -> bool:
        return k * self._q <= self._level


@dataclass
class AdversaryScript:
    """A fixed pattern: round -> stations (one entry per packet), plus jammed rounds."""

    injections: dict = field(default_factory=dict)
    jams: set = field(default_factory=set)

    def last_round(self) -> int:
        rounds = list(self.injections) + list(self.jams)
        return max(rounds) if rounds else -1

    def dumps(self) -> str:
        lines = []
        for t in sorted(set(self.injections) | self.jams):
            for s in self.injections.get(t, ()):
                lines.append(f"inject {t} {s}")
            if t in self.jams:
                lines.append(f"jam {t}")
        return "".join(line + "\n" for line in lines)

    @classmethod
    def loads(cls, text: str) -> "AdversaryScript":
        script = cls()
        last = -1
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "inject" and len(parts) == 3:
                    t, s = int(parts[1]), int(parts[2])
                    script.injections.setdefault(t, []).append(s)
                elif parts[0] == "jam" and len(parts) == 2:
                    t = int(parts[1])
                    script.jams.add(t)
                else:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"line {lineno}: cannot parse {raw!r}") from None
            if t < 0 or (parts[0] == "inject" and s < 0):
                raise ConfigError(f"line {lineno}: negative value in {raw!r}")
            if t < last:
                raise ConfigError(f"line {lineno}: directives must be sorted by round")
            last = t
        return script

    @classmethod
    def from_trace(cls, trace) -> "AdversaryScript":
        script = cls()
        for rec in trace.records:
            if rec.injections:
                script.injections[rec.round] = [s for s, _ in rec.injections]
            if rec.jammed:
                script.jams.add(rec.round)
        return script


@dataclass(frozen=True)
class Violation:
    window: tuple
    kind: str
    count: int
    budget: Fraction


def _first_window_violation(counts: np.ndarray, rate: Fraction, b: int):
    h = len(counts)
    if h == 0:
        return None
    p, q = rate.numerator, rate.denominator
    prefix = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
    best = None
    for length in range(1, h + 1):
        sums = prefix[length:] - prefix[:-length]
        bad = np.nonzero(sums * q > p * length + b * q)[0]
        if bad.size:
            start = int(bad[0])
            end = start + length - 1
            if best is None or (end, length) < (best[1], best[1] - best[0] + 1):
                best = (start, end, int(sums[start]), Fraction(p * length, q) + b)
    return best


def validate_script(script: AdversaryScript, atype: AdversaryType,
                    horizon: int) -> Optional[Violation]:
    """Check every contiguous window of ``[0, horizon)`` against both budgets.

    Returns ``None`` when the script is legal, otherwise the offending window
    with the earliest end round (shortest such window on ties).
    """
    if script.last_round() >= horizon:
        raise ConfigError(f"script has actions at round {script.last_round()} >= horizon {horizon}")
    inj = np.zeros(horizon, dtype=np.int64)
    for t, stations in script.injections.items():
        inj[t] += len(stations)
    jam = np.zeros(horizon, dtype=np.int64)
    for t in script.jams:
        jam[t] = 1
    found = []
    for kind, counts, rate in (("inject", inj, atype.rho), ("jam", jam, atype.lam)):
        v = _first_window_violation(counts, rate, atype.b)
        if v is not None:
            found.append((v[1], v[1] - v[0], kind, v))
    if not found:
        return None
    _, _, kind, (start, end, count, budget) = min(found, key=lambda f: (f[0], f[1]))
    return Violation((start, end), kind, count, budget)


def validate_rates(script: AdversaryScript, rate_inject, rate_jam, b: int,
                   horizon: int) -> Optional[Violation]:
    """Like :func:`validate_script` but without the ``lam < 1`` restriction of a type."""
    inj = np.zeros(horizon, dtype=np.int64)
    for t, stations in script.injections.items():
        inj[t] += len(stations)
    jam = np.zeros(horizon, dtype=np.int64)
    for t in script.jams:
        jam[t] = 1
    for kind, counts, rate in (("inject", inj, parse_rational(rate_inject)),
                               ("jam", jam, parse_rational(rate_jam))):
        v = _first_window_violation(counts, rate, b)
        if v is not None:
            return Violation((v[0], v[1]), kind, v[2], v[3])
    return None
