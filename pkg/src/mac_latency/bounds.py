"""Closed-form latency and queue bounds with exact rational arithmetic.

Constants are those recoverable from the proofs. The two additive terms the
paper leaves as O(bn) are made explicit:

* MBTF queue, ``K_QUEUE = 5``. Retracing the proof, the bound at the end of
  a small pass is ``((n/(1-lam) + b) rho + b)(n-1)``, which is at most
  ``rho n (n+b)/(1-lam) + bn``. The gain during a run of big passes is at
  most ``f(k_max) + n + b``, and the fluctuation inside a pass is at most
  ``n + b``. Everything beyond the main term therefore sums to at most
  ``bn + 2n + 2b``, which is at most ``5bn`` for ``b >= 1``. With ``b = 0``
  no packet can ever be injected at rate below one, so the bound still holds.
* MBTF latency, ``K_LATENCY = 6``. The credit delay is at most the queue
  bound divided by ``1 - lam``, which contributes ``5bn/(1-lam)``. One more
  ``bn/(1-lam)`` covers a packet whose own station turns big while it waits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .adversary.budget import AdversaryType, format_rational
from .errors import ConfigError

K_LATENCY = 6
K_QUEUE = 5

FINITE = "finite"
UNBOUNDED = "unbounded"
NOT_APPLICABLE = "not-applicable"


def lg(n: int) -> int:
    """ceil(log2 n), with lg 1 = 0."""
    if n < 1:
        raise ConfigError("lg needs n >= 1")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class BoundResult:
    algorithm: str
    kind: str  # "latency" or "queue"
    value: Optional[Fraction]
    status: str = FINITE
    provenance: str = ""
    alternate: Optional[Fraction] = None
    reason: str = ""

    @property
    def finite(self) -> bool:
        return self.status == FINITE

    def display(self) -> str:
        if not self.finite:
            return self.status
        return format_rational(self.value)


def _name(algorithm) -> str:
    return getattr(algorithm, "name", algorithm)


def _not_applicable(name, kind, reason):
    return BoundResult(name, kind, None, NOT_APPLICABLE, reason=reason)


def latency_bound(algorithm, n: int, atype: AdversaryType, J: Optional[int] = None) -> BoundResult:
    """Upper bound on packet latency, in rounds."""
    name = _name(algorithm)
    if J is None:
        J = getattr(algorithm, "J", None)
    if n < 1:
        raise ConfigError("n must be at least 1")
    rho, lam, b = atype.rho, atype.lam, atype.b
    if name in ("jrrw", "of-jrrw") and J is None:
        raise ConfigError(f"{name} needs J to compute its bound")
    if not atype.stable:
        return BoundResult(name, "latency", None, UNBOUNDED,
                           reason="rho + lambda >= 1: latency is unbounded")
    slack = 1 - rho - lam
    if name in ("rrw", "of-rrw", "srr", "of-srr") and lam > 0:
        return _not_applicable(name, "latency", f"{name} is analysed only without jamming")

    if name in ("jrrw", "of-jrrw"):
        if J < atype.jamming_burstiness:
            return _not_applicable(name, "latency",
                                   f"J={J} is below the jamming burstiness {atype.jamming_burstiness}")
        base = 2 * (n * (J + 1) + 2 * b) / slack
        alt = 4 * (b * n + (n + b) * (1 - lam)) / ((1 - lam) * slack)
        if name == "of-jrrw":
            return BoundResult(name, "latency", base, FINITE,
                               "2(n(J+1)+2b)/(1-rho-lambda)", alternate=alt)
        return BoundResult(name, "latency", base / slack, FINITE,
                           "2(n(J+1)+2b)/(1-rho-lambda)^2", alternate=alt / slack)

    if name in ("of-rrw", "ofc-rrw"):
        return BoundResult(name, "latency", 4 * (n + b) / slack, FINITE, "4(n+b)/(1-rho-lambda)")
    if name in ("rrw", "c-rrw"):
        return BoundResult(name, "latency", 4 * (n + b) / slack ** 2, FINITE, "4(n+b)/(1-rho-lambda)^2")

    if name == "mbtf":
        value = (3 * n * (n + b)) / ((1 - lam) * slack) + Fraction(K_LATENCY * b * n) / (1 - lam)
        return BoundResult(name, "latency", value, FINITE,
                           f"3n(n+b)/((1-lambda)(1-rho-lambda)) + K*bn/(1-lambda), K={K_LATENCY}")

    if name in ("srr", "of-srr"):
        if n < 2:
            return _not_applicable(name, "latency", "the search bounds assume n >= 2")
        L = lg(n)
        small = rho <= Fraction(1, 2 * L)
        if name == "of-srr":
            if small:
                return BoundResult(name, "latency", Fraction(4 * min(b * L, n + b)), FINITE,
                                   "4 min(b lg n, n+b), rho <= 1/(2 lg n)")
            return BoundResult(name, "latency", (4 * n + 2 * b) / (1 - rho), FINITE,
                               "(4n+2b)/(1-rho), rho > 1/(2 lg n)")
        if small:
            return BoundResult(name, "latency", Fraction(6 * b * L), FINITE,
                               "6b lg n, rho <= 1/(2 lg n)")
        return BoundResult(name, "latency", 4 * (n + b) / (1 - rho) ** 2, FINITE,
                           "4(n+b)/(1-rho)^2, rho > 1/(2 lg n)")
    raise ConfigError(f"unknown algorithm {name!r}")


def queue_bound_mbtf(n: int, atype: AdversaryType) -> BoundResult:
    """Upper bound on the total number of queued packets under MBTF."""
    rho, lam, b = atype.rho, atype.lam, atype.b
    if not atype.stable:
        return BoundResult("mbtf", "queue", None, UNBOUNDED, reason="rho + lambda >= 1")
    value = 2 * rho * n * (n + b) / ((1 - lam) * (1 - rho - lam)) + K_QUEUE * b * n
    return BoundResult("mbtf", "queue", value, FINITE,
                       f"2 rho n(n+b)/((1-lambda)(1-rho-lambda)) + K'bn, K'={K_QUEUE}")


@dataclass(frozen=True)
class Comparison:
    observed: int
    bound: BoundResult
    ratio: Optional[Fraction]

    @property
    def sound(self) -> bool:
        return self.ratio is None or self.ratio <= 1


def compare(observed, bound: BoundResult) -> Comparison:
    """Ratio observed/bound; ``None`` when the bound is not finite.

    ``observed`` may be an integer or anything with a ``max_latency``
    attribute. An empty observation (``None``) counts as 0.
    """
    value = getattr(observed, "max_latency", observed)
    value = 0 if value is None else value
    if not bound.finite:
        return Comparison(value, bound, None)
    if bound.value <= 0:
        raise ZeroDivisionError(f"bound for {bound.algorithm} is {bound.value}; cannot form a ratio")
    return Comparison(value, bound, Fraction(value) / bound.value)


TABLE_ALGORITHMS = ("of-jrrw", "jrrw", "ofc-rrw", "c-rrw", "mbtf", "of-rrw", "rrw", "of-srr", "srr")

ASYMPTOTIC = {
    "of-jrrw": "O(bn/((1-lambda)(1-rho-lambda)))",
    "jrrw": "O(bn/((1-lambda)(1-rho-lambda)^2))",
    "ofc-rrw": "O((n+b)/(1-rho-lambda))",
    "c-rrw": "O((n+b)/(1-rho-lambda)^2)",
    "mbtf": "O(n(n+b)/((1-lambda)(1-rho-lambda)))",
    "of-rrw": "O((n+b)/(1-rho))",
    "rrw": "O((n+b)/(1-rho)^2)",
    "of-srr": "4min(b lg n,n+b) | (4n+2b)/(1-rho)",
    "srr": "6b lg n | 4(n+b)/(1-rho)^2",
}


def bound_table(n: int, atype: AdversaryType, J: Optional[int] = None):
    """Rows of the consolidated bound table at one parameter point."""
    if J is None:
        J = atype.jamming_burstiness
    rows = []
    for name in TABLE_ALGORITHMS:
        r = latency_bound(name, n, atype, J if name in ("jrrw", "of-jrrw") else None)
        rows.append({
            "algorithm": name,
            "asymptotic": ASYMPTOTIC[name],
            "exact_formula": r.provenance or r.reason,
            "latency_bound": r.display(),
            "latency_bound_float": f"{float(r.value):.3f}" if r.finite else "",
            "j_free_bound": format_rational(r.alternate) if r.alternate is not None else "",
        })
    q = queue_bound_mbtf(n, atype)
    rows.append({
        "algorithm": "mbtf-queue",
        "asymptotic": "O(rho n(n+b)/((1-lambda)(1-rho-lambda)))",
        "exact_formula": q.provenance or q.reason,
        "latency_bound": q.display(),
        "latency_bound_float": f"{float(q.value):.3f}" if q.finite else "",
        "j_free_bound": "",
    })
    return rows
