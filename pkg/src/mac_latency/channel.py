"""Slotted multiple access channel: feedback resolution, execution driver, traces."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

from .errors import ConfigError, InvalidInput


@dataclass(frozen=True)
class ChannelConfig:
    n: int
    jamming_enabled: bool = False
    collision_detection: bool = False

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ConfigError(f"number of stations must be a positive integer, got {self.n!r}")

    @property
    def stations(self):
        return range(self.n)


class OutboundMessage(NamedTuple):
    sender: int
    payload: Optional[int] = None
    big_flag: bool = False
    control_only: bool = False

    def validate(self) -> None:
        if self.control_only and self.payload is not None:
            raise InvalidInput("a control-only message cannot carry a packet")

    def token(self) -> str:
        body = "c" if self.payload is None else str(self.payload)
        return body + "*" if self.big_flag else body


class Kind(Enum):
    HEARD = "H"
    SILENCE = "S"
    COLLISION = "C"


class Feedback(NamedTuple):
    kind: Kind
    message: Optional[OutboundMessage] = None

    @property
    def heard(self) -> bool:
        return self.kind is Kind.HEARD

    def token(self) -> str:
        if self.kind is Kind.HEARD:
            return "H:" + self.message.token()
        return self.kind.value


SILENCE = Feedback(Kind.SILENCE)
COLLISION = Feedback(Kind.COLLISION)


def Heard(message: OutboundMessage) -> Feedback:
    return Feedback(Kind.HEARD, message)


def resolve_round(transmitters: Sequence[OutboundMessage], jammed: bool,
                  config: ChannelConfig) -> Feedback:
    """Return the feedback every station perceives for one round."""
    for m in transmitters:
        m.validate()
    senders = [m.sender for m in transmitters]
    if len(set(senders)) != len(senders):
        raise InvalidInput(f"duplicate sender in one round: {sorted(senders)}")
    for s in senders:
        if not 0 <= s < config.n:
            raise InvalidInput(f"unknown station {s} (n={config.n})")
    if jammed and not config.jamming_enabled:
        raise InvalidInput("jammed round on a channel without jamming")
    if len(transmitters) == 1 and not jammed:
        return Heard(next(iter(transmitters)))
    if not transmitters and not jammed:
        return SILENCE
    return COLLISION if config.collision_detection else SILENCE


class RoundRecord(NamedTuple):
    round: int
    transmitters: tuple
    jammed: bool
    feedback: Feedback
    injections: tuple  # ((station, packet_id), ...)

    def line(self) -> str:
        tx = ",".join(f"{m.sender}:{m.token()}" for m in self.transmitters)
        inj = ",".join(f"{s}:{p}" for s, p in self.injections)
        return f"{self.round};{tx};{int(self.jammed)};{self.feedback.token()};{inj}"


@dataclass
class Trace:
    """Ground-truth log of one execution plus what produced it."""

    config: ChannelConfig
    algorithm: object
    adversary_type: object
    records: list = field(default_factory=list)
    adversary_name: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def horizon(self) -> int:
        return len(self.records)

    def lines(self):
        return [r.line() for r in self.records]

    def canonical(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def write(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.canonical())


def run_simulation(config: ChannelConfig, algorithm, adversary, horizon: int,
                   replicated: bool = False) -> Trace:
    """Execute ``horizon`` rounds of ``algorithm`` against ``adversary``.

    Each round runs the four steps in order: stations transmit or pause, the
    channel resolves feedback, the adversary injects, stations transition.
    With ``replicated=True`` every station keeps and updates its own copy of
    the shared protocol state; otherwise a single copy is stepped.
    """
    from .adversary.budget import TokenBucket

    if horizon < 0:
        raise ConfigError("horizon must be non-negative")
    algorithm.check_channel(config)
    system = algorithm.system(config, replicated=replicated)
    adversary.bind(config, algorithm)
    atype = adversary.type
    inject_budget = TokenBucket(atype.rho, atype.b, kind="inject")
    jam_budget = TokenBucket(atype.lam, atype.b, kind="jam")
    n = config.n
    jamming = config.jamming_enabled
    void = COLLISION if config.collision_detection else SILENCE
    transmissions, deliver = system.transmissions, system.deliver
    adv_jam, adv_inject, adv_observe = adversary.jam, adversary.inject, adversary.observe
    next_id = 0
    records = []
    append = records.append
    for t in range(horizon):
        msgs = transmissions()
        jammed = bool(adv_jam(t))
        if jammed:
            if not jamming:
                raise ConfigError(f"adversary jammed round {t} on a channel without jamming")
            jam_budget.consume(1)
        if len(msgs) == 1:
            fb = void if jammed else Feedback(Kind.HEARD, msgs[0])
        elif not msgs:
            fb = void if jammed else SILENCE
        else:
            fb = resolve_round(msgs, jammed, config)
        targets = adv_inject(t, fb)
        if targets:
            if len(targets) > 1:
                targets = sorted(targets)
            if targets[0] < 0 or targets[-1] >= n:
                raise InvalidInput(f"injection into unknown station in round {t}: {targets}")
            inject_budget.consume(len(targets))
            injections = tuple((s, next_id + k) for k, s in enumerate(targets))
            next_id += len(targets)
        else:
            injections = ()
        inject_budget.tick()
        jam_budget.tick()
        adv_observe(t, fb, injections)
        deliver(fb, injections)
        append(RoundRecord(t, tuple(msgs), jammed, fb, injections))
    return Trace(config, algorithm, atype, records, getattr(adversary, "name", ""))
