"""Online adversaries: scripted, greedy, seeded random, and the two tightness constructions.

Adversaries see only public information: the channel feedback and their own
injections. Since the algorithms are deterministic and their shared state
depends only on feedback, an adversary can keep a shadow copy of the whole
system and read off the token position and every queue size.
"""

from __future__ import annotations

import math
import os
import random
from fractions import Fraction
from typing import Optional

from ..errors import ConfigError
from .budget import AdversaryScript, AdversaryType, TokenBucket


class Shadow:
    """A replica of the stations' state driven by public feedback."""

    def __init__(self, config, algorithm):
        self.system = algorithm.system(config, replicated=False)
        self.family = algorithm.family
        self.n = config.n

    @property
    def shared(self):
        return self.system.shared

    def holder(self, shared=None) -> Optional[int]:
        shared = shared or self.system.shared
        if self.family == "list":
            return shared.order[shared.pos]
        return shared.holder

    def position(self, shared=None) -> int:
        """Token position counted across phases (ring) or passes (list)."""
        shared = shared or self.system.shared
        if self.family == "ring":
            return shared.phase * self.n + shared.holder
        if self.family == "list":
            return shared.passes * self.n + shared.pos
        return shared.phase

    def peek(self, fb):
        """The shared state after this round's transition."""
        nxt = self.system.shared.copy()
        nxt.advance(fb)
        return nxt

    def queue(self, s) -> int:
        return len(self.system.stations[s].queue)

    def transmissions(self):
        return self.system.transmissions()

    def deliver(self, fb, injections):
        self.system.deliver(fb, injections)


class Adversary:
    """Base class. Subclasses override ``_jam`` and ``_inject``.

    ``jam(t)`` is asked after the stations have chosen their messages and
    ``inject(t, feedback)`` after the channel resolved the round; ``observe``
    closes the round.
    """

    name = "adversary"
    uses_shadow = False

    def __init__(self, atype: AdversaryType):
        self.type = atype

    def bind(self, config, algorithm) -> None:
        self.config = config
        self.algorithm = algorithm
        self.n = config.n
        self.jam_bucket = TokenBucket(self.type.lam, self.type.b, kind="jam")
        self.inject_bucket = TokenBucket(self.type.rho, self.type.b, kind="inject")
        self.shadow = Shadow(config, algorithm) if self.uses_shadow else None
        self.setup()

    def setup(self) -> None:
        pass

    def jam(self, t) -> bool:
        if not self.config.jamming_enabled or not self.jam_bucket.permits(1):
            return False
        if self._jam(t):
            self.jam_bucket.consume(1)
            return True
        return False

    def inject(self, t, fb):
        targets = list(self._inject(t, fb, self.inject_bucket.allowance()))
        self.inject_bucket.consume(len(targets))
        return targets

    def observe(self, t, fb, injections) -> None:
        self.jam_bucket.tick()
        self.inject_bucket.tick()
        if self.shadow is not None:
            self.shadow.deliver(fb, injections)

    def _jam(self, t) -> bool:
        return False

    def _inject(self, t, fb, allowance):
        return ()


class Scripted(Adversary):
    """Replays a fixed script. Budgets are enforced by the simulator."""

    name = "script"

    def __init__(self, script: AdversaryScript, atype: AdversaryType, name=None):
        super().__init__(atype)
        self.script = script
        if name:
            self.name = name

    def jam(self, t) -> bool:
        return t in self.script.jams

    def inject(self, t, fb):
        return list(self.script.injections.get(t, ()))

    def observe(self, t, fb, injections) -> None:
        pass


class _BehindToken:
    """Tracks the station the token most recently left."""

    def __init__(self, shadow: Shadow, n: int):
        self.shadow = shadow
        self.last_left = n - 1

    def target(self, fb) -> int:
        sh = self.shadow
        if sh.family == "search":
            if fb.heard:
                self.last_left = fb.message.sender
            return self.last_left
        before = sh.holder()
        after = sh.holder(sh.peek(fb))
        if after != before:
            self.last_left = before
        return self.last_left


class Greedy(Adversary):
    """Jams whenever the jam bucket permits and injects the maximum every round.

    ``targeting`` is ``"single:<i>"``, ``"round-robin"`` or ``"behind-token"``.
    """

    def __init__(self, atype: AdversaryType, targeting: str = "single:0"):
        super().__init__(atype)
        self.targeting = targeting
        if targeting.startswith("single:"):
            try:
                self.station = int(targeting.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad targeting {targeting!r}") from None
        elif targeting not in ("round-robin", "behind-token"):
            raise ConfigError(f"unknown targeting {targeting!r}")
        self.uses_shadow = targeting == "behind-token"
        self.name = f"greedy-{targeting.replace(':', '')}"

    def setup(self):
        if self.targeting.startswith("single:") and not 0 <= self.station < self.n:
            raise ConfigError(f"station {self.station} does not exist (n={self.n})")
        self._next = 0
        if self.uses_shadow:
            self._behind = _BehindToken(self.shadow, self.n)

    def _jam(self, t):
        return True

    def _inject(self, t, fb, allowance):
        if self.targeting == "behind-token":
            s = self._behind.target(fb)
            return [s] * allowance
        if self.targeting == "round-robin":
            out = [(self._next + k) % self.n for k in range(allowance)]
            self._next = (self._next + allowance) % self.n
            return out
        return [self.station] * allowance


class RandomBudgeted(Adversary):
    """Seeded fuzzing adversary that always stays within its budgets.

    Each seed draws its own injection and jamming intensities and a preferred
    subset of stations, so different seeds explore different load shapes.
    """

    def __init__(self, atype: AdversaryType, seed: int = 0):
        super().__init__(atype)
        self.seed = seed
        self.name = f"random-{seed}"

    def setup(self):
        self.rng = random.Random(self.seed)
        self.p_inject = self.rng.random()
        self.p_jam = self.rng.random()
        k = self.rng.randint(1, self.n)
        self.targets = sorted(self.rng.sample(range(self.n), k))

    def _jam(self, t):
        return self.rng.random() < self.p_jam

    def _inject(self, t, fb, allowance):
        out = []
        for _ in range(allowance):
            if self.rng.random() < self.p_inject:
                out.append(self.rng.choice(self.targets))
        return out


class JrrwTightness(Adversary):
    """Builds long phases, then hides one packet behind a withholding station.

    Warm-up: for ``warmup`` phases inject at full power into the station the
    token just left and jam every round in which a message would be heard.
    In the last warm-up phase, once the token has left station 0 all
    injections go to station 0, and once it has left station 1 a single
    victim packet goes to station 1. Then station 0 alone receives packets
    until the victim is heard, keeping the token away from station 1.
    """

    uses_shadow = True
    name = "jrrw-tightness"

    def __init__(self, atype: AdversaryType, J: Optional[int] = None,
                 warmup: Optional[int] = None):
        super().__init__(atype)
        if not atype.stable:
            raise ConfigError("the tightness construction needs rho + lambda < 1")
        if J is not None and Fraction(J) < Fraction(atype.b) / (2 * (1 - atype.lam)):
            raise ConfigError(f"J={J} is below b/(2(1-lambda)) = {Fraction(atype.b) / (2 * (1 - atype.lam))}")
        self.J = J
        self.warmup = warmup
        self.victim = None
        self.victim_heard = False

    def setup(self):
        if self.algorithm.family != "ring":
            raise ConfigError("the jrrw tightness construction needs a round-robin token algorithm")
        if self.n < 2:
            raise ConfigError("the jrrw tightness construction needs n >= 2")
        if self.warmup is None:
            d = self.type.rho / (1 - self.type.lam)
            self.warmup = max(self.n, math.ceil(3 / (1 - d)))
        self._behind = _BehindToken(self.shadow, self.n)
        self._victim_pending = False

    def _jam(self, t):
        return bool(self.shadow.transmissions())

    def _inject(self, t, fb, allowance):
        sh = self.shadow
        behind = self._behind.target(fb)
        pos = sh.position(sh.peek(fb))
        base = (self.warmup - 1) * self.n
        if self.victim is not None or self._victim_pending:
            if self.victim_heard:
                return [behind] * allowance
            return [0] * allowance
        if pos >= base + 2 and allowance:
            self._victim_pending = True
            return [1] + [0] * (allowance - 1)
        if pos >= base + 1:
            return [0] * allowance
        return [behind] * allowance

    def observe(self, t, fb, injections):
        if fb.heard and fb.message.payload == self.victim and self.victim is not None:
            self.victim_heard = True
        if self._victim_pending:
            for s, pid in injections:
                if s == 1:
                    self.victim = pid
                    self._victim_pending = False
                    break
        super().observe(t, fb, injections)


class MbtfTightness(Adversary):
    """Keeps the token away from the last list station by making stations big.

    First the last station is filled to n-1 packets. Afterwards each packet
    goes to the critical station: the one closest to the end of the list,
    strictly between the token and the last station, that is not yet big.
    Jams at full power on a jamming channel.
    """

    uses_shadow = True
    name = "mbtf-tightness"

    def __init__(self, atype: AdversaryType, check_rate: bool = True):
        super().__init__(atype)
        if not atype.stable:
            raise ConfigError("the tightness construction needs rho + lambda < 1")
        if check_rate and atype.rho < Fraction(1, 2):
            raise ConfigError("the mbtf tightness construction assumes rho >= 1/2")

    def setup(self):
        if self.algorithm.family != "list":
            raise ConfigError("the mbtf tightness construction needs MBTF")
        self._behind = _BehindToken(self.shadow, self.n)

    def _jam(self, t):
        return True

    def _inject(self, t, fb, allowance):
        if not allowance:
            return ()
        sh = self.shadow
        n = self.n
        state = sh.peek(fb)
        order, pos = state.order, state.pos
        extra = {}

        def size(s):
            return sh.queue(s) + extra.get(s, 0) - (
                1 if fb.heard and fb.message.sender == s and fb.message.payload is not None else 0)

        out = []
        last = order[-1]
        for _ in range(allowance):
            target = None
            if size(last) < n - 1 and pos != n - 1:
                target = last
            else:
                for i in range(n - 2, pos, -1):
                    if size(order[i]) < n:
                        target = order[i]
                        break
            if target is None:
                target = self._behind.last_left if n > 1 else 0
            extra[target] = extra.get(target, 0) + 1
            out.append(target)
        return out


STRATEGIES = ("greedy-single", "greedy-round-robin", "greedy-behind-token",
              "random", "jrrw-tightness", "mbtf-tightness")


def make_adversary(spec: str, atype: AdversaryType, seed: int = 0,
                   J: Optional[int] = None) -> Adversary:
    """Build an adversary from a short name.

    Accepted: ``greedy`` / ``greedy-single[:i]``, ``greedy-round-robin``,
    ``greedy-behind-token``, ``random``, ``jrrw-tightness``,
    ``mbtf-tightness`` and ``script:PATH``.
    """
    if spec.startswith("script:"):
        path = spec.split(":", 1)[1]
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read script {path}: {exc}") from None
        return Scripted(AdversaryScript.loads(text), atype, name="script-" + os.path.basename(path))
    if spec in ("greedy", "greedy-single"):
        return Greedy(atype, "single:0")
    if spec.startswith("greedy-single:"):
        return Greedy(atype, "single:" + spec.split(":", 1)[1])
    if spec == "greedy-round-robin":
        return Greedy(atype, "round-robin")
    if spec == "greedy-behind-token":
        return Greedy(atype, "behind-token")
    if spec == "random":
        return RandomBudgeted(atype, seed)
    if spec == "jrrw-tightness":
        return JrrwTightness(atype, J)
    if spec == "mbtf-tightness":
        return MbtfTightness(atype)
    raise ConfigError(f"unknown adversary {spec!r}")
