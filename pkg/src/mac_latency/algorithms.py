"""Deterministic broadcast algorithms as station-local state machines.

Every algorithm splits its state in two parts:

* a shared part (token holder, void counter, list order, search stack) that
  every station updates identically from the common channel feedback, and
* a private part per station: the FIFO packet queue and, for the
  older-go-first variants, the number of old packets at its head.

A :class:`System` holds the private parts of all stations together with
either one shared copy (fast mode) or one copy per station (replicated mode,
where each station decides on its own whether to transmit). Both modes
produce identical executions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .channel import ChannelConfig, Kind, OutboundMessage
from .errors import ConfigError

ALGORITHMS = ("rrw", "of-rrw", "srr", "of-srr", "mbtf", "jrrw", "of-jrrw", "c-rrw", "ofc-rrw")

_HEARD = Kind.HEARD
_COLLISION = Kind.COLLISION


# -- shared state ------------------------------------------------------------

class RingState:
    """Token passed around stations 0..n-1 in cyclic order.

    Non-control variants move the token after ``move_after`` consecutive void
    rounds; control variants move it when a control-only message is heard.
    A phase ends when the token moves from station n-1 back to station 0.
    """

    __slots__ = ("n", "holder", "voids", "phase", "visit", "move_after", "control")

    def __init__(self, n, move_after=1, control=False):
        self.n = n
        self.holder = 0
        self.voids = 0
        self.phase = 0
        self.visit = 0  # counts token moves
        self.move_after = move_after
        self.control = control

    def copy(self):
        c = RingState(self.n, self.move_after, self.control)
        c.holder, c.voids, c.phase, c.visit = self.holder, self.voids, self.phase, self.visit
        return c

    def candidates(self):
        return (self.holder,)

    def advance(self, fb) -> bool:
        if fb.kind is _HEARD:
            if not (self.control and fb.message.control_only):
                self.voids = 0
                return False
        else:
            if self.control:
                return False  # a void round was jammed; the holder retries
            self.voids += 1
            if self.voids < self.move_after:
                return False
        self.voids = 0
        self.visit += 1
        self.holder += 1
        if self.holder == self.n:
            self.holder = 0
            self.phase += 1
            return True
        return False

    def key(self):
        return (self.holder, self.voids, self.phase, self.visit)


class ListState:
    """Move-big-to-front list with a token position.

    ``advance`` returns True when a pass ends: either the token wraps to the
    front of the list or a big station is moved up from a later position.
    """

    __slots__ = ("n", "order", "pos", "passes", "visit", "control")

    def __init__(self, n, control=False):
        self.n = n
        self.order = list(range(n))
        self.pos = 0
        self.passes = 0
        self.visit = 0  # counts forward token moves
        self.control = control

    def copy(self):
        c = ListState(self.n, self.control)
        c.order, c.pos, c.passes, c.visit = list(self.order), self.pos, self.passes, self.visit
        return c

    @property
    def holder(self):
        return self.order[self.pos]

    def candidates(self):
        return (self.order[self.pos],)

    def advance(self, fb) -> bool:
        if fb.kind is _HEARD:
            msg = fb.message
            if msg.big_flag:
                idx = self.order.index(msg.sender)
                if idx:
                    del self.order[idx]
                    self.order.insert(0, msg.sender)
                self.pos = 0
                if idx:
                    self.passes += 1
                return idx > 0
        elif self.control:
            return False
        self.visit += 1
        self.pos += 1
        if self.pos == self.n:
            self.pos = 0
            self.passes += 1
            return True
        return False

    def key(self):
        return (tuple(self.order), self.pos, self.passes, self.visit)


class SearchState:
    """Sweep of binary searches over station names using collision detection.

    The queried segment is ``[lo, hi]``; a collision queries the left part of
    size ceil(s/2) next and pushes the right part. A heard station withholds
    the channel until a void round, after which the next segment is popped.
    An empty stack ends the sweep (a phase) and restarts at ``[0, n-1]``.
    """

    __slots__ = ("n", "lo", "hi", "stack", "holder", "phase")

    def __init__(self, n):
        self.n = n
        self.lo, self.hi = 0, n - 1
        self.stack = []
        self.holder = None
        self.phase = 0

    def copy(self):
        c = SearchState(self.n)
        c.lo, c.hi, c.stack = self.lo, self.hi, list(self.stack)
        c.holder, c.phase = self.holder, self.phase
        return c

    def candidates(self):
        if self.holder is not None:
            return (self.holder,)
        return range(self.lo, self.hi + 1)

    def _next_segment(self) -> bool:
        if self.stack:
            self.lo, self.hi = self.stack.pop()
            return False
        self.lo, self.hi = 0, self.n - 1
        self.phase += 1
        return True

    def advance(self, fb) -> bool:
        if self.holder is not None:
            if fb.kind is _HEARD:
                return False
            self.holder = None
            return self._next_segment()
        if fb.kind is _HEARD:
            self.holder = fb.message.sender
            return False
        if fb.kind is _COLLISION:
            if self.lo < self.hi:
                left = (self.hi - self.lo + 2) // 2
                self.stack.append((self.lo + left, self.hi))
                self.hi = self.lo + left - 1
            return False
        return self._next_segment()

    def key(self):
        return (self.lo, self.hi, tuple(self.stack), self.holder, self.phase)


# -- stations ----------------------------------------------------------------

class Station:
    __slots__ = ("name", "queue", "old", "shared", "yielded")

    def __init__(self, name):
        self.name = name
        self.queue = deque()
        self.old = 0
        self.shared = None
        self.yielded = -1  # token visit in which this station paused


# A holder that has once paused (or sent a control-only message) during its
# token visit has exhausted its queue; it stays idle until the token moves,
# even if packets arrive while the void rounds are being counted.

def _ring_decide(alg, shared, st):
    if shared.holder != st.name:
        return None
    if st.yielded != shared.visit:
        if st.old if alg.older_first else st.queue:
            return OutboundMessage(st.name, st.queue[0])
        st.yielded = shared.visit
    if alg.control:
        return OutboundMessage(st.name, control_only=True)
    return None


def _list_decide(alg, shared, st):
    if shared.order[shared.pos] != st.name:
        return None
    if st.yielded != shared.visit:
        if st.queue:
            return OutboundMessage(st.name, st.queue[0], big_flag=len(st.queue) >= shared.n)
        st.yielded = shared.visit
    if shared.control:
        return OutboundMessage(st.name, control_only=True)
    return None


def _search_decide(alg, shared, st):
    if shared.holder is not None:
        if shared.holder != st.name:
            return None
    elif not shared.lo <= st.name <= shared.hi:
        return None
    if st.old if alg.older_first else st.queue:
        return OutboundMessage(st.name, st.queue[0])
    return None


# -- algorithm descriptors ---------------------------------------------------

@dataclass(frozen=True)
class Algorithm:
    """An algorithm identifier together with its parameters.

    ``threshold`` overrides the number of void rounds that move the token in
    the non-control ring algorithms; it exists to build faulty mutants.
    ``mbtf_control`` selects the MBTF variant; ``None`` picks the control-bit
    variant exactly when the channel has jamming.
    """

    name: str
    J: Optional[int] = None
    threshold: Optional[int] = None
    mbtf_control: Optional[bool] = None

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; expected one of {', '.join(ALGORITHMS)}")
        if self.name in ("jrrw", "of-jrrw"):
            if self.J is None:
                raise ConfigError(f"{self.name} requires the parameter J")
            if not isinstance(self.J, int) or self.J < 0:
                raise ConfigError(f"J must be a non-negative integer, got {self.J!r}")
        if self.threshold is not None and self.threshold < 1:
            raise ConfigError("threshold must be at least 1")

    @property
    def family(self) -> str:
        if self.name in ("srr", "of-srr"):
            return "search"
        if self.name == "mbtf":
            return "list"
        return "ring"

    @property
    def older_first(self) -> bool:
        return self.name.startswith("of")

    @property
    def control(self) -> bool:
        return self.name in ("c-rrw", "ofc-rrw")

    @property
    def adaptive(self) -> bool:
        return self.control or self.name == "mbtf"

    @property
    def phase_algorithm(self) -> bool:
        return self.family != "list"

    @property
    def move_after(self) -> int:
        if self.threshold is not None:
            return self.threshold
        if self.name in ("jrrw", "of-jrrw"):
            return self.J + 1
        return 1

    @property
    def label(self) -> str:
        if self.J is not None and self.name in ("jrrw", "of-jrrw"):
            return f"{self.name}(J={self.J})"
        return self.name

    def uses_control_list(self, config: ChannelConfig) -> bool:
        if self.mbtf_control is not None:
            return self.mbtf_control
        return config.jamming_enabled

    def check_channel(self, config: ChannelConfig) -> None:
        if self.name in ("rrw", "of-rrw", "srr", "of-srr") and config.jamming_enabled:
            raise ConfigError(f"{self.name} runs only on channels without jamming")
        if self.family == "search" and not config.collision_detection:
            raise ConfigError(f"{self.name} requires collision detection")
        if self.name == "mbtf" and config.jamming_enabled and self.mbtf_control is False:
            raise ConfigError("the silent-round MBTF variant cannot run on a jamming channel")

    def new_shared(self, config: ChannelConfig):
        if self.family == "ring":
            return RingState(config.n, self.move_after, self.control)
        if self.family == "list":
            return ListState(config.n, self.uses_control_list(config))
        return SearchState(config.n)

    def system(self, config: ChannelConfig, replicated: bool = False) -> "System":
        return System(self, config, replicated)


def make_algorithm(name: str, J: Optional[int] = None, **kw) -> Algorithm:
    if name not in ("jrrw", "of-jrrw"):
        J = None
    return Algorithm(name, J, **kw)


_DECIDE = {"ring": _ring_decide, "list": _list_decide, "search": _search_decide}


class System:
    """All stations of one execution.

    ``transmissions()`` gives the messages sent in the current round and
    ``deliver(feedback, injections)`` performs the state transition.
    """

    def __init__(self, algorithm: Algorithm, config: ChannelConfig, replicated=False):
        self.algorithm = algorithm
        self.config = config
        self.n = config.n
        self.replicated = replicated
        self.stations = [Station(i) for i in range(config.n)]
        self._decide = _DECIDE[algorithm.family]
        self._older_first = algorithm.older_first
        if replicated:
            for st in self.stations:
                st.shared = algorithm.new_shared(config)
            self.shared = self.stations[0].shared
        else:
            self.shared = algorithm.new_shared(config)

    def transmissions(self):
        alg, decide = self.algorithm, self._decide
        out = []
        if self.replicated:
            for st in self.stations:
                m = decide(alg, st.shared, st)
                if m is not None:
                    out.append(m)
            return out
        shared, stations = self.shared, self.stations
        for s in shared.candidates():
            m = decide(alg, shared, stations[s])
            if m is not None:
                out.append(m)
        return out

    def deliver(self, fb, injections) -> bool:
        if self.replicated:
            ends = [st.shared.advance(fb) for st in self.stations]
            if len(set(ends)) != 1:
                raise AssertionError("stations disagree on the shared state")
            phase_end = ends[0]
        else:
            phase_end = self.shared.advance(fb)
        stations = self.stations
        if fb.kind is _HEARD and fb.message.payload is not None:
            st = stations[fb.message.sender]
            st.queue.popleft()
            if st.old:
                st.old -= 1
        for s, pid in injections:
            stations[s].queue.append(pid)
        if phase_end and self._older_first:
            for st in stations:
                st.old = len(st.queue)
        return phase_end

    def queue_sizes(self):
        return [len(st.queue) for st in self.stations]

    def total_queued(self) -> int:
        return sum(len(st.queue) for st in self.stations)

    def shared_keys(self):
        """The shared state as seen by each station (one entry in fast mode)."""
        if self.replicated:
            return [st.shared.key() for st in self.stations]
        return [self.shared.key()]
