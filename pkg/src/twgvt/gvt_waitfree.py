"""Wait-free multi-phase GVT.

Five shared counters track how many workers still have to finish each phase
of a round (A, send, B, aware, end). A worker advances its own phase at most
once per main-loop iteration and only when the previous phase's counter has
drained to zero; otherwise it goes straight back to processing events. No
arm ever waits for another worker.

The value a worker contributes is ``min(min_A, min_B, mints)``. ``mints``
covers every message the worker sent from the iteration in which it first saw
the round until its phase-B arm. Without it, a chain of events that keeps
being executed between two workers' minimum computations can slip under
every contributed value (see ``tests/test_gvt_waitfree.py``); pass
``send_window=False`` to get that unguarded behaviour back.
"""

from __future__ import annotations

from typing import Callable, List, NamedTuple, Optional, Sequence

from ._backend import AtomicInt
from .core import INFINITY, ContractViolation
from .kernel import Phase


class StepOutcome(NamedTuple):
    arm: str
    gvt: Optional[float] = None


class GvtShared:
    """State shared by all workers of one wait-free GVT instance."""

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("need at least one worker")
        self.n = n
        self.c_a = AtomicInt(0)
        self.c_send = AtomicInt(0)
        self.c_b = AtomicInt(0)
        self.c_aware = AtomicInt(0)
        self.c_end = AtomicInt(0)
        self.gvt_flag = AtomicInt(0)
        self.current_gvt_round = AtomicInt(0)
        # one slot per worker, written once per round by its owner
        self.local_minima: List[float] = [INFINITY] * n
        self.published_gvt = 0.0
        self.history: List[float] = []
        self.rounds_started = AtomicInt(0)
        self.flag_resets = AtomicInt(0)

    def counters(self) -> tuple:
        return (self.c_a.load(), self.c_send.load(), self.c_b.load(),
                self.c_aware.load(), self.c_end.load())


def init(g: GvtShared) -> None:
    if g.gvt_flag.load() or g.c_end.load():
        raise ContractViolation("GVT round started while another is active")
    n = g.n
    for c in (g.c_a, g.c_send, g.c_b, g.c_aware, g.c_end):
        c.store(n)
    g.rounds_started.increment()
    g.gvt_flag.store(1)


def try_trigger(w, g: GvtShared) -> bool:
    """Start a round if none is active and this worker wins the round CAS."""
    r = w.my_gvt_round
    if (g.gvt_flag.load() == 0 and g.c_end.load() == 0
            and g.current_gvt_round.compare_and_swap(r, r + 1)):
        init(g)
        return True
    return False


def compute_global_min(slots: Sequence[float]) -> float:
    return min(slots, default=INFINITY)


def step(w, g: GvtShared, *, send_window: bool = True) -> StepOutcome:
    """Run at most one protocol arm for worker ``w``."""
    if not g.gvt_flag.load():
        if w.my_phase is Phase.END:
            w.my_phase = Phase.A
            # no round can start before this decrement, so earlier sends are out of scope
            w.audit.reset_window()
            g.c_end.decrement()
            return StepOutcome("end")
        return StepOutcome("idle")

    w.my_gvt_round = g.current_gvt_round.load()
    phase = w.my_phase
    audit = w.audit

    if phase is Phase.A:
        w.incorporate_inbox()
        audit.min_a = w.local_min()
        w.my_phase = Phase.SEND
        g.c_a.decrement()
        return StepOutcome("A")

    if phase is Phase.SEND and g.c_a.load() == 0:
        w.incorporate_inbox()
        w.send(w.execute_next_event())
        w.my_phase = Phase.B
        g.c_send.decrement()
        return StepOutcome("send")

    if phase is Phase.B and g.c_send.load() == 0:
        w.incorporate_inbox()
        audit.min_b = w.local_min()
        slot = min(audit.min_a, audit.min_b)
        if send_window and audit.mints < slot:
            slot = audit.mints
        g.local_minima[w.id] = slot
        w.my_phase = Phase.AWARE
        g.c_b.decrement()
        return StepOutcome("B")

    if phase is Phase.AWARE and g.c_b.load() == 0:
        gvt = compute_global_min(g.local_minima)
        g.published_gvt = gvt
        w.my_phase = Phase.END
        g.c_aware.decrement()
        if g.c_aware.load() == 0 and g.gvt_flag.compare_and_swap(1, 0):
            g.flag_resets.increment()
            g.history.append(gvt)
        w.adopt_gvt(gvt)
        return StepOutcome("aware", gvt)

    return StepOutcome("noop")


class WaitFreeGvt:
    """Plugs the wait-free protocol into :class:`~twgvt.kernel.Worker`."""

    name = "wf"

    def __init__(self, n: int, *, send_window: bool = True,
                 stall_hook: Optional[Callable] = None) -> None:
        self.shared = GvtShared(n)
        self.send_window = send_window
        # test hook: called as stall_hook(worker, arm) after each arm runs
        self.stall_hook = stall_hook

    @property
    def published_gvt(self) -> float:
        return self.shared.published_gvt

    @property
    def history(self) -> List[float]:
        return self.shared.history

    @property
    def spin_tries(self) -> int:
        return 0

    def begin_iteration(self, w) -> None:
        if not self.shared.gvt_flag.load():
            w.audit.reset_window()

    def on_send(self, w, m) -> None:
        pass

    def step(self, w) -> StepOutcome:
        g = self.shared
        if w.timer.expired():
            w.timer.reset()
            try_trigger(w, g)
        out = step(w, g, send_window=self.send_window)
        if self.stall_hook is not None and out.arm not in ("idle", "noop"):
            self.stall_hook(w, out.arm)
        return out
