"""Critical-section GVT baseline.

A round starts by setting a shared flag to N. Each worker, the first time it
sees the flag during that round, takes a test-and-set spin lock, folds its
inbox into its queues, writes ``min(local minimum, min timestamp sent)`` and
decrements the flag. Whoever brings the flag to zero computes and publishes
the global minimum before releasing the lock. Every failed test-and-set is
counted in ``spin_tries``.
"""

from __future__ import annotations

from typing import Callable, List, Optional

from ._backend import AtomicInt
from .core import INFINITY, ContractViolation
from .gvt_waitfree import StepOutcome


class FhShared:
    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("need at least one worker")
        self.n = n
        # 0 = idle, k > 0 = k workers still to contribute
        self.gvt_flag = AtomicInt(0)
        self.round = AtomicInt(0)
        self.guard = AtomicInt(0)
        self.spin_tries = AtomicInt(0)
        self.contributions = AtomicInt(0)
        self.send_min: List[float] = [INFINITY] * n
        self.local_minima: List[float] = [INFINITY] * n
        self.published_gvt = 0.0
        self.history: List[float] = []
        # (worker, enter ticket, exit ticket) when tracing is on
        self.cs_trace: Optional[list] = None
        self._ticket = AtomicInt(0)


def fh_start(g: FhShared) -> None:
    if g.gvt_flag.load() != 0:
        raise ContractViolation("FH round started while another is active")
    g.gvt_flag.store(g.n)


def fh_try_start(w, g: FhShared) -> bool:
    r = w.fh_round
    if g.gvt_flag.load() == 0 and g.round.compare_and_swap(r, r + 1):
        fh_start(g)
        return True
    return False


def _active_for(w, g: FhShared) -> bool:
    return g.gvt_flag.load() > 0 and w.fh_round != g.round.load()


def fh_on_send(w, g: FhShared, m) -> None:
    if g.gvt_flag.load() > 0 and not _active_for(w, g):
        return  # already contributed this round
    if m.recv_time < g.send_min[w.id]:
        g.send_min[w.id] = m.recv_time


def acquire(g: FhShared) -> None:
    guard, tries = g.guard, g.spin_tries
    while not guard.compare_and_swap(0, 1):
        tries.increment()


def release(g: FhShared) -> None:
    g.guard.store(0)


def fh_step(w, g: FhShared, stall_hook: Optional[Callable] = None) -> StepOutcome:
    if not _active_for(w, g):
        return StepOutcome("idle")
    acquire(g)
    gvt = None
    try:
        if g.cs_trace is not None:
            enter = g._ticket.increment()
        if stall_hook is not None:
            stall_hook(w, "cs")
        w.incorporate_inbox()
        local = min(w.local_min(), g.send_min[w.id])
        g.local_minima[w.id] = local
        w.fh_round = g.round.load()
        g.contributions.increment()
        if g.gvt_flag.decrement() == 0:
            gvt = min(g.local_minima)
            g.published_gvt = gvt
            g.history.append(gvt)
        if g.cs_trace is not None:
            g.cs_trace.append((w.id, enter, g._ticket.increment()))
    finally:
        release(g)
    if gvt is not None:
        w.adopt_gvt(gvt)
    return StepOutcome("contribute", gvt)


class CriticalSectionGvt:
    """Plugs the critical-section protocol into :class:`~twgvt.kernel.Worker`."""

    name = "fh"

    def __init__(self, n: int, *, stall_hook: Optional[Callable] = None,
                 trace: bool = False) -> None:
        self.shared = FhShared(n)
        if trace:
            self.shared.cs_trace = []
        # test hook: called as stall_hook(worker, "cs") while holding the lock
        self.stall_hook = stall_hook

    @property
    def published_gvt(self) -> float:
        return self.shared.published_gvt

    @property
    def history(self) -> List[float]:
        return self.shared.history

    @property
    def spin_tries(self) -> int:
        return self.shared.spin_tries.load()

    def begin_iteration(self, w) -> None:
        g = self.shared
        if len(g.history) > len(w.gvt_seen):
            w.adopt_gvt(g.published_gvt)
        if not _active_for(w, g):
            g.send_min[w.id] = INFINITY

    def on_send(self, w, m) -> None:
        fh_on_send(w, self.shared, m)

    def step(self, w) -> StepOutcome:
        g = self.shared
        if w.timer.expired():
            w.timer.reset()
            fh_try_start(w, g)
        return fh_step(w, g, self.stall_hook)
