"""Worker main loop, speculative execution, rollback and fossil collection.

A :class:`Worker` owns a fixed set of LPs and runs one main-loop iteration at
a time: incorporate the inbox, execute the lowest pending event across its
LPs, send the output, then take one step of whichever GVT protocol is
plugged in. Nothing in here blocks or waits on another worker.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

from .core import INFINITY, MIN_KEY, Message, make_antimessage, new_event
from .queues import EventQueue, ProtocolFault, Router, incorporate


class Phase(enum.Enum):
    A = "A"
    SEND = "send"
    B = "B"
    AWARE = "aware"
    END = "end"


class Outgoing(NamedTuple):
    """A message drafted by a model handler; the kernel assigns its id."""
    dst: int
    recv_time: float
    payload: bytes = b""


class Snapshot(NamedTuple):
    key: tuple
    state: Any
    seq: int

    @property
    def time(self) -> float:
        return self.key[0]


class LpState:
    """One logical process: queue, model state, snapshots and output log."""

    __slots__ = ("id", "queue", "state", "seq", "clock", "snapshots",
                 "output_log", "since_snapshot")

    def __init__(self, lp_id: int, state: Any, seq: int, model) -> None:
        self.id = lp_id
        self.queue = EventQueue(lp_id)
        self.state = state
        self.seq = seq
        self.clock = 0.0
        self.snapshots: List[Snapshot] = [Snapshot(MIN_KEY, model.snapshot(state), seq)]
        # (key of the event that produced the message, message)
        self.output_log: List[tuple] = []
        self.since_snapshot = 0

    def __repr__(self) -> str:
        return f"LpState(id={self.id}, clock={self.clock}, pending={len(self.queue)})"


@dataclass
class GvtAudit:
    """Per-round GVT bookkeeping of one worker.

    ``mints`` is the minimum recv_time sent by the worker since the start of
    the main-loop iteration in which it first saw the current round, up to
    its phase-B arm (or its FH contribution).
    """
    mints: float = INFINITY
    min_a: float = INFINITY
    min_b: float = INFINITY

    def reset_window(self) -> None:
        self.mints = INFINITY


@dataclass
class WorkerStats:
    iterations: int = 0
    executed: int = 0
    rollbacks: int = 0
    rolled_back_events: int = 0
    sent: int = 0
    antis_sent: int = 0
    committed: int = 0
    reclaimed_snapshots: int = 0
    reclaimed_log: int = 0


class IterationReport(NamedTuple):
    executed: int
    rollbacks: int
    sent: int
    arm: str
    gvt: Optional[float]

    @property
    def idle(self) -> bool:
        return not (self.executed or self.rollbacks or self.sent) and self.arm in ("idle", "noop")


class ReclaimReport(NamedTuple):
    events: int
    snapshots: int
    log_entries: int


class WallTimer:
    """GVT trigger timer on the wall clock (one per worker)."""

    def __init__(self, interval_s: float) -> None:
        self.interval_s = interval_s
        self._last = time.monotonic()

    def expired(self) -> bool:
        return time.monotonic() - self._last >= self.interval_s

    def reset(self) -> None:
        self._last = time.monotonic()


class StepTimer:
    """Expires every ``every`` checks; deterministic, for scheduled tests."""

    def __init__(self, every: int) -> None:
        self.every = every
        self._n = 0

    def expired(self) -> bool:
        self._n += 1
        return self._n >= self.every

    def reset(self) -> None:
        self._n = 0


class ManualTimer:
    def __init__(self) -> None:
        self.armed = False

    def fire(self) -> None:
        self.armed = True

    def expired(self) -> bool:
        return self.armed

    def reset(self) -> None:
        self.armed = False


class Worker:
    """One worker thread's private world (the kernel's ``WorkerState``)."""

    def __init__(self, wid: int, lps: Sequence[LpState], router: Router, model,
                 protocol, *, t_end: float = INFINITY, checkpoint_interval: int = 1,
                 timer=None, commit_hook: Optional[Callable] = None,
                 track_commits: bool = False) -> None:
        if checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be >= 1")
        self.id = wid
        self.lps = list(lps)
        self.lp_by_id: Dict[int, LpState] = {lp.id: lp for lp in self.lps}
        self.router = router
        self.model = model
        self.protocol = protocol
        self.t_end = t_end
        self.checkpoint_interval = checkpoint_interval
        self.timer = timer if timer is not None else ManualTimer()
        self.commit_hook = commit_hook
        self.track_commits = track_commits

        self.my_phase = Phase.A
        self.my_gvt_round = 0
        self.fh_round = 0
        self.audit = GvtAudit()
        self.stats = WorkerStats()
        self.gvt = 0.0
        self.gvt_seen: List[float] = []
        self.committed: List[tuple] = []
        self.violations: List[str] = []
        self.frozen = False
        self.done = False

    # -- message handling -------------------------------------------------
    def send(self, msgs: Sequence[Message]) -> None:
        audit = self.audit
        protocol = self.protocol
        route = self.router.send
        for m in msgs:
            if m.recv_time < audit.mints:
                audit.mints = m.recv_time
            protocol.on_send(self, m)
            route(m)
            if m.is_anti:
                self.stats.antis_sent += 1
            else:
                self.stats.sent += 1

    def incorporate_inbox(self) -> int:
        """Drain the inbox into the LP queues and run any rollbacks raised.

        Anti-messages produced by those rollbacks are sent before returning.
        Returns the number of rollbacks executed.
        """
        msgs = self.router.drain(self.id)
        if not msgs:
            return 0
        groups: Dict[int, List[Message]] = {}
        for m in msgs:
            groups.setdefault(m.dst, []).append(m)
        n = 0
        for lp_id, batch in groups.items():
            lp = self.lp_by_id.get(lp_id)
            if lp is None:
                raise ProtocolFault(f"worker {self.id} received a message for LP {lp_id}")
            rep = incorporate(lp, batch)
            self.stats.rolled_back_events += rep.refilled
            if rep.rollback_to is not None:
                self.send(self.rollback(lp, rep.rollback_to))
                n += 1
        return n

    # -- execution ---------------------------------------------------------
    def next_lp(self) -> Optional[LpState]:
        best = None
        best_key = None
        t_end = self.t_end
        for lp in self.lps:
            ev = lp.queue.peek()
            if ev is None or ev.recv_time >= t_end:
                continue
            k = ev.key
            if best_key is None or k < best_key:
                best, best_key = lp, k
        return best

    def execute_next_event(self) -> List[Message]:
        if self.frozen:
            return []
        lp = self.next_lp()
        if lp is None:
            return []
        ev = lp.queue.pop()
        lp.queue.append_processed(ev)
        lp.clock = ev.recv_time
        drafts = self.model.handle(lp.id, lp.state, ev)
        out = []
        seq = lp.seq
        for d in drafts:
            out.append(new_event(lp.id, seq, d.dst, ev.recv_time, d.recv_time, d.payload))
            seq += 1
        lp.seq = seq
        if out:
            key = ev.key
            lp.output_log.extend((key, m) for m in out)
        lp.since_snapshot += 1
        if lp.since_snapshot >= self.checkpoint_interval:
            lp.snapshots.append(Snapshot(ev.key, self.model.snapshot(lp.state), seq))
            lp.since_snapshot = 0
        self.stats.executed += 1
        return out

    def rollback(self, lp: LpState, to) -> List[Message]:
        """Undo every executed event of ``lp`` whose key is >= ``to``.

        ``to`` is either an event key or a plain virtual time; a time ``t``
        keeps events with recv_time <= ``t``. Returns the anti-messages for
        every logged send made by an undone event.
        """
        bound = to if isinstance(to, tuple) else (to, INFINITY)
        t = bound[0]
        floor = self.protocol.published_gvt
        if t < floor:
            self.violations.append(
                f"LP {lp.id}: rollback to {t!r} below published GVT {floor!r}")

        snaps = lp.snapshots
        while snaps and snaps[-1].key >= bound:
            snaps.pop()
        if not snaps:
            raise ProtocolFault(
                f"LP {lp.id}: no snapshot below {bound[0]!r} (fossil floor "
                f"{lp.queue.floor_key[0]!r}); GVT was overestimated")
        snap = snaps[-1]

        self.stats.rolled_back_events += lp.queue.refill_from(bound)
        state = self.model.restore(snap.state)
        seq = snap.seq
        processed = lp.queue.processed
        i = len(processed)
        while i and processed[i - 1].key > snap.key:
            i -= 1
        handle = self.model.handle
        for ev in processed[i:]:
            seq += len(handle(lp.id, state, ev))
        lp.state = state
        lp.seq = seq
        lp.since_snapshot = len(processed) - i

        log = lp.output_log
        j = len(log)
        while j and log[j - 1][0] >= bound:
            j -= 1
        antis = [make_antimessage(m) for _, m in log[j:]]
        del log[j:]
        lp.clock = t
        self.stats.rollbacks += 1
        return antis

    def local_min(self) -> float:
        m = INFINITY
        for lp in self.lps:
            t = lp.queue.min_time()
            if t < m:
                m = t
        return m

    # -- GVT adoption ------------------------------------------------------
    def fossil_collect(self, gvt: float) -> ReclaimReport:
        events = snaps_dropped = log_dropped = 0
        track = self.track_commits
        for lp in self.lps:
            q = lp.queue
            snaps = lp.snapshots
            i = len(snaps) - 1
            while i > 0 and snaps[i].time >= gvt:
                i -= 1
            if i > 0:
                del snaps[:i]
                snaps_dropped += i
            keep = snaps[0].key
            processed = q.processed
            n = 0
            while n < len(processed) and processed[n].key <= keep:
                n += 1
            if n:
                gone = processed[:n]
                del processed[:n]
                for ev in gone:
                    del q.processed_ids[ev.id]
                if track:
                    self.committed.extend((ev.id, ev.recv_time) for ev in gone)
                events += n
                q.floor_key = keep
            log = lp.output_log
            k = 0
            while k < len(log) and log[k][0][0] < gvt:
                k += 1
            if k:
                del log[:k]
                log_dropped += k
            if gvt > q.horizon:
                q.horizon = gvt
        self.stats.committed += events
        self.stats.reclaimed_snapshots += snaps_dropped
        self.stats.reclaimed_log += log_dropped
        return ReclaimReport(events, snaps_dropped, log_dropped)

    def adopt_gvt(self, gvt: float) -> None:
        """Apply a newly published GVT: fossil-collect, run the commit hook."""
        if gvt < self.gvt:
            self.violations.append(f"GVT went backwards: {self.gvt!r} -> {gvt!r}")
            return
        self.gvt_seen.append(gvt)
        self.gvt = gvt
        self.fossil_collect(gvt)
        commit_action_hook(self, gvt)
        if gvt >= self.t_end:
            self.done = True

    def finish(self) -> None:
        """Count the executed events still held once the run has ended."""
        for lp in self.lps:
            evs = [ev for ev in lp.queue.processed if ev.recv_time < self.gvt]
            self.stats.committed += len(evs)
            if self.track_commits:
                self.committed.extend((ev.id, ev.recv_time) for ev in evs)

    # -- main loop -----------------------------------------------------------
    def iterate(self) -> IterationReport:
        st = self.stats
        st.iterations += 1
        executed0, sent0 = st.executed, st.sent + st.antis_sent
        self.protocol.begin_iteration(self)
        rollbacks = self.incorporate_inbox()
        self.send(self.execute_next_event())
        outcome = self.protocol.step(self)
        return IterationReport(st.executed - executed0, rollbacks,
                               st.sent + st.antis_sent - sent0, outcome.arm, outcome.gvt)


def commit_action_hook(w: Worker, gvt: float) -> None:
    if w.commit_hook is not None:
        w.commit_hook(w, gvt)


# Free-function forms of the worker operations.

def main_loop_iteration(w: Worker) -> IterationReport:
    return w.iterate()


def execute_next_event(w: Worker) -> List[Message]:
    return w.execute_next_event()


def rollback(w: Worker, lp: LpState, to) -> List[Message]:
    return w.rollback(lp, to)


def local_min(w: Worker) -> float:
    return w.local_min()


def fossil_collect(w: Worker, gvt: float) -> ReclaimReport:
    return w.fossil_collect(gvt)


def build_lps(model, lp_ids: Sequence[int], states: Sequence[Any],
              initial_events: Sequence[Message]) -> Dict[int, LpState]:
    """LP objects for ``lp_ids`` with their share of the initial events queued.

    Each LP's sequence counter starts after the ids it used for initial events.
    """
    next_seq: Dict[int, int] = {}
    for m in initial_events:
        s = next_seq.get(m.id.sender_lp, 0)
        next_seq[m.id.sender_lp] = max(s, m.id.seq + 1)
    lps = {i: LpState(i, states[i], next_seq.get(i, 0), model) for i in lp_ids}
    for m in initial_events:
        if m.dst in lps:
            lps[m.dst].queue.push(m)
    return lps
