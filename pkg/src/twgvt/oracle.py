"""Sequential reference execution: one heap, lowest key first, no rollback."""

from __future__ import annotations

import heapq
from typing import Any, Callable, List, NamedTuple, Optional, Tuple

from .core import MessageId, new_event


class OracleTrace(NamedTuple):
    trace: List[Tuple[MessageId, float]]
    checksums: List[Any]
    states: List[Any]

    @property
    def executed(self) -> int:
        return len(self.trace)


def run_sequential(model, t_end: float, max_events: Optional[int] = None,
                   observer: Optional[Callable[[int, Any], None]] = None) -> OracleTrace:
    """Execute events lowest key first until ``t_end`` or ``max_events``.

    ``observer(lp, state)`` is called after every event, if given.
    """
    states, initial = model.initial()
    seq = [0] * model.num_lps
    for m in initial:
        seq[m.id.sender_lp] = max(seq[m.id.sender_lp], m.id.seq + 1)
    heap = [(m.key, m) for m in initial]
    heapq.heapify(heap)
    trace = []
    handle = model.handle
    while heap and (max_events is None or len(trace) < max_events):
        key, ev = heap[0]
        if ev.recv_time >= t_end:
            break
        heapq.heappop(heap)
        lp = ev.dst
        trace.append((ev.id, ev.recv_time))
        for d in handle(lp, states[lp], ev):
            m = new_event(lp, seq[lp], d.dst, ev.recv_time, d.recv_time, d.payload)
            seq[lp] += 1
            heapq.heappush(heap, (m.key, m))
        if observer is not None:
            observer(lp, states[lp])
    return OracleTrace(trace, [model.checksum(s) for s in states], states)


def sequential_oracle(cfg) -> OracleTrace:
    """Run the PHOLD model described by ``cfg`` serially up to ``cfg.t_end``."""
    from .phold import PholdModel
    return run_sequential(PholdModel(cfg), cfg.t_end)
