"""Observable message plumbing.

Each worker owns one :class:`Inbox` that any thread may append to; each LP
owns one :class:`EventQueue`. A send places the message straight into the
destination worker's inbox, so no message is ever in transit.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .core import MIN_KEY, Kind, Message, MessageId


class ProtocolFault(RuntimeError):
    """Queue or GVT state that a correct run can never produce."""


class Inbox:
    """Unbounded multi-producer, single-consumer message queue.

    ``deque.append`` and ``deque.popleft`` are atomic in CPython, so enqueue
    takes no lock and drain pops a bounded number of items: only those
    visible when the drain began.
    """

    __slots__ = ("_q",)

    def __init__(self) -> None:
        self._q: deque = deque()

    def put(self, msg: Message) -> None:
        self._q.append(msg)

    def drain(self) -> List[Message]:
        q = self._q
        return [q.popleft() for _ in range(len(q))]

    def peek_all(self) -> List[Message]:
        """Copy of the current contents without removing them (audit only)."""
        return list(self._q)

    def __len__(self) -> int:
        return len(self._q)


class Router:
    """Static LP -> worker map plus one inbox per worker."""

    def __init__(self, owner: Sequence[int], num_workers: int) -> None:
        self.owner = list(owner)
        self.inboxes = [Inbox() for _ in range(num_workers)]

    @classmethod
    def round_robin(cls, num_lps: int, num_workers: int) -> "Router":
        return cls([lp % num_workers for lp in range(num_lps)], num_workers)

    def send(self, msg: Message) -> None:
        self.inboxes[self.owner[msg.dst]].put(msg)

    def drain(self, worker: int) -> List[Message]:
        return self.inboxes[worker].drain()


class EventQueue:
    """Per-LP queue split into an executed prefix and a pending heap.

    Pending events are kept in a heap with lazy deletion: ``_pending`` maps
    each live id to the exact message object, and heap entries whose message
    is no longer that object are skipped.
    """

    __slots__ = ("lp", "processed", "processed_ids", "_heap", "_pending",
                 "orphan_antis", "floor_key", "horizon")

    def __init__(self, lp: int) -> None:
        self.lp = lp
        self.processed: List[Message] = []
        self.processed_ids: Dict[MessageId, Message] = {}
        self._heap: List[Tuple[tuple, Message]] = []
        self._pending: Dict[MessageId, Message] = {}
        # anti-messages whose event has not arrived yet
        self.orphan_antis: Dict[MessageId, Message] = {}
        # key of the newest fossil-collected event; nothing may be undone below it
        self.floor_key: tuple = MIN_KEY
        # GVT of the last fossil collection
        self.horizon: float = float("-inf")

    # pending side
    def push(self, msg: Message) -> None:
        self._pending[msg.id] = msg
        heapq.heappush(self._heap, (msg.key, msg))

    def peek(self) -> Optional[Message]:
        heap, pending = self._heap, self._pending
        while heap:
            msg = heap[0][1]
            if pending.get(msg.id) is msg:
                return msg
            heapq.heappop(heap)
        return None

    def pop(self) -> Optional[Message]:
        msg = self.peek()
        if msg is not None:
            heapq.heappop(self._heap)
            del self._pending[msg.id]
        return msg

    def discard(self, mid: MessageId) -> Optional[Message]:
        return self._pending.pop(mid, None)

    def min_time(self) -> float:
        msg = self.peek()
        t = msg.recv_time if msg is not None else float("inf")
        if self.orphan_antis:
            t = min(t, min(a.recv_time for a in self.orphan_antis.values()))
        return t

    def unprocessed(self) -> List[Message]:
        return sorted(self._pending.values(), key=lambda m: m.key)

    def has_pending(self, mid: MessageId) -> bool:
        return mid in self._pending

    # processed side
    @property
    def last_key(self) -> tuple:
        return self.processed[-1].key if self.processed else self.floor_key

    def append_processed(self, msg: Message) -> None:
        self.processed.append(msg)
        self.processed_ids[msg.id] = msg

    def refill_from(self, bound: tuple) -> int:
        """Move executed events with key >= ``bound`` back to pending."""
        n = 0
        processed = self.processed
        while processed and processed[-1].key >= bound:
            msg = processed.pop()
            del self.processed_ids[msg.id]
            self.push(msg)
            n += 1
        return n

    def __len__(self) -> int:
        return len(self._pending)


class IncorporationReport(NamedTuple):
    rollback_to: Optional[tuple]
    inserted: int
    annihilated: int
    refilled: int


def incorporate(lp, msgs: Iterable[Message]) -> IncorporationReport:
    """Fold delivered messages into ``lp.queue``.

    Anti-messages annihilate their event wherever it sits. When the target was
    already executed, or an event arrives below the last executed key, the
    executed suffix is moved back to pending and the smallest offending key is
    returned as ``rollback_to``; restoring model state is the kernel's job.
    """
    q: EventQueue = lp.queue
    bound = None
    inserted = annihilated = refilled = 0
    for m in msgs:
        if m.dst != lp.id:
            raise ProtocolFault(f"message for LP {m.dst} delivered to LP {lp.id}")
        mid = m.id
        if m.kind == Kind.ANTI_EVENT:
            if q.discard(mid) is not None:
                annihilated += 1
                continue
            target = q.processed_ids.get(mid)
            if target is not None:
                tkey = target.key
                refilled += q.refill_from(tkey)
                q.discard(mid)
                refilled -= 1
                annihilated += 1
                if bound is None or tkey < bound:
                    bound = tkey
                continue
            if m.recv_time < q.horizon:
                raise ProtocolFault(
                    f"anti-message {mid} at {m.recv_time} has no target "
                    f"below fossil horizon {q.horizon}")
            if mid in q.orphan_antis:
                raise ProtocolFault(f"duplicate anti-message {mid}")
            q.orphan_antis[mid] = m
            continue

        if q.orphan_antis.pop(mid, None) is not None:
            annihilated += 1
            continue
        if q.has_pending(mid) or mid in q.processed_ids:
            raise ProtocolFault(f"duplicate event {mid} at LP {lp.id}")
        key = m.key
        if key < q.last_key:
            refilled += q.refill_from(key)
            if bound is None or key < bound:
                bound = key
        q.push(m)
        inserted += 1
    return IncorporationReport(bound, inserted, annihilated, refilled)
