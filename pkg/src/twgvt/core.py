"""Virtual time, message identities and the total event order.

Everything here is an immutable value type. Messages are plain named tuples
so they can be shared between worker threads without copying.
"""

from __future__ import annotations

import math
from enum import IntEnum
from typing import NamedTuple, Tuple

INFINITY = math.inf

#: Sort key below every real event key. Used as the key of initial snapshots.
MIN_KEY: Tuple = (-math.inf,)


class ContractViolation(AssertionError):
    """A caller broke a documented precondition (programming error)."""


class Kind(IntEnum):
    EVENT = 0
    ANTI_EVENT = 1


class Ordering(IntEnum):
    LESS = -1
    GREATER = 1


class MessageId(NamedTuple):
    sender_lp: int
    seq: int


class Message(NamedTuple):
    id: MessageId
    src: int
    dst: int
    send_time: float
    recv_time: float
    kind: Kind = Kind.EVENT
    payload: bytes = b""

    @property
    def key(self) -> Tuple:
        return (self.recv_time, self.dst, self.id, self.kind)

    @property
    def is_anti(self) -> bool:
        return self.kind == Kind.ANTI_EVENT


def new_event(src: int, seq: int, dst: int, send_time: float, recv_time: float,
              payload: bytes = b"") -> Message:
    """Build a validated EVENT message originating at LP ``src``."""
    if not math.isfinite(recv_time):
        raise ContractViolation(f"recv_time must be finite, got {recv_time}")
    if recv_time < send_time:
        raise ContractViolation(
            f"recv_time {recv_time} precedes send_time {send_time}")
    return Message(MessageId(src, seq), src, dst, float(send_time),
                   float(recv_time), Kind.EVENT, bytes(payload))


def event_key(m: Message) -> Tuple:
    """Lexicographic ``(recv_time, dst, id, kind)`` key.

    ``kind`` only matters when an event and its own anti-message are compared,
    which keeps the order strict over every pair of distinct messages.
    """
    return (m.recv_time, m.dst, m.id, m.kind)


def event_cmp(a: Message, b: Message) -> Ordering:
    ka, kb = event_key(a), event_key(b)
    if ka == kb:
        raise ContractViolation("event_cmp called on the same message twice")
    return Ordering.LESS if ka < kb else Ordering.GREATER


def make_antimessage(m: Message) -> Message:
    if m.kind != Kind.EVENT:
        raise ContractViolation("anti-message requested for an anti-message")
    return m._replace(kind=Kind.ANTI_EVENT, payload=b"")


def annihilates(a: Message, b: Message) -> bool:
    return a.id == b.id and a.kind != b.kind
