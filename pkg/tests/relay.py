"""Scripted test model: each event's payload lists the messages it sends."""

import json

from twgvt.core import Message, MessageId
from twgvt.kernel import Outgoing


def hop(dst, t, *then):
    """One scripted message: delivered to ``dst`` at ``t``; on execution sends ``then``."""
    return [dst, t, list(then)]


class RelayState:
    __slots__ = ("log",)

    def __init__(self, log=()):
        self.log = tuple(log)


class RelayModel:
    """``initial`` is a list of ``hop`` trees; LP state is the tuple of executed ids."""

    def __init__(self, num_lps, initial):
        self.num_lps = num_lps
        self._initial = initial

    def initial(self):
        seq = [0] * self.num_lps
        events = []
        for dst, t, then in self._initial:
            events.append(Message(MessageId(dst, seq[dst]), dst, dst, 0.0, float(t),
                                  payload=json.dumps(then).encode()))
            seq[dst] += 1
        return [RelayState() for _ in range(self.num_lps)], events

    def handle(self, lp, state, ev):
        state.log = state.log + ((ev.id, ev.recv_time),)
        return [Outgoing(dst, float(t), json.dumps(then).encode())
                for dst, t, then in json.loads(ev.payload or b"[]")]

    def snapshot(self, state):
        return RelayState(state.log)

    def restore(self, snap):
        return RelayState(snap.log)

    def checksum(self, state):
        return state.log
