"""Pure-Python versions of the compiled kernels in ``_speedups.pyx``.

Semantics are identical; only speed differs. ``AtomicInt`` guards each single
operation with a private lock because a Python read-modify-write is not
atomic between bytecodes. The lock is held for one operation only.
"""

from __future__ import annotations

import threading

FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF


class AtomicInt:
    """Word-sized integer with atomic load/store/add/CAS."""

    __slots__ = ("_value", "_lock")

    def __init__(self, initial: int = 0) -> None:
        self._value = initial
        self._lock = threading.Lock()

    def load(self) -> int:
        return self._value

    def store(self, value: int) -> None:
        with self._lock:
            self._value = value

    def add(self, delta: int) -> int:
        with self._lock:
            self._value += delta
            return self._value

    def increment(self) -> int:
        return self.add(1)

    def decrement(self) -> int:
        return self.add(-1)

    def compare_and_swap(self, expected: int, desired: int) -> bool:
        with self._lock:
            if self._value != expected:
                return False
            self._value = desired
            return True

    def __repr__(self) -> str:
        return f"AtomicInt({self._value})"


def sweep(buffers: list, start: int, nread: int, nwrite: int, h: int) -> int:
    """Same walk as the compiled kernel; see ``_speedups.sweep``."""
    lens = [len(b) for b in buffers]
    total = sum(lens)
    if total == 0:
        return h
    off = start % total
    seg = 0
    while off >= lens[seg]:
        off -= lens[seg]
        seg += 1
    nbuf = len(buffers)

    remaining = nread
    while remaining:
        buf = buffers[seg]
        take = min(remaining, lens[seg] - off)
        for b in buf[off:off + take]:
            h = ((h ^ b) * FNV_PRIME) & MASK64
        remaining -= take
        off += take
        while off >= lens[seg]:
            off = 0
            seg = (seg + 1) % nbuf

    remaining = nwrite
    while remaining:
        buf = buffers[seg]
        take = min(remaining, lens[seg] - off)
        for i in range(off, off + take):
            v = (h >> 32) & 0xFF
            buf[i] = v
            h = ((h ^ v) * FNV_PRIME) & MASK64
        remaining -= take
        off += take
        while off >= lens[seg]:
            off = 0
            seg = (seg + 1) % nbuf
    return h
