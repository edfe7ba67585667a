"""PHOLD variant with buffer allocation/deallocation and memory sweeps.

Every LP holds a list of byte buffers. A DEALLOC event frees one buffer,
sweeps the LP's memory, then schedules a DEALLOC for itself and an ALLOC for
another LP. An ALLOC event adds a buffer and sweeps. The number of pending
events therefore stays fixed and the global buffer count hovers around its
starting value while individual LPs grow and shrink.

Each event draws from its own generator seeded by ``(seed, message id)``, so
re-executing an event after a rollback replays it exactly.

Snapshots share buffers with the live state. The handler never writes into a
shared buffer: it copies every buffer the write sweep will touch first.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, fields
from typing import List, Optional, Tuple

from . import _backend
from .core import Message, MessageId
from .kernel import Outgoing

ALLOC = b"A"
DEALLOC = b"D"


@dataclass
class PholdConfig:
    num_lps: int = 32
    initial_buffers_per_lp: int = 64
    buffer_size_range: Tuple[int, int] = (4096, 65536)
    read_fraction: float = 0.2
    write_fraction: float = 0.1
    mean_delay: float = 1.0
    t_end: float = 100.0
    seed: int = 1
    min_delay: float = 1e-6
    weight_by_buffers: bool = False

    def validate(self) -> "PholdConfig":
        if self.num_lps < 1:
            raise ValueError("num_lps must be >= 1")
        if self.initial_buffers_per_lp < 0:
            raise ValueError("initial_buffers_per_lp must be >= 0")
        lo, hi = self.buffer_size_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad buffer_size_range {self.buffer_size_range}")
        for name in ("read_fraction", "write_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.mean_delay <= 0 or self.min_delay <= 0:
            raise ValueError("delays must be positive")
        return self


_INT_FIELDS = {"num_lps", "initial_buffers_per_lp", "seed"}
_FLOAT_FIELDS = {"read_fraction", "write_fraction", "mean_delay", "t_end", "min_delay"}


def parse_config(text: str, base: Optional[PholdConfig] = None) -> PholdConfig:
    """Read ``key = value`` lines (``#`` comments allowed) into a config."""
    cfg = base if base is not None else PholdConfig()
    known = {f.name for f in fields(PholdConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _INT_FIELDS:
            setattr(cfg, key, int(value))
        elif key in _FLOAT_FIELDS:
            setattr(cfg, key, float(value))
        elif key == "buffer_size_range":
            lo, hi = (int(p) for p in value.replace("-", ",").split(","))
            cfg.buffer_size_range = (lo, hi)
        elif key == "weight_by_buffers":
            cfg.weight_by_buffers = value.lower() in ("1", "true", "yes", "on")
    return cfg.validate()


def load_config(path: str, base: Optional[PholdConfig] = None) -> PholdConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base)


# FNV-1a offset basis; a zero hash would stay zero over zeroed buffers
CHECKSUM_SEED = 0xCBF29CE484222325


class PholdState:
    __slots__ = ("buffers", "checksum")

    def __init__(self, buffers: List[bytearray], checksum: int = CHECKSUM_SEED) -> None:
        self.buffers = buffers
        self.checksum = checksum

    def copy(self) -> "PholdState":
        return PholdState(list(self.buffers), self.checksum)

    @property
    def total_bytes(self) -> int:
        return sum(len(b) for b in self.buffers)

    def digest(self) -> Tuple[int, int, int]:
        """(checksum, buffer count, crc32 of all buffer bytes)."""
        crc = 0
        for b in self.buffers:
            crc = zlib.crc32(b, crc)
        return (self.checksum, len(self.buffers), crc)


def _mix(*parts: int) -> int:
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = ((h ^ (p & 0xFFFFFFFFFFFFFFFF)) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def event_rng(seed: int, mid: MessageId) -> random.Random:
    return random.Random(_mix(seed, mid.sender_lp, mid.seq))


def _delay(cfg: PholdConfig, rng: random.Random) -> float:
    return cfg.min_delay + rng.expovariate(1.0 / cfg.mean_delay)


def lp_weights(cfg: PholdConfig) -> List[float]:
    """Static per-LP memory weights used when ``weight_by_buffers`` is on."""
    if not cfg.weight_by_buffers:
        return [1.0] * cfg.num_lps
    rng = random.Random(_mix(cfg.seed, 0xC1A5))
    return [rng.lognormvariate(0.0, 0.75) for _ in range(cfg.num_lps)]


def phold_init(cfg: PholdConfig) -> Tuple[List[PholdState], List[Message]]:
    cfg.validate()
    lo, hi = cfg.buffer_size_range
    weights = lp_weights(cfg)
    mean_w = sum(weights) / len(weights)
    states, events = [], []
    for lp in range(cfg.num_lps):
        rng = random.Random(_mix(cfg.seed, lp, 0x1E17))
        nbuf = cfg.initial_buffers_per_lp
        if cfg.weight_by_buffers:
            nbuf = max(1, round(nbuf * weights[lp] / mean_w))
        bufs = [bytearray(rng.randbytes(rng.randint(lo, hi))) for _ in range(nbuf)]
        states.append(PholdState(bufs))
        t = _delay(cfg, rng)
        events.append(Message(MessageId(lp, 0), lp, lp, 0.0, t, payload=DEALLOC))
    return states, events


def _touch_and_sweep(cfg: PholdConfig, state: PholdState, rng: random.Random) -> None:
    bufs = state.buffers
    lens = [len(b) for b in bufs]
    total = sum(lens)
    if total == 0:
        return
    nread = int(cfg.read_fraction * total)
    nwrite = int(cfg.write_fraction * total)
    start = rng.randrange(total)
    if nwrite:
        # copy-on-write every buffer in the cyclic range the writes cover
        pos = (start + nread) % total
        i = 0
        while pos >= lens[i]:
            pos -= lens[i]
            i += 1
        left = nwrite
        n = len(bufs)
        seen = 0
        while left > 0 and seen < n:
            if lens[i]:
                bufs[i] = bytearray(bufs[i])
                left -= lens[i] - pos
                pos = 0
            i = (i + 1) % n
            seen += 1
    state.checksum = _backend.sweep(bufs, start, nread, nwrite, state.checksum)


def _pick_other(cfg: PholdConfig, lp: int, rng: random.Random, weights: List[float]) -> int:
    if cfg.num_lps == 1:
        return lp
    if not cfg.weight_by_buffers:
        other = rng.randrange(cfg.num_lps - 1)
        return other + 1 if other >= lp else other
    cands = [i for i in range(cfg.num_lps) if i != lp]
    return rng.choices(cands, [weights[i] for i in cands])[0]


def phold_handle(cfg: PholdConfig, lp: int, state: PholdState, ev: Message,
                 rng: random.Random, weights: Optional[List[float]] = None) -> List[Outgoing]:
    now = ev.recv_time
    if ev.payload[:1] == DEALLOC:
        if state.buffers:
            del state.buffers[rng.randrange(len(state.buffers))]
        _touch_and_sweep(cfg, state, rng)
        if weights is None:
            weights = lp_weights(cfg)
        other = _pick_other(cfg, lp, rng, weights)
        return [Outgoing(other, now + _delay(cfg, rng), ALLOC),
                Outgoing(lp, now + _delay(cfg, rng), DEALLOC)]
    lo, hi = cfg.buffer_size_range
    state.buffers.append(bytearray(rng.randint(lo, hi)))
    _touch_and_sweep(cfg, state, rng)
    return []


class PholdModel:
    """The model object the kernel and the oracle drive."""

    def __init__(self, cfg: PholdConfig) -> None:
        self.cfg = cfg.validate()
        self.num_lps = cfg.num_lps
        self.weights = lp_weights(cfg)

    def initial(self) -> Tuple[List[PholdState], List[Message]]:
        return phold_init(self.cfg)

    def handle(self, lp: int, state: PholdState, ev: Message) -> List[Outgoing]:
        return phold_handle(self.cfg, lp, state, ev, event_rng(self.cfg.seed, ev.id),
                            self.weights)

    def snapshot(self, state: PholdState) -> PholdState:
        return state.copy()

    def restore(self, snap: PholdState) -> PholdState:
        return snap.copy()

    def checksum(self, state: PholdState) -> Tuple[int, int, int]:
        return state.digest()
