"""Experiment driver: runs, metrics, interfering load and CSV output."""

from __future__ import annotations

import csv
import logging
import multiprocessing as mp
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, TextIO

from .kernel import StepTimer, WallTimer
from .oracle import run_sequential
from .phold import PholdConfig, PholdModel
from .sim import CooperativeScheduler, Simulation

log = logging.getLogger(__name__)

PROTOCOLS = ("wf", "fh", "serial")
CSV_COLUMNS = ("protocol", "workers", "interference", "seed", "wall_clock_s",
               "committed_events", "rollbacks", "gvt_rounds", "spin_tries", "efficiency")


class ConfigError(ValueError):
    pass


class RunFault(RuntimeError):
    """A run finished but broke a GVT safety or monotonicity property."""


@dataclass
class RunConfig:
    protocol: str = "wf"
    workers: int = 1
    gvt_interval_s: float = 1.0
    phold: PholdConfig = field(default_factory=PholdConfig)
    interference: int = 0
    audit: bool = False
    repetitions: int = 1
    checkpoint_interval: int = 1
    # audit mode: scheduler iterations per worker between GVT triggers
    audit_trigger_steps: int = 20
    max_wall_s: Optional[float] = None
    # interpreter thread switch interval for the run; None keeps the default.
    # Threads only contend for the FH lock when this is shorter than a
    # critical section, which is how real cores interleave.
    switch_interval_s: Optional[float] = None

    def validate(self) -> "RunConfig":
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.protocol == "serial":
            self.workers = 1
        if self.interference < 0:
            raise ConfigError("interference must be >= 0")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.checkpoint_interval < 1:
            raise ConfigError("checkpoint interval must be >= 1")
        if self.gvt_interval_s <= 0:
            raise ConfigError("gvt interval must be positive")
        if self.switch_interval_s is not None and self.switch_interval_s <= 0:
            raise ConfigError("switch interval must be positive")
        try:
            self.phold.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


@dataclass
class RunMetrics:
    protocol: str
    workers: int
    interference: int
    seed: int
    wall_clock_s: float
    committed_events: int
    executed_events: int
    rollbacks: int
    gvt_rounds: int
    gvt_values: List[float] = field(default_factory=list)
    spin_tries: int = 0
    throughput: List[float] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)
    simulation: Optional[Simulation] = field(default=None, repr=False, compare=False)

    @property
    def efficiency(self) -> float:
        return self.committed_events / self.executed_events if self.executed_events else 1.0

    @property
    def spin_tries_per_s(self) -> float:
        return self.spin_tries / self.wall_clock_s if self.wall_clock_s else 0.0

    @property
    def gvt_monotone(self) -> bool:
        v = self.gvt_values
        return all(a <= b for a, b in zip(v, v[1:]))

    def row(self) -> Dict[str, object]:
        return {
            "protocol": self.protocol,
            "workers": self.workers,
            "interference": self.interference,
            "seed": self.seed,
            "wall_clock_s": f"{self.wall_clock_s:.6f}",
            "committed_events": self.committed_events,
            "rollbacks": self.rollbacks,
            "gvt_rounds": self.gvt_rounds,
            "spin_tries": self.spin_tries,
            "efficiency": f"{self.efficiency:.6f}",
        }


def _busy_loop() -> None:
    while True:
        pass


class Interference:
    """Handle on a set of CPU-bound busy-loop processes."""

    def __init__(self, n: int) -> None:
        if n < 0:
            raise ValueError("interference count must be >= 0")
        self.procs: List[mp.Process] = []
        ctx = mp.get_context("fork")
        try:
            for _ in range(n):
                p = ctx.Process(target=_busy_loop, daemon=True)
                p.start()
                self.procs.append(p)
        except OSError as exc:
            achieved = len(self.procs)
            self.release()
            raise RuntimeError(f"spawned only {achieved} of {n} interfering processes") from exc

    @property
    def alive(self) -> int:
        return sum(p.is_alive() for p in self.procs)

    def release(self) -> None:
        for p in self.procs:
            p.terminate()
        for p in self.procs:
            p.join()

    def __enter__(self) -> "Interference":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def spawn_interference(n: int) -> Interference:
    return Interference(n)


def build_simulation(cfg: RunConfig, phold: PholdConfig, **kw) -> Simulation:
    if cfg.audit:
        steps = cfg.audit_trigger_steps
        timer_factory = lambda: StepTimer(steps)  # noqa: E731
    else:
        interval = cfg.gvt_interval_s
        timer_factory = lambda: WallTimer(interval)  # noqa: E731
    return Simulation(PholdModel(phold), cfg.protocol, cfg.workers, t_end=phold.t_end,
                      timer_factory=timer_factory,
                      checkpoint_interval=cfg.checkpoint_interval, **kw)


def _serial_run(cfg: RunConfig, phold: PholdConfig) -> RunMetrics:
    t0 = time.perf_counter()
    trace = run_sequential(PholdModel(phold), phold.t_end)
    wall = time.perf_counter() - t0
    n = trace.executed
    return RunMetrics("serial", 1, cfg.interference, phold.seed, wall, n, n, 0, 0,
                      throughput=[n / wall if wall else 0.0])


def run_once(cfg: RunConfig, phold: PholdConfig, **sim_kw) -> RunMetrics:
    """One repetition; ``sim_kw`` goes to :class:`Simulation` (hooks, tracing)."""
    if cfg.protocol == "serial":
        return _serial_run(cfg, phold)
    sim = build_simulation(cfg, phold, **sim_kw)
    sweep_violations: List[str] = []
    if cfg.audit:
        sched = CooperativeScheduler(sim, seed=phold.seed)
        t0 = time.perf_counter()
        sched.run()
        sim.wall_clock_s = time.perf_counter() - t0
        sweep_violations = sched.sweep_violations
    else:
        sim.run_threads(cfg.max_wall_s)
    stats = [w.stats for w in sim.workers]
    wall = sim.wall_clock_s
    m = RunMetrics(
        protocol=cfg.protocol, workers=cfg.workers, interference=cfg.interference,
        seed=phold.seed, wall_clock_s=wall,
        committed_events=sum(s.committed for s in stats),
        executed_events=sum(s.executed for s in stats),
        rollbacks=sum(s.rollbacks for s in stats),
        gvt_rounds=len(sim.protocol.history),
        gvt_values=list(sim.protocol.history),
        spin_tries=sim.protocol.spin_tries,
        throughput=[s.executed / wall if wall else 0.0 for s in stats],
        violations=sim.violations() + sweep_violations,
        simulation=sim,
    )
    return m


@contextmanager
def switch_interval(seconds: Optional[float]):
    if seconds is None:
        yield
        return
    old = sys.getswitchinterval()
    sys.setswitchinterval(seconds)
    try:
        yield
    finally:
        sys.setswitchinterval(old)


def run_experiment(cfg: RunConfig, **sim_kw) -> List[RunMetrics]:
    """Run ``cfg.repetitions`` repetitions; repetition ``r`` uses seed ``seed + r``."""
    cfg.validate()
    out = []
    with spawn_interference(cfg.interference), switch_interval(cfg.switch_interval_s):
        for r in range(cfg.repetitions):
            phold = replace(cfg.phold, seed=cfg.phold.seed + r)
            m = run_once(cfg, phold, **sim_kw)
            log.info("%s workers=%d seed=%d wall=%.3fs committed=%d rounds=%d",
                     m.protocol, m.workers, m.seed, m.wall_clock_s,
                     m.committed_events, m.gvt_rounds)
            out.append(m)
    return out


def check_metrics(m: RunMetrics) -> None:
    if m.violations:
        raise RunFault(f"{len(m.violations)} GVT safety violation(s); first: {m.violations[0]}")
    if not m.gvt_monotone:
        raise RunFault("published GVT sequence is not monotone")


def write_csv(metrics: List[RunMetrics], fh: TextIO) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for m in metrics:
        writer.writerow(m.row())


def emit_csv(metrics: List[RunMetrics], path: str) -> None:
    with open(path, "w", newline="") as fh:
        write_csv(metrics, fh)


def read_csv(path: str) -> List[Dict[str, object]]:
    """Parse a file written by :func:`emit_csv` back into typed rows."""
    ints = {"workers", "interference", "seed", "committed_events", "rollbacks",
            "gvt_rounds", "spin_tries"}
    floats = {"wall_clock_s", "efficiency"}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({k: int(v) if k in ints else float(v) if k in floats else v
                         for k, v in rec.items()})
    return rows
