"""Assembling workers into a run, either free-threaded or cooperatively stepped."""

from __future__ import annotations

import random
import threading
import time
from typing import Callable, List, Optional

from .core import INFINITY
from .gvt_fh import CriticalSectionGvt
from .gvt_waitfree import WaitFreeGvt
from .kernel import IterationReport, Worker, build_lps
from .queues import Router


def make_protocol(name: str, n: int, **kw):
    if name == "wf":
        return WaitFreeGvt(n, send_window=kw.get("send_window", True),
                           stall_hook=kw.get("stall_hook"))
    if name == "fh":
        return CriticalSectionGvt(n, stall_hook=kw.get("stall_hook"),
                                    trace=kw.get("trace", False))
    raise ValueError(f"unknown protocol {name!r}")


class Simulation:
    """Workers, router and GVT protocol for one run of one model."""

    def __init__(self, model, protocol: str, workers: int, *, t_end: float,
                 timer_factory: Callable[[], object],
                 checkpoint_interval: int = 1, track_commits: bool = False,
                 commit_hook=None, **protocol_kw) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.model = model
        self.t_end = t_end
        self.router = Router.round_robin(model.num_lps, workers)
        self.protocol = make_protocol(protocol, workers, **protocol_kw)
        states, events = model.initial()
        lps = build_lps(model, range(model.num_lps), states, events)
        self.workers: List[Worker] = []
        for wid in range(workers):
            owned = [lps[i] for i in range(model.num_lps) if self.router.owner[i] == wid]
            self.workers.append(Worker(
                wid, owned, self.router, model, self.protocol, t_end=t_end,
                checkpoint_interval=checkpoint_interval, timer=timer_factory(),
                commit_hook=commit_hook, track_commits=track_commits))
        self.wall_clock_s = 0.0
        self._finished = False

    # -- inspection -----------------------------------------------------------
    @property
    def done(self) -> bool:
        return all(w.done for w in self.workers)

    def pending_messages(self) -> list:
        """Every message resident in an inbox or pending in an LP queue."""
        out = []
        for inbox in self.router.inboxes:
            out.extend(inbox.peek_all())
        for w in self.workers:
            for lp in w.lps:
                out.extend(lp.queue.unprocessed())
                out.extend(lp.queue.orphan_antis.values())
        return out

    def true_gvt(self) -> float:
        return min((m.recv_time for m in self.pending_messages()), default=INFINITY)

    def sweep(self) -> List[str]:
        """Stop-the-world check: nothing resident may lie below the published GVT."""
        gvt = self.protocol.published_gvt
        return [f"{m.kind.name} {m.id} at {m.recv_time!r} below published GVT {gvt!r}"
                for m in self.pending_messages() if m.recv_time < gvt]

    def violations(self) -> List[str]:
        return [v for w in self.workers for v in w.violations]

    def finish(self) -> None:
        if not self._finished:
            self._finished = True
            for w in self.workers:
                w.finish()

    def committed_set(self) -> set:
        return {c for w in self.workers for c in w.committed}

    # -- free-threaded execution ---------------------------------------------------
    def run_threads(self, max_wall_s: Optional[float] = None) -> float:
        errors: list = []
        stop = threading.Event()

        def loop(w: Worker) -> None:
            try:
                it = w.iterate
                while not w.done and not stop.is_set():
                    if it().idle:
                        time.sleep(0)
            except BaseException as exc:  # surfaced to the caller after join
                errors.append(exc)
                stop.set()

        threads = [threading.Thread(target=loop, args=(w,), name=f"worker-{w.id}",
                                    daemon=True) for w in self.workers]
        t0 = time.perf_counter()
        for t in threads:
            t.start()
        deadline = None if max_wall_s is None else t0 + max_wall_s
        for t in threads:
            timeout = None if deadline is None else max(0.0, deadline - time.perf_counter())
            t.join(timeout)
            if t.is_alive():
                stop.set()
                for t2 in threads:
                    t2.join()
                raise TimeoutError(f"run exceeded {max_wall_s} s")
        self.wall_clock_s = time.perf_counter() - t0
        if errors:
            raise errors[0]
        self.finish()
        return self.wall_clock_s


class CooperativeScheduler:
    """Deterministic single-threaded stepping of all workers.

    After any step that changes the published GVT or completes a round, every
    inbox and queue is swept for messages below the published value.
    """

    def __init__(self, sim: Simulation, seed: int = 0, sweep_every_step: bool = False) -> None:
        self.sim = sim
        self.rng = random.Random(seed)
        self.sweep_every_step = sweep_every_step
        self.sweep_violations: List[str] = []
        self.sweeps = 0
        self.steps = 0
        self._mark = self._publication_mark()

    def _publication_mark(self):
        p = self.sim.protocol
        return (p.published_gvt, len(p.history))

    def check(self) -> None:
        self.sweeps += 1
        self.sweep_violations.extend(self.sim.sweep())

    def step(self, wid: int) -> IterationReport:
        rep = self.sim.workers[wid].iterate()
        self.steps += 1
        mark = self._publication_mark()
        if self.sweep_every_step or mark != self._mark:
            self._mark = mark
            self.check()
        return rep

    def run(self, max_steps: int = 1_000_000) -> int:
        workers = self.sim.workers
        while self.steps < max_steps:
            live = [w.id for w in workers if not w.done]
            if not live:
                self.sim.finish()
                return self.steps
            self.step(self.rng.choice(live))
        raise TimeoutError(f"scheduled run did not finish in {max_steps} steps")
