"""Builders shared by the test modules."""

from twgvt.kernel import ManualTimer, StepTimer
from twgvt.phold import PholdConfig
from twgvt.sim import CooperativeScheduler, Simulation


def small_phold(**kw):
    base = dict(num_lps=4, initial_buffers_per_lp=4, buffer_size_range=(64, 256),
                t_end=25.0, seed=1)
    base.update(kw)
    return PholdConfig(**base)


def manual_sim(model, workers=1, protocol="wf", t_end=1e9, **kw):
    return Simulation(model, protocol, workers, t_end=t_end, timer_factory=ManualTimer, **kw)


def scheduled_run(model, protocol, workers, t_end, *, seed=0, every=5, **kw):
    """Run to completion under the cooperative scheduler; returns (sim, scheduler)."""
    sim = Simulation(model, protocol, workers, t_end=t_end,
                     timer_factory=lambda: StepTimer(every), track_commits=True, **kw)
    sched = CooperativeScheduler(sim, seed=seed)
    sched.run()
    return sim, sched


def committed_pairs(sim):
    return sorted((tuple(i), t) for i, t in sim.committed_set())


def oracle_pairs(trace):
    return sorted((tuple(i), t) for i, t in trace.trace)
