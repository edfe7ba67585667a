import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (committed_pairs, manual_sim, oracle_pairs, scheduled_run,
                     small_phold)
from relay import RelayModel, hop
from twgvt.core import INFINITY, MessageId, new_event
from twgvt.kernel import Phase, Snapshot
from twgvt.oracle import run_sequential
from twgvt.phold import PholdModel
from twgvt.queues import ProtocolFault


def one_worker(initial, num_lps=1, k=1):
    sim = manual_sim(RelayModel(num_lps, initial), checkpoint_interval=k)
    return sim, sim.workers[0]


def run_events(w, n):
    for _ in range(n):
        w.incorporate_inbox()
        w.send(w.execute_next_event())
    w.incorporate_inbox()


def test_idle_iteration_changes_nothing():
    sim, w = one_worker([])
    rep = w.iterate()
    assert (rep.executed, rep.rollbacks, rep.sent, rep.arm) == (0, 0, 0, "idle")
    assert rep.idle and w.my_phase is Phase.A
    assert sim.protocol.shared.counters() == (0, 0, 0, 0, 0)


def test_lowest_event_across_lps_runs_first():
    sim, w = one_worker([hop(0, 3.0), hop(1, 7.0), hop(0, 5.0), hop(1, 7.5)], num_lps=2)
    for lp in w.lps:
        ev = lp.queue.pop()
        lp.queue.append_processed(ev)
        lp.clock = ev.recv_time
    assert [lp.clock for lp in w.lps] == [3.0, 7.0]
    out = w.execute_next_event()
    assert out == [] and w.lps[0].clock == 5.0


def test_outputs_are_returned_and_logged():
    sim, w = one_worker([hop(0, 1.0, hop(0, 2.0), hop(0, 3.0))])
    out = w.execute_next_event()
    lp = w.lps[0]
    assert len(out) == 2 and len(lp.output_log) == 2
    assert [m.id for m in out] == [MessageId(0, 1), MessageId(0, 2)]
    assert lp.queue.unprocessed() == []  # returned, not yet sent


def test_clock_never_decreases_without_rollback():
    cfg = small_phold(num_lps=1, t_end=1e9)
    sim = manual_sim(PholdModel(cfg), t_end=1e9)
    w = sim.workers[0]
    clocks = []
    for _ in range(100):
        w.incorporate_inbox()
        w.send(w.execute_next_event())
        clocks.append(w.lps[0].clock)
    assert clocks == sorted(clocks)


def test_rollback_restores_checkpoint_and_coasts_forward():
    initial = [hop(0, 2.0), hop(0, 4.0), hop(0, 5.0, hop(0, 20.0)), hop(0, 8.0), hop(0, 10.0)]
    sim, w = one_worker(initial, k=2)
    run_events(w, 5)
    lp = w.lps[0]
    assert [s.time for s in lp.snapshots] == [-math.inf, 4.0, 8.0]
    assert lp.clock == 10.0
    seq_before = lp.seq
    antis = w.rollback(lp, 6.0)
    assert antis == []  # the only send (from t=5) stays valid
    assert [s.time for s in lp.snapshots] == [-math.inf, 4.0]
    assert [t for _, t in lp.state.log] == [2.0, 4.0, 5.0]
    assert [m.recv_time for m in lp.queue.processed] == [2.0, 4.0, 5.0]
    assert [m.recv_time for m in lp.queue.unprocessed()] == [8.0, 10.0, 20.0]
    assert lp.seq == seq_before and lp.clock == 6.0


def test_rollback_cancels_later_sends():
    sim, w = one_worker([hop(0, 4.0), hop(0, 6.0, hop(0, 30.0)), hop(0, 9.0, hop(0, 40.0))])
    run_events(w, 3)
    lp = w.lps[0]
    antis = w.rollback(lp, 5.0)
    assert sorted(a.recv_time for a in antis) == [30.0, 40.0]
    assert all(a.is_anti for a in antis) and lp.output_log == []


def test_rollback_without_checkpoint_is_fatal():
    sim, w = one_worker([hop(0, 1.0), hop(0, 2.0), hop(0, 3.0)])
    run_events(w, 3)
    lp = w.lps[0]
    lp.snapshots[:] = [Snapshot((2.0, 0, MessageId(0, 1), 0), lp.state, lp.seq)]
    with pytest.raises(ProtocolFault):
        w.rollback(lp, 1.5)


def test_rollback_below_published_gvt_is_recorded():
    sim, w = one_worker([hop(0, 1.0), hop(0, 2.0)])
    run_events(w, 2)
    sim.protocol.shared.published_gvt = 1.8
    w.rollback(w.lps[0], 1.5)
    assert w.violations and "below published GVT" in w.violations[0]


def test_straggler_is_rolled_back_before_next_event():
    sim, w = one_worker([hop(0, 1.0), hop(0, 5.0), hop(0, 6.0)])
    run_events(w, 3)
    sim.router.send(new_event(0, 99, 0, 0.0, 3.0))
    rep = w.iterate()
    assert rep.rollbacks == 1 and rep.executed == 1
    assert [t for _, t in w.lps[0].state.log] == [1.0, 3.0]


def test_local_min_over_all_lps():
    sim, w = one_worker([hop(0, 3.0), hop(0, 5.5), hop(1, 4.2)], num_lps=2)
    assert w.local_min() == min([3.0, 5.5, 4.2])
    w.execute_next_event()
    assert w.local_min() == 4.2
    assert one_worker([])[1].local_min() == INFINITY


def test_local_min_after_cancellation():
    sim, w = one_worker([hop(0, 5.5), hop(1, 4.2)], num_lps=2)
    m = new_event(1, 50, 0, 0.0, 3.0)
    sim.router.send(m)
    w.incorporate_inbox()
    assert w.local_min() == 3.0
    from twgvt.core import make_antimessage
    sim.router.send(make_antimessage(m))
    w.incorporate_inbox()
    assert w.local_min() == min(5.5, 4.2)


def four_snapshots():
    sim, w = one_worker([hop(0, 4.0), hop(0, 6.5), hop(0, 8.0), hop(0, 9.0)], k=1)
    run_events(w, 4)
    lp = w.lps[0]
    # keep checkpoints at {start, 4, 8} to match the worked example
    lp.snapshots[:] = [s for s in lp.snapshots if s.time in (-math.inf, 4.0, 8.0)]
    return sim, w, lp


def test_fossil_keeps_newest_checkpoint_below_gvt():
    sim, w, lp = four_snapshots()
    rep = w.fossil_collect(6.0)
    assert [s.time for s in lp.snapshots] == [4.0, 8.0]
    assert rep.snapshots == 1
    # the event at 6.5 stays: coast-forward from 4 would still need it
    assert [m.recv_time for m in lp.queue.processed] == [6.5, 8.0, 9.0]


def test_fossil_at_infinity_keeps_only_latest_checkpoint():
    sim, w, lp = four_snapshots()
    w.fossil_collect(INFINITY)
    assert [s.time for s in lp.snapshots] == [8.0]
    assert [m.recv_time for m in lp.queue.processed] == [9.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_rollback_above_gvt_works_after_fossil_collection(k, seed, frac):
    cfg = small_phold(num_lps=1, seed=seed)
    sim = manual_sim(PholdModel(cfg), checkpoint_interval=k)
    w = sim.workers[0]
    for _ in range(40):
        w.incorporate_inbox()
        w.send(w.execute_next_event())
    lp = w.lps[0]
    clock = lp.clock
    gvt = clock * frac * 0.8
    w.fossil_collect(gvt)
    probe = gvt + (clock - gvt) * random.Random(seed).random()
    w.rollback(lp, probe)
    assert lp.clock == probe
    assert all(m.recv_time <= probe for m in lp.queue.processed)


def test_commit_hook_sees_published_sequence_and_run_stops():
    seen = []
    cfg = small_phold()
    sim, sched = scheduled_run(PholdModel(cfg), "wf", 2, cfg.t_end,
                               commit_hook=lambda w, g: seen.append((w.id, g)))
    assert sim.done
    for wid in (0, 1):
        mine = [g for w, g in seen if w == wid]
        assert mine == sim.workers[wid].gvt_seen
    assert set(sim.protocol.history) <= {g for _, g in seen}
    assert sim.protocol.history[-1] >= cfg.t_end


@pytest.mark.parametrize("protocol", ["wf", "fh"])
@pytest.mark.parametrize("k", [1, 3])
def test_committed_events_match_oracle(protocol, k):
    cfg = small_phold(t_end=25.0, seed=11)
    trace = run_sequential(PholdModel(cfg), cfg.t_end)
    assert 150 <= trace.executed <= 400
    sim, sched = scheduled_run(PholdModel(cfg), protocol, 2, cfg.t_end, seed=3,
                               checkpoint_interval=k)
    assert committed_pairs(sim) == oracle_pairs(trace)
    assert sum(w.stats.committed for w in sim.workers) == trace.executed
    assert sum(w.stats.rollbacks for w in sim.workers) > 0
    assert not sim.violations() and not sched.sweep_violations


def test_threaded_run_matches_oracle():
    cfg = small_phold(t_end=20.0, seed=5)
    from twgvt.kernel import WallTimer
    from twgvt.sim import Simulation
    sim = Simulation(PholdModel(cfg), "wf", 2, t_end=cfg.t_end,
                     timer_factory=lambda: WallTimer(0.005), track_commits=True)
    sim.run_threads(60)
    trace = run_sequential(PholdModel(cfg), cfg.t_end)
    assert committed_pairs(sim) == oracle_pairs(trace)
    assert not sim.violations()


def test_final_states_match_oracle_checksums():
    cfg = small_phold(seed=8)
    trace = run_sequential(PholdModel(cfg), cfg.t_end)
    sim, _ = scheduled_run(PholdModel(cfg), "fh", 3, cfg.t_end, seed=8)
    model = sim.model
    states = {}
    for w in sim.workers:
        for lp in w.lps:
            # state after the last event below t_end: nothing later was executed
            assert all(m.recv_time < cfg.t_end for m in lp.queue.processed)
            states[lp.id] = model.checksum(lp.state)
    assert [states[i] for i in range(cfg.num_lps)] == trace.checksums
