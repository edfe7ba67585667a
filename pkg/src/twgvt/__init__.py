"""Optimistic (Time Warp) PDES kernel with wait-free and lock-based GVT."""

from ._backend import BACKEND
from .core import (INFINITY, ContractViolation, Kind, Message, MessageId, annihilates,
                   event_cmp, event_key, make_antimessage, new_event)
from .gvt_fh import CriticalSectionGvt
from .gvt_waitfree import WaitFreeGvt
from .harness import (RunConfig, RunMetrics, emit_csv, read_csv, run_experiment,
                      spawn_interference)
from .kernel import ManualTimer, Outgoing, Phase, StepTimer, WallTimer, Worker
from .oracle import run_sequential, sequential_oracle
from .phold import PholdConfig, PholdModel
from .queues import ProtocolFault
from .sim import CooperativeScheduler, Simulation

__all__ = [
    "BACKEND", "INFINITY", "ContractViolation", "Kind", "Message", "MessageId",
    "annihilates", "event_cmp", "event_key", "make_antimessage", "new_event",
    "CriticalSectionGvt", "WaitFreeGvt", "RunConfig", "RunMetrics", "emit_csv",
    "read_csv", "run_experiment", "spawn_interference", "ManualTimer", "Outgoing",
    "Phase", "StepTimer", "WallTimer", "Worker", "run_sequential", "sequential_oracle",
    "PholdConfig", "PholdModel", "ProtocolFault", "CooperativeScheduler", "Simulation",
]
__version__ = "0.1.0"
