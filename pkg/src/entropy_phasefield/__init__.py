"""Backward-Euler solver for an entropy-balance phase-field system with singular nonlinearities."""
from .grid import GridSpec
from .monotone import NonlocalOp, PiFunction, ScalarGraph
from .scheme import EpsPolicy, SchemeConfig, SourceSpec, Trajectory, checkpoint_load, checkpoint_save, run
from .stepper import StepInputs, StepParams, StepResult, epsilon_ladder_step, fixed_point_step

__all__ = [
    "GridSpec",
    "NonlocalOp",
    "PiFunction",
    "ScalarGraph",
    "EpsPolicy",
    "SchemeConfig",
    "SourceSpec",
    "Trajectory",
    "checkpoint_load",
    "checkpoint_save",
    "run",
    "StepInputs",
    "StepParams",
    "StepResult",
    "epsilon_ladder_step",
    "fixed_point_step",
]
