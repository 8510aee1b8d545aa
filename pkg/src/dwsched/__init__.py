"""Joint scheduling of computation tasks and data transfers for DAG jobs.

A job is a DAG whose edges carry two transfer times: ``r`` when both ends
run on the same machine and ``q`` when the data crosses a network channel.
"""
from .dwdag import Edge, Instance, JobGraph, topo_order, validate
from .errors import DwschedError
from .formulation import build_p2, export_lp
from .heuristics import HeuristicKind, run_heuristic
from .instgen import GenParams, generate
from .schedule import FlowPlacement, Schedule, TaskPlacement, check_feasible, makespan
from .solver import SolveOptions, solve_bruteforce, solve_exact

__version__ = "0.1.0"

__all__ = [
    "DwschedError", "Edge", "FlowPlacement", "GenParams", "HeuristicKind", "Instance", "JobGraph",
    "Schedule", "SolveOptions", "TaskPlacement", "build_p2", "check_feasible", "export_lp", "generate",
    "makespan", "run_heuristic", "solve_bruteforce", "solve_exact", "topo_order", "validate",
]
