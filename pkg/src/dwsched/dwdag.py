"""Dual-weighted DAG job model.

A job is a DAG whose tasks carry integer processing times and whose edges carry
two transfer times: ``r`` when producer and consumer share a machine and ``q``
when the data crosses the network.  Every edge is also a *general flow*; flows
are identified with edge indices throughout the package.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import CyclicGraph


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    q: int
    r: int


@dataclass(frozen=True)
class JobGraph:
    """Processing times ``tasks[j]`` and dual-weighted ``edges``.

    Construction never raises; call :func:`validate` to check the model
    assumptions.
    """

    tasks: tuple[int, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def in_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices entering each task."""
        acc: list[list[int]] = [[] for _ in self.tasks]
        for k, e in enumerate(self.edges):
            acc[e.v].append(k)
        return tuple(tuple(a) for a in acc)

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        acc: list[list[int]] = [[] for _ in self.tasks]
        for k, e in enumerate(self.edges):
            acc[e.u].append(k)
        return tuple(tuple(a) for a in acc)

    def edge_index(self, u: int, v: int) -> int | None:
        for k in self.out_edges[u]:
            if self.edges[k].v == v:
                return k
        return None


@dataclass(frozen=True)
class Instance:
    """A job graph together with ``machines`` identical machines and
    ``channels`` identical network channels.  ``t_max`` is optional; when
    absent the horizon is derived (see :func:`dwsched.schedule.horizon`)."""

    graph: JobGraph
    machines: int
    channels: int = 1
    t_max: int | None = None


class ValidationReport(NamedTuple):
    violations: list[tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(graph: JobGraph) -> ValidationReport:
    """Report every violated model assumption; never raises."""
    out: list[tuple[str, str]] = []
    n = graph.n_tasks
    if n == 0:
        out.append(("EMPTY", "job has no tasks"))
    for j, p in enumerate(graph.tasks):
        if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
            out.append(("NON_INTEGER", f"task {j}: processing time {p!r}"))
        elif p < 1:
            out.append(("NONPOSITIVE_DURATION", f"task {j}: p={p}"))
    seen: set[tuple[int, int]] = set()
    good: list[Edge] = []
    for k, e in enumerate(graph.edges):
        bad = False
        for name in ("q", "r"):
            w = getattr(e, name)
            if not isinstance(w, (int, np.integer)) or isinstance(w, bool):
                out.append(("NON_INTEGER", f"edge {k} ({e.u}->{e.v}): {name}={w!r}"))
            elif w < 0:
                out.append(("NEGATIVE_WEIGHT", f"edge {k} ({e.u}->{e.v}): {name}={w}"))
        if not (0 <= e.u < n and 0 <= e.v < n):
            out.append(("UNKNOWN_TASK", f"edge {k} ({e.u}->{e.v}) references a missing task"))
            bad = True
        elif e.u == e.v:
            out.append(("SELF_LOOP", f"edge {k} on task {e.u}"))
            bad = True
        elif (e.u, e.v) in seen:
            out.append(("DUPLICATE_EDGE", f"edge {k} repeats {e.u}->{e.v}"))
            bad = True
        else:
            seen.add((e.u, e.v))
        if not bad:
            good.append(e)
    if n and _kahn(n, [(e.u, e.v) for e in good]) is None:
        out.append(("CYCLE", "dependency graph contains a cycle"))
    return ValidationReport(out)


def _kahn(n: int, arcs: list[tuple[int, int]]) -> list[int] | None:
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for u, v in arcs:
        succ[u].append(v)
        indeg[v] += 1
    heap = [j for j in range(n) if indeg[j] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    return order if len(order) == n else None


def topo_order(graph: JobGraph) -> list[int]:
    """Topological order with ties broken by ascending task id."""
    order = _kahn(graph.n_tasks, [(e.u, e.v) for e in graph.edges])
    if order is None:
        raise CyclicGraph("dependency graph contains a cycle")
    return order


def critical_path_bound(graph: JobGraph) -> int:
    """Longest path counting every task's p and each edge's cheaper transfer.

    Valid as a makespan lower bound for any placement.
    """
    finish = [0] * graph.n_tasks
    for v in topo_order(graph):
        ready = 0
        for k in graph.in_edges[v]:
            e = graph.edges[k]
            ready = max(ready, finish[e.u] + min(e.q, e.r))
        finish[v] = ready + graph.tasks[v]
    return max(finish, default=0)


def descendant_masks(graph: JobGraph) -> list[int]:
    """Bitmask of strict descendants for each task."""
    masks = [0] * graph.n_tasks
    for u in reversed(topo_order(graph)):
        m = 0
        for k in graph.out_edges[u]:
            v = graph.edges[k].v
            m |= (1 << v) | masks[v]
        masks[u] = m
    return masks


def reachability(graph: JobGraph) -> np.ndarray:
    """``out[u, v]`` is True iff a directed path u -> ... -> v exists."""
    n = graph.n_tasks
    out = np.zeros((n, n), dtype=bool)
    for u, m in enumerate(descendant_masks(graph)):
        for v in range(n):
            if m >> v & 1:
                out[u, v] = True
    return out


def equivalent_siblings(graph: JobGraph) -> list[list[int]]:
    """Classes (size >= 2) of interchangeable tasks.

    Two tasks are interchangeable when they have the same processing time and
    the same predecessors and successors with pairwise equal (q, r) weights.
    """
    groups: dict[tuple, list[int]] = {}
    for j, p in enumerate(graph.tasks):
        preds = frozenset((graph.edges[k].u, graph.edges[k].q, graph.edges[k].r) for k in graph.in_edges[j])
        succs = frozenset((graph.edges[k].v, graph.edges[k].q, graph.edges[k].r) for k in graph.out_edges[j])
        groups.setdefault((p, preds, succs), []).append(j)
    return sorted(g for g in groups.values() if len(g) > 1)
