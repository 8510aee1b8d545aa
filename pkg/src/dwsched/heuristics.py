"""Baseline schedulers used for comparison and as warm starts.

The schemes are reconstructions: ``random`` and ``list`` decide placement
only and let transfers fall where they may; ``glist`` and ``partition``
account for transfers when placing tasks.  External flows always go
first-come-first-served to the real channel that frees up earliest.  Ties are
broken by lowest task id, then lowest machine or channel index.
"""
from __future__ import annotations

import enum

from .dwdag import Instance, topo_order
from .instgen import Pcg64Stream
from .schedule import (
    VIRTUAL,
    FlowPlacement,
    Schedule,
    TaskPlacement,
    baseline_schedule,
    earliest_start_schedule,
    make_schedule,
)


class HeuristicKind(str, enum.Enum):
    RANDOM = "random"
    LIST = "list"
    GLIST = "glist"
    PARTITION = "partition"


class _Dispatcher:
    """Non-insertion dispatcher: appends tasks to machines and flows to channels."""

    def __init__(self, instance: Instance):
        self.inst = instance
        self.g = instance.graph
        self.machine_free = [0] * (instance.machines + 1)
        self.channel_free = [0] * (instance.channels + 1)
        self.tasks: list[TaskPlacement | None] = [None] * self.g.n_tasks
        self.flows: list[FlowPlacement | None] = [None] * self.g.n_edges

    def end(self, j: int) -> int:
        t = self.tasks[j]
        return t.start + self.g.tasks[j]

    def _inbound(self, j: int, machine: int, channel_free: list[int]):
        """Route j's inbound flows for a given machine; returns (ready, flows)."""
        g = self.g
        ready = 0
        routed = []
        for k in sorted(g.in_edges[j], key=lambda k: (self.end(g.edges[k].u), k)):
            e = g.edges[k]
            u_end = self.end(e.u)
            if self.tasks[e.u].machine == machine:
                routed.append((k, FlowPlacement(VIRTUAL, u_end)))
                ready = max(ready, u_end + e.r)
            else:
                c = min(range(1, len(channel_free)), key=lambda c: (channel_free[c], c))
                s = max(u_end, channel_free[c])
                channel_free[c] = s + e.q
                routed.append((k, FlowPlacement(c, s)))
                ready = max(ready, s + e.q)
        return ready, routed

    def trial(self, j: int, machine: int, not_before: int = 0) -> int:
        """Finish time of j on ``machine`` without committing anything."""
        ready, _ = self._inbound(j, machine, list(self.channel_free))
        return max(ready, not_before, self.machine_free[machine]) + self.g.tasks[j]

    def place(self, j: int, machine: int, not_before: int = 0) -> None:
        ready, routed = self._inbound(j, machine, self.channel_free)
        for k, f in routed:
            self.flows[k] = f
        start = max(ready, not_before, self.machine_free[machine])
        self.tasks[j] = TaskPlacement(machine, start)
        self.machine_free[machine] = start + self.g.tasks[j]

    def schedule(self) -> Schedule:
        return make_schedule(self.inst, self.tasks, self.flows)


def _bottom_levels(instance: Instance, comm: bool) -> list[int]:
    g = instance.graph
    level = [0] * g.n_tasks
    for u in reversed(topo_order(g)):
        tail = 0
        for k in g.out_edges[u]:
            e = g.edges[k]
            tail = max(tail, (e.q if comm else 0) + level[e.v])
        level[u] = g.tasks[u] + tail
    return level


def schedule_random(instance: Instance, seed: int) -> Schedule:
    """Uniformly random machine per task, tasks released in topological order."""
    rng = Pcg64Stream(seed)
    d = _Dispatcher(instance)
    for j in topo_order(instance.graph):
        d.place(j, rng.integers(1, instance.machines))
    return d.schedule()


def schedule_list(instance: Instance) -> Schedule:
    """Event-driven list scheduling on placement alone.

    Whenever a machine is idle, it takes the ready task with the longest
    remaining processing path.  A task is ready once all its predecessors
    have finished; its inbound transfers are routed only after it has been
    given a machine.
    """
    g = instance.graph
    prio = _bottom_levels(instance, comm=False)
    d = _Dispatcher(instance)
    preds = [[g.edges[k].u for k in g.in_edges[j]] for j in range(g.n_tasks)]
    left = set(range(g.n_tasks))
    t = 0
    while left:
        ready = sorted(
            (j for j in left if all(d.tasks[u] is not None and d.end(u) <= t for u in preds[j])),
            key=lambda j: (-prio[j], j),
        )
        for i in range(1, instance.machines + 1):
            if not ready:
                break
            if d.machine_free[i] <= t:
                j = ready.pop(0)
                d.place(j, i, t)
                left.discard(j)
        later = [d.end(j) for j in range(g.n_tasks) if d.tasks[j] is not None and d.end(j) > t]
        later += [f for f in d.machine_free[1:] if f > t]
        if not later:
            if left:  # pragma: no cover - every unfinished job has an event ahead
                raise RuntimeError("list scheduler stalled")
            break
        t = min(later)
    return d.schedule()


def schedule_glist(instance: Instance) -> Schedule:
    """Communication-aware list scheduling.

    Ready tasks are taken by decreasing bottom level (processing plus external
    transfer times) and each goes to the machine giving the earliest finish,
    routing its inbound transfers over the current channel state.  The
    all-on-one-machine plan is kept as a fallback candidate, so the result
    never exceeds the single-machine baseline.
    """
    g = instance.graph
    prio = _bottom_levels(instance, comm=True)
    d = _Dispatcher(instance)
    placed = [False] * g.n_tasks
    preds = [[g.edges[k].u for k in g.in_edges[j]] for j in range(g.n_tasks)]
    for _ in range(g.n_tasks):
        j = min(
            (j for j in range(g.n_tasks) if not placed[j] and all(placed[u] for u in preds[j])),
            key=lambda j: (-prio[j], j),
        )
        best = min(range(1, instance.machines + 1), key=lambda i: (d.trial(j, i), i))
        d.place(j, best)
        placed[j] = True
    greedy = d.schedule()
    fallback = baseline_schedule(instance)
    return greedy if greedy.makespan <= fallback.makespan else fallback


def partition_groups(instance: Instance) -> list[int]:
    """Greedy balanced min-cut: machine (group) per task.

    Tasks are taken in topological order; each joins the group minimizing the
    transfer time it induces from already-grouped predecessors (``r`` inside a
    group, ``q`` across) plus the amount by which the group's load would
    exceed an even share of the total work.
    """
    g = instance.graph
    share = sum(g.tasks) / instance.machines
    load = [0] * (instance.machines + 1)
    group = [0] * g.n_tasks
    for j in topo_order(g):
        def cost(i: int) -> float:
            transfer = 0
            for k in g.in_edges[j]:
                e = g.edges[k]
                transfer += e.r if group[e.u] == i else e.q
            return transfer + max(0.0, load[i] + g.tasks[j] - share)

        best = min(range(1, instance.machines + 1), key=lambda i: (cost(i), i))
        group[j] = best
        load[best] += g.tasks[j]
    return group


def sequences_in_topo_order(instance: Instance, placement: list[int]):
    """Machine and channel sequences that follow topological order.

    External flows are ordered by their producer's topological position and
    each goes to the real channel with the least transfer time assigned so far.
    """
    g = instance.graph
    order = topo_order(g)
    pos = {j: n for n, j in enumerate(order)}
    machine_orders: dict[int, list[int]] = {i: [] for i in range(1, instance.machines + 1)}
    for j in order:
        machine_orders[placement[j]].append(j)
    external = sorted(
        (k for k, e in enumerate(g.edges) if placement[e.u] != placement[e.v]),
        key=lambda k: (pos[g.edges[k].u], k),
    )
    busy = [0] * (instance.channels + 1)
    channel_orders: dict[int, list[int]] = {c: [] for c in range(1, instance.channels + 1)}
    for k in external:
        c = min(range(1, instance.channels + 1), key=lambda c: (busy[c], c))
        channel_orders[c].append(k)
        busy[c] += g.edges[k].q
    return machine_orders, channel_orders


def schedule_partition(instance: Instance) -> Schedule:
    placement = partition_groups(instance)
    machine_orders, channel_orders = sequences_in_topo_order(instance, placement)
    return earliest_start_schedule(instance, placement, machine_orders, channel_orders)


def run_heuristic(kind: HeuristicKind | str, instance: Instance, seed: int = 0) -> Schedule:
    kind = HeuristicKind(kind)
    if kind is HeuristicKind.RANDOM:
        return schedule_random(instance, seed)
    if kind is HeuristicKind.LIST:
        return schedule_list(instance)
    if kind is HeuristicKind.GLIST:
        return schedule_glist(instance)
    return schedule_partition(instance)


def best_heuristic(instance: Instance, seed: int = 0) -> Schedule:
    """Lowest-makespan schedule among all heuristics (earliest kind on ties)."""
    return min((run_heuristic(k, instance, seed) for k in HeuristicKind), key=lambda s: s.makespan)
