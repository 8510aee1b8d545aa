"""Schedules and the executable semantics of the joint scheduling constraints.

Time is integral: an activity of duration ``d`` started at ``s`` occupies
``[s, s + d)``.  Channel ``0`` is the contention-free virtual channel that
carries internal transfers; real channels are numbered ``1..N``.

Constraint ids reported by :func:`check_feasible`:

=====  ==========================================================
C1     task assigned to an existing machine
C2     flow assigned to an existing channel (virtual or real)
C3     task start >= 0 and task end within the horizon
C4     tasks on the same machine do not overlap
C5     flow is virtual exactly when its endpoints share a machine
C6     internal flow: s_u + p_u <= s_f and s_f + r <= s_v
C7     external flow: s_u + p_u <= s_f
C8     external flow: s_f + q <= s_v
C9     flow start >= 0 and flow end within the horizon
C10    flows on the same real channel do not overlap
CMAX   recorded makespan differs from the recomputed one
=====  ==========================================================
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .dwdag import Instance, topo_order
from .errors import InconsistentOrder, InfeasibleSchedule, ShapeMismatch

VIRTUAL = 0


@dataclass(frozen=True)
class TaskPlacement:
    machine: int
    start: int


@dataclass(frozen=True)
class FlowPlacement:
    channel: int
    start: int

    @property
    def is_virtual(self) -> bool:
        return self.channel == VIRTUAL


@dataclass(frozen=True)
class Schedule:
    task_placements: tuple[TaskPlacement, ...]
    flow_placements: tuple[FlowPlacement, ...]
    makespan: int

    def __post_init__(self):
        object.__setattr__(self, "task_placements", tuple(self.task_placements))
        object.__setattr__(self, "flow_placements", tuple(self.flow_placements))

    @property
    def machines(self) -> list[int]:
        return [t.machine for t in self.task_placements]


class FeasibilityReport(NamedTuple):
    violations: list[tuple[str, str]]

    @property
    def feasible(self) -> bool:
        return not self.violations


def horizon(instance: Instance) -> int:
    """The instance's ``t_max``, or the default safe horizon.

    The default is the single-machine baseline plus every edge's larger
    transfer time; every semi-active schedule ends by then.
    """
    if instance.t_max is not None:
        return instance.t_max
    return single_machine_baseline(instance) + sum(max(e.q, e.r) for e in instance.graph.edges)


def flow_duration(instance: Instance, k: int, channel: int) -> int:
    e = instance.graph.edges[k]
    return e.r if channel == VIRTUAL else e.q


def _check_shape(instance: Instance, schedule: Schedule) -> None:
    g = instance.graph
    if len(schedule.task_placements) != g.n_tasks or len(schedule.flow_placements) != g.n_edges:
        raise ShapeMismatch(
            f"schedule has {len(schedule.task_placements)} tasks / {len(schedule.flow_placements)} flows, "
            f"instance has {g.n_tasks} / {g.n_edges}"
        )


def _makespan(instance: Instance, tasks: Sequence[TaskPlacement], flows: Sequence[FlowPlacement]) -> int:
    g = instance.graph
    ends = [t.start + p for t, p in zip(tasks, g.tasks)]
    ends += [f.start + flow_duration(instance, k, f.channel) for k, f in enumerate(flows)]
    return max(ends, default=0)


def make_schedule(instance: Instance, tasks: Sequence[TaskPlacement], flows: Sequence[FlowPlacement]) -> Schedule:
    """Bundle placements into a :class:`Schedule`, computing its makespan."""
    return Schedule(tuple(tasks), tuple(flows), _makespan(instance, tasks, flows))


def makespan(instance: Instance, schedule: Schedule) -> int:
    """Latest end over tasks and flows (flows last ``r`` if virtual, else ``q``)."""
    _check_shape(instance, schedule)
    return _makespan(instance, schedule.task_placements, schedule.flow_placements)


def _overlapping(ids: list[int], start: Sequence[int], dur: Sequence[int]):
    """Pairs violating the disjunction ``s_a + d_a <= s_b or s_b + d_b <= s_a``.

    Checked pairwise: zero-length transfers make adjacent-only checks unsound.
    """
    for n, a in enumerate(ids):
        for b in ids[n + 1:]:
            if start[a] + dur[a] > start[b] and start[b] + dur[b] > start[a]:
                yield a, b


def check_feasible(instance: Instance, schedule: Schedule) -> FeasibilityReport:
    _check_shape(instance, schedule)
    g = instance.graph
    t_max = horizon(instance)
    tp, fp = schedule.task_placements, schedule.flow_placements
    out: list[tuple[str, str]] = []

    for j, (t, p) in enumerate(zip(tp, g.tasks)):
        if not 1 <= t.machine <= instance.machines:
            out.append(("C1", f"task {j} on machine {t.machine}, valid range 1..{instance.machines}"))
        if t.start < 0:
            out.append(("C3", f"task {j} starts at {t.start} < 0"))
        if t.start + p > t_max:
            out.append(("C3", f"task {j} ends at {t.start + p} > t_max {t_max}"))

    by_machine: dict[int, list[int]] = {}
    for j, t in enumerate(tp):
        by_machine.setdefault(t.machine, []).append(j)
    for i, js in sorted(by_machine.items()):
        for a, b in _overlapping(js, [t.start for t in tp], g.tasks):
            out.append(("C4", f"tasks {a} and {b} overlap on machine {i}"))

    by_channel: dict[int, list[int]] = {}
    for k, (e, f) in enumerate(zip(g.edges, fp)):
        name = f"flow {k} ({e.u}->{e.v})"
        if not 0 <= f.channel <= instance.channels:
            out.append(("C2", f"{name} on channel {f.channel}, valid range 0..{instance.channels}"))
        same = tp[e.u].machine == tp[e.v].machine
        if same and not f.is_virtual:
            out.append(("C5", f"{name} is internal but placed on real channel {f.channel}"))
        if not same and f.is_virtual:
            out.append(("C5", f"{name} crosses machines {tp[e.u].machine}->{tp[e.v].machine} but is virtual"))
        u_end = tp[e.u].start + g.tasks[e.u]
        dur = flow_duration(instance, k, f.channel)
        if f.is_virtual:
            if u_end > f.start:
                out.append(("C6", f"{name} starts at {f.start} before task {e.u} ends at {u_end}"))
            if f.start + dur > tp[e.v].start:
                out.append(("C6", f"{name} ends at {f.start + dur} after task {e.v} starts at {tp[e.v].start}"))
        else:
            if u_end > f.start:
                out.append(("C7", f"{name} starts at {f.start} before task {e.u} ends at {u_end}"))
            if f.start + dur > tp[e.v].start:
                out.append(("C8", f"{name} ends at {f.start + dur} after task {e.v} starts at {tp[e.v].start}"))
            by_channel.setdefault(f.channel, []).append(k)
        if f.start < 0:
            out.append(("C9", f"{name} starts at {f.start} < 0"))
        if f.start + dur > t_max:
            out.append(("C9", f"{name} ends at {f.start + dur} > t_max {t_max}"))

    q = [e.q for e in g.edges]
    for c, ks in sorted(by_channel.items()):
        for a, b in _overlapping(ks, [f.start for f in fp], q):
            out.append(("C10", f"flows {a} and {b} overlap on channel {c}"))

    real = _makespan(instance, tp, fp)
    if schedule.makespan != real:
        out.append(("CMAX", f"recorded makespan {schedule.makespan}, actual {real}"))
    return FeasibilityReport(out)


def activity_starts(durations: Sequence[int], succ: Sequence[Sequence[int]]) -> list[int] | None:
    """Earliest starts of a finish-to-start activity network, or None on a cycle."""
    n = len(durations)
    indeg = [0] * n
    for a in range(n):
        for b in succ[a]:
            indeg[b] += 1
    stack = [a for a in range(n) if indeg[a] == 0]
    start = [0] * n
    seen = 0
    while stack:
        a = stack.pop()
        seen += 1
        end = start[a] + durations[a]
        for b in succ[a]:
            if end > start[b]:
                start[b] = end
            indeg[b] -= 1
            if indeg[b] == 0:
                stack.append(b)
    return start if seen == n else None


def earliest_start_schedule(
    instance: Instance,
    placement: Sequence[int],
    machine_orders: Mapping[int, Sequence[int]],
    channel_orders: Mapping[int, Sequence[int]],
) -> Schedule:
    """Semi-active schedule for fixed placements and resource sequences.

    ``placement[j]`` is task j's machine; ``machine_orders[i]`` lists the tasks
    on machine i in processing order; ``channel_orders[k]`` lists the edge
    indices of the external flows sent on real channel k.  Internal flows go
    on the virtual channel and must not appear in ``channel_orders``.
    """
    g = instance.graph
    J, F = g.n_tasks, g.n_edges
    if len(placement) != J:
        raise ShapeMismatch(f"placement covers {len(placement)} of {J} tasks")
    listed = sorted(j for seq in machine_orders.values() for j in seq)
    if listed != list(range(J)):
        raise ShapeMismatch("machine_orders must list every task exactly once")
    for i, seq in machine_orders.items():
        for j in seq:
            if placement[j] != i:
                raise ShapeMismatch(f"task {j} sequenced on machine {i} but placed on {placement[j]}")
    external = [k for k, e in enumerate(g.edges) if placement[e.u] != placement[e.v]]
    if sorted(k for seq in channel_orders.values() for k in seq) != external:
        raise ShapeMismatch("channel_orders must list every external flow exactly once")
    channel = [VIRTUAL] * F
    for c, seq in channel_orders.items():
        if c == VIRTUAL:
            raise ShapeMismatch("channel_orders may only name real channels")
        for k in seq:
            channel[k] = c

    dur = list(g.tasks) + [flow_duration(instance, k, channel[k]) for k in range(F)]
    succ: list[list[int]] = [[] for _ in range(J + F)]
    for k, e in enumerate(g.edges):
        succ[e.u].append(J + k)
        succ[J + k].append(e.v)
    for seq in machine_orders.values():
        for a, b in zip(seq, seq[1:]):
            succ[a].append(b)
    for seq in channel_orders.values():
        for a, b in zip(seq, seq[1:]):
            succ[J + a].append(J + b)
    start = activity_starts(dur, succ)
    if start is None:
        raise InconsistentOrder("precedence and resource sequences form a cycle")
    tasks = [TaskPlacement(placement[j], start[j]) for j in range(J)]
    flows = [FlowPlacement(channel[k], start[J + k]) for k in range(F)]
    return make_schedule(instance, tasks, flows)


def baseline_schedule(instance: Instance) -> Schedule:
    """Every task on machine 1 in topological order, every flow virtual."""
    order = topo_order(instance.graph)
    return earliest_start_schedule(instance, [1] * instance.graph.n_tasks, {1: order}, {})


def single_machine_baseline(instance: Instance) -> int:
    return baseline_schedule(instance).makespan


def normalized_makespan(instance: Instance, schedule: Schedule) -> Fraction:
    """Makespan relative to the single-machine serial baseline."""
    report = check_feasible(instance, schedule)
    if not report.feasible:
        raise InfeasibleSchedule(report)
    return Fraction(schedule.makespan, single_machine_baseline(instance))
