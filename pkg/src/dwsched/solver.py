"""Exact makespan minimization by depth-first branch and bound.

Search tree
-----------
1. Placement: tasks in topological order, machines tried in ascending order.
2. Channel assignment of the external flows (only when there are several
   real channels), flows in index order.
3. Sequencing: every unordered pair of activities sharing a machine or a real
   channel is ordered, one pair per level.  The pair order is fixed once per
   placement by the earliest start of the pair (then ids); the activity with
   the earlier head goes first in the first child.

Every node evaluates the activity network (tasks plus one node per general
flow; undecided transfers count with ``min(q, r)``) and is pruned when its
lower bound reaches the incumbent.  Three optional strategies shrink the
tree:

* chain pruning: pairs already ordered by a path through the job graph or by
  earlier decisions are never branched on;
* interval pruning: start windows ``[head, UB - 1 - dur - tail]`` drive
  resource-window bounds and force pair orders whose opposite would empty a
  window;
* symmetry breaking: machines and channels are opened in first-use order and
  interchangeable tasks are kept in id order.

``solve_bruteforce`` is an independent exhaustive oracle for tiny instances.
"""
from __future__ import annotations

import enum
import itertools
import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

from .dwdag import Instance, JobGraph, critical_path_bound, descendant_masks, equivalent_siblings, topo_order
from .errors import InconsistentOrder, InfeasibleWarmStart, TooLarge
from .schedule import (
    VIRTUAL,
    FlowPlacement,
    Schedule,
    TaskPlacement,
    baseline_schedule,
    check_feasible,
    earliest_start_schedule,
    make_schedule,
)


@dataclass(frozen=True)
class SolveOptions:
    enable_chain_pruning: bool = True
    enable_interval_pruning: bool = True
    enable_symmetry_breaking: bool = True
    node_limit: int | None = None
    time_limit: float | None = None  # seconds; ignored in deterministic mode
    deterministic: bool = True

    def __post_init__(self):
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")

    @classmethod
    def plain(cls, **kw) -> "SolveOptions":
        """All three pruning strategies off."""
        return cls(enable_chain_pruning=False, enable_interval_pruning=False, enable_symmetry_breaking=False, **kw)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible_incumbent"
    INFEASIBLE = "infeasible"


@dataclass
class SolveReport:
    status: Status
    best_makespan: int
    nodes_explored: int
    prunes: dict[str, int]
    lb_trajectory: list[tuple[int, int]]
    ub_trajectory: list[tuple[int, int]]
    wall_time: float


@dataclass(frozen=True)
class SearchNode:
    """Partial decisions.  ``placement[j]`` is 0 while undecided; ``channels[k]``
    is None while undecided, 0 for virtual.  ``arcs`` are extra
    finish-to-start arcs over activity ids (tasks ``0..J-1``, flow k is
    ``J + k``).  ``windows`` carries the last known ``(est, lst)`` lists."""

    placement: tuple[int, ...]
    channels: tuple[int | None, ...]
    arcs: tuple[tuple[int, int], ...] = ()
    windows: tuple[tuple[int, ...], tuple[int, ...]] | None = None


@dataclass(frozen=True)
class SymmetryFixations:
    pinned: dict[int, int]
    machine_caps: tuple[int, ...]  # per task, highest machine it may open
    priorities: tuple[tuple[int, int], ...]  # (j, j'): j on a machine <= j', and first if co-located


# ---------------------------------------------------------------- bounds and fixings


def initial_bounds(instance: Instance, warm: Schedule) -> tuple[int, int]:
    """``lb = max(ceil(sum p / M), critical path)``, ``ub = min(warm, baseline)``."""
    if not check_feasible(instance, warm).feasible:
        raise InfeasibleWarmStart("warm start violates the schedule constraints")
    g = instance.graph
    lb = max(-(-sum(g.tasks) // instance.machines), critical_path_bound(g))
    ub = min(warm.makespan, baseline_schedule(instance).makespan)
    return lb, ub


def fixed_precedences(graph: JobGraph) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Orders implied by the job graph.

    Returns ``(sigma, phi)``: ``(u, v)`` in sigma when task u must start before
    task v; ``(k, k')`` in phi when flow k must be sent before flow k'
    (the consumer of k is, or precedes, the producer of k').
    """
    desc = descendant_masks(graph)
    sigma = {(u, v) for u in range(graph.n_tasks) for v in range(graph.n_tasks) if desc[u] >> v & 1}
    phi = set()
    for k, e in enumerate(graph.edges):
        for k2, e2 in enumerate(graph.edges):
            if e.v == e2.u or desc[e.v] >> e2.u & 1:
                phi.add((k, k2))
    return sigma, phi


def symmetry_constraints(instance: Instance) -> SymmetryFixations:
    order = topo_order(instance.graph)
    caps = [0] * instance.graph.n_tasks
    for pos, j in enumerate(order):
        caps[j] = min(instance.machines, pos + 1)
    prio = []
    for cls in equivalent_siblings(instance.graph):
        prio += [(a, b) for a, b in zip(cls, cls[1:])]
    return SymmetryFixations({order[0]: 1}, tuple(caps), tuple(prio))


def allowed_channels(assigned: Sequence[int], channels: int, symmetry: bool = True) -> range:
    """Channels the next external flow may take given earlier flows' channels.

    With symmetry breaking, channel k+1 opens only after channel k is used.
    """
    if not symmetry:
        return range(1, channels + 1)
    return range(1, min(channels, max(assigned, default=0) + 1) + 1)


class _Net:
    """Activity network of an instance: tasks, then one node per general flow."""

    def __init__(self, instance: Instance):
        g = instance.graph
        self.inst = instance
        self.J, self.F = g.n_tasks, g.n_edges
        self.n = self.J + self.F
        self.p = list(g.tasks)
        self.eu = [e.u for e in g.edges]
        self.ev = [e.v for e in g.edges]
        self.eq = [e.q for e in g.edges]
        self.er = [e.r for e in g.edges]
        self.base_succ: list[list[int]] = [[] for _ in range(self.n)]
        for k in range(self.F):
            self.base_succ[self.eu[k]].append(self.J + k)
            self.base_succ[self.J + k].append(self.ev[k])
        self.base_indeg = [0] * self.n
        for s in self.base_succ:
            for b in s:
                self.base_indeg[b] += 1

    def durations(self, placement: Sequence[int]) -> list[int]:
        d = self.p[:]
        for k in range(self.F):
            mu, mv = placement[self.eu[k]], placement[self.ev[k]]
            if mu and mv:
                d.append(self.er[k] if mu == mv else self.eq[k])
            else:
                d.append(min(self.er[k], self.eq[k]))
        return d

    def longest(self, dur: Sequence[int], arcs: Sequence[tuple[int, int]], masks: bool = False):
        """Heads, tails (and descendant masks) or None if the arcs close a cycle."""
        n = self.n
        if arcs:
            succ = [s[:] for s in self.base_succ]
            indeg = self.base_indeg[:]
            for a, b in arcs:
                succ[a].append(b)
                indeg[b] += 1
        else:
            succ = self.base_succ
            indeg = self.base_indeg[:]
        order = [x for x in range(n) if indeg[x] == 0]
        i = 0
        while i < len(order):
            for b in succ[order[i]]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    order.append(b)
            i += 1
        if len(order) < n:
            return None
        head = [0] * n
        for a in order:
            end = head[a] + dur[a]
            for b in succ[a]:
                if end > head[b]:
                    head[b] = end
        tail = [0] * n
        desc = [0] * n if masks else None
        for a in reversed(order):
            t = 0
            m = 0
            for b in succ[a]:
                v = dur[b] + tail[b]
                if v > t:
                    t = v
                if masks:
                    m |= (1 << b) | desc[b]
            tail[a] = t
            if masks:
                desc[a] = m
        return head, tail, desc


def tighten_intervals(instance: Instance, lb: int, ub: int, node: SearchNode):
    """Start windows ``(est, lst)`` over all activities, or None when pruned.

    ``est`` is the longest path into the activity and ``lst`` is
    ``ub - duration - longest path out of it``; windows are intersected with
    the node's previous windows so they never widen.
    """
    if lb > ub:
        return None
    net = _Net(instance)
    dur = net.durations(node.placement)
    for k, c in enumerate(node.channels):
        if c is not None:
            dur[net.J + k] = net.er[k] if c == VIRTUAL else net.eq[k]
    res = net.longest(dur, node.arcs)
    if res is None:
        return None
    head, tail, _ = res
    est = [max(0, h) for h in head]
    lst = [ub - d - t for d, t in zip(dur, tail)]
    if node.windows is not None:
        est = [max(a, b) for a, b in zip(est, node.windows[0])]
        lst = [min(a, b) for a, b in zip(lst, node.windows[1])]
    if any(e > l for e, l in zip(est, lst)):
        return None
    return tuple(est), tuple(lst)


# ---------------------------------------------------------------- search


class _Stop(Exception):
    """Node or time limit reached."""


class _Done(Exception):
    """Incumbent meets the root lower bound."""


@dataclass
class _State:
    ub: int
    best: Schedule
    nodes: int = 0
    prunes: dict[str, int] = field(
        default_factory=lambda: dict.fromkeys(("bound", "interval", "infeasible", "chain", "symmetry"), 0)
    )
    ub_traj: list[tuple[int, int]] = field(default_factory=list)


class _Search:
    def __init__(self, instance: Instance, options: SolveOptions, state: _State, deadline: float | None):
        self.inst = instance
        self.opt = options
        self.st = state
        self.deadline = deadline
        self.net = net = _Net(instance)
        self.M, self.N = instance.machines, instance.channels
        self.order = topo_order(instance.graph)
        self.load_lb = -(-sum(net.p) // self.M)
        self.root_lb = max(self.load_lb, critical_path_bound(instance.graph))
        self.chain = options.enable_chain_pruning
        self.interval = options.enable_interval_pruning
        self.symmetry = options.enable_symmetry_breaking
        prio = symmetry_constraints(instance).priorities if self.symmetry else ()
        self.sym_before: dict[int, list[int]] = {}
        for a, b in prio:
            self.sym_before.setdefault(b, []).append(a)
        self.sym_pairs = prio

    # -- node evaluation
    def _tick(self) -> None:
        st = self.st
        if self.opt.node_limit is not None and st.nodes >= self.opt.node_limit:
            raise _Stop
        if self.deadline is not None and st.nodes % 64 == 0 and time.monotonic() > self.deadline:
            raise _Stop
        st.nodes += 1

    def _evaluate(self, placement, channels, arcs):
        """Count a node; return (dur, head, tail, desc) or None if pruned."""
        self._tick()
        net = self.net
        dur = net.durations(placement)
        res = net.longest(dur, arcs, masks=self.chain)
        if res is None:
            self.st.prunes["infeasible"] += 1
            return None
        head, tail, desc = res
        target = self.st.ub - 1
        lb = self.load_lb
        for x in range(net.n):
            v = head[x] + dur[x] + tail[x]
            if v > lb:
                lb = v
        if lb > target:
            self.st.prunes["bound"] += 1
            return None
        if self.interval and self._window_bound(placement, channels, dur, head, tail) > target:
            self.st.prunes["interval"] += 1
            return None
        return dur, head, tail, desc

    def _window_bound(self, placement, channels, dur, head, tail) -> int:
        """Resource bounds from windows: earliest head + work + smallest tail."""
        net = self.net
        best = 0
        groups: dict[tuple[str, int], list[int]] = {}
        for j in range(net.J):
            if placement[j]:
                groups.setdefault(("m", placement[j]), []).append(j)
        pooled = []
        for k in range(net.F):
            mu, mv = placement[net.eu[k]], placement[net.ev[k]]
            if mu and mv and mu != mv:
                x = net.J + k
                pooled.append(x)
                if channels[k]:
                    groups.setdefault(("c", channels[k]), []).append(x)
        for xs in groups.values():
            if len(xs) > 1:
                v = min(head[x] for x in xs) + sum(dur[x] for x in xs) + min(tail[x] for x in xs)
                best = max(best, v)
        if pooled:
            work = -(-sum(dur[x] for x in pooled) // self.N)
            best = max(best, min(head[x] for x in pooled) + work + min(tail[x] for x in pooled))
        return best

    def _improve(self, placement, channels, dur, head) -> None:
        net = self.net
        mk = max(head[x] + dur[x] for x in range(net.n))
        if mk >= self.st.ub:
            return
        tasks = [TaskPlacement(placement[j], head[j]) for j in range(net.J)]
        flows = [FlowPlacement(channels[k] or VIRTUAL, head[net.J + k]) for k in range(net.F)]
        self.st.ub = mk
        self.st.best = make_schedule(self.inst, tasks, flows)
        self.st.ub_traj.append((self.st.nodes, mk))
        if mk <= self.root_lb:
            raise _Done

    # -- placement
    def run(self) -> None:
        placement = [0] * self.net.J
        channels: list[int | None] = [None] * self.net.F
        try:
            if self._evaluate(placement, channels, ()) is not None:
                self._place(0, placement, channels, 0)
        except _Done:
            pass

    def _place(self, idx: int, placement: list[int], channels, used: int) -> None:
        if idx == len(self.order):
            self._assign_channels(placement)
            return
        j = self.order[idx]
        hi = min(self.M, used + 1) if self.symmetry else self.M
        lo = 1
        for a in self.sym_before.get(j, ()):
            lo = max(lo, placement[a])
        if self.symmetry:
            self.st.prunes["symmetry"] += (self.M - hi) + (lo - 1)
        for i in range(lo, hi + 1):
            placement[j] = i
            if self._evaluate(placement, channels, ()) is not None:
                self._place(idx + 1, placement, channels, max(used, i))
            placement[j] = 0

    # -- channel assignment
    def _assign_channels(self, placement: list[int]) -> None:
        net = self.net
        channels: list[int | None] = [
            VIRTUAL if placement[net.eu[k]] == placement[net.ev[k]] else None for k in range(net.F)
        ]
        external = [k for k in range(net.F) if channels[k] is None]
        if self.N == 1:
            for k in external:
                channels[k] = 1
            self._sequence_root(placement, channels)
            return
        self._branch_channel(placement, channels, external, 0, [])

    def _branch_channel(self, placement, channels, external, pos, assigned) -> None:
        if pos == len(external):
            self._sequence_root(placement, channels)
            return
        k = external[pos]
        allowed = allowed_channels(assigned, self.N, self.symmetry)
        if self.symmetry:
            self.st.prunes["symmetry"] += self.N - len(allowed)
        for c in allowed:
            channels[k] = c
            if self._evaluate(placement, channels, ()) is not None:
                self._branch_channel(placement, channels, external, pos + 1, assigned + [c])
            channels[k] = None

    # -- sequencing
    def _sequence_root(self, placement, channels) -> None:
        net = self.net
        dur = net.durations(placement)
        head, _, _ = net.longest(dur, ())
        members: dict[tuple[str, int], list[int]] = {}
        for j in range(net.J):
            members.setdefault(("m", placement[j]), []).append(j)
        for k in range(net.F):
            if channels[k]:
                members.setdefault(("c", channels[k]), []).append(net.J + k)
        pairs = []
        for xs in members.values():
            for a, b in itertools.combinations(xs, 2):
                first, second = sorted((a, b), key=lambda x: (head[x], x))
                pairs.append((head[first], head[second], first, second))
        pairs.sort()
        pairs = [(a, b) for _, _, a, b in pairs]
        arcs = []
        if self.symmetry:
            arcs = [(a, b) for a, b in self.sym_pairs if placement[a] == placement[b]]
        ev = self._evaluate(placement, channels, arcs) if arcs else (dur, head, *net.longest(dur, (), self.chain)[1:])
        if ev is None:
            return
        self._sequence(placement, channels, pairs, 0, arcs, ev)

    def _sequence(self, placement, channels, pairs, k, arcs, ev) -> None:
        dur, head, tail, desc = ev
        decided = set(arcs)
        if self.interval:
            res = self._select(placement, channels, pairs, k, arcs, ev, decided)
            if res is None:
                return
            arcs, ev = res
            dur, head, tail, desc = ev
            decided = set(arcs)
        while k < len(pairs):
            a, b = pairs[k]
            if self.chain:
                if desc[a] >> b & 1 or desc[b] >> a & 1:
                    self.st.prunes["chain"] += 1
                    k += 1
                    continue
            elif (a, b) in decided or (b, a) in decided:
                k += 1
                continue
            break
        else:
            self._improve(placement, channels, dur, head)
            return
        for x, y in ((a, b), (b, a)):
            child = arcs + [(x, y)]
            cev = self._evaluate(placement, channels, child)
            if cev is not None:
                self._sequence(placement, channels, pairs, k + 1, child, cev)

    def _select(self, placement, channels, pairs, k, arcs, ev, decided):
        """Force pair orders whose reverse would empty a start window."""
        while True:
            dur, head, tail, desc = ev
            target = self.st.ub - 1
            forced = []
            for a, b in pairs[k:]:
                if (a, b) in decided or (b, a) in decided:
                    continue
                if desc is not None and (desc[a] >> b & 1 or desc[b] >> a & 1):
                    continue
                ab = head[a] + dur[a] + dur[b] + tail[b] <= target
                ba = head[b] + dur[b] + dur[a] + tail[a] <= target
                if not ab and not ba:
                    self.st.prunes["interval"] += 1
                    return None
                if not ab:
                    forced.append((b, a))
                elif not ba:
                    forced.append((a, b))
            if not forced:
                return arcs, ev
            arcs = arcs + forced
            decided.update(forced)
            res = self.net.longest(self.net.durations(placement), arcs, masks=self.chain)
            if res is None:
                self.st.prunes["interval"] += 1
                return None
            head, tail, desc = res
            ev = (dur, head, tail, desc)
            lb = max(head[x] + dur[x] + tail[x] for x in range(self.net.n))
            if lb > target or self._window_bound(placement, channels, dur, head, tail) > target:
                self.st.prunes["interval"] += 1
                return None


def solve_exact(
    instance: Instance, options: SolveOptions | None = None, warm: Schedule | None = None
) -> tuple[Schedule, SolveReport]:
    """Minimum-makespan schedule.

    ``warm`` defaults to the single-machine baseline.  Hitting a node or time
    limit returns the incumbent with status ``FEASIBLE``.
    """
    options = options or SolveOptions()
    t0 = time.monotonic()
    base = baseline_schedule(instance)
    warm = warm if warm is not None else base
    lb, ub = initial_bounds(instance, warm)
    incumbent = warm if warm.makespan <= base.makespan else base
    state = _State(ub=ub, best=incumbent, ub_traj=[(0, ub)])
    lb_traj = [(0, lb)]
    status = Status.OPTIMAL
    if lb < ub:
        deadline = None
        if options.time_limit is not None and not options.deterministic:
            deadline = t0 + options.time_limit
        try:
            _Search(instance, options, state, deadline).run()
        except _Stop:
            status = Status.FEASIBLE
    if status is Status.OPTIMAL and lb_traj[-1][1] != state.ub:
        lb_traj.append((state.nodes, state.ub))
    report = SolveReport(
        status=status,
        best_makespan=state.ub,
        nodes_explored=state.nodes,
        prunes=state.prunes,
        lb_trajectory=lb_traj,
        ub_trajectory=state.ub_traj,
        wall_time=time.monotonic() - t0,
    )
    return state.best, report


# ---------------------------------------------------------------- brute-force oracle


def _linear_extensions(items: Sequence[int], before: dict[int, int]) -> Iterator[list[int]]:
    """Orders of ``items`` where ``before[x]`` (bitmask) lists items that must precede x."""
    items = list(items)
    if not items:
        yield []
        return
    scope = sum(1 << x for x in items)
    before = {x: before.get(x, 0) & scope for x in items}
    placed = 0

    def rec(prefix: list[int], rest: list[int]):
        nonlocal placed
        if not rest:
            yield list(prefix)
            return
        for n, x in enumerate(rest):
            if before.get(x, 0) & ~placed:
                continue
            placed |= 1 << x
            prefix.append(x)
            yield from rec(prefix, rest[:n] + rest[n + 1:])
            prefix.pop()
            placed &= ~(1 << x)

    yield from rec([], items)


def solve_bruteforce(
    instance: Instance, max_tasks: int = 6, max_machines: int = 3, max_channels: int = 2
) -> Schedule:
    """Enumerate every placement, precedence-consistent machine order, channel
    assignment and channel order; return the first minimum-makespan schedule."""
    g = instance.graph
    J, M, N = g.n_tasks, instance.machines, instance.channels
    if J > max_tasks or M > max_machines or N > max_channels:
        raise TooLarge(f"oracle caps are {max_tasks} tasks, {max_machines} machines, {max_channels} channels")
    desc = descendant_masks(g)
    task_before = {v: sum(1 << u for u in range(J) if desc[u] >> v & 1) for v in range(J)}
    # flow k must precede flow k' on a channel if k's consumer reaches k''s producer
    flow_before = {
        k2: sum(1 << k for k, e in enumerate(g.edges) if e.v == e2.u or desc[e.v] >> e2.u & 1)
        for k2, e2 in enumerate(g.edges)
    }
    best: Schedule | None = None
    for placement in itertools.product(range(1, M + 1), repeat=J):
        per_machine = [[j for j in range(J) if placement[j] == i] for i in range(1, M + 1)]
        external = [k for k, e in enumerate(g.edges) if placement[e.u] != placement[e.v]]
        machine_choices = [list(_linear_extensions(ts, task_before)) for ts in per_machine]
        for chans in itertools.product(range(1, N + 1), repeat=len(external)):
            per_channel = [[k for k, c in zip(external, chans) if c == ch] for ch in range(1, N + 1)]
            channel_choices = [list(_linear_extensions(fs, flow_before)) for fs in per_channel]
            for morders in itertools.product(*machine_choices):
                for corders in itertools.product(*channel_choices):
                    try:
                        s = earliest_start_schedule(
                            instance,
                            placement,
                            {i + 1: o for i, o in enumerate(morders)},
                            {c + 1: o for c, o in enumerate(corders)},
                        )
                    except InconsistentOrder:
                        continue
                    if best is None or s.makespan < best.makespan:
                        best = s
    assert best is not None
    return best
