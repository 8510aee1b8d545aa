"""Time-indexed integer model of the joint scheduling problem (Big-M form).

Variables (time index ``t`` runs over ``0..t_max-1``; channel ``0`` is the
virtual channel)::

    X_j_i_t     task j starts on machine i at t            binary
    Y_f_c_t     flow f starts on channel c at t            binary
    PSI_j_jp_i  tasks j < jp both on machine i             binary
    SIG_j_jp    task j starts no later than task jp        binary (ordered pairs)
    CHI_f_fp_k  flows f < fp both on real channel k        binary
    PHI_f_fp    flow f starts no later than flow fp        binary (ordered pairs)
    CMAX        makespan                                   integer in [0, t_max]

Row families and their sizes (J tasks, F flows, M machines, N real
channels, ordered pairs counted twice)::

    eq1   J            every task starts once
    eq11  F            every flow starts once, on a real or the virtual channel
    eq12  2 C(J,2) M   PSI consistent with X
    eq13  J(J-1)       SIG = 0 forces s_jp < s_j
    eq14  J(J-1)       co-located tasks do not overlap
    eq15  2 C(F,2) N   CHI consistent with Y
    eq16  F(F-1)       PHI = 0 forces s_fp < s_f
    eq17  F(F-1)       flows sharing a real channel do not overlap
    eq18  F            flow is virtual iff its endpoints are co-located
    eq19  F            flow starts after its producer ends
    eq20  F            consumer starts after the flow ends (r or q)
    cmax_task     J    CMAX >= s_j + p_j
    cmax_flow_q   F    CMAX >= s_f + q (1 - virtual)
    cmax_flow_r   F    CMAX >= s_f + r virtual

Big-M is ``t_max`` and the strictness constant is ``epsilon`` (default 1/2).
The strict ordering rows make two activities that share a resource unable to
share a start time, which only matters for zero-length external transfers.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO

from .dwdag import Instance, critical_path_bound, topo_order
from .errors import HorizonTooSmall, MultipleStarts, ShapeMismatch, SinkFailure
from .schedule import VIRTUAL, FlowPlacement, Schedule, TaskPlacement, make_schedule

Assignment = Mapping[str, int]

FAMILIES = (
    "eq1", "eq11", "eq12", "eq13", "eq14", "eq15", "eq16", "eq17",
    "eq18", "eq19", "eq20", "cmax_task", "cmax_flow_q", "cmax_flow_r",
)


@dataclass(frozen=True)
class Row:
    name: str
    family: str
    terms: tuple[tuple[int, Fraction | int], ...]
    sense: str  # "<=", ">=", "="
    rhs: Fraction | int


@dataclass
class IlpModel:
    instance: Instance
    t_max: int
    epsilon: Fraction
    names: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)
    upper: list[int] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)

    @property
    def big_m(self) -> int:
        return self.t_max

    @property
    def virtual_channel(self) -> int:
        return VIRTUAL

    def add_var(self, name: str, upper: int = 1) -> int:
        col = len(self.names)
        self.names.append(name)
        self.index[name] = col
        self.upper.append(upper)
        return col

    def is_binary(self, col: int) -> bool:
        return self.names[col] != "CMAX"


class _Builder:
    def __init__(self, model: IlpModel):
        self.m = model
        inst = model.instance
        g = inst.graph
        self.g = g
        self.T = model.t_max
        self.M, self.N = inst.machines, inst.channels
        ix = model.index
        T = self.T
        self.X = {(j, i, t): model.add_var(f"X_{j}_{i}_{t}")
                  for j in range(g.n_tasks) for i in range(1, self.M + 1) for t in range(T)}
        self.Y = {(f, c, t): model.add_var(f"Y_{f}_{c}_{t}")
                  for f in range(g.n_edges) for c in range(self.N + 1) for t in range(T)}
        self.PSI = {(j, jp, i): model.add_var(f"PSI_{j}_{jp}_{i}")
                    for j, jp in itertools.combinations(range(g.n_tasks), 2) for i in range(1, self.M + 1)}
        self.SIG = {(j, jp): model.add_var(f"SIG_{j}_{jp}")
                    for j, jp in itertools.permutations(range(g.n_tasks), 2)}
        self.CHI = {(f, fp, k): model.add_var(f"CHI_{f}_{fp}_{k}")
                    for f, fp in itertools.combinations(range(g.n_edges), 2) for k in range(1, self.N + 1)}
        self.PHI = {(f, fp): model.add_var(f"PHI_{f}_{fp}")
                    for f, fp in itertools.permutations(range(g.n_edges), 2)}
        self.CMAX = model.add_var("CMAX", upper=T)
        assert len(ix) == len(model.names)

    # linear expressions are dicts col -> coefficient
    def s_task(self, j, scale=1):
        return {self.X[j, i, t]: scale * t for i in range(1, self.M + 1) for t in range(1, self.T)}

    def s_flow(self, f, scale=1):
        return {self.Y[f, c, t]: scale * t for c in range(self.N + 1) for t in range(1, self.T)}

    def on_machine(self, j, i):
        return {self.X[j, i, t]: 1 for t in range(self.T)}

    def on_channel(self, f, c, scale=1):
        return {self.Y[f, c, t]: scale for t in range(self.T)}

    def row(self, name, family, parts, sense, rhs):
        acc: dict[int, Fraction | int] = {}
        for part in parts:
            for col, coef in part.items():
                acc[col] = acc.get(col, 0) + coef
        terms = tuple((c, v) for c, v in sorted(acc.items()) if v != 0)
        self.m.rows.append(Row(name, family, terms, sense, rhs))

    def build(self):
        g, T, M, N, eps = self.g, self.T, self.M, self.N, self.m.epsilon
        J, F = g.n_tasks, g.n_edges
        big = T
        for j in range(J):
            self.row(f"eq1_{j}", "eq1", [self.on_machine(j, i) for i in range(1, M + 1)], "=", 1)
        for f in range(F):
            self.row(f"eq11_{f}", "eq11", [self.on_channel(f, c) for c in range(N + 1)], "=", 1)
        for j, jp in itertools.combinations(range(J), 2):
            for i in range(1, M + 1):
                parts = [self.on_machine(j, i), self.on_machine(jp, i), {self.PSI[j, jp, i]: -2}]
                self.row(f"eq12lo_{j}_{jp}_{i}", "eq12", parts, ">=", 0)
                self.row(f"eq12hi_{j}_{jp}_{i}", "eq12", parts, "<=", 1)
        for j, jp in itertools.permutations(range(J), 2):
            parts = [self.s_task(jp), self.s_task(j, -1), {self.SIG[j, jp]: -(big + eps)}]
            self.row(f"eq13_{j}_{jp}", "eq13", parts, "<=", -eps)
        for j, jp in itertools.permutations(range(J), 2):
            a, b = min(j, jp), max(j, jp)
            parts = [self.s_task(j), self.s_task(jp, -1), {self.SIG[j, jp]: big},
                     {self.PSI[a, b, i]: big for i in range(1, M + 1)}]
            self.row(f"eq14_{j}_{jp}", "eq14", parts, "<=", 2 * big - g.tasks[j])
        for f, fp in itertools.combinations(range(F), 2):
            for k in range(1, N + 1):
                parts = [self.on_channel(f, k), self.on_channel(fp, k), {self.CHI[f, fp, k]: -2}]
                self.row(f"eq15lo_{f}_{fp}_{k}", "eq15", parts, ">=", 0)
                self.row(f"eq15hi_{f}_{fp}_{k}", "eq15", parts, "<=", 1)
        for f, fp in itertools.permutations(range(F), 2):
            parts = [self.s_flow(fp), self.s_flow(f, -1), {self.PHI[f, fp]: -(big + eps)}]
            self.row(f"eq16_{f}_{fp}", "eq16", parts, "<=", -eps)
        for f, fp in itertools.permutations(range(F), 2):
            a, b = min(f, fp), max(f, fp)
            parts = [self.s_flow(f), self.s_flow(fp, -1), {self.PHI[f, fp]: big},
                     {self.CHI[a, b, k]: big for k in range(1, N + 1)}]
            self.row(f"eq17_{f}_{fp}", "eq17", parts, "<=", 2 * big - g.edges[f].q)
        for f, e in enumerate(g.edges):
            a, b = min(e.u, e.v), max(e.u, e.v)
            parts = [{self.PSI[a, b, i]: 1 for i in range(1, M + 1)}, self.on_channel(f, VIRTUAL, -1)]
            self.row(f"eq18_{f}", "eq18", parts, "=", 0)
        for f, e in enumerate(g.edges):
            self.row(f"eq19_{f}", "eq19", [self.s_task(e.u), self.s_flow(f, -1)], "<=", -g.tasks[e.u])
        for f, e in enumerate(g.edges):
            parts = [self.s_flow(f), self.on_channel(f, VIRTUAL, e.r - e.q), self.s_task(e.v, -1)]
            self.row(f"eq20_{f}", "eq20", parts, "<=", -e.q)
        for j in range(J):
            self.row(f"cmaxp_{j}", "cmax_task", [{self.CMAX: 1}, self.s_task(j, -1)], ">=", g.tasks[j])
        for f, e in enumerate(g.edges):
            parts = [{self.CMAX: 1}, self.s_flow(f, -1), self.on_channel(f, VIRTUAL, e.q)]
            self.row(f"cmaxq_{f}", "cmax_flow_q", parts, ">=", e.q)
        for f, e in enumerate(g.edges):
            parts = [{self.CMAX: 1}, self.s_flow(f, -1), self.on_channel(f, VIRTUAL, -e.r)]
            self.row(f"cmaxr_{f}", "cmax_flow_r", parts, ">=", 0)


def build_p2(instance: Instance, t_max: int, epsilon: Fraction | float | str = Fraction(1, 2)) -> IlpModel:
    """Linearized model whose feasible points are the schedules ending by ``t_max``.

    Raises :class:`HorizonTooSmall` when ``t_max`` is below the critical path
    or below the largest external transfer time (either would make Big-M
    rows cut off feasible schedules).
    """
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    g = instance.graph
    need = max(critical_path_bound(g), max((e.q for e in g.edges), default=0))
    if t_max < need:
        raise HorizonTooSmall(f"t_max={t_max} below the required {need}")
    model = IlpModel(instance, t_max, epsilon)
    _Builder(model).build()
    return model


def constraint_counts(model: IlpModel) -> dict[str, int]:
    counts = dict.fromkeys(FAMILIES, 0)
    for row in model.rows:
        counts[row.family] += 1
    return counts


def expected_counts(tasks: int, flows: int, machines: int, channels: int) -> dict[str, int]:
    """Closed-form row counts per family."""
    J, F, M, N = tasks, flows, machines, channels
    return {
        "eq1": J, "eq11": F, "eq12": J * (J - 1) * M, "eq13": J * (J - 1), "eq14": J * (J - 1),
        "eq15": F * (F - 1) * N, "eq16": F * (F - 1), "eq17": F * (F - 1),
        "eq18": F, "eq19": F, "eq20": F, "cmax_task": J, "cmax_flow_q": F, "cmax_flow_r": F,
    }


# ---------------------------------------------------------------- LP export


def _num(x: Fraction | int) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def instance_digest(instance: Instance) -> str:
    from .instgen import dumps_instance

    return hashlib.sha256(dumps_instance(instance).encode()).hexdigest()[:16]


def export_lp(model: IlpModel, sink: BinaryIO) -> None:
    """Write the model in CPLEX LP format, deterministically."""
    names = model.names
    out = [
        f"\\ dwsched model instance={instance_digest(model.instance)} t_max={model.t_max} "
        f"epsilon={model.epsilon} time-index=0-based virtual-channel=0",
        "Minimize",
        " obj: CMAX",
        "Subject To",
    ]
    for row in model.rows:
        line = f" {row.name}:"
        pieces = []
        for col, coef in row.terms:
            sign = "-" if coef < 0 else "+"
            mag = abs(Fraction(coef))
            pieces.append(f"{sign} {names[col]}" if mag == 1 else f"{sign} {_num(mag)} {names[col]}")
        if not pieces:
            pieces.append("0 CMAX")
        pieces.append(f"{row.sense} {_num(row.rhs)}")
        for piece in pieces:
            if len(line) + len(piece) + 1 > 250:
                out.append(line)
                line = "  "
            line += " " + piece
        out.append(line)
    out.append("Bounds")
    out.append(f" 0 <= CMAX <= {model.t_max}")
    out.append("Binaries")
    binaries = [n for c, n in enumerate(names) if model.is_binary(c)]
    for n in range(0, len(binaries), 8):
        out.append(" " + " ".join(binaries[n:n + 8]))
    out.append("Generals")
    out.append(" CMAX")
    out.append("End")
    data = ("\n".join(out) + "\n").encode("ascii")
    try:
        sink.write(data)
    except (OSError, ValueError) as exc:
        raise SinkFailure(str(exc)) from exc


# ---------------------------------------------------------------- assignments


def _values(model: IlpModel, a: Assignment) -> list[int]:
    if set(a) != set(model.index):
        missing = len(set(model.index) - set(a))
        extra = len(set(a) - set(model.index))
        raise ShapeMismatch(f"assignment has {missing} missing and {extra} unknown variables")
    return [a[n] for n in model.names]


def _row_ok(row: Row, vals: list[int]) -> bool:
    lhs = sum(coef * vals[col] for col, coef in row.terms)
    if row.sense == "<=":
        return lhs <= row.rhs
    if row.sense == ">=":
        return lhs >= row.rhs
    return lhs == row.rhs


def validate_assignment(model: IlpModel, a: Assignment) -> list[str]:
    """Names of violated rows, plus ``bound:<var>`` for domain violations."""
    vals = _values(model, a)
    bad = [f"bound:{model.names[c]}" for c, v in enumerate(vals) if not 0 <= v <= model.upper[c]]
    bad += [row.name for row in model.rows if not _row_ok(row, vals)]
    return bad


def encode_schedule(model: IlpModel, schedule: Schedule) -> dict[str, int]:
    """Model point describing ``schedule``.  Ties in start times set both
    ordering indicators to 1."""
    inst = model.instance
    g = inst.graph
    tp, fp = schedule.task_placements, schedule.flow_placements
    if len(tp) != g.n_tasks or len(fp) != g.n_edges:
        raise ShapeMismatch("schedule does not match the model's instance")
    for s in [t.start for t in tp] + [f.start for f in fp]:
        if not 0 <= s < model.t_max:
            raise ShapeMismatch(f"start {s} outside the model's time index")
    a = dict.fromkeys(model.names, 0)
    for j, t in enumerate(tp):
        a[f"X_{j}_{t.machine}_{t.start}"] = 1
    for f, fl in enumerate(fp):
        a[f"Y_{f}_{fl.channel}_{fl.start}"] = 1
    for j, jp in itertools.combinations(range(g.n_tasks), 2):
        if tp[j].machine == tp[jp].machine:
            a[f"PSI_{j}_{jp}_{tp[j].machine}"] = 1
    for j, jp in itertools.permutations(range(g.n_tasks), 2):
        a[f"SIG_{j}_{jp}"] = int(tp[j].start <= tp[jp].start)
    for f, fp_ in itertools.combinations(range(g.n_edges), 2):
        if fp[f].channel == fp[fp_].channel != VIRTUAL:
            a[f"CHI_{f}_{fp_}_{fp[f].channel}"] = 1
    for f, fp_ in itertools.permutations(range(g.n_edges), 2):
        a[f"PHI_{f}_{fp_}"] = int(fp[f].start <= fp[fp_].start)
    a["CMAX"] = schedule.makespan
    if len(a) != len(model.names):
        raise ShapeMismatch("schedule uses machines or channels outside the model")
    return a


def decode_solution(model: IlpModel, a: Assignment) -> Schedule:
    """Schedule read off the X and Y variables (one start per task and flow)."""
    vals = _values(model, a)
    inst = model.instance
    g = inst.graph
    T = model.t_max
    ix = model.index
    tasks = []
    for j in range(g.n_tasks):
        hits = [(i, t) for i in range(1, inst.machines + 1) for t in range(T) if vals[ix[f"X_{j}_{i}_{t}"]]]
        if len(hits) != 1:
            raise MultipleStarts(f"task {j} has {len(hits)} start variables set")
        tasks.append(TaskPlacement(*hits[0]))
    flows = []
    for f in range(g.n_edges):
        hits = [(c, t) for c in range(inst.channels + 1) for t in range(T) if vals[ix[f"Y_{f}_{c}_{t}"]]]
        if len(hits) != 1:
            raise MultipleStarts(f"flow {f} has {len(hits)} start variables set")
        flows.append(FlowPlacement(*hits[0]))
    return make_schedule(inst, tasks, flows)


# ---------------------------------------------------------------- exhaustive search


def exhaustive_minimum(model: IlpModel) -> tuple[int, dict[str, int]] | None:
    """Smallest CMAX over all feasible model points, by exhaustive search.

    CMAX values are tried in increasing order; for each, every combination of
    start variables (one per task and flow) and every indicator value is
    enumerated, with each row checked as soon as all its variables are set.
    Only practical for a handful of tasks and a short horizon.
    """
    inst = model.instance
    g = inst.graph
    ix = model.index
    T, M, N = model.t_max, inst.machines, inst.channels

    groups: list[list[int]] = []  # each group: alternative columns (one-hot) or [col] for a binary
    kinds: list[str] = []

    def onehot(cols):
        groups.append(cols)
        kinds.append("onehot")

    def binary(col):
        groups.append([col])
        kinds.append("binary")

    placed_tasks: list[int] = []
    placed_flows: list[int] = []
    for j in topo_order(g):
        onehot([ix[f"X_{j}_{i}_{t}"] for i in range(1, M + 1) for t in range(T)])
        for jp in placed_tasks:
            a, b = min(j, jp), max(j, jp)
            for i in range(1, M + 1):
                binary(ix[f"PSI_{a}_{b}_{i}"])
            binary(ix[f"SIG_{j}_{jp}"])
            binary(ix[f"SIG_{jp}_{j}"])
        placed_tasks.append(j)
        for f, e in enumerate(g.edges):
            if f in placed_flows or e.u not in placed_tasks or e.v not in placed_tasks:
                continue
            onehot([ix[f"Y_{f}_{c}_{t}"] for c in range(N + 1) for t in range(T)])
            for fp in placed_flows:
                a, b = min(f, fp), max(f, fp)
                for k in range(1, N + 1):
                    binary(ix[f"CHI_{a}_{b}_{k}"])
                binary(ix[f"PHI_{f}_{fp}"])
                binary(ix[f"PHI_{fp}_{f}"])
            placed_flows.append(f)
    cmax = ix["CMAX"]
    position = {cmax: -1}
    for n, cols in enumerate(groups):
        for c in cols:
            position[c] = n
    assert len(position) == len(model.names)

    # integer-scaled rows, bucketed by the group completing them
    checks: list[list[tuple[list[int], list[int], str, int]]] = [[] for _ in groups]
    cmax_only = []
    for row in model.rows:
        scale = math.lcm(Fraction(row.rhs).denominator, *(Fraction(v).denominator for _, v in row.terms))
        cols = [c for c, _ in row.terms]
        coefs = [int(Fraction(v) * scale) for _, v in row.terms]
        entry = (cols, coefs, row.sense, int(Fraction(row.rhs) * scale))
        last = max((position[c] for c in cols), default=-1)
        (cmax_only if last < 0 else checks[last]).append(entry)

    vals = [0] * len(model.names)

    def ok(entries) -> bool:
        for cols, coefs, sense, rhs in entries:
            lhs = 0
            for c, v in zip(cols, coefs):
                x = vals[c]
                if x:
                    lhs += v * x
            if sense == "<=":
                if lhs > rhs:
                    return False
            elif sense == ">=":
                if lhs < rhs:
                    return False
            elif lhs != rhs:
                return False
        return True

    def dfs(n: int) -> bool:
        if n == len(groups):
            return True
        cols = groups[n]
        if kinds[n] == "onehot":
            for c in cols:
                vals[c] = 1
                if ok(checks[n]) and dfs(n + 1):
                    return True
                vals[c] = 0
            return False
        c = cols[0]
        for v in (0, 1):
            vals[c] = v
            if ok(checks[n]) and dfs(n + 1):
                return True
        vals[c] = 0
        return False

    for value in range(T + 1):
        vals[cmax] = value
        if ok(cmax_only) and dfs(0):
            return value, dict(zip(model.names, vals))
    return None
