"""Seeded instance generation, fixture instances, and JSON file formats.

Random numbers come from :class:`Pcg64Stream`: the raw 64-bit output of
numpy's PCG64 bit generator (PCG XSL-RR 128/64, whose stream is fixed by
numpy's compatibility policy), reduced to integers by rejection sampling and
to floats by taking the top 53 bits.  Nothing depends on numpy's
``Generator`` distribution code, so fixtures stay portable.

Instance document (``version`` 1)::

    {"version": 1, "machines": 2, "channels": 1, "t_max": 40,      # t_max optional
     "tasks": [{"id": 0, "p": 5}, ...],
     "edges": [{"u": 0, "v": 1, "q": 4, "r": 1}, ...]}

Schedule document (``version`` 1); ``channel`` is ``"virtual"`` or a real
channel number::

    {"version": 1, "makespan": 9,
     "tasks": [{"id": 0, "machine": 1, "start": 0}, ...],
     "flows": [{"id": 0, "u": 0, "v": 1, "channel": 1, "start": 2}, ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Any

import numpy as np

from .dwdag import Edge, Instance, JobGraph, validate
from .errors import InvalidParams, ParseError, ValidationFailed
from .schedule import VIRTUAL, FlowPlacement, Schedule, TaskPlacement, single_machine_baseline

__all__ = [
    "GenParams",
    "Instance",
    "Pcg64Stream",
    "generate",
    "example_instance",
    "EXAMPLE_OPTIMUM",
    "dumps_instance",
    "loads_instance",
    "write_instance",
    "read_instance",
    "dumps_schedule",
    "loads_schedule",
    "write_schedule",
    "read_schedule",
]

_MASK64 = (1 << 64) - 1


class Pcg64Stream:
    """Deterministic integer/float draws on top of PCG64 raw output."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed & _MASK64)

    def next_u64(self) -> int:
        return int(self._bits.random_raw())

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        span = hi - lo + 1
        if span <= 0:
            raise ValueError("empty range")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class GenParams:
    """Generator settings.  Defaults follow the benchmark convention: ten
    tasks over three ranks, processing times in [1, 100], external transfer
    times in [1, 50], instantaneous internal transfers."""

    task_count: int = 10
    edge_probability: float = 0.35
    p_range: tuple[int, int] = (1, 100)
    q_range: tuple[int, int] = (1, 50)
    r_range: tuple[int, int] = (0, 0)
    machines: int = 2
    channels: int = 1
    layers: int = 3

    def check(self) -> None:
        if self.task_count < 1:
            raise InvalidParams("task_count must be >= 1")
        if not 0.0 <= self.edge_probability <= 1.0:
            raise InvalidParams("edge_probability must lie in [0, 1]")
        for name in ("p_range", "q_range", "r_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise InvalidParams(f"{name} must be a nonempty nonnegative interval, got {(lo, hi)}")
        if self.p_range[0] < 1:
            raise InvalidParams("processing times must be >= 1")
        if self.machines < 1 or self.channels < 1 or self.layers < 1:
            raise InvalidParams("machines, channels and layers must be >= 1")


def _ranks(task_count: int, layers: int) -> list[int]:
    layers = min(layers, task_count)
    base, extra = divmod(task_count, layers)
    ranks = []
    for layer in range(layers):
        ranks += [layer] * (base + (1 if layer < extra else 0))
    return ranks


def generate(params: GenParams, seed: int) -> Instance:
    """Layered random DAG; a pure function of ``(params, seed)``.

    Draw order is part of the format: candidate edges (u ascending, then v),
    repair edges for isolated tasks, processing times, then (q, r) per edge.
    """
    params.check()
    rng = Pcg64Stream(seed)
    n = params.task_count
    rank = _ranks(n, params.layers)
    pairs = []
    for u in range(n):
        for v in range(u + 1, n):
            if rank[u] < rank[v] and rng.random() < params.edge_probability:
                pairs.append((u, v))
    if max(rank) > 0:
        touched = {j for pair in pairs for j in pair}
        for j in range(n):
            if j in touched:
                continue
            later = [v for v in range(n) if rank[v] > rank[j]]
            if later:
                pairs.append((j, later[rng.integers(0, len(later) - 1)]))
            else:
                earlier = [u for u in range(n) if rank[u] < rank[j]]
                pairs.append((earlier[rng.integers(0, len(earlier) - 1)], j))
            touched.update(pairs[-1])
        pairs.sort()
    p = [rng.integers(*params.p_range) for _ in range(n)]
    edges = []
    for u, v in pairs:
        q = rng.integers(*params.q_range)
        r = rng.integers(*params.r_range)
        edges.append(Edge(u, v, q, r))
    return Instance(JobGraph(tuple(p), tuple(edges)), params.machines, params.channels)


# Hand-made six-task job: one source, two two-task branches with cross
# transfers, one sink.  Weights are invented.
_EXAMPLE_P = (3, 5, 4, 6, 2, 3)
_EXAMPLE_EDGES = (
    Edge(0, 1, 4, 1),
    Edge(0, 3, 3, 1),
    Edge(1, 2, 2, 0),
    Edge(1, 4, 5, 1),
    Edge(3, 2, 3, 1),
    Edge(3, 4, 2, 0),
    Edge(2, 5, 4, 1),
    Edge(4, 5, 3, 1),
)
EXAMPLE_OPTIMUM = 22  # two machines, one channel; certified by solve_bruteforce


def example_instance() -> Instance:
    return Instance(JobGraph(_EXAMPLE_P, _EXAMPLE_EDGES), machines=2, channels=1)


# ---------------------------------------------------------------- file formats

_INSTANCE_KEYS = {"version", "machines", "channels", "t_max", "tasks", "edges"}
_SCHEDULE_KEYS = {"version", "makespan", "tasks", "flows"}


def dumps_instance(instance: Instance) -> str:
    g = instance.graph
    doc: dict[str, Any] = {"version": 1, "machines": instance.machines, "channels": instance.channels}
    if instance.t_max is not None:
        doc["t_max"] = instance.t_max
    doc["tasks"] = [{"id": j, "p": p} for j, p in enumerate(g.tasks)]
    doc["edges"] = [{"u": e.u, "v": e.v, "q": e.q, "r": e.r} for e in g.edges]
    return _dump(doc)


def _dump(doc: dict) -> str:
    # one record per line keeps files diffable and ParseError lines meaningful
    lines = ["{"]
    items = list(doc.items())
    for n, (key, value) in enumerate(items):
        tail = "," if n < len(items) - 1 else ""
        if isinstance(value, list):
            if not value:
                lines.append(f'  "{key}": []{tail}')
                continue
            lines.append(f'  "{key}": [')
            for m, rec in enumerate(value):
                sep = "," if m < len(value) - 1 else ""
                lines.append("    " + json.dumps(rec, separators=(", ", ": ")) + sep)
            lines.append(f"  ]{tail}")
        else:
            lines.append(f'  "{key}": {json.dumps(value)}{tail}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _load_doc(text: str, allowed: set[str], required: set[str]) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, code="BAD_JSON", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", code="BAD_JSON", line=1)
    for key in doc:
        if key not in allowed:
            raise ParseError("unknown field", code="UNKNOWN_FIELD", line=_line_of(text, key), field=key)
    for key in sorted(required):
        if key not in doc:
            raise ParseError("missing field", code="MISSING_FIELD", field=key)
    if doc["version"] != 1:
        raise ParseError(f"unsupported version {doc['version']!r}", code="BAD_VALUE", field="version")
    return doc


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _int(rec: dict, key: str, where: str, allow_str: bool = False) -> int:
    if key not in rec:
        raise ParseError("missing field", code="MISSING_FIELD", field=f"{where}.{key}")
    value = rec[key]
    if isinstance(value, str) and allow_str:
        try:
            value = int(value)
        except ValueError:
            raise ParseError(f"not an integer: {value!r}", code="BAD_VALUE", field=f"{where}.{key}") from None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"not an integer: {value!r}", code="BAD_VALUE", field=f"{where}.{key}")
    return value


def _records(doc: dict, key: str, fields: set[str]) -> list[dict]:
    recs = doc[key]
    if not isinstance(recs, list):
        raise ParseError("must be an array", code="BAD_VALUE", field=key)
    for n, rec in enumerate(recs):
        if not isinstance(rec, dict):
            raise ParseError("must be an object", code="BAD_VALUE", field=f"{key}[{n}]")
        for k in rec:
            if k not in fields:
                raise ParseError("unknown field", code="UNKNOWN_FIELD", field=f"{key}[{n}].{k}")
    return recs


def loads_instance(text: str) -> Instance:
    doc = _load_doc(text, _INSTANCE_KEYS, _INSTANCE_KEYS - {"t_max"})
    machines = _int(doc, "machines", "$")
    channels = _int(doc, "channels", "$")
    t_max = _int(doc, "t_max", "$") if "t_max" in doc else None
    tasks = _records(doc, "tasks", {"id", "p"})
    p = []
    for n, rec in enumerate(tasks):
        if _int(rec, "id", f"tasks[{n}]") != n:
            raise ParseError("task ids must be dense and 0-based", code="BAD_VALUE", field=f"tasks[{n}].id")
        p.append(_int(rec, "p", f"tasks[{n}]", allow_str=True))
    edges = []
    for n, rec in enumerate(_records(doc, "edges", {"u", "v", "q", "r"})):
        w = f"edges[{n}]"
        edges.append(Edge(*(_int(rec, k, w, allow_str=k in "qr") for k in ("u", "v", "q", "r"))))
    instance = Instance(JobGraph(tuple(p), tuple(edges)), machines, channels, t_max)
    report = validate(instance.graph)
    extra = []
    if machines < 1:
        extra.append(("BAD_MACHINES", f"machines={machines}"))
    if channels < 1:
        extra.append(("BAD_CHANNELS", f"channels={channels}"))
    if report.ok and t_max is not None and t_max < single_machine_baseline(instance):
        extra.append(("HORIZON_TOO_SMALL", f"t_max={t_max} below the single-machine baseline"))
    if extra or not report.ok:
        raise ValidationFailed(type(report)(report.violations + extra))
    return instance


def write_instance(instance: Instance, sink: IO[str]) -> None:
    sink.write(dumps_instance(instance))


def read_instance(source: IO[str]) -> Instance:
    return loads_instance(source.read())


def dumps_schedule(instance: Instance, schedule: Schedule) -> str:
    g = instance.graph
    doc = {
        "version": 1,
        "makespan": schedule.makespan,
        "tasks": [{"id": j, "machine": t.machine, "start": t.start} for j, t in enumerate(schedule.task_placements)],
        "flows": [
            {"id": k, "u": e.u, "v": e.v, "channel": "virtual" if f.is_virtual else f.channel, "start": f.start}
            for k, (e, f) in enumerate(zip(g.edges, schedule.flow_placements))
        ],
    }
    return _dump(doc)


def loads_schedule(text: str) -> Schedule:
    doc = _load_doc(text, _SCHEDULE_KEYS, _SCHEDULE_KEYS)
    tasks = []
    for n, rec in enumerate(_records(doc, "tasks", {"id", "machine", "start"})):
        if _int(rec, "id", f"tasks[{n}]") != n:
            raise ParseError("task ids must be dense and 0-based", code="BAD_VALUE", field=f"tasks[{n}].id")
        tasks.append(TaskPlacement(_int(rec, "machine", f"tasks[{n}]"), _int(rec, "start", f"tasks[{n}]")))
    flows = []
    for n, rec in enumerate(_records(doc, "flows", {"id", "u", "v", "channel", "start"})):
        if _int(rec, "id", f"flows[{n}]") != n:
            raise ParseError("flow ids must be dense and 0-based", code="BAD_VALUE", field=f"flows[{n}].id")
        ch = rec.get("channel")
        if ch == "virtual":
            ch = VIRTUAL
        elif not isinstance(ch, int) or isinstance(ch, bool) or ch < 1:
            raise ParseError(f"channel must be 'virtual' or a positive integer, got {ch!r}",
                             code="BAD_VALUE", field=f"flows[{n}].channel")
        flows.append(FlowPlacement(ch, _int(rec, "start", f"flows[{n}]")))
    return Schedule(tuple(tasks), tuple(flows), _int(doc, "makespan", "$"))


def write_schedule(instance: Instance, schedule: Schedule, sink: IO[str]) -> None:
    sink.write(dumps_schedule(instance, schedule))


def read_schedule(source: IO[str]) -> Schedule:
    return loads_schedule(source.read())
