import io
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsched.dwdag import Edge, Instance, JobGraph, validate
from dwsched.errors import InvalidParams, ParseError, ValidationFailed
from dwsched.instgen import (
    EXAMPLE_OPTIMUM,
    GenParams,
    Pcg64Stream,
    _ranks,
    dumps_instance,
    dumps_schedule,
    example_instance,
    generate,
    loads_instance,
    loads_schedule,
    read_instance,
    write_instance,
)
from dwsched.solver import solve_bruteforce

from conftest import instances

GOLDEN = Path(__file__).parent / "data" / "golden_n10_seed2024.json"
PCG_MULT = 0x2360ED051FC65DA44385DF649FCCF645
M128 = (1 << 128) - 1


def pcg_xsl_rr(state, inc, n):
    """Reference PCG XSL-RR 128/64: advance the LCG, then fold and rotate."""
    out = []
    for _ in range(n):
        state = (state * PCG_MULT + inc) & M128
        x = ((state >> 64) ^ state) & ((1 << 64) - 1)
        rot = state >> 122
        out.append(((x >> rot) | (x << (64 - rot))) & ((1 << 64) - 1))
    return out


class TestStream:
    def test_matches_reference_algorithm(self):
        st_ = np.random.PCG64(7).state["state"]
        stream = Pcg64Stream(7)
        assert [stream.next_u64() for _ in range(20)] == pcg_xsl_rr(st_["state"], st_["inc"], 20)

    def test_integer_range(self):
        stream = Pcg64Stream(1)
        draws = [stream.integers(3, 5) for _ in range(300)]
        assert set(draws) == {3, 4, 5}
        with pytest.raises(ValueError):
            stream.integers(2, 1)

    def test_float_range(self):
        stream = Pcg64Stream(2)
        xs = [stream.random() for _ in range(500)]
        assert all(0.0 <= x < 1.0 for x in xs)
        assert 0.4 < sum(xs) / len(xs) < 0.6


class TestGenerate:
    def test_single_task(self):
        inst = generate(GenParams(task_count=1), 0)
        assert inst.graph.tasks and inst.graph.n_tasks == 1 and inst.graph.edges == ()

    def test_independent(self):
        inst = generate(GenParams(task_count=6, edge_probability=0.0, layers=1), 0)
        assert inst.graph.edges == ()

    def test_golden(self):
        assert dumps_instance(generate(GenParams(), 2024)) == GOLDEN.read_text()

    def test_benchmark_defaults(self):
        p = GenParams()
        assert p.p_range == (1, 100) and p.q_range == (1, 50) and p.r_range == (0, 0)
        assert p.task_count == 10 and p.channels == 1

    def test_invalid(self):
        for bad in (GenParams(task_count=0), GenParams(edge_probability=1.5), GenParams(p_range=(0, 3)),
                    GenParams(q_range=(5, 1)), GenParams(machines=0)):
            with pytest.raises(InvalidParams):
                generate(bad, 0)

    def test_ranks_even(self):
        assert _ranks(10, 3) == [0] * 4 + [1] * 3 + [2] * 3
        assert _ranks(2, 3) == [0, 1]

    @settings(max_examples=60)
    @given(st.integers(1, 14), st.integers(1, 4), st.floats(0, 1), st.integers(0, 2**64 - 1))
    def test_valid_layered_connected(self, n, layers, prob, seed):
        params = GenParams(task_count=n, layers=layers, edge_probability=prob, r_range=(0, 3))
        inst = generate(params, seed)
        assert validate(inst.graph).ok
        rank = _ranks(n, layers)
        assert all(rank[e.u] < rank[e.v] for e in inst.graph.edges)
        if max(rank) > 0:
            touched = {j for e in inst.graph.edges for j in (e.u, e.v)}
            assert touched == set(range(n))
        for e in inst.graph.edges:
            assert 1 <= e.q <= 50 and 0 <= e.r <= 3
        assert inst == generate(params, seed)


class TestExample:
    def test_shape(self):
        inst = example_instance()
        assert inst.graph.n_tasks == 6 and inst.graph.n_edges == 8

    def test_optimum(self):
        assert solve_bruteforce(example_instance()).makespan == EXAMPLE_OPTIMUM


class TestFiles:
    def test_round_trip_example(self):
        buf = io.StringIO()
        write_instance(example_instance(), buf)
        buf.seek(0)
        assert read_instance(buf) == example_instance()

    def test_t_max_kept(self):
        inst = Instance(JobGraph((2, 3), (Edge(0, 1, 4, 1),)), 2, 1, t_max=20)
        assert loads_instance(dumps_instance(inst)) == inst

    def _doc(self, **changes):
        doc = json.loads(dumps_instance(example_instance()))
        doc.update(changes)
        return doc

    def test_negative_string_weight(self):
        doc = self._doc()
        doc["edges"][0]["q"] = "-3"
        with pytest.raises(ValidationFailed) as info:
            loads_instance(json.dumps(doc))
        assert "NEGATIVE_WEIGHT" in [c for c, _ in info.value.report.violations]

    def test_missing_machines(self):
        doc = self._doc()
        del doc["machines"]
        with pytest.raises(ParseError) as info:
            loads_instance(json.dumps(doc))
        assert info.value.code == "MISSING_FIELD" and info.value.field == "machines"

    def test_unknown_field_line(self):
        text = dumps_instance(example_instance()).replace('"channels": 1,', '"channels": 1,\n  "colour": 3,')
        with pytest.raises(ParseError) as info:
            loads_instance(text)
        assert info.value.code == "UNKNOWN_FIELD" and info.value.line == 5

    def test_bad_json(self):
        with pytest.raises(ParseError) as info:
            loads_instance('{"version": 1,\n  "machines": }')
        assert info.value.code == "BAD_JSON" and info.value.line == 2

    def test_sparse_ids(self):
        doc = self._doc()
        doc["tasks"][1]["id"] = 7
        with pytest.raises(ParseError):
            loads_instance(json.dumps(doc))

    def test_cycle_and_horizon(self):
        doc = self._doc()
        doc["edges"].append({"u": 5, "v": 0, "q": 1, "r": 0})
        with pytest.raises(ValidationFailed):
            loads_instance(json.dumps(doc))
        with pytest.raises(ValidationFailed):
            loads_instance(json.dumps(self._doc(t_max=3)))
        with pytest.raises(ValidationFailed):
            loads_instance(json.dumps(self._doc(machines=0)))

    @given(instances(max_tasks=8, max_machines=4, max_channels=3))
    def test_round_trip_random(self, inst):
        assert loads_instance(dumps_instance(inst)) == inst

    def test_schedule_round_trip(self):
        inst = example_instance()
        s = solve_bruteforce(inst)
        text = dumps_schedule(inst, s)
        assert loads_schedule(text) == s
        assert '"channel": "virtual"' in text

    def test_schedule_bad_channel(self):
        inst = example_instance()
        doc = json.loads(dumps_schedule(inst, solve_bruteforce(inst)))
        doc["flows"][0]["channel"] = "fast"
        with pytest.raises(ParseError):
            loads_schedule(json.dumps(doc))
