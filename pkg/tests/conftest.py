import random
import sys

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from dwsched.dwdag import Edge, Instance, JobGraph

# reproducible property runs; the example database is not needed
settings.register_profile("repro", derandomize=True, database=None, deadline=None)
settings.load_profile("repro")


def chain(machines=2, channels=1, q=4, r=1):
    return Instance(JobGraph((2, 3), (Edge(0, 1, q, r),)), machines, channels)


def fork(p=(1, 4, 4), q=2, r=0, machines=2):
    return Instance(JobGraph(p, (Edge(0, 1, q, r), Edge(0, 2, q, r))), machines, 1)


def fork_join(machines=2, q=2, r=0):
    edges = (Edge(0, 1, q, r), Edge(0, 2, q, r), Edge(1, 3, q, r), Edge(2, 3, q, r))
    return Instance(JobGraph((1, 4, 4, 1), edges), machines, 1)


def tiny_instance(rng: random.Random, tasks=(3, 5), max_edges=5, machines=(1, 2), channels=(1, 1),
                  p=(1, 10), q=(0, 6), r=(0, 1)) -> Instance:
    """Random small DAG; edges only go from lower to higher ids."""
    n = rng.randint(*tasks)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    k = rng.randint(0, min(max_edges, len(pairs)))
    edges = tuple(Edge(u, v, rng.randint(*q), rng.randint(*r)) for u, v in sorted(pairs[:k]))
    ptimes = tuple(rng.randint(*p) for _ in range(n))
    return Instance(JobGraph(ptimes, edges), rng.randint(*machines), rng.randint(*channels))


@st.composite
def instances(draw, max_tasks=5, max_machines=2, max_channels=2, max_p=8, max_w=6):
    n = draw(st.integers(1, max_tasks))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=6)) if pairs else []
    edges = tuple(
        Edge(u, v, draw(st.integers(0, max_w)), draw(st.integers(0, 2))) for u, v in sorted(chosen)
    )
    ptimes = tuple(draw(st.integers(1, max_p)) for _ in range(n))
    return Instance(
        JobGraph(ptimes, edges), draw(st.integers(1, max_machines)), draw(st.integers(1, max_channels))
    )


@pytest.fixture
def chain_instance():
    return chain()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[key]
        terminalreporter.write_line(f"criterion {key} ({mod.NAMES[key]}): {'PASS' if ok else 'FAIL'} - {detail}")
