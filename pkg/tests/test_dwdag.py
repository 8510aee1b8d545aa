import itertools

import numpy as np
import pytest
from hypothesis import given

from dwsched.dwdag import (
    Edge,
    JobGraph,
    critical_path_bound,
    descendant_masks,
    equivalent_siblings,
    reachability,
    topo_order,
    validate,
)
from dwsched.errors import CyclicGraph

from conftest import instances


def codes(graph):
    return [c for c, _ in validate(graph).violations]


class TestValidate:
    def test_single_task_ok(self):
        report = validate(JobGraph((5,)))
        assert report.ok and report.violations == []

    def test_two_cycle(self):
        g = JobGraph((1, 1), (Edge(0, 1, 1, 0), Edge(1, 0, 1, 0)))
        assert codes(g) == ["CYCLE"]

    def test_zero_duration(self):
        assert codes(JobGraph((0, 2))) == ["NONPOSITIVE_DURATION"]

    def test_every_problem_reported(self):
        g = JobGraph((0, 1, 2), (Edge(0, 0, 1, 1), Edge(0, 1, -1, 0), Edge(0, 1, 1, 0), Edge(1, 7, 1, 0)))
        found = codes(g)
        for code in ("NONPOSITIVE_DURATION", "SELF_LOOP", "NEGATIVE_WEIGHT", "DUPLICATE_EDGE", "UNKNOWN_TASK"):
            assert code in found

    def test_empty_and_non_integer(self):
        assert codes(JobGraph(())) == ["EMPTY"]
        assert codes(JobGraph((1.5,))) == ["NON_INTEGER"]
        assert "NON_INTEGER" in codes(JobGraph((1, 1), (Edge(0, 1, 2.0, 0),)))

    def test_zero_weights_allowed(self):
        assert validate(JobGraph((1, 1), (Edge(0, 1, 0, 0),))).ok


class TestTopoOrder:
    def test_chain(self):
        g = JobGraph((1, 1, 1), (Edge(0, 1, 0, 0), Edge(1, 2, 0, 0)))
        assert topo_order(g) == [0, 1, 2]

    def test_fork_ties_by_id(self):
        g = JobGraph((1, 1, 1), (Edge(0, 1, 0, 0), Edge(0, 2, 0, 0)))
        assert topo_order(g) == [0, 1, 2]

    def test_smallest_ready_id_first(self):
        g = JobGraph((1, 1, 1, 1), (Edge(3, 0, 0, 0), Edge(2, 1, 0, 0)))
        assert topo_order(g) == [2, 1, 3, 0]

    def test_cycle_raises(self):
        with pytest.raises(CyclicGraph):
            topo_order(JobGraph((1, 1), (Edge(0, 1, 0, 0), Edge(1, 0, 0, 0))))

    @given(instances(max_tasks=7))
    def test_permutation_respecting_edges(self, inst):
        order = topo_order(inst.graph)
        assert sorted(order) == list(range(inst.graph.n_tasks))
        pos = {j: n for n, j in enumerate(order)}
        assert all(pos[e.u] < pos[e.v] for e in inst.graph.edges)


class TestCriticalPath:
    def test_single(self):
        assert critical_path_bound(JobGraph((7,))) == 7

    def test_chain_uses_min_weight(self):
        assert critical_path_bound(JobGraph((2, 3), (Edge(0, 1, 4, 1),))) == 6

    def test_fork_join(self):
        edges = (Edge(0, 1, 2, 0), Edge(0, 2, 2, 0), Edge(1, 3, 2, 0), Edge(2, 3, 2, 0))
        assert critical_path_bound(JobGraph((1, 4, 4, 1), edges)) == 6

    def test_cycle_raises(self):
        with pytest.raises(CyclicGraph):
            critical_path_bound(JobGraph((1, 1), (Edge(0, 1, 0, 0), Edge(1, 0, 0, 0))))


class TestReachability:
    def test_chain_transitive(self):
        m = reachability(JobGraph((1, 1, 1), (Edge(0, 1, 0, 0), Edge(1, 2, 0, 0))))
        assert m[0, 2] and m[0, 1] and m[1, 2] and not m[2, 0]

    def test_isolated(self):
        assert not reachability(JobGraph((1, 1))).any()

    def test_siblings_unrelated(self):
        m = reachability(JobGraph((1, 1, 1), (Edge(0, 1, 0, 0), Edge(0, 2, 0, 0))))
        assert not m[1, 2] and not m[2, 1]

    @given(instances(max_tasks=7))
    def test_transitive_irreflexive(self, inst):
        m = reachability(inst.graph)
        n = inst.graph.n_tasks
        assert not np.diag(m).any()
        for a, b, c in itertools.product(range(n), repeat=3):
            if m[a, b] and m[b, c]:
                assert m[a, c]

    @given(instances(max_tasks=7))
    def test_masks_agree(self, inst):
        m = reachability(inst.graph)
        masks = descendant_masks(inst.graph)
        for u in range(inst.graph.n_tasks):
            assert [bool(masks[u] >> v & 1) for v in range(inst.graph.n_tasks)] == list(m[u])


class TestEquivalentSiblings:
    def test_symmetric_fork(self):
        g = JobGraph((1, 4, 4), (Edge(0, 1, 2, 0), Edge(0, 2, 2, 0)))
        assert equivalent_siblings(g) == [[1, 2]]

    def test_broken_by_duration(self):
        g = JobGraph((1, 4, 5), (Edge(0, 1, 2, 0), Edge(0, 2, 2, 0)))
        assert equivalent_siblings(g) == []

    def test_broken_by_weight(self):
        g = JobGraph((1, 4, 4), (Edge(0, 1, 2, 0), Edge(0, 2, 3, 0)))
        assert equivalent_siblings(g) == []

    def test_six_task_two_branches(self):
        # 0 -> 1 -> {2, 3} -> 4 -> 5; the middle branches are interchangeable
        edges = (Edge(0, 1, 2, 0), Edge(1, 2, 3, 1), Edge(1, 3, 3, 1), Edge(2, 4, 1, 0),
                 Edge(3, 4, 1, 0), Edge(4, 5, 2, 0))
        assert equivalent_siblings(JobGraph((2, 3, 5, 5, 4, 1), edges)) == [[2, 3]]

    @given(instances(max_tasks=6))
    def test_matches_pairwise_definition(self, inst):
        g = inst.graph

        def sig(j):
            pre = sorted((g.edges[k].u, g.edges[k].q, g.edges[k].r) for k in g.in_edges[j])
            suc = sorted((g.edges[k].v, g.edges[k].q, g.edges[k].r) for k in g.out_edges[j])
            return g.tasks[j], pre, suc

        classes = equivalent_siblings(g)
        same = {frozenset(p) for c in classes for p in itertools.combinations(c, 2)}
        for a, b in itertools.combinations(range(g.n_tasks), 2):
            assert (frozenset((a, b)) in same) == (sig(a) == sig(b))
