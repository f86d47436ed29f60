import numpy as np
import pytest

from pfrd.graph import Hypergraph, SparseGraph
from pfrd.projection import in_capped_simplex
from pfrd.replicator import (
    IterationConfig,
    PathSchedule,
    StateVector,
    evolve_fixed_epsilon,
    iter_pfrd,
    kkt_report,
    make_schedule,
    merge_schedules,
    min_support,
    reciprocal_schedule,
    run_drd,
    run_pfrd,
    step,
    verify_fixed_point,
)
from pfrd.synth import degree_bias_graph

from conftest import random_graph


def test_step_examples(k3, path3):
    u = StateVector.uniform(3)
    np.testing.assert_allclose(step(k3, u).x, u.x)
    np.testing.assert_allclose(step(path3, u).x, [0.25, 0.5, 0.25])
    fixed = StateVector(np.array([0.25, 0.5, 0.25]), 1.0)
    np.testing.assert_allclose(step(path3, fixed).x, fixed.x)


def test_step_rejects_infeasible_state(k3):
    with pytest.raises(ValueError):
        step(k3, StateVector(np.array([0.6, 0.2, 0.2]), 0.5))


def test_evolve_path_graph(path3):
    x, iters, ok = evolve_fixed_epsilon(path3, StateVector.uniform(3))
    assert ok
    np.testing.assert_allclose(x.x, [0.25, 0.5, 0.25], atol=1e-4)


def test_evolve_k4_pendant(k4_pendant):
    x, _, ok = evolve_fixed_epsilon(k4_pendant, StateVector.uniform(5), IterationConfig(delta2=1e-10))
    assert ok
    assert x.x[4] < 1e-6
    assert float(x.x @ k4_pendant.gradient(x.x)) == pytest.approx(0.75, abs=1e-6)


def test_singleton_capped_simplex(k4_pendant):
    x, iters, ok = evolve_fixed_epsilon(k4_pendant, StateVector.uniform(5, 0.2))
    assert ok and iters == 1
    np.testing.assert_allclose(x.x, 0.2)


def test_schedule_one_is_drd(k4_pendant):
    path = run_pfrd(k4_pendant, PathSchedule((1.0,)))
    state, iters, ok = run_drd(k4_pendant)
    np.testing.assert_array_equal(path.final.x, state.x)
    assert path.final.iterations == iters


def test_run_drd_examples(k3):
    state, _, _ = run_drd(k3)
    np.testing.assert_allclose(state.x, 1 / 3)
    two_edges = SparseGraph.from_edges(4, [0, 2], [1, 3])
    state, _, _ = run_drd(two_edges)
    np.testing.assert_allclose(state.x, 0.25)
    # uniform over both edges: each edge carries half the mass, f = 1/4
    assert float(state.x @ two_edges.gradient(state.x)) == pytest.approx(0.25)


def test_planted_k4_dense_schedule():
    # K4 on 0..3 with pendant noise hanging off it
    u = [0, 0, 0, 1, 1, 2, 0, 1, 2, 3, 4, 6]
    v = [1, 2, 3, 2, 3, 3, 4, 5, 6, 7, 8, 9]
    g = SparseGraph.from_edges(10, u, v)
    path = run_pfrd(g, reciprocal_schedule(10, 2, 1, append_one=True), IterationConfig(delta2=1e-8))
    assert list(np.flatnonzero(path.final.x > 1e-3)) == [0, 1, 2, 3]


def test_degree_bias_instance():
    g, clique4, triangle = degree_bias_graph()
    drd, _, _ = run_drd(g)
    assert tuple(np.flatnonzero(drd.x > 1 / 15)) == triangle
    pfrd = run_pfrd(g, reciprocal_schedule(15, 2, 1, append_one=True), IterationConfig(delta2=1e-8))
    assert tuple(np.flatnonzero(pfrd.final.x > 1 / 15)) == clique4


def test_iterates_feasible_and_zero_locked():
    rng = np.random.default_rng(5)
    g = random_graph(rng, 15, 0.3, weighted=True)
    if np.any(g.degrees() == 0):
        pytest.skip("isolated vertex")
    for eps in (1 / 12, 0.25, 1.0):
        s = StateVector.uniform(15, max(eps, 1 / 15))
        zeros = np.zeros(15, dtype=bool)
        for _ in range(200):
            s = step(g, s)
            assert in_capped_simplex(s.x, s.epsilon)
            assert s.support_size >= min_support(s.epsilon)
            assert not np.any(s.x[zeros] > 0)
            zeros |= s.x == 0


def test_pruning_matches_unpruned_support():
    rng = np.random.default_rng(8)
    g = random_graph(rng, 60, 0.15)
    sched = reciprocal_schedule(60, 5, 5, append_one=True)
    a = run_pfrd(g, sched, IterationConfig(delta2=1e-8))
    b = run_pfrd(g, sched, IterationConfig(delta2=1e-8, prune=True))
    assert set(np.flatnonzero(a.final.x > 1e-6)) == set(np.flatnonzero(b.final.x > 1e-6))


def test_iter_pfrd_streams(k4_pendant):
    it = iter_pfrd(k4_pendant, reciprocal_schedule(5, 1, 1))
    first = next(it)
    assert first.epsilon == pytest.approx(0.2)
    assert len(list(it)) == 4


def test_traces_recorded(path3):
    traces = []
    run_pfrd(path3, PathSchedule((0.5, 1.0)), traces=traces)
    assert len(traces) == 2 and all(len(t) >= 2 for t in traces)


def test_verify_fixed_point_examples(k3, path3):
    assert verify_fixed_point(path3, [0.25, 0.5, 0.25], 1.0)
    assert not verify_fixed_point(path3, np.full(3, 1 / 3), 1.0)
    for eps in (1 / 3, 0.5, 1.0):
        assert verify_fixed_point(k3, np.full(3, 1 / 3), eps)


def test_verify_fixed_point_undefined_step():
    g = SparseGraph.from_edges(3, [0], [1])
    assert not verify_fixed_point(g, np.full(3, 1 / 3), 1 / 3)


def test_kkt_report_examples(k3, path3, k4_pendant):
    r = kkt_report(path3, [0.25, 0.5, 0.25], 1.0)
    assert r.lam == pytest.approx(0.5) and r.interior_deviation == pytest.approx(0, abs=1e-15)
    assert r.n_capped == 0 and r.n_zero == 0 and r.cap_slack is None
    r = kkt_report(k3, np.full(3, 1 / 3), 1.0)
    assert r.lam == pytest.approx(2 / 3) and r.is_kkt(1e-12)
    state, _, _ = run_drd(k4_pendant)
    # the pendant component is still decaying; count it as zero
    r = kkt_report(k4_pendant, state.x, 1.0, zero_tol=1e-6)
    assert r.n_zero == 1 and r.interior_deviation <= 1e-3


def test_schedule_builders():
    phi3 = make_schedule("reciprocal", k_start=990, k_end=10, step=10, append_one=True)
    assert len(phi3) == 100 and phi3.samples[0] == 1 / 990 and phi3.samples[-1] == 1.0
    phi1 = make_schedule("reciprocal", k_start=900, k_end=100, step=100, append_one=True)
    assert len(phi1) == 10
    assert make_schedule("explicit", values=[1.0]).samples == (1.0,)
    assert make_schedule("target", k=4).samples == (0.25,)
    assert reciprocal_schedule(10, 3, 4).samples == (0.1, 1 / 6, 1 / 3)
    assert merge_schedules([0.5, 1.0], [0.25, 0.5]).samples == (0.25, 0.5, 1.0)


@pytest.mark.parametrize("bad", [(), (0.5, 0.5), (0.0, 1.0), (0.5, 1.5)])
def test_schedule_validation(bad):
    with pytest.raises(ValueError):
        PathSchedule(bad)


def test_schedule_below_one_over_n(k3):
    with pytest.raises(ValueError):
        run_pfrd(k3, PathSchedule((0.25, 1.0)))


def test_hypergraph_field_runs():
    h = Hypergraph(5, [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3], [2, 3, 4]])
    path = run_pfrd(h, reciprocal_schedule(5, 1, 1))
    assert path.final.x[4] < 1e-3
    assert in_capped_simplex(path.final.x, 1.0)
