import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggnash import (
    ConfigError,
    ContractError,
    SwitchingSchedule,
    WeightedDigraph,
    graph_at,
    is_connected,
    is_weight_balanced,
    laplacian,
    union_graph,
    verify_assumption4,
)
from aggnash.network import complete, named_graph, ring, split_ring, star


def test_laplacian_symmetric_pair():
    g = WeightedDigraph([[0, 1], [1, 0]])
    np.testing.assert_array_equal(laplacian(g), [[1, -1], [-1, 1]])


def test_laplacian_directed_ring():
    L = laplacian(ring(3))
    np.testing.assert_array_equal(np.diag(L), [1, 1, 1])
    assert np.all((L == -1).sum(axis=1) == 1)
    np.testing.assert_array_equal(L.sum(axis=1), 0)


def test_laplacian_edgeless():
    np.testing.assert_array_equal(laplacian(WeightedDigraph(np.zeros((4, 4)))), 0)


def test_digraph_rejects_self_loops_and_negative_weights():
    with pytest.raises(ContractError):
        WeightedDigraph([[1, 0], [0, 0]])
    with pytest.raises(ContractError):
        WeightedDigraph([[0, -1], [0, 0]])


def test_weight_balance_examples():
    assert is_weight_balanced(ring(5))
    assert not is_weight_balanced(WeightedDigraph([[0, 0], [1, 0]]))
    W = np.random.default_rng(0).uniform(0, 1, (5, 5))
    W = W + W.T
    np.fill_diagonal(W, 0)
    assert is_weight_balanced(WeightedDigraph(W))


def test_connectivity_examples():
    assert is_connected(star(5))
    assert not is_connected(WeightedDigraph([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]))
    chain = WeightedDigraph([[0, 0, 0], [1, 0, 0], [0, 1, 0]])  # 1 -> 2 -> 3
    assert is_connected(chain)
    # 1 -> 3 <- 2: no node reaches both others
    assert not is_connected(WeightedDigraph([[0, 0, 0], [0, 0, 0], [1, 1, 0]]))


def random_digraph(seed, N, p=0.4):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.1, 2, (N, N)) * (rng.uniform(size=(N, N)) < p)
    np.fill_diagonal(W, 0)
    return WeightedDigraph(W)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9))
def test_laplacian_row_sums_zero(seed, N):
    assert np.abs(laplacian(random_digraph(seed, N)).sum(axis=1)).max() <= 1e-14


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9), st.booleans())
def test_balance_agrees_with_column_sums(seed, N, symmetrize):
    g = random_digraph(seed, N)
    if symmetrize:
        g = WeightedDigraph(g.weights + g.weights.T)
    col = np.abs(laplacian(g).sum(axis=0)).max() <= 1e-12
    assert is_weight_balanced(g, 1e-12) == col
    if is_weight_balanced(g, 1e-13):
        assert np.linalg.norm(np.ones(N) @ laplacian(g)) <= 1e-12


def test_split_ring_halves():
    for N in (4, 5, 6, 7):
        h0, h1 = split_ring(N, 0), split_ring(N, 1)
        assert is_weight_balanced(h0) and is_weight_balanced(h1)
        assert not is_connected(h0) and not is_connected(h1)
        full = np.maximum(h0.weights, h1.weights)
        ring_sym = ring(N).weights + ring(N).weights.T
        np.testing.assert_array_equal(full, ring_sym)


def alternating(horizon=10.0, tau=1.0, periodic=True):
    return SwitchingSchedule.from_pattern([split_ring(6, 0), split_ring(6, 1)], [0, 1], tau, horizon, periodic)


def test_graph_at_right_open_and_periodic():
    sch = alternating()
    assert graph_at(sch, 0.0) == 0
    assert graph_at(sch, 0.999) == 0
    assert graph_at(sch, 1.0) == 1
    assert graph_at(sch, 2.0 + 0.5) == graph_at(sch, 0.5)
    with pytest.raises(ContractError):
        graph_at(sch, 11.0)


def test_schedule_dwell_time_enforced():
    with pytest.raises(ConfigError):
        SwitchingSchedule([ring(3)], [0.0, 1.0, 1.2], [0, 0], tau=0.5, horizon=1.2)
    with pytest.raises(ConfigError):
        SwitchingSchedule([ring(3)], [0.0, 1.0], [0], tau=0.5, horizon=2.0)


def test_union_graph_cases():
    sch = alternating()
    np.testing.assert_array_equal(union_graph(sch, 0.1, 0.5).weights, split_ring(6, 0).weights)
    full = union_graph(sch, 0.0, 2.0)
    np.testing.assert_array_equal(full.weights, ring(6).weights + ring(6).weights.T)
    with pytest.raises(ContractError):
        union_graph(sch, 0.0, 0.0)


def test_union_over_period_is_shift_invariant():
    sch = SwitchingSchedule.from_pattern([split_ring(6, 0), split_ring(6, 1), complete(6)], [0, 1, 0, 2],
                                         [1.0, 0.5, 2.0, 1.0], horizon=50.0)
    P = sch.period
    ref = union_graph(sch, 0.0, P).weights
    for t in sch.switching_instants(20.0):
        np.testing.assert_array_equal(union_graph(sch, t, P).weights, ref)


def test_verify_assumption4_single_graph():
    sch = SwitchingSchedule.from_pattern([ring(5)], [0], 1.0, 10.0)
    rep = verify_assumption4(sch, 3.0)
    assert rep.all_balanced and rep.jointly_connected
    assert rep.smallest_T == 1.0


def test_verify_assumption4_split_ring():
    rep = verify_assumption4(alternating(), 2.0)
    assert rep.instant_connected == [False, False]
    assert rep.jointly_connected and rep.all_balanced
    assert rep.smallest_T == 2.0
    assert not verify_assumption4(alternating(), 1.0).jointly_connected


def test_verify_assumption4_unbalanced_and_disjoint():
    single = WeightedDigraph([[0, 0], [1, 0]])
    rep = verify_assumption4(SwitchingSchedule.from_pattern([single], [0], 1.0, 5.0), 1.0)
    assert rep.balanced == [False]
    disjoint = WeightedDigraph([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    rep = verify_assumption4(SwitchingSchedule.from_pattern([disjoint], [0], 1.0, 5.0), 3.0)
    assert not rep.jointly_connected and rep.smallest_T is None


def test_aperiodic_schedule_reports_verified_range():
    halves = [split_ring(6, 0), split_ring(6, 1)]
    sch = SwitchingSchedule(halves, np.arange(7.0), [0, 1, 0, 1, 0, 1], 1.0, 6.0, periodic=False)
    rep = verify_assumption4(sch, 2.0)
    assert rep.verified_until == 4.0  # window [4, 6) is the last inside the horizon
    assert rep.jointly_connected
    stuck = SwitchingSchedule(halves, np.arange(7.0), [0, 1, 0, 1, 0, 0], 1.0, 6.0, periodic=False)
    assert not verify_assumption4(stuck, 2.0).jointly_connected


def test_named_graphs():
    assert named_graph("split-ring(1)", 6).name == "split-ring(1)"
    with pytest.raises(ConfigError):
        named_graph("petersen", 10)
