import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netassim.core import HyperParams, derive_stream, gen_topology_fixed_indegree, topology_from_lists
from netassim.sis import (
    H_GAMMA,
    H_LAMBDA,
    SisParams,
    SisSimulator,
    SisState,
    infection_prob,
    sis_init,
    sis_observe,
    sis_sample_params,
    sis_step,
)

TRUTH = HyperParams.from_dict({H_GAMMA: 0.0015, H_LAMBDA: 0.0025})


def next_state_probs(xi, params, topo):
    """Brute-force oracle: exact per-node transition marginals (nodes are
    conditionally independent given the current state)."""
    n = len(xi)
    p_one = np.empty(n)
    for i in range(n):
        if xi[i] == 0:
            acc = 1.0
            for src, _, _ in topo.in_neighbors(i):
                acc *= 1.0 - params.gamma[i] * xi[src]
            p_one[i] = 1.0 - acc
        else:
            p_one[i] = 1.0 - params.lam[i]
    return p_one


class TestInit:
    def test_degenerate(self):
        assert sis_observe(sis_init(100, 0.0, derive_stream(1, [1]))) == 0.0
        assert sis_observe(sis_init(100, 1.0, derive_stream(1, [1]))) == 1.0

    def test_binomial_band(self):
        n = 100_000
        st_ = sis_init(n, 0.3, derive_stream(1, [2]))
        assert abs(sis_observe(st_) - 0.3) < 3 * np.sqrt(0.3 * 0.7 / n)

    def test_domain(self):
        with pytest.raises(ValueError):
            sis_init(10, -0.1, derive_stream(1, [3]))
        with pytest.raises(ValueError):
            sis_init(10, 1.1, derive_stream(1, [3]))


class TestParams:
    def test_mean_bands(self):
        n = 1_000_000
        p = sis_sample_params(n, TRUTH, derive_stream(2, [1]))
        assert abs(p.gamma.mean() - 0.0015) < 3 * 0.0015 / np.sqrt(n)
        assert abs(p.lam.mean() - 0.0025) < 3 * 0.0025 / np.sqrt(n)
        assert p.gamma.min() >= 0.0 and p.gamma.max() <= 1.0
        assert p.lam.min() >= 0.0 and p.lam.max() <= 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            sis_sample_params(10, HyperParams.from_dict({H_GAMMA: 0.0, H_LAMBDA: 1.0}),
                              derive_stream(2, [2]))


class TestInfectionProb:
    def setup_method(self):
        self.topo = topology_from_lists(3, [[1, 2], [0], [0, 1]])

    def test_all_susceptible(self):
        st_ = SisState(np.zeros(3, dtype=np.uint8))
        p = SisParams(np.full(3, 0.7), np.zeros(3))
        assert infection_prob(0, st_, p, self.topo) == 0.0

    def test_zero_gamma(self):
        st_ = SisState(np.ones(3, dtype=np.uint8))
        p = SisParams(np.zeros(3), np.zeros(3))
        assert infection_prob(0, st_, p, self.topo) == 0.0

    def test_two_infected_neighbors(self):
        st_ = SisState(np.array([0, 1, 1], dtype=np.uint8))
        p = SisParams(np.full(3, 0.5), np.zeros(3))
        assert infection_prob(0, st_, p, self.topo) == pytest.approx(0.75)


class TestStep:
    def test_zero_rates_frozen(self):
        topo = gen_topology_fixed_indegree(50, 3, derive_stream(3, [1]))
        st_ = sis_init(50, 0.4, derive_stream(3, [2]))
        p = SisParams(np.zeros(50), np.zeros(50))
        nxt = sis_step(st_, p, topo, derive_stream(3, [3]))
        assert np.array_equal(nxt.xi, st_.xi)
        assert nxt.t == st_.t + 1

    def test_certain_recovery(self):
        topo = gen_topology_fixed_indegree(50, 3, derive_stream(3, [4]))
        st_ = SisState(np.ones(50, dtype=np.uint8))
        p = SisParams(np.zeros(50), np.ones(50))
        nxt = sis_step(st_, p, topo, derive_stream(3, [5]))
        assert nxt.xi.sum() == 0

    def test_three_node_cycle_distribution(self):
        # in-neighbors: 0<-2, 1<-0, 2<-1; start (1,0,0), gamma=0.5, lambda=0
        topo = topology_from_lists(3, [[2], [0], [1]])
        p = SisParams(np.full(3, 0.5), np.zeros(3))
        gen = derive_stream(3, [6]).generator()
        counts = {}
        N = 100_000
        for _ in range(N):
            nxt = sis_step(SisState(np.array([1, 0, 0], dtype=np.uint8)), p, topo, gen)
            key = tuple(int(v) for v in nxt.xi)
            counts[key] = counts.get(key, 0) + 1
        # exact enumeration: node 1 infected w.p. 0.5, others unchanged
        assert set(counts) == {(1, 0, 0), (1, 1, 0)}
        assert abs(counts[(1, 1, 0)] / N - 0.5) < 0.01

    def test_one_step_matches_enumeration_small(self):
        # exact per-node marginals vs Monte Carlo on a 4-node graph
        topo = topology_from_lists(4, [[1, 2], [0, 3], [0], [1, 2]])
        gen_p = derive_stream(3, [7]).generator()
        p = SisParams(gen_p.random(4), gen_p.random(4))
        xi0 = np.array([1, 0, 1, 0], dtype=np.uint8)
        p_one = next_state_probs(xi0, p, topo)
        gen = derive_stream(3, [8]).generator()
        N = 100_000
        hits = np.zeros(4)
        for _ in range(N):
            hits += sis_step(SisState(xi0.copy()), p, topo, gen).xi
        freq = hits / N
        band = 4 * np.sqrt(np.maximum(p_one * (1 - p_one), 1e-9) / N)
        assert np.all(np.abs(freq - p_one) <= band + 1e-12)

    def test_determinism(self):
        topo = gen_topology_fixed_indegree(100, 5, derive_stream(4, [1]))
        p = sis_sample_params(100, HyperParams.from_dict({H_GAMMA: 0.3, H_LAMBDA: 0.2}),
                              derive_stream(4, [2]))
        runs = []
        for _ in range(2):
            st_ = sis_init(100, 0.2, derive_stream(4, [3]))
            gen = derive_stream(4, [4]).generator()
            traj = []
            for _ in range(30):
                st_ = sis_step(st_, p, topo, gen)
                traj.append(st_.xi.copy())
            runs.append(np.stack(traj))
        assert np.array_equal(runs[0], runs[1])


class TestTrajectoryInvariants:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(3, 25), st.integers(0, 5000))
    def test_monotone_and_binary(self, n, seed):
        d = min(3, n - 1)
        topo = gen_topology_fixed_indegree(n, d, derive_stream(seed, [1]))
        gen = derive_stream(seed, [2]).generator()

        # lambda == 0: infected set nondecreasing
        p = SisParams(gamma=np.full(n, 0.4), lam=np.zeros(n))
        st_ = sis_init(n, 0.3, derive_stream(seed, [3]))
        prev = st_.xi.copy()
        for _ in range(10):
            st_ = sis_step(st_, p, topo, gen)
            assert set(np.unique(st_.xi)).issubset({0, 1})
            assert np.all(st_.xi >= prev)
            prev = st_.xi.copy()

        # gamma == 0: infected set nonincreasing
        p = SisParams(gamma=np.zeros(n), lam=np.full(n, 0.3))
        st_ = sis_init(n, 0.7, derive_stream(seed, [4]))
        prev = st_.xi.copy()
        for _ in range(10):
            st_ = sis_step(st_, p, topo, gen)
            assert np.all(st_.xi <= prev)
            prev = st_.xi.copy()


class TestObserve:
    def test_values(self):
        assert sis_observe(SisState(np.array([1, 1, 1, 0], dtype=np.uint8))) == 0.75

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            sis_observe(SisState(np.empty(0, dtype=np.uint8)))


class TestSimulator:
    def test_build_and_advance_deterministic(self):
        a = SisSimulator.build(200, TRUTH, 0.1, 10, derive_stream(5, [1]))
        b = SisSimulator.build(200, TRUTH, 0.1, 10, derive_stream(5, [1]))
        for _ in range(20):
            a.advance()
            b.advance()
        assert np.array_equal(a.state.xi, b.state.xi)

    def test_rescale_is_multiplicative(self):
        sim = SisSimulator.build(500, TRUTH, 0.1, 10, derive_stream(5, [2]))
        g0 = sim.params.gamma.copy()
        sim.rescale(HyperParams.single(H_GAMMA, 0.003))
        assert np.allclose(sim.params.gamma, np.clip(g0 * 2.0, 0, 1))
        assert sim.h[H_GAMMA] == 0.003

    def test_paired_builds_share_randomness(self):
        s = derive_stream(5, [3])
        a = SisSimulator.build(300, TRUTH, 0.1, 10, s)
        b = SisSimulator.build(300, TRUTH.replace(**{H_GAMMA: 0.003}), 0.1, 10, s)
        assert np.array_equal(a.topo.in_indices, b.topo.in_indices)
        assert np.allclose(b.params.gamma, np.clip(a.params.gamma * 2.0, 0, 1))
        assert np.array_equal(a.state.xi, b.state.xi)

    def test_bernoulli_graph_model(self):
        sim = SisSimulator.build(400, TRUTH, 0.2, 10, derive_stream(5, [4]),
                                 graph_model="bernoulli")
        degrees = np.diff(sim.topo.in_indptr)
        assert degrees.min() != degrees.max()  # ragged in-degrees
        for _ in range(20):
            sim.advance()
        assert set(np.unique(sim.state.xi)).issubset({0, 1})
        with pytest.raises(ValueError):
            SisSimulator.build(50, TRUTH, 0.2, 5, derive_stream(5, [5]),
                               graph_model="smallworld")
