import numpy as np
import pytest

from saucir.mobility import AggregateRates, MobilitySchedule, aggregate, scale_schedule
from saucir.model import EpidemicParams, NetworkState, simulate, simulate_saucir_minus_m
from saucir.policyopt import (
    DegenerateIndividual,
    GAConfig,
    Individual,
    crossover,
    get_fitness,
    mutation,
    normalize_individual,
    optimize,
    random_individual,
    result_to_dict,
    schedule_to_csv,
    selection,
)


def toy_network(m=2, t=2, u0=(400.0, 0.0)):
    populations = np.array([100000.0, 80000.0])[:m]
    params = EpidemicParams(alpha0=np.array([0.9, 0.2])[:m], tau=np.full(m, 0.4),
                            zeta=np.full(m, 0.3), beta=np.full(m, 0.1),
                            quarantine=np.zeros(m), theta=0.0,
                            incubation_lag=0, asymptomatic_lag=0)
    state = NetworkState(0, populations.copy(), np.array(u0[:m]), np.zeros(m),
                         np.zeros(m), np.array([50.0, 5.0])[:m], np.zeros(m),
                         np.zeros((0, m)), np.zeros((0, m)))
    flows = np.zeros((t, m, m))
    flows[:, 0, 1] = 4000.0
    flows[:, 1, 0] = 6000.0
    sched = MobilitySchedule(flows / populations[None, :, None], flows / populations[None, None, :])
    return populations, params, state, aggregate(sched)


class TestNormalize:
    def test_uniform_weights_split_evenly(self):
        _, _, _, agg = toy_network(t=2)
        ind = Individual(np.ones((2, 2, 2)))
        sched = normalize_individual(ind, agg)
        assert np.allclose(sched.gp_in[0], agg.c_in / 2)
        assert np.allclose(sched.gp_in[1], agg.c_in / 2)

    def test_share_arithmetic(self):
        c_in = np.array([[0.0, 0.8], [0.3, 0.0]])
        c_out = np.array([[0.0, 0.4], [0.2, 0.0]])
        agg = AggregateRates(c_in, c_out, 2)
        w = np.zeros((2, 2, 2))
        w[:, 0, 1] = [1.0, 3.0]
        w[:, 1, 0] = [1.0, 1.0]
        sched = normalize_individual(Individual(w), agg)
        assert sched.gp_in[:, 0, 1].tolist() == pytest.approx([0.2, 0.6])
        assert sched.gp_out[:, 0, 1].tolist() == pytest.approx([0.1, 0.3])

    def test_aggregate_reproduced_exactly(self):
        rng = np.random.default_rng(1)
        _, _, _, agg = toy_network(t=2)
        for _ in range(30):
            ind = random_individual(rng, 2, 2)
            out = aggregate(normalize_individual(ind, agg))
            assert np.max(np.abs(out.c_in - agg.c_in)) < 1e-12
            assert np.max(np.abs(out.c_out - agg.c_out)) < 1e-12

    def test_degenerate_column_raises(self):
        _, _, _, agg = toy_network(t=2)
        w = np.ones((2, 2, 2))
        w[:, 0, 1] = 0.0  # pair with positive aggregate but no temporal mass
        with pytest.raises(DegenerateIndividual) as exc:
            normalize_individual(Individual(w), agg)
        assert (0, 1) in exc.value.pairs

    def test_zero_aggregate_pair_stays_zero(self):
        c = np.zeros((2, 2))
        agg = AggregateRates(c, c, 2)
        sched = normalize_individual(Individual(np.ones((2, 2, 2))), agg)
        assert not sched.gp_in.any() and not sched.gp_out.any()


class TestFitness:
    def test_infection_free_identical_across_individuals(self):
        populations, params, state, agg = toy_network()
        state.u[:] = 0.0
        d_sum = state.d.sum()
        rng = np.random.default_rng(4)
        values = {get_fitness(random_individual(rng, 2, 2), agg, state, params,
                              populations, [0, 1], 2) for _ in range(5)}
        assert values == {-d_sum}

    def test_scale_invariance_of_weights(self):
        populations, params, state, agg = toy_network()
        rng = np.random.default_rng(5)
        ind = random_individual(rng, 2, 2)
        rescaled = Individual(ind.weights * np.array([3.0, 3.0])[:, None, None])
        f1 = get_fitness(ind, agg, state, params, populations, [0, 1], 2)
        f2 = get_fitness(rescaled, agg, state, params, populations, [0, 1], 2)
        assert f1 == pytest.approx(f2, rel=1e-12)

    def test_matches_direct_simulation(self):
        populations, params, state, agg = toy_network()
        rng = np.random.default_rng(6)
        ind = random_individual(rng, 2, 2)
        sched = normalize_individual(ind, agg)
        trace = simulate(state, params, populations, sched, 2)
        expected = -trace.states[-1].d.sum()
        assert get_fitness(ind, agg, state, params, populations, [0, 1], 2) == expected


class TestOperators:
    def _population(self, rng, n=6, t=3, m=2):
        return [random_individual(rng, t, m) for _ in range(n)]

    def test_selection_resamples_input(self):
        rng = np.random.default_rng(7)
        pop = self._population(rng)
        cfg = GAConfig(horizon=3, population_size=6, elitism_count=1, seed=0)
        out = selection(pop, np.zeros(6), cfg, rng)
        assert len(out) == 6
        originals = [p.weights.tobytes() for p in pop]
        assert all(ind.weights.tobytes() in originals for ind in out)

    def test_selection_keeps_elites(self):
        rng = np.random.default_rng(8)
        pop = self._population(rng)
        fitness = np.array([0.0, 5.0, 1.0, 4.0, 2.0, 3.0])
        cfg = GAConfig(horizon=3, population_size=6, elitism_count=2, seed=0)
        out = selection(pop, fitness, cfg, rng)
        assert np.array_equal(out[0].weights, pop[1].weights)
        assert np.array_equal(out[1].weights, pop[3].weights)

    def test_minus_inf_loses_every_tournament(self):
        rng = np.random.default_rng(9)
        pop = self._population(rng, n=4)
        fitness = np.array([-np.inf, 1.0, 2.0, 3.0])
        cfg = GAConfig(horizon=3, population_size=4, elitism_count=0, seed=0)

        class ScriptedRng:
            # every tournament pits the -inf individual against a finite one
            draws = iter([(0, 1), (1, 0), (0, 3), (2, 0)])

            def integers(self, lo, hi, size):
                return np.array(next(self.draws))

        out = selection(pop, fitness, cfg, ScriptedRng())
        winners = [ind.weights.tobytes() for ind in out]
        expected = [pop[1], pop[1], pop[3], pop[2]]
        assert winners == [e.weights.tobytes() for e in expected]

    def test_elitism_count_bounds_validated(self):
        with pytest.raises(ValueError):
            GAConfig(horizon=2, population_size=4, elitism_count=4)

    def test_crossover_rate_zero_unchanged(self):
        rng = np.random.default_rng(10)
        pop = self._population(rng)
        cfg = GAConfig(horizon=3, population_size=6, crossover_rate=0.0, elitism_count=0, seed=0)
        out = crossover(pop, cfg, rng)
        assert all(np.array_equal(a.weights, b.weights) for a, b in zip(pop, out))

    def test_degenerate_cut_clones_parents(self):
        rng = np.random.default_rng(11)
        a, b = self._population(rng, n=2, t=1)  # only cuts 0 and 1 exist
        cfg = GAConfig(horizon=1, population_size=2, crossover_rate=1.0, elitism_count=0, seed=0)
        out = crossover([a, b], cfg, rng)
        joined = {w.weights.tobytes() for w in out}
        assert joined == {a.weights.tobytes(), b.weights.tobytes()}

    def test_crossover_conserves_pairwise_totals(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            pop = self._population(rng, n=2, t=5, m=3)
            cfg = GAConfig(horizon=5, population_size=2, crossover_rate=1.0, elitism_count=0, seed=0)
            out = crossover(pop, cfg, rng)
            before = pop[0].weights.sum(axis=0) + pop[1].weights.sum(axis=0)
            after = out[0].weights.sum(axis=0) + out[1].weights.sum(axis=0)
            assert np.allclose(before, after, atol=1e-12)

    def test_mutation_rate_zero_unchanged(self):
        rng = np.random.default_rng(13)
        pop = self._population(rng)
        cfg = GAConfig(horizon=3, population_size=6, mutation_rate=0.0, elitism_count=0, seed=0)
        out = mutation(pop, cfg, rng)
        assert all(np.array_equal(a.weights, b.weights) for a, b in zip(pop, out))

    def test_mutation_keeps_zero_weights_zero(self):
        rng = np.random.default_rng(14)
        ind = Individual(np.zeros((3, 2, 2)))
        cfg = GAConfig(horizon=3, population_size=2, mutation_rate=1.0, elitism_count=0, seed=0)
        out = mutation([ind, ind], cfg, rng)
        assert not out[0].weights.any()

    def test_mutation_hits_expected_fraction(self):
        rng = np.random.default_rng(15)
        t, m, n = 10, 4, 20
        rate = 0.1
        pop = [random_individual(rng, t, m) for _ in range(n)]
        cfg = GAConfig(horizon=t, population_size=n, mutation_rate=rate, elitism_count=0, seed=0)
        out = mutation(pop, cfg, rng)
        mutable = t * m * (m - 1) * n  # off-diagonal entries
        changed = sum(int(np.sum(a.weights != b.weights)) for a, b in zip(pop, out))
        expect = mutable * rate
        sigma = (mutable * rate * (1 - rate)) ** 0.5
        assert abs(changed - expect) <= 3 * sigma


class TestOptimize:
    def test_zero_aggregates_lockdown(self):
        populations, params, state, _ = toy_network()
        agg = AggregateRates(np.zeros((2, 2)), np.zeros((2, 2)), 2)
        cfg = GAConfig(horizon=2, population_size=6, generations=4, seed=0)
        res = optimize(agg, state, params, populations, cfg)
        reference = simulate_saucir_minus_m(state, params, populations, 2)
        assert res.best_objective == reference.states[-1].d.sum()
        assert len(set(res.fitness_history)) == 1

    def test_best_so_far_nonincreasing(self):
        populations, params, state, agg = toy_network()
        for seed in range(5):
            cfg = GAConfig(horizon=2, population_size=10, generations=15, seed=seed)
            res = optimize(agg, state, params, populations, cfg)
            hist = res.fitness_history
            assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_schedule_reproduces_aggregates(self):
        populations, params, state, agg = toy_network()
        cfg = GAConfig(horizon=2, population_size=8, generations=5, seed=3)
        res = optimize(agg, state, params, populations, cfg)
        out = aggregate(res.best_schedule)
        assert np.max(np.abs(out.c_in - agg.c_in)) < 1e-12
        assert np.max(np.abs(out.c_out - agg.c_out)) < 1e-12
        assert res.constraint_residual <= 1e-9 * populations.max()

    def test_seed_determinism(self):
        populations, params, state, agg = toy_network()
        cfg = GAConfig(horizon=2, population_size=8, generations=6, seed=11)
        r1 = optimize(agg, state, params, populations, cfg)
        r2 = optimize(agg, state, params, populations, cfg)
        assert r1.best_objective == r2.best_objective
        assert r1.fitness_history == r2.fitness_history
        assert np.array_equal(r1.best_schedule.gp_in, r2.best_schedule.gp_in)

    def test_ga_matches_exhaustive_enumeration(self):
        populations, params, state, agg = toy_network()
        grid = np.linspace(0, 1, 21)
        best = np.inf
        for s01 in grid:
            for s10 in grid:
                w = np.zeros((2, 2, 2))
                w[0, 0, 1], w[1, 0, 1] = s01, 1 - s01
                w[0, 1, 0], w[1, 1, 0] = s10, 1 - s10
                f = get_fitness(Individual(w), agg, state, params, populations, [0, 1], 2)
                best = min(best, -f)
        cfg = GAConfig(horizon=2, population_size=24, generations=40, seed=3)
        res = optimize(agg, state, params, populations, cfg)
        assert abs(res.best_objective - best) / best <= 0.05

    def test_unbalanced_aggregates_rejected(self):
        populations, params, state, _ = toy_network()
        c_in = np.array([[0.0, 0.5], [0.1, 0.0]])
        c_out = np.array([[0.0, 0.001], [0.002, 0.0]])
        with pytest.raises(ValueError, match="balance"):
            optimize(AggregateRates(c_in, c_out, 2), state, params, populations,
                     GAConfig(horizon=2, population_size=4, generations=2, seed=0))

    def test_target_node_resolution(self):
        populations, params, state, agg = toy_network()
        cfg = GAConfig(horizon=2, population_size=6, generations=3, seed=0,
                       target_nodes=["east"])
        res = optimize(agg, state, params, populations, cfg, node_ids=["east", "west"])
        assert res.best_objective < state.d.sum() + 1e5  # targeted objective computed
        with pytest.raises(ValueError, match="unknown target"):
            optimize(agg, state, params, populations,
                     GAConfig(horizon=2, population_size=6, generations=3, seed=0,
                              target_nodes=["nowhere"]), node_ids=["east", "west"])


def test_exports():
    populations, params, state, agg = toy_network()
    cfg = GAConfig(horizon=2, population_size=6, generations=3, seed=0)
    res = optimize(agg, state, params, populations, cfg)
    doc = result_to_dict(res)
    assert doc["best_objective"] == res.best_objective
    assert len(doc["fitness_history"]) == 3
    csv_text = schedule_to_csv(res.best_schedule, ["east", "west"])
    lines = csv_text.strip().split("\n")
    assert lines[0] == "day,origin,destination,gp_in,gp_out"
    assert len(lines) == 1 + 2 * 2  # two days, two directed pairs
