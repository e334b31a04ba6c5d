"""Acceptance suite: one test per release criterion, at the stated tolerances.

The population-dynamics criteria run 16 independent replicates of each
condition at N=100, 250 generations (the documented desk-scale horizon) on a
shared process pool; expect the full module to take on the order of ten
minutes on two cores. Everything else is seconds.
"""

import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy import stats

from craftevo.cli import main as cli_main
from craftevo.events import state_hash
from craftevo.metrics import mean_state_entropy, spearman_rho, uncertainty_value
from craftevo.semantic import forward, init_net, loss_and_grads, train
from craftevo.service import Session, replay_log
from craftevo.task import (DEFAULT_LEVEL_SIZES, action_space_size, default_task_tree,
                           enumerate_actions, sample_uniform_action)

REPLICATES = 16
GENERATIONS = 250
POPULATION = 100
ACCEPTANCE_SEED = 20260810

CONDITIONS = ("semantic_social", "random_social", "semantic_individual", "random_individual")


def _run_condition(args):
    mix, replicate = args
    from craftevo.evolution import SimConfig, run_simulation

    tree = default_task_tree()
    cfg = SimConfig(population_size=POPULATION, generations=GENERATIONS,
                    strategy_mix={mix: 1.0}, master_seed=ACCEPTANCE_SEED)
    traj = run_simulation(cfg, replicate=replicate, tree=tree)
    tail_events = [ev for rec in traj.records[-10:] for ev in rec.events]
    return (mix, replicate, traj.records[-1].repertoire_cumulative,
            mean_state_entropy(tail_events))


def _run_mixed(replicate):
    from craftevo.evolution import SimConfig, run_simulation

    tree = default_task_tree()
    mix = {name: 0.25 for name in CONDITIONS}
    cfg = SimConfig(population_size=POPULATION, generations=GENERATIONS,
                    strategy_mix=mix, master_seed=ACCEPTANCE_SEED + 1)
    traj = run_simulation(cfg, replicate=replicate, tree=tree)
    return replicate, traj.records[-1].strategy_counts


@pytest.fixture(scope="session")
def fig2_results():
    jobs = [(mix, rep) for mix in CONDITIONS for rep in range(REPLICATES)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        condition_rows = list(pool.map(_run_condition, jobs))
        mixed_rows = list(pool.map(_run_mixed, range(REPLICATES)))
    finals = {mix: [] for mix in CONDITIONS}
    entropies = {mix: [] for mix in CONDITIONS}
    for mix, _rep, final, entropy in condition_rows:
        finals[mix].append(final)
        entropies[mix].append(entropy)
    return {"finals": finals, "entropies": entropies, "mixed": mixed_rows}


class TestCriterionCombinatorics:
    """action_space_size and enumerate_actions agree with brute force, n=6 -> 83."""

    def test_combinatorics_oracle(self):
        for n in range(1, 13):
            combos = set()
            items = list(range(n))
            for a in items:
                combos.add((a,))
                for b in items:
                    combos.add(tuple(sorted((a, b))))
                    for c in items:
                        combos.add(tuple(sorted((a, b, c))))
            assert action_space_size(n) == len(combos)
            assert len(enumerate_actions(items)) == len(combos)
        assert action_space_size(6) == 83
        print("PASS combinatorics: sizes 1-12 match brute force; n=6 -> 83")


class TestCriterionTaskIntegrity:
    """Bundled tree: level sizes, 184 items, full reachability closure."""

    def test_task_integrity(self):
        tree = default_task_tree()
        assert tree.level_sizes == DEFAULT_LEVEL_SIZES == (6, 4, 2, 2, 2, 3, 3, 7, 11, 48, 96)
        assert tree.n_items == 184
        assert tree.n_discoverable == 178
        owned = set(tree.basic_items)
        for _ in range(len(tree.level_sizes)):
            for recipe in tree.recipes:
                if all(i in owned for i in recipe.ingredients):
                    owned.add(recipe.product)
        assert len(owned) == 184
        print("PASS task integrity: levels (6,4,2,2,2,3,3,7,11,48,96), 184 items, closure total")


class TestCriterionNetwork:
    """Gradients vs finite differences; >=50% loss drop in 200 epochs; normalization."""

    def test_gradient_check(self):
        worst = 0.0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            net = init_net(60, seed=seed)
            x, target = int(rng.integers(60)), int(rng.integers(60))
            _loss, dE, dW1, dW2 = loss_and_grads(net, x, target)
            step = 1e-5
            for _ in range(10):
                block = ("E", "W1", "W2")[int(rng.integers(3))]
                arr = getattr(net, block)
                if block == "E":
                    index = (x, int(rng.integers(net.embed_dim)))
                    analytic = dE[index[1]]
                elif block == "W1":
                    index = (int(rng.integers(net.embed_dim)), int(rng.integers(net.hidden_dim)))
                    analytic = dW1[index]
                else:
                    index = (int(rng.integers(net.hidden_dim)), int(rng.integers(60)))
                    analytic = dW2[index]
                original = arr[index]
                arr[index] = original + step
                up = -math.log(forward(net, x)[target])
                arr[index] = original - step
                down = -math.log(forward(net, x)[target])
                arr[index] = original
                numeric = (up - down) / (2 * step)
                rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
                worst = max(worst, rel)
                assert rel < 1e-4
        print(f"PASS network gradients: worst relative error {worst:.2e} < 1e-4")

    def test_loss_halves_on_fixed_dataset(self):
        rng = np.random.default_rng(0)
        targets = rng.permutation(60)
        pairs = [(i % 60, int(targets[i % 60])) for i in range(50)]
        drops = []
        for seed in range(10):
            net = init_net(60, seed=seed)
            trace = train(net, pairs, epochs=200, learning_rate=0.05)
            drops.append(trace[-1] / trace[0])
            assert trace[-1] <= 0.5 * trace[0]
        print(f"PASS network training: loss ratio after 200 epochs max {max(drops):.3f} <= 0.5")

    def test_normalization_after_10k_updates(self):
        rng = np.random.default_rng(1)
        net = init_net(60, seed=1)
        pairs = [(int(rng.integers(60)), int(rng.integers(60))) for _ in range(100)]
        train(net, pairs, epochs=100, learning_rate=0.1)
        sums = [forward(net, x).sum() for x in range(60)]
        assert all(abs(s - 1.0) < 1e-9 for s in sums)
        assert np.isfinite(net.E).all() and np.isfinite(net.W1).all() and np.isfinite(net.W2).all()
        print("PASS network stability: softmax sums to 1 +/- 1e-9 after 10^4 updates")


class TestCriterionFig2aOrdering:
    """Desk-scale Fig 2a: repertoire ordering and synergy ratio >= 1.5."""

    def test_fig2a_ordering_and_synergy(self, fig2_results):
        med = {mix: float(np.median(vals)) for mix, vals in fig2_results["finals"].items()}
        ratio = med["semantic_social"] / med["random_social"]
        print(f"fig2a medians: {med}; synergy ratio {ratio:.2f}")
        assert med["semantic_social"] > med["random_social"]
        assert med["random_social"] > med["semantic_individual"]
        assert med["random_social"] > med["random_individual"]
        assert ratio >= 1.5
        print(f"PASS fig2a: semantic+social {med['semantic_social']:.0f} > social-only "
              f"{med['random_social']:.0f} > individual conditions; ratio {ratio:.2f} >= 1.5")


class TestCriterionFig2dEntropy:
    """Semantic populations explore with lower action entropy (final 10 generations)."""

    def test_fig2d_entropy_ordering(self, fig2_results):
        med = {mix: float(np.median(vals)) for mix, vals in fig2_results["entropies"].items()}
        print(f"fig2d entropy medians: {med}")
        assert med["semantic_social"] < med["random_social"]
        assert med["semantic_individual"] < med["random_individual"]
        print(f"PASS fig2d: entropy {med['semantic_social']:.3f} < {med['random_social']:.3f} "
              f"(social) and {med['semantic_individual']:.3f} < {med['random_individual']:.3f} "
              f"(individual)")


class TestCriterionFig2bDominance:
    """With 25% per type, semantic+social holds strict plurality in >= 75% of runs."""

    def test_fig2b_plurality(self, fig2_results):
        wins = 0
        for _rep, counts in fig2_results["mixed"]:
            ss = counts.get("semantic_social", 0)
            wins += all(ss > v for k, v in counts.items() if k != "semantic_social")
        share = wins / REPLICATES
        print(f"fig2b: strict plurality in {wins}/{REPLICATES} replicates")
        assert share >= 0.75
        print(f"PASS fig2b: semantic+social plurality share {share:.2f} >= 0.75")


class TestCriterionBotBaseline:
    """Solo bot: chi-square uniform over the 83 actions; entropy within 0.05 of ln(83)."""

    def test_bot_uniformity_and_entropy(self):
        tree = default_task_tree()
        inv = sorted(tree.basic_items)
        rng = np.random.default_rng(12345)
        draws = 100_000
        counts = Counter(sample_uniform_action(inv, rng) for _ in range(draws))
        space = sorted(enumerate_actions(inv))
        assert len(space) == 83
        observed = np.array([counts.get(c, 0) for c in space])
        _chi2, p = stats.chisquare(observed)
        assert p > 0.001
        probs = observed / draws
        entropy = float(-(probs[probs > 0] * np.log(probs[probs > 0])).sum())
        assert abs(entropy - math.log(83)) < 0.05
        print(f"PASS bot baseline: chi-square p={p:.3f} > 0.001; "
              f"entropy {entropy:.4f} within 0.05 of ln(83)={math.log(83):.4f}")


class TestCriterionDeterminism:
    """Identical bytes across reruns and across parallelism, runs and sweeps."""

    def test_run_and_sweep_determinism(self, tmp_path):
        config = {"population_size": 15, "generations": 5, "n_attempt": 5,
                  "strategy_mix": {"semantic_social": 1.0}, "master_seed": 5, "replicates": 3}
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        outs = []
        for tag, jobs in (("a", "1"), ("b", "2"), ("c", "1")):
            out = tmp_path / tag
            assert cli_main(["run", "--config", str(cfg_path), "--out", str(out),
                             "--jobs", jobs]) == 0
            outs.append((out / "summary.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]

        sweep = {"base": config, "axes": {"p_sl": [0.0, 0.5]}, "replicates": 2}
        sweep_path = tmp_path / "sweep.json"
        sweep_path.write_text(json.dumps(sweep))
        sweeps = []
        for tag, jobs in (("sa", "1"), ("sb", "2")):
            out = tmp_path / tag
            assert cli_main(["sweep", "--sweep", str(sweep_path), "--out", str(out),
                             "--jobs", jobs]) == 0
            sweeps.append(((out / "summary.csv").read_bytes(), (out / "cells.csv").read_bytes()))
        assert sweeps[0] == sweeps[1]
        print("PASS determinism: byte-identical summaries across reruns and parallelism")


class TestCriterionMetricsOracles:
    """Entropy, uncertainty, Spearman, and replay against independent oracles."""

    def test_entropy_matches_histogram_oracle(self):
        rng = np.random.default_rng(7)
        combos = [(1,), (2,), (1, 2), (1, 3), (2, 3)]
        states = ["006-x", "007-y"]
        from craftevo.events import AttemptEvent
        from craftevo.metrics import entropy_by_state

        events = [AttemptEvent(t, "a", "attempt", combos[rng.integers(len(combos))], None, 0,
                               states[rng.integers(2)]) for t in range(1000)]
        oracle = {}
        for state in states:
            hist = Counter(ev.combination for ev in events if ev.state_hash == state)
            total = sum(hist.values())
            oracle[state] = -sum((c / total) * math.log(c / total) for c in hist.values())
        computed = entropy_by_state(events)
        assert computed == oracle  # exact: same floating point reduction
        print("PASS metrics: entropy equals independent histogram computation exactly")

    def test_uncertainty_formula_on_20_pairs(self):
        cases = [(1, 0), (2, 0), (2, 1), (5, 0), (5, 2), (10, 0), (10, 3), (20, 5),
                 (50, 0), (50, 10), (100, 9), (100, 50), (200, 7), (500, 0), (500, 100),
                 (1000, 1), (1000, 999), (42, 6), (7, 3), (300, 30)]
        assert len(cases) == 20
        for total, selected in cases:
            assert uncertainty_value(total, selected) == pytest.approx(
                math.sqrt(math.log(total) / (selected + 1)), abs=1e-12)
        print("PASS metrics: uncertainty matches sqrt(ln T / (t_e + 1)) on 20 pairs")

    def test_spearman_matches_rank_then_pearson(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = np.round(rng.normal(size=(12, 12)), 1)
            b = np.round(rng.normal(size=(12, 12)), 1)
            a, b = (a + a.T) / 2, (b + b.T) / 2
            iu = np.triu_indices(12, k=1)
            ra = stats.rankdata(a[iu], method="average")
            rb = stats.rankdata(b[iu], method="average")
            ra, rb = ra - ra.mean(), rb - rb.mean()
            oracle = float((ra @ rb) / math.sqrt((ra @ ra) * (rb @ rb)))
            assert spearman_rho(a, b) == pytest.approx(oracle, abs=1e-12)
        print("PASS metrics: spearman_rho matches rank-then-Pearson oracle to 1e-12")

    def test_replay_reproduces_20_seeded_sessions(self):
        tree = default_task_tree()
        mismatches = 0
        for seed in range(20):
            session = Session("semantic", "group", seed=seed, tree=tree, manual_time=True)
            rng = np.random.default_rng(seed)
            now = 0.0
            inv = sorted(tree.basic_items)
            for _ in range(30):
                now += 15.0
                k = int(rng.integers(1, 4))
                items = [int(inv[rng.integers(len(inv))]) for _ in range(k)]
                session.submit_attempt("player_0", items, now=now)
                inv = sorted(session.players["player_0"].state.inventory)
            session.advance_bots(now=600.0)
            replayed = replay_log(session.events, tree)
            for pid, player in session.players.items():
                if pid in replayed["scores"] and replayed["scores"][pid] != player.state.score:
                    mismatches += 1
        assert mismatches == 0
        print("PASS metrics: replay reproduced final scores on 20 seeded sessions exactly")


class TestNotReproducible:
    """Human-experiment effect sizes are out of reach by design.

    The regression coefficients behind the human-behavior figures, the
    rho=0.65 against externally computed language-model embeddings, and the
    absolute repertoire magnitudes of the original large-scale runs are not
    reproducible here (human data and unpublished hyperparameters); the
    property-based criteria above are the substitutes. This test documents
    that boundary and pins the pieces the artifact does provide: the feature
    tables those models consume and the correlation machinery itself.
    """

    def test_substitute_machinery_exists(self):
        tree = default_task_tree()
        state = state_hash(tree.basic_items)
        from craftevo.events import AttemptEvent
        from craftevo.metrics import behavioral_feature_table

        events = [AttemptEvent(0, "a", "attempt", (0, 1), None, 0, state)]
        rows = behavioral_feature_table(events, tree, k=3, rng=np.random.default_rng(0))
        assert rows, "feature-table pipeline must emit rows for external model fitting"
        rng = np.random.default_rng(0)
        a = rng.normal(size=(8, 8))
        assert spearman_rho(a, a) == pytest.approx(1.0, abs=1e-12)
        print("PASS boundary: human effect sizes out of scope; substitutes in place")
