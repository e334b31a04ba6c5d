"""Task tree, recipes, scoring, and action-space combinatorics."""

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from craftevo.task import (DEFAULT_LEVEL_SIZES, TaskTreeError, action_space_size,
                           build_family_tree, build_random_tree, canonical_combination,
                           default_task_tree, enumerate_actions, generate_task_variant,
                           item_score, load_task_tree, resolve_attempt, sample_uniform_action)


def brute_force_action_count(n: int) -> int:
    """Independent oracle: enumerate all multisets of size 1-3 with nested loops."""
    combos = set()
    items = list(range(n))
    for a in items:
        combos.add((a,))
        for b in items:
            combos.add(tuple(sorted((a, b))))
            for c in items:
                combos.add(tuple(sorted((a, b, c))))
    return len(combos)


class TestActionSpace:
    def test_six_items_gives_83(self):
        assert action_space_size(6) == 83

    def test_single_item_gives_3(self):
        assert action_space_size(1) == 3

    def test_two_items_gives_9(self):
        # frozen from brute_force_action_count(2)
        assert action_space_size(2) == 9

    def test_ten_items_gives_285(self):
        assert action_space_size(10) == 285

    @pytest.mark.parametrize("n", range(1, 13))
    def test_matches_brute_force(self, n):
        assert action_space_size(n) == brute_force_action_count(n)

    @pytest.mark.parametrize("n", range(1, 13))
    def test_enumeration_matches_size(self, n):
        actions = enumerate_actions(range(n))
        assert len(actions) == action_space_size(n)

    def test_zero_items_rejected(self):
        with pytest.raises(ValueError):
            action_space_size(0)
        with pytest.raises(ValueError):
            enumerate_actions([])

    def test_enumeration_is_canonical(self):
        for combo in enumerate_actions([3, 1, 2]):
            assert combo == tuple(sorted(combo))
            assert 1 <= len(combo) <= 3


class TestCanonicalCombination:
    def test_sorts(self):
        assert canonical_combination([3, 1, 2]) == (1, 2, 3)

    def test_size_bounds(self):
        with pytest.raises(ValueError):
            canonical_combination([])
        with pytest.raises(ValueError):
            canonical_combination([1, 2, 3, 4])

    @given(st.lists(st.integers(0, 50), min_size=1, max_size=3))
    def test_permutation_invariant(self, items):
        rng = np.random.default_rng(0)
        shuffled = list(items)
        rng.shuffle(shuffled)
        assert canonical_combination(items) == canonical_combination(shuffled)


class TestDefaultTree:
    def test_shape(self):
        tree = default_task_tree()
        assert tree.n_items == 184
        assert tree.level_sizes == DEFAULT_LEVEL_SIZES
        assert tree.n_discoverable == 178
        assert len(tree.basic_items) == 6

    def test_basics_score_zero(self):
        tree = default_task_tree()
        for item_id in tree.basic_items:
            assert item_score(tree, item_id) == 0

    def test_scores_follow_level_exponential(self):
        tree = default_task_tree()
        for item in tree.items:
            expected = 0 if item.level == 0 else int(round(2.0 ** item.level))
            assert item.score == expected

    def test_score_levels(self):
        tree = default_task_tree()
        by_level = {it.level: it.id for it in tree.items}
        assert item_score(tree, by_level[3]) == 8
        assert item_score(tree, by_level[10]) == 1024
        assert item_score(tree, by_level[3], base=3.0) == 27

    def test_unknown_id(self):
        tree = default_task_tree()
        with pytest.raises(KeyError):
            item_score(tree, 999)
        with pytest.raises(KeyError):
            tree.resolve((0, 999))

    def test_closure_reaches_everything(self):
        tree = default_task_tree()
        owned = set(tree.basic_items)
        rounds = 0
        while len(owned) < tree.n_items:
            added = {r.product for r in tree.recipes
                     if r.product not in owned and all(i in owned for i in r.ingredients)}
            assert added, f"closure stalled at {len(owned)} items"
            owned |= added
            rounds += 1
        assert rounds <= len(tree.level_sizes) - 1

    def test_resolution_is_permutation_invariant(self):
        tree = default_task_tree()
        recipe = tree.recipes[40]
        ing = list(recipe.ingredients)
        for perm in itertools.permutations(ing):
            assert resolve_attempt(tree, perm) == recipe.product

    def test_non_recipe_combination_fails(self):
        tree = default_task_tree()
        # a triple of basic items that is not a rule (basics feed levels >= 1 only
        # through specific combinations; find one that resolves to nothing)
        misses = [c for c in itertools.combinations(range(6), 3) if tree.resolve(c) is None]
        assert misses, "expected at least one non-recipe basic triple"

    def test_repeat_item_attempts_resolve_to_nothing(self):
        tree = default_task_tree()
        assert tree.resolve((0, 0)) is None
        assert tree.resolve((3, 3, 3)) is None


class TestLoadValidation:
    def tiny_doc(self):
        return {
            "levels": [6, 1],
            "items": [{"id": i, "name": f"item{i}", "level": 0} for i in range(6)]
                     + [{"id": 6, "name": "product", "level": 1}],
            "recipes": [{"ingredients": [0, 1], "product": 6}],
        }

    def test_round_trip(self, tmp_path):
        doc = self.tiny_doc()
        tree = load_task_tree(doc)
        path = tmp_path / "tree.json"
        tree.save(path)
        again = load_task_tree(path)
        assert again.recipe_set_hash() == tree.recipe_set_hash()

    def test_degenerate_tree_without_recipes(self):
        tree = load_task_tree({
            "levels": [6],
            "items": [{"id": i, "name": f"item{i}", "level": 0} for i in range(6)],
            "recipes": [],
        })
        assert tree.n_items == 6
        assert tree.n_discoverable == 0

    def test_dangling_product_named(self):
        doc = self.tiny_doc()
        doc["recipes"] = [{"ingredients": [0, 1], "product": 42}]
        with pytest.raises(TaskTreeError, match="42"):
            load_task_tree(doc)

    def test_duplicate_ingredients_named(self):
        doc = self.tiny_doc()
        doc["levels"] = [6, 2]
        doc["items"].append({"id": 7, "name": "other", "level": 1})
        doc["recipes"] = [
            {"ingredients": [0, 1], "product": 6},
            {"ingredients": [1, 0], "product": 7},
        ]
        with pytest.raises(TaskTreeError, match="duplicate ingredient"):
            load_task_tree(doc)

    def test_unreachable_item_named(self):
        doc = self.tiny_doc()
        doc["levels"] = [6, 2]
        doc["items"].append({"id": 7, "name": "orphan", "level": 1})
        with pytest.raises(TaskTreeError, match="orphan|no recipe"):
            load_task_tree(doc)

    def test_ingredient_from_same_level_rejected(self):
        doc = self.tiny_doc()
        doc["levels"] = [6, 2]
        doc["items"].append({"id": 7, "name": "other", "level": 1})
        doc["recipes"].append({"ingredients": [6], "product": 7})
        with pytest.raises(TaskTreeError, match="lower levels"):
            load_task_tree(doc)

    def test_unknown_top_level_key(self):
        doc = self.tiny_doc()
        doc["extra"] = 1
        with pytest.raises(TaskTreeError, match="extra"):
            load_task_tree(doc)

    def test_invalid_json_text(self):
        with pytest.raises(TaskTreeError, match="JSON"):
            load_task_tree("{not json")


class TestVariants:
    def test_shuffle_rules_keeps_shape(self):
        tree = default_task_tree()
        variant = generate_task_variant(tree, "shuffle_rules", seed=5)
        assert variant.level_sizes == tree.level_sizes
        assert [it.name for it in variant.items] == [it.name for it in tree.items]
        assert variant.recipe_set_hash() != tree.recipe_set_hash()

    def test_resize_builds_requested_shape(self):
        tree = default_task_tree()
        sizes = [6, 10, 1, 10, 1, 10, 1, 10, 1, 34, 100]
        variant = generate_task_variant(tree, "resize", level_sizes=sizes, seed=5)
        assert list(variant.level_sizes) == sizes
        assert variant.n_items == sum(sizes)

    def test_deterministic_in_seed(self):
        tree = default_task_tree()
        a = generate_task_variant(tree, "shuffle_rules", seed=11)
        b = generate_task_variant(tree, "shuffle_rules", seed=11)
        assert a.recipe_set_hash() == b.recipe_set_hash()

    def test_bad_mode_and_sizes(self):
        tree = default_task_tree()
        with pytest.raises(TaskTreeError):
            generate_task_variant(tree, "nonsense", seed=0)
        with pytest.raises(TaskTreeError):
            generate_task_variant(tree, "resize", level_sizes=[5, 4], seed=0)
        with pytest.raises(TaskTreeError):
            generate_task_variant(tree, "resize", level_sizes=[6, 0], seed=0)

    @pytest.mark.parametrize("seed", range(100))
    def test_variants_always_validate(self, seed):
        # TaskTree runs every structural invariant in its constructor, so
        # building without an exception is the property under test
        tree = build_random_tree([6, 4, 3, 2], seed=seed)
        assert tree.n_items == 15
        if seed < 20:
            fam = build_family_tree(DEFAULT_LEVEL_SIZES, seed=seed)
            assert fam.n_items == 184


class TestUniformActionSampling:
    def test_matches_enumeration_support(self):
        rng = np.random.default_rng(1)
        inv = [0, 1, 2, 3]
        space = enumerate_actions(inv)
        seen = {sample_uniform_action(inv, rng) for _ in range(3000)}
        assert seen <= space
        assert len(seen) == len(space)  # 34 actions, 3000 draws: all hit

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_samples_are_valid_combinations(self, seed):
        rng = np.random.default_rng(seed)
        inv = [2, 5, 7, 9, 11]
        combo = sample_uniform_action(inv, rng)
        assert 1 <= len(combo) <= 3
        assert combo == tuple(sorted(combo))
        assert set(combo) <= set(inv)
