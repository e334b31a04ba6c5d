"""Item tree, recipes, scoring, and the combinatorics of the crafting action space.

A task tree organizes items into innovation levels. Level 0 holds the six
basic items everyone starts with; every higher-level item is the product of
exactly one recipe whose ingredients all come from strictly lower levels.
Combining 1-3 owned items (a multiset, order ignored) either matches a recipe
and yields its product, or fails.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_COMBO_SIZE = 3
N_BASIC_ITEMS = 6
DEFAULT_LEVEL_SIZES = (6, 4, 2, 2, 2, 3, 3, 7, 11, 48, 96)
DEFAULT_SCORE_BASE = 2.0

# Recipe ingredient-count distribution used when generating trees.
RECIPE_SIZE_WEIGHTS = {1: 0.15, 2: 0.50, 3: 0.35}

#: A combination is a canonical (sorted) tuple of 1-3 item ids.
Combination = tuple

_BASIC_NAMES = ("stone", "branch", "vine", "clay", "shell", "pigment")

_NAME_ADJECTIVES = (
    "carved", "polished", "woven", "fired", "sharpened", "braided", "painted",
    "hollow", "bound", "etched", "glazed", "oiled", "split", "dried", "inlaid",
    "hardened", "curved", "notched", "stacked", "twisted", "coiled", "bleached",
    "smoked", "studded", "plaited", "banded", "ridged", "tapered", "layered",
    "forked",
)

_NAME_NOUNS = (
    "haft", "blade", "cord", "bowl", "mask", "totem", "drum", "hook", "frame",
    "beam", "net", "scraper", "awl", "mallet", "basket", "charm", "post",
    "paddle", "spindle", "lattice", "fetish", "effigy", "pestle", "sled",
    "loom", "yoke", "flute", "raft", "idol", "stilt", "quiver", "press",
    "crank", "pylon", "sconce", "altar", "gong", "keel", "truss", "plinth",
)


class TaskTreeError(ValueError):
    """Raised for unparseable or structurally invalid task trees."""


@dataclass(frozen=True)
class Item:
    id: int
    name: str
    level: int
    score: int


@dataclass(frozen=True)
class Recipe:
    ingredients: Combination
    product: int


def canonical_combination(items: Iterable[int]) -> Combination:
    """Sort item ids into the canonical multiset representation."""
    combo = tuple(sorted(int(i) for i in items))
    if not 1 <= len(combo) <= MAX_COMBO_SIZE:
        raise ValueError(f"combination must have 1-{MAX_COMBO_SIZE} items, got {len(combo)}")
    return combo


def action_space_size(n: int) -> int:
    """Number of distinct multisets of size 1-3 over an inventory of n items."""
    if n < 1:
        raise ValueError("inventory must contain at least one item")
    return math.comb(n, 1) + math.comb(n + 1, 2) + math.comb(n + 2, 3)


def enumerate_actions(inventory: Iterable[int]) -> set[Combination]:
    """Every distinct combination of 1-3 items drawable from the inventory."""
    items = sorted(set(inventory))
    if not items:
        raise ValueError("inventory must contain at least one item")
    actions: set[Combination] = set()
    for k in range(1, MAX_COMBO_SIZE + 1):
        actions.update(itertools.combinations_with_replacement(items, k))
    return actions


def sample_uniform_action(inventory_sorted: Sequence[int], rng: np.random.Generator) -> Combination:
    """Draw one combination uniformly over the full action space of the inventory.

    Uses the stars-and-bars bijection (multisets of size k over n items map to
    k-subsets of range(n + k - 1)), so no enumeration is needed.
    """
    n = len(inventory_sorted)
    if n < 1:
        raise ValueError("inventory must contain at least one item")
    class_sizes = np.array([math.comb(n + k - 1, k) for k in range(1, MAX_COMBO_SIZE + 1)], dtype=float)
    k = 1 + int(rng.choice(MAX_COMBO_SIZE, p=class_sizes / class_sizes.sum()))
    picks = np.sort(rng.choice(n + k - 1, size=k, replace=False)) - np.arange(k)
    return tuple(int(inventory_sorted[i]) for i in picks)


class TaskTree:
    """Immutable item/recipe hierarchy. Validates all structural invariants on build."""

    def __init__(self, items: Sequence[Item], recipes: Sequence[Recipe],
                 level_sizes: Sequence[int], score_base: float = DEFAULT_SCORE_BASE):
        self.items: tuple[Item, ...] = tuple(items)
        self.recipes: tuple[Recipe, ...] = tuple(recipes)
        self.level_sizes: tuple[int, ...] = tuple(int(s) for s in level_sizes)
        self.score_base = float(score_base)
        self._recipe_by_combo: dict[Combination, int] = {}
        self._recipe_by_product: dict[int, Recipe] = {}
        self._validate()
        self.basic_items: tuple[int, ...] = tuple(it.id for it in self.items if it.level == 0)
        self.scores: tuple[int, ...] = tuple(it.score for it in self.items)

    # -- queries ------------------------------------------------------------

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_discoverable(self) -> int:
        return len(self.items) - len(self.basic_items)

    def resolve(self, combination: Iterable[int]) -> int | None:
        """Product id if the multiset matches a recipe, else None. Pure."""
        combo = canonical_combination(combination)
        for item_id in combo:
            if not 0 <= item_id < len(self.items):
                raise KeyError(f"unknown item id {item_id}")
        return self._recipe_by_combo.get(combo)

    def recipe_for(self, product_id: int) -> Recipe | None:
        """The unique recipe producing the item, None for basic items."""
        if not 0 <= product_id < len(self.items):
            raise KeyError(f"unknown item id {product_id}")
        return self._recipe_by_product.get(product_id)

    def score_of(self, item_id: int) -> int:
        if not 0 <= item_id < len(self.items):
            raise KeyError(f"unknown item id {item_id}")
        return self.items[item_id].score

    def recipe_set_hash(self) -> str:
        """Stable digest of the rule structure, independent of item names."""
        import hashlib

        payload = ";".join(
            f"{','.join(map(str, r.ingredients))}>{r.product}" for r in sorted(self.recipes, key=lambda r: r.product)
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        if len(self.level_sizes) < 1 or self.level_sizes[0] != N_BASIC_ITEMS:
            raise TaskTreeError(f"level 0 must hold exactly {N_BASIC_ITEMS} basic items, got sizes {self.level_sizes}")
        if sum(self.level_sizes) != len(self.items):
            raise TaskTreeError(
                f"level sizes {self.level_sizes} sum to {sum(self.level_sizes)} but {len(self.items)} items declared")
        for idx, item in enumerate(self.items):
            if item.id != idx:
                raise TaskTreeError(f"item ids must be dense 0..n-1; found id {item.id} at position {idx}")
            if not 0 <= item.level < len(self.level_sizes):
                raise TaskTreeError(f"item {item.id} ({item.name!r}) has undeclared level {item.level}")
        counts = [0] * len(self.level_sizes)
        for item in self.items:
            counts[item.level] += 1
        if tuple(counts) != self.level_sizes:
            raise TaskTreeError(f"per-level item counts {counts} do not match declared sizes {list(self.level_sizes)}")
        for item in self.items:
            if item.level == 0 and item.score != 0:
                raise TaskTreeError(f"basic item {item.id} ({item.name!r}) must score 0, has {item.score}")
        by_level_score = {}
        for item in self.items:
            if item.level >= 1:
                by_level_score.setdefault(item.level, item.score)
        for lo, hi in itertools.pairwise(sorted(by_level_score)):
            if by_level_score[hi] <= by_level_score[lo]:
                raise TaskTreeError(
                    f"scores must strictly increase with level: level {hi} scores {by_level_score[hi]} "
                    f"<= level {lo} scores {by_level_score[lo]} (score base {self.score_base} too small)")

        for recipe in self.recipes:
            if not 0 <= recipe.product < len(self.items):
                raise TaskTreeError(f"recipe {recipe.ingredients} names undeclared product id {recipe.product}")
            combo = canonical_combination(recipe.ingredients)
            if combo != tuple(recipe.ingredients):
                raise TaskTreeError(f"recipe for product {recipe.product} has non-canonical ingredients {recipe.ingredients}")
            product_level = self.items[recipe.product].level
            for ing in combo:
                if not 0 <= ing < len(self.items):
                    raise TaskTreeError(f"recipe for product {recipe.product} names undeclared ingredient id {ing}")
                if self.items[ing].level >= product_level:
                    raise TaskTreeError(
                        f"recipe for product {recipe.product} (level {product_level}) uses ingredient {ing} "
                        f"of level {self.items[ing].level}; ingredients must come from lower levels")
            if combo in self._recipe_by_combo:
                raise TaskTreeError(
                    f"duplicate ingredient multiset {combo}: products {self._recipe_by_combo[combo]} and {recipe.product}")
            if recipe.product in self._recipe_by_product:
                raise TaskTreeError(f"item {recipe.product} is the product of more than one recipe")
            self._recipe_by_combo[combo] = recipe.product
            self._recipe_by_product[recipe.product] = recipe

        basics = {it.id for it in self.items if it.level == 0}
        for item in self.items:
            if item.level > 0 and item.id not in self._recipe_by_product:
                raise TaskTreeError(f"item {item.id} ({item.name!r}) is non-basic but has no recipe")

        unreached = self._closure_check(basics)
        if unreached:
            first = self.items[min(unreached)]
            raise TaskTreeError(f"item {first.id} ({first.name!r}) is unreachable from the basic inventory")

    def _closure_check(self, basics: set[int]) -> set[int]:
        """Bottom-up closure; returns ids not reachable from the basic items."""
        owned = set(basics)
        for _ in range(len(self.level_sizes)):
            added = False
            for recipe in self.recipes:
                if recipe.product not in owned and all(i in owned for i in recipe.ingredients):
                    owned.add(recipe.product)
                    added = True
            if not added:
                break
        return {it.id for it in self.items} - owned

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "levels": list(self.level_sizes),
            "items": [{"id": it.id, "name": it.name, "level": it.level} for it in self.items],
            "recipes": [{"ingredients": list(r.ingredients), "product": r.product} for r in self.recipes],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def item_score(tree: TaskTree, item_id: int, base: float | None = None) -> int:
    """Score awarded on first acquisition: 0 at level 0, else round(base ** level)."""
    if not 0 <= item_id < tree.n_items:
        raise KeyError(f"unknown item id {item_id}")
    if base is None:
        return tree.items[item_id].score
    return _level_score(tree.items[item_id].level, base)


def _level_score(level: int, base: float) -> int:
    return 0 if level == 0 else int(round(base ** level))


def resolve_attempt(tree: TaskTree, combination: Iterable[int]) -> int | None:
    return tree.resolve(combination)


def _tree_from_dict(doc: dict, score_base: float) -> TaskTree:
    for key in doc:
        if key not in ("levels", "items", "recipes"):
            raise TaskTreeError(f"unknown top-level field {key!r} in task-tree document")
    try:
        levels = [int(x) for x in doc["levels"]]
        raw_items = doc["items"]
        raw_recipes = doc["recipes"]
    except KeyError as exc:
        raise TaskTreeError(f"task-tree document missing field {exc.args[0]!r}") from None
    items = []
    for rec in raw_items:
        try:
            level = int(rec["level"])
            items.append(Item(id=int(rec["id"]), name=str(rec["name"]), level=level,
                              score=_level_score(level, score_base)))
        except (KeyError, TypeError, ValueError) as exc:
            raise TaskTreeError(f"malformed item record {rec!r}: {exc}") from None
    recipes = []
    for rec in raw_recipes:
        try:
            recipes.append(Recipe(ingredients=canonical_combination(rec["ingredients"]), product=int(rec["product"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TaskTreeError(f"malformed recipe record {rec!r}: {exc}") from None
    return TaskTree(items, recipes, levels, score_base)


def load_task_tree(source: str | Path | dict, score_base: float = DEFAULT_SCORE_BASE) -> TaskTree:
    """Load and validate a task tree from a JSON document, file path, or dict."""
    if isinstance(source, dict):
        return _tree_from_dict(source, score_base)
    try:
        is_file = Path(str(source)).is_file()
    except (OSError, ValueError):
        is_file = False
    text = Path(source).read_text() if is_file else str(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskTreeError(f"task-tree document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise TaskTreeError("task-tree document must be a JSON object")
    return _tree_from_dict(doc, score_base)


def default_task_tree(score_base: float = DEFAULT_SCORE_BASE) -> TaskTree:
    """The bundled default tree: 184 items over levels (6,4,2,2,2,3,3,7,11,48,96)."""
    text = resources.files("craftevo").joinpath("data/default_tree.json").read_text()
    return load_task_tree(json.loads(text), score_base)


# -- random tree generation ---------------------------------------------------


def _generate_names(counts_by_level: Sequence[int], rng: np.random.Generator) -> list[str]:
    total = sum(counts_by_level) - N_BASIC_ITEMS
    pool = [f"{adj} {noun}" for adj in _NAME_ADJECTIVES for noun in _NAME_NOUNS]
    if total > len(pool):
        pool += [f"{name} mk{i}" for i in range(2, 2 + total // len(pool) + 1) for name in list(pool)]
    picks = rng.choice(len(pool), size=total, replace=False)
    return list(_BASIC_NAMES) + [pool[int(i)] for i in picks]


def _draw_recipe_size(rng: np.random.Generator) -> int:
    sizes = sorted(RECIPE_SIZE_WEIGHTS)
    probs = np.array([RECIPE_SIZE_WEIGHTS[s] for s in sizes])
    return int(rng.choice(sizes, p=probs / probs.sum()))


def _random_recipes(level_of: Sequence[int], level_sizes: Sequence[int],
                    rng: np.random.Generator) -> list[Recipe]:
    """Random rules: each non-basic item gets distinct ingredients from lower levels.

    At least one ingredient comes from the level directly below the product, so
    an item of level L only becomes craftable once level L-1 has been reached.
    """
    ids_by_level: list[list[int]] = [[] for _ in level_sizes]
    for item_id, level in enumerate(level_of):
        ids_by_level[level].append(item_id)
    seen: set[Combination] = set()
    recipes: list[Recipe] = []
    for product_id, level in enumerate(level_of):
        if level == 0:
            continue
        below = [i for lv in range(level) for i in ids_by_level[lv]]
        anchor_pool = ids_by_level[level - 1]
        for _ in range(10_000):
            k = _draw_recipe_size(rng)
            anchor = int(rng.choice(anchor_pool))
            rest_pool = [i for i in below if i != anchor]
            rest = [int(x) for x in rng.choice(len(rest_pool), size=k - 1, replace=False)] if k > 1 else []
            combo = canonical_combination([anchor] + [rest_pool[i] for i in rest])
            if combo not in seen:
                seen.add(combo)
                recipes.append(Recipe(ingredients=combo, product=product_id))
                break
        else:
            raise TaskTreeError(f"could not draw a unique recipe for product {product_id}")
    return recipes


#: Levels whose items act as the shared substitution commons in family rules.
FAMILY_COMMONS_LEVELS = 3
#: Below this product level, family templates are a single anchor (pair recipes).
FAMILY_PAIR_LEVELS = 3
#: Size of the coherent substitution classes the commons are partitioned into.
FAMILY_CLASS_SIZE = 4
#: From this product level up, rules form (anchor block x catalyst x class) grids.
FAMILY_GRID_LEVELS = 8
#: Shared catalyst ingredients per grid level.
FAMILY_GRID_CATALYSTS = 2


def _family_recipes(level_of: Sequence[int], level_sizes: Sequence[int],
                    rng: np.random.Generator) -> list[Recipe]:
    """Family-structured rules: groups of recipes share a template and vary one slot.

    Each family fixes a template (always including an item from the level
    directly below the products; two items from level FAMILY_PAIR_LEVELS up)
    and fills the remaining slot with members of one substitution class, a
    small fixed group of low-level commons items. Classes recur across many
    families, so their members keep co-occurring with the same partners;
    that shared context is what embedding-based substitution can exploit.
    """
    ids_by_level: list[list[int]] = [[] for _ in level_sizes]
    for item_id, level in enumerate(level_of):
        ids_by_level[level].append(item_id)
    commons = [i for lv in range(min(len(level_sizes) - 1, FAMILY_COMMONS_LEVELS))
               for i in ids_by_level[lv]]
    order = rng.permutation(len(commons))
    classes = [[commons[int(i)] for i in order[k:k + FAMILY_CLASS_SIZE]]
               for k in range(0, len(commons), FAMILY_CLASS_SIZE)]
    commons_set = set(commons)
    seen: set[Combination] = set()
    recipes: list[Recipe] = []
    for level in range(1, len(level_sizes)):
        products = ids_by_level[level]
        below = [i for lv in range(level) for i in ids_by_level[lv]]
        anchors = ids_by_level[level - 1]
        usable_classes = [cls for cls in classes if any(level_of[c] < level for c in cls)]
        if level >= FAMILY_GRID_LEVELS:
            recipes.extend(_grid_level_recipes(products, level, level_of, below, anchors,
                                               usable_classes, commons_set, seen, rng))
            continue
        idx = 0
        while idx < len(products):
            for _ in range(10_000):
                cls = usable_classes[int(rng.integers(0, len(usable_classes)))]
                anchor = int(rng.choice(anchors))
                template = [anchor]
                if level >= FAMILY_PAIR_LEVELS and len(below) >= 3:
                    # keep commons out of templates so they stay pure substitution slots
                    extra_pool = [i for i in below if i != anchor and i not in commons_set]
                    if not extra_pool:
                        extra_pool = [i for i in below if i != anchor]
                    template.append(int(extra_pool[rng.integers(0, len(extra_pool))]))
                pool = [c for c in cls if level_of[c] < level and c not in template]
                m = min(len(products) - idx, len(pool))
                combos = [canonical_combination(template + [c]) for c in pool[:m]]
                if m >= 1 and len(set(combos)) == m and not any(c in seen for c in combos):
                    break
            else:
                raise TaskTreeError(f"could not draw a unique recipe family at level {level}")
            for combo, product in zip(combos, products[idx:idx + m]):
                seen.add(combo)
                recipes.append(Recipe(ingredients=combo, product=product))
            idx += m
    return recipes


def _grid_level_recipes(products, level, level_of, below, anchors, classes, commons_set,
                        seen: set, rng: np.random.Generator) -> list[Recipe]:
    """Grid rules for a deep level: cells are {anchor, catalyst, class member}.

    Anchors are grouped into blocks that share a class, and the level shares a
    small catalyst set, so swapping any single slot of a known cell for a
    near neighbor (classmate, sibling catalyst, or block-mate anchor) lands on
    another valid cell of the grid.
    """
    catalyst_pool = [i for i in below if i not in commons_set and level_of[i] >= FAMILY_PAIR_LEVELS]
    if len(catalyst_pool) < FAMILY_GRID_CATALYSTS:
        catalyst_pool = [i for i in below if i not in commons_set] or list(below)
    picks = rng.choice(len(catalyst_pool), size=min(FAMILY_GRID_CATALYSTS, len(catalyst_pool)),
                       replace=False)
    catalysts = [catalyst_pool[int(p)] for p in picks]
    # one substitution class for the whole level: every anchor then shares its
    # co-occurrence contexts with every other, so anchors substitute for each
    # other just like class members do
    level_classes = [cls for cls in classes if any(level_of[c] < level for c in cls)]
    level_cls = level_classes[int(rng.integers(0, len(level_classes)))]
    recipes: list[Recipe] = []
    idx = 0
    anchor_cursor = 0
    anchor_order = [anchors[int(i)] for i in rng.permutation(len(anchors))]
    while idx < len(products):
        for attempt in range(10_000):
            cls = level_cls if attempt < 100 else level_classes[int(rng.integers(0, len(level_classes)))]
            members = [c for c in cls if level_of[c] < level]
            if not members:
                continue
            block = []
            for _j in range(max(1, len(anchor_order) // len(classes))):
                block.append(anchor_order[anchor_cursor % len(anchor_order)])
                anchor_cursor += 1
            combos, cells = [], []
            for anchor in block:
                for catalyst in catalysts:
                    for c in members:
                        if anchor == catalyst or anchor == c or catalyst == c:
                            continue
                        combo = canonical_combination([anchor, catalyst, c])
                        if combo not in seen and combo not in combos:
                            combos.append(combo)
                            cells.append(combo)
            if cells:
                break
        else:
            raise TaskTreeError(f"could not draw a unique grid family at level {level}")
        take = min(len(cells), len(products) - idx)
        for combo, product in zip(cells[:take], products[idx:idx + take]):
            seen.add(combo)
            recipes.append(Recipe(ingredients=combo, product=product))
        idx += take
    return recipes


def _build_tree(level_sizes: Sequence[int], seed: int, score_base: float, family: bool) -> TaskTree:
    level_sizes = [int(s) for s in level_sizes]
    if not level_sizes or level_sizes[0] != N_BASIC_ITEMS or any(s < 1 for s in level_sizes):
        raise TaskTreeError(f"level sizes must start at {N_BASIC_ITEMS} and be positive, got {level_sizes}")
    rng = np.random.default_rng(seed)
    level_of = [lv for lv, size in enumerate(level_sizes) for _ in range(size)]
    names = _generate_names(level_sizes, rng)
    items = [Item(id=i, name=names[i], level=level_of[i], score=_level_score(level_of[i], score_base))
             for i in range(len(level_of))]
    recipes = _family_recipes(level_of, level_sizes, rng) if family else _random_recipes(level_of, level_sizes, rng)
    return TaskTree(items, recipes, level_sizes, score_base)


def build_random_tree(level_sizes: Sequence[int], seed: int,
                      score_base: float = DEFAULT_SCORE_BASE) -> TaskTree:
    """A fresh tree with the given level sizes and unstructured random rules."""
    return _build_tree(level_sizes, seed, score_base, family=False)


def build_family_tree(level_sizes: Sequence[int], seed: int,
                      score_base: float = DEFAULT_SCORE_BASE) -> TaskTree:
    """A fresh tree with family-structured rules (the bundled default tree's shape)."""
    return _build_tree(level_sizes, seed, score_base, family=True)


def generate_task_variant(tree: TaskTree, mode: str, level_sizes: Sequence[int] | None = None,
                          seed: int = 0) -> TaskTree:
    """Task variations: rewire rules in place (shuffle_rules) or rebuild with new level sizes (resize)."""
    if mode == "shuffle_rules":
        rng = np.random.default_rng(seed)
        level_of = [it.level for it in tree.items]
        recipes = _random_recipes(level_of, tree.level_sizes, rng)
        return TaskTree(tree.items, recipes, tree.level_sizes, tree.score_base)
    if mode == "resize":
        if level_sizes is None:
            raise TaskTreeError("resize mode requires level_sizes")
        return build_random_tree(level_sizes, seed, tree.score_base)
    raise TaskTreeError(f"unknown variant mode {mode!r}")
