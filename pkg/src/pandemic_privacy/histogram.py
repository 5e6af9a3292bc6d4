"""
Universal-histogram release of subgroup case counts.

The attributes define a tree: layer 0 is the population total, layer ``j``
splits every node of layer ``j-1`` by the levels of attribute ``j``. Every
layer is released with Laplace noise, then two passes turn the noisy counts
into a consistent set:

* a bottom-up weighted average of each node's own noisy count and the sum of
  its children's estimates (``z``), and
* a top-down pass distributing each parent's residual evenly over its
  children (``h``), after which every parent equals the sum of its children.

Nodes are stored flat, layer by layer, in lexicographic order of attribute
levels (first attribute varies slowest).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, InvalidInputError, InvalidParameterError, StateError
from .privacy import PrivacyBudget, RngLike, ensure_rng

ROOT_PATH = "*"


@dataclass(frozen=True)
class Attribute:
    name: str
    levels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if len(self.levels) < 2:
            raise InvalidInputError(f"attribute {self.name!r} needs at least two levels")
        if len(set(self.levels)) != len(self.levels):
            raise InvalidInputError(f"attribute {self.name!r} has duplicate levels")


@dataclass(frozen=True)
class TreeSpec:
    """Attribute hierarchy, root to leaves, plus the per-layer budget split.

    ``allocation`` holds one weight per layer (the root counts as a layer) and
    defaults to uniform ``1/h``.
    """

    attributes: tuple[Attribute, ...]
    allocation: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        attrs = tuple(a if isinstance(a, Attribute) else Attribute(a[0], a[1]) for a in self.attributes)
        if not attrs:
            raise InvalidInputError("tree needs at least one attribute")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise InvalidInputError("attribute names must be unique")
        object.__setattr__(self, "attributes", attrs)
        if self.allocation is not None:
            object.__setattr__(self, "allocation", tuple(float(w) for w in self.allocation))
            _check_allocation(self.allocation, self.depth)

    @property
    def depth(self) -> int:
        """Number of noisy layers ``h`` (root included)."""
        return len(self.attributes) + 1

    @property
    def fanouts(self) -> tuple[int, ...]:
        return tuple(len(a.levels) for a in self.attributes)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        sizes = [1]
        for k in self.fanouts:
            sizes.append(sizes[-1] * k)
        return tuple(sizes)

    @property
    def n_leaves(self) -> int:
        return self.layer_sizes[-1]

    def weights(self) -> tuple[float, ...]:
        if self.allocation is None:
            return (1.0 / self.depth,) * self.depth
        return self.allocation

    @classmethod
    def from_dict(cls, doc: dict) -> TreeSpec:
        try:
            attrs = tuple(Attribute(a["name"], tuple(a["levels"])) for a in doc["attributes"])
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed tree spec: {exc}") from exc
        alloc = doc.get("allocation")
        return cls(attrs, tuple(alloc) if alloc is not None else None)

    def to_dict(self) -> dict:
        doc = {"attributes": [{"name": a.name, "levels": list(a.levels)} for a in self.attributes]}
        if self.allocation is not None:
            doc["allocation"] = list(self.allocation)
        return doc


def _check_allocation(allocation: Sequence[float], depth: int) -> None:
    if len(allocation) != depth:
        raise ContractError(f"allocation needs {depth} layer weights, got {len(allocation)}")
    if any(not math.isfinite(w) or w <= 0 for w in allocation):
        raise ContractError("allocation weights must be positive and finite")
    if abs(math.fsum(allocation) - 1.0) > 1e-9:
        raise ContractError(f"allocation must sum to 1, got {math.fsum(allocation)}")


@dataclass(frozen=True)
class HistogramTree:
    """Flat layer-major storage of the count tree.

    ``true`` is always present; ``noisy``, ``z`` and ``h`` are filled by
    :func:`sanitize_tree` (or the individual passes) and are ``None`` before.
    """

    spec: TreeSpec
    true: np.ndarray
    noisy: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        offs = [0]
        for size in self.spec.layer_sizes:
            offs.append(offs[-1] + size)
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def n_nodes(self) -> int:
        return self.offsets[-1]

    @property
    def depth(self) -> int:
        return self.spec.depth

    def layer_slice(self, layer: int) -> slice:
        if not 0 <= layer < self.depth:
            raise InvalidParameterError(f"layer must be in [0, {self.depth - 1}], got {layer}")
        return slice(self.offsets[layer], self.offsets[layer + 1])

    def layer_of(self, node: int) -> int:
        for j in range(self.depth):
            if node < self.offsets[j + 1]:
                return j
        raise IndexError(node)

    def height(self, node: int) -> int:
        """Subtree height, leaves at 1."""
        return self.depth - self.layer_of(node)

    def children(self, node: int) -> range:
        j = self.layer_of(node)
        if j == self.depth - 1:
            return range(0)
        k = self.spec.fanouts[j]
        pos = node - self.offsets[j]
        start = self.offsets[j + 1] + pos * k
        return range(start, start + k)

    def path(self, node: int) -> str:
        j = self.layer_of(node)
        if j == 0:
            return ROOT_PATH
        pos = node - self.offsets[j]
        parts = []
        for attr in reversed(self.spec.attributes[:j]):
            pos, idx = divmod(pos, len(attr.levels))
            parts.append(f"{attr.name}={attr.levels[idx]}")
        return "/".join(reversed(parts))

    def leaf_labels(self) -> list[tuple[str, ...]]:
        leaves = range(self.offsets[-2], self.offsets[-1])
        return [tuple(p.split("=", 1)[1] for p in self.path(i).split("/")) for i in leaves]


def _aggregate(leaves: np.ndarray, spec: TreeSpec) -> np.ndarray:
    """Stack every layer's sums of ``leaves``, root first."""
    layers = [leaves]
    for k in reversed(spec.fanouts):
        layers.append(layers[-1].reshape(-1, k).sum(axis=1))
    return np.concatenate(layers[::-1])


def build_tree(leaf_counts, spec: TreeSpec) -> HistogramTree:
    counts = np.asarray(leaf_counts)
    if counts.ndim != 1 or counts.shape[0] != spec.n_leaves:
        raise InvalidInputError(f"expected {spec.n_leaves} leaf counts, got shape {counts.shape}")
    if counts.size and (np.any(counts < 0) or np.any(counts != np.round(counts))):
        raise InvalidInputError("leaf counts must be nonnegative integers")
    return HistogramTree(spec, _aggregate(counts.astype(np.int64), spec))


def layer_noise_scales(spec: TreeSpec, budget: PrivacyBudget, allocation=None) -> np.ndarray:
    """Laplace scale for each layer: 1 / (weight_j * epsilon).

    Every record falls in exactly one node per layer, so a layer's counts have
    L1 sensitivity 1 and layers compose sequentially to ``epsilon``.
    """
    weights = spec.weights() if allocation is None else tuple(float(w) for w in allocation)
    _check_allocation(weights, spec.depth)
    return np.array([1.0 / (w * budget.epsilon) for w in weights])


def add_layer_noise(tree: HistogramTree, budget: PrivacyBudget, rng: RngLike, allocation=None) -> HistogramTree:
    scales = layer_noise_scales(tree.spec, budget, allocation)
    per_node = np.repeat(scales, tree.spec.layer_sizes)
    noise = ensure_rng(rng).laplace(0.0, 1.0, size=tree.n_nodes) * per_node
    return replace(tree, noisy=tree.true + noise, z=None, h=None)


def weighted_z_pass(tree: HistogramTree) -> HistogramTree:
    if tree.noisy is None:
        raise StateError("noisy counts missing; run add_layer_noise first")
    z = np.empty(tree.n_nodes)
    leaves = tree.layer_slice(tree.depth - 1)
    z[leaves] = tree.noisy[leaves]
    for j in range(tree.depth - 2, -1, -1):
        k = tree.spec.fanouts[j]
        level = tree.depth - j
        denom = k**level - 1
        w_self = (k**level - k ** (level - 1)) / denom
        w_kids = (k ** (level - 1) - 1) / denom
        child_sums = z[tree.layer_slice(j + 1)].reshape(-1, k).sum(axis=1)
        z[tree.layer_slice(j)] = w_self * tree.noisy[tree.layer_slice(j)] + w_kids * child_sums
    return replace(tree, z=z, h=None)


def consistency_h_pass(tree: HistogramTree) -> HistogramTree:
    if tree.z is None:
        raise StateError("z estimates missing; run weighted_z_pass first")
    z = tree.z
    h = np.empty(tree.n_nodes)
    h[tree.layer_slice(0)] = z[tree.layer_slice(0)]
    for j in range(tree.depth - 1):
        k = tree.spec.fanouts[j]
        parents = h[tree.layer_slice(j)]
        kids_z = z[tree.layer_slice(j + 1)].reshape(-1, k)
        residual = (parents - kids_z.sum(axis=1)) / k
        h[tree.layer_slice(j + 1)] = (kids_z + residual[:, None]).ravel()
    return replace(tree, h=h)


def sanitize_tree(
    tree: HistogramTree,
    budget: PrivacyBudget,
    rng: RngLike,
    allocation: Optional[Sequence[float]] = None,
) -> HistogramTree:
    """Noisy layers, weighted bottom-up estimate, then top-down consistency.

    Total privacy loss is ``budget.epsilon``: nodes within a layer are disjoint
    (parallel composition) and layers add up (sequential composition).
    """
    noisy = add_layer_noise(tree, budget, rng, allocation)
    return consistency_h_pass(weighted_z_pass(noisy))


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def postprocess_counts(tree: HistogramTree, mode: str = "raw") -> HistogramTree:
    """``raw`` keeps the real-valued release; ``rounded-nonnegative`` integerizes the leaves.

    Rounding is half away from zero, followed by clamping at 0; internal nodes
    are recomputed from the leaves so the tree stays consistent.
    """
    if tree.h is None:
        raise StateError("consistent counts missing; sanitize the tree first")
    if mode == "raw":
        return tree
    if mode != "rounded-nonnegative":
        raise InvalidParameterError(f"unknown postprocess mode {mode!r}")
    leaves = np.maximum(round_half_away(tree.h[tree.layer_slice(tree.depth - 1)]), 0.0)
    return replace(tree, h=_aggregate(leaves, tree.spec))


def query_marginal(tree: HistogramTree, layer: int) -> np.ndarray:
    if tree.h is None:
        raise StateError("consistent counts missing; sanitize the tree first")
    return tree.h[tree.layer_slice(layer)].copy()


def max_inconsistency(tree: HistogramTree) -> float:
    """Largest relative gap |h[u] - sum h[children]| / max(1, |h[u]|) over internal nodes."""
    worst = 0.0
    for j in range(tree.depth - 1):
        k = tree.spec.fanouts[j]
        parents = tree.h[tree.layer_slice(j)]
        kids = tree.h[tree.layer_slice(j + 1)].reshape(-1, k).sum(axis=1)
        gap = np.abs(parents - kids) / np.maximum(1.0, np.abs(parents))
        worst = max(worst, float(gap.max()))
    return worst


# -- file formats ----------------------------------------------------------


def load_tree_spec(path) -> TreeSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return TreeSpec.from_dict(doc)


def load_leaf_counts(path, spec: TreeSpec) -> np.ndarray:
    """Read a leaf-count CSV with one column per attribute plus ``count``.

    Rows may come in any order; each leaf must appear exactly once.
    """
    names = [a.name for a in spec.attributes]
    index = {}
    for pos in range(spec.n_leaves):
        key, rest = [], pos
        for attr in reversed(spec.attributes):
            rest, idx = divmod(rest, len(attr.levels))
            key.append(attr.levels[idx])
        index[tuple(reversed(key))] = pos

    counts = np.full(spec.n_leaves, -1, dtype=np.int64)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in names + ["count"] if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidInputError(f"{path}: line 1: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            key = tuple(row[n] for n in names)
            if key not in index:
                raise InvalidInputError(f"{path}: line {line}: unknown subgroup {key}")
            try:
                value = float(row["count"])
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}: line {line}: count {row['count']!r} is not a number") from None
            if value < 0 or value != int(value):
                raise InvalidInputError(f"{path}: line {line}: count must be a nonnegative integer")
            pos = index[key]
            if counts[pos] >= 0:
                raise InvalidInputError(f"{path}: line {line}: duplicate subgroup {key}")
            counts[pos] = int(value)
    if np.any(counts < 0):
        absent = [k for k, p in index.items() if counts[p] < 0]
        raise InvalidInputError(f"{path}: missing subgroups {absent}")
    return counts


def tree_rows(tree: HistogramTree, include_truth: bool = False, replicate: int = 0) -> list[list]:
    """CSV rows ``replicate, node_path, layer, [true], h`` in node order."""
    if tree.h is None:
        raise StateError("consistent counts missing; sanitize the tree first")
    rows = []
    for i in range(tree.n_nodes):
        row = [replicate, tree.path(i), tree.layer_of(i)]
        if include_truth:
            row.append(int(tree.true[i]))
        row.append(repr(float(tree.h[i])))
        rows.append(row)
    return rows


def tree_header(include_truth: bool = False) -> list[str]:
    return ["replicate", "node_path", "layer"] + (["true"] if include_truth else []) + ["h"]
