"""
Contact-tracing networks: construction, sanitization and structural statistics.

Two sanitizers are provided. ``sanitize_gi`` perturbs every person's location
with the planar Laplace mechanism and rebuilds the proximity graph.
``sanitize_rr`` applies randomized response directly to the adjacency
matrix, flipping each pair's edge status with probability 1 / (1 + e^eps).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .geo import as_coords
from .privacy import BudgetKind, PrivacyBudget, RngLike, ensure_rng, perturb_locations


@dataclass(frozen=True)
class ContactGraph:
    """Undirected simple graph on nodes ``0..n-1``; edges stored as sorted ``(i, j)`` with ``i < j``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise InvalidInputError("node count must be nonnegative")
        clean = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidInputError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidInputError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> ContactGraph:
        adj = np.asarray(adj, dtype=bool)
        i, j = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], frozenset(zip(i.tolist(), j.tolist())))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            idx = np.array(sorted(self.edges))
            adj[idx[:, 0], idx[:, 1]] = True
            adj[idx[:, 1], idx[:, 0]] = True
        return adj

    def neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(v) for v in nbrs]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class CTNParams:
    cutoff: float
    epsilon: PrivacyBudget

    def __post_init__(self):
        if not (math.isfinite(self.cutoff) and self.cutoff > 0):
            raise InvalidParameterError(f"contact distance must be positive, got {self.cutoff!r}")


def _check_cutoff(a: float) -> float:
    a = float(a)
    if not (math.isfinite(a) and a > 0):
        raise InvalidParameterError(f"contact distance must be positive, got {a!r}")
    return a


def build_ctn(locations, a: float) -> ContactGraph:
    """Edge between every pair at Euclidean distance <= ``a``."""
    a = _check_cutoff(a)
    coords = as_coords(locations)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    adj = dist <= a
    np.fill_diagonal(adj, False)
    return ContactGraph.from_adjacency(adj)


def _as_budget(epsilon, kind: BudgetKind) -> PrivacyBudget:
    if isinstance(epsilon, PrivacyBudget):
        return epsilon
    return PrivacyBudget(epsilon, kind)


def sanitize_gi(locations, epsilon, a: float, rng: RngLike, return_locations: bool = False):
    """Perturb each location once at ``epsilon`` per unit distance, then rebuild the graph.

    With people treated as independent, the release costs ``epsilon`` per node.
    """
    budget = _as_budget(epsilon, BudgetKind.PER_NODE)
    if budget.kind not in (BudgetKind.PER_NODE, BudgetKind.PER_UNIT_DISTANCE):
        raise InvalidParameterError(f"GI sanitization needs a per-node budget, got {budget.kind.value!r}")
    a = _check_cutoff(a)
    noisy = perturb_locations(locations, PrivacyBudget(budget.epsilon, BudgetKind.PER_UNIT_DISTANCE), rng)
    g = build_ctn(noisy, a)
    return (g, noisy) if return_locations else g


def flip_probability(epsilon: float) -> float:
    """Randomized-response flip probability 1 / (1 + e^eps), overflow safe."""
    eps = float(epsilon)
    if eps < 0 or math.isnan(eps):
        raise InvalidParameterError(f"epsilon must be nonnegative, got {epsilon!r}")
    t = math.exp(-eps)
    return t / (1.0 + t)


def flip_edges(g: ContactGraph, flip_prob, rng: RngLike) -> ContactGraph:
    """Flip every unordered pair independently; ``flip_prob`` is a scalar or an (n, n) matrix."""
    iu, ju = np.triu_indices(g.n, 1)
    probs = np.asarray(flip_prob, dtype=float)
    if probs.ndim == 2:
        probs = probs[iu, ju]
    if np.any((probs < 0) | (probs > 1)):
        raise InvalidParameterError("flip probabilities must lie in [0, 1]")
    adj = g.adjacency()
    current = adj[iu, ju]
    flips = ensure_rng(rng).random(iu.shape[0]) < probs
    out = np.zeros_like(adj)
    keep = current ^ flips
    out[iu[keep], ju[keep]] = True
    return ContactGraph.from_adjacency(out | out.T)


def sanitize_rr(
    g: ContactGraph,
    epsilon,
    rng: RngLike,
    pair_epsilon: Optional[np.ndarray] = None,
    test_mode: bool = False,
) -> ContactGraph:
    """Edge-level randomized response.

    Each pair keeps its status with probability e^eps / (1 + e^eps). The
    release costs ``epsilon`` per pair of nodes; ``pair_epsilon`` (an n x n
    matrix, upper triangle used) overrides the uniform budget. ``epsilon = 0``
    (a fair coin per pair, no information) is only allowed with ``test_mode``.
    """
    if pair_epsilon is not None:
        pe = np.asarray(pair_epsilon, dtype=float)
        if pe.shape != (g.n, g.n):
            raise InvalidInputError(f"pair_epsilon must be {g.n}x{g.n}, got {pe.shape}")
        iu = np.triu_indices(g.n, 1)
        vals = pe[iu]
        if np.any(~np.isfinite(vals)) or np.any(vals < 0) or (not test_mode and np.any(vals == 0)):
            raise InvalidParameterError("pair budgets must be positive and finite")
        probs = np.zeros((g.n, g.n))
        probs[iu] = np.exp(-vals) / (1.0 + np.exp(-vals))
        return flip_edges(g, probs, rng)
    if isinstance(epsilon, PrivacyBudget):
        eps = epsilon.epsilon
    else:
        eps = float(epsilon)
        if eps == 0 and test_mode:
            return flip_edges(g, 0.5, rng)
        eps = PrivacyBudget(eps, BudgetKind.PER_EDGE_PAIR).epsilon
    return flip_edges(g, flip_probability(eps), rng)


def expected_rr_edges(m: int, n: int, epsilon: float) -> float:
    """Mean edge count after randomized response: m(1 - pi) + (M - m) pi."""
    total = n * (n - 1) // 2
    pi = flip_probability(epsilon)
    return m * (1.0 - pi) + (total - m) * pi


# -- structural statistics ---------------------------------------------------


def count_edges(g: ContactGraph) -> int:
    return len(g.edges)


def count_triangles(g: ContactGraph) -> int:
    """Each unordered triple with all three edges, counted once."""
    a = g.adjacency().astype(np.int64)
    return int(np.trace(a @ a @ a) // 6)


def _bfs(nbrs: list[list[int]], source: int):
    """Distances, shortest-path counts and visit order from ``source``."""
    n = len(nbrs)
    dist = [-1] * n
    sigma = [0] * n
    dist[source] = 0
    sigma[source] = 1
    order = []
    queue = deque([source])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in nbrs[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
    return dist, sigma, order


def geodesic_matrix(g: ContactGraph) -> np.ndarray:
    """All-pairs hop distances; -1 marks unreachable pairs."""
    nbrs = g.neighbors()
    return np.array([_bfs(nbrs, s)[0] for s in range(g.n)], dtype=np.int64).reshape(g.n, g.n)


def betweenness(g: ContactGraph) -> np.ndarray:
    """Sum over unordered pairs {j, j'} not containing i of sigma_jj'(i) / sigma_jj'.

    Brandes' accumulation; no normalization.
    """
    nbrs = g.neighbors()
    bc = np.zeros(g.n)
    for s in range(g.n):
        dist, sigma, order = _bfs(nbrs, s)
        delta = [0.0] * g.n
        for w in reversed(order):
            for v in nbrs[w]:
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    # every unordered pair was visited from both endpoints
    return bc / 2.0


def closeness(g: ContactGraph) -> np.ndarray:
    """1 / (sum of distances to reachable nodes); isolated nodes get 0."""
    dist = geodesic_matrix(g)
    reach = np.where(dist > 0, dist, 0).sum(axis=1)
    out = np.zeros(g.n)
    nz = reach > 0
    out[nz] = 1.0 / reach[nz]
    return out


def degree_distribution(g: ContactGraph) -> np.ndarray:
    """Fraction of nodes with degree k, for k = 0..n-1."""
    if g.n == 0:
        return np.zeros(0)
    deg = g.adjacency().sum(axis=1)
    return np.bincount(deg, minlength=g.n)[: g.n] / g.n


def espd(g: ContactGraph) -> np.ndarray:
    """Edgewise shared partners: fraction of edges whose endpoints share k neighbours, k = 0..n-2.

    All zeros for an edgeless graph.
    """
    size = max(g.n - 1, 1)
    if not g.edges:
        return np.zeros(size)
    a = g.adjacency().astype(np.int64)
    common = a @ a
    idx = np.array(g.sorted_edges())
    shared = common[idx[:, 0], idx[:, 1]]
    return np.bincount(shared, minlength=size)[:size] / len(g.edges)


def gdd(g: ContactGraph) -> np.ndarray:
    """Geodesic distance distribution over the C(n, 2) unordered pairs.

    Entry k (k = 1..n-1) is the fraction of pairs at distance k; entry 0 is
    always 0; the final entry (index n) is the unreachable fraction.
    """
    out = np.zeros(g.n + 1)
    pairs = g.n * (g.n - 1) // 2
    if pairs == 0:
        return out
    dist = geodesic_matrix(g)[np.triu_indices(g.n, 1)]
    finite = dist[dist > 0]
    out[: g.n] = np.bincount(finite, minlength=g.n)[: g.n]
    out[g.n] = np.count_nonzero(dist < 0)
    return out / pairs


@dataclass(frozen=True)
class GraphStats:
    num_edges: int
    num_triangles: int
    betweenness: np.ndarray
    closeness: np.ndarray
    dd: np.ndarray
    espd: np.ndarray
    gdd: np.ndarray

    def to_dict(self) -> dict:
        return {
            "num_edges": self.num_edges,
            "num_triangles": self.num_triangles,
            "betweenness": [float(v) for v in self.betweenness],
            "closeness": [float(v) for v in self.closeness],
            "degree_distribution": [float(v) for v in self.dd],
            "espd": [float(v) for v in self.espd],
            "gdd": {
                "by_distance": [float(v) for v in self.gdd[:-1]],
                "unreachable": float(self.gdd[-1]),
            },
        }


def graph_stats(g: ContactGraph) -> GraphStats:
    return GraphStats(
        num_edges=count_edges(g),
        num_triangles=count_triangles(g),
        betweenness=betweenness(g),
        closeness=closeness(g),
        dd=degree_distribution(g),
        espd=espd(g),
        gdd=gdd(g),
    )


STATS_CONVENTIONS = {
    "betweenness": "unordered pairs, endpoints excluded, unnormalized",
    "closeness": "reciprocal of summed distances to reachable nodes; isolated nodes 0",
    "espd": "shared-partner counts per edge, k = 0..n-2",
    "gdd": "fractions of the C(n,2) pairs by hop distance; index 0 unused; separate unreachable bucket",
}


# -- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class ClusterSpec:
    """Gaussian-mixture layout of people over a square region.

    Cluster centres are uniform in ``[0, region]^2``; people are dealt to
    clusters in equal shares (random order) and displaced by N(0, spread^2)
    per axis. With 100 people and a 6-unit cutoff the defaults give about 39
    contacts (SD about 8) and 7-8 triangles.
    """

    n_clusters: int = 5
    spread: float = 15.0
    region: float = 500.0

    def __post_init__(self):
        if self.n_clusters < 1 or self.spread <= 0 or self.region <= 0:
            raise InvalidParameterError("cluster spec needs n_clusters >= 1 and positive spread/region")


def simulate_locations(n: int, spec: ClusterSpec, rng: RngLike) -> np.ndarray:
    if n < 2:
        raise InvalidParameterError(f"need at least two people, got {n}")
    gen = ensure_rng(rng)
    centres = gen.uniform(0.0, spec.region, size=(spec.n_clusters, 2))
    member = gen.permutation(np.arange(n) % spec.n_clusters)
    return centres[member] + gen.normal(0.0, spec.spread, size=(n, 2))


def simulate_ctn(n: int, spec: ClusterSpec, a: float, rng: RngLike):
    coords = simulate_locations(n, spec, rng)
    return coords, build_ctn(coords, a)


def mean_sd(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd
