"""
Doppelganger release of case locations.

Instead of a true location, ``K`` independently geo-indistinguishable copies
are published, each perturbed with ``epsilon / K`` so the set costs
``epsilon`` in total. A set is *effective* when at least one copy lands
strictly within ``r`` of the truth and at least one strictly beyond ``r'``.
The attacker model averages the copies and succeeds when that centroid lies
within ``l`` of the truth.

Monte-Carlo estimators work in a frame centred on the true location; the
mechanism is translation invariant, so the origin is arbitrary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, InvalidInputError, InvalidParameterError
from .geo import GeoPoint, as_coords
from .privacy import BudgetKind, PrivacyBudget, RngLike, ensure_rng, sample_planar_offsets

# replicates processed per vectorized block in the estimators
_BLOCK = 50_000


@dataclass(frozen=True)
class DoppelgangerParams:
    """Set size, utility radius ``r``, confusion radius ``r_prime`` and total budget.

    ``K == 1`` is accepted only so the estimators can compute the single
    release reference baseline; :func:`generate_doppelganger` rejects it.
    """

    K: int
    r: float
    r_prime: float
    epsilon: PrivacyBudget

    def __post_init__(self):
        if isinstance(self.epsilon, (int, float)):
            object.__setattr__(self, "epsilon", PrivacyBudget(self.epsilon, BudgetKind.PER_UNIT_DISTANCE))
        if self.epsilon.kind is not BudgetKind.PER_UNIT_DISTANCE:
            raise ContractError("doppelganger budget must be per-unit-distance")
        if int(self.K) != self.K or self.K < 1:
            raise ContractError(f"K must be a positive integer, got {self.K!r}")
        r, rp = float(self.r), float(self.r_prime)
        if not (math.isfinite(r) and r > 0):
            raise InvalidParameterError(f"r must be positive, got {self.r!r}")
        if not (math.isfinite(rp) and rp >= r):
            raise InvalidParameterError(f"r_prime must be >= r, got {self.r_prime!r}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "r_prime", rp)

    @property
    def per_point_budget(self) -> PrivacyBudget:
        return self.epsilon.split(self.K)

    @property
    def r_epsilon(self) -> float:
        return self.r * self.epsilon.epsilon


@dataclass(frozen=True)
class DoppelgangerSet:
    origin_id: object
    points: tuple[GeoPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def K(self) -> int:
        return len(self.points)

    def coords(self) -> np.ndarray:
        return as_coords(self.points)


@dataclass(frozen=True)
class EvaluationResult:
    """A Monte-Carlo proportion with its binomial standard error."""

    estimate: float
    reps: int

    @property
    def std_error(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.reps)


def generate_doppelganger(p: GeoPoint, params: DoppelgangerParams, rng: RngLike, origin_id=None) -> DoppelgangerSet:
    if params.K < 2:
        raise ContractError(f"a doppelganger set needs K >= 2, got K={params.K}")
    offsets = sample_planar_offsets(params.per_point_budget.epsilon, params.K, rng)
    pts = tuple(GeoPoint(p.x + dx, p.y + dy) for dx, dy in offsets)
    return DoppelgangerSet(origin_id, pts)


def generate_many(origins, params: DoppelgangerParams, rng: RngLike) -> np.ndarray:
    """Doppelganger coordinates for many origins, shape (n_origins, K, 2).

    Origins are independent persons, each spending its own ``epsilon``.
    """
    if params.K < 2:
        raise ContractError(f"a doppelganger set needs K >= 2, got K={params.K}")
    coords = as_coords(origins)
    gen = ensure_rng(rng)
    offsets = sample_planar_offsets(params.per_point_budget.epsilon, coords.shape[0] * params.K, gen)
    return coords[:, None, :] + offsets.reshape(coords.shape[0], params.K, 2)


def is_effective(p: GeoPoint, dset: DoppelgangerSet, r: float, r_prime: float) -> bool:
    if not (0 < r <= r_prime):
        raise InvalidParameterError("need 0 < r <= r_prime")
    d = np.hypot(*(dset.coords() - [p.x, p.y]).T)
    return bool(np.any(d < r) and np.any(d > r_prime))


def infer_centroid(dset: DoppelgangerSet) -> GeoPoint:
    if not dset.points:
        raise InvalidInputError("cannot take the centroid of an empty set")
    cx, cy = dset.coords().mean(axis=0)
    return GeoPoint(cx, cy)


def infer_geometric_median(dset: DoppelgangerSet, tol: float = 1e-9, max_iter: int = 500) -> GeoPoint:
    """Alternative attacker: Weiszfeld iterations for the geometric median."""
    pts = dset.coords()
    if pts.shape[0] == 0:
        raise InvalidInputError("cannot take the median of an empty set")
    est = pts.mean(axis=0)
    for _ in range(max_iter):
        d = np.hypot(*(pts - est).T)
        if np.any(d < tol):
            return GeoPoint(*pts[np.argmin(d)])
        w = 1.0 / d
        new = (pts * w[:, None]).sum(axis=0) / w.sum()
        if np.hypot(*(new - est)) < tol:
            est = new
            break
        est = new
    return GeoPoint(*est)


def _simulate(params: DoppelgangerParams, reps: int, rng: RngLike, cutoff: float):
    """Count effective sets and successful centroid attacks over ``reps`` draws.

    At ``K == 1`` the effectiveness event degenerates to "the single copy
    lands within r", which makes the two rates coincide when ``l == r``.
    """
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    gen = ensure_rng(rng)
    eps_point = params.per_point_budget.epsilon
    eff = reid = 0
    done = 0
    while done < reps:
        n = min(_BLOCK, reps - done)
        off = sample_planar_offsets(eps_point, n * params.K, gen).reshape(n, params.K, 2)
        dist = np.hypot(off[..., 0], off[..., 1])
        inside = np.any(dist < params.r, axis=1)
        if params.K == 1:
            eff += int(inside.sum())
        else:
            eff += int((inside & np.any(dist > params.r_prime, axis=1)).sum())
        centroid = off.mean(axis=1)
        reid += int((np.hypot(centroid[:, 0], centroid[:, 1]) <= cutoff).sum())
        done += n
    return eff, reid


def _cutoff(params: DoppelgangerParams, cutoff: Optional[float]) -> float:
    l = params.r if cutoff is None else float(cutoff)
    if not (math.isfinite(l) and l > 0):
        raise InvalidParameterError(f"cutoff must be positive, got {cutoff!r}")
    return l


def estimate_effectiveness(params: DoppelgangerParams, reps: int, rng: RngLike) -> EvaluationResult:
    eff, _ = _simulate(params, reps, rng, params.r)
    return EvaluationResult(eff / reps, reps)


def estimate_reidentification(
    params: DoppelgangerParams, cutoff: Optional[float], reps: int, rng: RngLike
) -> EvaluationResult:
    """Centroid-attack success rate; the cutoff defaults to ``r``."""
    l = _cutoff(params, cutoff)
    _, reid = _simulate(params, reps, rng, l)
    return EvaluationResult(reid / reps, reps)


def evaluate(params: DoppelgangerParams, cutoff: Optional[float], reps: int, rng: RngLike):
    """Effectiveness and re-identification rates from one shared set of draws."""
    l = _cutoff(params, cutoff)
    eff, reid = _simulate(params, reps, rng, l)
    return EvaluationResult(eff / reps, reps), EvaluationResult(reid / reps, reps)


def alpha_beta_gap(params: DoppelgangerParams, cutoff: Optional[float], reps: int, rng: RngLike) -> float:
    """(1 - beta) - (1 - alpha) estimated on shared replicates.

    Positive values mean the set is more useful than it is revealing.
    """
    eff, reid = evaluate(params, cutoff, reps, rng)
    return eff.estimate - reid.estimate


def within_radius_probability(epsilon: float, r: float) -> float:
    """P(planar Laplace offset < r) = 1 - exp(-eps r)(1 + eps r)."""
    t = epsilon * r
    return -math.expm1(-t) - t * math.exp(-t)


def closed_form_effectiveness(K: int, epsilon: float, r: float) -> float:
    """Exact effectiveness when ``r == r'``: one copy inside and one outside."""
    if K < 2:
        raise ContractError(f"effectiveness needs K >= 2, got K={K}")
    if not epsilon * r > 0:
        raise InvalidParameterError("epsilon * r must be positive")
    p = within_radius_probability(epsilon / K, r)
    return 1.0 - p**K - (1.0 - p) ** K


# -- hot-spot maps ---------------------------------------------------------


@dataclass(frozen=True)
class HeatGrid:
    """Kernel density raster; ``values[i, j]`` is the cell at column ``i`` (x), row ``j`` (y)."""

    bounds: tuple[float, float, float, float]
    resolution: tuple[int, int]
    bandwidth: float
    values: np.ndarray

    @property
    def cell_size(self) -> tuple[float, float]:
        xmin, xmax, ymin, ymax = self.bounds
        nx, ny = self.resolution
        return (xmax - xmin) / nx, (ymax - ymin) / ny

    @property
    def cell_area(self) -> float:
        dx, dy = self.cell_size
        return dx * dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xmin, _, ymin, _ = self.bounds
        dx, dy = self.cell_size
        nx, ny = self.resolution
        return xmin + (np.arange(nx) + 0.5) * dx, ymin + (np.arange(ny) + 0.5) * dy

    def total_mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def argmax_point(self) -> GeoPoint:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        xs, ys = self.centers()
        return GeoPoint(xs[i], ys[j])

    def metadata(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "resolution": list(self.resolution),
            "bandwidth": self.bandwidth,
            "kernel": "gaussian",
            "layout": "row-major, rows are y ascending, columns are x ascending",
        }


def default_bandwidths(r: float) -> tuple[float, float]:
    """Small and large smoothing bandwidths used for hot-spot maps."""
    return 0.5 * r, 2.0 * r


def padded_bounds(points, bandwidth: float, pad_bandwidths: float = 6.0) -> tuple[float, float, float, float]:
    coords = as_coords(points)
    pad = pad_bandwidths * bandwidth
    return (
        float(coords[:, 0].min() - pad),
        float(coords[:, 0].max() + pad),
        float(coords[:, 1].min() - pad),
        float(coords[:, 1].max() + pad),
    )


def render_heatmap(points, bandwidth: float, bounds: Sequence[float], resolution: Sequence[int]) -> HeatGrid:
    """Isotropic Gaussian KDE (unnormalized by point count) at cell centres.

    Integrates to the number of points when the grid extends well past the
    cloud (six bandwidths) and cells are no wider than the bandwidth.
    """
    coords = as_coords(points)
    if coords.shape[0] == 0:
        raise InvalidInputError("heat map needs at least one point")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth!r}")
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    nx, ny = (int(n) for n in resolution)
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInputError(f"degenerate bounds {tuple(bounds)}")
    if nx < 1 or ny < 1:
        raise InvalidParameterError(f"resolution must be positive, got {tuple(resolution)}")

    grid = HeatGrid((xmin, xmax, ymin, ymax), (nx, ny), float(bandwidth), np.empty(0))
    xs, ys = grid.centers()
    two_var = 2.0 * bandwidth**2
    # separable kernel: exp(-(dx^2+dy^2)/2s^2) = exp(-dx^2/2s^2) * exp(-dy^2/2s^2)
    kx = np.exp(-((xs[None, :] - coords[:, 0:1]) ** 2) / two_var)
    ky = np.exp(-((ys[None, :] - coords[:, 1:2]) ** 2) / two_var)
    values = (kx.T @ ky) / (np.pi * two_var)
    return HeatGrid(grid.bounds, grid.resolution, grid.bandwidth, values)
