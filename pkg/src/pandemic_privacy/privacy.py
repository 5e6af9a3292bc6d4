"""
Noise primitives and privacy-budget accounting.

Everything stochastic in the package draws from a ``numpy.random.Generator``.
A :class:`RandomSource` names a reproducible stream by ``(seed, stream_id)``;
call :meth:`RandomSource.generator` once and thread the resulting generator
through the sampling functions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ContractError, InvalidParameterError
from .geo import GeoPoint, as_coords


class BudgetKind(str, enum.Enum):
    """Unit the privacy loss ``epsilon`` is accounted in."""

    PER_DATASET = "per-dataset"
    PER_NODE = "per-node"
    PER_EDGE_PAIR = "per-edge-pair"
    PER_UNIT_DISTANCE = "per-unit-distance"


@dataclass(frozen=True)
class PrivacyBudget:
    """A privacy loss parameter together with the unit it is spent in.

    Budgets are inert values. Checking that a release does not exceed the
    budget it was given is the job of the sanitizer that spends it.
    """

    epsilon: float
    kind: BudgetKind = BudgetKind.PER_DATASET

    def __post_init__(self):
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps <= 0:
            raise InvalidParameterError(f"epsilon must be positive and finite, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "kind", BudgetKind(self.kind))

    def split(self, parts: int) -> PrivacyBudget:
        """Budget for one of ``parts`` equal sequential releases."""
        if parts < 1:
            raise InvalidParameterError(f"parts must be >= 1, got {parts}")
        return PrivacyBudget(self.epsilon / parts, self.kind)

    def scaled(self, weight: float) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon * weight, self.kind)


@dataclass(frozen=True)
class Sensitivity:
    """L1 global sensitivity of a released statistic."""

    delta1: float = 1.0

    def __post_init__(self):
        d = float(self.delta1)
        if not math.isfinite(d) or d <= 0:
            raise InvalidParameterError(f"sensitivity must be positive and finite, got {self.delta1!r}")
        object.__setattr__(self, "delta1", d)


@dataclass(frozen=True)
class RandomSource:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Two sources with the same pair produce bit-identical sample sequences.
    Distinct ``stream_id`` values under one seed give statistically
    independent streams (``numpy.random.SeedSequence`` spawn keys).
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if int(self.stream_id) < 0:
            raise InvalidParameterError(f"stream_id must be nonnegative, got {self.stream_id!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> RandomSource:
        return RandomSource(self.seed, stream_id)


RngLike = Union[np.random.Generator, RandomSource, int, None]


def ensure_rng(rng: RngLike) -> np.random.Generator:
    """Coerce ``rng`` to a Generator.

    A Generator is returned as-is so that its state keeps advancing across
    calls; a RandomSource or integer seed starts a fresh stream.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator()
    if rng is None:
        return np.random.default_rng()
    return RandomSource(int(rng)).generator()


def _check_scale(scale: float) -> float:
    scale = float(scale)
    if not math.isfinite(scale) or scale <= 0:
        raise InvalidParameterError(f"scale must be positive and finite, got {scale!r}")
    return scale


def sample_laplace(scale: float, rng: RngLike, size=None):
    """Draw from Laplace(0, ``scale``), density exp(-|x|/scale) / (2 scale)."""
    scale = _check_scale(scale)
    return ensure_rng(rng).laplace(0.0, scale, size=size)


def laplace_scale(sens: Sensitivity, budget: PrivacyBudget) -> float:
    return sens.delta1 / budget.epsilon


def sanitize_scalar(value, sens: Sensitivity, budget: PrivacyBudget, rng: RngLike):
    """Laplace mechanism: ``value`` plus Laplace noise of scale delta1 / epsilon.

    ``value`` may be a scalar or an array; each entry gets independent noise.
    """
    scale = laplace_scale(sens, budget)
    value = np.asarray(value, dtype=float)
    noise = sample_laplace(scale, rng, size=value.shape if value.ndim else None)
    out = value + noise
    return float(out) if out.ndim == 0 else out


def _require_unit_distance(budget: PrivacyBudget) -> None:
    if budget.kind is not BudgetKind.PER_UNIT_DISTANCE:
        raise ContractError(
            f"planar Laplace needs a per-unit-distance budget, got kind {budget.kind.value!r}"
        )


def sample_planar_polar(epsilon: float, size: int, rng: RngLike):
    """Radii and angles of the planar Laplace mechanism.

    The radius is gamma(shape 2, rate epsilon), drawn exactly as the sum of
    two Exponential(rate epsilon) variables; the angle is uniform on [0, 2pi).
    """
    eps = float(epsilon)
    if not math.isfinite(eps) or eps <= 0:
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon!r}")
    gen = ensure_rng(rng)
    r = gen.exponential(1.0 / eps, size=(size, 2)).sum(axis=1)
    theta = gen.uniform(0.0, 2.0 * np.pi, size=size)
    return r, theta


def sample_planar_offsets(epsilon: float, size: int, rng: RngLike) -> np.ndarray:
    """``size`` planar Laplace offsets as an array of shape (size, 2)."""
    r, theta = sample_planar_polar(epsilon, size, rng)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_planar_offset(budget: PrivacyBudget, rng: RngLike) -> tuple[float, float]:
    _require_unit_distance(budget)
    dx, dy = sample_planar_offsets(budget.epsilon, 1, rng)[0]
    return float(dx), float(dy)


def perturb_locations(coords, budget: PrivacyBudget, rng: RngLike) -> np.ndarray:
    """Apply the planar Laplace mechanism independently to each row of ``coords``."""
    _require_unit_distance(budget)
    coords = as_coords(coords)
    return coords + sample_planar_offsets(budget.epsilon, coords.shape[0], rng)


def perturb_location(p: GeoPoint, budget: PrivacyBudget, rng: RngLike) -> GeoPoint:
    """Geo-indistinguishable release of one location.

    Satisfies loss ``epsilon * gamma`` for any two locations within distance gamma.
    """
    dx, dy = sample_planar_offset(budget, rng)
    return GeoPoint(p.x + dx, p.y + dy)


def _check_same_kind(budgets: Sequence[PrivacyBudget]) -> BudgetKind:
    if not budgets:
        raise ContractError("cannot compose an empty list of budgets")
    kinds = {b.kind for b in budgets}
    if len(kinds) > 1:
        raise ContractError(f"cannot compose budgets of different kinds: {sorted(k.value for k in kinds)}")
    return budgets[0].kind


def compose_sequential(budgets: Iterable[PrivacyBudget]) -> PrivacyBudget:
    """Total loss of releases computed on the same data: epsilons add."""
    budgets = list(budgets)
    kind = _check_same_kind(budgets)
    return PrivacyBudget(math.fsum(b.epsilon for b in budgets), kind)


def compose_parallel(budgets: Iterable[PrivacyBudget]) -> PrivacyBudget:
    """Total loss of releases on disjoint partitions: the largest epsilon.

    Disjointness is the caller's claim; it is not checked here.
    """
    budgets = list(budgets)
    kind = _check_same_kind(budgets)
    return PrivacyBudget(max(b.epsilon for b in budgets), kind)
