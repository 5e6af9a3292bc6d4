"""Poisson log-linear models on subgroup counts with a log-population offset.

Used to check how much regression conclusions drawn from sanitized subgroup
counts drift from those drawn from the originals.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ContractError, InvalidInputError, SingularDesignError
from .histogram import HistogramTree, postprocess_counts

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"


@dataclass(frozen=True)
class SubgroupTable:
    """Counts and population sizes per combination of categorical factors.

    ``levels`` fixes the level order of every factor; the first level is the
    reference category in the dummy coding.
    """

    factors: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    keys: tuple[tuple[str, ...], ...]
    counts: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        pops = np.asarray(self.populations, dtype=float)
        if counts.shape != (len(self.keys),) or pops.shape != (len(self.keys),):
            raise InvalidInputError("counts and populations must have one entry per row")
        if np.any(~np.isfinite(pops)) or np.any(pops <= 0):
            raise InvalidInputError("populations must be positive")
        if np.any(~np.isfinite(counts)):
            raise InvalidInputError("counts must be finite")
        for key in self.keys:
            if len(key) != len(self.factors):
                raise InvalidInputError(f"row {key} does not match factors {self.factors}")
            for value, lv in zip(key, self.levels):
                if value not in lv:
                    raise InvalidInputError(f"level {value!r} not among {lv}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "populations", pops)

    def with_counts(self, counts) -> SubgroupTable:
        return SubgroupTable(self.factors, self.levels, self.keys, np.asarray(counts, dtype=float), self.populations)

    def structure(self):
        return self.factors, self.levels, self.keys


def design_matrix(table: SubgroupTable, degree: int) -> tuple[np.ndarray, list[str]]:
    """Treatment-coded design with all interactions up to ``degree`` factors."""
    if degree < 1:
        raise ContractError(f"interaction degree must be >= 1, got {degree}")
    n = len(table.keys)
    # one indicator column per non-reference level of each factor
    dummies = []
    for f, (name, levels) in enumerate(zip(table.factors, table.levels)):
        cols = []
        for lv in levels[1:]:
            cols.append((f"{name}[{lv}]", np.array([k[f] == lv for k in table.keys], dtype=float)))
        dummies.append(cols)

    columns = [np.ones(n)]
    names = [INTERCEPT]
    for order in range(1, min(degree, len(table.factors)) + 1):
        for subset in itertools.combinations(range(len(table.factors)), order):
            for combo in itertools.product(*(dummies[f] for f in subset)):
                names.append(":".join(c[0] for c in combo))
                columns.append(np.prod([c[1] for c in combo], axis=0))
    return np.column_stack(columns), names


@dataclass
class PoissonFit:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    converged: bool
    iterations: int
    deviance: float
    degree: int = 1
    linear_predictor: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "converged": self.converged,
            "iterations": self.iterations,
            "deviance": self.deviance,
            "coefficients": self.coefficients,
            "std_errors": self.std_errors,
        }


def _poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def fit_poisson(
    table: SubgroupTable,
    degree: int = 1,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> PoissonFit:
    """Maximum-likelihood Poisson fit by iteratively reweighted least squares.

    Log link, offset log(population). Starts from all-zero slopes with the
    intercept at log(sum count / sum population) and stops once the relative
    deviance change drops below ``tol``.
    """
    y = table.counts
    if np.any(y < 0):
        raise InvalidInputError("Poisson counts must be nonnegative")
    X, names = design_matrix(table, degree)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError(f"design with {X.shape[1]} columns has rank {np.linalg.matrix_rank(X)}")
    offset = np.log(table.populations)
    beta = np.zeros(X.shape[1])

    total = y.sum()
    if total <= 0:
        # likelihood increases without bound as the intercept goes to -inf
        beta[0] = -math.inf
        return PoissonFit(
            dict(zip(names, beta.tolist())),
            {nm: math.nan for nm in names},
            converged=False,
            iterations=0,
            deviance=0.0,
            degree=degree,
        )

    beta[0] = math.log(total / table.populations.sum())
    eta = X @ beta + offset
    mu = np.exp(eta)
    dev = _poisson_deviance(y, mu)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = eta - offset + (y - mu) / mu
        sw = np.sqrt(mu)
        beta, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
        eta = X @ beta + offset
        mu = np.exp(eta)
        dev_new = _poisson_deviance(y, mu)
        if abs(dev_new - dev) / (abs(dev_new) + 0.1) < tol:
            dev = dev_new
            converged = True
            break
        dev = dev_new

    if not converged:
        logger.warning("IRLS did not converge in %d iterations", max_iter)
    info = (X * mu[:, None]).T @ X
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        se = np.full(X.shape[1], math.nan)
    return PoissonFit(
        dict(zip(names, beta.tolist())),
        dict(zip(names, se.tolist())),
        converged=converged,
        iterations=it,
        deviance=dev,
        degree=degree,
        linear_predictor=eta - offset,
    )


def _same_structure(a: SubgroupTable, b: SubgroupTable) -> bool:
    return a.structure() == b.structure()


def clamp_counts(table: SubgroupTable) -> SubgroupTable:
    """Zero out negative counts, which the Poisson likelihood cannot take."""
    if np.any(table.counts < 0):
        warnings.warn("negative sanitized counts clamped to 0 before fitting", RuntimeWarning, stacklevel=2)
        return table.with_counts(np.maximum(table.counts, 0.0))
    return table


def compare_fits(
    original: SubgroupTable,
    sanitized: SubgroupTable,
    degrees: Iterable[int] = (1, 2, 3),
) -> dict:
    """Side-by-side slope estimates (intercepts excluded) with sign-agreement flags."""
    if not _same_structure(original, sanitized):
        raise ContractError("original and sanitized tables differ in factor structure")
    sanitized = clamp_counts(sanitized)
    report = {"models": []}
    all_diffs = []
    for degree in sorted(set(degrees)):
        fo = fit_poisson(original, degree)
        fs = fit_poisson(sanitized, degree)
        rows = []
        for name, b0 in fo.coefficients.items():
            if name == INTERCEPT:
                continue
            b1 = fs.coefficients[name]
            diff = b1 - b0
            all_diffs.append(abs(diff))
            rows.append(
                {
                    "term": name,
                    "original": b0,
                    "sanitized": b1,
                    "difference": diff,
                    "sign_agrees": bool(np.sign(b0) == np.sign(b1)),
                }
            )
        report["models"].append(
            {
                "degree": degree,
                "original_converged": fo.converged,
                "sanitized_converged": fs.converged,
                "coefficients": rows,
            }
        )
    diffs = np.array(all_diffs) if all_diffs else np.zeros(1)
    report["max_abs_difference"] = float(np.max(diffs))
    report["mean_abs_difference"] = float(np.mean(diffs))
    report["sign_flips"] = [
        {"degree": m["degree"], "term": c["term"]}
        for m in report["models"]
        for c in m["coefficients"]
        if not c["sign_agrees"]
    ]
    return report


def table_from_tree(
    tree: HistogramTree,
    populations: Sequence[float],
    use: str = "h",
    mode: str = "rounded-nonnegative",
) -> SubgroupTable:
    """Leaf layer of a count tree as a subgroup table.

    ``use="true"`` takes the confidential counts; ``use="h"`` takes the
    sanitized release, integerized per ``mode`` (``raw`` clamps at 0 with a
    warning instead).
    """
    spec = tree.spec
    leaves = tree.layer_slice(tree.depth - 1)
    if use == "true":
        counts = tree.true[leaves].astype(float)
    elif use == "h":
        counts = postprocess_counts(tree, mode).h[leaves]
    else:
        raise ContractError(f"use must be 'true' or 'h', got {use!r}")
    table = SubgroupTable(
        tuple(a.name for a in spec.attributes),
        tuple(a.levels for a in spec.attributes),
        tuple(tree.leaf_labels()),
        counts,
        np.asarray(populations, dtype=float),
    )
    return clamp_counts(table) if use == "h" else table


def load_subgroup_table(path, factors: Optional[Sequence[str]] = None) -> SubgroupTable:
    """Read ``factor columns..., count, population``; factor levels keep first-seen order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for required in ("count", "population"):
            if required not in cols:
                raise InvalidInputError(f"{path}: line 1: missing column {required!r}")
        if factors is None:
            factors = [c for c in cols if c not in ("count", "population")]
        levels = {f: [] for f in factors}
        keys, counts, pops = [], [], []
        for row in reader:
            try:
                counts.append(float(row["count"]))
                pops.append(float(row["population"]))
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}: line {reader.line_num}: non-numeric count/population") from None
            key = tuple(row[f] for f in factors)
            for f, v in zip(factors, key):
                if v not in levels[f]:
                    levels[f].append(v)
            keys.append(key)
    return SubgroupTable(tuple(factors), tuple(tuple(levels[f]) for f in factors), tuple(keys), counts, pops)
