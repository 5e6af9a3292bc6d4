"""Sweeps behind the doppelganger curves and the contact-network table.

Each sweep returns long-format rows (plain dicts, deterministic order) and a
dict of named checks, each ``{"passed": bool, "detail": str}``. Every grid
cell draws from its own ``RandomSource(seed, stream)`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .ctn import (
    ContactGraph,
    build_ctn,
    count_edges,
    count_triangles,
    expected_rr_edges,
    mean_sd,
    sanitize_gi,
    sanitize_rr,
)
from .doppelganger import DoppelgangerParams, closed_form_effectiveness, evaluate, within_radius_probability
from .privacy import RandomSource

K_GRID = tuple(range(2, 11))
R_EPS_GRID = (2.5, 5.0, 10.0, 15.0)
RR_EPSILONS = (0.5, 2.0, 3.0, 5.0)
GI_EPSILONS = (0.5, 1.0, 1.5, 2.0)
CONTACT_DISTANCE = 6.0

# mean (SD) edge counts over 100 randomized-response repeats on a 39-edge, 100-node network
RR_REFERENCE_EDGES = {0.5: (1876.0, 37.4), 2.0: (619.0, 20.9), 3.0: (269.0, 16.0), 5.0: (72.0, 5.2)}

GI_MAX_RATIO = 1.25


def _check(passed: bool, detail: str) -> dict:
    return {"passed": bool(passed), "detail": detail}


def load_default_locations() -> np.ndarray:
    """Frozen simulated layout: 100 people, 39 contacts at distance 6."""
    ref = resources.files("pandemic_privacy") / "data" / "ctn_locations.csv"
    with resources.as_file(ref) as path:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 1:3]


def default_ctn() -> tuple[np.ndarray, ContactGraph]:
    coords = load_default_locations()
    return coords, build_ctn(coords, CONTACT_DISTANCE)


def _within(est, target, se, z=3.0) -> bool:
    return abs(est - target) <= z * se


def run_fig4(reps: int = 100_000, seed: int = 0, epsilon: float = 1.0):
    """Effectiveness and centroid re-identification over K x (r eps), with r = r' = l."""
    rows = []
    for a, r_eps in enumerate(R_EPS_GRID):
        for b, K in enumerate(K_GRID):
            params = DoppelgangerParams(K, r_eps / epsilon, r_eps / epsilon, epsilon)
            eff, reid = evaluate(params, None, reps, RandomSource(seed, 4000 + 100 * a + b))
            exact = closed_form_effectiveness(K, epsilon, params.r)
            se_exact = math.sqrt(exact * (1 - exact) / reps)
            rows.append(
                {
                    "K": K,
                    "r_eps": r_eps,
                    "effectiveness": eff.estimate,
                    "effectiveness_se": eff.std_error,
                    "closed_form": exact,
                    "within_3se": _within(eff.estimate, exact, se_exact),
                    "reidentification": reid.estimate,
                    "reidentification_se": reid.std_error,
                }
            )

    checks = {}
    bad = [(r["K"], r["r_eps"]) for r in rows if not r["within_3se"]]
    checks["closed_form_agreement"] = _check(not bad, f"cells outside 3 SE: {bad}")
    best15 = max(r["effectiveness"] for r in rows if r["r_eps"] == 15.0)
    checks["effectiveness_near_one_at_15"] = _check(best15 >= 0.97, f"max effectiveness at r eps=15: {best15:.4f}")
    reid = next(r["reidentification"] for r in rows if r["r_eps"] == 15.0 and r["K"] == 2)
    checks["reidentification_near_one_at_15"] = _check(reid >= 0.95, f"K=2, r eps=15: {reid:.4f}")
    violations = []
    for r_eps in R_EPS_GRID:
        seq = sorted((r for r in rows if r["r_eps"] == r_eps), key=lambda r: r["K"])
        for lo, hi in zip(seq, seq[1:]):
            se = math.hypot(lo["reidentification_se"], hi["reidentification_se"])
            if hi["reidentification"] - lo["reidentification"] > 3 * se:
                violations.append((r_eps, lo["K"], hi["K"]))
    checks["reidentification_nonincreasing_in_K"] = _check(not violations, f"increases beyond 3 SE: {violations}")
    return rows, checks


def run_fig5(reps: int = 100_000, seed: int = 0, epsilon: float = 1.0):
    """Effectiveness minus re-identification rate, including the K = 1 reference."""
    rows = []
    for a, r_eps in enumerate(R_EPS_GRID):
        for K in range(1, 11):
            params = DoppelgangerParams(K, r_eps / epsilon, r_eps / epsilon, epsilon)
            eff, reid = evaluate(params, None, reps, RandomSource(seed, 5000 + 100 * a + K))
            rows.append(
                {
                    "K": K,
                    "r_eps": r_eps,
                    "effectiveness": eff.estimate,
                    "reidentification": reid.estimate,
                    "gap": eff.estimate - reid.estimate,
                    "gap_se": math.hypot(eff.std_error, reid.std_error),
                }
            )
    checks = {}
    bad = []
    for row in rows:
        if row["K"] != 1:
            continue
        exact = within_radius_probability(epsilon, row["r_eps"] / epsilon)
        se = math.sqrt(exact * (1 - exact) / reps)
        if not (_within(row["reidentification"], exact, se) and row["gap"] == 0.0):
            bad.append(row["r_eps"])
    checks["single_release_baseline"] = _check(not bad, f"K=1 cells off the closed form: {bad}")
    return rows, checks


def run_table1(reps: int = 100, seed: int = 0):
    """Mean (SD) edges and triangles of randomized-response and GI releases of the default network."""
    coords, g = default_ctn()
    m = count_edges(g)
    rows = [
        {"mechanism": "original", "epsilon": "", "edges_mean": m, "edges_sd": 0.0,
         "triangles_mean": count_triangles(g), "triangles_sd": 0.0, "expected_edges": ""}
    ]
    checks = {}
    for i, eps in enumerate(RR_EPSILONS):
        gen = RandomSource(seed, 1000 + i).generator()
        edges, tris = [], []
        for _ in range(reps):
            h = sanitize_rr(g, eps, gen)
            edges.append(count_edges(h))
            tris.append(count_triangles(h))
        e_mean, e_sd = mean_sd(edges)
        t_mean, t_sd = mean_sd(tris)
        target = expected_rr_edges(m, g.n, eps)
        rows.append({"mechanism": "rr", "epsilon": eps, "edges_mean": e_mean, "edges_sd": e_sd,
                     "triangles_mean": t_mean, "triangles_sd": t_sd, "expected_edges": target})
        tol = 3 * RR_REFERENCE_EDGES[eps][1] / math.sqrt(reps)
        checks[f"rr_edges_eps_{eps:g}"] = _check(
            abs(e_mean - target) <= tol, f"mean {e_mean:.1f} vs expected {target:.1f} (tolerance {tol:.2f})"
        )
    gi_means = []
    for i, eps in enumerate(GI_EPSILONS):
        gen = RandomSource(seed, 2000 + i).generator()
        edges, tris = [], []
        for _ in range(reps):
            h = sanitize_gi(coords, eps, CONTACT_DISTANCE, gen)
            edges.append(count_edges(h))
            tris.append(count_triangles(h))
        e_mean, e_sd = mean_sd(edges)
        t_mean, t_sd = mean_sd(tris)
        gi_means.append(e_mean)
        rows.append({"mechanism": "gi", "epsilon": eps, "edges_mean": e_mean, "edges_sd": e_sd,
                     "triangles_mean": t_mean, "triangles_sd": t_sd, "expected_edges": ""})
    ratio = max(gi_means) / min(gi_means)
    checks["gi_stability"] = _check(ratio <= GI_MAX_RATIO, f"max/min mean edges across epsilon: {ratio:.3f}")
    return rows, checks


EXPERIMENTS = {"fig4": run_fig4, "fig5": run_fig5, "table1": run_table1}
