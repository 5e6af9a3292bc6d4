"""Command-line front end.

Exit codes: 0 success, 2 validation or parse error, 3 I/O error.
All randomness derives from ``--seed``; each task gets its own stream.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path


from . import analytics, ctn, doppelganger, experiments, histogram
from .errors import PrivacyToolkitError
from .io import (
    csv_text,
    edges_csv,
    json_text,
    read_edges,
    read_locations,
    read_points,
    write_atomic,
)
from .privacy import BudgetKind, PrivacyBudget, RandomSource

logger = logging.getLogger("pandemic_privacy")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3

# stream ids per command, so one --seed never reuses a stream across tasks
STREAM_COUNTS, STREAM_DOPPEL, STREAM_CTN = 100, 200, 300


def _bundled(name: str) -> Path:
    return Path(str(resources.files("pandemic_privacy") / "data" / name))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


# -- commands ------------------------------------------------------------------


def cmd_sanitize_counts(args) -> int:
    spec = histogram.load_tree_spec(args.spec or _bundled("tree_spec.json"))
    counts = histogram.load_leaf_counts(args.input or _bundled("leaf_counts.csv"), spec)
    budget = PrivacyBudget(args.epsilon)
    if args.replicates < 1:
        raise PrivacyToolkitError("--replicates must be >= 1")
    tree = histogram.build_tree(counts, spec)
    rows = []
    for rep in range(args.replicates):
        rng = RandomSource(args.seed, STREAM_COUNTS + rep).generator()
        out = histogram.sanitize_tree(tree, budget, rng, args.allocation)
        out = histogram.postprocess_counts(out, args.mode)
        rows.extend(histogram.tree_rows(out, args.include_truth, rep))
    write_atomic({args.output: csv_text(histogram.tree_header(args.include_truth), rows)})
    return EXIT_OK


def _doppelganger_coords(args, ids, coords):
    params = doppelganger.DoppelgangerParams(
        args.k, args.r, args.r_prime if args.r_prime is not None else args.r,
        PrivacyBudget(args.epsilon, BudgetKind.PER_UNIT_DISTANCE),
    )
    rng = RandomSource(args.seed, STREAM_DOPPEL).generator()
    return params, doppelganger.generate_many(coords, params, rng)


def cmd_doppelganger(args) -> int:
    ids, coords = read_locations(args.input)
    params, sets = _doppelganger_coords(args, ids, coords)
    header = ["origin_id", "replicate_index", "x", "y"] + (["true_x", "true_y"] if args.include_truth else [])
    rows = []
    for oid, origin, pts in zip(ids, coords, sets):
        for k, (x, y) in enumerate(pts):
            row = [oid, k, x, y]
            if args.include_truth:
                row += [origin[0], origin[1]]
            rows.append(row)
    write_atomic({args.output: csv_text(header, rows)})
    return EXIT_OK


def cmd_heatmap(args) -> int:
    if args.epsilon is not None:
        ids, coords = read_locations(args.input)
        _, sets = _doppelganger_coords(args, ids, coords)
        points = sets.reshape(-1, 2)
    else:
        points = read_points(args.input)
    bandwidth = args.bandwidth if args.bandwidth is not None else doppelganger.default_bandwidths(args.r)[1]
    bounds = args.bounds or doppelganger.padded_bounds(points, bandwidth)
    if len(bounds) != 4 or len(args.resolution) != 2:
        raise PrivacyToolkitError("--bounds needs 4 numbers and --resolution 2 integers")
    grid = doppelganger.render_heatmap(points, bandwidth, bounds, args.resolution)
    raster = csv_text([f"c{i}" for i in range(grid.resolution[0])], grid.values.T.tolist())
    meta = grid.metadata()
    meta.update({"n_points": int(points.shape[0]), "seed": args.seed, "epsilon": args.epsilon})
    out = Path(args.output)
    write_atomic({out: raster, _sidecar(out): json_text(meta)})
    return EXIT_OK


def _load_graph_input(args):
    if args.edges:
        if args.nodes is None:
            raise PrivacyToolkitError("--edges needs --nodes")
        return None, read_edges(args.edges, args.nodes)
    _, coords = read_locations(args.input or _bundled("ctn_locations.csv"))
    return coords, ctn.build_ctn(coords, args.contact_distance)


def cmd_ctn(args) -> int:
    coords, g = _load_graph_input(args)
    rng = RandomSource(args.seed, STREAM_CTN).generator()
    if args.mechanism == "gi":
        if coords is None:
            raise PrivacyToolkitError("GI sanitization needs locations (--input), not an edge list")
        out = ctn.sanitize_gi(coords, PrivacyBudget(args.epsilon, BudgetKind.PER_NODE), args.contact_distance, rng)
    else:
        out = ctn.sanitize_rr(g, PrivacyBudget(args.epsilon, BudgetKind.PER_EDGE_PAIR), rng)
    write_atomic({args.output: edges_csv(out)})
    return EXIT_OK


def cmd_ctn_stats(args) -> int:
    if args.nodes is None:
        raise PrivacyToolkitError("--nodes is required")
    g = read_edges(args.input, args.nodes)
    doc = ctn.graph_stats(g).to_dict()
    doc["metadata"] = {
        "nodes": g.n,
        "epsilon": args.epsilon,
        "mechanism": args.mechanism,
        "seed": args.seed,
        "conventions": ctn.STATS_CONVENTIONS,
    }
    write_atomic({args.output: json_text(doc)})
    return EXIT_OK


def cmd_simulate_ctn(args) -> int:
    spec = ctn.ClusterSpec()
    coords, _ = ctn.simulate_ctn(args.nodes, spec, args.contact_distance, RandomSource(args.seed, STREAM_CTN))
    rows = [[i, x, y] for i, (x, y) in enumerate(coords)]
    write_atomic({args.output: csv_text(["id", "x", "y"], rows)})
    return EXIT_OK


def cmd_fit_poisson(args) -> int:
    table = analytics.load_subgroup_table(args.input)
    fits = [analytics.fit_poisson(table, d).to_dict() for d in args.degree]
    write_atomic({args.output: json_text({"fits": fits})})
    return EXIT_OK


def cmd_compare_fits(args) -> int:
    original = analytics.load_subgroup_table(args.input)
    sanitized = analytics.load_subgroup_table(args.sanitized, factors=original.factors)
    report = analytics.compare_fits(original, sanitized, args.degree)
    write_atomic({args.output: json_text(report)})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params = doppelganger.DoppelgangerParams(
        args.k, args.r, args.r_prime if args.r_prime is not None else args.r,
        PrivacyBudget(args.epsilon, BudgetKind.PER_UNIT_DISTANCE),
    )
    eff, reid = doppelganger.evaluate(params, args.cutoff, args.reps, RandomSource(args.seed, STREAM_DOPPEL))
    doc = {
        "K": params.K, "r": params.r, "r_prime": params.r_prime, "epsilon": params.epsilon.epsilon,
        "cutoff": args.cutoff if args.cutoff is not None else params.r, "reps": args.reps, "seed": args.seed,
        "effectiveness": eff.estimate, "effectiveness_se": eff.std_error,
        "reidentification": reid.estimate, "reidentification_se": reid.std_error,
    }
    if params.K >= 2 and params.r == params.r_prime:
        doc["closed_form_effectiveness"] = doppelganger.closed_form_effectiveness(
            params.K, params.epsilon.epsilon, params.r)
    write_atomic({args.output: json_text(doc)})
    return EXIT_OK


def cmd_experiment(args) -> int:
    run = experiments.EXPERIMENTS[args.which]
    kwargs = {"seed": args.seed}
    if args.reps is not None:
        kwargs["reps"] = args.reps
    rows, checks = run(**kwargs)
    header = list(rows[0].keys())
    out = Path(args.output)
    summary = {"experiment": args.which, "seed": args.seed, "reps": args.reps, "checks": checks}
    write_atomic({out: csv_text(header, [[r[h] for h in header] for r in rows]), _sidecar(out): json_text(summary)})
    for name, check in checks.items():
        print(f"{'PASS' if check['passed'] else 'FAIL'} {name}: {check['detail']}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pandemic-privacy", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--seed", type=int, default=0)
        if output:
            p.add_argument("--output", required=True)

    p = sub.add_parser("sanitize-counts", help="release subgroup counts through the consistent count tree")
    common(p)
    p.add_argument("--spec", help="tree spec JSON (default: bundled example)")
    p.add_argument("--input", help="leaf count CSV (default: bundled 200-case example)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--allocation", type=_floats, help="per-layer budget weights, root first")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--mode", choices=["raw", "rounded-nonnegative"], default="raw")
    p.add_argument("--include-truth", action="store_true")
    p.set_defaults(func=cmd_sanitize_counts)

    def doppel_args(p, epsilon_required=True):
        p.add_argument("--input", required=True, help="locations CSV with id,x,y")
        p.add_argument("--k", type=int, default=5)
        p.add_argument("--epsilon", type=float, required=epsilon_required,
                       help="total per-location budget per unit distance")
        p.add_argument("--r", type=float, default=10.0)
        p.add_argument("--r-prime", type=float)

    p = sub.add_parser("doppelganger", help="publish K perturbed copies of each location")
    common(p)
    doppel_args(p)
    p.add_argument("--include-truth", action="store_true")
    p.set_defaults(func=cmd_doppelganger)

    p = sub.add_parser("heatmap", help="Gaussian KDE raster of points (doppelgangers when --epsilon is set)")
    common(p)
    doppel_args(p, epsilon_required=False)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--bounds", type=_floats, help="xmin,xmax,ymin,ymax")
    p.add_argument("--resolution", type=_ints, default=[100, 100], help="nx,ny")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("ctn", help="sanitize a contact network")
    common(p)
    p.add_argument("--mechanism", choices=["gi", "rr"], required=True)
    p.add_argument("--input", help="locations CSV (default: bundled 100-person layout)")
    p.add_argument("--edges", help="edge list CSV (rr only)")
    p.add_argument("--nodes", type=int)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--contact-distance", type=float, default=6.0)
    p.set_defaults(func=cmd_ctn)

    p = sub.add_parser("ctn-stats", help="structural statistics of an edge list")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--nodes", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--mechanism")
    p.set_defaults(func=cmd_ctn_stats)

    p = sub.add_parser("simulate-ctn", help="simulate clustered locations")
    common(p)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--contact-distance", type=float, default=6.0)
    p.set_defaults(func=cmd_simulate_ctn)

    p = sub.add_parser("fit-poisson", help="Poisson models with log-population offset")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--degree", type=_ints, default=[1, 2, 3])
    p.set_defaults(func=cmd_fit_poisson)

    p = sub.add_parser("compare-fits", help="compare coefficients fitted on original and sanitized tables")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--sanitized", required=True)
    p.add_argument("--degree", type=_ints, default=[1, 2, 3])
    p.set_defaults(func=cmd_compare_fits)

    p = sub.add_parser("evaluate", help="Monte-Carlo effectiveness and re-identification rates")
    common(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--r", type=float, default=10.0)
    p.add_argument("--r-prime", type=float)
    p.add_argument("--cutoff", type=float, help="re-identification distance (default: r)")
    p.add_argument("--reps", type=int, default=100_000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a sweep and check it against targets")
    common(p)
    p.add_argument("which", choices=sorted(experiments.EXPERIMENTS))
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PrivacyToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
