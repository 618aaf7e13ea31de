"""Command-line driver.

Subcommands: validate, dim, c1, quality, coh (hodge | neumann | margin),
graphing (cost | transfer-check).  Reports are JSON (with the config and
seed echoed so a rerun reproduces them bit for bit); the dimension tasks
additionally write the per-scale CSV next to the report.  Exit status is
nonzero on validation or numerical failure, with the offending field or
module named.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from ._validation import ModelError, ParameterError
from .covering import OracleScopeError
from .graphcoh import (
    GraphError,
    SpectralError,
    amenability_margin,
    boundary,
    hodge_project,
    neumann_inverse,
)
from .graphings import (
    ConsistencyError,
    cost,
    cycle_quotient_dim_exact,
    estimate_cycle_quotient_dim,
    fiber_graph,
    transfer_spanning_identity,
)
from .homdim import PER_SCALE_COLUMNS, EstimatorGrid, estimate_dimension
from .io import (
    SCHEMA_VERSION,
    load_graph,
    load_graphing,
    load_model,
    load_sofic,
    write_csv_atomic,
    write_json_atomic,
)
from .reps import (
    constant_fiber_representation,
    pair_space_representation,
    projected_pair_representation,
)
from .sofic import exact_model, quality_report


def _report_skeleton(task, config, seed):
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "soficdim",
        "version": __version__,
        "task": task,
        "seed": seed,
        "config": config,
    }


def _emit(doc, out):
    if out:
        write_json_atomic(out, doc)
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _representation_from_config(model, cfg):
    kind = cfg.get("representation", {"type": "pair"})
    rtype = kind.get("type", "pair")
    if rtype == "pair":
        return pair_space_representation(model, translates=int(kind.get("translates", 1)))
    if rtype == "pair-corner":
        return projected_pair_representation(
            model, kind["atoms"], translates=int(kind.get("translates", 4))
        )
    if rtype == "constant":
        return constant_fiber_representation(model, int(kind.get("k", 1)))
    raise ModelError(f"config: unknown representation type {rtype!r}")


def _grid_from_config(cfg):
    return EstimatorGrid(
        m_values=tuple(cfg.get("m", [2])),
        delta_values=tuple(cfg.get("delta", [0.1])),
        eps_values=tuple(cfg.get("epsilon", [0.05, 0.1, 0.2])),
        p=float(cfg.get("p", 2.0)),
        product_base=float(cfg.get("product_base", 2.0)),
    )


def _estimate_to_results(est):
    return {
        "upper": est.upper,
        "lower": est.lower,
        "alpha_hat": est.alpha_hat,
        "support_bound": est.support_bound,
        "feasible_mass": est.feasible_mass,
        "lower_clamped": est.lower_clamped,
        "mean_op_norm": est.mean_op_norm,
    }


def _write_per_scale(out, est):
    if not out:
        return None
    csv_path = (out[:-5] if out.endswith(".json") else out) + ".csv"
    write_csv_atomic(csv_path, PER_SCALE_COLUMNS, est.rows(), comment="per-scale")
    return csv_path


def cmd_validate(args):
    load_model(args.model)
    print(f"{args.model}: ok")
    return 0


def cmd_dim(args):
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    model = load_model(cfg["model"])
    rep = _representation_from_config(model, cfg)
    sigmas = [exact_model(model, int(c)) for c in cfg.get("copies", [30])]
    est = estimate_dimension(
        rep,
        sigmas,
        grid=_grid_from_config(cfg),
        samples=int(cfg.get("samples", 200)),
        seed=seed,
    )
    doc = _report_skeleton("dim", cfg, seed)
    doc["results"] = _estimate_to_results(est)
    doc["per_scale_csv"] = _write_per_scale(args.out, est)
    _emit(doc, args.out)
    return 0


def cmd_c1(args):
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    phi = load_graphing(cfg["model"])
    sigmas = [exact_model(phi.as_model(), int(c)) for c in cfg.get("copies", [30])]
    est = estimate_cycle_quotient_dim(
        phi,
        sigmas,
        grid=_grid_from_config(cfg),
        samples=int(cfg.get("samples", 200)),
        seed=seed,
    )
    exact = cycle_quotient_dim_exact(phi)
    doc = _report_skeleton("c1", cfg, seed)
    doc["results"] = _estimate_to_results(est)
    doc["results"]["exact"] = exact.value
    doc["results"]["generates"] = exact.generates
    doc["per_scale_csv"] = _write_per_scale(args.out, est)
    _emit(doc, args.out)
    return 0


def cmd_quality(args):
    model = load_model(args.model)
    sigma = load_sofic(args.sofic)
    rep = quality_report(sigma, model, word_length=args.word_length, seed=args.seed or 0)
    doc = _report_skeleton("quality", {"model": args.model, "sofic": args.sofic}, args.seed or 0)
    doc["results"] = {
        "mult_defect": rep.mult_defect,
        "adj_defect": rep.adj_defect,
        "trace_defect": rep.trace_defect,
        "op_norm_bound": rep.op_norm_bound,
        "words_checked": rep.words_checked,
        "pairs_checked": rep.pairs_checked,
    }
    _emit(doc, args.out)
    return 0


def _parse_grounded(text, n):
    if not text:
        return []
    idx = [int(x) for x in text.split(",") if x != ""]
    for i in idx:
        if not 0 <= i < n:
            raise ParameterError(f"--grounded: vertex {i} out of range 0..{n - 1}")
    return idx


def cmd_coh(args):
    g = load_graph(args.graph)
    seed = args.seed or 0
    rng = np.random.default_rng(seed)
    doc = _report_skeleton(f"coh-{args.mode}", {"graph": args.graph}, seed)
    if args.mode == "hodge":
        f = rng.standard_normal(g.n_edges)
        cyc, cut = hodge_project(g, f)
        doc["results"] = {
            "n": g.n,
            "edges": g.n_edges,
            "cycle_norm": float(np.linalg.norm(cyc)),
            "cut_norm": float(np.linalg.norm(cut)),
            "recomposition_error": float(np.max(np.abs(cyc + cut - f))),
            "boundary_of_cycle_part": float(np.max(np.abs(boundary(g, cyc)))),
        }
    elif args.mode == "neumann":
        grounded = _parse_grounded(args.grounded, g.n)
        b = rng.standard_normal(g.n)
        for v in grounded:
            b[v] = 0.0
        res = neumann_inverse(g, grounded, b, p=args.p, tol=args.tol)
        doc["results"] = {
            "iterations": res.iterations,
            "final_increment": res.increment,
            "solution_norm": float(np.linalg.norm(res.solution)),
            "margin": amenability_margin(g, grounded),
        }
    else:  # margin
        grounded = _parse_grounded(args.grounded, g.n)
        doc["results"] = {"margin": amenability_margin(g, grounded)}
    _emit(doc, args.out)
    return 0


def cmd_graphing(args):
    phi = load_graphing(args.graphing)
    doc = _report_skeleton(f"graphing-{args.mode}", {"graphing": args.graphing}, args.seed or 0)
    if args.mode == "cost":
        c = cost(phi)
        exact = cost(phi, exact=True) if phi.rel.space.exact_weights is not None else None
        value = cycle_quotient_dim_exact(phi)
        doc["results"] = {
            "cost": c,
            "cost_exact": str(exact) if exact is not None else None,
            "cycle_quotient_dim": value.value,
            "generates": value.generates,
        }
    else:  # transfer-check
        blocks = range(len(phi.rel.blocks))
        checks = []
        for bi in blocks:
            g, _ = fiber_graph(phi, bi)
            if g.n_components != 1 or g.n < 2:
                continue
            holds, rank, cycle_rank = transfer_spanning_identity(g, g)
            checks.append({"orbit": bi, "holds": holds, "rank": rank, "cycle_rank": cycle_rank})
        doc["results"] = {"checks": checks, "all_hold": all(c["holds"] for c in checks)}
    _emit(doc, args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="soficdim", description=__doc__)
    ap.add_argument("--version", action="version", version=f"soficdim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="write the JSON report here (atomic)")
        p.add_argument("--threads", type=int, default=1, help="reserved; computation is deterministic single-process")

    p = sub.add_parser("validate", help="check a model file's invariants")
    p.add_argument("model")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("dim", help="dimension estimate from an experiment config")
    p.add_argument("config")
    common(p)
    p.set_defaults(fn=cmd_dim)

    p = sub.add_parser("c1", help="cycle-quotient dimension estimate from a config")
    p.add_argument("config")
    common(p)
    p.set_defaults(fn=cmd_c1)

    p = sub.add_parser("quality", help="defect report of a sofic approximation")
    p.add_argument("model")
    p.add_argument("sofic")
    p.add_argument("--word-length", type=int, default=3)
    common(p)
    p.set_defaults(fn=cmd_quality)

    p = sub.add_parser("coh", help="graph cohomology utilities")
    p.add_argument("mode", choices=["hodge", "neumann", "margin"])
    p.add_argument("graph")
    p.add_argument("--grounded", default="", help="comma-separated grounded vertices")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--p", type=float, default=2.0)
    common(p)
    p.set_defaults(fn=cmd_coh)

    p = sub.add_parser("graphing", help="graphing cost and transfer checks")
    p.add_argument("mode", choices=["cost", "transfer-check"])
    p.add_argument("graphing")
    common(p)
    p.set_defaults(fn=cmd_graphing)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("soficdim: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (ModelError, GraphError, ParameterError, OracleScopeError, ConsistencyError) as e:
        print(f"soficdim: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except SpectralError as e:
        print(f"soficdim: graphcoh: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"soficdim: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
