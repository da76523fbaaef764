"""Command-line interface wiring data -> engine -> reporting -> rendering.

Subcommands: run, simulate, render, fss, diagnose-resampling.  Every command
writes a manifest.json with resolved flags, input hashes, and the package
version, sufficient to reproduce the run.  Exit codes: 0 success, 1 data or
runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import DataMatrix, load_csv, standardize
from .engine import MpsConfig, enumerate_models, run_fss, run_mps
from .learners import ModelClass, cv_forward_depth, fit, loss
from .reporting import SimSpec, aggregate, run_simulation
from .resampling import ResamplePlan, derive_rng, selection_proportion_diagnostic
from .viz import (MAX_SVG_LEAVES, RenderOptions, forest_from_json, to_dot,
                  to_json, to_svg_radial)


def _default_threads() -> int:
    env = os.environ.get("MPS_THREADS", "").strip()
    return int(env) if env else 1


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict,
                    inputs: dict[str, str]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _model_class(name: str) -> ModelClass:
    return ModelClass(kind=name)


def _split_train_test(data: DataMatrix, frac: float, seed: int):
    n_test = int(round(data.n * frac))
    if not 0 < n_test < data.n:
        raise ValueError(f"test split {frac} leaves no train or no test rows")
    perm = derive_rng(seed, "split").permutation(data.n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return data.take(train_rows), data.take(test_rows)


def _standardize_pair(train: DataMatrix, test: DataMatrix | None):
    # statistics from the training rows only, reused on the test rows
    xs, mu, sd, constant = standardize(train.x)
    train = DataMatrix(xs, train.y, train.names, standardized=True,
                       constant_columns=constant)
    if test is not None:
        test = DataMatrix((test.x - mu) / sd, test.y, test.names,
                          standardized=False, constant_columns=constant)
    return train, test


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_csv(args.data, args.response,
                    standardize_columns=False,
                    expand_second_order=args.expand_2nd_order)
    test = None
    if args.test_split is not None:
        data, test = _split_train_test(data, args.test_split, args.seed)
    if args.standardize:
        data, test = _standardize_pair(data, test)

    mc = _model_class(args.model)
    if args.depth == "cv":
        depth = cv_forward_depth(data, max_depth=args.max_depth, seed=args.seed,
                                 model_class=mc)
    else:
        depth = int(args.depth)
    config = MpsConfig(d=depth, r=args.r, p_star=args.p_star, gamma=args.gamma,
                       nsim=args.nsim, model_class=mc, seed=args.seed,
                       threshold_mode=args.threshold_mode)
    forest = run_mps(data, config, threads=args.threads)

    (out / "forest.json").write_text(to_json(forest))
    (out / "forest.dot").write_text(to_dot(forest))
    paths, sets = enumerate_models(forest)
    if len(paths) <= MAX_SVG_LEAVES:
        (out / "forest.svg").write_text(to_svg_radial(forest))
    else:
        print(f"note: forest has {len(paths)} paths; skipping forest.svg "
              "(render the DOT output instead)", file=sys.stderr)

    losses: dict[frozenset, tuple[str, str]] = {}
    if args.test_split is not None:
        for cov in sets:
            model = fit(mc, data, sorted(cov))
            losses[frozenset(cov)] = (repr(loss(model, data)),
                                      repr(loss(model, test)))
    with open(out / "models.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("kind", "id", "covariates", "train_loss", "test_loss"))
        for kind, family in (("path", paths), ("set", sets)):
            for i, cov in enumerate(family):
                names = "|".join(forest.names[j] for j in cov)
                tr, te = losses.get(frozenset(cov), ("", ""))
                w.writerow((kind, i, names, tr, te))

    _write_manifest(out, "run", {
        "data": str(args.data), "response": args.response,
        "expand_2nd_order": args.expand_2nd_order,
        "standardize": args.standardize, "model": args.model,
        "depth": depth, "depth_flag": str(args.depth),
        "max_depth": args.max_depth, "r": args.r, "p_star": args.p_star,
        "gamma": args.gamma, "nsim": args.nsim, "seed": args.seed,
        "threshold_mode": args.threshold_mode,
        "test_split": args.test_split, "threads": args.threads,
        "n_paths": len(paths), "n_models": len(sets),
    }, {str(args.data): _sha256(Path(args.data))})
    print(f"wrote forest with {len(paths)} paths "
          f"({len(sets)} distinct covariate sets) to {out}")
    return 0


def cmd_simulate(args) -> int:
    spec = SimSpec(
        setup=0 if args.setup == "custom" else int(args.setup),
        beta_type=args.beta_type, rho=args.rho, snr=args.snr, reps=args.reps,
        methods=tuple(args.methods.split(",")), seed=args.seed,
        n=args.n, p=args.p, s=args.s, r=args.r, p_star=args.p_star,
        gamma=args.gamma, nsim=args.nsim, n_test=args.n_test,
    )
    out = Path(args.out)
    rows = run_simulation(spec, out_dir=out, threads=args.threads)
    n, p, s, r, p_star = spec.resolved()
    _write_manifest(out, "simulate", {**spec.to_dict(), "threads": args.threads}, {})
    print(f"setup: n={n} p={p} s={s} r={r} p_star={p_star} "
          f"beta_type={spec.beta_type} rho={spec.rho} snr={spec.snr}")
    print(f"{'method':<22}{'mean RTE':>12}{'se':>10}{'models':>10}{'paths':>10}")
    for method, stats in aggregate(rows).items():
        if stats.get("n", 0) == 0:
            print(f"{method:<22}{'all reps failed':>12}")
            continue
        print(f"{method:<22}{stats['mean_rte']:>12.4f}{stats['se_rte']:>10.4f}"
              f"{stats['mean_n_models']:>10.1f}{stats['mean_n_paths']:>10.1f}")
    failures = [r for r in rows if r.error is not None]
    for row in failures:
        print(f"FAILED {row.method} rep {row.rep}: {row.error}", file=sys.stderr)
    return 1 if failures else 0


def cmd_render(args) -> int:
    text = Path(args.infile).read_text()
    forest = forest_from_json(text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    opts = RenderOptions(layout=args.layout, label=args.label)
    if args.layout == "radial":
        (out / "forest.svg").write_text(to_svg_radial(forest, opts))
    else:
        (out / "forest.dot").write_text(to_dot(forest, opts))
    _write_manifest(out, "render", {"in": str(args.infile), "layout": args.layout,
                                    "label": args.label},
                    {str(args.infile): _sha256(Path(args.infile))})
    return 0


def cmd_fss(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_csv(args.data, args.response,
                    standardize_columns=args.standardize,
                    expand_second_order=args.expand_2nd_order)
    mc = _model_class(args.model)
    config = MpsConfig(d=int(args.depth), r=args.r, gamma=args.gamma,
                       model_class=mc, seed=args.seed)
    path = run_fss(data, config, B=args.B)
    doc = {"path": [data.names[j] for j in path], "indices": path}
    (out / "fss_path.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out, "fss", {
        "data": str(args.data), "response": args.response,
        "expand_2nd_order": args.expand_2nd_order,
        "standardize": args.standardize, "model": args.model,
        "depth": args.depth, "r": args.r, "gamma": args.gamma,
        "B": args.B, "seed": args.seed,
    }, {str(args.data): _sha256(Path(args.data))})
    print(" -> ".join(doc["path"]))
    return 0


def cmd_diagnose_resampling(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_values = [int(v) for v in args.n_list.split(",")]
    schemes = ["subsample", "bootstrap"] if args.scheme == "both" else [args.scheme]
    all_rows = []
    for scheme in schemes:
        plan = ResamplePlan(scheme=scheme, gamma=args.gamma, seed=args.seed)
        summary, rows = selection_proportion_diagnostic(n_values, args.B,
                                                        args.reps, plan)
        all_rows.extend(rows)
        for n, (mean, sd) in summary.items():
            print(f"{scheme:<12} n={n:<8} mean={mean:.4f} sd={sd:.4f}")
    with open(out / "diagnostic.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scheme", "n", "rep", "proportion"))
        w.writerows(all_rows)
    _write_manifest(out, "diagnose-resampling", {
        "n_list": args.n_list, "B": args.B, "reps": args.reps,
        "scheme": args.scheme, "gamma": args.gamma, "seed": args.seed,
    }, {})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mps",
                                 description="Model path selection toolkit")
    ap.add_argument("--version", action="version", version=f"mps {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="build a path forest from a CSV dataset")
    run.add_argument("--data", required=True)
    run.add_argument("--response", required=True)
    run.add_argument("--expand-2nd-order", action="store_true",
                     dest="expand_2nd_order")
    run.add_argument("--standardize", action="store_true")
    run.add_argument("--model", choices=("ols", "logistic", "tree"), default="ols")
    run.add_argument("--depth", default="1",
                     help="model size, or 'cv' for cross-validated forward depth")
    run.add_argument("--max-depth", type=int, default=10,
                     help="depth search cap when --depth cv")
    run.add_argument("--r", type=int, default=100)
    run.add_argument("--p-star", type=float, default=0.95, dest="p_star")
    run.add_argument("--gamma", type=float, default=0.5)
    run.add_argument("--nsim", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--threshold-mode", choices=("inclusive", "strict"),
                     default="inclusive", dest="threshold_mode")
    run.add_argument("--test-split", type=float, default=None, dest="test_split")
    run.add_argument("--threads", type=int, default=_default_threads())
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    sim = sub.add_parser("simulate", help="run the simulation benchmark")
    sim.add_argument("--setup", choices=("1", "2", "3", "custom"), default="1")
    sim.add_argument("--beta-type", type=int, choices=(1, 2, 3), default=2,
                     dest="beta_type")
    sim.add_argument("--rho", type=float, default=0.0)
    sim.add_argument("--snr", type=float, default=1.0)
    sim.add_argument("--reps", type=int, default=30)
    sim.add_argument("--methods", default="oracle,forward,mps")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--s", type=int, default=None)
    sim.add_argument("--r", type=int, default=None)
    sim.add_argument("--p-star", type=float, default=None, dest="p_star")
    sim.add_argument("--gamma", type=float, default=0.5)
    sim.add_argument("--nsim", type=int, default=10_000)
    sim.add_argument("--n-test", type=int, default=10_000, dest="n_test")
    sim.add_argument("--threads", type=int, default=_default_threads())
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    ren = sub.add_parser("render", help="render a forest.json")
    ren.add_argument("--in", required=True, dest="infile")
    ren.add_argument("--layout", choices=("linear_tree", "radial"),
                     default="radial")
    ren.add_argument("--label", choices=("name_only", "name_and_proportion"),
                     default="name_only")
    ren.add_argument("--out", required=True)
    ren.set_defaults(func=cmd_render)

    fss = sub.add_parser("fss", help="forward stability selection (single path)")
    fss.add_argument("--data", required=True)
    fss.add_argument("--response", required=True)
    fss.add_argument("--expand-2nd-order", action="store_true",
                     dest="expand_2nd_order")
    fss.add_argument("--standardize", action="store_true")
    fss.add_argument("--model", choices=("ols", "logistic", "tree"), default="ols")
    fss.add_argument("--depth", type=int, required=True)
    fss.add_argument("--r", type=int, default=100)
    fss.add_argument("--gamma", type=float, default=0.5)
    fss.add_argument("--B", type=int, default=None)
    fss.add_argument("--seed", type=int, default=0)
    fss.add_argument("--out", required=True)
    fss.set_defaults(func=cmd_fss)

    diag = sub.add_parser("diagnose-resampling",
                          help="bootstrap-vs-subsampling selection diagnostic")
    diag.add_argument("--n-list", default="100,1000", dest="n_list")
    diag.add_argument("--B", type=int, default=200)
    diag.add_argument("--reps", type=int, default=200)
    diag.add_argument("--scheme", choices=("subsample", "bootstrap", "both"),
                      default="both")
    diag.add_argument("--gamma", type=float, default=0.5)
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--out", required=True)
    diag.set_defaults(func=cmd_diagnose_resampling)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
