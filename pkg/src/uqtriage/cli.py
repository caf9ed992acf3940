"""Command-line interface.

Subcommands mirror the pipeline stages:

    synth     generate a synthetic paired dataset (li.fdmp, hi.fdmp, truth.txt)
    fit       calibrate thresholds and fit banks (banks.bin, thresholds.txt)
    taxonomy  tag every sample (tags.txt); --oracle uses paired HI data
    query     build a query plan under a budget (plan.txt)
    fuse      apply a plan (fused.fdmp, fused_tags.txt)
    eval      score predictions against planted truth (JSON report)
    sweep     metrics across a budget grid plus their integrals (JSON report)
    info      print the header of an FDMP file

Exit codes: 0 success, 1 validation/usage, 2 malformed file, 3 missing
optional payload, 4 numerical failure, 5 degenerate taxonomy.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import POLICIES, POLICY_FINEGRAINED
from .artifacts import (
    RunConfig,
    read_config,
    read_fused_tags,
    read_plan,
    read_tags,
    read_truth,
    write_fused_tags,
    write_plan,
    write_report,
    write_tags,
    write_thresholds,
    write_truth,
)
from .core import FeatureSet
from .errors import UqtriageError
from .fdmp import read_fdbk, read_fdmp, write_fdbk, write_fdmp
from .ingest import downscale_grid, pair_grids
from .pipeline import (
    apply_taxonomy,
    evaluate,
    fit_model,
    fuse,
    make_plan,
    sweep_budgets,
    synth_config,
)
from .synth import generate_paired_dataset


def _load_config(path: str | None) -> RunConfig:
    return read_config(path) if path else RunConfig()


def _load_pair(li_path, hi_path, downscale: int) -> tuple[FeatureSet, FeatureSet]:
    """Read both domains and align them one-to-one.

    Grids with mismatched dims are paired by block-aggregating the HI map;
    plain record lists must already align by index. --downscale shrinks both
    maps first (the cheap query-on-downscaled-grid mode).
    """
    li = read_fdmp(li_path)
    hi = read_fdmp(hi_path)
    if downscale > 1:
        li = downscale_grid(li, downscale)
        hi = downscale_grid(hi, downscale)
    if li.is_grid and hi.is_grid and (li.height, li.width) != (hi.height, hi.width):
        scale = hi.height // li.height
        li, hi = pair_grids(li, hi, scale)
    return li, hi


def _cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    result = generate_paired_dataset(synth_config(cfg))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_fdmp(result.li, out / "li.fdmp")
    write_fdmp(result.hi, out / "hi.fdmp")
    write_truth(result.planted_tags, result.true_labels, out / "truth.txt")
    print(f"wrote {len(result)} paired records to {out}")
    return 0


def _cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    if args.calib_size is not None:
        cfg.calib_size = args.calib_size
    li, hi = _load_pair(args.li, args.hi, args.downscale)
    model = fit_model(li, hi, cfg)
    write_fdbk(model, args.out_banks)
    write_thresholds(model.li_thresholds, model.hi_thresholds, args.out_thresholds)
    print(
        f"fitted {model.backend} banks on {len(li)} pairs; "
        f"tau_EU(LI)={model.li_thresholds.tau_eu:.4g} tau_AU(LI)={model.li_thresholds.tau_au:.4g}"
    )
    return 0


def _cmd_taxonomy(args) -> int:
    model = read_fdbk(args.banks)
    if args.oracle and not args.hi:
        raise UqtriageError("--oracle requires --hi with the paired HI dump")
    if args.oracle:
        li, hi = _load_pair(args.infile, args.hi, args.downscale)
    else:
        li = read_fdmp(args.infile)
        if args.downscale > 1:
            li = downscale_grid(li, args.downscale)
        hi = None
    table = apply_taxonomy(model, li, hi)
    write_tags(table, args.out)
    counts = {tag: int(np.sum(table.dyn_tags == tag)) for tag in ("C", "UAR", "UAI", "UE")}
    print(f"tagged {len(table)} records ({table.source}): {counts}")
    return 0


def _cmd_query(args) -> int:
    cfg = _load_config(args.config)
    table = read_tags(args.tags)
    budget = args.budget if args.budget is not None else cfg.budget
    plan = make_plan(
        table,
        cfg.cost_model(),
        budget,
        policy=args.policy,
        seed=args.seed if args.seed is not None else cfg.seed,
        random_pool=args.random_pool or cfg.random_pool,
    )
    write_plan(plan, args.out)
    note = "" if plan.status == "ok" else f" [{plan.status}]"
    print(
        f"{plan.policy}: {len(plan)} queries, realized cost {plan.realized_cost:.4g}"
        f" (budget {budget}){note}"
    )
    return 0


def _cmd_fuse(args) -> int:
    model = read_fdbk(args.banks)
    li, hi = _load_pair(args.li, args.hi, args.downscale)
    table = read_tags(args.tags)
    plan = read_plan(args.plan)
    fused_set, fused_table = fuse(model, li, hi, table, plan)
    write_fdmp(fused_set, args.out)
    write_fused_tags(fused_table, args.out_tags)
    n_hi = int(np.sum(fused_table.provenance == "HI"))
    print(f"fused {len(fused_set)} records ({n_hi} from HI) -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    pred = read_fdmp(args.pred)
    truth_tags, truth_labels = read_truth(args.truth)
    if len(pred) != truth_labels.size:
        raise UqtriageError(
            f"prediction dump ({len(pred)}) and truth ({truth_labels.size}) disagree"
        )
    fused = read_fused_tags(args.tags)
    report = evaluate(
        pred.probs,
        truth_labels,
        fused.tags,
        fused.eu,
        fused.entropy,
        n_bins=cfg.n_bins,
        coverage_grid=cfg.coverage_grid,
    )
    text = write_report(report.to_dict(), args.report)
    print(text)
    return 0


def _parse_budgets(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UqtriageError(f"budget range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UqtriageError("budget step must be positive")
        out = []
        b = start
        while b <= stop + 1e-9:
            out.append(round(b, 9))
            b += step
        return out
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    model = read_fdbk(args.banks)
    li, hi = _load_pair(args.li, args.hi, args.downscale)
    table = read_tags(args.tags)
    _, truth_labels = read_truth(args.truth)
    report = sweep_budgets(
        model,
        li,
        hi,
        table,
        truth_labels,
        _parse_budgets(args.budgets),
        cfg.cost_model(),
        policy=args.policy,
        seed=args.seed if args.seed is not None else cfg.seed,
        random_pool=args.random_pool or cfg.random_pool,
        n_bins=cfg.n_bins,
    )
    text = write_report(report, args.report)
    print(text)
    return 0


def _cmd_info(args) -> int:
    data = read_fdmp(args.path)
    shape = f"{data.height}x{data.width} grid" if data.is_grid else "record list"
    print(
        f"{args.path}: domain={data.domain} n={len(data)} d={data.dim} "
        f"C={data.n_classes} {shape} labels={'yes' if data.labels is not None else 'no'} "
        f"coords={'yes' if data.coords is not None else 'no'}"
    )
    print(
        f"  feature mean {data.features.mean():.6g}, prob row sums in "
        f"[{data.probs.sum(axis=1).min():.6g}, {data.probs.sum(axis=1).max():.6g}]"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqtriage", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"uqtriage {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="calibrate thresholds and fit banks")
    p.add_argument("--li", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--config")
    p.add_argument("--calib-size", type=int)
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument("--out-banks", default="banks.bin")
    p.add_argument("--out-thresholds", default="thresholds.txt")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("taxonomy", help="tag samples with the static+dynamic taxonomy")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--banks", required=True)
    p.add_argument("--oracle", action="store_true", help="use paired HI data instead of the surrogate")
    p.add_argument("--hi")
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument("--out", default="tags.txt")
    p.set_defaults(func=_cmd_taxonomy)

    p = sub.add_parser("query", help="select re-imaging queries under a budget")
    p.add_argument("--tags", required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--policy", choices=POLICIES, default=POLICY_FINEGRAINED)
    p.add_argument("--random-pool", choices=("all", "ua"))
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", default="plan.txt")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("fuse", help="apply a query plan to produce fused predictions")
    p.add_argument("--plan", required=True)
    p.add_argument("--li", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--banks", required=True)
    p.add_argument("--tags", required=True)
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument("--out", default="fused.fdmp")
    p.add_argument("--out-tags", default="fused_tags.txt")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("eval", help="score predictions against planted truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--tags", required=True, help="fused tags written by `fuse`")
    p.add_argument("--config")
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="evaluate along a budget grid")
    p.add_argument("--budgets", required=True, help="start:stop:step or comma list")
    p.add_argument("--li", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--banks", required=True)
    p.add_argument("--tags", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--policy", choices=POLICIES, default=POLICY_FINEGRAINED)
    p.add_argument("--random-pool", choices=("all", "ua"))
    p.add_argument("--seed", type=int)
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("info", help="print the header of an FDMP file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UqtriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
