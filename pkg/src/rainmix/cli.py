"""Command-line interface: synth, eval, stratify, selftest.

Exit codes are the machine contract: 0 success, 1 no input pairs,
2 I/O or configuration failure, 3 self-test invariant failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .fileio import ImageIOError, load_image
from .metrics import LossWeights, SsimParams
from .pipeline import (NoPairsError, _load_depth_any, eval_batch,
                       stratify_by_depth, synth_batch, synth_sample)
from .recipes import RainRecipe, load_recipe
from .selfcheck import run_checks


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rainmix",
        description="Depth-guided synthesis and evaluation of mixed rain "
                    "degradations (streaks, adherent drops, rainy haze).",
    )
    parser.add_argument("--version", action="version", version=f"rainmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a degraded dataset "
                                         "from clean images and depth maps")
    synth.add_argument("--clean", required=True, help="directory of clean PNG images")
    synth.add_argument("--depth", required=True,
                       help="directory of depth maps (.pfm, or 16-bit .png with --depth-scale)")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--recipe", help="recipe config file (defaults shipped in configs/default.recipe)")
    synth.add_argument("--seed", type=int, default=None,
                       help="global seed; overrides the recipe file (default: 0)")
    synth.add_argument("--depth-scale", type=float, default=None,
                       help="depth units per integer step for PNG depth maps")
    synth.add_argument("--threads", type=int, default=0,
                       help="worker threads; 0 = available parallelism (default: 0)")

    ev = sub.add_parser("eval", help="evaluate predictions against ground truth")
    ev.add_argument("--pred", required=True, help="directory of predicted PNG images")
    ev.add_argument("--gt", required=True, help="directory of ground-truth PNG images")
    ev.add_argument("--out", required=True, help="directory for report.json / report.csv")
    ev.add_argument("--patch", type=int, default=15,
                    help="dark-channel patch size (default: 15)")
    ev.add_argument("--scales", type=int, default=5,
                    help="multi-scale similarity scale count (default: 5)")
    ev.add_argument("--window", type=int, default=11,
                    help="SSIM window size (default: 11)")
    ev.add_argument("--c1", type=float, default=0.0001,
                    help="SSIM stability constant C1 (default: 0.0001)")
    ev.add_argument("--c2", type=float, default=0.0009,
                    help="SSIM stability constant C2 (default: 0.0009)")
    ev.add_argument("--alpha-rec", type=float, default=0.1,
                    help="reconstruction-loss blend weight (default: 0.1)")

    strat = sub.add_parser("stratify", help="synthesize one sample and report "
                                            "per-depth-bin degradation statistics")
    strat.add_argument("--clean", required=True, help="clean PNG image")
    strat.add_argument("--depth", required=True, help="depth map (.pfm or 16-bit .png)")
    strat.add_argument("--recipe", help="recipe config file")
    strat.add_argument("--seed", type=int, default=None,
                       help="recipe seed; overrides the recipe file (default: 0)")
    strat.add_argument("--depth-scale", type=float, default=None,
                       help="depth units per integer step for PNG depth maps")
    strat.add_argument("--bins", type=int, default=8, help="depth bin count (default: 8)")

    selftest = sub.add_parser("selftest", help="run the numerical invariant suite")
    selftest.add_argument("--perturb-ssim-c1", type=float, default=None,
                          help=argparse.SUPPRESS)  # failure-path test hook
    return parser


def _resolve_recipe(args) -> tuple[RainRecipe, object]:
    """Recipe from file (or built-in defaults); --seed overrides when given."""
    if getattr(args, "recipe", None):
        recipe, jitter = load_recipe(args.recipe)
    else:
        recipe, jitter = RainRecipe(), None
    if getattr(args, "seed", None) is not None:
        recipe = dataclasses.replace(recipe, seed=args.seed)
    return recipe, jitter


def cmd_synth(args) -> int:
    recipe, jitter = _resolve_recipe(args)
    records = synth_batch(args.clean, args.depth, args.out, recipe, recipe.seed,
                          jitter=jitter, depth_scale=args.depth_scale,
                          threads=args.threads)
    print(f"synthesized {len(records)} samples -> {args.out}/manifest.jsonl")
    return 0


def cmd_eval(args) -> int:
    params = SsimParams(c1=args.c1, c2=args.c2, window=args.window,
                        scales=args.scales)
    weights = LossWeights(rec_alpha=args.alpha_rec)
    report = eval_batch(args.pred, args.gt, args.out, params,
                        patch=args.patch, weights=weights)
    print(f"{'metric':<10} {'mean':>12} {'std':>12}")
    for key, agg in report.aggregate.items():
        print(f"{key:<10} {agg['mean']:>12.3f} {agg['std']:>12.3f}")
    print(f"pairs: {report.count}  warnings: {len(report.errors)}")
    for stem, message in report.errors:
        print(f"warning: {stem}: {message}", file=sys.stderr)
    return 0


def cmd_stratify(args) -> int:
    recipe, _ = _resolve_recipe(args)
    clean = load_image(args.clean)
    depth = _load_depth_any(Path(args.depth), args.depth_scale)
    sample = synth_sample(clean, depth, recipe)
    rows = stratify_by_depth(sample, args.bins)
    print(f"{'bin':>4} {'depth_lo':>10} {'depth_hi':>10} {'count':>8} "
          f"{'mean_t':>8} {'mean_t_r':>9} {'streaks':>8} {'drops':>8}")
    for r in rows:
        print(f"{r['bin']:>4} {r['depth_lo']:>10.3f} {r['depth_hi']:>10.3f} "
              f"{r['count']:>8} {r['mean_t']:>8.4f} {r['mean_t_r']:>9.4f} "
              f"{r['streak_cover']:>8.4f} {r['drop_cover']:>8.4f}")
    return 0


def cmd_selftest(args) -> int:
    params = None
    if args.perturb_ssim_c1 is not None:
        params = SsimParams(c1=args.perturb_ssim_c1)
    checks = run_checks(ssim_params=params)
    failures = 0
    for name, ok, detail in checks:
        mark = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"[{mark}] {name}{suffix}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"synth": cmd_synth, "eval": cmd_eval,
                "stratify": cmd_stratify, "selftest": cmd_selftest}
    try:
        return handlers[args.command](args)
    except NoPairsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ImageIOError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
