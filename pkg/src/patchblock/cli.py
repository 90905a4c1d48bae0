"""Command-line interface: defend, inject, analyze, evaluate, calibrate.

Defense options can come from a flat key=value config file (--config);
explicit CLI flags override file values. min-pts accepts either an
absolute count ("1201") or a fraction of the segment count ("rho:0.6").
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import fields

from .analyzer import export_histogram, fit_distribution, mahalanobis_scores, modality_report
from .attacksim import AdaptiveBounds, PatchSpec, make_adaptive_patch, make_patch
from .defense import (
    DISTANCE_KINDS,
    OVERLAP_STRATEGIES,
    REPLACEMENT_MODES,
    DefenseConfig,
    defend_batch,
)
from .harness import calibrate, evaluate
from .imagecore import load_image, save_image, save_mask
from .segmenter import segment

_CONFIG_FLOATS = {"eps", "shrinkage_lambda"}
_CONFIG_INTS = {"kernel", "stride"}
_CONFIG_STRS = {"replacement", "distance_kind", "overlap_strategy"}


def _parse_min_pts(text: str) -> tuple[int | None, float | None]:
    """'1201' -> literal count; 'rho:0.6' (or unicode rho) -> fraction of n."""
    for prefix in ("rho:", "ρ:"):
        if text.startswith(prefix):
            return None, float(text[len(prefix) :])
    return int(text), None


def load_config_file(path: str) -> dict:
    """Flat key=value file mirroring DefenseConfig fields; '#' starts a comment."""
    known = {f.name for f in fields(DefenseConfig)} | {"min_pts"}
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if key == "min_pts":
                values["min_pts"], values["min_pts_fraction"] = _parse_min_pts(value)
                if values["min_pts"] is None:
                    values["min_pts"] = DefenseConfig.min_pts
            elif key == "min_pts_fraction":
                values[key] = None if value.lower() == "none" else float(value)
            elif key in _CONFIG_FLOATS:
                values[key] = float(value)
            elif key in _CONFIG_INTS:
                values[key] = int(value)
            elif key in _CONFIG_STRS:
                values[key] = value
    return values


def _add_defense_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value defense config file")
    parser.add_argument("--kernel", type=int, help="window side in pixels")
    parser.add_argument("--stride", type=int, help="window step in pixels")
    parser.add_argument("--eps", type=float, help="DBSCAN neighborhood radius")
    parser.add_argument(
        "--min-pts",
        help="DBSCAN neighborhood threshold: count ('1201') or fraction ('rho:0.6')",
    )
    parser.add_argument("--replacement", choices=REPLACEMENT_MODES)
    parser.add_argument("--distance", choices=DISTANCE_KINDS, dest="distance_kind")
    parser.add_argument("--shrinkage-lambda", type=float)
    parser.add_argument("--overlap-strategy", choices=OVERLAP_STRATEGIES)


def build_defense_config(args: argparse.Namespace) -> DefenseConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in ("kernel", "stride", "eps", "replacement", "distance_kind",
                 "shrinkage_lambda", "overlap_strategy"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "min_pts", None) is not None:
        literal, fraction = _parse_min_pts(args.min_pts)
        values["min_pts_fraction"] = fraction
        values["min_pts"] = literal if literal is not None else DefenseConfig.min_pts
    return DefenseConfig(**values)


def _add_patch_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--size", type=int, default=50, help="patch side in pixels")
    parser.add_argument(
        "--placement",
        default="random",
        help="'random' or 'ROW,COL' for a fixed top-left corner",
    )
    parser.add_argument(
        "--kind",
        default="uniform_noise",
        choices=("uniform_noise", "high_frequency", "constant", "adaptive_constrained"),
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--constant-value", type=float, default=0.5)
    parser.add_argument("--mean-diff-low", type=float, default=0.02)
    parser.add_argument("--mean-diff-high", type=float, default=0.08)
    parser.add_argument("--std-ratio-low", type=float, default=1.5)
    parser.add_argument("--std-ratio-high", type=float, default=2.4)
    parser.add_argument("--n-fragments", type=int, default=20)
    parser.add_argument("--fragment-size", type=int, default=40)


def build_patch_spec(args: argparse.Namespace) -> PatchSpec:
    placement = None
    if args.placement != "random":
        row, _, col = args.placement.partition(",")
        placement = (int(row), int(col))
    return PatchSpec(
        size=args.size,
        placement=placement,
        kind=args.kind,
        seed=args.seed,
        constant_value=args.constant_value,
    )


def build_bounds(args: argparse.Namespace) -> AdaptiveBounds:
    return AdaptiveBounds(
        mean_diff_low=args.mean_diff_low,
        mean_diff_high=args.mean_diff_high,
        std_ratio_low=args.std_ratio_low,
        std_ratio_high=args.std_ratio_high,
        n_fragments=args.n_fragments,
        fragment_size=args.fragment_size,
    )


def _cmd_defend(args: argparse.Namespace) -> int:
    cfg = build_defense_config(args)
    summary = defend_batch(args.inputs, cfg, args.out_dir)
    for row in summary.rows:
        print(
            f"{row['file']}: {row['n_anomalous']}/{row['n_segments']} segments flagged "
            f"({row['anomaly_pixel_fraction']:.4f} of pixels)"
        )
    for name, err in summary.errors:
        print(f"{name}: FAILED ({err})", file=sys.stderr)
    print(f"summary: {summary.csv_path}")
    return 1 if summary.errors and not summary.rows else 0


def _cmd_inject(args: argparse.Namespace) -> int:
    host = load_image(args.input)
    spec = build_patch_spec(args)
    if spec.kind == "adaptive_constrained":
        patched, mask = make_adaptive_patch(host, build_bounds(args), spec)
    else:
        patched, mask = make_patch(spec, host)
    os.makedirs(args.out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.input))[0]
    img_path = os.path.join(args.out_dir, f"{stem}_patched.png")
    mask_path = os.path.join(args.out_dir, f"{stem}_mask.png")
    save_image(patched, img_path)
    save_mask(mask, mask_path)
    print(f"wrote {img_path} and {mask_path}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg = build_defense_config(args)
    img = load_image(args.input)
    grid = segment(img, cfg.kernel, cfg.stride)
    dist = fit_distribution(grid, cfg.shrinkage_lambda)
    scores = mahalanobis_scores(grid.vectors, dist)
    report = modality_report(scores)
    export_histogram(scores, args.out, bins=args.bins)
    print(
        f"{args.input}: {len(grid)} segments, modality={report.modality}, "
        f"separation={report.separation_score:.3f}, threshold={report.threshold:.4f}"
    )
    print(f"histogram: {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = build_defense_config(args)
    spec = build_patch_spec(args)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    summary = evaluate(args.corpus_dir, cfg, spec, args.out_dir, sizes=sizes)
    for key, value in summary.aggregates.items():
        print(f"{key}: {value:.4f}")
    for name, err in summary.errors:
        print(f"{name}: FAILED ({err})", file=sys.stderr)
    print(f"metrics: {summary.metrics_path}")
    return 1 if summary.errors and not summary.rows else 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = build_defense_config(args)
    if args.rho is not None:
        cfg = dataclasses.replace(cfg, min_pts_fraction=args.rho)
    params = calibrate(args.clean_dir, cfg)
    print(f"eps = {params.eps}")
    print(f"min_pts = {params.min_pts}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="patchblock",
        description="Adversarial patch defense: segment, isolate, block.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defend", help="sanitize images and write a summary CSV")
    p.add_argument("inputs", nargs="+", help="input PNG files")
    p.add_argument("--out-dir", required=True)
    _add_defense_flags(p)
    p.set_defaults(func=_cmd_defend)

    p = sub.add_parser("inject", help="inject a synthetic patch with ground-truth mask")
    p.add_argument("input", help="host PNG file")
    p.add_argument("--out-dir", required=True)
    _add_patch_flags(p)
    p.set_defaults(func=_cmd_inject)

    p = sub.add_parser("analyze", help="export Mahalanobis histogram for one image")
    p.add_argument("input", help="input PNG file")
    p.add_argument("--out", required=True, help="histogram CSV path")
    p.add_argument("--bins", type=int, default=32)
    _add_defense_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("evaluate", help="clean+patched evaluation over a corpus")
    p.add_argument("--corpus-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sizes", help="comma-separated patch sizes cycled over the corpus")
    _add_defense_flags(p)
    _add_patch_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("calibrate", help="choose eps/min_pts from a clean corpus")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--rho", type=float, help="min_pts fraction of segment count")
    _add_defense_flags(p)
    p.set_defaults(func=_cmd_calibrate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
