"""Command-line entry point: grid, synth, estimate, eval, overlay.

Exit codes: 0 success, 1 usage error, 2 data error, 3 fallback under --strict.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .court import (CameraSide, CourtTemplate, SamplingError, SamplingSpec, build_layout,
                    common_difference, perspective_offsets)
from .formats import (FormatError, load_homography, load_json, load_layout, load_tensor,
                      save_json, save_layout)
from .homography import RansacConfig
from .pipeline import estimate_frame, evaluate_dataset
from .synth import CorruptionConfig, ViewSamplerConfig, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FALLBACK = 0, 1, 2, 3

log = logging.getLogger("courtreg")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {path}")
    return p


def _writable(path: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise DataError(f"output directory does not exist: {p.parent}")
    return p


def cmd_grid(args) -> int:
    try:
        spec = SamplingSpec(args.rows, args.cols, args.w0_cm, CameraSide(args.camera_side))
        template = CourtTemplate(args.length_cm, args.width_cm)
        offsets = perspective_offsets(args.width_cm, args.rows, args.w0_cm)
    except (SamplingError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = _writable(args.out)
    layout = build_layout(template, spec)
    save_layout(out, layout)
    r = common_difference(args.width_cm, args.rows, args.w0_cm)
    print("gaps_cm: " + " ".join(f"{g:.6g}" for g in np.diff(offsets)))
    print(f"common_difference_cm: {r:.6g}")
    if abs(r) <= 1e-9 * args.width_cm:
        print("notice: w0 equals width/(rows-1); the grid is uniform")
    print(f"classes: {layout.num_classes} ({len(layout.court_ids)} court, 2 basket, 1 background)")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    try:
        corrupt = CorruptionConfig(args.dropout, args.jitter, args.blobs, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest = generate_dataset(args.n, ViewSamplerConfig(), corrupt, args.out, args.seed,
                                labels_only=args.labels, soft=args.soft, jobs=args.jobs)
    print(f"wrote {len(manifest['frames'])} frames to {args.out}")
    return EXIT_OK


def _ransac_cfg(args) -> RansacConfig:
    try:
        return RansacConfig(args.threshold_px, args.iterations, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_estimate(args) -> int:
    cfg = _ransac_cfg(args)
    paths = [_existing(args.heatmaps), _existing(args.layout), _existing(args.fallback)]
    out = _writable(args.out)
    try:
        t = load_tensor(paths[0])
        layout = load_layout(paths[1])
        fallback = load_homography(paths[2])
        res = estimate_frame(t, layout, cfg, fallback, min_support=args.min_support)
    except (FormatError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    save_json(out, res.to_dict())
    reason = res.fallback_reason.value if res.fallback_reason else "-"
    print(f"decoded: {res.decoded_count} inliers: {res.inlier_count} "
          f"fallback: {res.used_fallback} reason: {reason}")
    if args.strict and res.used_fallback:
        return EXIT_FALLBACK
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _ransac_cfg(args)
    paths = [_existing(args.manifest), _existing(args.layout), _existing(args.fallback)]
    out = _writable(args.out)
    try:
        layout = load_layout(paths[1])
        fallback = load_homography(paths[2])
        report = evaluate_dataset(paths[0], layout, cfg, fallback, jobs=args.jobs,
                                  min_support=args.min_support)
    except (FormatError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    save_json(out, report.to_dict())
    print(f"frames: {len(report.per_frame_error_cm)}")
    print(f"mean error: {report.mean_error_cm:.2f} cm")
    print(f"below 1 m: {report.pct_below_100cm:.1f}%")
    print(f"fallbacks: {report.fallback_count}")
    if report.failures:
        print(f"failed frames: {', '.join(report.failures)}")
    return EXIT_OK


def cmd_overlay(args) -> int:
    from PIL import Image

    from .overlay import draw_template

    paths = [_existing(args.image), _existing(args.homography), _existing(args.template)]
    out = _writable(args.out)
    try:
        image = Image.open(paths[0])
        image.load()
        h = load_homography(paths[1])
        doc = load_json(paths[2])
        template = CourtTemplate.from_dict(doc.get("template", doc))
    except (OSError, FormatError, KeyError, TypeError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    draw_template(image, h, template).save(out, format="PNG")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="courtreg", description="Basketball court registration from keypoint heatmaps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("grid", help="write the keypoint layout")
    g.add_argument("--width-cm", type=float, default=1500.0)
    g.add_argument("--length-cm", type=float, default=2800.0)
    g.add_argument("--rows", type=int, default=7)
    g.add_argument("--cols", type=int, default=13)
    g.add_argument("--w0-cm", type=float, default=175.0)
    g.add_argument("--camera-side", choices=[c.value for c in CameraSide], default="y_zero")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--dropout", type=float, default=0.0)
    s.add_argument("--jitter", type=float, default=0.0, help="disk center jitter, heatmap px")
    s.add_argument("--blobs", type=int, default=0)
    s.add_argument("--labels", action="store_true", help="write uint16 label maps instead of scores")
    s.add_argument("--soft", action="store_true", help="blurred softmax scores instead of one-hot")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_synth)

    for name, helptext in (("estimate", "register one heatmap tensor"),
                           ("eval", "evaluate a manifest")):
        e = sub.add_parser(name, help=helptext)
        if name == "estimate":
            e.add_argument("--heatmaps", required=True)
            e.add_argument("--strict", action="store_true")
        else:
            e.add_argument("--manifest", required=True)
            e.add_argument("--jobs", type=int, default=1)
        e.add_argument("--layout", required=True)
        e.add_argument("--fallback", required=True)
        e.add_argument("--out", required=True)
        e.add_argument("--seed", type=int, default=0)
        e.add_argument("--threshold-px", type=float, default=35.0)
        e.add_argument("--iterations", type=int, default=2000)
        e.add_argument("--min-support", type=int, default=3)
        e.set_defaults(func=cmd_estimate if name == "estimate" else cmd_eval)

    o = sub.add_parser("overlay", help="draw court lines onto an image")
    o.add_argument("--image", required=True)
    o.add_argument("--homography", required=True)
    o.add_argument("--template", required=True, help="template or layout JSON")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_overlay)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("COURTREG_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"courtreg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"courtreg {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
