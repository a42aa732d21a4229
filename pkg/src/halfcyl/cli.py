"""Command line: ``halfcyl stitch | synth | bench``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import EXIT_CODES, StitchError
from .pipeline import (
    PipelineError,
    StitchConfig,
    _write,
    encode_png,
    load_image,
    centered_perspective,
    make_synthetic_pair,
    run_stitch,
    timing_report,
)
from .registration import RansacConfig


def _resolutions(text):
    out = []
    for item in text.split(","):
        h, w = item.lower().split("x")
        out.append((int(h), int(w)))
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="halfcyl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stitch", help="stitch a target image onto a reference image")
    s.add_argument("ref")
    s.add_argument("target")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seam-scale", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--metrics")
    s.add_argument("--save-intermediate")
    s.add_argument("--feather", action="store_true")
    s.add_argument("--ransac-threshold", type=float, default=3.0)
    s.add_argument("--f-max", type=float)

    y = sub.add_parser("synth", help="cut a synthetic pair with known homography from an image")
    y.add_argument("image")
    y.add_argument("--overlap", type=float, default=0.3)
    y.add_argument("--perspective", type=float, default=0.0)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("-o", "--output", required=True, help="output directory")

    b = sub.add_parser("bench", help="timing table, seam at full vs reduced resolution")
    b.add_argument("--resolutions", type=_resolutions, default=_resolutions("1500x2000,1920x2560,2448x3264"))
    b.add_argument("--runs", type=int, default=3)
    b.add_argument("--seam-scale", type=int, default=8)
    b.add_argument("--metrics")
    return p


def cmd_stitch(args):
    cfg = StitchConfig(
        seam_scale=args.seam_scale,
        ransac=RansacConfig(threshold=args.ransac_threshold, seed=args.seed),
        f_max=args.f_max,
        feather=args.feather,
        save_intermediate=args.save_intermediate,
        seed=args.seed,
    )
    res = run_stitch(args.ref, args.target, args.output, cfg, args.metrics)
    print(f"wrote {args.output} ({res.canvas.width}x{res.canvas.height}), {res.report.inlier_count} inliers")


def cmd_synth(args):
    import numpy as np

    src = load_image(args.image)
    window = (int(0.8 * src.height), int(0.8 * src.width / (2.0 - args.overlap)))
    rng = np.random.default_rng(args.seed)
    # the seed only picks the sign of the tilt so pairs stay reproducible
    p = args.perspective * (1 if rng.random() < 0.5 else -1)
    h = centered_perspective(window[1], window[0], p)
    pair = make_synthetic_pair(src, h, args.overlap, window)
    os.makedirs(args.output, exist_ok=True)
    _write(os.path.join(args.output, "ref.png"), encode_png(pair.ref))
    _write(os.path.join(args.output, "tgt.png"), encode_png(pair.tgt))
    truth = {"h_true": [float(v) for v in pair.h_true.m.ravel()], "offset": pair.offset, "overlap": args.overlap}
    _write(os.path.join(args.output, "truth.json"), (json.dumps(truth, indent=2) + "\n").encode())
    print(f"wrote ref.png, tgt.png, truth.json to {args.output}")


def cmd_bench(args):
    rows = timing_report(args.resolutions, StitchConfig(seam_scale=args.seam_scale), runs=args.runs)
    print(f"{'resolution':>12} {'warp (s)':>9} {'total, full seam':>17} {'total, resized':>15}")
    for r in rows:
        print(f"{r['resolution']:>12} {r['warp_time_s']:9.3f} {r['total_time_original_s']:17.3f} {r['total_time_resized_s']:15.3f}")
    if args.metrics:
        _write(args.metrics, (json.dumps(rows, indent=2) + "\n").encode())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        {"stitch": cmd_stitch, "synth": cmd_synth, "bench": cmd_bench}[args.command](args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except StitchError as e:
        print(f"error: [{e.stage}] {e}", file=sys.stderr)
        return EXIT_CODES.get(e.stage, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
