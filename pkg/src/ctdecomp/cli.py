"""Command-line interface.

Informational output goes to stdout as ``key=value`` lines; diagnostics go to
stderr. Exit codes: 0 success, 1 I/O or format problem, 2 degenerate input
or shape mismatch, 64 usage error.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import imgio
from .errors import DegenerateInputError, ImageFormatError, ProfileError, ShapeError
from .homography import AlsSettings
from .metrics import format_psnr, psnr
from .profile import (
    apply_profile,
    approximate_transfer,
    extract_profile,
    load_profile,
    save_profile,
)
from .shading import DEFAULT_LAMBDA, DEFAULT_SLOTS

EXIT_OK = 0
EXIT_IO = 1
EXIT_DEGENERATE = 2
EXIT_USAGE = 64

_VARIANTS = {"simple": "simple", "shading": "shading_exact", "mapped": "shading_mapped"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(**values):
    for key, value in values.items():
        print(f"{key}={value}")


def _add_estimation_args(p):
    p.add_argument("--downsample", type=int, default=None, metavar="K",
                   help="estimate the homography on images shrunk by 2**K "
                        "(default: smallest K giving a longer side <= 256)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help=f"shading smoothness weight (default {DEFAULT_LAMBDA})")
    p.add_argument("--slots", type=int, default=DEFAULT_SLOTS,
                   help=f"brightness slots for the shading curve (default {DEFAULT_SLOTS})")
    p.add_argument("--epsilon", type=float, default=None,
                   help="ALS convergence tolerance (default 1e-6 x valid pixels)")
    p.add_argument("--max-iters", type=int, default=50, help="ALS iteration cap (default 50)")


def _settings(args):
    try:
        return AlsSettings(epsilon=args.epsilon, max_iterations=args.max_iters)
    except ValueError as e:
        raise UsageError(str(e)) from e


def cmd_extract(args):
    src = imgio.load_image(args.source)
    tgt = imgio.load_image(args.target)
    provenance = f"source={os.path.basename(args.source)}; target={os.path.basename(args.target)}"
    k = args.downsample if args.downsample is not None else imgio.auto_downsample_factor(src.shape)
    prof, als = extract_profile(src, tgt, k, args.lam, args.slots,
                                _settings(args), provenance, full_output=True)
    save_profile(prof, args.out)
    _emit(iterations=als.iterations,
          final_residual=repr(als.final_residual),
          converged=str(als.converged).lower(),
          downsample=k,
          self_psnr=format_psnr(psnr(apply_profile(src, prof, "shading"), tgt)))
    return EXIT_OK


def _apply_one(prof, mode, src_path, dst_path):
    start = time.perf_counter()
    imgio.save_image(apply_profile(imgio.load_image(src_path), prof, mode), dst_path)
    return time.perf_counter() - start


def cmd_apply(args):
    prof = load_profile(args.profile)
    if not os.path.isdir(args.input):
        seconds = _apply_one(prof, args.mode, args.input, args.out)
        _emit(frames=1, total_seconds=f"{seconds:.4f}")
        return EXIT_OK

    names = imgio.list_images(args.input)
    if not names:
        print(f"error: no .ppm/.png frames in {args.input}", file=sys.stderr)
        return EXIT_DEGENERATE
    os.makedirs(args.out, exist_ok=True)
    jobs = max(1, args.jobs)
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_apply_one, prof, args.mode,
                               os.path.join(args.input, name), os.path.join(args.out, name))
                   for name in names]
        timings = [f.result() for f in futures]
    total = time.perf_counter() - start
    for name, seconds in zip(names, timings):
        print(f"frame={name} seconds={seconds:.4f}")
    _emit(frames=len(names), jobs=jobs, total_seconds=f"{total:.4f}",
          mean_frame_seconds=f"{sum(timings) / len(timings):.4f}")
    return EXIT_OK


def cmd_approx(args):
    src = imgio.load_image(args.source)
    tgt = imgio.load_image(args.target)
    out = approximate_transfer(src, tgt, _VARIANTS[args.variant], args.downsample,
                               args.lam, args.slots, _settings(args))
    imgio.save_image(out, args.out)
    _emit(psnr=format_psnr(psnr(out, tgt)))
    return EXIT_OK


def cmd_psnr(args):
    print(format_psnr(psnr(imgio.load_image(args.a), imgio.load_image(args.b))))
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="ctdecomp",
                     description="Decompose a color transfer into a chromaticity homography "
                                 "and a shading curve, and re-apply it.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="learn a transfer profile from a source/target pair")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="profile file to write")
    _add_estimation_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("apply", help="apply a profile to an image or a directory of frames")
    p.add_argument("--profile", required=True)
    p.add_argument("--input", required=True, help="image file or directory of frames")
    p.add_argument("--out", required=True, help="output file, or directory in frame mode")
    p.add_argument("--mode", choices=("simple", "shading"), default="shading")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="frames processed concurrently in directory mode")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("approx", help="approximate a transfer in one shot and report PSNR")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=tuple(_VARIANTS), default="mapped")
    _add_estimation_args(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("psnr", help="PSNR in dB between two images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_psnr)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateInputError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, ImageFormatError, ProfileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
