"""Command-line front end.

Exit codes: 0 success, 1 usage error (bad flags or parameter values),
2 data/format error (unreadable or malformed files, shape mismatches),
3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys

from . import __version__
from .conditioning import slerp_schedule
from .exceptions import NumericalError, ParameterError, StageError, TVGError
from .fbif import FusionWeights, fuse
from .gpr import RBFKernel, gpr_smooth
from .io import read_tensor, write_tensor
from .pipeline import PipelineConfig, run
from .pixmap import NORMALIZE_MODES, export_frames
from .selection import METRICS, select_frames
from .synthetic import PATTERNS, generate

log = logging.getLogger("tvg")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _cmd_gen_synthetic(args):
    video = generate(args.pattern, args.frames, args.positions, args.channels, args.seed)
    write_tensor(video, args.out)


def _cmd_gpr_smooth(args):
    z = read_tensor(args.inp)
    kernel = None
    if args.length_scale is not None:
        kernel = RBFKernel(args.length_scale)
    write_tensor(gpr_smooth(z, kernel, args.sigma2), args.out)


def _single_embedding(path):
    emb = read_tensor(path)
    if emb.shape[0] != 1:
        raise ValueError(f"{path}: expected one embedding of shape (1, L, D), got {emb.shape}")
    return emb[0]


def _cmd_slerp(args):
    a = _single_embedding(args.a)
    b = _single_embedding(args.b)
    write_tensor(slerp_schedule(a, b, args.frames, args.w_start, args.w_end, args.per_token), args.out)


def _cmd_fuse(args):
    weights = FusionWeights(args.lambda_start, args.lambda_end, args.lambda_freq, args.window)
    write_tensor(fuse(read_tensor(args.fwd), read_tensor(args.rev), weights), args.out)


def _cmd_select(args):
    video, trace = select_frames(read_tensor(args.fwd), read_tensor(args.rev), args.metric)
    write_tensor(video, args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(trace.to_text())


def _cmd_run(args):
    try:
        with open(args.config) as fh:
            config = PipelineConfig.from_json(fh.read())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{args.config}: invalid JSON: {exc}") from exc
    except (TypeError, ParameterError) as exc:
        raise ValueError(f"{args.config}: invalid config: {exc}") from exc
    if args.out_dir is not None:
        config.output_dir = args.out_dir
    if config.output_dir is None:
        raise UsageError("no output directory: pass --out-dir or set output_dir in the config")
    run(config)
    log.info("wrote %s", config.output_dir)


def _cmd_export_frames(args):
    paths = export_frames(read_tensor(args.inp), args.out_dir, args.normalize, args.height)
    log.info("wrote %d frames to %s", len(paths), args.out_dir)


def build_parser():
    parser = _Parser(prog="tvg", description="Training-free transition-video mechanisms in a DDIM sandbox.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-synthetic", help="write a synthetic latent video")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--positions", type=int, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--pattern", choices=PATTERNS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("gpr-smooth", help="replace intermediate frames by their GPR posterior mean")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--length-scale", type=float, default=None, help="RBF length scale (default: median heuristic)")
    p.add_argument("--sigma2", type=float, default=1e-4, help="noise variance")
    p.set_defaults(func=_cmd_gpr_smooth)

    p = sub.add_parser("slerp", help="SLERP schedule between two (1, L, D) embeddings")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--w-start", type=float, default=0.9)
    p.add_argument("--w-end", type=float, default=0.1)
    p.add_argument("--per-token", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_slerp)

    p = sub.add_parser("fuse", help="frequency-aware fusion of forward and reverse latents")
    p.add_argument("--fwd", required=True)
    p.add_argument("--rev", required=True)
    p.add_argument("--lambda-start", type=float, default=0.9)
    p.add_argument("--lambda-end", type=float, default=0.1)
    p.add_argument("--lambda-freq", type=float, default=0.1)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("select", help="close-distance frame selection")
    p.add_argument("--fwd", required=True)
    p.add_argument("--rev", required=True)
    p.add_argument("--metric", choices=sorted(METRICS), default="grad_l2")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="write the selection trace here")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("run", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("export-frames", help="write frames as binary PGM/PPM")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--normalize", choices=NORMALIZE_MODES, default="global")
    p.add_argument("--height", type=int, default=None)
    p.set_defaults(func=_cmd_export_frames)
    return parser


def _exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.error
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    if isinstance(exc, ParameterError):
        return EXIT_USAGE
    if isinstance(exc, (TVGError, OSError, ValueError)):
        return EXIT_DATA
    return None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"tvg {args.command}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
