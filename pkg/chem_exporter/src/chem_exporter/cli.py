"""Command-line front end.

Two subcommands: export runs the chemistry backend on a geometry file and
writes the model/target bundle pair; rotate applies a stored orbital-rotation
matrix to an existing bundle.  Diagnostics are stage-tagged on stderr and the
exit code is nonzero on any failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bundle_io import load_bundle, save_bundle
from .errors import DimensionMismatch, ExporterError
from .export import ExportSpec, export
from .rotate import apply_basis


def _cmd_export(args) -> int:
    spec = ExportSpec(geometry=args.geometry, basis=args.basis,
                      out_dir=args.out, charge=args.charge, spin=args.spin,
                      freeze_core=not args.no_freeze_core)
    result = export(spec)
    print(f"model  = {result.model_path}")
    print(f"target = {result.target_path}")
    print(f"active = {result.n} orbitals, "
          f"({result.n_alpha}, {result.n_beta}) electrons, "
          f"{result.n_frozen} frozen")
    for method, e in result.e_total.items():
        print(f"e_total[{method}] = {e:.10f}")
    for method, e in result.e2_active.items():
        print(f"e2_active[{method}] = {e:.10f}")
    for flag in result.flags:
        print(f"flag: {flag}", file=sys.stderr)
    return 0


def _cmd_rotate(args) -> int:
    bundle = load_bundle(args.bundle)
    c = np.fromfile(args.matrix, dtype="<f8")
    if c.size != bundle.n * bundle.n:
        raise DimensionMismatch(
            f"rotation file holds {c.size} values, "
            f"need {bundle.n}x{bundle.n}"
        )
    rotated = apply_basis(bundle, c.reshape(bundle.n, bundle.n))
    save_bundle(args.out, rotated)
    print(f"rotated = {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chem-export",
        description="export correlated 2-RDM bundles from electronic structure")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("export", help="run the backend, write a bundle pair")
    p.add_argument("--geometry", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--charge", type=int, default=0)
    p.add_argument("--spin", type=int, default=0)
    p.add_argument("--no-freeze-core", action="store_true")
    p.set_defaults(func=_cmd_export)

    p = subs.add_parser("rotate", help="apply an orbital rotation to a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--matrix", required=True,
                   help="raw little-endian float64 n x n file, row major")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rotate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExporterError as err:
        print(f"error[{args.command}]: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
