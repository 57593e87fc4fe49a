"""Command-line front end.

Subcommands mirror the experiment drivers: gen / spectrum / rotate / plan /
complete / measure / report.  All numeric output goes to --out as a report
directory (structured text plus DSV tables); diagnostics are stage-tagged on
stderr and the exit code is nonzero on any failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bundle import bundle_hash, load_bundle, save_bundle, _write_atomic
from .coherence import (
    minimize_coherence,
    mu_after,
    rotate_integrals,
    rotate_set,
    sector_modes,
)
from .completion import CompletionConfig, find_fsample
from .errors import DimensionMismatch, RdmError
from .measurement import calibrate_standard, plan_noisy
from .pipeline import (
    PipelineConfig,
    RunReport,
    gen_toy,
    run_noiseless,
    run_noisy,
)
from .rdm_core import select_rank, spectrum, trace_targets


def _parse_params(text: str | None) -> dict:
    params = {}
    for item in (text or "").split(","):
        if not item:
            continue
        if "=" not in item:
            raise DimensionMismatch(f"bad --params entry {item!r}")
        key, val = item.split("=", 1)
        params[key.strip()] = float(val)
    return params


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(eps0=args.eps0, kappa=args.kappa, seed=args.seed,
                          n_trials=args.trials, switch_cost=args.switch_cost,
                          rank_override=args.rank)


def _write_tables(out_dir: str, tables: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, (header, rows) in tables.items():
        body = [",".join(header)]
        body += [",".join(f"{x:.12g}" if not isinstance(x, str) else x
                          for x in row) for row in rows]
        _write_atomic(os.path.join(out_dir, f"{name}.csv"),
                      ("\n".join(body) + "\n").encode())


def _cmd_gen(args) -> int:
    model, target = gen_toy(args.family, _parse_params(args.params),
                            seed=args.seed, interaction_scale=args.scale)
    for tag, b in (("model", model), ("target", target)):
        path = os.path.join(args.out, tag)
        save_bundle(path, b.rdms, one=b.one, ints=b.ints, producer=b.producer)
        print(f"{tag}: {path} sha256={bundle_hash(path)[:16]}")
    return 0


def _cmd_spectrum(args) -> int:
    b = load_bundle(args.bundle)
    tables = {}
    for sector, block in b.rdms.items():
        lam = spectrum(block).lam
        tables[f"spectrum_{sector.value}"] = (
            ("index", "eigenvalue"), [(i, v) for i, v in enumerate(lam)])
        # an all-zero sector (empty spin channel) has no meaningful rank
        rank = (0 if lam[0] <= 0.0
                else select_rank(block.data, eps0=args.eps0, kappa=args.kappa))
        print(f"{sector.value}: d={block.d} nonzero="
              f"{int((lam > 1e-10 * max(lam[0], 1e-300)).sum())} "
              f"rank(eps0={args.eps0})={rank}")
    _write_tables(args.out, tables)
    return 0


def _cmd_rotate(args) -> int:
    b = load_bundle(args.bundle)
    targets = trace_targets(b.meta)
    sectors = [s for s, _ in b.rdms.items() if targets[s] > 0.0]
    modes = []
    for s in sectors:
        r = args.rank or select_rank(b.rdms.get(s).data, eps0=args.eps0,
                                     kappa=args.kappa)
        modes.append(sector_modes(b.rdms.get(s), min(r, b.rdms.get(s).d)))
    basis = minimize_coherence(modes, seed=args.seed)
    rows = []
    for s, mm in zip(sectors, modes):
        before = mu_after(mm, np.eye(b.meta.n))
        after = mu_after(mm, basis.C)
        rows.append((s.value, mm.d, mm.r, before, after))
        print(f"{s.value}: mu {before:.4f} -> {after:.4f} (d={mm.d}, r={mm.r})")
    _write_tables(args.out, {"coherence": (("sector", "d", "r", "mu_before",
                                           "mu_after"), rows)})
    rotated = rotate_set(b.rdms, basis.C)
    ints = rotate_integrals(b.ints, basis.C) if b.ints is not None else None
    save_bundle(os.path.join(args.out, "rotated"), rotated, one=b.one,
                ints=ints, producer=f"rotate/{basis.provenance}")
    return 0


def _cmd_plan(args) -> int:
    b = load_bundle(args.bundle)
    targets = trace_targets(b.meta)
    sectors = [s for s, _ in b.rdms.items() if targets[s] > 0.0]
    tables = {}
    ranks = {}
    for s in sectors:
        block = b.rdms.get(s)
        r = min(args.rank or select_rank(block.data, eps0=args.eps0,
                                         kappa=args.kappa), block.d)
        ranks[s] = r
        cfg = CompletionConfig(r=r, eps0=args.eps0, kappa=args.kappa,
                               n_trials=args.trials, seed=args.seed)
        search = find_fsample(block, cfg, trace_target=targets[s])
        tables[f"fsample_{s.value}"] = (
            ("f_sample", "n_sample", "mean_eps", "std_eps", "success"),
            [(g.f_sample, g.n_sample, g.mean_eps, g.std_eps, g.success_frac)
             for g in search.records])
        print(f"{s.value}: rank={r} f_star={search.f_star:.4f} "
              f"n={search.n_sample_star}")
    if args.noisy:
        from .rdm_core import contract_to_1rdm

        one = b.one if b.one is not None else contract_to_1rdm(b.rdms)
        cal = calibrate_standard(b.rdms, one, eps0=args.eps0, seed=args.seed,
                                 n_trials=args.trials, sectors=sectors)
        plan = plan_noisy(b.rdms, one, ranks, eps0=args.eps0,
                          switch_cost=args.switch_cost, seed=args.seed,
                          n_trials=args.trials)
        tables["plan"] = (
            ("m", "f_quartet", "mean_eps", "mean_settings", "cost", "feasible"),
            [(p.m, p.f_quartet, p.mean_eps, p.mean_settings, p.cost,
              int(p.feasible)) for p in plan.points])
        f_m = plan.budget.total_shots / cal.budget.total_shots
        print(f"standard m0={cal.m0}; plan m={plan.m} f={plan.f_quartet:.4f} "
              f"f_m={f_m:.4f}")
    _write_tables(args.out, tables)
    return 0


def _run_pair(args, driver) -> int:
    model = load_bundle(args.model)
    target = load_bundle(args.target)
    report = driver(model, target, _pipeline_config(args))
    report.bundle_hashes = {"model": bundle_hash(args.model),
                            "target": bundle_hash(args.target)}
    report.save(args.out)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_complete(args) -> int:
    return _run_pair(args, run_noiseless)


def _cmd_measure(args) -> int:
    return _run_pair(args, run_noisy)


def _cmd_report(args) -> int:
    path = os.path.join(args.dir, "report.txt")
    if not os.path.exists(path):
        raise DimensionMismatch(f"no report.txt under {args.dir}")
    with open(path) as fh:
        sys.stdout.write(fh.read())
    for name in sorted(os.listdir(args.dir)):
        if name.endswith(".csv"):
            print(f"table: {name}")
    return 0


def _add_common(sub) -> None:
    sub.add_argument("--eps0", type=float, default=0.01)
    sub.add_argument("--kappa", type=float, default=0.5)
    sub.add_argument("--rank", type=int, default=None)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--switch-cost", dest="switch_cost", type=float,
                     default=0.0)
    sub.add_argument("--trials", type=int, default=10)
    sub.add_argument("--out", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdmfill",
        description="low-rank completion experiments for fermionic 2-RDMs")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen", help="write a model/target toy bundle pair")
    p.add_argument("--family", default="hubbard")
    p.add_argument("--params", default="")
    p.add_argument("--scale", type=float, default=0.8)
    _add_common(p)
    p.set_defaults(func=_cmd_gen)

    p = subs.add_parser("spectrum", help="sector eigenvalue tables")
    p.add_argument("--bundle", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = subs.add_parser("rotate", help="coherence minimization tables")
    p.add_argument("--bundle", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_rotate)

    p = subs.add_parser("plan", help="f_sample search and shot planning")
    p.add_argument("--bundle", required=True)
    p.add_argument("--noisy", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_plan)

    p = subs.add_parser("complete", help="noiseless model-guided completion")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_complete)

    p = subs.add_parser("measure", help="noisy planned measurement pipeline")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_measure)

    p = subs.add_parser("report", help="print a stored run report")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RdmError as err:
        print(f"error[{args.command}]: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
