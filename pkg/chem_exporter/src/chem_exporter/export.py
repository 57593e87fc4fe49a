"""Export orchestration: geometry in, model and target bundles out."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .backend import ActiveSpaceSolution, run_backend
from .bundle_io import BundleData, save_bundle
from .errors import DimensionMismatch
from .geometry import frozen_core_count, load_geometry
from .pack import SECTORS, pack_sector, trace_target

TRACE_FLAG_TOL = 1e-3


@dataclass(frozen=True)
class ExportSpec:
    geometry: str  # path to a symbol-x-y-z file, Angstrom
    basis: str
    out_dir: str
    charge: int = 0
    spin: int = 0  # n_alpha - n_beta
    freeze_core: bool = True


@dataclass(frozen=True)
class ExportResult:
    model_path: str
    target_path: str
    n: int
    n_alpha: int
    n_beta: int
    n_frozen: int
    e_total: dict = field(default_factory=dict)  # method -> energy
    e2_active: dict = field(default_factory=dict)
    flags: tuple = ()


def solution_to_bundle(sol: ActiveSpaceSolution,
                       producer: str) -> BundleData:
    """Pack one correlated solution; trace violations flag, never abort."""
    rdms = {}
    flags = list(sol.flags)
    for sector in SECTORS:
        packed = pack_sector(sol.rdm2[sector], sector, sol.n)
        target = trace_target(sector, sol.n_alpha, sol.n_beta)
        got = float(np.trace(packed))
        scale = max(1.0, abs(target))
        if abs(got - target) > TRACE_FLAG_TOL * scale:
            flags.append(f"{sector} trace {got:.6f} vs target {target:.6f}")
        rdms[sector] = packed
    return BundleData(n=sol.n, n_alpha=sol.n_alpha, n_beta=sol.n_beta,
                      rdms=rdms, one=sol.one, ints=(sol.t, sol.V),
                      basis_label=sol.basis_label, producer=producer,
                      flags=tuple(flags))


def export(spec: ExportSpec) -> ExportResult:
    mol = load_geometry(spec.geometry)
    n_frozen = frozen_core_count(mol) if spec.freeze_core else 0
    model, target = run_backend(mol, spec.basis, spec.charge, spec.spin,
                                n_frozen)

    paths = {}
    flags = []
    e_total = {}
    e2 = {}
    for tag, sol in (("model", model), ("target", target)):
        if sol.n != sol.n_total - n_frozen:
            raise DimensionMismatch(
                f"{tag}: active space holds {sol.n} orbitals but "
                f"{sol.n_total} total minus {n_frozen} frozen was requested"
            )
        if sol.n_alpha != sol.n_beta + spec.spin:
            raise DimensionMismatch(
                f"{tag}: active occupations ({sol.n_alpha}, {sol.n_beta}) "
                f"do not realize spin {spec.spin}"
            )
        producer = (f"chem_exporter/{sol.method}/{spec.basis}/"
                    f"frozen={n_frozen}/{os.path.basename(spec.geometry)}")
        bundle = solution_to_bundle(sol, producer)
        path = os.path.join(spec.out_dir, tag)
        save_bundle(path, bundle)
        paths[tag] = path
        flags += [f"{tag}: {f}" for f in bundle.flags]
        e_total[sol.method] = sol.e_total
        e2[sol.method] = sol.e2_active
    return ExportResult(model_path=paths["model"],
                        target_path=paths["target"], n=target.n,
                        n_alpha=target.n_alpha, n_beta=target.n_beta,
                        n_frozen=n_frozen, e_total=e_total, e2_active=e2,
                        flags=tuple(flags))
