"""Export orchestration exercised on synthetic solutions.

The chemistry backend is replaced by exact-diagonalization output, so
packing, invariant checks, flagging and the on-disk product are all tested
without an electronic-structure install.  Backend-coupled behavior lives in
test_export_pyscf and only runs where that install exists.
"""

import importlib
import importlib.util

import numpy as np
import pytest
import rdmfill

from chem_exporter.backend import ActiveSpaceSolution
from chem_exporter.errors import ChemistryBackendFailure, DimensionMismatch
from chem_exporter.export import ExportSpec, export, solution_to_bundle
from chem_exporter.pack import SECTORS, unpack_sector

LIH_GEOMETRY = "Li 0 0 0\nH 0 0 1.6\n"

# the package re-exports the export() callable under its own name, so the
# submodule has to be patched through the module object
EXPORT_MODULE = importlib.import_module("chem_exporter.export")


def toy_solution(method, seed=4, n_total=None):
    """Dress oracle RDMs of a random 3-orbital system as a backend result."""
    ham = rdmfill.random_two_body(3, 2, 1, seed=seed)
    e_exact, sv = rdmfill.ground_state(ham)
    rdms, one = rdmfill.exact_rdms(sv, ham.meta)
    e, e2 = rdmfill.energy(rdms, ham.ints)
    rdm2 = {s.value: rdmfill.unpack_sector(b) for s, b in rdms.items()}
    return ActiveSpaceSolution(
        n=3, n_total=3 if n_total is None else n_total, n_alpha=2, n_beta=1,
        basis_label=ham.meta.basis_label, t=ham.ints.t, V=ham.ints.V,
        rdm2=rdm2, one=(one.alpha, one.beta), e_total=e_exact, e2_active=e2,
        method=method, flags=())


def test_solution_to_bundle_exact_traces():
    sol = toy_solution("ccsd")
    bundle = solution_to_bundle(sol, producer="p")
    assert bundle.flags == ()
    assert set(bundle.rdms) == set(SECTORS)
    assert bundle.producer == "p"


def test_trace_violation_flags_not_fatal():
    sol = toy_solution("ccsd")
    rdm2 = dict(sol.rdm2)
    bumped = rdm2["abab"] + 0.01 * np.einsum(
        "ij,kl->ikjl", np.eye(3), np.eye(3))
    rdm2["abab"] = bumped
    sol = ActiveSpaceSolution(
        n=sol.n, n_total=sol.n_total, n_alpha=sol.n_alpha, n_beta=sol.n_beta,
        basis_label=sol.basis_label, t=sol.t, V=sol.V, rdm2=rdm2, one=sol.one,
        e_total=sol.e_total, e2_active=sol.e2_active, method=sol.method,
        flags=sol.flags)
    bundle = solution_to_bundle(sol, producer="p")
    assert len(bundle.flags) == 1
    assert bundle.flags[0].startswith("abab trace")


def fake_backend(n_total):
    def run(mol, basis, charge, spin, n_frozen):
        return (toy_solution("mp2-unrelaxed", n_total=n_total),
                toy_solution("ccsd", n_total=n_total))
    return run


def write_geometry(tmp_path):
    path = tmp_path / "lih.txt"
    path.write_text(LIH_GEOMETRY)
    return str(path)


def test_export_end_to_end(tmp_path, monkeypatch):
    # LiH freezes one core orbital, so the fake active space must report
    # four orbitals before freezing
    monkeypatch.setattr(EXPORT_MODULE, "run_backend", fake_backend(4))
    spec = ExportSpec(geometry=write_geometry(tmp_path), basis="toy",
                      out_dir=str(tmp_path / "out"), spin=1)
    result = export(spec)
    assert result.n_frozen == 1
    assert result.n == 3 and result.n_alpha == 2 and result.n_beta == 1
    assert set(result.e_total) == {"mp2-unrelaxed", "ccsd"}
    assert result.flags == ()

    # both products load through the consumer and reproduce the oracle
    for path, method in ((result.model_path, "mp2-unrelaxed"),
                         (result.target_path, "ccsd")):
        loaded = rdmfill.load_bundle(path)
        e, e2 = rdmfill.energy(loaded.rdms, loaded.ints)
        assert abs(e - result.e_total[method]) < 1e-10
        assert abs(e2 - result.e2_active[method]) < 1e-10
        assert method in loaded.producer
        assert "lih.txt" in loaded.producer


def test_export_checks_active_count(tmp_path, monkeypatch):
    # fake claims 3 active out of 3 total while one orbital is frozen
    monkeypatch.setattr(EXPORT_MODULE, "run_backend", fake_backend(3))
    spec = ExportSpec(geometry=write_geometry(tmp_path), basis="toy",
                      out_dir=str(tmp_path / "out"), spin=1)
    with pytest.raises(DimensionMismatch):
        export(spec)


def test_export_checks_spin(tmp_path, monkeypatch):
    monkeypatch.setattr(EXPORT_MODULE, "run_backend", fake_backend(4))
    spec = ExportSpec(geometry=write_geometry(tmp_path), basis="toy",
                      out_dir=str(tmp_path / "out"), spin=0)
    with pytest.raises(DimensionMismatch):
        export(spec)


def test_singlet_sectors_match(tmp_path):
    # spin-balanced ground state: both same-spin sectors identical
    ham = rdmfill.hubbard_chain(3, 2, 2, u=4.0)
    _, sv = rdmfill.ground_state(ham)
    rdms, one = rdmfill.exact_rdms(sv, ham.meta)
    sol = ActiveSpaceSolution(
        n=3, n_total=3, n_alpha=2, n_beta=2, basis_label="hubbard",
        t=ham.ints.t, V=ham.ints.V,
        rdm2={s.value: rdmfill.unpack_sector(b) for s, b in rdms.items()},
        one=(one.alpha, one.beta), e_total=0.0, e2_active=0.0,
        method="ccsd", flags=())
    bundle = solution_to_bundle(sol, producer="p")
    assert np.abs(bundle.rdms["aaaa"] - bundle.rdms["bbbb"]).max() < 1e-10


@pytest.mark.skipif(importlib.util.find_spec("pyscf") is not None,
                    reason="backend installed")
def test_missing_backend_reported(tmp_path):
    spec = ExportSpec(geometry=write_geometry(tmp_path), basis="sto-3g",
                      out_dir=str(tmp_path / "out"))
    with pytest.raises(ChemistryBackendFailure, match="pyscf"):
        export(spec)
