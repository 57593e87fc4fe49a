"""Backend-coupled checks; the whole module skips without an install.

Small closed-shell molecules keep the runtime in seconds while still
exercising frozen cores, the single-orbital-set convention and the energy
bookkeeping end to end.
"""

import numpy as np
import pytest
import rdmfill

pyscf = pytest.importorskip("pyscf")

from chem_exporter.export import ExportSpec, export  # noqa: E402

H2 = "H 0 0 0\nH 0 0 0.7414\n"
WATER = """
O  0.000000  0.000000  0.117300
H  0.000000  0.757200 -0.469200
H  0.000000 -0.757200 -0.469200
"""
LIH = "Li 0 0 0\nH 0 0 1.5957\n"


def run_export(tmp_factory, name, text, basis):
    root = tmp_factory.mktemp(name)
    geom = root / "geom.txt"
    geom.write_text(text)
    spec = ExportSpec(geometry=str(geom), basis=basis,
                      out_dir=str(root / "out"))
    return export(spec)


@pytest.fixture(scope="module")
def h2_export(tmp_path_factory):
    return run_export(tmp_path_factory, "h2", H2, "sto-3g")


@pytest.fixture(scope="module")
def water_export(tmp_path_factory):
    return run_export(tmp_path_factory, "water", WATER, "sto-3g")


def test_h2_ccsd_matches_exact_diagonalization(h2_export):
    # two electrons: the coupled-cluster target is exact, so the oracle run
    # on the exported integrals must land on the same electronic energy
    loaded = rdmfill.load_bundle(h2_export.target_path)
    assert h2_export.n_frozen == 0
    e_fci, _ = rdmfill.ground_state(
        rdmfill.ToyHamiltonian(loaded.meta, loaded.ints))
    e_ccsd, _ = rdmfill.energy(loaded.rdms, loaded.ints)
    assert abs(e_ccsd - e_fci) < 1e-8


def test_two_electron_energy_agreement(h2_export, water_export):
    # consumer-side contraction against the backend's own active-space sum
    for result in (h2_export, water_export):
        for path, method in ((result.model_path, "mp2-unrelaxed"),
                             (result.target_path, "ccsd")):
            loaded = rdmfill.load_bundle(path)
            _, e2 = rdmfill.energy(loaded.rdms, loaded.ints)
            assert abs(e2 - result.e2_active[method]) < 1e-6


def test_water_frozen_core(water_export):
    assert water_export.n_frozen == 1
    assert water_export.n == 6
    assert water_export.n_alpha == water_export.n_beta == 4


def test_singlet_same_spin_sectors(water_export):
    loaded = rdmfill.load_bundle(water_export.target_path)
    aa = loaded.rdms.get(rdmfill.SpinSector.AA).data
    bb = loaded.rdms.get(rdmfill.SpinSector.BB).data
    assert np.abs(aa - bb).max() < 1e-10


def test_trace_sum_rules(water_export):
    loaded = rdmfill.load_bundle(water_export.target_path)
    targets = rdmfill.trace_targets(loaded.meta)
    for sector, block in loaded.rdms.items():
        assert abs(block.trace() - targets[sector]) < 1e-6
    assert water_export.flags == ()


def test_one_rdm_consistency(water_export):
    # partial trace of the stored 2-RDM against the backend 1-RDM
    for path in (water_export.model_path, water_export.target_path):
        loaded = rdmfill.load_bundle(path)
        contracted = rdmfill.contract_to_1rdm(loaded.rdms)
        assert np.abs(contracted.alpha - loaded.one.alpha).max() < 1e-6
        assert np.abs(contracted.beta - loaded.one.beta).max() < 1e-6


def test_ccpvdz_completion_spot_check(tmp_path_factory):
    # optional acceptance check: a real correlation-consistent basis run
    # through the completion pipeline reproduces the target to a couple
    # of percent
    result = run_export(tmp_path_factory, "lih", LIH, "cc-pvdz")
    model = rdmfill.load_bundle(result.model_path)
    target = rdmfill.load_bundle(result.target_path)
    report = rdmfill.run_noiseless(model, target,
                                  rdmfill.PipelineConfig(seed=0))
    assert report.eps_set_post is not None
    assert report.eps_set_post <= 2e-2
