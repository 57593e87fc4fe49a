"""Orbital rotation of whole bundles.

Rotations must be energy invariants and must match the consumer's own
rotation stage exactly, since downstream coherence optimization assumes
either side can apply C.
"""

import numpy as np
import pytest
import rdmfill

from chem_exporter.bundle_io import BundleData, save_bundle
from chem_exporter.errors import DimensionMismatch
from chem_exporter.rotate import apply_basis

from test_bundle_io import as_bundle_data, toy_content


def orthogonal(n, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture(scope="module")
def toy_bundle():
    ham, energy, rdms, one = toy_content(seed=9)
    return as_bundle_data(ham, rdms, one), energy


def test_identity_is_noop(toy_bundle):
    b, _ = toy_bundle
    same = apply_basis(b, np.eye(b.n))
    for sector, mat in b.rdms.items():
        assert np.abs(same.rdms[sector] - mat).max() < 1e-13
    assert np.abs(same.ints[0] - b.ints[0]).max() < 1e-13
    assert np.abs(same.ints[1] - b.ints[1]).max() < 1e-13
    assert same.producer.endswith("/rotated")


def test_rotation_round_trip(toy_bundle):
    b, _ = toy_bundle
    c = orthogonal(b.n, seed=3)
    back = apply_basis(apply_basis(b, c), c.T)
    for sector, mat in b.rdms.items():
        assert np.abs(back.rdms[sector] - mat).max() < 1e-10
    assert np.abs(back.one[0] - b.one[0]).max() < 1e-10
    assert np.abs(back.ints[1] - b.ints[1]).max() < 1e-10


def test_energy_invariant(toy_bundle, tmp_path):
    b, e_ref = toy_bundle
    rotated = apply_basis(b, orthogonal(b.n, seed=12))
    save_bundle(str(tmp_path / "rot"), rotated)
    loaded = rdmfill.load_bundle(str(tmp_path / "rot"))
    e_rot, _ = rdmfill.energy(loaded.rdms, loaded.ints)
    assert abs(e_rot - e_ref) < 1e-8


def test_matches_consumer_rotation(toy_bundle, tmp_path):
    # both sides apply the same C; arrays must agree to roundoff
    b, _ = toy_bundle
    save_bundle(str(tmp_path / "orig"), b)
    loaded = rdmfill.load_bundle(str(tmp_path / "orig"))
    c = orthogonal(b.n, seed=21)
    ours = apply_basis(b, c)
    theirs_rdms = rdmfill.rotate_set(loaded.rdms, c)
    theirs_ints = rdmfill.rotate_integrals(loaded.ints, c)
    for sector, block in theirs_rdms.items():
        assert np.abs(ours.rdms[sector.value] - block.data).max() < 1e-12
    assert np.abs(ours.ints[0] - theirs_ints.t).max() < 1e-12
    assert np.abs(ours.ints[1] - theirs_ints.V).max() < 1e-12


def test_flags_survive_rotation(toy_bundle):
    b, _ = toy_bundle
    flagged = BundleData(n=b.n, n_alpha=b.n_alpha, n_beta=b.n_beta,
                         rdms=b.rdms, one=b.one, ints=b.ints,
                         basis_label=b.basis_label, producer=b.producer,
                         flags=("spin contamination 0.01",))
    out = apply_basis(flagged, np.eye(b.n))
    assert out.flags == ("spin contamination 0.01",)


def test_rejects_bad_rotation(toy_bundle):
    b, _ = toy_bundle
    with pytest.raises(DimensionMismatch):
        apply_basis(b, np.eye(b.n + 1))
    with pytest.raises(DimensionMismatch):
        apply_basis(b, np.eye(b.n) * 1.5)
