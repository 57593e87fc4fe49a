"""Bundle writing against the consumer that defines the format.

The completion package is the authority on RdmBundle; everything written
here must load there unchanged.  These tests cross-load every bundle and
compare the content hash against the consumer's own writer byte for byte.
"""

import numpy as np
import pytest
import rdmfill

from chem_exporter.bundle_io import BundleData, load_bundle, save_bundle
from chem_exporter.errors import DimensionMismatch
from chem_exporter.pack import sector_dim


def toy_content(seed=11):
    """Exact-diagonalization RDMs plus integrals for a small random system."""
    ham = rdmfill.random_two_body(3, 2, 1, seed=seed)
    energy, sv = rdmfill.ground_state(ham)
    rdms, one = rdmfill.exact_rdms(sv, ham.meta)
    return ham, energy, rdms, one


def as_bundle_data(ham, rdms, one, producer="twin"):
    return BundleData(
        n=ham.meta.n, n_alpha=ham.meta.n_alpha, n_beta=ham.meta.n_beta,
        rdms={s.value: b.data for s, b in rdms.items()},
        one=(one.alpha, one.beta), ints=(ham.ints.t, ham.ints.V),
        basis_label=ham.meta.basis_label, producer=producer)


def test_round_trip(tmp_path):
    ham, _, rdms, one = toy_content()
    b = as_bundle_data(ham, rdms, one)
    save_bundle(str(tmp_path / "b"), b)
    back = load_bundle(str(tmp_path / "b"))
    assert back.n == 3 and back.n_alpha == 2 and back.n_beta == 1
    assert back.basis_label == ham.meta.basis_label
    assert back.producer == "twin"
    for sector, mat in b.rdms.items():
        assert np.array_equal(back.rdms[sector], mat)
    assert np.array_equal(back.one[0], one.alpha)
    assert np.array_equal(back.ints[1], ham.ints.V)


def test_round_trip_minimal(tmp_path):
    # sectors only; optional blocks stay absent
    ham, _, rdms, one = toy_content()
    b = BundleData(n=3, n_alpha=2, n_beta=1,
                   rdms={s.value: blk.data for s, blk in rdms.items()})
    save_bundle(str(tmp_path / "m"), b)
    back = load_bundle(str(tmp_path / "m"))
    assert back.one is None and back.ints is None


def test_consumer_loads_our_bundle(tmp_path):
    ham, _, rdms, one = toy_content()
    save_bundle(str(tmp_path / "x"), as_bundle_data(ham, rdms, one))
    loaded = rdmfill.load_bundle(str(tmp_path / "x"))
    assert loaded.meta == ham.meta
    assert loaded.producer == "twin"
    for sector, block in rdms.items():
        assert np.array_equal(loaded.rdms.get(sector).data, block.data)
    assert np.array_equal(loaded.one.alpha, one.alpha)
    assert np.array_equal(loaded.ints.t, ham.ints.t)
    assert np.array_equal(loaded.ints.V, ham.ints.V)


def test_byte_identical_to_consumer_writer(tmp_path):
    # same content through both writers must hash identically
    ham, _, rdms, one = toy_content()
    rdmfill.save_bundle(str(tmp_path / "theirs"), rdms, one, ham.ints,
                        producer="twin")
    save_bundle(str(tmp_path / "ours"), as_bundle_data(ham, rdms, one))
    assert (rdmfill.bundle_hash(str(tmp_path / "ours"))
            == rdmfill.bundle_hash(str(tmp_path / "theirs")))


def test_consumer_invariants_hold(tmp_path):
    # the hard gate: exported content passes every load-time check and
    # reproduces the oracle energy through the consumer's own contraction
    ham, e_exact, rdms, one = toy_content(seed=4)
    save_bundle(str(tmp_path / "g"), as_bundle_data(ham, rdms, one))
    loaded = rdmfill.load_bundle(str(tmp_path / "g"))
    e_loaded, _ = rdmfill.energy(loaded.rdms, loaded.ints)
    assert abs(e_loaded - e_exact) < 1e-10
    targets = rdmfill.trace_targets(loaded.meta)
    for sector, block in loaded.rdms.items():
        assert abs(block.trace() - targets[sector]) < 1e-10


def test_validation_rejects_bad_blocks():
    d = sector_dim("aaaa", 3)
    good = np.eye(d)
    with pytest.raises(DimensionMismatch):
        BundleData(n=3, n_alpha=2, n_beta=1, rdms={"aaaa": np.zeros((2, 5))})
    skew = good.copy()
    skew[0, 1] = 1.0
    with pytest.raises(DimensionMismatch):
        BundleData(n=3, n_alpha=2, n_beta=1, rdms={"aaaa": skew})
    with pytest.raises(DimensionMismatch):
        BundleData(n=3, n_alpha=2, n_beta=1, rdms={"abba": good})


def test_load_rejects_size_mismatch(tmp_path):
    ham, _, rdms, one = toy_content()
    save_bundle(str(tmp_path / "t"), as_bundle_data(ham, rdms, one))
    with open(tmp_path / "t" / "abab.f64", "ab") as fh:
        fh.write(b"\x00" * 8)
    with pytest.raises(DimensionMismatch):
        load_bundle(str(tmp_path / "t"))


def test_load_missing_descriptor(tmp_path):
    with pytest.raises(DimensionMismatch):
        load_bundle(str(tmp_path))
