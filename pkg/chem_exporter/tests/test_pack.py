"""Sector packing conventions and their round trips.

The layout here has to agree with the completion consumer element for
element; the cross-loading tests in test_bundle_io pin that, these pin the
internal consistency.
"""

import numpy as np
import pytest

from chem_exporter.errors import DimensionMismatch
from chem_exporter.pack import (
    SECTORS,
    pack_sector,
    sector_dim,
    trace_target,
    unpack_sector,
)


def random_packed(sector, n, seed):
    rng = np.random.default_rng(seed)
    d = sector_dim(sector, n)
    m = rng.normal(size=(d, d))
    return (m + m.T) / 2.0


def test_sector_dims():
    assert sector_dim("aaaa", 4) == 6
    assert sector_dim("bbbb", 5) == 10
    assert sector_dim("abab", 4) == 16
    with pytest.raises(DimensionMismatch):
        sector_dim("abba", 4)


def test_round_trip_all_sectors():
    for sector in SECTORS:
        for n in (2, 3, 5):
            packed = random_packed(sector, n, seed=7 * n)
            t4 = unpack_sector(packed, sector, n)
            back = pack_sector(t4, sector, n)
            assert np.array_equal(back, packed)


def test_unpacked_symmetries():
    for sector in SECTORS:
        t4 = unpack_sector(random_packed(sector, 4, seed=1), sector, 4)
        assert np.abs(t4 - t4.transpose(2, 3, 0, 1)).max() < 1e-14
        if sector != "abab":
            assert np.abs(t4 + t4.transpose(1, 0, 2, 3)).max() < 1e-14
            assert np.abs(t4 + t4.transpose(0, 1, 3, 2)).max() < 1e-14


def test_same_spin_single_pair_signs():
    # n=2 has one strict pair (1,0); the stored value appears verbatim and
    # the three signed images fill the rest
    packed = np.array([[0.3]])
    t4 = unpack_sector(packed, "aaaa", 2)
    assert t4[1, 0, 1, 0] == 0.3
    assert t4[0, 1, 1, 0] == -0.3
    assert t4[1, 0, 0, 1] == -0.3
    assert t4[0, 1, 0, 1] == 0.3
    assert t4[0, 0, 0, 0] == 0.0


def test_same_spin_pair_order():
    # strict pairs in row order p = i(i-1)/2 + k: (1,0), (2,0), (2,1)
    d = sector_dim("aaaa", 3)
    packed = np.arange(d * d, dtype=float).reshape(d, d)
    packed = (packed + packed.T) / 2.0
    t4 = unpack_sector(packed, "aaaa", 3)
    pairs = [(1, 0), (2, 0), (2, 1)]
    for p, (i, k) in enumerate(pairs):
        for q, (j, l) in enumerate(pairs):
            assert t4[i, k, j, l] == packed[p, q]


def test_mixed_is_plain_reshape():
    n = 3
    packed = random_packed("abab", n, seed=5)
    t4 = unpack_sector(packed, "abab", n)
    assert np.array_equal(packed.reshape(n, n, n, n), t4)
    assert np.array_equal(pack_sector(t4, "abab", n), packed)


def test_pack_validates_symmetries():
    rng = np.random.default_rng(0)
    bad = rng.normal(size=(3, 3, 3, 3))
    with pytest.raises(DimensionMismatch):
        pack_sector(bad, "abab", 3)  # no pair-exchange symmetry
    sym = bad + bad.transpose(2, 3, 0, 1)
    with pytest.raises(DimensionMismatch):
        pack_sector(sym, "aaaa", 3)  # bra pair not antisymmetric
    with pytest.raises(DimensionMismatch):
        pack_sector(np.zeros((2, 2, 2, 3)), "abab", 2)


def test_unpack_validates_shape():
    with pytest.raises(DimensionMismatch):
        unpack_sector(np.zeros((4, 4)), "aaaa", 4)


def test_trace_targets():
    assert trace_target("aaaa", 3, 2) == 3.0
    assert trace_target("bbbb", 3, 2) == 1.0
    assert trace_target("abab", 3, 2) == 6.0
    assert trace_target("aaaa", 1, 1) == 0.0
