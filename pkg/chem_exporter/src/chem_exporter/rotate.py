"""Orbital-basis rotation of a whole bundle.

Applies the same conjugation the consumer's rotation stage uses, so a
bundle pre-rotated here is bit-compatible with one rotated downstream:
every tensor index transforms by C as a row index.
"""

from __future__ import annotations

import numpy as np

from .bundle_io import BundleData
from .errors import DimensionMismatch
from .pack import pack_sector, unpack_sector


def _rotate_t4(t4: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("pi,qk,ikjl,rj,sl->pqrs", c, c, t4, c, c, optimize=True)


def apply_basis(bundle: BundleData, c: np.ndarray) -> BundleData:
    c = np.asarray(c, dtype=np.float64)
    n = bundle.n
    if c.shape != (n, n):
        raise DimensionMismatch(f"rotation shape {c.shape} for n={n}")
    if np.abs(c @ c.T - np.eye(n)).max() > 1e-8:
        raise DimensionMismatch("rotation matrix is not orthogonal")
    rdms = {}
    for sector, packed in bundle.rdms.items():
        t4 = _rotate_t4(unpack_sector(packed, sector, n), c)
        rdms[sector] = pack_sector(t4, sector, n)
    one = bundle.one
    if one is not None:
        one = (c @ one[0] @ c.T, c @ one[1] @ c.T)
    ints = bundle.ints
    if ints is not None:
        ints = (c @ ints[0] @ c.T, _rotate_t4(ints[1], c))
    return BundleData(n=n, n_alpha=bundle.n_alpha, n_beta=bundle.n_beta,
                      rdms=rdms, one=one, ints=ints,
                      basis_label=bundle.basis_label,
                      producer=bundle.producer + "/rotated",
                      flags=bundle.flags)
