"""Sector packing of spin-resolved 2-RDM tensors.

Index convention throughout: t4[i, k, j, l] = <a+_i a+_k a_l a_j>, spins
(sigma, tau, sigma, tau) with tau = sigma for same-spin sectors and
(alpha, beta) for the mixed one.  Same-spin rows are the strict pairs
i > k in row-major pair order p = i(i-1)/2 + k, carrying the element
verbatim (no normalization weights); mixed rows are all ordered pairs
p = i*n + k.  This must match the consumer's layout exactly, which the
cross-loading tests pin.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

SECTORS = ("aaaa", "bbbb", "abab")
_TOL = 1e-8


def sector_dim(sector: str, n: int) -> int:
    if sector not in SECTORS:
        raise DimensionMismatch(f"unknown sector {sector!r}")
    return n * (n - 1) // 2 if sector != "abab" else n * n


def _pairs(sector: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    if sector == "abab":
        i, k = np.divmod(np.arange(n * n), n)
    else:
        i, k = np.tril_indices(n, k=-1)
        order = np.argsort(i * (i - 1) // 2 + k)
        i, k = i[order], k[order]
    return i, k


def _check(cond: bool, what: str) -> None:
    if not cond:
        raise DimensionMismatch(what)


def pack_sector(t4: np.ndarray, sector: str, n: int) -> np.ndarray:
    """d-by-d packed matrix from the 4-index sector tensor."""
    t4 = np.asarray(t4, dtype=np.float64)
    _check(t4.shape == (n, n, n, n), f"{sector}: tensor shape {t4.shape}")
    scale = max(1.0, float(np.abs(t4).max()))
    _check(np.abs(t4 - t4.transpose(2, 3, 0, 1)).max() < _TOL * scale,
           f"{sector}: tensor not symmetric under pair exchange")
    if sector != "abab":
        _check(np.abs(t4 + t4.transpose(1, 0, 2, 3)).max() < _TOL * scale,
               f"{sector}: tensor not antisymmetric in the bra pair")
    i, k = _pairs(sector, n)
    return np.ascontiguousarray(t4[i[:, None], k[:, None], i[None, :],
                                   k[None, :]])


def unpack_sector(packed: np.ndarray, sector: str, n: int) -> np.ndarray:
    d = sector_dim(sector, n)
    packed = np.asarray(packed, dtype=np.float64)
    _check(packed.shape == (d, d), f"{sector}: packed shape {packed.shape}")
    if sector == "abab":
        return packed.reshape(n, n, n, n).copy()
    i, k = _pairs(sector, n)
    t4 = np.zeros((n, n, n, n))
    t4[i[:, None], k[:, None], i[None, :], k[None, :]] = packed
    # each stored element appears once; the two antisymmetrizations fill the
    # remaining sign blocks and preserve pair-exchange symmetry
    t4 = t4 - t4.transpose(1, 0, 2, 3)
    t4 = t4 - t4.transpose(0, 1, 3, 2)
    return t4


def trace_target(sector: str, n_alpha: int, n_beta: int) -> float:
    occ = {"aaaa": n_alpha * (n_alpha - 1) / 2.0,
           "bbbb": n_beta * (n_beta - 1) / 2.0,
           "abab": float(n_alpha * n_beta)}
    return occ[sector]
