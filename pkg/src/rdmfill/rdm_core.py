"""Core data model for spin-resolved two-particle reduced density matrices.

A 2-RDM element is P_{ik,jl} = <a+_i a+_k a_l a_j>.  With real orbitals and
collinear spin only three sectors are nonzero (aa,aa / bb,bb / ab,ab) and each
is stored as a real symmetric matrix over pair labels:

* same-spin sectors run over strict pairs (i > k), flattened row-major as
  p = i(i-1)/2 + k, so d = n(n-1)/2; antisymmetry of the fermion pair is
  implicit and values are stored without sqrt(2) pair weights;
* the mixed sector runs over all ordered pairs, p = i*n + k, d = n*n.

All arrays are float64 and treated as immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateSystem,
    DimensionMismatch,
    NotIdempotent,
    RankExhausted,
    SymmetryViolation,
    ZeroReference,
)

SYMMETRY_RTOL = 1e-12


class SpinSector(Enum):
    AA = "aaaa"
    BB = "bbbb"
    AB = "abab"

    @property
    def same_spin(self) -> bool:
        return self is not SpinSector.AB


@dataclass(frozen=True)
class SystemMeta:
    """Orbital and electron counts for one system."""

    n: int
    n_alpha: int
    n_beta: int
    basis_label: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch(f"need at least one orbital, got n={self.n}")
        for name, occ in (("n_alpha", self.n_alpha), ("n_beta", self.n_beta)):
            if not 0 <= occ <= self.n:
                raise DimensionMismatch(f"{name}={occ} outside [0, {self.n}]")

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta


def sector_dim(sector: SpinSector, n: int) -> int:
    return n * (n - 1) // 2 if sector.same_spin else n * n


def same_spin_pairs(n: int) -> np.ndarray:
    """Strict pairs (i, k), i > k, in packing order. Shape (d, 2)."""
    pairs = [(i, k) for i in range(n) for k in range(i)]
    return np.asarray(pairs, dtype=np.intp).reshape(-1, 2)


def pair_index(sector: SpinSector, n: int, i: int, k: int) -> int:
    """Flat row label of the (i, k) pair in the given sector's packing."""
    if sector.same_spin:
        if not i > k:
            raise DimensionMismatch(f"same-spin packing needs i > k, got ({i}, {k})")
        return i * (i - 1) // 2 + k
    return i * n + k


def trace_targets(meta: SystemMeta) -> dict[SpinSector, float]:
    """Exact pair-counting traces of the packed sector matrices."""
    na, nb = meta.n_alpha, meta.n_beta
    return {
        SpinSector.AA: na * (na - 1) / 2.0,
        SpinSector.BB: nb * (nb - 1) / 2.0,
        SpinSector.AB: float(na * nb),
    }


def _frozen_array(a, shape=None) -> np.ndarray:
    out = np.array(a, dtype=np.float64, order="C")
    if shape is not None and out.shape != shape:
        raise DimensionMismatch(f"expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PackedRDM:
    """One spin sector packed to a real symmetric d x d matrix."""

    sector: SpinSector
    data: np.ndarray
    meta: SystemMeta

    def __post_init__(self):
        d = sector_dim(self.sector, self.meta.n)
        data = _frozen_array(self.data, (d, d))
        asym = np.linalg.norm(data - data.T)
        if asym > SYMMETRY_RTOL * max(1.0, np.linalg.norm(data)):
            raise SymmetryViolation(
                f"{self.sector.value} packed matrix asymmetric: |A-A^T|={asym:.3e}"
            )
        object.__setattr__(self, "data", data)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.data))


@dataclass(frozen=True)
class OneRDM:
    """Spin-resolved one-particle RDM, D_ij = <a+_i a_j>."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.alpha)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"1-RDM must be square, got {a.shape}")
        b = _frozen_array(self.beta, a.shape)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class SpinRDMSet:
    """The three stored sectors of one system; missing sectors mean zero."""

    meta: SystemMeta
    aaaa: PackedRDM | None = None
    bbbb: PackedRDM | None = None
    abab: PackedRDM | None = None

    def __post_init__(self):
        for sector, block in self.items():
            if block.sector is not sector:
                raise DimensionMismatch(
                    f"block stored under {sector} is tagged {block.sector}"
                )
            if block.meta.n != self.meta.n:
                raise DimensionMismatch("sector and set disagree on orbital count")

    def get(self, sector: SpinSector) -> PackedRDM | None:
        return {SpinSector.AA: self.aaaa, SpinSector.BB: self.bbbb,
                SpinSector.AB: self.abab}[sector]

    def items(self):
        for sector in SpinSector:
            block = self.get(sector)
            if block is not None:
                yield sector, block

    def replace(self, sector: SpinSector, data: np.ndarray) -> "SpinRDMSet":
        new = {s.value: b for s, b in self.items()}
        new[sector.value] = PackedRDM(sector, data, self.meta)
        return SpinRDMSet(self.meta, aaaa=new.get("aaaa"), bbbb=new.get("bbbb"),
                          abab=new.get("abab"))


@dataclass(frozen=True)
class IntegralSet:
    """One- and two-electron integrals over real spatial orbitals.

    V is indexed to pair with the 2-RDM: the energy contraction is
    (1/2) sum V_ikjl P_ik,jl, so V_ikjl = (ij|kl) in chemists' notation.
    """

    t: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.t)
        n = t.shape[0]
        if t.shape != (n, n):
            raise DimensionMismatch(f"t must be square, got {t.shape}")
        V = _frozen_array(self.V, (n, n, n, n))
        scale = max(1.0, float(np.abs(V).max()), float(np.abs(t).max()))
        if np.abs(t - t.T).max() > SYMMETRY_RTOL * scale:
            raise SymmetryViolation("t is not symmetric")
        # generators of the 8-fold real-integral group in this index order
        for perm, label in (((2, 1, 0, 3), "i<->j"), ((0, 3, 2, 1), "k<->l"),
                            ((1, 0, 3, 2), "pair swap")):
            if np.abs(V - V.transpose(perm)).max() > SYMMETRY_RTOL * scale:
                raise SymmetryViolation(f"V breaks {label} symmetry")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "V", V)

    @property
    def n(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Magnitude-ordered symmetric eigendecomposition.

    lam holds |eigenvalue| (singular values) descending; signs holds the
    original eigenvalue signs so U @ diag(lam * signs) @ U.T reconstructs
    the input exactly even when it is indefinite.
    """

    U: np.ndarray
    lam: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen_array(self.U))
        object.__setattr__(self, "lam", _frozen_array(self.lam))
        object.__setattr__(self, "signs", _frozen_array(self.signs))

    def reconstruct(self, rank: int | None = None) -> np.ndarray:
        r = self.lam.size if rank is None else rank
        U = self.U[:, :r]
        return (U * (self.lam[:r] * self.signs[:r])) @ U.T


# ---------------------------------------------------------------------------
# packing


def _check_close(norm_viol: float, norm_ref: float, what: str):
    if norm_viol > SYMMETRY_RTOL * max(1.0, norm_ref):
        raise SymmetryViolation(f"{what} violated: residual {norm_viol:.3e}")


def pack_sector(t4: np.ndarray, sector: SpinSector, meta: SystemMeta) -> PackedRDM:
    """Pack a full 4-index sector tensor t4[i,k,j,l] = P_ik,jl."""
    n = meta.n
    t4 = np.asarray(t4, dtype=np.float64)
    if t4.shape != (n, n, n, n):
        raise DimensionMismatch(f"expected shape {(n,) * 4}, got {t4.shape}")
    ref = np.linalg.norm(t4)
    _check_close(np.linalg.norm(t4 - t4.transpose(2, 3, 0, 1)), ref, "hermiticity")
    if sector.same_spin:
        _check_close(np.linalg.norm(t4 + t4.transpose(1, 0, 2, 3)), ref,
                     "row-pair antisymmetry")
        _check_close(np.linalg.norm(t4 + t4.transpose(0, 1, 3, 2)), ref,
                     "column-pair antisymmetry")
        pairs = same_spin_pairs(n)
        ii, kk = pairs[:, 0], pairs[:, 1]
        packed = t4[ii[:, None], kk[:, None], ii[None, :], kk[None, :]]
    else:
        packed = t4.reshape(n * n, n * n)
    packed = 0.5 * (packed + packed.T)  # kill round-off asymmetry only
    return PackedRDM(sector, packed, meta)


def unpack_sector(p: PackedRDM) -> np.ndarray:
    """Expand a packed sector back to the full 4-index tensor."""
    n = p.meta.n
    if not p.sector.same_spin:
        return p.data.reshape(n, n, n, n).copy()
    pairs = same_spin_pairs(n)
    ii, kk = pairs[:, 0], pairs[:, 1]
    t4 = np.zeros((n, n, n, n))
    t4[ii[:, None], kk[:, None], ii[None, :], kk[None, :]] = p.data
    t4 = t4 - t4.transpose(1, 0, 2, 3)
    t4 = t4 - t4.transpose(0, 1, 3, 2)
    return t4


# ---------------------------------------------------------------------------
# physical contractions


def contract_to_1rdm(rdms: SpinRDMSet) -> OneRDM:
    """Partial trace down to the 1-RDM, D = tr_2 P / (N_el - 1)."""
    meta = rdms.meta
    if meta.n_electrons < 2:
        raise DegenerateSystem(
            f"1-RDM contraction needs at least two electrons, have {meta.n_electrons}"
        )
    n = meta.n
    zero4 = np.zeros((n, n, n, n))

    def full(sector):
        block = rdms.get(sector)
        return unpack_sector(block) if block is not None else zero4

    a4, b4, m4 = full(SpinSector.AA), full(SpinSector.BB), full(SpinSector.AB)
    denom = meta.n_electrons - 1
    d_alpha = (np.einsum("ikjk->ij", a4) + np.einsum("ikjk->ij", m4)) / denom
    d_beta = (np.einsum("ikjk->ij", b4) + np.einsum("ikil->kl", m4)) / denom
    return OneRDM(d_alpha, d_beta)


def energy(rdms: SpinRDMSet, ints: IntegralSet) -> tuple[float, float]:
    """Electronic energy and its two-electron part, (E, E2)."""
    if ints.n != rdms.meta.n:
        raise DimensionMismatch("integral and RDM orbital counts differ")
    one = contract_to_1rdm(rdms)
    e1 = float(np.einsum("ij,ij->", ints.t, one.alpha + one.beta))
    e2 = 0.0
    for sector, block in rdms.items():
        t4 = unpack_sector(block)
        contrib = float(np.einsum("ikjl,ikjl->", ints.V, t4))
        # the ba,ba sector mirrors ab,ab, so the mixed block enters twice
        e2 += 0.5 * contrib if sector.same_spin else contrib
    return e1 + e2, e2


def hf_2rdm(d_alpha: np.ndarray, d_beta: np.ndarray) -> SpinRDMSet:
    """Single-determinant 2-RDM, P_ik,jl = D_ij D_kl - D_il D_kj per spin."""
    d_alpha = np.asarray(d_alpha, dtype=np.float64)
    d_beta = np.asarray(d_beta, dtype=np.float64)
    if d_alpha.shape != d_beta.shape or d_alpha.ndim != 2:
        raise DimensionMismatch("spin blocks must be square and equal-shaped")
    n = d_alpha.shape[0]
    occs = []
    for name, d in (("alpha", d_alpha), ("beta", d_beta)):
        if np.linalg.norm(d @ d - d) > 1e-8 * max(1.0, np.linalg.norm(d)):
            raise NotIdempotent(f"{name} 1-RDM is not idempotent")
        occ = float(np.trace(d))
        if abs(occ - round(occ)) > 1e-8:
            raise NotIdempotent(f"{name} occupation {occ} is not an integer")
        occs.append(int(round(occ)))
    meta = SystemMeta(n=n, n_alpha=occs[0], n_beta=occs[1])

    def same_spin(d):
        return np.einsum("ij,kl->ikjl", d, d) - np.einsum("il,kj->ikjl", d, d)

    mixed = np.einsum("ij,kl->ikjl", d_alpha, d_beta)
    return SpinRDMSet(
        meta,
        aaaa=pack_sector(same_spin(d_alpha), SpinSector.AA, meta),
        bbbb=pack_sector(same_spin(d_beta), SpinSector.BB, meta),
        abab=pack_sector(mixed, SpinSector.AB, meta),
    )


# ---------------------------------------------------------------------------
# spectra and errors


def rel_error(approx: np.ndarray, reference: np.ndarray) -> float:
    """Frobenius relative error |A - M| / |M|."""
    reference = np.asarray(reference, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if approx.shape != reference.shape:
        raise DimensionMismatch(
            f"shape mismatch {approx.shape} vs {reference.shape}"
        )
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0.0:
        raise ZeroReference("relative error against a zero matrix")
    return float(np.linalg.norm(approx - reference) / ref_norm)


def set_rel_error(approx: SpinRDMSet, reference: SpinRDMSet) -> float:
    """Relative error with all stored sectors of the reference aggregated."""
    num = 0.0
    den = 0.0
    for sector, ref_block in reference.items():
        app_block = approx.get(sector)
        app = app_block.data if app_block is not None else 0.0
        num += float(np.linalg.norm(app - ref_block.data) ** 2)
        den += float(np.linalg.norm(ref_block.data) ** 2)
    if den == 0.0:
        raise ZeroReference("relative error against an all-zero RDM set")
    return float(np.sqrt(num / den))


def spectrum(matrix: np.ndarray | PackedRDM) -> SpectralDecomposition:
    """Symmetric eigendecomposition ordered by |eigenvalue| descending."""
    m = matrix.data if isinstance(matrix, PackedRDM) else np.asarray(matrix, float)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    signs = np.where(vals < 0.0, -1.0, 1.0)
    return SpectralDecomposition(U=vecs[:, order], lam=np.abs(vals), signs=signs)


def rank_truncation_error(lam: np.ndarray, r: int) -> float:
    """Relative Frobenius error of keeping the r largest singular values."""
    total = float(np.sqrt(np.sum(lam**2)))
    if total == 0.0:
        raise ZeroReference("truncation error of a zero spectrum")
    return float(np.sqrt(np.sum(lam[r:] ** 2)) / total)


def select_rank(matrix: np.ndarray | PackedRDM, eps0: float = 0.01,
                kappa: float = 0.5) -> int:
    """Smallest rank whose truncation error falls below kappa * eps0."""
    threshold = kappa * eps0
    if not threshold > 0.0:
        raise RankExhausted(f"threshold kappa*eps0 = {threshold} is not positive")
    lam = spectrum(matrix).lam
    for r in range(lam.size + 1):
        if rank_truncation_error(lam, r) < threshold:
            return max(r, 1)
    raise RankExhausted("no rank meets the target")  # unreachable for finite input
