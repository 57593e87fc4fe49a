"""Leverage-score coherence of low-rank RDM factors and its minimization.

Coherence mu = (d/r) * max_row |e_p^T U|^2 controls how informative uniform
element sampling is; mu = 1 is ideal, mu = d/r means one row carries all the
weight.  Orbital rotations act on pair space, so a single orbital-space C is
optimized against a smooth surrogate (sum of 8th powers of rotated row norms)
summed over all active sectors, with Haar-random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import minimize as scipy_minimize

from .errors import DimensionMismatch, NonFiniteObjective
from .rdm_core import (
    IntegralSet,
    PackedRDM,
    SpectralDecomposition,
    SpinRDMSet,
    SpinSector,
    same_spin_pairs,
    pack_sector,
    spectrum,
    unpack_sector,
)

BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class CoherenceReport:
    mu: float
    leverage: np.ndarray  # per-row leverage (d/r) |e_p^T U|^2
    d: int
    r: int

    def __post_init__(self):
        lev = np.array(self.leverage, dtype=np.float64)
        lev.setflags(write=False)
        object.__setattr__(self, "leverage", lev)


@dataclass(frozen=True)
class RotationBasis:
    """Orthogonal orbital-space rotation with provenance of its construction."""

    C: np.ndarray
    provenance: str = "identity"

    def __post_init__(self):
        c = np.array(self.C, dtype=np.float64)
        drift = np.linalg.norm(c.T @ c - np.eye(c.shape[0]))
        if drift > 1e-8:
            raise DimensionMismatch(f"rotation not orthogonal, drift {drift:.2e}")
        c.setflags(write=False)
        object.__setattr__(self, "C", c)


def coherence(u: np.ndarray | SpectralDecomposition, r: int | None = None
              ) -> CoherenceReport:
    """Coherence of a column-orthonormal factor (or leading r columns)."""
    if isinstance(u, SpectralDecomposition):
        u = u.U
    u = np.asarray(u, dtype=np.float64)
    if r is not None:
        u = u[:, :r]
    d, r = u.shape
    if not (1 <= r <= d):
        raise DimensionMismatch(f"need 1 <= r <= d, got r={r}, d={d}")
    lev = (d / r) * np.einsum("ps,ps->p", u, u)
    mu = float(lev.max())
    if mu < 1.0 - BOUND_SLACK or mu > d / r + BOUND_SLACK:
        raise DimensionMismatch(
            f"mu={mu} outside [1, d/r]; factor is not column-orthonormal"
        )
    return CoherenceReport(mu=mu, leverage=lev, d=d, r=r)


# ---------------------------------------------------------------------------
# rotations


def rotate_sector(block: PackedRDM, c: np.ndarray) -> PackedRDM:
    """Conjugate one packed sector by the orbital rotation C."""
    n = block.meta.n
    if c.shape != (n, n):
        raise DimensionMismatch(f"rotation shape {c.shape} for n={n}")
    t4 = unpack_sector(block)
    t4 = np.einsum("pi,qk,ikjl,rj,sl->pqrs", c, c, t4, c, c, optimize=True)
    return pack_sector(t4, block.sector, block.meta)


def rotate_set(rdms: SpinRDMSet, c: np.ndarray) -> SpinRDMSet:
    kwargs = {s.value: rotate_sector(b, c) for s, b in rdms.items()}
    return SpinRDMSet(rdms.meta, **kwargs)


def rotate_integrals(ints: IntegralSet, c: np.ndarray) -> IntegralSet:
    t = c @ ints.t @ c.T
    v = np.einsum("pi,qk,ikjl,rj,sl->pqrs", c, c, ints.V, c, c, optimize=True)
    return IntegralSet(t, v)


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


# ---------------------------------------------------------------------------
# surrogate objective


@dataclass(frozen=True)
class SectorModes:
    """Rank-r singular vectors of one sector, unpacked for rotation.

    u_full[i, k, s] carries the s-th singular vector on the (i, k) pair grid;
    same-spin vectors are expanded antisymmetrically, and the half weight
    restricts the row sum back to strict pairs.
    """

    sector: SpinSector
    u_full: np.ndarray
    r: int
    d: int
    weight: float


def sector_modes(block: PackedRDM, r: int) -> SectorModes:
    dec = spectrum(block)
    n = block.meta.n
    if not (1 <= r <= block.d):
        raise DimensionMismatch(f"rank {r} invalid for d={block.d}")
    u = dec.U[:, :r]
    if block.sector.same_spin:
        u_full = np.zeros((n, n, r))
        pairs = same_spin_pairs(n)
        ii, kk = pairs[:, 0], pairs[:, 1]
        u_full[ii, kk, :] = u
        u_full[kk, ii, :] = -u
        weight = 0.5
    else:
        u_full = u.reshape(n, n, r)
        weight = 1.0
    return SectorModes(block.sector, u_full, r, block.d, weight)


def rotated_row_norms(modes: SectorModes, c: np.ndarray) -> np.ndarray:
    """Squared row norms of the rotated factor, on packed row labels."""
    w = np.einsum("pi,qk,iks->pqs", c, c, modes.u_full, optimize=True)
    rho = np.einsum("pqs,pqs->pq", w, w)
    if modes.sector.same_spin:
        pairs = same_spin_pairs(c.shape[0])
        return rho[pairs[:, 0], pairs[:, 1]]
    return rho.reshape(-1)


def mu_after(modes: SectorModes, c: np.ndarray) -> float:
    return float((modes.d / modes.r) * rotated_row_norms(modes, c).max())


def surrogate_objective(modes_list, c: np.ndarray) -> tuple[float, np.ndarray]:
    """Smooth stand-in for max leverage: sum over rows of (row norm^2)^4.

    Returns the scalar and its gradient with respect to the entries of C,
    summed over all sectors in modes_list.
    """
    if isinstance(modes_list, SectorModes):
        modes_list = [modes_list]
    total = 0.0
    grad = np.zeros_like(c)
    for modes in modes_list:
        u = modes.u_full
        w = np.einsum("pi,qk,iks->pqs", c, c, u, optimize=True)
        rho = np.einsum("pqs,pqs->pq", w, w)
        total += modes.weight * float(np.sum(rho**4))
        g = (modes.weight * 8.0) * rho[:, :, None] ** 3 * w
        b1 = np.einsum("qk,jks->jqs", c, u, optimize=True)
        b2 = np.einsum("pi,ijs->pjs", c, u, optimize=True)
        grad += np.einsum("aqs,jqs->aj", g, b1, optimize=True)
        grad += np.einsum("pas,pjs->aj", g, b2, optimize=True)
    if not np.isfinite(total):
        raise NonFiniteObjective("surrogate objective is not finite")
    return total, grad


def _antisym_from_params(x: np.ndarray, n: int) -> np.ndarray:
    a = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    a[iu] = x
    return a - a.T


def _optimize_from(c0: np.ndarray, modes_list, max_iter: int, grad_tol: float
                   ) -> np.ndarray:
    """Minimize the surrogate over C = C0 expm(A), A antisymmetric."""
    n = c0.shape[0]
    iu = np.triu_indices(n, k=1)

    def fun(x):
        a = _antisym_from_params(x, n)
        expa = scipy.linalg.expm(a)
        c = c0 @ expa
        val, grad_c = surrogate_objective(modes_list, c)
        # adjoint of the expm Frechet derivative maps dF/dC to dF/dA
        _, m = scipy.linalg.expm_frechet(a.T, c0.T @ grad_c)
        grad_a = m - m.T
        return val, grad_a[iu]

    res = scipy_minimize(fun, np.zeros(iu[0].size), jac=True, method="L-BFGS-B",
                         options={"maxiter": max_iter, "maxfun": 4 * max_iter,
                                  "gtol": grad_tol, "ftol": 1e-15})
    c = c0 @ scipy.linalg.expm(_antisym_from_params(res.x, n))
    q, r = np.linalg.qr(c)  # strip accumulated round-off from orthogonality
    return q * np.sign(np.diag(r))


def minimize_coherence(modes_list, n_starts: int = 10, seed: int = 0,
                       max_iter: int = 2000, grad_tol: float = 1e-8
                       ) -> RotationBasis:
    """Search for the orbital rotation with the smallest worst-sector mu.

    Candidates are the raw identity, a surrogate descent from the identity,
    and descents from n_starts Haar-random rotations; the raw identity in the
    pool guarantees the result never exceeds the unrotated coherence.
    """
    if isinstance(modes_list, SectorModes):
        modes_list = [modes_list]
    n = modes_list[0].u_full.shape[0]
    rng = np.random.default_rng(seed)

    def worst_mu(c):
        return max(mu_after(m, c) for m in modes_list)

    candidates = [(np.eye(n), "identity")]
    candidates.append((_optimize_from(np.eye(n), modes_list, max_iter, grad_tol),
                       "optimized-from-identity"))
    for k in range(n_starts):
        c0 = haar_orthogonal(n, rng)
        candidates.append((_optimize_from(c0, modes_list, max_iter, grad_tol),
                           f"optimized-from-haar-{k}"))
    scored = [(worst_mu(c), i, c, tag) for i, (c, tag) in enumerate(candidates)]
    scored.sort(key=lambda item: (item[0], item[1]))
    _, _, best_c, tag = scored[0]
    return RotationBasis(C=best_c, provenance=tag)
