"""Dense exact-diagonalization oracle for small interacting-fermion systems.

Spin orbitals map to Jordan-Wigner qubits with alpha spatial orbitals on
qubits 0..n-1 and beta orbitals on qubits n..2n-1; bit p of a basis index is
the occupation of spin orbital p.  Everything is dense and capped at 12 spin
orbitals, which keeps the full 2^(2n) statevector below 4096 amplitudes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooLarge
from .pauli import PauliString
from .rdm_core import (
    IntegralSet,
    OneRDM,
    PackedRDM,
    SpinRDMSet,
    SpinSector,
    SystemMeta,
    same_spin_pairs,
)

MAX_SPIN_ORBITALS = 12

# parity lookup for every 12-bit prefix mask
_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << MAX_SPIN_ORBITALS)],
                     dtype=np.uint8)


@dataclass(frozen=True)
class ToyHamiltonian:
    """Electronic Hamiltonian of one toy system in its integral form."""

    meta: SystemMeta
    ints: IntegralSet
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ints.n != self.meta.n:
            raise DimensionMismatch("integral size disagrees with meta")
        if 2 * self.meta.n > MAX_SPIN_ORBITALS:
            raise TooLarge(
                f"{2 * self.meta.n} spin orbitals exceed the dense cap of "
                f"{MAX_SPIN_ORBITALS}"
            )


@dataclass(frozen=True)
class Statevector:
    """Real wavefunction over the full occupation-number basis."""

    amps: np.ndarray
    n_spin_orbitals: int

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.float64)
        if amps.size != 1 << self.n_spin_orbitals:
            raise DimensionMismatch(
                f"{amps.size} amplitudes for {self.n_spin_orbitals} spin orbitals"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)


def hubbard_chain(n_sites: int, n_alpha: int, n_beta: int, t: float = 1.0,
                  u: float = 4.0) -> ToyHamiltonian:
    """Open-boundary Hubbard chain with hopping t and on-site repulsion u."""
    t_mat = np.zeros((n_sites, n_sites))
    for i in range(n_sites - 1):
        t_mat[i, i + 1] = t_mat[i + 1, i] = -t
    v = np.zeros((n_sites,) * 4)
    for i in range(n_sites):
        v[i, i, i, i] = u
    meta = SystemMeta(n=n_sites, n_alpha=n_alpha, n_beta=n_beta,
                      basis_label=f"hubbard-{n_sites}site")
    return ToyHamiltonian(meta, IntegralSet(t_mat, v), family="hubbard-chain",
                          params={"t": t, "u": u})


def random_two_body(n: int, n_alpha: int, n_beta: int, seed: int,
                    t_scale: float = 1.0, v_scale: float = 1.0) -> ToyHamiltonian:
    """Generic real Hamiltonian with fully symmetrized random integrals."""
    rng = np.random.default_rng(seed)
    t_mat = rng.normal(size=(n, n))
    t_mat = t_scale * (t_mat + t_mat.T) / 2.0
    v = rng.normal(size=(n,) * 4)
    # average over the 8-fold real-integral group
    group = [(0, 1, 2, 3), (2, 1, 0, 3), (0, 3, 2, 1), (2, 3, 0, 1),
             (1, 0, 3, 2), (3, 0, 1, 2), (1, 2, 3, 0), (3, 2, 1, 0)]
    v = v_scale * sum(v.transpose(p) for p in group) / (8.0 * n)
    meta = SystemMeta(n=n, n_alpha=n_alpha, n_beta=n_beta,
                      basis_label=f"random-{n}orb-s{seed}")
    return ToyHamiltonian(meta, IntegralSet(t_mat, v), family="random-two-body",
                          params={"seed": seed})


def sector_basis(meta: SystemMeta) -> np.ndarray:
    """Sorted basis bitmasks with the requested (N_alpha, N_beta)."""
    n = meta.n
    masks = []
    for a_bits in itertools.combinations(range(n), meta.n_alpha):
        a_mask = sum(1 << p for p in a_bits)
        for b_bits in itertools.combinations(range(n, 2 * n), meta.n_beta):
            masks.append(a_mask + sum(1 << p for p in b_bits))
    return np.array(sorted(masks), dtype=np.int64)


def _apply_ladder(states: np.ndarray, p: int, dag: bool):
    """Vectorized a_p / a+_p on an array of bitmasks.

    Returns (keep, new_states, signs) with invalid rows dropped.
    """
    bit = np.int64(1 << p)
    occupied = (states & bit) != 0
    keep = ~occupied if dag else occupied
    below = np.int64((1 << p) - 1)
    signs = 1.0 - 2.0 * (_POPCOUNT[states & below] & 1)
    return keep, states ^ bit, signs


def build_sector_hamiltonian(ham: ToyHamiltonian, basis: np.ndarray) -> np.ndarray:
    """Dense Hamiltonian in the fixed particle-number sector."""
    n = ham.meta.n
    t_mat, v = ham.ints.t, ham.ints.V
    dim = basis.size
    h = np.zeros((dim, dim))
    cols = np.arange(dim)

    def add_product(coeff: float, ops):
        # ops listed left to right; rightmost acts on the ket first
        states = basis.copy()
        keep = np.ones(dim, dtype=bool)
        sign = np.ones(dim)
        for p, dag in reversed(ops):
            k, states, s = _apply_ladder(states, p, dag)
            keep &= k
            sign *= s
        if not keep.any():
            return
        rows = np.searchsorted(basis, states[keep])
        np.add.at(h, (rows, cols[keep]), coeff * sign[keep])

    for sp in (0, n):
        for i, j in np.argwhere(t_mat != 0.0):
            add_product(t_mat[i, j], [(i + sp, True), (j + sp, False)])
    nz = np.argwhere(v != 0.0)
    for i, k, j, l in nz:
        for sp1 in (0, n):
            for sp2 in (0, n):
                add_product(0.5 * v[i, k, j, l],
                            [(i + sp1, True), (k + sp2, True),
                             (l + sp2, False), (j + sp1, False)])
    return h


def ground_state(ham: ToyHamiltonian) -> tuple[float, Statevector]:
    """Lowest eigenpair in the particle-number sector, gauge-fixed real.

    The overall sign is fixed by making the largest-magnitude amplitude
    positive; degenerate ground spaces inherit the eigensolver's ordering.
    """
    basis = sector_basis(ham.meta)
    if basis.size == 0:
        raise DimensionMismatch("empty particle-number sector")
    h = build_sector_hamiltonian(ham, basis)
    vals, vecs = np.linalg.eigh(h)
    vec = vecs[:, 0]
    k = int(np.argmax(np.abs(vec)))
    if vec[k] < 0:
        vec = -vec
    amps = np.zeros(1 << (2 * ham.meta.n))
    amps[basis] = vec
    return float(vals[0]), Statevector(amps, 2 * ham.meta.n)


def _annihilate_vector(psi: np.ndarray, p: int) -> np.ndarray:
    """a_p applied to a full-space vector."""
    size = psi.size
    idx = np.arange(size, dtype=np.int64)
    bit = np.int64(1 << p)
    occ = (idx & bit) != 0
    src = idx[occ]
    below = np.int64((1 << p) - 1)
    signs = 1.0 - 2.0 * (_POPCOUNT[src & below] & 1)
    out = np.zeros(size)
    out[src ^ bit] = signs * psi[src]
    return out


def exact_rdms(sv: Statevector, meta: SystemMeta) -> tuple[SpinRDMSet, OneRDM]:
    """1- and 2-RDMs of a statevector, PSD by Gram construction.

    Each packed column is the pair-annihilated vector a_l a_j |psi>, so every
    sector matrix is an explicit Gram matrix and exactly symmetric.
    """
    n = meta.n
    if sv.n_spin_orbitals != 2 * n:
        raise DimensionMismatch("statevector size disagrees with meta")
    psi = sv.amps
    single = {p: _annihilate_vector(psi, p) for p in range(2 * n)}

    def gram(columns):
        mat = np.stack(columns, axis=1)
        return mat.T @ mat

    blocks = {}
    for sector, offs in ((SpinSector.AA, (0, 0)), (SpinSector.BB, (n, n))):
        cols = [_annihilate_vector(single[x + offs[0]], y + offs[1])
                for x, y in same_spin_pairs(n)]
        blocks[sector] = PackedRDM(sector, gram(cols), meta)
    cols = [_annihilate_vector(single[j], l + n)
            for j in range(n) for l in range(n)]
    blocks[SpinSector.AB] = PackedRDM(SpinSector.AB, gram(cols), meta)

    d_alpha = gram([single[i] for i in range(n)])
    d_beta = gram([single[i + n] for i in range(n)])
    rdms = SpinRDMSet(meta, aaaa=blocks[SpinSector.AA],
                      bbbb=blocks[SpinSector.BB], abab=blocks[SpinSector.AB])
    return rdms, OneRDM(d_alpha, d_beta)


def pauli_expectation(sv: Statevector, string: PauliString) -> float:
    """<psi| P |psi> for one Pauli string on the JW qubits."""
    psi = sv.amps
    idx = np.arange(psi.size, dtype=np.int64)
    xor_mask = np.int64(0)
    phase = np.ones(psi.size, dtype=np.complex128)
    for q, w in string.ops:
        if q >= sv.n_spin_orbitals:
            raise DimensionMismatch(f"qubit {q} outside register")
        bit = (idx >> np.int64(q)) & 1
        if w == "Z":
            phase = phase * (1.0 - 2.0 * bit)
        elif w == "X":
            xor_mask |= np.int64(1 << q)
        else:  # Y
            xor_mask |= np.int64(1 << q)
            phase = phase * 1j * (1.0 - 2.0 * bit)
    val = complex(np.sum(psi[idx ^ xor_mask] * phase * psi))
    assert abs(val.imag) < 1e-10, "real state must give real expectations"
    return float(val.real)
