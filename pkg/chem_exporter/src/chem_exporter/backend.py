"""PySCF adapter: UHF reference, unrelaxed-MP2 model and CCSD target RDMs.

Everything backend-specific lives here, behind lazy imports, so the rest of
the package works (and its tests run) without a chemistry installation.

Conventions bridged to the consumer:
  - consumer 2-RDM order is P[i,k,j,l] = <a+_i a+_k a_l a_j>; the backend's
    make_rdm2 pairs indices chemist-style, dm2[p,q,r,s] = <a+_p a+_r a_s a_q>,
    so P = dm2.transpose(0, 2, 1, 3) for every spin block.
  - consumer V[i,k,j,l] = (ij|kl), i.e. the chemist-notation tensor with the
    same transpose applied.
  - the bundle holds one spatial orbital set.  The alpha orbitals of the
    reference are that set; beta-labeled indices are transformed into it via
    the overlap.  For singlet references both spins share the orbitals and
    the transformation is the identity; any open-shell span mismatch is
    reported in the flags.
  - frozen-core orbitals are dropped from the active window and their mean
    field is folded into the one-body integrals, spin-averaged (the bundle
    has a single t); the alpha/beta asymmetry of that fold is flagged.

The MP2 density matrices are the unrelaxed ones (no orbital-response
terms), which is what the backend's MP2 module produces directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChemistryBackendFailure
from .geometry import Molecule


@dataclass(frozen=True)
class ActiveSpaceSolution:
    """One correlated calculation reduced to consumer-ready active arrays."""

    n: int
    n_total: int  # orbitals before freezing; bundle invariant n = n_total - frozen
    n_alpha: int
    n_beta: int
    basis_label: str
    t: np.ndarray
    V: np.ndarray
    rdm2: dict  # sector name -> consumer-ordered 4-index tensor
    one: tuple  # (d_alpha, d_beta)
    e_total: float
    e2_active: float  # backend-side active two-electron energy
    method: str
    flags: tuple[str, ...]


def _consumer_order(dm2: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(dm2.transpose(0, 2, 1, 3))


def _rotate_beta_axes(t4: np.ndarray, x: np.ndarray, axes) -> np.ndarray:
    for ax in axes:
        t4 = np.moveaxis(np.tensordot(x, t4, axes=(1, ax)), 0, ax)
    return t4


def run_backend(mol: Molecule, basis: str, charge: int, spin: int,
                n_frozen: int) -> tuple[ActiveSpaceSolution,
                                        ActiveSpaceSolution]:
    """(model, target) = (unrelaxed MP2, CCSD) over a shared UHF reference."""
    try:
        from pyscf import ao2mo, cc, gto, mp, scf
    except ImportError as exc:
        raise ChemistryBackendFailure(
            f"pyscf is not importable: {exc}; install the 'chem' extra"
        )

    try:
        pmol = gto.M(atom=mol.to_atom_spec(), basis=basis, charge=charge,
                     spin=spin, unit="Angstrom", verbose=0)
        mf = scf.UHF(pmol).run()
        if not mf.converged:
            raise ChemistryBackendFailure(
                f"UHF did not converge for {mol.source or 'geometry'}: "
                f"last energy {mf.e_tot}"
            )

        flags = []
        nmo = mf.mo_coeff[0].shape[1]
        if n_frozen >= nmo:
            raise ChemistryBackendFailure(
                f"{n_frozen} frozen orbitals but only {nmo} available"
            )
        act = slice(n_frozen, nmo)
        n_act = nmo - n_frozen
        ca, cb = mf.mo_coeff[0][:, act], mf.mo_coeff[1][:, act]
        na = int(mf.nelec[0]) - n_frozen
        nb = int(mf.nelec[1]) - n_frozen
        s_ao = mf.get_ovlp()
        # beta-MO -> alpha-MO change of basis inside the active window
        x = ca.T @ s_ao @ cb
        span = float(np.abs(x.T @ x - np.eye(n_act)).max())
        if span > 1e-8:
            flags.append(f"beta span mismatch {span:.2e}")

        # effective one-body: bare core plus the frozen orbitals' mean field,
        # spin-averaged because the bundle carries a single t
        hcore = mf.get_hcore()
        if n_frozen:
            dca = mf.mo_coeff[0][:, :n_frozen] @ mf.mo_coeff[0][:, :n_frozen].T
            dcb = mf.mo_coeff[1][:, :n_frozen] @ mf.mo_coeff[1][:, :n_frozen].T
            vj, vk = mf.get_jk(dm=np.array([dca, dcb]))
            veff_a = vj[0] + vj[1] - vk[0]
            veff_b = vj[0] + vj[1] - vk[1]
            asym = float(np.abs(veff_a - veff_b).max())
            if asym > 1e-10:
                flags.append(f"frozen-core field spin asymmetry {asym:.2e}")
            hcore = hcore + 0.5 * (veff_a + veff_b)
        t_act = ca.T @ hcore @ ca

        eri = ao2mo.restore(1, ao2mo.kernel(pmol, ca), n_act)
        v_act = _consumer_order(eri)

        def finish(calc, method):
            calc = calc.run()
            if not calc.converged:
                raise ChemistryBackendFailure(
                    f"{method} did not converge: last energy {calc.e_tot}"
                )
            if method == "ccsd":
                calc.solve_lambda()
            dm1 = calc.make_rdm1()
            dm2 = calc.make_rdm2()
            # full-dimension RDMs come back in the per-spin MO bases; slice
            # the active window and pull beta indices into the alpha set
            da = dm1[0][act, act]
            db = x @ dm1[1][act, act] @ x.T
            aa = _consumer_order(dm2[0][act, act, act, act])
            ab = _consumer_order(dm2[1][act, act, act, act])
            bb = _consumer_order(dm2[2][act, act, act, act])
            ab = _rotate_beta_axes(ab, x, (1, 3))
            bb = _rotate_beta_axes(bb, x, (0, 1, 2, 3))
            # same-spin consumer tensors must be antisymmetric in the bra
            # pair; symmetrize away backend roundoff before packing
            aa = 0.5 * (aa - aa.transpose(1, 0, 2, 3))
            aa = 0.5 * (aa - aa.transpose(0, 1, 3, 2))
            bb = 0.5 * (bb - bb.transpose(1, 0, 2, 3))
            bb = 0.5 * (bb - bb.transpose(0, 1, 3, 2))

            # backend-side active two-electron energy, native conventions
            eri_ab = ao2mo.general(pmol, (ca, ca, cb, cb), compact=False)
            eri_ab = eri_ab.reshape(n_act, n_act, n_act, n_act)
            eri_bb = ao2mo.restore(1, ao2mo.kernel(pmol, cb), n_act)
            e2 = 0.5 * np.einsum("pqrs,pqrs->", eri,
                                 dm2[0][act, act, act, act])
            e2 += np.einsum("pqrs,pqrs->", eri_ab,
                            dm2[1][act, act, act, act])
            e2 += 0.5 * np.einsum("pqrs,pqrs->", eri_bb,
                                  dm2[2][act, act, act, act])
            return ActiveSpaceSolution(
                n=n_act, n_total=nmo, n_alpha=na, n_beta=nb,
                basis_label=basis,
                t=t_act, V=v_act,
                rdm2={"aaaa": aa, "bbbb": bb, "abab": ab},
                one=(da, db), e_total=float(calc.e_tot),
                e2_active=float(e2), method=method, flags=tuple(flags))

        frozen = list(range(n_frozen)) or None
        model = finish(mp.UMP2(mf, frozen=frozen), "mp2-unrelaxed")
        target = finish(cc.UCCSD(mf, frozen=frozen), "ccsd")
        return model, target
    except ChemistryBackendFailure:
        raise
    except Exception as exc:
        raise ChemistryBackendFailure(
            f"backend failure ({type(exc).__name__}): {exc}"
        )
