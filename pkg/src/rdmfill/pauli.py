"""Minimal symbolic algebra for Pauli strings and fermionic monomials.

Just enough machinery to translate between products of ladder operators and
Pauli strings under the Jordan-Wigner encoding (bit p of a basis index holds
the occupation of spin orbital p, Z-strings run over qubits below p).  Only
few-site operators ever pass through here, so clarity beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass

# single-qubit products: (a, b) -> (phase, a*b)
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis; identity factors omitted."""

    ops: tuple[tuple[int, str], ...]

    def __post_init__(self):
        ops = tuple(sorted((int(q), w) for q, w in self.ops if w != "I"))
        qubits = [q for q, _ in ops]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"duplicate qubit in {self.ops}")
        if any(w not in "XYZ" for _, w in ops):
            raise ValueError(f"bad letter in {self.ops}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_dict(cls, d: dict[int, str]) -> "PauliString":
        return cls(tuple(d.items()))

    @property
    def is_identity(self) -> bool:
        return not self.ops

    def letter(self, qubit: int) -> str:
        for q, w in self.ops:
            if q == qubit:
                return w
        return "I"

    def label(self) -> str:
        if self.is_identity:
            return "1"
        return " ".join(f"{w}{q}" for q, w in self.ops)

    def __str__(self) -> str:
        return self.label()


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Operator product a @ b as (phase, string)."""
    phase = 1 + 0j
    merged = dict(a.ops)
    for q, w in b.ops:
        ph, res = _MUL[(merged.get(q, "I"), w)]
        phase *= ph
        if res == "I":
            merged.pop(q, None)
        else:
            merged[q] = res
    return phase, PauliString.from_dict(merged)


def z_string(lo: int, hi: int) -> PauliString:
    """Z on every qubit in the open interval (lo, hi)."""
    return PauliString(tuple((q, "Z") for q in range(lo + 1, hi)))


# ---------------------------------------------------------------------------
# fermionic monomials: ops are tuples of (site, dagger)

FermiOps = tuple[tuple[int, bool], ...]


def _first_violation(ops: FermiOps) -> int | None:
    """Index of the first adjacent pair breaking normal order, if any.

    Canonical form: creators first with sites ascending, then annihilators
    with sites descending.
    """
    for t in range(len(ops) - 1):
        (p, dp), (q, dq) = ops[t], ops[t + 1]
        if not dp and dq:
            return t
        if dp and dq and p >= q:
            return t
        if not dp and not dq and p <= q:
            return t
    return None


def normal_order(terms: list[tuple[complex, FermiOps]]) -> dict[FermiOps, complex]:
    """Rewrite a sum of monomials into canonical normal-ordered form."""
    out: dict[FermiOps, complex] = {}
    stack = [(complex(c), tuple(ops)) for c, ops in terms]
    while stack:
        coeff, ops = stack.pop()
        if coeff == 0:
            continue
        t = _first_violation(ops)
        if t is None:
            out[ops] = out.get(ops, 0j) + coeff
            if out[ops] == 0:
                del out[ops]
            continue
        (p, dp), (q, dq) = ops[t], ops[t + 1]
        if p == q and dp == dq:
            continue  # a a or a+ a+ on one site vanishes
        swapped = ops[:t] + ((q, dq), (p, dp)) + ops[t + 2:]
        stack.append((-coeff, swapped))
        if p == q and not dp and dq:
            stack.append((coeff, ops[:t] + ops[t + 2:]))  # {a, a+} = 1
    return out


def creation(p: int) -> list[tuple[complex, PauliString]]:
    """Jordan-Wigner image of a+_p."""
    z = tuple((q, "Z") for q in range(p))
    return [(0.5, PauliString(z + ((p, "X"),))),
            (-0.5j, PauliString(z + ((p, "Y"),)))]


def annihilation(p: int) -> list[tuple[complex, PauliString]]:
    """Jordan-Wigner image of a_p."""
    z = tuple((q, "Z") for q in range(p))
    return [(0.5, PauliString(z + ((p, "X"),))),
            (0.5j, PauliString(z + ((p, "Y"),)))]


def majorana(p: int, kind: str) -> list[tuple[complex, FermiOps]]:
    """Fermionic form of the two Majorana combinations at site p."""
    if kind == "A":  # a + a+  <->  Z..Z X_p
        return [(1 + 0j, ((p, False),)), (1 + 0j, ((p, True),))]
    if kind == "B":  # i(a+ - a)  <->  Z..Z Y_p
        return [(1j, ((p, True),)), (-1j, ((p, False),))]
    raise ValueError(f"unknown majorana kind {kind!r}")


def majorana_pauli(p: int, kind: str) -> PauliString:
    z = tuple((q, "Z") for q in range(p))
    return PauliString(z + ((p, "X" if kind == "A" else "Y"),))


def fermi_to_pauli(terms: list[tuple[complex, FermiOps]]) -> dict[PauliString, complex]:
    """Expand a sum of ladder-operator monomials into Pauli strings."""
    out: dict[PauliString, complex] = {}
    for coeff, ops in terms:
        partial = [(complex(coeff), PauliString(()))]
        for site, dag in ops:
            factor = creation(site) if dag else annihilation(site)
            nxt = []
            for c1, s1 in partial:
                for c2, s2 in factor:
                    ph, s = multiply(s1, s2)
                    nxt.append((c1 * c2 * ph, s))
            partial = nxt
        for c, s in partial:
            out[s] = out.get(s, 0j) + c
    return {s: c for s, c in out.items() if c != 0}


def multiply_fermi(terms_a, terms_b) -> list[tuple[complex, FermiOps]]:
    """Concatenation product of two monomial sums (no reordering)."""
    return [(ca * cb, ops_a + ops_b) for ca, ops_a in terms_a for cb, ops_b in terms_b]
