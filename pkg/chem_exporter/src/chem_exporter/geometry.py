"""Geometry files: one atom per line, element symbol plus x y z in Angstrom.

Blank lines and # comments are ignored.  No unit or count headers; this is
deliberately not the xyz format.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

# Z by symbol, H through Ar; enough for first- and second-row molecules.
ELEMENTS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8,
    "F": 9, "Ne": 10, "Na": 11, "Mg": 12, "Al": 13, "Si": 14, "P": 15,
    "S": 16, "Cl": 17, "Ar": 18,
}


@dataclass(frozen=True)
class Molecule:
    symbols: tuple[str, ...]
    coords: np.ndarray  # (n_atoms, 3), Angstrom
    source: str = field(default="", compare=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.shape != (len(self.symbols), 3):
            raise GeometryError(
                f"{len(self.symbols)} atoms but coordinate block {coords.shape}"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def charges(self) -> tuple[int, ...]:
        return tuple(ELEMENTS[s] for s in self.symbols)

    def to_atom_spec(self) -> list[tuple[str, tuple[float, float, float]]]:
        """The (symbol, xyz) list chemistry backends take verbatim."""
        return [(s, tuple(map(float, xyz)))
                for s, xyz in zip(self.symbols, self.coords)]


def _normalize_symbol(token: str) -> str:
    sym = token.capitalize()
    if sym not in ELEMENTS:
        raise GeometryError(f"unknown element symbol {token!r}")
    return sym


def parse_geometry(text: str, source: str = "<string>") -> Molecule:
    symbols = []
    rows = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise GeometryError(
                f"{source}:{ln}: expected 'symbol x y z', got {raw!r}"
            )
        symbols.append(_normalize_symbol(parts[0]))
        try:
            rows.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise GeometryError(f"{source}:{ln}: bad coordinate: {exc}")
    if not symbols:
        raise GeometryError(f"{source}: no atoms")
    return Molecule(tuple(symbols), np.array(rows), source=source)


def load_geometry(path: str) -> Molecule:
    if not os.path.isfile(path):
        raise GeometryError(f"geometry file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_geometry(fh.read(), source=path)


def frozen_core_count(mol: Molecule) -> int:
    """Orbitals frozen by the core rule: 1s for Li-Ne, 1s2s2p for Na-Ar."""
    total = 0
    for z in mol.charges:
        if z <= 2:
            continue
        total += 1 if z <= 10 else 5
    return total
