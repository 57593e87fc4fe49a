"""RdmBundle directory writer and reader.

The format is owned by the consumer; this module reproduces it byte for
byte: a descriptor.txt of key = value lines (shapes authoritative) next to
one raw little-endian float64 row-major array file per object.  Files are
written to a temp name and renamed, so a crash never leaves a half bundle.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .pack import SECTORS, sector_dim

DESCRIPTOR = "descriptor.txt"


@dataclass(frozen=True)
class BundleData:
    """In-memory bundle: packed sector matrices plus optional extras."""

    n: int
    n_alpha: int
    n_beta: int
    rdms: dict  # sector name -> (d, d) packed matrix
    one: tuple | None = None  # (d_alpha, d_beta), each (n, n)
    ints: tuple | None = None  # (t, V), (n, n) and (n, n, n, n)
    basis_label: str = ""
    producer: str = "chem_exporter"
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        rdms = {}
        for sector in SECTORS:
            if sector not in self.rdms:
                continue
            d = sector_dim(sector, self.n)
            mat = np.ascontiguousarray(self.rdms[sector], dtype=np.float64)
            if mat.shape != (d, d):
                raise DimensionMismatch(
                    f"{sector}: packed shape {mat.shape}, expected {(d, d)}"
                )
            if np.abs(mat - mat.T).max() > 1e-8 * max(1.0, np.abs(mat).max()):
                raise DimensionMismatch(f"{sector}: packed block not symmetric")
            rdms[sector] = mat
        unknown = set(self.rdms) - set(SECTORS)
        if unknown:
            raise DimensionMismatch(f"unknown sectors {sorted(unknown)}")
        object.__setattr__(self, "rdms", rdms)


def _write_atomic(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _arrays(b: BundleData) -> list[tuple[str, np.ndarray]]:
    out = [(s + ".f64", b.rdms[s]) for s in SECTORS if s in b.rdms]
    if b.one is not None:
        out.append(("d_alpha.f64", np.asarray(b.one[0], dtype=np.float64)))
        out.append(("d_beta.f64", np.asarray(b.one[1], dtype=np.float64)))
    if b.ints is not None:
        out.append(("t.f64", np.asarray(b.ints[0], dtype=np.float64)))
        out.append(("v.f64", np.asarray(b.ints[1], dtype=np.float64)))
    return out


def save_bundle(path: str, b: BundleData) -> None:
    os.makedirs(path, exist_ok=True)
    lines = [
        f"n = {b.n}",
        f"n_alpha = {b.n_alpha}",
        f"n_beta = {b.n_beta}",
        f"basis_label = {b.basis_label}",
        f"producer = {b.producer}",
        "sectors = " + ",".join(s for s in SECTORS if s in b.rdms),
        f"has_one_rdm = {int(b.one is not None)}",
        f"has_integrals = {int(b.ints is not None)}",
    ]
    arrays = _arrays(b)
    for name, arr in arrays:
        lines.append(f"shape.{name} = " + ",".join(str(s) for s in arr.shape))
    for name, arr in arrays:
        _write_atomic(os.path.join(path, name),
                      np.ascontiguousarray(arr, dtype="<f8").tobytes())
    _write_atomic(os.path.join(path, DESCRIPTOR),
                  ("\n".join(lines) + "\n").encode())


def load_bundle(path: str) -> BundleData:
    desc = os.path.join(path, DESCRIPTOR)
    if not os.path.isfile(desc):
        raise DimensionMismatch(f"missing {DESCRIPTOR} in {path}")
    fields: dict[str, str] = {}
    with open(desc, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DimensionMismatch(f"bad descriptor line: {line!r}")
            key, val = line.split("=", 1)
            fields[key.strip()] = val.strip()

    def read(name):
        shape = tuple(int(s) for s in fields[f"shape.{name}"].split(","))
        file_path = os.path.join(path, name)
        expect = int(np.prod(shape)) * 8
        if os.path.getsize(file_path) != expect:
            raise DimensionMismatch(f"{name}: size does not match its shape")
        return np.fromfile(file_path, dtype="<f8").reshape(shape)

    sectors = [s for s in fields["sectors"].split(",") if s]
    rdms = {s: read(s + ".f64") for s in sectors}
    one = ints = None
    if fields.get("has_one_rdm") == "1":
        one = (read("d_alpha.f64"), read("d_beta.f64"))
    if fields.get("has_integrals") == "1":
        ints = (read("t.f64"), read("v.f64"))
    return BundleData(n=int(fields["n"]), n_alpha=int(fields["n_alpha"]),
                      n_beta=int(fields["n_beta"]), rdms=rdms, one=one,
                      ints=ints, basis_label=fields.get("basis_label", ""),
                      producer=fields.get("producer", ""))
