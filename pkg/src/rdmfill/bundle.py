"""Directory interchange format for RDM sets.

A bundle is a directory holding a text descriptor plus one raw array file
per stored object: little-endian float64, row-major, no header.  Shapes in
the descriptor are authoritative and must match file sizes byte for byte,
which keeps the format writable from any language with no dependencies.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import BundleFormatError
from .rdm_core import (
    IntegralSet,
    OneRDM,
    PackedRDM,
    SpinRDMSet,
    SpinSector,
    SystemMeta,
    sector_dim,
)

DESCRIPTOR = "descriptor.txt"
_SECTOR_FILES = {s: s.value + ".f64" for s in SpinSector}


@dataclass(frozen=True)
class Bundle:
    meta: SystemMeta
    rdms: SpinRDMSet
    one: OneRDM | None
    ints: IntegralSet | None
    producer: str


def _write_atomic(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _array_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_bundle(path: str, rdms: SpinRDMSet, one: OneRDM | None = None,
                ints: IntegralSet | None = None,
                producer: str = "rdmfill") -> None:
    """Write the bundle directory, one atomically-replaced file at a time."""
    meta = rdms.meta
    os.makedirs(path, exist_ok=True)
    sectors = [s for s, _ in rdms.items()]
    lines = [
        f"n = {meta.n}",
        f"n_alpha = {meta.n_alpha}",
        f"n_beta = {meta.n_beta}",
        f"basis_label = {meta.basis_label}",
        f"producer = {producer}",
        "sectors = " + ",".join(s.value for s in sectors),
        f"has_one_rdm = {int(one is not None)}",
        f"has_integrals = {int(ints is not None)}",
    ]
    arrays: list[tuple[str, np.ndarray]] = []
    for sector in sectors:
        arrays.append((_SECTOR_FILES[sector], rdms.get(sector).data))
    if one is not None:
        arrays.append(("d_alpha.f64", one.alpha))
        arrays.append(("d_beta.f64", one.beta))
    if ints is not None:
        arrays.append(("t.f64", ints.t))
        arrays.append(("v.f64", ints.V))
    for name, arr in arrays:
        lines.append(f"shape.{name} = " + ",".join(str(s) for s in arr.shape))
    for name, arr in arrays:
        _write_atomic(os.path.join(path, name), _array_bytes(arr))
    text = "\n".join(lines) + "\n"
    _write_atomic(os.path.join(path, DESCRIPTOR), text.encode())


def _parse_descriptor(path: str) -> dict[str, str]:
    desc_path = os.path.join(path, DESCRIPTOR)
    if not os.path.isfile(desc_path):
        raise BundleFormatError(f"missing {DESCRIPTOR} in {path}")
    fields: dict[str, str] = {}
    with open(desc_path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise BundleFormatError(f"bad descriptor line: {line!r}")
            key, val = line.split("=", 1)
            fields[key.strip()] = val.strip()
    return fields


def _read_array(path: str, name: str, shape: tuple[int, ...]) -> np.ndarray:
    file_path = os.path.join(path, name)
    if not os.path.isfile(file_path):
        raise BundleFormatError(f"missing array file {name}")
    expect = int(np.prod(shape)) * 8
    actual = os.path.getsize(file_path)
    if actual != expect:
        raise BundleFormatError(
            f"{name}: {actual} bytes on disk, descriptor shape {shape} "
            f"needs {expect}"
        )
    data = np.fromfile(file_path, dtype="<f8")
    return data.reshape(shape).astype(np.float64)


def load_bundle(path: str) -> Bundle:
    """Read and validate a bundle; symmetry checks run on construction."""
    fields = _parse_descriptor(path)
    try:
        meta = SystemMeta(n=int(fields["n"]), n_alpha=int(fields["n_alpha"]),
                          n_beta=int(fields["n_beta"]),
                          basis_label=fields.get("basis_label", ""))
    except KeyError as missing:
        raise BundleFormatError(f"descriptor lacks {missing}") from None

    def shape_of(name: str) -> tuple[int, ...]:
        key = f"shape.{name}"
        if key not in fields:
            raise BundleFormatError(f"descriptor lacks {key}")
        return tuple(int(x) for x in fields[key].split(","))

    sector_names = [s for s in fields.get("sectors", "").split(",") if s]
    blocks = {}
    for name in sector_names:
        try:
            sector = SpinSector(name)
        except ValueError:
            raise BundleFormatError(f"unknown sector {name!r}") from None
        d = sector_dim(sector, meta.n)
        shape = shape_of(_SECTOR_FILES[sector])
        if shape != (d, d):
            raise BundleFormatError(
                f"sector {name}: declared shape {shape}, expected {(d, d)}"
            )
        data = _read_array(path, _SECTOR_FILES[sector], shape)
        blocks[sector] = PackedRDM(sector, data, meta)
    rdms = SpinRDMSet(meta=meta, aaaa=blocks.get(SpinSector.AA),
                      bbbb=blocks.get(SpinSector.BB),
                      abab=blocks.get(SpinSector.AB))

    one = None
    if fields.get("has_one_rdm") == "1":
        alpha = _read_array(path, "d_alpha.f64", shape_of("d_alpha.f64"))
        beta = _read_array(path, "d_beta.f64", shape_of("d_beta.f64"))
        one = OneRDM(alpha=alpha, beta=beta)
    ints = None
    if fields.get("has_integrals") == "1":
        t = _read_array(path, "t.f64", shape_of("t.f64"))
        v = _read_array(path, "v.f64", shape_of("v.f64"))
        ints = IntegralSet(t=t, V=v)
    return Bundle(meta=meta, rdms=rdms, one=one, ints=ints,
                  producer=fields.get("producer", ""))


def bundle_hash(path: str) -> str:
    """Order-independent content hash of descriptor plus arrays."""
    digest = hashlib.sha256()
    for name in sorted(os.listdir(path)):
        if name.endswith(".tmp"):
            continue
        digest.update(name.encode())
        with open(os.path.join(path, name), "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()
