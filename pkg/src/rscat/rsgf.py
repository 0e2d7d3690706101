"""RSGF v1: a bit-exact little-endian binary container for grid fields.

Layout: magic "RSGF" (4 bytes), version u32 = 1, kind u8 (0 real, 1 complex),
dims 3 x u32, origin 3 x f64, spacing f64, then the payload as f64 row-major
(complex values interleaved re, im).
"""

import struct

import numpy as np

from .errors import FieldFormatError
from .fields import ComplexField, GridSpec, ScalarField

MAGIC = b"RSGF"
VERSION = 1
_HEADER = struct.Struct("<4sIB3I3dd")

_KIND_REAL = 0
_KIND_COMPLEX = 1


def write_field(path, field):
    """Write a ScalarField or ComplexField; the payload roundtrips bit-exactly."""
    if isinstance(field, ScalarField):
        kind = _KIND_REAL
        payload = np.ascontiguousarray(field.data, dtype="<f8")
    elif isinstance(field, ComplexField):
        kind = _KIND_COMPLEX
        payload = np.ascontiguousarray(field.data, dtype="<c16")
    else:
        raise FieldFormatError(f"cannot serialize object of type {type(field).__name__}")
    g = field.grid
    header = _HEADER.pack(MAGIC, VERSION, kind, *g.dims, *g.origin, g.spacing)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_field(path):
    """Read a field written by :func:`write_field`; raises on any malformation."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FieldFormatError("truncated file: header incomplete")
    magic, version, kind, n0, n1, n2, o0, o1, o2, h = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    if kind not in (_KIND_REAL, _KIND_COMPLEX):
        raise FieldFormatError(f"unknown kind {kind}")
    grid = GridSpec(dims=(n0, n1, n2), origin=(o0, o1, o2), spacing=h)
    n_values = grid.n_cells * (2 if kind == _KIND_COMPLEX else 1)
    expected = _HEADER.size + 8 * n_values
    if len(raw) != expected:
        raise FieldFormatError(
            f"truncated file: expected {expected} bytes, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).copy()
    if kind == _KIND_REAL:
        return ScalarField(grid, flat)
    return ComplexField(grid, flat.view("<c16"))
