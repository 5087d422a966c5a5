"""SWF1 field files: a short ASCII header followed by raw little-endian doubles.

Header layout, one item per line::

    SWF1
    kind grid2            (or grid3)
    dims 256 256          (three counts for grid3)
    h 0.078125            (repr of the float, so it round-trips)
    center 0.0 0.0
    components 3 alpha.re alpha.im a1
    encoding f64le
    end

The payload is row-major over nodes ``[ix, iy(, iz)]`` with the components
of each node stored consecutively.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid2, Grid3, GridError

MAGIC = "SWF1"


class FieldFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Field:
    """Named real components on a grid."""
    grid: object
    components: dict

    def __post_init__(self):
        for name, arr in self.components.items():
            if np.iscomplexobj(arr):
                raise ValueError(f"component {name!r} is complex; split it with complex_parts")
            if np.shape(arr) != self.grid.shape:
                raise GridError(f"component {name!r} has shape {np.shape(arr)}, grid is {self.grid.shape}")

    def __getitem__(self, name):
        return self.components[name]

    def complex(self, name):
        return self.components[name + ".re"] + 1j * self.components[name + ".im"]


def complex_parts(name, arr) -> dict:
    arr = np.asarray(arr)
    return {name + ".re": np.ascontiguousarray(arr.real, dtype=float),
            name + ".im": np.ascontiguousarray(arr.imag, dtype=float)}


def write_field(field: Field, path) -> Path:
    path = Path(path)
    g = field.grid
    names = list(field.components)
    for n in names:
        if not n or any(c.isspace() for c in n):
            raise ValueError(f"component names may not contain whitespace: {n!r}")
    kind = "grid3" if isinstance(g, Grid3) else "grid2"
    center = complex(g.center)
    header = [
        MAGIC,
        f"kind {kind}",
        "dims " + " ".join(str(d) for d in g.shape),
        f"h {float(g.h)!r}",
        f"center {center.real!r} {center.imag!r}",
        f"components {len(names)} " + " ".join(names),
        "encoding f64le",
        "end",
    ]
    if names:
        data = np.stack([np.asarray(field.components[n], dtype="<f8") for n in names], axis=-1)
    else:
        data = np.zeros(g.shape + (0,), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return path


def _expect(lines, i, key, count=None):
    if i >= len(lines):
        raise FieldFormatError(f"missing '{key}' line", i + 1)
    parts = lines[i].split()
    if not parts or parts[0] != key:
        raise FieldFormatError(f"expected '{key}', found {lines[i]!r}", i + 1)
    if count is not None and len(parts) - 1 != count:
        raise FieldFormatError(f"'{key}' takes {count} values, found {len(parts) - 1}", i + 1)
    return parts[1:]


def read_field(path) -> Field:
    raw = Path(path).read_bytes()
    lines = []
    pos = 0
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise FieldFormatError("header not terminated by 'end'", len(lines) + 1)
        try:
            text = raw[pos:nl].decode("ascii")
        except UnicodeDecodeError:
            raise FieldFormatError("header is not ASCII", len(lines) + 1)
        lines.append(text)
        pos = nl + 1
        if text == "end":
            break
        if len(lines) > 16:
            raise FieldFormatError("header too long", len(lines))
    if lines[0] != MAGIC:
        raise FieldFormatError(f"bad magic {lines[0]!r}, expected {MAGIC!r}", 1)
    kind = _expect(lines, 1, "kind", 1)[0]
    if kind not in ("grid2", "grid3"):
        raise FieldFormatError(f"unknown grid kind {kind!r}", 2)
    ndim = 2 if kind == "grid2" else 3
    try:
        dims = [int(d) for d in _expect(lines, 2, "dims", ndim)]
    except ValueError:
        raise FieldFormatError("dims must be integers", 3)
    try:
        h = float(_expect(lines, 3, "h", 1)[0])
    except ValueError:
        raise FieldFormatError("h is not a number", 4)
    try:
        cr, ci = (float(v) for v in _expect(lines, 4, "center", 2))
    except ValueError:
        raise FieldFormatError("center is not numeric", 5)
    comp = _expect(lines, 5, "components")
    try:
        ncomp = int(comp[0])
    except (ValueError, IndexError):
        raise FieldFormatError("component count missing", 6)
    names = comp[1:]
    if len(names) != ncomp:
        raise FieldFormatError(f"declared {ncomp} components but named {len(names)}", 6)
    enc = _expect(lines, 6, "encoding", 1)[0]
    if enc != "f64le":
        raise FieldFormatError(f"unsupported encoding {enc!r}", 7)
    if len(lines) != 8:
        raise FieldFormatError("unexpected header line", 8)
    try:
        grid = (Grid2(dims[0], dims[1], h, complex(cr, ci)) if ndim == 2
                else Grid3(dims[0], dims[1], dims[2], h, complex(cr, ci)))
    except GridError as exc:
        raise FieldFormatError(str(exc), 3)
    expected = int(np.prod(dims)) * ncomp * 8
    payload = raw[pos:]
    if len(payload) < expected:
        raise FieldFormatError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise FieldFormatError(f"trailing bytes after payload ({len(payload) - expected})")
    data = np.frombuffer(payload, dtype="<f8").reshape(tuple(dims) + (ncomp,))
    comps = {n: data[..., k].astype(float) for k, n in enumerate(names)}
    return Field(grid, comps)
