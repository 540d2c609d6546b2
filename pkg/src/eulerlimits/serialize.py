"""Binary field files and CSV tables for measures.

Field file layout (all little-endian, no padding between items)::

    offset  type              content
    0       8 bytes           magic b"EUFIELD1"
    8       u32               dim d (1 or 2)
    12      u32               ncomp = 1 + d (+1 when S is present)
    16      u32               ntimes
    20      u32               level
    24      u32[d]            cells per axis
    ...     f64[d][2]         extent (lo, hi) per axis
    ...     f64               pad
    ...     u8                boundary mode (0 far_field_padded, 1 bounded_domain)
    ...     u8                flags: bit 0 = S present, bit 1 = far field present
    ...     f64, f64[d]       rho_inf, u_inf (only when bit 1 is set)
    ...     f64[ntimes]       times
    ...     f64[...]          rho  (ntimes, *cells), C order
    ...     f64[...]          m    (ntimes, d, *cells), C order
    ...     f64[...]          S    (ntimes, *cells), C order, if present

``meta`` is not stored.  Doubles are written verbatim, so a round trip is
bit-exact.  CSV tables write floats with ``%.17g`` which also round-trips
IEEE doubles exactly.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .defects import MatrixMeasureField, ScalarMeasureField
from .eos import FarField
from .grid import Grid, SpaceTimeField
from .young import AtomicMeasure, EmpiricalYoungMeasure

MAGIC = b"EUFIELD1"
_MODES = ("far_field_padded", "bounded_domain")
FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


def field_to_bytes(f: SpaceTimeField) -> bytes:
    g = f.grid
    d = g.dim
    has_S = f.S is not None
    has_far = f.far is not None
    out = [MAGIC, struct.pack("<4I", d, 1 + d + int(has_S), f.nt, int(f.level)),
           struct.pack(f"<{d}I", *g.cells),
           np.asarray(g.extent, dtype="<f8").tobytes(),
           struct.pack("<dBB", float(g.pad), _MODES.index(g.boundary_mode), int(has_S) | (int(has_far) << 1))]
    if has_far:
        out.append(struct.pack(f"<{1 + d}d", f.far.rho_inf, *f.far.u_inf))
    out.append(np.asarray(f.times, dtype="<f8").tobytes())
    for a in (f.rho, f.m) + ((f.S,) if has_S else ()):
        out.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise FormatError("truncated field file")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def array(self, shape):
        n = int(np.prod(shape))
        if self.pos + 8 * n > len(self.buf):
            raise FormatError("truncated field file")
        a = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.pos).reshape(shape)
        self.pos += 8 * n
        return a.astype(float)


def field_from_bytes(buf: bytes) -> SpaceTimeField:
    if buf[:8] != MAGIC:
        raise FormatError("not a field file (bad magic)")
    r = _Reader(buf)
    r.pos = 8
    d, ncomp, nt, level = r.take("<4I")
    if d not in (1, 2) or ncomp not in (1 + d, 2 + d):
        raise FormatError("inconsistent header")
    cells = r.take(f"<{d}I")
    extent = r.array((d, 2))
    pad, mode, flags = r.take("<dBB")
    far = None
    if flags & 2:
        vals = r.take(f"<{1 + d}d")
        far = FarField(vals[0], tuple(vals[1:]))
    has_S = bool(flags & 1)
    if has_S != (ncomp == 2 + d):
        raise FormatError("component count disagrees with flags")
    times = r.array((nt,))
    rho = r.array((nt,) + tuple(cells))
    m = r.array((nt, d) + tuple(cells))
    S = r.array((nt,) + tuple(cells)) if has_S else None
    if r.pos != len(buf):
        raise FormatError("trailing bytes in field file")
    grid = Grid(tuple(cells), tuple(map(tuple, extent)), _MODES[mode], pad)
    return SpaceTimeField(grid, times, rho, m, S, far, level)


def write_field(f: SpaceTimeField, path):
    Path(path).write_bytes(field_to_bytes(f))


def read_field(path) -> SpaceTimeField:
    return field_from_bytes(Path(path).read_bytes())


# --------------------------------------------------------------------------
# Measures
# --------------------------------------------------------------------------


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def _grid_comment(grid: Grid) -> list:
    ext = ";".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in grid.extent)
    return [f"# cells={'x'.join(map(str, grid.cells))} extent={ext} "
            f"boundary_mode={grid.boundary_mode} pad={_fmt(grid.pad)}"]


def _parse_grid(line: str) -> Grid:
    kv = dict(item.split("=", 1) for item in line.lstrip("# ").split())
    cells = tuple(int(c) for c in kv["cells"].split("x"))
    extent = tuple(tuple(float(v) for v in ab.split(":")) for ab in kv["extent"].split(";"))
    return Grid(cells, extent, kv["boundary_mode"], float(kv["pad"]))


def _cell_rows(grid: Grid):
    X = grid.centers()
    for flat in range(int(np.prod(grid.cells))):
        idx = np.unravel_index(flat, grid.cells)
        yield idx, [X[k][idx] for k in range(grid.dim)]


def _write_table(path, comments, header, rows):
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(c + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_table(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    return comments, rows[0], rows[1:]


def _axis_names(d):
    return [f"i{k}" for k in range(d)], [f"x{k}" for k in range(d)]


def write_scalar_measure(mu: ScalarMeasureField, path):
    """Columns: cell indices, cell-centre coordinates, weight."""
    idx_names, x_names = _axis_names(mu.grid.dim)
    rows = [list(map(str, idx)) + [_fmt(v) for v in x] + [_fmt(mu.weights[idx])]
            for idx, x in _cell_rows(mu.grid)]
    comments = _grid_comment(mu.grid) + [f"# clip_mass={_fmt(mu.clip_mass)} clip_count={mu.clip_count}"]
    _write_table(path, comments, idx_names + x_names + ["weight"], rows)


def read_scalar_measure(path) -> ScalarMeasureField:
    comments, header, rows = _read_table(path)
    grid = _parse_grid(comments[0])
    kv = dict(item.split("=", 1) for item in comments[1].lstrip("# ").split())
    w = np.zeros(grid.cells)
    d = grid.dim
    for r in rows:
        w[tuple(int(v) for v in r[:d])] = float(r[-1])
    return ScalarMeasureField(grid, w, float(kv["clip_mass"]), int(kv["clip_count"]))


def write_matrix_measure(M: MatrixMeasureField, path):
    """Columns: cell indices, coordinates, upper-triangle entries ``Mjk``
    (j <= k), minimum eigenvalue."""
    d = M.grid.dim
    idx_names, x_names = _axis_names(d)
    pairs = [(j, k) for j in range(d) for k in range(j, d)]
    mats = M.mats
    lam = M.min_eig
    rows = []
    for idx, x in _cell_rows(M.grid):
        sl = (slice(None), slice(None)) + tuple(idx)
        A = mats[sl]
        rows.append(list(map(str, idx)) + [_fmt(v) for v in x]
                    + [_fmt(A[j, k]) for j, k in pairs] + [_fmt(lam[idx])])
    _write_table(path, _grid_comment(M.grid),
                 idx_names + x_names + [f"M{j}{k}" for j, k in pairs] + ["min_eig"], rows)


def read_matrix_measure(path) -> MatrixMeasureField:
    comments, header, rows = _read_table(path)
    grid = _parse_grid(comments[0])
    d = grid.dim
    npair = d * (d + 1) // 2
    upper = np.zeros((npair,) + grid.cells)
    for r in rows:
        idx = tuple(int(v) for v in r[:d])
        vals = r[2 * d:2 * d + npair]
        for p, v in enumerate(vals):
            upper[(p,) + idx] = float(v)
    return MatrixMeasureField(grid, upper)


def write_young(ym: EmpiricalYoungMeasure, path):
    """Columns: flat cell index, atom index, phase coordinates, weight."""
    p = ym.measures[0].atoms.shape[1] if ym.measures else 0
    rows = []
    for c, nu in enumerate(ym.measures):
        for a, (y, w) in enumerate(zip(nu.atoms, nu.weights)):
            rows.append([str(c), str(a)] + [_fmt(v) for v in y] + [_fmt(w)])
    comments = _grid_comment(ym.grid) + [
        f"# window={_fmt(ym.window[0])}:{_fmt(ym.window[1])} merge_tol={_fmt(ym.merge_tol)}"]
    _write_table(path, comments, ["cell", "atom"] + [f"y{k}" for k in range(p)] + ["weight"], rows)


def read_young(path) -> EmpiricalYoungMeasure:
    comments, header, rows = _read_table(path)
    grid = _parse_grid(comments[0])
    kv = dict(item.split("=", 1) for item in comments[1].lstrip("# ").split())
    t0, t1 = (float(v) for v in kv["window"].split(":"))
    groups = {}
    for r in rows:
        groups.setdefault(int(r[0]), []).append([float(v) for v in r[2:]])
    measures = []
    for c in range(int(np.prod(grid.cells))):
        arr = np.array(groups[c])
        measures.append(AtomicMeasure(arr[:, :-1], arr[:, -1]))
    return EmpiricalYoungMeasure(grid, measures, (t0, t1), float(kv["merge_tol"]))
