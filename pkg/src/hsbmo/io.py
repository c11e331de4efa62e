"""File formats: binary field containers, CSV tables, JSON manifests."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import struct
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .grid import BoundaryGrid, HalfSpaceField, SampledField, make_grid

__all__ = [
    "MAGIC",
    "write_field",
    "read_field",
    "field_to_bytes",
    "field_from_bytes",
    "write_halfspace",
    "read_halfspace",
    "write_field_csv",
    "read_field_csv",
    "write_rows_csv",
    "write_json",
    "canonical_json",
    "sha256_bytes",
    "sha256_file",
    "write_manifest",
    "write_propagator_cache",
    "read_propagator_cache",
]

MAGIC = b"HSBMO1"
LEVEL_MAGIC = b"HSBMOL"
CACHE_MAGIC = b"HSBMOP"
# magic, d, N, h, M
_HEADER = struct.Struct("<6sIIdI")
_COUNT = struct.Struct("<I")


def _pack_header(magic: bytes, grid: BoundaryGrid, M: int) -> bytes:
    return _HEADER.pack(magic, grid.d, grid.N, grid.h, M)


def _unpack_header(buf: bytes, magic: bytes):
    if len(buf) < _HEADER.size:
        raise ConfigError("truncated field header")
    tag, d, N, h, M = _HEADER.unpack_from(buf, 0)
    if tag != magic:
        raise ConfigError(f"bad magic {tag!r}, expected {magic!r}")
    try:
        grid = make_grid(d, N, h)
    except ValueError as exc:
        raise ConfigError(f"invalid grid in header: {exc}") from None
    if M < 1:
        raise ConfigError("component count must be positive")
    return grid, M, _HEADER.size


def _complex_payload(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<c16").tobytes()


def _read_complex(buf: bytes, offset: int, count: int) -> np.ndarray:
    need = 16 * count
    if len(buf) - offset < need:
        raise ConfigError(f"payload has {len(buf) - offset} bytes, expected {need}")
    return np.frombuffer(buf, dtype="<c16", count=count, offset=offset).astype(np.complex128)


def field_to_bytes(f: SampledField) -> bytes:
    return _pack_header(MAGIC, f.grid, f.M) + _complex_payload(f.values)


def field_from_bytes(buf: bytes) -> SampledField:
    grid, M, off = _unpack_header(buf, MAGIC)
    n = grid.size * M
    vals = _read_complex(buf, off, n)
    if len(buf) != off + 16 * n:
        raise ConfigError("trailing bytes after field payload")
    return SampledField(grid, vals.reshape(grid.shape + (M,)))


def write_field(path, f: SampledField) -> Path:
    path = Path(path)
    path.write_bytes(field_to_bytes(f))
    return path


def read_field(path) -> SampledField:
    return field_from_bytes(Path(path).read_bytes())


def write_halfspace(path, u: HalfSpaceField, include_gradient: bool = False) -> Path:
    """Field header, level table (count then doubles), then values per level,
    and the d+1 gradient channels per level when ``include_gradient``."""
    M = u.values.shape[-1]
    parts = [_pack_header(LEVEL_MAGIC, u.grid, M), _COUNT.pack(u.K),
             np.asarray(u.t_levels, "<f8").tobytes(), struct.pack("<?", bool(include_gradient)),
             _complex_payload(u.values)]
    if include_gradient:
        if u.gradient is None:
            raise ValueError("field carries no gradient")
        parts.append(_complex_payload(u.gradient))
    path = Path(path)
    path.write_bytes(b"".join(parts))
    return path


def read_halfspace(path) -> HalfSpaceField:
    buf = Path(path).read_bytes()
    grid, M, off = _unpack_header(buf, LEVEL_MAGIC)
    (K,) = _COUNT.unpack_from(buf, off)
    off += _COUNT.size
    t = np.frombuffer(buf, "<f8", count=K, offset=off).astype(float)
    off += 8 * K
    (has_grad,) = struct.unpack_from("<?", buf, off)
    off += 1
    n = K * grid.size * M
    vals = _read_complex(buf, off, n).reshape((K,) + grid.shape + (M,))
    off += 16 * n
    grad = None
    if has_grad:
        g = _read_complex(buf, off, (grid.d + 1) * n)
        grad = g.reshape((grid.d + 1, K) + grid.shape + (M,))
        off += 16 * g.size
    if off != len(buf):
        raise ConfigError("trailing bytes after half-space payload")
    return HalfSpaceField(grid, t, vals, grad)


def write_field_csv(path, f: SampledField) -> Path:
    """One row per node: coordinates x1..xd, then re_c, im_c per component."""
    grid = f.grid
    X = grid.mesh().reshape(-1, grid.d)
    V = f.values.reshape(-1, f.M)
    header = [f"x{j + 1}" for j in range(grid.d)]
    for c in range(f.M):
        header += [f"re{c}", f"im{c}"]
    cols = [X[:, j] for j in range(grid.d)]
    for c in range(f.M):
        cols += [V[:, c].real, V[:, c].imag]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return Path(path)


def read_field_csv(path, grid: Optional[BoundaryGrid] = None) -> SampledField:
    """Inverse of write_field_csv; the grid is inferred from the coordinates
    when not given.  Rows may come in any order."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    d = sum(1 for c in header if c.startswith("x"))
    if d not in (1, 2) or (len(header) - d) % 2:
        raise ConfigError(f"{path}:1: unrecognized header {header}")
    M = (len(header) - d) // 2
    try:
        A = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if grid is None:
        N = int(round(len(body) ** (1.0 / d)))
        xs = np.unique(A[:, 0])
        if N < 2 or xs.size != N:
            raise ConfigError(f"{path}: cannot infer grid from {len(body)} rows")
        h = float(np.median(np.diff(xs)))
        grid = make_grid(d, N, h)
    if A.shape[0] != grid.size:
        raise ConfigError(f"{path}: {A.shape[0]} rows for a grid of {grid.size} nodes")
    idx = np.rint(A[:, :d] / grid.h).astype(int) + grid.N // 2
    vals = np.zeros(grid.shape + (M,), complex)
    cplx = A[:, d::2] + 1j * A[:, d + 1::2]
    vals[tuple(idx.T)] = cplx
    return SampledField(grid, vals)


def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return Path(path)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def canonical_json(obj) -> str:
    """Sorted-key, fixed-separator JSON; identical inputs give identical bytes."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(canonical_json(obj))
    return path


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, meta: dict, outputs: Sequence, inputs: Sequence = ()) -> Path:
    """manifest.json listing every output (and input) file with its sha256."""
    out_dir = Path(out_dir)
    entry = dict(meta)
    entry["outputs"] = {Path(p).name: sha256_file(p) for p in outputs}
    if inputs:
        entry["inputs"] = {str(p): sha256_file(p) for p in inputs}
    return write_json(out_dir / "manifest.json", entry)


def write_propagator_cache(path, prop) -> Path:
    """Header, then M*M solvent entries per frequency in FFT order, then a
    JSON trailer holding the system description."""
    desc = json.dumps(prop.system.describe(), sort_keys=True).encode()
    buf = _io.BytesIO()
    buf.write(_pack_header(CACHE_MAGIC, prop.grid, prop.M))
    buf.write(_complex_payload(prop.solvents))
    buf.write(_COUNT.pack(len(desc)))
    buf.write(desc)
    path = Path(path)
    path.write_bytes(buf.getvalue())
    return path


def read_propagator_cache(path, system):
    """Rebuild a propagator from a cache file; the stored system description
    must match ``system``."""
    from .kernels import propagator_from_solvents

    buf = Path(path).read_bytes()
    grid, M, off = _unpack_header(buf, CACHE_MAGIC)
    n = grid.size * M * M
    Lam = _read_complex(buf, off, n).reshape(grid.shape + (M, M))
    off += 16 * n
    (ln,) = _COUNT.unpack_from(buf, off)
    off += _COUNT.size
    desc = json.loads(buf[off:off + ln].decode())
    if desc != json.loads(json.dumps(system.describe(), sort_keys=True)):
        raise ConfigError("propagator cache was built for a different system")
    return propagator_from_solvents(system, grid, Lam, meta={"cached": True})
