"""Dense 5D light-field tensors and the LF5D container format.

Index convention used throughout the package: a light field L[u, v, s, t, c]
is a float32 ndarray of shape (U, V, S, T, C) in C order, so the spectral
axis runs fastest.  (u, v) are the angular coordinates, (s, t) the spatial
ones and c the spectral channel.  Central views are (S, T, C) arrays and
disparity maps are (S, T) arrays; on disk both are stored as degenerate 5D
tensors (U = V = 1, and C = 1 for disparity).

LF5D container layout (little-endian, normative):

    bytes 0..3   magic "LF5D"
    bytes 4..5   version, u16 (currently 1)
    bytes 6..25  dims U, V, S, T, C as five u32
    bytes 26..   U*V*S*T*C float32 values, C order as above

NaN or Inf payloads are rejected on both read and write.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"LF5D"
VERSION = 1
_HEADER = struct.Struct("<4sH5I")


class LF5DError(Exception):
    """Malformed or unreadable LF5D container."""


class BadMagicError(LF5DError):
    """File does not start with the LF5D magic bytes."""


class TruncatedError(LF5DError):
    """Header or payload is shorter than the dims require."""


class NonFiniteError(LF5DError):
    """Payload contains NaN or Inf values."""


def as_tensor5(a, name: str = "tensor") -> np.ndarray:
    """Validate and return `a` as a float32 5D tensor.

    Raises ValueError on wrong rank or zero-sized axes and NonFiniteError
    on NaN/Inf entries.
    """
    a = np.asarray(a, dtype=np.float32)
    if a.ndim != 5:
        raise ValueError(f"{name} must be 5-dimensional, got shape {a.shape}")
    if min(a.shape) < 1:
        raise ValueError(f"{name} has zero-sized axis: {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return a


def write_lf5d(t: np.ndarray, path) -> None:
    """Write a 5D tensor to `path` in the LF5D format (overwrites)."""
    t = as_tensor5(t)
    u, v, s, tt, c = t.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, u, v, s, tt, c))
        fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def read_lf5d(path) -> np.ndarray:
    """Read an LF5D file and return its float32 (U, V, S, T, C) tensor."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        if raw[: len(MAGIC)] != MAGIC[: len(raw)]:
            raise BadMagicError(f"{path}: not an LF5D file")
        raise TruncatedError(f"{path}: incomplete header ({len(raw)} bytes)")
    magic, version, u, v, s, t, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise LF5DError(f"{path}: unsupported version {version}")
    dims = (u, v, s, t, c)
    if min(dims) < 1:
        raise LF5DError(f"{path}: zero-sized axis in dims {dims}")
    n = u * v * s * t * c
    payload = raw[_HEADER.size :]
    if len(payload) < 4 * n:
        raise TruncatedError(
            f"{path}: payload holds {len(payload)} bytes, need {4 * n}"
        )
    if len(payload) > 4 * n:
        raise LF5DError(f"{path}: {len(payload) - 4 * n} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4", count=n).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    return np.ascontiguousarray(data, dtype=np.float32)


def central_indices(n_u: int, n_v: int) -> tuple[int, int]:
    """Central angular coordinates (floor division) for odd (U, V)."""
    return n_u // 2, n_v // 2


def slice_central_view(l: np.ndarray) -> np.ndarray:
    """Extract the central subaperture view, an (S, T, C) array.

    The angular resolution must be odd in both directions so that the
    central coordinates are unambiguous.
    """
    l = as_tensor5(l, "light field")
    n_u, n_v = l.shape[:2]
    if n_u % 2 == 0 or n_v % 2 == 0:
        raise ValueError(f"angular dims must be odd, got ({n_u}, {n_v})")
    u_c, v_c = central_indices(n_u, n_v)
    return np.ascontiguousarray(l[u_c, v_c])


def cv_to_tensor5(cv: np.ndarray) -> np.ndarray:
    """Wrap an (S, T, C) central view as a (1, 1, S, T, C) tensor."""
    cv = np.asarray(cv, dtype=np.float32)
    if cv.ndim != 3:
        raise ValueError(f"central view must be (S, T, C), got {cv.shape}")
    return cv[None, None]


def tensor5_to_cv(t: np.ndarray) -> np.ndarray:
    """Inverse of cv_to_tensor5; requires U = V = 1."""
    t = as_tensor5(t, "central view tensor")
    if t.shape[0] != 1 or t.shape[1] != 1:
        raise ValueError(f"expected U = V = 1, got shape {t.shape}")
    return np.ascontiguousarray(t[0, 0])


def disp_to_tensor5(d: np.ndarray) -> np.ndarray:
    """Wrap an (S, T) disparity map as a (1, 1, S, T, 1) tensor."""
    d = np.asarray(d, dtype=np.float32)
    if d.ndim != 2:
        raise ValueError(f"disparity map must be (S, T), got {d.shape}")
    return d[None, None, :, :, None]


def tensor5_to_disp(t: np.ndarray) -> np.ndarray:
    """Inverse of disp_to_tensor5; requires U = V = C = 1."""
    t = as_tensor5(t, "disparity tensor")
    if t.shape[0] != 1 or t.shape[1] != 1 or t.shape[4] != 1:
        raise ValueError(f"expected U = V = C = 1, got shape {t.shape}")
    return np.ascontiguousarray(t[0, 0, :, :, 0])
