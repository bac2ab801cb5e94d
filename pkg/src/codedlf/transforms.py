"""Separable orthonormal 5D DCT and the coded data-fidelity gradient.

The synthesis basis is the Kronecker product of five orthonormal DCT-II
matrices, one per tensor axis, but it is never materialized; both
transforms are applied axis by axis.  dct5_forward is the analysis
transform (basis transposed applied to a signal), dct5_inverse the
synthesis transform, and the pair is an exact inverse up to rounding.

The data-fidelity term of coded reconstruction is

    f(alpha) = || l_star - m * synth(alpha) ||_2^2

where m is the broadcast binary coding mask.  Because m is a diagonal
orthogonal projection (m * m = m), the gradient takes the closed form

    grad f(alpha) = 2 * (analysis(m * synth(alpha)) - analysis(m * l_star)).

Transforms compute in float64 regardless of input dtype; persisted tensors
stay float32 at the file boundary.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II analysis matrix of size (n, n), float64.

    C[k, x] = c_k * cos(pi * (2x + 1) * k / (2n)), c_0 = sqrt(1/n),
    c_k = sqrt(2/n) otherwise, so C @ C.T = I.
    """
    k = np.arange(n, dtype=np.float64)[:, None]
    x = np.arange(n, dtype=np.float64)[None, :]
    mat = np.cos(np.pi * (2.0 * x + 1.0) * k / (2.0 * n))
    mat[0] *= np.sqrt(1.0 / n)
    mat[1:] *= np.sqrt(2.0 / n)
    return mat


def _apply_axis(x: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(mat, x, axes=(1, axis)), 0, axis)


def dct5_forward(l: np.ndarray) -> np.ndarray:
    """Analysis transform: orthonormal DCT-II along each of the five axes."""
    x = np.asarray(l, dtype=np.float64)
    if x.ndim != 5:
        raise ValueError(f"expected a 5D tensor, got shape {x.shape}")
    for axis, n in enumerate(x.shape):
        x = _apply_axis(x, _dct_matrix(n), axis)
    return x


def dct5_inverse(a: np.ndarray) -> np.ndarray:
    """Synthesis transform, the exact adjoint/inverse of dct5_forward."""
    x = np.asarray(a, dtype=np.float64)
    if x.ndim != 5:
        raise ValueError(f"expected a 5D tensor, got shape {x.shape}")
    for axis, n in enumerate(x.shape):
        x = _apply_axis(x, _dct_matrix(n).T, axis)
    return x


def _broadcast_mask(m: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != shape[2:]:
        raise ValueError(
            f"mask shape {m.shape} does not match tensor dims {shape[2:]}"
        )
    return m[None, None]


def fidelity_objective(a: np.ndarray, l_star: np.ndarray, m: np.ndarray) -> float:
    """Squared residual || l_star - m * synth(a) ||_2^2."""
    l_star = np.asarray(l_star, dtype=np.float64)
    mb = _broadcast_mask(m, l_star.shape)
    resid = l_star - mb * dct5_inverse(a)
    return float(np.vdot(resid, resid).real)


def fidelity_gradient(a: np.ndarray, l_star: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Gradient of the coded data-fidelity term with respect to a."""
    a = np.asarray(a, dtype=np.float64)
    l_star = np.asarray(l_star, dtype=np.float64)
    if a.shape != l_star.shape:
        raise ValueError(
            f"coefficients {a.shape} and measurement {l_star.shape} disagree"
        )
    mb = _broadcast_mask(m, l_star.shape)
    return 2.0 * (dct5_forward(mb * dct5_inverse(a)) - dct5_forward(mb * l_star))
