"""Symmetric indefinite factorization with inertia (LAPACK Bunch-Kaufman)."""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack


class SymmetricFactor:
    """``K = P L D L^T P^T`` via ``dsytrf`` with inertia read off ``D``.

    ``D`` is block diagonal with 1x1 and 2x2 blocks; a pivot whose
    magnitude is below ``zero_tol * scale`` counts as a zero eigenvalue.
    ``scale`` defaults to ``max(1, max|K|)``; pass the magnitude of the
    unregularized matrix when ``K`` carries large diagonal shifts.
    """

    def __init__(self, K: np.ndarray, zero_tol: float = 1e-30, scale: float | None = None):
        self.dim = K.shape[0]
        ldu, ipiv, info = lapack.dsytrf(K, lower=1)
        if info < 0:
            raise ValueError(f"dsytrf: illegal argument {-info}")
        self._ldu = ldu
        self._ipiv = ipiv
        if scale is None:
            scale = max(float(np.max(np.abs(K))) if self.dim else 0.0, 1.0)
        self.n_pos, self.n_neg, self.n_zero = _inertia(ldu, ipiv, zero_tol * scale)
        if info > 0:
            self.n_zero = max(self.n_zero, 1)

    @property
    def singular(self) -> bool:
        return self.n_zero > 0

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dsytrs(self._ldu, self._ipiv, b, lower=1)
        if info != 0:
            raise ValueError(f"dsytrs failed with info={info}")
        return x


def _inertia(ldu: np.ndarray, ipiv: np.ndarray, zero: float) -> tuple[int, int, int]:
    pos = neg = nz = 0
    n = ldu.shape[0]
    k = 0
    while k < n:
        if ipiv[k] > 0:
            d = ldu[k, k]
            if abs(d) <= zero or not np.isfinite(d):
                nz += 1
            elif d > 0:
                pos += 1
            else:
                neg += 1
            k += 1
        else:
            a, b, c = ldu[k, k], ldu[k + 1, k], ldu[k + 1, k + 1]
            det = a * c - b * b
            tr = a + c
            if abs(det) <= zero * max(abs(b), zero):
                nz += 1
                if tr > 0:
                    pos += 1
                elif tr < 0:
                    neg += 1
                else:
                    nz += 1
            elif det < 0:
                pos += 1
                neg += 1
            elif tr > 0:
                pos += 2
            else:
                neg += 2
            k += 2
    return pos, neg, nz
