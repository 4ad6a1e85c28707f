"""Tridiagonal solves for the implicit time steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ZeroPivotError(ArithmeticError):
    def __init__(self, row: int, pivot: float):
        super().__init__(f"zero or near-zero pivot {pivot!r} in row {row}")
        self.row = row
        self.pivot = pivot


@dataclass
class TridiagonalSystem:
    """``lower`` (n-1), ``diag`` (n), ``upper`` (n-1) and ``rhs`` (n)."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.diag)
        if n < 1:
            raise ValueError("empty system")
        if len(self.lower) != n - 1 or len(self.upper) != n - 1 or len(self.rhs) != n:
            raise ValueError(
                f"inconsistent sizes: lower {len(self.lower)}, diag {n}, "
                f"upper {len(self.upper)}, rhs {len(self.rhs)}")

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(self.diag, dtype=np.float64) * x
        y[1:] += np.asarray(self.lower) * x[:-1]
        y[:-1] += np.asarray(self.upper) * x[1:]
        return y

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros(len(self.diag))
        off[1:] += np.abs(self.lower)
        off[:-1] += np.abs(self.upper)
        return bool(np.all(np.abs(self.diag) >= off))


def solve_tridiagonal(sys: TridiagonalSystem, pivot_tol: float = 1e-300) -> np.ndarray:
    """Thomas algorithm without pivoting.

    The inputs of ``sys`` are left untouched; the sweep works on copies.
    """
    a = np.asarray(sys.lower, dtype=np.float64).tolist()
    b = np.asarray(sys.diag, dtype=np.float64).tolist()
    c = np.asarray(sys.upper, dtype=np.float64).tolist()
    d = np.asarray(sys.rhs, dtype=np.float64).tolist()
    n = len(b)

    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if not abs(piv) > pivot_tol:
        raise ZeroPivotError(0, piv)
    cp[0] = c[0] / piv if n > 1 else 0.0
    dp[0] = d[0] / piv
    for i in range(1, n):
        ai = a[i - 1]
        piv = b[i] - ai * cp[i - 1]
        if not abs(piv) > pivot_tol:
            raise ZeroPivotError(i, piv)
        if i < n - 1:
            cp[i] = c[i] / piv
        dp[i] = (d[i] - ai * dp[i - 1]) / piv

    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)
