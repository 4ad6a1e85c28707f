"""Temporal (graded), auxiliary (start-up) and spatial meshes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Default hard cap on the number of auxiliary sub-intervals.
NBAR_MAX = 10**6


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TemporalMesh:
    """Graded time points ``t_j = (j/N)**beta * T``."""

    N: int
    beta: float
    T: float
    points: np.ndarray
    steps: np.ndarray

    @property
    def t1(self) -> float:
        return float(self.points[1])


@dataclass(frozen=True)
class AuxMesh:
    """Fine graded mesh of ``[0, t1]`` used to start the high-order scheme."""

    Nbar: int
    beta_aux: float
    points: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def t1(self) -> float:
        return float(self.points[-1])


@dataclass(frozen=True)
class SpatialMesh:
    M: int
    X: float
    h: float
    points: np.ndarray


def _graded_points(n: int, beta: float, length: float) -> np.ndarray:
    pts = length * (np.arange(n + 1, dtype=np.float64) / n) ** beta
    # (n/n)**beta is exactly 1, so the right endpoint is exact already
    pts[-1] = length
    return pts


def build_graded_mesh(N: int, beta: float, T: float) -> TemporalMesh:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not beta > 0:
        raise ValueError(f"grading exponent must be positive, got {beta!r}")
    if not T > 0:
        raise ValueError(f"final time must be positive, got {T!r}")
    N = int(N)
    pts = _graded_points(N, float(beta), float(T))
    return TemporalMesh(N=N, beta=float(beta), T=float(T),
                        points=_frozen(pts), steps=_frozen(np.diff(pts)))


def choose_Nbar(
    N: int,
    alpha: float,
    t1: float | None = None,
    *,
    Nbar_max: int = NBAR_MAX,
    rule: str = "order",
) -> int:
    """Number of auxiliary sub-intervals of ``[0, t1]``.

    ``rule="order"`` returns ``ceil(N**((3 - alpha)/(2 - alpha)))`` so that the
    start-up L1 error ``Nbar**(alpha - 2)`` matches ``N**(alpha - 3)``.
    ``rule="literal"`` solves ``Nbar**(alpha - 2) = N**(alpha - 3) * t1``
    instead, which needs ``t1`` and grows very quickly with the grading.
    ``rule="coarse"`` takes ``Nbar = N``; this is the default for uniform
    meshes, where the coarse scheme is limited to order ``alpha`` anyway.
    All rules are capped at ``Nbar_max``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if Nbar_max < 1:
        raise ValueError(f"Nbar_max must be >= 1, got {Nbar_max!r}")

    if rule == "coarse":
        return max(1, min(int(Nbar_max), int(N)))
    if rule == "order":
        log_nbar = (3.0 - alpha) / (2.0 - alpha) * math.log(N)
    elif rule == "literal":
        if t1 is None or not t1 > 0:
            raise ValueError("the literal rule needs a positive t1")
        log_nbar = ((3.0 - alpha) * math.log(N) - math.log(t1)) / (2.0 - alpha)
    else:
        raise ValueError(f"unknown Nbar rule {rule!r}")

    if log_nbar >= math.log(Nbar_max):
        return int(Nbar_max)
    nbar = math.exp(log_nbar)
    # guard against exp/log round-off pushing an integer power past itself
    rounded = round(nbar)
    if abs(nbar - rounded) <= 1e-9 * max(1.0, nbar):
        return max(1, min(int(Nbar_max), int(rounded)))
    return max(1, min(int(Nbar_max), math.ceil(nbar)))


def build_aux_mesh(Nbar: int, beta_aux: float, t1: float) -> AuxMesh:
    if int(Nbar) != Nbar or Nbar < 1:
        raise ValueError(f"Nbar must be a positive integer, got {Nbar!r}")
    if not beta_aux > 0:
        raise ValueError(f"grading exponent must be positive, got {beta_aux!r}")
    if not t1 > 0:
        raise ValueError(f"t1 must be positive, got {t1!r}")
    pts = _graded_points(int(Nbar), float(beta_aux), float(t1))
    return AuxMesh(Nbar=int(Nbar), beta_aux=float(beta_aux), points=_frozen(pts))


def build_spatial_mesh(M: int, X: float) -> SpatialMesh:
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    if not X > 0:
        raise ValueError(f"X must be positive, got {X!r}")
    M = int(M)
    h = float(X) / M
    pts = h * np.arange(M + 1, dtype=np.float64)
    pts[-1] = float(X)
    return SpatialMesh(M=M, X=float(X), h=h, points=_frozen(pts))
