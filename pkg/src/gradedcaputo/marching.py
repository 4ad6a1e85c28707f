"""Time-marching engine shared by the PDE, delay and nonlinear solvers.

At every level the discrete Caputo derivative is written as
``w * u_new - history`` and handed to a ``solve_level(index, t, w, history)``
callback, which returns the new state. States are numpy arrays of any fixed
shape (a spatial row, or a scalar for ODEs).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .mesh import AuxMesh
from .weights import hl1_coefficient_block, l1_weight_block, xi_weight_block

LevelSolver = Callable[[int, float, float, np.ndarray], np.ndarray]

# bound on the entries of one block of weights (doubles)
_BLOCK_ENTRIES = 1 << 22


def march_l1(points, alpha: float, u0, solve_level: LevelSolver, out=None) -> np.ndarray:
    r"""Implicit L1 march over ``points``, starting from ``u0`` at ``points[0]``.

    The history sum :math:`\sum_{k<J-1} \zeta_{k,J} (u^{k+1} - u^k)` is split
    into a block of past levels, applied as one matrix product per block of
    targets, and the few in-block levels that are still being computed.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.size - 1
    u0 = np.asarray(u0, dtype=np.float64)
    U = np.empty((n + 1,) + u0.shape) if out is None else out
    U[0] = u0
    dU = np.empty((n,) + u0.shape)

    rows = int(max(8, min(512, _BLOCK_ENTRIES // max(n, 1))))
    for J0 in range(1, n + 1, rows):
        J1 = min(J0 + rows, n + 1)
        Z = l1_weight_block(points, alpha, J0, J1)
        if J0 >= 2:
            H = np.tensordot(Z[:, : J0 - 1], dU[: J0 - 1], axes=1)
        else:
            H = np.zeros((J1 - J0,) + u0.shape)
        for J in range(J0, J1):
            z = Z[J - J0]
            s = H[J - J0] + np.tensordot(z[J0 - 1 : J - 1], dU[J0 - 1 : J - 1], axes=1)
            w = float(z[J - 1])
            U[J] = solve_level(J, float(points[J]), w, w * U[J - 1] - s)
            dU[J - 1] = U[J] - U[J - 1]
    return U


def startup_history(aux: AuxMesh, alpha: float, aux_states, targets) -> np.ndarray:
    r"""Start-up part :math:`\sum_k \xi_{k,j} (u^{(k+1)} - u^{(k)})` for
    every target time, one row per target."""
    aux_states = np.asarray(aux_states, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    dU = np.diff(aux_states, axis=0)
    out = np.empty((targets.size,) + aux_states.shape[1:])
    rows = int(max(1, _BLOCK_ENTRIES // max(aux.Nbar, 1)))
    for i0 in range(0, targets.size, rows):
        i1 = min(i0 + rows, targets.size)
        xi = xi_weight_block(aux, alpha, targets[i0:i1])
        out[i0:i1] = np.tensordot(xi, dU, axes=1)
    return out


def march_hl1(
    points,
    aux: AuxMesh,
    alpha: float,
    aux_states,
    solve_level: LevelSolver,
    out=None,
) -> np.ndarray:
    """HL1 march over coarse ``points[2:]``; levels 0 and 1 come from the
    start-up states on ``aux``."""
    points = np.asarray(points, dtype=np.float64)
    N = points.size - 1
    aux_states = np.asarray(aux_states, dtype=np.float64)
    Y = np.empty((N + 1,) + aux_states.shape[1:]) if out is None else out
    Y[0] = aux_states[0]
    Y[1] = aux_states[-1]
    if N < 2:
        return Y

    start = startup_history(aux, alpha, aux_states, points[2:])
    rows = int(max(8, min(512, _BLOCK_ENTRIES // (N + 1))))
    for j0 in range(2, N + 1, rows):
        j1 = min(j0 + rows, N + 1)
        D = hl1_coefficient_block(points, alpha, j0, j1)
        for j in range(j0, j1):
            d = D[j - j0]
            hist = np.tensordot(d[:j], Y[:j], axes=1) - start[j - 2]
            Y[j] = solve_level(j, float(points[j]), float(d[j]), hist)
    return Y
