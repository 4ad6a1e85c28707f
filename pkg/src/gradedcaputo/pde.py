"""Solvers for the 1-d time-fractional diffusion equation

    D_t^alpha y = a y_xx + c y + f(x, t),   0 < x < X, 0 < t <= T,

with y(x, 0) = phi(x) and Dirichlet data psi0(t), psiX(t).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import TridiagonalSystem, solve_tridiagonal
from .marching import march_hl1, march_l1
from .mesh import (
    NBAR_MAX,
    AuxMesh,
    SpatialMesh,
    TemporalMesh,
    build_aux_mesh,
    build_graded_mesh,
    build_spatial_mesh,
    choose_Nbar,
)


class SchemeKind(str, enum.Enum):
    HL1_GRADED = "hl1-graded"
    L1_GRADED = "l1-graded"
    HL1_UNIFORM = "hl1-uniform"
    L1_UNIFORM = "l1-uniform"

    @property
    def is_hl1(self) -> bool:
        return self in (SchemeKind.HL1_GRADED, SchemeKind.HL1_UNIFORM)

    @property
    def is_uniform(self) -> bool:
        return self in (SchemeKind.HL1_UNIFORM, SchemeKind.L1_UNIFORM)

    def default_beta(self, alpha: float) -> float:
        """Grading exponent: 1 on uniform meshes, otherwise the order-optimal
        value ``(3 - alpha)/alpha`` (HL1) or ``(2 - alpha)/alpha`` (L1)."""
        if self.is_uniform:
            return 1.0
        return (3.0 - alpha) / alpha if self.is_hl1 else (2.0 - alpha) / alpha


def resolve_beta(scheme: SchemeKind, alpha: float, beta: Optional[float]) -> float:
    scheme = SchemeKind(scheme)
    if scheme.is_uniform:
        if beta is not None and beta != 1.0:
            raise ValueError(f"{scheme.value} needs beta = 1, got {beta}")
        return 1.0
    return scheme.default_beta(alpha) if beta is None else float(beta)


def _zero(*args):
    return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float
    a: float = 1.0
    c: float = 0.0
    X: float = 1.0
    T: float = 1.0
    phi: Callable = _zero
    psi0: Callable = _zero
    psiX: Callable = _zero
    f: Callable = _zero
    exact: Optional[Callable] = None
    name: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.a > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.a}")
        if self.c > 0:
            raise ValueError(f"reaction coefficient must be <= 0, got {self.c}")
        if not (self.X > 0 and self.T > 0):
            raise ValueError("X and T must be positive")

    def check_corners(self, tol: float = 1e-8) -> None:
        """Warn if initial and boundary data disagree at the corners."""
        left = float(np.atleast_1d(self.phi(np.array([0.0])))[0])
        right = float(np.atleast_1d(self.phi(np.array([self.X])))[0])
        for side, ic, bc in (("x=0", left, self.psi0(0.0)), ("x=X", right, self.psiX(0.0))):
            if abs(ic - float(bc)) > tol * max(1.0, abs(ic)):
                warnings.warn(f"initial and boundary data disagree at {side}: {ic} vs {bc}",
                              stacklevel=2)


@dataclass
class SolutionGrid:
    """Space-time solution. ``values[j, m]`` approximates ``y(x_m, t_j)``."""

    spatial: SpatialMesh
    times: np.ndarray
    values: np.ndarray
    scheme: SchemeKind
    alpha: float
    temporal: Optional[TemporalMesh] = None
    aux: Optional[AuxMesh] = None
    aux_values: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.times.size - 1

    @property
    def M(self) -> int:
        return self.spatial.M

    def abs_error(self, exact: Callable) -> np.ndarray:
        x = self.spatial.points[None, :]
        t = self.times[:, None]
        return np.abs(self.values - np.broadcast_to(exact(x, t), self.values.shape))


def max_abs_error(grid: SolutionGrid, exact: Callable, include_aux: bool = False) -> float:
    """Maximum nodal error over the coarse grid (and optionally the start-up
    levels)."""
    err = float(np.max(grid.abs_error(exact)))
    if include_aux and grid.aux_values is not None:
        x = grid.spatial.points[None, :]
        t = grid.aux.points[:, None]
        aux_err = np.abs(grid.aux_values - np.broadcast_to(exact(x, t), grid.aux_values.shape))
        err = max(err, float(np.max(aux_err)))
    return err


# {{{ one implicit level


def assemble_level(
    spec: ProblemSpec,
    spatial: SpatialMesh,
    t: float,
    w: float,
    hist: np.ndarray,
    extra_diag=None,
    extra_rhs=None,
) -> TridiagonalSystem:
    """Interior system ``(w + 2a/h^2 - c) u_m - a/h^2 (u_{m-1} + u_{m+1}) = rhs``."""
    if not w > 0:
        raise ValueError(f"non-positive Caputo diagonal weight {w} at t={t}")
    lam = spec.a / spatial.h**2
    n = spatial.M - 1
    diag = np.full(n, w + 2.0 * lam - spec.c)
    rhs = hist[1:-1] + spec.f(spatial.points[1:-1], t)
    if extra_diag is not None:
        diag = diag + extra_diag
    if extra_rhs is not None:
        rhs = rhs + extra_rhs
    rhs = np.array(rhs, dtype=np.float64)
    rhs[0] += lam * spec.psi0(t)
    rhs[-1] += lam * spec.psiX(t)
    off = np.full(n - 1, -lam)
    return TridiagonalSystem(lower=off, diag=diag, upper=off.copy(), rhs=rhs)


def _with_boundaries(spec: ProblemSpec, t: float, interior: np.ndarray) -> np.ndarray:
    row = np.empty(interior.size + 2)
    row[0] = spec.psi0(t)
    row[-1] = spec.psiX(t)
    row[1:-1] = interior
    return row


def _linear_level(spec: ProblemSpec, spatial: SpatialMesh):
    def solve_level(index: int, t: float, w: float, hist: np.ndarray) -> np.ndarray:
        sys = assemble_level(spec, spatial, t, w, hist)
        return _with_boundaries(spec, t, solve_tridiagonal(sys))

    return solve_level


def initial_row(spec: ProblemSpec, spatial: SpatialMesh) -> np.ndarray:
    return np.array(spec.phi(spatial.points), dtype=np.float64) * np.ones(spatial.M + 1)


# }}}


# {{{ marches


def startup_phase(spec: ProblemSpec, aux: AuxMesh, spatial: SpatialMesh,
                  solve_level=None) -> np.ndarray:
    """Graded L1 march over the auxiliary mesh; returns ``(Nbar + 1, M + 1)``."""
    if spatial.M < 2:
        raise ValueError("need at least one interior spatial node (M >= 2)")
    if solve_level is None:
        solve_level = _linear_level(spec, spatial)
    return march_l1(aux.points, spec.alpha, initial_row(spec, spatial), solve_level)


def hl1_march(spec: ProblemSpec, grid: SolutionGrid, solve_level=None) -> SolutionGrid:
    """Fill ``grid.values`` for levels ``2..N`` by the HL1 scheme."""
    if grid.aux is None or grid.aux_values is None:
        raise ValueError("the start-up phase has to run before the HL1 march")
    if solve_level is None:
        solve_level = _linear_level(spec, grid.spatial)
    march_hl1(grid.times, grid.aux, spec.alpha, grid.aux_values, solve_level, out=grid.values)
    return grid


def l1_march(spec: ProblemSpec, temporal: TemporalMesh, spatial: SpatialMesh,
             scheme: SchemeKind = SchemeKind.L1_GRADED, solve_level=None) -> SolutionGrid:
    """Plain L1 scheme on the coarse mesh (no start-up mesh)."""
    if spatial.M < 2:
        raise ValueError("need at least one interior spatial node (M >= 2)")
    if solve_level is None:
        solve_level = _linear_level(spec, spatial)
    values = march_l1(temporal.points, spec.alpha, initial_row(spec, spatial), solve_level)
    return SolutionGrid(spatial=spatial, times=temporal.points, values=values,
                        scheme=SchemeKind(scheme), alpha=spec.alpha, temporal=temporal)


def build_startup_mesh(
    temporal: TemporalMesh,
    alpha: float,
    Nbar: Optional[int] = None,
    beta_aux: Optional[float] = None,
    Nbar_max: int = NBAR_MAX,
    Nbar_rule: Optional[str] = None,
) -> AuxMesh:
    """Start-up mesh of ``[0, t1]``; by default graded like the coarse mesh."""
    t1 = temporal.t1
    if Nbar is None:
        rule = Nbar_rule or ("coarse" if temporal.beta == 1.0 else "order")
        Nbar = choose_Nbar(temporal.N, alpha, t1, Nbar_max=Nbar_max, rule=rule)
    return build_aux_mesh(Nbar, temporal.beta if beta_aux is None else beta_aux, t1)


def solve(
    spec: ProblemSpec,
    N: int,
    M: int,
    scheme: SchemeKind | str = SchemeKind.HL1_GRADED,
    beta: Optional[float] = None,
    *,
    Nbar: Optional[int] = None,
    beta_aux: Optional[float] = None,
    Nbar_max: int = NBAR_MAX,
    Nbar_rule: Optional[str] = None,
    store_aux: bool = True,
    level_factory=None,
) -> SolutionGrid:
    """Solve ``spec`` on an ``N x M`` grid with the requested scheme.

    ``level_factory(spec, spatial)`` may supply a different per-level solver
    (the nonlinear solver uses this for its Newton iteration).
    """
    scheme = SchemeKind(scheme)
    spec.check_corners()
    beta = resolve_beta(scheme, spec.alpha, beta)
    temporal = build_graded_mesh(N, beta, spec.T)
    spatial = build_spatial_mesh(M, spec.X)
    factory = level_factory or _linear_level

    if not scheme.is_hl1:
        grid = l1_march(spec, temporal, spatial, scheme, solve_level=factory(spec, spatial))
        grid.info.update(beta=beta)
        return grid

    aux = build_startup_mesh(temporal, spec.alpha, Nbar, beta_aux, Nbar_max, Nbar_rule)
    aux_values = startup_phase(spec, aux, spatial, solve_level=factory(spec, spatial))
    values = np.empty((N + 1, M + 1))
    grid = SolutionGrid(spatial=spatial, times=temporal.points, values=values, scheme=scheme,
                        alpha=spec.alpha, temporal=temporal, aux=aux, aux_values=aux_values)
    hl1_march(spec, grid, solve_level=factory(spec, spatial))
    grid.info.update(beta=beta, Nbar=aux.Nbar, beta_aux=aux.beta_aux)
    if not store_aux:
        grid.aux_values = None
    return grid


# }}}


__all__ = [
    "ProblemSpec",
    "SchemeKind",
    "SolutionGrid",
    "assemble_level",
    "build_startup_mesh",
    "hl1_march",
    "initial_row",
    "l1_march",
    "max_abs_error",
    "resolve_beta",
    "solve",
    "startup_phase",
]
