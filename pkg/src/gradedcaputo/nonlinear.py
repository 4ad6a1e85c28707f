"""Semilinear diffusion ``D_t^alpha y = a y_xx + c y + g(y) + f`` by Newton
quasi-linearization at every time level."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .linalg import solve_tridiagonal
from .mesh import NBAR_MAX
from .pde import ProblemSpec, SchemeKind, SolutionGrid, _with_boundaries, assemble_level, solve
from .problems import manufactured_source_ex3, nlex3_exact


class NewtonDivergenceError(RuntimeError):
    def __init__(self, level: int, t: float, residual: float, iterations: int):
        self.level = level
        self.t = t
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Newton iteration did not converge at level {level} (t={t}): "
                         f"last update {residual:.3e} after {iterations} iterations")


class DominanceWarning(RuntimeWarning):
    pass


def _consistency_check(g, dg, rng: np.random.Generator, tol: float = 1e-6) -> None:
    y = rng.uniform(-2.0, 2.0, size=8)
    step = 1e-6
    fd = (np.asarray(g(y + step)) - np.asarray(g(y - step))) / (2.0 * step)
    exact = np.asarray(dg(y))
    if np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))) > tol:
        raise ValueError("derivative of the nonlinearity is inconsistent with its values")


@dataclass(frozen=True)
class NonlinearSpec:
    base: ProblemSpec
    g: Callable
    dg: Callable
    newton_tol: float = 1e-12
    newton_max_iters: int = 25

    def __post_init__(self) -> None:
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be at least 1")
        _consistency_check(self.g, self.dg, np.random.default_rng(0))

    @property
    def alpha(self) -> float:
        return self.base.alpha


@dataclass
class _NewtonStats:
    previous: Optional[np.ndarray] = None
    iterations: list = field(default_factory=list)
    lost_dominance: list = field(default_factory=list)


def _newton_level_factory(spec: NonlinearSpec, stats: _NewtonStats):
    base = spec.base

    def factory(_spec, spatial):
        lam = base.a / spatial.h**2
        if stats.previous is None:
            stats.previous = np.asarray(base.phi(spatial.points[1:-1]), dtype=np.float64)

        def solve_level(index: int, t: float, w: float, hist: np.ndarray) -> np.ndarray:
            ys = stats.previous
            update = math.inf
            for it in range(1, spec.newton_max_iters + 1):
                gs = np.asarray(spec.g(ys), dtype=np.float64)
                dgs = np.asarray(spec.dg(ys), dtype=np.float64)
                sys = assemble_level(base, spatial, t, w, hist,
                                     extra_diag=-dgs, extra_rhs=gs - dgs * ys)
                if np.any(np.abs(sys.diag) < 2.0 * lam):
                    if not stats.lost_dominance:
                        warnings.warn(f"level {index}: linearized system is not diagonally "
                                      "dominant", DominanceWarning, stacklevel=2)
                    stats.lost_dominance.append(index)
                new = solve_tridiagonal(sys)
                update = float(np.max(np.abs(new - ys)))
                ys = new
                if update < spec.newton_tol:
                    stats.iterations.append(it)
                    stats.previous = ys
                    return _with_boundaries(base, t, ys)
            raise NewtonDivergenceError(index, t, update, spec.newton_max_iters)

        return solve_level

    return factory


def solve_nonlinear(
    spec: NonlinearSpec,
    N: int,
    M: int,
    beta: Optional[float] = None,
    scheme: SchemeKind | str = SchemeKind.HL1_GRADED,
    *,
    Nbar: Optional[int] = None,
    beta_aux: Optional[float] = None,
    Nbar_max: int = NBAR_MAX,
    Nbar_rule: Optional[str] = None,
) -> SolutionGrid:
    scheme = SchemeKind(scheme)
    if scheme.is_uniform:
        raise ValueError(f"the nonlinear solver supports graded schemes only, got {scheme.value}")
    stats = _NewtonStats()
    grid = solve(spec.base, N, M, scheme, beta, Nbar=Nbar, beta_aux=beta_aux, Nbar_max=Nbar_max,
                 Nbar_rule=Nbar_rule,
                 level_factory=_newton_level_factory(spec, stats))
    grid.info.update(newton_iterations=stats.iterations,
                     max_newton_iterations=max(stats.iterations, default=0),
                     lost_dominance=stats.lost_dominance)
    return grid


def nlex3(alpha: float, **newton) -> NonlinearSpec:
    """Logistic-type reaction on (0, 1) with y = 1 + t^alpha sin(x)/Gamma(1+alpha)."""
    exact = nlex3_exact(alpha)
    base = ProblemSpec(alpha=alpha, a=1.0, c=0.0, X=1.0, T=1.0,
                       phi=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                       psi0=lambda t: 1.0,
                       psiX=lambda t: float(exact(1.0, t)),
                       f=lambda x, t: manufactured_source_ex3(alpha, x, t),
                       exact=exact, name="nlex3")
    return NonlinearSpec(base=base, g=lambda y: -y * (1.0 - y), dg=lambda y: -1.0 + 2.0 * y,
                         **newton)


def zero_nonlinearity(base: ProblemSpec, **newton) -> NonlinearSpec:
    return NonlinearSpec(base=replace(base), g=np.zeros_like, dg=np.zeros_like, **newton)
