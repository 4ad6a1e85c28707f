"""Scalar fractional delay equations by the method of steps.

    D_t^alpha y(t) = coef * y(t) + g(t, y(t - delay)),   0 < t <= T,
    y(t) = history(t),                                   -delay <= t <= 0.

The time axis is split into segments of length ``delay``, each carrying the same
graded mesh translated to its left endpoint, so ``t - delay`` is always a node
of the previous segment. The Caputo history always reaches back to ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .marching import march_hl1, march_l1
from .mesh import NBAR_MAX, AuxMesh, TemporalMesh, build_aux_mesh, build_graded_mesh, choose_Nbar
from .pde import SchemeKind, resolve_beta

_ALIGN_TOL = 1e-9


class DelayAlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class DelayProblem:
    alpha: float
    delay: float
    T: float
    history: Callable[[float], float]
    rhs: Callable[[float, float], float]
    coef: float = 0.0
    exact: Optional[Callable] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.delay > 0:
            raise ValueError(f"delay must be positive, got {self.delay}")
        if self.coef > 0:
            raise ValueError(f"coefficient of the current value must be <= 0, got {self.coef}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def segments(self) -> int:
        ratio = self.T / self.delay
        k = round(ratio)
        if k < 1 or abs(ratio - k) > _ALIGN_TOL * max(1.0, ratio):
            raise DelayAlignmentError(
                f"T = {self.T} is not a positive integer multiple of the delay {self.delay}")
        return int(k)


@dataclass(frozen=True)
class PiecewiseMesh:
    segments: tuple[TemporalMesh, ...]
    delay: float
    points: np.ndarray

    @property
    def N(self) -> int:
        """Intervals per segment."""
        return self.segments[0].N


def build_piecewise_mesh(N: int, beta: float, delay: float, n_segments: int) -> PiecewiseMesh:
    seg = build_graded_mesh(N, beta, delay)
    pts = [np.zeros(1)]
    for i in range(n_segments):
        pts.append(i * delay + seg.points[1:])
    points = np.concatenate(pts)
    # segment ends are exact multiples of the delay
    points[N :: N] = delay * np.arange(1, n_segments + 1)
    points.flags.writeable = False
    return PiecewiseMesh(segments=(seg,) * n_segments, delay=float(delay), points=points)


@dataclass
class DelaySolution:
    times: np.ndarray
    values: np.ndarray
    mesh: PiecewiseMesh
    scheme: SchemeKind
    aux: Optional[AuxMesh] = None
    aux_values: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def abs_error(self, exact: Callable) -> np.ndarray:
        return np.abs(self.values - np.vectorize(exact)(self.times))

    def max_abs_error(self, exact: Callable) -> float:
        return float(np.max(self.abs_error(exact)))


def solve_fdde(
    problem: DelayProblem,
    N_per_segment: int,
    beta: Optional[float] = None,
    scheme: SchemeKind | str = SchemeKind.HL1_GRADED,
    *,
    Nbar: Optional[int] = None,
    beta_aux: Optional[float] = None,
    Nbar_max: int = NBAR_MAX,
    Nbar_rule: Optional[str] = None,
) -> DelaySolution:
    scheme = SchemeKind(scheme)
    alpha = problem.alpha
    beta = resolve_beta(scheme, alpha, beta)
    n_seg = problem.segments
    N = int(N_per_segment)
    mesh = build_piecewise_mesh(N, beta, problem.delay, n_seg)
    pts = mesh.points
    Y = np.empty(pts.size)

    def delayed(index: int, t: float) -> float:
        if index <= N:
            return problem.history(t - problem.delay)
        return Y[index - N]

    def coarse_level(index: int, t: float, w: float, hist) -> np.ndarray:
        g = problem.rhs(t, delayed(index, t))
        return np.asarray((hist + g) / (w - problem.coef))

    def aux_level(index: int, t: float, w: float, hist) -> np.ndarray:
        # auxiliary nodes lie in [0, t1], so the delayed value is history data
        g = problem.rhs(t, problem.history(t - problem.delay))
        return np.asarray((hist + g) / (w - problem.coef))

    y0 = float(problem.history(0.0))
    info = {"beta": beta, "N_per_segment": N, "segments": n_seg}
    if not scheme.is_hl1:
        march_l1(pts, alpha, np.asarray(y0), coarse_level, out=Y)
        return DelaySolution(times=pts, values=Y, mesh=mesh, scheme=scheme, info=info)

    t1 = float(pts[1])
    if Nbar is None:
        rule = Nbar_rule or ("coarse" if scheme.is_uniform else "order")
        Nbar = choose_Nbar(N, alpha, t1, Nbar_max=Nbar_max, rule=rule)
    aux = build_aux_mesh(Nbar, beta if beta_aux is None else beta_aux, t1)
    aux_values = march_l1(aux.points, alpha, np.asarray(y0), aux_level)
    march_hl1(pts, aux, alpha, aux_values, coarse_level, out=Y)
    info.update(Nbar=aux.Nbar, beta_aux=aux.beta_aux)
    return DelaySolution(times=pts, values=Y, mesh=mesh, scheme=scheme,
                         aux=aux, aux_values=aux_values, info=info)


# {{{ example 1


def reference_solution_ex1(t: float, alpha: float = 0.5) -> float:
    r"""Exact solution of :math:`D^\alpha y = y(t - 1) - t` on :math:`[0, 2]`
    with :math:`y(t) = t` on :math:`[-1, 0]`.

    On :math:`[0, 1]` the right-hand side is :math:`-1`; on :math:`(1, 2]` it
    picks up the first-segment solution, and fractional integration of the
    resulting shifted powers gives

    .. math::

        y(t) = -\frac{t^\alpha}{\Gamma(1+\alpha)}
            - H(t - 1)\left[\frac{(t-1)^{2\alpha}}{\Gamma(1+2\alpha)}
            + \frac{(t-1)^{1+\alpha}}{\Gamma(2+\alpha)}\right].
    """
    if not 0.0 <= t <= 2.0:
        raise ValueError(f"reference solution is only available on [0, 2], got t={t}")
    y = -(t**alpha) / math.gamma(1.0 + alpha)
    if t > 1.0:
        s = t - 1.0
        y -= s ** (2.0 * alpha) / math.gamma(1.0 + 2.0 * alpha) + s ** (1.0 + alpha) / math.gamma(2.0 + alpha)
    return y


def example1(alpha: float = 0.5) -> DelayProblem:
    return DelayProblem(alpha=alpha, delay=1.0, T=2.0,
                        history=lambda t: t,
                        rhs=lambda t, yd: yd - t,
                        exact=lambda t: reference_solution_ex1(t, alpha))


# }}}
