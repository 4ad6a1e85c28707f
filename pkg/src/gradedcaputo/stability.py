"""Empirical stability checks: weight identities and non-amplification of
perturbations in the initial data."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .mesh import build_aux_mesh, build_graded_mesh, build_spatial_mesh, choose_Nbar
from .pde import ProblemSpec, SchemeKind, solve
from .weights import hl1_coefficient_block, l1_weight_block

#: ratios may exceed one by this much before counting as amplification
AMPLIFICATION_TOL = 1e-8


class PerturbationMode(str, enum.Enum):
    POINTWISE = "pointwise"
    FOURIER = "fourier"


@dataclass
class PerturbationExperiment:
    """Perturb the initial data by ``epsilon * shape`` and track the max-norm
    ratio of the difference between perturbed and base runs, level by level.

    ``rho`` is the wave number of the Fourier mode ``sin(rho*pi*x/X)``; by
    default it is the highest mode that does not vanish on the grid,
    ``M - 1``. The pointwise bump sits at the middle interior node.
    """

    base_spec: ProblemSpec
    epsilon: float = 1e-3
    mode: PerturbationMode | str = PerturbationMode.FOURIER
    rho: Optional[int] = None
    amplification_history: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.mode = PerturbationMode(self.mode)
        if not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite, got {self.epsilon}")

    def shape(self, x: np.ndarray) -> np.ndarray:
        M = x.size - 1
        X = self.base_spec.X
        if self.mode is PerturbationMode.FOURIER:
            rho = M - 1 if self.rho is None else int(self.rho)
            out = np.sin(rho * math.pi * x / X)
        else:
            out = np.zeros_like(x)
            out[M // 2] = 1.0
        out[0] = out[-1] = 0.0  # boundary data are shared between the runs
        return out

    @property
    def max_ratio(self) -> float:
        if self.amplification_history is None:
            raise ValueError("experiment has not been run")
        return float(np.max(self.amplification_history))

    @property
    def amplifies(self) -> bool:
        return self.max_ratio > 1.0 + AMPLIFICATION_TOL


def run_perturbation(
    exp: PerturbationExperiment,
    N: int,
    M: int,
    beta: Optional[float] = None,
    scheme: SchemeKind | str = SchemeKind.HL1_GRADED,
    **solve_kw,
) -> np.ndarray:
    """Return ``|y_pert^j - y^j|_inf / |y_pert^0 - y^0|_inf`` for every level,
    the start-up levels first (HL1 only), then coarse levels ``1..N``."""
    spec = exp.base_spec
    x = build_spatial_mesh(M, spec.X).points
    bump = exp.epsilon * exp.shape(x)
    base_phi = spec.phi

    def phi_pert(xx):
        return np.asarray(base_phi(xx), dtype=np.float64) + np.interp(xx, x, bump)

    perturbed = replace(spec, phi=phi_pert)
    base = solve(spec, N, M, scheme, beta, **solve_kw)
    pert = solve(perturbed, N, M, scheme, beta, **solve_kw)

    diffs = [np.abs(pert.values - base.values).max(axis=1)]
    times = [base.times]
    if base.aux_values is not None:
        aux_diff = np.abs(pert.aux_values - base.aux_values).max(axis=1)
        # aux level 0 and the last aux level coincide with coarse levels 0 and 1
        diffs.insert(0, aux_diff[:-1])
        times.insert(0, base.aux.points[:-1])
        diffs[1] = diffs[1][1:]
        times[1] = times[1][1:]
    delta = np.concatenate(diffs)
    exp.times = np.concatenate(times)
    delta0 = float(delta[0])
    if delta0 == 0.0:
        exp.degenerate = True
        exp.amplification_history = np.zeros_like(delta)
    else:
        exp.degenerate = False
        exp.amplification_history = delta / delta0
    exp.info.update(scheme=SchemeKind(scheme).value, N=N, M=M, beta=base.info["beta"],
                    Nbar=base.info.get("Nbar"))
    return exp.amplification_history


# {{{ weight identities


@dataclass(frozen=True)
class Lemma1Report:
    N: int
    beta: float
    alpha: float
    Nbar: int
    beta_aux: float
    monotonicity_violation: float
    sum_violation: float

    @property
    def max_violation(self) -> float:
        return max(self.monotonicity_violation, self.sum_violation)

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_violation <= tol


def _monotonicity_violation(points: np.ndarray, alpha: float) -> float:
    """Largest relative drop ``(zeta[k-1] - zeta[k]) / zeta[k]`` over all ``J``."""
    n = points.size - 1
    worst = 0.0
    rows = max(1, (1 << 21) // max(n, 1))
    for J0 in range(1, n + 1, rows):
        J1 = min(J0 + rows, n + 1)
        Z = l1_weight_block(points, alpha, J0, J1)
        J = np.arange(J0, J1)[:, None]
        k = np.arange(1, Z.shape[1])[None, :]
        drop = (Z[:, :-1] - Z[:, 1:]) / np.where(Z[:, 1:] > 0, Z[:, 1:], 1.0)
        drop = np.where(k < J, drop, 0.0)
        if drop.size:
            worst = max(worst, float(drop.max()))
    return worst


def _sum_violation(points: np.ndarray, alpha: float) -> float:
    n = points.size - 1
    if n < 2:
        return 0.0
    worst = 0.0
    rows = max(1, (1 << 21) // (n + 1))
    for j0 in range(2, n + 1, rows):
        j1 = min(j0 + rows, n + 1)
        D = hl1_coefficient_block(points, alpha, j0, j1)
        J = np.arange(j0, j1)
        diag = D[J - j0, J]
        off = np.where(np.arange(j1)[None, :] < J[:, None], D, 0.0)
        scale = np.maximum(np.abs(diag), np.abs(off).sum(axis=1))
        worst = max(worst, float(np.max(np.abs(off.sum(axis=1) - diag) / scale)))
    return worst


def lemma1_audit(N: int, beta: float, alpha: float, Nbar: Optional[int] = None,
                 beta_aux: Optional[float] = None) -> Lemma1Report:
    """Check L1 weight monotonicity on the start-up mesh and the coarse-part
    row sums of the HL1 coefficients; report-only."""
    temporal = build_graded_mesh(N, beta, 1.0)
    if Nbar is None:
        Nbar = choose_Nbar(N, alpha, temporal.t1)
    beta_aux = beta if beta_aux is None else beta_aux
    aux = build_aux_mesh(Nbar, beta_aux, temporal.t1)
    return Lemma1Report(
        N=N, beta=beta, alpha=alpha, Nbar=Nbar, beta_aux=beta_aux,
        monotonicity_violation=_monotonicity_violation(aux.points, alpha),
        sum_violation=_sum_violation(temporal.points, alpha),
    )


# }}}
