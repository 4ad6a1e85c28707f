"""Builtin test problems with known solutions."""

from __future__ import annotations

import math

import numpy as np

from .pde import ProblemSpec
from .special import MittagLefflerParams, caputo_of_power, mittag_leffler

PROBLEM_IDS = ("fdde1", "fpde2", "nlex3", "ml_homog")


def fpde2(alpha: float) -> ProblemSpec:
    """Diffusion on (0, pi) with exact solution (t^3 + t^alpha) sin x."""

    def exact(x, t):
        return (t**3 + t**alpha) * np.sin(x)

    def f(x, t):
        # D^alpha y - y_xx with y_xx = -y
        time_part = caputo_of_power(alpha, 3.0, t) + math.gamma(1.0 + alpha) + t**3 + t**alpha
        return time_part * np.sin(x)

    return ProblemSpec(alpha=alpha, a=1.0, c=0.0, X=math.pi, T=1.0,
                       phi=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                       psi0=lambda t: 0.0, psiX=lambda t: 0.0,
                       f=f, exact=exact, name="fpde2")


def ml_homog(alpha: float) -> ProblemSpec:
    """Unforced diffusion with phi = sin x; y = E_alpha(-t^alpha) sin x."""
    params = MittagLefflerParams(alpha=alpha, beta_ml=1.0)

    def exact(x, t):
        t = np.asarray(t, dtype=float)
        e = np.vectorize(lambda s: mittag_leffler(params, -(s**alpha)))(t)
        return e * np.sin(x)

    return ProblemSpec(alpha=alpha, a=1.0, c=0.0, X=math.pi, T=1.0,
                       phi=np.sin, psi0=lambda t: 0.0, psiX=lambda t: 0.0,
                       f=lambda x, t: np.zeros_like(x), exact=exact, name="ml_homog")


def nlex3_exact(alpha: float):
    g1 = math.gamma(1.0 + alpha)

    def exact(x, t):
        return 1.0 + t**alpha * np.sin(x) / g1

    return exact


def manufactured_source_ex3(alpha: float, x, t):
    """Source of the nonlinear example for y = 1 + t^alpha sin(x) / Gamma(1 + alpha).

    D^alpha y = sin x, y_xx = -t^alpha sin x / Gamma(1 + alpha), so
    f = D^alpha y - y_xx + y (1 - y).
    """
    x = np.asarray(x, dtype=float)
    y = nlex3_exact(alpha)(x, t)
    y_xx = 1.0 - y
    return np.sin(x) - y_xx + y * (1.0 - y)
