"""Gamma and Mittag-Leffler functions, and the Caputo power rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SeriesConvergenceError(ArithmeticError):
    """Raised when the Mittag-Leffler series cannot be summed reliably."""


class SingularAtOriginError(ValueError):
    """Raised when a Caputo derivative of ``t**nu`` with ``nu < alpha`` is
    evaluated at ``t = 0``."""


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise ValueError(f"gamma_fn is only defined here for x > 0, got {x!r}")
    return math.gamma(x)


@dataclass(frozen=True)
class MittagLefflerParams:
    alpha: float
    beta_ml: float = 1.0
    series_tol: float = 1e-17
    max_terms: int = 2000

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive: {self.alpha!r}")
        if not self.beta_ml > 0:
            raise ValueError(f"beta must be positive: {self.beta_ml!r}")
        if not self.series_tol > 0:
            raise ValueError(f"series_tol must be positive: {self.series_tol!r}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1: {self.max_terms!r}")


def mittag_leffler(params: MittagLefflerParams, s: float) -> float:
    r"""Two-parameter Mittag-Leffler function by direct power series.

    .. math::

        E_{\alpha, \beta}(s) = \sum_{k \ge 0} \frac{s^k}{\Gamma(\alpha k + \beta)}

    Only meant for moderate real arguments. Raises
    :class:`SeriesConvergenceError` if the terms do not drop below
    ``series_tol`` within ``max_terms`` or if cancellation between terms
    destroys more than six significant digits.
    """
    a, b = params.alpha, params.beta_ml
    s = float(s)
    if s == 0.0:
        return 1.0 / math.gamma(b)

    log_abs = math.log(abs(s))
    negative = s < 0
    terms = []
    largest = 0.0
    for k in range(params.max_terms):
        arg = a * k + b
        log_mag = k * log_abs - math.lgamma(arg)
        if log_mag > 700.0:
            raise SeriesConvergenceError(
                f"series terms overflow for s={s}; argument is out of range")
        mag = math.exp(log_mag)
        # 1/Gamma has no sign changes for positive arguments
        term = -mag if (negative and k % 2) else mag
        terms.append(term)
        largest = max(largest, mag)
        # stop only once the terms are decreasing
        decreasing = log_abs < math.lgamma(arg + a) - math.lgamma(arg)
        if mag < params.series_tol and decreasing:
            break
    else:
        raise SeriesConvergenceError(
            f"Mittag-Leffler series did not converge in {params.max_terms} terms "
            f"for s={s}")

    value = math.fsum(terms)
    if largest * np.finfo(float).eps > 1e-6 * max(abs(value), np.finfo(float).tiny):
        raise SeriesConvergenceError(
            f"cancellation in the Mittag-Leffler series for s={s} "
            f"(largest term {largest:.3e}, sum {value:.3e})")
    return value


def caputo_of_power(alpha: float, nu: float, t):
    """Caputo derivative of order ``alpha`` of ``t**nu``.

    Works on scalars and arrays. ``nu = 0`` gives zero.
    """
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu!r}")
    t_arr = np.asarray(t, dtype=np.float64)
    if nu == 0:
        out = np.zeros_like(t_arr)
        return float(out) if out.ndim == 0 else out
    if nu < alpha and np.any(t_arr == 0):
        raise SingularAtOriginError(
            f"D^{alpha} t^{nu} is unbounded at t = 0 since nu < alpha")
    coef = math.gamma(nu + 1.0) / math.gamma(nu + 1.0 - alpha)
    out = coef * t_arr ** (nu - alpha)
    return float(out) if out.ndim == 0 else out
