r"""Quadrature weights for the Caputo derivative on nonuniform meshes.

Three families are produced here:

* L1 weights :math:`\zeta_{k,J}` on a mesh, targeting one of its own nodes;
* L1 weights :math:`\xi_{k,j}` on the auxiliary start-up mesh of
  :math:`[0, t_1]`, targeting a coarse node :math:`t_j > t_1`;
* the HL1 kernel moments :math:`\gamma_{k,j}, \delta_{k,j}` of the coarse
  intervals :math:`[t_k, t_{k+1}]`, :math:`k \ge 1`, and their regrouping into
  per-node coefficients :math:`d_{k,j}`.

The HL1 approximation on :math:`[t_k, t_{k+1}]` replaces :math:`u'(\eta)` by

.. math::

    D_1 u + \left((\eta - t_k) - \frac{\tau_{k+1} - \tau_k}{2}\right) D_2 u,

with :math:`D_1, D_2` the three-point nonuniform first and second differences
centred at :math:`t_k`, so that

.. math::

    \gamma_{k,j} = \frac{1}{\Gamma(1-\alpha)}\int_{t_k}^{t_{k+1}} (t_j - \eta)^{-\alpha} d\eta,
    \qquad
    \delta_{k,j} = \frac{1}{\Gamma(1-\alpha)}\int_{t_k}^{t_{k+1}} (t_j - \eta)^{-\alpha}
        \left((\eta - t_k) - \frac{\tau_{k+1} - \tau_k}{2}\right) d\eta.

All differences of powers are evaluated in a factored form, since on strongly
graded meshes the interval lengths can be tens of orders of magnitude below
the distance to the target node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import AuxMesh, TemporalMesh

# series for the first kernel moment is used below this step/distance ratio
_SERIES_RATIO = 0.5
_SERIES_TERMS = 64


def _as_points(mesh) -> np.ndarray:
    if isinstance(mesh, (TemporalMesh, AuxMesh)):
        return mesh.points
    pts = np.asarray(mesh, dtype=np.float64)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError("mesh points must be a 1-d array with at least two entries")
    if not np.all(np.diff(pts) > 0):
        raise ValueError("mesh points must be strictly increasing")
    return pts


def power_drop(a, tau, p: float):
    """``a**p - (a - tau)**p`` for ``0 < tau <= a`` without cancellation."""
    a = np.asarray(a, dtype=np.float64)
    r = np.minimum(np.asarray(tau, dtype=np.float64) / a, 1.0)
    with np.errstate(divide="ignore"):
        g = -np.expm1(p * np.log1p(-r))
    return a**p * g


# (upper ratio, terms) bands keeping the truncated tail below 1e-17 relative
_SERIES_BANDS = ((2.0**-8, 8), (2.0**-4, 16), (2.0**-2, 32), (_SERIES_RATIO, _SERIES_TERMS))


def _first_moment_series(rs: np.ndarray, alpha: float) -> np.ndarray:
    # (1 - v)^(-alpha) = sum_n (alpha)_n / n! v^n, integrated against v
    out = np.empty_like(rs)
    lower = -1.0
    for upper, terms in _SERIES_BANDS:
        band = (rs > lower) & (rs <= upper)
        lower = upper
        if not np.any(band):
            continue
        x = rs[band]
        coef = np.ones_like(x)
        power = x * x
        acc = power / 2.0
        for n in range(1, terms):
            coef = coef * ((alpha + n - 1) / n)
            power = power * x
            acc = acc + coef * power / (n + 2)
        out[band] = acc
    return out


def _first_moment(r: np.ndarray, alpha: float) -> np.ndarray:
    r""":math:`F(r) = \int_0^r v (1 - v)^{-\alpha} dv` for ``0 < r <= 1``."""
    r = np.asarray(r, dtype=np.float64)
    out = np.empty_like(r)

    small = r <= _SERIES_RATIO
    if np.any(small):
        out[small] = _first_moment_series(r[small], alpha)

    large = ~small
    if np.any(large):
        q = 1.0 - r[large]
        out[large] = ((1.0 - q ** (1.0 - alpha)) / (1.0 - alpha)
                      - (1.0 - q ** (2.0 - alpha)) / (2.0 - alpha))
    return out


def kernel_means(target, left, tau, alpha: float):
    r"""Means of :math:`(t - \eta)^{-\alpha} / \Gamma(1 - \alpha)` over
    :math:`[\text{left}, \text{left} + \tau]` with ``t = target``."""
    dist = np.asarray(target, dtype=np.float64) - np.asarray(left, dtype=np.float64)
    return power_drop(dist, tau, 1.0 - alpha) / (math.gamma(2.0 - alpha) * np.asarray(tau))


# {{{ L1 weights


@dataclass(frozen=True)
class L1Weights:
    points: np.ndarray
    alpha: float
    target_index: int
    zeta: np.ndarray  # zeta[k] for k = 0..J-1

    @property
    def target_time(self) -> float:
        return float(self.points[self.target_index])


def l1_weights(mesh, alpha: float, target_index: int) -> L1Weights:
    r"""L1 weights :math:`\zeta_{k,J}`, :math:`k = 0, \dots, J - 1`.

    The L1 approximation at :math:`t_J` reads
    :math:`\sum_k \zeta_{k,J} (u^{k+1} - u^k)`.
    """
    pts = _as_points(mesh)
    J = int(target_index)
    if not 1 <= J < pts.size:
        raise ValueError(f"target index {target_index} out of range 1..{pts.size - 1}")
    tau = np.diff(pts[: J + 1])
    zeta = kernel_means(pts[J], pts[:J], tau, alpha)
    return L1Weights(points=pts, alpha=float(alpha), target_index=J, zeta=zeta)


def l1_weight_block(mesh, alpha: float, J0: int, J1: int) -> np.ndarray:
    """Rows of L1 weights for targets ``J0 <= J < J1``.

    Returns an array ``Z`` of shape ``(J1 - J0, J1 - 1)`` with
    ``Z[J - J0, k] = zeta_{k,J}`` for ``k < J`` and zero otherwise.
    """
    pts = _as_points(mesh)
    if not 1 <= J0 < J1 <= pts.size:
        raise ValueError(f"invalid target range [{J0}, {J1})")
    tau = np.diff(pts[:J1])
    targets = pts[J0:J1, None]
    left = pts[None, : J1 - 1]
    mask = np.arange(J1 - 1)[None, :] < np.arange(J0, J1)[:, None]
    # masked entries get a harmless positive distance
    dist = np.where(mask, targets - left, 1.0)
    Z = power_drop(dist, np.where(mask, tau[None, :], 0.5), 1.0 - alpha)
    Z /= math.gamma(2.0 - alpha) * tau[None, :]
    Z[~mask] = 0.0
    return Z


# }}}


# {{{ start-up weights


@dataclass(frozen=True)
class XiWeights:
    aux: AuxMesh
    alpha: float
    t_target: float
    xi: np.ndarray  # xi[k] for k = 0..Nbar-1


def xi_weights(aux: AuxMesh, alpha: float, t_j: float) -> XiWeights:
    r"""L1 weights of the auxiliary mesh for a coarse target :math:`t_j > t_1`.

    The start-up integral over :math:`[0, t_1]` is approximated by
    :math:`\sum_k \xi_{k,j} (u^{(k+1)} - u^{(k)})`.
    """
    if not t_j > aux.t1:
        raise ValueError(f"target time {t_j} must lie beyond t1 = {aux.t1}")
    pts = aux.points
    xi = kernel_means(t_j, pts[:-1], np.diff(pts), alpha)
    return XiWeights(aux=aux, alpha=float(alpha), t_target=float(t_j), xi=xi)


def xi_weight_block(aux: AuxMesh, alpha: float, targets) -> np.ndarray:
    """Matrix of start-up weights, one row per coarse target time."""
    targets = np.asarray(targets, dtype=np.float64)
    if np.any(targets <= aux.t1):
        raise ValueError("all target times must lie beyond t1")
    pts = aux.points
    tau = np.diff(pts)
    return kernel_means(targets[:, None], pts[None, :-1], tau[None, :], alpha)


# }}}


# {{{ HL1 coefficients


def _hl1_moments(pts: np.ndarray, alpha: float, j: int) -> tuple[np.ndarray, np.ndarray]:
    """gamma_{k,j} and delta_{k,j} for k = 1..j-1."""
    k = np.arange(1, j)
    tau_k = pts[k] - pts[k - 1]
    tau_k1 = pts[k + 1] - pts[k]
    dist = pts[j] - pts[k]
    r = np.minimum(tau_k1 / dist, 1.0)
    with np.errstate(divide="ignore"):
        g = -np.expm1((1.0 - alpha) * np.log1p(-r))
    gamma = dist ** (1.0 - alpha) * g / math.gamma(2.0 - alpha)
    first = dist ** (2.0 - alpha) * _first_moment(r, alpha) / math.gamma(1.0 - alpha)
    delta = first - 0.5 * (tau_k1 - tau_k) * gamma
    return gamma, delta


def hl1_kernel_moments(mesh, alpha: float, j: int, k: int) -> tuple[float, float]:
    """The pair ``(gamma_{k,j}, delta_{k,j})`` for one coarse interval."""
    pts = _as_points(mesh)
    if k == 0:
        raise ValueError("k = 0 has no left neighbour; it is handled by the start-up weights")
    if not (j >= 2 and 1 <= k <= j - 1 and j < pts.size):
        raise ValueError(f"need 1 <= k <= j - 1 and 2 <= j <= N, got j={j}, k={k}")
    gamma, delta = _hl1_moments(pts, alpha, j)
    return float(gamma[k - 1]), float(delta[k - 1])


@dataclass(frozen=True)
class HL1Coefficients:
    """Per-node coefficients of the coarse HL1 sum at ``t_j``.

    The coarse part of the operator is ``d[j] * u^j - sum_{k<j} d[k] * u^k``.
    """

    points: np.ndarray
    alpha: float
    j: int
    gamma: np.ndarray  # k = 1..j-1
    delta: np.ndarray  # k = 1..j-1
    d: np.ndarray  # k = 0..j

    @property
    def d_jj(self) -> float:
        return float(self.d[self.j])


def hl1_coefficients(mesh, alpha: float, j: int) -> HL1Coefficients:
    pts = _as_points(mesh)
    j = int(j)
    if j < 2 or j >= pts.size:
        raise ValueError(f"HL1 coefficients need 2 <= j <= N, got j={j}")

    gamma, delta = _hl1_moments(pts, alpha, j)
    k = np.arange(1, j)
    tau_k = pts[k] - pts[k - 1]
    tau_k1 = pts[k + 1] - pts[k]
    span = tau_k + tau_k1

    # second difference: 2 [u^{k+1}/(t1 s) - u^k/(t1 t0) + u^{k-1}/(t0 s)]
    # first difference: (u^{k+1} - u^{k-1}) / s
    c = np.zeros(j + 1)
    c[2 : j + 1] += 2.0 * delta / (tau_k1 * span) + gamma / span
    c[1:j] -= 2.0 * delta / (tau_k1 * tau_k)
    c[0 : j - 1] += 2.0 * delta / (tau_k * span) - gamma / span

    d = -c
    d[j] = c[j]
    return HL1Coefficients(points=pts, alpha=float(alpha), j=j,
                           gamma=gamma, delta=delta, d=d)


def hl1_coefficient_block(mesh, alpha: float, j0: int, j1: int) -> np.ndarray:
    """Rows ``d[j, :]`` of :func:`hl1_coefficients` for ``j0 <= j < j1``,
    shape ``(j1 - j0, j1)``; entries with ``k > j`` are zero."""
    pts = _as_points(mesh)
    j0, j1 = int(j0), int(j1)
    if not 2 <= j0 < j1 <= pts.size:
        raise ValueError(f"need 2 <= j0 < j1 <= N + 1, got {j0}, {j1}")
    J = np.arange(j0, j1)[:, None]
    k = np.arange(1, j1 - 1)[None, :]
    mask = k < J
    tau_k = np.diff(pts[: j1 - 1])[None, :]
    tau_k1 = np.diff(pts[1:j1])[None, :]
    span = tau_k + tau_k1
    dist = np.where(mask, pts[J] - pts[k], 1.0)
    r = np.where(mask, np.minimum(tau_k1 / dist, 1.0), 0.5)
    with np.errstate(divide="ignore"):
        g = -np.expm1((1.0 - alpha) * np.log1p(-r))
    gamma = dist ** (1.0 - alpha) * g / math.gamma(2.0 - alpha)
    first = dist ** (2.0 - alpha) * _first_moment(r, alpha) / math.gamma(1.0 - alpha)
    delta = first - 0.5 * (tau_k1 - tau_k) * gamma
    gamma = np.where(mask, gamma, 0.0)
    delta = np.where(mask, delta, 0.0)

    c = np.zeros((j1 - j0, j1))
    c[:, 2:] += 2.0 * delta / (tau_k1 * span) + gamma / span
    c[:, 1:-1] -= 2.0 * delta / (tau_k1 * tau_k)
    c[:, :-2] += 2.0 * delta / (tau_k * span) - gamma / span
    rows = np.arange(j1 - j0)
    diag = c[rows, J[:, 0]].copy()
    d = -c
    d[rows, J[:, 0]] = diag
    return d


# }}}


# {{{ applying the operator


def apply_discrete_caputo(
    coeffs: HL1Coefficients,
    xi: XiWeights,
    aux_values,
    coarse_values,
):
    """Full discrete Caputo derivative at ``t_j`` (start-up plus coarse part).

    ``aux_values`` holds ``Nbar + 1`` rows and ``coarse_values`` holds
    ``j + 1`` rows; trailing axes (e.g. space) are carried along.
    """
    aux_values = np.asarray(aux_values, dtype=np.float64)
    coarse_values = np.asarray(coarse_values, dtype=np.float64)
    nbar = xi.xi.size
    if aux_values.shape[0] != nbar + 1:
        raise ValueError(f"expected {nbar + 1} auxiliary values, got {aux_values.shape[0]}")
    if coarse_values.shape[0] != coeffs.j + 1:
        raise ValueError(f"expected {coeffs.j + 1} coarse values, got {coarse_values.shape[0]}")
    if not np.allclose(aux_values[-1], coarse_values[1], rtol=1e-12, atol=1e-300):
        raise ValueError("auxiliary and coarse values disagree at t1")
    if abs(xi.t_target - coeffs.points[coeffs.j]) > 1e-14 * abs(xi.t_target):
        raise ValueError("start-up weights were built for a different target time")

    d = coeffs.d
    startup = np.tensordot(xi.xi, np.diff(aux_values, axis=0), axes=1)
    coarse = d[-1] * coarse_values[-1] - np.tensordot(d[:-1], coarse_values[:-1], axes=1)
    return startup + coarse


def discrete_caputo(mesh, aux: AuxMesh, alpha: float, u) -> np.ndarray:
    """Discrete HL1 Caputo derivative of a function at every coarse node.

    ``u`` is evaluated at the exact nodes; entry ``j - 1`` of the result is the
    approximation at ``t_j``, ``j = 1..N``.
    """
    pts = _as_points(mesh)
    if abs(aux.t1 - pts[1]) > 1e-14 * pts[1]:
        raise ValueError("auxiliary mesh must end at the first coarse node")
    ua = np.array(u(aux.points), dtype=np.float64)
    uc = np.array(u(pts), dtype=np.float64)
    uc[1] = ua[-1]
    out = np.empty(pts.size - 1)
    z = l1_weights(aux.points, alpha, aux.Nbar).zeta
    out[0] = z @ np.diff(ua)
    for j in range(2, pts.size):
        out[j - 1] = apply_discrete_caputo(
            hl1_coefficients(pts, alpha, j), xi_weights(aux, alpha, pts[j]), ua, uc[: j + 1])
    return out


def discrete_l1_caputo(mesh, alpha: float, u) -> np.ndarray:
    """Plain L1 approximation of the Caputo derivative at ``t_1..t_N``."""
    pts = _as_points(mesh)
    du = np.diff(np.asarray(u(pts), dtype=np.float64))
    return np.array([l1_weights(pts, alpha, j).zeta @ du[:j] for j in range(1, pts.size)])


# }}}
