"""Thermodynamic (Maxwell-Boltzmann) ensembles with O(hbar^2) Wigner corrections.

Closed forms for the LV weight and partition functions, the chi correction,
the corrected stationary weight, the corrected currents, the Liouvillianity
quantifier, and analytic internal energy / heat capacity.  The corrected
currents keep the uncorrected weight W0 as their prefactor, exactly as the
O(hbar^2) truncation produces them; the Z0/ZST normalization enters only the
corrected weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import specfun
from .hamiltonian import SeparableHamiltonian, lv_hamiltonian
from .wignerflow import FlowField, PhaseGrid

__all__ = [
    "ThermoParams",
    "PerturbativeDomainError",
    "BoltzmannEnsemble",
    "classical_weight",
    "partition_classical",
    "log_partition_classical",
    "chi_lv",
    "chi_general",
    "partition_corrected",
    "corrected_weight",
    "corrected_shape",
    "td_currents",
    "td_currents_general",
    "td_liouvillian",
    "internal_energy",
    "heat_capacity",
    "td_flow_field",
    "default_quad_grid",
]

LOG_OVERFLOW_BUDGET = 700.0


class PerturbativeDomainError(ValueError):
    """a beta^2 >= 24: the O(hbar^2) correction factor is non-positive."""


@dataclass(frozen=True)
class ThermoParams:
    """Dimensionless inverse temperature beta and anisotropy a."""

    beta: float
    a: float = 1.0

    def __post_init__(self):
        if self.beta <= 0 or self.a <= 0:
            raise ValueError(f"beta and a must be positive, got beta={self.beta}, a={self.a}")

    def require_perturbative(self):
        if self.a * self.beta ** 2 >= 24.0:
            raise PerturbativeDomainError(
                f"a*beta^2 = {self.a * self.beta ** 2:.3f} >= 24; corrected quantities undefined")


def log_partition_classical(P: ThermoParams) -> float:
    """ln Z0 = -beta (a ln a + (a+1) ln beta) + ln Gamma(beta) + ln Gamma(a beta)."""
    b, a = P.beta, P.a
    return (-b * (a * math.log(a) + (a + 1.0) * math.log(b))
            + specfun.log_gamma(b) + specfun.log_gamma(a * b))


def partition_classical(P: ThermoParams) -> float:
    """Z0 = (a^a beta^{a+1})^{-beta} Gamma(beta) Gamma(a beta), via log space."""
    lz = log_partition_classical(P)
    if lz > LOG_OVERFLOW_BUDGET:
        raise OverflowError(f"log Z0 = {lz:.1f} exceeds the exponentiation budget")
    return math.exp(lz)


def classical_weight(P: ThermoParams, x, k):
    """Normalized Boltzmann weight exp(-beta H)/Z0 for the LV Hamiltonian."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    b, a = P.beta, P.a
    lw = -b * (k + np.exp(-k) + a * (x + np.exp(-x))) - log_partition_classical(P)
    return np.exp(lw)


def chi_lv(P: ThermoParams, x, k):
    """LV correction kernel (a b^2/8)[(4b/3)(a sinh^2(x/2) + sinh^2(k/2)) - 1] e^{-(k+x)}."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    b, a = P.beta, P.a
    return (a * b * b / 8.0
            * ((4.0 * b / 3.0) * (a * np.sinh(x / 2) ** 2 + np.sinh(k / 2) ** 2) - 1.0)
            * np.exp(-(k + x)))


def chi_general(H: SeparableHamiltonian, P: ThermoParams, x, k):
    """Generic O(hbar^2) kernel -(b^2/8) V'' K'' + (b^3/24)[V'' K'^2 + K'' V'^2]."""
    b = P.beta
    V1 = H.odd_dV(0, x)
    V2 = H.even_dV(1, x)
    K1 = H.odd_dK(0, k)
    K2 = H.even_dK(1, k)
    return -b * b / 8.0 * V2 * K2 + b ** 3 / 24.0 * (V2 * K1 ** 2 + K2 * V1 ** 2)


def partition_corrected(P: ThermoParams) -> float:
    """Z_ST = Z0 (1 - a beta^2 / 24); domain-guarded."""
    P.require_perturbative()
    return partition_classical(P) * (1.0 - P.a * P.beta ** 2 / 24.0)


def corrected_weight(P: ThermoParams, x, k):
    """Stationary O(hbar^2) weight (Z0/Z_ST) W0 (1 + chi); may go negative (quasi-probability)."""
    P.require_perturbative()
    zratio = 1.0 / (1.0 - P.a * P.beta ** 2 / 24.0)
    return zratio * classical_weight(P, x, k) * (1.0 + chi_lv(P, x, k))


def corrected_shape(P: ThermoParams, x, k):
    """Unnormalized corrected weight W0 (1 + chi).

    Past the perturbative boundary a beta^2 >= 24 the Z0/Z_ST prefactor turns
    into a global sign flip, so the localized negative lobes of the corrected
    state (the low-temperature quasi-probability signature) live in this
    shape; it is what the low-temperature field diagnostics use.
    """
    return classical_weight(P, x, k) * (1.0 + chi_lv(P, x, k))


def td_currents(P: ThermoParams, x, k) -> Tuple[np.ndarray, np.ndarray]:
    """O(hbar^2) LV currents; both components carry the uncorrected W0 prefactor.

    No Z_ST enters these expressions, so they remain well defined past the
    a beta^2 < 24 boundary that guards the normalized quantities.
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    b, a = P.beta, P.a
    W0 = classical_weight(P, x, k)
    chi = chi_lv(P, x, k)
    exk = np.exp(-(k + x))
    Jx = ((1.0 - np.exp(-k)) * (1.0 + chi)
          + a * b / 24.0 * (4.0 * a * b * np.sinh(x / 2) ** 2 - 1.0) * exk) * W0
    Jk = -a * ((1.0 - np.exp(-x)) * (1.0 + chi)
               + b / 24.0 * (4.0 * b * np.sinh(k / 2) ** 2 - 1.0) * exk) * W0
    return Jx, Jk


def td_currents_general(H: SeparableHamiltonian, P: ThermoParams, x, k) -> Tuple[np.ndarray, np.ndarray]:
    """Generic corrected currents

    J_x = +{K'(1+chi) - (1/24) K''' [b^2 V'^2 - b V'']} W0,
    J_k = -{V'(1+chi) - (1/24) V''' [b^2 K'^2 - b K'']} W0,

    with W0 the normalized Boltzmann weight of H (quadrature-normalized for
    non-LV instances is not needed here: the prefactor is exp(-beta H)/Z0 and
    tests only use the LV instance, whose Z0 is closed-form).
    """
    b = P.beta
    chi = chi_general(H, P, x, k)
    V1, V2, V3 = H.odd_dV(0, x), H.even_dV(1, x), H.odd_dV(1, x)
    K1, K2, K3 = H.odd_dK(0, k), H.even_dK(1, k), H.odd_dK(1, k)
    lw = -b * H.evaluate(np.asarray(x, dtype=float), np.asarray(k, dtype=float))
    if H.label == "lotka-volterra":
        lw = lw - log_partition_classical(ThermoParams(beta=b, a=H.params["a"]))
    W0 = np.exp(lw)
    Jx = (K1 * (1.0 + chi) - K3 / 24.0 * (b * b * V1 ** 2 - b * V2)) * W0
    Jk = -(V1 * (1.0 + chi) - V3 / 24.0 * (b * b * K1 ** 2 - b * K2)) * W0
    return Jx, Jk


def td_liouvillian(P: ThermoParams, x, k):
    """O(beta^2) Liouvillianity quantifier of the corrected LV flow,

        div w = (a b^2 / 12) [a (1 - e^-x) - (1 - e^-k)] e^{-(k+x)},

    the unique form consistent with the current series and with div w
    assembled from the corrected currents (the overall sign and the
    anisotropy offset follow from the eta = 1 term of the velocity series;
    see the stationarity/Liouvillianity engine for the series itself).
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    b, a = P.beta, P.a
    return (a * b * b / 12.0
            * (a * (1.0 - np.exp(-x)) - (1.0 - np.exp(-k)))
            * np.exp(-(k + x)))


def internal_energy(P: ThermoParams, which: str = "classical") -> float:
    """Dimensionless internal energy -d ln Z/d beta, analytic via digamma."""
    b, a = P.beta, P.a
    e0 = (a * math.log(a) + (a + 1.0) * (1.0 + math.log(b))
          - specfun.digamma(b) - a * specfun.digamma(a * b))
    if which == "classical":
        return e0
    if which == "corrected":
        P.require_perturbative()
        return e0 + (a * b / 12.0) / (1.0 - a * b * b / 24.0)
    raise ValueError(f"which must be 'classical' or 'corrected', got {which!r}")


def heat_capacity(P: ThermoParams, which: str = "classical") -> float:
    """Dimensionless heat capacity beta^2 d^2 ln Z/d beta^2, analytic via trigamma."""
    b, a = P.beta, P.a
    c0 = b * b * (specfun.trigamma(b) + a * a * specfun.trigamma(a * b)) - (a + 1.0) * b
    if which == "classical":
        return c0
    if which == "corrected":
        P.require_perturbative()
        u = 1.0 - a * b * b / 24.0
        # beta^2 * d^2/dbeta^2 ln(1 - a b^2/24)
        extra = b * b * (-(a / 12.0) / u - (a * a * b * b / 144.0) / u ** 2)
        return c0 + extra
    raise ValueError(f"which must be 'classical' or 'corrected', got {which!r}")


# ---------------------------------------------------------------------------
# ensemble adapter for the series engine
# ---------------------------------------------------------------------------

class BoltzmannEnsemble:
    """Classical weight W0 = exp(-beta H)/Z0 with analytic partials of any order.

    d^n W0 = D_n W0 with the Bell-polynomial recursion
    D_{n+1} = sum_j C(n, j) f^{(j+1)} D_{n-j},  f = -beta V (or -beta K),
    so the series engine never touches finite differences.
    """

    def __init__(self, H: SeparableHamiltonian, P: ThermoParams, order_budget: int = 80):
        self.H = H
        self.P = P
        self.order_budget = order_budget
        self._lz = (log_partition_classical(P) if H.label == "lotka-volterra"
                    else 0.0)

    def value(self, x, k):
        b = self.P.beta
        return np.exp(-b * self.H.evaluate(np.asarray(x, float), np.asarray(k, float)) - self._lz)

    def _ratio_table(self, n: int, axis: str, u):
        """D_0..D_n along one separable axis."""
        b = self.P.beta
        deriv = self.H.deriv_V if axis == "x" else self.H.deriv_K
        u = np.asarray(u, dtype=float)
        f = [None] + [-b * np.asarray(deriv(m, u), dtype=float) for m in range(1, n + 1)]
        D = [np.ones_like(u)]
        for m in range(n):
            acc = np.zeros_like(u)
            for j in range(m + 1):
                acc += math.comb(m, j) * f[j + 1] * D[m - j]
            D.append(acc)
        return D

    def partial_x(self, n: int, x, k):
        if n > self.order_budget:
            raise ValueError(f"partial order {n} exceeds budget {self.order_budget}")
        if n == 0:
            return self.value(x, k)
        D = self._ratio_table(n, "x", x)
        return D[n] * self.value(x, k)

    def partial_k(self, n: int, x, k):
        if n > self.order_budget:
            raise ValueError(f"partial order {n} exceeds budget {self.order_budget}")
        if n == 0:
            return self.value(x, k)
        D = self._ratio_table(n, "k", k)
        return D[n] * self.value(x, k)


_TD_WEIGHTS = {
    "corrected": corrected_weight,
    "shape": corrected_shape,
    "classical": classical_weight,
}


def td_flow_field(P: ThermoParams, grid: PhaseGrid, weight: str = "corrected") -> FlowField:
    """FlowField of the O(hbar^2) currents with an exact off-lattice evaluator.

    weight selects the scalar stored alongside: "corrected" (normalized,
    perturbative domain only), "shape" (unnormalized W0 (1+chi), any beta),
    or "classical" (W0).
    """
    weight_fn = _TD_WEIGHTS[weight]
    X, K = grid.mesh()
    W = weight_fn(P, X, K)
    Jx, Jk = td_currents(P, X, K)

    def evaluator(x, k):
        return weight_fn(P, x, k), *td_currents(P, x, k)

    return FlowField(grid=grid, W=W, Jx=Jx, Jk=Jk,
                     provenance=f"closed-form td(beta={P.beta}, a={P.a}, {weight})",
                     evaluator=evaluator)


def default_quad_grid(P: ThermoParams, nodes_per_axis: int = 1201) -> PhaseGrid:
    """Quadrature grid sized to the weight's tails (heavy toward large x, k).

    Left cutoff where beta e^{-u} reaches ~50 (double-exponential tail),
    right cutoff where the linear tail beta u reaches ~50; extents scale as
    1/beta at small beta so the normalization integrals keep 1e-8 accuracy.
    """
    b, a = P.beta, P.a
    x_lo = -math.log(50.0 / (a * b) + 1.0)
    x_hi = 50.0 / (a * b) + 5.0
    k_lo = -math.log(50.0 / b + 1.0)
    k_hi = 50.0 / b + 5.0
    return PhaseGrid(x_lo, x_hi, k_lo, k_hi, nodes_per_axis, nodes_per_axis)
