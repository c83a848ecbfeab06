"""Gaussian Wigner ensembles and their closed-form flow expressions.

The isotropic weight G = (alpha^2/pi) exp[-alpha^2 (x^2 + k^2)] has exact
partials of every order through Hermite polynomials, which resums the
current series for the LV Hamiltonian into error-function closed forms and,
for the cosh/cos (camouflage) Hamiltonian, into sin/sinh closed forms whose
divergence can be tuned to vanish identically.  Squeezed weights
G(x e^zeta, k e^-zeta) are supported where the tuning uses them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import wofz

from . import specfun
from .hamiltonian import SeparableHamiltonian, camouflage_hamiltonian
from .wignerflow import FlowField, PhaseGrid

__all__ = [
    "GaussianParams",
    "GaussianEnsemble",
    "gaussian_weight",
    "gaussian_partial",
    "lv_divergences",
    "lv_currents",
    "lv_quantum_factor",
    "gaussian_velocity",
    "camouflage_divergences",
    "tuned_camouflage",
    "camouflage_stationarity_check",
    "lv_flow_field",
]

RT_PI = math.sqrt(math.pi)
LOG_BUDGET = 700.0          # exponent budget for the camouflage growth factors
ALPHA_ERF_MAX = 4.0         # keeps alpha/2 well inside the erf accuracy strip


@dataclass(frozen=True)
class GaussianParams:
    """Inverse width alpha and squeeze zeta; purity of the weight is alpha^2."""

    alpha: float
    zeta: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def purity(self) -> float:
        return self.alpha ** 2

    @property
    def is_physical(self) -> bool:
        # purity > 1 is not a valid quantum state; computed but flagged
        return self.alpha ** 2 <= 1.0 + 1e-12

    def require_isotropic(self, what: str):
        if self.zeta != 0.0:
            raise ValueError(f"{what} is defined for the isotropic weight only (zeta = 0)")


def gaussian_weight(G: GaussianParams, x, k):
    """(alpha^2/pi) exp[-alpha^2((x e^zeta)^2 + (k e^-zeta)^2)]."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    a2 = G.alpha ** 2
    ez = math.exp(G.zeta)
    return a2 / np.pi * np.exp(-a2 * ((x * ez) ** 2 + (k / ez) ** 2))


def gaussian_partial(G: GaussianParams, axis: str, n: int, x, k):
    """Exact partial d^n G / d axis^n = (-alpha e^{+-zeta})^n H_n(alpha u e^{+-zeta}) G."""
    if n < 0 or n > 120:
        raise ValueError(f"partial order must be in [0, 120], got {n}")
    if axis not in ("x", "k"):
        raise ValueError(f"axis must be 'x' or 'k', got {axis!r}")
    w = gaussian_weight(G, x, k)
    if n == 0:
        return w
    scale = G.alpha * math.exp(G.zeta if axis == "x" else -G.zeta)
    u = np.asarray(x if axis == "x" else k, dtype=float)
    return (-scale) ** n * specfun.hermite(n, scale * u) * w


class GaussianEnsemble:
    """WignerEnsemble adapter; Hermite tables make repeated orders cheap."""

    def __init__(self, G: GaussianParams):
        self.G = G

    def value(self, x, k):
        return gaussian_weight(self.G, x, k)

    def partial_x(self, n: int, x, k):
        return gaussian_partial(self.G, "x", n, x, k)

    def partial_k(self, n: int, x, k):
        return gaussian_partial(self.G, "k", n, x, k)


# ---------------------------------------------------------------------------
# LV closed forms
# ---------------------------------------------------------------------------

def lv_divergences(G: GaussianParams, a: float, x, k) -> Tuple[np.ndarray, np.ndarray]:
    """Resummed current divergences for the LV Hamiltonian (isotropic weight):

        dJx/dx = -2 [alpha^2 x - sin(alpha^2 x) e^{alpha^2/4 - k}] G
        dJk/dk = +2 a [alpha^2 k - sin(alpha^2 k) e^{alpha^2/4 - x}] G
    """
    G.require_isotropic("the LV divergence closed form")
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    a2 = G.alpha ** 2
    w = gaussian_weight(G, x, k)
    grow = math.exp(a2 / 4.0)
    divx = -2.0 * (a2 * x - np.sin(a2 * x) * grow * np.exp(-k)) * w
    divk = 2.0 * a * (a2 * k - np.sin(a2 * k) * grow * np.exp(-x)) * w
    return divx, divk


def lv_currents(G: GaussianParams, a: float, x, k) -> Tuple[np.ndarray, np.ndarray]:
    """Exact erf-based LV currents:

        Jx = G - (alpha/sqrt(pi)) e^{-(k + alpha^2 k^2)} Im Erf[alpha (x + i/2)]
        Jk = -a G + (a alpha/sqrt(pi)) e^{-(x + alpha^2 x^2)} Im Erf[alpha (k + i/2)]

    One complex erf call per component; the conjugate partner
    Erf[alpha(x - i/2)] is its mirror, so the bracketed difference is a pure
    imaginary number and the result real by construction.
    """
    G.require_isotropic("the LV erf currents")
    if G.alpha > ALPHA_ERF_MAX:
        raise ValueError(f"alpha = {G.alpha} exceeds the erf strip guarantee (alpha <= 4)")
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    al = G.alpha
    w = gaussian_weight(G, x, k)
    imx = np.imag(specfun.erf_complex(al * (x + 0.5j)))
    imk = np.imag(specfun.erf_complex(al * (k + 0.5j)))
    Jx = w - al / RT_PI * np.exp(-(k + al * al * k * k)) * imx
    Jk = -a * w + a * al / RT_PI * np.exp(-(x + al * al * x * x)) * imk
    return Jx, Jk


def lv_quantum_factor(alpha: float, u):
    """F(u) = sqrt(pi)/alpha * e^{alpha^2 u^2} Im Erf[alpha(u + i/2)].

    The quantum velocity of the LV gaussian flow is w_x = 1 - e^-k F(x),
    w_k = -a (1 - e^-x F(k)).  Evaluated through the Faddeeva function so the
    e^{alpha^2 u^2} growth cancels analytically and large |u| stays finite:
    F = -(sqrt(pi)/alpha) e^{alpha^2/4} Im[e^{-i alpha^2 u} wofz(i alpha (u + i/2))].
    """
    u = np.asarray(u, dtype=float)
    al = float(alpha)
    z = 1j * al * (u + 0.5j)
    phase = np.exp(-1j * al * al * u)
    out = -(RT_PI / al) * math.exp(al * al / 4.0) * np.imag(phase * wofz(z))
    return float(out) if out.ndim == 0 else out


def gaussian_velocity(G: GaussianParams, a: float, x, k, w_floor: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quantum velocity w = J/G with masking below the weight floor.

    Returns (wx, wk, mask); masked entries are zeroed.
    """
    if w_floor <= 0:
        raise ValueError("w_floor must be positive")
    w = gaussian_weight(G, x, k)
    mask = np.abs(w) < w_floor
    Jx, Jk = lv_currents(G, a, x, k)
    wsafe = np.where(mask, 1.0, w)
    return (np.where(mask, 0.0, Jx / wsafe),
            np.where(mask, 0.0, Jk / wsafe),
            mask)


def lv_flow_field(G: GaussianParams, a: float, grid: PhaseGrid) -> FlowField:
    """FlowField of the exact gaussian LV currents with off-lattice evaluator."""
    X, K = grid.mesh()
    W = gaussian_weight(G, X, K)
    Jx, Jk = lv_currents(G, a, X, K)

    def evaluator(x, k):
        return gaussian_weight(G, x, k), *lv_currents(G, a, x, k)

    return FlowField(grid=grid, W=W, Jx=Jx, Jk=Jk,
                     provenance=f"closed-form gaussian(alpha={G.alpha}, a={a})",
                     evaluator=evaluator)


# ---------------------------------------------------------------------------
# camouflage closed forms
# ---------------------------------------------------------------------------

def _camouflage_overflow_guard(freqs, alpha: float, zeta: float):
    worst = max(alpha ** 2 * math.exp(2 * abs(zeta)) * f ** 2 / 4.0 for f in freqs)
    if worst > LOG_BUDGET:
        raise OverflowError("camouflage growth factor exceeds the log-space budget 700")


def camouflage_divergences(H: SeparableHamiltonian, G: GaussianParams,
                           x, k) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form current divergences of the cosh/cos Hamiltonian over a gaussian:

        dJx/dx = +2 [lam_k sin(mu2 k) sinh(s mu2 x) e^{-s mu2^2/4}
                     - sinh(mu1 k) sin(s mu1 x) e^{+s mu1^2/4}] G,   s = alpha^2 e^{2 zeta}
        dJk/dk = -2 [lam_x sin(nu2 x) sinh(t nu2 k) e^{-t nu2^2/4}
                     - sinh(nu1 x) sin(t nu1 k) e^{+t nu1^2/4}] G,   t = alpha^2 e^{-2 zeta}
    """
    if H.label != "camouflage":
        raise ValueError("camouflage divergences need a camouflage Hamiltonian instance")
    p = H.params
    _camouflage_overflow_guard((p["mu1"], p["mu2"], p["nu1"], p["nu2"]), G.alpha, G.zeta)
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    w = gaussian_weight(G, x, k)
    s = G.alpha ** 2 * math.exp(2 * G.zeta)
    t = G.alpha ** 2 * math.exp(-2 * G.zeta)
    divx = 2.0 * (p["lam_k"] * np.sin(p["mu2"] * k) * np.sinh(s * p["mu2"] * x)
                  * math.exp(-s * p["mu2"] ** 2 / 4.0)
                  - np.sinh(p["mu1"] * k) * np.sin(s * p["mu1"] * x)
                  * math.exp(s * p["mu1"] ** 2 / 4.0)) * w
    divk = -2.0 * (p["lam_x"] * np.sin(p["nu2"] * x) * np.sinh(t * p["nu2"] * k)
                   * math.exp(-t * p["nu2"] ** 2 / 4.0)
                   - np.sinh(p["nu1"] * x) * np.sin(t * p["nu1"] * k)
                   * math.exp(t * p["nu1"] ** 2 / 4.0)) * w
    return divx, divk


def tuned_camouflage(nu1: float, nu2: float, zeta: float = 0.0) -> SeparableHamiltonian:
    """Camouflage Hamiltonian tuned so the gaussian (alpha = 1, squeeze zeta) is stationary.

    The cancellation pairs each sinh/cos family across the two divergence
    components, which fixes

        mu1 = e^{-2 zeta} nu2,   mu2 = e^{-2 zeta} nu1,
        lam_k = -exp[e^{-2 zeta} nu1^2 / 2],   lam_x = -exp[e^{-2 zeta} nu2^2 / 2],

    i.e. each lambda carries the frequency of the *other* trigonometric
    family it must cancel against.
    """
    em2z = math.exp(-2.0 * zeta)
    mu1 = em2z * nu2
    mu2 = em2z * nu1
    lam_k = -math.exp(em2z * nu1 ** 2 / 2.0)
    lam_x = -math.exp(em2z * nu2 ** 2 / 2.0)
    return camouflage_hamiltonian(nu1, nu2, mu1, mu2, lam_x, lam_k)


@dataclass
class CamouflageReport:
    max_div: float
    tuned: bool
    divergence: np.ndarray
    grid: PhaseGrid
    params: dict


def camouflage_stationarity_check(nu1: float, nu2: float, zeta: float, grid: PhaseGrid,
                                  detune_lambda_k: float = 1.0) -> CamouflageReport:
    """Max |div J| of the tuned (optionally detuned) camouflage flow over the grid."""
    H = tuned_camouflage(nu1, nu2, zeta)
    if detune_lambda_k != 1.0:
        p = dict(H.params)
        H = camouflage_hamiltonian(p["nu1"], p["nu2"], p["mu1"], p["mu2"],
                                   p["lam_x"], p["lam_k"] * detune_lambda_k)
    G = GaussianParams(alpha=1.0, zeta=zeta)
    X, K = grid.mesh()
    divx, divk = camouflage_divergences(H, G, X, K)
    total = divx + divk
    max_div = float(np.max(np.abs(total)))
    return CamouflageReport(max_div=max_div, tuned=(detune_lambda_k == 1.0),
                            divergence=total, grid=grid, params=dict(H.params))
