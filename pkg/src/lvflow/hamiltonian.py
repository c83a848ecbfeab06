"""Separable phase-space Hamiltonians H(x, k) = K(k) + V(x) with exact derivative oracles.

Each instance carries closed-form derivatives of every order: the odd orders
feed the Wigner-current series, the even orders (2 and up) feed the thermal
correction and the O(hbar^2) currents.  Derivatives are supplied analytically
per instance so that nothing downstream ever differentiates numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "PhasePoint",
    "SeparableHamiltonian",
    "lv_hamiltonian",
    "camouflage_hamiltonian",
    "quartic_test_hamiltonian",
]


class PhasePoint(NamedTuple):
    """Dimensionless phase-space point; x and k are log-population coordinates."""

    x: float
    k: float


@dataclass(frozen=True)
class SeparableHamiltonian:
    """K(k) + V(x) with analytic derivative oracles.

    odd_dV(eta, x) returns d^{2 eta + 1} V / dx^{2 eta + 1}; even_dV(m, x)
    returns d^{2m} V / dx^{2m} for m >= 1 (and V itself for m = 0).  Same for
    the kinetic side.  Separability (zero mixed second derivative) holds by
    construction.  truncation_order, when set, is the eta beyond which *all*
    odd derivatives of both K and V vanish identically.
    """

    potential: Callable
    kinetic: Callable
    odd_dV: Callable
    odd_dK: Callable
    even_dV: Callable
    even_dK: Callable
    truncation_order: Optional[int] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    def evaluate(self, x, k):
        return self.kinetic(k) + self.potential(x)

    def deriv_V(self, order: int, x):
        """d^order V/dx^order for any order >= 0 (dispatches to the parity oracles)."""
        if order == 0:
            return self.potential(x)
        if order % 2 == 1:
            return self.odd_dV((order - 1) // 2, x)
        return self.even_dV(order // 2, x)

    def deriv_K(self, order: int, k):
        if order == 0:
            return self.kinetic(k)
        if order % 2 == 1:
            return self.odd_dK((order - 1) // 2, k)
        return self.even_dK(order // 2, k)


def lv_hamiltonian(a: float) -> SeparableHamiltonian:
    """Prey-predator Hamiltonian V(x) = a(x + e^-x), K(k) = k + e^-k.

    Odd derivatives of all orders collapse to a(delta_{eta 0} - e^-x) and
    delta_{eta 0} - e^-k; even orders >= 2 are a e^-x and e^-k.
    """
    if a <= 0:
        raise ValueError(f"anisotropy a must be positive, got {a}")
    a = float(a)

    def V(x):
        x = np.asarray(x, dtype=float)
        return a * (x + np.exp(-x))

    def K(k):
        k = np.asarray(k, dtype=float)
        return k + np.exp(-k)

    def odd_dV(eta, x):
        x = np.asarray(x, dtype=float)
        return a * ((1.0 if eta == 0 else 0.0) - np.exp(-x))

    def odd_dK(eta, k):
        k = np.asarray(k, dtype=float)
        return (1.0 if eta == 0 else 0.0) - np.exp(-k)

    def even_dV(m, x):
        x = np.asarray(x, dtype=float)
        return V(x) if m == 0 else a * np.exp(-x)

    def even_dK(m, k):
        k = np.asarray(k, dtype=float)
        return K(k) if m == 0 else np.exp(-k)

    return SeparableHamiltonian(
        potential=V, kinetic=K,
        odd_dV=odd_dV, odd_dK=odd_dK, even_dV=even_dV, even_dK=even_dK,
        label="lotka-volterra", params={"a": a},
    )


def camouflage_hamiltonian(nu1: float, nu2: float, mu1: float, mu2: float,
                           lam_x: float, lam_k: float) -> SeparableHamiltonian:
    """cosh/cos Hamiltonian: V = cosh(nu1 x) + lam_x cos(nu2 x), K likewise in k.

    Odd derivatives: d^{2eta+1} V = nu1^{2eta+1} sinh(nu1 x)
    - (-1)^eta lam_x nu2^{2eta+1} sin(nu2 x); even orders >= 2 swap sinh -> cosh,
    sin -> cos with one extra frequency power and the (-1)^m sign on the cos part.
    """
    nu1, nu2, mu1, mu2 = float(nu1), float(nu2), float(mu1), float(mu2)
    lam_x, lam_k = float(lam_x), float(lam_k)

    def V(x):
        x = np.asarray(x, dtype=float)
        return np.cosh(nu1 * x) + lam_x * np.cos(nu2 * x)

    def K(k):
        k = np.asarray(k, dtype=float)
        return np.cosh(mu1 * k) + lam_k * np.cos(mu2 * k)

    def odd_dV(eta, x):
        x = np.asarray(x, dtype=float)
        sign = -1.0 if eta % 2 else 1.0
        return nu1 ** (2 * eta + 1) * np.sinh(nu1 * x) \
            - sign * lam_x * nu2 ** (2 * eta + 1) * np.sin(nu2 * x)

    def odd_dK(eta, k):
        k = np.asarray(k, dtype=float)
        sign = -1.0 if eta % 2 else 1.0
        return mu1 ** (2 * eta + 1) * np.sinh(mu1 * k) \
            - sign * lam_k * mu2 ** (2 * eta + 1) * np.sin(mu2 * k)

    def even_dV(m, x):
        x = np.asarray(x, dtype=float)
        if m == 0:
            return V(x)
        sign = -1.0 if m % 2 else 1.0
        return nu1 ** (2 * m) * np.cosh(nu1 * x) + sign * lam_x * nu2 ** (2 * m) * np.cos(nu2 * x)

    def even_dK(m, k):
        k = np.asarray(k, dtype=float)
        if m == 0:
            return K(k)
        sign = -1.0 if m % 2 else 1.0
        return mu1 ** (2 * m) * np.cosh(mu1 * k) + sign * lam_k * mu2 ** (2 * m) * np.cos(mu2 * k)

    return SeparableHamiltonian(
        potential=V, kinetic=K,
        odd_dV=odd_dV, odd_dK=odd_dK, even_dV=even_dV, even_dK=even_dK,
        label="camouflage",
        params={"nu1": nu1, "nu2": nu2, "mu1": mu1, "mu2": mu2,
                "lam_x": lam_x, "lam_k": lam_k},
    )


def quartic_test_hamiltonian() -> SeparableHamiltonian:
    """K = k^2, V = x^4: the polynomial model whose current series truncates exactly."""

    def V(x):
        x = np.asarray(x, dtype=float)
        return x ** 4

    def K(k):
        k = np.asarray(k, dtype=float)
        return k ** 2

    def odd_dV(eta, x):
        x = np.asarray(x, dtype=float)
        if eta == 0:
            return 4.0 * x ** 3
        if eta == 1:
            return 24.0 * x
        return np.zeros_like(x)

    def odd_dK(eta, k):
        k = np.asarray(k, dtype=float)
        return 2.0 * k if eta == 0 else np.zeros_like(k)

    def even_dV(m, x):
        x = np.asarray(x, dtype=float)
        if m == 0:
            return x ** 4
        if m == 1:
            return 12.0 * x ** 2
        if m == 2:
            return np.full_like(x, 24.0)
        return np.zeros_like(x)

    def even_dK(m, k):
        k = np.asarray(k, dtype=float)
        if m == 0:
            return k ** 2
        if m == 1:
            return np.full_like(k, 2.0)
        return np.zeros_like(k)

    return SeparableHamiltonian(
        potential=V, kinetic=K,
        odd_dV=odd_dV, odd_dK=odd_dK, even_dV=even_dV, even_dK=even_dK,
        truncation_order=1, label="quartic-test",
    )
