"""Special-function kernels used by every closed-form expression in the package.

Thin, guarded wrappers around scipy.special (log-gamma, digamma, trigamma,
real and complex error functions) plus a recurrence-based Hermite evaluator.
All functions are pure; scalars in, scalars out, with numpy arrays accepted
wherever scipy broadcasts them.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.special as _sp

__all__ = [
    "DomainError",
    "AccuracyLossWarning",
    "log_gamma",
    "digamma",
    "trigamma",
    "erf_complex",
    "erfi",
    "hermite",
    "selftest",
]

# complex-erf accuracy is only guaranteed in this strip of the imaginary axis
ERF_IMAG_STRIP = 10.0
ERFI_MAX_ARG = 10.0


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


class AccuracyLossWarning(UserWarning):
    """Result may have lost accuracy (argument outside the guaranteed region)."""


def _require_positive(x, name: str):
    if np.any(np.asarray(x) <= 0):
        raise DomainError(f"{name} requires a strictly positive argument, got {x!r}")


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    _require_positive(x, "log_gamma")
    return _sp.gammaln(x)


def digamma(x):
    """psi(x) = d ln Gamma / dx for x > 0."""
    _require_positive(x, "digamma")
    return _sp.psi(x)


def trigamma(x):
    """psi'(x) for x > 0."""
    _require_positive(x, "trigamma")
    return _sp.polygamma(1, x)


def erf_complex(z):
    """Error function of a complex argument.

    Accuracy (abs err <= 1e-12) is guaranteed for |Im z| <= 10, which covers
    every argument alpha*(x +/- i/2) this package produces; outside the strip
    an AccuracyLossWarning is emitted and the value returned as computed.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) > ERF_IMAG_STRIP):
        warnings.warn(
            "erf_complex argument outside the guaranteed strip |Im z| <= 10",
            AccuracyLossWarning,
            stacklevel=2,
        )
    out = _sp.erf(z)
    return complex(out) if out.ndim == 0 else out


def erfi(x):
    """Imaginary error function (2/sqrt(pi)) * integral of exp(t^2) on [0, x]."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > ERFI_MAX_ARG):
        raise OverflowError("erfi overflows double precision budget for |x| > 10")
    out = _sp.erfi(x)
    return float(out) if out.ndim == 0 else out


def hermite(n: int, u):
    """Physicists' Hermite polynomial H_n(u) by the three-term recurrence.

    H_{m+1} = 2u H_m - 2m H_{m-1}, exact for n <= 200 in double precision
    at the argument ranges used here.
    """
    if n < 0 or n != int(n):
        raise DomainError(f"hermite order must be a non-negative integer, got {n}")
    if n > 200:
        raise DomainError(f"hermite order {n} exceeds the supported maximum 200")
    u = np.asarray(u, dtype=float)
    h_prev = np.ones_like(u)
    if n == 0:
        return float(h_prev) if u.ndim == 0 else h_prev
    h = 2.0 * u
    for m in range(1, n):
        h, h_prev = 2.0 * u * h - 2.0 * m * h_prev, h
    return float(h) if u.ndim == 0 else h


def hermite_table(n_max: int, u):
    """All H_0..H_n_max at once (shape (n_max+1,) + u.shape); shared by the series engine."""
    if n_max < 0 or n_max > 200:
        raise DomainError(f"hermite order budget exceeded: {n_max}")
    u = np.asarray(u, dtype=float)
    table = np.empty((n_max + 1,) + u.shape, dtype=float)
    table[0] = 1.0
    if n_max >= 1:
        table[1] = 2.0 * u
    for m in range(1, n_max):
        table[m + 1] = 2.0 * u * table[m] - 2.0 * m * table[m - 1]
    return table


# ---------------------------------------------------------------------------
# self-test harness (exposed through the CLI `specfun-selftest` subcommand)
# ---------------------------------------------------------------------------

def _check_reflection(rng) -> float:
    z = rng.uniform(-4, 4, 1000) + 1j * rng.uniform(-2, 2, 1000)
    return float(np.max(np.abs(erf_complex(-z) + erf_complex(z))))

def _check_conjugation(rng) -> float:
    z = rng.uniform(-4, 4, 1000) + 1j * rng.uniform(-2, 2, 1000)
    return float(np.max(np.abs(erf_complex(np.conj(z)) - np.conj(erf_complex(z)))))

def _check_digamma_recurrence(rng) -> float:
    xs = np.array([0.1, 0.5, 1.0, 3.0, 10.0])
    return float(np.max(np.abs(digamma(xs + 1) - digamma(xs) - 1.0 / xs)))

def _check_trigamma_derivative(rng) -> float:
    xs = np.array([0.3, 0.7, 1.0, 2.5, 8.0])
    h = 1e-5
    num = (digamma(xs + h) - digamma(xs - h)) / (2 * h)
    return float(np.max(np.abs(trigamma(xs) - num)))

def _check_hermite_derivative(rng) -> float:
    h = 1e-5
    worst = 0.0
    for n in range(1, 21):
        u = rng.uniform(-3, 3, 50)
        num = (hermite(n, u + h) - hermite(n, u - h)) / (2 * h)
        ref = 2.0 * n * hermite(n - 1, u)
        scale = np.maximum(np.abs(ref), 1.0)
        worst = max(worst, float(np.max(np.abs(num - ref) / scale)))
    return worst

def _check_erfi_consistency(rng) -> float:
    xs = rng.uniform(-3, 3, 200)
    return float(np.max(np.abs(erf_complex(1j * xs).imag - erfi(xs))))


_SELFTEST_PROPERTIES = [
    ("erf reflection erf(-z) = -erf(z)", _check_reflection, 1e-12),
    ("erf conjugation erf(z*) = erf(z)*", _check_conjugation, 1e-12),
    ("digamma recurrence psi(x+1)-psi(x) = 1/x", _check_digamma_recurrence, 1e-10),
    ("trigamma equals d(digamma)/dx", _check_trigamma_derivative, 1e-6),
    ("hermite derivative H_n' = 2n H_{n-1}", _check_hermite_derivative, 1e-6),
    ("erf(ix) = i erfi(x)", _check_erfi_consistency, 1e-12),
]


def selftest(seed: int = 0):
    """Run the invariant suite; returns a list of (name, passed, residual, tol)."""
    rng = np.random.default_rng(seed)
    results = []
    for name, fn, tol in _SELFTEST_PROPERTIES:
        residual = fn(rng)
        results.append((name, residual <= tol, residual, tol))
    return results
