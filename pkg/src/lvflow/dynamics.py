"""Quantum-corrected population dynamics and hyperbolic stability analysis.

The gaussian-ensemble quantum velocity turns the LV population equations into

    dy/dtau = z y B(y) - y,      dz/dtau = a z - a z y B(z),

where the brace B is the velocity factor F evaluated at the log coordinate of
the equation's own variable (F(x = -ln y) in the prey equation, F(k = -ln z)
in the predator one).  Truncations:

    classical: B = 1
    alpha2:    B = 1 + alpha^2/12
    alpha4:    B(v) = 1 + alpha^2/12 + alpha^4 (1/160 - (ln v)^2 / 6)
    exact:     B(v) = F_alpha(-ln v), the full erf-based factor

The alpha4 brace is the genuine fourth-order expansion of the exact factor
(even in ln v, cross-checked against the exact order), and at the
second-order equilibrium its Jacobian carries Tr ~ (1 - a) alpha^4 / 160 and
Det ~ a (1 + alpha^4 / 80).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .classical import Trajectory
from .gaussian import lv_quantum_factor
from .hamiltonian import lv_hamiltonian

__all__ = [
    "ORDERS",
    "StabilityReport",
    "effective_velocity",
    "find_equilibrium",
    "jacobian",
    "classify_stability",
    "build_stability_report",
    "evolve",
    "detect_periods",
    "period_averaged_radius",
]

ORDERS = ("classical", "alpha2", "alpha4", "exact")
TRACE_TOL = 1e-12           # |Tr| below this is treated as inconclusive (center candidate)
POPULATION_FLOOR = 1e-8     # truncated braces contain ln y; evolve rejects steps below this
EXTINCTION_LEVEL = 1e-12


@dataclass
class StabilityReport:
    equilibrium: Tuple[float, float]
    trace: float
    det: float
    discriminant: float
    classification: str


def _brace(order: str, alpha: float) -> Callable:
    if order == "classical":
        return lambda v: np.ones_like(np.asarray(v, dtype=float))
    if order == "alpha2":
        c = 1.0 + alpha ** 2 / 12.0
        return lambda v: np.full_like(np.asarray(v, dtype=float), c)
    if order == "alpha4":
        c = 1.0 + alpha ** 2 / 12.0 + alpha ** 4 / 160.0
        d = alpha ** 4 / 6.0
        return lambda v: c - d * np.log(np.asarray(v, dtype=float)) ** 2
    if order == "exact":
        return lambda v: lv_quantum_factor(alpha, -np.log(np.asarray(v, dtype=float)))
    raise ValueError(f"order must be one of {ORDERS}, got {order!r}")


def _brace_derivative(order: str, alpha: float) -> Callable:
    """dB/dv for the truncated orders (analytic Jacobians only)."""
    if order in ("classical", "alpha2"):
        return lambda v: np.zeros_like(np.asarray(v, dtype=float))
    if order == "alpha4":
        d = alpha ** 4 / 6.0
        return lambda v: -2.0 * d * np.log(v) / v
    raise ValueError(f"no analytic brace derivative for order {order!r}")


def effective_velocity(order: str, a: float, alpha: float, y: float, z: float) -> Tuple[float, float]:
    """(dy/dtau, dz/dtau) at the given truncation order; populations must be positive."""
    if y <= 0 or z <= 0:
        raise ValueError(f"populations must be positive, got y={y}, z={z}")
    B = _brace(order, alpha)
    f = z * y * float(B(y)) - y
    g = a * z - a * z * y * float(B(z))
    return f, g


def find_equilibrium(order: str, a: float, alpha: float,
                     guess: Tuple[float, float] = (1.0, 1.0),
                     tol: float = 1e-10, max_iter: int = 100) -> Tuple[float, float]:
    """2D Newton (finite-difference Jacobian) on the velocity field."""
    p = np.asarray(guess, dtype=float)
    for _ in range(max_iter):
        r = np.array(effective_velocity(order, a, alpha, p[0], p[1]))
        if np.abs(r).sum() <= tol:
            return float(p[0]), float(p[1])
        J = np.empty((2, 2))
        for col in range(2):
            h = 1e-7 * max(1.0, abs(p[col]))
            pp, pm = p.copy(), p.copy()
            pp[col] += h
            pm[col] -= h
            J[:, col] = (np.array(effective_velocity(order, a, alpha, *pp))
                         - np.array(effective_velocity(order, a, alpha, *pm))) / (2 * h)
        step = np.linalg.solve(J, -r)
        scale = min(1.0, 0.5 / max(np.abs(step)))  # keep Newton inside the positive quadrant
        p = p + scale * step
        p = np.maximum(p, 1e-6)
    raise RuntimeError(f"equilibrium Newton did not converge after {max_iter} iterations")


def jacobian(order: str, a: float, alpha: float, point: Tuple[float, float]) -> np.ndarray:
    """Jacobian of (f, g); analytic for the truncated orders, central FD for exact."""
    y, z = point
    if order == "exact":
        J = np.empty((2, 2))
        for col, (dy, dz) in enumerate(((1.0, 0.0), (0.0, 1.0))):
            h = 1e-6 * max(1.0, abs(point[col]))
            fp = effective_velocity(order, a, alpha, y + h * dy, z + h * dz)
            fm = effective_velocity(order, a, alpha, y - h * dy, z - h * dz)
            J[:, col] = (np.array(fp) - np.array(fm)) / (2 * h)
        return J
    B = _brace(order, alpha)
    Bp = _brace_derivative(order, alpha)
    By, Bz = float(B(y)), float(B(z))
    Bpy, Bpz = float(Bp(y)), float(Bp(z))
    return np.array([
        [z * By + z * y * Bpy - 1.0, y * By],
        [-a * z * Bz, a - a * y * (Bz + z * Bpz)],
    ])


def classify_stability(J: np.ndarray) -> str:
    """Hyperbolic sign table on (trace, det, discriminant).

    det < 0 is a saddle regardless of trace; for det > 0, the trace sign
    separates stable from unstable and the discriminant focus from node.
    |trace| <= 1e-12 is reported as center-candidate: the hyperbolic
    criterion is inconclusive there.
    """
    tr = float(np.trace(J))
    det = float(np.linalg.det(J))
    disc = tr * tr - 4.0 * det
    if det < 0:
        return "saddle"
    if abs(tr) <= TRACE_TOL:
        return "center-candidate"
    kind = "node" if disc >= 0 else "focus"
    side = "unstable" if tr > 0 else "stable"
    return f"{side}-{kind}"


def build_stability_report(order: str, a: float, alpha: float,
                           guess: Tuple[float, float] = (1.0, 1.0)) -> StabilityReport:
    eq = find_equilibrium(order, a, alpha, guess)
    J = jacobian(order, a, alpha, eq)
    tr = float(np.trace(J))
    det = float(np.linalg.det(J))
    return StabilityReport(equilibrium=eq, trace=tr, det=det,
                           discriminant=tr * tr - 4 * det,
                           classification=classify_stability(J))


# ---------------------------------------------------------------------------
# orbit evolution
# ---------------------------------------------------------------------------

def evolve(order: str, a: float, alpha: float, initial: Tuple[float, float],
           tau_end: float, dtau: float) -> Trajectory:
    """RK4 trajectory in species coordinates with positivity-preserving step rejection.

    A step that would push y or z to the floor is retried with halved
    substeps; persistent population below 1e-12 is reported as extinction.
    """
    if dtau <= 0 or tau_end <= 0:
        raise ValueError("tau_end and dtau must be positive")
    floor = POPULATION_FLOOR if order in ("alpha2", "alpha4") else EXTINCTION_LEVEL

    def rhs(p):
        return np.array(effective_velocity(order, a, alpha, max(p[0], floor), max(p[1], floor)))

    def rk4(p, dt):
        k1 = rhs(p)
        k2 = rhs(np.maximum(p + 0.5 * dt * k1, floor))
        k3 = rhs(np.maximum(p + 0.5 * dt * k2, floor))
        k4 = rhs(np.maximum(p + dt * k3, floor))
        return p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    n = int(round(tau_end / dtau))
    ys = np.empty(n + 1)
    zs = np.empty(n + 1)
    p = np.asarray(initial, dtype=float)
    if np.any(p <= 0):
        raise ValueError("initial populations must be positive")
    ys[0], zs[0] = p
    rejected = 0
    below = 0
    extinct = False
    ext_time: Optional[float] = None
    for i in range(n):
        q = rk4(p, dtau)
        if np.any(q <= floor):
            rejected += 1
            m = 2
            while m <= 64:
                q = p
                ok = True
                for _ in range(m):
                    q = rk4(q, dtau / m)
                    if np.any(q <= floor):
                        ok = False
                        break
                if ok:
                    break
                m *= 2
            q = np.maximum(q, floor)
        p = q
        ys[i + 1], zs[i + 1] = p
        if np.any(p <= 10 * EXTINCTION_LEVEL):
            below += 1
            if below >= 10 and not extinct:
                extinct = True
                ext_time = (i + 1) * dtau
        else:
            below = 0

    times = np.arange(n + 1) * dtau
    pts = -np.log(np.column_stack([ys, zs]))
    H = lv_hamiltonian(a)
    energies = H.evaluate(pts[:, 0], pts[:, 1])
    return Trajectory(times=times, points=pts,
                      species=np.column_stack([ys, zs]), energies=energies,
                      rejected_steps=rejected, extinct=extinct, extinction_time=ext_time)


def detect_periods(traj: Trajectory, center: Tuple[float, float]) -> np.ndarray:
    """Revolution boundaries: downward crossings of the ray z = z_c with y > y_c.

    Crossing times are linearly interpolated between samples; one crossing
    marks one full revolution for the orientation of the LV flow.
    """
    yc, zc = center
    y = traj.species[:, 0]
    z = traj.species[:, 1]
    t = traj.times
    s = z - zc
    idx = np.nonzero((s[:-1] > 0) & (s[1:] <= 0) & (y[:-1] > yc))[0]
    if idx.size == 0:
        return np.empty(0)
    frac = s[idx] / (s[idx] - s[idx + 1])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def period_averaged_radius(traj: Trajectory, center: Tuple[float, float]) -> np.ndarray:
    """Time-averaged distance to the center over each detected revolution."""
    crossings = detect_periods(traj, center)
    if crossings.size < 2:
        return np.empty(0)
    r = np.hypot(traj.species[:, 0] - center[0], traj.species[:, 1] - center[1])
    t = traj.times
    out = []
    for t0, t1 in zip(crossings[:-1], crossings[1:]):
        sel = (t >= t0) & (t <= t1)
        out.append(np.trapezoid(r[sel], t[sel]) / (t[sel][-1] - t[sel][0]))
    return np.asarray(out)
