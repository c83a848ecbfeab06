"""Classical Lotka-Volterra mechanics: Hamiltonian flow, orbits, level sets, Liouville currents.

Everything here is the hbar -> 0 backbone the quantum modules perturb:
Hamilton's equations, the species map y = e^-x, z = e^-k, the closed-orbit
parametrization in the auxiliary variable T, marching-squares level sets, and
an RK4 integrator with a half-step error monitor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .hamiltonian import PhasePoint, SeparableHamiltonian

__all__ = [
    "Trajectory",
    "OrbitBranchPair",
    "Contour",
    "classical_velocity",
    "species_map",
    "parametric_orbit",
    "admissible_T_interval",
    "level_set",
    "classical_currents",
    "integrate_classical",
]


@dataclass
class Trajectory:
    """Time-ordered phase-space path with the species image and energies alongside."""

    times: np.ndarray          # (n,)
    points: np.ndarray         # (n, 2) columns x, k
    species: np.ndarray        # (n, 2) columns y, z
    energies: np.ndarray       # (n,)
    rejected_steps: int = 0
    extinct: bool = False      # a population spent >= 10 consecutive samples below 1e-12
    extinction_time: Optional[float] = None


@dataclass
class OrbitBranchPair:
    """Closed-orbit samples for energy eps: each admissible T gives a +/- branch pair."""

    energy: float
    T: np.ndarray              # admissible parameter values
    plus: np.ndarray           # (n, 2) phase points on the + branch (x takes +, k takes -)
    minus: np.ndarray          # (n, 2) phase points on the - branch
    rejected: np.ndarray       # T values whose discriminant was negative


@dataclass
class Contour:
    """One marching-squares polyline of an iso-energy set."""

    points: np.ndarray         # (m, 2) vertices in (x, k)
    closed: bool = False


def classical_velocity(H: SeparableHamiltonian, p) -> Tuple[float, float]:
    """Hamilton's equations: (dx/dtau, dk/dtau) = (dK/dk, -dV/dx)."""
    x, k = p
    return H.odd_dK(0, k), -H.odd_dV(0, x)


def species_map(p) -> Tuple[float, float]:
    """Populations (y, z) = (e^-x, e^-k); strictly positive for finite points."""
    x, k = p
    return np.exp(-x), np.exp(-k)


def _discriminant(T, eps):
    return T * T - 4.0 * np.exp(T - eps)


def parametric_orbit(eps: float, T_samples) -> OrbitBranchPair:
    """Evaluate both orbit branches at the admissible T samples for energy eps.

    x = ln 2 - ln[T + sqrt(T^2 - 4 e^{T - eps})] pairs with the opposite sign
    in k, so y + z = T and H = eps hold exactly on every returned sample.
    Samples with a negative discriminant are reported in `rejected`.
    """
    if eps < 2.0:
        # H >= 2 for a = 1; nothing is admissible below the minimum
        T_arr = np.asarray(T_samples, dtype=float)
        return OrbitBranchPair(eps, np.empty(0), np.empty((0, 2)), np.empty((0, 2)), T_arr)
    T_arr = np.atleast_1d(np.asarray(T_samples, dtype=float))
    disc = _discriminant(T_arr, eps)
    ok = disc >= 0.0
    T_ok = T_arr[ok]
    root = np.sqrt(np.maximum(disc[ok], 0.0))
    ln2 = np.log(2.0)
    x_plus = ln2 - np.log(T_ok + root)
    k_plus = ln2 - np.log(T_ok - root)
    plus = np.column_stack([x_plus, k_plus])
    minus = np.column_stack([k_plus, x_plus])   # swapped signs swap the roles of x and k
    return OrbitBranchPair(eps, T_ok, plus, minus, T_arr[~ok])


def admissible_T_interval(eps: float, tol: float = 1e-12) -> Tuple[float, float]:
    """Endpoints of {T : T^2 >= 4 e^{T - eps}} found by bisection on the discriminant.

    No closed form is claimed; the discriminant is positive at T = 2 e^{-(eps-2)/2}
    ... well inside, and negative for T -> 0+ and T large.
    """
    if eps < 2.0:
        raise ValueError(f"no admissible T below the energy minimum 2, got eps={eps}")

    def bisect(lo, hi):
        flo = _discriminant(lo, eps)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = _discriminant(mid, eps)
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
            if abs(hi - lo) < tol:
                break
        return 0.5 * (lo + hi)

    # interior point where the discriminant is maximal enough: T = 2 works for eps >= 2
    mid = 2.0
    if _discriminant(mid, eps) < 0:   # eps == 2 degenerate case
        return 2.0, 2.0
    hi = mid
    while _discriminant(hi, eps) > 0:
        hi *= 2.0
    lo = mid
    while _discriminant(lo, eps) > 0 and lo > 1e-300:
        lo /= 2.0
    return bisect(mid, lo), bisect(mid, hi)


# marching-squares edge pairs per 4-bit corner sign case; corners are
# (i,j)=1, (i+1,j)=2, (i+1,j+1)=4, (i,j+8)... bits: 1:(0,0) 2:(1,0) 4:(1,1) 8:(0,1)
_EDGES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 0), (1, 2)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(2, 0)], 10: [(0, 1), (2, 3)],
    11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def level_set(H: SeparableHamiltonian, eps: float, grid) -> List[Contour]:
    """Marching-squares contours of H = eps on the grid, assembled into polylines.

    Vertices interpolate linearly along cell edges; contour topology
    (closed vs open) is detected from the assembly, never assumed.
    """
    xs, ks = grid.x_nodes(), grid.k_nodes()
    Hvals = H.evaluate(xs[:, None], ks[None, :]) - eps
    if np.all(Hvals > 0) or np.all(Hvals < 0):
        return []

    def interp(p0, v0, p1, v1):
        t = v0 / (v0 - v1)
        return (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))

    segments = []
    nx, nk = len(xs), len(ks)
    for i in range(nx - 1):
        for j in range(nk - 1):
            c = [Hvals[i, j], Hvals[i + 1, j], Hvals[i + 1, j + 1], Hvals[i, j + 1]]
            case = sum(1 << m for m in range(4) if c[m] < 0)
            if case in (0, 15):
                continue
            corners = [(xs[i], ks[j]), (xs[i + 1], ks[j]),
                       (xs[i + 1], ks[j + 1]), (xs[i], ks[j + 1])]
            edge_pts = {}
            for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 3), (3, 0))):
                if (c[a] < 0) != (c[b] < 0):
                    edge_pts[e] = interp(corners[a], c[a], corners[b], c[b])
            for e0, e1 in _EDGES[case]:
                if e0 in edge_pts and e1 in edge_pts:
                    segments.append((edge_pts[e0], edge_pts[e1]))

    return _assemble(segments)


def _assemble(segments, snap: float = 1e-9) -> List[Contour]:
    """Chain shared-endpoint segments into polylines."""
    if not segments:
        return []
    key = lambda p: (round(p[0] / snap), round(p[1] / snap))
    adj = {}
    for idx, (p, q) in enumerate(segments):
        adj.setdefault(key(p), []).append((idx, 0))
        adj.setdefault(key(q), []).append((idx, 1))
    used = np.zeros(len(segments), dtype=bool)
    contours = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        p, q = segments[start]
        chain = [p, q]
        for head in (1, 0):   # extend forward from q, then backward from p
            while True:
                end = chain[-1] if head else chain[0]
                candidates = [c for c in adj.get(key(end), []) if not used[c[0]]]
                if not candidates:
                    break
                idx, side = candidates[0]
                used[idx] = True
                nxt = segments[idx][1 - side]
                if head:
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
        pts = np.asarray(chain)
        closed = bool(np.hypot(*(pts[0] - pts[-1])) < 100 * snap) and len(pts) > 3
        contours.append(Contour(points=pts, closed=closed))
    return contours


def classical_currents(H: SeparableHamiltonian, grid, W):
    """Liouville current J = (v_x W, v_k W) on the grid arrays of W."""
    xs, ks = grid.x_nodes(), grid.k_nodes()
    vx = np.broadcast_to(H.odd_dK(0, ks)[None, :], W.shape)
    vk = np.broadcast_to(-H.odd_dV(0, xs)[:, None], W.shape)
    return vx * W, vk * W


def _rk4_step(f, p, dt):
    k1 = f(p)
    k2 = f(p + 0.5 * dt * k1)
    k3 = f(p + 0.5 * dt * k2)
    k4 = f(p + dt * k3)
    return p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_classical(H: SeparableHamiltonian, p0, tau_end: float, dtau: float,
                        local_error_tol: float = 1e-6) -> Trajectory:
    """Fixed-step RK4 flow of Hamilton's equations with a half-step error monitor.

    Each macro step is also taken as two half steps; if the discrepancy exceeds
    local_error_tol the step is retried with halved substeps (counted in
    rejected_steps).  Samples are recorded on the macro dtau cadence.
    """
    if dtau <= 0 or tau_end <= 0:
        raise ValueError("tau_end and dtau must be positive")

    def f(p):
        vx, vk = classical_velocity(H, p)
        return np.array([vx, vk])

    n = int(round(tau_end / dtau))
    pts = np.empty((n + 1, 2))
    pts[0] = p0
    rejected = 0
    p = np.asarray(p0, dtype=float)
    for i in range(n):
        full = _rk4_step(f, p, dtau)
        half = _rk4_step(f, _rk4_step(f, p, dtau / 2), dtau / 2)
        if np.max(np.abs(full - half)) > local_error_tol:
            rejected += 1
            m, cand = 4, None
            while m <= 64:
                cand = p
                for _ in range(m):
                    cand = _rk4_step(f, cand, dtau / m)
                check = p
                for _ in range(2 * m):
                    check = _rk4_step(f, check, dtau / (2 * m))
                if np.max(np.abs(cand - check)) <= local_error_tol:
                    break
                m *= 2
            p = cand
        else:
            p = half   # keep the more accurate half-step result
        pts[i + 1] = p

    times = np.arange(n + 1) * dtau
    species = np.exp(-pts)
    energies = H.evaluate(pts[:, 0], pts[:, 1])
    return Trajectory(times=times, points=pts, species=species,
                      energies=energies, rejected_steps=rejected)
