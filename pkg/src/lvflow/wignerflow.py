"""Truncated-series Wigner flow engine and field diagnostics.

The currents of a separable Hamiltonian are

    J_x = + sum_eta (i/2)^{2 eta} [d^{2eta+1}K] d_x^{2eta} W / (2eta+1)!
    J_k = - sum_eta (i/2)^{2 eta} [d^{2eta+1}V] d_k^{2eta} W / (2eta+1)!

with the real coefficient (i/2)^{2 eta} = (-1/4)^eta.  The engine consumes
only ensembles that expose exact analytic partials of arbitrary order (high
order derivatives are numerically meaningless from samples), and all
analytic-vs-analytic identities here bypass finite differences entirely.
Divergences of *sampled* fields use 4th-order central differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np
from scipy.integrate import simpson

__all__ = [
    "PhaseGrid",
    "WignerEnsemble",
    "FlowField",
    "VelocityField",
    "StagnationPoint",
    "TopologyReport",
    "SeriesOverflowError",
    "series_currents",
    "series_divergence",
    "stationarity_series",
    "liouvillian_series",
    "continuity_residual",
    "quantum_velocity",
    "purity",
    "expectation",
    "find_stagnation",
    "winding_number",
    "fd_divergence",
]

SERIES_TERM_BUDGET = 1e12       # any single series term beyond this signals divergence
DEFAULT_FLOOR_FRACTION = 1e-12  # w_floor default: fraction of max |W|


class SeriesOverflowError(ArithmeticError):
    """A truncated-series term exceeded the magnitude budget (divergent truncation)."""


class WindingIllConditioned(ValueError):
    """Angle accumulation did not land near an integer."""


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular evaluation lattice in the (x, k) plane, node counts inclusive."""

    x_min: float
    x_max: float
    k_min: float
    k_max: float
    nx: int
    nk: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.k_min < self.k_max):
            raise ValueError("grid bounds must be ordered")
        if self.nx < 3 or self.nk < 3:
            raise ValueError("grids need at least 3 nodes per axis")

    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    def k_nodes(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.nk)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes(), self.k_nodes(), indexing="ij")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hk(self) -> float:
        return (self.k_max - self.k_min) / (self.nk - 1)


# default for the LV figure family: covers the eps <= 6 classical orbits
DEFAULT_LV_GRID = PhaseGrid(-6.0, 6.0, -6.0, 6.0, 241, 241)


class WignerEnsemble(Protocol):
    """Analytic Wigner weight with exact partials of arbitrary order."""

    def value(self, x, k): ...
    def partial_x(self, n: int, x, k): ...
    def partial_k(self, n: int, x, k): ...


@dataclass
class FlowField:
    """Scalar weight W and current components on a grid, plus provenance.

    evaluator, when present, returns (W, Jx, Jk) at arbitrary points and is
    used for stagnation refinement and loop winding off the lattice.
    """

    grid: PhaseGrid
    W: np.ndarray
    Jx: np.ndarray
    Jk: np.ndarray
    provenance: str
    evaluator: Optional[Callable] = None

    def __post_init__(self):
        shape = (self.grid.nx, self.grid.nk)
        for name in ("W", "Jx", "Jk"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} does not match grid {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")


@dataclass
class VelocityField:
    wx: np.ndarray
    wk: np.ndarray
    mask: np.ndarray         # True where |W| < floor (entries there are zeroed)
    n_masked: int


@dataclass
class StagnationPoint:
    x: float
    k: float
    residual: float
    converged: bool


@dataclass
class TopologyReport:
    stagnation_points: List[StagnationPoint] = field(default_factory=list)
    non_converged: List[StagnationPoint] = field(default_factory=list)
    winding_numbers: List[Tuple[str, int]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# series engine
# ---------------------------------------------------------------------------

def _series_coefficients(eta_max: int) -> np.ndarray:
    """c_eta = (-1/4)^eta / (2 eta + 1)! computed by stable recursion."""
    c = np.empty(eta_max + 1)
    c[0] = 1.0
    for eta in range(eta_max):
        c[eta + 1] = c[eta] * (-0.25) / ((2 * eta + 2) * (2 * eta + 3))
    return c


def _check_budget(term: np.ndarray):
    m = np.max(np.abs(term))
    if m > SERIES_TERM_BUDGET:
        raise SeriesOverflowError(f"series term magnitude {m:.3e} exceeds budget")


def series_currents(H, E: WignerEnsemble, grid: PhaseGrid, eta_max: int) -> FlowField:
    """Truncated Wigner currents on the grid; eta_max = 0 is the classical flow."""
    if eta_max < 0 or eta_max > 60:
        raise ValueError(f"eta_max must be in [0, 60], got {eta_max}")
    X, K = grid.mesh()
    xs, ks = grid.x_nodes(), grid.k_nodes()
    c = _series_coefficients(eta_max)
    W = E.value(X, K)
    Jx = np.zeros_like(W)
    Jk = np.zeros_like(W)
    for eta in range(eta_max + 1):
        tx = c[eta] * H.odd_dK(eta, ks)[None, :] * E.partial_x(2 * eta, X, K)
        tk = -c[eta] * H.odd_dV(eta, xs)[:, None] * E.partial_k(2 * eta, X, K)
        _check_budget(tx)
        _check_budget(tk)
        Jx += tx
        Jk += tk
    return FlowField(grid=grid, W=W, Jx=Jx, Jk=Jk, provenance=f"series(eta_max={eta_max})")


def series_divergence(H, E: WignerEnsemble, grid: PhaseGrid, eta_max: int) -> np.ndarray:
    """Analytic divergence of the truncated currents (same partial oracle, odd orders)."""
    if eta_max < 0 or eta_max > 60:
        raise ValueError(f"eta_max must be in [0, 60], got {eta_max}")
    X, K = grid.mesh()
    xs, ks = grid.x_nodes(), grid.k_nodes()
    c = _series_coefficients(eta_max)
    out = np.zeros((grid.nx, grid.nk))
    for eta in range(eta_max + 1):
        term = c[eta] * (H.odd_dK(eta, ks)[None, :] * E.partial_x(2 * eta + 1, X, K)
                         - H.odd_dV(eta, xs)[:, None] * E.partial_k(2 * eta + 1, X, K))
        _check_budget(term)
        out += term
    return out


def stationarity_series(H, E: WignerEnsemble, grid: PhaseGrid, eta_max: int) -> np.ndarray:
    """Truncated dW/dtau field: sum_eta (-1)^eta/(2^{2eta}(2eta+1)!) {V-odd dk W - K-odd dx W}.

    Equals -series_divergence by construction; both assemblies are kept
    separate so tests can compare the two code paths.
    """
    if eta_max < 0 or eta_max > 60:
        raise ValueError(f"eta_max must be in [0, 60], got {eta_max}")
    X, K = grid.mesh()
    xs, ks = grid.x_nodes(), grid.k_nodes()
    c = _series_coefficients(eta_max)   # (-1)^eta / (4^eta (2eta+1)!)
    out = np.zeros((grid.nx, grid.nk))
    for eta in range(eta_max + 1):
        term = c[eta] * (H.odd_dV(eta, xs)[:, None] * E.partial_k(2 * eta + 1, X, K)
                         - H.odd_dK(eta, ks)[None, :] * E.partial_x(2 * eta + 1, X, K))
        _check_budget(term)
        out += term
    return out


def liouvillian_series(H, E: WignerEnsemble, grid: PhaseGrid, eta_max: int,
                       w_floor: Optional[float] = None) -> np.ma.MaskedArray:
    """Truncated divergence of the quantum velocity w = J/W.

    Term eta: c_eta { [K-odd] d_x[(1/W) d_x^{2eta} W] - [V-odd] d_k[(1/W) d_k^{2eta} W] },
    with d_u[(1/W) d^{n} W] = (W d^{n+1} W - dW d^{n} W)/W^2 from the analytic
    partials.  The eta = 0 term vanishes identically (classical Liouvillianity).
    Points with |W| below the floor are masked.
    """
    if eta_max < 0 or eta_max > 60:
        raise ValueError(f"eta_max must be in [0, 60], got {eta_max}")
    X, K = grid.mesh()
    xs, ks = grid.x_nodes(), grid.k_nodes()
    W = E.value(X, K)
    floor = w_floor if w_floor is not None else DEFAULT_FLOOR_FRACTION * np.max(np.abs(W))
    mask = np.abs(W) < floor
    Wsafe = np.where(mask, 1.0, W)
    dxW = E.partial_x(1, X, K)
    dkW = E.partial_k(1, X, K)
    c = _series_coefficients(eta_max)
    out = np.zeros_like(W)
    for eta in range(1, eta_max + 1):
        ddx = (Wsafe * E.partial_x(2 * eta + 1, X, K)
               - dxW * E.partial_x(2 * eta, X, K)) / Wsafe ** 2
        ddk = (Wsafe * E.partial_k(2 * eta + 1, X, K)
               - dkW * E.partial_k(2 * eta, X, K)) / Wsafe ** 2
        term = c[eta] * (H.odd_dK(eta, ks)[None, :] * ddx - H.odd_dV(eta, xs)[:, None] * ddk)
        _check_budget(np.where(mask, 0.0, term))
        out += term
    return np.ma.MaskedArray(out, mask=mask)


# ---------------------------------------------------------------------------
# grid diagnostics
# ---------------------------------------------------------------------------

def fd_divergence(F: FlowField) -> np.ndarray:
    """4th-order central-difference divergence; the 2-node boundary ring is NaN."""
    hx, hk = F.grid.hx, F.grid.hk
    out = np.full_like(F.W, np.nan)
    Jx, Jk = F.Jx, F.Jk
    dx = (-Jx[4:, 2:-2] + 8 * Jx[3:-1, 2:-2] - 8 * Jx[1:-3, 2:-2] + Jx[:-4, 2:-2]) / (12 * hx)
    dk = (-Jk[2:-2, 4:] + 8 * Jk[2:-2, 3:-1] - 8 * Jk[2:-2, 1:-3] + Jk[2:-2, :-4]) / (12 * hk)
    out[2:-2, 2:-2] = dx + dk
    return out


def continuity_residual(F: FlowField, dW_dtau: np.ndarray) -> np.ndarray:
    """dW/dtau + div J with the finite-difference divergence; boundary ring is NaN."""
    if dW_dtau.shape != F.W.shape:
        raise ValueError("dW_dtau shape does not match the flow grid")
    res = fd_divergence(F)
    res[2:-2, 2:-2] += dW_dtau[2:-2, 2:-2]
    return res


def quantum_velocity(F: FlowField, w_floor: float) -> VelocityField:
    """w = J/W where |W| >= w_floor; masked (zeroed) elsewhere."""
    if w_floor <= 0:
        raise ValueError("w_floor must be positive")
    mask = np.abs(F.W) < w_floor
    Wsafe = np.where(mask, 1.0, F.W)
    wx = np.where(mask, 0.0, F.Jx / Wsafe)
    wk = np.where(mask, 0.0, F.Jk / Wsafe)
    return VelocityField(wx=wx, wk=wk, mask=mask, n_masked=int(mask.sum()))


def _simpson2d(vals: np.ndarray, grid: PhaseGrid) -> float:
    inner = simpson(vals, x=grid.k_nodes(), axis=1)
    return float(simpson(inner, x=grid.x_nodes()))


def _boundary_mass(vals: np.ndarray, grid: PhaseGrid) -> float:
    edge = np.concatenate([vals[0, :], vals[-1, :], vals[:, 0], vals[:, -1]])
    return float(np.max(np.abs(edge)) * (grid.x_max - grid.x_min + grid.k_max - grid.k_min))


def purity(E: WignerEnsemble, grid: PhaseGrid) -> float:
    """Dimensionless purity 2 pi * integral of W^2 (Simpson quadrature)."""
    X, K = grid.mesh()
    W2 = E.value(X, K) ** 2
    if _boundary_mass(W2, grid) > 1e-10:
        warnings.warn("purity grid truncates non-negligible boundary mass", stacklevel=2)
    return 2.0 * np.pi * _simpson2d(W2, grid)


def expectation(E: WignerEnsemble, O: Callable, grid: PhaseGrid) -> float:
    """Phase-space average of the observable O(x, k) against the weight W."""
    X, K = grid.mesh()
    vals = E.value(X, K) * O(X, K)
    if _boundary_mass(vals, grid) > 1e-10:
        warnings.warn("expectation grid truncates non-negligible boundary mass", stacklevel=2)
    return _simpson2d(vals, grid)


# ---------------------------------------------------------------------------
# topology: stagnation points and winding numbers
# ---------------------------------------------------------------------------

def _bilinear(F: FlowField, x: float, k: float) -> Tuple[float, float]:
    g = F.grid
    i = min(max(int((x - g.x_min) / g.hx), 0), g.nx - 2)
    j = min(max(int((k - g.k_min) / g.hk), 0), g.nk - 2)
    tx = (x - (g.x_min + i * g.hx)) / g.hx
    tk = (k - (g.k_min + j * g.hk)) / g.hk
    out = []
    for A in (F.Jx, F.Jk):
        v = (A[i, j] * (1 - tx) * (1 - tk) + A[i + 1, j] * tx * (1 - tk)
             + A[i, j + 1] * (1 - tx) * tk + A[i + 1, j + 1] * tx * tk)
        out.append(float(v))
    return out[0], out[1]


def _current_at(F: FlowField, x: float, k: float) -> Tuple[float, float]:
    if F.evaluator is not None:
        _, jx, jk = F.evaluator(x, k)
        return float(jx), float(jk)
    return _bilinear(F, x, k)


def find_stagnation(F: FlowField, tol: float, magnitude_floor: Optional[float] = None) -> TopologyReport:
    """Zeros of J located by cell sign-change detection plus 2D Newton refinement.

    Cells where |J| never rises above magnitude_floor (default 1e-12 of the
    grid maximum) are ignored: far-tail sign flutter at vanishing current is
    not a flow feature.  Refined points with residual |J| <= tol are reported;
    non-converged candidates are listed separately.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = F.grid
    jmag = np.hypot(F.Jx, F.Jk)
    floor = magnitude_floor if magnitude_floor is not None else DEFAULT_FLOOR_FRACTION * jmag.max()

    sign_x = np.sign(F.Jx)
    sign_k = np.sign(F.Jk)
    cell_live = np.maximum.reduce([jmag[:-1, :-1], jmag[1:, :-1], jmag[:-1, 1:], jmag[1:, 1:]]) > floor

    def crosses(s):
        c = s[:-1, :-1]
        return ((c * s[1:, :-1] <= 0) | (c * s[:-1, 1:] <= 0) | (c * s[1:, 1:] <= 0)
                | (s[1:, :-1] * s[:-1, 1:] <= 0) | (s[1:, :-1] * s[1:, 1:] <= 0)
                | (s[:-1, 1:] * s[1:, 1:] <= 0))

    cand_cells = np.argwhere(crosses(sign_x) & crosses(sign_k) & cell_live)

    xs, ks = g.x_nodes(), g.k_nodes()
    found: List[StagnationPoint] = []
    failed: List[StagnationPoint] = []

    def newton(x0, k0):
        x, k = x0, k0
        h = 0.25 * min(g.hx, g.hk)
        for _ in range(60):
            jx, jk = _current_at(F, x, k)
            r = np.hypot(jx, jk)
            if r <= tol:
                return x, k, r, True
            dxx = (_current_at(F, x + h, k)[0] - _current_at(F, x - h, k)[0]) / (2 * h)
            dxk = (_current_at(F, x, k + h)[0] - _current_at(F, x, k - h)[0]) / (2 * h)
            dkx = (_current_at(F, x + h, k)[1] - _current_at(F, x - h, k)[1]) / (2 * h)
            dkk = (_current_at(F, x, k + h)[1] - _current_at(F, x, k - h)[1]) / (2 * h)
            det = dxx * dkk - dxk * dkx
            if det == 0 or not np.isfinite(det):
                break
            dx = (-jx * dkk + jk * dxk) / det
            dk = (-jk * dxx + jx * dkx) / det
            step = np.hypot(dx, dk)
            cap = 2.0 * max(g.hx, g.hk)
            if step > cap:
                dx *= cap / step
                dk *= cap / step
            x, k = x + dx, k + dk
            if not (g.x_min - g.hx <= x <= g.x_max + g.hx and g.k_min - g.hk <= k <= g.k_max + g.hk):
                break
        jx, jk = _current_at(F, x, k)
        return x, k, float(np.hypot(jx, jk)), False

    for i, j in cand_cells:
        x0 = 0.5 * (xs[i] + xs[i + 1])
        k0 = 0.5 * (ks[j] + ks[j + 1])
        x, k, r, ok = newton(x0, k0)
        bucket = found if ok else failed
        if any(np.hypot(p.x - x, p.k - k) < 0.5 * min(g.hx, g.hk) for p in bucket):
            continue
        bucket.append(StagnationPoint(x=x, k=k, residual=r, converged=ok))

    return TopologyReport(stagnation_points=found, non_converged=failed)


def winding_number(F: FlowField, loop: np.ndarray, residual_tol: float = 0.05) -> int:
    """Index of J along a closed polyline: accumulated angle / 2 pi, nearest integer.

    The loop is traversed as given (tests use counter-clockwise orientation);
    segments are resampled so consecutive current angles step by < 0.5 rad.
    Raises WindingIllConditioned if the rounding residual exceeds residual_tol.
    """
    loop = np.asarray(loop, dtype=float)
    if np.hypot(*(loop[0] - loop[-1])) > 1e-12:
        loop = np.vstack([loop, loop[0]])

    def angle(p):
        jx, jk = _current_at(F, p[0], p[1])
        if jx == 0.0 and jk == 0.0:
            raise WindingIllConditioned("current vanishes on the loop")
        return np.arctan2(jk, jx)

    total = 0.0
    for seg in range(len(loop) - 1):
        stack = [(loop[seg], loop[seg + 1], angle(loop[seg]), angle(loop[seg + 1]), 0)]
        while stack:
            a, b, tha, thb, depth = stack.pop()
            d = np.mod(thb - tha + np.pi, 2 * np.pi) - np.pi
            if abs(d) < 0.5 or depth >= 40:
                total += d
                continue
            mid = 0.5 * (a + b)
            thm = angle(mid)
            stack.append((mid, b, thm, thb, depth + 1))
            stack.append((a, mid, tha, thm, depth + 1))

    w = total / (2 * np.pi)
    nearest = int(np.rint(w))
    if abs(w - nearest) > residual_tol:
        raise WindingIllConditioned(f"winding estimate {w:.4f} not within {residual_tol} of an integer")
    return nearest
