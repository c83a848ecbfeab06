"""Classical mechanics: velocities, orbits, level sets, Liouville currents, RK4."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lvflow import classical, thermo
from lvflow.hamiltonian import lv_hamiltonian
from lvflow.wignerflow import PhaseGrid


class TestVelocityAndSpecies:
    @pytest.mark.parametrize("a, p, expected", [
        (1.0, (0.0, 0.0), (0.0, 0.0)),
        (1.0, (0.0, math.log(2)), (0.5, 0.0)),
        (2.0, (math.log(2), 0.0), (0.0, -1.0)),
    ])
    def test_velocity(self, a, p, expected):
        H = lv_hamiltonian(a)
        assert_allclose(classical.classical_velocity(H, p), expected, atol=1e-15)

    @pytest.mark.parametrize("p, expected", [
        ((0.0, 0.0), (1.0, 1.0)),
        ((math.log(2), -math.log(2)), (0.5, 2.0)),
        ((10.0, 10.0), (math.exp(-10), math.exp(-10))),
    ])
    def test_species_map(self, p, expected):
        y, z = classical.species_map(p)
        assert_allclose((y, z), expected, rtol=1e-14)
        assert y > 0 and z > 0

    def test_velocity_field_is_divergence_free(self):
        # analytic: d(vx)/dx + d(vk)/dk = 0 because vx depends only on k and vk only on x
        H = lv_hamiltonian(1.7)
        h = 1e-5
        for x, k in [(-1.0, 0.5), (0.2, -2.0), (1.0, 1.0)]:
            dvx_dx = (classical.classical_velocity(H, (x + h, k))[0]
                      - classical.classical_velocity(H, (x - h, k))[0]) / (2 * h)
            dvk_dk = (classical.classical_velocity(H, (x, k + h))[1]
                      - classical.classical_velocity(H, (x, k - h))[1]) / (2 * h)
            assert abs(dvx_dx + dvk_dk) < 1e-12


class TestParametricOrbit:
    def test_degenerate_minimum(self):
        orbit = classical.parametric_orbit(2.0, [2.0])
        assert orbit.T.size == 1
        assert_allclose(orbit.plus[0], (0.0, 0.0), atol=2e-8)
        y, z = classical.species_map(orbit.plus[0])
        assert_allclose((y, z), (1.0, 1.0), atol=2e-8)

    def test_coincident_branches(self):
        eps = 2 * math.log(2) + 1
        orbit = classical.parametric_orbit(eps, [1.0])
        assert_allclose(orbit.plus[0], (math.log(2), math.log(2)), atol=1e-7)
        assert_allclose(orbit.plus[0], orbit.minus[0], atol=1e-7)

    def test_derived_point_eps3(self):
        # plus branch at T = 1: y = (1 + sqrt(1 - 4 e^-2))/2, frozen from the closed form
        orbit = classical.parametric_orbit(3.0, [1.0])
        y, z = classical.species_map(orbit.plus[0])
        assert_allclose(y, 0.8386217901485185, rtol=1e-12)
        assert_allclose(z, 0.1613782098514815, rtol=1e-12)
        assert_allclose(y + z, 1.0, rtol=1e-12)
        assert_allclose(-math.log(y) - math.log(z) + y + z, 3.0, rtol=1e-12)

    def test_rejection(self):
        orbit = classical.parametric_orbit(3.0, [0.05, 1.0, 50.0])
        assert orbit.T.size == 1
        assert orbit.rejected.size == 2

    @pytest.mark.parametrize("eps", [2.5, 3.0, 4.5, 6.0])
    def test_orbit_identities(self, eps):
        # x + k = eps - T and e^-x + e^-k = T imply H = eps exactly
        H = lv_hamiltonian(1.0)
        t_lo, t_hi = classical.admissible_T_interval(eps)
        T = np.linspace(t_lo + 1e-9, t_hi - 1e-9, 100)
        orbit = classical.parametric_orbit(eps, T)
        for branch in (orbit.plus, orbit.minus):
            assert_allclose(branch[:, 0] + branch[:, 1], eps - orbit.T, atol=1e-10)
            y = np.exp(-branch[:, 0])
            z = np.exp(-branch[:, 1])
            assert_allclose(y + z, orbit.T, atol=1e-10)
            assert_allclose(H.evaluate(branch[:, 0], branch[:, 1]), eps, atol=1e-10)

    def test_admissible_interval_brackets_discriminant(self):
        t_lo, t_hi = classical.admissible_T_interval(3.0)
        assert t_lo < 2.0 < t_hi
        for t in (t_lo, t_hi):
            assert abs(t * t - 4 * math.exp(t - 3.0)) < 1e-9


class TestLevelSet:
    GRID = PhaseGrid(-6, 6, -6, 6, 241, 241)

    def test_below_minimum_is_empty(self):
        H = lv_hamiltonian(1.0)
        assert classical.level_set(H, 1.0, self.GRID) == []

    def test_minimum_is_degenerate(self):
        H = lv_hamiltonian(1.0)
        contours = classical.level_set(H, 2.0, self.GRID)
        pts = np.vstack([c.points for c in contours]) if contours else np.empty((0, 2))
        if pts.size:
            assert np.max(np.hypot(pts[:, 0], pts[:, 1])) < 0.2

    @pytest.mark.parametrize("eps", [3.0, 6.0])
    def test_closed_orbit_around_origin(self, eps):
        H = lv_hamiltonian(1.0)
        contours = classical.level_set(H, eps, self.GRID)
        closed = [c for c in contours if c.closed]
        assert len(closed) == 1
        pts = closed[0].points
        # winds around the fixed point
        ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
        assert abs(abs(ang[-1] - ang[0]) - 2 * math.pi) < 0.1
        # vertex accuracy within 10x the linear-interpolation error bound
        hx = self.GRID.hx
        bound = hx ** 2 / 8.0 * max(np.max(np.abs(H.even_dV(1, pts[:, 0]))),
                                    np.max(np.abs(H.even_dK(1, pts[:, 1]))))
        assert np.max(np.abs(H.evaluate(pts[:, 0], pts[:, 1]) - eps)) <= 10 * bound


class TestClassicalCurrents:
    def test_unit_weight_gives_velocity(self):
        H = lv_hamiltonian(1.0)
        grid = PhaseGrid(-2, 2, -2, 2, 21, 21)
        W = np.ones((21, 21))
        Jx, Jk = classical.classical_currents(H, grid, W)
        xs, ks = grid.x_nodes(), grid.k_nodes()
        assert_allclose(Jx, np.broadcast_to((1 - np.exp(-ks))[None, :], Jx.shape), atol=1e-15)
        assert_allclose(Jk, np.broadcast_to((np.exp(-xs) - 1)[:, None], Jk.shape), atol=1e-15)

    def test_boltzmann_weight_is_stationary(self):
        # v . grad W0 = 0 analytically when W0 = f(H): evaluate with exact gradients
        H = lv_hamiltonian(1.0)
        P = thermo.ThermoParams(beta=1.0, a=1.0)
        rng = np.random.default_rng(2)
        for _ in range(30):
            x, k = rng.uniform(-2, 2, 2)
            vx, vk = classical.classical_velocity(H, (x, k))
            W = thermo.classical_weight(P, x, k)
            dWdx = -P.beta * H.odd_dV(0, x) * W
            dWdk = -P.beta * H.odd_dK(0, k) * W
            assert abs(vx * dWdx + vk * dWdk) < 1e-12

    def test_gaussian_weight_fixed_point(self):
        from lvflow import gaussian
        H = lv_hamiltonian(1.0)
        grid = PhaseGrid(-1, 1, -1, 1, 3, 3)
        G = gaussian.GaussianParams(1.0)
        W = gaussian.gaussian_weight(G, *grid.mesh())
        Jx, Jk = classical.classical_currents(H, grid, W)
        assert Jx[1, 1] == 0.0 and Jk[1, 1] == 0.0  # center node is (0, 0)


class TestIntegrator:
    def test_fixed_point_stays(self):
        H = lv_hamiltonian(1.0)
        traj = classical.integrate_classical(H, (0.0, 0.0), 5.0, 1e-2)
        assert np.max(np.abs(traj.points)) < 1e-12

    def test_energy_conservation_long_run(self):
        H = lv_hamiltonian(1.0)
        orbit = classical.parametric_orbit(3.0, [1.0])
        p0 = tuple(orbit.plus[0])
        traj = classical.integrate_classical(H, p0, 50.0, 1e-3)
        assert np.max(np.abs(traj.energies - traj.energies[0])) < 1e-8

    def test_closed_orbit_returns(self):
        H = lv_hamiltonian(1.0)
        orbit = classical.parametric_orbit(3.0, [1.0])
        p0 = np.asarray(orbit.plus[0])
        traj = classical.integrate_classical(H, tuple(p0), 30.0, 1e-3)
        d2 = (traj.points[:, 0] - p0[0]) ** 2 + (traj.points[:, 1] - p0[1]) ** 2
        # quadratic refinement of the discrete closest approach (the orbit
        # crosses p0 between samples)
        skip = int(2.0 / 1e-3)
        i = skip + int(np.argmin(d2[skip:]))
        a, b, c = d2[i - 1], d2[i], d2[i + 1]
        denom = a - 2 * b + c
        t = 0.5 * (a - c) / denom if denom > 0 else 0.0
        dmin = math.sqrt(max(b - 0.25 * (a - c) * t, 0.0))
        assert dmin < 1e-4

    def test_species_oscillate_predator_lags_prey(self):
        H = lv_hamiltonian(1.0)
        traj = classical.integrate_classical(H, (1.0, 1.0), 20.0, 1e-3)
        y = traj.species[:, 0]
        z = traj.species[:, 1]
        ty = traj.times[np.argmax(y)]
        # predator peak following that prey peak
        after = traj.times > ty
        tz = traj.times[after][np.argmax(z[after])]
        assert tz > ty

    def test_guards(self):
        H = lv_hamiltonian(1.0)
        with pytest.raises(ValueError):
            classical.integrate_classical(H, (0, 0), -1.0, 1e-3)
        with pytest.raises(ValueError):
            classical.integrate_classical(H, (0, 0), 1.0, 0.0)
