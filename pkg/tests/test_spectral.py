"""Spectral machinery tests: roots, Hopf curves, dispersion, Turing-Hopf."""

import numpy as np
import pytest

from nfkit.dde import find_equilibria
from nfkit.errors import DomainError
from nfkit.models import FinitePopulationModel, NeuralFieldModel
from nfkit.sigmoid import SigmoidSpec
from nfkit.spectral import (
    a_k_exponential,
    characteristic_roots_symmetric,
    dde_linearize_and_roots,
    dispersion,
    effective_gain,
    fourier_coefficient_quadrature,
    hopf_curves,
    hopf_omega,
    hopf_taus,
    lambda_star,
    moment_delay_jacobians,
    symmetric_branch_crossings,
    symmetric_rightmost_re,
    turing_hopf_curves,
)


def one_layer_model(s=0.02, w=None, sigma=0.0, tau_d=0.0, c=np.inf):
    # w = s makes the effective kernel the bare exp(-r/s) profile
    return NeuralFieldModel(
        s=[s], w=[[s if w is None else w]], sigma=[[sigma]],
        domain="circle", boundary="periodic", c=c, tau_d=tau_d, theta=1.0,
        I=0.0, Lam=0.5,
    )


class TestSymmetricRoots:
    def test_residual_certificates(self):
        roots = characteristic_roots_symmetric(3.0, 0.2, 0.5, n_branches=5)
        assert len(roots) == 22
        assert all(r.residual < 1e-10 for r in roots)
        # sorted by descending real part
        res = [r.zeta.real for r in roots]
        assert res == sorted(res, reverse=True)

    def test_large_noise_rightmost_tends_to_minus_one(self):
        for lam, tol in ((20.0, 0.05), (200.0, 0.005)):
            rm = symmetric_rightmost_re(3.0, lam, 0.5)
            assert rm < 0
            assert abs(rm + 1.0) < tol

    def test_unstable_count_nondecreasing_in_tau(self):
        lam = 0.1
        counts = []
        for tau in np.linspace(0.3, 12.0, 25):
            roots = characteristic_roots_symmetric(3.0, lam, tau, n_branches=10)
            counts.append(sum(1 for r in roots if r.zeta.real > 1e-9))
        assert all(c2 >= c1 for c1, c2 in zip(counts, counts[1:]))
        assert counts[-1] > counts[0]

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            characteristic_roots_symmetric(3.0, 0.2, 0.0)
        with pytest.raises(DomainError):
            characteristic_roots_symmetric(3.0, -0.5, 0.5)


class TestHopfCurves:
    def test_lambda_star_value(self):
        assert lambda_star(3.0) == pytest.approx(0.6437371747, abs=1e-9)

    def test_omega_at_zero_noise(self):
        assert hopf_omega(3.0, 0.0) == pytest.approx(1.3655727647, abs=1e-9)

    def test_no_hopf_below_sqrt_pi(self):
        res = hopf_curves(1.5)
        assert res.points == []
        assert "sqrt(pi)" in res.status
        with pytest.raises(DomainError):
            lambda_star(1.0)

    def test_consecutive_m_spacing(self):
        lam = 0.3
        w = hopf_omega(3.0, lam)
        pts = hopf_taus(3.0, lam, m_range=range(0, 5))
        plus = sorted(p["tau"] for p in pts if p["sign"] > 0)
        for a, b in zip(plus, plus[1:]):
            assert b - a == pytest.approx(2 * np.pi / w, rel=1e-12)

    def test_curve_points_certify(self):
        res = hopf_curves(3.0, m_range=range(0, 3), n_lambda=8)
        assert res.status == "ok"
        assert len(res.points) > 0
        assert all(p.certified for p in res.points)

    def test_branch_crossings_match_analytic_curve(self):
        g, lam = 3.0, 0.3
        taus = np.linspace(0.05, 20.0, 400)
        crossings = symmetric_branch_crossings(g, lam, taus)
        analytic = sorted(p["tau"] for p in hopf_taus(g, lam, m_range=range(0, 4), tau_max=20.0))
        assert len(crossings) > 0
        for c in crossings:
            assert min(abs(c["tau"] - a) for a in analytic) < 1e-3


class TestDispersion:
    def test_a0_value(self):
        s = 0.02
        assert a_k_exponential(s, 0.0, 0) == pytest.approx(s * (1 - np.exp(-1 / s)), rel=1e-12)

    def test_analytic_matches_quadrature_all_k(self):
        for s in (0.0125, 0.02):
            prof = lambda r: np.exp(-r / s)
            for nu in (0.0, 0.3 + 0.7j):
                delay = (lambda r: 0.05 + r / 4.0) if nu != 0.0 else None
                for k in range(-64, 65, 8):
                    ana = a_k_exponential(s, nu, k, tau_d=0.05 if delay else 0.0,
                                          c=4.0 if delay else np.inf)
                    quad = fourier_coefficient_quadrature(prof, nu, k, delay)
                    assert abs(ana - quad) < 1e-8

    def test_dispersion_spectrum_structure(self):
        model = one_layer_model(s=0.02)
        rep = dispersion(model, SigmoidSpec(g=3.0), v0=0.1, n_modes=8)
        assert rep.variance_eigenvalue == -2.0
        assert rep.mode(0).a_k == pytest.approx(
            a_k_exponential(0.02, rep.mode(0).nu, 0), abs=1e-12
        )
        # nu_k = -1/theta + F0' a_k exactly when no delays
        for m in rep.modes:
            assert m.nu == pytest.approx(-1.0 + rep.F0_prime * m.a_k, abs=1e-12)

    def test_stability_criterion_and_noise_stabilization(self):
        # small kernel mass: -1/theta + a_M g/sqrt(2 pi) < 0 => stable for every v0
        model = one_layer_model(s=0.02)  # a_M ~ 0.02
        spec = SigmoidSpec(g=3.0)
        for v0 in (0.0, 0.5, 10.0):
            rep = dispersion(model, spec, v0=v0, n_modes=8)
            assert -1.0 + rep.a_max * spec.g / np.sqrt(2 * np.pi) < 0
            assert rep.stable
        # rightmost eigenvalue non-increasing in v0 (noise stabilisation)
        model2 = one_layer_model(s=0.02, w=1.0)  # amplitude 1/s = 50, unstable at v0=0
        rights = [
            dispersion(model2, spec, v0=v0, n_modes=8).rightmost.real
            for v0 in (0.0, 0.5, 2.0, 10.0, 1e4)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(rights, rights[1:]))
        assert rights[-1] == pytest.approx(-1.0, abs=0.05)

    def test_delayed_modes_converge_and_certify(self):
        model = one_layer_model(s=0.02, w=1.0, tau_d=0.3)
        rep = dispersion(model, SigmoidSpec(g=3.0), v0=0.1, n_modes=4)
        f0p = rep.F0_prime
        for m in rep.modes:
            assert m.converged
            res = m.nu + 1.0 - f0p * a_k_exponential(0.02, m.nu, m.k, tau_d=0.3, amplitude=1 / 0.02)
            assert abs(res) < 1e-10


class TestTuringHopf:
    def test_negative_radicand_empty(self):
        model = one_layer_model(s=0.02)  # amplitude 1: gain far below 1/theta
        res = turing_hopf_curves(model, SigmoidSpec(g=3.0), v0=0.0, k=1)
        assert res.points == []
        assert "no dynamic instability" in res.status

    def test_omega_decreasing_in_k(self):
        model = one_layer_model(s=0.02, w=1.0)
        spec = SigmoidSpec(g=130.0)
        omegas = []
        for k in (1, 2, 3):
            res = turing_hopf_curves(model, spec, v0=0.0, k=k, certify=False)
            assert res.points
            omegas.append(res.points[0].omega)
        assert omegas[0] > omegas[1] > omegas[2]

    def test_certified_crossing_mode_one(self):
        # parameters found by sweep: steep sigmoid, bare exponential kernel
        model = one_layer_model(s=0.02, w=0.02)
        spec = SigmoidSpec(g=130.0)
        res = turing_hopf_curves(model, spec, v0=0.0, k=1, m_range=range(0, 3))
        assert res.status == "ok"
        assert res.points
        for p in res.points:
            assert p.certified, f"tau_d={p.tau_d}: Re nu = {p.certified_re}"

    def test_requires_infinite_speed(self):
        model = one_layer_model(s=0.02, c=5.0)
        with pytest.raises(DomainError):
            turing_hopf_curves(model, SigmoidSpec(g=3.0), v0=0.0, k=1)


class TestDelayedLinearisation:
    def symmetric_model(self, lam, tau):
        return FinitePopulationModel(
            J=[[1.0, -1.0], [1.0, 1.0]], sigma=0.0, tau=tau, theta=1.0,
            I=[0.0, -1.0], lam=lam,
        )

    def test_roots_match_closed_form(self):
        g, lam, tau = 3.0, 0.2, 0.5
        model = self.symmetric_model(lam, tau)
        eq = np.array([0.0, 0.0, lam**2 / 2, lam**2 / 2])
        roots, info = dde_linearize_and_roots(
            model, SigmoidSpec(g=g), eq, re_lim=(-4.0, 3.0), im_lim=(0.0, 30.0),
        )
        assert info["count_verified"]
        closed = characteristic_roots_symmetric(g, lam, tau, n_branches=6)
        targets = [r.zeta for r in closed] + [-2.0 + 0j, -2.0 + 0j]
        for r in roots:
            assert min(abs(r.zeta - t) for t in targets) < 1e-8
        # every in-window closed-form root is found
        for t in closed:
            z = t.zeta
            if -3.9 < z.real < 2.9 and abs(z.imag) < 29:
                assert min(abs(r.zeta - z) for r in roots) < 1e-8

    def test_zero_delay_reduces_to_jacobian_eigenvalues(self):
        model = FinitePopulationModel(
            J=[[15.0, -12.0], [16.0, -5.0]], sigma=0.0, tau=0.0, theta=1.0,
            I=[0.0, -3.0], lam=0.5,
        )
        spec = SigmoidSpec(g=1.0)
        eqs = find_equilibria(model, spec, n_starts=200)
        eq = eqs[0]
        A0, mats = moment_delay_jacobians(model, spec, eq.state)
        assert mats == {} or all(np.allclose(m, 0) for m in mats.values())
        ev = np.linalg.eigvals(A0)
        roots, _ = dde_linearize_and_roots(
            model, spec, eq, re_lim=(-6.0, 6.0), im_lim=(0.0, 10.0), count_check=False,
        )
        for r in roots:
            assert min(abs(r.zeta - e) for e in ev) < 1e-6

    def test_jacobian_matches_analytic_structure(self):
        # for the symmetric fixed point: A0 = diag(-1,-1,-2,-2),
        # A_tau upper-left block = G * J with G the effective gain
        g, lam, tau = 3.0, 0.4, 0.7
        model = self.symmetric_model(lam, tau)
        eq = np.array([0.0, 0.0, lam**2 / 2, lam**2 / 2])
        A0, mats = moment_delay_jacobians(model, SigmoidSpec(g=g), eq)
        np.testing.assert_allclose(A0, np.diag([-1.0, -1.0, -2.0, -2.0]), atol=1e-6)
        G = effective_gain(g, lam) * np.sqrt(2 * np.pi) / np.sqrt(2 * np.pi)
        expected = np.zeros((4, 4))
        expected[:2, :2] = effective_gain(g, lam) * np.array([[1, -1], [1, 1]])
        np.testing.assert_allclose(mats[tau], expected, atol=1e-5)
