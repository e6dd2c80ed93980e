import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optodicke.dynamics import IntegratorConfig, integrate
from optodicke.model import State, normal_state, rhs, spin_norm_sq
from optodicke.steadystate import (NotAFixedPointError, all_fixed_points,
                                   assess_stability, branch_tag,
                                   default_seeds, find_fixed_points,
                                   find_sra_roots, mirror_steady,
                                   refine_fixed_point,
                                   routh_hurwitz_diagnostic, sra_boundary,
                                   srb_quantities, srb_states,
                                   trivial_states)
from tests.test_model import fig2_params

N = 1.0e6


def mirror_ode_oracle(p, nph, T=600.0, dt=1e-3):
    """Independent check: integrate the mirror equation with |a|^2 frozen."""
    b1 = b2 = 0.0
    drive = p.delta0 * nph + p.eta_p

    def f(b1, b2):
        return (p.omega_m * b2 - p.gamma_m * b1,
                -p.omega_m * b1 - drive - p.gamma_m * b2)

    for _ in range(int(T / dt)):
        k1 = f(b1, b2)
        k2 = f(b1 + 0.5 * dt * k1[0], b2 + 0.5 * dt * k1[1])
        k3 = f(b1 + 0.5 * dt * k2[0], b2 + 0.5 * dt * k2[1])
        k4 = f(b1 + dt * k3[0], b2 + dt * k3[1])
        b1 += dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        b2 += dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return b1, b2


class TestMirrorSteady:
    def test_dark_unpumped_mirror_is_at_rest(self):
        p = fig2_params()
        assert mirror_steady(p, 0.0) == (0.0, 0.0)

    def test_radiation_pressure_displacement(self):
        # frozen from the ODE oracle (mirror_ode_oracle, T=600 us)
        p = fig2_params()
        b1, b2 = mirror_steady(p, 1250.0)
        assert b1 == pytest.approx(-62.34413972384104, abs=1e-3)
        assert b2 == pytest.approx(-3.1172068765746705, abs=1e-3)
        o1, o2 = mirror_ode_oracle(p, 1250.0)
        assert b1 == pytest.approx(o1, abs=1e-6)
        assert b2 == pytest.approx(o2, abs=1e-6)

    def test_pump_displacement_dark_cavity(self):
        p = fig2_params(eta_p=1.0)
        b1, b2 = mirror_steady(p, 0.0)
        assert b1 == pytest.approx(-0.9975062355814577, abs=1e-4)
        assert b2 == pytest.approx(-0.049875310025199224, abs=1e-4)
        o1, o2 = mirror_ode_oracle(p, 0.0)
        assert b1 == pytest.approx(o1, abs=1e-6)
        assert b2 == pytest.approx(o2, abs=1e-6)

    def test_negative_photon_number_rejected(self):
        with pytest.raises(ValueError):
            mirror_steady(fig2_params(), -1.0)


class TestSrbQuantities:
    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.0, 60.0), st.floats(-30.0, 30.0),
           st.floats(0.05, 3.0), st.floats(0.0, 1.0))
    def test_never_exists_for_nonnegative_u(self, uN, omega, lam, eta_p):
        p = fig2_params(omega=omega, uN=uN, lam=lam, eta_p=eta_p)
        assert not srb_quantities(p).exists
        assert srb_quantities(p).reason is not None

    def test_photon_number_is_ratio_of_frequencies(self):
        p = fig2_params(omega=0.0, uN=-40.0, lam=1.0)
        q = srb_quantities(p)
        assert q.photon_n == 1250.0  # -omega_a/U = 0.05/(40/N)*N
        assert q.exists

    def test_sx2_against_newton_oracle(self):
        p = fig2_params(omega=0.0, uN=-40.0, lam=1.0)
        q = srb_quantities(p)
        # kappa^2 omega_a / (4 g^2 |U|) with lam = 1
        assert q.sx2 == pytest.approx((0.28638 * N / 2) ** 2, rel=1e-2)
        seed = [s for s in srb_states(p) if s.sx > 0 > s.sy][0]
        fp = refine_fixed_point(p, seed)
        assert fp is not None
        assert fp.sx ** 2 == pytest.approx(q.sx2, rel=1e-2)
        assert fp.photon_n == pytest.approx(q.photon_n, rel=1e-2)

    def test_u_zero_has_reason(self):
        p = fig2_params(omega=0.0, uN=0.0, lam=1.0)
        q = srb_quantities(p)
        assert not q.exists and "U = 0" in q.reason

    def test_srb_states_lie_on_sphere_and_are_fixed(self):
        p = fig2_params(omega=3.0, uN=-40.0, lam=0.8)
        states = srb_states(p)
        assert len(states) == 4
        for s in states:
            assert spin_norm_sq(s) == pytest.approx((N / 2) ** 2, rel=1e-12)
            assert np.linalg.norm(rhs(p, s)) < 1e-9 * N


class TestSraBoundary:
    def test_closed_form_at_zero_backaction(self):
        """lambda_c = (1/2) sqrt(omega_a (kappa^2 + omega^2) / omega)."""
        for omega in np.linspace(0.5, 40.0, 50):
            p = fig2_params(omega=omega, uN=0.0, lam=1.0)
            expected = 0.5 * math.sqrt(
                p.omega_a * (p.kappa ** 2 + omega ** 2) / omega)
            got = sra_boundary(p, "N")
            assert got == pytest.approx(expected, rel=1e-10)

    def test_value_at_omega_equal_kappa(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=1.0)
        assert sra_boundary(p, "N") == pytest.approx(0.45, rel=1e-12)

    def test_negative_omega_swaps_branches(self):
        p = fig2_params(omega=-8.1, uN=0.0, lam=1.0)
        assert sra_boundary(p, "N") is None
        assert sra_boundary(p, "I") == pytest.approx(0.45, rel=1e-12)

    def test_backaction_shifts_boundaries_toward_each_other(self):
        for omega in np.linspace(-15.0, 15.0, 31):
            shifted = fig2_params(omega=omega, uN=-40.0, lam=1.0)
            base_n = fig2_params(omega=omega + 20.0, uN=0.0, lam=1.0)
            base_i = fig2_params(omega=omega - 20.0, uN=0.0, lam=1.0)
            for branch, base in (("N", base_n), ("I", base_i)):
                a = sra_boundary(shifted, branch)
                b = sra_boundary(base, branch)
                assert (a is None) == (b is None)
                if a is not None:
                    assert a == pytest.approx(b, rel=1e-10)

    def test_window_edge_returns_none(self):
        # chi = 0 exactly at omega = UN/2 for the N branch
        p = fig2_params(omega=-20.0, uN=-40.0, lam=1.0)
        assert sra_boundary(p, "N") is None

    def test_pump_shift_identity(self):
        p = fig2_params(omega=5.0, uN=-20.0, lam=1.0, eta_p=1.0)
        shift = 2 * p.delta0 * p.eta_p * p.omega_m / (p.gamma_m ** 2
                                                      + p.omega_m ** 2)
        ref = fig2_params(omega=5.0 - shift, uN=-20.0, lam=1.0)
        assert sra_boundary(p, "N") == pytest.approx(
            sra_boundary(ref, "N"), rel=1e-10)


class TestFindFixedPoints:
    def test_zero_coupling_gives_exactly_the_trivial_pair(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=0.0)
        fps, diag = all_fixed_points(p)
        assert len(fps) == 2
        tags = sorted(f.branch_tag for f in fps)
        assert tags == ["I", "N"]
        # decoupled spin precession is exactly neutral, never unstable
        assert all(f.stability != "unstable" for f in fps)

    def test_superradiant_pair_above_threshold(self):
        # lambda_c = 0.45 at omega = kappa; just above it the normal state
        # destabilizes and a stable +-Sx pair of type-A points appears
        p = fig2_params(omega=8.1, uN=0.0, lam=0.47)
        fps, _ = all_fixed_points(p)
        byt = {}
        for f in fps:
            byt.setdefault(f.branch_tag, []).append(f)
        assert byt["N"][0].stability == "unstable"
        sra = byt["SRA_N"]
        assert len(sra) == 2
        assert all(f.stability == "stable" for f in sra)
        assert sra[0].state.sx == pytest.approx(-sra[1].state.sx, rel=1e-9)
        # dynamic oracle: a perturbed normal state evolves into the pair's
        # neighbourhood and the polished point coincides with one of them
        tr = integrate(p, normal_state(p, tip=1e-3),
                       IntegratorConfig(t_end=3000.0, sample_every=500))
        tail_mean = tr.states[-tr.n_samples // 4:].mean(axis=0)
        fp = refine_fixed_point(p, State.from_array(tail_mean))
        assert fp is not None
        assert min(np.linalg.norm(fp.as_array() - f.state.as_array())
                   for f in sra) < 1e-6 * N

    def test_strong_coupling_type_a_root_is_unstable(self):
        # far above threshold the radiation-pressure frequency pull
        # destabilizes the type-A branch; the paper-level expectation of a
        # stable pair holds only near onset for these parameters
        p = fig2_params(omega=8.1, uN=0.0, lam=0.9)
        roots = find_sra_roots(p)
        assert roots, "type-A root should still exist"
        refined = refine_fixed_point(p, roots[0])
        _, verdict = assess_stability(p, refined)
        assert verdict == "unstable"

    def test_srb_point_from_seed(self):
        p = fig2_params(omega=0.0, uN=-40.0, lam=0.55)
        seeds = [s for s in srb_states(p) if s.sy < 0]
        fps, diag = find_fixed_points(p, seeds)
        srb = [f for f in fps if f.branch_tag == "SRB"]
        assert srb
        for f in srb:
            assert f.state.photon_n == pytest.approx(1250.0, rel=1e-2)
        # of the two sign combinations with Sy < 0, the Sx > 0 one is the
        # attractor at these parameters
        assert any(f.stability == "stable" for f in srb)

    def test_trivial_roots_always_included(self):
        p = fig2_params(omega=3.0, uN=-40.0, lam=0.7, eta_p=0.5)
        fps, _ = find_fixed_points(p, [])
        tags = sorted(f.branch_tag for f in fps)
        assert tags == ["I", "N"]
        for f in fps:
            assert f.residual_norm < 1e-9 * N
            assert f.state.b_re != 0.0  # pump displaces the mirror

    def test_diverging_seed_is_dropped_not_fatal(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=0.47)
        bad = State(math.inf, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        fps, diag = find_fixed_points(p, [bad])
        assert diag["dropped"] >= 1
        assert len(fps) == 2  # the trivial pair survives


class TestAssessStability:
    def test_normal_below_threshold_stable(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=0.40)
        _, verdict = assess_stability(p, trivial_states(p)[0])
        assert verdict == "stable"

    def test_normal_above_threshold_unstable(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=0.50)
        eig, verdict = assess_stability(p, trivial_states(p)[0])
        assert verdict == "unstable"
        assert max(e.real for e in eig) > 1e-6
        # dynamic oracle: the perturbed normal state runs away
        tr = integrate(p, normal_state(p, tip=1e-3),
                       IntegratorConfig(t_end=1500.0, sample_every=500))
        assert np.max(tr.photon_n) > 1e-6 * N

    def test_neutral_mode_present_at_any_fixed_point(self):
        # spin-norm conservation forces one exactly neutral eigenvalue
        p = fig2_params(omega=8.1, uN=0.0, lam=0.40)
        eig, _ = assess_stability(p, trivial_states(p)[0])
        assert min(abs(e.real) for e in eig) < 1e-9
        p2 = fig2_params(omega=8.1, uN=0.0, lam=0.47)
        fp = refine_fixed_point(p2, find_sra_roots(p2)[0])
        eig2, _ = assess_stability(p2, fp)
        assert min(abs(e.real) for e in eig2) < 1e-9

    def test_non_fixed_point_rejected(self):
        p = fig2_params()
        with pytest.raises(NotAFixedPointError):
            assess_stability(p, normal_state(p, tip=0.5))

    def test_mirror_pair_has_identical_spectrum(self):
        p = fig2_params(omega=0.0, uN=-40.0, lam=0.55)
        seed = [s for s in srb_states(p) if s.sx > 0 > s.sy][0]
        fp = refine_fixed_point(p, seed)
        partner = State(-fp.sx, -fp.sy, fp.sz, -fp.a_re, -fp.a_im,
                        fp.b_re, fp.b_im)
        assert np.linalg.norm(rhs(p, partner)) < 1e-9 * N
        e1, v1 = assess_stability(p, fp)
        e2, v2 = assess_stability(p, partner)
        assert v1 == v2 == "stable"
        key = lambda z: (round(z.real, 10), round(z.imag, 10))
        gap = max(abs(a - b) for a, b in
                  zip(sorted(e1, key=key), sorted(e2, key=key)))
        assert gap < 1e-8

    def test_stable_point_is_an_attractor(self):
        p = fig2_params(omega=0.0, uN=-40.0, lam=0.55)
        seed = [s for s in srb_states(p) if s.sx > 0 > s.sy][0]
        fp = refine_fixed_point(p, seed)
        rng = np.random.default_rng(7)
        y0 = fp.as_array() + 1e-4 * N * rng.standard_normal(7)
        tr = integrate(p, State.from_array(y0),
                       IntegratorConfig(t_end=1000.0, sample_every=1000))
        d_end = np.linalg.norm(tr.states[-1] - fp.as_array())
        assert d_end < 0.01 * np.linalg.norm(fp.as_array())

    def test_routh_hurwitz_diagnostic_shape(self):
        p = fig2_params(omega=8.1, uN=0.0, lam=0.40)
        diag = routh_hurwitz_diagnostic(p, trivial_states(p)[0])
        assert len(diag["char_poly"]) == 8
        assert diag["char_poly"][0] == pytest.approx(1.0)
        assert len(diag["hurwitz_minors"]) == 7


def test_branch_tagging():
    p = fig2_params(omega=0.0, uN=-40.0, lam=0.55)
    ts = trivial_states(p)
    assert branch_tag(p, ts[0]) == "N"
    assert branch_tag(p, ts[1]) == "I"
    srb = [s for s in srb_states(p) if s.sx > 0 > s.sy][0]
    assert branch_tag(p, srb) == "SRB"
    p2 = fig2_params(omega=8.1, uN=0.0, lam=0.47)
    root = refine_fixed_point(p2, find_sra_roots(p2)[0])
    assert branch_tag(p2, root) == "SRA_N"
