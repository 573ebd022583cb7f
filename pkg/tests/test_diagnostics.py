import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from detmodes.diagnostics import (
    WavenumberRecord,
    analyze_field,
    average_records,
    bernstein_constant,
    bound_reports,
    calibrated_c0,
    determining_wavenumber,
    dissipation_wavenumber,
    energy_dissipation_rate,
    grashof,
    intermittency_dimension,
    kolmogorov_wavenumber,
    reynolds_profiles,
    shell_profile,
    time_average,
)
from detmodes.littlewood_paley import project_below, project_shell
from detmodes.spectral import TorusGrid, VectorField, lebesgue_norm

from conftest import random_real_field, shell_packet, single_mode, sine_mode


def oracle_Q(u, r, c_r, nu):
    """Straightforward evaluation of both conditions for every q."""
    g = u.grid
    thr = c_r * nu
    qs = range(g.q_max + 1)
    high = [g.lambda_q(p) ** (-1 + 3 / r) * lebesgue_norm(project_shell(u, p), r) < thr for p in qs]
    low = [lebesgue_norm(project_below(u, q), np.inf) / g.lambda_q(q) < thr for q in qs]
    for q in qs:
        if low[q] and all(high[q + 1:]):
            return q
    return g.q_max + 1


def oracle_Q_dis(u, c0, nu):
    g = u.grid
    qs = range(g.q_max + 1)
    ok = [lebesgue_norm(project_shell(u, p), np.inf) / g.lambda_q(p) < c0 * nu for p in qs]
    return next(q for q in qs if all(ok[q + 1:]))


def scaled_random(N, seed, amplitude, L=1.0):
    u = random_real_field(TorusGrid(N, L), np.random.default_rng(seed))
    return u * (amplitude / lebesgue_norm(u, np.inf))


class TestDeterminingWavenumber:
    def test_zero_field(self):
        g = TorusGrid(16, 2.0)
        w = determining_wavenumber(VectorField.zeros(g), 2.5, 0.05, 1.0)
        assert (w.Q, w.saturated) == (0, False)
        assert w.Lambda == pytest.approx(g.lambda0)

    def test_single_shell_marginal(self):
        # |k| = 4 lives in shell 2; with L = 1 the low-mode condition reads
        # A / 2^q < c_r nu, so A = 6 c_r nu fails at q = 2 and passes at q = 3
        g = TorusGrid(32, 1.0)
        c_r, nu, r = 0.05, 1.0, 2.5
        u = single_mode(g, (4, 0, 0), amplitude=6 * c_r * nu)
        w = determining_wavenumber(u, r, c_r, nu)
        assert w.Q == 3 == oracle_Q(u, r, c_r, nu)
        assert w.Lambda == g.lambda_q(3)

    @given(seed=st.integers(0, 10 ** 6), amp=st.floats(1e-4, 3.0), r=st.floats(2.05, 2.95))
    def test_matches_exhaustive_oracle(self, seed, amp, r):
        u = scaled_random(16, seed, amp)
        w = determining_wavenumber(u, r, 0.05, 1.0)
        assert w.Q == oracle_Q(u, r, 0.05, 1.0)
        assert w.saturated == (w.Q == u.grid.q_max + 1)

    def test_oracle_on_larger_grid(self):
        for seed, amp in [(0, 0.01), (1, 0.05), (2, 0.2), (3, 0.8)]:
            u = scaled_random(32, seed, amp)
            assert determining_wavenumber(u, 2.5, 0.05, 1.0).Q == oracle_Q(u, 2.5, 0.05, 1.0)

    def test_lambda_is_dyadic(self):
        u = scaled_random(16, 4, 0.1, L=2.5)
        w = determining_wavenumber(u, 2.5, 0.05, 1.0)
        assert w.Lambda == u.grid.lambda0 * 2 ** w.Q
        assert w.Lambda >= u.grid.lambda0

    def test_amplitude_monotone(self):
        for seed in range(6):
            u = scaled_random(16, seed, 0.02)
            qs = [determining_wavenumber(u * a, 2.5, 0.05, 1.0).Q for a in (1, 2, 4, 8, 16, 64)]
            assert qs == sorted(qs)

    def test_translation_and_negation_invariance(self):
        u = scaled_random(16, 11, 0.1)
        g = u.grid
        shifted = VectorField.from_physical(g, np.roll(u.physical, (3, -5, 7), axis=(1, 2, 3)))
        ref = determining_wavenumber(u, 2.5, 0.05, 1.0)
        assert determining_wavenumber(shifted, 2.5, 0.05, 1.0) == ref
        assert determining_wavenumber(-u, 2.5, 0.05, 1.0) == ref
        d = dissipation_wavenumber(u, 0.05, 1.0)
        assert dissipation_wavenumber(shifted, 0.05, 1.0) == d
        assert dissipation_wavenumber(-u, 0.05, 1.0) == d

    def test_large_viscosity_gives_lowest_shell(self):
        u = scaled_random(16, 5, 1.0)
        assert determining_wavenumber(u, 2.5, 0.05, 1e6).Q == 0

    def test_saturation_flag(self):
        u = scaled_random(16, 5, 100.0)
        w = determining_wavenumber(u, 2.5, 0.05, 1.0)
        assert w.saturated and w.Q == u.grid.q_max + 1

    @pytest.mark.parametrize("r", [2.0, 3.0, 1.5, 4.0])
    def test_rejects_r_outside_open_interval(self, r):
        with pytest.raises(ValueError):
            determining_wavenumber(VectorField.zeros(TorusGrid(8)), r, 0.05, 1.0)


class TestDissipationWavenumber:
    def test_zero_field(self):
        g = TorusGrid(16)
        assert dissipation_wavenumber(VectorField.zeros(g), 0.05, 1.0).Q == 0

    @pytest.mark.parametrize("q_star,k", [(1, 3), (2, 4), (3, 8)])
    def test_single_shell_threshold(self, q_star, k):
        g = TorusGrid(32, 1.0)
        c0, nu = 0.05, 1.0
        threshold = c0 * nu * g.lambda_q(q_star)  # the unit mode peaks at 1 on the grid
        below = single_mode(g, (k, 0, 0), amplitude=0.99 * threshold)
        above = single_mode(g, (k, 0, 0), amplitude=1.01 * threshold)
        assert dissipation_wavenumber(below, c0, nu).Q == 0
        assert dissipation_wavenumber(above, c0, nu).Q == q_star

    @given(seed=st.integers(0, 10 ** 6), amp=st.floats(1e-4, 3.0))
    def test_matches_exhaustive_oracle(self, seed, amp):
        u = scaled_random(16, seed, amp)
        assert dissipation_wavenumber(u, 0.05, 1.0).Q == oracle_Q_dis(u, 0.05, 1.0)

    def test_dominated_with_calibrated_constant(self):
        g = TorusGrid(16)
        c_r, r = 0.05, 2.5
        c0 = calibrated_c0(g, r, c_r)
        for seed in range(8):
            for amp in (0.01, 0.1, 0.5):
                u = scaled_random(16, seed, amp)
                w = determining_wavenumber(u, r, c_r, 1.0)
                assert w.Lambda >= dissipation_wavenumber(u, c0, 1.0).Lambda

    def test_dominated_with_calibrated_constant_on_packets(self):
        g = TorusGrid(16)
        c_r, r = 0.05, 2.5
        c0 = calibrated_c0(g, r, c_r)
        rng = np.random.default_rng(3)
        for q in range(g.q_max + 1):
            for localized in (True, False):
                u = shell_packet(g, q, rng, localized)
                for amp in np.geomspace(1e-3, 1, 7):
                    v = u * (amp / lebesgue_norm(u, np.inf))
                    assert determining_wavenumber(v, r, c_r, 1.0).Lambda >= dissipation_wavenumber(v, c0, 1.0).Lambda


def test_bernstein_constant_is_order_one():
    C = bernstein_constant(TorusGrid(16), 2.5)
    assert 1 < C < 10
    assert calibrated_c0(TorusGrid(16), 2.5, 0.05) == pytest.approx(0.05 * C)


class TestReynolds:
    def test_zero_field(self):
        Rh, Rl = reynolds_profiles(VectorField.zeros(TorusGrid(16)), 1.0)
        assert not Rh.any() and not Rl.any()

    def test_unit_mode(self):
        A = 0.37
        Rh, Rl = reynolds_profiles(sine_mode(TorusGrid(16, 1.0), A), 1.0)
        assert Rh[0] == pytest.approx(A, rel=1e-12)
        assert Rl[0] == pytest.approx(A, rel=1e-12)
        assert Rh[1:].max() == 0

    def test_low_profile_decreases_above_support(self):
        g = TorusGrid(32)
        u = random_real_field(g, np.random.default_rng(0))
        u = u.with_coeffs(u.coeffs * (g.k_mag <= 5))  # support top inside shell 2
        _, Rl = reynolds_profiles(u, 1.0)
        assert np.all(np.diff(Rl[3:]) < 0)

    def test_consistent_with_dissipation_wavenumber(self):
        u = scaled_random(32, 9, 0.3)
        c0 = 0.05
        Rh, _ = reynolds_profiles(u, 1.0)
        Qd = dissipation_wavenumber(u, c0, 1.0).Q
        assert np.all(Rh[Qd + 1:] < c0)


class TestProfiles:
    def test_profile_matches_direct_norms(self):
        u = scaled_random(16, 2, 0.3, L=1.5)
        prof = shell_profile(u, 2.5)
        g = u.grid
        for q in range(g.q_max + 1):
            uq = project_shell(u, q)
            assert prof.Lr[q] == pytest.approx(lebesgue_norm(uq, 2.5), rel=1e-12)
            assert prof.L2[q] == pytest.approx(lebesgue_norm(uq, 2), rel=1e-12)
            assert prof.Linf[q] == pytest.approx(lebesgue_norm(uq, np.inf), rel=1e-12, abs=1e-15)
            assert prof.below_Linf[q] == pytest.approx(lebesgue_norm(project_below(u, q), np.inf), rel=1e-12)

    @pytest.mark.parametrize("amp", [0.01, 0.1, 0.5, 2.0])
    def test_profile_and_lazy_scans_agree(self, amp):
        u = scaled_random(32, 4, amp)
        full = analyze_field(u, 0.0, 2.5, 0.05, 0.2, 1.0, profile=True)
        lazy = analyze_field(u, 0.0, 2.5, 0.05, 0.2, 1.0, profile=False)
        assert (full.Q, full.Q_dis, full.saturated) == (lazy.Q, lazy.Q_dis, lazy.saturated)
        assert full.Q == determining_wavenumber(u, 2.5, 0.05, 1.0).Q

    def test_record_energies(self):
        u = scaled_random(16, 1, 0.3)
        rec = analyze_field(u, 1.5, 2.5, 0.05, 0.05, 1.0)
        assert rec.t == 1.5
        assert rec.energy == pytest.approx(0.5 * lebesgue_norm(u, 2) ** 2)
        assert rec.Rh.shape == rec.Rl.shape == (u.grid.q_max + 1,)


class TestGrashof:
    def test_zero(self):
        assert grashof(VectorField.zeros(TorusGrid(8)), 1.0) == 0.0

    def test_single_mode(self):
        F = 3.0
        f = sine_mode(TorusGrid(8, 1.0), F)
        expected = F / (2 * np.pi) * math.sqrt(0.5) / math.sqrt(2 * np.pi)
        assert grashof(f, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_viscosity_scaling(self):
        f = sine_mode(TorusGrid(8, 2.0), 1.3)
        assert grashof(f, 0.2) == pytest.approx(grashof(f, 0.1) / 4, rel=1e-14)

    def test_rejects_mean(self):
        g = TorusGrid(8)
        c = np.zeros((3,) + g.half_shape, dtype=complex)
        c[0, 0, 0, 0] = 1
        with pytest.raises(ValueError):
            grashof(VectorField(g, c), 1.0)


class TestAverages:
    def test_constant_series(self):
        t = np.linspace(0, 7, 15)
        assert energy_dissipation_rate(t, np.full_like(t, 2.5), 0.1, 1.5, 2.0) == pytest.approx(0.1 * 2.0 ** -1.5 * 2.5)

    def test_classical_limit(self):
        t = np.array([0.0, 1.0, 3.0])
        ens = np.array([1.0, 2.0, 4.0])
        assert energy_dissipation_rate(t, ens, 0.3, 3.0, 1.0) == pytest.approx(0.3 * time_average(t, ens))

    def test_linear_series_exact(self):
        t = np.sort(np.random.default_rng(0).uniform(0, 5, 40))
        v = 2 * t + 1
        exact = (t[-1] + t[0]) + 1
        assert time_average(t, v) == pytest.approx(exact, rel=1e-12)

    def test_rejects_empty_and_bad_d(self):
        with pytest.raises(ValueError):
            time_average([], [])
        with pytest.raises(ValueError):
            energy_dissipation_rate([0, 1], [1, 1], 1.0, 3.5, 1.0)

    @pytest.mark.parametrize("d", [0, 1, 2.2, 3])
    def test_kolmogorov_unit(self, d):
        assert kolmogorov_wavenumber(0.3 ** 3, 0.3, d) == pytest.approx(1.0)

    def test_kolmogorov_examples(self):
        nu = 0.7
        assert kolmogorov_wavenumber(16 * nu ** 3, nu, 3) == pytest.approx(2.0)
        assert kolmogorov_wavenumber(16 * nu ** 3, nu, 0) == pytest.approx(16.0)


def _series(u, r, n=3):
    prof = shell_profile(u, r)
    t = np.arange(n, dtype=float)
    return t, [prof.Lr] * n, [prof.L2] * n, [u.grid.q_max] * n


def _scan(t, Lr, L2, Q, r, L):
    from detmodes.diagnostics import _intermittency_ratio

    ratio = _intermittency_ratio(t, Lr, L2, np.asarray(Q), r, L)
    ok = [d for d in np.arange(0, 3.0005, 1e-3) if ratio(d) <= 1]
    return max(ok) if ok else 0.0


class TestIntermittency:
    def test_space_filling_sines_near_three(self):
        g = TorusGrid(32, 1.0)
        u = sine_mode(g, 1.0, k=8)  # shell 3
        t, Lr, L2, Q = _series(u, 2.5)
        est = intermittency_dimension(t, Lr, L2, Q, 2.5, 1.0)
        assert est.d == pytest.approx(_scan(t, Lr, L2, Q, 2.5, 1.0), abs=2e-3)
        assert est.d > 2.5

    def test_localized_bump_near_zero(self):
        g = TorusGrid(32, 1.0)
        c = np.zeros((3,) + g.half_shape, dtype=complex)
        c[1] = project_shell(VectorField(g, np.ones((3,) + g.half_shape)), 3).coeffs[1] * g.dealias_mask
        u = VectorField(g, c)
        t, Lr, L2, Q = _series(u, 2.5)
        est = intermittency_dimension(t, Lr, L2, Q, 2.5, 1.0)
        assert est.d == pytest.approx(_scan(t, Lr, L2, Q, 2.5, 1.0), abs=2e-3)
        assert est.d < 0.5

    def test_ratio_is_one_at_r_two(self):
        from detmodes.diagnostics import _intermittency_ratio

        u = scaled_random(16, 0, 0.3)
        t, Lr, L2, Q = _series(u, 2.0)
        ratio = _intermittency_ratio(t, Lr, L2, np.asarray(Q), 2.0, 1.0)
        for d in (0, 1, 2, 3):
            assert ratio(d) == pytest.approx(1.0, rel=1e-12)

    def test_ratio_nondecreasing_in_d(self):
        from detmodes.diagnostics import _intermittency_ratio

        u = scaled_random(16, 3, 0.3)
        t, Lr, L2, Q = _series(u, 2.5)
        ratio = _intermittency_ratio(t, Lr, L2, np.asarray(Q), 2.5, 1.0)
        vals = [ratio(d) for d in np.linspace(0, 3, 31)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            intermittency_dimension([], np.zeros((0, 3)), np.zeros((0, 3)), [], 2.5, 1.0)


def _record(t, Q, L=1.0, ens=1.0, saturated=False):
    n = 4
    return WavenumberRecord(t=t, Lambda=2.0 ** Q / L, Q=Q, Lambda_dis=1 / L, Q_dis=0, enstrophy=ens, energy=1.0,
                            saturated=saturated, Rh=np.zeros(n), Rl=np.zeros(n),
                            shell_Lr=np.ones(n) * 0.1, shell_L2=np.ones(n) * 0.1)


class TestAveragedDiagnostics:
    def test_conditional_average_identity(self):
        Qs = [0, 1, 0, 2, 3, 0, 1]
        recs = [_record(float(i), q) for i, q in enumerate(Qs)]
        avg = average_records(recs, 1.0, 2.5, 1.0, d_override=3.0)
        t = np.arange(len(Qs), dtype=float)
        lam = 2.0 ** np.array(Qs)
        exact = time_average(t, np.where(lam > 1, lam - 1, 0.0))
        assert avg.mean_Lambda - avg.lambda0 == pytest.approx(exact, rel=1e-14)
        assert avg.mean_Lambda - avg.lambda0 <= avg.mean_Lambda_excess

    def test_saturated_records_excluded(self):
        recs = [_record(0.0, 0), _record(1.0, 1), _record(2.0, 6, saturated=True)]
        avg = average_records(recs, 1.0, 2.5, 1.0, d_override=1.0)
        assert avg.n_saturated == 1 and avg.n_records == 3
        assert avg.mean_Lambda == pytest.approx(1.5)

    def test_all_saturated_rejected(self):
        with pytest.raises(ValueError):
            average_records([_record(0.0, 5, saturated=True)], 1.0, 2.5, 1.0)

    def test_laminar_bound_reports(self):
        nu = 0.5
        recs = [_record(float(i), 0, ens=0.2) for i in range(5)]
        avg = average_records(recs, nu, 2.5, 1.0, G=1e-3, d_override=3.0)
        rows = bound_reports(recs, avg, 2.5, nu, 2 * np.pi)
        assert rows[0].ratio == pytest.approx(1.0 * nu ** 2 / 0.2)
        assert all(row.ratio == 0.0 for row in rows[1:])
        assert len(rows) == 4

    def test_d_zero_report_uses_kolmogorov_wavenumber(self):
        nu = 0.3
        recs = [_record(float(i), q, ens=2.0) for i, q in enumerate([1, 2, 1, 2])]
        avg = average_records(recs, nu, 2.5, 1.0, d_override=0.0)
        rows = bound_reports(recs, avg, 2.5, nu, 2 * np.pi)
        intermittent = rows[2]
        assert intermittent.rhs == pytest.approx(avg.kappa_d, rel=1e-12)
        assert avg.kappa_d == pytest.approx(avg.eps / nu ** 3)
