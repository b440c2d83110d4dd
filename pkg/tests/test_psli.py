import math

import numpy as np
import pytest

from ftnim.framing import placement_set
from ftnim.psli import (DetectorConfig, cross_corr_sq, identify, local_lambda,
                        measure_mu, psi_diagnostic, whitened_pilot)
from ftnim.waveform import PulseConfig, TapSet, whitening_filter


def make_chain(tau=0.84, l_h=4, seed=0, n_p=32):
    v = whitening_filter(PulseConfig(beta=0.35, tau=tau, l_h=l_h))
    rng = np.random.default_rng(seed)
    pilot = rng.choice([-1.0, 1.0], n_p).astype(complex)
    return pilot, v


class TestWhitenedPilot:
    def test_identity_filter(self):
        pilot, _ = make_chain()
        wp = whitened_pilot(pilot, TapSet(np.array([1.0])))
        np.testing.assert_array_equal(wp.p_tilde, pilot)

    def test_zero_lag_definition(self):
        pilot, v = make_chain()
        wp = whitened_pilot(pilot, v)
        assert wp.autocorr_sq[0] == pytest.approx(
            np.sum(np.abs(wp.p_tilde) ** 2) ** 2, rel=1e-12)

    def test_matches_bruteforce_double_sum(self):
        pilot, v = make_chain(seed=3)
        wp = whitened_pilot(pilot, v)
        n_p = len(pilot)
        # brute-force: p~_k then R(d) = sum_k p~_k p~*_{d+k}
        pt = np.zeros(n_p, dtype=complex)
        for k in range(n_p):
            for j in range(n_p):
                if 0 <= k - j < len(v.taps):
                    pt[k] += pilot[j] * v.taps[k - j]
        np.testing.assert_allclose(wp.p_tilde, pt, atol=1e-12)
        for d in range(n_p):
            r = sum(pt[k] * np.conj(pt[d + k]) for k in range(n_p - d))
            assert wp.autocorr_sq[d] == pytest.approx(abs(r) ** 2, abs=1e-9)


class TestCrossCorr:
    def test_self_correlation_peak(self):
        pilot, v = make_chain()
        wp = whitened_pilot(pilot, v)
        r = np.concatenate([wp.p_tilde, np.zeros(40)])
        vals = cross_corr_sq(r, wp, [0])
        assert vals[0] == pytest.approx(wp.peak, rel=1e-12)

    def test_single_tap_noiseless_peak(self):
        pilot, v = make_chain()
        wp = whitened_pilot(pilot, v)
        n_sp = 48
        frame = np.zeros(288, dtype=complex)
        frame[n_sp:n_sp + 32] = pilot
        s_tilde = np.convolve(frame, v.taps)[:288]
        vals = cross_corr_sq(s_tilde, wp, [n_sp])
        assert vals[n_sp] == pytest.approx(wp.peak, rel=1e-9)

    def test_out_of_range_lag(self):
        pilot, v = make_chain()
        wp = whitened_pilot(pilot, v)
        with pytest.raises(ValueError):
            cross_corr_sq(np.zeros(40, dtype=complex), wp, [9])


class TestLocalLambda:
    def test_constant_field(self):
        values = np.full(21, 3.5)
        assert local_lambda(values, 10, 4, 0, 20) == pytest.approx(3.5)

    def test_isolated_spike(self):
        values = np.zeros(21)
        values[10] = 9.0
        assert local_lambda(values, 10, 4, 0, 20) == 0.0

    def test_boundary_window_hand_example(self):
        # 5-point field, delta at the lower boundary, r0=2:
        # window {0,1,2}, sum=15, minus values[0]=10 -> 5, width = 2
        values = np.array([10.0, 2.0, 3.0, 4.0, 5.0])
        assert local_lambda(values, 0, 2, 0, 4) == pytest.approx(2.5)

    def test_zero_width_window(self):
        with pytest.raises(ValueError):
            local_lambda(np.ones(3), 0, 2, 0, 0)


class TestMeasureMu:
    def test_two_spikes_zero_background(self):
        values = np.zeros(40)
        values[10] = values[16] = 5.0
        assert measure_mu(values, 10, 16, 4, (0, 39)) == math.inf

    def test_constant_field_gives_one(self):
        values = np.full(40, 2.0)
        assert measure_mu(values, 10, 16, 4, (0, 39)) == pytest.approx(1.0)

    def test_requires_ordering(self):
        with pytest.raises(ValueError):
            measure_mu(np.ones(40), 16, 10, 4, (0, 39))


def build_two_tap_frame(pilot, v, n_sp, c0, cl, l_c, n=288, data=None, rng=None):
    """Noiseless two-tap frame through the whitened chain."""
    frame = np.zeros(n, dtype=complex)
    frame[n_sp:n_sp + len(pilot)] = pilot
    if data is not None:
        mask = np.ones(n, dtype=bool)
        mask[n_sp:n_sp + len(pilot)] = False
        frame[mask] = data
    s_tilde = np.convolve(frame, v.taps)[:n]
    r = c0 * s_tilde
    r[l_c:] += cl * s_tilde[:-l_c]
    return r


class TestIdentify:
    def setup_method(self):
        self.pilot, self.v = make_chain(tau=0.84, l_h=4, seed=1)
        self.wp = whitened_pilot(self.pilot, self.v)
        self.ps = placement_set(256, 6)

    def test_exact_recovery_single_tap_all_locations(self):
        for n_sp in self.ps.allowed:
            r = build_two_tap_frame(self.pilot, self.v, int(n_sp), 1.0, 0.0, 6)
            assert identify(r, self.wp, self.ps) == n_sp

    def test_strong_second_tap_corrected_by_modulo(self):
        # dominant far tap: peak appears at n_sp + l_c and is folded back
        r = build_two_tap_frame(self.pilot, self.v, 112, math.sqrt(0.30),
                                math.sqrt(0.699), 6)
        assert identify(r, self.wp, self.ps) == 112

    def test_competing_offgrid_peak_rejected_by_measure(self):
        # plant a decoy pilot copy at 206 (an expected lag, but not the true
        # pair) strong enough to be the global peak; the joint two-spike
        # measure still selects the true location
        rng = np.random.default_rng(5)
        r = build_two_tap_frame(self.pilot, self.v, 112, math.sqrt(0.655),
                                math.sqrt(0.345), 6)
        decoy = np.zeros(288, dtype=complex)
        decoy[206:206 + 32] = self.pilot
        r = r + math.sqrt(0.80) * np.convolve(decoy, self.v.taps)[:288]
        r += 0.02 * (rng.standard_normal(288) + 1j * rng.standard_normal(288))
        vals = cross_corr_sq(r, self.wp, range(257))
        field = np.array([vals[d] for d in range(257)])
        peak_lag = self.ps.expected[np.argmax(field[self.ps.expected.tolist()])]
        assert peak_lag == 206   # max-correlation decision alone would fail
        mu_true = measure_mu(field, 112, 118, 5, (0, 256))
        mu_decoy = measure_mu(field, 200, 206, 5, (0, 256))
        assert mu_true > mu_decoy
        assert identify(r, self.wp, self.ps) == 112

    def test_candidate_order_invariance_at_c2_one(self):
        # with c2 = 1 the running threshold reduces to an argmax over the
        # candidate measures
        rng = np.random.default_rng(9)
        cfg = DetectorConfig(c1=0.2, c2=1.0)
        for trial in range(20):
            n_sp = int(rng.choice(self.ps.allowed))
            c0, cl = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            r = build_two_tap_frame(self.pilot, self.v, n_sp, c0 / 2, cl / 2, 6)
            r += 0.3 * (rng.standard_normal(288) + 1j * rng.standard_normal(288))
            got = identify(r, self.wp, self.ps, cfg)
            vals = cross_corr_sq(r, self.wp, range(257))
            field = np.array([vals[d] for d in range(257)])
            ev = field[self.ps.expected.tolist()]
            keep = self.ps.expected[ev >= cfg.c1 * ev.max()]
            cands = sorted({int(d - d % self.ps.stride) for d in keep})
            mus = {d0: measure_mu(field, d0, d0 + 6, 5, (0, 256))
                   for d0 in cands if d0 + 6 <= 256}
            best = max(mus.values())
            winners = [d0 for d0, m in mus.items() if m == best]
            assert got == min(winners)

    def test_detector_config_validation(self):
        with pytest.raises(ValueError):
            DetectorConfig(c1=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(c2=-1.0)
        with pytest.raises(ValueError):
            DetectorConfig(r0=7).radius(6)


class TestInterferenceIdentity:
    """The cross-correlation at a spike lag equals the tap-weighted pilot
    autocorrelation peak plus an interference term computed independently."""

    @staticmethod
    def zeta_oracle(s_tilde, wp, c, n_sp, l, delta):
        # interference term of the spike-lag decomposition: every tap pair
        # except the diagonal (l, l) one, which is the spike itself
        l_c = len(c) - 1
        n_p = wp.n_p
        total = 0.0 + 0.0j
        pad = l_c
        s = np.concatenate([np.zeros(pad, dtype=complex), s_tilde,
                            np.zeros(n_p + l_c, dtype=complex)])
        for lp in range(l_c + 1):
            for lpp in range(l_c + 1):
                if lp == l and lpp == l:
                    continue
                a = sum(np.conj(wp.p_tilde[m]) * s[pad + n_sp + m + l - lp]
                        for m in range(n_p))
                b = sum(wp.p_tilde[mp] * np.conj(s[pad + n_sp + mp + l - lpp])
                        for mp in range(n_p))
                total += c[lp] * np.conj(c[lpp]) * a * b
        return total.real

    def test_identity_on_random_draws(self):
        rng = np.random.default_rng(12)
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.84, l_h=4))
        l_c = 6
        n = 288
        for _ in range(20):
            pilot = rng.choice([-1.0, 1.0], 32).astype(complex)
            wp = whitened_pilot(pilot, v)
            n_sp = int(rng.integers(0, 32) * 8)
            c = (rng.standard_normal(l_c + 1)
                 + 1j * rng.standard_normal(l_c + 1)) / np.sqrt(2)
            frame = np.zeros(n, dtype=complex)
            frame[n_sp:n_sp + 32] = pilot
            s_tilde = np.convolve(frame, v.taps)[:n]
            r = np.zeros(n, dtype=complex)
            for l in range(l_c + 1):
                r[l:] += c[l] * s_tilde[:n - l]
            peak = wp.peak
            for l in range(l_c + 1):
                delta = n_sp + l
                lhs = cross_corr_sq(r, wp, [delta])[delta]
                zeta = self.zeta_oracle(s_tilde, wp, c, n_sp, l, delta)
                spike = abs(c[l]) ** 2 * peak
                assert abs((lhs - spike) - zeta) <= 1e-9 * max(abs(zeta), spike, 1.0)


def test_psi_diagnostic_finite():
    pilot, v = make_chain()
    wp = whitened_pilot(pilot, v)
    psi = psi_diagnostic(wp, r0=4)
    assert len(psi) == 32
    assert psi[0] > 1.0   # the zero-lag peak dominates its neighborhood


def test_dump_cross_corr_csv(tmp_path):
    from ftnim.psli import dump_cross_corr_csv
    pilot, v = make_chain()
    wp = whitened_pilot(pilot, v)
    ps = placement_set(256, 6)
    r = build_two_tap_frame(pilot, v, 112, 0.8, 0.5, 6)
    path = tmp_path / "corr.csv"
    dump_cross_corr_csv(r, wp, ps, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "delta,corr_sq"
    assert len(lines) == 1 + len(ps.expected)
    full = tmp_path / "corr_full.csv"
    dump_cross_corr_csv(r, wp, ps, full, all_lags=True)
    assert len(full.read_text().splitlines()) == 1 + 257
