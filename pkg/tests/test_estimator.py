import itertools

import numpy as np
import pytest

from ftnim.estimator import (build_design, cached_design, interpolate,
                             load_pilot, lsse_estimate, mse_predict,
                             pilot_search_exhaustive, pilot_search_relaxed,
                             save_pilot)
from ftnim.modem import BPSK, QPSK
from ftnim.waveform import PulseConfig, TapSet, whitening_filter


def small_chain(l_h=2, l_c=2, tau=0.84, seed=0, n_p=12):
    v = whitening_filter(PulseConfig(beta=0.35, tau=tau, l_h=l_h))
    rng = np.random.default_rng(seed)
    pilot = rng.choice([-1.0, 1.0], n_p).astype(complex)
    return pilot, v


def simulate_useful_segment(pilot, v, c, n_sp=40, n=160, sigma=0.0, rng=None,
                            data=None):
    """Whitened received samples over the useful pilot segment."""
    l_h = len(v.taps)
    l_c = len(c) - 1
    n_p = len(pilot)
    frame = np.zeros(n, dtype=complex)
    frame[n_sp:n_sp + n_p] = pilot
    if data is not None:
        mask = np.ones(n, dtype=bool)
        mask[n_sp:n_sp + n_p] = False
        frame[mask] = data[:n - n_p]
    s_tilde = np.convolve(frame, v.taps)[:n]
    r = np.zeros(n, dtype=complex)
    for l in range(l_c + 1):
        r[l:] += c[l] * s_tilde[:n - l]
    if sigma > 0:
        r += sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return r[n_sp + l_h + l_c - 1:n_sp + n_p]


class TestBuildDesign:
    def test_matrix_dimensions(self):
        pilot, v = small_chain(l_h=3, l_c=2, n_p=12)
        d = build_design(pilot, v, 3, 2)
        assert d.t_matrix.shape == (12 - 3 - 2 + 1, 3 + 2)
        assert d.v_matrix.shape == (3 + 2, 2 + 1)
        assert d.pinv.shape == (3, 12 - 3 - 2 + 1)

    def test_left_inverse_identity(self):
        pilot, v = small_chain(l_h=3, l_c=2, n_p=12)
        d = build_design(pilot, v, 3, 2)
        a = d.t_matrix @ d.v_matrix
        np.testing.assert_allclose(d.pinv @ a, np.eye(3), atol=1e-9)

    def test_pinv_matches_normal_equations(self):
        pilot, v = small_chain(l_h=3, l_c=2, n_p=12, seed=4)
        d = build_design(pilot, v, 3, 2)
        a = d.t_matrix @ d.v_matrix
        ref = np.linalg.solve(a.conj().T @ a, a.conj().T)
        np.testing.assert_allclose(d.pinv, ref, atol=1e-9)

    def test_memoryless_degenerate_case(self):
        # v = unit impulse, no channel memory: estimation collapses to a
        # normalized matched correlation with the pilot
        pilot = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0], dtype=complex)
        d = build_design(pilot, TapSet(np.array([1.0])), 1, 0)
        seg = simulate_useful_segment(pilot, TapSet(np.array([1.0])),
                                      np.array([0.7 - 0.2j]), n_sp=10, n=40)
        est = lsse_estimate(seg, d)
        assert est.c_hat[0] == pytest.approx(0.7 - 0.2j, abs=1e-12)

    def test_too_short_pilot_rejected(self):
        pilot, v = small_chain(l_h=3, l_c=2, n_p=12)
        with pytest.raises(ValueError):
            build_design(pilot[:4], v, 3, 2)


class TestLsseEstimate:
    def test_noiseless_exact(self):
        pilot, v = small_chain(l_h=2, l_c=2, n_p=16, seed=2)
        d = build_design(pilot, v, 2, 2)
        rng = np.random.default_rng(0)
        c = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        seg = simulate_useful_segment(pilot, v, c)
        est = lsse_estimate(seg, d)
        np.testing.assert_allclose(est.c_hat, c, atol=1e-10)

    def test_noiseless_exact_with_surrounding_data(self):
        # data symbols outside the pilot must not leak into the useful segment
        pilot, v = small_chain(l_h=2, l_c=2, n_p=16, seed=2)
        d = build_design(pilot, v, 2, 2)
        rng = np.random.default_rng(1)
        c = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        data = rng.choice([-1.0, 1.0], 160) + 0j
        seg = simulate_useful_segment(pilot, v, c, data=data)
        np.testing.assert_allclose(lsse_estimate(seg, d).c_hat, c, atol=1e-10)

    def test_unbiased_and_variance_matches_prediction(self):
        pilot, v = small_chain(l_h=2, l_c=2, n_p=16, seed=2)
        d = build_design(pilot, v, 2, 2)
        rng = np.random.default_rng(3)
        c = np.array([0.6 + 0.1j, -0.3j, 0.25 - 0.4j])
        sigma = 0.5
        trials = 10_000
        err = np.zeros(3, dtype=complex)
        sq = 0.0
        for _ in range(trials):
            seg = simulate_useful_segment(pilot, v, c, sigma=sigma, rng=rng)
            e = lsse_estimate(seg, d).c_hat - c
            err += e
            sq += np.sum(np.abs(e) ** 2)
        predicted = mse_predict(d, sigma ** 2)
        assert sq / trials == pytest.approx(predicted, rel=0.05)
        # per-tap bias within 3 standard errors
        per_tap_std = np.sqrt(predicted / 3.0 / trials)
        assert np.all(np.abs(err / trials) < 3.0 * per_tap_std)

    def test_length_mismatch(self):
        pilot, v = small_chain(l_h=2, l_c=2, n_p=16)
        d = build_design(pilot, v, 2, 2)
        with pytest.raises(ValueError):
            lsse_estimate(np.zeros(5, dtype=complex), d)


class TestMsePredict:
    def test_noiseless_is_zero(self):
        pilot, v = small_chain()
        d = build_design(pilot, v, 2, 2)
        assert mse_predict(d, 0.0) == 0.0

    def test_linear_scaling(self):
        pilot, v = small_chain()
        d = build_design(pilot, v, 2, 2)
        assert mse_predict(d, 2.0) == pytest.approx(2.0 * mse_predict(d, 1.0))

    def test_trace_formula(self):
        pilot, v = small_chain(seed=7)
        d = build_design(pilot, v, 2, 2)
        ref = np.trace(d.pinv @ d.pinv.conj().T).real
        assert mse_predict(d, 1.0) == pytest.approx(ref, rel=1e-12)


class TestPilotSearch:
    def test_exhaustive_matches_independent_enumeration(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.84, l_h=2))
        best = pilot_search_exhaustive(BPSK, 8, v, 2, 2)
        # independent enumeration over all 256 sequences via the raw
        # normal-equations formula
        best_mse = np.inf
        vt = v.taps
        for bits in itertools.product([1.0, -1.0], repeat=8):
            p = np.array(bits, dtype=complex)
            rows = 8 - 2 - 2 + 1
            t = np.array([[p[2 + 2 - 1 + r - j] for j in range(4)]
                          for r in range(rows)])
            vm = np.zeros((4, 3), dtype=complex)
            for l in range(3):
                vm[l:l + 2, l] = vt
            a = t @ vm
            gram = a.conj().T @ a
            if np.linalg.matrix_rank(gram) < 3:
                continue   # degenerate sequence cannot resolve all taps
            mse = np.trace(np.linalg.inv(gram)).real
            if mse < best_mse:
                best_mse = mse
        assert best.predicted_mse == pytest.approx(best_mse, rel=1e-9)

    def test_exhaustive_beats_random_sequences(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.84, l_h=2))
        best = pilot_search_exhaustive(BPSK, 8, v, 2, 2)
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = rng.choice([-1.0, 1.0], 8).astype(complex)
            try:
                d = build_design(p, v, 2, 2)
            except ValueError:
                continue   # rank-deficient random draw
            assert best.predicted_mse <= d.predicted_mse + 1e-12

    def test_search_space_overflow(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.84, l_h=2))
        with pytest.raises(ValueError, match="relaxed"):
            pilot_search_exhaustive(QPSK, 16, v, 2, 2, limit=2 ** 20)

    def test_relaxed_close_to_exhaustive_optimum(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.84, l_h=2))
        best = pilot_search_exhaustive(BPSK, 8, v, 2, 2)
        relaxed = pilot_search_relaxed(BPSK, 8, v, 2, 2, restarts=100, seed=0)
        assert relaxed.predicted_mse <= 1.05 * best.predicted_mse

    def test_relaxed_dominates_its_initializations(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.8, l_h=2))
        relaxed = pilot_search_relaxed(BPSK, 10, v, 2, 2, restarts=20, seed=3)
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta = rng.uniform(0, 2 * np.pi, 10)
            rounded = np.where(np.cos(theta) >= 0, 1.0, -1.0).astype(complex)
            d = build_design(rounded, v, 2, 2)
            assert relaxed.predicted_mse <= d.predicted_mse + 1e-12

    def test_relaxed_deterministic(self):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.8, l_h=2))
        a = pilot_search_relaxed(BPSK, 8, v, 2, 2, restarts=5, seed=11)
        b = pilot_search_relaxed(BPSK, 8, v, 2, 2, restarts=5, seed=11)
        np.testing.assert_array_equal(a.pilot, b.pilot)


class TestInterpolate:
    def test_constant_trajectory(self):
        c = np.array([0.3 + 0.1j, -0.2j])
        traj = interpolate(c, c, 16)
        assert np.all(traj == c)

    def test_endpoint_exact(self):
        a = np.array([1.0 + 1j, 0.5, -0.25j])
        b = np.array([-0.5 + 0.2j, 1.5, 0.75])
        traj = interpolate(a, b, 256)
        np.testing.assert_allclose(traj[0], a, atol=1e-15)
        np.testing.assert_allclose(traj[256], b, atol=1e-12)

    def test_midpoint(self):
        a = np.array([1.0, 1j])
        b = np.array([0.0, -1j])
        traj = interpolate(a, b, 64)
        np.testing.assert_allclose(traj[32], (a + b) / 2.0, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            interpolate(np.zeros(2), np.zeros(3), 8)


class TestPilotFiles:
    def test_save_load_roundtrip(self, tmp_path):
        pilot, v = small_chain(n_p=16)
        path = tmp_path / "pilot.txt"
        save_pilot(path, pilot, BPSK)
        back = load_pilot(path, BPSK)
        np.testing.assert_array_equal(back, pilot)

    def test_comments_and_blanks_allowed(self, tmp_path):
        path = tmp_path / "pilot.txt"
        path.write_text("# header\n0\n\n1\n0\n")
        np.testing.assert_array_equal(load_pilot(path, BPSK), [1.0, -1.0, 1.0])

    def test_bad_index_rejected(self, tmp_path):
        path = tmp_path / "pilot.txt"
        path.write_text("0\n5\n")
        with pytest.raises(ValueError):
            load_pilot(path, BPSK)

    def test_cached_design_roundtrip(self, tmp_path):
        v = whitening_filter(PulseConfig(beta=0.35, tau=0.8, l_h=2))
        first = cached_design(tmp_path, BPSK, 8, 0.8, 0.35, v, 2, 2,
                              restarts=3, seed=0)
        files = list(tmp_path.glob("*.txt"))
        assert len(files) == 1
        second = cached_design(tmp_path, BPSK, 8, 0.8, 0.35, v, 2, 2,
                               restarts=3, seed=99)   # must load, not re-search
        np.testing.assert_array_equal(first.pilot, second.pilot)
