"""Adaptive estimator/differentiator: frozen examples, invariants, identity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustdiff.adaptive import (
    GAMMA_BAR_MAX,
    AdaptiveDifferentiator,
    AdaptiveParams,
    SampleWindow,
    adaptive_step,
    estimate_noise,
    noise_estimate_kernel,
    q_value,
    run_adaptive_batch,
    select_window,
    tune_window_count,
)
from robustdiff.harness import random_admissible_draw


def make_params(**kw):
    base = dict(L=1.0, dt=0.01, k_bar=50, gamma_bar=2.0)
    base.update(kw)
    return AdaptiveParams(**base)


def brute_force_estimate(u: np.ndarray, L: float, dt: float, k_bar: float) -> float:
    """Independent reference: direct double loop over all (span, lag) pairs."""
    k = len(u) - 1
    w = k if math.isinf(k_bar) else min(k, int(k_bar))
    best = 0.0
    for ell in range(2, w + 1):
        for j in range(1, ell + 1):
            q = u[k - j] - u[k] + (u[k] - u[k - ell]) * (j / ell)
            best = max(best, abs(q) - 0.5 * L * dt * dt * j * (ell - j))
    return 0.5 * best


class TestParams:
    def test_defaults(self):
        p = AdaptiveParams(L=1.0, dt=0.01)
        assert p.k_bar == 200 and p.gamma_bar == 2.0

    @pytest.mark.parametrize("kw", [
        {"L": 0.0}, {"L": -1.0}, {"dt": 0.0}, {"k_bar": 1}, {"k_bar": 2.5},
        {"gamma_bar": 1.9}, {"gamma_bar": 3.0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            make_params(**kw)

    def test_gamma_bar_limits(self):
        make_params(gamma_bar=2.0)
        make_params(gamma_bar=GAMMA_BAR_MAX)

    def test_infinite_window_allowed(self):
        p = make_params(k_bar=math.inf)
        assert p.unbounded


class TestSampleWindow:
    def test_lag_reads_after_wraparound(self):
        w = SampleWindow(3)  # capacity 4
        for v in range(10):
            w.push(float(v))
        assert w.k == 9
        assert len(w) == 4
        assert [w.value_at_lag(j) for j in range(4)] == [9.0, 8.0, 7.0, 6.0]
        assert np.array_equal(w.newest_first(), [9.0, 8.0, 7.0, 6.0])

    def test_out_of_range_lag(self):
        w = SampleWindow(5)
        w.push(1.0)
        with pytest.raises(IndexError):
            w.value_at_lag(1)

    def test_unbounded_growth(self):
        w = SampleWindow(math.inf)
        for v in range(600):
            w.push(float(v))
        assert len(w) == 600
        assert w.value_at_lag(599) == 0.0


class TestQValue:
    def test_parabola_example(self):
        # samples of t^2/2 at dt = 1: [0, 0.5, 2, 4.5]; ell=2, j=1 -> -0.5
        w = SampleWindow(10)
        for v in (0.0, 0.5, 2.0, 4.5):
            w.push(v)
        assert q_value(w, 2, 1) == pytest.approx(-0.5, abs=1e-15)

    def test_j_equals_ell_is_zero(self):
        w = SampleWindow(10)
        for v in (3.0, -1.0, 2.0, 7.0):
            w.push(v)
        for ell in (1, 2, 3):
            assert q_value(w, ell, ell) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(2, 8), st.integers(1, 8))
    def test_affine_annihilated(self, a, b, ell, j):
        if j > ell:
            j = ell
        w = SampleWindow(10)
        for k in range(9):
            w.push(a * k * 0.1 + b)
        assert abs(q_value(w, ell, j)) <= 1e-12 * (1 + abs(a) + abs(b))

    def test_out_of_range(self):
        w = SampleWindow(10)
        for v in (0.0, 1.0, 2.0):
            w.push(v)
        with pytest.raises(ValueError):
            q_value(w, 3, 1)  # ell exceeds stored lags
        with pytest.raises(ValueError):
            q_value(w, 2, 0)
        with pytest.raises(ValueError):
            q_value(w, 1, 2)


class TestNoiseEstimate:
    def test_exact_parabola_short_window_is_zero(self):
        # dyadic samples of L t^2/2 with dt = 1; spans <= 2 stay float-exact
        u = np.array([0.0, 0.5, 2.0])
        assert noise_estimate_kernel(u[::-1], 1.0, 1.0) == 0.0

    def test_parabola_cancels_penalty(self):
        t = np.arange(40) * 0.01
        u = 0.5 * 3.0 * t * t
        assert noise_estimate_kernel(u[::-1], 3.0, 0.01) <= 1e-14

    def test_step_input_example(self):
        # L=0, dt=1, unbounded: step at k=5, evaluated at k=14 -> 0.45 at (10, 9)
        u = np.array([0.0] * 5 + [1.0] * 10)
        assert noise_estimate_kernel(u[::-1], 0.0, 1.0) == 0.45

    def test_short_windows_are_zero(self):
        assert noise_estimate_kernel(np.array([1.0]), 1.0, 0.1) == 0.0
        assert noise_estimate_kernel(np.array([1.0, 5.0]), 1.0, 0.1) == 0.0

    def test_matches_brute_force(self):
        rng = np.random.Generator(np.random.PCG64(3))
        for _ in range(30):
            n = int(rng.integers(3, 24))
            u = rng.normal(size=n)
            L = float(rng.uniform(0, 2))
            dt = float(rng.uniform(0.01, 0.5))
            kern = noise_estimate_kernel(u[::-1], L, dt)
            assert kern == brute_force_estimate(u, L, dt, math.inf)

    def test_window_wrapper(self):
        p = make_params(k_bar=8)
        w = SampleWindow(p.k_bar)
        u = np.array([0.0, 0.1, -0.1, 0.2, 0.0, 0.3])
        for v in u:
            w.push(v)
        assert estimate_noise(w, p) == brute_force_estimate(u, p.L, p.dt, 8)

    def test_negative_L_rejected(self):
        with pytest.raises(ValueError):
            noise_estimate_kernel(np.zeros(5), -1.0, 0.1)


class TestSelectWindow:
    def test_zero_estimate(self):
        gamma, t_hat = select_window(0.0, make_params(), k=5)
        assert gamma == 1.0 and t_hat == make_params().dt

    def test_candidate_ladder(self):
        # 2*sqrt(N_hat/L) = 2.5*dt -> j candidates {3,4,5}, smallest gamma 1.2
        p = make_params()
        n_hat = p.L * (1.25 * p.dt) ** 2
        gamma, t_hat = select_window(n_hat, p, k=100)
        assert gamma == pytest.approx(1.2, abs=1e-12)
        assert t_hat == 3 * p.dt

    def test_k0_gives_zero_window(self):
        gamma, t_hat = select_window(0.3, make_params(), k=0)
        assert t_hat == 0.0

    def test_window_cap(self):
        p = make_params(k_bar=4)
        _, t_hat = select_window(100.0, p, k=50)
        assert t_hat == 4 * p.dt

    def test_gamma_hook(self):
        calls = {}

        def widest(j_lo, j_hi):
            calls["range"] = (j_lo, j_hi)
            return j_hi

        p = make_params(gamma_choice=widest)
        n_hat = p.L * (1.25 * p.dt) ** 2
        gamma, t_hat = select_window(n_hat, p, k=100)
        assert calls["range"] == (3, 5)
        assert t_hat == 5 * p.dt and gamma == pytest.approx(2.0, abs=1e-12)

    def test_gamma_hook_validated(self):
        p = make_params(gamma_choice=lambda lo, hi: hi + 1)
        with pytest.raises(ValueError, match="gamma_choice"):
            select_window(p.L * (1.25 * p.dt) ** 2, p, k=100)


class TestAdaptiveStep:
    def test_first_output_zero(self):
        eng = AdaptiveDifferentiator(make_params())
        d = adaptive_step(eng, 123.456)
        assert d.y == 0.0 and d.k == 0 and d.T_hat == 0.0

    def test_ramp_exact(self):
        p = make_params()
        eng = AdaptiveDifferentiator(p)
        t = np.arange(60) * p.dt
        for k, v in enumerate(t):  # u = f = t
            d = eng.step(v)
            if k >= 1:
                assert d.y == pytest.approx(1.0, abs=1e-9)

    def test_noise_free_parabola_error_half_step(self):
        p = make_params(L=2.0)
        eng = AdaptiveDifferentiator(p)
        t = np.arange(80) * p.dt
        u = 0.5 * p.L * t * t
        for k, v in enumerate(u):
            d = eng.step(v)
            if k >= 1:
                assert abs(d.y - p.L * t[k]) == pytest.approx(0.5 * p.L * p.dt, abs=1e-12)
                assert d.window_steps == 1

    def test_reset_bit_exact(self):
        p = make_params(k_bar=12)
        rng = np.random.Generator(np.random.PCG64(11))
        u = rng.normal(size=100)
        eng = AdaptiveDifferentiator(p)
        first = [eng.step(v).y for v in u]
        eng.reset()
        second = [eng.step(v).y for v in u]
        assert first == second


class TestInvariants:
    def _random_case(self, rng):
        L = float(rng.uniform(0.1, 4.0))
        N = float(rng.uniform(1e-3, 0.5))
        dt = float(rng.uniform(0.005, 0.1))
        k_bar = int(rng.integers(2, 30))
        gamma_bar = float(rng.uniform(2.0, GAMMA_BAR_MAX))
        n = int(rng.integers(8, 60))
        p = AdaptiveParams(L=L, dt=dt, k_bar=k_bar, gamma_bar=gamma_bar)
        trace = random_admissible_draw(L, N, 1.0, dt, n, rng)
        return p, N, trace

    def test_estimate_and_window_invariants(self):
        rng = np.random.Generator(np.random.PCG64(99))
        for _ in range(200):
            p, N, trace = self._random_case(rng)
            d = run_adaptive_batch(trace.u, p)
            assert d.N_hat[0] == 0.0 and (d.n < 2 or d.N_hat[1] == 0.0)
            assert np.all(d.N_hat >= 0.0)
            assert np.all(d.N_hat <= N)
            ks = np.arange(d.n)
            # window is an exact multiple of dt, capped by elapsed time
            assert np.all(d.T_hat == d.window_steps * p.dt)
            assert np.all(d.window_steps[1:] >= 1)
            assert np.all(d.window_steps <= np.minimum(ks, int(p.k_bar)))
            assert np.all((d.gamma >= 1.0) & (d.gamma <= p.gamma_bar))
            # unit window iff the no-stretch branch was taken (k >= 2)
            root = 2.0 * np.sqrt(d.N_hat / p.L)
            branch_one = root <= p.dt
            sel = ks >= min(2, int(p.k_bar))
            assert np.array_equal(d.window_steps[sel] == 1, branch_one[sel])

    def test_per_step_error_bound(self):
        # |y_k - f'(t_k)| <= 2N/T_hat + L*T_hat/2 whenever t_k >= T_hat > 0
        rng = np.random.Generator(np.random.PCG64(123))
        for _ in range(150):
            p, N, trace = self._random_case(rng)
            d = run_adaptive_batch(trace.u, p)
            err = np.abs(trace.fdot - d.y)
            bound = 2.0 * N / d.T_hat[1:] + 0.5 * p.L * d.T_hat[1:]
            assert np.all(err[1:] <= bound + 1e-9)


class TestBatchStreamingIdentity:
    @pytest.mark.parametrize("k_bar", [2, 3, 7, 50, math.inf])
    def test_bit_identical(self, k_bar):
        rng = np.random.Generator(np.random.PCG64(17))
        p = AdaptiveParams(L=0.7, dt=0.02, k_bar=k_bar, gamma_bar=2.2)
        u = np.cumsum(rng.normal(size=150)) * 0.01
        batch = run_adaptive_batch(u, p)
        eng = AdaptiveDifferentiator(p)
        diags = [eng.step(v) for v in u]
        assert np.array_equal(batch.y, np.array([g.y for g in diags]))
        assert np.array_equal(batch.N_hat, np.array([g.N_hat for g in diags]))
        assert np.array_equal(batch.T_hat, np.array([g.T_hat for g in diags]))
        assert np.array_equal(batch.gamma, np.array([g.gamma for g in diags]))

    def test_prefix_stability(self):
        # causality: outputs on a shared prefix agree bitwise
        p = make_params(k_bar=10)
        rng = np.random.Generator(np.random.PCG64(4))
        u1 = rng.normal(size=80)
        u2 = u1.copy()
        u2[50:] += 3.0
        a = run_adaptive_batch(u1, p)
        b = run_adaptive_batch(u2, p)
        assert np.array_equal(a.y[:50], b.y[:50])


class TestTuning:
    def test_example(self):
        # sqrt(2*0.08/1) = 0.4 -> k_bar*dt must exceed 0.41
        kb = tune_window_count(0.08, 1.0, 0.01)
        assert kb == 42
        assert kb * 0.01 > 0.41
        assert (kb - 1) * 0.01 <= 0.41 + 1e-12

    def test_exact_integer_boundary(self):
        # sqrt(2n/L)/dt integral: strict inequality forces one step more
        kb = tune_window_count(0.02, 1.0, 0.1)  # sqrt(0.04)/0.1 = 2 -> x = 3
        assert kb == 4

    def test_minimum(self):
        assert tune_window_count(0.0, 1.0, 0.1) == 2

    def test_guarantee_covers_bound(self):
        for n_bar, L, dt in [(0.08, 1.0, 0.01), (1.0, 0.5, 0.02), (3.0, 2.0, 0.004)]:
            kb = tune_window_count(n_bar, L, dt)
            assert 0.5 * L * (dt * (kb - 1)) ** 2 > n_bar
