"""Engine contracts: finite difference, sliding-mode schemes, registry."""

import math
import warnings

import numpy as np
import pytest

from robustdiff.adversaries import causal_pair
from robustdiff.engines import (
    FiniteDifferenceParams,
    REDExplicitEngine,
    REDImplicitEngine,
    REDParams,
    make_engine,
    run_engine,
)
from robustdiff.harness import random_admissible_draw


def red_params(lam1=3.5, lam2=1.1, L=1.0, dt=0.001, scheme="explicit"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return REDParams(lam1=lam1, lam2=lam2, L=L, dt=dt, scheme=scheme)


class TestFiniteDifference:
    def test_window_rounding_example(self):
        # 2*sqrt(N/L)/dt = 4 for N = L = 1, dt = 0.5
        assert FiniteDifferenceParams(L=1.0, N=1.0, dt=0.5).m == 4

    def test_window_floor(self):
        assert FiniteDifferenceParams(L=1.0, N=1e-9, dt=0.5).m == 1

    def test_ramp_exact_after_window(self):
        eng = make_engine("fd", {"L": 1.0, "N": 0.01, "dt": 0.1})
        m = eng.params.m
        t = np.arange(40) * 0.1
        y = run_engine(eng, t)
        assert np.all(y[:m] == 0.0)
        assert np.allclose(y[m:], 1.0, atol=1e-12)

    def test_parabola_closed_form_error(self):
        # error on f = L t^2/2 is exactly L*(m*dt)/2 once the window fills
        L, N, dt = 2.0, 0.5, 0.01
        eng = make_engine("fd", {"L": L, "N": N, "dt": dt})
        m = eng.params.m
        t = np.arange(400) * dt
        y = run_engine(eng, 0.5 * L * t * t)
        err = np.abs(L * t - y)[m:]
        assert np.allclose(err, 0.5 * L * m * dt, atol=1e-10)

    def test_streaming_matches_vectorized(self):
        eng = make_engine("fd", {"L": 1.0, "N": 0.04, "dt": 0.01})
        rng = np.random.Generator(np.random.PCG64(0))
        u = rng.normal(size=120)
        vec = eng.run(u)
        eng.reset()
        stepped = np.array([eng.step(v) for v in u])
        assert np.array_equal(vec, stepped)

    def test_causal_adversary_attains_design_error(self):
        # max error after the transient equals 2*sqrt(N*L) on the zero-input pair
        L = N = 1.0
        dt = 0.01
        plus, _ = causal_pair(L, N, 0.0, dt)
        eng = make_engine("fd", {"L": L, "N": N, "dt": dt})
        y = run_engine(eng, plus.trace.u)
        err = np.abs(plus.trace.fdot - y)
        m = eng.params.m
        assert np.max(err[m:]) == pytest.approx(2.0 * math.sqrt(N * L), rel=1e-12)

    def test_error_bound_under_admissible_inputs(self):
        # |y - f'| <= 2N/(m dt) + L m dt / 2 for k >= m
        L, N, dt = 1.0, 0.08, 0.01
        eng = make_engine("fd", {"L": L, "N": N, "dt": dt})
        m = eng.params.m
        bound = 2 * N / (m * dt) + 0.5 * L * m * dt
        rng = np.random.Generator(np.random.PCG64(21))
        for _ in range(40):
            trace = random_admissible_draw(L, N, 1.0, dt, m + 60, rng)
            y = run_engine(eng, trace.u)
            err = np.abs(trace.fdot - y)[m:]
            assert np.max(err) <= bound + 1e-9


class TestREDParams:
    def test_lam2_must_exceed_one(self):
        with pytest.raises(ValueError):
            red_params(lam2=0.9)
        with pytest.raises(ValueError):
            red_params(lam2=1.0)

    def test_scheme_validated(self):
        with pytest.raises(ValueError):
            red_params(scheme="midpoint")

    def test_low_gain_warns_but_builds(self):
        with pytest.warns(RuntimeWarning, match="convergence-gain"):
            REDParams(lam1=1.5, lam2=1.1, L=1.0, dt=0.01)


class TestREDExplicit:
    def test_zero_input_equilibrium(self):
        eng = REDExplicitEngine(red_params())
        ys = [eng.step(0.0) for _ in range(100)]
        assert ys == [0.0] * 100

    def test_ramp_converges_and_stays(self):
        # u = R t: |y - R| drops below 1e-2 in finite time with no later
        # escape within the horizon (convergence is oscillatory, so measure
        # from the sustained entry)
        R = 2.0
        eng = REDExplicitEngine(red_params(lam1=1.5, lam2=1.1))
        n = 30_000
        t = np.arange(n) * 0.001
        y = eng.run(R * t)
        err = np.abs(y - R)
        violations = np.nonzero(err >= 1e-2)[0]
        assert violations.size > 0
        settled = violations[-1] + 1
        assert settled < 0.5 * n
        assert np.all(err[settled:] < 1e-2)

    def test_convergence_time_scale(self):
        # for lam1 >= sqrt(8 lam2) tracking settles by ~R/((lam2-1)L) + margin
        lam2, L, R = 1.1, 1.0, 1.0
        eng = REDExplicitEngine(red_params(lam1=3.0, lam2=lam2, L=L))
        t_r = R / ((lam2 - 1.0) * L)
        n = int((t_r * 1.5) / 0.001)
        t = np.arange(n) * 0.001
        y = eng.run(R * t)
        settle = int(t_r * 1.2 / 0.001)
        assert np.all(np.abs(y[settle:] - R) < 5e-2)


class TestREDImplicit:
    def test_zero_input_no_motion(self):
        eng = REDImplicitEngine(red_params(scheme="implicit"))
        ys = [eng.step(0.0) for _ in range(200)]
        assert ys == [0.0] * 200

    def test_parabola_no_chatter_and_small_error(self):
        # noise-free u = t^2/2: implicit settles to the one-step chord with
        # O(dt) error and no sign-alternating chatter, unlike explicit
        dt = 0.01
        t = np.arange(3000) * dt
        u = 0.5 * t * t
        imp = REDImplicitEngine(red_params(lam1=1.5, lam2=1.1, dt=dt, scheme="implicit"))
        exp = REDExplicitEngine(red_params(lam1=1.5, lam2=1.1, dt=dt))
        err_imp = t - imp.run(u)
        err_exp = t - exp.run(u)
        tail = slice(1500, None)
        assert np.max(np.abs(err_imp[tail])) < 5 * dt
        assert np.var(err_imp[tail]) < np.var(err_exp[tail])
        # no sign alternation in the implicit tail
        signs = np.sign(err_imp[tail])
        assert np.all(signs[signs != 0] == signs[signs != 0][0])

    def test_sliding_band_reached_from_offset(self):
        eng = REDImplicitEngine(red_params(lam1=4.0, lam2=1.5, dt=0.01, scheme="implicit"))
        t = np.arange(4000) * 0.01
        y = eng.run(3.0 * t + 1.0)
        assert abs(y[-1] - 3.0) < 0.05


class TestRefinedReference:
    def test_schemes_track_refined_explicit_after_convergence(self):
        # both discretizations agree with a 10x-refined explicit reference
        # within O(dt) on a noise-free polynomial input
        dt = 0.01
        n = 3000
        t = np.arange(n) * dt
        u_fn = lambda x: 0.3 * x * x + 0.5 * x  # |f''| = 0.6 <= L
        fine = REDExplicitEngine(red_params(lam1=4.0, lam2=1.6, dt=dt / 10))
        t_fine = np.arange(n * 10) * (dt / 10)
        y_ref = fine.run(u_fn(t_fine))[9::10]
        for scheme, cls in (("explicit", REDExplicitEngine), ("implicit", REDImplicitEngine)):
            eng = cls(red_params(lam1=4.0, lam2=1.6, dt=dt, scheme=scheme))
            y = eng.run(u_fn(t))
            tail = slice(n // 2, None)
            assert np.max(np.abs(y[tail] - y_ref[tail])) < 10 * dt


class TestRegistry:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown engine kind"):
            make_engine("kalman", {})

    def test_red_param_error_through_registry(self):
        with pytest.raises(ValueError):
            make_engine("red", {"lam1": 2.0, "lam2": 0.9, "L": 1.0, "dt": 0.01})

    def test_fd_window_through_registry(self):
        eng = make_engine("fd", {"N": 1.0, "L": 1.0, "dt": 0.5})
        assert eng.params.m == 4

    def test_adaptive_reset_determinism(self):
        eng = make_engine("adaptive", {"L": 1.0, "dt": 0.01, "k_bar": 20})
        rng = np.random.Generator(np.random.PCG64(8))
        u = rng.normal(size=80)
        first = [eng.step(v) for v in u]
        eng.reset()
        second = [eng.step(v) for v in u]
        assert first == second

    def test_adaptive_engine_delegates_to_core(self):
        # the engine adapter reports exactly the core stepper's output
        from robustdiff.adaptive import AdaptiveDifferentiator, AdaptiveParams

        p = AdaptiveParams(L=1.0, dt=0.01, k_bar=15)
        eng = make_engine("adaptive", {"L": 1.0, "dt": 0.01, "k_bar": 15})
        core = AdaptiveDifferentiator(p)
        rng = np.random.Generator(np.random.PCG64(44))
        for v in rng.normal(size=60):
            assert eng.step(v) == core.step(v).y
        assert eng.diagnostics() == core.diagnostics()

    @pytest.mark.parametrize("kind,params", [
        ("adaptive", {"L": 1.0, "dt": 0.01, "k_bar": 12}),
        ("fd", {"L": 1.0, "N": 0.05, "dt": 0.01}),
        ("red", {"lam1": 4.0, "lam2": 1.5, "L": 1.0, "dt": 0.01, "scheme": "explicit"}),
        ("red", {"lam1": 4.0, "lam2": 1.5, "L": 1.0, "dt": 0.01, "scheme": "implicit"}),
    ])
    def test_causality_prefix_fuzz(self, kind, params):
        rng = np.random.Generator(np.random.PCG64(31))
        for _ in range(10):
            n = int(rng.integers(20, 80))
            cut = int(rng.integers(5, n - 1))
            u1 = rng.normal(size=n)
            u2 = u1.copy()
            u2[cut:] = rng.normal(size=n - cut) + 5.0
            y1 = run_engine(make_engine(kind, params), u1)
            y2 = run_engine(make_engine(kind, params), u2)
            assert np.array_equal(y1[:cut], y2[:cut])
