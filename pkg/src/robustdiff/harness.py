"""Scenario runner: signals/adversaries through engines, error statistics, CSV.

A Scenario bundles one input source (generated signal + noise schedule, or an
adversary construction) with a list of engines and run settings.  Reports
carry, per engine, the error series e_k = |f'(t_k) - y_k| and its running
suffix maximum M(t) = max_{t_k >= t} e_k, the empirical stand-in for the
worst-case error statistic.

All randomness flows from per-scenario seeds, so parallel execution returns
byte-identical artifacts to serial execution.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import adversaries as adv
from .adaptive import AdaptiveParams, BatchDiagnostics, run_adaptive_batch, tune_window_count
from .engines import make_engine, run_engine
from .signals import (
    NoiseScheduleSpec,
    NoiseSegment,
    SampledTrace,
    SignalClassParams,
    TestSignalSpec,
    compose,
    constant_segment,
    gen_noise,
    gen_test_signal,
    parabola_arc_segment,
    random_member_fl,
    step_segment,
    white_segment,
)

__all__ = [
    "EngineSpec",
    "AdversaryRef",
    "Scenario",
    "EngineResult",
    "ErrorReport",
    "SweepRow",
    "build_trace",
    "run_scenario",
    "run_scenarios",
    "random_admissible_draw",
    "worst_case_sweep",
    "benchmark_scenario",
    "reference_benchmark",
    "write_trace_csv",
    "write_summary_csv",
    "write_sweep_csv",
    "write_adaptive_diag_csv",
    "write_certificate_csv",
    "scenario_fingerprint",
    "scenario_to_dict",
    "DEFAULT_BENCH_SEED",
    "CSV_SCHEMA",
]

CSV_SCHEMA = 1
DEFAULT_BENCH_SEED = 20260808

ADVERSARY_KINDS = ("causal-pair", "exact-trap", "quasi-exact-trap", "sampled-zero")


@dataclass(frozen=True)
class EngineSpec:
    """Engine kind plus parameter overrides; L/N/dt default from the scenario."""

    kind: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    def resolved_label(self, index: int) -> str:
        if self.label:
            return self.label
        return f"{self.kind}{index}"


@dataclass(frozen=True)
class AdversaryRef:
    """Reference to one adversary construction as a scenario input source."""

    kind: str
    member: str = "plus"
    tau: float = 0.0
    r: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(
                f"unknown adversary kind {self.kind!r}; expected one of {ADVERSARY_KINDS}"
            )
        if self.member not in ("plus", "minus"):
            raise ValueError(f"member must be 'plus' or 'minus', got {self.member!r}")


@dataclass(frozen=True)
class Scenario:
    """One benchmark run: input source, engines, statistics settings."""

    name: str
    L: float
    N: float
    R: float
    dt: float
    duration: float
    engines: tuple[EngineSpec, ...]
    seed: int = 0
    t_start: float = 0.0
    signal: TestSignalSpec | None = None
    noise: NoiseScheduleSpec | None = None
    adversary: AdversaryRef | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "engines", tuple(self.engines))
        if (self.signal is None) == (self.adversary is None):
            raise ValueError("scenario needs exactly one of signal or adversary")
        if self.adversary is not None and self.noise is not None:
            raise ValueError("adversary scenarios carry their own noise")
        if not self.engines:
            raise ValueError("scenario needs at least one engine")
        if not (self.dt > 0 and self.duration > 0):
            raise ValueError("dt and duration must be > 0")
        # shared-dt contract: every engine runs on the scenario grid
        for es in self.engines:
            if "dt" in es.params and es.params["dt"] != self.dt:
                raise ValueError(
                    f"engine {es.kind!r} sets dt={es.params['dt']} but the trace uses {self.dt}"
                )

    @property
    def n(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    @property
    def class_params(self) -> SignalClassParams:
        return SignalClassParams(L=self.L, N=self.N, R=self.R, dt=self.dt)


def _build_adversary(s: Scenario) -> adv.AdversaryScenario:
    ref = s.adversary
    if ref.kind == "causal-pair":
        plus, minus = adv.causal_pair(s.L, s.N, ref.tau, s.dt, horizon=s.duration)
        return plus if ref.member == "plus" else minus
    if ref.kind == "exact-trap":
        return adv.exact_trap(s.L, s.N, ref.tau, s.dt, horizon=s.duration)
    if ref.kind == "quasi-exact-trap":
        return adv.quasi_exact_trap(s.L, s.N, s.dt, ref.r, horizon=s.duration)
    plus, minus = adv.sampled_zero_family(s.L, s.dt, s.n)
    return plus if ref.member == "plus" else minus


def build_trace(s: Scenario) -> SampledTrace:
    """Materialize the scenario's measurement trace with truth sequences."""
    if s.adversary is not None:
        return _build_adversary(s).trace
    base = gen_test_signal(s.signal, s.class_params, s.n)
    if s.noise is None:
        return base
    eta = gen_noise(s.noise, s.class_params, s.n)
    return compose(base, eta)


def _engine_params(es: EngineSpec, s: Scenario) -> dict:
    params = dict(es.params)
    params.setdefault("dt", s.dt)
    if es.kind in ("adaptive", "fd", "red"):
        params.setdefault("L", s.L)
    if es.kind == "fd":
        params.setdefault("N", s.N)
    return params


@dataclass(frozen=True)
class EngineResult:
    label: str
    kind: str
    params: dict
    y: np.ndarray
    e: np.ndarray
    max_from: np.ndarray
    diagnostics: BatchDiagnostics | None = None


@dataclass(frozen=True)
class ErrorReport:
    scenario: Scenario
    fingerprint: str
    trace: SampledTrace
    engines: tuple[EngineResult, ...]

    def times(self) -> np.ndarray:
        return self.trace.times()

    def start_index(self, t_start: float | None = None) -> int:
        t0 = self.scenario.t_start if t_start is None else t_start
        k0 = int(math.ceil(t0 / self.trace.dt - 1e-9))
        return min(max(k0, 0), self.trace.n - 1)

    def max_error_from(self, t_start: float | None = None) -> dict[str, float]:
        """Per-engine max of e_k over t_k >= t_start (scenario default)."""
        k0 = self.start_index(t_start)
        return {er.label: float(er.max_from[k0]) for er in self.engines}


def _suffix_max(e: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(e[::-1])[::-1]


def run_scenario(s: Scenario) -> ErrorReport:
    """Deterministic per seed; raises ValueError on inconsistent settings."""
    trace = build_trace(s)
    if trace.fdot is None:
        raise ValueError("scenario trace carries no true derivative")
    results = []
    for i, es in enumerate(s.engines):
        params = _engine_params(es, s)
        label = es.resolved_label(i)
        diag = None
        if es.kind == "adaptive":
            diag = run_adaptive_batch(trace.u, AdaptiveParams(**params))
            y = diag.y
        else:
            y = run_engine(make_engine(es.kind, params), trace.u)
        e = np.abs(trace.fdot - y)
        results.append(
            EngineResult(
                label=label, kind=es.kind, params=params, y=y, e=e,
                max_from=_suffix_max(e), diagnostics=diag,
            )
        )
    return ErrorReport(
        scenario=s, fingerprint=scenario_fingerprint(s), trace=trace,
        engines=tuple(results),
    )


def run_scenarios(scenarios: Sequence[Scenario], workers: int | None = None) -> list[ErrorReport]:
    """Run many scenarios; results are ordered and identical to serial runs."""
    if not workers or workers <= 1 or len(scenarios) <= 1:
        return [run_scenario(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, scenarios))


# ---------------------------------------------------------------------------
# seeded corpus


def _random_schedule(N: float, duration: float, rng: np.random.Generator) -> NoiseScheduleSpec:
    """Random mix of constant/step/arc/white segments covering [0, duration]."""
    segments: list[NoiseSegment] = []
    t = 0.0
    prev_level = float(rng.uniform(-N, N)) if N > 0 else 0.0
    while t < duration:
        dur = float(rng.uniform(0.15, 0.45)) * duration
        dur = max(dur, duration * 0.05)
        kind = rng.choice(("constant", "step", "uniform-white", "parabola-arc"))
        if N == 0.0 or kind == "constant":
            segments.append(constant_segment(t, dur, prev_level))
        elif kind == "step":
            to = float(rng.uniform(-N, N))
            segments.append(step_segment(t, dur, prev_level, to))
            prev_level = to
        elif kind == "uniform-white":
            segments.append(white_segment(t, dur, int(rng.integers(0, 2**62))))
            prev_level = float(rng.uniform(-N, N))
        else:
            segments.append(parabola_arc_segment(t, dur, float(rng.uniform(1.0, 2.5))))
            prev_level = -N
        t += dur
    return NoiseScheduleSpec(tuple(segments))


def random_admissible_draw(
    L: float, N: float, R: float, dt: float, n: int, rng: np.random.Generator
) -> SampledTrace:
    """One random member of the admissible input set: |f''| <= L, |eta| <= N."""
    sig_seed = int(rng.integers(0, 2**62))
    base = random_member_fl(L, R, sig_seed, dt, n)
    if N == 0.0:
        return base
    schedule = _random_schedule(N, n * dt, rng)
    eta = gen_noise(schedule, SignalClassParams(L=L, N=N, R=R, dt=dt), n)
    return compose(base, eta)


# ---------------------------------------------------------------------------
# worst-case sweep


@dataclass(frozen=True)
class SweepRow:
    L: float
    N: float
    dt: float
    k_bar: int
    gamma_bar: float
    k_start: int
    m_emp: float
    lower_edge: float
    upper_edge: float
    slack: float
    excess: float
    attainable: bool
    passed: bool


def _cell_inputs(
    L: float, N: float, dt: float, draws: int, R: float, rng: np.random.Generator
) -> tuple[list[SampledTrace], list[adv.AdversaryScenario], float]:
    """Adversary set plus seeded random corpus for one grid cell."""
    scenarios: list[adv.AdversaryScenario] = []
    horizon = 2.0 * math.sqrt(N / L) if N > 0 else 0.0
    if N > 0:
        plus, minus = adv.causal_pair(L, N, 0.0, dt)
        trap = adv.exact_trap(L, N, 0.0, dt)
        qtrap = adv.quasi_exact_trap(L, N, dt, r=1)
        scenarios += [plus, minus, trap, qtrap]
        horizon = max(horizon, plus.t_star, trap.t_star, qtrap.t_star)
    z_plus, z_minus = adv.sampled_zero_family(L, dt, max(int(horizon / dt) + 1, 24))
    scenarios += [z_plus, z_minus]
    horizon = max(horizon, z_plus.t_star) + 24 * dt
    n = int(round(horizon / dt)) + 1
    traces = [random_admissible_draw(L, N, R, dt, n, rng) for _ in range(draws)]
    return traces, scenarios, horizon


def worst_case_sweep(
    grid: Iterable[tuple[float, float, float]],
    draws: int = 200,
    seed: int = 0,
    gamma_bar: float = 2.0,
    R: float = 1.0,
    k_bar: int | None = None,
) -> list[SweepRow]:
    """Empirical max error of the adaptive engine versus the certified band.

    grid yields (L, N, dt) cells.  Per cell the window length follows the
    crude-bound tuning rule (unless k_bar is forced), the statistic starts at
    k*dt >= 2*sqrt(N/L), and the pass verdict allows one L*dt of grid slack
    beyond the band edges.
    """
    rows = []
    for idx, (L, N, dtv) in enumerate(grid):
        rng = np.random.Generator(np.random.PCG64(seed + 7919 * idx))
        kb = k_bar if k_bar is not None else tune_window_count(N, L, dtv)
        params = AdaptiveParams(L=L, dt=dtv, k_bar=kb, gamma_bar=gamma_bar)
        traces, scenarios, _ = _cell_inputs(L, N, dtv, draws, R, rng)
        k_start = max(int(math.ceil(2.0 * math.sqrt(N / L) / dtv - 1e-9)), 1)
        m_emp = 0.0
        attainable = any(not sc.vacuous for sc in scenarios if sc.name.endswith("trap"))
        for trace in traces + [sc.trace for sc in scenarios]:
            if trace.n <= k_start:
                continue
            diag = run_adaptive_batch(trace.u, params)
            err = np.abs(trace.fdot - diag.y)
            m_emp = max(m_emp, float(np.max(err[k_start:])))
        opt = 2.0 * math.sqrt(2.0 * N * L)
        lower = opt - 0.5 * L * dtv
        upper = opt + 0.5 * L * dtv
        slack = L * dtv
        passed = m_emp <= upper + slack
        if attainable:
            passed = passed and (m_emp >= lower - slack)
        rows.append(
            SweepRow(
                L=L, N=N, dt=dtv, k_bar=kb, gamma_bar=gamma_bar, k_start=k_start,
                m_emp=m_emp, lower_edge=lower, upper_edge=upper, slack=slack,
                excess=m_emp - opt, attainable=attainable, passed=passed,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# bundled benchmark scenario


def benchmark_noise_schedule(
    N: float, seed: int, lam2_a: float = 1.1, lam2_b: float = 1.96
) -> NoiseScheduleSpec:
    """The bundled 35 s noise program.

    Constant at +N while the engines converge, one matched parabola arc per
    sliding-mode tuning, two upward level jumps from -N to +N (the first one
    re-arms the level so the second arc starts tangentially from +N, like the
    first), then uniform white noise.  Segment boundaries are a repo choice;
    see README.
    """
    return NoiseScheduleSpec(
        (
            constant_segment(0.0, 10.0, N),
            parabola_arc_segment(10.0, 2.0, lam2_a),
            constant_segment(12.0, 2.0, -N),
            step_segment(14.0, 4.0, -N, N),
            parabola_arc_segment(18.0, 4.0, lam2_b),
            constant_segment(22.0, 4.0, -N),
            step_segment(26.0, 2.0, -N, N),
            white_segment(28.0, 7.5, seed),
        )
    )


def benchmark_scenario(seed: int = DEFAULT_BENCH_SEED) -> Scenario:
    """Headline comparison: adaptive vs two sliding-mode tunings, L = R = 1,
    N = 0.08, dt = 0.01, 35 s, statistics from t = 10 s."""
    N = 0.08
    return Scenario(
        name="bench",
        L=1.0,
        N=N,
        R=1.0,
        dt=0.01,
        duration=35.0,
        seed=seed,
        t_start=10.0,
        signal=TestSignalSpec.ramp_parabola(),
        noise=benchmark_noise_schedule(N, seed),
        engines=(
            EngineSpec("adaptive", {"k_bar": 200, "gamma_bar": 2.0}, label="adaptive"),
            EngineSpec("red", {"lam1": 1.5, "lam2": 1.1, "scheme": "implicit"},
                       label="red-1.5-1.1"),
            EngineSpec("red", {"lam1": 2.8, "lam2": 1.96, "scheme": "implicit"},
                       label="red-2.8-1.96"),
        ),
    )


def reference_benchmark(seed: int = DEFAULT_BENCH_SEED) -> tuple[ErrorReport, dict[str, float]]:
    """Run the bundled benchmark; returns (report, per-engine max error from 10 s)."""
    report = run_scenario(benchmark_scenario(seed))
    return report, report.max_error_from()


# ---------------------------------------------------------------------------
# CSV artifacts


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical plain-data form of a scenario (config round trips use it)."""
    out: dict = {
        "schema": CSV_SCHEMA,
        "signal": {"L": s.L, "R": s.R},
        "noise": {"N": s.N},
        "run": {
            "dt": s.dt, "duration": s.duration, "seed": s.seed,
            "t_start": s.t_start, "name": s.name,
        },
        "engines": [
            {"kind": es.kind, "label": es.resolved_label(i), **es.params}
            for i, es in enumerate(s.engines)
        ],
    }
    if s.signal is not None:
        sig = out["signal"]
        sig["kind"] = s.signal.kind
        if s.signal.kind == "polynomial":
            sig["coeffs"] = list(s.signal.coeffs)
        if s.signal.kind == "bang-bang":
            sig["switches"] = [list(sw) for sw in s.signal.switches]
            sig["f0"] = s.signal.f0
            sig["fdot0"] = s.signal.fdot0
    if s.noise is not None:
        out["noise"]["segments"] = [
            {
                k: v
                for k, v in (
                    ("kind", seg.kind), ("start", seg.start), ("duration", seg.duration),
                    ("level", seg.level), ("lam2", seg.lam2),
                    ("from_level", seg.from_level), ("to_level", seg.to_level),
                    ("seed", seg.seed),
                )
                if v is not None
            }
            for seg in s.noise.segments
        ]
    if s.adversary is not None:
        out["adversary"] = {
            "kind": s.adversary.kind, "member": s.adversary.member,
            "tau": s.adversary.tau, "r": s.adversary.r,
        }
    return out


def scenario_fingerprint(s: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, preamble: dict, header: list[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in preamble.items():
            fh.write(f"# {key}={val}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_trace_csv(report: ErrorReport, path) -> list[str]:
    """Per-sample table: truth, measurements, then y/e (+ adaptive internals)
    per engine.  Returns the header for convenience."""
    header = ["k", "t", "u", "f", "fdot"]
    cols = [
        np.arange(report.trace.n),
        report.times(),
        report.trace.u,
        report.trace.f if report.trace.f is not None else np.full(report.trace.n, np.nan),
        report.trace.fdot,
    ]
    for er in report.engines:
        header += [f"y_{er.label}", f"e_{er.label}"]
        cols += [er.y, er.e]
        if er.diagnostics is not None:
            header += [f"N_hat_{er.label}", f"gamma_{er.label}", f"T_hat_{er.label}"]
            cols += [er.diagnostics.N_hat, er.diagnostics.gamma, er.diagnostics.T_hat]
    preamble = {
        "robustdiff": CSV_SCHEMA,
        "scenario": report.scenario.name,
        "seed": report.scenario.seed,
        "config_hash": report.fingerprint,
    }
    _write_csv(path, preamble, header, zip(*cols))
    return header


SUMMARY_HEADER = ["scenario", "engine", "kind", "t_start", "max_error"]


def write_summary_csv(report: ErrorReport, path) -> None:
    maxima = report.max_error_from()
    rows = [
        [report.scenario.name, er.label, er.kind, report.scenario.t_start, maxima[er.label]]
        for er in report.engines
    ]
    preamble = {
        "robustdiff": CSV_SCHEMA,
        "seed": report.scenario.seed,
        "config_hash": report.fingerprint,
    }
    _write_csv(path, preamble, SUMMARY_HEADER, rows)


SWEEP_HEADER = [
    "L", "N", "dt", "k_bar", "gamma_bar", "k_start", "m_emp",
    "lower_edge", "upper_edge", "slack", "excess", "attainable", "passed",
]


def write_sweep_csv(rows: Sequence[SweepRow], path, seed: int,
                    config_hash: str | None = None) -> None:
    table = [
        [r.L, r.N, r.dt, r.k_bar, r.gamma_bar, r.k_start, r.m_emp,
         r.lower_edge, r.upper_edge, r.slack, r.excess, r.attainable, r.passed]
        for r in rows
    ]
    preamble = {"robustdiff": CSV_SCHEMA, "seed": seed}
    if config_hash is not None:
        preamble["config_hash"] = config_hash
    _write_csv(path, preamble, SWEEP_HEADER, table)


ADAPTIVE_DIAG_HEADER = ["k", "t", "u", "N_hat", "gamma", "T_hat", "y"]


def write_adaptive_diag_csv(diag: BatchDiagnostics, path) -> None:
    """The adaptive engine's per-step internals in the documented column order."""
    rows = zip(
        np.arange(diag.n), diag.times(), diag.u, diag.N_hat, diag.gamma,
        diag.T_hat, diag.y,
    )
    _write_csv(path, {"robustdiff": CSV_SCHEMA}, ADAPTIVE_DIAG_HEADER, rows)


CERTIFICATE_HEADER = ["name", "member", "L", "N", "dt", "t_star", "k_star", "bound", "vacuous"]


def write_certificate_csv(scenario: adv.AdversaryScenario, path) -> None:
    row = [
        scenario.name, scenario.meta.get("member", ""), scenario.L, scenario.N,
        scenario.dt, scenario.t_star, scenario.k_star, scenario.bound,
        scenario.vacuous,
    ]
    _write_csv(path, {"robustdiff": CSV_SCHEMA}, CERTIFICATE_HEADER, [row])
