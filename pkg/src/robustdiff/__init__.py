"""Streaming robust first-order differentiation under bounded noise.

The adaptive differentiator estimates the noise amplitude from chord
residuals over a sliding window and sizes its finite-difference span
accordingly; companion modules provide baseline engines (fixed finite
difference, sliding-mode tracking differentiators), worst-case adversarial
signal constructions with certified error levels, and a benchmark harness
with a CLI.
"""

from .adaptive import (
    AdaptiveDiagnostics,
    AdaptiveDifferentiator,
    AdaptiveParams,
    BatchDiagnostics,
    SampleWindow,
    adaptive_step,
    estimate_noise,
    noise_estimate_kernel,
    q_value,
    run_adaptive_batch,
    select_window,
    tune_window_count,
)
from .adversaries import (
    AdversaryScenario,
    causal_pair,
    exact_trap,
    h_arc,
    quasi_exact_trap,
    sampled_zero_family,
    zero_family_sequence,
)
from .engines import (
    AdaptiveEngine,
    FiniteDifferenceEngine,
    FiniteDifferenceParams,
    REDExplicitEngine,
    REDImplicitEngine,
    REDParams,
    make_engine,
    run_engine,
)
from .harness import (
    AdversaryRef,
    EngineSpec,
    ErrorReport,
    Scenario,
    benchmark_scenario,
    random_admissible_draw,
    reference_benchmark,
    run_scenario,
    run_scenarios,
    worst_case_sweep,
)
from .signals import (
    NoiseScheduleSpec,
    NoiseSegment,
    SampledTrace,
    SignalClassParams,
    TestSignalSpec,
    compose,
    gen_noise,
    gen_test_signal,
    random_member_fl,
)

__version__ = "0.1.0"
