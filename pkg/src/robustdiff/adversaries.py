"""Worst-case signal/noise constructions with certified error levels.

Each constructor returns sampled scenarios whose geometry forces a floor on
the error of whole differentiator classes at a certified time instant:

  causal_pair         two (f, eta) pairs indistinguishable from the zero
                      measurement stream up to time T; any causal engine errs
                      at least 2*sqrt(N*L) on one member at T
  exact_trap          a smooth measurement stream equal to a valid noise-free
                      signal while the true derivative runs opposite; exact
                      engines err at least 2*sqrt(2*N*L) at T
  quasi_exact_trap    grid-aligned variant certifying 2*sqrt(2*N*L) - L*dt/2
                      for quasi-exact sample-based engines
  sampled_zero_family a pair +/-f of nonzero signals whose samples all vanish;
                      certified per-step floor grows to L*dt/2

Every constructor verifies its own output numerically: discrete second
differences of f within L*dt^2 and |eta| <= N (small float slack).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signals import SampledTrace

__all__ = [
    "AdversaryScenario",
    "h_arc",
    "causal_pair",
    "exact_trap",
    "quasi_exact_trap",
    "sampled_zero_family",
    "zero_family_sequence",
    "zero_family_fine",
    "verify_membership",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class AdversaryScenario:
    """A sampled (f, eta) pair with its certificate.

    bound is the certified error level at the certified grid instant
    t_star = k_star*dt; vacuous marks certificates that carry no content for
    the given parameters (see quasi_exact_trap).
    """

    name: str
    trace: SampledTrace
    t_star: float
    k_star: int
    bound: float
    L: float
    N: float
    vacuous: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.trace.dt


def h_arc(kappa: float, L: float, t):
    """C^1 ramp-up arc on [0, 2*kappa]: L*t^2/2, then L*kappa^2 - L*(t-2k)^2/2."""
    if kappa <= 0 or L < 0:
        raise ValueError("kappa must be > 0 and L >= 0")
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < -1e-12) or np.any(arr > 2.0 * kappa + 1e-12):
        raise ValueError(f"t outside [0, {2 * kappa}]")
    first = arr < kappa
    out = np.where(
        first,
        0.5 * L * arr * arr,
        L * kappa * kappa - 0.5 * L * (arr - 2.0 * kappa) ** 2,
    )
    return float(out) if np.isscalar(t) else out


def _dig_eval(t: np.ndarray, L: float, N: float, tau: float, kappa: float, scale: float):
    """The delayed dig-and-recover profile used by both trap families.

    Zero until tau, a scaled downward arc reaching -scale*N at tau + 2*kappa,
    then full-curvature recovery -scale*N + L*(t - tau - 2k)^2/2.  Returns
    (values, derivative).
    """
    x = t - tau
    g = np.zeros_like(t)
    dg = np.zeros_like(t)
    in_arc = (x >= 0.0) & (x < 2.0 * kappa)
    xa = x[in_arc]
    first = xa < kappa
    g[in_arc] = -scale * np.where(
        first,
        0.5 * L * xa * xa,
        L * kappa * kappa - 0.5 * L * (xa - 2.0 * kappa) ** 2,
    )
    dg[in_arc] = -scale * np.where(first, L * xa, L * (2.0 * kappa - xa))
    after = x >= 2.0 * kappa
    xb = x[after] - 2.0 * kappa
    g[after] = -scale * N + 0.5 * L * xb * xb
    dg[after] = L * xb
    return g, dg


def _aligned_instant(t_exact: float, dt: float) -> int:
    """Smallest grid index k with k*dt >= t_exact (up to one ulp)."""
    k = int(math.ceil(t_exact / dt - 1e-12))
    return max(k, 0)


def causal_pair(
    L: float, N: float, tau: float, dt: float, horizon: float | None = None
) -> tuple[AdversaryScenario, AdversaryScenario]:
    """Measurement-indistinguishable pair certifying the causal floor 2*sqrt(N*L).

    Both members produce the identical all-zero measurement stream on
    [0, T] while their derivatives at T differ by 4*sqrt(N*L).  tau is
    stretched upward by less than one sample so T lands on the grid; by
    default the trace ends at T, keeping the two streams bitwise equal.
    """
    if L <= 0 or N <= 0:
        raise ValueError("causal_pair requires L > 0 and N > 0")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    kappa = math.sqrt(N / L)
    k_star = _aligned_instant(tau + 4.0 * kappa, dt)
    t_star = k_star * dt
    tau_used = max(0.0, t_star - 4.0 * kappa)
    if horizon is None:
        n = k_star + 1
    else:
        n = int(math.floor(horizon / dt + 1e-12)) + 1
        if n <= k_star:
            raise ValueError(
                f"horizon {horizon} shorter than certified instant T = {t_star:.6g}"
            )
    t = np.arange(n) * dt
    g, dg = _dig_eval(t, L, N, tau_used, kappa, scale=1.0)
    k_idx = np.arange(n)
    bound = 2.0 * math.sqrt(N * L)
    members = []
    for sign, tag in ((1.0, "plus"), (-1.0, "minus")):
        f = sign * g
        eta = np.where(k_idx <= k_star, -f, -sign * N)
        trace = SampledTrace(dt=dt, u=f + eta, f=f, fdot=sign * dg, eta=eta)
        sc = AdversaryScenario(
            name="causal-pair",
            trace=trace,
            t_star=t_star,
            k_star=k_star,
            bound=bound,
            L=L,
            N=N,
            meta={"member": tag, "tau": tau_used, "kappa": kappa},
        )
        verify_membership(sc)
        members.append(sc)
    return members[0], members[1]


def _trap(
    L: float, N: float, tau: float, dt: float, horizon: float | None,
    name: str, bound: float, vacuous: bool = False, extra: dict | None = None,
) -> AdversaryScenario:
    kappa = math.sqrt(N / L)
    span = (2.0 + SQRT2) * kappa
    k_star = _aligned_instant(tau + span, dt)
    t_star = k_star * dt
    tau_used = max(0.0, t_star - span)
    if horizon is None:
        n = k_star + 1
    else:
        n = int(math.floor(horizon / dt + 1e-12)) + 1
        if n <= k_star:
            raise ValueError(
                f"horizon {horizon} shorter than certified instant T = {t_star:.6g}"
            )
    n = max(n, 2)
    t = np.arange(n) * dt
    g, dg = _dig_eval(t, L, N, tau_used, kappa, scale=0.5) if kappa > 0 else (
        np.zeros(n), np.zeros(n)
    )
    k_idx = np.arange(n)
    f = -g
    eta = np.where(k_idx <= k_star, 2.0 * g, N)
    trace = SampledTrace(dt=dt, u=f + eta, f=f, fdot=-dg, eta=eta)
    meta = {"tau": tau_used, "kappa": kappa}
    meta.update(extra or {})
    sc = AdversaryScenario(
        name=name, trace=trace, t_star=t_star, k_star=k_star, bound=bound,
        L=L, N=N, vacuous=vacuous, meta=meta,
    )
    verify_membership(sc)
    return sc


def exact_trap(
    L: float, N: float, tau: float, dt: float, horizon: float | None = None
) -> AdversaryScenario:
    """Smooth trap certifying the exact-differentiator floor 2*sqrt(2*N*L).

    The measurement stream equals a noise-free-admissible signal whose
    derivative at T is +sqrt(2*N*L) while the true derivative is the
    negative; an exact engine must output the former.
    """
    if L <= 0 or N <= 0:
        raise ValueError("exact_trap requires L > 0 and N > 0")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return _trap(L, N, tau, dt, horizon, name="exact-trap",
                 bound=2.0 * math.sqrt(2.0 * N * L))


def quasi_exact_trap(
    L: float, N: float, dt: float, r: int, horizon: float | None = None
) -> AdversaryScenario:
    """Grid-aligned trap for quasi-exact sample-based engines.

    Places the certified instant at step l = max(r, ceil((2+sqrt(2))*
    sqrt(N/L)/dt)) and certifies 2*sqrt(2*N*L) - L*dt/2 there.  The
    certificate is vacuous when dt > 4*(sqrt(2)-1)*sqrt(N/L) (the plain
    causal floor is stronger then); for N = 0 the reported level is the
    degenerate -L*dt/2.
    """
    if L <= 0 or N < 0:
        raise ValueError("quasi_exact_trap requires L > 0 and N >= 0")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    kappa = math.sqrt(N / L)
    span = (2.0 + SQRT2) * kappa
    ell = max(int(r), _aligned_instant(span, dt), 1)
    tau = ell * dt - span
    bound = 2.0 * math.sqrt(2.0 * N * L) - 0.5 * L * dt
    vacuous = dt > 4.0 * (SQRT2 - 1.0) * kappa
    return _trap(L, N, max(tau, 0.0), dt, horizon, name="quasi-exact-trap",
                 bound=bound, vacuous=vacuous, extra={"ell": ell})


# ---------------------------------------------------------------------------
# zero-measurement family


def zero_family_sequence(n: int) -> np.ndarray:
    """Derivative-fraction sequence a_0 = 0, a_{j+1} = 1 - (1 - a_j)^2/2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    a = np.empty(n, dtype=np.float64)
    a[0] = 0.0
    for j in range(n - 1):
        r = 1.0 - a[j]
        a[j + 1] = 1.0 - 0.5 * r * r
    return a


def _g_abc(x: np.ndarray, a: float, b: float, c: float, L: float, dt: float):
    """One interval piece of the zero-sample signal on local time x in [0, dt).

    Returns (value, derivative).  The piece vanishes at both interval ends
    with entry slope a*L*dt/2 and exit slope -b*L*dt/2.
    """
    v = np.empty_like(x)
    d = np.empty_like(x)
    b1 = x < c * dt
    b2 = (~b1) & (x < 0.5 * dt)
    b3 = x >= 0.5 * dt
    x1 = x[b1]
    v[b1] = 0.5 * a * L * dt * x1 + 0.5 * L * x1 * x1
    d[b1] = 0.5 * a * L * dt + L * x1
    x2 = x[b2]
    v[b2] = b * L * dt * dt / 8.0 - 0.5 * L * (x2 - 0.5 * dt) ** 2
    d[b2] = -L * (x2 - 0.5 * dt)
    x3 = x[b3]
    v[b3] = 0.5 * b * L * x3 * (dt - x3)
    d[b3] = 0.5 * b * L * (dt - 2.0 * x3)
    return v, d


def zero_family_fine(
    L: float, dt: float, n: int, oversample: int = 16
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense evaluation (t, f, fdot) of the zero-sample signal.

    Covers [0, (n-1)*dt] with `oversample` points per sampling interval;
    used to check the continuous construction, not by the engines.
    """
    a = zero_family_sequence(n)
    ts, fs, ds = [], [], []
    for j in range(n - 1):
        x = np.arange(oversample) * (dt / oversample)
        aj = float(a[j])
        v, d = _g_abc(x, aj, float(a[j + 1]), 0.25 * (1.0 - aj), L, dt)
        sign = -1.0 if j % 2 else 1.0
        ts.append(j * dt + x)
        fs.append(sign * v)
        ds.append(sign * d)
    ts.append(np.array([(n - 1) * dt]))
    sign = -1.0 if (n - 1) % 2 else 1.0
    fs.append(np.array([0.0]))
    ds.append(np.array([sign * 0.5 * a[n - 1] * L * dt]))
    return np.concatenate(ts), np.concatenate(fs), np.concatenate(ds)


def sampled_zero_family(
    L: float, dt: float, n: int
) -> tuple[AdversaryScenario, AdversaryScenario]:
    """Pair +/-f of signals whose every sample is exactly zero.

    All measurements vanish, so any sample-based engine outputs a value
    independent of which member is active, while |f'(k*dt)| = a_k*L*dt/2
    grows toward the floor L*dt/2.  fdot alternates sign interval to
    interval by construction.
    """
    if L < 0 or dt <= 0:
        raise ValueError("sampled_zero_family requires L >= 0 and dt > 0")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    a = zero_family_sequence(n)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    fdot = signs * a * (0.5 * L * dt)
    zero = np.zeros(n, dtype=np.float64)
    bound = float(a[n - 1] * 0.5 * L * dt)
    members = []
    for s, tag in ((1.0, "plus"), (-1.0, "minus")):
        trace = SampledTrace(dt=dt, u=zero.copy(), f=zero.copy(),
                             fdot=s * fdot, eta=zero.copy())
        sc = AdversaryScenario(
            name="sampled-zero", trace=trace, t_star=(n - 1) * dt,
            k_star=n - 1, bound=bound, L=L, N=0.0,
            meta={"member": tag, "a": a},
        )
        verify_membership(sc)
        members.append(sc)
    return members[0], members[1]


def verify_membership(scenario: AdversaryScenario, rel_tol_f: float = 1e-9,
                      rel_tol_eta: float = 1e-12) -> None:
    """Check the emitted pair against its declared classes.

    Discrete second differences of f must stay within L*dt^2*(1 + rel_tol_f)
    and |eta| within N*(1 + rel_tol_eta), plus a few ulps of absolute slack
    for float cancellation at large amplitudes.  Raises ValueError on
    violation.
    """
    tr = scenario.trace
    if tr.f is None or tr.eta is None:
        raise ValueError("scenario trace must carry f and eta")
    dt = tr.dt
    scale = float(np.max(np.abs(tr.f))) if tr.f.size else 0.0
    float_slack = 64.0 * np.finfo(np.float64).eps * max(1.0, scale)
    if tr.f.size >= 3:
        dd = np.abs(tr.f[2:] - 2.0 * tr.f[1:-1] + tr.f[:-2])
        limit = scenario.L * dt * dt * (1.0 + rel_tol_f) + float_slack
        worst = float(np.max(dd))
        if worst > limit:
            raise ValueError(
                f"{scenario.name}: second difference {worst:.6g} exceeds "
                f"L*dt^2 = {scenario.L * dt * dt:.6g}"
            )
    amp = float(np.max(np.abs(tr.eta)))
    if amp > scenario.N * (1.0 + rel_tol_eta) + float_slack:
        raise ValueError(
            f"{scenario.name}: noise amplitude {amp:.6g} exceeds N = {scenario.N:.6g}"
        )
