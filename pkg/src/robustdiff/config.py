"""TOML scenario/sweep configs: loading, validation, writing.

Schema (version 1):

    schema = 1
    [signal]   kind, L, R, then kind-specific payload (coeffs / switches+f0+fdot0)
    [noise]    N, optional segments = [{kind, start, duration, ...}, ...]
    [adversary] kind, member, tau, r          (alternative to [signal])
    [run]      dt, duration, seed, t_start, name
    [[engines]] kind plus engine parameters, optional label
    [sweep]    L, N, dt lists plus draws/seed/gamma_bar (sweep subcommand only)

Scalars set on the command line override the file (currently: seed).
Validation failures raise ConfigError carrying (dotted-path, message) pairs.
"""

from __future__ import annotations

import math
import re
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .harness import AdversaryRef, EngineSpec, Scenario, scenario_to_dict
from .signals import NoiseScheduleSpec, NoiseSegment, TestSignalSpec

__all__ = ["ConfigError", "load_toml", "scenario_from_config", "sweep_from_config",
           "write_scenario_toml", "CONFIG_SCHEMA"]

CONFIG_SCHEMA = 1


class ConfigError(ValueError):
    """Validation failure; `errors` lists (key path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([(str(path), f"not valid TOML: {exc}")]) from exc


class _Check:
    def __init__(self) -> None:
        self.errors: list[tuple[str, str]] = []

    def fail(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def require(self, table: dict, path: str, key: str, types, what: str):
        if key not in table:
            self.fail(f"{path}.{key}", "missing required key")
            return None
        val = table[key]
        if not isinstance(val, types) or isinstance(val, bool):
            self.fail(f"{path}.{key}", f"expected {what}, got {type(val).__name__}")
            return None
        return val

    def optional(self, table: dict, path: str, key: str, types, what: str, default):
        if key not in table:
            return default
        val = table[key]
        if not isinstance(val, types) or isinstance(val, bool):
            self.fail(f"{path}.{key}", f"expected {what}, got {type(val).__name__}")
            return default
        return val

    def reject_unknown(self, table: dict, path: str, allowed: set[str]) -> None:
        for key in table:
            if key not in allowed:
                self.fail(f"{path}.{key}", "unknown key")

    def raise_if_failed(self) -> None:
        if self.errors:
            raise ConfigError(self.errors)


_NUM = (int, float)

# labels/names land in CSV columns, file paths, and provenance lines
_NAME_RE = re.compile(r"[A-Za-z0-9._-]+")

_SEGMENT_KEYS = {
    "constant": {"level"},
    "parabola-arc": {"lam2"},
    "step": {"from_level", "to_level"},
    "uniform-white": {"seed"},
}


def _parse_signal(chk: _Check, table: dict) -> TestSignalSpec | None:
    kind = chk.require(table, "signal", "kind", str, "string")
    if kind is None:
        return None
    base = {"kind", "L", "R"}
    if kind == "polynomial":
        chk.reject_unknown(table, "signal", base | {"coeffs"})
        coeffs = chk.require(table, "signal", "coeffs", list, "list of numbers")
        if coeffs is None:
            return None
        if not coeffs or not all(isinstance(c, _NUM) for c in coeffs):
            chk.fail("signal.coeffs", "expected a non-empty list of numbers")
            return None
        return TestSignalSpec.polynomial([float(c) for c in coeffs])
    if kind == "bang-bang":
        chk.reject_unknown(table, "signal", base | {"switches", "f0", "fdot0"})
        switches = chk.require(table, "signal", "switches", list, "list of [time, accel]")
        if switches is None:
            return None
        pairs = []
        for i, item in enumerate(switches):
            if (not isinstance(item, list) or len(item) != 2
                    or not all(isinstance(v, _NUM) for v in item)):
                chk.fail(f"signal.switches[{i}]", "expected [time, accel]")
                return None
            pairs.append((float(item[0]), float(item[1])))
        f0 = float(chk.optional(table, "signal", "f0", _NUM, "number", 0.0))
        fdot0 = float(chk.optional(table, "signal", "fdot0", _NUM, "number", 0.0))
        try:
            return TestSignalSpec.bang_bang(pairs, f0=f0, fdot0=fdot0)
        except ValueError as exc:
            chk.fail("signal.switches", str(exc))
            return None
    if kind == "ramp-parabola":
        chk.reject_unknown(table, "signal", base)
        return TestSignalSpec.ramp_parabola()
    chk.fail("signal.kind", f"unknown kind {kind!r}")
    return None


def _parse_segments(chk: _Check, segs: list, run_seed: int) -> NoiseScheduleSpec | None:
    out = []
    for i, seg in enumerate(segs):
        path = f"noise.segments[{i}]"
        if not isinstance(seg, dict):
            chk.fail(path, "expected a table")
            return None
        kind = chk.require(seg, path, "kind", str, "string")
        if kind not in _SEGMENT_KEYS:
            chk.fail(f"{path}.kind", f"unknown segment kind {kind!r}")
            return None
        start = chk.require(seg, path, "start", _NUM, "number")
        duration = chk.require(seg, path, "duration", _NUM, "number")
        chk.reject_unknown(seg, path, {"kind", "start", "duration"} | _SEGMENT_KEYS[kind])
        if start is None or duration is None:
            return None
        kw: dict[str, Any] = {}
        if kind == "constant":
            kw["level"] = float(chk.optional(seg, path, "level", _NUM, "number", 0.0))
        elif kind == "parabola-arc":
            lam2 = chk.require(seg, path, "lam2", _NUM, "number")
            if lam2 is None:
                return None
            kw["lam2"] = float(lam2)
        elif kind == "step":
            kw["from_level"] = float(chk.optional(seg, path, "from_level", _NUM, "number", 0.0))
            to = chk.require(seg, path, "to_level", _NUM, "number")
            if to is None:
                return None
            kw["to_level"] = float(to)
        else:
            # white segments may omit the seed; it is then derived from run.seed
            seed = chk.optional(seg, path, "seed", int, "integer", None)
            kw["seed"] = int(seed) if seed is not None else (run_seed + 1) * 1000003 + i
        try:
            out.append(NoiseSegment(kind=kind, start=float(start),
                                    duration=float(duration), **kw))
        except ValueError as exc:
            chk.fail(path, str(exc))
            return None
    try:
        return NoiseScheduleSpec(tuple(out))
    except ValueError as exc:
        chk.fail("noise.segments", str(exc))
        return None


def scenario_from_config(cfg: dict, seed_override: int | None = None) -> Scenario:
    """Validate and assemble a Scenario; raises ConfigError listing key paths."""
    chk = _Check()
    if not isinstance(cfg, dict):
        raise ConfigError([("<root>", "config must be a table")])
    chk.reject_unknown(cfg, "<root>",
                       {"schema", "signal", "noise", "adversary", "run", "engines", "sweep"})
    schema = chk.optional(cfg, "<root>", "schema", int, "integer", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        chk.fail("schema", f"unsupported schema version {schema}")

    run = cfg.get("run")
    if not isinstance(run, dict):
        chk.fail("run", "missing required table")
        chk.raise_if_failed()
    chk.reject_unknown(run, "run", {"dt", "duration", "seed", "t_start", "name"})
    dt = chk.require(run, "run", "dt", _NUM, "number")
    duration = chk.require(run, "run", "duration", _NUM, "number")
    seed = int(chk.optional(run, "run", "seed", int, "integer", 0))
    if seed_override is not None:
        seed = int(seed_override)
    t_start = float(chk.optional(run, "run", "t_start", _NUM, "number", 0.0))
    name = chk.optional(run, "run", "name", str, "string", "scenario")
    if name is not None and not _NAME_RE.fullmatch(name):
        chk.fail("run.name", f"must match {_NAME_RE.pattern!r} (used in artifacts)")
    if dt is not None and dt <= 0:
        chk.fail("run.dt", f"must be > 0, got {dt}")
    if duration is not None and duration <= 0:
        chk.fail("run.duration", f"must be > 0, got {duration}")

    has_signal = isinstance(cfg.get("signal"), dict)
    has_adv = isinstance(cfg.get("adversary"), dict)
    if has_signal == has_adv:
        chk.fail("<root>", "exactly one of [signal] and [adversary] is required")
        chk.raise_if_failed()

    L = R = None
    spec = None
    adv_ref = None
    if has_signal:
        sig = cfg["signal"]
        L = chk.require(sig, "signal", "L", _NUM, "number")
        R = chk.require(sig, "signal", "R", _NUM, "number")
        spec = _parse_signal(chk, sig)
    else:
        at = cfg["adversary"]
        chk.reject_unknown(at, "adversary", {"kind", "member", "tau", "r", "L", "R"})
        kind = chk.require(at, "adversary", "kind", str, "string")
        member = chk.optional(at, "adversary", "member", str, "string", "plus")
        tau = float(chk.optional(at, "adversary", "tau", _NUM, "number", 0.0))
        r = int(chk.optional(at, "adversary", "r", int, "integer", 1))
        L = chk.require(at, "adversary", "L", _NUM, "number")
        R = float(chk.optional(at, "adversary", "R", _NUM, "number", 0.0))
        if kind is not None:
            try:
                adv_ref = AdversaryRef(kind=kind, member=member, tau=tau, r=r)
            except ValueError as exc:
                chk.fail("adversary", str(exc))

    noise_tbl = cfg.get("noise")
    N = 0.0
    schedule = None
    if noise_tbl is not None:
        if not isinstance(noise_tbl, dict):
            chk.fail("noise", "expected a table")
        else:
            chk.reject_unknown(noise_tbl, "noise", {"N", "segments"})
            nval = chk.require(noise_tbl, "noise", "N", _NUM, "number")
            if nval is not None:
                if nval < 0:
                    chk.fail("noise.N", f"must be >= 0, got {nval}")
                N = float(nval)
            segs = chk.optional(noise_tbl, "noise", "segments", list, "array of tables", None)
            if segs:
                schedule = _parse_segments(chk, segs, seed)

    engines_raw = cfg.get("engines")
    engine_specs: list[EngineSpec] = []
    if not isinstance(engines_raw, list) or not engines_raw:
        chk.fail("engines", "at least one [[engines]] entry is required")
    else:
        for i, tbl in enumerate(engines_raw):
            path = f"engines[{i}]"
            if not isinstance(tbl, dict):
                chk.fail(path, "expected a table")
                continue
            kind = chk.require(tbl, path, "kind", str, "string")
            if kind is None:
                continue
            if kind not in ("adaptive", "fd", "red"):
                chk.fail(f"{path}.kind", f"unknown engine kind {kind!r}")
                continue
            label = chk.optional(tbl, path, "label", str, "string", None)
            if label is not None and not _NAME_RE.fullmatch(label):
                chk.fail(f"{path}.label",
                         f"must match {_NAME_RE.pattern!r} (used in CSV columns and paths)")
            params = {k: v for k, v in tbl.items() if k not in ("kind", "label")}
            engine_specs.append(EngineSpec(kind=kind, params=params, label=label))

    chk.raise_if_failed()

    try:
        scenario = Scenario(
            name=name, L=float(L), N=N, R=float(R), dt=float(dt),
            duration=float(duration), seed=seed, t_start=t_start,
            signal=spec, noise=schedule, adversary=adv_ref,
            engines=tuple(engine_specs),
        )
    except ValueError as exc:
        raise ConfigError([("<root>", str(exc))]) from exc

    # engine parameters are checked eagerly so bad configs fail before any run
    from .harness import _engine_params
    from .engines import make_engine
    import warnings

    for i, es in enumerate(scenario.engines):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                make_engine(es.kind, _engine_params(es, scenario))
        except (TypeError, ValueError) as exc:
            raise ConfigError([(f"engines[{i}]", str(exc))]) from exc
    return scenario


def sweep_from_config(cfg: dict) -> dict:
    """Extract worst_case_sweep kwargs from the [sweep] table."""
    chk = _Check()
    table = cfg.get("sweep")
    if not isinstance(table, dict):
        raise ConfigError([("sweep", "missing required table")])
    chk.reject_unknown(table, "sweep", {"L", "N", "dt", "draws", "seed", "gamma_bar", "R"})
    out: dict[str, Any] = {}
    axes = {}
    for key in ("L", "N", "dt"):
        vals = chk.require(table, "sweep", key, list, "list of numbers")
        if vals is not None:
            if not vals or not all(isinstance(v, _NUM) for v in vals):
                chk.fail(f"sweep.{key}", "empty grid axis")
            else:
                axes[key] = [float(v) for v in vals]
    out["draws"] = int(chk.optional(table, "sweep", "draws", int, "integer", 200))
    if out["draws"] < 0:
        chk.fail("sweep.draws", f"must be >= 0, got {out['draws']}")
    out["seed"] = int(chk.optional(table, "sweep", "seed", int, "integer", 0))
    out["gamma_bar"] = float(chk.optional(table, "sweep", "gamma_bar", _NUM, "number", 2.0))
    if not (2.0 <= out["gamma_bar"] <= 1.0 + math.sqrt(2.0) + 1e-12):
        chk.fail("sweep.gamma_bar",
                 f"must lie in [2, 1+sqrt(2)], got {out['gamma_bar']}")
    out["R"] = float(chk.optional(table, "sweep", "R", _NUM, "number", 1.0))
    chk.raise_if_failed()
    out["grid"] = [(lv, nv, dv) for lv in axes["L"] for nv in axes["N"] for dv in axes["dt"]]
    return out


# ---------------------------------------------------------------------------
# writing


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    if isinstance(v, dict):
        inner = ", ".join(f"{k} = {_toml_scalar(x)}" for k, x in v.items())
        return "{" + inner + "}"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def write_scenario_toml(scenario: Scenario, path) -> None:
    """Emit a config file that round-trips through scenario_from_config."""
    data = scenario_to_dict(scenario)
    lines = [f"schema = {CONFIG_SCHEMA}", ""]
    run = data["run"]
    lines.append("[run]")
    for key in ("name", "dt", "duration", "seed", "t_start"):
        lines.append(f"{key} = {_toml_scalar(run[key])}")
    lines.append("")
    if "adversary" in data:
        lines.append("[adversary]")
        lines.append(f"L = {_toml_scalar(data['signal']['L'])}")
        lines.append(f"R = {_toml_scalar(data['signal']['R'])}")
        for key, val in data["adversary"].items():
            lines.append(f"{key} = {_toml_scalar(val)}")
    else:
        lines.append("[signal]")
        for key, val in data["signal"].items():
            lines.append(f"{key} = {_toml_scalar(val)}")
    lines.append("")
    lines.append("[noise]")
    lines.append(f"N = {_toml_scalar(data['noise']['N'])}")
    segments = data["noise"].get("segments")
    if segments:
        lines.append("segments = [")
        for seg in segments:
            keep = {k: v for k, v in seg.items()
                    if k in {"kind", "start", "duration"} | _SEGMENT_KEYS[seg["kind"]]}
            lines.append(f"  {_toml_scalar(keep)},")
        lines.append("]")
    for eng in data["engines"]:
        lines.append("")
        lines.append("[[engines]]")
        for key, val in eng.items():
            lines.append(f"{key} = {_toml_scalar(val)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
