"""Command-line front door.

Subcommands:
  simulate   run a scenario config; writes trace.csv and summary.csv
  sweep      run the worst-case band check over a parameter grid
  adversary  export one adversary construction with its certificate
  fig4       run the bundled benchmark comparison scenario

Exit codes: 0 success, 2 I/O failure, 3 config/validation failure,
4 sweep band-check failure.  Validation errors are printed one per line as
`error: <key path>: <message>`.  The default output directory comes from
ROBUSTDIFF_OUT (falling back to the current directory).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import adversaries as adv
from .config import ConfigError, load_toml, scenario_from_config, sweep_from_config, \
    write_scenario_toml
from .harness import (
    DEFAULT_BENCH_SEED,
    benchmark_scenario,
    run_scenario,
    worst_case_sweep,
    write_adaptive_diag_csv,
    write_certificate_csv,
    write_summary_csv,
    write_sweep_csv,
    write_trace_csv,
)
from .svgplot import write_panels_svg

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_CHECK = 4


def _default_out() -> str:
    return os.environ.get("ROBUSTDIFF_OUT", ".")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustdiff",
        description="Streaming robust differentiation benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario config")
    sim.add_argument("-c", "--config", required=True, help="TOML scenario config")
    sim.add_argument("-o", "--out", default=_default_out(), help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override run.seed")
    sim.add_argument("--svg", action="store_true", help="also write panel plots")

    swp = sub.add_parser("sweep", help="worst-case band check over a grid")
    swp.add_argument("-c", "--config", required=True, help="TOML config with a [sweep] table")
    swp.add_argument("-o", "--out", default=_default_out(), help="output directory")

    ad = sub.add_parser("adversary", help="export an adversary construction")
    ad.add_argument("kind", choices=["causal", "exact-trap", "quasi-exact-trap", "sampled-zero"])
    ad.add_argument("-o", "--out", default=_default_out(), help="output directory")
    ad.add_argument("--L", type=float, default=1.0)
    ad.add_argument("--N", type=float, default=0.08)
    ad.add_argument("--dt", type=float, default=0.01)
    ad.add_argument("--tau", type=float, default=0.0)
    ad.add_argument("--r", type=int, default=1)
    ad.add_argument("--n", type=int, default=32, help="sample count (sampled-zero)")
    ad.add_argument("--member", choices=["plus", "minus"], default="plus")

    f4 = sub.add_parser("fig4", help="run the bundled benchmark scenario")
    f4.add_argument("-o", "--out", default=_default_out(), help="output directory")
    f4.add_argument("--seed", type=int, default=DEFAULT_BENCH_SEED)
    f4.add_argument("--svg", action="store_true", help="also write panel plots")
    f4.add_argument("--write-config", default=None, metavar="PATH",
                    help="also emit the scenario as a TOML config")
    return parser


def _print_config_errors(exc: ConfigError) -> None:
    for path, msg in exc.errors:
        print(f"error: {path}: {msg}", file=sys.stderr)


def _ensure_outdir(out: str) -> Path | None:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out!r}: {exc}", file=sys.stderr)
        return None
    return path


def _report_artifacts(report, outdir: Path, svg: bool) -> None:
    write_trace_csv(report, outdir / "trace.csv")
    write_summary_csv(report, outdir / "summary.csv")
    if svg:
        t = report.times()
        panels = [("differentiation error |fdot - y|",
                   [(t, er.e, er.label) for er in report.engines])]
        if report.trace.eta is not None:
            panels.append(("noise", [(t, report.trace.eta, "eta")]))
        diag_panels = [
            (t, er.diagnostics.N_hat, er.label)
            for er in report.engines if er.diagnostics is not None
        ]
        if diag_panels:
            panels.append(("noise amplitude estimate", diag_panels))
        write_panels_svg(outdir / "panels.svg", panels)
    for er in report.engines:
        if er.diagnostics is not None:
            write_adaptive_diag_csv(er.diagnostics, outdir / f"diag_{er.label}.csv")


def _cmd_simulate(args) -> int:
    try:
        cfg = load_toml(args.config)
    except OSError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    try:
        scenario = scenario_from_config(cfg, seed_override=args.seed)
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    outdir = _ensure_outdir(args.out)
    if outdir is None:
        return EXIT_IO
    report = run_scenario(scenario)
    _report_artifacts(report, outdir, args.svg)
    for label, err in report.max_error_from().items():
        print(f"{scenario.name}: max error from t={scenario.t_start:g}s [{label}] = {err:.6g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        cfg = load_toml(args.config)
    except OSError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    try:
        kwargs = sweep_from_config(cfg)
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    outdir = _ensure_outdir(args.out)
    if outdir is None:
        return EXIT_IO
    seed = kwargs["seed"]
    rows = worst_case_sweep(**kwargs)
    import hashlib
    import json

    cfg_hash = hashlib.sha256(
        json.dumps(kwargs, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    write_sweep_csv(rows, outdir / "sweep.csv", seed=seed, config_hash=cfg_hash)
    failures = 0
    for row in rows:
        verdict = "pass" if row.passed else "FAIL"
        failures += 0 if row.passed else 1
        print(
            f"L={row.L:g} N={row.N:g} dt={row.dt:g}: m_emp={row.m_emp:.6g} "
            f"band=[{row.lower_edge:.6g}, {row.upper_edge:.6g}] "
            f"slack={row.slack:.3g} {verdict}"
        )
    return EXIT_CHECK if failures else EXIT_OK


def _cmd_adversary(args) -> int:
    outdir = _ensure_outdir(args.out)
    if outdir is None:
        return EXIT_IO
    try:
        if args.kind == "causal":
            plus, minus = adv.causal_pair(args.L, args.N, args.tau, args.dt)
            scenario = plus if args.member == "plus" else minus
        elif args.kind == "exact-trap":
            scenario = adv.exact_trap(args.L, args.N, args.tau, args.dt)
        elif args.kind == "quasi-exact-trap":
            scenario = adv.quasi_exact_trap(args.L, args.N, args.dt, args.r)
        else:
            plus, minus = adv.sampled_zero_family(args.L, args.dt, args.n)
            scenario = plus if args.member == "plus" else minus
    except ValueError as exc:
        print(f"error: adversary: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tr = scenario.trace
    rows = zip(range(tr.n), tr.times(), tr.u, tr.f, tr.fdot, tr.eta)
    from .harness import CSV_SCHEMA, _write_csv

    _write_csv(outdir / "adversary_trace.csv",
               {"robustdiff": CSV_SCHEMA, "adversary": scenario.name},
               ["k", "t", "u", "f", "fdot", "eta"], rows)
    write_certificate_csv(scenario, outdir / "certificate.csv")
    print(
        f"{scenario.name}: certified error {scenario.bound:.6g} at t = "
        f"{scenario.t_star:.6g}s (k = {scenario.k_star})"
        + (" [vacuous]" if scenario.vacuous else "")
    )
    return EXIT_OK


def _cmd_fig4(args) -> int:
    outdir = _ensure_outdir(args.out)
    if outdir is None:
        return EXIT_IO
    scenario = benchmark_scenario(seed=args.seed)
    if args.write_config:
        try:
            write_scenario_toml(scenario, args.write_config)
        except OSError as exc:
            print(f"error: {args.write_config}: {exc}", file=sys.stderr)
            return EXIT_IO
    report = run_scenario(scenario)
    _report_artifacts(report, outdir, args.svg)
    for label, err in report.max_error_from().items():
        print(f"max error for t >= 10 s [{label}] = {err:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "adversary": _cmd_adversary,
        "fig4": _cmd_fig4,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
