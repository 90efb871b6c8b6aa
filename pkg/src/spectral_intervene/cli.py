"""Command-line front end.

Subcommands: generate, signal, intervene, evaluate, sweep, reproduce,
diagnose. Flags override config-file values, which override defaults. The
environment variable SPECTRAL_INTERVENE_SEED supplies the seed when --seed is
absent. Exit codes: 0 success, 2 usage/configuration error, 3 no recoverable
structure, 1 other failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    InvalidConfigError,
    NoRecoverableStructureError,
    SpectralInterveneError,
)
from .harness import (
    GENERATORS,
    RESULT_COLUMNS,
    _result_rows,
    build_plan,
    load_sweep_config,
    run_sweep,
    write_rows,
)
from .market import Intervention, MarketState, surplus_from_response, equilibrium_response
from .presets import PRESETS, run_preset
from .rules import (
    ThresholdPlan,
    complete_info_intervention,
    davis_kahan_diagnostics,
    first_eigenvector_intervention,
    intervention_to_csv_text,
    intervention_to_dict,
    robust_spectral_intervention,
)
from .signals import NoiseConfig, Signal, make_signal

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NO_STRUCTURE = 3


def _default_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SPECTRAL_INTERVENE_SEED")
    return int(env) if env else 0


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_params(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--param expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _load_state_or_signal(path: str) -> tuple[MarketState | None, Signal]:
    """Read a market-state or signal JSON file; states become noiseless signals."""
    payload = json.loads(Path(path).read_text())
    if payload.get("is_signal"):
        return None, Signal.from_dict(payload)
    state = MarketState.from_dict(payload)
    return state, Signal.noiseless(state)


def _plan_from_args(args: argparse.Namespace, n: int) -> ThresholdPlan:
    if args.m_hat is not None:
        return ThresholdPlan(m_hat=args.m_hat, m_under=args.m_under, m_ref=args.m_ref)
    return ThresholdPlan.for_dimension(n, args.threshold_exponent)


def _cmd_generate(args: argparse.Namespace) -> int:
    params = _parse_params(args.param)
    if args.n is not None:
        params["n"] = args.n
    if args.gamma is not None:
        params["gamma"] = args.gamma
    seed = _default_seed(args.seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    state = GENERATORS[args.generator](params, rng)
    _atomic_write_text(args.out, json.dumps(state.to_dict()))
    print(f"wrote {args.out} (n = {state.n})")
    return EXIT_OK


def _cmd_signal(args: argparse.Namespace) -> int:
    state = MarketState.from_json(args.state)
    cfg = NoiseConfig(
        matrix_scheme=args.matrix_scheme,
        quantity_scheme=args.quantity_scheme,
        half_width=args.half_width,
        f_std=args.f_std,
        g_std=args.g_std,
        log_mean=args.log_mean,
        log_var=args.log_var,
        additive_std=args.additive_std,
        seed=_default_seed(args.seed),
    )
    signal = make_signal(state, cfg)
    _atomic_write_text(args.out, json.dumps(signal.to_dict()))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_intervene(args: argparse.Namespace) -> int:
    state, signal = _load_state_or_signal(args.input)
    plan: ThresholdPlan | None = None
    predicted: float | None = None
    if args.rule == "robust":
        plan = _plan_from_args(args, signal.n)
        sigma = robust_spectral_intervention(signal, plan)
        predicted = float(sigma.sigma @ signal.q0_hat)
    elif args.rule == "first_eigenvector":
        sigma = first_eigenvector_intervention(signal, args.target_expenditure)
        predicted = float(sigma.sigma @ signal.q0_hat)
    elif args.rule == "complete_info":
        # Complete information: the input file is taken as the true state.
        truth = state if state is not None else MarketState(d=signal.d_hat, q0=signal.q0_hat)
        sigma = complete_info_intervention(truth, args.target_c_dot, args.target_s_dot)
        predicted = float(sigma.sigma @ truth.q0)
    else:  # pragma: no cover - argparse choices prevent this
        raise ConfigError(f"unknown rule {args.rule!r}")
    if args.format == "csv":
        _atomic_write_text(args.out, intervention_to_csv_text(sigma))
    else:
        payload = intervention_to_dict(sigma, args.rule, predicted, plan)
        _atomic_write_text(args.out, json.dumps(payload))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    state = MarketState.from_json(args.state)
    payload = json.loads(Path(args.intervention).read_text())
    sigma = Intervention(sigma=np.asarray(payload["sigma"], dtype=np.float64))
    report = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
    out = report.to_dict()
    out["identity_residual"] = abs(
        0.5 * report.p_dot_surplus + report.c_dot - report.s_dot
    )
    print(json.dumps(out, indent=1))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    overrides = {
        "reps": args.reps,
        "seed": args.seed,
        "rule": args.rule,
        "target_expenditure": args.target_expenditure,
        "threshold_exponent": args.threshold_exponent,
    }
    if args.gamma_grid is not None:
        overrides["grid"] = [float(x) for x in args.gamma_grid.split(",")]
    cfg, output = load_sweep_config(args.config, overrides)
    out_path = args.out or output.get("path", "sweep.csv")
    fmt = args.format or output.get("format", "csv")
    result = run_sweep(cfg, jobs=args.jobs)
    write_rows(_result_rows(result), RESULT_COLUMNS, out_path, fmt)
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_reproduce(args: argparse.Namespace) -> int:
    rows, columns = run_preset(args.preset, reps=args.reps, seed=args.seed, jobs=args.jobs)
    out_path = args.out or f"{args.preset}.csv"
    write_rows(rows, tuple(columns), out_path, args.format)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    state = MarketState.from_json(args.state)
    _, signal = _load_state_or_signal(args.signal)
    plan = _plan_from_args(args, state.n)
    diag = davis_kahan_diagnostics(state, signal, plan)
    print(json.dumps(diag.to_dict(), indent=1))
    return EXIT_OK


def _add_threshold_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threshold-exponent", type=float, default=2.0 / 3.0,
                        help="m_hat = n^exponent (default 2/3)")
    parser.add_argument("--m-hat", type=float, default=None, help="explicit m_hat cutoff")
    parser.add_argument("--m-under", type=float, default=None, help="explicit m_under cutoff")
    parser.add_argument("--m-ref", type=float, default=None, help="explicit reference cutoff")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-intervene",
        description="Spectral pass-through analysis and robust market interventions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a market state and write it as JSON")
    p.add_argument("--generator", required=True, choices=sorted(GENERATORS))
    p.add_argument("--n", type=int, default=None, help="number of products")
    p.add_argument("--gamma", type=float, default=None, help="block-example mixing weight")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="extra generator parameter (repeatable)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("signal", help="observe a state through a noise model")
    p.add_argument("--state", required=True)
    p.add_argument("--matrix-scheme", default="uniform_offdiag",
                   choices=("none", "uniform_offdiag", "household_sampling"))
    p.add_argument("--quantity-scheme", default="multiplicative_lognormal",
                   choices=("none", "multiplicative_lognormal", "additive_gaussian"))
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--f-std", type=float, default=0.3)
    p.add_argument("--g-std", type=float, default=0.3)
    p.add_argument("--log-mean", type=float, default=0.0)
    p.add_argument("--log-var", type=float, default=0.1)
    p.add_argument("--additive-std", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_signal)

    p = sub.add_parser("intervene", help="compute an intervention from a state or signal")
    p.add_argument("--input", required=True, help="market-state or signal JSON file")
    p.add_argument("--rule", default="robust",
                   choices=("robust", "first_eigenvector", "complete_info"))
    p.add_argument("--target-expenditure", type=float, default=1.0)
    p.add_argument("--target-c-dot", type=float, default=0.0)
    p.add_argument("--target-s-dot", type=float, default=1.0)
    _add_threshold_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.set_defaults(func=_cmd_intervene)

    p = sub.add_parser("evaluate", help="surplus derivatives of an intervention on a state")
    p.add_argument("--state", required=True)
    p.add_argument("--intervention", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gamma-grid", default=None, help="comma-separated grid values")
    p.add_argument("--rule", default=None,
                   choices=("robust", "first_eigenvector", "complete_info"))
    p.add_argument("--target-expenditure", type=float, default=None)
    p.add_argument("--threshold-exponent", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default=None, choices=("csv", "json"))
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("reproduce", help="run a canned study and write its table")
    p.add_argument("preset", choices=sorted(PRESETS))
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("diagnose", help="subspace-recovery diagnostics for a (state, signal) pair")
    p.add_argument("--state", required=True)
    p.add_argument("--signal", required=True)
    _add_threshold_flags(p)
    p.set_defaults(func=_cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoRecoverableStructureError as exc:
        print(f"error: no recoverable structure: {exc}", file=sys.stderr)
        return EXIT_NO_STRUCTURE
    except (ConfigError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpectralInterveneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
