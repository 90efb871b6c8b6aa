"""Monte Carlo driver: seeded parameter sweeps, percentile summaries, the
impossibility demos, and the household-noise scaling study.

Every rep draws its randomness from a stream keyed by (seed, grid value,
rep index), so sweep output is a pure function of its configuration and is
byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateProjectionError,
    EmptySampleError,
    NoRecoverableStructureError,
)
from .generators import (
    BlockExampleConfig,
    PlantedConfig,
    Prop2P2Config,
    adversarial_q0_for_sigma,
    gen_block_example,
    gen_hedonic,
    gen_planted,
    gen_prop2_part1,
    gen_prop2_part2,
    sylvester_hadamard,
)
from .market import Intervention, MarketState
from .rules import (
    ThresholdPlan,
    complete_info_intervention,
    davis_kahan_diagnostics,
    first_eigenvector_intervention,
    robust_spectral_intervention,
    surplus_under_truth,
)
from .signals import NoiseConfig, Signal, make_signal, sample_household_signal, spectral_norm
from .spectral import decompose, passthrough_spectral

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SURPLUS_METRICS = ("c_dot", "p_dot_surplus", "w_dot", "s_dot", "predicted_s_dot")
DIAGNOSTIC_METRICS = ("overlap", "misalignment", "dk_bound", "gap", "e_norm")
KNOWN_METRICS = SURPLUS_METRICS + DIAGNOSTIC_METRICS + ("margin", "prop1_residual")

_INT_PARAMS = {"n", "m", "k", "z_cols", "rank", "seed", "sign_seed"}


@dataclass(frozen=True)
class SummaryStats:
    median: float
    p05: float
    p95: float
    mean: float
    fraction_negative: float


@dataclass(frozen=True)
class GridPointResult:
    grid_value: float
    reps: int
    failures: int
    failure_categories: tuple[tuple[str, int], ...]
    stats: dict[str, SummaryStats]
    records: tuple[dict, ...] | None = None


@dataclass(frozen=True)
class SweepResult:
    grid_param: str
    metrics: tuple[str, ...]
    points: tuple[GridPointResult, ...]


@dataclass(frozen=True)
class SweepConfig:
    """One Monte Carlo sweep: generator x noise x rule over a parameter grid."""

    generator: str
    generator_params: dict = field(default_factory=dict)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rule: str = "first_eigenvector"
    rule_params: dict = field(default_factory=dict)
    grid_param: str = "gamma"
    grid: tuple[float, ...] = (0.3,)
    reps: int = 300
    seed: int = 0
    metrics: tuple[str, ...] = ("c_dot", "p_dot_surplus", "w_dot", "s_dot")
    retain_raw: bool = False

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.grid:
            raise ConfigError("grid must be nonempty")
        unknown = [m for m in self.metrics if m not in KNOWN_METRICS]
        if unknown:
            raise ConfigError(f"unknown metrics {unknown}; choose from {KNOWN_METRICS}")
        if not self.metrics:
            raise ConfigError("at least one metric is required")
        if self.generator not in GENERATORS:
            raise ConfigError(
                f"unknown generator {self.generator!r}; choose from {sorted(GENERATORS)}"
            )
        if self.rule not in RULES:
            raise ConfigError(f"unknown rule {self.rule!r}; choose from {sorted(RULES)}")


def _cast_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if key in _INT_PARAMS and value is not None:
            out[key] = int(round(value))
        else:
            out[key] = value
    return out


def _make_block(params: dict, rng: np.random.Generator) -> MarketState:
    cfg = BlockExampleConfig(**_cast_params(params))
    state, _ = gen_block_example(cfg, rng)
    return state


def _make_prop2p1(params: dict, rng: np.random.Generator) -> MarketState:
    p = _cast_params(params)
    n = p.get("n", 16)
    d_star, make_q0 = gen_prop2_part1(n)
    r = rng.standard_normal(n)
    r -= r.mean()
    r /= np.linalg.norm(r)
    return MarketState(d=d_star, q0=make_q0(r))


def _make_prop2p2(params: dict, rng: np.random.Generator) -> MarketState:
    p = _cast_params(params)
    p.pop("sign_seed", None)
    return gen_prop2_part2(Prop2P2Config(**p), rng)


def _make_hedonic(params: dict, rng: np.random.Generator) -> MarketState:
    p = _cast_params(params)
    state, _ = gen_hedonic(p.get("n", 100), p.get("k", 10), p.get("alpha", 0.12), rng)
    return state


def _make_planted(params: dict, rng: np.random.Generator) -> MarketState:
    return gen_planted(PlantedConfig(**_cast_params(params)), rng)


def _make_independent(params: dict, rng: np.random.Generator) -> MarketState:
    n = _cast_params(params).get("n", 8)
    q0 = rng.uniform(0.1, 1.0, size=n)
    return MarketState(d=-np.eye(n), q0=q0 / np.linalg.norm(q0))


GENERATORS = {
    "block_example": _make_block,
    "prop2_part1": _make_prop2p1,
    "prop2_part2": _make_prop2p2,
    "hedonic": _make_hedonic,
    "planted": _make_planted,
    "independent": _make_independent,
}

RULES = ("robust", "first_eigenvector", "complete_info")


def build_plan(n: int, rule_params: dict) -> ThresholdPlan:
    """Thresholds from rule parameters, either explicit, power-law in n
    (``threshold_exponent``), or linear in n (``m_hat_frac`` etc.)."""
    if "m_hat" in rule_params:
        return ThresholdPlan(
            m_hat=float(rule_params["m_hat"]),
            m_under=rule_params.get("m_under"),
            m_ref=rule_params.get("m_ref"),
        )
    if "m_hat_frac" in rule_params:
        return ThresholdPlan(
            m_hat=n * float(rule_params["m_hat_frac"]),
            m_under=n * float(rule_params.get("m_under_frac", rule_params["m_hat_frac"] / 2)),
            m_ref=n * float(rule_params.get("m_ref_frac", rule_params["m_hat_frac"] * 2)),
        )
    return ThresholdPlan.for_dimension(n, float(rule_params.get("threshold_exponent", 2.0 / 3.0)))


def _grid_value_bits(value: float) -> int:
    return int(np.array(float(value), dtype=np.float64).view(np.uint64))


def run_rep(grid_value: float, rep_index: int, cfg: SweepConfig) -> dict:
    """One full Monte Carlo draw; deterministic given (cfg.seed, grid_value,
    rep_index).

    Pipeline: generate the true state, observe it through the noise model,
    compute the configured rule's intervention (rule refusals are recorded as
    failure categories, not crashes), evaluate the realized surplus against
    the truth, and attach any requested recovery diagnostics.
    """
    root = np.random.SeedSequence([cfg.seed, _grid_value_bits(grid_value), rep_index])
    gen_ss, noise_ss, _ = root.spawn(3)
    params = dict(cfg.generator_params)
    params[cfg.grid_param] = grid_value
    state = GENERATORS[cfg.generator](params, np.random.Generator(np.random.Philox(gen_ss)))
    signal = make_signal(state, cfg.noise, seed_seq=noise_ss)

    need_diag = any(m in cfg.metrics for m in DIAGNOSTIC_METRICS)
    plan = build_plan(state.n, cfg.rule_params)
    dec_hat = decompose(signal.d_hat)
    dec_true = decompose(state.d)

    record: dict = {"grid_value": grid_value, "rep": rep_index, "failure": None}
    sigma: Intervention | None = None
    try:
        if cfg.rule == "robust":
            sigma = robust_spectral_intervention(signal, plan, dec=dec_hat)
        elif cfg.rule == "first_eigenvector":
            sigma = first_eigenvector_intervention(
                signal,
                float(cfg.rule_params.get("target_expenditure", 1.0)),
                dec=dec_hat,
            )
        else:  # complete_info: an omniscient benchmark evaluated on the truth
            sigma = complete_info_intervention(
                state,
                float(cfg.rule_params.get("target_c_dot", 0.0)),
                float(cfg.rule_params.get("target_s_dot", 1.0)),
                dec=dec_true,
            )
    except NoRecoverableStructureError:
        record["failure"] = "no_recoverable_structure"
    except DegenerateProjectionError:
        record["failure"] = "degenerate_projection"

    if sigma is not None:
        report = passthrough_spectral(state, dec_true, sigma)
        record["c_dot"] = report.c_dot
        record["p_dot_surplus"] = report.p_dot_surplus
        record["w_dot"] = report.w_dot
        record["s_dot"] = report.s_dot
        record["predicted_s_dot"] = float(sigma.sigma @ signal.q0_hat)
        record["prop1_residual"] = abs(
            0.5 * report.p_dot_surplus + report.c_dot - report.s_dot
        )
    if need_diag:
        diag = davis_kahan_diagnostics(
            state, signal, plan, dec_true=dec_true, dec_hat=dec_hat
        )
        record["overlap"] = diag.top_vector_overlap
        record["misalignment"] = diag.subspace_misalignment
        record["dk_bound"] = diag.dk_bound
        record["gap"] = diag.gap
        record["e_norm"] = diag.e_norm
    if "margin" in cfg.metrics:
        from .generators import recoverable_structure_margin

        m_ref = plan.m_ref if plan.m_ref is not None else plan.m_hat
        record["margin"] = recoverable_structure_margin(state, m_ref)
    return record


def summarize(samples: list[float] | np.ndarray) -> SummaryStats:
    """Median, 5th/95th percentiles (linear interpolation between closest
    ranks), mean, and the fraction of strictly negative values."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise EmptySampleError("cannot summarize an empty sample")
    p05, med, p95 = np.percentile(arr, [5.0, 50.0, 95.0], method="linear")
    return SummaryStats(
        median=float(med),
        p05=float(p05),
        p95=float(p95),
        mean=float(np.mean(arr)),
        fraction_negative=float(np.mean(arr < 0.0)),
    )


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run reps at every grid value and summarize each requested metric.

    Rule failures are excluded from the metric summaries and counted per
    category; records + failures always total ``cfg.reps`` per grid point.
    """
    tasks = [(gi, gv, ri) for gi, gv in enumerate(cfg.grid) for ri in range(cfg.reps)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda t: run_rep(t[1], t[2], cfg), tasks))
    else:
        results = [run_rep(gv, ri, cfg) for _, gv, ri in tasks]

    points = []
    for gi, gv in enumerate(cfg.grid):
        records = results[gi * cfg.reps : (gi + 1) * cfg.reps]
        good = [r for r in records if r["failure"] is None]
        categories: dict[str, int] = {}
        for r in records:
            if r["failure"] is not None:
                categories[r["failure"]] = categories.get(r["failure"], 0) + 1
        stats = {}
        for metric in cfg.metrics:
            values = [r[metric] for r in good if metric in r and np.isfinite(r[metric])]
            if values:
                stats[metric] = summarize(values)
        points.append(
            GridPointResult(
                grid_value=gv,
                reps=cfg.reps,
                failures=cfg.reps - len(good),
                failure_categories=tuple(sorted(categories.items())),
                stats=stats,
                records=tuple(records) if cfg.retain_raw else None,
            )
        )
    return SweepResult(grid_param=cfg.grid_param, metrics=cfg.metrics, points=tuple(points))


RESULT_COLUMNS = (
    "grid_value",
    "metric",
    "median",
    "p05",
    "p95",
    "mean",
    "fraction_negative",
    "reps",
    "failures",
)


def _result_rows(result: SweepResult) -> list[dict]:
    rows = []
    for point in result.points:
        for metric in result.metrics:
            stats = point.stats.get(metric)
            if stats is None:
                continue
            rows.append(
                {
                    "grid_value": point.grid_value,
                    "metric": metric,
                    "median": stats.median,
                    "p05": stats.p05,
                    "p95": stats.p95,
                    "mean": stats.mean,
                    "fraction_negative": stats.fraction_negative,
                    "reps": point.reps,
                    "failures": point.failures,
                }
            )
    return rows


def write_rows(
    rows: list[dict], columns: tuple[str, ...], path: str | Path, fmt: str = "csv"
) -> None:
    """Atomically write a table as CSV or JSON (repr-precision floats)."""
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(
                ",".join(
                    repr(float(v)) if isinstance(v, float) else str(v)
                    for v in (row[c] for c in columns)
                )
            )
        payload = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = json.dumps({"columns": list(columns), "rows": rows}, indent=1)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_results(result: SweepResult, path: str | Path, fmt: str = "csv") -> None:
    """One row per (grid value, metric); bit-stable for a fixed config+seed."""
    write_rows(_result_rows(result), RESULT_COLUMNS, path, fmt)


def read_results_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = dict(row)
            for key in ("grid_value", "median", "p05", "p95", "mean", "fraction_negative"):
                parsed[key] = float(parsed[key])
            for key in ("reps", "failures"):
                parsed[key] = int(parsed[key])
            rows.append(parsed)
    return rows


# ---------------------------------------------------------------------------
# Stand-alone studies
# ---------------------------------------------------------------------------

def prop2_part1_demo(
    n: int, num_sigma: int, rng: np.random.Generator
) -> tuple[list[dict], dict]:
    """Pair random interventions with their adversarial quantity vector on the
    all-ones-projector market and record the (non-positive) total-surplus
    derivative; also record the omniscient benchmark c_dot = 0, p = 2s on a
    favorable state.
    """
    d_star, make_q0 = gen_prop2_part1(n)
    dec = decompose(d_star)
    rows = []

    def evaluate(label: str, sigma_vec: np.ndarray) -> None:
        q0 = adversarial_q0_for_sigma(d_star, sigma_vec)
        state = MarketState(d=d_star, q0=q0)
        report = passthrough_spectral(state, dec, Intervention(sigma=sigma_vec))
        rows.append({"sigma": label, "w_dot": report.w_dot})

    evaluate("ones", np.ones(n))
    evaluate("e1", np.eye(n)[0])
    for i in range(num_sigma):
        evaluate(f"random_{i}", rng.standard_normal(n))

    r = rng.standard_normal(n)
    r -= r.mean()
    r /= np.linalg.norm(r)
    favorable = MarketState(d=d_star, q0=make_q0(r))
    sigma = complete_info_intervention(favorable, target_c_dot=0.0, target_s_dot=1.0)
    bench = surplus_under_truth(favorable, sigma)
    benchmark = {
        "c_dot": bench.c_dot,
        "p_dot_surplus": bench.p_dot_surplus,
        "s_dot": bench.s_dot,
    }
    return rows, benchmark


def prop2_part2_demo(
    cfg: Prop2P2Config,
    reps: int,
    sigma: np.ndarray,
    eps: float = 0.01,
    rng: np.random.Generator | None = None,
) -> dict:
    """Sign-flip symmetry of the residual consumer-surplus term.

    Over ``reps`` draws of the +-1 loading vector, computes
    c_low = -(2/3) sum_{l>=2} (u_l . q0)(u_l . sigma) and reports
    |Pr(c_low <= -eps) - Pr(c_low >= eps)|, which tends to 0 because the
    distribution is exactly symmetric.
    """
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.sign_seed)))
    n = cfg.n
    sigma = np.asarray(sigma, dtype=np.float64)
    h = sylvester_hadamard(cfg.m).astype(np.float64)
    u = h / np.sqrt(n)
    b = u[1:] @ sigma  # sigma-coefficients on the non-spike directions
    coeff = -(2.0 / 3.0) * (cfg.f_value / 2.0)
    signs = rng.choice([-1.0, 1.0], size=(reps, n - 1))
    samples = coeff * (signs @ b)
    prob_low = float(np.mean(samples <= -eps))
    prob_high = float(np.mean(samples >= eps))
    return {
        "reps": reps,
        "eps": eps,
        "prob_low": prob_low,
        "prob_high": prob_high,
        "symmetry_statistic": abs(prob_low - prob_high),
    }


def noise_scaling_study(
    n_list: list[int],
    f_std: float = 0.3,
    g_std: float = 0.3,
    n_seeds: int = 20,
    seed: int = 0,
    perturbation_scale: float = 0.25,
) -> list[dict]:
    """Mean spectral-norm error of the household-sampling scheme, per sqrt(n).

    For each n, builds a raw matrix -2I minus a small random Gram perturbation,
    then averages ||D_hat - D_norm|| / sqrt(n) over seeds. The ratio should be
    bounded and non-increasing in n.
    """
    from .market import normalize_slutsky

    rows = []
    for n in n_list:
        base_rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, n, 0]))
        )
        a = base_rng.standard_normal((n, n))
        d_raw = -2.0 * np.eye(n) - (perturbation_scale / n) * (a @ a.T)
        d_raw = 0.5 * (d_raw + d_raw.T)
        d_norm, _ = normalize_slutsky(d_raw)
        ratios = []
        for s in range(n_seeds):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence([seed, n, s + 1]))
            )
            d_hat = sample_household_signal(d_raw, f_std, g_std, rng)
            ratios.append(spectral_norm(d_hat - d_norm) / np.sqrt(n))
        rows.append({"n": n, "mean_ratio": float(np.mean(ratios)), "seeds": n_seeds})
    return rows


# ---------------------------------------------------------------------------
# TOML configuration
# ---------------------------------------------------------------------------

def load_sweep_config(path: str | Path, overrides: dict | None = None) -> tuple[SweepConfig, dict]:
    """Parse a sweep from a TOML file with [generator], [noise], [rule],
    [sweep], [output] tables. Returns (config, output table). ``overrides``
    (flag values) take precedence over file values.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    overrides = overrides or {}

    gen_table = dict(raw.get("generator", {}))
    generator = gen_table.pop("name", None)
    if generator is None:
        raise ConfigError("[generator] table must set name")

    noise_table = dict(raw.get("noise", {}))
    rule_table = dict(raw.get("rule", {}))
    rule = rule_table.pop("name", "first_eigenvector")
    sweep_table = dict(raw.get("sweep", {}))
    output = dict(raw.get("output", {}))

    merged = {
        "reps": sweep_table.get("reps", 300),
        "seed": sweep_table.get("seed", 0),
        "grid": sweep_table.get("grid", [0.3]),
        "grid_param": sweep_table.get("grid_param", "gamma"),
        "metrics": sweep_table.get("metrics", list(SURPLUS_METRICS[:4])),
        "retain_raw": sweep_table.get("retain_raw", False),
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "rule":
            rule = value
        elif key in merged:
            merged[key] = value
        elif key in ("target_expenditure", "threshold_exponent"):
            rule_table[key] = value

    try:
        noise = NoiseConfig(**noise_table)
        cfg = SweepConfig(
            generator=generator,
            generator_params=gen_table,
            noise=noise,
            rule=rule,
            rule_params=rule_table,
            grid_param=str(merged["grid_param"]),
            grid=tuple(float(g) for g in merged["grid"]),
            reps=int(merged["reps"]),
            seed=int(merged["seed"]),
            metrics=tuple(merged["metrics"]),
            retain_raw=bool(merged["retain_raw"]),
        )
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc
    return cfg, output
