"""Noisy observation of a market state: matrix and quantity noise schemes.

The authority sees (D_hat, q0_hat) = (D + E, q0 + eps). Three matrix schemes
are supported (none, symmetric uniform off-diagonal noise, household-sampling
noise on a raw matrix followed by re-normalization) and three quantity schemes
(none, multiplicative lognormal, additive Gaussian).

All sampling uses the counter-based Philox generator with substreams spawned
per scheme, so signals are reproducible independent of threading: stream 0
drives the matrix scheme and stream 1 the quantity scheme.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DiagonalSignFlipError,
    InvalidConfigError,
    NegativeQuantityError,
)
from .market import FloatArray, MarketState, _freeze, normalize_slutsky

MATRIX_SCHEMES = ("none", "uniform_offdiag", "household_sampling")
QUANTITY_SCHEMES = ("none", "multiplicative_lognormal", "additive_gaussian")


@dataclass(frozen=True)
class Signal:
    """Noisy observation (D_hat, q0_hat) of a market state."""

    d_hat: FloatArray
    q0_hat: FloatArray

    def __post_init__(self) -> None:
        d_hat = _freeze(self.d_hat)
        q0_hat = _freeze(self.q0_hat)
        if not (np.all(np.isfinite(d_hat)) and np.all(np.isfinite(q0_hat))):
            raise ValueError("signal entries must be finite")
        if d_hat.size and float(np.max(np.abs(d_hat - d_hat.T))) > 1e-12:
            raise ValueError("d_hat must be symmetric (all schemes produce symmetric noise)")
        object.__setattr__(self, "d_hat", d_hat)
        object.__setattr__(self, "q0_hat", q0_hat)

    @property
    def n(self) -> int:
        return self.d_hat.shape[0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": [float(x) for x in self.d_hat.ravel(order="C")],
            "q0": [float(x) for x in self.q0_hat],
            "is_signal": True,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Signal":
        n = int(payload["n"])
        return cls(
            d_hat=np.asarray(payload["d"], dtype=np.float64).reshape(n, n),
            q0_hat=np.asarray(payload["q0"], dtype=np.float64),
        )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_json(cls, path: str | Path) -> "Signal":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def noiseless(cls, state: MarketState) -> "Signal":
        return cls(d_hat=state.d, q0_hat=state.q0)


@dataclass(frozen=True)
class NoiseConfig:
    """Which noise schemes to apply and their scale parameters.

    ``half_width`` drives the uniform off-diagonal scheme; ``f_std``/``g_std``
    the household scheme; ``log_mean``/``log_var`` the multiplicative quantity
    scheme (paper-literal defaults; the reproduction presets override
    ``log_mean`` to 0); ``additive_std`` the Gaussian quantity scheme. With
    ``additive_mode = "total"`` the per-entry std is additive_std / sqrt(n),
    keeping E||eps||^2 = additive_std^2 constant as the market grows.
    """

    matrix_scheme: str = "none"
    quantity_scheme: str = "none"
    half_width: float = 1.0
    f_std: float = 0.0
    g_std: float = 0.0
    log_mean: float = 1.0
    log_var: float = 0.1
    additive_std: float = 0.0
    additive_mode: str = "per_entry"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.matrix_scheme not in MATRIX_SCHEMES:
            raise InvalidConfigError(f"unknown matrix scheme {self.matrix_scheme!r}")
        if self.quantity_scheme not in QUANTITY_SCHEMES:
            raise InvalidConfigError(
                f"unknown quantity scheme {self.quantity_scheme!r}"
            )
        if self.additive_mode not in ("per_entry", "total"):
            raise InvalidConfigError("additive_mode must be 'per_entry' or 'total'")
        for name in ("half_width", "f_std", "g_std", "log_var", "additive_std"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be >= 0")


def _philox(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


def sample_uniform_matrix_noise(
    n: int, half_width: float, rng: np.random.Generator
) -> FloatArray:
    """Symmetric matrix with zero diagonal and iid U[-h, h] upper triangle."""
    if half_width < 0:
        raise InvalidConfigError("half_width must be >= 0")
    e = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    e[iu] = rng.uniform(-half_width, half_width, size=iu[0].shape[0])
    e = e + e.T
    return e


def sample_multiplicative_quantity_noise(
    q0: np.ndarray, log_mean: float, log_var: float, rng: np.random.Generator
) -> FloatArray:
    """q0_hat_i = q0_i * Y_i with log Y_i ~ Normal(log_mean, log_var), iid.

    The multiplicative form preserves nonnegativity, so q0 must be
    entrywise >= 0.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    if log_var < 0:
        raise InvalidConfigError("log_var must be >= 0")
    if np.any(q0 < 0):
        raise NegativeQuantityError("q0 must be entrywise nonnegative")
    y = np.exp(rng.normal(log_mean, np.sqrt(log_var), size=q0.shape[0]))
    return q0 * y


def sample_household_signal(
    d_raw: np.ndarray, f_std: float, g_std: float, rng: np.random.Generator
) -> FloatArray:
    """Household-sampling estimate of a raw demand matrix, re-normalized.

    Off-diagonal entries get symmetric bounded noise F_ij ~ U[-sqrt(3) f_std,
    sqrt(3) f_std] (std f_std). Each diagonal entry is estimated by averaging
    n independent household errors of std g_std, so Var(G_ii) = g_std^2 / n.
    The noisy raw matrix is then normalized to -1 diagonal with its own
    estimated scaling, mirroring what the authority would do.
    """
    d_raw = np.asarray(d_raw, dtype=np.float64)
    n = d_raw.shape[0]
    if f_std < 0 or g_std < 0:
        raise InvalidConfigError("noise scales must be >= 0")
    f = sample_uniform_matrix_noise(n, np.sqrt(3.0) * f_std, rng)
    g_draws = rng.uniform(-np.sqrt(3.0) * g_std, np.sqrt(3.0) * g_std, size=(n, n))
    g = g_draws.mean(axis=1)
    d_hat_raw = d_raw + f + np.diag(g)
    if np.any(np.diagonal(d_hat_raw) >= 0):
        raise DiagonalSignFlipError(
            "noise pushed a diagonal demand derivative to >= 0; resample or abort"
        )
    d_hat, _ = normalize_slutsky(d_hat_raw)
    return d_hat


def _additive_quantity_noise(
    q0: np.ndarray, std: float, rng: np.random.Generator
) -> FloatArray:
    return np.asarray(q0, dtype=np.float64) + rng.normal(0.0, std, size=len(q0))


def make_signal(
    state: MarketState,
    cfg: NoiseConfig,
    seed_seq: np.random.SeedSequence | None = None,
) -> Signal:
    """Apply the configured matrix and quantity schemes to a true state.

    Deterministic given (state, cfg.seed); pass ``seed_seq`` to source the
    randomness from an externally managed stream instead of ``cfg.seed``.
    """
    root = seed_seq if seed_seq is not None else np.random.SeedSequence(cfg.seed)
    matrix_ss, quantity_ss = root.spawn(2)

    if cfg.matrix_scheme == "none":
        d_hat = state.d
    elif cfg.matrix_scheme == "uniform_offdiag":
        e = sample_uniform_matrix_noise(state.n, cfg.half_width, _philox(matrix_ss))
        d_hat = state.d + e
    else:  # household_sampling; a normalized D is a valid raw input
        d_hat = sample_household_signal(
            state.d, cfg.f_std, cfg.g_std, _philox(matrix_ss)
        )

    if cfg.quantity_scheme == "none":
        q0_hat = state.q0
    elif cfg.quantity_scheme == "multiplicative_lognormal":
        q0_hat = sample_multiplicative_quantity_noise(
            state.q0, cfg.log_mean, cfg.log_var, _philox(quantity_ss)
        )
    else:  # additive_gaussian
        std = cfg.additive_std
        if cfg.additive_mode == "total":
            std = std / np.sqrt(state.n)
        q0_hat = _additive_quantity_noise(state.q0, std, _philox(quantity_ss))

    return Signal(d_hat=d_hat, q0_hat=q0_hat)


def spectral_norm(e: np.ndarray) -> float:
    """Largest |eigenvalue| of a symmetric matrix."""
    e = np.asarray(e, dtype=np.float64)
    if e.size == 0:
        return 0.0
    vals = np.linalg.eigvalsh(0.5 * (e + e.T))
    return float(np.max(np.abs(vals)))
