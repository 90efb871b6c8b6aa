"""Core market-state types, normalization, validation, and the direct
equilibrium solver.

A market state is the pair (D, q0): a normalized demand-derivative matrix
with -1 diagonal and the status-quo quantity vector. The direct solver here
is deliberately independent of the spectral machinery so the two paths can
cross-check each other.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    AsymmetricInputError,
    DimensionMismatchError,
    NonNegativeDiagonalError,
    SingularSystemError,
)

FloatArray = NDArray[np.float64]


def _freeze(arr: np.ndarray) -> FloatArray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MarketState:
    """Normalized demand-derivative matrix D and status-quo quantities q0.

    D must be symmetric, negative semidefinite, with -1 diagonal; ||q0|| <= 1.
    Construction does not enforce the invariants (use
    :func:`validate_market_state`), but arrays are copied and made read-only.
    """

    d: FloatArray
    q0: FloatArray

    def __post_init__(self) -> None:
        d = _freeze(self.d)
        q0 = _freeze(self.q0)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionMismatchError(f"D must be square, got shape {d.shape}")
        if q0.ndim != 1 or q0.shape[0] != d.shape[0]:
            raise DimensionMismatchError(
                f"q0 shape {q0.shape} does not match D shape {d.shape}"
            )
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "q0", q0)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": [float(x) for x in self.d.ravel(order="C")],
            "q0": [float(x) for x in self.q0],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MarketState":
        n = int(payload["n"])
        d = np.asarray(payload["d"], dtype=np.float64).reshape(n, n)
        q0 = np.asarray(payload["q0"], dtype=np.float64)
        return cls(d=d, q0=q0)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_json(cls, path: str | Path) -> "MarketState":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_csv(cls, matrix_path: str | Path, q0_path: str | Path) -> "MarketState":
        """Load D from a headerless n-row CSV and q0 from a single-column CSV."""
        with open(matrix_path, newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
        d = np.asarray(rows, dtype=np.float64)
        with open(q0_path, newline="") as fh:
            q0 = np.asarray(
                [float(row[0]) for row in csv.reader(fh) if row], dtype=np.float64
            )
        return cls(d=d, q0=q0)


@dataclass(frozen=True)
class Intervention:
    """Per-unit subsidy (positive) / tax (negative) vector."""

    sigma: FloatArray

    def __post_init__(self) -> None:
        sigma = _freeze(self.sigma)
        if sigma.ndim != 1:
            raise DimensionMismatchError("sigma must be a vector")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma entries must be finite")
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class EquilibriumResponse:
    """First-order price and quantity derivatives along an intervention."""

    p_dot: FloatArray
    q_dot: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_dot", _freeze(self.p_dot))
        object.__setattr__(self, "q_dot", _freeze(self.q_dot))


@dataclass(frozen=True)
class ModeContribution:
    """One eigenmode's share of the surplus pass-through."""

    index: int
    eigenvalue: float
    q0_coeff: float  # u . q0
    sigma_coeff: float  # u . sigma
    w_dot_term: float


@dataclass(frozen=True)
class SurplusReport:
    """First-order surplus derivatives: consumer (c_dot), producer
    (p_dot_surplus), total (w_dot) and authority expenditure (s_dot)."""

    c_dot: float
    p_dot_surplus: float
    w_dot: float
    s_dot: float
    mode_contributions: tuple[ModeContribution, ...] | None = field(default=None)

    def to_dict(self) -> dict:
        out = {
            "c_dot": self.c_dot,
            "p_dot_surplus": self.p_dot_surplus,
            "w_dot": self.w_dot,
            "s_dot": self.s_dot,
        }
        if self.mode_contributions is not None:
            out["mode_contributions"] = [
                {
                    "index": m.index,
                    "eigenvalue": m.eigenvalue,
                    "q0_coeff": m.q0_coeff,
                    "sigma_coeff": m.sigma_coeff,
                    "w_dot_term": m.w_dot_term,
                }
                for m in self.mode_contributions
            ]
        return out


@dataclass(frozen=True)
class Violation:
    """A violated market-state invariant and the magnitude of the breach."""

    name: str
    magnitude: float


def normalize_slutsky(d_raw: np.ndarray, sym_tol: float = 1e-10) -> tuple[FloatArray, FloatArray]:
    """Rescale a raw demand-derivative matrix to have -1 diagonal.

    Returns ``(d_norm, gamma)`` where ``gamma_i = 1/sqrt(|d_raw_ii|)`` and
    ``d_norm = diag(gamma) @ d_raw @ diag(gamma)``. The congruence preserves
    symmetry and negative semidefiniteness.
    """
    d_raw = np.asarray(d_raw, dtype=np.float64)
    if d_raw.ndim != 2 or d_raw.shape[0] != d_raw.shape[1]:
        raise DimensionMismatchError(f"expected square matrix, got {d_raw.shape}")
    asym = float(np.max(np.abs(d_raw - d_raw.T))) if d_raw.size else 0.0
    if asym > sym_tol:
        raise AsymmetricInputError(f"symmetry violated by {asym:.3e}")
    diag = np.diagonal(d_raw)
    if np.any(diag >= 0):
        bad = int(np.argmax(diag >= 0))
        raise NonNegativeDiagonalError(
            f"diagonal entry {bad} is {diag[bad]:.6g} (must be < 0)"
        )
    gamma = 1.0 / np.sqrt(-diag)
    # Elementwise scaling keeps the result exactly symmetric in floating point.
    d_norm = np.outer(gamma, gamma) * d_raw
    return _freeze(d_norm), _freeze(gamma)


def validate_market_state(state: MarketState, tol: float = 1e-12) -> list[Violation]:
    """Check the market-state invariants; empty list means all hold.

    ``tol`` applies to symmetry, the -1 diagonal and the ||q0|| <= 1 bound.
    The negative-semidefiniteness check uses ``max(tol, 1e-10)`` because
    eigenvalues of an exactly NSD matrix carry O(n * eps) numerical noise.
    """
    report: list[Violation] = []
    d, q0 = state.d, state.q0
    asym = float(np.max(np.abs(d - d.T)))
    if asym > tol:
        report.append(Violation("asymmetric", asym))
    diag_dev = float(np.max(np.abs(np.diagonal(d) + 1.0)))
    if diag_dev > tol:
        report.append(Violation("diagonal_not_minus_one", diag_dev))
    nsd_tol = max(tol, 1e-10)
    lam_max = float(np.linalg.eigvalsh(0.5 * (d + d.T))[-1])
    if lam_max > nsd_tol:
        report.append(Violation("not_negative_semidefinite", lam_max))
    norm_excess = float(np.linalg.norm(q0)) - 1.0
    if norm_excess > tol:
        report.append(Violation("q0_norm_exceeds_one", norm_excess))
    return report


def equilibrium_response(state: MarketState, sigma: Intervention) -> EquilibriumResponse:
    """Solve (I - D) p_dot = -sigma for the price response; q_dot = D p_dot.

    (I - D) is symmetric positive definite for any valid state (eigenvalues
    >= 1), so a Cholesky factorization doubles as a nonsingularity check.
    """
    if sigma.n != state.n:
        raise DimensionMismatchError(
            f"sigma has {sigma.n} entries, state has {state.n} products"
        )
    a = np.eye(state.n) - state.d
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - invalid states only
        raise SingularSystemError(str(exc)) from exc
    p_dot = cho_solve(factor, -sigma.sigma, check_finite=False)
    q_dot = state.d @ p_dot
    return EquilibriumResponse(p_dot=p_dot, q_dot=q_dot)


def surplus_from_response(
    state: MarketState, sigma: Intervention, resp: EquilibriumResponse
) -> SurplusReport:
    """Aggregate surplus derivatives from a solved equilibrium response.

    c_dot = -q0 . p_dot (Marshallian), p_dot_surplus = 2 q0 . q_dot,
    s_dot = sigma . q0 (first order), w_dot = c + p - s.
    """
    q0 = state.q0
    c_dot = float(-q0 @ resp.p_dot)
    p_surplus = float(2.0 * (q0 @ resp.q_dot))
    s_dot = float(sigma.sigma @ q0)
    return SurplusReport(
        c_dot=c_dot,
        p_dot_surplus=p_surplus,
        w_dot=c_dot + p_surplus - s_dot,
        s_dot=s_dot,
    )


def household_surplus(q_h: np.ndarray, p_dot: np.ndarray) -> float:
    """One household's consumer-surplus derivative: -q_h . p_dot."""
    q_h = np.asarray(q_h, dtype=np.float64)
    p_dot = np.asarray(p_dot, dtype=np.float64)
    if q_h.shape != p_dot.shape:
        raise DimensionMismatchError(
            f"household quantities {q_h.shape} vs price response {p_dot.shape}"
        )
    return float(-q_h @ p_dot)
