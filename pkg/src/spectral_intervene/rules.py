"""Intervention rules and subspace-recovery diagnostics.

The robust rule projects observed quantities onto the large-eigenvalue
eigenspace of the observed matrix and scales by the squared projection norm,
which pins the predicted expenditure at exactly 1. The first-eigenvector rule
is the single-direction special case. The complete-information constructor
hits arbitrary feasible (consumer-surplus, expenditure) targets on the true
state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProjectionError,
    DimensionMismatchError,
    InfeasibleTargetsError,
    NoRecoverableStructureError,
)
from .market import FloatArray, Intervention, MarketState, SurplusReport
from .signals import Signal, spectral_norm
from .spectral import SpectralDecomposition, decompose, eigenspace_at, project

PROJECTION_FLOOR = 1e-6


@dataclass(frozen=True)
class ThresholdPlan:
    """Eigenvalue cutoffs used by the robust rule and its diagnostics.

    ``m_hat`` is applied to the observed matrix; ``m_under`` (below it) to the
    true matrix in diagnostics; ``m_ref`` (above it) is the recoverable-
    structure reference cutoff. With sqrt(n)-scale noise the defaults are
    n^(7/12) < n^(2/3) < n^(3/4); the exponents are configuration, not theory.
    """

    m_hat: float
    m_under: float | None = None
    m_ref: float | None = None

    def __post_init__(self) -> None:
        if self.m_hat <= 0:
            raise ValueError("m_hat must be > 0")
        if self.m_under is not None and self.m_ref is not None:
            if not 0 < self.m_under < self.m_hat < self.m_ref:
                raise ValueError("thresholds must satisfy 0 < m_under < m_hat < m_ref")

    @classmethod
    def for_dimension(cls, n: int, exponent: float = 2.0 / 3.0) -> "ThresholdPlan":
        """Power-law thresholds n^(7e/8) < n^e < n^(9e/8)."""
        return cls(
            m_hat=float(n**exponent),
            m_under=float(n ** (0.875 * exponent)),
            m_ref=float(n ** (1.125 * exponent)),
        )

    def to_dict(self) -> dict:
        return {"m_hat": self.m_hat, "m_under": self.m_under, "m_ref": self.m_ref}


@dataclass(frozen=True)
class RecoveryDiagnostics:
    """How well the observed top eigenspace matches the true one.

    ``gap``, ``dk_bound`` and ``misalignment`` are NaN when either eigenspace
    is empty; ``e_norm`` and ``top_vector_overlap`` are always filled.
    """

    e_norm: float
    gap: float
    dk_bound: float
    subspace_misalignment: float
    top_vector_overlap: float
    retained_dim: int
    reference_dim: int

    def to_dict(self) -> dict:
        return {
            "e_norm": self.e_norm,
            "gap": self.gap,
            "dk_bound": self.dk_bound,
            "subspace_misalignment": self.subspace_misalignment,
            "top_vector_overlap": self.top_vector_overlap,
            "retained_dim": self.retained_dim,
            "reference_dim": self.reference_dim,
        }


def robust_spectral_intervention(
    signal: Signal,
    plan: ThresholdPlan,
    floor: float = PROJECTION_FLOOR,
    dec: SpectralDecomposition | None = None,
    target_expenditure: float = 1.0,
) -> Intervention:
    """sigma = e * P q0_hat / ||P q0_hat||^2 with P the projection onto the
    observed eigenspace at ``plan.m_hat``.

    The scaling makes the predicted expenditure sigma . q0_hat exactly the
    target ``e`` (default 1). Raises if no eigenvalue clears the threshold or
    the projection norm is at or below ``floor``.
    """
    if dec is None:
        dec = decompose(signal.d_hat)
    space = eigenspace_at(dec, plan.m_hat)
    if space.is_empty:
        raise NoRecoverableStructureError(
            f"no observed eigenvalue reaches {plan.m_hat:.6g}"
        )
    proj = project(space, signal.q0_hat)
    norm = float(np.linalg.norm(proj))
    if norm <= floor:
        raise DegenerateProjectionError(
            f"projection norm {norm:.3e} at or below floor {floor:.3e}"
        )
    return Intervention(sigma=(target_expenditure / norm**2) * proj)


def first_eigenvector_intervention(
    signal: Signal,
    target_expenditure: float = 1.0,
    floor: float = PROJECTION_FLOOR,
    dec: SpectralDecomposition | None = None,
) -> Intervention:
    """Intervene along the top-|eigenvalue| eigenvector of the observed matrix,
    scaled so the predicted expenditure equals ``target_expenditure``.

    sigma = target * u1_hat / (u1_hat . q0_hat); the division also orients the
    subsidy so spending is positive regardless of the eigenvector's sign.
    """
    if dec is None:
        dec = decompose(signal.d_hat)
    if dec.n >= 2:
        lam = np.abs(dec.eigenvalues)
        if abs(lam[0] - lam[1]) <= 1e-9 * max(1.0, lam[0]):
            warnings.warn(
                "top eigenvalue is degenerate; using the decomposition's "
                "deterministic first column",
                stacklevel=2,
            )
    u1 = dec.top_vector()
    denom = float(u1 @ signal.q0_hat)
    if abs(denom) <= floor:
        raise DegenerateProjectionError(
            f"|u1 . q0_hat| = {abs(denom):.3e} at or below floor {floor:.3e}"
        )
    return Intervention(sigma=(target_expenditure / denom) * u1)


def complete_info_intervention(
    state: MarketState,
    target_c_dot: float,
    target_s_dot: float,
    dec: SpectralDecomposition | None = None,
) -> Intervention:
    """Intervention on the true state hitting the requested consumer-surplus
    and expenditure derivatives exactly (producer surplus follows from the
    identity p_dot_surplus = 2 (s_dot - c_dot)).

    When all eigenvalues equal -1 every intervention yields c_dot = s_dot / 2,
    so only those targets are feasible. Otherwise the construction spans two
    eigendirections with distinct eigenvalues and nonzero q0 projections
    (the generic case) and solves the resulting 2x2 linear system.
    """
    if dec is None:
        dec = decompose(state.d)
    lam = dec.eigenvalues
    a = dec.eigenvectors.T @ state.q0

    if np.all(np.abs(lam + 1.0) <= 1e-9):
        if abs(target_c_dot - target_s_dot / 2.0) > 1e-9 * max(1.0, abs(target_s_dot)):
            raise InfeasibleTargetsError(
                "with all eigenvalues equal to -1, only c_dot = s_dot/2 is feasible"
            )
        qnorm = float(np.linalg.norm(state.q0))
        if qnorm <= PROJECTION_FLOOR:
            raise DegenerateProjectionError("q0 is numerically zero")
        return Intervention(sigma=(target_s_dot / qnorm**2) * state.q0)

    pair = None
    for l1 in range(dec.n):
        if abs(a[l1]) <= 1e-8:
            continue
        for l2 in range(l1 + 1, dec.n):
            if abs(lam[l1] - lam[l2]) > 1e-6 and abs(a[l2]) > 1e-8:
                pair = (l1, l2)
                break
        if pair:
            break
    if pair is None:
        raise DegenerateProjectionError(
            "no eigen-pair with distinct eigenvalues and nonzero q0 projections"
        )
    l1, l2 = pair
    # Unknowns are the sigma-coefficients x = u_l1 . sigma, y = u_l2 . sigma:
    #   s_dot = a1 x + a2 y,  c_dot = a1 x / (1+|lam1|) + a2 y / (1+|lam2|).
    k1, k2 = 1.0 + abs(lam[l1]), 1.0 + abs(lam[l2])
    mat = np.array([[a[l1], a[l2]], [a[l1] / k1, a[l2] / k2]])
    x, y = np.linalg.solve(mat, np.array([target_s_dot, target_c_dot]))
    sigma = x * dec.eigenvectors[:, l1] + y * dec.eigenvectors[:, l2]
    return Intervention(sigma=sigma)


def davis_kahan_diagnostics(
    state: MarketState,
    signal: Signal,
    plan: ThresholdPlan,
    dec_true: SpectralDecomposition | None = None,
    dec_hat: SpectralDecomposition | None = None,
) -> RecoveryDiagnostics:
    """Measure subspace recovery: noise norm, eigenvalue gap, the 2||E||/gap
    bound, the realized misalignment ||P_perp P_hat||, and |u1_hat . u1|.

    The retained space comes from the observed matrix at ``plan.m_hat``; the
    reference space from the true matrix at ``plan.m_under`` (or ``m_hat`` if
    no under-threshold was supplied). The gap is the minimum distance between
    retained observed eigenvalues and excluded true eigenvalues.
    """
    if state.n != signal.n:
        raise DimensionMismatchError("state and signal dimensions disagree")
    e_norm = spectral_norm(signal.d_hat - state.d)
    if dec_true is None:
        dec_true = decompose(state.d)
    if dec_hat is None:
        dec_hat = decompose(signal.d_hat)
    m_under = plan.m_under if plan.m_under is not None else plan.m_hat
    space_hat = eigenspace_at(dec_hat, plan.m_hat)
    space_true = eigenspace_at(dec_true, m_under)
    overlap = float(abs(dec_hat.top_vector() @ dec_true.top_vector()))

    gap = float("nan")
    dk_bound = float("nan")
    misalignment = float("nan")
    if not space_hat.is_empty:
        excluded = dec_true.eigenvalues[np.abs(dec_true.eigenvalues) < m_under]
        retained = dec_hat.eigenvalues[list(space_hat.indices)]
        if excluded.size:
            gap = float(np.min(np.abs(retained[:, None] - excluded[None, :])))
            dk_bound = 2.0 * e_norm / gap if gap > 0 else float("inf")
        if not space_true.is_empty:
            b_true, b_hat = space_true.basis, space_hat.basis
            residual = b_hat - b_true @ (b_true.T @ b_hat)
            misalignment = float(np.linalg.norm(residual, 2))
        else:
            misalignment = 1.0 if space_hat.dim else float("nan")
    return RecoveryDiagnostics(
        e_norm=e_norm,
        gap=gap,
        dk_bound=dk_bound,
        subspace_misalignment=misalignment,
        top_vector_overlap=overlap,
        retained_dim=space_hat.dim,
        reference_dim=space_true.dim,
    )


def surplus_under_truth(
    state: MarketState,
    sigma: Intervention,
    dec: SpectralDecomposition | None = None,
) -> SurplusReport:
    """Evaluate an intervention (however it was derived) against the true state."""
    from .spectral import passthrough_spectral

    if dec is None:
        dec = decompose(state.d)
    return passthrough_spectral(state, dec, sigma)


def intervention_to_dict(
    sigma: Intervention,
    rule: str,
    predicted_expenditure: float | None = None,
    plan: ThresholdPlan | None = None,
) -> dict:
    """JSON payload for an intervention: vector, rule name, predicted spend."""
    return {
        "sigma": [float(x) for x in sigma.sigma],
        "predicted_expenditure": predicted_expenditure,
        "rule": rule,
        "thresholds": plan.to_dict() if plan is not None else None,
    }


def intervention_to_csv_text(sigma: Intervention) -> str:
    """Single-column CSV: one per-firm subsidy/tax entry per line."""
    return "\n".join(repr(float(x)) for x in sigma.sigma) + "\n"
