"""Eigendecomposition of the demand matrix and spectral pass-through formulas.

Eigenpairs are sorted by |eigenvalue| descending and sign-normalized so that
results are deterministic across platforms. An intervention decomposes into
orthogonal per-eigenvector effects; the closed forms here must agree with the
direct linear-solve path in :mod:`spectral_intervene.market` to ~1e-8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricInputError,
    ConvergenceFailureError,
    DimensionMismatchError,
)
from .market import (
    EquilibriumResponse,
    FloatArray,
    Intervention,
    MarketState,
    ModeContribution,
    SurplusReport,
    _freeze,
)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, sorted by |eigenvalue| descending.

    ``eigenvectors[:, l]`` is the unit eigenvector for ``eigenvalues[l]``.
    """

    eigenvalues: FloatArray
    eigenvectors: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "eigenvalues", _freeze(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _freeze(self.eigenvectors))

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def top_vector(self) -> FloatArray:
        return self.eigenvectors[:, 0]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "eigenvectors_row_major": [
                float(x) for x in self.eigenvectors.ravel(order="C")
            ],
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


@dataclass(frozen=True)
class Eigenspace:
    """Span of the eigenvectors whose |eigenvalue| clears a threshold.

    ``basis`` is n x k with orthonormal columns; k = 0 (empty basis) is a
    legitimate value meaning no eigenvalue reached the threshold.
    """

    basis: FloatArray
    threshold: float
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis", _freeze(self.basis))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.dim == 0


def decompose(d: np.ndarray, sym_tol: float = 1e-10) -> SpectralDecomposition:
    """Orthogonally diagonalize a symmetric matrix.

    Sorting is by |eigenvalue| descending with ties broken by the eigensolver's
    ascending-algebraic output order; each eigenvector's sign is fixed so its
    largest-magnitude entry is positive.
    """
    d = np.asarray(d, dtype=np.float64)
    asym = float(np.max(np.abs(d - d.T)))
    if asym > sym_tol:
        raise AsymmetricInputError(f"symmetry violated by {asym:.3e}")
    try:
        vals, vecs = np.linalg.eigh(d)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailureError(str(exc)) from exc
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # Deterministic sign: largest-|entry| coordinate made positive.
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs)


def eigenspace_at(dec: SpectralDecomposition, threshold: float) -> Eigenspace:
    """Eigenspace spanned by eigenvectors with |eigenvalue| >= threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    keep = np.abs(dec.eigenvalues) >= threshold
    idx = tuple(int(i) for i in np.flatnonzero(keep))
    basis = dec.eigenvectors[:, keep]
    return Eigenspace(basis=basis, threshold=float(threshold), indices=idx)


def project(space: Eigenspace, v: np.ndarray) -> FloatArray:
    """Orthogonal projection of v onto the eigenspace (zero if empty)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (space.basis.shape[0],):
        raise DimensionMismatchError(
            f"vector shape {v.shape} vs basis rows {space.basis.shape[0]}"
        )
    if space.is_empty:
        return np.zeros_like(v)
    return space.basis @ (space.basis.T @ v)


def _mode_coefficients(
    dec: SpectralDecomposition, sigma: Intervention
) -> tuple[FloatArray, FloatArray]:
    if sigma.n != dec.n:
        raise DimensionMismatchError(
            f"sigma has {sigma.n} entries, decomposition has {dec.n}"
        )
    b = dec.eigenvectors.T @ sigma.sigma
    absl = np.abs(dec.eigenvalues)
    return b, absl


def passthrough_spectral(
    state: MarketState, dec: SpectralDecomposition, sigma: Intervention
) -> SurplusReport:
    """Surplus derivatives as sums of orthogonal per-eigenmode terms.

    With a_l = u_l . q0 and b_l = u_l . sigma:
      c_dot = sum a_l b_l / (1 + |lam_l|)
      p_dot_surplus = 2 sum a_l b_l |lam_l| / (1 + |lam_l|)
      w_dot = sum a_l b_l |lam_l| / (1 + |lam_l|)
      s_dot = sum a_l b_l
    """
    b, absl = _mode_coefficients(dec, sigma)
    a = dec.eigenvectors.T @ state.q0
    ab = a * b
    c_terms = ab / (1.0 + absl)
    w_terms = ab * absl / (1.0 + absl)
    modes = tuple(
        ModeContribution(
            index=int(i),
            eigenvalue=float(dec.eigenvalues[i]),
            q0_coeff=float(a[i]),
            sigma_coeff=float(b[i]),
            w_dot_term=float(w_terms[i]),
        )
        for i in range(dec.n)
    )
    return SurplusReport(
        c_dot=float(np.sum(c_terms)),
        p_dot_surplus=float(2.0 * np.sum(w_terms)),
        w_dot=float(np.sum(w_terms)),
        s_dot=float(np.sum(ab)),
        mode_contributions=modes,
    )


def price_quantity_spectral(
    dec: SpectralDecomposition, sigma: Intervention
) -> EquilibriumResponse:
    """Price/quantity response assembled from per-eigenvector pass-throughs.

    p_dot = -sum u_l (u_l . sigma) / (1 + |lam_l|),
    q_dot =  sum u_l (u_l . sigma) |lam_l| / (1 + |lam_l|).
    """
    b, absl = _mode_coefficients(dec, sigma)
    p_dot = -dec.eigenvectors @ (b / (1.0 + absl))
    q_dot = dec.eigenvectors @ (b * absl / (1.0 + absl))
    return EquilibriumResponse(p_dot=p_dot, q_dot=q_dot)
