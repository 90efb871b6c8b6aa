"""Constructors for the market-state families used in the experiments.

Four families: the block-plus-low-rank example with tunable structure
strength gamma; two adversarial constructions built on the all-ones projector
and on Sylvester-Hadamard bases; a hedonic (characteristics-space) family
whose eigenvalues are bounded by a constant; plus a planted rank-k family for
trend studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    FTooLargeError,
    InvalidConfigError,
    SingularBError,
)
from .market import FloatArray, MarketState, normalize_slutsky, validate_market_state
from .spectral import decompose, eigenspace_at, project

# Paper-scale defaults for the block example: 3 product categories with
# within-category complements and cross-category substitutes.
DEFAULT_BLOCK_INTERACTIONS = (
    (-1.0, 0.15, 0.7),
    (0.15, -1.0, 0.6),
    (0.7, 0.6, -1.0),
)
DEFAULT_BLOCK_QUANTITIES = (0.1, 0.1, 3.0)


@dataclass(frozen=True)
class BlockExampleConfig:
    """Parameters for the block-plus-low-rank family.

    ``z_cols = None`` means "one column per product" (n x n); that choice
    reproduces the reference spectrum (top two |eigenvalues| ~130 and ~80 at
    gamma = 0.3 with the third ~1.2 for n = 300).
    """

    n: int = 300
    c_matrix: tuple[tuple[float, ...], ...] = DEFAULT_BLOCK_INTERACTIONS
    gamma: float = 0.3
    z_cols: int | None = None
    q_block_base: tuple[float, ...] = DEFAULT_BLOCK_QUANTITIES
    log_mean: float = 1.0
    log_var: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        c = np.asarray(self.c_matrix, dtype=np.float64)
        k = c.shape[0]
        if c.ndim != 2 or c.shape[1] != k:
            raise InvalidConfigError("c_matrix must be square")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise InvalidConfigError("c_matrix must be symmetric")
        if np.max(np.abs(np.diagonal(c) + 1.0)) > 1e-12:
            raise InvalidConfigError("c_matrix diagonal must be -1")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidConfigError("gamma must lie in [0, 1]")
        if self.n % k != 0:
            raise InvalidConfigError(f"block count {k} must divide n = {self.n}")
        if len(self.q_block_base) != k:
            raise InvalidConfigError("q_block_base must have one entry per block")
        if any(q <= 0 for q in self.q_block_base):
            raise InvalidConfigError("q_block_base must be entrywise > 0")
        if self.z_cols is not None and self.z_cols < 1:
            raise InvalidConfigError("z_cols must be >= 1")
        if self.log_var < 0:
            raise InvalidConfigError("log_var must be >= 0")


@dataclass(frozen=True)
class BlockExampleInfo:
    """Pre-normalization diagnostics from one block-example draw."""

    q0_scale: float
    rejections: int
    block_size: int


def _unit_rows(rng: np.random.Generator, rows: int, cols: int) -> FloatArray:
    g = rng.standard_normal((rows, cols))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def gen_block_example(
    cfg: BlockExampleConfig, rng: np.random.Generator, max_rejections: int = 10
) -> tuple[MarketState, BlockExampleInfo]:
    """Draw D = (1-gamma) * (C kron J) + gamma * (-Z Z^T) and a block-based q0.

    Rows of Z are uniform on the unit sphere, so -Z Z^T has exactly -1
    diagonal and the convex combination keeps it. q0 assigns each product its
    block's base quantity times an iid lognormal perturbation, then is
    rescaled to unit norm (the rescale factor is returned; surplus derivatives
    are degree-1 homogeneous in q0, so this only changes units).

    The combination is negative semidefinite for the default C; if a custom C
    breaks that, the draw is rejected and resampled.
    """
    c = np.asarray(cfg.c_matrix, dtype=np.float64)
    k = c.shape[0]
    block = cfg.n // k
    d_block = np.kron(c, np.ones((block, block)))
    z_cols = cfg.n if cfg.z_cols is None else cfg.z_cols

    rejections = 0
    while True:
        z = _unit_rows(rng, cfg.n, z_cols)
        d = (1.0 - cfg.gamma) * d_block - cfg.gamma * (z @ z.T)
        d = 0.5 * (d + d.T)
        lam_max = float(np.linalg.eigvalsh(d)[-1])
        if lam_max <= 1e-9:
            break
        rejections += 1
        if rejections > max_rejections:
            raise InvalidConfigError(
                "block example is not negative semidefinite for this c_matrix"
            )

    base = np.repeat(np.asarray(cfg.q_block_base, dtype=np.float64), block)
    x = np.exp(rng.normal(cfg.log_mean, np.sqrt(cfg.log_var), size=cfg.n))
    q0 = base * x
    scale = float(np.linalg.norm(q0))
    q0 = q0 / scale
    state = MarketState(d=d, q0=q0)
    return state, BlockExampleInfo(q0_scale=scale, rejections=rejections, block_size=block)


def sylvester_hadamard(m: int) -> np.ndarray:
    """2^m x 2^m Hadamard matrix from the [[H, H], [H, -H]] recursion.

    Integer entries; rows are mutually orthogonal and the first row is all
    ones.
    """
    if m < 1:
        raise InvalidConfigError("m must be >= 1")
    h = np.array([[1]], dtype=np.int64)
    for _ in range(m):
        h = np.block([[h, h], [h, -h]])
    return h


def gen_prop2_part1(n: int):
    """All-ones-projector market with a null direction.

    Returns ``(d_star, make_q0)``: d_star = -(n/(n-1)) I + (1/(n-1)) 1 1^T has
    eigenvalue 0 on the all-ones direction and -n/(n-1) on its complement.
    ``make_q0(r)`` maps a unit vector r orthogonal to the all-ones vector to
    the quantity vector (1/n)(1 + r/2), which has norm <= 1.
    """
    if n < 2:
        raise InvalidConfigError("n must be >= 2")
    d_star = -(n / (n - 1.0)) * np.eye(n) + (1.0 / (n - 1.0)) * np.ones((n, n))
    ones = np.ones(n)

    def make_q0(r: np.ndarray) -> FloatArray:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (n,):
            raise DimensionMismatchError(f"r must have length {n}")
        if abs(float(r @ ones)) > 1e-8 * np.sqrt(n):
            raise InvalidConfigError("r must be orthogonal to the all-ones vector")
        if abs(float(np.linalg.norm(r)) - 1.0) > 1e-8:
            raise InvalidConfigError("r must be a unit vector")
        return (ones + 0.5 * r) / n

    return d_star, make_q0


def adversarial_q0_for_sigma(d_star: np.ndarray, sigma: np.ndarray) -> FloatArray:
    """Quantity vector under which the given intervention cannot raise total
    surplus on the all-ones-projector market.

    Splits sigma into its all-ones component and the orthogonal remainder,
    orients the remainder so its coefficient in sigma is <= 0, and places q0
    at (1/n)(1 + u/2) along that direction. If sigma is parallel to the
    all-ones vector, any orthogonal unit direction works (the surplus effect
    is exactly zero); a fixed one is chosen for determinism.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    if np.asarray(d_star).shape != (n, n):
        raise DimensionMismatchError("d_star and sigma dimensions disagree")
    if not np.any(sigma):
        raise InvalidConfigError("sigma must be nonzero")
    ones = np.ones(n)
    u1 = ones / np.sqrt(n)
    perp = sigma - (sigma @ u1) * u1
    perp_norm = float(np.linalg.norm(perp))
    if perp_norm <= 1e-12 * float(np.linalg.norm(sigma)):
        r = np.zeros(n)
        r[0], r[1] = 1.0, -1.0
        u2 = r / np.sqrt(2.0)
    else:
        u2 = -perp / perp_norm  # makes u2 . sigma = -||perp|| <= 0
    return (ones + 0.5 * u2) / n


@dataclass(frozen=True)
class Prop2P2Config:
    """Rank-one-spike family on a Hadamard basis: n = 2^m products.

    ``f`` scales the +-1 residual loadings of q0; None picks 1/sqrt(n), well
    inside the ||q0|| <= 1 budget (which requires f <= sqrt(3/(n-1))).
    """

    m: int = 6
    f: float | None = None
    sign_seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidConfigError("m must be >= 1")
        if self.f is not None and self.f < 0:
            raise InvalidConfigError("f must be >= 0")

    @property
    def n(self) -> int:
        return 2**self.m

    @property
    def f_value(self) -> float:
        return float(1.0 / np.sqrt(self.n)) if self.f is None else float(self.f)


def gen_prop2_part2(cfg: Prop2P2Config, rng: np.random.Generator) -> MarketState:
    """Spiked market D = -(n/2) u1 u1^T - I/2 with sign-randomized q0.

    Eigenvalues are -(n+1)/2 (once, on the all-ones direction) and -1/2;
    the diagonal is exactly -1. q0 = (u1 + f * sum_{l>=2} s_l u_l) / 2 with
    iid fair signs s_l, so its projection onto the spike direction is 1/2.
    """
    n = cfg.n
    f = cfg.f_value
    if f > np.sqrt(3.0 / (n - 1)) + 1e-15:
        raise FTooLargeError(
            f"f = {f:.6g} exceeds sqrt(3/(n-1)) = {np.sqrt(3.0 / (n - 1)):.6g}"
        )
    h = sylvester_hadamard(cfg.m).astype(np.float64)
    u = h / np.sqrt(n)  # row l is u^l
    u1 = u[0]
    d = -(n / 2.0) * np.outer(u1, u1) - 0.5 * np.eye(n)
    signs = rng.choice([-1.0, 1.0], size=n - 1)
    q0 = 0.5 * (u1 + f * (signs @ u[1:]))
    return MarketState(d=d, q0=q0)


def gen_hedonic(
    n: int, k: int, alpha: float, rng: np.random.Generator
) -> tuple[MarketState, FloatArray]:
    """Characteristics-space market whose eigenvalues cannot be large.

    Products are columns of a k x n matrix V drawn on the unit sphere; the
    raw demand matrix is -inv(I + alpha (V^T V - I)), whose eigenvalues are
    bounded by 1/(1-alpha) in magnitude. Returns the normalized state and the
    raw eigenvalues (for bound checks). q0 is random nonnegative, unit norm.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidConfigError("alpha must lie in (0, 1)")
    if k < 1:
        raise InvalidConfigError("k must be >= 1")
    v = _unit_rows(rng, n, k).T  # columns are product characteristic vectors
    sim = v.T @ v
    b = np.eye(n) + alpha * (sim - np.eye(n))
    try:
        raw = -np.linalg.inv(b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - alpha < 1 prevents this
        raise SingularBError(str(exc)) from exc
    raw = 0.5 * (raw + raw.T)
    raw_eigs = np.linalg.eigvalsh(raw)
    d_norm, _ = normalize_slutsky(raw)
    q0 = rng.uniform(0.0, 1.0, size=n)
    q0 = q0 / np.linalg.norm(q0)
    return MarketState(d=d_norm, q0=q0), raw_eigs


@dataclass(frozen=True)
class PlantedConfig:
    """Planted low-rank family for recovery-trend studies: n = 2^m.

    D = -strength * sum of `rank` Hadamard-direction projectors - residual I,
    with the residual coefficient set so the diagonal is exactly -1. q0 puts
    norm ``strong_norm`` on the planted space (split evenly) plus +-f loadings
    on the residual directions.
    """

    m: int = 6
    rank: int = 2
    strength: float | None = None  # None -> n/4
    strong_norm: float = 1.0 / np.sqrt(2.0)
    f: float | None = None  # None -> 1/(2 sqrt(n))

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidConfigError("m must be >= 1")
        if not 1 <= self.rank < 2**self.m:
            raise InvalidConfigError("rank must lie in [1, n)")
        if not 0 < self.strong_norm <= 1:
            raise InvalidConfigError("strong_norm must lie in (0, 1]")

    @property
    def n(self) -> int:
        return 2**self.m

    @property
    def strength_value(self) -> float:
        return self.n / 4.0 if self.strength is None else float(self.strength)

    @property
    def f_value(self) -> float:
        return 0.5 / np.sqrt(self.n) if self.f is None else float(self.f)


def gen_planted(cfg: PlantedConfig, rng: np.random.Generator) -> MarketState:
    """Draw a planted-structure state (random signs on the residual loadings)."""
    n, r, s = cfg.n, cfg.rank, cfg.strength_value
    resid = 1.0 - s * r / n
    if resid < 0:
        raise InvalidConfigError("strength * rank / n must be <= 1")
    h = sylvester_hadamard(cfg.m).astype(np.float64)
    u = h / np.sqrt(n)
    strong = u[1 : r + 1]  # skip the all-ones row; any orthonormal +-1 rows do
    d = -s * (strong.T @ strong) - resid * np.eye(n)
    f = cfg.f_value
    weak = np.vstack([u[0:1], u[r + 1 :]])
    norm_sq = cfg.strong_norm**2 + f * f * weak.shape[0]
    if norm_sq > 1.0 + 1e-12:
        raise FTooLargeError("q0 norm would exceed 1; reduce f or strong_norm")
    signs = rng.choice([-1.0, 1.0], size=weak.shape[0])
    q0 = (cfg.strong_norm / np.sqrt(r)) * strong.sum(axis=0) + f * (signs @ weak)
    return MarketState(d=d, q0=q0)


def recoverable_structure_margin(state: MarketState, threshold: float) -> float:
    """Norm of q0's projection onto the eigenspace at the given threshold.

    This is the margin in the (M, delta)-recoverable-structure condition;
    zero when no eigenvalue clears the threshold.
    """
    dec = decompose(state.d)
    space = eigenspace_at(dec, threshold)
    if space.is_empty:
        return 0.0
    return float(np.linalg.norm(project(space, state.q0)))


def assert_valid(state: MarketState, tol: float = 1e-9) -> MarketState:
    """Raise if a generated state violates the market-state invariants."""
    report = validate_market_state(state, tol=tol)
    if report:
        raise InvalidConfigError(
            "generated state violates invariants: "
            + ", ".join(f"{v.name} ({v.magnitude:.3e})" for v in report)
        )
    return state
