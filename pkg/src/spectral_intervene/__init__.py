"""Spectral pass-through analysis and robust subsidy/tax design for large
differentiated oligopolies observed with noise.

The package splits into: core market types and the direct equilibrium solver
(:mod:`.market`); eigendecomposition and spectral pass-through formulas
(:mod:`.spectral`); noise models for the authority's signal (:mod:`.signals`);
market-state generators (:mod:`.generators`); intervention rules and recovery
diagnostics (:mod:`.rules`); the Monte Carlo harness (:mod:`.harness`) with
canned presets (:mod:`.presets`); and a CLI (:mod:`.cli`).
"""

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
    recoverable_structure_margin,
    sylvester_hadamard,
)
from .harness import (
    SweepConfig,
    SweepResult,
    emit_results,
    load_sweep_config,
    noise_scaling_study,
    prop2_part1_demo,
    prop2_part2_demo,
    run_rep,
    run_sweep,
    summarize,
)
from .market import (
    EquilibriumResponse,
    Intervention,
    MarketState,
    SurplusReport,
    equilibrium_response,
    household_surplus,
    normalize_slutsky,
    surplus_from_response,
    validate_market_state,
)
from .rules import (
    RecoveryDiagnostics,
    ThresholdPlan,
    complete_info_intervention,
    davis_kahan_diagnostics,
    first_eigenvector_intervention,
    robust_spectral_intervention,
    surplus_under_truth,
)
from .signals import (
    NoiseConfig,
    Signal,
    make_signal,
    sample_household_signal,
    sample_multiplicative_quantity_noise,
    sample_uniform_matrix_noise,
    spectral_norm,
)
from .spectral import (
    Eigenspace,
    SpectralDecomposition,
    decompose,
    eigenspace_at,
    passthrough_spectral,
    price_quantity_spectral,
    project,
)

__version__ = "0.1.0"
