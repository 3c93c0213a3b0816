"""Measurement master equation and quantum trajectories for a monitored two-level atom."""

__version__ = "0.1.0"

from .errors import (
    CompletenessError,
    ConfigurationError,
    DimensionError,
    ImpossibleOutcomeError,
    MMEError,
    NumericalFailure,
    UnsupportedError,
    ValidationError,
)
from .qops import (
    BlochVector,
    DensityOperator,
    StateVector,
    bloch_from_density,
    bloch_from_state,
    commutator,
    dagger,
    density_from_bloch,
    density_from_state,
    expectation,
    fidelity,
    pauli,
    trace,
)
from .measurement import (
    POM,
    KrausSet,
    MeasurementOutcome,
    apply_channel,
    collapse,
    outcome_probabilities,
    pom_from_kraus,
    two_level_kraus,
    two_level_pom,
)
from .mme import MMEModel, Propagation, double_commutator_generator, generator, propagate
from .twolevel import AtomParams, analytic_bloch, bloch_derivatives, gamma_of, hamiltonian
from .traj import (
    TrajectoryConfig,
    TrajectoryRecord,
    iter_ensemble,
    run_ensemble,
    run_trajectory,
    unitary_step,
)
from .analysis import (
    EnsembleAccumulator,
    JumpReport,
    SequenceState,
    detect_jumps,
    ensemble_mean_bloch,
    mini_jump_ratio,
    sequence_state,
    zeno_jump_probability,
)
