"""Supervised bang-bang control of underactuated dynamical systems.

Train binary control policies from short reward probes, classify states
with a locally weighted kernel rule, and drive benchmark systems (Duffing,
reduced Hodgkin-Huxley, thalamic neurons, coupled populations, Lorenz)
toward their control objectives.
"""

from .baselines import (
    PRC,
    LimitCycle,
    NoPeriodicityError,
    OffCycleError,
    compute_prc_direct,
    find_limit_cycle,
    fully_actuated_control,
    lyapunov_control_lorenz,
    phase_of_state,
    prc_sign_control,
    run_fully_actuated,
    validate_desync_policy,
)
from .classifier import (
    Classifier,
    Normalizer,
    decision_region_grid,
    fit_normalizer,
    identity_normalizer,
)
from .closedloop import (
    RunMetrics,
    TrialBatch,
    control_energy,
    effectiveness,
    off_fraction,
    run_closed_loop,
    run_trials,
)
from .integrate import (
    IntegrationBlowupError,
    NoiseSpec,
    SpikeTimeoutError,
    Trajectory,
    add_gaussian_noise,
    detect_population_spikes,
    detect_spike_time,
    read_trajectory_csv,
    rk4_step,
    simulate,
    write_trajectory_csv,
)
from .models import (
    Model,
    StateLabel,
    UnsupportedModelError,
    coupled_thalamic,
    duffing,
    eval_field,
    fixed_points,
    get_model,
    lorenz,
    mean_population_state,
    population_state,
    radial_clock,
    reduced_hh,
    reduced_hh_rest_state,
    thalamic,
)
from .scenarios import (
    ScenarioConfig,
    ScenarioError,
    ScenarioReport,
    SweepResult,
    energy_comparison,
    list_scenarios,
    load_config,
    noise_sweep,
    run_scenario,
    save_config,
    scenario_config,
    spike_time_vs_bound,
)
from .training import (
    DistanceReward,
    LimitCycleSampler,
    PopulationSnapshotSampler,
    SpikeSpreadReward,
    SpikeTimeReward,
    TrainingAbortError,
    TrainingSet,
    UniformBoxSampler,
    corrupt_training_set,
    load_training_set,
    reward_distance,
    reward_negative_spike_time,
    reward_spike_spread,
    save_training_set,
    train_algorithm1,
    train_algorithm2,
)

__version__ = "0.1.0"
