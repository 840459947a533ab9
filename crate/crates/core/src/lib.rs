//! Unprojected gradient descent on finite-support convex problems, with the
//! instruments needed to compare sample trajectories against the population
//! trajectory: exact risks, closed-form constructions, proximity and
//! stability experiments, generalization estimates and power-law fits.
//!
//! ```
//! use gdprox::{gd_run_population, hinge_distribution, hinge_objective, GdConfig};
//!
//! let traj = gd_run_population(&hinge_objective(), &hinge_distribution(), &GdConfig::new(0.1, 50)).unwrap();
//! assert_eq!(traj.steps(), 50);
//! ```

pub mod constructions;
pub mod distributions;
pub mod error;
pub mod gd_engine;
pub mod generalization;
pub mod objectives;
pub mod presets;
pub mod proximity;
pub mod ratefit;
pub mod stats;
pub mod vector;

pub use constructions::{
    gap_probability_binomial, gap_probability_exact, gap_probability_mc, gn_evaluate,
    gn_evaluate_engine, gn_grid_optimize, linear_closed_form, nonsmooth_event_probability,
    nonsmooth_trajectory_check, GnEstimate, GnTerms, GnVariant, LinearConstruction,
    NonsmoothConstruction,
};
pub use distributions::{
    empirical_risk, population_risk, population_subgrad, replicate_rng, sample, FiniteDistribution,
    Measure, SampleSet,
};
pub use error::{Error, Result};
pub use gd_engine::{
    average_iterate, constrained_erm_oracle, gd_run_empirical, gd_run_lean, gd_run_measure,
    gd_run_population, optimization_bound, Averaging, GdConfig, OracleResult, Source, Trajectory,
    ORACLE_BUDGET,
};
pub use generalization::{
    clip, excess_population_risk, excess_rate_experiment, hp_experiment, rademacher_glm_ball,
    rademacher_linear, ClipSpec, ShiftedBall,
};
pub use objectives::{
    instance_subgrad, instance_value, loss_subgrad, loss_value, ConvexObjective, Instance,
    InstanceObjective, LossKind, ScalarLoss,
};
pub use presets::{hinge_distribution, hinge_objective, Preset, PresetContext};
pub use proximity::{
    gtilde_terms, proximity_bound_expectation, proximity_bound_highprob, proximity_experiment,
    stability_experiment, trajectory_distance, ProximityReport, ProximitySummary, StabilityReport,
};
pub use ratefit::{exponent_in, fit_power_law, PowerLawFit, RatePoints};
pub use vector::WeightVector;
