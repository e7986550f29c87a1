//! Experiment harness: noisy boolean networks and recovery sweeps.

pub mod boolnet;
pub mod sweep;

pub use boolnet::{
    boolean_step, boolean_step_into, parse_rules, random_andor_network, sample_boolean_trajectory, BoolOp,
    BooleanNetwork, Literal, Rule, RulesError,
};
pub use sweep::{run_sweep, InitKind, ModelSource, ObserverKind, SweepConfig, SweepError, SweepReport, CSV_HEADER};
