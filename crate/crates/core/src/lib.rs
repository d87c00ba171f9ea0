//! A deterministic federated-learning simulator.
//!
//! A run trains a small classifier over a synthetic, unbalanced, non-IID
//! client population with synchronous rounds. Every round charges four system
//! overheads to a ledger: computation time, transmission time, computation
//! load and transmission load. In `fedtune` mode a controller watches the
//! accuracy curve and the overheads and moves the number of participants `M`
//! and the local passes `E` toward whatever the application's preference over
//! those four overheads favours.
//!
//! ```
//! use flsim::{ExperimentConfig, Mode, run_experiment};
//!
//! let mut cfg = ExperimentConfig::reference().with_mode(Mode::Fixed);
//! cfg.run.round_cap = 2;
//! let trace = run_experiment(&cfg, 1).unwrap();
//! assert_eq!(trace.records.len(), 2);
//! assert_eq!(trace.summary.ledger.rounds, 2);
//! ```
//!
//! Everything is a pure function of the config and the run seed. Identical
//! inputs give byte-identical exports.

pub mod config;
pub mod cost;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod model;
pub mod population;
pub mod rng;
pub mod tuner;

pub use config::{ExperimentConfig, Mode};
pub use cost::{CostConstants, OverheadLedger, Overheads};
pub use engine::{run_round, AggregatorConfig, HyperParams, RoundRecord};
pub use error::{Error, Result};
pub use experiment::{compare_runs, export_trace, run_experiment, sweep, SweepGrid, Trace, TraceSummary};
pub use model::{Architecture, ModelParams};
pub use population::{generate_population, split_train_test, ClientPopulation, PopulationSpec};
pub use tuner::{compare, overall_improvement, Decision, Preference, TunerConfig, TunerState};
