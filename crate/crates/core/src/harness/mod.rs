//! Monte-Carlo experiments over the IDD receiver: BER sweeps, EXIT
//! measurements, LLR consistency, PDA convergence probes and operation
//! counts, plus configuration and CSV output.

pub mod ber;
pub mod complexity;
pub mod config;
pub mod consistency;
pub mod exit;
pub mod link;
pub mod probe;
pub mod report;
pub mod seeding;

use thiserror::Error;

use crate::channel::ChannelError;
use crate::idd::IddError;
use crate::modem::ModemError;

pub use ber::{run_ber_experiment, BerPoint, BerReport};
pub use complexity::{complexity_report, ComplexityRow};
pub use config::ExperimentConfig;
pub use consistency::{consistency_test, ConsistencyReport};
pub use exit::{measure_exit, ExitPoint};
pub use probe::{pda_convergence_probe, ProbeReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("EXIT: {0}")]
    Exit(String),
    #[error("{got} samples, at least {need} required")]
    InsufficientSamples { got: usize, need: usize },
    #[error(transparent)]
    Idd(#[from] IddError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Rayon pool with `workers` threads; 0 uses rayon's default.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))
}
