use bandflow::analytics::AnalyticsError;
use bandflow::flow::FlowError;
use bandflow::models::ModelError;
use bandflow::oracle::OracleError;
use bandflow::BandError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_TRUNCATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(
        "truncation not certified: levels up to {n_max} still move by {change:e} \
         between n_trunc={n_trunc} and {doubled}; rerun with a larger --n-trunc or --max-doublings"
    )]
    Truncation { n_max: usize, n_trunc: usize, doubled: usize, change: f64 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Truncation { .. } => EXIT_TRUNCATION,
            CliError::Flow(FlowError::StepUnderflow { .. }) => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        }
    }
}
