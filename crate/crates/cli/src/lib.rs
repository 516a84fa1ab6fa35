//! Command-line front end for fitting, bootstrapping, simulating and
//! plotting cluster-weighted AFT mixtures.

pub mod commands;
pub mod ingest;
pub mod report;

use thiserror::Error;

/// Bad flags or unusable auxiliary inputs detected after argument parsing.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Process exit status for a failed command: 3 when estimation itself
/// failed, 2 for input, schema and usage problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cwaft::Error>() {
            return match e {
                cwaft::Error::AllRestartsFailed { .. } | cwaft::Error::TooFewSuccesses { .. } => 3,
                cwaft::Error::InvalidInput(_)
                | cwaft::Error::CauseOutOfRange { .. }
                | cwaft::Error::DimensionMismatch { .. }
                | cwaft::Error::InvalidMixingWeights { .. } => 2,
                _ => 1,
            };
        }
        if cause.is::<ingest::IngestError>() || cause.is::<report::ReportError>() || cause.is::<UsageError>() {
            return 2;
        }
    }
    1
}
