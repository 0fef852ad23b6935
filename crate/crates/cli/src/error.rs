use isingnn_core::exact::InferError;
use isingnn_core::metrics::MetricsError;
use isingnn_core::potentials::PotentialError;
use isingnn_core::MrfError;
use isingnn_gnn::GnnError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ALGORITHM: i32 = 3;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("algorithm: {0}")]
    Algorithm(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Algorithm(_) => EXIT_ALGORITHM,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MrfError> for CliError {
    fn from(e: MrfError) -> Self {
        match e {
            MrfError::GenerationExhausted { .. } => CliError::Algorithm(e.to_string()),
            MrfError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        CliError::Algorithm(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GnnError> for CliError {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::InvalidDims(_) | GnnError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        if is_data_error(&e) {
            CliError::Data(e.to_string())
        } else {
            CliError::Algorithm(e.to_string())
        }
    }
}

fn is_data_error(e: &PotentialError) -> bool {
    match e {
        PotentialError::InsufficientData { .. }
        | PotentialError::NonFinite
        | PotentialError::ZeroVariance
        | PotentialError::ShapeMismatch(_) => true,
        PotentialError::Node { source, .. } | PotentialError::Edge { source, .. } => is_data_error(source),
        _ => false,
    }
}
