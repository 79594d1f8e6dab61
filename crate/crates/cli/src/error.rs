//! Error classes with distinct process exit codes.

use sdoh_core::catalog::CatalogError;
use sdoh_core::client::ClientError;
use sdoh_core::eval::EvalError;
use sdoh_core::panel::IntegrateError;
use sdoh_core::predict::PredictError;
use sdoh_core::prompt::PromptError;
use sdoh_core::run::PipelineError;
use sdoh_core::stats::StatsError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Catalog(CatalogError),
    /// Endpoint and transport failures, annotated with the offending
    /// variable key when one is known.
    Client(String),
    Eval(EvalError),
    Integrate(IntegrateError),
    Predict(PredictError),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Catalog(_) => 3,
            CliError::Client(_) => 4,
            CliError::Eval(_) => 5,
            CliError::Integrate(_) => 6,
            CliError::Predict(_) => 7,
            CliError::Io(_) => 8,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(message) | CliError::Client(message) => write!(f, "{message}"),
            CliError::Catalog(err) => write!(f, "{err}"),
            CliError::Eval(err) => write!(f, "{err}"),
            CliError::Integrate(err) => write!(f, "{err}"),
            CliError::Predict(err) => write!(f, "{err}"),
            CliError::Io(err) => write!(f, "{err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CatalogError> for CliError {
    fn from(err: CatalogError) -> CliError {
        CliError::Catalog(err)
    }
}

impl From<ClientError> for CliError {
    fn from(err: ClientError) -> CliError {
        CliError::Client(err.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> CliError {
        CliError::Eval(err)
    }
}

impl From<IntegrateError> for CliError {
    fn from(err: IntegrateError) -> CliError {
        CliError::Integrate(err)
    }
}

impl From<PredictError> for CliError {
    fn from(err: PredictError) -> CliError {
        CliError::Predict(err)
    }
}

impl From<StatsError> for CliError {
    fn from(err: StatsError) -> CliError {
        CliError::Predict(PredictError::Stats(err))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Io(err)
    }
}

impl From<PromptError> for CliError {
    fn from(err: PromptError) -> CliError {
        CliError::Usage(err.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> CliError {
        match err {
            client @ PipelineError::Client { .. } => CliError::Client(client.to_string()),
            PipelineError::Catalog(err) => CliError::Catalog(err),
            PipelineError::Eval(err) => CliError::Eval(err),
            PipelineError::Io(err) => CliError::Io(err),
        }
    }
}
