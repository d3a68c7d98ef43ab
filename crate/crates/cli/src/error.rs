use ddsd_core::CoreError;
use ddsd_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// `error[<category>]: <message>` on a single line.
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.category(), self.to_string().replace('\n', " "))
    }
}

fn classify_nn(e: &NnError) -> fn(String) -> CliError {
    match e {
        NnError::NonFinite(_) | NnError::NonFiniteGradient(_) => CliError::Numeric,
        NnError::InvalidConfig(_) => CliError::Usage,
        _ => CliError::Data,
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let make = match &e {
            CoreError::Config(_) => CliError::Usage,
            CoreError::NonFinite(_) => CliError::Numeric,
            CoreError::Nn(inner) => classify_nn(inner),
            _ => CliError::Data,
        };
        make(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        classify_nn(&e)(e.to_string())
    }
}
