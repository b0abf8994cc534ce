use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] salsa2d::Error),

    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// 1 for numerical failures, 2 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Core(salsa2d::Error::Io { path: path.display().to_string(), source: e })
}
