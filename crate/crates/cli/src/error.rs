use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<graph_matern::Error> for CliError {
    fn from(e: graph_matern::Error) -> Self {
        use graph_matern::Error as E;
        match e {
            E::InvalidArgument(_) | E::Ingest { .. } => CliError::Config(e.to_string()),
            E::Io(io) => CliError::Io(io),
            E::Factorization { .. } | E::Solver(_) | E::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}
