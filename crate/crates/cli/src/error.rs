use std::fmt;

/// CLI failure, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            CliError::Config(_) => "config error",
            CliError::Io(_) => "I/O error",
            CliError::Numeric(_) => "numeric error",
        };
        write!(f, "{kind}: {}", self.message())
    }
}

impl std::error::Error for CliError {}

/// Attaches the failing step to a library error.
pub trait Context<T> {
    fn step(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for mrf_diph::Result<T> {
    fn step(self, what: &str) -> CliResult<T> {
        self.map_err(|e| match e {
            mrf_diph::Error::Domain(m) => CliError::Config(format!("{what}: {m}")),
            mrf_diph::Error::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
            mrf_diph::Error::Format(m) => CliError::Io(format!("{what}: {m}")),
            mrf_diph::Error::Io(e) => CliError::Io(format!("{what}: {e}")),
        })
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn step(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Io(format!("{what}: {e}")))
    }
}
