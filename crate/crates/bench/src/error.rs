use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown scenario `{0}` (see `list-scenarios`)")]
    UnknownScenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("traces differ in length: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no traces to summarize")]
    NoTraces,
    #[error(transparent)]
    Core(#[from] raol_core::Error),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("metadata: {0}")]
    TomlWrite(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
