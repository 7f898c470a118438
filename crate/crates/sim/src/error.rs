use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rfs_fuse_core::Error),

    #[error("run {run}, step {step}, sensor {sensor}: {source}")]
    Step {
        run: usize,
        step: u64,
        sensor: usize,
        source: rfs_fuse_core::Error,
    },

    #[error("run {run}, step {step}, fusion: {source}")]
    Fusion {
        run: usize,
        step: u64,
        source: rfs_fuse_core::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type SimResult<T> = Result<T, SimError>;
