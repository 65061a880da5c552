use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid study configuration: {0}")]
    Config(String),

    #[error("replication {rep}")]
    Replication {
        rep: usize,
        #[source]
        source: shapemeans::Error,
    },

    #[error(transparent)]
    Core(#[from] shapemeans::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, SimError>;
