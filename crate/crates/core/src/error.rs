use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("line {line}: worker {worker:?} already labeled item {item:?}")]
    DuplicatePair {
        line: u64,
        worker: String,
        item: String,
    },

    #[error("line {line}: label {label} outside 1..={classes}")]
    LabelOutOfRange { line: u64, label: i64, classes: usize },

    #[error("line {line}: unknown item id {id:?}")]
    UnknownItem { line: u64, id: String },

    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    /// Zero responsibility mass on a confusion row with no smoothing.
    #[error("worker index {worker} has no responsibility mass for class {class} (use smoothing > 0)")]
    DegenerateWorker { worker: usize, class: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 usage/validation, 3 data format or I/O, 4 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 2,
            Error::DegenerateWorker { .. } => 4,
            _ => 3,
        }
    }
}
