use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("invalid pretext task: {0}")]
    Task(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("label {label} out of range for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    #[error("class {0} has no labeled examples")]
    Coverage(usize),

    #[error("rate {name} = {value} is outside [0, 1]")]
    Rate { name: &'static str, value: f64 },

    #[error("enumeration of {0} hypotheses exceeds the limit")]
    EnumerationOverflow(u128),

    #[error("zero-probability input {0}")]
    ZeroProbability(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
