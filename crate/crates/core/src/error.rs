use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatGeoError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("vertex {0} is isolated (zero degree)")]
    IsolatedVertex(usize),

    #[error("graph is disconnected: {components} components with sizes {sizes:?}")]
    Disconnected { components: usize, sizes: Vec<usize> },

    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: &'static str, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HeatGeoError>;

impl HeatGeoError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        HeatGeoError::Parameter(msg.into())
    }

    pub fn numerical(stage: &'static str, msg: impl Into<String>) -> Self {
        HeatGeoError::Numerical {
            stage,
            message: msg.into(),
        }
    }
}
