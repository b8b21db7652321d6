use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("inverted variable bounds: lower {lower} > upper {upper}")]
    InvertedBounds { lower: f64, upper: f64 },
    #[error("variable x{index} does not belong to this model")]
    ForeignVariable { index: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("model has no variables")]
    EmptyModel,
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
    #[error("external solver failed: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
