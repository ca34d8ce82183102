use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The radius law has an infinite second moment, so no padding can
    /// certify the truncation of far-away discs.
    #[error("unpaddable: {0}")]
    Unpaddable(String),

    #[error("infinite second-moment tail for {0}")]
    InfiniteMoment(String),

    /// No Voronoi seed landed in the padded window.
    #[error("empty-window: no seed within the padded window")]
    EmptyWindow,

    #[error("bad-bracket: {0}")]
    BadBracket(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate law: {0}")]
    DegenerateLaw(String),

    #[error("separation violated: {0}")]
    Separation(String),

    #[error("zero estimate at r = {0}; cannot take a logarithm")]
    ZeroEstimate(f64),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Short machine-readable tag used in CLI summaries.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Unpaddable(_) => "unpaddable",
            Error::InfiniteMoment(_) => "infinite-moment",
            Error::EmptyWindow => "empty-window",
            Error::BadBracket(_) => "bad-bracket",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateLaw(_) => "degenerate-law",
            Error::Separation(_) => "separation",
            Error::ZeroEstimate(_) => "zero-estimate",
        }
    }
}
