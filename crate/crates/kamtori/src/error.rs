use thiserror::Error;

pub type Result<T> = std::result::Result<T, KamError>;

#[derive(Debug, Error)]
pub enum KamError {
    #[error("incompatible operands: {0}")]
    SpaceMismatch(String),
    #[error("small divisor at alpha={alpha:?} beta={beta:?}: divisor {divisor:e}")]
    SmallDivisor {
        alpha: Vec<u32>,
        beta: Vec<u32>,
        divisor: f64,
    },
    #[error("resonance <k,omega> = 0 at k={k:?}")]
    Resonance { k: Vec<i64> },
    #[error("contraction failure: {0}")]
    Contraction(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl KamError {
    /// Machine-readable class reported by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            KamError::SmallDivisor { .. } | KamError::Resonance { .. } => "small-divisor",
            KamError::Contraction(_) => "contraction-failure",
            KamError::Parse { .. } => "parse",
            KamError::SpaceMismatch(_) | KamError::Precondition(_) | KamError::Io(_) => {
                "precondition"
            }
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        KamError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
