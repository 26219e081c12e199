use thiserror::Error;

/// Error type shared by every module of the crate.
///
/// The variants mirror the failure classes of the public contracts:
/// bad run parameters (`Config`), violated call contracts such as length
/// mismatches (`Contract`), bad scalar inputs (`Domain`), linear-algebra
/// breakdown (`Numeric`), a time step that failed to converge (`Step`) and
/// an order fit without enough usable points (`Estimation`).
#[derive(Debug, Error)]
pub enum SgpeError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SgpeError>,
    },

    #[error("estimation error: {0}")]
    Estimation(String),
}

impl SgpeError {
    pub(crate) fn at_step(self, step: usize) -> SgpeError {
        SgpeError::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, SgpeError>;
