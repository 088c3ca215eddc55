use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {re} + {im}i is not in the open unit disk")]
    OutsideDisk { re: f64, im: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, Error>;
