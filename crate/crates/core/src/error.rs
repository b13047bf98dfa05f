use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("input has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} out of range for {bits}-bit alphabet")]
    SymbolOutOfRange { symbol: u64, bits: u32 },
    #[error("bad layer range [{i}, {j}) for program of length {n}")]
    LayerRange { i: usize, j: usize, n: usize },
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("program is not regular")]
    NotRegular,
    #[error("program is not a permutation program")]
    NotPermutation,
    #[error("alphabet must be binary")]
    NotBinary,
    #[error("invalid labeling: {0}")]
    Labeling(String),
    #[error("enumeration of 2^{bits} items exceeds cap 2^{cap}")]
    CapExceeded { bits: u32, cap: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not doubly stochastic")]
    NotDoublyStochastic,
    #[error("degree k must be odd, got {0}")]
    EvenDegree(usize),
    #[error("n must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("missing table entry B[{0},{1}]")]
    MissingEntry(usize, usize),
    #[error("error budget unmet: measured {measured:e} exceeds budget {budget:e} ({what})")]
    BudgetUnmet { what: String, measured: f64, budget: f64 },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
