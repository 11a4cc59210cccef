use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("register of {requested} qubits exceeds the capacity of {max}")]
    Capacity { requested: usize, max: usize },
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitIndex { index: usize, num_qubits: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("enumeration needs {needed} branches, budget is {budget}; use the sampling method")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("measurement records are not informationally complete: {0}")]
    RankDeficient(String),
    #[error("zero-trace operator")]
    ZeroTrace,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub(crate) fn layout_err(msg: &str) -> Error {
    Error::Layout(msg.into())
}
