use thiserror::Error;

/// Errors raised by the trie, its oracle and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid side {0} is not a power of two in [2, 2^31]")]
    InvalidSide(u64),

    #[error("point ({row}, {col}) is outside a {side}x{side} grid")]
    OutOfRange { row: u64, col: u64, side: u64 },

    #[error("invalid rectangle rows {r1}..={r2}, cols {c1}..={c2} on a {side}x{side} grid")]
    InvalidRange {
        r1: u32,
        r2: u32,
        c1: u32,
        c2: u32,
        side: u64,
    },

    #[error("morton code has {got} symbols, grid needs {expected}")]
    WrongLength { got: usize, expected: u32 },

    #[error("symbol {0} is not in 0..=3")]
    InvalidSymbol(u8),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("block holds {occupancy} of {capacity} nodes, cannot add {needed}")]
    Capacity {
        occupancy: usize,
        capacity: usize,
        needed: usize,
    },

    #[error("contract violation: {0}")]
    Contract(&'static str),

    #[error("no node of the block can be split off")]
    SplitImpossible,

    #[error("corrupt structure: {0}")]
    Corrupt(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad serialized stream: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
