//! Error type shared across the library.

use crate::solver::Partition;

/// Errors produced by graph construction, prediction, aggregation, solving,
/// and artifact I/O.
///
/// Variants are grouped so callers (notably the CLI) can map them onto
/// coarse failure classes: bad parameters, bad data, numerical trouble, and
/// exhausted resource budgets.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data is malformed (bad CSV, non-finite values, id gaps, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// An operation that requires a connected graph received a disconnected
    /// one. Components are listed by their vertex ids so the caller can
    /// report or retry with a denser graph.
    #[error("graph is disconnected: {} components, smallest {:?}", components.len(), smallest_component(components))]
    Disconnected {
        /// Connected components, each sorted ascending, ordered by minimum id.
        components: Vec<Vec<usize>>,
    },

    /// A partition violates a structural requirement (empty cluster, label
    /// out of range, wrong length, disconnected cluster).
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Numerical failure: factorization broke down, matrix not positive
    /// definite after jitter escalation, degenerate variance, ...
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A search or enumeration exceeded its node budget. Carries the best
    /// feasible solution found so far, if any.
    #[error("node budget {budget} exhausted after expanding {expanded} nodes")]
    BudgetExceeded {
        budget: u64,
        expanded: u64,
        incumbent: Option<Box<Partition>>,
    },

    /// An input exceeds the documented size limits of an operation.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A structured text artifact (solution file, LP file, edge list)
    /// failed to parse.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn smallest_component(components: &[Vec<usize>]) -> Vec<usize> {
    components
        .iter()
        .min_by_key(|c| (c.len(), c.first().copied().unwrap_or(0)))
        .cloned()
        .unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse failure class used for process exit codes: 1 usage, 2 data,
    /// 3 numerical, 4 budget/resource.
    pub fn failure_class(&self) -> u8 {
        match self {
            Error::InvalidParameter(_) => 1,
            Error::InvalidData(_)
            | Error::Disconnected { .. }
            | Error::InvalidPartition(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Numerical(_) => 3,
            Error::BudgetExceeded { .. } | Error::ResourceLimit(_) => 4,
        }
    }
}
