use std::fmt;

/// Errors surfaced by the extraction, packing, and execution phases.
#[derive(Debug)]
pub enum Error {
    /// A line of an input file could not be parsed.
    Parse { path: String, line: usize, msg: String },
    /// An adjacency list referenced a vertex never declared on its own line.
    UnresolvedReference { vertex: u64 },
    /// An attribute id did not resolve to a graph element under strict mode.
    UnknownElement { id: String },
    /// A predicate or projection referenced an attribute absent from the schema.
    UnknownAttribute { name: String },
    /// A single subgraph exceeds the bin capacity; sampling is required.
    SubgraphTooLarge { query_vertex: u64, size: u64, capacity: u64 },
    /// The exact solver refuses instances beyond its size limit.
    InstanceTooLarge { subgraphs: usize, limit: usize },
    /// The centralized pipeline's memory budget was exceeded.
    BudgetExceeded { required: u64, budget: u64 },
    /// The distributed pipeline only supports radii up to two.
    UnsupportedRadius { radius: u32 },
    /// A grown partition could not be split below bin capacity.
    PartitionOverflow { partition: usize, size: u64, capacity: u64 },
    /// A bin's resident set disagrees with the packing solution.
    Integrity(String),
    /// A user program violated the view contract.
    ContractViolation(String),
    /// A ghost vertex had no stored owner value at a barrier.
    Consistency(String),
    /// Invalid configuration.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { path, line, msg } => write!(f, "{path}:{line}: {msg}"),
            Error::UnresolvedReference { vertex } => {
                write!(f, "adjacency list references undeclared vertex {vertex}")
            }
            Error::UnknownElement { id } => write!(f, "id {id} not present in graph"),
            Error::UnknownAttribute { name } => write!(f, "unknown attribute '{name}'"),
            Error::SubgraphTooLarge { query_vertex, size, capacity } => write!(
                f,
                "subgraph of query vertex {query_vertex} has size {size} > bin capacity {capacity}; \
                 enable sampling to reduce it"
            ),
            Error::InstanceTooLarge { subgraphs, limit } => write!(
                f,
                "exact solver limited to {limit} subgraphs, got {subgraphs}"
            ),
            Error::BudgetExceeded { required, budget } => write!(
                f,
                "filtered structure needs {required} units > budget {budget}; use the distributed pipeline"
            ),
            Error::UnsupportedRadius { radius } => {
                write!(f, "distributed extraction supports k <= 2, got k = {radius}")
            }
            Error::PartitionOverflow { partition, size, capacity } => write!(
                f,
                "grown partition {partition} has size {size} > capacity {capacity} after bounded splitting"
            ),
            Error::Integrity(msg) => write!(f, "integrity error: {msg}"),
            Error::ContractViolation(msg) => write!(f, "view contract violation: {msg}"),
            Error::Consistency(msg) => write!(f, "consistency error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
