use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DoaError {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("snapshot has {got} elements, array has {expected}")]
    SnapshotLength { expected: usize, got: usize },

    /// Least-squares system is numerically singular (for example two
    /// support angles closer than the array can separate).
    #[error("degenerate support: condition number {condition:e} exceeds {limit:e}")]
    DegenerateSupport { condition: f64, limit: f64 },

    /// A support element carries (numerically) zero amplitude, so its
    /// pseudo-derivative is undefined.
    #[error("support element {element} has amplitude below the floor")]
    WeakAmplitude { element: usize },

    #[error("support cardinality {cardinality} must be below the element count {elements}")]
    Cardinality { cardinality: usize, elements: usize },

    #[error("exhaustive search supports at most {max} sources, requested {requested}")]
    Capacity { requested: usize, max: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = DoaError> = std::result::Result<T, E>;
