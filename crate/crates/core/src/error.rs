use thiserror::Error;

/// Errors shared across tree construction, operator evaluation, and the
/// analysis passes. Precondition failures carry enough context to locate the
/// offending vertex or axis without re-running the computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("vertex id {id} out of range ({count} vertices materialized)")]
    VertexOutOfRange { id: u32, count: usize },

    #[error("root has no siblings")]
    RootHasNoSiblings,

    #[error("operation needs depth {needed} but the depth budget is {budget}")]
    DepthBudgetExceeded { needed: u32, budget: u32 },

    #[error("axis {axis} out of range for a {d}-fold product")]
    AxisOutOfRange { axis: usize, d: usize },

    #[error("multi-index has {got} entries, product has {d} axes")]
    IndexLengthMismatch { got: usize, d: usize },

    #[error("vertex {vertex} is not in the interior slice for axes {axes:?}")]
    NotInInteriorSlice { vertex: String, axes: Vec<usize> },

    #[error("operation is defined for 2-fold products only (d = {d})")]
    NotTwoFold { d: usize },

    #[error("branching index exceeds the depth budget on axis {axis}")]
    BranchingUncertified { axis: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("missing explicit weight for axis {axis} at vertex {vertex}")]
    MissingWeight { axis: usize, vertex: String },

    #[error("weight table covers generations below {len}, generation {needed} requested")]
    WeightTableTooShort { needed: u32, len: usize },

    #[error("weights are not commuting: {0}")]
    NotCommuting(String),

    #[error("weights are not torally balanced: {0}")]
    NotTorallyBalanced(String),

    #[error("weights are not spherically balanced: {0}")]
    NotSphericallyBalanced(String),

    #[error("left-invertibility infimum vanishes: {0}")]
    NotLeftInvertible(String),

    #[error("not a contraction: {0}")]
    NotContraction(String),

    #[error("polar factorization precondition failed: {0}")]
    PolarPrecondition(String),

    #[error("kernel computation needs depth budget >= {needed}, have {budget}")]
    KernelBudget { needed: u32, budget: u32 },

    #[error("analytic model precondition failed: {0}")]
    ModelPrecondition(String),

    #[error("{0}")]
    Unsupported(String),
}
