use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("loop length {requested} exceeds the exhaustive enumeration budget {budget}; use sample_loops beyond it")]
    LoopBudget { requested: usize, budget: usize },
    #[error("L = floor(L0/(6R)) = {l} < 4 at L0 = {l0}, R = {r}; pass desk-scale overrides (L, cap)")]
    ScaleTooSmall { l: usize, l0: usize, r: usize },
    #[error("{sites} sites exceed the exact enumeration budget of {budget}")]
    SiteBudget { sites: usize, budget: usize },
    #[error("invalid distribution spec: {0}")]
    Distribution(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Krylov step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("constraint subspace is empty")]
    EmptySubspace,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
