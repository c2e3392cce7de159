use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate basis: {0}")]
    NumericalRank(String),

    /// The enumeration visited more nodes than allowed. `best_upper_bound`
    /// carries the smallest norm value seen before giving up, when any.
    #[error("enumeration budget of {budget} nodes exceeded{}", bound_note(best_upper_bound))]
    BudgetExceeded {
        budget: u64,
        best_upper_bound: Option<f64>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sampler produced an inconsistent lattice: {0}")]
    SamplerBug(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn bound_note(b: &Option<f64>) -> String {
    b.map(|v| format!(" (best upper bound so far: {v})")).unwrap_or_default()
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
