use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{what} row {index} sums to {sum}, expected 1 within 1e-12")]
    BadDistribution {
        what: &'static str,
        index: usize,
        sum: f64,
    },
    #[error("{what} contains a negative entry")]
    NegativeEntry { what: &'static str },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("discount factor {0} outside (0, 1]")]
    BadDiscount(f64),
    #[error("observation {observation} has zero probability under action {action} at this belief")]
    ImpossibleObservation { action: usize, observation: usize },
    #[error(
        "backup would create {required} vectors ({actions} actions x {prev_size}^{observations}), cap is {cap}"
    )]
    BackupTooLarge {
        required: u128,
        cap: usize,
        actions: usize,
        prev_size: usize,
        observations: usize,
    },
    #[error("Lagrange multipliers must be nonnegative")]
    NegativeMultiplier,
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("cost channel {0} out of range")]
    BadChannel(usize),
    #[error("instance file: {0}")]
    Format(String),
}
