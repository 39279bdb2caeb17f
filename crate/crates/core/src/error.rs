use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: |H[{row}][{col}] - conj(H[{col}][{row}])| = {defect:.3e}")]
    NotHermitian { row: usize, col: usize, defect: f64 },

    #[error("matrix is not unitary: max |U^dagger U - I| = {defect:.3e} (tolerance {tolerance:.1e})")]
    NotUnitary { defect: f64, tolerance: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized: norm^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("site {site} out of range for a {n_sites}-site lattice")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("all eigenvalues are degenerate within tolerance {tolerance:.3e}")]
    NoDistinctPair { tolerance: f64 },

    #[error("minimizer hit the search window boundary at {at}; widen the window")]
    WindowTooSmall { at: f64 },

    #[error("no oscillation detected: peak {peak:.3e} <= 3 x median floor {floor:.3e}")]
    NoOscillation { peak: f64, floor: f64 },

    #[error("trace spans only {cycles} dominant cycles, need at least 3")]
    TooFewCycles { cycles: usize },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("evaluation time {time} lies beyond the map horizon {horizon}")]
    BeyondHorizon { time: f64, horizon: f64 },

    #[error("Floquet truncation too small: need {needed} sector states beyond the window on each side, have {have}")]
    TruncationTooSmall { needed: i64, have: i64 },

    #[error("no coupling convention reproduces the lattice (deviations: half = {half:.3e}, full = {full:.3e})")]
    ConventionUnresolved { half: f64, full: f64 },

    #[error("cascade chain step {step} inconsistent with order m = {order_m} (expected +/-{expected})")]
    ChainStep { step: i64, order_m: u32, expected: i64 },

    #[error("cascade stage {stage} not resonant: predicted target intensity {intensity:.4}")]
    StageNotResonant { stage: usize, intensity: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
