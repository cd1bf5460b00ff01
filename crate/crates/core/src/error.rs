use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside the admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Grid resolution below the minimum supported by the discretization.
    #[error("grid too coarse: n = {n}, minimum is {min}")]
    GridTooCoarse { n: usize, min: usize },

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Matrix is singular or nearly singular.
    #[error("singular matrix: |det| = {det:.3e}")]
    SingularMatrix { det: f64 },

    /// The complementary function degenerates at the origin, so no
    /// meaningful table can be produced.
    #[error("complementary function is degenerate arbitrarily close to 0")]
    DegenerateComplementary,

    /// The Luxemburg norm solver failed to bracket a root.
    #[error("norm solver overflow: {0}")]
    NormOverflow(String),

    /// A ball that must contain at least one grid cell contains none.
    #[error("ball at ({x}, {y}) with radius {radius} covers no grid cell")]
    EmptyBall { x: f64, y: f64, radius: f64 },

    /// Malformed run configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
