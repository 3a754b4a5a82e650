use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the crate. Numerical routines that
/// merely fail to converge on some starts report that through their result
/// types; an `Error` always means the input violated a precondition or the
/// computation cannot be interpreted at all.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },

    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("matrix must be square with even side, got {rows}x{cols}")]
    NotEvenSquare { rows: usize, cols: usize },

    #[error(
        "frame lies in the critical set (|det A| = {det_a:.3e}); \
         pullback defect there was {defect:.3e}"
    )]
    CriticalFrame { det_a: f64, defect: f64 },

    #[error("intercepts must all be at least 1")]
    BadIntercept,

    #[error("generating function has no q_{index}^3 term; multiplicity prediction needs a full diagonal cubic part")]
    NonGenericCubic { index: usize },

    #[error("start grid must have at least {min} nodes per axis, got {got}")]
    GridTooCoarse { got: usize, min: usize },

    #[error("search box must satisfy lo < hi componentwise with finite bounds")]
    BadSearchBox,

    #[error("period must be odd and at least 3, got {0}")]
    BadPeriod(usize),

    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("curve is not strictly convex: signed curvature numerator {kappa:.3e} at parameter {theta:.6}")]
    NotConvex { theta: f64, kappa: f64 },

    #[error("curve parameterization is singular near parameter {0:.6}")]
    SingularCurve(f64),

    #[error("point must lie strictly outside the curve")]
    PointNotOutside,

    #[error("tangency solve did not converge on the requested branch")]
    TangencyDiverged,

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
