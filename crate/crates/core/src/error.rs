use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised across the crate.
///
/// Row and column indices are zero-based; component numbers are one-based,
/// matching how components are counted in reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("row {0} has no observed entry")]
    EmptyRowProduced(usize),

    #[error("column {0} has fewer than two observed entries")]
    ColumnTooSparse(usize),

    #[error("column {0} has fewer than two observed entries for standardization")]
    TooFewObserved(usize),

    #[error("column {0} has zero observed variance")]
    ZeroVarianceColumn(usize),

    #[error("response has zero variance")]
    ZeroVarianceResponse,

    #[error("cell ({row}, {col}) is out of bounds")]
    OutOfBounds { row: usize, col: usize },

    #[error("requested {requested} components, valid range is 1..={max}")]
    InvalidComponentCount { requested: usize, max: usize },

    #[error("the input must be fully observed")]
    MissingCells,

    #[error("empty {axis} index set at {axis} {index} while extracting component {component}")]
    EmptyIndexSet {
        axis: Axis,
        index: usize,
        component: usize,
    },

    #[error("component {0} did not converge")]
    NoConvergence(usize),

    #[error("component {0} is degenerate (score norm below threshold)")]
    ComponentDegenerate(usize),

    #[error("row has no observed entry")]
    AllMissingRow,

    #[error("Krylov basis matrix is numerically singular at {0} components")]
    SingularKrylovBasis(usize),

    #[error("training fold {0} violates the masked-matrix invariants")]
    FoldDegenerate(usize),

    #[error("invalid fold count {k} for {n} rows")]
    InvalidFolds { k: usize, n: usize },

    #[error("rank {k} must satisfy 1 <= k < {max}")]
    InvalidRank { k: usize, max: usize },

    #[error("invalid missing proportion {0}")]
    InvalidProportion(f64),

    #[error("could not draw a missingness pattern satisfying the invariants")]
    CannotSatisfyInvariants,

    #[error("MAR intercept calibration failed")]
    CalibrationFailure,

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

impl Error {
    /// Short stable identifier, used in result files.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptyRowProduced(_) => "empty_row",
            Error::ColumnTooSparse(_) => "column_too_sparse",
            Error::TooFewObserved(_) => "too_few_observed",
            Error::ZeroVarianceColumn(_) => "zero_variance_column",
            Error::ZeroVarianceResponse => "zero_variance_response",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::InvalidComponentCount { .. } => "invalid_component_count",
            Error::MissingCells => "missing_cells",
            Error::EmptyIndexSet { .. } => "empty_index_set",
            Error::NoConvergence(_) => "no_convergence",
            Error::ComponentDegenerate(_) => "component_degenerate",
            Error::AllMissingRow => "all_missing_row",
            Error::SingularKrylovBasis(_) => "singular_krylov_basis",
            Error::FoldDegenerate(_) => "fold_degenerate",
            Error::InvalidFolds { .. } => "invalid_folds",
            Error::InvalidRank { .. } => "invalid_rank",
            Error::InvalidProportion(_) => "invalid_proportion",
            Error::CannotSatisfyInvariants => "cannot_satisfy_invariants",
            Error::CalibrationFailure => "calibration_failure",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }

    /// Numerical failures, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_)
                | Error::ComponentDegenerate(_)
                | Error::SingularKrylovBasis(_)
                | Error::FoldDegenerate(_)
                | Error::EmptyIndexSet { .. }
                | Error::CalibrationFailure
                | Error::CannotSatisfyInvariants
        )
    }
}

/// Which side of the matrix an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl core::fmt::Display for Axis {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}
