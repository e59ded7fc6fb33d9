use thiserror::Error;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent input.
    Input,
    /// A numerical routine failed or a self-check did not hold.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("genus must be at least 1, got {0}")]
    ZeroGenus(usize),
    #[error("generator index {index} out of range for {count} generators")]
    GeneratorOutOfRange { index: usize, count: usize },
    #[error("genus mismatch: expected {expected}, got {found}")]
    GenusMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix assigned to generator {0} is singular")]
    SingularMatrix(usize),
    #[error("character entry {0} is zero")]
    ZeroCharacter(usize),
    #[error("on-site matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("eigensolver did not converge for a {0}x{0} matrix")]
    NoConvergence(usize),
    #[error("empty momentum grid")]
    EmptyGrid,
    #[error("at grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("interpolation residual {residual:.3e} exceeds {threshold:.1e}")]
    InterpolationResidual { residual: f64, threshold: f64 },
    #[error("lattice parameter must have positive imaginary part, got {0}")]
    BadTau(num_complex::Complex64),
    #[error("theta series did not converge within {0} terms")]
    SeriesDivergence(usize),
    #[error("degenerate marked point m = {0}")]
    DegenerateMarkedPoint(num_complex::Complex64),
    #[error("point {0} lies on a pole")]
    OnPole(num_complex::Complex64),
    #[error("quantity is not constant in z (relative spread {0:.3e})")]
    NotConstant(f64),
    #[error("residue is not diagonalizable")]
    NotDiagonalizable,
    #[error("splitting integer k = {k} infeasible for genus {g}")]
    Infeasible { g: usize, k: i64 },
    #[error("entry ({row},{col}) has degree {degree}, bound is {bound}")]
    DegreeBound {
        row: usize,
        col: usize,
        degree: usize,
        bound: usize,
    },
    #[error("polynomial degree {degree} exceeds {bound}")]
    PolynomialDegree { degree: usize, bound: usize },
    #[error("discriminant vanishes identically")]
    ZeroDiscriminant,
    #[error("spectral curve is singular")]
    SingularCurve,
    #[error("odd number of branch points ({0})")]
    OddBranchCount(usize),
    #[error("cover relator permutation is not the identity at sheet {0}")]
    RelatorNotIdentity(usize),
    #[error("invalid permutation for generator {0}")]
    BadPermutation(usize),
    #[error("invalid atom partition: {0}")]
    BadPartition(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoConvergence(_)
            | Error::NonFinite
            | Error::InterpolationResidual { .. }
            | Error::SeriesDivergence(_)
            | Error::NotConstant(_)
            | Error::NotDiagonalizable
            | Error::ZeroDiscriminant
            | Error::SingularCurve
            | Error::OddBranchCount(_)
            | Error::CheckFailed(_) => ErrorClass::Numeric,
            Error::AtGridPoint { source, .. } => source.class(),
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn at_grid_point(index: usize, source: Error) -> Self {
        Error::AtGridPoint {
            index,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
