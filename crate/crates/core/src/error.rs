use thiserror::Error;

use crate::lattice::LatticeConnection;
use crate::rep_variety::{FlowReport, RepPath, Representation};
use crate::unitary::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is numerically singular (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },

    #[error(
        "U^H V has eigenvalue {eigenvalue} at distance {distance:e} from -1 (principal log branch cut); insert a waypoint"
    )]
    BranchCut { eigenvalue: C64, distance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("generator index {index} out of range for {count} generators")]
    GeneratorOutOfRange { index: usize, count: usize },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("representations live on different presentations")]
    PresentationMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inadmissible Harder-Narasimhan type: {0}")]
    Inadmissible(String),

    #[error("malformed chain: {0}")]
    MalformedChain(String),

    #[error(
        "flow did not converge: residual {:e} after {} iterations",
        .0.report.final_residual,
        .0.report.iterations
    )]
    RepNotConverged(Box<RepFlowFailure>),

    #[error(
        "lattice flow did not converge: residual {:e} after {} iterations",
        .0.report.final_residual,
        .0.report.iterations
    )]
    LatticeNotConverged(Box<LatticeFlowFailure>),

    #[error("path refinement exhausted (max residual {:e}, max step {:e})", .0.max_residual, .0.max_step)]
    RefinementExhausted(Box<RepPath>),
}

impl Error {
    /// True for the failures of iterative numerics (as opposed to bad input).
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::RepNotConverged(_) | Error::LatticeNotConverged(_) | Error::RefinementExhausted(_)
        )
    }
}

/// Best iterate reached by a representation flow that hit its iteration cap.
#[derive(Debug, Clone)]
pub struct RepFlowFailure {
    pub best: Representation,
    pub report: FlowReport,
}

#[derive(Debug, Clone)]
pub struct LatticeFlowFailure {
    pub best: LatticeConnection,
    pub report: FlowReport,
}
