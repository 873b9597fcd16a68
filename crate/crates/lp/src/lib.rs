//! LP and MIP engine: a bounded revised simplex that reports duals and Farkas
//! certificates, and a best-bound branch-and-cut with a lazy-row callback.

mod bnb;
mod factor;
mod lptext;
mod problem;
mod simplex;

pub use bnb::{branch_and_cut, BnbConfig, BnbError, CutOracle, MipSolution, MipStatus, NoCuts};
pub use lptext::{parse_lp, write_lp};
pub use problem::{LpProblem, MipProblem, Row, Sense};
pub use simplex::{
    normalize_farkas, solve_lp, verify_farkas, Basis, LpSolution, LpSolver, LpStatus, VarState, FEAS_TOL,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite data: {0}")]
    NonFinite(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
