use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::problem::{MipProblem, Row};
use crate::simplex::{Basis, LpSolver, LpStatus};
use crate::LpError;

/// Lazy-constraint callback, invoked whenever a relaxation solution is integral.
///
/// `x` has integer columns already rounded. Returned rows are added globally.
pub trait CutOracle {
    type Error;
    fn separate(&mut self, x: &[f64]) -> Result<Vec<Row>, Self::Error>;
}

/// Oracle that never cuts.
pub struct NoCuts;

impl CutOracle for NoCuts {
    type Error = std::convert::Infallible;
    fn separate(&mut self, _x: &[f64]) -> Result<Vec<Row>, Self::Error> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub int_tol: f64,
    pub rel_gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig { int_tol: 1e-6, rel_gap: 1e-6, time_limit: None, node_limit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub x: Option<Vec<f64>>,
    /// Incumbent value, `+inf` without one.
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub cuts_added: usize,
    pub lp_iterations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum BnbError<E: fmt::Debug + fmt::Display> {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("cut oracle: {0}")]
    Oracle(E),
}

struct Node {
    id: usize,
    bound: f64,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smaller bound first, then smaller id
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn gap_of(obj: f64, bound: f64) -> f64 {
    if !obj.is_finite() {
        return f64::INFINITY;
    }
    ((obj - bound) / obj.abs().max(1e-9)).max(0.0)
}

/// Best-bound branch-and-cut on most-fractional variables (ties to the lowest index).
pub fn branch_and_cut<O>(p: &MipProblem, oracle: &mut O, cfg: &BnbConfig) -> Result<MipSolution, BnbError<O::Error>>
where
    O: CutOracle,
    O::Error: fmt::Debug + fmt::Display,
{
    p.check()?;
    let start = Instant::now();
    let n = p.lp.num_cols();
    let ints: Vec<usize> = (0..n).filter(|&j| p.integer[j]).collect();
    for &j in &ints {
        if !p.lp.col_lb[j].is_finite() || !p.lp.col_ub[j].is_finite() {
            return Err(LpError::DimensionMismatch(format!("integer column {j} is unbounded")).into());
        }
    }
    let root_lb: Vec<f64> = ints.iter().map(|&j| p.lp.col_lb[j].ceil()).collect();
    let root_ub: Vec<f64> = ints.iter().map(|&j| p.lp.col_ub[j].floor()).collect();
    let mut solver = LpSolver::new(&p.lp)?;
    for (k, &j) in ints.iter().enumerate() {
        solver.set_col_bounds(j, root_lb[k], root_ub[k]);
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, bound: f64::NEG_INFINITY, changes: Vec::new(), basis: None });
    let mut next_id = 1;
    let mut inc_x: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    let mut nodes = 0;
    let mut cuts_added = 0;
    let mut lp_iterations = 0;
    let mut limit_hit = None;

    let prune_tol = |inc: f64| (cfg.rel_gap * inc.abs()).max(1e-9);

    while let Some(node) = heap.pop() {
        if inc_obj.is_finite() && node.bound >= inc_obj - prune_tol(inc_obj) {
            continue;
        }
        if let Some(tl) = cfg.time_limit {
            if start.elapsed() >= tl {
                limit_hit = Some((MipStatus::TimeLimit, node.bound));
                heap.push(node);
                break;
            }
        }
        if let Some(nl) = cfg.node_limit {
            if nodes >= nl {
                limit_hit = Some((MipStatus::NodeLimit, node.bound));
                heap.push(node);
                break;
            }
        }
        nodes += 1;
        for (k, &j) in ints.iter().enumerate() {
            solver.set_col_bounds(j, root_lb[k], root_ub[k]);
        }
        for &(j, lo, hi) in &node.changes {
            solver.set_col_bounds(j, lo, hi);
        }
        if let Some(b) = &node.basis {
            solver.set_basis(b)?;
        }
        loop {
            let sol = solver.solve()?;
            lp_iterations += sol.iterations;
            match sol.status {
                LpStatus::Infeasible => break,
                LpStatus::Unbounded => {
                    return Ok(MipSolution {
                        status: MipStatus::Unbounded,
                        x: None,
                        objective: f64::NEG_INFINITY,
                        bound: f64::NEG_INFINITY,
                        gap: f64::INFINITY,
                        nodes,
                        cuts_added,
                        lp_iterations,
                    })
                }
                LpStatus::Optimal => {}
            }
            if inc_obj.is_finite() && sol.objective >= inc_obj - prune_tol(inc_obj) {
                break;
            }
            let mut branch_col = None;
            let mut most = cfg.int_tol;
            for &j in &ints {
                let v = sol.x[j];
                let frac = (v - v.floor()).min(v.ceil() - v);
                if frac > most + 1e-12 {
                    most = frac;
                    branch_col = Some(j);
                }
            }
            if let Some(j) = branch_col {
                let v = sol.x[j];
                let basis = Rc::new(sol.basis.clone());
                let (lo, hi) = solver.col_bounds(j);
                let mut down = node.changes.clone();
                down.push((j, lo, v.floor()));
                let mut up = node.changes.clone();
                up.push((j, v.ceil(), hi));
                for changes in [down, up] {
                    heap.push(Node { id: next_id, bound: sol.objective, changes, basis: Some(basis.clone()) });
                    next_id += 1;
                }
                break;
            }
            let mut x = sol.x.clone();
            for &j in &ints {
                x[j] = x[j].round();
            }
            let cuts = oracle.separate(&x).map_err(BnbError::Oracle)?;
            let violated: Vec<Row> = cuts
                .into_iter()
                .filter(|r| r.violation(&sol.x) > 1e-9 * (1.0 + r.rhs.abs()))
                .collect();
            if violated.is_empty() {
                inc_obj = p.lp.objective_value(&x);
                inc_x = Some(x);
                break;
            }
            cuts_added += violated.len();
            solver.add_rows(&violated)?;
            if let Some(tl) = cfg.time_limit {
                if start.elapsed() >= tl {
                    limit_hit = Some((MipStatus::TimeLimit, node.bound));
                    break;
                }
            }
        }
        if limit_hit.is_some() {
            heap.push(node);
            break;
        }
    }

    let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let (status, bound) = match limit_hit {
        Some((st, _)) => (st, open_bound.min(inc_obj)),
        None if inc_x.is_some() => (MipStatus::Optimal, inc_obj.min(open_bound)),
        None => (MipStatus::Infeasible, f64::INFINITY),
    };
    Ok(MipSolution {
        status,
        gap: gap_of(inc_obj, bound),
        x: inc_x,
        objective: inc_obj,
        bound,
        nodes,
        cuts_added,
        lp_iterations,
    })
}
