//! Bounded revised simplex.
//!
//! Every row `i` gets a logical `s_i = a_i·x` whose bounds encode the sense
//! and right-hand side, so the working system is `A x - s = 0` with box
//! bounds on all `n + m` variables. Cold starts run a composite primal
//! (phase 1 minimises the sum of bound violations of basic variables);
//! warm starts that are dual feasible run the dual simplex first.

use crate::factor::{dense_inverse, BasisInverse};
use crate::problem::{check_row, LpProblem, Row, Sense};
use crate::LpError;

/// Primal feasibility tolerance promised on returned solutions.
pub const FEAS_TOL: f64 = 1e-7;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 60;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarState {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Simplex basis over structural columns followed by one logical per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub head: Vec<usize>,
    pub state: Vec<VarState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Row multipliers, `∂obj/∂rhs`: `>= 0` on `Ge` rows, `<= 0` on `Le` rows.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Infeasibility certificate in the same sign convention as `duals`.
    pub farkas: Option<Vec<f64>>,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpSolution {
    /// Dual objective `Σ y_i b_i + Σ_j d_j x_j` over active bounds, plus the offset.
    pub fn dual_objective(&self, p: &LpProblem) -> f64 {
        let mut v = p.obj_offset;
        for (y, row) in self.duals.iter().zip(&p.rows) {
            v += y * row.rhs;
        }
        for (j, &d) in self.reduced_costs.iter().enumerate() {
            if d > 0.0 {
                v += d * p.col_lb[j];
            } else if d < 0.0 {
                v += d * p.col_ub[j];
            }
        }
        v
    }

    /// Farkas ray with `Le` rows negated, so the system reads `A' x >= b'`
    /// and the ray is nonnegative on every inequality.
    pub fn farkas_normalized(&self, p: &LpProblem) -> Option<Vec<f64>> {
        self.farkas.as_ref().map(|y| normalize_farkas(p, y))
    }
}

pub fn normalize_farkas(p: &LpProblem, y: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(&p.rows)
        .map(|(&v, r)| if r.sense == Sense::Le { -v } else { v })
        .collect()
}

/// Checks that `y` (dual sign convention) proves `p` infeasible:
/// `inf_s yᵀs > sup_x (yᵀA) x` over the row and column boxes.
pub fn verify_farkas(p: &LpProblem, y: &[f64], tol: f64) -> bool {
    if y.len() != p.num_rows() {
        return false;
    }
    if (0..p.num_cols()).any(|j| p.col_lb[j] > p.col_ub[j]) {
        return true;
    }
    let mut lhs = 0.0;
    for (i, row) in p.rows.iter().enumerate() {
        let yi = y[i];
        if yi.abs() <= tol * 1e-2 {
            continue;
        }
        let (lo, hi) = row.sense.activity_bounds(row.rhs);
        let b = if yi > 0.0 { lo } else { hi };
        if !b.is_finite() {
            return false;
        }
        lhs += yi * b;
    }
    let mut ya = vec![0.0; p.num_cols()];
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            ya[j] += y[i] * a;
        }
    }
    let scale = y.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    let mut sup = 0.0;
    for (j, &c) in ya.iter().enumerate() {
        if c.abs() <= tol * scale {
            continue;
        }
        let b = if c > 0.0 { p.col_ub[j] } else { p.col_lb[j] };
        if !b.is_finite() {
            return false;
        }
        sup += c * b;
    }
    lhs - sup > tol * scale
}

enum Outcome {
    Optimal,
    Infeasible(Vec<f64>),
    Unbounded,
    /// Dual simplex gave up; continue with the primal.
    Stalled,
}

/// Stateful solver supporting bound/rhs changes and row additions between solves.
#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    obj: Vec<f64>,
    offset: f64,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Row>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    pos: Vec<usize>,
    x: Vec<f64>,
    inv: BasisInverse,
    inv_valid: bool,
    since_refactor: usize,
    iterations: usize,
    iteration_limit: Option<usize>,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl LpSolver {
    pub fn new(p: &LpProblem) -> Result<Self, LpError> {
        p.check()?;
        let n = p.num_cols();
        let m = p.num_rows();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        let mut lb = p.col_lb.clone();
        let mut ub = p.col_ub.clone();
        for row in &p.rows {
            let (lo, hi) = row.sense.activity_bounds(row.rhs);
            lb.push(lo);
            ub.push(hi);
        }
        let mut s = LpSolver {
            n,
            m,
            obj: p.obj.clone(),
            offset: p.obj_offset,
            cols,
            rows: p.rows.clone(),
            lb,
            ub,
            state: vec![VarState::Lower; n + m],
            head: Vec::new(),
            pos: Vec::new(),
            x: vec![0.0; n + m],
            inv: BasisInverse::default(),
            inv_valid: false,
            since_refactor: 0,
            iterations: 0,
            iteration_limit: None,
            y: Vec::new(),
            alpha: Vec::new(),
        };
        s.reset_basis();
        Ok(s)
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn set_iteration_limit(&mut self, limit: Option<usize>) {
        self.iteration_limit = limit;
    }

    /// All-logical basis.
    pub fn reset_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.head = (n..n + m).collect();
        self.pos = vec![NONE; n + m];
        for j in 0..n {
            self.state[j] = self.nonbasic_default(j);
        }
        for i in 0..m {
            self.state[n + i] = VarState::Basic;
            self.pos[n + i] = i;
        }
        self.inv = BasisInverse::neg_identity(m);
        self.inv_valid = true;
        self.since_refactor = 0;
    }

    fn nonbasic_default(&self, v: usize) -> VarState {
        if self.lb[v].is_finite() {
            VarState::Lower
        } else if self.ub[v].is_finite() {
            VarState::Upper
        } else {
            VarState::Free
        }
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    pub fn set_col_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        self.lb[j] = lb;
        self.ub[j] = ub;
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.obj[j] = c;
    }

    pub fn row_rhs(&self, i: usize) -> f64 {
        self.rows[i].rhs
    }

    pub fn set_row_rhs(&mut self, i: usize, rhs: f64) {
        self.rows[i].rhs = rhs;
        let (lo, hi) = self.rows[i].sense.activity_bounds(rhs);
        self.lb[self.n + i] = lo;
        self.ub[self.n + i] = hi;
    }

    pub fn add_row(&mut self, row: Row) -> Result<usize, LpError> {
        self.add_rows(std::slice::from_ref(&row))?;
        Ok(self.m - 1)
    }

    /// Appends rows with their logicals basic; an optimal basis stays dual feasible.
    pub fn add_rows(&mut self, rows: &[Row]) -> Result<(), LpError> {
        for row in rows {
            check_row(row, self.n)?;
        }
        for row in rows {
            let i = self.m;
            let v = self.n + i;
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    self.cols[j].push((i, a));
                }
            }
            let (lo, hi) = row.sense.activity_bounds(row.rhs);
            self.lb.push(lo);
            self.ub.push(hi);
            self.state.push(VarState::Basic);
            self.pos.push(self.head.len());
            self.head.push(v);
            self.x.push(row.activity(&self.x[..self.n]));
            if self.inv_valid {
                let mut nr = vec![0.0; i];
                for &(j, a) in &row.coeffs {
                    let p = self.pos[j];
                    if p != NONE && a != 0.0 {
                        for (t, &b) in nr.iter_mut().zip(self.inv.row(p)) {
                            *t += a * b;
                        }
                    }
                }
                self.inv.push_logical_row(&nr);
            }
            self.rows.push(row.clone());
            self.m += 1;
        }
        Ok(())
    }

    pub fn basis(&self) -> Basis {
        Basis { head: self.head.clone(), state: self.state.clone() }
    }

    /// Installs a basis; one saved before rows were appended is extended by
    /// making the new logicals basic.
    pub fn set_basis(&mut self, b: &Basis) -> Result<(), LpError> {
        let (n, m) = (self.n, self.m);
        let old_m = b.head.len();
        if b.state.len() != n + old_m || old_m > m {
            return Err(LpError::DimensionMismatch(format!(
                "basis for {} rows / {} variables, solver has {} rows",
                old_m,
                b.state.len(),
                m
            )));
        }
        let mut head = b.head.clone();
        let mut state = b.state.clone();
        for i in old_m..m {
            head.push(n + i);
            state.push(VarState::Basic);
        }
        let mut pos = vec![NONE; n + m];
        for (p, &v) in head.iter().enumerate() {
            if v >= n + m || pos[v] != NONE || state[v] != VarState::Basic {
                return Err(LpError::DimensionMismatch("inconsistent basis".into()));
            }
            pos[v] = p;
        }
        if state.iter().filter(|&&s| s == VarState::Basic).count() != m {
            return Err(LpError::DimensionMismatch("inconsistent basis".into()));
        }
        self.head = head;
        self.state = state;
        self.pos = pos;
        self.inv_valid = false;
        Ok(())
    }

    #[inline]
    fn col_dot(&self, v: usize, w: &[f64]) -> f64 {
        if v < self.n {
            self.cols[v].iter().map(|&(i, a)| a * w[i]).sum()
        } else {
            -w[v - self.n]
        }
    }

    fn ftran_var(&self, v: usize, out: &mut Vec<f64>) {
        if v < self.n {
            self.inv.ftran_sparse(&self.cols[v], out);
        } else {
            self.inv.ftran_sparse(&[(v - self.n, -1.0)], out);
        }
    }

    fn snap_nonbasic(&mut self) {
        for v in 0..self.n + self.m {
            let st = self.state[v];
            if st == VarState::Basic {
                continue;
            }
            let (lo, hi) = (self.lb[v], self.ub[v]);
            let st = match st {
                VarState::Lower if lo.is_finite() => VarState::Lower,
                VarState::Upper if hi.is_finite() => VarState::Upper,
                _ => self.nonbasic_default(v),
            };
            self.state[v] = st;
            self.x[v] = match st {
                VarState::Lower => lo,
                VarState::Upper => hi,
                _ => 0.0,
            };
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let (n, m) = (self.n, self.m);
        for _attempt in 0..4 {
            let mut logical_basic = vec![false; m];
            let mut s_pos = Vec::new();
            for (p, &v) in self.head.iter().enumerate() {
                if v >= n {
                    logical_basic[v - n] = true;
                } else {
                    s_pos.push(p);
                }
            }
            let u_rows: Vec<usize> = (0..m).filter(|&i| !logical_basic[i]).collect();
            let k = s_pos.len();
            if u_rows.len() != k {
                return Err(LpError::NumericalFailure("basis has wrong size".into()));
            }
            let mut umap = vec![NONE; m];
            for (ri, &i) in u_rows.iter().enumerate() {
                umap[i] = ri;
            }
            let mut mat = vec![0.0; k * k];
            for (c, &p) in s_pos.iter().enumerate() {
                for &(i, a) in &self.cols[self.head[p]] {
                    if umap[i] != NONE {
                        mat[umap[i] * k + c] = a;
                    }
                }
            }
            match dense_inverse(&mat, k) {
                Ok(minv) => {
                    let mut inv = BasisInverse::zeros(m);
                    for (c, &p) in s_pos.iter().enumerate() {
                        let row = inv.row_mut(p);
                        for (ri, &i) in u_rows.iter().enumerate() {
                            row[i] = minv[c * k + ri];
                        }
                    }
                    for (p, &v) in self.head.iter().enumerate() {
                        if v < n {
                            continue;
                        }
                        let i = v - n;
                        let mut acc = vec![0.0; m];
                        for &(j, a) in &self.rows[i].coeffs {
                            let q = self.pos[j];
                            if q != NONE && a != 0.0 {
                                for (t, &b) in acc.iter_mut().zip(inv.row(q)) {
                                    *t += a * b;
                                }
                            }
                        }
                        acc[i] -= 1.0;
                        inv.row_mut(p).copy_from_slice(&acc);
                    }
                    self.inv = inv;
                    self.inv_valid = true;
                    self.since_refactor = 0;
                    return Ok(());
                }
                Err((bad_cols, free_rows)) => {
                    for (&c, &ri) in bad_cols.iter().zip(&free_rows) {
                        let p = s_pos[c];
                        let j = self.head[p];
                        let (lo, hi) = (self.lb[j], self.ub[j]);
                        let xj = self.x[j];
                        let st = if lo.is_finite() && (!hi.is_finite() || (xj - lo).abs() <= (xj - hi).abs()) {
                            VarState::Lower
                        } else if hi.is_finite() {
                            VarState::Upper
                        } else {
                            VarState::Free
                        };
                        self.state[j] = st;
                        self.x[j] = match st {
                            VarState::Lower => lo,
                            VarState::Upper => hi,
                            _ => 0.0,
                        };
                        self.pos[j] = NONE;
                        let lv = n + u_rows[ri];
                        self.head[p] = lv;
                        self.state[lv] = VarState::Basic;
                        self.pos[lv] = p;
                    }
                }
            }
        }
        Err(LpError::NumericalFailure("basis repair did not converge".into()))
    }

    fn compute_xb(&mut self) {
        let n = self.n;
        let mut r = vec![0.0; self.m];
        for v in 0..n + self.m {
            if self.state[v] == VarState::Basic || self.x[v] == 0.0 {
                continue;
            }
            let xv = self.x[v];
            if v < n {
                for &(i, a) in &self.cols[v] {
                    r[i] -= a * xv;
                }
            } else {
                r[v - n] += xv;
            }
        }
        let mut xb = Vec::new();
        self.inv.ftran_dense(&r, &mut xb);
        for (p, &v) in self.head.iter().enumerate() {
            self.x[v] = xb[p];
        }
    }

    #[inline]
    fn tol_of(b: f64) -> f64 {
        PRIMAL_TOL * (1.0 + b.abs())
    }

    /// Signed bound violation of variable `v` (negative below, positive above).
    #[inline]
    fn violation(&self, v: usize) -> f64 {
        let xv = self.x[v];
        if xv < self.lb[v] - Self::tol_of(self.lb[v]) {
            xv - self.lb[v]
        } else if xv > self.ub[v] + Self::tol_of(self.ub[v]) {
            xv - self.ub[v]
        } else {
            0.0
        }
    }

    fn cost(&self, v: usize) -> f64 {
        if v < self.n {
            self.obj[v]
        } else {
            0.0
        }
    }

    fn compute_duals(&mut self, phase1: bool) {
        let cb: Vec<f64> = self
            .head
            .iter()
            .map(|&v| {
                if phase1 {
                    let e = self.violation(v);
                    if e < 0.0 {
                        -1.0
                    } else if e > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost(v)
                }
            })
            .collect();
        let mut y = std::mem::take(&mut self.y);
        self.inv.btran(&cb, &mut y);
        self.y = y;
    }

    fn reduced_cost(&self, v: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost(v) };
        c - self.col_dot(v, &self.y)
    }

    fn check_iterations(&self) -> Result<(), LpError> {
        let limit = self.iteration_limit.unwrap_or(50 * (self.n + self.m) + 20_000);
        if self.iterations > limit {
            return Err(LpError::NumericalFailure(format!("iteration limit {limit} reached")));
        }
        Ok(())
    }

    fn do_pivot(&mut self, r: usize, q: usize, leave_state: VarState) {
        let leaving = self.head[r];
        self.x[leaving] = match leave_state {
            VarState::Lower => self.lb[leaving],
            VarState::Upper => self.ub[leaving],
            _ => self.x[leaving],
        };
        self.state[leaving] = leave_state;
        self.pos[leaving] = NONE;
        self.head[r] = q;
        self.state[q] = VarState::Basic;
        self.pos[q] = r;
        let alpha = std::mem::take(&mut self.alpha);
        self.inv.pivot(r, &alpha);
        self.alpha = alpha;
        self.since_refactor += 1;
    }

    fn primal(&mut self) -> Result<Outcome, LpError> {
        let nm = self.n + self.m;
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            self.check_iterations()?;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.compute_xb();
            }
            let phase1 = self.head.iter().any(|&v| self.violation(v) != 0.0);
            self.compute_duals(phase1);
            let bland = degenerate > BLAND_AFTER;
            let mut q = NONE;
            let mut best = 0.0;
            let mut dq = 0.0;
            for v in 0..nm {
                let st = self.state[v];
                if st == VarState::Basic {
                    continue;
                }
                let d = self.reduced_cost(v, phase1);
                let score = match st {
                    VarState::Lower if d < -DUAL_TOL && self.ub[v] > self.lb[v] => -d,
                    VarState::Upper if d > DUAL_TOL && self.ub[v] > self.lb[v] => d,
                    VarState::Free if d.abs() > DUAL_TOL => d.abs(),
                    _ => 0.0,
                };
                if score > best {
                    best = score;
                    q = v;
                    dq = d;
                    if bland {
                        break;
                    }
                }
            }
            if q == NONE {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    self.compute_xb();
                    continue;
                }
                if phase1 {
                    return Ok(Outcome::Infeasible(self.y.clone()));
                }
                return Ok(Outcome::Optimal);
            }
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let mut alpha = std::mem::take(&mut self.alpha);
            self.ftran_var(q, &mut alpha);
            self.alpha = alpha;

            // Harris two-pass ratio test on basic variables.
            let mut t_relaxed = f64::INFINITY;
            for (p, &a) in self.alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = self.head[p];
                let rate = -a * dir;
                if let Some((room, _)) = self.room(v, rate, true) {
                    t_relaxed = t_relaxed.min(room / rate.abs());
                }
            }
            let mut leave = NONE;
            let mut leave_state = VarState::Lower;
            let mut t_step = f64::INFINITY;
            let mut best_alpha = 0.0;
            if t_relaxed.is_finite() {
                for (p, &a) in self.alpha.iter().enumerate() {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let v = self.head[p];
                    let rate = -a * dir;
                    if let Some((room, st)) = self.room(v, rate, false) {
                        let t = room / rate.abs();
                        if t > t_relaxed {
                            continue;
                        }
                        let better = if bland {
                            leave == NONE || t < t_step - 1e-12 || (t <= t_step + 1e-12 && v < self.head[leave])
                        } else {
                            a.abs() > best_alpha
                        };
                        if better {
                            leave = p;
                            leave_state = st;
                            t_step = t;
                            best_alpha = a.abs();
                        }
                    }
                }
            }
            let flip = self.ub[q] - self.lb[q];
            if leave == NONE && !flip.is_finite() {
                if phase1 {
                    // Cannot happen in exact arithmetic; rebuild and retry.
                    self.refactor()?;
                    self.compute_xb();
                    degenerate += 1;
                    if degenerate > 10 * BLAND_AFTER {
                        return Err(LpError::NumericalFailure("phase 1 ratio test failed".into()));
                    }
                    continue;
                }
                return Ok(Outcome::Unbounded);
            }
            let t = if leave == NONE || flip <= t_step { flip } else { t_step.max(0.0) };
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for (p, &a) in self.alpha.iter().enumerate() {
                if a != 0.0 {
                    let v = self.head[p];
                    self.x[v] -= a * dir * t;
                }
            }
            if leave == NONE || flip <= t_step {
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
            } else {
                self.x[q] += dir * t;
                self.do_pivot(leave, q, leave_state);
            }
        }
    }

    /// Distance basic `v` may travel at `rate` before hitting the bound that
    /// blocks it, and the state it leaves in. `relaxed` widens by the tolerance.
    fn room(&self, v: usize, rate: f64, relaxed: bool) -> Option<(f64, VarState)> {
        let xv = self.x[v];
        let (lo, hi) = (self.lb[v], self.ub[v]);
        let (tl, tu) = if relaxed { (Self::tol_of(lo), Self::tol_of(hi)) } else { (0.0, 0.0) };
        if rate < 0.0 {
            if xv > hi + Self::tol_of(hi) {
                Some(((xv - hi + tu).max(0.0), VarState::Upper))
            } else if xv >= lo - Self::tol_of(lo) && lo.is_finite() {
                Some(((xv - lo + tl).max(0.0), VarState::Lower))
            } else {
                None
            }
        } else if xv < lo - Self::tol_of(lo) {
            Some(((lo - xv + tl).max(0.0), VarState::Lower))
        } else if xv <= hi + Self::tol_of(hi) && hi.is_finite() {
            Some(((hi - xv + tu).max(0.0), VarState::Upper))
        } else {
            None
        }
    }

    fn dual_feasible(&mut self) -> bool {
        self.compute_duals(false);
        for v in 0..self.n + self.m {
            let st = self.state[v];
            if st == VarState::Basic || self.lb[v] == self.ub[v] {
                continue;
            }
            let d = self.reduced_cost(v, false);
            let ok = match st {
                VarState::Lower => d >= -DUAL_TOL,
                VarState::Upper => d <= DUAL_TOL,
                _ => d.abs() <= DUAL_TOL,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn dual(&mut self) -> Result<Outcome, LpError> {
        let nm = self.n + self.m;
        let mut degenerate = 0usize;
        let mut rho = Vec::new();
        loop {
            self.iterations += 1;
            self.check_iterations()?;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.compute_xb();
            }
            let bland = degenerate > BLAND_AFTER;
            let mut r = NONE;
            let mut worst = 0.0;
            for (p, &v) in self.head.iter().enumerate() {
                let e = self.violation(v).abs();
                if e > worst && (!bland || r == NONE || v < self.head[r]) {
                    worst = e;
                    r = p;
                }
            }
            if r == NONE {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    self.compute_xb();
                    continue;
                }
                return Ok(Outcome::Optimal);
            }
            let lv = self.head[r];
            let below = self.violation(lv) < 0.0;
            rho.clear();
            rho.extend_from_slice(self.inv.row(r));
            self.compute_duals(false);

            let mut cand: Vec<(usize, f64, f64)> = Vec::new();
            let mut t_relaxed = f64::INFINITY;
            for v in 0..nm {
                let st = self.state[v];
                if st == VarState::Basic || self.lb[v] == self.ub[v] {
                    continue;
                }
                let a = self.col_dot(v, &rho);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_lv changes by -a per unit increase of v.
                let up_ok = matches!(st, VarState::Lower | VarState::Free);
                let down_ok = matches!(st, VarState::Upper | VarState::Free);
                let eligible = if below { (a < 0.0 && up_ok) || (a > 0.0 && down_ok) } else { (a > 0.0 && up_ok) || (a < 0.0 && down_ok) };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(v, false);
                let dd = match st {
                    VarState::Lower => d.max(0.0),
                    VarState::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                t_relaxed = t_relaxed.min((dd + DUAL_TOL) / a.abs());
                cand.push((v, a, dd / a.abs()));
            }
            if cand.is_empty() {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    self.compute_xb();
                    continue;
                }
                let y: Vec<f64> = if below { rho.iter().map(|v| -v).collect() } else { rho.clone() };
                return Ok(Outcome::Infeasible(y));
            }
            let mut q = NONE;
            let mut best = 0.0;
            let mut best_ratio = f64::INFINITY;
            for &(v, a, ratio) in &cand {
                if ratio > t_relaxed {
                    continue;
                }
                let better = if bland {
                    ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && (q == NONE || v < q))
                } else {
                    a.abs() > best
                };
                if better {
                    q = v;
                    best = a.abs();
                    best_ratio = ratio;
                }
            }
            if q == NONE {
                return Ok(Outcome::Stalled);
            }
            let mut alpha = std::mem::take(&mut self.alpha);
            self.ftran_var(q, &mut alpha);
            self.alpha = alpha;
            let ar = self.alpha[r];
            if ar.abs() <= PIVOT_TOL {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    self.compute_xb();
                    continue;
                }
                return Ok(Outcome::Stalled);
            }
            if best_ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let target = if below { self.lb[lv] } else { self.ub[lv] };
            let delta = (self.x[lv] - target) / ar;
            for (p, &a) in self.alpha.iter().enumerate() {
                if a != 0.0 {
                    let v = self.head[p];
                    self.x[v] -= a * delta;
                }
            }
            self.x[q] += delta;
            let st = if below { VarState::Lower } else { VarState::Upper };
            self.do_pivot(r, q, st);
        }
    }

    fn current_problem_view(&self) -> LpProblem {
        LpProblem {
            obj: self.obj.clone(),
            obj_offset: self.offset,
            col_lb: self.lb[..self.n].to_vec(),
            col_ub: self.ub[..self.n].to_vec(),
            col_names: Vec::new(),
            rows: self.rows.clone(),
            row_names: Vec::new(),
        }
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        self.snap_nonbasic();
        if !self.inv_valid {
            self.refactor()?;
        }
        self.compute_xb();
        let primal_infeasible = self.head.iter().any(|&v| self.violation(v) != 0.0);
        if primal_infeasible && self.dual_feasible() {
            match self.dual()? {
                Outcome::Infeasible(y) => {
                    if verify_farkas(&self.current_problem_view(), &y, 1e-9) {
                        return Ok(self.finish(LpStatus::Infeasible, Some(y)));
                    }
                }
                Outcome::Unbounded => return Ok(self.finish(LpStatus::Unbounded, None)),
                Outcome::Optimal | Outcome::Stalled => {}
            }
        }
        match self.primal()? {
            Outcome::Optimal | Outcome::Stalled => Ok(self.finish(LpStatus::Optimal, None)),
            Outcome::Unbounded => Ok(self.finish(LpStatus::Unbounded, None)),
            Outcome::Infeasible(y) => Ok(self.finish(LpStatus::Infeasible, Some(y))),
        }
    }

    /// Solves from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        for j in 0..self.n {
            if self.lb[j] > self.ub[j] {
                return Ok(self.finish(LpStatus::Infeasible, Some(vec![0.0; self.m])));
            }
        }
        self.iterations = 0;
        let mut last = None;
        for attempt in 0..3 {
            match self.run() {
                Ok(sol) => return Ok(sol),
                Err(e) => {
                    last = Some(e);
                    if attempt == 0 {
                        self.inv_valid = false;
                    } else {
                        self.reset_basis();
                    }
                    self.iterations = 0;
                }
            }
        }
        Err(last.unwrap_or_else(|| LpError::NumericalFailure("solve failed".into())))
    }

    fn finish(&mut self, status: LpStatus, farkas: Option<Vec<f64>>) -> LpSolution {
        let n = self.n;
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = self.offset + self.obj.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
        let (duals, reduced_costs) = if status == LpStatus::Optimal {
            self.compute_duals(false);
            let rc = (0..n)
                .map(|j| if self.state[j] == VarState::Basic { 0.0 } else { self.reduced_cost(j, false) })
                .collect();
            (self.y.clone(), rc)
        } else {
            (vec![0.0; self.m], vec![0.0; n])
        };
        LpSolution {
            status,
            x,
            duals,
            reduced_costs,
            objective,
            farkas,
            basis: self.basis(),
            iterations: self.iterations,
        }
    }
}

/// One-shot solve, optionally warm-started from `warm`.
pub fn solve_lp(p: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    let mut s = LpSolver::new(p)?;
    if let Some(b) = warm {
        s.set_basis(b)?;
    }
    s.solve()
}
