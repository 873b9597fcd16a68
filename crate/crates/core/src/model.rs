use std::collections::{HashMap, HashSet};

use mcpolicy_lp::{branch_and_cut, BnbConfig, BnbError, LpError, MipProblem, MipSolution, NoCuts, Row, Sense};

use crate::aggregate::AggregationMap;
use crate::tree::ScenarioTree;

/// Coefficients with smaller magnitude are dropped during assembly.
pub const DROP_TOL: f64 = 1e-12;
pub const DEFAULT_COL_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("extensive form would exceed {cap} columns")]
    Overflow { cap: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("aggregation map does not match the tree")]
    AggregationMismatch,
}

/// A variable reference inside a node row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
    Z(usize),
    /// Continuous state of the parent node.
    ParentX(usize),
    /// Integer state of the ancestor `lag` stages up (`lag = 1` is the parent).
    AncestorZ { lag: usize, idx: usize },
}

/// `Σ coef·var (sense) rhs`, where parent terms are written on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRow {
    pub coeffs: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl NodeRow {
    pub fn new(coeffs: Vec<(Var, f64)>, sense: Sense, rhs: f64) -> Self {
        NodeRow { coeffs, sense, rhs }
    }

    /// Rows over integer states only (H z ≥ G z_parent + g).
    pub fn is_pure_z(&self) -> bool {
        self.coeffs.iter().all(|(v, _)| matches!(v, Var::Z(_) | Var::AncestorZ { .. }))
    }

    pub fn has_local(&self) -> bool {
        self.coeffs.iter().any(|(v, _)| matches!(v, Var::Y(_)))
    }

    pub fn max_lag(&self) -> usize {
        self.coeffs
            .iter()
            .map(|(v, _)| match v {
                Var::ParentX(_) => 1,
                Var::AncestorZ { lag, .. } => *lag,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
}

/// All data of one scenario-tree node: costs, bounds and rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeData {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    pub x_lb: Vec<f64>,
    pub x_ub: Vec<f64>,
    pub y_lb: Vec<f64>,
    pub y_ub: Vec<f64>,
    pub z_lb: Vec<f64>,
    pub z_ub: Vec<f64>,
    pub rows: Vec<NodeRow>,
    /// Realization vector fed to decision rules.
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub k: usize,
    pub l: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labels {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
}

impl Labels {
    pub fn generic(d: Dims) -> Self {
        Labels {
            x: (0..d.k).map(|i| format!("x{i}")).collect(),
            y: (0..d.r).map(|i| format!("y{i}")).collect(),
            z: (0..d.l).map(|i| format!("z{i}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Msilp {
    pub tree: ScenarioTree,
    pub data: Vec<NodeData>,
    pub dims: Dims,
    pub labels: Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Dimension,
    Reference,
    Bounds,
    NonFinite,
    Measurability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub node: Option<usize>,
    pub message: String,
}

impl Msilp {
    pub fn new(tree: ScenarioTree, data: Vec<NodeData>, dims: Dims) -> Self {
        Msilp { tree, data, labels: Labels::generic(dims), dims }
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        validate(self)
    }
}

pub fn validate(m: &Msilp) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, node, message: String| out.push(Diagnostic { kind, node, message });
    if m.data.len() != m.tree.len() {
        push(
            DiagnosticKind::Dimension,
            None,
            format!("{} data blocks for {} tree nodes", m.data.len(), m.tree.len()),
        );
        return out;
    }
    let Dims { k, l, r } = m.dims;
    for (n, nd) in m.data.iter().enumerate() {
        let lens = [
            ("c", nd.c.len(), l),
            ("d", nd.d.len(), k),
            ("h", nd.h.len(), r),
            ("x_lb", nd.x_lb.len(), k),
            ("x_ub", nd.x_ub.len(), k),
            ("y_lb", nd.y_lb.len(), r),
            ("y_ub", nd.y_ub.len(), r),
            ("z_lb", nd.z_lb.len(), l),
            ("z_ub", nd.z_ub.len(), l),
        ];
        let mut dims_ok = true;
        for (name, got, want) in lens {
            if got != want {
                dims_ok = false;
                push(DiagnosticKind::Dimension, Some(n), format!("{name} has length {got}, expected {want}"));
            }
        }
        if !dims_ok {
            continue;
        }
        for v in nd.c.iter().chain(&nd.d).chain(&nd.h).chain(&nd.xi) {
            if !v.is_finite() {
                push(DiagnosticKind::NonFinite, Some(n), "non-finite cost or realization".into());
                break;
            }
        }
        let bound_pairs = [(&nd.x_lb, &nd.x_ub, "x"), (&nd.y_lb, &nd.y_ub, "y"), (&nd.z_lb, &nd.z_ub, "z")];
        for (lb, ub, name) in bound_pairs {
            for i in 0..lb.len() {
                if lb[i].is_nan() || ub[i].is_nan() || lb[i] > ub[i] {
                    push(DiagnosticKind::Bounds, Some(n), format!("{name}[{i}] has bounds [{}, {}]", lb[i], ub[i]));
                }
            }
        }
        for i in 0..l {
            if !nd.z_lb[i].is_finite() || !nd.z_ub[i].is_finite() {
                push(DiagnosticKind::Bounds, Some(n), format!("integer state z[{i}] is unbounded"));
            }
        }
        let stage = m.tree.stage(n);
        for (ri, row) in nd.rows.iter().enumerate() {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                push(DiagnosticKind::NonFinite, Some(n), format!("row {ri} has non-finite data"));
            }
            for &(v, _) in &row.coeffs {
                let bad = match v {
                    Var::X(i) | Var::ParentX(i) => i >= k,
                    Var::Y(i) => i >= r,
                    Var::Z(i) => i >= l,
                    Var::AncestorZ { idx, .. } => idx >= l,
                };
                if bad {
                    push(DiagnosticKind::Dimension, Some(n), format!("row {ri} references {v:?} out of range"));
                }
                let lag = match v {
                    Var::ParentX(_) => 1,
                    Var::AncestorZ { lag, .. } => {
                        if lag == 0 {
                            push(DiagnosticKind::Reference, Some(n), format!("row {ri} uses ancestor lag 0"));
                        }
                        lag
                    }
                    _ => 0,
                };
                if lag >= stage {
                    push(DiagnosticKind::Reference, Some(n), format!("row {ri} reaches {lag} stages up from stage {stage}"));
                }
            }
        }
    }
    let mut first: HashMap<(usize, usize), usize> = HashMap::new();
    for n in 0..m.tree.len() {
        let key = (m.tree.stage(n), m.tree.nodes[n].state);
        match first.get(&key) {
            None => {
                first.insert(key, n);
            }
            Some(&o) => {
                if m.data[o] != m.data[n] {
                    push(
                        DiagnosticKind::Measurability,
                        Some(n),
                        format!("nodes {o} and {n} share stage {} and state but carry different data", key.0),
                    );
                }
            }
        }
    }
    out
}

/// An assembled deterministic equivalent plus the map back to node blocks.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub mip: MipProblem,
    pub dims: Dims,
    pub x_start: Vec<usize>,
    pub y_start: Vec<usize>,
    /// First z column of every integer group.
    pub z_start: Vec<usize>,
    pub node_group: Vec<usize>,
}

impl ExtensiveForm {
    pub fn node_x<'a>(&self, sol: &'a [f64], n: usize) -> &'a [f64] {
        &sol[self.x_start[n]..self.x_start[n] + self.dims.k]
    }

    pub fn node_y<'a>(&self, sol: &'a [f64], n: usize) -> &'a [f64] {
        &sol[self.y_start[n]..self.y_start[n] + self.dims.r]
    }

    pub fn group_z<'a>(&self, sol: &'a [f64], g: usize) -> &'a [f64] {
        &sol[self.z_start[g]..self.z_start[g] + self.dims.l]
    }

    /// All integer columns, group-major.
    pub fn z_values(&self, sol: &[f64]) -> Vec<f64> {
        (0..self.z_start.len()).flat_map(|g| self.group_z(sol, g).iter().copied()).collect()
    }

    /// Fixes every integer column to the given group-major values.
    pub fn fix_z(&mut self, z: &[f64]) {
        let l = self.dims.l;
        for (g, &s) in self.z_start.iter().enumerate() {
            for i in 0..l {
                self.mip.lp.col_lb[s + i] = z[g * l + i];
                self.mip.lp.col_ub[s + i] = z[g * l + i];
            }
        }
    }
}

/// Canonical hash key of a row: merged, sorted coefficients plus sense and rhs bits.
pub(crate) fn row_key(row: &Row) -> (Vec<(usize, u64)>, u8, u64) {
    let coeffs = row.coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect();
    let s = match row.sense {
        Sense::Le => 0,
        Sense::Ge => 1,
        Sense::Eq => 2,
    };
    (coeffs, s, row.rhs.to_bits())
}

/// Sorts by column, merges duplicates and drops tiny coefficients.
pub(crate) fn canonical(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|e| e.1.abs() > DROP_TOL);
    out
}

/// Extensive form of P: one integer block per node.
pub fn build_extensive_form(m: &Msilp) -> Result<ExtensiveForm, ModelError> {
    let groups: Vec<usize> = (0..m.tree.len()).collect();
    assemble(m, &groups, m.tree.len(), DEFAULT_COL_CAP)
}

/// Extensive form of P^A: integer blocks indexed by aggregation group.
pub fn build_aggregated_extensive_form(m: &Msilp, agg: &AggregationMap) -> Result<ExtensiveForm, ModelError> {
    if agg.node_group.len() != m.tree.len() {
        return Err(ModelError::AggregationMismatch);
    }
    assemble(m, &agg.node_group, agg.num_groups(), DEFAULT_COL_CAP)
}

fn assemble(m: &Msilp, node_group: &[usize], ngroups: usize, cap: usize) -> Result<ExtensiveForm, ModelError> {
    if let Some(d) = validate(m).first() {
        return Err(ModelError::Invalid(d.message.clone()));
    }
    let Dims { k, l, r } = m.dims;
    let nn = m.tree.len();
    if nn * (k + r) + ngroups * l > cap {
        return Err(ModelError::Overflow { cap });
    }
    let mut mip = MipProblem::default();
    let mut x_start = Vec::with_capacity(nn);
    let mut y_start = Vec::with_capacity(nn);
    for n in 0..nn {
        let nd = &m.data[n];
        let p = m.tree.nodes[n].p;
        x_start.push(mip.lp.num_cols());
        for i in 0..k {
            mip.add_col(p * nd.d[i], nd.x_lb[i], nd.x_ub[i], format!("{}_n{n}", m.labels.x[i]));
        }
        y_start.push(mip.lp.num_cols());
        for i in 0..r {
            mip.add_col(p * nd.h[i], nd.y_lb[i], nd.y_ub[i], format!("{}_n{n}", m.labels.y[i]));
        }
    }
    let mut z_cost = vec![0.0; ngroups * l];
    let mut z_lb = vec![f64::NEG_INFINITY; ngroups * l];
    let mut z_ub = vec![f64::INFINITY; ngroups * l];
    for n in 0..nn {
        let g = node_group[n];
        let nd = &m.data[n];
        for i in 0..l {
            z_cost[g * l + i] += m.tree.nodes[n].p * nd.c[i];
            z_lb[g * l + i] = z_lb[g * l + i].max(nd.z_lb[i]);
            z_ub[g * l + i] = z_ub[g * l + i].min(nd.z_ub[i]);
        }
    }
    let mut z_start = Vec::with_capacity(ngroups);
    for g in 0..ngroups {
        z_start.push(mip.lp.num_cols());
        for i in 0..l {
            let (lb, ub) = (z_lb[g * l + i], z_ub[g * l + i]);
            mip.add_int_col(z_cost[g * l + i], lb, ub, format!("{}_g{g}", m.labels.z[i]));
        }
    }
    let mut seen = HashSet::new();
    for n in 0..nn {
        for (ri, row) in m.data[n].rows.iter().enumerate() {
            let mut coeffs = Vec::with_capacity(row.coeffs.len());
            for &(v, a) in &row.coeffs {
                let col = match v {
                    Var::X(i) => x_start[n] + i,
                    Var::Y(i) => y_start[n] + i,
                    Var::Z(i) => z_start[node_group[n]] + i,
                    Var::ParentX(i) => x_start[m.tree.parent(n).expect("validated")] + i,
                    Var::AncestorZ { lag, idx } => z_start[node_group[m.tree.ancestor(n, lag).expect("validated")]] + idx,
                };
                coeffs.push((col, a));
            }
            let built = Row::new(canonical(coeffs), row.sense, row.rhs);
            if row.is_pure_z() && !seen.insert(row_key(&built)) {
                continue;
            }
            mip.lp.add_named_row(built.coeffs, built.sense, built.rhs, format!("n{n}_r{ri}"));
        }
    }
    Ok(ExtensiveForm { mip, dims: m.dims, x_start, y_start, z_start, node_group: node_group.to_vec() })
}

/// Solves an assembled extensive form by plain branch-and-bound.
pub fn solve_extensive(ef: &ExtensiveForm, cfg: &BnbConfig) -> Result<MipSolution, LpError> {
    branch_and_cut(&ef.mip, &mut NoCuts, cfg).map_err(|e| match e {
        BnbError::Lp(e) => e,
        BnbError::Oracle(never) => match never {},
    })
}
