use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use mcpolicy_lp::{
    branch_and_cut, BnbConfig, BnbError, CutOracle, LpError, LpProblem, LpSolver, LpStatus, MipProblem, MipStatus, Row,
    Sense,
};

use crate::aggregate::AggregationMap;
use crate::model::{build_aggregated_extensive_form, canonical, row_key, validate, Dims, ModelError, Msilp, Var};

/// First-stage column cap; TH grows with the horizon and hits it first.
pub const DEFAULT_LDR_CAP: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum LdrError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("decision-rule model would exceed {cap} first-stage columns")]
    Overflow { cap: usize },
    #[error("first stage is infeasible")]
    InfeasibleModel,
    #[error("feasibility cut requested without a usable Farkas certificate")]
    MissingCertificate,
    #[error("second-stage problem {0} is unbounded")]
    Unbounded(usize),
    #[error("solution has no first-stage values")]
    NoSolution,
    #[error("unknown decision-rule variant {0:?}")]
    UnknownVariant(String),
}

impl From<BnbError<LdrError>> for LdrError {
    fn from(e: BnbError<LdrError>) -> Self {
        match e {
            BnbError::Lp(e) => LdrError::Lp(e),
            BnbError::Oracle(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LdrKind {
    /// One rule per stage over the full realization history.
    Th,
    /// One rule per stage over the current realization.
    T,
    /// One rule per (stage, chain state) over the current realization.
    M,
}

impl LdrKind {
    pub fn name(self) -> &'static str {
        match self {
            LdrKind::Th => "ldr-th",
            LdrKind::T => "ldr-t",
            LdrKind::M => "ldr-m",
        }
    }
}

impl fmt::Display for LdrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LdrKind {
    type Err = LdrError;
    fn from_str(s: &str) -> Result<Self, LdrError> {
        match s.to_ascii_lowercase().trim_start_matches("ldr-") {
            "th" => Ok(LdrKind::Th),
            "t" => Ok(LdrKind::T),
            "m" => Ok(LdrKind::M),
            _ => Err(LdrError::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LdrVariant {
    pub kind: LdrKind,
    /// Appends a constant 1 to every basis vector.
    pub intercept: bool,
}

impl LdrVariant {
    pub fn new(kind: LdrKind) -> Self {
        LdrVariant { kind, intercept: true }
    }
}

/// Which rule a node uses: per stage, or per (stage, state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LamKey {
    pub stage: usize,
    pub state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LamBlock {
    pub key: LamKey,
    /// First column; entry `(i, j)` sits at `start + i·width + j`.
    pub start: usize,
    pub width: usize,
}

/// A distinct second-stage LP `min h·y` with rhs affine in the first-stage columns.
#[derive(Debug, Clone)]
pub struct SecondStage {
    pub stage: usize,
    pub state: usize,
    /// Σ p_n over the member nodes.
    pub weight: f64,
    pub nodes: Vec<usize>,
    pub lp: LpProblem,
    rhs0: Vec<f64>,
    /// Row `i` has rhs `rhs0[i] + Σ g·w` over first-stage columns `w`.
    g: Vec<Vec<(usize, f64)>>,
}

/// θ^L_{t,m}: all second-stage classes of one (stage, state) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrGroup {
    pub stage: usize,
    pub state: usize,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LdrModel {
    pub variant: LdrVariant,
    pub dims: Dims,
    /// First-stage problem over (x_r, y_r, z^A, Λ) without θ.
    pub first: MipProblem,
    pub x0: usize,
    pub y0: usize,
    pub z0: usize,
    pub blocks: Vec<LamBlock>,
    pub node_block: Vec<Option<usize>>,
    pub node_basis: Vec<Vec<f64>>,
    pub classes: Vec<SecondStage>,
    pub groups: Vec<LdrGroup>,
    pub num_z_groups: usize,
}

impl LdrModel {
    pub fn num_second_stage(&self) -> usize {
        self.classes.len()
    }

    /// Column of θ for group `g` in the Benders master.
    pub fn theta_col(&self, g: usize) -> usize {
        self.first.lp.num_cols() + g
    }

    /// `Σ weight·Q` over the classes of group `g` at first-stage point `w`; `None` if any is infeasible.
    pub fn group_value(&self, g: usize, w: &[f64]) -> Result<Option<f64>, LdrError> {
        let mut total = 0.0;
        for &c in &self.groups[g].classes {
            let cl = &self.classes[c];
            let mut lp = cl.lp.clone();
            for (i, row) in lp.rows.iter_mut().enumerate() {
                row.rhs = cl.rhs0[i] + cl.g[i].iter().map(|&(col, a)| a * w[col]).sum::<f64>();
            }
            let sol = mcpolicy_lp::solve_lp(&lp, None)?;
            match sol.status {
                LpStatus::Optimal => total += cl.weight * sol.objective,
                LpStatus::Infeasible => return Ok(None),
                LpStatus::Unbounded => return Err(LdrError::Unbounded(c)),
            }
        }
        Ok(Some(total))
    }

    pub fn num_lambda(&self) -> usize {
        self.blocks.iter().map(|b| b.width * self.dims.k).sum()
    }

    /// Linear expression of `x_n[i]` in first-stage columns.
    pub fn x_expr(&self, n: usize, i: usize) -> Vec<(usize, f64)> {
        match self.node_block[n] {
            None => vec![(self.x0 + i, 1.0)],
            Some(b) => {
                let blk = &self.blocks[b];
                self.node_basis[n]
                    .iter()
                    .enumerate()
                    .filter(|e| *e.1 != 0.0)
                    .map(|(j, &v)| (blk.start + i * blk.width + j, v))
                    .collect()
            }
        }
    }
}

fn basis_of(m: &Msilp, n: usize, v: LdrVariant) -> Vec<f64> {
    let mut b = match v.kind {
        LdrKind::Th => m.tree.path(n).expect("node").into_iter().flat_map(|k| m.data[k].xi.iter().copied()).collect(),
        LdrKind::T | LdrKind::M => m.data[n].xi.clone(),
    };
    if v.intercept {
        b.push(1.0);
    }
    b
}

fn bits(v: f64) -> u64 {
    // merge the two zeros so signatures do not split on sign
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

pub fn build_ldr_model(m: &Msilp, agg: &AggregationMap, v: LdrVariant) -> Result<LdrModel, LdrError> {
    build_ldr_model_capped(m, agg, v, DEFAULT_LDR_CAP)
}

pub fn build_ldr_model_capped(
    m: &Msilp,
    agg: &AggregationMap,
    v: LdrVariant,
    cap: usize,
) -> Result<LdrModel, LdrError> {
    if let Some(d) = validate(m).first() {
        return Err(ModelError::Invalid(d.message.clone()).into());
    }
    if agg.node_group.len() != m.tree.len() {
        return Err(ModelError::AggregationMismatch.into());
    }
    let tree = &m.tree;
    let Dims { k, l, r } = m.dims;
    let root = tree.root();
    let ng = agg.num_groups();

    let node_basis: Vec<Vec<f64>> =
        (0..tree.len()).map(|n| if n == root { Vec::new() } else { basis_of(m, n, v) }).collect();
    let mut blocks: Vec<LamBlock> = Vec::new();
    let mut block_index: HashMap<LamKey, usize> = HashMap::new();
    let mut node_block = vec![None; tree.len()];
    let mut next = k + r + ng * l;
    for n in 0..tree.len() {
        if n == root {
            continue;
        }
        let key = LamKey {
            stage: tree.stage(n),
            state: if v.kind == LdrKind::M { Some(tree.nodes[n].state) } else { None },
        };
        let b = *block_index.entry(key).or_insert_with(|| {
            let width = node_basis[n].len();
            blocks.push(LamBlock { key, start: next, width });
            next += k * width;
            blocks.len() - 1
        });
        if blocks[b].width != node_basis[n].len() {
            return Err(ModelError::Invalid(format!("node {n} has a basis of a different length")).into());
        }
        node_block[n] = Some(b);
        if next > cap {
            return Err(LdrError::Overflow { cap });
        }
    }

    let nd = &m.data[root];
    let mut first = MipProblem::default();
    let x0 = first.lp.num_cols();
    for i in 0..k {
        first.add_col(nd.d[i], nd.x_lb[i], nd.x_ub[i], m.labels.x[i].clone());
    }
    let y0 = first.lp.num_cols();
    for i in 0..r {
        first.add_col(nd.h[i], nd.y_lb[i], nd.y_ub[i], m.labels.y[i].clone());
    }
    let mut cost = vec![0.0; ng * l];
    let mut lb = vec![f64::NEG_INFINITY; ng * l];
    let mut ub = vec![f64::INFINITY; ng * l];
    for n in 0..tree.len() {
        let g = agg.group_of(n);
        for i in 0..l {
            cost[g * l + i] += tree.nodes[n].p * m.data[n].c[i];
            lb[g * l + i] = lb[g * l + i].max(m.data[n].z_lb[i]);
            ub[g * l + i] = ub[g * l + i].min(m.data[n].z_ub[i]);
        }
    }
    let z0 = first.lp.num_cols();
    for g in 0..ng {
        for i in 0..l {
            first.add_int_col(cost[g * l + i], lb[g * l + i], ub[g * l + i], format!("{}_g{g}", m.labels.z[i]));
        }
    }
    for blk in &blocks {
        let tag = match blk.key.state {
            Some(s) => format!("t{}_m{s}", blk.key.stage),
            None => format!("t{}", blk.key.stage),
        };
        for i in 0..k {
            for j in 0..blk.width {
                first.add_col(0.0, f64::NEG_INFINITY, f64::INFINITY, format!("lam_{tag}_{i}_{j}"));
            }
        }
    }

    let mut model = LdrModel {
        variant: v,
        dims: m.dims,
        first,
        x0,
        y0,
        z0,
        blocks,
        node_block,
        node_basis,
        classes: Vec::new(),
        groups: Vec::new(),
        num_z_groups: ng,
    };

    for n in 0..tree.len() {
        if n == root {
            continue;
        }
        let p = tree.nodes[n].p;
        for i in 0..k {
            let d = m.data[n].d[i];
            if d != 0.0 {
                for (c, b) in model.x_expr(n, i) {
                    model.first.lp.obj[c] += p * d * b;
                }
            }
        }
    }

    let mut seen = HashSet::new();
    let mut add_first = |model: &mut LdrModel, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, name: String| {
        let row = Row::new(canonical(coeffs), sense, rhs);
        if row.coeffs.is_empty() && row.violation(&[]) <= 0.0 {
            return;
        }
        if seen.insert(row_key(&row)) {
            model.first.lp.add_named_row(row.coeffs, row.sense, row.rhs, name);
        }
    };

    let mut class_index: HashMap<(usize, usize, Vec<u64>), usize> = HashMap::new();
    for n in 0..tree.len() {
        let nd = &m.data[n];
        let mut local_rows = Vec::new();
        for (ri, row) in nd.rows.iter().enumerate() {
            let mut fs: Vec<(usize, f64)> = Vec::new();
            let mut ys: Vec<(usize, f64)> = Vec::new();
            for &(var, a) in &row.coeffs {
                match var {
                    Var::Y(i) if n == root => fs.push((y0 + i, a)),
                    Var::Y(i) => ys.push((i, a)),
                    Var::X(i) => fs.extend(model.x_expr(n, i).into_iter().map(|(c, b)| (c, a * b))),
                    Var::ParentX(i) => {
                        let p = tree.parent(n).expect("validated");
                        fs.extend(model.x_expr(p, i).into_iter().map(|(c, b)| (c, a * b)));
                    }
                    Var::Z(i) => fs.push((z0 + agg.group_of(n) * l + i, a)),
                    Var::AncestorZ { lag, idx } => {
                        let an = tree.ancestor(n, lag).expect("validated");
                        fs.push((z0 + agg.group_of(an) * l + idx, a));
                    }
                }
            }
            if ys.is_empty() {
                add_first(&mut model, fs, row.sense, row.rhs, format!("n{n}_r{ri}"));
            } else {
                let g: Vec<(usize, f64)> = canonical(fs).into_iter().map(|(c, a)| (c, -a)).collect();
                local_rows.push((canonical(ys), row.sense, row.rhs, g));
            }
        }
        if n == root {
            continue;
        }
        for i in 0..k {
            let e = model.x_expr(n, i);
            if nd.x_lb[i].is_finite() {
                add_first(&mut model, e.clone(), Sense::Ge, nd.x_lb[i], format!("n{n}_xlb{i}"));
            }
            if nd.x_ub[i].is_finite() {
                add_first(&mut model, e, Sense::Le, nd.x_ub[i], format!("n{n}_xub{i}"));
            }
        }
        let mut sig: Vec<u64> = Vec::new();
        for i in 0..r {
            sig.extend([bits(nd.h[i]), bits(nd.y_lb[i]), bits(nd.y_ub[i])]);
        }
        for (ys, sense, rhs, g) in &local_rows {
            sig.push(u64::MAX);
            sig.extend(ys.iter().flat_map(|&(i, a)| [i as u64, bits(a)]));
            let s = match sense {
                Sense::Le => 0,
                Sense::Ge => 1,
                Sense::Eq => 2,
            };
            sig.extend([s, bits(*rhs), u64::MAX - 1]);
            sig.extend(g.iter().flat_map(|&(c, a)| [c as u64, bits(a)]));
        }
        let key = (tree.stage(n), tree.nodes[n].state, sig);
        let p = tree.nodes[n].p;
        if let Some(&c) = class_index.get(&key) {
            model.classes[c].weight += p;
            model.classes[c].nodes.push(n);
            continue;
        }
        let mut lp = LpProblem::default();
        for i in 0..r {
            lp.add_named_col(nd.h[i], nd.y_lb[i], nd.y_ub[i], m.labels.y[i].clone());
        }
        let mut rhs0 = Vec::new();
        let mut gs = Vec::new();
        for (ys, sense, rhs, g) in local_rows {
            lp.add_row(ys, sense, rhs);
            rhs0.push(rhs);
            gs.push(g);
        }
        class_index.insert(key, model.classes.len());
        model.classes.push(SecondStage {
            stage: tree.stage(n),
            state: tree.nodes[n].state,
            weight: p,
            nodes: vec![n],
            lp,
            rhs0,
            g: gs,
        });
    }

    let states = tree.chain_states();
    let mut by_group: BTreeMap<(usize, Vec<i64>, usize), Vec<usize>> = BTreeMap::new();
    for (c, cl) in model.classes.iter().enumerate() {
        by_group.entry((cl.stage, states[cl.state].attrs.clone(), cl.state)).or_default().push(c);
    }
    model.groups = by_group
        .into_iter()
        .map(|((stage, _, state), classes)| LdrGroup { stage, state, classes })
        .collect();
    Ok(model)
}

/// The whole of P^L as one MIP: first stage plus every second-stage class weighted by
/// its probability. Returns the problem and the first column of each class's y block.
pub fn build_ldr_extensive(model: &LdrModel) -> (MipProblem, Vec<usize>) {
    let mut mip = model.first.clone();
    let mut starts = Vec::with_capacity(model.classes.len());
    for (c, cl) in model.classes.iter().enumerate() {
        let y0 = mip.lp.num_cols();
        starts.push(y0);
        for j in 0..cl.lp.num_cols() {
            mip.add_col(
                cl.weight * cl.lp.obj[j],
                cl.lp.col_lb[j],
                cl.lp.col_ub[j],
                format!("{}_c{c}", cl.lp.col_names[j]),
            );
        }
        for (i, row) in cl.lp.rows.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = row.coeffs.iter().map(|&(j, a)| (y0 + j, a)).collect();
            coeffs.extend(cl.g[i].iter().map(|&(col, a)| (col, -a)));
            mip.lp.add_named_row(canonical(coeffs), row.sense, cl.rhs0[i], format!("c{c}_r{i}"));
        }
    }
    (mip, starts)
}

#[derive(Debug, Clone)]
pub struct LdrConfig {
    pub eps: f64,
    /// Lower bound on every θ^L.
    pub theta_lb: f64,
    pub time_limit: Option<Duration>,
    pub rel_gap: f64,
}

impl Default for LdrConfig {
    fn default() -> Self {
        LdrConfig { eps: 1e-6, theta_lb: 0.0, time_limit: None, rel_gap: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LdrStats {
    pub optimality_cuts: usize,
    pub feasibility_cuts: usize,
    pub oracle_calls: usize,
    pub lp_solves: usize,
}

#[derive(Debug, Clone)]
pub struct LdrSolution {
    pub status: MipStatus,
    /// Every cut generated, over (first-stage columns, θ); `group` is `None` for feasibility cuts.
    pub cuts: Vec<LdrCut>,
    pub objective: f64,
    pub bound: f64,
    /// First-stage values (x_r, y_r, z^A, Λ).
    pub first: Vec<f64>,
    pub theta: Vec<f64>,
    pub nodes: usize,
    pub stats: LdrStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdrCut {
    pub group: Option<usize>,
    pub row: Row,
}

struct BendersOracle<'a> {
    model: &'a LdrModel,
    solvers: Vec<LpSolver>,
    th0: usize,
    eps: f64,
    stats: LdrStats,
    cuts: Vec<LdrCut>,
}

impl BendersOracle<'_> {
    fn solve_class(&mut self, c: usize, w: &[f64]) -> Result<mcpolicy_lp::LpSolution, LdrError> {
        let cl = &self.model.classes[c];
        let s = &mut self.solvers[c];
        for (i, g) in cl.g.iter().enumerate() {
            s.set_row_rhs(i, cl.rhs0[i] + g.iter().map(|&(col, a)| a * w[col]).sum::<f64>());
        }
        self.stats.lp_solves += 1;
        let sol = s.solve()?;
        if sol.status == LpStatus::Unbounded {
            return Err(LdrError::Unbounded(c));
        }
        Ok(sol)
    }

    fn feasibility_row(&self, c: usize, y: &[f64]) -> Result<Row, LdrError> {
        let cl = &self.model.classes[c];
        let mut ya = vec![0.0; cl.lp.num_cols()];
        for (row, &yi) in cl.lp.rows.iter().zip(y) {
            for &(j, a) in &row.coeffs {
                ya[j] += yi * a;
            }
        }
        let mut sup = 0.0;
        for (j, &g) in ya.iter().enumerate() {
            if g.abs() <= 1e-12 {
                continue;
            }
            let b = if g > 0.0 { cl.lp.col_ub[j] } else { cl.lp.col_lb[j] };
            if !b.is_finite() {
                return Err(LdrError::MissingCertificate);
            }
            sup += g * b;
        }
        // Σ y_i (rhs0_i + g_i·w) − sup ≤ 0
        let mut coeffs = Vec::new();
        let mut rhs = sup;
        for (i, &yi) in y.iter().enumerate() {
            rhs -= yi * cl.rhs0[i];
            coeffs.extend(cl.g[i].iter().map(|&(col, a)| (col, yi * a)));
        }
        Ok(Row::new(canonical(coeffs), Sense::Le, rhs))
    }
}

impl CutOracle for BendersOracle<'_> {
    type Error = LdrError;

    fn separate(&mut self, w: &[f64]) -> Result<Vec<Row>, LdrError> {
        self.stats.oracle_calls += 1;
        let model = self.model;
        for (gi, grp) in model.groups.iter().enumerate() {
            let mut q = 0.0;
            let mut coef: Vec<(usize, f64)> = Vec::new();
            let mut at_point = 0.0;
            for &c in &grp.classes {
                let sol = self.solve_class(c, w)?;
                if sol.status == LpStatus::Infeasible {
                    let y = sol.farkas.ok_or(LdrError::MissingCertificate)?;
                    self.stats.feasibility_cuts += 1;
                    let row = self.feasibility_row(c, &y)?;
                    self.cuts.push(LdrCut { group: None, row: row.clone() });
                    return Ok(vec![row]);
                }
                let cl = &model.classes[c];
                q += cl.weight * sol.objective;
                for (i, g) in cl.g.iter().enumerate() {
                    let pi = sol.duals[i];
                    if pi == 0.0 {
                        continue;
                    }
                    for &(col, a) in g {
                        coef.push((col, cl.weight * pi * a));
                        at_point += cl.weight * pi * a * w[col];
                    }
                }
            }
            let theta = w[self.th0 + gi];
            if q - theta > self.eps * q.abs() + 1e-9 {
                // θ − Σ coef·w ≥ q − Σ coef·ŵ
                let mut coeffs: Vec<(usize, f64)> = coef.into_iter().map(|(c, a)| (c, -a)).collect();
                coeffs.push((self.th0 + gi, 1.0));
                self.stats.optimality_cuts += 1;
                let row = Row::new(canonical(coeffs), Sense::Ge, q - at_point);
                self.cuts.push(LdrCut { group: Some(gi), row: row.clone() });
                return Ok(vec![row]);
            }
        }
        Ok(Vec::new())
    }
}

/// Benders decomposition with one θ per (stage, state) group.
pub fn benders_solve(model: &LdrModel, cfg: &LdrConfig) -> Result<LdrSolution, LdrError> {
    let mut master = model.first.clone();
    let th0 = master.lp.num_cols();
    for g in &model.groups {
        master.add_col(1.0, cfg.theta_lb, f64::INFINITY, format!("theta_t{}_m{}", g.stage, g.state));
    }
    let solvers = model.classes.iter().map(|c| LpSolver::new(&c.lp)).collect::<Result<Vec<_>, _>>()?;
    let mut oracle = BendersOracle { model, solvers, th0, eps: cfg.eps, stats: LdrStats::default(), cuts: Vec::new() };
    let bnb = BnbConfig { time_limit: cfg.time_limit, rel_gap: cfg.rel_gap, ..BnbConfig::default() };
    let sol = branch_and_cut(&master, &mut oracle, &bnb)?;
    if sol.status == MipStatus::Infeasible {
        return Err(LdrError::InfeasibleModel);
    }
    let x = sol.x.unwrap_or_default();
    let (first, theta) = if x.is_empty() { (Vec::new(), Vec::new()) } else { (x[..th0].to_vec(), x[th0..].to_vec()) };
    Ok(LdrSolution {
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        first,
        theta,
        nodes: sol.nodes,
        stats: oracle.stats,
        cuts: oracle.cuts,
    })
}

/// Per-node continuous states implied by the rule, plus the integer copies.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrPolicy {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub lambda: Vec<(LamKey, Vec<f64>)>,
}

pub fn extract_policy(model: &LdrModel, sol: &LdrSolution) -> Result<LdrPolicy, LdrError> {
    let w = &sol.first;
    if w.len() < model.first.lp.num_cols() {
        return Err(LdrError::NoSolution);
    }
    let k = model.dims.k;
    let x = (0..model.node_block.len())
        .map(|n| (0..k).map(|i| model.x_expr(n, i).iter().map(|&(c, a)| a * w[c]).sum()).collect())
        .collect();
    let nz = model.num_z_groups * model.dims.l;
    let z = w[model.z0..model.z0 + nz].iter().map(|v| v.round()).collect();
    let lambda =
        model.blocks.iter().map(|b| (b.key, w[b.start..b.start + k * b.width].to_vec())).collect();
    Ok(LdrPolicy { x, z, lambda })
}

/// Cost of a policy in the aggregated extensive form with x and z fixed; `None` if
/// no feasible local completion exists.
pub fn evaluate_ldr_policy(m: &Msilp, agg: &AggregationMap, policy: &LdrPolicy) -> Result<Option<f64>, LdrError> {
    let mut ef = build_aggregated_extensive_form(m, agg)?;
    ef.fix_z(&policy.z);
    for (n, xn) in policy.x.iter().enumerate() {
        for (i, &v) in xn.iter().enumerate() {
            let j = ef.x_start[n] + i;
            ef.mip.lp.col_lb[j] = v;
            ef.mip.lp.col_ub[j] = v;
        }
    }
    let sol = mcpolicy_lp::solve_lp(&ef.mip.lp, None)?;
    Ok(match sol.status {
        LpStatus::Optimal => Some(sol.objective),
        _ => None,
    })
}
