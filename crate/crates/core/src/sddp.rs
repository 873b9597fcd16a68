use std::collections::{HashMap, HashSet};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcpolicy_lp::{
    branch_and_cut, BnbConfig, BnbError, CutOracle, LpError, LpProblem, LpSolver, LpStatus, MipProblem, MipStatus, Row,
    Sense,
};

use crate::aggregate::{build_policy_graph, AggError, AggregationMap, PolicyGraph};
use crate::model::{canonical, row_key, validate, ModelError, Msilp, Var};

#[derive(Debug, thiserror::Error)]
pub enum SddpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Agg(#[from] AggError),
    #[error("node {node} references integer states {lag} stages up; only the parent is supported")]
    UnsupportedLag { node: usize, lag: usize },
    #[error("SDDP did not converge within {0} rounds")]
    RoundLimit(usize),
    #[error("no feasible continuous completion for the fixed integer policy")]
    InfeasiblePolicy,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("subproblem {0} is unbounded")]
    Unbounded(usize),
    #[error("optimality cut requested from a subproblem without duals")]
    MissingDuals,
    #[error("feasibility cut requested without a usable Farkas certificate")]
    MissingCertificate,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl From<BnbError<SddpError>> for SddpError {
    fn from(e: BnbError<SddpError>) -> Self {
        match e {
            BnbError::Lp(e) => SddpError::Lp(e),
            BnbError::Oracle(e) => e,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SddpConfig {
    /// Relative cut-violation tolerance.
    pub eps: f64,
    /// Sampled paths per round.
    pub k: usize,
    pub exact: bool,
    /// Round limit when `exact` is off.
    pub max_rounds: usize,
    /// Safety cap on rounds in exact mode.
    pub round_cap: usize,
    pub seed: u64,
    /// Lower bound on every θ.
    pub theta_lb: f64,
    pub time_limit: Option<Duration>,
    pub rel_gap: f64,
}

impl Default for SddpConfig {
    fn default() -> Self {
        SddpConfig {
            eps: 1e-7,
            k: 20,
            exact: true,
            max_rounds: 3,
            round_cap: 1000,
            seed: 0,
            theta_lb: 0.0,
            time_limit: None,
            rel_gap: 1e-9,
        }
    }
}

impl SddpConfig {
    /// Relaxed termination: three rounds, ε = 0.1, fixed sample size.
    pub fn lower_bound() -> Self {
        SddpConfig { eps: 0.1, exact: false, ..SddpConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Optimality,
    Feasibility,
}

/// Affine function of the parent's state: `α·x + β·ζ + β_slot·ζ_host + γ`.
///
/// For optimality cuts it bounds θ from below; for feasibility cuts it must be `≤ 0`.
/// `beta_slot` multiplies the integer block of whichever group hosts the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_slot: Vec<f64>,
    pub gamma: f64,
    pub kind: CutKind,
}

impl Cut {
    /// β over all integer copies once the slot is placed at `host_group`.
    pub fn beta_full(&self, host_group: usize) -> Vec<f64> {
        let l = self.beta_slot.len();
        let mut b = self.beta.clone();
        for i in 0..l {
            b[host_group * l + i] += self.beta_slot[i];
        }
        b
    }

    pub fn value(&self, x: &[f64], zeta: &[f64], slot: &[f64]) -> f64 {
        dot(&self.alpha, x) + dot(&self.beta, zeta) + dot(&self.beta_slot, slot) + self.gamma
    }
}

/// A cut together with the point that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredCut {
    pub cut: Cut,
    pub x: Vec<f64>,
    pub zeta: Vec<f64>,
    pub slot: Vec<f64>,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `rhs = rhs0 + a·x_parent + b·ζ + s·slot`.
#[derive(Debug, Clone, Default)]
struct ParamRow {
    rhs0: f64,
    a: Vec<(usize, f64)>,
    b: Vec<(usize, f64)>,
    s: Vec<(usize, f64)>,
}

impl ParamRow {
    fn eval(&self, x: &[f64], zeta: &[f64], slot: &[f64]) -> f64 {
        let mut v = self.rhs0;
        for &(i, c) in &self.a {
            v += c * x[i];
        }
        for &(i, c) in &self.b {
            v += c * zeta[i];
        }
        for &(i, c) in &self.s {
            v += c * slot[i];
        }
        v
    }
}

struct SubLp {
    solver: LpSolver,
    lp: LpProblem,
    params: Vec<ParamRow>,
    own_group: usize,
    child_pos: HashMap<usize, usize>,
    pool: Vec<StoredCut>,
}

/// Result of one subproblem solve at given parameters.
#[derive(Debug, Clone)]
pub struct SubSolve {
    pub sub: usize,
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    duals: Vec<f64>,
    farkas: Option<Vec<f64>>,
    pub x_par: Vec<f64>,
    pub slot: Vec<f64>,
}

/// Master-level point handed to the subroutine.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub x: Vec<f64>,
    /// All integer copies, group-major.
    pub zeta: Vec<f64>,
    /// θ per stage-2 node, in root-child order.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SddpStats {
    pub optimality_cuts: usize,
    pub feasibility_cuts: usize,
    pub master_cuts: usize,
    pub subproblem_solves: usize,
    pub rounds: usize,
    pub oracle_calls: usize,
}

struct MasterLayout {
    x0: usize,
    z0: usize,
    th0: usize,
    root_children: Vec<usize>,
}

/// Cut pools and subproblem LPs over one policy graph.
pub struct Sddp<'a> {
    m: &'a Msilp,
    agg: &'a AggregationMap,
    pg: PolicyGraph,
    cfg: SddpConfig,
    subs: Vec<SubLp>,
    rng: ChaCha8Rng,
    stats: SddpStats,
    l: usize,
}

enum PassOutcome {
    Master(Cut),
    Added,
    Nothing,
}

impl<'a> Sddp<'a> {
    pub fn new(m: &'a Msilp, agg: &'a AggregationMap, cfg: SddpConfig) -> Result<Self, SddpError> {
        if let Some(d) = validate(m).first() {
            return Err(ModelError::Invalid(d.message.clone()).into());
        }
        if agg.node_group.len() != m.tree.len() {
            return Err(ModelError::AggregationMismatch.into());
        }
        if !(cfg.eps > 0.0) || cfg.k == 0 {
            return Err(SddpError::Dimension("eps must be positive and k at least 1".into()));
        }
        let pg = build_policy_graph(&m.tree, agg)?;
        let l = m.dims.l;
        let mut subs = Vec::with_capacity(pg.len());
        for s in 0..pg.len() {
            subs.push(build_sub(m, agg, &pg, s, cfg.theta_lb)?);
        }
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Sddp { m, agg, pg, cfg, subs, rng, stats: SddpStats::default(), l })
    }

    pub fn policy_graph(&self) -> &PolicyGraph {
        &self.pg
    }

    pub fn stats(&self) -> &SddpStats {
        &self.stats
    }

    pub fn config(&self) -> &SddpConfig {
        &self.cfg
    }

    /// Stored cuts approximating θ of subproblem `s`.
    pub fn pool(&self, s: usize) -> &[StoredCut] {
        &self.subs[s].pool
    }

    pub fn group_of_sub(&self, s: usize) -> usize {
        self.subs[s].own_group
    }

    pub fn num_zeta(&self) -> usize {
        self.agg.num_groups() * self.l
    }

    fn group_block(&self, zeta: &[f64], g: usize) -> Vec<f64> {
        zeta[g * self.l..(g + 1) * self.l].to_vec()
    }

    /// Solves subproblem `s` with parent state `x_par`, integer copies `zeta` and
    /// the parent group's integer block `slot`.
    pub fn solve_sub(&mut self, s: usize, x_par: &[f64], zeta: &[f64], slot: &[f64]) -> Result<SubSolve, SddpError> {
        let (k, r) = (self.m.dims.k, self.m.dims.r);
        let sub = &mut self.subs[s];
        for (i, pr) in sub.params.iter().enumerate() {
            sub.solver.set_row_rhs(i, pr.eval(x_par, zeta, slot));
        }
        let sol = sub.solver.solve()?;
        self.stats.subproblem_solves += 1;
        if sol.status == LpStatus::Unbounded {
            return Err(SddpError::Unbounded(s));
        }
        Ok(SubSolve {
            sub: s,
            status: sol.status,
            objective: sol.objective,
            x: sol.x[..k].to_vec(),
            theta: sol.x[k + r..].to_vec(),
            duals: sol.duals,
            farkas: sol.farkas,
            x_par: x_par.to_vec(),
            slot: slot.to_vec(),
        })
    }

    /// Optimality cut from an optimal solve: coefficients are dual-weighted parameter maps.
    pub fn optimality_cut(&self, sol: &SubSolve, zeta: &[f64]) -> Result<Cut, SddpError> {
        if sol.status != LpStatus::Optimal || sol.duals.len() != self.subs[sol.sub].params.len() {
            return Err(SddpError::MissingDuals);
        }
        let mut cut = self.weighted(sol.sub, &sol.duals, CutKind::Optimality);
        cut.gamma = sol.objective - dot(&cut.alpha, &sol.x_par) - dot(&cut.beta, zeta) - dot(&cut.beta_slot, &sol.slot);
        Ok(cut)
    }

    /// Feasibility cut `yᵀrhs(x, ζ) − sup_w (yᵀA)w ≤ 0` from a Farkas ray.
    pub fn feasibility_cut(&self, sol: &SubSolve) -> Result<Cut, SddpError> {
        let y = match (&sol.farkas, sol.status) {
            (Some(y), LpStatus::Infeasible) if y.len() == self.subs[sol.sub].params.len() => y,
            _ => return Err(SddpError::MissingCertificate),
        };
        let sub = &self.subs[sol.sub];
        let mut ya = vec![0.0; sub.lp.num_cols()];
        for (row, &yi) in sub.lp.rows.iter().zip(y) {
            for &(j, a) in &row.coeffs {
                ya[j] += yi * a;
            }
        }
        let mut sup = 0.0;
        for (j, &g) in ya.iter().enumerate() {
            if g.abs() <= 1e-12 {
                continue;
            }
            let bound = if g > 0.0 { sub.lp.col_ub[j] } else { sub.lp.col_lb[j] };
            if !bound.is_finite() {
                return Err(SddpError::MissingCertificate);
            }
            sup += g * bound;
        }
        let mut cut = self.weighted(sol.sub, y, CutKind::Feasibility);
        cut.gamma = sub.params.iter().zip(y).map(|(p, yi)| p.rhs0 * yi).sum::<f64>() - sup;
        Ok(cut)
    }

    fn weighted(&self, s: usize, w: &[f64], kind: CutKind) -> Cut {
        let (k, l) = (self.m.dims.k, self.l);
        let mut cut = Cut {
            alpha: vec![0.0; k],
            beta: vec![0.0; self.num_zeta()],
            beta_slot: vec![0.0; l],
            gamma: 0.0,
            kind,
        };
        for (pr, &wi) in self.subs[s].params.iter().zip(w) {
            if wi == 0.0 {
                continue;
            }
            for &(i, c) in &pr.a {
                cut.alpha[i] += wi * c;
            }
            for &(i, c) in &pr.b {
                cut.beta[i] += wi * c;
            }
            for &(i, c) in &pr.s {
                cut.beta_slot[i] += wi * c;
            }
        }
        cut
    }

    /// Stores a cut for `child` and installs it in every parent subproblem.
    fn add_cut(&mut self, child: usize, stored: StoredCut) -> Result<(), SddpError> {
        let k = self.m.dims.k;
        let parents = self.pg.parents[child].clone();
        for p in parents {
            let host_group = self.subs[p].own_group;
            let beta = stored.cut.beta_full(host_group);
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            if stored.cut.kind == CutKind::Optimality {
                let theta_col = k + self.m.dims.r + self.subs[p].child_pos[&child];
                coeffs.push((theta_col, 1.0));
            }
            coeffs.extend(stored.cut.alpha.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &a)| (i, -a)));
            let pr = ParamRow {
                rhs0: stored.cut.gamma,
                b: beta.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &c)| (i, c)).collect(),
                ..ParamRow::default()
            };
            let row = Row::new(coeffs, Sense::Ge, stored.cut.gamma);
            let sub = &mut self.subs[p];
            sub.solver.add_row(row.clone())?;
            sub.lp.add_row(row.coeffs, row.sense, row.rhs);
            sub.params.push(pr);
        }
        match stored.cut.kind {
            CutKind::Optimality => self.stats.optimality_cuts += 1,
            CutKind::Feasibility => self.stats.feasibility_cuts += 1,
        }
        self.subs[child].pool.push(stored);
        Ok(())
    }

    fn store(&self, cut: Cut, sol: &SubSolve, zeta: &[f64]) -> StoredCut {
        let value = cut.value(&sol.x_par, zeta, &sol.slot);
        StoredCut { cut, x: sol.x_par.clone(), zeta: zeta.to_vec(), slot: sol.slot.clone(), value }
    }

    fn violated(&self, q: f64, theta: f64) -> bool {
        q - theta > self.cfg.eps * q.abs() + 1e-9
    }

    /// One forward pass from the root child `n2` down to `leaf`, then a quick backward pass.
    fn pass(&mut self, cand: &Candidate, pos: usize, leaf: usize) -> Result<PassOutcome, SddpError> {
        let tree = &self.m.tree;
        let path = tree.path(leaf).map_err(|e| SddpError::Dimension(e.to_string()))?;
        let path = &path[1..];
        let mut sols: Vec<SubSolve> = Vec::with_capacity(path.len());
        let mut x_par = cand.x.clone();
        let mut slot = self.group_block(&cand.zeta, self.agg.group_of(tree.root()));
        for (idx, &n) in path.iter().enumerate() {
            let s = self.pg.node_sub[n].expect("non-root node");
            let sol = self.solve_sub(s, &x_par, &cand.zeta, &slot)?;
            if sol.status == LpStatus::Infeasible {
                let cut = self.feasibility_cut(&sol)?;
                let stored = self.store(cut.clone(), &sol, &cand.zeta);
                if idx == 0 {
                    self.stats.feasibility_cuts += 1;
                    self.subs[s].pool.push(stored);
                    return Ok(PassOutcome::Master(cut));
                }
                self.add_cut(s, stored)?;
                return Ok(PassOutcome::Added);
            }
            x_par = sol.x.clone();
            slot = self.group_block(&cand.zeta, self.agg.group_of(n));
            sols.push(sol);
        }
        let mut added = false;
        let mut dirty = vec![false; path.len()];
        for idx in (0..path.len()).rev() {
            let s = sols[idx].sub;
            if dirty[idx] {
                let (xp, sl) = (sols[idx].x_par.clone(), sols[idx].slot.clone());
                sols[idx] = self.solve_sub(s, &xp, &cand.zeta, &sl)?;
                if sols[idx].status != LpStatus::Optimal {
                    return Err(SddpError::MissingDuals);
                }
            }
            let q = sols[idx].objective;
            let theta = if idx == 0 {
                cand.theta[pos]
            } else {
                let host = sols[idx - 1].sub;
                sols[idx - 1].theta[self.subs[host].child_pos[&s]]
            };
            if !self.violated(q, theta) {
                continue;
            }
            let cut = self.optimality_cut(&sols[idx], &cand.zeta)?;
            let stored = self.store(cut.clone(), &sols[idx], &cand.zeta);
            if idx == 0 {
                self.stats.optimality_cuts += 1;
                self.subs[s].pool.push(stored);
                return Ok(PassOutcome::Master(cut));
            }
            self.add_cut(s, stored)?;
            dirty[idx - 1] = true;
            added = true;
        }
        Ok(if added { PassOutcome::Added } else { PassOutcome::Nothing })
    }

    /// Runs SDDP below the stage-2 node at root-child position `pos` and returns the
    /// first cut violated by the candidate's θ, or `None` once no such cut exists.
    pub fn subroutine(&mut self, cand: &Candidate, pos: usize) -> Result<Option<Cut>, SddpError> {
        let n2 = self.pg_root_child_node(pos);
        let leaves = self.m.tree.subtree_leaves(n2);
        let total = leaves.len();
        let mut k = self.cfg.k.min(total).max(1);
        let mut rounds = 0;
        loop {
            rounds += 1;
            self.stats.rounds += 1;
            let sample: Vec<usize> = if k >= total {
                leaves.clone().collect()
            } else {
                let mut idx = rand::seq::index::sample(&mut self.rng, total, k).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| leaves.start + i).collect()
            };
            let mut added = false;
            for leaf in sample {
                match self.pass(cand, pos, leaf)? {
                    PassOutcome::Master(c) => return Ok(Some(c)),
                    PassOutcome::Added => added = true,
                    PassOutcome::Nothing => {}
                }
            }
            if self.cfg.exact {
                if !added {
                    if k >= total {
                        return Ok(None);
                    }
                    k = total;
                }
                if rounds >= self.cfg.round_cap {
                    return Err(SddpError::RoundLimit(rounds));
                }
            } else if !added || rounds >= self.cfg.max_rounds {
                return Ok(None);
            }
        }
    }

    fn pg_root_child_node(&self, pos: usize) -> usize {
        self.m.tree.nodes[self.m.tree.root()].children[pos]
    }

    fn build_master(&self) -> (MipProblem, MasterLayout) {
        let m = self.m;
        let tree = &m.tree;
        let (k, l, r) = (m.dims.k, m.dims.l, m.dims.r);
        let root = tree.root();
        let nd = &m.data[root];
        let mut mip = MipProblem::default();
        let x0 = mip.lp.num_cols();
        for i in 0..k {
            mip.add_col(nd.d[i], nd.x_lb[i], nd.x_ub[i], m.labels.x[i].clone());
        }
        let y0 = mip.lp.num_cols();
        for i in 0..r {
            mip.add_col(nd.h[i], nd.y_lb[i], nd.y_ub[i], m.labels.y[i].clone());
        }
        let ng = self.agg.num_groups();
        let mut cost = vec![0.0; ng * l];
        let mut lb = vec![f64::NEG_INFINITY; ng * l];
        let mut ub = vec![f64::INFINITY; ng * l];
        for n in 0..tree.len() {
            let g = self.agg.group_of(n);
            for i in 0..l {
                cost[g * l + i] += tree.nodes[n].p * m.data[n].c[i];
                lb[g * l + i] = lb[g * l + i].max(m.data[n].z_lb[i]);
                ub[g * l + i] = ub[g * l + i].min(m.data[n].z_ub[i]);
            }
        }
        let z0 = mip.lp.num_cols();
        for g in 0..ng {
            for i in 0..l {
                mip.add_int_col(cost[g * l + i], lb[g * l + i], ub[g * l + i], format!("{}_g{g}", m.labels.z[i]));
            }
        }
        let th0 = mip.lp.num_cols();
        let root_children = tree.nodes[root].children.clone();
        for &c in &root_children {
            mip.add_col(tree.nodes[c].p, self.cfg.theta_lb, f64::INFINITY, format!("theta_n{c}"));
        }
        let mut seen = HashSet::new();
        for n in 0..tree.len() {
            for (ri, row) in m.data[n].rows.iter().enumerate() {
                if n != root && !row.is_pure_z() {
                    continue;
                }
                let coeffs = row
                    .coeffs
                    .iter()
                    .map(|&(v, a)| {
                        let col = match v {
                            Var::X(i) => x0 + i,
                            Var::Y(i) => y0 + i,
                            Var::Z(i) => z0 + self.agg.group_of(n) * l + i,
                            Var::AncestorZ { lag, idx } => {
                                z0 + self.agg.group_of(tree.ancestor(n, lag).expect("validated")) * l + idx
                            }
                            Var::ParentX(_) => unreachable!("validated: root has no parent"),
                        };
                        (col, a)
                    })
                    .collect();
                let built = Row::new(canonical(coeffs), row.sense, row.rhs);
                if row.is_pure_z() && !seen.insert(row_key(&built)) {
                    continue;
                }
                mip.lp.add_named_row(built.coeffs, built.sense, built.rhs, format!("n{n}_r{ri}"));
            }
        }
        (mip, MasterLayout { x0, z0, th0, root_children })
    }

    /// Algorithm-1 branch-and-cut over the master; `fixed_z` pins every integer copy.
    pub fn run(&mut self, fixed_z: Option<&[f64]>) -> Result<SddpSolution, SddpError> {
        let (mut mip, layout) = self.build_master();
        let nz = self.num_zeta();
        if let Some(z) = fixed_z {
            if z.len() != nz {
                return Err(SddpError::Dimension(format!("{} integer values for {nz} copies", z.len())));
            }
            for (i, &v) in z.iter().enumerate() {
                mip.lp.col_lb[layout.z0 + i] = v;
                mip.lp.col_ub[layout.z0 + i] = v;
            }
        }
        let bnb = BnbConfig { time_limit: self.cfg.time_limit, rel_gap: self.cfg.rel_gap, ..BnbConfig::default() };
        let k = self.m.dims.k;
        let mut oracle = MasterOracle { sddp: self, layout: &layout, k, nz };
        let sol = branch_and_cut(&mip, &mut oracle, &bnb)?;
        let x = sol.x.clone().unwrap_or_default();
        let (x_root, z, theta) = if x.is_empty() {
            (Vec::new(), Vec::new(), Vec::new())
        } else {
            (
                x[layout.x0..layout.x0 + k].to_vec(),
                x[layout.z0..layout.z0 + nz].to_vec(),
                x[layout.th0..layout.th0 + layout.root_children.len()].to_vec(),
            )
        };
        Ok(SddpSolution {
            status: sol.status,
            objective: sol.objective,
            bound: sol.bound,
            x_root,
            z,
            theta,
            nodes: sol.nodes,
            master_cuts: sol.cuts_added,
            stats: self.stats.clone(),
        })
    }
}

struct MasterOracle<'s, 'a> {
    sddp: &'s mut Sddp<'a>,
    layout: &'s MasterLayout,
    k: usize,
    nz: usize,
}

impl CutOracle for MasterOracle<'_, '_> {
    type Error = SddpError;

    fn separate(&mut self, x: &[f64]) -> Result<Vec<Row>, SddpError> {
        let lay = self.layout;
        let cand = Candidate {
            x: x[lay.x0..lay.x0 + self.k].to_vec(),
            zeta: x[lay.z0..lay.z0 + self.nz].to_vec(),
            theta: x[lay.th0..lay.th0 + lay.root_children.len()].to_vec(),
        };
        self.sddp.stats.oracle_calls += 1;
        let root_group = self.sddp.agg.group_of(self.sddp.m.tree.root());
        let mut rows = Vec::new();
        for pos in 0..lay.root_children.len() {
            let Some(cut) = self.sddp.subroutine(&cand, pos)? else { continue };
            self.sddp.stats.master_cuts += 1;
            let beta = cut.beta_full(root_group);
            let mut coeffs = Vec::new();
            if cut.kind == CutKind::Optimality {
                coeffs.push((lay.th0 + pos, 1.0));
            }
            coeffs.extend(cut.alpha.iter().enumerate().map(|(i, &a)| (lay.x0 + i, -a)));
            coeffs.extend(beta.iter().enumerate().map(|(i, &b)| (lay.z0 + i, -b)));
            rows.push(Row::new(canonical(coeffs), Sense::Ge, cut.gamma));
        }
        Ok(rows)
    }
}

fn build_sub(m: &Msilp, agg: &AggregationMap, pg: &PolicyGraph, s: usize, theta_lb: f64) -> Result<SubLp, SddpError> {
    let (k, l, r) = (m.dims.k, m.dims.l, m.dims.r);
    let n = pg.representative(s);
    let nd = &m.data[n];
    let own_group = agg.group_of(n);
    let mut lp = LpProblem::default();
    for i in 0..k {
        lp.add_named_col(nd.d[i], nd.x_lb[i], nd.x_ub[i], m.labels.x[i].clone());
    }
    for i in 0..r {
        lp.add_named_col(nd.h[i], nd.y_lb[i], nd.y_ub[i], m.labels.y[i].clone());
    }
    let mut child_pos = HashMap::new();
    for (pos, &(c, p)) in pg.children[s].iter().enumerate() {
        lp.add_named_col(p, theta_lb, f64::INFINITY, format!("theta_s{c}"));
        child_pos.insert(c, pos);
    }
    let mut params = Vec::new();
    for row in nd.rows.iter().filter(|row| !row.is_pure_z()) {
        let mut coeffs = Vec::new();
        let mut pr = ParamRow { rhs0: row.rhs, ..ParamRow::default() };
        for &(v, a) in &row.coeffs {
            match v {
                Var::X(i) => coeffs.push((i, a)),
                Var::Y(i) => coeffs.push((k + i, a)),
                Var::ParentX(i) => pr.a.push((i, -a)),
                Var::Z(i) => pr.b.push((own_group * l + i, -a)),
                Var::AncestorZ { lag: 1, idx } => pr.s.push((idx, -a)),
                Var::AncestorZ { lag, .. } => return Err(SddpError::UnsupportedLag { node: n, lag }),
            }
        }
        lp.add_row(canonical(coeffs), row.sense, row.rhs);
        params.push(pr);
    }
    let solver = LpSolver::new(&lp)?;
    Ok(SubLp { solver, lp, params, own_group, child_pos, pool: Vec::new() })
}

#[derive(Debug, Clone)]
pub struct SddpSolution {
    pub status: MipStatus,
    pub objective: f64,
    pub bound: f64,
    pub x_root: Vec<f64>,
    /// Integer copies, group-major.
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub nodes: usize,
    pub master_cuts: usize,
    pub stats: SddpStats,
}

/// The exact SDDP-based branch-and-cut ("S").
pub fn solve_exact(m: &Msilp, agg: &AggregationMap, cfg: &SddpConfig) -> Result<SddpSolution, SddpError> {
    let cfg = SddpConfig { exact: true, ..cfg.clone() };
    let sol = Sddp::new(m, agg, cfg)?.run(None)?;
    if sol.status == MipStatus::Infeasible {
        return Err(SddpError::Infeasible);
    }
    Ok(sol)
}

/// Relaxed-termination lower bound ("S-LB"); `bound` is valid for P^A.
pub fn solve_lower_bound(m: &Msilp, agg: &AggregationMap, cfg: &SddpConfig) -> Result<SddpSolution, SddpError> {
    let cfg = SddpConfig { exact: false, max_rounds: cfg.max_rounds.max(1), ..cfg.clone() };
    let sol = Sddp::new(m, agg, cfg)?.run(None)?;
    if sol.status == MipStatus::Infeasible {
        return Err(SddpError::Infeasible);
    }
    Ok(sol)
}

/// Exact value of the policy with integer copies fixed to `z` ("S-UB").
pub fn evaluate_policy(m: &Msilp, agg: &AggregationMap, z: &[f64], cfg: &SddpConfig) -> Result<f64, SddpError> {
    let cfg = SddpConfig { exact: true, ..cfg.clone() };
    let sol = Sddp::new(m, agg, cfg)?.run(Some(z))?;
    match sol.status {
        MipStatus::Infeasible => Err(SddpError::InfeasiblePolicy),
        _ => Ok(sol.objective),
    }
}
