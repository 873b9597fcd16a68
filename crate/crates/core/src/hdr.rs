use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use mcpolicy_lp::Sense;

use crate::aggregate::{TransformKind, Transformation};
use crate::markov::{McError, MarkovChain, McState};
use crate::model::{Dims, Labels, Msilp, NodeData, NodeRow, Var};
use crate::tree::{build_tree, TreeError};

pub const SCHEMA_VERSION: u32 = 1;
pub const DELTA_MAX: f64 = 150.0;
pub const CELL_WIDTH: f64 = 100.0;
pub const LAND_HEIGHT: f64 = 50.0;
pub const SEA_HEIGHT: f64 = 20.0;
pub const MAX_INTENSITY: i64 = 5;
/// Position of the intensity in the HDR chain state (x, y, intensity).
pub const INTENSITY_ATTR: usize = 2;

/// Intensity transitions; `P[i][j]` is the probability of moving from level `i` to `j`.
pub const INTENSITY_MATRIX: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.11, 0.83, 0.06, 0.0, 0.0, 0.0],
    [0.0, 0.15, 0.6, 0.25, 0.0, 0.0],
    [0.0, 0.0, 0.04, 0.68, 0.28, 0.0],
    [0.0, 0.0, 0.0, 0.18, 0.79, 0.03],
    [0.0, 0.0, 0.0, 0.0, 0.5, 0.5],
];

#[derive(Debug, thiserror::Error)]
pub enum HdrError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Chain(#[from] McError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModalityType {
    Type1,
    Type2,
}

impl ModalityType {
    pub fn increments(self) -> [f64; 4] {
        match self {
            ModalityType::Type1 => [0.10, 0.20, 0.30, 0.40],
            ModalityType::Type2 => [0.15, 0.30, 0.45, 0.60],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdrConfig {
    pub cols: usize,
    pub rows: usize,
    pub capacity_pct: f64,
    pub modality_type: ModalityType,
    pub seed: u64,
    /// Inclusive range of shelters per land cell.
    pub shelters_per_cell: (usize, usize),
    pub dcs_per_cell: (usize, usize),
    /// Indices into the type's increment list; `None` keeps all four.
    pub increments: Option<Vec<usize>>,
    pub initial_inventory: f64,
    /// Range for the per-unit modality cost, as a fraction of the mean shortage penalty.
    pub modality_cost_factor: (f64, f64),
}

impl Default for HdrConfig {
    fn default() -> Self {
        HdrConfig {
            cols: 4,
            rows: 5,
            capacity_pct: 0.25,
            modality_type: ModalityType::Type1,
            seed: 0,
            shelters_per_cell: (3, 7),
            dcs_per_cell: (2, 4),
            increments: None,
            initial_inventory: 0.0,
            modality_cost_factor: (0.02, 0.05),
        }
    }
}

impl HdrConfig {
    /// Small instances for tests and desk runs: two land cells, three stages.
    pub fn desk(seed: u64) -> Self {
        HdrConfig {
            cols: 2,
            rows: 4,
            seed,
            shelters_per_cell: (1, 2),
            dcs_per_cell: (1, 1),
            capacity_pct: 0.18,
            increments: Some(vec![0, 2]),
            modality_cost_factor: (0.012, 0.02),
            ..HdrConfig::default()
        }
    }

    pub fn stages(&self) -> usize {
        self.rows.saturating_sub(1)
    }

    pub fn check(&self) -> Result<(), HdrError> {
        let bad = |m: &str| Err(HdrError::Config(m.to_string()));
        if self.rows < 2 {
            return bad("grid needs at least two rows");
        }
        if self.cols < 1 {
            return bad("grid needs at least one column");
        }
        if !(self.capacity_pct > 0.0 && self.capacity_pct <= 1.0) {
            return bad("capacity_pct must lie in (0, 1]");
        }
        let (a, b) = self.shelters_per_cell;
        let (c, d) = self.dcs_per_cell;
        if a == 0 || a > b || c == 0 || c > d || b > 1000 || d > 1000 {
            return bad("per-cell counts need 1 <= lo <= hi <= 1000");
        }
        if let Some(inc) = &self.increments {
            if inc.is_empty() || inc.iter().any(|&i| i >= 4) {
                return bad("increment indices must be a nonempty subset of 0..4");
            }
        }
        let (f0, f1) = self.modality_cost_factor;
        if !(f0 >= 0.0 && f0 <= f1 && f1.is_finite()) {
            return bad("modality_cost_factor needs 0 <= lo <= hi < inf");
        }
        if !(self.initial_inventory >= 0.0 && self.initial_inventory.is_finite()) {
            return bad("initial inventory must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub cols: usize,
    pub rows: usize,
    pub cell_width: f64,
    pub land_height: f64,
    pub sea_height: f64,
}

impl Grid {
    fn land_y0(&self) -> f64 {
        self.sea_height * (self.rows - 1) as f64
    }

    /// Center of sea cell `(mx, my)`.
    pub fn cell_center(&self, mx: i64, my: i64) -> (f64, f64) {
        ((mx as f64 + 0.5) * self.cell_width, (my as f64 + 0.5) * self.sea_height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shelter {
    pub x: f64,
    pub y: f64,
    pub cell: usize,
    pub d_max: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dc {
    pub x: f64,
    pub y: f64,
    pub cell: usize,
    pub capacity: f64,
    pub inventory: f64,
    pub holding_cost: f64,
    pub production_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modality {
    pub cells: Vec<usize>,
    pub increment: f64,
    pub cost: f64,
    /// Per-stage capacity gain `K_{jℓ}` for every DC.
    pub gain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub states: Vec<McState>,
    pub transitions: Vec<(usize, usize, f64)>,
    pub initial: usize,
}

/// State-dependent cost law: `q = q0·(1 + κ·i)`, `f = τ·dist·(1 + κ·i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub transport_per_distance: f64,
    pub intensity_factor: f64,
    pub modality_unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdrInstance {
    pub schema: u32,
    pub config: HdrConfig,
    pub seed: u64,
    pub grid: Grid,
    pub d_max: f64,
    pub delta_max: f64,
    pub shelters: Vec<Shelter>,
    pub dcs: Vec<Dc>,
    pub modalities: Vec<Modality>,
    pub mc: ChainSpec,
    pub costs: Costs,
}

/// Splits `total` into `k` parts by uniform spacings.
fn split(rng: &mut ChaCha8Rng, total: f64, k: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(k);
    for c in cuts.into_iter().chain(std::iter::once(1.0)) {
        out.push(total * (c - prev));
        prev = c;
    }
    out
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Demand law: `d_max·(1 − δ/δ_max)·(i/5)²` inside the influence radius, else 0.
pub fn demand_value(d_max: f64, delta: f64, intensity: i64, delta_max: f64) -> f64 {
    if intensity <= 0 || delta >= delta_max {
        return 0.0;
    }
    let s = intensity as f64 / MAX_INTENSITY as f64;
    d_max * (1.0 - delta / delta_max) * s * s
}

/// Movement weights for one sea cell, drawn as (left, stay, right); blocked moves get 0.
fn movement_weights(rng: &mut ChaCha8Rng, x: usize, cols: usize) -> [u32; 3] {
    let left = if x > 0 { rng.gen_range(20..=40) } else { 0 };
    let stay = rng.gen_range(30..=40);
    let right = if x + 1 < cols { rng.gen_range(20..=40) } else { 0 };
    [left, stay, right]
}

/// Normalized movement probabilities for weights `(left, stay, right)`.
pub fn movement_probs(w: [u32; 3]) -> [f64; 3] {
    let tot: u32 = w.iter().sum();
    w.map(|v| v as f64 / tot as f64)
}

pub fn intensity_chain() -> MarkovChain {
    let states = (0..=MAX_INTENSITY).map(|i| McState::new(vec![i])).collect();
    let p: Vec<Vec<f64>> = INTENSITY_MATRIX.iter().map(|r| r.to_vec()).collect();
    MarkovChain::from_matrix(states, &p, 0).expect("intensity matrix is stochastic")
}

pub fn generate_instance(cfg: &HdrConfig) -> Result<HdrInstance, HdrError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid {
        cols: cfg.cols,
        rows: cfg.rows,
        cell_width: CELL_WIDTH,
        land_height: LAND_HEIGHT,
        sea_height: SEA_HEIGHT,
    };
    let d_max = rng.gen_range(1000.0..=1500.0);
    let y0 = grid.land_y0();
    let mut shelters = Vec::new();
    let mut dcs = Vec::new();
    for cell in 0..cfg.cols {
        let x0 = cell as f64 * CELL_WIDTH;
        let ns = rng.gen_range(cfg.shelters_per_cell.0..=cfg.shelters_per_cell.1);
        let nd = rng.gen_range(cfg.dcs_per_cell.0..=cfg.dcs_per_cell.1);
        let dm = split(&mut rng, d_max, ns);
        for d in dm {
            let x = x0 + rng.gen::<f64>() * CELL_WIDTH;
            let y = y0 + rng.gen::<f64>() * LAND_HEIGHT;
            shelters.push(Shelter { x, y, cell, d_max: d, penalty: 0.0 });
        }
        let caps = split(&mut rng, d_max * cfg.capacity_pct, nd);
        for c in caps {
            let x = x0 + rng.gen::<f64>() * CELL_WIDTH;
            let y = y0 + rng.gen::<f64>() * LAND_HEIGHT;
            let holding_cost = rng.gen_range(0.5..=1.0);
            let production_cost = rng.gen_range(5.0..=10.0);
            dcs.push(Dc {
                x,
                y,
                cell,
                capacity: c,
                inventory: cfg.initial_inventory,
                holding_cost,
                production_cost,
            });
        }
    }
    let costs = Costs { transport_per_distance: 0.05, intensity_factor: 0.1, modality_unit_cost: 0.0 };
    let top = 1.0 + costs.intensity_factor * MAX_INTENSITY as f64;
    for s in shelters.iter_mut() {
        let worst = dcs
            .iter()
            .map(|d| (d.production_cost + costs.transport_per_distance * dist((s.x, s.y), (d.x, d.y))) * top)
            .fold(0.0, f64::max);
        s.penalty = (10.0 * worst).ceil();
    }
    let mean_penalty = shelters.iter().map(|s| s.penalty).sum::<f64>() / shelters.len() as f64;
    let costs = Costs { modality_unit_cost: rng.gen_range(cfg.modality_cost_factor.0..=cfg.modality_cost_factor.1) * mean_penalty, ..costs };

    let mut locations: Vec<Vec<usize>> = (0..cfg.cols.saturating_sub(1)).map(|c| vec![c, c + 1]).collect();
    locations.push((0..cfg.cols).collect());
    let all_inc = cfg.modality_type.increments();
    let incs: Vec<f64> = match &cfg.increments {
        Some(idx) => idx.iter().map(|&i| all_inc[i]).collect(),
        None => all_inc.to_vec(),
    };
    let mut modalities = Vec::new();
    for cells in &locations {
        for &inc in &incs {
            let gain: Vec<f64> =
                dcs.iter().map(|d| if cells.contains(&d.cell) { inc * d.capacity } else { 0.0 }).collect();
            let cost = costs.modality_unit_cost * gain.iter().sum::<f64>();
            modalities.push(Modality { cells: cells.clone(), increment: inc, cost, gain });
        }
    }

    let sea_rows = cfg.rows - 1;
    let mut move_states = Vec::new();
    for y in 0..sea_rows {
        for x in 0..cfg.cols {
            move_states.push(McState::new(vec![x as i64, y as i64]));
        }
    }
    let mut move_tr = Vec::new();
    for y in 0..sea_rows.saturating_sub(1) {
        for x in 0..cfg.cols {
            let probs = movement_probs(movement_weights(&mut rng, x, cfg.cols));
            for (dx, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    let nx = x + dx - 1;
                    move_tr.push((y * cfg.cols + x, (y + 1) * cfg.cols + nx, p));
                }
            }
        }
    }
    let x0 = rng.gen_range(0..cfg.cols);
    let i0 = *[2i64, 3, 4, 5].choose(&mut rng).expect("nonempty");
    let movement = MarkovChain::new(move_states, &move_tr, x0)?;
    let intensity = intensity_chain();
    let mut chain = MarkovChain::product(&movement, &intensity)?;
    let init = chain.index_of(&McState::new(vec![x0 as i64, 0, i0])).expect("initial state exists");
    chain = MarkovChain::new(chain.states().to_vec(), &chain.transitions(), init)?;

    Ok(HdrInstance {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        seed: cfg.seed,
        grid,
        d_max,
        delta_max: DELTA_MAX,
        shelters,
        dcs,
        modalities,
        mc: ChainSpec { states: chain.states().to_vec(), transitions: chain.transitions(), initial: init },
        costs,
    })
}

/// Which HDR formulation to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdrLayout {
    /// Capacity kept as a continuous state with the lag-one recursion.
    WithCapacity,
    /// Capacity eliminated; production bounded by the ancestors' modality choices.
    CapacityEliminated,
}

impl HdrInstance {
    pub fn stages(&self) -> usize {
        self.grid.rows - 1
    }

    pub fn chain(&self) -> Result<MarkovChain, HdrError> {
        Ok(MarkovChain::new(self.mc.states.clone(), &self.mc.transitions, self.mc.initial)?)
    }

    pub fn num_shelters(&self) -> usize {
        self.shelters.len()
    }

    pub fn num_dcs(&self) -> usize {
        self.dcs.len()
    }

    pub fn demand(&self, shelter: usize, m: &McState) -> f64 {
        let s = &self.shelters[shelter];
        let h = self.grid.cell_center(m.attrs[0], m.attrs[1]);
        demand_value(s.d_max, dist(h, (s.x, s.y)), m.attrs[2], self.delta_max)
    }

    pub fn demands(&self, m: &McState) -> Vec<f64> {
        (0..self.shelters.len()).map(|i| self.demand(i, m)).collect()
    }

    fn intensity_scale(&self, m: &McState) -> f64 {
        1.0 + self.costs.intensity_factor * m.attrs[2] as f64
    }

    pub fn production_cost(&self, dc: usize, m: &McState) -> f64 {
        self.dcs[dc].production_cost * self.intensity_scale(m)
    }

    pub fn transport_cost(&self, shelter: usize, dc: usize, m: &McState) -> f64 {
        let (s, d) = (&self.shelters[shelter], &self.dcs[dc]);
        self.costs.transport_per_distance * dist((s.x, s.y), (d.x, d.y)) * self.intensity_scale(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, HdrError> {
        let inst: HdrInstance = serde_json::from_str(s)?;
        inst.check()?;
        Ok(inst)
    }

    pub fn check(&self) -> Result<(), HdrError> {
        let bad = |m: String| Err(HdrError::Instance(m));
        if self.schema != SCHEMA_VERSION {
            return Err(HdrError::Schema(self.schema));
        }
        self.config.check()?;
        let g = &self.grid;
        if g.rows < 2 || g.cols < 1 || g.cols > 10_000 || g.rows > 10_000 {
            return bad("grid dimensions out of range".into());
        }
        for v in [g.cell_width, g.land_height, g.sea_height, self.d_max, self.delta_max] {
            if !(v.is_finite() && v > 0.0) {
                return bad("geometry and demand scales must be positive".into());
            }
        }
        if self.shelters.is_empty() || self.dcs.is_empty() {
            return bad("need at least one shelter and one DC".into());
        }
        for s in &self.shelters {
            if s.cell >= g.cols || ![s.x, s.y, s.d_max, s.penalty].iter().all(|v| v.is_finite() && *v >= 0.0) {
                return bad("shelter fields out of range".into());
            }
        }
        for d in &self.dcs {
            let vals = [d.x, d.y, d.capacity, d.inventory, d.holding_cost, d.production_cost];
            if d.cell >= g.cols || !vals.iter().all(|v| v.is_finite() && *v >= 0.0) {
                return bad("DC fields out of range".into());
            }
        }
        for m in &self.modalities {
            if m.gain.len() != self.dcs.len()
                || m.cells.iter().any(|&c| c >= g.cols)
                || !m.gain.iter().chain([&m.cost, &m.increment]).all(|v| v.is_finite() && *v >= 0.0)
            {
                return bad("modality fields out of range".into());
            }
        }
        let c = &self.costs;
        if ![c.transport_per_distance, c.intensity_factor, c.modality_unit_cost].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("cost parameters must be finite and nonnegative".into());
        }
        for st in &self.mc.states {
            if st.attrs.len() != 3
                || st.attrs[0] < 0
                || st.attrs[0] >= g.cols as i64
                || st.attrs[1] < 0
                || st.attrs[1] >= g.rows as i64
                || !(0..=MAX_INTENSITY).contains(&st.attrs[2])
            {
                return bad(format!("chain state {:?} outside the grid", st.attrs));
            }
        }
        self.chain()?;
        Ok(())
    }

    /// Node data for state `m`; `root` selects the first-stage variant.
    fn node_data(&self, m: &McState, stage: usize, root: bool, layout: HdrLayout) -> NodeData {
        let (ni, nj, nl) = (self.shelters.len(), self.dcs.len(), self.modalities.len());
        let keep = layout == HdrLayout::WithCapacity;
        let k = if keep { 2 * nj } else { nj };
        let r = nj + ni + ni * nj;
        let (v, w) = (|j: usize| Var::Y(j), |i: usize| Var::Y(nj + i));
        let ship = |i: usize, j: usize| Var::Y(nj + ni + i * nj + j);
        let dem = self.demands(m);
        let mut rows = Vec::new();
        for i in 0..ni {
            let mut c: Vec<(Var, f64)> = (0..nj).map(|j| (ship(i, j), 1.0)).collect();
            c.push((w(i), 1.0));
            rows.push(NodeRow::new(c, Sense::Ge, dem[i]));
        }
        for j in 0..nj {
            let mut c = vec![(Var::X(j), 1.0)];
            c.extend((0..ni).map(|i| (ship(i, j), 1.0)));
            c.push((v(j), -1.0));
            let rhs = if root {
                self.dcs[j].inventory
            } else {
                c.push((Var::ParentX(j), -1.0));
                0.0
            };
            rows.push(NodeRow::new(c, Sense::Eq, rhs));
        }
        for j in 0..nj {
            if keep {
                rows.push(NodeRow::new(vec![(Var::X(nj + j), 1.0), (v(j), -1.0)], Sense::Ge, 0.0));
            } else {
                let mut c = vec![(v(j), 1.0)];
                for lag in 1..stage {
                    for (l, md) in self.modalities.iter().enumerate() {
                        if md.gain[j] != 0.0 {
                            c.push((Var::AncestorZ { lag, idx: l }, -md.gain[j]));
                        }
                    }
                }
                rows.push(NodeRow::new(c, Sense::Le, self.dcs[j].capacity));
            }
        }
        if keep {
            for j in 0..nj {
                if root {
                    rows.push(NodeRow::new(vec![(Var::X(nj + j), 1.0)], Sense::Eq, self.dcs[j].capacity));
                } else {
                    let mut c = vec![(Var::X(nj + j), 1.0), (Var::ParentX(nj + j), -1.0)];
                    for (l, md) in self.modalities.iter().enumerate() {
                        if md.gain[j] != 0.0 {
                            c.push((Var::AncestorZ { lag: 1, idx: l }, -md.gain[j]));
                        }
                    }
                    rows.push(NodeRow::new(c, Sense::Eq, 0.0));
                }
            }
        }
        if nl > 0 {
            rows.push(NodeRow::new((0..nl).map(|l| (Var::Z(l), 1.0)).collect(), Sense::Le, 1.0));
            if !root {
                for l in 0..nl {
                    rows.push(NodeRow::new(
                        vec![(Var::Z(l), 1.0), (Var::AncestorZ { lag: 1, idx: l }, -1.0)],
                        Sense::Ge,
                        0.0,
                    ));
                }
            }
        }
        let mut d = vec![0.0; k];
        for j in 0..nj {
            d[j] = self.dcs[j].holding_cost;
        }
        let mut h = vec![0.0; r];
        for j in 0..nj {
            h[j] = self.production_cost(j, m);
        }
        for i in 0..ni {
            h[nj + i] = self.shelters[i].penalty;
            for j in 0..nj {
                h[nj + ni + i * nj + j] = self.transport_cost(i, j, m);
            }
        }
        NodeData {
            c: self.modalities.iter().map(|md| md.cost).collect(),
            d,
            h,
            x_lb: vec![0.0; k],
            x_ub: vec![f64::INFINITY; k],
            y_lb: vec![0.0; r],
            y_ub: vec![f64::INFINITY; r],
            z_lb: vec![0.0; nl],
            z_ub: vec![1.0; nl],
            rows,
            xi: dem,
        }
    }

    fn labels(&self, layout: HdrLayout) -> Labels {
        let (ni, nj) = (self.shelters.len(), self.dcs.len());
        let mut x: Vec<String> = (0..nj).map(|j| format!("inv_{j}")).collect();
        if layout == HdrLayout::WithCapacity {
            x.extend((0..nj).map(|j| format!("cap_{j}")));
        }
        let mut y: Vec<String> = (0..nj).map(|j| format!("prod_{j}")).collect();
        y.extend((0..ni).map(|i| format!("short_{i}")));
        for i in 0..ni {
            y.extend((0..nj).map(|j| format!("ship_{i}_{j}")));
        }
        let z = (0..self.modalities.len()).map(|l| format!("mod_{l}")).collect();
        Labels { x, y, z }
    }

    pub fn build(&self, layout: HdrLayout) -> Result<Msilp, HdrError> {
        let chain = self.chain()?;
        let tree = build_tree(&chain, self.stages())?;
        let (ni, nj, nl) = (self.shelters.len(), self.dcs.len(), self.modalities.len());
        let k = if layout == HdrLayout::WithCapacity { 2 * nj } else { nj };
        let dims = Dims { k, l: nl, r: nj + ni + ni * nj };
        let mut cache: std::collections::HashMap<(usize, usize), NodeData> = Default::default();
        let mut data = Vec::with_capacity(tree.len());
        for nd in &tree.nodes {
            let key = (nd.stage, nd.state);
            let block = cache
                .entry(key)
                .or_insert_with(|| self.node_data(chain.state(nd.state), nd.stage, nd.parent.is_none(), layout));
            data.push(block.clone());
        }
        Ok(Msilp { tree, data, dims, labels: self.labels(layout) })
    }
}

/// HDR with capacity kept as a state (every ancestor reference is lag one).
pub fn build_hdr_msilp(inst: &HdrInstance) -> Result<Msilp, HdrError> {
    inst.build(HdrLayout::WithCapacity)
}

/// HDR^A layout: capacity eliminated, to be paired with any aggregation map.
pub fn build_hdr_aggregated(inst: &HdrInstance) -> Result<Msilp, HdrError> {
    inst.build(HdrLayout::CapacityEliminated)
}

/// Transformation for HDR chains; PM keeps the parent's intensity.
pub fn hdr_transformation(kind: TransformKind) -> Transformation {
    match kind {
        TransformKind::Pm => Transformation::pm(vec![INTENSITY_ATTR]),
        k => Transformation::new(k),
    }
}
