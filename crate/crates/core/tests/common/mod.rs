#![allow(dead_code)]

use mcpolicy::lp::Sense;
use mcpolicy::markov::{MarkovChain, McState};
use mcpolicy::model::{Dims, Msilp, NodeData, NodeRow, Var};
use mcpolicy::tree::build_tree;
use proptest::prelude::*;

/// Two states (light = 0, dark = 1), every transition possible, start light.
pub fn two_state_chain() -> MarkovChain {
    MarkovChain::from_matrix(
        vec![McState::new(vec![0]), McState::new(vec![1])],
        &[vec![0.6, 0.4], vec![0.3, 0.7]],
        0,
    )
    .unwrap()
}

/// Row-stochastic matrix from positive weights.
pub fn normalize(w: &[Vec<u32>]) -> Vec<Vec<f64>> {
    w.iter()
        .map(|row| {
            let s: u32 = row.iter().sum();
            row.iter().map(|&v| v as f64 / s as f64).collect()
        })
        .collect()
}

/// Chain over states `(a, b)` with `a < na`, `b < nb`, from a weight matrix.
pub fn grid_chain(na: usize, nb: usize, w: &[Vec<u32>]) -> MarkovChain {
    let states = (0..na).flat_map(|a| (0..nb).map(move |b| McState::new(vec![a as i64, b as i64]))).collect();
    MarkovChain::from_matrix(states, &normalize(w), 0).unwrap()
}

pub fn weights(n: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(1u32..10, n), n)
}

/// Weights where some transitions are absent (each row keeps its diagonal).
pub fn sparse_weights(n: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..6, n), n).prop_map(|mut w| {
        for (i, row) in w.iter_mut().enumerate() {
            row[i] += 1;
        }
        w
    })
}

/// Single-item inventory with an activate-once capacity expansion.
///
/// x = stock, z = expansion flag, y = (production, shortage).
#[derive(Debug, Clone)]
pub struct Toy {
    pub base_cap: f64,
    pub inc: f64,
    pub z_cost: f64,
    pub hold: f64,
    pub prod: f64,
    pub short: f64,
    pub short_ub: f64,
    pub x_ub: f64,
    /// Demand per chain state index.
    pub demand: Vec<f64>,
}

impl Default for Toy {
    fn default() -> Self {
        Toy {
            base_cap: 4.0,
            inc: 5.0,
            z_cost: 3.0,
            hold: 0.5,
            prod: 1.0,
            short: 10.0,
            short_ub: f64::INFINITY,
            x_ub: 50.0,
            demand: vec![2.0, 8.0],
        }
    }
}

pub fn toy_model(mc: &MarkovChain, stages: usize, p: &Toy) -> Msilp {
    let tree = build_tree(mc, stages).unwrap();
    let data = (0..tree.len())
        .map(|n| {
            let t = tree.stage(n);
            let dem = p.demand[tree.nodes[n].state];
            let mut bal = vec![(Var::X(0), 1.0), (Var::Y(0), -1.0), (Var::Y(1), -1.0)];
            let mut cap = vec![(Var::Y(0), 1.0)];
            let mut rows = Vec::new();
            if t > 1 {
                bal.push((Var::ParentX(0), -1.0));
                cap.push((Var::AncestorZ { lag: 1, idx: 0 }, -p.inc));
                rows.push(NodeRow::new(vec![(Var::Z(0), 1.0), (Var::AncestorZ { lag: 1, idx: 0 }, -1.0)], Sense::Ge, 0.0));
            }
            rows.push(NodeRow::new(bal, Sense::Eq, -dem));
            rows.push(NodeRow::new(cap, Sense::Le, p.base_cap));
            NodeData {
                c: vec![p.z_cost],
                d: vec![p.hold],
                h: vec![p.prod, p.short],
                x_lb: vec![0.0],
                x_ub: vec![p.x_ub],
                y_lb: vec![0.0, 0.0],
                y_ub: vec![f64::INFINITY, p.short_ub],
                z_lb: vec![0.0],
                z_ub: vec![1.0],
                rows,
                xi: vec![dem],
            }
        })
        .collect();
    Msilp::new(tree, data, Dims { k: 1, l: 1, r: 2 })
}

pub fn toy_params() -> impl Strategy<Value = Toy> {
    (1.0..6.0f64, 1.0..8.0f64, 0.0..6.0f64, 0.1..2.0f64, 0.5..2.0f64, 4.0..20.0f64, 0.0..6.0f64, 3.0..12.0f64).prop_map(
        |(base_cap, inc, z_cost, hold, prod, short, d0, d1)| Toy {
            base_cap,
            inc,
            z_cost,
            hold,
            prod,
            short,
            demand: vec![d0, d1],
            ..Toy::default()
        },
    )
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Cost-to-go of node `n` by direct LP over its subtree, with the parent state,
/// every integer copy and the parent's integer block held fixed. `None` if infeasible.
///
/// Integer-only rows are skipped: they constrain the copies, not the recourse.
pub fn subtree_value(
    m: &Msilp,
    agg: &mcpolicy::aggregate::AggregationMap,
    n: usize,
    x_par: &[f64],
    zeta: &[f64],
    slot: &[f64],
) -> Option<f64> {
    use mcpolicy::lp::{solve_lp, LpProblem, LpStatus};
    let (k, l, r) = (m.dims.k, m.dims.l, m.dims.r);
    let tree = &m.tree;
    let mut nodes = vec![n];
    let mut i = 0;
    while i < nodes.len() {
        nodes.extend(tree.nodes[nodes[i]].children.iter().copied());
        i += 1;
    }
    let mut lp = LpProblem::default();
    let mut start = std::collections::HashMap::new();
    for &v in &nodes {
        let nd = &m.data[v];
        let w = tree.nodes[v].p / tree.nodes[n].p;
        start.insert(v, lp.num_cols());
        for i in 0..k {
            lp.add_col(w * nd.d[i], nd.x_lb[i], nd.x_ub[i]);
        }
        for i in 0..r {
            lp.add_col(w * nd.h[i], nd.y_lb[i], nd.y_ub[i]);
        }
    }
    for &v in &nodes {
        for row in m.data[v].rows.iter().filter(|row| !row.is_pure_z()) {
            let mut coeffs = Vec::new();
            let mut rhs = row.rhs;
            for &(var, a) in &row.coeffs {
                match var {
                    Var::X(i) => coeffs.push((start[&v] + i, a)),
                    Var::Y(i) => coeffs.push((start[&v] + k + i, a)),
                    Var::ParentX(i) if v == n => rhs -= a * x_par[i],
                    Var::ParentX(i) => coeffs.push((start[&tree.parent(v).unwrap()] + i, a)),
                    Var::Z(i) => rhs -= a * zeta[agg.group_of(v) * l + i],
                    Var::AncestorZ { lag: 1, idx } if v == n => rhs -= a * slot[idx],
                    Var::AncestorZ { lag, idx } => {
                        let anc = tree.ancestor(v, lag).unwrap();
                        rhs -= a * zeta[agg.group_of(anc) * l + idx];
                    }
                }
            }
            lp.add_row(coeffs, row.sense, rhs);
        }
    }
    let sol = solve_lp(&lp, None).unwrap();
    match sol.status {
        LpStatus::Optimal => Some(sol.objective),
        _ => None,
    }
}
