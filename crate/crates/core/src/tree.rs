use std::fmt::Write as _;
use std::ops::Range;

use crate::markov::{MarkovChain, McState};

/// Paths whose probability falls below this are treated as impossible.
pub const PRUNE_PROB: f64 = 1e-15;
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("scenario tree exceeds {cap} nodes")]
    Overflow { cap: usize },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("a tree needs at least one stage")]
    NoStages,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    /// 1-based stage.
    pub stage: usize,
    /// Index into the chain's state list.
    pub state: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub p: f64,
    pub p_cond: f64,
}

/// Scenario tree with breadth-first ids, so every stage is a contiguous id range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    pub nodes: Vec<TreeNode>,
    stage_start: Vec<usize>,
    states: Vec<McState>,
}

pub fn build_tree(mc: &MarkovChain, stages: usize) -> Result<ScenarioTree, TreeError> {
    build_tree_capped(mc, stages, DEFAULT_NODE_CAP)
}

pub fn build_tree_capped(mc: &MarkovChain, stages: usize, cap: usize) -> Result<ScenarioTree, TreeError> {
    if stages == 0 {
        return Err(TreeError::NoStages);
    }
    let mut nodes = vec![TreeNode {
        id: 0,
        stage: 1,
        state: mc.initial(),
        parent: None,
        children: Vec::new(),
        p: 1.0,
        p_cond: 1.0,
    }];
    let mut stage_start = vec![0, 1];
    for t in 2..=stages {
        let prev = stage_start[t - 2]..stage_start[t - 1];
        for n in prev {
            for &(s, q) in mc.successors(nodes[n].state) {
                let p = nodes[n].p * q;
                if p < PRUNE_PROB {
                    continue;
                }
                if nodes.len() >= cap {
                    return Err(TreeError::Overflow { cap });
                }
                let id = nodes.len();
                nodes.push(TreeNode { id, stage: t, state: s, parent: Some(n), children: Vec::new(), p, p_cond: q });
                nodes[n].children.push(id);
            }
        }
        stage_start.push(nodes.len());
    }
    Ok(ScenarioTree { nodes, stage_start, states: mc.states().to_vec() })
}

impl ScenarioTree {
    pub fn stages(&self) -> usize {
        self.stage_start.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Ids of 𝓝_t (empty range for stages outside `1..=T`).
    pub fn stage_nodes(&self, t: usize) -> Range<usize> {
        if t == 0 || t > self.stages() {
            return 0..0;
        }
        self.stage_start[t - 1]..self.stage_start[t]
    }

    pub fn leaves(&self) -> Range<usize> {
        self.stage_nodes(self.stages())
    }

    pub fn node(&self, n: usize) -> Result<&TreeNode, TreeError> {
        self.nodes.get(n).ok_or(TreeError::UnknownNode(n))
    }

    pub fn stage(&self, n: usize) -> usize {
        self.nodes[n].stage
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.nodes[n].parent
    }

    /// Ancestor `lag` steps up (`lag = 0` is `n` itself).
    pub fn ancestor(&self, n: usize, lag: usize) -> Option<usize> {
        let mut cur = n;
        for _ in 0..lag {
            cur = self.nodes[cur].parent?;
        }
        Some(cur)
    }

    pub fn mc_state(&self, n: usize) -> &McState {
        &self.states[self.nodes[n].state]
    }

    pub fn chain_states(&self) -> &[McState] {
        &self.states
    }

    /// 𝓟(n), root first.
    pub fn path(&self, n: usize) -> Result<Vec<usize>, TreeError> {
        self.node(n)?;
        let mut out = vec![n];
        let mut cur = n;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    /// m^t(n) as a list of states, root first.
    pub fn mc_history(&self, n: usize) -> Result<Vec<McState>, TreeError> {
        Ok(self.path(n)?.into_iter().map(|k| self.mc_state(k).clone()).collect())
    }

    /// m^t(n) flattened to length `s·t`.
    pub fn mc_history_flat(&self, n: usize) -> Result<Vec<i64>, TreeError> {
        Ok(self.path(n)?.into_iter().flat_map(|k| self.mc_state(k).attrs.iter().copied()).collect())
    }

    /// Leaves of the subtree rooted at `n`, as a contiguous id range.
    pub fn subtree_leaves(&self, n: usize) -> Range<usize> {
        let mut cur = n..n + 1;
        for _ in self.nodes[n].stage..self.stages() {
            let lo = cur.clone().find_map(|k| self.nodes[k].children.first().copied());
            let hi = cur.clone().rev().find_map(|k| self.nodes[k].children.last().copied());
            cur = match (lo, hi) {
                (Some(a), Some(b)) => a..b + 1,
                _ => return 0..0,
            };
        }
        cur
    }

    /// Edge list `parent,child,p_cond` as CSV.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("parent,child,p_cond\n");
        for nd in &self.nodes[1..] {
            let _ = writeln!(out, "{},{},{}", nd.parent.unwrap_or(0), nd.id, nd.p_cond);
        }
        out
    }
}
