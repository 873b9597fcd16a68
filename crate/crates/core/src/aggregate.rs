use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::tree::ScenarioTree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggError {
    #[error("stage index must be at least 1")]
    InvalidStage,
    #[error("partial attribute set {0:?} is empty or out of range")]
    BadPartialAttrs(Vec<usize>),
    #[error("unknown transformation {0:?}")]
    UnknownKind(String),
    #[error("nodes {0} and {1} share a subproblem key but have different child keys")]
    InconsistentChildren(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformKind {
    Hn,
    Ma,
    Mm,
    Pm,
    Fh,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] =
        [TransformKind::Hn, TransformKind::Ma, TransformKind::Pm, TransformKind::Mm, TransformKind::Fh];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Hn => "hn",
            TransformKind::Ma => "ma",
            TransformKind::Mm => "mm",
            TransformKind::Pm => "pm",
            TransformKind::Fh => "fh",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = AggError;
    fn from_str(s: &str) -> Result<Self, AggError> {
        match s.to_ascii_lowercase().as_str() {
            "hn" => Ok(TransformKind::Hn),
            "ma" => Ok(TransformKind::Ma),
            "mm" => Ok(TransformKind::Mm),
            "pm" => Ok(TransformKind::Pm),
            "fh" => Ok(TransformKind::Fh),
            _ => Err(AggError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transformation {
    pub kind: TransformKind,
    /// Attributes of the previous state kept by PM.
    pub partial_attrs: Vec<usize>,
}

impl Transformation {
    pub fn new(kind: TransformKind) -> Self {
        Transformation { kind, partial_attrs: Vec::new() }
    }

    pub fn pm(partial_attrs: Vec<usize>) -> Self {
        Transformation { kind: TransformKind::Pm, partial_attrs }
    }

    fn check(&self, s: usize) -> Result<(), AggError> {
        if self.kind == TransformKind::Pm
            && (self.partial_attrs.is_empty() || self.partial_attrs.iter().any(|&a| a >= s))
        {
            return Err(AggError::BadPartialAttrs(self.partial_attrs.clone()));
        }
        Ok(())
    }
}

/// Φ_t as a dense `q_t × s·t` integer matrix. MM and PM fall back to MA at `t = 1`.
pub fn build_phi(tr: &Transformation, t: usize, s: usize) -> Result<Vec<Vec<i64>>, AggError> {
    if t == 0 {
        return Err(AggError::InvalidStage);
    }
    tr.check(s)?;
    let width = s * t;
    let unit = |col: usize| {
        let mut row = vec![0; width];
        row[col] = 1;
        row
    };
    let current = || (0..s).map(|a| unit(s * (t - 1) + a));
    let kind = match tr.kind {
        TransformKind::Mm | TransformKind::Pm if t == 1 => TransformKind::Ma,
        k => k,
    };
    Ok(match kind {
        TransformKind::Hn => vec![vec![0; width]],
        TransformKind::Ma => current().collect(),
        TransformKind::Mm => (0..s).map(|a| unit(s * (t - 2) + a)).chain(current()).collect(),
        TransformKind::Pm => tr.partial_attrs.iter().map(|&a| unit(s * (t - 2) + a)).chain(current()).collect(),
        TransformKind::Fh => (0..width).map(unit).collect(),
    })
}

/// Φ_t m^t.
pub fn apply_phi(phi: &[Vec<i64>], history: &[i64]) -> Vec<i64> {
    phi.iter().map(|row| row.iter().zip(history).map(|(a, b)| a * b).sum()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub stage: usize,
    pub key: Vec<i64>,
}

/// φ_t: node → aggregated integer group.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationMap {
    pub transformation: Transformation,
    pub groups: Vec<GroupKey>,
    pub node_group: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    stage_groups: Vec<Range<usize>>,
}

impl AggregationMap {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, n: usize) -> usize {
        self.node_group[n]
    }

    pub fn stage_groups(&self, t: usize) -> Range<usize> {
        self.stage_groups.get(t.wrapping_sub(1)).cloned().unwrap_or(0..0)
    }

    pub fn counts_per_stage(&self) -> Vec<usize> {
        self.stage_groups.iter().map(|r| r.len()).collect()
    }
}

pub fn build_aggregation(tree: &ScenarioTree, tr: &Transformation) -> Result<AggregationMap, AggError> {
    let s = tree.chain_states().first().map_or(0, |st| st.dim());
    tr.check(s)?;
    let mut groups = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut node_group = vec![0; tree.len()];
    let mut stage_groups = Vec::new();
    for t in 1..=tree.stages() {
        let phi = build_phi(tr, t, s)?;
        let start = groups.len();
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        for n in tree.stage_nodes(t) {
            let hist = tree.mc_history_flat(n).expect("node in range");
            let key = apply_phi(&phi, &hist);
            let g = *index.entry(key.clone()).or_insert_with(|| {
                groups.push(GroupKey { stage: t, key });
                members.push(Vec::new());
                groups.len() - 1
            });
            node_group[n] = g;
            members[g].push(n);
        }
        stage_groups.push(start..groups.len());
    }
    Ok(AggregationMap { transformation: tr.clone(), groups, node_group, members, stage_groups })
}

/// True iff every group of `a` lies inside a single group of `b`.
pub fn refines(a: &AggregationMap, b: &AggregationMap) -> bool {
    if a.node_group.len() != b.node_group.len() {
        return false;
    }
    a.members.iter().all(|mem| mem.iter().all(|&n| b.node_group[n] == b.node_group[mem[0]]))
}

/// σ = (t, m_t, φ_t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubKey {
    pub stage: usize,
    pub state: usize,
    pub group: usize,
}

/// Quotient of the scenario tree by σ, over stages `t ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGraph {
    pub subs: Vec<SubKey>,
    /// σ(n), `None` for the root.
    pub node_sub: Vec<Option<usize>>,
    /// Child subproblems with transition probabilities.
    pub children: Vec<Vec<(usize, f64)>>,
    pub parents: Vec<Vec<usize>>,
    pub members: Vec<Vec<usize>>,
    /// Stage-2 subproblems hanging off the root, with probabilities.
    pub root_children: Vec<(usize, f64)>,
    stage_subs: Vec<Range<usize>>,
}

impl PolicyGraph {
    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    /// 𝓢_t (empty for `t < 2`).
    pub fn stage_subs(&self, t: usize) -> Range<usize> {
        if t < 2 {
            return 0..0;
        }
        self.stage_subs.get(t - 2).cloned().unwrap_or(0..0)
    }

    pub fn counts_per_stage(&self) -> Vec<usize> {
        self.stage_subs.iter().map(|r| r.len()).collect()
    }

    /// A node of the tree represented by subproblem `s`.
    pub fn representative(&self, s: usize) -> usize {
        self.members[s][0]
    }
}

pub fn build_policy_graph(tree: &ScenarioTree, agg: &AggregationMap) -> Result<PolicyGraph, AggError> {
    let mut subs = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut node_sub = vec![None; tree.len()];
    let mut stage_subs = Vec::new();
    let mut index: HashMap<SubKey, usize> = HashMap::new();
    for t in 2..=tree.stages() {
        let start = subs.len();
        for n in tree.stage_nodes(t) {
            let key = SubKey { stage: t, state: tree.nodes[n].state, group: agg.node_group[n] };
            let s = *index.entry(key).or_insert_with(|| {
                subs.push(key);
                members.push(Vec::new());
                subs.len() - 1
            });
            node_sub[n] = Some(s);
            members[s].push(n);
        }
        stage_subs.push(start..subs.len());
    }
    let child_list = |n: usize| -> Vec<(usize, f64)> {
        tree.nodes[n].children.iter().map(|&c| (node_sub[c].expect("non-root"), tree.nodes[c].p_cond)).collect()
    };
    let mut children = Vec::with_capacity(subs.len());
    for mem in &members {
        let rep = child_list(mem[0]);
        for &n in &mem[1..] {
            let other = child_list(n);
            let same = other.len() == rep.len()
                && other.iter().zip(&rep).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-12);
            if !same {
                return Err(AggError::InconsistentChildren(mem[0], n));
            }
        }
        children.push(rep);
    }
    let mut parents = vec![Vec::new(); subs.len()];
    for (s, ch) in children.iter().enumerate() {
        for &(c, _) in ch {
            parents[c].push(s);
        }
    }
    let root_children = child_list(tree.root());
    Ok(PolicyGraph { subs, node_sub, children, parents, members, root_children, stage_subs })
}
