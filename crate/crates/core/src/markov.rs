use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

/// Probability comparisons use this absolute tolerance.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("unknown state {0:?}")]
    UnknownState(Vec<i64>),
    #[error("state index {0} out of range")]
    BadIndex(usize),
    #[error("duplicate state {0:?}")]
    DuplicateState(Vec<i64>),
    #[error("states must share one attribute count")]
    RaggedStates,
    #[error("transition {from}->{to} has invalid probability {p}")]
    BadProbability { from: usize, to: usize, p: f64 },
    #[error("outgoing probabilities of state {state} sum to {sum}")]
    NotStochastic { state: usize, sum: f64 },
    #[error("empty chain")]
    Empty,
}

/// A Markov-chain state: a vector of integer attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McState {
    pub attrs: Vec<i64>,
}

impl McState {
    pub fn new(attrs: impl Into<Vec<i64>>) -> Self {
        McState { attrs: attrs.into() }
    }

    pub fn dim(&self) -> usize {
        self.attrs.len()
    }

    /// Projection onto the attribute indices in `idx`.
    pub fn project(&self, idx: &[usize]) -> Vec<i64> {
        idx.iter().map(|&i| self.attrs[i]).collect()
    }
}

/// Finite Markov chain with sparse, validated transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    states: Vec<McState>,
    succ: Vec<Vec<(usize, f64)>>,
    initial: usize,
    index: HashMap<McState, usize>,
}

impl MarkovChain {
    /// `transitions` holds `(from, to, p)` index triples; zero entries are dropped
    /// and repeated pairs accumulate.
    pub fn new(states: Vec<McState>, transitions: &[(usize, usize, f64)], initial: usize) -> Result<Self, McError> {
        if states.is_empty() {
            return Err(McError::Empty);
        }
        let s = states[0].dim();
        let mut index = HashMap::with_capacity(states.len());
        for (i, st) in states.iter().enumerate() {
            if st.dim() != s {
                return Err(McError::RaggedStates);
            }
            if index.insert(st.clone(), i).is_some() {
                return Err(McError::DuplicateState(st.attrs.clone()));
            }
        }
        if initial >= states.len() {
            return Err(McError::BadIndex(initial));
        }
        let mut succ: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
        for &(from, to, p) in transitions {
            if from >= states.len() {
                return Err(McError::BadIndex(from));
            }
            if to >= states.len() {
                return Err(McError::BadIndex(to));
            }
            if !(0.0..=1.0 + PROB_TOL).contains(&p) || !p.is_finite() {
                return Err(McError::BadProbability { from, to, p });
            }
            if p == 0.0 {
                continue;
            }
            match succ[from].iter_mut().find(|e| e.0 == to) {
                Some(e) => e.1 += p,
                None => succ[from].push((to, p)),
            }
        }
        for (i, out) in succ.iter_mut().enumerate() {
            out.sort_by_key(|e| e.0);
            if out.is_empty() {
                continue;
            }
            let sum: f64 = out.iter().map(|e| e.1).sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(McError::NotStochastic { state: i, sum });
            }
        }
        Ok(MarkovChain { states, succ, initial, index })
    }

    /// Builds a chain from a dense row-stochastic matrix over the given states.
    pub fn from_matrix(states: Vec<McState>, p: &[Vec<f64>], initial: usize) -> Result<Self, McError> {
        let mut tr = Vec::new();
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    tr.push((i, j, v));
                }
            }
        }
        MarkovChain::new(states, &tr, initial)
    }

    /// Product of independent chains; attributes are concatenated in argument order.
    pub fn product(a: &MarkovChain, b: &MarkovChain) -> Result<Self, McError> {
        let nb = b.states.len();
        let states = a
            .states
            .iter()
            .flat_map(|sa| {
                b.states.iter().map(move |sb| {
                    let mut v = sa.attrs.clone();
                    v.extend_from_slice(&sb.attrs);
                    McState::new(v)
                })
            })
            .collect();
        let mut tr = Vec::new();
        for (ia, outa) in a.succ.iter().enumerate() {
            for (ib, outb) in b.succ.iter().enumerate() {
                for &(ja, pa) in outa {
                    for &(jb, pb) in outb {
                        tr.push((ia * nb + ib, ja * nb + jb, pa * pb));
                    }
                }
            }
        }
        MarkovChain::new(states, &tr, a.initial * nb + b.initial)
    }

    pub fn states(&self) -> &[McState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &McState {
        &self.states[i]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Attribute count `s`.
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn index_of(&self, s: &McState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Positive-probability successors of state `i`, sorted by index.
    pub fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.succ[i]
    }

    pub fn transition_prob(&self, from: &McState, to: &McState) -> Result<f64, McError> {
        let i = self.index_of(from).ok_or_else(|| McError::UnknownState(from.attrs.clone()))?;
        let j = self.index_of(to).ok_or_else(|| McError::UnknownState(to.attrs.clone()))?;
        Ok(self.prob(i, j))
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.succ[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// Indices of 𝓜_t, the states reachable from the initial state in `t - 1` steps.
    pub fn reachable(&self, t: usize) -> BTreeSet<usize> {
        let mut cur = BTreeSet::from([self.initial]);
        for _ in 1..t.max(1) {
            cur = cur.iter().flat_map(|&i| self.succ[i].iter().map(|e| e.0)).collect();
        }
        cur
    }

    pub fn reachable_states(&self, t: usize) -> BTreeSet<McState> {
        self.reachable(t).into_iter().map(|i| self.states[i].clone()).collect()
    }

    /// `(from, to, p)` triples in index order.
    pub fn transitions(&self) -> Vec<(usize, usize, f64)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |&(j, p)| (i, j, p)))
            .collect()
    }
}
