mod common;

use mcpolicy::markov::{MarkovChain, McState};
use mcpolicy::tree::{build_tree, build_tree_capped, TreeError};
use proptest::prelude::*;

use common::*;

#[test]
fn full_binary_tree() {
    let tree = build_tree(&two_state_chain(), 4).unwrap();
    assert_eq!(tree.len(), 15);
    let sizes: Vec<usize> = (1..=4).map(|t| tree.stage_nodes(t).len()).collect();
    assert_eq!(sizes, vec![1, 2, 4, 8]);
    assert_eq!(tree.leaves(), 7..15);
    assert_eq!(tree.subtree_leaves(0), 7..15);
    assert_eq!(tree.stage_nodes(0), 0..0);
    assert_eq!(tree.stage_nodes(5), 0..0);
    // light, light, light, light
    let p = tree.nodes[7].p;
    assert!((p - 0.6f64.powi(3)).abs() < 1e-12);
    assert_eq!(tree.mc_history_flat(7).unwrap(), vec![0, 0, 0, 0]);
    assert_eq!(tree.mc_history(14).unwrap().last(), Some(&McState::new(vec![1])));
}

#[test]
fn errors() {
    assert_eq!(build_tree(&two_state_chain(), 0).unwrap_err(), TreeError::NoStages);
    assert_eq!(build_tree_capped(&two_state_chain(), 4, 10).unwrap_err(), TreeError::Overflow { cap: 10 });
    let tree = build_tree(&two_state_chain(), 2).unwrap();
    assert_eq!(tree.node(9).unwrap_err(), TreeError::UnknownNode(9));
    assert!(tree.path(9).is_err());
}

#[test]
fn absorbing_states_prune_branches() {
    let mc = MarkovChain::new(
        vec![McState::new(vec![0]), McState::new(vec![1])],
        &[(0, 0, 0.5), (0, 1, 0.5), (1, 1, 1.0)],
        0,
    )
    .unwrap();
    let tree = build_tree(&mc, 3).unwrap();
    assert_eq!(tree.len(), 1 + 2 + 3);
    // the absorbed stage-2 node has a single leaf below it
    assert_eq!(tree.subtree_leaves(2).len(), 1);
}

#[test]
fn edges_csv_lists_every_non_root_node() {
    let tree = build_tree(&two_state_chain(), 3).unwrap();
    let csv = tree.edges_csv();
    assert_eq!(csv.lines().count(), 1 + tree.len() - 1);
    assert!(csv.starts_with("parent,child,p_cond\n0,1,0.6\n"));
}

fn descendants_at_leaf_stage(tree: &mcpolicy::tree::ScenarioTree, n: usize) -> Vec<usize> {
    tree.leaves().filter(|&leaf| tree.path(leaf).unwrap().contains(&n)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stage_probabilities_sum_to_one(w in sparse_weights(4), stages in 1usize..5) {
        let mc = grid_chain(2, 2, &w);
        let tree = build_tree(&mc, stages).unwrap();
        for t in 1..=stages {
            let s: f64 = tree.stage_nodes(t).map(|n| tree.nodes[n].p).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        for n in 1..tree.len() {
            let par = tree.parent(n).unwrap();
            prop_assert!((tree.nodes[par].p * tree.nodes[n].p_cond - tree.nodes[n].p).abs() < 1e-12);
            prop_assert_eq!(tree.stage(par) + 1, tree.stage(n));
        }
    }

    #[test]
    fn subtree_leaves_match_brute_force(w in sparse_weights(4), stages in 1usize..5) {
        let mc = grid_chain(2, 2, &w);
        let tree = build_tree(&mc, stages).unwrap();
        for n in 0..tree.len() {
            let want = descendants_at_leaf_stage(&tree, n);
            let got: Vec<usize> = tree.subtree_leaves(n).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn paths_and_ancestors_agree(w in weights(4), stages in 1usize..5) {
        let mc = grid_chain(2, 2, &w);
        let tree = build_tree(&mc, stages).unwrap();
        for n in 0..tree.len() {
            let path = tree.path(n).unwrap();
            prop_assert_eq!(path.len(), tree.stage(n));
            for lag in 0..path.len() {
                prop_assert_eq!(tree.ancestor(n, lag), Some(path[path.len() - 1 - lag]));
            }
            prop_assert_eq!(tree.ancestor(n, path.len()), None);
            prop_assert_eq!(tree.mc_history_flat(n).unwrap().len(), 2 * tree.stage(n));
        }
    }
}
