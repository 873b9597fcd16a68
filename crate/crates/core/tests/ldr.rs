mod common;

use mcpolicy::aggregate::{build_aggregation, build_policy_graph, AggregationMap, TransformKind, Transformation};
use mcpolicy::hdr::{build_hdr_aggregated, generate_instance, hdr_transformation, HdrConfig};
use mcpolicy::ldr::*;
use mcpolicy::lp::{branch_and_cut, BnbConfig, MipStatus, NoCuts};
use mcpolicy::markov::{MarkovChain, McState};
use mcpolicy::model::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn agg_of(m: &Msilp, k: TransformKind) -> AggregationMap {
    build_aggregation(&m.tree, &Transformation::new(k)).unwrap()
}

fn ef_value(m: &Msilp, agg: &AggregationMap) -> f64 {
    solve_extensive(&build_aggregated_extensive_form(m, agg).unwrap(), &BnbConfig::default()).unwrap().objective
}

fn ldr_value(m: &Msilp, agg: &AggregationMap, kind: LdrKind) -> f64 {
    let model = build_ldr_model(m, agg, LdrVariant::new(kind)).unwrap();
    benders_solve(&model, &LdrConfig::default()).unwrap().objective
}

#[test]
fn variant_names() {
    for k in [LdrKind::Th, LdrKind::T, LdrKind::M] {
        assert_eq!(k.name().parse::<LdrKind>().unwrap(), k);
    }
    assert_eq!("M".parse::<LdrKind>().unwrap(), LdrKind::M);
    assert!("ldr-x".parse::<LdrKind>().is_err());
}

#[test]
fn rule_blocks() {
    let m = toy_model(&two_state_chain(), 4, &Toy::default());
    let agg = agg_of(&m, TransformKind::Ma);
    let th = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::Th)).unwrap();
    let widths: Vec<usize> = th.blocks.iter().map(|b| b.width).collect();
    assert_eq!(widths, vec![3, 4, 5]);
    let t = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::T)).unwrap();
    assert_eq!(t.blocks.len(), 3);
    assert!(t.blocks.iter().all(|b| b.width == 2 && b.key.state.is_none()));
    let mm = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::M)).unwrap();
    assert_eq!(mm.blocks.len(), 6);
    assert_eq!(mm.num_lambda(), 12);
    let bare = build_ldr_model(&m, &agg, LdrVariant { kind: LdrKind::M, intercept: false }).unwrap();
    assert_eq!(bare.num_lambda(), 6);
    // the root keeps its own x column
    assert_eq!(mm.x_expr(0, 0), vec![(mm.x0, 1.0)]);
    assert_eq!(mm.x_expr(1, 0).len(), 2);
}

/// Toy where added capacity is usable in the stage it is bought.
fn undelayed_toy() -> Msilp {
    let mut m = toy_model(&two_state_chain(), 4, &Toy::default());
    for nd in m.data.iter_mut() {
        for row in nd.rows.iter_mut() {
            for (v, _) in row.coeffs.iter_mut() {
                if *v == (Var::AncestorZ { lag: 1, idx: 0 }) && row.sense == mcpolicy::lp::Sense::Le {
                    *v = Var::Z(0);
                }
            }
        }
    }
    m
}

#[test]
fn second_stage_class_counts() {
    let m = undelayed_toy();
    for tk in [TransformKind::Mm, TransformKind::Fh] {
        let agg = agg_of(&m, tk);
        let pg = build_policy_graph(&m.tree, &agg).unwrap();
        for kind in [LdrKind::T, LdrKind::M] {
            let model = build_ldr_model(&m, &agg, LdrVariant::new(kind)).unwrap();
            assert_eq!(model.num_second_stage(), pg.len(), "{tk} {kind}");
        }
        let th = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::Th)).unwrap();
        assert_eq!(th.num_second_stage(), m.tree.len() - 1);
        assert_eq!(th.groups.len(), 6);
        let w: f64 = th.classes.iter().map(|c| c.weight).sum();
        assert!((w - 3.0).abs() < 1e-12);
    }
}

#[test]
fn lagged_integer_states_split_classes() {
    // the parent's integer group enters every second-stage rhs
    let m = toy_model(&two_state_chain(), 4, &Toy::default());
    let agg = agg_of(&m, TransformKind::Mm);
    let model = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::M)).unwrap();
    assert_eq!(model.num_second_stage(), 2 + 4 + 8);
    let agg = agg_of(&m, TransformKind::Hn);
    let model = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::M)).unwrap();
    assert_eq!(model.num_second_stage(), 2 + 4 + 4);
}

#[test]
fn size_cap() {
    let m = toy_model(&two_state_chain(), 4, &Toy::default());
    let agg = agg_of(&m, TransformKind::Hn);
    let r = build_ldr_model_capped(&m, &agg, LdrVariant::new(LdrKind::Th), 10);
    assert!(matches!(r, Err(LdrError::Overflow { cap: 10 })));
}

#[test]
fn deterministic_chain_loses_nothing() {
    let mc = MarkovChain::new(vec![McState::new(vec![0])], &[(0, 0, 1.0)], 0).unwrap();
    let m = toy_model(&mc, 4, &Toy { demand: vec![7.0], ..Toy::default() });
    let agg = agg_of(&m, TransformKind::Fh);
    let ex = ef_value(&m, &agg);
    for kind in [LdrKind::Th, LdrKind::T, LdrKind::M] {
        assert!(rel_close(ldr_value(&m, &agg, kind), ex, 1e-7), "{kind}");
    }
}

#[test]
fn two_stage_state_rules_are_exact() {
    let m = toy_model(&two_state_chain(), 2, &Toy::default());
    for tk in [TransformKind::Hn, TransformKind::Fh] {
        let agg = agg_of(&m, tk);
        assert!(rel_close(ldr_value(&m, &agg, LdrKind::M), ef_value(&m, &agg), 1e-7));
    }
}

#[test]
fn policy_evaluation_agrees() {
    let m = toy_model(&two_state_chain(), 4, &Toy::default());
    let agg = agg_of(&m, TransformKind::Mm);
    for kind in [LdrKind::Th, LdrKind::T, LdrKind::M] {
        let model = build_ldr_model(&m, &agg, LdrVariant::new(kind)).unwrap();
        let sol = benders_solve(&model, &LdrConfig::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        let pol = extract_policy(&model, &sol).unwrap();
        assert_eq!(pol.x.len(), m.tree.len());
        let v = evaluate_ldr_policy(&m, &agg, &pol).unwrap().unwrap();
        assert!(rel_close(v, sol.objective, 1e-7), "{kind}: {v} vs {}", sol.objective);
        let (mip, _) = build_ldr_extensive(&model);
        let direct = branch_and_cut(&mip, &mut NoCuts, &BnbConfig::default()).unwrap();
        assert!(rel_close(direct.objective, sol.objective, 1e-7));
    }
}

#[test]
fn extract_needs_a_solution() {
    let m = toy_model(&two_state_chain(), 3, &Toy::default());
    let agg = agg_of(&m, TransformKind::Hn);
    let model = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::T)).unwrap();
    let mut sol = benders_solve(&model, &LdrConfig::default()).unwrap();
    sol.first.clear();
    assert!(matches!(extract_policy(&model, &sol), Err(LdrError::NoSolution)));
}

/// Every stored cut holds at points near the optimum when θ takes its true value.
fn check_hybrid_cuts(model: &LdrModel, sol: &LdrSolution, points: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nfirst = model.first.lp.num_cols();
    let ints: Vec<usize> = (0..nfirst).filter(|&j| model.first.integer[j]).collect();
    let mut checked = 0;
    for p in 0..points {
        let mut w = sol.first.clone();
        if p > 0 {
            for (j, v) in w.iter_mut().enumerate() {
                if model.first.integer[j] {
                    continue;
                }
                *v += rng.gen_range(-1.0..1.0) * (1.0 + v.abs()) * 0.2;
            }
            for &j in &ints {
                if rng.gen_bool(0.2) {
                    w[j] = 1.0 - w[j].round();
                }
            }
        }
        let vals: Vec<Option<f64>> = (0..model.groups.len()).map(|g| model.group_value(g, &w).unwrap()).collect();
        let all_ok = vals.iter().all(|v| v.is_some());
        let mut full = w.clone();
        full.extend(vals.iter().map(|v| v.unwrap_or(0.0)));
        for c in &sol.cuts {
            let viol = c.row.violation(&full);
            let scale = 1e-6 * (1.0 + c.row.rhs.abs());
            match c.group {
                Some(g) if vals[g].is_some() => {
                    assert!(viol <= scale, "optimality cut violated by {viol}");
                    checked += 1;
                }
                None if all_ok => {
                    assert!(viol <= scale, "feasibility cut removes a feasible point");
                    checked += 1;
                }
                _ => {}
            }
        }
    }
    checked
}

#[test]
fn hybrid_cuts_are_valid() {
    let m = toy_model(&two_state_chain(), 4, &Toy::default());
    let agg = agg_of(&m, TransformKind::Ma);
    for kind in [LdrKind::T, LdrKind::M] {
        let model = build_ldr_model(&m, &agg, LdrVariant::new(kind)).unwrap();
        let sol = benders_solve(&model, &LdrConfig::default()).unwrap();
        assert!(!sol.cuts.is_empty());
        for c in &sol.cuts {
            if let Some(g) = c.group {
                assert!(c.row.coeffs.iter().any(|&(j, _)| j == model.theta_col(g)));
            }
        }
        assert!(check_hybrid_cuts(&model, &sol, 100, 5) > 0);
    }
}

#[test]
fn hdr_orderings() {
    let inst = generate_instance(&HdrConfig::desk(0)).unwrap();
    let m = build_hdr_aggregated(&inst).unwrap();
    let agg = build_aggregation(&m.tree, &hdr_transformation(TransformKind::Pm)).unwrap();
    let pa = ef_value(&m, &agg);
    let lm = ldr_value(&m, &agg, LdrKind::M);
    let lt = ldr_value(&m, &agg, LdrKind::T);
    let tol = 1e-6 * pa.abs();
    assert!(pa <= lm + tol && lm <= lt + tol, "{pa} {lm} {lt}");
    let model = build_ldr_model(&m, &agg, LdrVariant::new(LdrKind::M)).unwrap();
    let sol = benders_solve(&model, &LdrConfig::default()).unwrap();
    check_hybrid_cuts(&model, &sol, 10, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn restriction_orderings(p in toy_params(), k in 0usize..4) {
        let tk = [TransformKind::Hn, TransformKind::Ma, TransformKind::Mm, TransformKind::Fh][k];
        let m = toy_model(&two_state_chain(), 4, &p);
        let agg = agg_of(&m, tk);
        let pa = ef_value(&m, &agg);
        let th = ldr_value(&m, &agg, LdrKind::Th);
        let t = ldr_value(&m, &agg, LdrKind::T);
        let mm = ldr_value(&m, &agg, LdrKind::M);
        let tol = 1e-6 * pa.abs().max(1.0);
        prop_assert!(pa <= mm + tol);
        prop_assert!(pa <= th + tol);
        prop_assert!(mm <= t + tol);
        prop_assert!(th <= t + tol);
    }
}
