use mcpolicy_lp::{
    branch_and_cut, parse_lp, solve_lp, write_lp, BnbConfig, CutOracle, LpProblem, MipProblem, MipStatus, NoCuts,
    Row, Sense,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INF: f64 = f64::INFINITY;

#[test]
fn pure_lp_equals_simplex() {
    let mut p = LpProblem::new();
    let x = p.add_col(-1.0, 0.0, INF);
    let y = p.add_col(-2.0, 0.0, INF);
    p.add_row(vec![(x, 1.0), (y, 3.0)], Sense::Le, 4.5);
    p.add_row(vec![(x, 2.0), (y, 1.0)], Sense::Le, 3.0);
    let lp = solve_lp(&p, None).unwrap();
    let mip = branch_and_cut(&MipProblem::new(p), &mut NoCuts, &BnbConfig::default()).unwrap();
    assert_eq!(mip.status, MipStatus::Optimal);
    assert!((mip.objective - lp.objective).abs() < 1e-9);
}

fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MipProblem {
    let mut p = MipProblem::default();
    for (k, &v) in values.iter().enumerate() {
        p.add_int_col(-v, 0.0, 1.0, format!("item{k}"));
    }
    let coeffs = weights.iter().copied().enumerate().collect();
    p.lp.add_row(coeffs, Sense::Le, cap);
    p
}

#[test]
fn knapsack_matches_enumeration() {
    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let weights = [5.0, 7.0, 4.0, 3.0, 2.0];
    let cap = 11.0;
    let mut best: f64 = 0.0;
    for mask in 0u32..32 {
        let (mut v, mut w) = (0.0, 0.0);
        for k in 0..5 {
            if mask >> k & 1 == 1 {
                v += values[k];
                w += weights[k];
            }
        }
        if w <= cap {
            best = best.max(v);
        }
    }
    let sol = branch_and_cut(&knapsack(&values, &weights, cap), &mut NoCuts, &BnbConfig::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!((-sol.objective - best).abs() < 1e-9, "bnb {} enumeration {}", -sol.objective, best);
}

/// Epigraph of the convex recourse `max(4 - 3z, 2z + 0.5)` over one binary.
struct EpigraphOracle {
    calls: usize,
}

fn recourse(z: f64) -> f64 {
    (4.0 - 3.0 * z).max(2.0 * z + 0.5)
}

impl CutOracle for EpigraphOracle {
    type Error = String;
    fn separate(&mut self, x: &[f64]) -> Result<Vec<Row>, String> {
        self.calls += 1;
        let (z, theta) = (x[0], x[1]);
        let q = recourse(z);
        if theta >= q - 1e-9 {
            return Ok(Vec::new());
        }
        // active piece at z
        let (slope, icpt) = if 4.0 - 3.0 * z >= 2.0 * z + 0.5 { (-3.0, 4.0) } else { (2.0, 0.5) };
        Ok(vec![Row::new(vec![(1, 1.0), (0, -slope)], Sense::Ge, icpt)])
    }
}

#[test]
fn toy_benders_matches_extensive_form() {
    let cost_z = 1.5;
    let mut p = MipProblem::default();
    p.add_int_col(cost_z, 0.0, 1.0, "z");
    p.add_col(1.0, 0.0, INF, "theta");
    let mut oracle = EpigraphOracle { calls: 0 };
    let sol = branch_and_cut(&p, &mut oracle, &BnbConfig::default()).unwrap();
    // extensive form: per binary value, solve the LP min theta s.t. both pieces
    let mut best = INF;
    for z in [0.0, 1.0] {
        let mut lp = LpProblem::new();
        let t = lp.add_col(1.0, 0.0, INF);
        lp.add_row(vec![(t, 1.0)], Sense::Ge, 4.0 - 3.0 * z);
        lp.add_row(vec![(t, 1.0)], Sense::Ge, 2.0 * z + 0.5);
        best = best.min(cost_z * z + solve_lp(&lp, None).unwrap().objective);
    }
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!((sol.objective - best).abs() < 1e-9);
    assert!(sol.cuts_added >= 1);
    let x = sol.x.unwrap();
    assert!(x[1] >= recourse(x[0]) - 1e-9);
}

#[test]
fn infeasible_mip_reported() {
    let mut p = MipProblem::default();
    let a = p.add_int_col(0.0, 0.0, 1.0, "a");
    let b = p.add_int_col(0.0, 0.0, 1.0, "b");
    p.lp.add_row(vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0);
    let sol = branch_and_cut(&p, &mut NoCuts, &BnbConfig::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Infeasible);
}

#[test]
fn unbounded_integer_column_rejected() {
    let mut p = MipProblem::default();
    p.add_int_col(1.0, 0.0, INF, "a");
    assert!(branch_and_cut(&p, &mut NoCuts, &BnbConfig::default()).is_err());
}

pub fn random_binary_mip(rng: &mut ChaCha8Rng, nb: usize, nc: usize) -> MipProblem {
    let mut p = MipProblem::default();
    for k in 0..nb {
        p.add_int_col(rng.gen_range(-10.0..10.0), 0.0, 1.0, format!("b{k}"));
    }
    for k in 0..nc {
        p.add_col(rng.gen_range(-2.0..5.0), 0.0, rng.gen_range(1.0..5.0), format!("c{k}"));
    }
    let n = nb + nc;
    for _ in 0..rng.gen_range(1..=6) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                coeffs.push((j, rng.gen_range(-4.0..6.0)));
            }
        }
        let sense = if rng.gen_bool(0.7) { Sense::Le } else { Sense::Ge };
        let rhs = match sense {
            Sense::Le => rng.gen_range(0.0..8.0),
            _ => rng.gen_range(-8.0..2.0),
        };
        p.lp.add_row(coeffs, sense, rhs);
    }
    p
}

/// Enumerate binaries; the continuous part is an LP per assignment.
fn enumerate(p: &MipProblem, nb: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << nb) {
        let mut lp = p.lp.clone();
        for k in 0..nb {
            let v = (mask >> k & 1) as f64;
            lp.col_lb[k] = v;
            lp.col_ub[k] = v;
        }
        let s = solve_lp(&lp, None).unwrap();
        if s.status == mcpolicy_lp::LpStatus::Optimal {
            best = Some(best.map_or(s.objective, |b| b.min(s.objective)));
        }
    }
    best
}

#[test]
fn random_mips_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..40 {
        let nb = rng.gen_range(1..=8);
        let nc = rng.gen_range(0..=3);
        let p = random_binary_mip(&mut rng, nb, nc);
        let sol = branch_and_cut(&p, &mut NoCuts, &BnbConfig::default()).unwrap();
        match enumerate(&p, nb) {
            Some(v) => {
                assert_eq!(sol.status, MipStatus::Optimal);
                assert!((sol.objective - v).abs() <= 1e-6 * (1.0 + v.abs()), "bnb {} enum {}", sol.objective, v);
                assert!(sol.bound <= sol.objective + 1e-9);
            }
            None => assert_eq!(sol.status, MipStatus::Infeasible),
        }
    }
}

#[test]
fn lp_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut p = random_binary_mip(&mut rng, 4, 3);
    p.lp.obj_offset = -2.25;
    p.lp.col_lb[5] = -INF;
    let text = write_lp(&p);
    let q = parse_lp(&text).unwrap();
    assert_eq!(q.integer, p.integer);
    assert_eq!(q.lp.obj, p.lp.obj);
    assert_eq!(q.lp.obj_offset, p.lp.obj_offset);
    assert_eq!(q.lp.col_lb, p.lp.col_lb);
    assert_eq!(q.lp.col_ub, p.lp.col_ub);
    assert_eq!(q.lp.rows.len(), p.lp.rows.len());
    for (a, b) in q.lp.rows.iter().zip(&p.lp.rows) {
        assert_eq!(a, b);
    }
}

#[test]
fn lp_text_parses_handwritten_model() {
    let text = "\\ toy\nMinimize\n obj: 2 x + 3 y - z + 1.5\nSubject To\n c1: x + y >= 1\n c2: - x + 2 z <= 4\n y - z = 0\nBounds\n x <= 4\n -1 <= z <= 1\nBinaries\n y\nEnd\n";
    let p = parse_lp(text).unwrap();
    assert_eq!(p.lp.col_names, ["x", "y", "z"]);
    assert_eq!(p.lp.obj, [2.0, 3.0, -1.0]);
    assert_eq!(p.lp.obj_offset, 1.5);
    assert_eq!(p.lp.col_ub, [4.0, 1.0, 1.0]);
    assert_eq!(p.lp.col_lb, [0.0, 0.0, -1.0]);
    assert_eq!(p.integer, [false, true, false]);
    assert_eq!(p.lp.rows[2].sense, Sense::Eq);
    assert_eq!(p.lp.row_names, ["c1", "c2", "r2"]);
}

#[test]
fn lp_text_rejects_garbage() {
    for bad in ["", "Subject To\n x >= 1\n", "Minimize\n 3 x y\n", "Minimize\n x\nSubject To\n x >= y\n", "Minimize\n x ? 2\n"] {
        assert!(parse_lp(bad).is_err(), "accepted {bad:?}");
    }
}

proptest! {
    #[test]
    fn parser_never_panics(s in "\\PC{0,200}") {
        let _ = parse_lp(&s);
    }

    #[test]
    fn parser_never_panics_on_lp_like_text(lines in proptest::collection::vec("(Minimize|Subject To|Bounds|End| ?[a-z]{1,3}: ?-?[0-9.]{0,4} ?[a-z]{1,2} ?(<=|>=|=) ?-?[0-9e.]{1,5}| ?-?inf <= [a-z] <= [0-9]| [a-z] free)", 0..12)) {
        let _ = parse_lp(&lines.join("\n"));
    }
}
