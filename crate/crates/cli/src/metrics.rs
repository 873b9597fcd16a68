/// Share of the HN–FH gap closed by `obj_i`, in percent. `None` when HN and FH tie.
pub fn gap_closed(obj_hn: f64, obj_i: f64, obj_fh: f64) -> Option<f64> {
    let den = obj_hn - obj_fh;
    if den.abs() <= 1e-9 * obj_hn.abs().max(1.0) {
        return None;
    }
    Some(100.0 * (obj_hn - obj_i) / den)
}

/// `100·|ref − i| / ref`.
pub fn relative_difference(obj_ref: f64, obj_i: f64) -> f64 {
    100.0 * (obj_ref - obj_i).abs() / obj_ref
}

/// `(objective − bound) / max(|objective|, 1e-9)`.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    (objective - bound) / objective.abs().max(1e-9)
}

/// Six significant digits, shortest form.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let r: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    if r == 0.0 {
        return "0".into();
    }
    format!("{r}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}
