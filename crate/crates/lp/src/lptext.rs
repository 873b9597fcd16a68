//! CPLEX-style LP text, one constraint per line.
//!
//! ```text
//! Minimize
//!  obj: 2 x + 3 y + 1.5
//! Subject To
//!  c0: x + y >= 1
//! Bounds
//!  0 <= x <= 4
//!  y free
//! Generals
//!  x
//! End
//! ```
//! Columns are numbered in order of first appearance; columns without a
//! bound line get `[0, +inf)`. Binaries get `[0, 1]` unless bounded explicitly.

use std::collections::HashMap;
use std::fmt::Write;

use crate::problem::{LpProblem, MipProblem, Sense};
use crate::LpError;

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    let ok = s.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]#$".contains(c));
    let lower = s.to_ascii_lowercase();
    ok && !matches!(
            lower.as_str(),
            "inf" | "infinity" | "free" | "end" | "minimize" | "minimise" | "min" | "st" | "bounds" | "generals"
                | "general" | "integers" | "binaries" | "binary"
        )
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_expr(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    let mut first = true;
    for &(j, a) in terms {
        if first {
            if a < 0.0 {
                out.push_str("- ");
            }
            first = false;
        } else if a < 0.0 || (a == 0.0 && a.is_sign_negative()) {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let _ = write!(out, "{} {}", fmt_num(a.abs()), names[j]);
    }
    if first {
        out.push('0');
    }
}

/// Serialises a MIP; names that do not parse back are replaced by `c<j>` / `r<i>`.
pub fn write_lp(p: &MipProblem) -> String {
    let lp = &p.lp;
    let mut seen = HashMap::new();
    let names: Vec<String> = lp
        .col_names
        .iter()
        .enumerate()
        .map(|(j, nm)| {
            let nm = if valid_name(nm) && !seen.contains_key(nm) { nm.clone() } else { format!("c{j}") };
            let nm = if seen.contains_key(&nm) { format!("c{j}_{}", seen.len()) } else { nm };
            seen.insert(nm.clone(), j);
            nm
        })
        .collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj: ");
    let terms: Vec<(usize, f64)> = lp.obj.iter().copied().enumerate().collect();
    write_expr(&mut out, &terms, &names);
    if lp.obj_offset != 0.0 {
        let sign = if lp.obj_offset < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", fmt_num(lp.obj_offset.abs()));
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let nm = lp.row_names.get(i).filter(|s| valid_name(s)).cloned().unwrap_or_else(|| format!("r{i}"));
        let _ = write!(out, " {nm}: ");
        write_expr(&mut out, &row.coeffs, &names);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_cols() {
        let (lo, hi) = (lp.col_lb[j], lp.col_ub[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(lo), names[j], fmt_num(hi));
        }
    }
    let ints: Vec<usize> = (0..lp.num_cols()).filter(|&j| p.integer.get(j).copied().unwrap_or(false)).collect();
    if !ints.is_empty() {
        out.push_str("Generals\n");
        for j in ints {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

fn tokenize(line: &str, ln: usize) -> Result<Vec<Tok>, LpError> {
    let err = |msg: String| LpError::Parse { line: ln, msg };
    let b = line.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            out.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            out.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'=' || b[j] == b'<' || b[j] == b'>') {
                j += 1;
            }
            let op = &line[i..j];
            let s = match op {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(err(format!("bad operator '{op}'"))),
            };
            out.push(Tok::Cmp(s));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'.') {
                j += 1;
            }
            if j < b.len() && (b[j] == b'e' || b[j] == b'E') {
                let mut k = j + 1;
                if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                    k += 1;
                }
                if k < b.len() && b[k].is_ascii_digit() {
                    while k < b.len() && b[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let v: f64 = line[i..j].parse().map_err(|_| err(format!("bad number '{}'", &line[i..j])))?;
            out.push(Tok::Num(v));
            i = j;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < b.len() && ((b[j] as char).is_ascii_alphanumeric() || b"_.[]#$".contains(&b[j])) {
                j += 1;
            }
            let w = &line[i..j];
            match w.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => out.push(Tok::Num(f64::INFINITY)),
                _ => out.push(Tok::Name(w.to_string())),
            }
            i = j;
        } else {
            return Err(err(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Builder {
    lp: LpProblem,
    index: HashMap<String, usize>,
    explicit_bounds: Vec<bool>,
    integer: Vec<bool>,
    binary: Vec<bool>,
}

impl Builder {
    fn col(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.lp.add_named_col(0.0, 0.0, f64::INFINITY, name);
        self.index.insert(name.to_string(), j);
        self.explicit_bounds.push(false);
        self.integer.push(false);
        self.binary.push(false);
        j
    }
}

/// Parses a linear expression: returns merged terms and the constant.
fn parse_expr(b: &mut Builder, toks: &[Tok], ln: usize) -> Result<(Vec<(usize, f64)>, f64), LpError> {
    let err = |msg: &str| LpError::Parse { line: ln, msg: msg.to_string() };
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    while i < toks.len() {
        let mut sign = 1.0;
        let mut any_sign = false;
        while i < toks.len() && matches!(toks[i], Tok::Plus | Tok::Minus) {
            if toks[i] == Tok::Minus {
                sign = -sign;
            }
            any_sign = true;
            i += 1;
        }
        if i > 0 && !any_sign {
            return Err(err("missing operator between terms"));
        }
        match toks.get(i) {
            Some(Tok::Num(v)) => {
                let v = *v;
                i += 1;
                if let Some(Tok::Name(nm)) = toks.get(i) {
                    let j = b.col(nm);
                    terms.push((j, sign * v));
                    i += 1;
                } else {
                    constant += sign * v;
                }
            }
            Some(Tok::Name(nm)) => {
                let j = b.col(nm);
                terms.push((j, sign));
                i += 1;
            }
            _ => return Err(err("expected term")),
        }
    }
    if !constant.is_finite() {
        return Err(err("non-finite constant"));
    }
    if terms.iter().any(|t| !t.1.is_finite()) {
        return Err(err("non-finite coefficient"));
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (j, a) in terms {
        match slot.get(&j) {
            Some(&k) => merged[k].1 += a,
            None => {
                slot.insert(j, merged.len());
                merged.push((j, a));
            }
        }
    }
    Ok((merged, constant))
}

fn strip_label(toks: &[Tok]) -> (Option<String>, &[Tok]) {
    if toks.len() >= 2 {
        if let (Tok::Name(n), Tok::Colon) = (&toks[0], &toks[1]) {
            return (Some(n.clone()), &toks[2..]);
        }
    }
    (None, toks)
}

fn signed_num(toks: &[Tok]) -> Option<f64> {
    match toks {
        [Tok::Num(v)] => Some(*v),
        [Tok::Minus, Tok::Num(v)] => Some(-*v),
        [Tok::Plus, Tok::Num(v)] => Some(*v),
        _ => None,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    Some(match l.as_str() {
        "minimize" | "minimise" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" => Section::Bounds,
        "generals" | "general" | "integers" => Section::Generals,
        "binaries" | "binary" => Section::Binaries,
        "end" => Section::End,
        _ => return None,
    })
}

/// Parses LP text produced by [`write_lp`] (and the common subset of the format).
pub fn parse_lp(text: &str) -> Result<MipProblem, LpError> {
    let mut b = Builder::default();
    let mut section = Section::None;
    let mut saw_objective = false;
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if s == Section::Objective && saw_objective {
                return Err(LpError::Parse { line: ln, msg: "second objective section".into() });
            }
            saw_objective |= s == Section::Objective;
            section = s;
            continue;
        }
        let toks = tokenize(line, ln)?;
        match section {
            Section::None => return Err(LpError::Parse { line: ln, msg: "content before 'Minimize'".into() }),
            Section::End => return Err(LpError::Parse { line: ln, msg: "content after 'End'".into() }),
            Section::Objective => {
                let (_, body) = strip_label(&toks);
                let (terms, c) = parse_expr(&mut b, body, ln)?;
                for (j, a) in terms {
                    b.lp.obj[j] += a;
                }
                b.lp.obj_offset += c;
            }
            Section::Constraints => {
                let (label, body) = strip_label(&toks);
                let at = body
                    .iter()
                    .position(|t| matches!(t, Tok::Cmp(_)))
                    .ok_or(LpError::Parse { line: ln, msg: "constraint without comparison".into() })?;
                let sense = match body[at] {
                    Tok::Cmp(s) => s,
                    _ => unreachable!(),
                };
                let rhs = signed_num(&body[at + 1..])
                    .filter(|v| v.is_finite())
                    .ok_or(LpError::Parse { line: ln, msg: "right-hand side must be a finite number".into() })?;
                let (terms, c) = parse_expr(&mut b, &body[..at], ln)?;
                let name = label.unwrap_or_else(|| format!("r{}", b.lp.num_rows()));
                b.lp.add_named_row(terms, sense, rhs - c, name);
            }
            Section::Bounds => parse_bound(&mut b, &toks, ln)?,
            Section::Generals | Section::Binaries => {
                for t in &toks {
                    match t {
                        Tok::Name(nm) => {
                            let j = b.col(nm);
                            b.integer[j] = true;
                            if section == Section::Binaries {
                                b.binary[j] = true;
                            }
                        }
                        _ => return Err(LpError::Parse { line: ln, msg: "expected column names".into() }),
                    }
                }
            }
        }
    }
    if !saw_objective {
        return Err(LpError::Parse { line: 0, msg: "missing 'Minimize' section".into() });
    }
    for j in 0..b.lp.num_cols() {
        if b.binary[j] && !b.explicit_bounds[j] {
            b.lp.col_ub[j] = 1.0;
        }
    }
    let mip = MipProblem { lp: b.lp, integer: b.integer };
    mip.check().map_err(|e| LpError::Parse { line: 0, msg: e.to_string() })?;
    Ok(mip)
}

fn parse_bound(b: &mut Builder, toks: &[Tok], ln: usize) -> Result<(), LpError> {
    let err = || LpError::Parse { line: ln, msg: "unrecognised bound".into() };
    let set = |b: &mut Builder, nm: &str, lo: Option<f64>, hi: Option<f64>| {
        let j = b.col(nm);
        b.explicit_bounds[j] = true;
        if let Some(v) = lo {
            b.lp.col_lb[j] = v;
        }
        if let Some(v) = hi {
            b.lp.col_ub[j] = v;
        }
    };
    if let [Tok::Name(nm), Tok::Name(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            set(b, nm, Some(f64::NEG_INFINITY), Some(f64::INFINITY));
            return Ok(());
        }
        return Err(err());
    }
    let cmps: Vec<usize> = toks.iter().enumerate().filter(|(_, t)| matches!(t, Tok::Cmp(_))).map(|(i, _)| i).collect();
    let sense_at = |i: usize| match toks[i] {
        Tok::Cmp(s) => s,
        _ => unreachable!(),
    };
    match cmps.as_slice() {
        [a] => {
            let (lhs, rhs) = (&toks[..*a], &toks[a + 1..]);
            let s = sense_at(*a);
            if let ([Tok::Name(nm)], Some(v)) = (lhs, signed_num(rhs)) {
                match s {
                    Sense::Le => set(b, nm, None, Some(v)),
                    Sense::Ge => set(b, nm, Some(v), None),
                    Sense::Eq => set(b, nm, Some(v), Some(v)),
                }
            } else if let (Some(v), [Tok::Name(nm)]) = (signed_num(lhs), rhs) {
                match s {
                    Sense::Le => set(b, nm, Some(v), None),
                    Sense::Ge => set(b, nm, None, Some(v)),
                    Sense::Eq => set(b, nm, Some(v), Some(v)),
                }
            } else {
                return Err(err());
            }
        }
        [a, c] => {
            let (l, mid, r) = (&toks[..*a], &toks[a + 1..*c], &toks[c + 1..]);
            let (Some(lo), [Tok::Name(nm)], Some(hi)) = (signed_num(l), mid, signed_num(r)) else {
                return Err(err());
            };
            if sense_at(*a) != Sense::Le || sense_at(*c) != Sense::Le {
                return Err(err());
            }
            set(b, nm, Some(lo), Some(hi));
        }
        _ => return Err(err()),
    }
    let j = b.index[match toks.iter().find(|t| matches!(t, Tok::Name(_))) {
        Some(Tok::Name(n)) => n.as_str(),
        _ => return Err(err()),
    }];
    let (lo, hi) = (b.lp.col_lb[j], b.lp.col_ub[j]);
    if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
        return Err(LpError::Parse { line: ln, msg: "invalid bound value".into() });
    }
    Ok(())
}
