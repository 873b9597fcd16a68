use std::fmt;

use crate::LpError;

/// Row sense of a linear constraint `a·x {<=, >=, =} rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    /// Bounds of the row activity implied by `rhs`.
    pub fn activity_bounds(self, rhs: f64) -> (f64, f64) {
        match self {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Eq => (rhs, rhs),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A sparse constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimisation LP with column bounds and general rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub obj: Vec<f64>,
    pub obj_offset: f64,
    pub col_lb: Vec<f64>,
    pub col_ub: Vec<f64>,
    pub col_names: Vec<String>,
    pub rows: Vec<Row>,
    pub row_names: Vec<String>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_col(&mut self, obj: f64, lb: f64, ub: f64) -> usize {
        let j = self.obj.len();
        self.add_named_col(obj, lb, ub, format!("x{j}"))
    }

    pub fn add_named_col(&mut self, obj: f64, lb: f64, ub: f64, name: impl Into<String>) -> usize {
        self.obj.push(obj);
        self.col_lb.push(lb);
        self.col_ub.push(ub);
        self.col_names.push(name.into());
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let i = self.rows.len();
        self.add_named_row(coeffs, sense, rhs, format!("r{i}"))
    }

    pub fn add_named_row(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> usize {
        self.rows.push(Row::new(coeffs, sense, rhs));
        self.row_names.push(name.into());
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset + self.obj.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.col_lb[j] - v).max(v - self.col_ub[j]);
        }
        for row in &self.rows {
            worst = worst.max(row.violation(x));
        }
        worst
    }

    /// Checks dimensions and finiteness of the data.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_cols();
        if self.col_lb.len() != n || self.col_ub.len() != n || self.col_names.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} objective entries but {} lower / {} upper bounds / {} names",
                n,
                self.col_lb.len(),
                self.col_ub.len(),
                self.col_names.len()
            )));
        }
        if self.row_names.len() != self.rows.len() {
            return Err(LpError::DimensionMismatch(format!(
                "{} rows but {} row names",
                self.rows.len(),
                self.row_names.len()
            )));
        }
        if !self.obj_offset.is_finite() {
            return Err(LpError::NonFinite("objective offset".into()));
        }
        for j in 0..n {
            if !self.obj[j].is_finite() {
                return Err(LpError::NonFinite(format!("objective of column {j}")));
            }
            let (lb, ub) = (self.col_lb[j], self.col_ub[j]);
            if lb.is_nan() || ub.is_nan() || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of column {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            check_row(row, n).map_err(|e| match e {
                LpError::NonFinite(s) => LpError::NonFinite(format!("row {i}: {s}")),
                LpError::DimensionMismatch(s) => LpError::DimensionMismatch(format!("row {i}: {s}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

pub(crate) fn check_row(row: &Row, n: usize) -> Result<(), LpError> {
    if !row.rhs.is_finite() {
        return Err(LpError::NonFinite("right-hand side".into()));
    }
    for &(j, a) in &row.coeffs {
        if j >= n {
            return Err(LpError::DimensionMismatch(format!("column {j} out of range ({n} columns)")));
        }
        if !a.is_finite() {
            return Err(LpError::NonFinite(format!("coefficient on column {j}")));
        }
    }
    Ok(())
}

/// An LP plus integrality flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipProblem {
    pub lp: LpProblem,
    pub integer: Vec<bool>,
}

impl MipProblem {
    pub fn new(lp: LpProblem) -> Self {
        let integer = vec![false; lp.num_cols()];
        MipProblem { lp, integer }
    }

    pub fn add_int_col(&mut self, obj: f64, lb: f64, ub: f64, name: impl Into<String>) -> usize {
        let j = self.lp.add_named_col(obj, lb, ub, name);
        self.integer.resize(self.lp.num_cols(), false);
        self.integer[j] = true;
        j
    }

    pub fn add_col(&mut self, obj: f64, lb: f64, ub: f64, name: impl Into<String>) -> usize {
        let j = self.lp.add_named_col(obj, lb, ub, name);
        self.integer.resize(self.lp.num_cols(), false);
        j
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn check(&self) -> Result<(), LpError> {
        self.lp.check()?;
        if self.integer.len() != self.lp.num_cols() {
            return Err(LpError::DimensionMismatch(format!(
                "{} integrality flags for {} columns",
                self.integer.len(),
                self.lp.num_cols()
            )));
        }
        Ok(())
    }
}
