//! Dense explicit basis inverse with product-form pivot updates.

/// Row-major `m × m` inverse of the current basis matrix.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisInverse {
    pub m: usize,
    pub data: Vec<f64>,
}

impl BasisInverse {
    pub fn zeros(m: usize) -> Self {
        BasisInverse { m, data: vec![0.0; m * m] }
    }

    /// Inverse of `-I`, the all-logical starting basis.
    pub fn neg_identity(m: usize) -> Self {
        let mut inv = Self::zeros(m);
        for i in 0..m {
            inv.data[i * m + i] = -1.0;
        }
        inv
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.m..(r + 1) * self.m]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let m = self.m;
        &mut self.data[r * m..(r + 1) * m]
    }

    /// `B^{-1} a` for a sparse column `a`.
    pub fn ftran_sparse(&self, col: &[(usize, f64)], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.m, 0.0);
        for (p, o) in out.iter_mut().enumerate() {
            let row = self.row(p);
            let mut s = 0.0;
            for &(i, a) in col {
                s += row[i] * a;
            }
            *o = s;
        }
    }

    /// `B^{-1} v` for a dense vector.
    pub fn ftran_dense(&self, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.m, 0.0);
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.row(p).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `cᵀ B^{-1}`.
    pub fn btran(&self, c: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.m, 0.0);
        for (p, &cp) in c.iter().enumerate() {
            if cp == 0.0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.row(p)) {
                *o += cp * b;
            }
        }
    }

    /// Replace the basic column at position `r`, where `alpha = B^{-1} a_q`.
    pub fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for v in self.row_mut(r) {
            *v /= piv;
        }
        let (before, rest) = self.data.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let target = if i < r {
                &mut before[i * m..(i + 1) * m]
            } else {
                let k = i - r - 1;
                &mut after[k * m..(k + 1) * m]
            };
            for (t, &pv) in target.iter_mut().zip(prow.iter()) {
                *t -= a * pv;
            }
        }
    }

    /// Grows the inverse by one row/column for a new row whose logical is basic.
    /// `new_row` must already hold `r_Bᵀ B^{-1}` (length `m`).
    pub fn push_logical_row(&mut self, new_row: &[f64]) {
        let m = self.m;
        let nm = m + 1;
        let mut data = vec![0.0; nm * nm];
        for i in 0..m {
            data[i * nm..i * nm + m].copy_from_slice(self.row(i));
        }
        data[m * nm..m * nm + m].copy_from_slice(new_row);
        data[m * nm + m] = -1.0;
        self.m = nm;
        self.data = data;
    }
}

/// Gauss-Jordan inverse of a dense `k × k` row-major matrix with partial pivoting.
///
/// On singularity returns the columns that found no pivot and the rows left
/// unpivoted (equal counts).
pub(crate) fn dense_inverse(mat: &[f64], k: usize) -> Result<Vec<f64>, (Vec<usize>, Vec<usize>)> {
    let w = 2 * k;
    let mut aug = vec![0.0; k * w];
    for i in 0..k {
        aug[i * w..i * w + k].copy_from_slice(&mat[i * k..(i + 1) * k]);
        aug[i * w + k + i] = 1.0;
    }
    let mut col_scale = vec![0.0f64; k];
    for i in 0..k {
        for c in 0..k {
            col_scale[c] = col_scale[c].max(mat[i * k + c].abs());
        }
    }
    let mut row_used = vec![false; k];
    let mut pivot_row = vec![usize::MAX; k];
    let mut singular = Vec::new();
    let mut scratch = vec![0.0; w];
    for c in 0..k {
        let mut best = usize::MAX;
        let mut best_val = 0.0;
        for i in 0..k {
            if !row_used[i] {
                let v = aug[i * w + c].abs();
                if v > best_val {
                    best_val = v;
                    best = i;
                }
            }
        }
        if best == usize::MAX || best_val <= 1e-11 * col_scale[c].max(1.0) {
            singular.push(c);
            continue;
        }
        row_used[best] = true;
        pivot_row[c] = best;
        let pv = aug[best * w + c];
        for v in &mut aug[best * w..(best + 1) * w] {
            *v /= pv;
        }
        scratch.copy_from_slice(&aug[best * w..(best + 1) * w]);
        for i in 0..k {
            if i == best {
                continue;
            }
            let f = aug[i * w + c];
            if f == 0.0 {
                continue;
            }
            for (t, &s) in aug[i * w..(i + 1) * w].iter_mut().zip(&scratch) {
                *t -= f * s;
            }
        }
    }
    if !singular.is_empty() {
        let free_rows = (0..k).filter(|&i| !row_used[i]).collect();
        return Err((singular, free_rows));
    }
    let mut inv = vec![0.0; k * k];
    for c in 0..k {
        let pr = pivot_row[c];
        inv[c * k..(c + 1) * k].copy_from_slice(&aug[pr * w + k..(pr + 1) * w]);
    }
    Ok(inv)
}
