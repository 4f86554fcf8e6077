//! Symmetric sparse storage and a profile (skyline) Cholesky factorization.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Stiffness,
    Mass,
    Combination,
}

/// Where a form came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub mesh_id: u64,
    pub field: String,
    pub quadrature: &'static str,
}

/// Symmetric matrix stored as its lower triangle in CSR order (columns sorted, diagonal last).
#[derive(Clone, Debug)]
pub struct SparseSymmetricForm {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    pub kind: FormKind,
    pub provenance: Provenance,
}

impl SparseSymmetricForm {
    /// Zero matrix on a given lower-triangular pattern.
    pub fn with_pattern(row_ptr: Vec<usize>, col_idx: Vec<usize>, kind: FormKind, provenance: Provenance) -> Self {
        let dim = row_ptr.len() - 1;
        debug_assert!((0..dim).all(|i| {
            let r = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            r.windows(2).all(|w| w[0] < w[1]) && r.last() == Some(&i)
        }));
        let nnz = col_idx.len();
        SparseSymmetricForm { dim, row_ptr, col_idx, values: vec![0.0; nnz], kind, provenance }
    }

    /// Builds from lower-triangular triplets (row >= col); duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)], kind: FormKind) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            if i >= dim || j > i {
                return Err(Error::DimensionMismatch(format!("triplet ({i}, {j}) outside the lower triangle of a {dim}x{dim} matrix")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (i, mut r) in rows.into_iter().enumerate() {
            r.push((i, 0.0));
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let provenance = Provenance { mesh_id: 0, field: "triplets".into(), quadrature: "none" };
        Ok(SparseSymmetricForm { dim, row_ptr, col_idx, values, kind, provenance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position of (i, j), i >= j, in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn add_at(&mut self, pos: usize, v: f64) {
        self.values[pos] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.values[self.row_ptr[i + 1] - 1]).collect()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let mut s = 0.0;
            let xi = x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let a = self.values[k];
                s += a * x[j];
                if j != i {
                    y[j] += a * xi;
                }
            }
            y[i] += s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec(x, &mut y);
        y
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// x^T A x
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let t = self.values[k] * x[i] * x[j];
                s += if i == j { t } else { 2.0 * t };
            }
        }
        s
    }

    /// a * self + b * other; both must share the pattern.
    pub fn combine(&self, a: f64, other: &SparseSymmetricForm, b: f64) -> Result<SparseSymmetricForm> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::DimensionMismatch("forms do not share a sparsity pattern".into()));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        out.kind = FormKind::Combination;
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> SparseSymmetricForm {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                m[(i, j)] = self.values[k];
                m[(j, i)] = self.values[k];
            }
        }
        m
    }

    /// Lower-triangle "row col value" lines with 17 significant digits, 0-based indices.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(w, "{} {} {:.16e}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }

    /// Row-dependent first column of the profile.
    fn profile_start(&self) -> Vec<usize> {
        (0..self.dim).map(|i| self.col_idx[self.row_ptr[i]]).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor L (A = L L^T) in variable-band row storage.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    dim: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a`, or `a - shift * m` when a shift is given.
    pub fn factor(a: &SparseSymmetricForm, shift: Option<(f64, &SparseSymmetricForm)>) -> Result<Self> {
        let n = a.dim;
        let mut first = a.profile_start();
        if let Some((_, m)) = shift {
            if m.dim != n {
                return Err(Error::DimensionMismatch("shift matrix has a different dimension".into()));
            }
            for (f, g) in first.iter_mut().zip(m.profile_start()) {
                *f = (*f).min(g);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        let scatter = |f: &SparseSymmetricForm, c: f64, data: &mut [f64]| {
            for i in 0..n {
                for k in f.row_ptr[i]..f.row_ptr[i + 1] {
                    let j = f.col_idx[k];
                    data[start[i] + (j - first[i])] += c * f.values[k];
                }
            }
        };
        scatter(a, 1.0, &mut data);
        if let Some((sigma, m)) = shift {
            if sigma != 0.0 {
                scatter(m, -sigma, &mut data);
            }
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let ri = &data[row_i + (lo - fi)..row_i + (j - fi)];
                let rj = &data[start[j] + (lo - fj)..start[j] + (j - fj)];
                let s = data[row_i + (j - fi)] - dot(ri, rj);
                data[row_i + (j - fi)] = s / data[start[j + 1] - 1];
            }
            let r = &data[row_i..row_i + (i - fi)];
            let d = data[row_i + (i - fi)] - dot(r, r);
            if !(d > 0.0) {
                return Err(Error::FactorizationFailed { pivot: i, value: d });
            }
            data[row_i + (i - fi)] = d.sqrt();
        }
        Ok(SkylineCholesky { dim: n, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile_len(&self) -> usize {
        self.data.len()
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim);
        for i in 0..self.dim {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = dot(&row[..i - fi], &b[fi..i]);
            b[i] = (b[i] - s) / row[i - fi];
        }
        for i in (0..self.dim).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for (bj, l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bj -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplace_1d(n: usize) -> SparseSymmetricForm {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        SparseSymmetricForm::from_triplets(n, &t, FormKind::Stiffness).unwrap()
    }

    #[test]
    fn matvec_and_quad_agree_with_dense() {
        let a = laplace_1d(6);
        let x: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let d = a.to_dense();
        let y = a.apply(&x);
        let yd = &d * nalgebra::DVector::from_vec(x.clone());
        for i in 0..6 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
        assert!((a.quad(&x) - dot(&x, &y)).abs() < 1e-13);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplace_1d(50);
        let c = SkylineCholesky::factor(&a, None).unwrap();
        assert_eq!(c.profile_len(), 99);
        let x: Vec<f64> = (0..50).map(|i| 1.0 + i as f64 * 0.1).collect();
        let b = a.apply(&x);
        let y = c.solve(&b);
        for i in 0..50 {
            assert!((x[i] - y[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = SparseSymmetricForm::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)], FormKind::Stiffness).unwrap();
        assert!(matches!(SkylineCholesky::factor(&a, None), Err(Error::FactorizationFailed { pivot: 1, .. })));
    }

    #[test]
    fn shifted_factor_matches_combination() {
        let k = laplace_1d(10);
        let m = k.scaled(0.1);
        let c = SkylineCholesky::factor(&k, Some((2.0, &m))).unwrap();
        let km = k.combine(1.0, &m, -2.0).unwrap();
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x = c.solve(&b);
        let r = km.apply(&x);
        for i in 0..10 {
            assert!((r[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn coordinate_dump() {
        let a = laplace_1d(2);
        let mut out = Vec::new();
        a.write_coordinate(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.contains("1 0 -1.0000000000000000e0"));
    }

    #[test]
    fn triplets_reject_upper_entries() {
        assert!(SparseSymmetricForm::from_triplets(2, &[(0, 1, 1.0)], FormKind::Mass).is_err());
    }

    fn random_spd(n: usize, band: usize, seed: Vec<f64>) -> SparseSymmetricForm {
        let mut t = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in i.saturating_sub(band)..i {
                t.push((i, j, seed[k % seed.len()]));
                k += 1;
            }
        }
        // Strict diagonal dominance.
        let mut a = SparseSymmetricForm::from_triplets(n, &t, FormKind::Stiffness).unwrap();
        let d = a.to_dense();
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)].abs()).sum();
            let pos = a.position(i, i).unwrap();
            a.add_at(pos, off + 1.0);
        }
        a
    }

    proptest! {
        #[test]
        fn cholesky_round_trip(n in 1usize..40, band in 0usize..6, seed in proptest::collection::vec(-1.0f64..1.0, 1..30)) {
            let a = random_spd(n, band, seed);
            let c = SkylineCholesky::factor(&a, None).unwrap();
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let y = c.solve(&a.apply(&x));
            for i in 0..n {
                prop_assert!((x[i] - y[i]).abs() < 1e-9);
            }
        }
    }
}
