//! Coefficient matrix fields A(X2) and their block algebra.
//!
//! A field is a symmetric n x n matrix depending only on the cross-section
//! variable X2. The first p coordinates are the unbounded cylinder axes, the
//! remaining d = n - p span the cross-section.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::assemble::cell_midpoints;
use crate::error::{Error, Result};
use crate::grid::{DomainKind, TensorMesh};

/// Absolute threshold on the L2 norm of A12 . grad W1 deciding the coupling condition.
pub const TOL_CON: f64 = 1e-8;
/// A11 counts as singular below this reciprocal condition number.
pub const RCOND_MIN: f64 = 1e-12;

/// A small dense symmetric matrix (n <= 3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    n: usize,
    a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "SymMat supports n in 1..=3");
        SymMat { n, a: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    /// Builds from the upper triangle listed row by row.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} upper-triangular entries for n={n}, got {}",
                n * (n + 1) / 2,
                upper.len()
            )));
        }
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, upper[k]);
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn from_dmatrix(d: &DMatrix<f64>) -> Self {
        let n = d.nrows();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, 0.5 * (d[(i, j)] + d[(j, i)]));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Sets entry (i, j) and its mirror.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn add_scaled(&self, other: &SymMat, s: f64) -> SymMat {
        assert_eq!(self.n, other.n);
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] += s * other.a[i][j];
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.a[i][j])
    }

    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for i in 0..self.n {
            for j in 0..self.n {
                y[i] += self.a[i][j] * x[j];
            }
        }
        y
    }

    /// (A x) . x
    pub fn form(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        (0..self.n).map(|i| y[i] * x[i]).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Conjugation by S = diag(-I_p, I_d), which flips the sign of the A12 block.
    pub fn reflect(&self, p: usize) -> SymMat {
        let mut out = *self;
        for i in 0..p {
            for j in p..self.n {
                out.set(i, j, -self.a[i][j]);
            }
        }
        out
    }

    /// Principal sub-matrix on the given index list.
    pub fn restrict(&self, idx: &[usize]) -> SymMat {
        let mut out = SymMat::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.a[a][b] = self.a[i][j];
            }
        }
        out
    }
}

/// Blocks of a symmetric matrix split after the first `p` indices.
pub struct Blocks {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a22: DMatrix<f64>,
}

pub fn split_blocks(a: &SymMat, p: usize) -> Blocks {
    let m = a.to_dmatrix();
    let n = a.dim();
    Blocks {
        a11: m.view((0, 0), (p, p)).into_owned(),
        a12: m.view((0, p), (p, n - p)).into_owned(),
        a22: m.view((p, p), (n - p, n - p)).into_owned(),
    }
}

fn reciprocal_condition(a11: &DMatrix<f64>) -> f64 {
    let ev = a11.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// A22 - A12^T A11^{-1} A12 for a single matrix.
pub fn schur_complement(a: &SymMat, p: usize) -> Result<SymMat> {
    let b = split_blocks(a, p);
    let rcond = reciprocal_condition(&b.a11);
    if rcond < RCOND_MIN {
        return Err(Error::SingularBlock { rcond });
    }
    let chol = b.a11.clone().cholesky().ok_or(Error::SingularBlock { rcond })?;
    let x = chol.solve(&b.a12);
    let s = &b.a22 - b.a12.transpose() * x;
    Ok(SymMat::from_dmatrix(&s))
}

/// Z1 = -A11^{-1} A12 Z2 for a single matrix.
pub fn schur_argmin(a: &SymMat, p: usize, z2: &[f64]) -> Result<Vec<f64>> {
    let b = split_blocks(a, p);
    if z2.len() != a.dim() - p {
        return Err(Error::DimensionMismatch(format!(
            "Z2 has length {}, cross-section dimension is {}",
            z2.len(),
            a.dim() - p
        )));
    }
    let rcond = reciprocal_condition(&b.a11);
    if rcond < RCOND_MIN {
        return Err(Error::SingularBlock { rcond });
    }
    let chol = b.a11.clone().cholesky().ok_or(Error::SingularBlock { rcond })?;
    let rhs = &b.a12 * DVector::from_column_slice(z2);
    Ok(chol.solve(&rhs).iter().map(|v| -v).collect())
}

/// One cell of a piecewise-constant table: a box in the cross-section and the matrix on it.
#[derive(Clone, Debug, PartialEq)]
pub struct TableCell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub value: SymMat,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    /// [[1, delta], [delta, 1]] on a 1D cross-section.
    Model { delta: f64 },
    /// Constant diagonal matrix.
    Diagonal { entries: Vec<f64> },
    /// C + sum_k x_k L_k + sum_k x_k^2 Q_k in the cross-section coordinates.
    Polynomial {
        constant: SymMat,
        linear: Vec<SymMat>,
        quadratic: Vec<SymMat>,
    },
    /// Constant per cross-section box, evaluated at cell midpoints during assembly.
    Table { cells: Vec<TableCell> },
}

impl FieldKind {
    pub fn tag(&self) -> &'static str {
        match self {
            FieldKind::Model { .. } => "model",
            FieldKind::Diagonal { .. } => "diagonal",
            FieldKind::Polynomial { .. } => "polynomial",
            FieldKind::Table { .. } => "table",
        }
    }
}

/// Symmetric coefficient field A(X2).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    n: usize,
    p: usize,
    kind: FieldKind,
    reflected: bool,
    label: String,
}

/// Extremal eigenvalues over a sample set, with the sample attaining each.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityBounds {
    pub lambda_a: f64,
    pub lambda_at: Vec<f64>,
    pub c_a: f64,
    pub c_at: Vec<f64>,
}

/// Result of auditing A12 . grad W1 on the cross-section.
#[derive(Clone, Debug, PartialEq)]
pub struct ConAudit {
    pub holds: bool,
    pub norm: f64,
    pub signed_integral: f64,
    /// A12 . grad W1 <= TOL_CON at every quadrature point.
    pub nonpositive: bool,
}

impl CoefficientField {
    fn new(n: usize, p: usize, kind: FieldKind, label: String) -> Result<Self> {
        if !(2..=3).contains(&n) || p == 0 || p >= n {
            return Err(Error::DimensionMismatch(format!("unsupported (n, p) = ({n}, {p})")));
        }
        Ok(CoefficientField { n, p, kind, reflected: false, label })
    }

    /// The model matrix [[1, delta], [delta, 1]].
    pub fn model(delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta.abs()) {
            return Err(Error::NotElliptic { min_eig: 1.0 - delta.abs(), location: vec![] });
        }
        Self::new(2, 1, FieldKind::Model { delta }, format!("model(delta={delta})"))
    }

    pub fn identity(n: usize, p: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n], p)
    }

    pub fn diagonal(entries: &[f64], p: usize) -> Result<Self> {
        let label = format!("diagonal({})", join(entries));
        Self::new(entries.len(), p, FieldKind::Diagonal { entries: entries.to_vec() }, label)
    }

    pub fn polynomial(p: usize, constant: SymMat, linear: Vec<SymMat>, quadratic: Vec<SymMat>, label: &str) -> Result<Self> {
        let n = constant.dim();
        let d = n.saturating_sub(p);
        if linear.len() > d || quadratic.len() > d || linear.iter().chain(&quadratic).any(|m| m.dim() != n) {
            return Err(Error::DimensionMismatch("polynomial field terms do not conform".into()));
        }
        Self::new(n, p, FieldKind::Polynomial { constant, linear, quadratic }, label.to_string())
    }

    /// Model matrix with a22 = 1 + c x2^2.
    pub fn model_variable_a22(delta: f64, c: f64) -> Result<Self> {
        let constant = SymMat::from_upper(2, &[1.0, delta, 1.0])?;
        let q = SymMat::from_upper(2, &[0.0, 0.0, c])?;
        Self::polynomial(1, constant, vec![], vec![q], &format!("variable-a22(delta={delta},c={c})"))
    }

    /// Model matrix with delta(x2) = delta0 (1 + x2/2); not even in x2.
    pub fn asymmetric(delta0: f64) -> Result<Self> {
        let constant = SymMat::from_upper(2, &[1.0, delta0, 1.0])?;
        let l = SymMat::from_upper(2, &[0.0, 0.5 * delta0, 0.0])?;
        Self::polynomial(1, constant, vec![l], vec![], &format!("asymmetric(delta0={delta0})"))
    }

    /// Identity plus a12 = c x2. For c > 0 and W1 even and unimodal, A12 W1' <= 0.
    pub fn odd_coupling(c: f64) -> Result<Self> {
        let constant = SymMat::identity(2);
        let l = SymMat::from_upper(2, &[0.0, c, 0.0])?;
        Self::polynomial(1, constant, vec![l], vec![], &format!("odd-coupling(c={c})"))
    }

    /// n = 3, p = 2 field coupling the first axis to the cross-section by delta.
    pub fn model_3d(delta: f64) -> Result<Self> {
        let constant = SymMat::from_upper(3, &[1.0, 0.0, delta, 1.0, 0.0, 1.0])?;
        Self::polynomial(2, constant, vec![], vec![], &format!("model3d(delta={delta})"))
    }

    /// Piecewise-constant field from a table: one line per cell with the cell's
    /// lower/upper bounds per cross-section axis, then the upper triangle of A.
    pub fn from_table_str(text: &str, n: usize, p: usize, label: &str) -> Result<Self> {
        if p == 0 || p >= n || n > 3 {
            return Err(Error::DimensionMismatch(format!("unsupported (n, p) = ({n}, {p})")));
        }
        let d = n - p;
        let want = 2 * d + n * (n + 1) / 2;
        let mut cells = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| Error::Config(format!("table line {}: {e}", lineno + 1)))?;
            if vals.len() != want {
                return Err(Error::Config(format!(
                    "table line {}: expected {want} numbers, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            let lo: Vec<f64> = (0..d).map(|k| vals[2 * k]).collect();
            let hi: Vec<f64> = (0..d).map(|k| vals[2 * k + 1]).collect();
            if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
                return Err(Error::Config(format!("table line {}: empty cell", lineno + 1)));
            }
            let value = SymMat::from_upper(n, &vals[2 * d..])?;
            cells.push(TableCell { lo, hi, value });
        }
        if cells.is_empty() {
            return Err(Error::Config("coefficient table has no cells".into()));
        }
        Self::new(n, p, FieldKind::Table { cells }, label.to_string())
    }

    pub fn from_table_file(path: &Path, n: usize, p: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_table_str(&text, n, p, &format!("table({})", path.display()))
    }

    /// The field S A S with S = diag(-I_p, I_d).
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.reflected = !out.reflected;
        out
    }

    /// The two-dimensional field on axis i and the cross-section: rows and columns {i} and p..n.
    pub fn row_restriction(&self, axis: usize) -> Result<RestrictedField> {
        if axis >= self.p {
            return Err(Error::DimensionMismatch(format!("axis {axis} is not a cylinder axis")));
        }
        let mut idx = vec![axis];
        idx.extend(self.p..self.n);
        if idx.len() > 3 {
            return Err(Error::DimensionMismatch("restriction too large".into()));
        }
        Ok(RestrictedField { parent: self.clone(), idx })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cross_dim(&self) -> usize {
        self.n - self.p
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    pub fn label(&self) -> String {
        if self.reflected {
            format!("reflected({})", self.label)
        } else {
            self.label.clone()
        }
    }

    /// The model delta, when the field has one.
    pub fn delta(&self) -> Option<f64> {
        match &self.kind {
            FieldKind::Model { delta } => Some(*delta),
            _ => None,
        }
    }

    /// True for piecewise-constant tables, which are evaluated at cell midpoints.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Table { .. })
    }

    /// True when A does not depend on X2 at all.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            FieldKind::Model { .. } | FieldKind::Diagonal { .. } => true,
            FieldKind::Polynomial { linear, quadratic, .. } => linear.iter().chain(quadratic).all(|m| *m == SymMat::zeros(self.n)),
            FieldKind::Table { cells } => cells.windows(2).all(|w| w[0].value == w[1].value),
        }
    }

    /// A(X2). Points outside every table cell take the nearest cell's value.
    pub fn eval(&self, x2: &[f64]) -> SymMat {
        debug_assert_eq!(x2.len(), self.cross_dim());
        let a = match &self.kind {
            FieldKind::Model { delta } => {
                let mut m = SymMat::identity(2);
                m.set(0, 1, *delta);
                m
            }
            FieldKind::Diagonal { entries } => SymMat::diagonal(entries),
            FieldKind::Polynomial { constant, linear, quadratic } => {
                let mut m = *constant;
                for (k, l) in linear.iter().enumerate() {
                    m = m.add_scaled(l, x2[k]);
                }
                for (k, q) in quadratic.iter().enumerate() {
                    m = m.add_scaled(q, x2[k] * x2[k]);
                }
                m
            }
            FieldKind::Table { cells } => table_lookup(cells, x2),
        };
        if self.reflected {
            a.reflect(self.p)
        } else {
            a
        }
    }

    /// A(-X2) = A(X2) at every sample point.
    pub fn is_even(&self, samples: &[Vec<f64>]) -> bool {
        samples.iter().all(|x| {
            let minus: Vec<f64> = x.iter().map(|v| -v).collect();
            let a = self.eval(x);
            let b = self.eval(&minus);
            (0..self.n).all(|i| (0..self.n).all(|j| (a.get(i, j) - b.get(i, j)).abs() <= 1e-14 * (1.0 + a.get(i, j).abs())))
        })
    }

    /// Smallest and largest eigenvalue of A over the samples.
    pub fn ellipticity_bounds(&self, samples: &[Vec<f64>]) -> Result<EllipticityBounds> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty sample grid".into()));
        }
        let mut out = EllipticityBounds { lambda_a: f64::INFINITY, lambda_at: vec![], c_a: f64::NEG_INFINITY, c_at: vec![] };
        for x in samples {
            let ev = self.eval(x).eigenvalues();
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            if lo < out.lambda_a {
                out.lambda_a = lo;
                out.lambda_at = x.clone();
            }
            if hi > out.c_a {
                out.c_a = hi;
                out.c_at = x.clone();
            }
        }
        if out.lambda_a <= 0.0 {
            return Err(Error::NotElliptic { min_eig: out.lambda_a, location: out.lambda_at });
        }
        Ok(out)
    }

    /// A22 - A12^T A11^{-1} A12 at X2.
    pub fn schur_reduce(&self, x2: &[f64]) -> Result<SymMat> {
        schur_complement(&self.eval(x2), self.p)
    }

    /// -A11^{-1} A12 Z2 at X2.
    pub fn schur_minimizer(&self, x2: &[f64], z2: &[f64]) -> Result<Vec<f64>> {
        schur_argmin(&self.eval(x2), self.p, z2)
    }

    /// A12 . grad (a p-vector) at X2 for a cross-section gradient.
    pub fn a12_dot(&self, x2: &[f64], grad: &[f64]) -> [f64; 3] {
        let a = self.eval(x2);
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate().take(self.p) {
            *gi = (0..self.cross_dim()).map(|k| a.get(i, self.p + k) * grad[k]).sum();
        }
        g
    }
}

/// Audits A12 . grad W1 on a cross-section mesh with midpoint quadrature.
///
/// `norm` is the L2 norm of the p-vector A12 . grad W1 and `signed_integral`
/// the integral of (A12 . grad W1) W1, summed over the p components.
pub fn condition_con(field: &CoefficientField, mesh: &TensorMesh, w1_nodal: &[f64]) -> Result<ConAudit> {
    if mesh.kind() != DomainKind::CrossSection || mesh.dim() != field.cross_dim() {
        return Err(Error::MeshMismatch(format!("condition audit needs a {}-dimensional cross-section mesh", field.cross_dim())));
    }
    if w1_nodal.len() != mesh.n_nodes() {
        return Err(Error::MeshMismatch(format!("W1 has {} values for {} nodes", w1_nodal.len(), mesh.n_nodes())));
    }
    let mut norm_sq = 0.0;
    let mut signed = 0.0;
    let mut nonpositive = true;
    for c in cell_midpoints(mesh, w1_nodal) {
        let x = &c.centre[..mesh.dim()];
        let g = field.a12_dot(x, &c.grad);
        for gi in &g[..field.p()] {
            norm_sq += c.vol * gi * gi;
            signed += c.vol * gi * c.value;
            nonpositive &= *gi <= TOL_CON;
        }
    }
    let norm = norm_sq.sqrt();
    Ok(ConAudit { holds: norm > TOL_CON, norm, signed_integral: signed, nonpositive })
}

/// Principal sub-field on selected indices (used for row restrictions B_i).
#[derive(Clone, Debug)]
pub struct RestrictedField {
    parent: CoefficientField,
    idx: Vec<usize>,
}

impl RestrictedField {
    pub fn into_field(self) -> Result<CoefficientField> {
        let p = self.parent.p();
        let d = self.parent.cross_dim();
        let n = self.idx.len();
        let kind = match self.parent.kind() {
            FieldKind::Model { delta } => FieldKind::Model { delta: *delta },
            FieldKind::Diagonal { entries } => FieldKind::Diagonal { entries: self.idx.iter().map(|&i| entries[i]).collect() },
            FieldKind::Polynomial { constant, linear, quadratic } => FieldKind::Polynomial {
                constant: constant.restrict(&self.idx),
                linear: linear.iter().map(|m| m.restrict(&self.idx)).collect(),
                quadratic: quadratic.iter().map(|m| m.restrict(&self.idx)).collect(),
            },
            FieldKind::Table { cells } => FieldKind::Table {
                cells: cells
                    .iter()
                    .map(|c| TableCell { lo: c.lo.clone(), hi: c.hi.clone(), value: c.value.restrict(&self.idx) })
                    .collect(),
            },
        };
        debug_assert_eq!(n, 1 + d);
        let _ = p;
        let mut f = CoefficientField::new(n, 1, kind, format!("{}[rows {:?}]", self.parent.label, self.idx))?;
        f.reflected = self.parent.reflected;
        Ok(f)
    }
}

fn table_lookup(cells: &[TableCell], x: &[f64]) -> SymMat {
    let inside = |c: &TableCell| c.lo.iter().zip(&c.hi).zip(x).all(|((lo, hi), v)| *v >= *lo && *v <= *hi);
    if let Some(c) = cells.iter().find(|c| inside(c)) {
        return c.value;
    }
    let dist = |c: &TableCell| -> f64 {
        c.lo.iter()
            .zip(&c.hi)
            .zip(x)
            .map(|((lo, hi), v)| {
                let d = if v < lo { lo - v } else if v > hi { v - hi } else { 0.0 };
                d * d
            })
            .sum()
    };
    cells
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .map(|c| c.value)
        .expect("table has at least one cell")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, p={})", self.label(), self.n, self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1d(k: usize) -> Vec<Vec<f64>> {
        (0..=k).map(|i| vec![-1.0 + 2.0 * i as f64 / k as f64]).collect()
    }

    #[test]
    fn model_bounds_are_one_plus_minus_delta() {
        let f = CoefficientField::model(0.6).unwrap();
        let b = f.ellipticity_bounds(&grid1d(10)).unwrap();
        assert!((b.lambda_a - 0.4).abs() < 1e-14);
        assert!((b.c_a - 1.6).abs() < 1e-14);
    }

    #[test]
    fn identity_bounds() {
        let f = CoefficientField::identity(3, 2).unwrap();
        let b = f.ellipticity_bounds(&[vec![0.3]]).unwrap();
        assert_eq!((b.lambda_a, b.c_a), (1.0, 1.0));
    }

    #[test]
    fn piecewise_bounds_pick_global_extremes() {
        let table = "-1 0  2 0 3\n0 1  1 0 5\n";
        let f = CoefficientField::from_table_str(table, 2, 1, "t").unwrap();
        let b = f.ellipticity_bounds(&grid1d(8)).unwrap();
        assert_eq!((b.lambda_a, b.c_a), (1.0, 5.0));
        assert!(b.lambda_at[0] >= 0.0);
    }

    #[test]
    fn non_elliptic_table_is_rejected() {
        let f = CoefficientField::from_table_str("-1 1 1 2 1", 2, 1, "t").unwrap();
        assert!(matches!(f.ellipticity_bounds(&grid1d(2)), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn table_rejects_wrong_arity() {
        assert!(matches!(CoefficientField::from_table_str("-1 1 1 0", 2, 1, "t"), Err(Error::Config(_))));
    }

    #[test]
    fn model_schur_is_one_minus_delta_squared() {
        for &d in &[0.0, 0.1, 0.3, 0.6, 0.95] {
            let s = CoefficientField::model(d).unwrap().schur_reduce(&[0.2]).unwrap();
            assert!((s.get(0, 0) - (1.0 - d * d)).abs() < 1e-15);
        }
    }

    #[test]
    fn model_minimizer_is_minus_delta() {
        let z = CoefficientField::model(0.6).unwrap().schur_minimizer(&[0.0], &[1.0]).unwrap();
        assert!((z[0] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn diagonal_schur_is_a22_and_minimizer_zero() {
        let f = CoefficientField::diagonal(&[2.0, 3.0, 5.0], 1).unwrap();
        let s = f.schur_reduce(&[0.1, 0.2]).unwrap();
        assert_eq!(s, SymMat::diagonal(&[3.0, 5.0]));
        assert_eq!(f.schur_minimizer(&[0.0, 0.0], &[1.0, -2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn singular_block_detected() {
        let a = SymMat::from_upper(2, &[1e-14, 0.0, 1.0]).unwrap();
        let mut a2 = a;
        a2.set(0, 0, 0.0);
        assert!(matches!(schur_complement(&a2, 1), Err(Error::SingularBlock { .. })));
    }

    #[test]
    fn reflection_negates_off_diagonal_block() {
        let f = CoefficientField::asymmetric(0.4).unwrap();
        let r = f.reflected();
        let (a, b) = (f.eval(&[0.5]), r.eval(&[0.5]));
        assert_eq!(a.get(0, 1), -b.get(0, 1));
        assert_eq!(a.get(1, 1), b.get(1, 1));
        assert_eq!(r.reflected(), f);
    }

    #[test]
    fn evenness() {
        let s = grid1d(6);
        assert!(CoefficientField::model(0.6).unwrap().is_even(&s));
        assert!(CoefficientField::model_variable_a22(0.6, 0.25).unwrap().is_even(&s));
        assert!(!CoefficientField::asymmetric(0.4).unwrap().is_even(&s));
        assert!(!CoefficientField::odd_coupling(0.5).unwrap().is_even(&s));
    }

    #[test]
    fn asymmetric_field_stays_elliptic() {
        let f = CoefficientField::asymmetric(0.4).unwrap();
        let b = f.ellipticity_bounds(&grid1d(100)).unwrap();
        assert!(b.lambda_a >= 0.4 - 1e-12);
    }

    #[test]
    fn restriction_of_3d_field() {
        let f = CoefficientField::model_3d(0.6).unwrap();
        let b1 = f.row_restriction(0).unwrap().into_field().unwrap();
        let b2 = f.row_restriction(1).unwrap().into_field().unwrap();
        assert_eq!(b1.eval(&[0.0]).get(0, 1), 0.6);
        assert_eq!(b2.eval(&[0.0]).get(0, 1), 0.0);
        assert!(f.row_restriction(2).is_err());
    }

    #[test]
    fn dimension_checks() {
        assert!(CoefficientField::identity(2, 2).is_err());
        assert!(CoefficientField::identity(4, 1).is_err());
        assert!(CoefficientField::model(1.0).is_err());
    }

    fn cross_w1(cells_per_unit: f64) -> (TensorMesh, Vec<f64>) {
        use crate::grid::{CrossSection, Resolution};
        let om = CrossSection::interval(-1.0, 1.0);
        let mesh = TensorMesh::build(DomainKind::CrossSection, 0.0, &om, Resolution { axial: 1.0, cross: cells_per_unit }, 1).unwrap();
        let pen = crate::assemble::assemble_cross_section(&mesh, &CoefficientField::identity(2, 1).unwrap(), false).unwrap();
        let pair = crate::eig::smallest_eigenpairs(&pen.stiffness, &pen.mass, 1, 1e-10).unwrap().remove(0);
        let w = pen.dofs.expand(&pair.vector);
        (mesh, w)
    }

    #[test]
    fn con_audit_diagonal_and_model() {
        let (mesh, w) = cross_w1(64.0);
        let d = condition_con(&CoefficientField::diagonal(&[1.0, 2.0], 1).unwrap(), &mesh, &w).unwrap();
        assert!(!d.holds);
        assert_eq!(d.norm, 0.0);
        assert_eq!(d.signed_integral, 0.0);
        assert!(d.nonpositive);
        let m = condition_con(&CoefficientField::model(0.6).unwrap(), &mesh, &w).unwrap();
        assert!(m.holds);
        assert!(m.signed_integral.abs() < 1e-12);
        // norm^2 -> delta^2 mu1
        let target = 0.36 * std::f64::consts::FRAC_PI_2.powi(2);
        assert!((m.norm * m.norm - target).abs() < 1e-3);
        assert!(!m.nonpositive);
    }

    #[test]
    fn con_audit_rejects_wrong_mesh() {
        let (mesh, w) = cross_w1(8.0);
        let f3 = CoefficientField::model_3d(0.3).unwrap();
        assert!(condition_con(&f3, &mesh, &w).is_ok());
        assert!(matches!(condition_con(&CoefficientField::model(0.3).unwrap(), &mesh, &w[1..]), Err(Error::MeshMismatch(_))));
    }
}
