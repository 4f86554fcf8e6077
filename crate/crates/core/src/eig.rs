//! Smallest eigenpairs of the symmetric pencil K u = lambda M u.
//!
//! Shift-invert at zero: a thick-restart Krylov-Schur iteration on
//! T = K^{-1} M, which is self-adjoint in the M inner product. Locked vectors
//! are projected out M-orthogonally, which gives the constrained second pair.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{dot, SkylineCholesky, SparseSymmetricForm};

/// Relative T-residual below which a Ritz pair is accepted outright.
const T_RESIDUAL_TARGET: f64 = 1e-13;
/// Restarts without halving the T-residual before accepting a K-converged pair.
const STAGNATION_RESTARTS: usize = 6;
/// Pairs closer than this (relative) are flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// M-normalized coefficients over the free dofs.
    pub vector: Vec<f64>,
    /// ||K u - value M u||_2 / ||M u||_2
    pub residual: f64,
    /// Distance to the next Ritz value, when one was available.
    pub gap_to_next: Option<f64>,
    pub degenerate: bool,
    /// min entry >= -1e-8 max entry after sign fixing.
    pub constant_sign: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov subspace size; 0 picks a default from the requested count.
    pub subspace: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_restarts: 500, subspace: 0, seed: 0x00c0_ffee }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

/// (x^T K x) / (x^T M x)
pub fn rayleigh_quotient(k: &SparseSymmetricForm, m: &SparseSymmetricForm, x: &[f64]) -> f64 {
    k.quad(x) / m.quad(x)
}

pub fn smallest_eigenpairs(k: &SparseSymmetricForm, m: &SparseSymmetricForm, count: usize, tol: f64) -> Result<Vec<EigenPair>> {
    smallest_eigenpairs_with(k, m, count, &SolverOptions::with_tol(tol))
}

pub fn smallest_eigenpairs_with(k: &SparseSymmetricForm, m: &SparseSymmetricForm, count: usize, opts: &SolverOptions) -> Result<Vec<EigenPair>> {
    Solver::new(k, m, opts, &[])?.run(count)
}

/// Minimizer of the Rayleigh quotient over vectors M-orthogonal to `u1`.
pub fn second_eigenpair_constrained(k: &SparseSymmetricForm, m: &SparseSymmetricForm, u1: &EigenPair, tol: f64) -> Result<EigenPair> {
    second_eigenpair_constrained_with(k, m, u1, &SolverOptions::with_tol(tol))
}

pub fn second_eigenpair_constrained_with(k: &SparseSymmetricForm, m: &SparseSymmetricForm, u1: &EigenPair, opts: &SolverOptions) -> Result<EigenPair> {
    if u1.residual > opts.tol {
        return Err(Error::InvalidArgument(format!("locked pair has residual {:.3e} above tol {:.3e}", u1.residual, opts.tol)));
    }
    let mut pairs = Solver::new(k, m, opts, std::slice::from_ref(&u1.vector))?.run(1)?;
    let mut p = pairs.remove(0);
    p.constant_sign = false;
    Ok(p)
}

struct Solver<'a> {
    k: &'a SparseSymmetricForm,
    m: &'a SparseSymmetricForm,
    chol: SkylineCholesky,
    opts: SolverOptions,
    locked: Vec<Vec<f64>>,
    locked_m: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

struct Basis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    tv: Vec<Vec<f64>>,
}

impl<'a> Solver<'a> {
    fn new(k: &'a SparseSymmetricForm, m: &'a SparseSymmetricForm, opts: &SolverOptions, locked: &[Vec<f64>]) -> Result<Self> {
        if k.dim() != m.dim() {
            return Err(Error::DimensionMismatch(format!("K has dimension {}, M has {}", k.dim(), m.dim())));
        }
        if !(opts.tol >= 1e-12 && opts.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {:e} below 1e-12", opts.tol)));
        }
        let chol = SkylineCholesky::factor(k, None)?;
        let mut lk = Vec::new();
        let mut lm = Vec::new();
        for u in locked {
            if u.len() != k.dim() {
                return Err(Error::DimensionMismatch("locked vector has the wrong length".into()));
            }
            let mu = m.apply(u);
            let nrm = dot(u, &mu).sqrt();
            lk.push(u.iter().map(|v| v / nrm).collect());
            lm.push(mu.iter().map(|v| v / nrm).collect());
        }
        Ok(Solver { k, m, chol, opts: opts.clone(), locked: lk, locked_m: lm, rng: ChaCha8Rng::seed_from_u64(opts.seed) })
    }

    fn project_locked(&self, w: &mut [f64]) {
        for (u, mu) in self.locked.iter().zip(&self.locked_m) {
            let c = dot(w, mu);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * ui;
            }
        }
    }

    fn apply_t(&self, mv: &[f64]) -> Vec<f64> {
        let mut y = mv.to_vec();
        self.chol.solve_in_place(&mut y);
        self.project_locked(&mut y);
        y
    }

    /// M-orthonormalizes w against locked vectors and the basis; returns M w or None on breakdown.
    fn orthonormalize(&self, w: &mut [f64], basis: &Basis) -> Option<Vec<f64>> {
        let norm0 = self.m.quad(w).max(0.0).sqrt();
        if norm0 == 0.0 || !norm0.is_finite() {
            return None;
        }
        for _ in 0..2 {
            self.project_locked(w);
            for (v, mv) in basis.v.iter().zip(&basis.mv) {
                let c = dot(w, mv);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let mut mw = self.m.apply(w);
        let nrm = dot(w, &mw).max(0.0).sqrt();
        if !(nrm > 1e-10 * norm0) {
            return None;
        }
        w.iter_mut().for_each(|v| *v /= nrm);
        mw.iter_mut().for_each(|v| *v /= nrm);
        Some(mw)
    }

    fn random_vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    /// Appends w (or a random replacement) to the basis. False when the space is exhausted.
    fn push(&mut self, mut w: Vec<f64>, basis: &mut Basis) -> bool {
        let n = self.k.dim();
        for attempt in 0..4 {
            if attempt > 0 {
                w = self.random_vector(n);
            }
            if let Some(mw) = self.orthonormalize(&mut w, basis) {
                basis.v.push(w);
                basis.mv.push(mw);
                return true;
            }
        }
        false
    }

    fn run(mut self, count: usize) -> Result<Vec<EigenPair>> {
        let n = self.k.dim();
        let n_eff = n.saturating_sub(self.locked.len());
        if count == 0 || count > 6 || count > n_eff {
            return Err(Error::InvalidArgument(format!("cannot compute {count} pairs of a {n_eff}-dimensional problem (max 6)")));
        }
        let m_max = if self.opts.subspace > 0 { self.opts.subspace } else { (2 * count + 20).max(30) }.min(n_eff).max(count + 1).min(n_eff);
        let keep = (count + 6).min(m_max.saturating_sub(1)).max(count);

        let mut basis = Basis { v: Vec::new(), mv: Vec::new(), tv: Vec::new() };
        let start: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * self.rng.gen_range(-1.0..1.0)).collect();
        if !self.push(start, &mut basis) {
            return Err(Error::InvalidArgument("could not build a start vector".into()));
        }
        let mut best_kres = f64::INFINITY;
        let mut best_tres = f64::INFINITY;
        let mut since_improve = 0;

        for _restart in 0..self.opts.max_restarts {
            while basis.v.len() < m_max {
                let j = basis.v.len() - 1;
                if basis.tv.len() <= j {
                    let t = self.apply_t(&basis.mv[j]);
                    basis.tv.push(t);
                }
                let w = basis.tv[j].clone();
                if !self.push(w, &mut basis) {
                    break;
                }
            }
            while basis.tv.len() < basis.v.len() {
                let j = basis.tv.len();
                let t = self.apply_t(&basis.mv[j]);
                basis.tv.push(t);
            }
            let mcur = basis.v.len();
            let full_space = mcur >= n_eff;

            let mut h = DMatrix::zeros(mcur, mcur);
            for i in 0..mcur {
                for j in 0..mcur {
                    h[(i, j)] = dot(&basis.mv[i], &basis.tv[j]);
                }
            }
            let h = (&h + h.transpose()) * 0.5;
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..mcur).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let nkeep = keep.min(mcur);
            let combine = |vs: &[Vec<f64>], col: usize| -> Vec<f64> {
                let mut y = vec![0.0; n];
                for (j, v) in vs.iter().enumerate() {
                    let c = eig.eigenvectors[(j, col)];
                    for (yi, vi) in y.iter_mut().zip(v) {
                        *yi += c * vi;
                    }
                }
                y
            };
            let ys: Vec<Vec<f64>> = (0..nkeep).map(|i| combine(&basis.v, order[i])).collect();
            let mys: Vec<Vec<f64>> = (0..nkeep).map(|i| combine(&basis.mv, order[i])).collect();
            let tys: Vec<Vec<f64>> = (0..nkeep).map(|i| combine(&basis.tv, order[i])).collect();

            let mut tres_max: f64 = 0.0;
            for i in 0..count {
                let z: Vec<f64> = tys[i].iter().zip(&ys[i]).map(|(t, y)| t - theta[i] * y).collect();
                let tres = self.m.quad(&z).max(0.0).sqrt() / theta[i].abs().max(f64::MIN_POSITIVE);
                tres_max = tres_max.max(tres);
            }
            let polished = self.polish(&tys[..count]);
            let kres_max = match &polished {
                Some(p) => p.iter().fold(0.0f64, |a, q| a.max(q.2)),
                None => f64::INFINITY,
            };
            best_kres = best_kres.min(kres_max);
            if tres_max < 0.5 * best_tres {
                best_tres = tres_max;
                since_improve = 0;
            } else {
                since_improve += 1;
            }
            let k_ok = kres_max <= self.opts.tol;
            let done = full_space || (k_ok && (tres_max <= T_RESIDUAL_TARGET || since_improve >= STAGNATION_RESTARTS));
            if done {
                return Ok(match polished {
                    Some(p) if !full_space => self.finish(p, &theta),
                    _ => self.finish(self.ritz_pairs(count, &ys, &mys), &theta),
                });
            }

            // restart with the kept Ritz vectors and the Lanczos residual direction,
            // orthogonal to the whole old basis so that T maps the kept span into span + cont
            let mut cont = basis.tv[mcur - 1].clone();
            let cont_m = self.orthonormalize(&mut cont, &basis);
            let mut next = Basis { v: ys, mv: mys, tv: tys };
            if let Some(mw) = cont_m.and_then(|_| self.orthonormalize(&mut cont, &next)) {
                next.v.push(cont);
                next.mv.push(mw);
            } else {
                let r = self.random_vector(n);
                if !self.push(r, &mut next) {
                    let pairs = self.ritz_pairs(count, &next.v, &next.mv);
                    return Ok(self.finish(pairs, &theta));
                }
            }
            basis = next;
        }
        Err(Error::NoConvergence { restarts: self.opts.max_restarts, residual: best_kres })
    }

    fn ritz_pairs(&self, count: usize, ys: &[Vec<f64>], mys: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
        (0..count)
            .map(|i| {
                let (res, _) = k_residual(self.k, &ys[i], &mys[i]);
                (ys[i].clone(), mys[i].clone(), res)
            })
            .collect()
    }

    /// Rayleigh-Ritz on span(T y_i). One inverse step damps the rough components
    /// the Krylov recombinations leave behind, which dominate the K-residual on fine meshes.
    fn polish(&self, tys: &[Vec<f64>]) -> Option<Vec<(Vec<f64>, Vec<f64>, f64)>> {
        let c = tys.len();
        let mut ps = Vec::with_capacity(c);
        let mut mps = Vec::with_capacity(c);
        for t in tys {
            let mut p = t.clone();
            self.project_locked(&mut p);
            let mp = self.m.apply(&p);
            let nrm = dot(&p, &mp).max(0.0).sqrt();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return None;
            }
            ps.push(p.into_iter().map(|v| v / nrm).collect::<Vec<f64>>());
            mps.push(mp.into_iter().map(|v| v / nrm).collect::<Vec<f64>>());
        }
        let kps: Vec<Vec<f64>> = ps.iter().map(|p| self.k.apply(p)).collect();
        let a = DMatrix::from_fn(c, c, |i, j| 0.5 * (dot(&ps[i], &kps[j]) + dot(&ps[j], &kps[i])));
        let b = DMatrix::from_fn(c, c, |i, j| 0.5 * (dot(&ps[i], &mps[j]) + dot(&ps[j], &mps[i])));
        let l = b.cholesky()?.l();
        let linv = l.clone().try_inverse()?;
        let red = &linv * a * linv.transpose();
        let eig = SymmetricEigen::new((&red + red.transpose()) * 0.5);
        let coef = linv.transpose() * &eig.eigenvectors;
        let n = self.k.dim();
        let mut out = Vec::with_capacity(c);
        for col in 0..c {
            let mut y = vec![0.0; n];
            let mut my = vec![0.0; n];
            for j in 0..c {
                let w = coef[(j, col)];
                for i in 0..n {
                    y[i] += w * ps[j][i];
                    my[i] += w * mps[j][i];
                }
            }
            let (res, _) = k_residual(self.k, &y, &my);
            out.push((y, my, res));
        }
        Some(out)
    }

    fn finish(&self, raw: Vec<(Vec<f64>, Vec<f64>, f64)>, theta: &[f64]) -> Vec<EigenPair> {
        let count = raw.len();
        let mut pairs: Vec<EigenPair> = raw
            .into_iter()
            .map(|(mut y, mut my, _)| {
                let nrm = dot(&y, &my).sqrt();
                y.iter_mut().for_each(|v| *v /= nrm);
                my.iter_mut().for_each(|v| *v /= nrm);
                let (imax, _) = y.iter().enumerate().fold((0, 0.0f64), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
                if y[imax] < 0.0 {
                    y.iter_mut().for_each(|v| *v = -*v);
                    my.iter_mut().for_each(|v| *v = -*v);
                }
                let (residual, value) = k_residual(self.k, &y, &my);
                let max = y.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let min = y.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                EigenPair { value, vector: y, residual, gap_to_next: None, degenerate: false, constant_sign: min >= -1e-8 * max }
            })
            .collect();
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
        // the next value is the neighbouring pair, or the first unconverged Ritz value
        let beyond = theta.get(count).filter(|t| **t > 0.0).map(|t| 1.0 / t);
        for i in 0..count {
            let next = if i + 1 < count { Some(pairs[i + 1].value) } else { beyond };
            let gap = next.map(|l| l - pairs[i].value);
            pairs[i].gap_to_next = gap;
            pairs[i].degenerate = gap.is_some_and(|g| g.abs() < DEGENERACY_TOL * pairs[i].value.abs());
        }
        pairs
    }
}

/// (||K y - rq M y|| / ||M y||, rq) for an M-normalized y.
fn k_residual(k: &SparseSymmetricForm, y: &[f64], my: &[f64]) -> (f64, f64) {
    let ky = k.apply(y);
    let ymy = dot(y, my);
    let rq = dot(y, &ky) / ymy;
    let r: f64 = ky.iter().zip(my).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
    let d: f64 = my.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r / d, rq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{assemble_cross_section, assemble_cylinder, assemble_dirichlet_cylinder};
    use crate::coeff::CoefficientField;
    use crate::grid::{CrossSection, DomainKind, Resolution, TensorMesh};
    use crate::sparse::FormKind;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn omega() -> CrossSection {
        CrossSection::interval(-1.0, 1.0)
    }

    fn cross_pencil(res: f64) -> crate::assemble::Pencil {
        let m = TensorMesh::build(DomainKind::CrossSection, 0.0, &omega(), Resolution { axial: 1.0, cross: res }, 1).unwrap();
        assemble_cross_section(&m, &CoefficientField::identity(2, 1).unwrap(), false).unwrap()
    }

    #[test]
    fn interval_spectrum() {
        // 64 cells: the linear-element error is mu^2 h^2 / 12 to leading order, about 5e-4
        let pen = cross_pencil(32.0);
        let pairs = smallest_eigenpairs(&pen.stiffness, &pen.mass, 2, 1e-10).unwrap();
        let mu = FRAC_PI_2.powi(2);
        let lead = mu * mu / (12.0 * 32.0 * 32.0);
        assert!(((pairs[0].value - mu) / lead - 1.0).abs() < 0.02);
        assert!((pairs[1].value - PI * PI).abs() < 1e-2);
        assert!(pairs[0].constant_sign);
        for p in &pairs {
            assert!(p.residual <= 1e-10);
            assert!((pen.mass.quad(&p.vector) - 1.0).abs() < 1e-12);
            assert!((rayleigh_quotient(&pen.stiffness, &pen.mass, &p.vector) - p.value).abs() < 1e-9 * p.value);
        }
        assert!(pen.mass.bilinear(&pairs[0].vector, &pairs[1].vector).abs() < 1e-9);
    }

    #[test]
    fn identity_pencil() {
        let pen = cross_pencil(8.0);
        let pairs = smallest_eigenpairs(&pen.mass, &pen.mass, 3, 1e-10).unwrap();
        for p in &pairs {
            assert!((p.value - 1.0).abs() < 1e-12);
        }
        let second = second_eigenpair_constrained(&pen.mass, &pen.mass, &pairs[0], 1e-10).unwrap();
        assert!((second.value - 1.0).abs() < 1e-12);
        assert!(pen.mass.bilinear(&second.vector, &pairs[0].vector).abs() < 1e-10);
    }

    #[test]
    fn separable_cylinder_second_eigenvalue() {
        let r = Resolution { axial: 16.0, cross: 16.0 };
        let mesh = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 1).unwrap();
        let pen = assemble_cylinder(&mesh, &CoefficientField::identity(2, 1).unwrap()).unwrap();
        let pairs = smallest_eigenpairs(&pen.stiffness, &pen.mass, 3, 1e-10).unwrap();
        let mu1 = FRAC_PI_2.powi(2);
        // first Neumann mode in x1 on (-1, 1) adds (pi/2)^2, tying with mu2 = pi^2 only if smaller
        let expect2 = (mu1 + FRAC_PI_2.powi(2)).min(PI * PI);
        assert!((pairs[0].value - mu1).abs() < 2e-3);
        assert!((pairs[1].value - expect2).abs() < 1e-2);
        let second = second_eigenpair_constrained(&pen.stiffness, &pen.mass, &pairs[0], 1e-10).unwrap();
        assert!((second.value - pairs[1].value).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_square() {
        let r = Resolution { axial: 32.0, cross: 32.0 };
        let mesh = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 1).unwrap();
        let pen = assemble_dirichlet_cylinder(&mesh, &CoefficientField::identity(2, 1).unwrap()).unwrap();
        let p = smallest_eigenpairs(&pen.stiffness, &pen.mass, 1, 1e-10).unwrap();
        assert!((p[0].value - PI * PI / 2.0).abs() < 5e-3);
    }

    #[test]
    fn pencil_scaling() {
        let pen = cross_pencil(16.0);
        let base = smallest_eigenpairs(&pen.stiffness, &pen.mass, 2, 1e-10).unwrap();
        let both = smallest_eigenpairs(&pen.stiffness.scaled(3.0), &pen.mass.scaled(3.0), 2, 1e-10).unwrap();
        let konly = smallest_eigenpairs(&pen.stiffness.scaled(3.0), &pen.mass, 2, 1e-10).unwrap();
        for i in 0..2 {
            assert!((base[i].value - both[i].value).abs() < 1e-10 * base[i].value);
            assert!((3.0 * base[i].value - konly[i].value).abs() < 1e-10 * konly[i].value);
        }
    }

    #[test]
    fn argument_checks() {
        let pen = cross_pencil(8.0);
        assert!(smallest_eigenpairs(&pen.stiffness, &pen.mass, 7, 1e-9).is_err());
        assert!(smallest_eigenpairs(&pen.stiffness, &pen.mass, 1, 1e-13).is_err());
        let bad = SparseSymmetricForm::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)], FormKind::Stiffness).unwrap();
        let id = SparseSymmetricForm::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0)], FormKind::Mass).unwrap();
        assert!(matches!(smallest_eigenpairs(&bad, &id, 1, 1e-9), Err(Error::FactorizationFailed { .. })));
    }

    #[test]
    fn deterministic() {
        let pen = cross_pencil(16.0);
        let a = smallest_eigenpairs(&pen.stiffness, &pen.mass, 2, 1e-10).unwrap();
        let b = smallest_eigenpairs(&pen.stiffness, &pen.mass, 2, 1e-10).unwrap();
        assert_eq!(a, b);
    }
}
