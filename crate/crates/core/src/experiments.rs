//! Experiments: each one runs a family of solves and checks one asymptotic
//! statement against discretization-aware tolerances.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{
    bulk_profile_fit, choose_glued, choose_z_alpha, concentration_split, decay_profile, end_profile_distance, picone_gap,
    random_smooth_vector, rayleigh_of_vector, rayleigh_on_pencil, symmetry_defect, CrossProfile, TestFunction, TestKind, TestParams,
    ALPHA_CUT,
};
use crate::assemble::{assemble_with_policy, Pencil};
use crate::coeff::CoefficientField;
use crate::eig::{smallest_eigenpairs_with, EigenPair, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{BoundaryPolicy, CrossSection, DomainKind, Resolution, Side, TensorMesh};

/// Mesh resolution used for every solve of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshPolicy {
    /// Cells per unit length across the section.
    pub cross: f64,
    /// Cells per unit length along the cylinder axis, away from the ends.
    pub axial: f64,
    /// Subdivision factor of the axial cells within distance 1 of each end.
    pub grading: usize,
    /// Lower bound on axial cells per unit of half-length, so short cylinders keep square-ish cells.
    pub min_axial_cells: f64,
    /// Resolution of the p = 2 runs, which are three-dimensional.
    pub multi_cross: f64,
    pub multi_axial: f64,
}

impl Default for MeshPolicy {
    fn default() -> Self {
        MeshPolicy { cross: 128.0, axial: 8.0, grading: 2, min_axial_cells: 16.0, multi_cross: 16.0, multi_axial: 2.0 }
    }
}

impl MeshPolicy {
    pub fn resolution(&self, ell: f64) -> Resolution {
        Resolution { axial: self.axial.max(self.min_axial_cells / ell), cross: self.cross }
    }
}

/// Named tolerances; every pass/fail verdict cites one of these by name.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    /// Eigensolver residual tolerance.
    pub solver: f64,
    /// Discretization margin; when absent it is 3x the two-level mesh-error estimate of mu1.
    pub disc: Option<f64>,
    pub strict_margin: f64,
    pub equal: f64,
    pub reflect: f64,
    pub limit: f64,
    pub inf: f64,
    pub second: f64,
    pub conv: f64,
    pub dirichlet_spread: f64,
    pub picone: f64,
    pub r2_min: f64,
    pub grad_track: f64,
    pub bulk_residual: f64,
    pub energy_identity: f64,
    pub mass_identity: f64,
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: 1e-9,
            disc: None,
            strict_margin: 1e-3,
            equal: 1e-8,
            reflect: 1e-8,
            limit: 1e-2,
            inf: 5e-3,
            second: 1e-2,
            conv: 5e-3,
            dirichlet_spread: 0.3,
            picone: 1e-8,
            r2_min: 0.99,
            grad_track: 0.2,
            bulk_residual: 0.05,
            energy_identity: 1e-8,
            mass_identity: 1e-10,
            symmetry: 1e-7,
        }
    }
}

/// One named pass/fail verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

/// An eigenvalue with the residual of the pair it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slot {
    pub value: f64,
    pub residual: f64,
}

impl From<&EigenPair> for Slot {
    fn from(p: &EigenPair) -> Self {
        Slot { value: p.value, residual: p.residual }
    }
}

/// One output row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepRecord {
    pub experiment: String,
    pub field_kind: String,
    pub field: String,
    pub delta: Option<f64>,
    pub p: usize,
    pub ell: Option<f64>,
    pub axial_res: Option<f64>,
    pub cross_res: Option<f64>,
    pub grading: Option<usize>,
    pub lambda1: Option<Slot>,
    pub lambda2: Option<Slot>,
    pub sigma1: Option<Slot>,
    pub lambda_half_plus: Option<Slot>,
    pub lambda_half_minus: Option<Slot>,
    pub mu1: Option<Slot>,
    pub big_lambda1: Option<Slot>,
    pub nu_plus: Option<f64>,
    pub nu_minus: Option<f64>,
    pub alpha_fit: Option<f64>,
    pub d_plus: Option<f64>,
    pub d_minus: Option<f64>,
    pub symmetry_defect: Option<f64>,
    pub end_profile_distance: Option<f64>,
    pub r: Option<f64>,
    pub mass: Option<f64>,
    pub grad_mass: Option<f64>,
    /// Name of the experiment-specific scalar in `value`.
    pub measure: String,
    pub value: Option<f64>,
    pub checks: Vec<Check>,
    pub note: String,
    /// Seconds spent on this row; kept out of the CSV so reruns compare equal.
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn check(&mut self, name: impl Into<String>, pass: bool) {
        self.checks.push(Check { name: name.into(), pass });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn note(&mut self, s: impl AsRef<str>) {
        if !self.note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(s.as_ref());
    }
}

/// Records of one experiment.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub name: String,
    pub records: Vec<SweepRecord>,
    pub wall_time: f64,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.records.iter().all(SweepRecord::passed)
    }

    pub fn failing_rows(&self) -> Vec<(usize, &SweepRecord)> {
        self.records.iter().enumerate().filter(|(_, r)| !r.passed()).collect()
    }

    /// The verdict of the named check on any row, if present.
    pub fn check(&self, name: &str) -> Option<bool> {
        let mut found = None;
        for c in self.records.iter().flat_map(|r| &r.checks).filter(|c| c.name == name) {
            found = Some(found.unwrap_or(true) && c.pass);
        }
        found
    }
}

/// Relative agreement of lambda2 - lambda1 with the first axial Neumann mode when the
/// section does not couple to the axis.
pub const SEPARABLE_GAP: f64 = 0.05;

/// The experiment selectors accepted in configs.
pub const EXPERIMENTS: [&str; 13] = [
    "cross_section",
    "bounds",
    "limit_zero",
    "nu_half",
    "limit_infinity",
    "gap",
    "second",
    "dirichlet",
    "multi",
    "decay",
    "picone",
    "end_profile",
    "test_functions",
];

/// A solved pencil.
#[derive(Debug)]
pub struct Solved {
    pub mesh: TensorMesh,
    pub pencil: Pencil,
    pub pairs: Vec<EigenPair>,
}

impl Solved {
    pub fn first(&self) -> &EigenPair {
        &self.pairs[0]
    }
}

type SolveKey = (String, u64, u8, usize);

/// Shared state of a run: domain, resolution, tolerances and a cache of solves.
pub struct Lab {
    pub omega: CrossSection,
    pub mesh: MeshPolicy,
    pub tol: Tolerances,
    pub seed: u64,
    pub parallelism: usize,
    solves: Mutex<HashMap<SolveKey, Arc<Solved>>>,
    profiles: Mutex<HashMap<(String, u64, bool), Arc<CrossProfile>>>,
    mesh_errors: Mutex<HashMap<(String, u64), f64>>,
}

fn policy_code(p: BoundaryPolicy) -> u8 {
    match p {
        BoundaryPolicy::Mixed => 0,
        BoundaryPolicy::AllDirichlet => 1,
        BoundaryPolicy::Natural => 2,
    }
}

impl Lab {
    pub fn new(omega: CrossSection, mesh: MeshPolicy, tol: Tolerances, seed: u64, parallelism: usize) -> Self {
        Lab {
            omega,
            mesh,
            tol,
            seed,
            parallelism: parallelism.max(1),
            solves: Mutex::new(HashMap::new()),
            profiles: Mutex::new(HashMap::new()),
            mesh_errors: Mutex::new(HashMap::new()),
        }
    }

    /// The unit-interval cross-section (-1, 1) at default resolution and tolerances.
    pub fn reference() -> Self {
        Lab::new(CrossSection::interval(-1.0, 1.0), MeshPolicy::default(), Tolerances::default(), 0, 1)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions::with_tol(self.tol.solver)
    }

    pub fn mesh_for(&self, kind: DomainKind, ell: f64) -> Result<TensorMesh> {
        match kind {
            DomainKind::MultiDirection => {
                let res = Resolution { axial: self.mesh.multi_axial, cross: self.mesh.multi_cross };
                TensorMesh::build(kind, ell, &self.omega, res, self.mesh.grading)
            }
            DomainKind::CrossSection => TensorMesh::build(kind, 0.0, &self.omega, self.mesh.resolution(1.0), 1),
            _ => TensorMesh::build(kind, ell, &self.omega, self.mesh.resolution(ell), self.mesh.grading),
        }
    }

    /// Cross-section mesh matching `kind`'s cylinder meshes.
    pub fn cross_mesh(&self, multi: bool) -> Result<TensorMesh> {
        let res = if multi { Resolution { axial: 1.0, cross: self.mesh.multi_cross } } else { self.mesh.resolution(1.0) };
        TensorMesh::build(DomainKind::CrossSection, 0.0, &self.omega, res, 1)
    }

    /// Smallest `count` eigenpairs of the pencil of `field` on `mesh`, cached per run.
    pub fn solve_on(&self, field: &CoefficientField, mesh: &TensorMesh, policy: BoundaryPolicy, count: usize) -> Result<Arc<Solved>> {
        let label = field.label();
        {
            let cache = self.solves.lock().expect("solve cache");
            for c in count..=count.max(2) {
                if let Some(s) = cache.get(&(label.clone(), mesh.id(), policy_code(policy), c)) {
                    return Ok(Arc::clone(s));
                }
            }
        }
        let pencil = assemble_with_policy(mesh, field, policy)?;
        let pairs = smallest_eigenpairs_with(&pencil.stiffness, &pencil.mass, count, &self.solver_options())?;
        let solved = Arc::new(Solved { mesh: mesh.clone(), pencil, pairs });
        self.solves.lock().expect("solve cache").insert((label, mesh.id(), policy_code(policy), count), Arc::clone(&solved));
        Ok(solved)
    }

    pub fn solve(&self, field: &CoefficientField, kind: DomainKind, ell: f64, count: usize) -> Result<Arc<Solved>> {
        let mesh = self.mesh_for(kind, ell)?;
        self.solve_on(field, &mesh, BoundaryPolicy::Mixed, count)
    }

    /// Cylinder with Dirichlet data on the ends as well.
    pub fn solve_dirichlet(&self, field: &CoefficientField, ell: f64) -> Result<Arc<Solved>> {
        let mesh = self.mesh_for(DomainKind::FullCylinder, ell)?;
        self.solve_on(field, &mesh, BoundaryPolicy::AllDirichlet, 1)
    }

    /// First cross-section pair, A22 (`reduced = false`) or Schur-reduced.
    pub fn profile(&self, field: &CoefficientField, reduced: bool) -> Result<Arc<CrossProfile>> {
        let mesh = self.cross_mesh(field.p() > 1)?;
        self.profile_on(field, &mesh, reduced)
    }

    pub fn profile_on(&self, field: &CoefficientField, mesh: &TensorMesh, reduced: bool) -> Result<Arc<CrossProfile>> {
        let key = (field.label(), mesh.id(), reduced);
        if let Some(p) = self.profiles.lock().expect("profile cache").get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(CrossProfile::solve(field, mesh, reduced, self.tol.solver)?);
        self.profiles.lock().expect("profile cache").insert(key, Arc::clone(&p));
        Ok(p)
    }

    /// |mu1(h) - mu1(h/2)| on the cross-section, the mesh-error estimate of a run.
    pub fn mesh_error(&self, field: &CoefficientField) -> Result<f64> {
        let coarse = self.cross_mesh(field.p() > 1)?;
        let key = (field.label(), coarse.id());
        if let Some(e) = self.mesh_errors.lock().expect("mesh error cache").get(&key) {
            return Ok(*e);
        }
        let res = coarse.resolution();
        let fine = TensorMesh::build(DomainKind::CrossSection, 0.0, &self.omega, Resolution { axial: 1.0, cross: 2.0 * res.cross }, 1)?;
        let a = self.profile_on(field, &coarse, false)?.eigenvalue();
        let b = CrossProfile::solve(field, &fine, false, self.tol.solver)?.eigenvalue();
        let e = (a - b).abs();
        self.mesh_errors.lock().expect("mesh error cache").insert(key, e);
        Ok(e)
    }

    /// Configured discretization margin, or 3x the mesh-error estimate.
    pub fn tol_disc(&self, field: &CoefficientField) -> Result<f64> {
        match self.tol.disc {
            Some(t) => Ok(t),
            None => Ok(3.0 * self.mesh_error(field)?),
        }
    }

    /// Property (S): symmetric section and an even field, checked on the cross nodes.
    pub fn has_property_s(&self, field: &CoefficientField) -> Result<bool> {
        let mesh = self.cross_mesh(field.p() > 1)?;
        let samples: Vec<Vec<f64>> = (0..mesh.n_nodes()).map(|i| mesh.node_coords(i)[..mesh.dim()].to_vec()).collect();
        Ok(self.omega.is_symmetric() && field.is_even(&samples))
    }

    fn map<T: Send, F: Fn(f64) -> T + Sync>(&self, xs: &[f64], f: F) -> Vec<T> {
        if self.parallelism <= 1 {
            return xs.iter().map(|&x| f(x)).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.parallelism).build() {
            Ok(pool) => pool.install(|| xs.par_iter().map(|&x| f(x)).collect()),
            Err(_) => xs.iter().map(|&x| f(x)).collect(),
        }
    }

    fn record(&self, experiment: &str, field: &CoefficientField, ell: Option<f64>, mesh: Option<&TensorMesh>) -> SweepRecord {
        let res = mesh.map(|m| m.resolution());
        SweepRecord {
            experiment: experiment.to_string(),
            field_kind: field.kind().tag().to_string(),
            field: field.label(),
            delta: field.delta(),
            p: field.p(),
            ell,
            axial_res: res.filter(|_| mesh.map_or(false, |m| m.kind() != DomainKind::CrossSection)).map(|r| r.axial),
            cross_res: res.map(|r| r.cross),
            grading: mesh.map(|m| m.grading()),
            ..SweepRecord::default()
        }
    }

    fn error_record(&self, experiment: &str, field: &CoefficientField, ell: Option<f64>, e: &Error) -> SweepRecord {
        let mut rec = self.record(experiment, field, ell, None);
        rec.check("solved", false);
        rec.note(format!("error: {e}"));
        rec
    }

    /// Cross-section references mu1 and Lambda1 on a record.
    fn references(&self, rec: &mut SweepRecord, field: &CoefficientField) -> Result<(f64, f64)> {
        let mu = self.profile(field, false)?;
        let big = self.profile(field, true)?;
        rec.mu1 = Some(Slot::from(&mu.pair));
        rec.big_lambda1 = Some(Slot::from(&big.pair));
        Ok((mu.eigenvalue(), big.eigenvalue()))
    }

    /// Concentration identities, the symmetry defect under (S), and the universal sandwich.
    fn full_diagnostics(&self, rec: &mut SweepRecord, field: &CoefficientField, s: &Solved) -> Result<()> {
        let u = s.first();
        rec.lambda1 = Some(Slot::from(u));
        let c = concentration_split(u, field, &s.mesh, &s.pencil)?;
        rec.d_plus = Some(c.d_plus);
        rec.d_minus = Some(c.d_minus);
        rec.check("energy-identity(tol_energy_identity)", c.energy_defect <= self.tol.energy_identity);
        rec.check("mass-identity(tol_mass_identity)", c.mass_defect <= self.tol.mass_identity);
        if self.has_property_s(field)? {
            let d = symmetry_defect(&u.vector, &s.mesh, &s.pencil)?;
            rec.symmetry_defect = Some(d);
            rec.check("symmetry(tol_symmetry)", d <= self.tol.symmetry);
        }
        let (mu, big) = self.references(rec, field)?;
        let t = self.tol_disc(field)?;
        rec.check("sandwich(tol_disc)", big - t <= u.value && u.value <= mu + t);
        Ok(())
    }

    fn timed(&self, name: &str, f: impl FnOnce() -> Vec<SweepRecord>) -> ExperimentOutput {
        let t = Instant::now();
        let records = f();
        ExperimentOutput { name: name.to_string(), records, wall_time: t.elapsed().as_secs_f64() }
    }

    // ------------------------------------------------------------ experiments

    /// Cross-section eigenvalue under refinement, with observed convergence orders.
    pub fn exp_cross_section(&self, field: &CoefficientField, cells_per_unit: &[f64]) -> ExperimentOutput {
        self.timed("cross_section", || {
            let mut recs = Vec::new();
            let mut values = Vec::new();
            for &c in cells_per_unit {
                let t = Instant::now();
                let res = Resolution { axial: 1.0, cross: c };
                let solved = TensorMesh::build(DomainKind::CrossSection, 0.0, &self.omega, res, 1)
                    .and_then(|m| CrossProfile::solve(field, &m, false, self.tol.solver).map(|p| (m, p)));
                match solved {
                    Ok((m, p)) => {
                        let mut rec = self.record("cross_section", field, None, Some(&m));
                        rec.mu1 = Some(Slot::from(&p.pair));
                        values.push(p.eigenvalue());
                        rec.wall_time = t.elapsed().as_secs_f64();
                        recs.push(rec);
                    }
                    Err(e) => recs.push(self.error_record("cross_section", field, None, &e)),
                }
            }
            // order from successive differences: e_k = |mu_k - mu_{k+1}|
            for k in 2..values.len() {
                let e0 = (values[k - 2] - values[k - 1]).abs();
                let e1 = (values[k - 1] - values[k]).abs();
                let ratio = cells_per_unit[k - 1] / cells_per_unit[k - 2];
                if let Some(rec) = recs.get_mut(k) {
                    rec.measure = "observed-order".into();
                    rec.value = Some((e0 / e1).ln() / ratio.ln());
                }
            }
            recs
        })
    }

    /// Lambda1 - tol <= lambda1 <= mu1 + tol along `ells`; strict placement for the model field.
    pub fn exp_bounds(&self, field: &CoefficientField, ells: &[f64]) -> ExperimentOutput {
        self.timed("bounds", || {
            self.map(ells, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let mut rec = self.record("bounds", field, Some(ell), Some(&s.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    let (mu, _) = self.references(&mut rec, field)?;
                    let lam = s.first().value;
                    let audit = &self.profile(field, false)?.audit;
                    if let Some(delta) = field.delta() {
                        if delta != 0.0 {
                            let m = self.tol.strict_margin;
                            rec.check("strict(strict_margin)", (1.0 - delta * delta) * mu + m < lam && lam < mu - m);
                        }
                    }
                    if !audit.holds {
                        rec.check("equal-mu1(tol_equal)", (lam - mu).abs() <= self.tol.equal);
                    }
                    rec.measure = "mu1-minus-lambda1".into();
                    rec.value = Some(mu - lam);
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("bounds", field, Some(ell), &e))
            })
        })
    }

    /// Extrapolates lambda1 to l = 0 and compares with Lambda1.
    pub fn exp_limit_zero(&self, field: &CoefficientField, ells: &[f64]) -> ExperimentOutput {
        self.timed("limit_zero", || {
            let mut recs: Vec<SweepRecord> = self.map(ells, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let mut rec = self.record("limit_zero", field, Some(ell), Some(&s.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("limit_zero", field, Some(ell), &e))
            });
            let pts: Vec<(f64, f64)> = recs.iter().filter_map(|r| Some((r.ell?, r.lambda1?.value))).collect();
            if let (Some(last), true) = (recs.last_mut(), pts.len() >= 2) {
                let ext = extrapolate_to_zero(&pts);
                last.measure = "extrapolated-lambda1".into();
                last.value = Some(ext);
                if let Some(big) = last.big_lambda1 {
                    last.check("limit(tol_limit)", (ext - big.value).abs() <= self.tol.limit);
                }
            }
            recs
        })
    }

    /// Half-cylinder truncations on both sides with monotonicity and the reflection identity.
    pub fn exp_nu_half(&self, field: &CoefficientField, half_lengths: &[f64]) -> ExperimentOutput {
        self.timed("nu_half", || {
            let reflected = field.reflected();
            let mut recs: Vec<SweepRecord> = self.map(half_lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let plus = self.solve(field, DomainKind::HalfPlus, ell, 1)?;
                    let minus = self.solve(field, DomainKind::HalfMinus, ell, 1)?;
                    let refl = self.solve(&reflected, DomainKind::HalfPlus, ell, 1)?;
                    let mut rec = self.record("nu_half", field, Some(ell), Some(&plus.mesh));
                    let (mu, _) = self.references(&mut rec, field)?;
                    rec.lambda_half_plus = Some(Slot::from(plus.first()));
                    rec.lambda_half_minus = Some(Slot::from(minus.first()));
                    let d = (minus.first().value - refl.first().value).abs();
                    rec.check("reflection(tol_reflect)", d <= self.tol.reflect);
                    rec.measure = "mu1-minus-half-plus".into();
                    rec.value = Some(mu - plus.first().value);
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("nu_half", field, Some(ell), &e))
            });
            let tol = self.tol.solver;
            let Ok((mu, margin)) = self.profile(field, false).and_then(|p| Ok((p.eigenvalue(), self.tol_disc(field)?))) else { return recs };
            for side in [Side::Plus, Side::Minus] {
                let seq: Vec<f64> = recs
                    .iter()
                    .filter_map(|r| match side {
                        Side::Plus => r.lambda_half_plus,
                        Side::Minus => r.lambda_half_minus,
                    })
                    .map(|s| s.value)
                    .collect();
                let tag = if side == Side::Plus { "plus" } else { "minus" };
                let Some(last) = recs.last_mut() else { break };
                if seq.len() != half_lengths.len() {
                    continue;
                }
                last.check(format!("nonincreasing-{tag}(tol_solver)"), seq.windows(2).all(|w| w[1] <= w[0] + tol * w[0].abs()));
                let raw = *seq.last().expect("nonempty");
                let nu = if raw >= mu - margin && seq.len() >= 2 {
                    // no trapped mode: the truncation error is algebraic in 1/L
                    let nu = algebraic_limit(half_lengths, &seq);
                    last.note(format!("nu-{tag} extrapolated in 1/L^2 = {nu:.12e}"));
                    last.check(format!("above-mu1-{tag}(tol_disc)"), seq.iter().all(|&v| v >= mu - margin));
                    nu
                } else {
                    let change = if seq.len() >= 2 { seq[seq.len() - 2] - raw } else { f64::INFINITY };
                    last.note(format!("nu-{tag} in [{:.12e}, {:.12e}]", raw - change.max(0.0), raw));
                    last.check(format!("converged-{tag}(tol_conv)"), change.abs() < self.tol.conv);
                    raw
                };
                match side {
                    Side::Plus => last.nu_plus = Some(nu),
                    Side::Minus => last.nu_minus = Some(nu),
                }
            }
            recs
        })
    }

    /// lambda1 against the half-cylinder truncations, and lambda_{L/2} <= half-plus value at L.
    pub fn exp_limit_infinity(&self, field: &CoefficientField, lengths: &[f64]) -> ExperimentOutput {
        self.timed("limit_infinity", || {
            let mut recs: Vec<SweepRecord> = self.map(lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let plus = self.solve(field, DomainKind::HalfPlus, ell, 1)?;
                    let minus = self.solve(field, DomainKind::HalfMinus, ell, 1)?;
                    let half = self.solve(field, DomainKind::FullCylinder, 0.5 * ell, 1)?;
                    let mut rec = self.record("limit_infinity", field, Some(ell), Some(&s.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    rec.lambda_half_plus = Some(Slot::from(plus.first()));
                    rec.lambda_half_minus = Some(Slot::from(minus.first()));
                    let nu = plus.first().value.min(minus.first().value);
                    rec.measure = "lambda1-minus-min-half".into();
                    rec.value = Some(s.first().value - nu);
                    let lh = half.first().value;
                    rec.check("half-length-sandwich(tol_solver)", lh <= plus.first().value * (1.0 + self.tol.solver));
                    rec.note(format!("lambda1(L/2) = {lh:.12e}"));
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("limit_infinity", field, Some(ell), &e))
            });
            let diffs: Vec<f64> = recs.iter().filter_map(|r| r.value).map(f64::abs).collect();
            let plus: Vec<f64> = recs.iter().filter_map(|r| Some(r.lambda_half_plus?.value)).collect();
            let minus: Vec<f64> = recs.iter().filter_map(|r| Some(r.lambda_half_minus?.value)).collect();
            let complete = diffs.len() == lengths.len() && plus.len() == lengths.len() && minus.len() == lengths.len();
            let refs = self.profile(field, false).and_then(|p| Ok((p.eigenvalue(), self.tol_disc(field)?)));
            if let (Some(last), true, Ok((mu, margin))) = (recs.last_mut(), complete && !diffs.is_empty(), refs) {
                let floor = 10.0 * self.tol.solver;
                last.check("distance-decreasing", diffs.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor));
                // A side without a trapped mode approaches mu1 only like 1/L^2; its limit is
                // estimated by extrapolation rather than by the last truncation.
                let estimate = |seq: &[f64]| {
                    let raw = *seq.last().expect("nonempty");
                    if raw >= mu - margin && seq.len() >= 2 {
                        (algebraic_limit(lengths, seq), true)
                    } else {
                        (raw, false)
                    }
                };
                let (nu_p, ext_p) = estimate(&plus);
                let (nu_m, ext_m) = estimate(&minus);
                last.nu_plus = Some(nu_p);
                last.nu_minus = Some(nu_m);
                if ext_p || ext_m {
                    last.note(format!("extrapolated in 1/L^2: nu-plus = {nu_p:.12e}, nu-minus = {nu_m:.12e}"));
                }
                let l1 = last.lambda1.map(|s| s.value).unwrap_or(f64::NAN);
                last.check("final-distance(tol_inf)", (l1 - nu_p.min(nu_m)).abs() < self.tol.inf);
            }
            recs
        })
    }

    /// mu1 - lambda1 above the discretization margin when A12 . grad W1 does not vanish.
    pub fn exp_gap(&self, field: &CoefficientField, lengths: &[f64]) -> ExperimentOutput {
        self.timed("gap", || {
            let profile = match self.profile(field, false) {
                Ok(p) => p,
                Err(e) => return vec![self.error_record("gap", field, None, &e)],
            };
            if !profile.audit.holds {
                let mut rec = self.record("gap", field, None, Some(&profile.mesh));
                rec.mu1 = Some(Slot::from(&profile.pair));
                rec.measure = "con-norm".into();
                rec.value = Some(profile.audit.norm);
                rec.check("condition-con", false);
                rec.note(format!("ConditionConFails: {}", Error::ConditionConFails { norm: profile.audit.norm }));
                return vec![rec];
            }
            self.map(lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let mut rec = self.record("gap", field, Some(ell), Some(&s.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    let gap = profile.eigenvalue() - s.first().value;
                    rec.measure = "gap".into();
                    rec.value = Some(gap);
                    rec.check("gap(tol_disc)", gap > self.tol_disc(field)?);
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("gap", field, Some(ell), &e))
            })
        })
    }

    /// lambda2 - lambda1 closing with L, and lambda1 < lambda2 <= half-plus value, under (S).
    pub fn exp_second(&self, field: &CoefficientField, lengths: &[f64]) -> ExperimentOutput {
        self.timed("second", || {
            match self.has_property_s(field) {
                Ok(true) => {}
                Ok(false) => {
                    let mut rec = self.record("second", field, None, None);
                    rec.check("property-S", false);
                    rec.note(Error::NoReflectionSymmetry("field is not even or the section is not symmetric".into()).to_string());
                    return vec![rec];
                }
                Err(e) => return vec![self.error_record("second", field, None, &e)],
            }
            let mut recs: Vec<SweepRecord> = self.map(lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 2)?;
                    let plus = self.solve(field, DomainKind::HalfPlus, ell, 1)?;
                    let mut rec = self.record("second", field, Some(ell), Some(&s.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    let (l1, l2) = (s.pairs[0].value, s.pairs[1].value);
                    let lp = plus.first().value;
                    rec.lambda2 = Some(Slot::from(&s.pairs[1]));
                    rec.lambda_half_plus = Some(Slot::from(plus.first()));
                    rec.check("ordering", l1 < l2 || s.pairs[0].degenerate);
                    rec.check("second-sandwich(tol_solver)", l2 <= lp * (1.0 + self.tol.solver));
                    if s.pairs[0].degenerate {
                        rec.note("degenerate pair");
                    }
                    rec.measure = "lambda2-minus-lambda1".into();
                    rec.value = Some(l2 - l1);
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("second", field, Some(ell), &e))
            });
            let gaps: Vec<f64> = recs.iter().filter_map(|r| r.value).collect();
            let profile = self.profile(field, false);
            if let (Some(last), true, Ok(profile)) = (recs.last_mut(), gaps.len() == lengths.len() && !gaps.is_empty(), profile) {
                if profile.audit.holds {
                    last.check("halving", gaps.windows(2).all(|w| w[1] <= 0.5 * w[0]));
                    last.check("final-gap(tol_2nd)", *gaps.last().expect("nonempty") < self.tol.second);
                } else {
                    // Separable case: the second mode is the first axial Neumann mode.
                    let ok = lengths.iter().zip(&gaps).all(|(l, g)| {
                        let k = profile.a11_weight * (std::f64::consts::PI / (2.0 * l)).powi(2);
                        (g - k).abs() <= SEPARABLE_GAP * k
                    });
                    last.check("separable-gap", ok);
                }
            }
            recs
        })
    }

    /// sigma1 >= mu1 - tol and (sigma1 - mu1) L^2 roughly constant.
    pub fn exp_dirichlet(&self, field: &CoefficientField, lengths: &[f64]) -> ExperimentOutput {
        self.timed("dirichlet", || {
            let mut recs: Vec<SweepRecord> = self.map(lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let d = self.solve_dirichlet(field, ell)?;
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let mut rec = self.record("dirichlet", field, Some(ell), Some(&d.mesh));
                    self.full_diagnostics(&mut rec, field, &s)?;
                    let (mu, _) = self.references(&mut rec, field)?;
                    let sigma = d.first().value;
                    rec.sigma1 = Some(Slot::from(d.first()));
                    rec.check("sigma-above-mu1(tol_disc)", sigma >= mu - self.tol_disc(field)?);
                    rec.check("mixed-below-dirichlet(tol_solver)", s.first().value <= sigma * (1.0 + self.tol.solver));
                    rec.measure = "C".into();
                    rec.value = Some((sigma - mu) * ell * ell);
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("dirichlet", field, Some(ell), &e))
            });
            let cs: Vec<f64> = recs.iter().filter_map(|r| r.value).collect();
            if let (Some(last), true) = (recs.last_mut(), cs.len() == lengths.len() && !cs.is_empty()) {
                last.check("C-consistent(tol_dirichlet_spread)", relative_spread(&cs) <= self.tol.dirichlet_spread);
            }
            recs
        })
    }

    /// Two cylinder axes: gap or equality, and the bound by the row-restricted two-dimensional problem.
    pub fn exp_multi(&self, field: &CoefficientField, lengths: &[f64]) -> ExperimentOutput {
        self.timed("multi", || {
            if field.p() != 2 {
                let e = Error::DimensionMismatch("multi-direction experiment needs p = 2".into());
                return vec![self.error_record("multi", field, None, &e)];
            }
            self.map(lengths, |ell| {
                let t = Instant::now();
                let run = || -> Result<SweepRecord> {
                    let s = self.solve(field, DomainKind::MultiDirection, ell, 1)?;
                    let mut rec = self.record("multi", field, Some(ell), Some(&s.mesh));
                    let profile = self.profile(field, false)?;
                    let mu = profile.eigenvalue();
                    let lam = s.first().value;
                    rec.lambda1 = Some(Slot::from(s.first()));
                    rec.mu1 = Some(Slot::from(&profile.pair));
                    let margin = self.tol_disc(field)?;
                    if profile.audit.holds {
                        rec.check("gap(tol_disc)", lam < mu - margin);
                    } else {
                        rec.check("equal-mu1(tol_equal)", (lam - mu).abs() <= self.tol.equal);
                    }
                    let b1 = field.row_restriction(0)?.into_field()?;
                    let mesh2 = TensorMesh::build(DomainKind::FullCylinder, ell, &self.omega, s.mesh.resolution(), self.mesh.grading)?;
                    if mesh2.axis(0) != s.mesh.axis(0) || !mesh2.same_cross_section(&s.mesh) {
                        return Err(Error::MeshMismatch("row-restricted mesh does not match".into()));
                    }
                    let r2 = self.solve_on(&b1, &mesh2, BoundaryPolicy::Mixed, 1)?;
                    rec.measure = "row-restricted-lambda1".into();
                    rec.value = Some(r2.first().value);
                    rec.check("row-restriction-bound(tol_solver)", lam <= r2.first().value * (1.0 + self.tol.solver));
                    rec.wall_time = t.elapsed().as_secs_f64();
                    Ok(rec)
                };
                run().unwrap_or_else(|e| self.error_record("multi", field, Some(ell), &e))
            })
        })
    }

    /// Masses of |x1| <= r and their exponential fit.
    pub fn exp_decay(&self, field: &CoefficientField, ell: f64) -> ExperimentOutput {
        self.timed("decay", || {
            let t = Instant::now();
            let run = || -> Result<Vec<SweepRecord>> {
                let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                let d = decay_profile(s.first(), &s.mesh, &s.pencil)?;
                let holds = self.profile(field, false)?.audit.holds;
                let mut recs = Vec::new();
                for (k, (&(r, m), &(_, g))) in d.masses.iter().zip(&d.grad_masses).enumerate() {
                    let mut rec = self.record("decay", field, Some(ell), Some(&s.mesh));
                    rec.r = Some(r);
                    rec.mass = Some(m);
                    rec.grad_mass = Some(g);
                    rec.alpha_fit = Some(d.alpha_fit);
                    if k >= d.window.0 && k < d.window.1 {
                        rec.note("fit window");
                    }
                    recs.push(rec);
                }
                let mut rec = self.record("decay", field, Some(ell), Some(&s.mesh));
                self.full_diagnostics(&mut rec, field, &s)?;
                rec.alpha_fit = Some(d.alpha_fit);
                rec.measure = "r-squared".into();
                rec.value = Some(d.r_squared);
                rec.note(format!(
                    "alpha-grad = {:.6e}; alpha-bound = {:.6e}; alpha 95% CI = [{:.6e}, {:.6e}]; window r = {}..{}",
                    d.alpha_grad,
                    d.alpha_bound,
                    d.slope_ci.0,
                    d.slope_ci.1,
                    d.window.0 + 1,
                    d.window.1
                ));
                if holds {
                    rec.check("fitted-bound", d.bound_holds);
                    rec.check("linear-log-mass(r2_min)", d.r_squared > self.tol.r2_min);
                    rec.check("alpha-below-one", d.alpha_fit < 1.0 && !d.no_decay);
                    let track = (d.alpha_grad.ln() - d.alpha_fit.ln()).abs() <= self.tol.grad_track * d.alpha_fit.ln().abs();
                    rec.check("gradient-tracks(grad_track)", track);
                } else {
                    rec.check("no-decay-flagged", d.no_decay);
                }
                rec.wall_time = t.elapsed().as_secs_f64();
                recs.push(rec);
                Ok(recs)
            };
            run().unwrap_or_else(|e| vec![self.error_record("decay", field, Some(ell), &e)])
        })
    }

    /// Gap u^T K u - mu1 u^T M u over random and cutoff functions on a half-plus cylinder.
    pub fn exp_picone(&self, field: &CoefficientField, half_length: f64, samples: usize, widths: &[f64]) -> ExperimentOutput {
        self.timed("picone", || {
            let t = Instant::now();
            let run = || -> Result<Vec<SweepRecord>> {
                let mesh = self.mesh_for(DomainKind::HalfPlus, half_length)?;
                let pencil = assemble_with_policy(&mesh, field, BoundaryPolicy::Mixed)?;
                let profile = self.profile(field, false)?;
                let mu = profile.eigenvalue();
                let nonpositive = profile.audit.nonpositive;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut recs = Vec::new();
                let mut min_gap = f64::INFINITY;
                for i in 0..samples {
                    let u = random_smooth_vector(&mesh, &pencil, 6, &mut rng);
                    let norm = pencil.mass.quad(&u);
                    let g = picone_gap(&u, &mesh, &pencil, &profile, mu)? / norm;
                    min_gap = min_gap.min(g);
                    let mut rec = self.record("picone", field, Some(half_length), Some(&mesh));
                    rec.mu1 = Some(Slot::from(&profile.pair));
                    rec.measure = format!("random-{i}");
                    rec.value = Some(g);
                    if nonpositive {
                        rec.check("nonnegative(tol_picone)", g >= -self.tol.picone);
                    }
                    recs.push(rec);
                }
                let mut cut = Vec::new();
                for &w in widths {
                    if w > half_length {
                        return Err(Error::InvalidArgument(format!("cutoff width {w} exceeds the half-length {half_length}")));
                    }
                    let nodal: Vec<f64> = (0..mesh.n_nodes())
                        .map(|i| profile.values[mesh.cross_node(i)] * (1.0 - mesh.node_coords(i)[0] / w).max(0.0))
                        .collect();
                    let u = pencil.dofs.restrict(&nodal);
                    let g = picone_gap(&u, &mesh, &pencil, &profile, mu)? / pencil.mass.quad(&u);
                    let mut rec = self.record("picone", field, Some(half_length), Some(&mesh));
                    rec.mu1 = Some(Slot::from(&profile.pair));
                    rec.r = Some(w);
                    rec.measure = "cutoff".into();
                    rec.value = Some(g);
                    cut.push(g);
                    recs.push(rec);
                }
                let mut rec = self.record("picone", field, Some(half_length), Some(&mesh));
                rec.mu1 = Some(Slot::from(&profile.pair));
                rec.measure = "min-random-gap".into();
                rec.value = Some(min_gap);
                if nonpositive {
                    rec.check("cutoff-decreasing-positive", cut.windows(2).all(|w| w[1] < w[0]) && cut.iter().all(|&g| g > 0.0));
                } else {
                    // the coupling lowers the energy somewhere: z-alpha finds a direction below mu1
                    match choose_z_alpha(field, &profile, ALPHA_CUT) {
                        Ok(z) => {
                            let params = TestParams { ell1: z.piece.ell, alpha: z.alpha, ..TestParams::default() };
                            let tf = TestFunction::new(TestKind::ZAlpha, params, &profile, field)?;
                            let q = rayleigh_on_pencil(&tf, &mesh, &pencil)?;
                            rec.note(format!("z-alpha quotient - mu1 = {:.6e} (l1 = {}, alpha = {:.4e})", q.quotient - mu, z.piece.ell, z.alpha));
                            rec.check("negative-direction", q.quotient < mu || min_gap < 0.0);
                        }
                        Err(e) => rec.note(format!("no z-alpha parameters: {e}")),
                    }
                }
                rec.wall_time = t.elapsed().as_secs_f64();
                recs.push(rec);
                Ok(recs)
            };
            run().unwrap_or_else(|e| vec![self.error_record("picone", field, Some(half_length), &e)])
        })
    }

    /// H1 distance between the translated cylinder eigenfunction and the half-cylinder minimizers.
    pub fn exp_end_profile(&self, field: &CoefficientField, ells: &[f64], r: f64, half_length: f64) -> ExperimentOutput {
        self.timed("end_profile", || {
            let halves = (|| -> Result<_> {
                Ok((self.solve(field, DomainKind::HalfPlus, half_length, 1)?, self.solve(field, DomainKind::HalfMinus, half_length, 1)?))
            })();
            let (plus, minus) = match halves {
                Ok(h) => h,
                Err(e) => return vec![self.error_record("end_profile", field, None, &e)],
            };
            let holds = self.profile(field, false).map(|p| p.audit.holds).unwrap_or(false);
            let mut recs = Vec::new();
            for side in [Side::Plus, Side::Minus] {
                let half = if side == Side::Plus { &plus } else { &minus };
                let rows: Vec<SweepRecord> = self.map(ells, |ell| {
                    let t = Instant::now();
                    let run = || -> Result<SweepRecord> {
                        let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                        let mut rec = self.record("end_profile", field, Some(ell), Some(&s.mesh));
                        self.full_diagnostics(&mut rec, field, &s)?;
                        // the free end at -l pairs with the half-plus problem
                        let d_side = if side == Side::Plus { rec.d_minus } else { rec.d_plus }.unwrap_or(0.5);
                        let dist = end_profile_distance(s.first(), &s.mesh, &s.pencil, d_side, half.first(), &half.mesh, &half.pencil, side, r)?;
                        rec.end_profile_distance = Some(dist);
                        rec.r = Some(r);
                        match side {
                            Side::Plus => rec.lambda_half_plus = Some(Slot::from(half.first())),
                            Side::Minus => rec.lambda_half_minus = Some(Slot::from(half.first())),
                        }
                        rec.note(if side == Side::Plus { "plus side" } else { "minus side" });
                        if side == Side::Plus && s.mesh.dim() == 2 {
                            let fit = bulk_profile_fit(s.first(), &s.mesh, &s.pencil, 0.5)?;
                            rec.measure = "bulk-fit-residual".into();
                            rec.value = Some(fit.residual);
                            rec.note(format!("bulk alpha = {:.6e} at x2 = {}", fit.alpha, fit.x2));
                            if holds {
                                rec.check("bulk-fit(tol_bulk_residual)", fit.residual < self.tol.bulk_residual);
                            }
                        } else {
                            rec.measure = "side".into();
                        }
                        rec.wall_time = t.elapsed().as_secs_f64();
                        Ok(rec)
                    };
                    run().unwrap_or_else(|e| self.error_record("end_profile", field, Some(ell), &e))
                });
                let dists: Vec<f64> = rows.iter().filter_map(|r| r.end_profile_distance).collect();
                let n = rows.len();
                recs.extend(rows);
                if let (Some(last), true) = (recs.last_mut(), dists.len() == n && n > 0) {
                    let tag = if side == Side::Plus { "plus" } else { "minus" };
                    last.check(format!("distance-decreasing-{tag}"), dists.windows(2).all(|w| w[1] < w[0]));
                }
            }
            recs
        })
    }

    /// Every test function's quotient against the discrete eigenvalue of the same pencil.
    pub fn exp_test_functions(&self, field: &CoefficientField, ells: &[f64]) -> ExperimentOutput {
        self.timed("test_functions", || {
            let mut recs = Vec::new();
            for &ell in ells {
                let run = || -> Result<Vec<SweepRecord>> {
                    let mut out = Vec::new();
                    let profile = self.profile(field, false)?;
                    let reduced = self.profile(field, true)?;
                    let s = self.solve(field, DomainKind::FullCylinder, ell, 1)?;
                    let lam = s.first().value;
                    let mut params = TestParams::default();
                    let mut kinds = vec![(TestKind::TildeVl, &profile), (TestKind::GeneralVl, &reduced)];
                    if field.delta().is_some() {
                        kinds.push((TestKind::ModelVl, &profile));
                    }
                    let glued = choose_glued(field, &profile, ALPHA_CUT);
                    if let Ok(g) = &glued {
                        params.ell0 = g.piece.ell;
                        params.eta = g.eta;
                        if ell > g.piece.ell + g.eta {
                            kinds.push((TestKind::GluedPhi, &profile));
                        }
                    }
                    for (kind, prof) in kinds {
                        let t = Instant::now();
                        let tf = TestFunction::new(kind, params, prof, field)?;
                        let q = rayleigh_on_pencil(&tf, &s.mesh, &s.pencil)?;
                        let mut rec = self.record("test_functions", field, Some(ell), Some(&s.mesh));
                        rec.lambda1 = Some(Slot::from(s.first()));
                        rec.measure = kind.tag().into();
                        rec.value = Some(q.quotient);
                        rec.check("upper-bound", q.quotient >= lam);
                        if kind == TestKind::GluedPhi {
                            if let Ok(g) = &glued {
                                rec.note(format!("l0 = {}, eta = {}, bound on lambda - mu1 = {:.6e}", g.piece.ell, g.eta, g.rhs));
                            }
                        }
                        rec.wall_time = t.elapsed().as_secs_f64();
                        out.push(rec);
                    }
                    let plus = self.solve(field, DomainKind::HalfPlus, ell, 1)?;
                    let lp = plus.first().value;
                    let mut half_kinds = vec![(TestKind::ExpDecay, params)];
                    if let Ok(z) = choose_z_alpha(field, &profile, ALPHA_CUT) {
                        if ell > z.piece.ell + 1.0 {
                            half_kinds.push((TestKind::ZAlpha, TestParams { ell1: z.piece.ell, alpha: z.alpha, ..params }));
                        }
                    }
                    for (kind, prm) in half_kinds {
                        let tf = TestFunction::new(kind, prm, &profile, field)?;
                        let q = rayleigh_on_pencil(&tf, &plus.mesh, &plus.pencil)?;
                        let mut rec = self.record("test_functions", field, Some(ell), Some(&plus.mesh));
                        rec.lambda_half_plus = Some(Slot::from(plus.first()));
                        rec.measure = kind.tag().into();
                        rec.value = Some(q.quotient);
                        rec.check("upper-bound", q.quotient >= lp);
                        out.push(rec);
                    }
                    // the eigenvector itself attains its eigenvalue
                    let q = rayleigh_of_vector(&s.first().vector, &s.pencil)?;
                    let mut rec = self.record("test_functions", field, Some(ell), Some(&s.mesh));
                    rec.lambda1 = Some(Slot::from(s.first()));
                    rec.measure = "eigenvector".into();
                    rec.value = Some(q.quotient);
                    rec.check("attained(tol_solver)", (q.quotient - lam).abs() <= 10.0 * self.tol.solver * lam);
                    out.push(rec);
                    Ok(out)
                };
                match run() {
                    Ok(r) => recs.extend(r),
                    Err(e) => recs.push(self.error_record("test_functions", field, Some(ell), &e)),
                }
            }
            recs
        })
    }
}

/// Value at 0 of the interpolating polynomial through the points (Neville).
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut p: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

/// Limit as L -> infinity of values with an expansion in even powers of 1/L,
/// from the last three (or two) points.
pub fn algebraic_limit(lengths: &[f64], values: &[f64]) -> f64 {
    let k = lengths.len().min(values.len()).min(3);
    let pts: Vec<(f64, f64)> = lengths[lengths.len() - k..].iter().zip(&values[values.len() - k..]).map(|(l, v)| (1.0 / (l * l), *v)).collect();
    extrapolate_to_zero(&pts)
}

/// (max - min) / mean.
pub fn relative_spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (max - min) / mean.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse_lab() -> Lab {
        let mesh = MeshPolicy { cross: 16.0, axial: 4.0, grading: 1, min_axial_cells: 8.0, multi_cross: 8.0, multi_axial: 2.0 };
        Lab::new(CrossSection::interval(-1.0, 1.0), mesh, Tolerances::default(), 1, 1)
    }

    #[test]
    fn neville_recovers_polynomials() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&x| (x, 1.5 + 2.0 * x - x * x)).collect();
        assert!((extrapolate_to_zero(&pts) - 1.5).abs() < 1e-12);
        assert!((relative_spread(&[1.0, 1.2, 0.8]) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn solves_are_cached() {
        let lab = coarse_lab();
        let f = CoefficientField::model(0.6).unwrap();
        let a = lab.solve(&f, DomainKind::FullCylinder, 2.0, 1).unwrap();
        let b = lab.solve(&f, DomainKind::FullCylinder, 2.0, 1).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let r = lab.solve(&f.reflected(), DomainKind::FullCylinder, 2.0, 1).unwrap();
        assert!(!Arc::ptr_eq(&a, &r));
    }

    #[test]
    fn gap_refuses_without_coupling() {
        let lab = coarse_lab();
        let out = lab.exp_gap(&CoefficientField::model(0.0).unwrap(), &[4.0]);
        assert_eq!(out.records.len(), 1);
        assert!(!out.passed());
        assert!(out.records[0].note.starts_with("ConditionConFails"));
        assert_eq!(out.check("condition-con"), Some(false));
    }

    #[test]
    fn coarse_bounds_pass_and_errors_stay_in_their_row() {
        let lab = coarse_lab();
        let f = CoefficientField::model(0.6).unwrap();
        let out = lab.exp_bounds(&f, &[0.5, 2.0]);
        assert!(out.passed(), "{:?}", out.failing_rows());
        let bad = lab.exp_bounds(&f, &[-1.0, 2.0]);
        assert_eq!(bad.records.len(), 2);
        assert_eq!(bad.records[0].checks[0].name, "solved");
        assert!(bad.records[1].passed());
    }

    #[test]
    fn second_needs_property_s() {
        let lab = coarse_lab();
        let out = lab.exp_second(&CoefficientField::asymmetric(0.4).unwrap(), &[2.0]);
        assert_eq!(out.check("property-S"), Some(false));
    }

    #[test]
    fn multi_direction_coarse() {
        let lab = coarse_lab();
        let out = lab.exp_multi(&CoefficientField::model_3d(0.6).unwrap(), &[2.0]);
        assert_eq!(out.check("row-restriction-bound(tol_solver)"), Some(true), "{:?}", out.records);
        let diag = lab.exp_multi(&CoefficientField::identity(3, 2).unwrap(), &[2.0]);
        assert_eq!(diag.check("equal-mu1(tol_equal)"), Some(true), "{:?}", diag.records);
    }
}
