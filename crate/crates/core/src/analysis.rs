//! Test functions as Rayleigh-quotient upper bounds, and diagnostics of
//! computed eigenfunctions: decay, concentration, symmetry, Picone gap and
//! end profiles.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assemble::{assemble_cross_section, assemble_cylinder, cell_midpoints, integrate_bins, integrate_region, nodal_gradient, Pencil};
use crate::coeff::{condition_con, CoefficientField, ConAudit};
use crate::eig::{smallest_eigenpairs, EigenPair};
use crate::error::{Error, Result};
use crate::grid::{CrossSection, DomainKind, NodeTag, Resolution, Side, TensorMesh};

/// Default exponent of the cross-section cutoff width l^alpha.
pub const ALPHA_CUT: f64 = 0.5;
/// Denominators below this make a test function count as zero.
pub const ZERO_DENOMINATOR: f64 = 1e-14;
/// Fitted slab ratios above this are reported as no decay.
pub const NO_DECAY_ALPHA: f64 = 0.99;
/// Shortest half-length with a usable decay window.
pub const MIN_DECAY_ELL: f64 = 4.0;
/// Candidate lengths for the short pieces of glued-phi and z-alpha.
pub const SHORT_PIECE_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

// ---------------------------------------------------------------- cutoffs

/// Cutoff across the section: 0 on the boundary, linear ramps of the given width, 1 inside.
pub fn rho_cross(x2: &[f64], omega: &CrossSection, width: f64) -> f64 {
    let mut r = 1.0;
    for (k, &t) in x2.iter().enumerate() {
        let a = ((t - omega.lo[k]) / width).min((omega.hi[k] - t) / width);
        r *= a.clamp(0.0, 1.0);
    }
    r
}

/// 1 on |x1| <= l', linear down to 0 at |x1| = l' + 1.
pub fn rho_decay(x1: f64, ell_prime: f64) -> f64 {
    (ell_prime + 1.0 - x1.abs()).clamp(0.0, 1.0)
}

/// 0 for x1 <= -1, 1 + x1 on (-1, 0), 1 for x1 >= 0.
pub fn rho_step(x1: f64) -> f64 {
    (1.0 + x1).clamp(0.0, 1.0)
}

fn cutoff_width(ell: f64, alpha_cut: f64, omega: &CrossSection) -> f64 {
    let half = omega.lo.iter().zip(&omega.hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
    ell.powf(alpha_cut).min(half)
}

// ---------------------------------------------------------- cross profile

/// First Dirichlet eigenpair of a cross-section problem with derived nodal data.
#[derive(Clone, Debug)]
pub struct CrossProfile {
    pub mesh: TensorMesh,
    pub pencil: Pencil,
    pub pair: EigenPair,
    /// Schur-reduced coefficient (w1, Lambda1) rather than A22 (W1, mu1).
    pub reduced: bool,
    /// Nodal values, zero on the boundary.
    pub values: Vec<f64>,
    /// Nodal gradients (cell gradients averaged to nodes).
    pub grad: Vec<[f64; 3]>,
    /// A12 . grad W / a11 at the nodes, for p = 1 fields.
    pub coupling: Vec<f64>,
    /// Integral of a11 W^2.
    pub a11_weight: f64,
    pub audit: ConAudit,
    /// Values were symmetrized because the field and mesh are point-symmetric.
    pub symmetrized: bool,
}

impl CrossProfile {
    pub fn solve(field: &CoefficientField, mesh: &TensorMesh, reduced: bool, tol: f64) -> Result<Self> {
        let pencil = assemble_cross_section(mesh, field, reduced)?;
        let pair = smallest_eigenpairs(&pencil.stiffness, &pencil.mass, 1, tol)?.remove(0);
        let mut values = pencil.dofs.expand(&pair.vector);
        let samples: Vec<Vec<f64>> = (0..mesh.n_nodes()).map(|i| mesh.node_coords(i)[..mesh.dim()].to_vec()).collect();
        let perm = mesh.reflection_permutation().ok().filter(|_| field.is_even(&samples));
        // the exact discrete eigenvector of a symmetric pencil is even; remove the solver's odd part
        if let Some(perm) = &perm {
            let old = values.clone();
            for (i, v) in values.iter_mut().enumerate() {
                *v = 0.5 * (old[i] + old[perm[i]]);
            }
        }
        let grad = nodal_gradient(mesh, &values);
        let mut coupling = Vec::new();
        if field.p() == 1 {
            coupling = (0..mesh.n_nodes())
                .map(|i| {
                    let x = &samples[i];
                    let a11 = field.eval(x).get(0, 0);
                    field.a12_dot(x, &grad[i])[0] / a11
                })
                .collect();
            if let Some(perm) = &perm {
                let old = coupling.clone();
                for (i, c) in coupling.iter_mut().enumerate() {
                    *c = 0.5 * (old[i] - old[perm[i]]);
                }
            }
        }
        let a11_weight = cell_midpoints(mesh, &values)
            .iter()
            .map(|c| c.vol * field.eval(&c.centre[..mesh.dim()]).get(0, 0) * c.value * c.value)
            .sum();
        let audit = condition_con(field, mesh, &values)?;
        Ok(CrossProfile { mesh: mesh.clone(), pencil, pair, reduced, values, grad, coupling, a11_weight, audit, symmetrized: perm.is_some() })
    }

    pub fn eigenvalue(&self) -> f64 {
        self.pair.value
    }

    /// Smallest nodal value over interior nodes relative to the maximum.
    pub fn min_interior_ratio(&self) -> (usize, f64) {
        let max = self.values.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut worst = (0, f64::INFINITY);
        for i in 0..self.mesh.n_nodes() {
            if self.mesh.tag(i, crate::grid::BoundaryPolicy::Mixed) == NodeTag::Interior {
                let r = self.values[i] / max;
                if r < worst.1 {
                    worst = (i, r);
                }
            }
        }
        worst
    }
}

// --------------------------------------------------------- test functions

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    /// W1 - delta x1 W1' rho_l for the model field.
    ModelVl,
    /// w1 - G x1 with G = A12 . grad w1 / a11 from the reduced profile.
    GeneralVl,
    /// W1 - G x1 with G from the A22 profile.
    TildeVl,
    /// Two end pieces of tilde-vl, linear ramps, zero in the middle.
    GluedPhi,
    /// exp(-eps |x1|) W1 on a half-cylinder.
    ExpDecay,
    /// tilde-vl on [0, l1) followed by an exponential tail.
    ZAlpha,
}

impl TestKind {
    pub fn tag(self) -> &'static str {
        match self {
            TestKind::ModelVl => "model-vl",
            TestKind::GeneralVl => "general-vl",
            TestKind::TildeVl => "tilde-vl",
            TestKind::GluedPhi => "glued-phi",
            TestKind::ExpDecay => "exp-decay",
            TestKind::ZAlpha => "z-alpha",
        }
    }

    fn needs_reduced(self) -> bool {
        self == TestKind::GeneralVl
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestParams {
    pub ell0: f64,
    pub eta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub ell1: f64,
    pub alpha_cut: f64,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams { ell0: 0.1, eta: 4.0, eps: 0.1, alpha: 0.1, ell1: 0.1, alpha_cut: ALPHA_CUT }
    }
}

#[derive(Clone, Debug)]
pub struct TestFunction<'a> {
    pub kind: TestKind,
    pub params: TestParams,
    profile: &'a CrossProfile,
    delta: f64,
}

impl<'a> TestFunction<'a> {
    pub fn new(kind: TestKind, params: TestParams, profile: &'a CrossProfile, field: &CoefficientField) -> Result<Self> {
        if kind.needs_reduced() != profile.reduced {
            let want = if profile.reduced { "A22" } else { "Schur-reduced" };
            return Err(Error::InvalidArgument(format!("{} needs the {want} cross-section profile", kind.tag())));
        }
        if field.p() != 1 {
            return Err(Error::DimensionMismatch("test functions are defined for one cylinder axis".into()));
        }
        let delta = match kind {
            TestKind::ModelVl => field.delta().ok_or_else(|| Error::InvalidArgument("model-vl needs the model field".into()))?,
            _ => 0.0,
        };
        Ok(TestFunction { kind, params, profile, delta })
    }

    fn target_ok(&self, kind: DomainKind) -> bool {
        match self.kind {
            TestKind::ModelVl | TestKind::GeneralVl | TestKind::TildeVl | TestKind::GluedPhi => kind == DomainKind::FullCylinder,
            TestKind::ExpDecay => matches!(kind, DomainKind::HalfPlus | DomainKind::HalfMinus),
            TestKind::ZAlpha => kind == DomainKind::HalfPlus,
        }
    }

    /// Nodal interpolant on a target mesh; exactly zero on its Dirichlet nodes.
    pub fn interpolate(&self, mesh: &TensorMesh) -> Result<Vec<f64>> {
        if !self.target_ok(mesh.kind()) {
            return Err(Error::MeshMismatch(format!("{} is not defined on a {} mesh", self.kind.tag(), mesh.kind().tag())));
        }
        if mesh.cross_axes() != self.profile.mesh.axes() {
            return Err(Error::MeshMismatch("test function profile and target mesh use different cross-sections".into()));
        }
        let prm = &self.params;
        let ell = mesh.ell();
        let omega = mesh.omega();
        let w = &self.profile.values;
        let cross = &self.profile.mesh;
        let nc = cross.n_nodes();
        let width_for = |len: f64| cutoff_width(len, prm.alpha_cut, omega);
        let rho_at = |width: f64| -> Vec<f64> { (0..nc).map(|c| rho_cross(&cross.node_coords(c)[..cross.dim()], omega, width)).collect() };
        let slope: Vec<f64> = match self.kind {
            TestKind::ModelVl => self.profile.grad.iter().map(|g| self.delta * g[0]).collect(),
            _ => self.profile.coupling.clone(),
        };
        let taper = |x1: f64| (ell - x1.abs()).clamp(0.0, 1.0);

        let values: Vec<f64> = match self.kind {
            TestKind::ModelVl | TestKind::GeneralVl | TestKind::TildeVl => {
                let rho = rho_at(width_for(ell));
                (0..mesh.n_nodes())
                    .map(|i| {
                        let c = mesh.cross_node(i);
                        w[c] - slope[c] * mesh.node_coords(i)[0] * rho[c]
                    })
                    .collect()
            }
            TestKind::GluedPhi => {
                let (l0, eta) = (prm.ell0, prm.eta);
                let s = ell - l0 - eta;
                if !(s > 0.0) {
                    return Err(Error::TooShort { ell, min: l0 + eta });
                }
                let rho = rho_at(width_for(l0));
                (0..mesh.n_nodes())
                    .map(|i| {
                        let c = mesh.cross_node(i);
                        let x1 = mesh.node_coords(i)[0];
                        let a = x1.abs();
                        if a >= ell - l0 {
                            // shifted end piece; the argument is odd under x1 -> -x1
                            let t = if x1 > 0.0 { (x1 - ell) + l0 } else { -((-x1 - ell) + l0) };
                            w[c] - slope[c] * t * rho[c]
                        } else if a >= s {
                            (a - s) / eta * w[c]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            TestKind::ExpDecay => (0..mesh.n_nodes())
                .map(|i| {
                    let x1 = mesh.node_coords(i)[0];
                    (-prm.eps * x1.abs()).exp() * w[mesh.cross_node(i)] * taper(x1)
                })
                .collect(),
            TestKind::ZAlpha => {
                let l1 = prm.ell1;
                if !(ell >= l1 + 1.0) {
                    return Err(Error::TooShort { ell, min: l1 + 1.0 });
                }
                let rho = rho_at(width_for(l1));
                (0..mesh.n_nodes())
                    .map(|i| {
                        let c = mesh.cross_node(i);
                        let x1 = mesh.node_coords(i)[0];
                        if x1 < l1 {
                            w[c] - slope[c] * (x1 - l1) * rho[c]
                        } else {
                            w[c] * (-prm.alpha * (x1 - l1)).exp() * taper(x1)
                        }
                    })
                    .collect()
            }
        };
        for node in mesh.dirichlet_nodes() {
            if values[node] != 0.0 {
                return Err(Error::InvalidArgument(format!("{} is nonzero on Dirichlet node {node}", self.kind.tag())));
            }
        }
        Ok(values)
    }
}

/// Rayleigh quotient with its numerator and denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quotient {
    pub quotient: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// Quotient of a dof vector on a pencil.
pub fn rayleigh_of_vector(u: &[f64], pencil: &Pencil) -> Result<Quotient> {
    if u.len() != pencil.dofs.len() {
        return Err(Error::DimensionMismatch(format!("vector has {} entries, pencil {}", u.len(), pencil.dofs.len())));
    }
    let numerator = pencil.stiffness.quad(u);
    let denominator = pencil.mass.quad(u);
    if !(denominator >= ZERO_DENOMINATOR) {
        return Err(Error::ZeroFunction);
    }
    Ok(Quotient { quotient: numerator / denominator, numerator, denominator })
}

/// Quotient of the nodal interpolant on an already assembled pencil of `mesh`.
pub fn rayleigh_on_pencil(tf: &TestFunction, mesh: &TensorMesh, pencil: &Pencil) -> Result<Quotient> {
    let nodal = tf.interpolate(mesh)?;
    rayleigh_of_vector(&pencil.dofs.restrict(&nodal), pencil)
}

pub fn rayleigh_of_testfn(tf: &TestFunction, mesh: &TensorMesh, field: &CoefficientField) -> Result<Quotient> {
    let pencil = assemble_cylinder(mesh, field)?;
    rayleigh_on_pencil(tf, mesh, &pencil)
}

// ------------------------------------------------------ parameter choice

/// Short-piece parameters for glued-phi and z-alpha with the bound they certify.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortPiece {
    pub ell: f64,
    /// Integral of A grad v . grad v over the piece.
    pub energy: f64,
    /// Integral of v^2 over the piece.
    pub mass: f64,
}

fn short_piece(field: &CoefficientField, profile: &CrossProfile, ell: f64, minus_half: bool, alpha_cut: f64) -> Result<ShortPiece> {
    let res = Resolution { axial: 4.0 / ell, cross: profile.mesh.resolution().cross };
    let mesh = TensorMesh::build(DomainKind::FullCylinder, ell, profile.mesh.omega(), res, 1)?;
    if mesh.cross_axes() != profile.mesh.axes() {
        return Err(Error::MeshMismatch("short-piece mesh does not reproduce the cross-section".into()));
    }
    let params = TestParams { alpha_cut, ..TestParams::default() };
    let tf = TestFunction::new(TestKind::TildeVl, params, profile, field)?;
    let nodal = tf.interpolate(&mesh)?;
    let ints = integrate_region(&mesh, Some(field), &nodal, &|x: &[f64]| !minus_half || x[0] < 0.0)?;
    Ok(ShortPiece { ell, energy: ints.energy, mass: ints.mass })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GluedChoice {
    pub piece: ShortPiece,
    pub eta: f64,
    /// Right-hand side of the upper bound on lambda - mu1; negative when the construction works.
    pub rhs: f64,
}

/// Picks l0 from the grid and the smallest power-of-two eta making the glued bound negative.
pub fn choose_glued(field: &CoefficientField, profile: &CrossProfile, alpha_cut: f64) -> Result<GluedChoice> {
    let mu = profile.eigenvalue();
    let mut best: Option<ShortPiece> = None;
    for &l0 in &SHORT_PIECE_GRID {
        let p = short_piece(field, profile, l0, false, alpha_cut)?;
        if best.map_or(true, |b| p.energy / p.mass < b.energy / b.mass) {
            best = Some(p);
        }
    }
    let piece = best.expect("nonempty grid");
    let deficit = mu * piece.mass - piece.energy;
    if !(deficit > 0.0) {
        return Err(Error::ConditionConFails { norm: profile.audit.norm });
    }
    let need = 2.0 * profile.a11_weight / deficit;
    let mut eta = 1.0;
    while eta <= need {
        eta *= 2.0;
    }
    let rhs = (piece.energy - mu * piece.mass + 2.0 * profile.a11_weight / eta) / (piece.mass + 2.0 * eta / 3.0);
    Ok(GluedChoice { piece, eta, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZAlphaChoice {
    pub piece: ShortPiece,
    pub gamma1: f64,
    pub alpha: f64,
    pub rhs: f64,
}

/// Picks l1 from the grid and alpha at half the admissible bound, minimizing the tail bound.
pub fn choose_z_alpha(field: &CoefficientField, profile: &CrossProfile, alpha_cut: f64) -> Result<ZAlphaChoice> {
    let mu = profile.eigenvalue();
    let s = profile.audit.signed_integral;
    let a = profile.a11_weight;
    let mut best: Option<ZAlphaChoice> = None;
    for &l1 in &SHORT_PIECE_GRID {
        let piece = short_piece(field, profile, l1, true, alpha_cut)?;
        let gamma1 = mu * piece.mass - piece.energy;
        if !(gamma1 + s > 0.0) {
            continue;
        }
        let alpha = (gamma1 + s) / a;
        let rhs = (0.5 * alpha * a - s - gamma1) / (piece.mass + 0.5 / alpha);
        if best.map_or(true, |b| rhs < b.rhs) {
            best = Some(ZAlphaChoice { piece, gamma1, alpha, rhs });
        }
    }
    best.ok_or(Error::ConditionConFails { norm: profile.audit.norm })
}

// ----------------------------------------------------------------- decay

#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    /// (r, integral of u^2 over |x1| <= r)
    pub masses: Vec<(f64, f64)>,
    /// (r, integral of |grad u|^2 over |x1| <= r)
    pub grad_masses: Vec<(f64, f64)>,
    /// Per-unit decay ratio fitted on the slabs r-1 <= |x1| < r of the window.
    pub alpha_fit: f64,
    /// 95% interval for alpha_fit.
    pub slope_ci: (f64, f64),
    /// Same ratio for the gradient slabs.
    pub alpha_grad: f64,
    /// R^2 of log mass(r) against r over the window.
    pub r_squared: f64,
    /// Index range [lo, hi) of the fitting window into `masses`.
    pub window: (usize, usize),
    pub no_decay: bool,
    /// Smallest alpha with mass(r) <= alpha^[l - r] for every reported r.
    pub alpha_bound: f64,
    /// alpha_bound < 1 and the fitted rate does not exceed it.
    pub bound_holds: bool,
}

struct LineFit {
    slope: f64,
    slope_se: f64,
    r_squared: f64,
}

fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 && sxx > 0.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit { slope, slope_se, r_squared }
}

/// Middle third of n points, widened to at least three.
fn middle_third(n: usize) -> (usize, usize) {
    let (mut lo, mut hi) = (n / 3, n - n / 3);
    while hi - lo < 3 && (lo > 0 || hi < n) {
        lo = lo.saturating_sub(1);
        hi = (hi + 1).min(n);
    }
    (lo, hi)
}

pub fn decay_profile(u: &EigenPair, mesh: &TensorMesh, pencil: &Pencil) -> Result<DecayProfile> {
    if mesh.kind() != DomainKind::FullCylinder {
        return Err(Error::MeshMismatch("decay profile needs a full cylinder".into()));
    }
    let ell = mesh.ell();
    if ell < MIN_DECAY_ELL {
        return Err(Error::TooShort { ell, min: MIN_DECAY_ELL });
    }
    let nodal = pencil.dofs.expand(&u.vector);
    let rmax = (ell.floor() as usize).saturating_sub(1);
    // slab k holds k <= |x1| < k + 1
    let slabs = integrate_bins(mesh, None, &nodal, rmax, &|x: &[f64]| Some(x[0].abs().floor() as usize))?;
    let mut masses = Vec::with_capacity(rmax);
    let mut grad_masses = Vec::with_capacity(rmax);
    let (mut m, mut g) = (0.0, 0.0);
    for (k, s) in slabs.iter().enumerate() {
        m += s.mass;
        g += s.grad_sq;
        masses.push(((k + 1) as f64, m));
        grad_masses.push(((k + 1) as f64, g));
    }
    let (lo, hi) = middle_third(rmax);
    let x: Vec<f64> = masses[lo..hi].iter().map(|(r, _)| ell - r).collect();
    let cum: Vec<f64> = masses[lo..hi].iter().map(|(_, v)| v.ln()).collect();
    let slab_m: Vec<f64> = slabs[lo..hi].iter().map(|s| s.mass.ln()).collect();
    let slab_g: Vec<f64> = slabs[lo..hi].iter().map(|s| s.grad_sq.ln()).collect();
    let cum_fit = fit_line(&x, &cum);
    let fit = fit_line(&x, &slab_m);
    let gfit = fit_line(&x, &slab_g);
    let alpha_fit = fit.slope.exp();
    let t = if x.len() > 2 { StudentsT::new(0.0, 1.0, x.len() as f64 - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    let slope_ci = ((fit.slope - t * fit.slope_se).exp(), (fit.slope + t * fit.slope_se).exp());
    // Smallest alpha with mass(r) <= alpha^floor(ell - r) for every r. A valid bound
    // must decay no faster than the measured rate, so alpha_fit may not exceed it.
    let alpha_bound = masses
        .iter()
        .filter(|&&(r, _)| (ell - r).floor() >= 1.0)
        .map(|&(r, v)| v.powf(1.0 / (ell - r).floor()))
        .fold(0.0, f64::max);
    let bound_holds = alpha_bound < 1.0 && slope_ci.0 <= alpha_bound;
    Ok(DecayProfile {
        masses,
        grad_masses,
        alpha_fit,
        slope_ci,
        alpha_grad: gfit.slope.exp(),
        r_squared: cum_fit.r_squared,
        window: (lo, hi),
        no_decay: alpha_fit > NO_DECAY_ALPHA,
        alpha_bound,
        bound_holds,
    })
}

// ---------------------------------------------------------- concentration

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Concentration {
    pub n_plus: f64,
    pub n_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    /// |N+ + N- - lambda| / lambda
    pub energy_defect: f64,
    /// |D+ + D- - 1|
    pub mass_defect: f64,
}

pub fn concentration_split(u: &EigenPair, field: &CoefficientField, mesh: &TensorMesh, pencil: &Pencil) -> Result<Concentration> {
    if mesh.kind() != DomainKind::FullCylinder {
        return Err(Error::MeshMismatch("concentration split needs a full cylinder".into()));
    }
    if u.vector.len() != pencil.dofs.len() {
        return Err(Error::MeshMismatch("eigenvector does not match the pencil".into()));
    }
    let nodal = pencil.dofs.expand(&u.vector);
    let bins = integrate_bins(mesh, Some(field), &nodal, 2, &|x: &[f64]| Some(if x[0] >= 0.0 { 0 } else { 1 }))?;
    let (p, m) = (bins[0], bins[1]);
    let lambda = pencil.stiffness.quad(&u.vector) / pencil.mass.quad(&u.vector);
    Ok(Concentration {
        n_plus: p.energy,
        n_minus: m.energy,
        d_plus: p.mass,
        d_minus: m.mass,
        energy_defect: ((p.energy + m.energy) - lambda).abs() / lambda.abs(),
        mass_defect: ((p.mass + m.mass) - 1.0).abs(),
    })
}

// -------------------------------------------------------------- symmetry

/// ||u - P u||_M for the point reflection P.
pub fn symmetry_defect(u: &[f64], mesh: &TensorMesh, pencil: &Pencil) -> Result<f64> {
    let perm = mesh.reflection_permutation()?;
    if u.len() != pencil.dofs.len() {
        return Err(Error::MeshMismatch("vector does not match the pencil".into()));
    }
    let nodal = pencil.dofs.expand(u);
    let mut d = vec![0.0; u.len()];
    for (j, dj) in d.iter_mut().enumerate() {
        let node = pencil.dofs.node(j);
        let mirror = perm[node];
        if pencil.dofs.dof(mirror).is_none() {
            return Err(Error::NoReflectionSymmetry("reflection maps a free node to a constrained one".into()));
        }
        *dj = nodal[node] - nodal[mirror];
    }
    Ok(pencil.mass.quad(&d).max(0.0).sqrt())
}

/// Dof vector of P u.
pub fn reflect_vector(u: &[f64], mesh: &TensorMesh, pencil: &Pencil) -> Result<Vec<f64>> {
    let perm = mesh.reflection_permutation()?;
    let nodal = pencil.dofs.expand(u);
    let reflected: Vec<f64> = (0..nodal.len()).map(|i| nodal[perm[i]]).collect();
    Ok(pencil.dofs.restrict(&reflected))
}

// ---------------------------------------------------------------- Picone

/// u^T K u - mu1 u^T M u on a half-cylinder pencil.
pub fn picone_gap(u: &[f64], mesh: &TensorMesh, pencil: &Pencil, profile: &CrossProfile, mu1: f64) -> Result<f64> {
    if !matches!(mesh.kind(), DomainKind::HalfPlus | DomainKind::HalfMinus) {
        return Err(Error::MeshMismatch("Picone gap is evaluated on a half-cylinder".into()));
    }
    if mesh.cross_axes() != profile.mesh.axes() {
        return Err(Error::MeshMismatch("half-cylinder and W1 use different cross-sections".into()));
    }
    if u.len() != pencil.dofs.len() {
        return Err(Error::MeshMismatch("vector does not match the pencil".into()));
    }
    let (node, ratio) = profile.min_interior_ratio();
    if !(ratio >= 1e-12) {
        return Err(Error::DegenerateWeight { node, value: profile.values[node] });
    }
    Ok(pencil.stiffness.quad(u) - mu1 * pencil.mass.quad(u))
}

/// Smooth random function on a half-cylinder, vanishing on the Dirichlet nodes.
///
/// A sum of products of cos((j + 1/2) pi x1 / L) and sine modes across the
/// section, with N(0, 1)-like coefficients damped by mode number.
pub fn random_smooth_vector<R: Rng>(mesh: &TensorMesh, pencil: &Pencil, modes: usize, rng: &mut R) -> Vec<f64> {
    let ell = mesh.ell();
    let omega = mesh.omega();
    let d = omega.dim();
    let mut coefs = Vec::new();
    for j in 0..modes {
        for k in 1..=modes {
            for k2 in 1..=(if d == 2 { modes } else { 1 }) {
                let c: f64 = rng.gen_range(-1.0..1.0) / ((j + k + k2) as f64).powi(2);
                coefs.push((j, k, k2, c));
            }
        }
    }
    let nodal: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| {
            let x = mesh.node_coords(i);
            let t1 = (x[0].abs() / ell).min(1.0);
            let mut s = 0.0;
            for &(j, k, k2, c) in &coefs {
                let ax = ((j as f64 + 0.5) * std::f64::consts::PI * t1).cos();
                let mut cr = 1.0;
                for (q, kk) in [k, k2].iter().enumerate().take(d) {
                    let tq = (x[1 + q] - omega.lo[q]) / (omega.hi[q] - omega.lo[q]);
                    cr *= (*kk as f64 * std::f64::consts::PI * tq).sin();
                }
                s += c * ax * cr;
            }
            s
        })
        .collect();
    pencil.dofs.restrict(&nodal)
}

// ----------------------------------------------------------- end profiles

/// H1(Omega_r) distance between the shifted cylinder eigenfunction and sqrt(D_side) times the half-cylinder minimizer.
#[allow(clippy::too_many_arguments)]
pub fn end_profile_distance(
    u_cyl: &EigenPair,
    cyl_mesh: &TensorMesh,
    cyl_pencil: &Pencil,
    d_side: f64,
    u_half: &EigenPair,
    half_mesh: &TensorMesh,
    half_pencil: &Pencil,
    side: Side,
    r: f64,
) -> Result<f64> {
    if cyl_mesh.kind() != DomainKind::FullCylinder {
        return Err(Error::MeshMismatch("end profiles start from a full cylinder".into()));
    }
    let want = match side {
        Side::Plus => DomainKind::HalfPlus,
        Side::Minus => DomainKind::HalfMinus,
    };
    if half_mesh.kind() != want {
        return Err(Error::MeshMismatch(format!("expected a {} mesh", want.tag())));
    }
    if !cyl_mesh.same_cross_section(half_mesh) {
        return Err(Error::MeshMismatch("cylinder and half-cylinder use different cross-sections".into()));
    }
    let ell = cyl_mesh.ell();
    if !(r > 0.0 && r <= ell && r <= half_mesh.ell()) {
        return Err(Error::InvalidArgument(format!("r = {r} outside (0, min(l, L)]")));
    }
    let cyl = cyl_pencil.dofs.expand(&u_cyl.vector);
    let half = half_pencil.dofs.expand(&u_half.vector);
    let cax = cyl_mesh.axis(0);
    let hax = half_mesh.axis(0);
    let (nc, nh) = (cax.len() - 1, hax.len() - 1);
    // half-axis index -> cylinder-axis index, over the nodes within r of the free end
    let mut map = vec![None; hax.len()];
    for (j, &xh) in hax.iter().enumerate() {
        let (ic, shift) = match side {
            Side::Plus => (j, ell),
            Side::Minus => (nc.wrapping_sub(nh - j), -ell),
        };
        if xh.abs() > r + 1e-9 {
            continue;
        }
        if ic > nc || (cax[ic] + shift - xh).abs() > 1e-9 {
            return Err(Error::MeshMismatch(format!("axial node {xh} has no counterpart on the cylinder")));
        }
        map[j] = Some(ic);
    }
    let nx = half_mesh.n_cross_nodes();
    let scale = d_side.max(0.0).sqrt();
    let mut cyl_part = vec![0.0; half_mesh.n_nodes()];
    for (j, ic) in map.iter().enumerate() {
        let Some(ic) = ic else { continue };
        for c in 0..nx {
            cyl_part[j * nx + c] = cyl[ic * nx + c];
        }
    }
    let region = |x: &[f64]| x[0].abs() <= r;
    let overlap: f64 = integrate_region(half_mesh, None, &cyl_part.iter().zip(&half).map(|(a, b)| a + b).collect::<Vec<_>>(), &region)?.mass
        - integrate_region(half_mesh, None, &cyl_part.iter().zip(&half).map(|(a, b)| a - b).collect::<Vec<_>>(), &region)?.mass;
    let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
    let diff: Vec<f64> = cyl_part.iter().zip(&half).map(|(a, b)| a - sign * scale * b).collect();
    let ints = integrate_region(half_mesh, None, &diff, &region)?;
    Ok((ints.mass + ints.grad_sq).sqrt())
}

/// Fit of u(x1, X2*) = g e^{alpha x1} + g' e^{-alpha x1} over the middle third of the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BulkFit {
    pub alpha: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    /// Relative L2 residual over the sampled nodes.
    pub residual: f64,
    /// Cross-section point actually used.
    pub x2: f64,
}

pub fn bulk_profile_fit(u: &EigenPair, mesh: &TensorMesh, pencil: &Pencil, x2_star: f64) -> Result<BulkFit> {
    if mesh.kind() != DomainKind::FullCylinder || mesh.dim() != 2 {
        return Err(Error::MeshMismatch("bulk profile fit needs a two-dimensional full cylinder".into()));
    }
    let nodal = pencil.dofs.expand(&u.vector);
    let xs = mesh.axis(1);
    let (c, _) = xs.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if (x - x2_star).abs() < acc.1 { (i, (x - x2_star).abs()) } else { acc });
    let nx = xs.len();
    let ell = mesh.ell();
    let pts: Vec<(f64, f64)> = mesh
        .axis(0)
        .iter()
        .enumerate()
        .filter(|(_, &x)| x.abs() <= ell / 3.0 + 1e-12)
        .map(|(i, &x)| (x, nodal[i * nx + c]))
        .collect();
    if pts.len() < 4 {
        return Err(Error::TooShort { ell, min: MIN_DECAY_ELL });
    }
    let norm: f64 = pts.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    // linear least squares in (g, g') for a fixed alpha
    let solve = |alpha: f64| -> (f64, f64, f64) {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in &pts {
            let (e, f) = ((alpha * x).exp(), (-alpha * x).exp());
            a11 += e * e;
            a12 += e * f;
            a22 += f * f;
            b1 += e * y;
            b2 += f * y;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            return (0.0, 0.0, f64::INFINITY);
        }
        let g = (b1 * a22 - b2 * a12) / det;
        let h = (a11 * b2 - a12 * b1) / det;
        let res: f64 = pts.iter().map(|&(x, y)| (y - g * (alpha * x).exp() - h * (-alpha * x).exp()).powi(2)).sum::<f64>().sqrt();
        (g, h, res / norm)
    };
    let grid: Vec<f64> = (0..=120).map(|k| 1e-3 * 10f64.powf(k as f64 / 30.0)).collect();
    let mut k_best = 0;
    for k in 1..grid.len() {
        if solve(grid[k]).2 < solve(grid[k_best]).2 {
            k_best = k;
        }
    }
    // golden-section refinement in log alpha
    let (mut a, mut b) = (grid[k_best.saturating_sub(1)].ln(), grid[(k_best + 1).min(grid.len() - 1)].ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if solve(x1.exp()).2 < solve(x2.exp()).2 {
            b = x2;
        } else {
            a = x1;
        }
    }
    let alpha = (0.5 * (a + b)).exp();
    let (g_plus, g_minus, residual) = solve(alpha);
    Ok(BulkFit { alpha, g_plus, g_minus, residual, x2: xs[c] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::smallest_eigenpairs;
    use std::f64::consts::FRAC_PI_2;

    fn omega() -> CrossSection {
        CrossSection::interval(-1.0, 1.0)
    }

    fn mesh(kind: DomainKind, ell: f64, axial: f64, cross: f64) -> TensorMesh {
        TensorMesh::build(kind, ell, &omega(), Resolution { axial, cross }, 1).unwrap()
    }

    fn first(p: &Pencil) -> EigenPair {
        smallest_eigenpairs(&p.stiffness, &p.mass, 1, 1e-10).unwrap().remove(0)
    }

    #[test]
    fn cutoffs() {
        assert_eq!(rho_cross(&[-1.0], &omega(), 0.5), 0.0);
        assert_eq!(rho_cross(&[0.0], &omega(), 0.5), 1.0);
        assert!((rho_cross(&[0.75], &omega(), 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(rho_decay(2.0, 2.0), 1.0);
        assert_eq!(rho_decay(-2.5, 2.0), 0.5);
        assert_eq!(rho_decay(3.5, 2.0), 0.0);
        assert_eq!(rho_step(-1.5), 0.0);
        assert_eq!(rho_step(-0.25), 0.75);
        assert_eq!(rho_step(2.0), 1.0);
    }

    #[test]
    fn test_functions_vanish_on_dirichlet_nodes_and_bound_lambda() {
        let field = CoefficientField::model(0.6).unwrap();
        let full = mesh(DomainKind::FullCylinder, 6.0, 4.0, 8.0);
        let prof = CrossProfile::solve(&field, &full.cross_section(), false, 1e-10).unwrap();
        let red = CrossProfile::solve(&field, &full.cross_section(), true, 1e-10).unwrap();
        let pen = assemble_cylinder(&full, &field).unwrap();
        let lam = first(&pen).value;
        let params = TestParams { ell0: 0.2, eta: 2.0, ..TestParams::default() };
        for (kind, p) in [(TestKind::ModelVl, &prof), (TestKind::TildeVl, &prof), (TestKind::GeneralVl, &red), (TestKind::GluedPhi, &prof)] {
            let tf = TestFunction::new(kind, params, p, &field).unwrap();
            let q = rayleigh_on_pencil(&tf, &full, &pen).unwrap();
            assert!(q.quotient >= lam, "{}: {} < {}", kind.tag(), q.quotient, lam);
        }
        for kind in [DomainKind::HalfPlus, DomainKind::HalfMinus] {
            let half = mesh(kind, 6.0, 4.0, 8.0);
            let hp = assemble_cylinder(&half, &field).unwrap();
            let lam_h = first(&hp).value;
            let mut tfs = vec![TestFunction::new(TestKind::ExpDecay, params, &prof, &field).unwrap()];
            if kind == DomainKind::HalfPlus {
                tfs.push(TestFunction::new(TestKind::ZAlpha, params, &prof, &field).unwrap());
            }
            for tf in tfs {
                let nodal = tf.interpolate(&half).unwrap();
                assert!(half.dirichlet_nodes().iter().all(|&n| nodal[n] == 0.0));
                assert!(rayleigh_on_pencil(&tf, &half, &hp).unwrap().quotient >= lam_h);
            }
        }
    }

    #[test]
    fn wrong_targets_are_rejected() {
        let field = CoefficientField::model(0.3).unwrap();
        let full = mesh(DomainKind::FullCylinder, 2.0, 4.0, 8.0);
        let prof = CrossProfile::solve(&field, &full.cross_section(), false, 1e-10).unwrap();
        let tf = TestFunction::new(TestKind::ExpDecay, TestParams::default(), &prof, &field).unwrap();
        assert!(matches!(tf.interpolate(&full), Err(Error::MeshMismatch(_))));
        assert!(TestFunction::new(TestKind::GeneralVl, TestParams::default(), &prof, &field).is_err());
        let other = mesh(DomainKind::FullCylinder, 2.0, 4.0, 16.0);
        let vl = TestFunction::new(TestKind::TildeVl, TestParams::default(), &prof, &field).unwrap();
        assert!(matches!(vl.interpolate(&other), Err(Error::MeshMismatch(_))));
        let glued = TestFunction::new(TestKind::GluedPhi, TestParams { ell0: 1.0, eta: 2.0, ..TestParams::default() }, &prof, &field).unwrap();
        assert!(matches!(glued.interpolate(&full), Err(Error::TooShort { .. })));
    }

    #[test]
    fn glued_phi_is_point_symmetric() {
        let field = CoefficientField::model(0.6).unwrap();
        let full = mesh(DomainKind::FullCylinder, 5.0, 4.0, 16.0);
        let prof = CrossProfile::solve(&field, &full.cross_section(), false, 1e-10).unwrap();
        assert!(prof.symmetrized);
        let tf = TestFunction::new(TestKind::GluedPhi, TestParams { ell0: 0.4, eta: 2.0, ..TestParams::default() }, &prof, &field).unwrap();
        let v = tf.interpolate(&full).unwrap();
        let perm = full.reflection_permutation().unwrap();
        for i in 0..v.len() {
            assert_eq!(v[i], v[perm[i]]);
        }
    }

    #[test]
    fn exp_decay_quotient_matches_closed_form() {
        // model field: the coupling integral vanishes, so the quotient tends to mu1 + eps^2
        let field = CoefficientField::model(0.6).unwrap();
        let eps = 0.5;
        let half = TensorMesh::build(DomainKind::HalfPlus, 24.0, &omega(), Resolution { axial: 16.0, cross: 32.0 }, 1).unwrap();
        let prof = CrossProfile::solve(&field, &half.cross_section(), false, 1e-10).unwrap();
        let tf = TestFunction::new(TestKind::ExpDecay, TestParams { eps, ..TestParams::default() }, &prof, &field).unwrap();
        let q = rayleigh_of_testfn(&tf, &half, &field).unwrap();
        let exact = FRAC_PI_2.powi(2) + eps * eps;
        assert!((q.quotient - exact).abs() < 5e-3, "{} vs {}", q.quotient, exact);
    }

    #[test]
    fn eigenvector_quotient_is_its_eigenvalue() {
        let field = CoefficientField::model(0.6).unwrap();
        let full = mesh(DomainKind::FullCylinder, 2.0, 4.0, 8.0);
        let pen = assemble_cylinder(&full, &field).unwrap();
        let u = first(&pen);
        let q = rayleigh_of_vector(&u.vector, &pen).unwrap();
        assert!((q.quotient - u.value).abs() < 1e-9);
        assert!(matches!(rayleigh_of_vector(&vec![0.0; u.vector.len()], &pen), Err(Error::ZeroFunction)));
    }

    /// Leading terms of the model-vl bound, by midpoint quadrature of the exact W1.
    fn model_vl_leading_terms(delta: f64, ell: f64, alpha_cut: f64) -> f64 {
        let w = ell.powf(alpha_cut).min(1.0);
        let n = 200_000;
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            let rho = ((1.0 - x.abs()) / w).min(1.0);
            let dw2 = (FRAC_PI_2 * (FRAC_PI_2 * x).sin()).powi(2);
            a += rho * rho * dw2;
            b += rho * dw2;
        }
        let h = 2.0 / n as f64;
        FRAC_PI_2.powi(2) + delta * delta * h * (a - 2.0 * b)
    }

    #[test]
    fn model_vl_small_ell_bound() {
        let field = CoefficientField::model(0.6).unwrap();
        let mut last = f64::INFINITY;
        for ell in [0.05, 0.01] {
            let full = TensorMesh::build(DomainKind::FullCylinder, ell, &omega(), Resolution { axial: 8.0 / ell, cross: 64.0 }, 1).unwrap();
            let prof = CrossProfile::solve(&field, &full.cross_section(), false, 1e-10).unwrap();
            let tf = TestFunction::new(TestKind::ModelVl, TestParams::default(), &prof, &field).unwrap();
            let q = rayleigh_of_testfn(&tf, &full, &field).unwrap().quotient;
            let lead = model_vl_leading_terms(0.6, ell, ALPHA_CUT);
            assert!(q >= lead - 1e-3 && q <= lead + 0.02, "l = {ell}: {q} vs {lead}");
            assert!(q < last);
            last = q;
        }
        // the cutoff only disappears as l -> 0, so the limit value 0.64 mu1 is approached from above
        assert!(last > 0.64 * FRAC_PI_2.powi(2));
        assert!(last < FRAC_PI_2.powi(2));
    }

    #[test]
    fn concentration_and_symmetry() {
        let field = CoefficientField::model(0.6).unwrap();
        let full = mesh(DomainKind::FullCylinder, 3.0, 4.0, 8.0);
        let pen = assemble_cylinder(&full, &field).unwrap();
        let u = first(&pen);
        let c = concentration_split(&u, &field, &full, &pen).unwrap();
        assert!(c.energy_defect < 1e-8);
        assert!(c.mass_defect < 1e-10);
        assert!((c.d_plus - 0.5).abs() < 1e-8);
        let d = symmetry_defect(&u.vector, &full, &pen).unwrap();
        assert!(d < 1e-7);
        let pu = reflect_vector(&u.vector, &full, &pen).unwrap();
        assert_eq!(symmetry_defect(&pu, &full, &pen).unwrap(), d);

        let asym = CoefficientField::asymmetric(0.6).unwrap();
        let pa = assemble_cylinder(&full, &asym).unwrap();
        let ua = first(&pa);
        assert!(symmetry_defect(&ua.vector, &full, &pa).unwrap() > 1e-3);
        let half = mesh(DomainKind::HalfPlus, 3.0, 4.0, 8.0);
        assert!(matches!(symmetry_defect(&ua.vector, &half, &pa), Err(Error::NoReflectionSymmetry(_))));
    }

    #[test]
    fn decay_of_separable_mode_is_flagged() {
        let field = CoefficientField::diagonal(&[1.0, 1.0], 1).unwrap();
        let full = mesh(DomainKind::FullCylinder, 8.0, 2.0, 8.0);
        let pen = assemble_cylinder(&full, &field).unwrap();
        let u = first(&pen);
        let d = decay_profile(&u, &full, &pen).unwrap();
        assert!(d.no_decay);
        assert!((d.alpha_fit - 1.0).abs() < 1e-6);
        for &(r, m) in &d.masses {
            assert!((m - r / 8.0).abs() < 1e-6);
        }
        let short = mesh(DomainKind::FullCylinder, 3.0, 2.0, 8.0);
        let ps = assemble_cylinder(&short, &field).unwrap();
        assert!(matches!(decay_profile(&first(&ps), &short, &ps), Err(Error::TooShort { .. })));
    }

    #[test]
    fn middle_third_window() {
        assert_eq!(middle_third(11), (3, 8));
        assert_eq!(middle_third(3), (0, 3));
        assert_eq!(middle_third(4), (0, 4));
    }

    #[test]
    fn end_profile_against_itself_is_zero() {
        let field = CoefficientField::model(0.6).unwrap();
        let half = mesh(DomainKind::HalfPlus, 4.0, 4.0, 8.0);
        let hp = assemble_cylinder(&half, &field).unwrap();
        let uh = first(&hp);
        // a full cylinder whose left half is exactly this half-cylinder
        let full = mesh(DomainKind::FullCylinder, 4.0, 4.0, 8.0);
        let fp = assemble_cylinder(&full, &field).unwrap();
        let nodal_h = hp.dofs.expand(&uh.vector);
        let nx = full.n_cross_nodes();
        let mut nodal_f = vec![0.0; full.n_nodes()];
        for j in 0..half.axis(0).len() {
            for c in 0..nx {
                nodal_f[j * nx + c] = nodal_h[j * nx + c];
            }
        }
        let fake = EigenPair { vector: fp.dofs.restrict(&nodal_f), ..uh.clone() };
        let d = end_profile_distance(&fake, &full, &fp, 1.0, &uh, &half, &hp, Side::Plus, 3.0).unwrap();
        assert!(d < 1e-14, "{d}");
        let minus = mesh(DomainKind::HalfMinus, 4.0, 4.0, 8.0);
        let mp = assemble_cylinder(&minus, &field).unwrap();
        assert!(end_profile_distance(&fake, &full, &fp, 1.0, &uh, &half, &hp, Side::Minus, 3.0).is_err());
        assert!(end_profile_distance(&fake, &full, &fp, 1.0, &first(&mp), &minus, &mp, Side::Minus, 3.0).is_ok());
    }

    #[test]
    fn bulk_fit_recovers_cosh() {
        let field = CoefficientField::model(0.6).unwrap();
        let full = mesh(DomainKind::FullCylinder, 9.0, 4.0, 8.0);
        let pen = assemble_cylinder(&full, &field).unwrap();
        let nx = full.n_cross_nodes();
        let nodal: Vec<f64> = (0..full.n_nodes())
            .map(|i| {
                let x = full.node_coords(i);
                (0.7 * x[0]).cosh() * (1.0 - x[1] * x[1])
            })
            .collect();
        let _ = nx;
        let fake = EigenPair { value: 0.0, vector: pen.dofs.restrict(&nodal), residual: 0.0, gap_to_next: None, degenerate: false, constant_sign: true };
        let fit = bulk_profile_fit(&fake, &full, &pen, 0.5).unwrap();
        assert!((fit.alpha - 0.7).abs() < 1e-6);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn picone_gap_checks_weight_and_mesh() {
        let field = CoefficientField::odd_coupling(0.5).unwrap();
        let half = mesh(DomainKind::HalfPlus, 4.0, 4.0, 8.0);
        let hp = assemble_cylinder(&half, &field).unwrap();
        let prof = CrossProfile::solve(&field, &half.cross_section(), false, 1e-10).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        let u = random_smooth_vector(&half, &hp, 4, &mut rng);
        let g = picone_gap(&u, &half, &hp, &prof, prof.eigenvalue()).unwrap();
        assert!(g.is_finite());
        let full = mesh(DomainKind::FullCylinder, 4.0, 4.0, 8.0);
        assert!(picone_gap(&u, &full, &hp, &prof, 1.0).is_err());
    }
}
