//! Stiffness and mass assembly with multilinear elements and 2-point Gauss quadrature.

use crate::coeff::{CoefficientField, SymMat};
use crate::error::{Error, Result};
use crate::grid::{BoundaryPolicy, DofMap, DomainKind, TensorMesh};
use crate::sparse::{FormKind, Provenance, SparseSymmetricForm};

const GAUSS_LO: f64 = 0.211_324_865_405_187_1;
const GAUSS_HI: f64 = 0.788_675_134_594_812_9;

/// Stiffness and mass forms over a common dof numbering.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub stiffness: SparseSymmetricForm,
    pub mass: SparseSymmetricForm,
    pub dofs: DofMap,
}

/// Which coefficient a cross-section assembly uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CrossCoef {
    A22,
    Schur,
}

/// Reference-element data for the n-linear element on [0,1]^n.
#[derive(Clone, Debug)]
pub(crate) struct ElementKernel {
    pub n: usize,
    pub n_loc: usize,
    pub n_quad: usize,
    /// Quadrature points in reference coordinates.
    pub points: Vec<[f64; 3]>,
    /// Basis values per (q, a).
    pub val: Vec<f64>,
    /// Reference derivatives per (q, a, k).
    pub dref: Vec<f64>,
}

impl ElementKernel {
    pub fn new(n: usize) -> Self {
        let n_loc = 1 << n;
        let n_quad = 1 << n;
        let mut points = Vec::with_capacity(n_quad);
        for q in 0..n_quad {
            let mut t = [0.0; 3];
            for (k, tk) in t.iter_mut().enumerate().take(n) {
                *tk = if (q >> (n - 1 - k)) & 1 == 1 { GAUSS_HI } else { GAUSS_LO };
            }
            points.push(t);
        }
        let mut val = vec![0.0; n_quad * n_loc];
        let mut dref = vec![0.0; n_quad * n_loc * n];
        for (q, t) in points.iter().enumerate() {
            for a in 0..n_loc {
                let bits: Vec<bool> = (0..n).map(|k| (a >> (n - 1 - k)) & 1 == 1).collect();
                let f: Vec<f64> = (0..n).map(|k| if bits[k] { t[k] } else { 1.0 - t[k] }).collect();
                val[q * n_loc + a] = f.iter().product();
                for k in 0..n {
                    let mut d = if bits[k] { 1.0 } else { -1.0 };
                    for (j, fj) in f.iter().enumerate() {
                        if j != k {
                            d *= fj;
                        }
                    }
                    dref[(q * n_loc + a) * n + k] = d;
                }
            }
        }
        ElementKernel { n, n_loc, n_quad, points, val, dref }
    }

    /// Local corner offset of basis function a along axis k.
    pub fn corner(&self, a: usize, k: usize) -> usize {
        (a >> (self.n - 1 - k)) & 1
    }
}

/// Coefficient matrices at every cross-section quadrature point.
pub(crate) struct CoefCache {
    d: usize,
    n_quad_cross: usize,
    cross_lens: Vec<usize>,
    mats: Vec<SymMat>,
}

impl CoefCache {
    fn build(mesh: &TensorMesh, eval: &dyn Fn(&[f64]) -> Result<SymMat>, midpoint: bool) -> Result<Self> {
        let cross = mesh.cross_axes();
        let d = cross.len();
        let cross_lens: Vec<usize> = cross.iter().map(|a| a.len() - 1).collect();
        let n_cells: usize = cross_lens.iter().product();
        let n_quad_cross = 1 << d;
        let mut mats = Vec::with_capacity(n_cells * n_quad_cross);
        for c in 0..n_cells {
            let cm = unflatten(c, &cross_lens);
            let mid: Vec<f64> = (0..d).map(|k| 0.5 * (cross[k][cm[k]] + cross[k][cm[k] + 1])).collect();
            let at_mid = if midpoint { Some(checked(eval, &mid)?) } else { None };
            for q in 0..n_quad_cross {
                if let Some(m) = at_mid {
                    mats.push(m);
                    continue;
                }
                let x: Vec<f64> = (0..d)
                    .map(|k| {
                        let t = if (q >> (d - 1 - k)) & 1 == 1 { GAUSS_HI } else { GAUSS_LO };
                        cross[k][cm[k]] + t * (cross[k][cm[k] + 1] - cross[k][cm[k]])
                    })
                    .collect();
                mats.push(checked(eval, &x)?);
            }
        }
        Ok(CoefCache { d, n_quad_cross, cross_lens, mats })
    }

    fn get(&self, cell_multi: &[usize], p: usize, q: usize, n: usize) -> &SymMat {
        let mut c = 0;
        for k in 0..self.d {
            c = c * self.cross_lens[k] + cell_multi[p + k];
        }
        // cross bits are the low d bits of the full quadrature index
        let qc = q & (self.n_quad_cross - 1);
        debug_assert!(n >= self.d);
        &self.mats[c * self.n_quad_cross + qc]
    }
}

fn checked(eval: &dyn Fn(&[f64]) -> Result<SymMat>, x: &[f64]) -> Result<SymMat> {
    let m = eval(x)?;
    let lo = m.eigenvalues()[0];
    if !(lo > 0.0) {
        return Err(Error::NotElliptic { min_eig: lo, location: x.to_vec() });
    }
    Ok(m)
}

pub(crate) fn unflatten(mut idx: usize, lens: &[usize]) -> Vec<usize> {
    let mut m = vec![0; lens.len()];
    for k in (0..lens.len()).rev() {
        m[k] = idx % lens[k];
        idx /= lens[k];
    }
    m
}

/// Visits every cell with its multi-index, lower corner node and sizes.
pub(crate) fn for_each_cell(mesh: &TensorMesh, mut f: impl FnMut(&[usize], usize, &[f64; 3])) {
    let n = mesh.dim();
    let lens: Vec<usize> = mesh.axes().iter().map(|a| a.len() - 1).collect();
    let total: usize = lens.iter().product();
    let mut m = vec![0usize; n];
    for _ in 0..total {
        let mut h = [0.0; 3];
        for k in 0..n {
            h[k] = mesh.axis(k)[m[k] + 1] - mesh.axis(k)[m[k]];
        }
        f(&m, mesh.node_index(&m), &h);
        for k in (0..n).rev() {
            m[k] += 1;
            if m[k] < lens[k] {
                break;
            }
            m[k] = 0;
        }
    }
}

fn local_nodes(mesh: &TensorMesh, kernel: &ElementKernel, base: usize) -> Vec<usize> {
    let strides = mesh.strides();
    (0..kernel.n_loc)
        .map(|a| base + (0..kernel.n).map(|k| kernel.corner(a, k) * strides[k]).sum::<usize>())
        .collect()
}

fn pattern(mesh: &TensorMesh, dofs: &DofMap) -> (Vec<usize>, Vec<usize>) {
    let n = mesh.dim();
    let offsets: Vec<Vec<isize>> = (0..3usize.pow(n as u32))
        .map(|mut o| {
            let mut v = vec![0isize; n];
            for vk in v.iter_mut().rev() {
                *vk = (o % 3) as isize - 1;
                o /= 3;
            }
            v
        })
        .collect();
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut cols = Vec::with_capacity(offsets.len());
    for i in 0..dofs.len() {
        let node = dofs.node(i);
        let m = mesh.node_multi(node);
        cols.clear();
        for off in &offsets {
            let mut ok = true;
            let mut nb = [0usize; 3];
            for k in 0..n {
                let v = m[k] as isize + off[k];
                if v < 0 || v >= mesh.axis(k).len() as isize {
                    ok = false;
                    break;
                }
                nb[k] = v as usize;
            }
            if !ok {
                continue;
            }
            if let Some(j) = dofs.dof(mesh.node_index(&nb[..n])) {
                if j <= i {
                    cols.push(j);
                }
            }
        }
        cols.sort_unstable();
        col_idx.extend_from_slice(&cols);
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx)
}

fn assemble_generic(
    mesh: &TensorMesh,
    policy: BoundaryPolicy,
    eval: &dyn Fn(&[f64]) -> Result<SymMat>,
    midpoint: bool,
    label: String,
) -> Result<Pencil> {
    let n = mesh.dim();
    let dofs = mesh.dof_map(policy);
    if dofs.is_empty() {
        return Err(Error::BadResolution("mesh has no free nodes".into()));
    }
    let cache = CoefCache::build(mesh, eval, midpoint)?;
    let (row_ptr, col_idx) = pattern(mesh, &dofs);
    let quadrature = if midpoint { "gauss2-midpoint-coefficient" } else { "gauss2" };
    let prov = Provenance { mesh_id: mesh.id(), field: label, quadrature };
    let mut k_form = SparseSymmetricForm::with_pattern(row_ptr.clone(), col_idx.clone(), FormKind::Stiffness, prov.clone());
    let mut m_form = SparseSymmetricForm::with_pattern(row_ptr, col_idx, FormKind::Mass, prov);
    let kernel = ElementKernel::new(n);
    let p = mesh.p();
    let nl = kernel.n_loc;
    let mut ke = vec![0.0; nl * nl];
    let mut me = vec![0.0; nl * nl];
    let mut grads = vec![[0.0; 3]; nl];
    for_each_cell(mesh, |cm, base, h| {
        let w: f64 = h[..n].iter().product::<f64>() / kernel.n_quad as f64;
        ke.iter_mut().for_each(|v| *v = 0.0);
        me.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..kernel.n_quad {
            let a_q = cache.get(cm, p, q, n);
            for (a, g) in grads.iter_mut().enumerate() {
                for k in 0..n {
                    g[k] = kernel.dref[(q * nl + a) * n + k] / h[k];
                }
            }
            for a in 0..nl {
                let va = kernel.val[q * nl + a];
                let ag = a_q.apply(&grads[a][..n]);
                for b in 0..=a {
                    let s: f64 = (0..n).map(|k| ag[k] * grads[b][k]).sum();
                    ke[a * nl + b] += w * s;
                    me[a * nl + b] += w * va * kernel.val[q * nl + b];
                }
            }
        }
        let nodes = local_nodes(mesh, &kernel, base);
        for a in 0..nl {
            let Some(da) = dofs.dof(nodes[a]) else { continue };
            for b in 0..=a {
                let Some(db) = dofs.dof(nodes[b]) else { continue };
                let (i, j) = if da >= db { (da, db) } else { (db, da) };
                let pos = k_form.position(i, j).expect("pattern covers element couplings");
                k_form.add_at(pos, ke[a * nl + b]);
                m_form.add_at(pos, me[a * nl + b]);
            }
        }
    });
    Ok(Pencil { stiffness: k_form, mass: m_form, dofs })
}

fn check_cylinder(mesh: &TensorMesh, field: &CoefficientField) -> Result<()> {
    if mesh.kind() == DomainKind::CrossSection {
        return Err(Error::DimensionMismatch("cylinder assembly needs a cylinder mesh".into()));
    }
    if field.n() != mesh.dim() || field.p() != mesh.p() {
        return Err(Error::DimensionMismatch(format!(
            "field (n={}, p={}) on a mesh of dimension {} with {} cylinder axes",
            field.n(),
            field.p(),
            mesh.dim(),
            mesh.p()
        )));
    }
    Ok(())
}

/// Mixed problem on a cylinder, half-cylinder or box.
pub fn assemble_cylinder(mesh: &TensorMesh, field: &CoefficientField) -> Result<Pencil> {
    check_cylinder(mesh, field)?;
    assemble_with_policy(mesh, field, BoundaryPolicy::Mixed)
}

/// Dirichlet problem on the whole boundary of a cylinder.
pub fn assemble_dirichlet_cylinder(mesh: &TensorMesh, field: &CoefficientField) -> Result<Pencil> {
    check_cylinder(mesh, field)?;
    if !matches!(mesh.kind(), DomainKind::FullCylinder | DomainKind::MultiDirection) {
        return Err(Error::DimensionMismatch("Dirichlet comparison needs a full cylinder".into()));
    }
    assemble_with_policy(mesh, field, BoundaryPolicy::AllDirichlet)
}

/// Cylinder assembly with an explicit boundary policy.
pub fn assemble_with_policy(mesh: &TensorMesh, field: &CoefficientField, policy: BoundaryPolicy) -> Result<Pencil> {
    check_cylinder(mesh, field)?;
    let eval = |x: &[f64]| Ok(field.eval(x));
    assemble_generic(mesh, policy, &eval, field.is_piecewise_constant(), field.label())
}

/// Cross-section problem with coefficient A22, or with the Schur complement when `reduced`.
pub fn assemble_cross_section(mesh: &TensorMesh, field: &CoefficientField, reduced: bool) -> Result<Pencil> {
    if mesh.kind() != DomainKind::CrossSection {
        return Err(Error::DimensionMismatch("cross-section assembly needs a cross-section mesh".into()));
    }
    if field.cross_dim() != mesh.dim() {
        return Err(Error::DimensionMismatch(format!(
            "field cross-section dimension {} on a {}-dimensional mesh",
            field.cross_dim(),
            mesh.dim()
        )));
    }
    let mode = if reduced { CrossCoef::Schur } else { CrossCoef::A22 };
    let p = field.p();
    let eval = move |x: &[f64]| -> Result<SymMat> {
        match mode {
            CrossCoef::Schur => field.schur_reduce(x),
            CrossCoef::A22 => {
                let a = field.eval(x);
                let idx: Vec<usize> = (p..field.n()).collect();
                Ok(a.restrict(&idx))
            }
        }
    };
    let label = format!("{}:{}", field.label(), if reduced { "schur" } else { "a22" });
    assemble_generic(mesh, BoundaryPolicy::Mixed, &eval, field.is_piecewise_constant(), label)
}

/// Integrals of a nodal function over the quadrature points selected by `region`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Integrals {
    /// int A grad u . grad u (zero when no field is given)
    pub energy: f64,
    /// int u^2
    pub mass: f64,
    /// int |grad u|^2
    pub grad_sq: f64,
}

/// Quadrature of energy, mass and gradient norm over points where `region(x)` holds.
///
/// Uses exactly the quadrature of the assembly, so summing complementary
/// regions reproduces u^T K u and u^T M u.
pub fn integrate_region(
    mesh: &TensorMesh,
    field: Option<&CoefficientField>,
    u_nodal: &[f64],
    region: &dyn Fn(&[f64]) -> bool,
) -> Result<Integrals> {
    let bins = integrate_bins(mesh, field, u_nodal, 1, &|x: &[f64]| region(x).then_some(0))?;
    Ok(bins[0])
}

/// Like `integrate_region`, accumulating each quadrature point into the bin `bin(x)` selects.
pub fn integrate_bins(
    mesh: &TensorMesh,
    field: Option<&CoefficientField>,
    u_nodal: &[f64],
    n_bins: usize,
    bin: &dyn Fn(&[f64]) -> Option<usize>,
) -> Result<Vec<Integrals>> {
    if u_nodal.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch(format!("nodal vector has {} entries, mesh has {} nodes", u_nodal.len(), mesh.n_nodes())));
    }
    let n = mesh.dim();
    let cache = match field {
        Some(f) => {
            check_cylinder(mesh, f)?;
            let eval = |x: &[f64]| Ok(f.eval(x));
            Some(CoefCache::build(mesh, &eval, f.is_piecewise_constant())?)
        }
        None => None,
    };
    let kernel = ElementKernel::new(n);
    let nl = kernel.n_loc;
    let p = mesh.p();
    let mut out = vec![Integrals::default(); n_bins];
    let mut x = [0.0; 3];
    for_each_cell(mesh, |cm, base, h| {
        let nodes = local_nodes(mesh, &kernel, base);
        let w: f64 = h[..n].iter().product::<f64>() / kernel.n_quad as f64;
        for q in 0..kernel.n_quad {
            for k in 0..n {
                x[k] = mesh.axis(k)[cm[k]] + kernel.points[q][k] * h[k];
            }
            let Some(b) = bin(&x[..n]).filter(|&b| b < n_bins) else { continue };
            let out = &mut out[b];
            let mut uq = 0.0;
            let mut g = [0.0; 3];
            for a in 0..nl {
                let ua = u_nodal[nodes[a]];
                uq += ua * kernel.val[q * nl + a];
                for k in 0..n {
                    g[k] += ua * kernel.dref[(q * nl + a) * n + k] / h[k];
                }
            }
            out.mass += w * uq * uq;
            out.grad_sq += w * (0..n).map(|k| g[k] * g[k]).sum::<f64>();
            if let Some(c) = &cache {
                out.energy += w * c.get(cm, p, q, n).form(&g[..n]);
            }
        }
    });
    Ok(out)
}

/// Value and gradient of a nodal function at a cell centre.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CellSample {
    pub centre: [f64; 3],
    pub vol: f64,
    pub value: f64,
    pub grad: [f64; 3],
}

pub(crate) fn cell_midpoints(mesh: &TensorMesh, u_nodal: &[f64]) -> Vec<CellSample> {
    let n = mesh.dim();
    let kernel = ElementKernel::new(n);
    let mut out = Vec::with_capacity(mesh.n_cells());
    for_each_cell(mesh, |cm, base, h| {
        let nodes = local_nodes(mesh, &kernel, base);
        let mut s = CellSample { centre: [0.0; 3], vol: h[..n].iter().product(), value: 0.0, grad: [0.0; 3] };
        for k in 0..n {
            s.centre[k] = mesh.axis(k)[cm[k]] + 0.5 * h[k];
        }
        let w = 0.5f64.powi(n as i32);
        for (a, &node) in nodes.iter().enumerate() {
            let ua = u_nodal[node];
            s.value += w * ua;
            for k in 0..n {
                let d = if kernel.corner(a, k) == 1 { 2.0 * w } else { -2.0 * w };
                s.grad[k] += ua * d / h[k];
            }
        }
        out.push(s);
    });
    out
}

/// Cross-section gradient of a nodal function, averaged to the nodes with cell-measure weights.
pub fn nodal_gradient(mesh: &TensorMesh, u_nodal: &[f64]) -> Vec<[f64; 3]> {
    let n = mesh.dim();
    let kernel = ElementKernel::new(n);
    let nl = kernel.n_loc;
    let mut acc = vec![[0.0; 3]; mesh.n_nodes()];
    let mut wsum = vec![0.0; mesh.n_nodes()];
    for_each_cell(mesh, |_, base, h| {
        let nodes = local_nodes(mesh, &kernel, base);
        let vol: f64 = h[..n].iter().product();
        let mut g = [0.0; 3];
        // gradient at the cell centre
        for a in 0..nl {
            let ua = u_nodal[nodes[a]];
            for k in 0..n {
                let mut d = if kernel.corner(a, k) == 1 { 1.0 } else { -1.0 };
                d *= 0.5f64.powi(n as i32 - 1);
                g[k] += ua * d / h[k];
            }
        }
        for &node in &nodes {
            for k in 0..n {
                acc[node][k] += vol * g[k];
            }
            wsum[node] += vol;
        }
    });
    for (a, w) in acc.iter_mut().zip(&wsum) {
        for v in a.iter_mut() {
            *v /= w;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CrossSection, Resolution};
    use crate::sparse::SkylineCholesky;

    fn omega() -> CrossSection {
        CrossSection::interval(-1.0, 1.0)
    }

    fn cross(res: f64) -> TensorMesh {
        TensorMesh::build(DomainKind::CrossSection, 0.0, &omega(), Resolution { axial: 1.0, cross: res }, 1).unwrap()
    }

    #[test]
    fn one_dimensional_stencils() {
        let m = cross(2.0);
        let f = CoefficientField::identity(2, 1).unwrap();
        let pen = assemble_cross_section(&m, &f, false).unwrap();
        let k = pen.stiffness.to_dense();
        let mm = pen.mass.to_dense();
        // h = 1/2, three free nodes
        assert_eq!(k.nrows(), 3);
        assert!((k[(1, 1)] - 4.0).abs() < 1e-14);
        assert!((k[(1, 0)] + 2.0).abs() < 1e-14);
        assert!((mm[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((mm[(1, 0)] - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn mass_of_ones_matches_closed_form() {
        let r = Resolution { axial: 4.0, cross: 8.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 1.5, &omega(), r, 1).unwrap();
        let pen = assemble_cylinder(&m, &CoefficientField::model(0.3).unwrap()).unwrap();
        let ones = vec![1.0; pen.dofs.len()];
        let h = 1.0 / 8.0;
        let expect = 3.0 * (2.0 - 4.0 * h / 3.0);
        assert!((pen.mass.quad(&ones) - expect).abs() < 1e-12);
    }

    #[test]
    fn natural_mass_row_sums_total_measure() {
        let r = Resolution { axial: 4.0, cross: 4.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 2.0, &omega(), r, 2).unwrap();
        let pen = assemble_with_policy(&m, &CoefficientField::identity(2, 1).unwrap(), BoundaryPolicy::Natural).unwrap();
        let sums = pen.mass.apply(&vec![1.0; pen.dofs.len()]);
        assert!(sums.iter().all(|v| *v > 0.0));
        let total: f64 = sums.iter().sum();
        assert!((total - 8.0).abs() < 1e-10 * 8.0);
    }

    #[test]
    fn diagonal_field_reduced_equals_unreduced() {
        let m = cross(16.0);
        let f = CoefficientField::diagonal(&[2.0, 3.0], 1).unwrap();
        let a = assemble_cross_section(&m, &f, false).unwrap();
        let b = assemble_cross_section(&m, &f, true).unwrap();
        assert_eq!(a.stiffness.values(), b.stiffness.values());
        assert_eq!(a.mass.values(), b.mass.values());
    }

    #[test]
    fn separable_energy_of_cross_profile() {
        // u(x1, x2) = cos(pi x2 / 2): no x1 dependence, so the coupling terms vanish.
        let r = Resolution { axial: 8.0, cross: 64.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 1).unwrap();
        let pen = assemble_cylinder(&m, &CoefficientField::model(0.6).unwrap()).unwrap();
        let nodal: Vec<f64> = (0..m.n_nodes()).map(|i| (std::f64::consts::FRAC_PI_2 * m.node_coords(i)[1]).cos()).collect();
        let u = pen.dofs.restrict(&nodal);
        let e = pen.stiffness.quad(&u);
        let mu = std::f64::consts::FRAC_PI_2.powi(2);
        assert!((e - 2.0 * mu).abs() < 2e-3, "energy {e}");
    }

    #[test]
    fn integrate_region_reproduces_forms() {
        let r = Resolution { axial: 4.0, cross: 8.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 2.0, &omega(), r, 2).unwrap();
        let f = CoefficientField::asymmetric(0.4).unwrap();
        let pen = assemble_cylinder(&m, &f).unwrap();
        let u: Vec<f64> = (0..pen.dofs.len()).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let nodal = pen.dofs.expand(&u);
        let left = integrate_region(&m, Some(&f), &nodal, &|x| x[0] < 0.0).unwrap();
        let right = integrate_region(&m, Some(&f), &nodal, &|x| x[0] >= 0.0).unwrap();
        let k = pen.stiffness.quad(&u);
        let mm = pen.mass.quad(&u);
        assert!((left.energy + right.energy - k).abs() < 1e-11 * k);
        assert!((left.mass + right.mass - mm).abs() < 1e-12 * mm);
    }

    #[test]
    fn stiffness_is_reflection_invariant_under_evenness() {
        let r = Resolution { axial: 4.0, cross: 8.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 2).unwrap();
        let pen = assemble_cylinder(&m, &CoefficientField::model_variable_a22(0.6, 0.25).unwrap()).unwrap();
        let perm = m.reflection_permutation().unwrap();
        let d = &pen.dofs;
        let dense = pen.stiffness.to_dense();
        for i in 0..d.len() {
            let pi = d.dof(perm[d.node(i)]).unwrap();
            for j in 0..d.len() {
                let pj = d.dof(perm[d.node(j)]).unwrap();
                assert!((dense[(i, j)] - dense[(pi, pj)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forms_are_positive_definite() {
        let r = Resolution { axial: 4.0, cross: 4.0 };
        for kind in [DomainKind::FullCylinder, DomainKind::HalfPlus, DomainKind::HalfMinus] {
            let m = TensorMesh::build(kind, 2.0, &omega(), r, 2).unwrap();
            let pen = assemble_cylinder(&m, &CoefficientField::model(0.9).unwrap()).unwrap();
            SkylineCholesky::factor(&pen.stiffness, None).unwrap();
            SkylineCholesky::factor(&pen.mass, None).unwrap();
        }
    }

    #[test]
    fn dimension_mismatch() {
        let r = Resolution { axial: 4.0, cross: 4.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 1).unwrap();
        assert!(matches!(assemble_cylinder(&m, &CoefficientField::model_3d(0.5).unwrap()), Err(Error::DimensionMismatch(_))));
        assert!(assemble_cross_section(&m, &CoefficientField::model(0.5).unwrap(), false).is_err());
    }

    #[test]
    fn non_elliptic_table_aborts_assembly() {
        let f = CoefficientField::from_table_str("-1 0 1 0 1\n0 1 1 2 1", 2, 1, "bad").unwrap();
        let r = Resolution { axial: 4.0, cross: 4.0 };
        let m = TensorMesh::build(DomainKind::FullCylinder, 1.0, &omega(), r, 1).unwrap();
        assert!(matches!(assemble_cylinder(&m, &f), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn nodal_gradient_of_linear_function_is_exact() {
        let m = cross(8.0);
        let u: Vec<f64> = (0..m.n_nodes()).map(|i| 3.0 * m.node_coords(i)[0] - 1.0).collect();
        for g in nodal_gradient(&m, &u) {
            assert!((g[0] - 3.0).abs() < 1e-12);
        }
    }
}
