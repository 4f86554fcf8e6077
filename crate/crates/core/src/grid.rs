//! Tensor-product meshes over cylinders, half-cylinders, boxes and cross-sections.
//!
//! Axes are ordered with the p cylinder axes first and the cross-section axes
//! last. Nodes are numbered lexicographically with axis 0 slowest.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// (-l, l) x omega, Dirichlet on the lateral boundary, free at both ends.
    FullCylinder,
    /// (0, l) x omega, free at x1 = 0, Dirichlet at x1 = l.
    HalfPlus,
    /// (-l, 0) x omega, free at x1 = 0, Dirichlet at x1 = -l.
    HalfMinus,
    /// omega alone, Dirichlet on its boundary.
    CrossSection,
    /// (-l, l)^2 x omega.
    MultiDirection,
}

impl DomainKind {
    pub fn axial_dims(self) -> usize {
        match self {
            DomainKind::CrossSection => 0,
            DomainKind::MultiDirection => 2,
            _ => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DomainKind::FullCylinder => "full-cylinder",
            DomainKind::HalfPlus => "half-plus",
            DomainKind::HalfMinus => "half-minus",
            DomainKind::CrossSection => "cross-section",
            DomainKind::MultiDirection => "multi-direction",
        }
    }
}

/// Which half of a cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// An interval or box cross-section.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CrossSection {
    pub fn interval(a: f64, b: f64) -> Self {
        CrossSection { lo: vec![a], hi: vec![b] }
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Self {
        CrossSection { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Symmetric about the origin.
    pub fn is_symmetric(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(a, b)| *a == -*b)
    }

    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Cells per unit length along cylinder axes and across the section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub axial: f64,
    pub cross: f64,
}

/// Classification of a node for a given boundary policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeTag {
    Interior,
    Dirichlet,
    Free,
}

/// Which boundary parts carry the essential condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Lateral boundary (and half-cylinder far ends) Dirichlet, ends free.
    Mixed,
    /// Whole boundary Dirichlet.
    AllDirichlet,
    /// No essential condition anywhere (diagnostics only).
    Natural,
}

/// Numbering of the unconstrained nodes.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub policy: BoundaryPolicy,
    dof_of_node: Vec<usize>,
    node_of_dof: Vec<usize>,
}

impl DofMap {
    pub const NONE: usize = usize::MAX;

    pub fn len(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_of_dof.is_empty()
    }

    /// Dof index of a node, or `None` if it is constrained.
    pub fn dof(&self, node: usize) -> Option<usize> {
        let d = self.dof_of_node[node];
        (d != Self::NONE).then_some(d)
    }

    pub fn node(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    /// Expands a dof vector to all nodes, zero on constrained ones.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.len());
        let mut out = vec![0.0; self.dof_of_node.len()];
        for (d, &n) in self.node_of_dof.iter().enumerate() {
            out[n] = u[d];
        }
        out
    }

    /// Restricts a nodal vector to the dofs.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.node_of_dof.iter().map(|&n| nodal[n]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TensorMesh {
    kind: DomainKind,
    ell: f64,
    omega: CrossSection,
    resolution: Resolution,
    grading: usize,
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    n_nodes: usize,
    id: u64,
}

/// Nodes of (0, length), refined by `grading` within distance 1 of 0.
///
/// The partition of a shorter segment is a prefix of a longer one up to the
/// last node, so meshes of different lengths match near the graded end.
pub fn graded_segment(length: f64, res: f64, grading: usize) -> Vec<f64> {
    let a = length.min(1.0);
    let na = ((a * res).round() as usize).max(1) * grading.max(1);
    let mut s: Vec<f64> = (0..=na).map(|i| i as f64 * a / na as f64).collect();
    if length > a {
        let rest = length - a;
        let nb = ((rest * res).round() as usize).max(1);
        s.extend((1..=nb).map(|j| a + j as f64 * rest / nb as f64));
    }
    *s.last_mut().expect("nonempty") = length;
    s
}

/// Uniform partition of [a, b] with nodes placed symmetrically about the midpoint.
pub fn symmetric_partition(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut x: Vec<f64> = (0..=cells)
        .map(|i| c + (2.0 * i as f64 - cells as f64) * (hw / cells as f64))
        .collect();
    x[0] = a;
    x[cells] = b;
    x
}

fn full_axis(ell: f64, res: f64, grading: usize) -> Vec<f64> {
    let s = graded_segment(ell, res, grading);
    let n = s.len() - 1;
    let mut x: Vec<f64> = s.iter().map(|v| v - ell).collect();
    x.extend((0..n).rev().map(|k| ell - s[k]));
    x
}

impl TensorMesh {
    pub fn build(kind: DomainKind, ell: f64, omega: &CrossSection, res: Resolution, grading: usize) -> Result<Self> {
        Self::build_capped(kind, ell, omega, res, grading, DEFAULT_NODE_CAP)
    }

    pub fn build_capped(
        kind: DomainKind,
        ell: f64,
        omega: &CrossSection,
        res: Resolution,
        grading: usize,
        node_cap: usize,
    ) -> Result<Self> {
        if grading == 0 {
            return Err(Error::BadResolution("grading must be at least 1".into()));
        }
        if kind != DomainKind::CrossSection && !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::BadResolution(format!("half-length must be positive, got {ell}")));
        }
        if omega.dim() == 0 || omega.dim() > 2 || omega.lo.iter().zip(&omega.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::BadResolution("cross-section must be a nonempty interval or box".into()));
        }
        if !(res.axial > 0.0 && res.cross > 0.0) {
            return Err(Error::BadResolution("resolution must be positive".into()));
        }
        let p = kind.axial_dims();
        if p + omega.dim() > 3 {
            return Err(Error::DimensionMismatch("spatial dimension above 3".into()));
        }
        let mut counts = Vec::new();
        for k in 0..omega.dim() {
            let cells = ((omega.hi[k] - omega.lo[k]) * res.cross).round() as usize;
            if cells < 2 {
                return Err(Error::BadResolution(format!("cross-section axis {k} would have {cells} cells")));
            }
            counts.push(cells);
        }
        let axial: Option<Vec<f64>> = match kind {
            DomainKind::CrossSection => None,
            DomainKind::FullCylinder | DomainKind::MultiDirection => Some(full_axis(ell, res.axial, grading)),
            DomainKind::HalfPlus => Some(graded_segment(ell, res.axial, grading)),
            DomainKind::HalfMinus => Some(graded_segment(ell, res.axial, grading).iter().rev().map(|v| -v).collect()),
        };
        if let Some(ax) = &axial {
            if ax.len() < 3 {
                return Err(Error::BadResolution(format!("cylinder axis would have {} cells", ax.len() - 1)));
            }
        }
        let mut nodes: usize = 1;
        for _ in 0..p {
            nodes = nodes.saturating_mul(axial.as_ref().map_or(1, |a| a.len()));
        }
        for c in &counts {
            nodes = nodes.saturating_mul(c + 1);
        }
        if nodes > node_cap {
            return Err(Error::MemoryBudget { nodes, cap: node_cap });
        }
        let mut axes = Vec::new();
        for _ in 0..p {
            axes.push(axial.clone().expect("axial axis"));
        }
        for (k, &c) in counts.iter().enumerate() {
            axes.push(symmetric_partition(omega.lo[k], omega.hi[k], c));
        }
        Ok(Self::from_axes(kind, ell, omega.clone(), res, grading, axes))
    }

    fn from_axes(kind: DomainKind, ell: f64, omega: CrossSection, resolution: Resolution, grading: usize, axes: Vec<Vec<f64>>) -> Self {
        let n = axes.len();
        let mut strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
        let n_nodes = axes.iter().map(Vec::len).product();
        let mut h = DefaultHasher::new();
        kind.hash(&mut h);
        for ax in &axes {
            ax.len().hash(&mut h);
            for v in ax {
                v.to_bits().hash(&mut h);
            }
        }
        TensorMesh { kind, ell, omega, resolution, grading, axes, strides, n_nodes, id: h.finish() }
    }

    /// The cross-section mesh sharing this mesh's cross-section partition.
    pub fn cross_section(&self) -> TensorMesh {
        let axes = self.cross_axes().to_vec();
        Self::from_axes(DomainKind::CrossSection, 0.0, self.omega.clone(), self.resolution, 1, axes)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn omega(&self) -> &CrossSection {
        &self.omega
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn grading(&self) -> usize {
        self.grading
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Number of cylinder axes.
    pub fn p(&self) -> usize {
        self.kind.axial_dims()
    }

    /// Spatial dimension of the mesh.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn cross_axes(&self) -> &[Vec<f64>] {
        &self.axes[self.p()..]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.len() - 1).product()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi(&self, mut idx: usize) -> [usize; 3] {
        let mut m = [0; 3];
        for k in 0..self.dim() {
            m[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
        m
    }

    pub fn node_coords(&self, idx: usize) -> [f64; 3] {
        let m = self.node_multi(idx);
        let mut x = [0.0; 3];
        for k in 0..self.dim() {
            x[k] = self.axes[k][m[k]];
        }
        x
    }

    /// Index of the cross-section node under a mesh node.
    pub fn cross_node(&self, idx: usize) -> usize {
        let m = self.node_multi(idx);
        let p = self.p();
        let mut c = 0;
        for k in p..self.dim() {
            c = c * self.axes[k].len() + m[k];
        }
        c
    }

    pub fn n_cross_nodes(&self) -> usize {
        self.cross_axes().iter().map(Vec::len).product()
    }

    pub fn tag(&self, idx: usize, policy: BoundaryPolicy) -> NodeTag {
        let m = self.node_multi(idx);
        if policy == BoundaryPolicy::Natural {
            let on_boundary = (0..self.dim()).any(|k| m[k] == 0 || m[k] == self.axes[k].len() - 1);
            return if on_boundary { NodeTag::Free } else { NodeTag::Interior };
        }
        let p = self.p();
        let mut free = false;
        for k in 0..self.dim() {
            let last = self.axes[k].len() - 1;
            if m[k] != 0 && m[k] != last {
                continue;
            }
            if k >= p || policy == BoundaryPolicy::AllDirichlet {
                return NodeTag::Dirichlet;
            }
            let dirichlet_end = match self.kind {
                DomainKind::HalfPlus => m[k] == last,
                DomainKind::HalfMinus => m[k] == 0,
                _ => false,
            };
            if dirichlet_end {
                return NodeTag::Dirichlet;
            }
            free = true;
        }
        if free {
            NodeTag::Free
        } else {
            NodeTag::Interior
        }
    }

    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes).filter(|&i| self.tag(i, BoundaryPolicy::Mixed) == NodeTag::Dirichlet).collect()
    }

    pub fn free_boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes).filter(|&i| self.tag(i, BoundaryPolicy::Mixed) == NodeTag::Free).collect()
    }

    /// Dof numbering with the longest axis varying slowest, which keeps the profile narrow.
    pub fn dof_map(&self, policy: BoundaryPolicy) -> DofMap {
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.axes[b].len().cmp(&self.axes[a].len()).then(a.cmp(&b)));
        let mut dof_of_node = vec![DofMap::NONE; self.n_nodes];
        let mut node_of_dof = Vec::new();
        let lens: Vec<usize> = order.iter().map(|&k| self.axes[k].len()).collect();
        let mut counter = [0usize; 3];
        for _ in 0..self.n_nodes {
            let mut multi = [0usize; 3];
            for (j, &k) in order.iter().enumerate() {
                multi[k] = counter[j];
            }
            let node = self.node_index(&multi[..n]);
            if self.tag(node, policy) != NodeTag::Dirichlet {
                dof_of_node[node] = node_of_dof.len();
                node_of_dof.push(node);
            }
            for j in (0..n).rev() {
                counter[j] += 1;
                if counter[j] < lens[j] {
                    break;
                }
                counter[j] = 0;
            }
        }
        DofMap { policy, dof_of_node, node_of_dof }
    }

    /// Node permutation for (x, X2) -> (-x, -X2), when the mesh is point-symmetric.
    pub fn reflection_permutation(&self) -> Result<Vec<usize>> {
        if !matches!(self.kind, DomainKind::FullCylinder | DomainKind::MultiDirection | DomainKind::CrossSection) {
            return Err(Error::NoReflectionSymmetry(format!("{} mesh is not point-symmetric", self.kind.tag())));
        }
        for (k, ax) in self.axes.iter().enumerate() {
            let n = ax.len() - 1;
            let scale = ax[n].abs().max(ax[0].abs());
            for i in 0..=n {
                if (ax[i] + ax[n - i]).abs() > 1e-12 * scale {
                    return Err(Error::NoReflectionSymmetry(format!("axis {k} is not symmetric about 0")));
                }
            }
        }
        let dim = self.dim();
        Ok((0..self.n_nodes)
            .map(|i| {
                let m = self.node_multi(i);
                let mut r = [0usize; 3];
                for k in 0..dim {
                    r[k] = self.axes[k].len() - 1 - m[k];
                }
                self.node_index(&r[..dim])
            })
            .collect())
    }

    /// True when both meshes use identical cross-section partitions.
    pub fn same_cross_section(&self, other: &TensorMesh) -> bool {
        self.cross_axes() == other.cross_axes()
    }
}
