//! Plane-strain anisotropic linear elasticity with pure traction data:
//! P1/P2 triangles, rigid-motion handling by a three-row Lagrange constraint
//! block, and the normalization that fixes zero boundary mean and zero
//! integrated spin.
//!
//! Pure-Neumann stiffness matrices have exactly the three rigid motions as
//! kernel. Solves go through a bordered system `[[K, C],[Cᵀ, 0]]` where the
//! constraint columns are the two boundary-mean functionals and the
//! integrated-spin functional — the normalization conditions themselves.
//! Because the rigid motions are not annihilated by these functionals, the
//! multiplier block removes the kernel; it also absorbs any incompatible
//! load component (a point load's torque gap becomes a rigid-motion-
//! generating correction of the data). Constraining with the normalization
//! functionals directly, rather than with rigid-motion orthogonality plus a
//! post-projection, is what makes the displacement representation identity
//! hold discretely with no correction term: the difference of any two
//! solves satisfies the constraint functionals exactly, so pairing it with
//! a kernel column leaves only the point value. A closed-form rigid
//! correction still runs after each solve to pin the two integrals to
//! exact zeros of the discrete quadratures.

// indexed loops mirror the matrix formulas throughout this module
#![allow(clippy::needless_range_loop)]

use crate::error::{LabError, Result};
use crate::mesh::{Mesh, Region};
use crate::sparse::{nested_dissection, LdltFactor, SparseSym, SymTriplets};
use emt_core::tensor::{SymMat2, Tensor4};
use emt_core::Vec2;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Relative tolerance for the rigid-motion compatibility of load data.
pub const COMPAT_TOL: f64 = 1e-6;

/// Relative tolerance on the linear-system residual after refinement.
const RESIDUAL_TOL: f64 = 1e-8;

// degree-2 rule, weights sum to 1 (multiply by element area)
const QUAD_DEG2: [(f64, f64, f64); 3] = [
    (1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0),
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0),
];

// degree-5 rule (7 points)
fn quad_deg5() -> [(f64, f64, f64); 7] {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    [
        (1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0),
        (a, a, wa),
        (1.0 - 2.0 * a, a, wa),
        (a, 1.0 - 2.0 * a, wa),
        (b, b, wb),
        (1.0 - 2.0 * b, b, wb),
        (b, 1.0 - 2.0 * b, wb),
    ]
}

// 3-point Gauss on [0,1]
const EDGE_GAUSS: [(f64, f64); 3] = [
    (0.11270166537925831, 0.2777777777777778),
    (0.5, 0.4444444444444444),
    (0.8872983346207417, 0.2777777777777778),
];

/// Finite element space on a mesh: P1 (vertices) or P2 (vertices plus edge
/// midpoints).
pub struct FeSpace {
    pub mesh: Mesh,
    pub order: u8,
    /// All dof nodes (mesh vertices first, then midside nodes for P2).
    pub nodes: Vec<Vec2>,
    /// Per-element dof node lists (3 or 6 entries).
    pub elems: Vec<Vec<usize>>,
    /// Per boundary edge: dof nodes along the edge (2 or 3 entries, endpoint,
    /// [midpoint,] endpoint), plus the outward normal and length.
    pub bedges: Vec<(Vec<usize>, Vec2, f64)>,
    locator: Locator,
}

impl FeSpace {
    pub fn new(mesh: Mesh, order: u8) -> Result<Arc<FeSpace>> {
        if order != 1 && order != 2 {
            return Err(LabError::Config("element order must be 1 or 2".into()));
        }
        let mut nodes = mesh.nodes.clone();
        let mut elems: Vec<Vec<usize>> = Vec::with_capacity(mesh.triangles.len());
        let mut edge_mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &mesh.triangles {
            let mut dofs = vec![t[0], t[1], t[2]];
            if order == 2 {
                for k in 0..3 {
                    let a = t[k];
                    let b = t[(k + 1) % 3];
                    let key = (a.min(b), a.max(b));
                    let mid = *edge_mid.entry(key).or_insert_with(|| {
                        nodes.push((mesh.nodes[a] + mesh.nodes[b]) * 0.5);
                        nodes.len() - 1
                    });
                    dofs.push(mid);
                }
            }
            elems.push(dofs);
        }
        let mut bedges = Vec::with_capacity(mesh.boundary.len());
        for e in &mesh.boundary {
            let [a, b] = e.nodes;
            let mut list = vec![a];
            if order == 2 {
                let key = (a.min(b), a.max(b));
                list.push(*edge_mid.get(&key).ok_or(LabError::MeshMismatch)?);
            }
            list.push(b);
            bedges.push((list, e.normal, e.length));
        }
        let locator = Locator::new(&mesh);
        Ok(Arc::new(FeSpace { mesh, order, nodes, elems, bedges, locator }))
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    fn local_count(&self) -> usize {
        if self.order == 2 {
            6
        } else {
            3
        }
    }

    /// Shape function values at reference coordinates.
    fn shapes(&self, xi: f64, eta: f64, out: &mut [f64]) {
        let l0 = 1.0 - xi - eta;
        let (l1, l2) = (xi, eta);
        if self.order == 1 {
            out[0] = l0;
            out[1] = l1;
            out[2] = l2;
        } else {
            out[0] = l0 * (2.0 * l0 - 1.0);
            out[1] = l1 * (2.0 * l1 - 1.0);
            out[2] = l2 * (2.0 * l2 - 1.0);
            out[3] = 4.0 * l0 * l1;
            out[4] = 4.0 * l1 * l2;
            out[5] = 4.0 * l2 * l0;
        }
    }

    /// Reference-space shape gradients at reference coordinates.
    fn shape_grads_ref(&self, xi: f64, eta: f64, out: &mut [Vec2]) {
        let l0 = 1.0 - xi - eta;
        let (l1, l2) = (xi, eta);
        let g0 = Vec2::new(-1.0, -1.0);
        let g1 = Vec2::new(1.0, 0.0);
        let g2 = Vec2::new(0.0, 1.0);
        if self.order == 1 {
            out[0] = g0;
            out[1] = g1;
            out[2] = g2;
        } else {
            out[0] = g0 * (4.0 * l0 - 1.0);
            out[1] = g1 * (4.0 * l1 - 1.0);
            out[2] = g2 * (4.0 * l2 - 1.0);
            out[3] = (g0 * l1 + g1 * l0) * 4.0;
            out[4] = (g1 * l2 + g2 * l1) * 4.0;
            out[5] = (g2 * l0 + g0 * l2) * 4.0;
        }
    }

    /// Element geometry: vertex positions, area, and inverse-transpose
    /// Jacobian application mapping reference gradients to physical ones.
    fn geometry(&self, e: usize) -> (Vec2, [[f64; 2]; 2], f64) {
        let t = &self.mesh.triangles[e];
        let p0 = self.mesh.nodes[t[0]];
        let p1 = self.mesh.nodes[t[1]];
        let p2 = self.mesh.nodes[t[2]];
        let j = [[p1.x - p0.x, p2.x - p0.x], [p1.y - p0.y, p2.y - p0.y]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // inverse transpose of J
        let jit = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        (p0, jit, 0.5 * det)
    }

    fn physical_grads(&self, e: usize, xi: f64, eta: f64, out: &mut [Vec2]) {
        let (_, jit, _) = self.geometry(e);
        self.shape_grads_ref(xi, eta, out);
        for g in out.iter_mut() {
            *g = Vec2::new(jit[0][0] * g.x + jit[0][1] * g.y, jit[1][0] * g.x + jit[1][1] * g.y);
        }
    }

    pub fn boundary_length(&self) -> f64 {
        self.bedges.iter().map(|(_, _, l)| l).sum()
    }

    pub fn area(&self) -> f64 {
        self.mesh.area()
    }

    /// Locates the element containing `p` and its reference coordinates.
    pub fn locate(&self, p: Vec2) -> Option<(usize, f64, f64)> {
        self.locator.locate(&self.mesh, p)
    }

    /// Discrete rigid-motion vectors (nodal interpolation, interleaved dofs).
    fn rigid_vectors(&self) -> [Vec<f64>; 3] {
        let n = self.nodes.len();
        let mut r0 = vec![0.0; 2 * n];
        let mut r1 = vec![0.0; 2 * n];
        let mut r2 = vec![0.0; 2 * n];
        for (i, p) in self.nodes.iter().enumerate() {
            r0[2 * i] = 1.0;
            r1[2 * i + 1] = 1.0;
            r2[2 * i] = -p.y;
            r2[2 * i + 1] = p.x;
        }
        [r0, r1, r2]
    }
}

/// Point-location accelerator: uniform grid of candidate triangle lists.
struct Locator {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Locator {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &mesh.nodes {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let target = (mesh.triangles.len() as f64).sqrt().ceil().max(4.0) as usize;
        let cell = span / target as f64;
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let (mut tlo, mut thi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
            for &v in t {
                tlo.x = tlo.x.min(mesh.nodes[v].x);
                tlo.y = tlo.y.min(mesh.nodes[v].y);
                thi.x = thi.x.max(mesh.nodes[v].x);
                thi.y = thi.y.max(mesh.nodes[v].y);
            }
            let i0 = (((tlo.x - lo.x) / cell).floor().max(0.0)) as usize;
            let j0 = (((tlo.y - lo.y) / cell).floor().max(0.0)) as usize;
            let i1 =   (((thi.x - lo.x) / cell).floor()) as usize;
            let j1 = (((thi.y - lo.y) / cell).floor()) as usize;
            for j in j0..=j1.min(ny - 1) {
                for i in i0..=i1.min(nx - 1) {
                    cells[j * nx + i].push(ti);
                }
            }
        }
        Locator { lo, cell, nx, ny, cells }
    }

    fn locate(&self, mesh: &Mesh, p: Vec2) -> Option<(usize, f64, f64)> {
        let ix = (((p.x - self.lo.x) / self.cell).floor()).clamp(0.0, (self.nx - 1) as f64) as usize;
        let iy = (((p.y - self.lo.y) / self.cell).floor()).clamp(0.0, (self.ny - 1) as f64) as usize;
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for ring in 0..=2usize {
            let lo_i = ix.saturating_sub(ring);
            let hi_i = (ix + ring).min(self.nx - 1);
            let lo_j = iy.saturating_sub(ring);
            let hi_j = (iy + ring).min(self.ny - 1);
            for j in lo_j..=hi_j {
                for i in lo_i..=hi_i {
                    if ring > 0 && i > lo_i && i < hi_i && j > lo_j && j < hi_j {
                        continue;
                    }
                    for &ti in &self.cells[j * self.nx + i] {
                        if let Some((xi, eta, defect)) = bary(mesh, ti, p) {
                            if defect <= 0.0 {
                                return Some((ti, xi, eta));
                            }
                            if best.map(|b| defect < b.3).unwrap_or(true) {
                                best = Some((ti, xi, eta, defect));
                            }
                        }
                    }
                }
            }
            if let Some((ti, xi, eta, defect)) = best {
                if defect < 1e-9 {
                    return Some((ti, xi, eta));
                }
                let _ = ti;
            }
        }
        best.filter(|b| b.3 < 1e-9).map(|(ti, xi, eta, _)| (ti, xi, eta))
    }
}

/// Barycentric solve: returns reference coords and containment defect
/// (how far outside, 0 when inside).
fn bary(mesh: &Mesh, ti: usize, p: Vec2) -> Option<(f64, f64, f64)> {
    let t = &mesh.triangles[ti];
    let p0 = mesh.nodes[t[0]];
    let p1 = mesh.nodes[t[1]];
    let p2 = mesh.nodes[t[2]];
    let det = (p1 - p0).cross(p2 - p0);
    if det.abs() < 1e-300 {
        return None;
    }
    let xi = (p - p0).cross(p2 - p0) / det;
    let eta = (p1 - p0).cross(p - p0) / det;
    let l0 = 1.0 - xi - eta;
    let defect = (-xi).max(-eta).max(-l0).max(0.0);
    Some((xi, eta, defect))
}

/// A displacement field on an element space.
#[derive(Clone)]
pub struct FemField {
    pub space: Arc<FeSpace>,
    /// Interleaved nodal values `(u_x, u_y)` per dof node.
    pub values: Vec<f64>,
}

impl FemField {
    pub fn zero(space: Arc<FeSpace>) -> FemField {
        let n = space.dof_count();
        FemField { space, values: vec![0.0; n] }
    }

    /// Nodal interpolation of an affine displacement `x ↦ A x`.
    pub fn affine(space: Arc<FeSpace>, a: [[f64; 2]; 2]) -> FemField {
        let mut values = vec![0.0; space.dof_count()];
        for (i, p) in space.nodes.iter().enumerate() {
            values[2 * i] = a[0][0] * p.x + a[0][1] * p.y;
            values[2 * i + 1] = a[1][0] * p.x + a[1][1] * p.y;
        }
        FemField { space, values }
    }

    pub fn negated(&self) -> FemField {
        FemField { space: self.space.clone(), values: self.values.iter().map(|v| -v).collect() }
    }

    pub fn node_value(&self, node: usize) -> Vec2 {
        Vec2::new(self.values[2 * node], self.values[2 * node + 1])
    }

    pub fn eval(&self, p: Vec2) -> Result<Vec2> {
        let (e, xi, eta) = self
            .space
            .locate(p)
            .ok_or(LabError::PointOutsideMesh { x: p.x, y: p.y })?;
        let mut shapes = [0.0; 6];
        self.space.shapes(xi, eta, &mut shapes);
        let mut out = Vec2::ZERO;
        for (a, &node) in self.space.elems[e].iter().enumerate() {
            out += self.node_value(node) * shapes[a];
        }
        Ok(out)
    }

    /// Full displacement gradient `(∂_j u_i)` at `p`.
    pub fn gradient(&self, p: Vec2) -> Result<[[f64; 2]; 2]> {
        let (e, xi, eta) = self
            .space
            .locate(p)
            .ok_or(LabError::PointOutsideMesh { x: p.x, y: p.y })?;
        Ok(self.gradient_in(e, xi, eta))
    }

    fn gradient_in(&self, e: usize, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let mut grads = [Vec2::ZERO; 6];
        self.space.physical_grads(e, xi, eta, &mut grads);
        let mut g = [[0.0; 2]; 2];
        for (a, &node) in self.space.elems[e].iter().enumerate() {
            let u = self.node_value(node);
            g[0][0] += u.x * grads[a].x;
            g[0][1] += u.x * grads[a].y;
            g[1][0] += u.y * grads[a].x;
            g[1][1] += u.y * grads[a].y;
        }
        g
    }

    /// Symmetric gradient (strain) at `p`.
    pub fn sym_gradient(&self, p: Vec2) -> Result<SymMat2> {
        Ok(SymMat2::symmetrize(self.gradient(p)?))
    }

    /// Strains at many points.
    pub fn sym_gradients(&self, points: &[Vec2]) -> Result<Vec<SymMat2>> {
        points.iter().map(|&p| self.sym_gradient(p)).collect()
    }

    /// Area-weighted nodal gradient recovery (useful for P1 where raw
    /// gradients are piecewise constant).
    pub fn recovered_strains(&self) -> Vec<SymMat2> {
        let n = self.space.nodes.len();
        let mut acc = vec![SymMat2::ZERO; n];
        let mut wsum = vec![0.0; n];
        for e in 0..self.space.elems.len() {
            let (_, _, area) = self.space.geometry(e);
            let g = self.gradient_in(e, 1.0 / 3.0, 1.0 / 3.0);
            let s = SymMat2::symmetrize(g);
            for &node in &self.space.elems[e] {
                acc[node] = acc[node] + s * area;
                wsum[node] += area;
            }
        }
        for (a, w) in acc.iter_mut().zip(wsum.iter()) {
            if *w > 0.0 {
                *a = *a * (1.0 / w);
            }
        }
        acc
    }

    /// Strain at `p` interpolated from recovered nodal strains.
    pub fn sym_gradient_recovered(&self, recovered: &[SymMat2], p: Vec2) -> Result<SymMat2> {
        let (e, xi, eta) = self
            .space
            .locate(p)
            .ok_or(LabError::PointOutsideMesh { x: p.x, y: p.y })?;
        let mut shapes = [0.0; 6];
        self.space.shapes(xi, eta, &mut shapes);
        let mut out = SymMat2::ZERO;
        for (a, &node) in self.space.elems[e].iter().enumerate() {
            out = out + recovered[node] * shapes[a];
        }
        Ok(out)
    }

    /// Integral of the spin `∂_x u_y - ∂_y u_x` over the mesh.
    pub fn spin_integral(&self) -> f64 {
        let mut s = 0.0;
        for e in 0..self.space.elems.len() {
            let (_, _, area) = self.space.geometry(e);
            for &(xi, eta, w) in QUAD_DEG2.iter() {
                let g = self.gradient_in(e, xi, eta);
                s += w * area * (g[1][0] - g[0][1]);
            }
        }
        s
    }

    /// Boundary integral of the field (edge Gauss quadrature).
    pub fn boundary_integral(&self) -> Vec2 {
        let mut s = Vec2::ZERO;
        for (dofs, _, len) in &self.space.bedges {
            for &(t, w) in EDGE_GAUSS.iter() {
                let val = match dofs.len() {
                    2 => self.node_value(dofs[0]) * (1.0 - t) + self.node_value(dofs[1]) * t,
                    _ => {
                        self.node_value(dofs[0]) * ((1.0 - t) * (1.0 - 2.0 * t))
                            + self.node_value(dofs[1]) * (4.0 * t * (1.0 - t))
                            + self.node_value(dofs[2]) * (t * (2.0 * t - 1.0))
                    }
                };
                s += val * (w * len);
            }
        }
        s
    }

    /// Adds the rigid motion `x ↦ W x + c` (exact for nodal spaces).
    pub fn add_rigid(&mut self, spin: f64, shift: Vec2) {
        for i in 0..self.space.nodes.len() {
            let p = self.space.nodes[i];
            self.values[2 * i] += -spin * p.y + shift.x;
            self.values[2 * i + 1] += spin * p.x + shift.y;
        }
    }

    /// Rigid-motion correction enforcing zero integrated spin and zero
    /// boundary mean, in that order.
    pub fn normalize(&mut self) {
        let area = self.space.area();
        let spin = -self.spin_integral() / (2.0 * area);
        self.add_rigid(spin, Vec2::ZERO);
        let mean = self.boundary_integral() * (1.0 / self.space.boundary_length());
        self.add_rigid(0.0, -mean);
    }
}

/// Piecewise-constant elasticity field: one tensor per mesh region.
#[derive(Debug, Clone, Copy)]
pub struct PhaseField {
    pub background: Tensor4,
    pub inclusion: Tensor4,
}

impl PhaseField {
    pub fn uniform(c: Tensor4) -> PhaseField {
        PhaseField { background: c, inclusion: c }
    }

    pub fn of(&self, r: Region) -> &Tensor4 {
        match r {
            Region::Background => &self.background,
            Region::Inclusion => &self.inclusion,
        }
    }
}

/// Boundary traction data.
#[derive(Clone)]
pub enum Traction {
    /// `ψ = Σ ν` for a constant stress `Σ` (edge-wise constant).
    ConstantStress(SymMat2),
    /// Per boundary edge values at the endpoint / midpoint / endpoint,
    /// interpolated quadratically along the edge. Indexed like
    /// `FeSpace::bedges`.
    EdgeQuadratic(Vec<[Vec2; 3]>),
}

impl Traction {
    /// Traction realizing `ψ = (C Ε) ν` for a constant strain.
    pub fn from_constant_strain(c: &Tensor4, e: SymMat2) -> Traction {
        Traction::ConstantStress(c.contract(e))
    }

    fn eval(&self, edge_idx: usize, t: f64, normal: Vec2) -> Vec2 {
        match self {
            Traction::ConstantStress(sigma) => sigma.apply(normal),
            Traction::EdgeQuadratic(data) => {
                let [a, m, b] = data[edge_idx];
                a * ((1.0 - t) * (1.0 - 2.0 * t)) + m * (4.0 * t * (1.0 - t)) + b * (t * (2.0 * t - 1.0))
            }
        }
    }
}

/// A factored pure-traction elasticity operator on a fixed space and phase
/// field; solves share the factorization.
///
/// The three Lagrange constraint rows are the normalization functionals
/// themselves (boundary mean in x and y, integrated spin), assembled with
/// the same quadratures used everywhere else. Solutions therefore satisfy
/// the normalization at the solver level, and any rigid-incompatible load
/// component (the point-load torque gap of the Neumann columns) is absorbed
/// by the multipliers consistently across all solves on the space.
pub struct ElasticSystem {
    pub space: Arc<FeSpace>,
    pub phases: PhaseField,
    matrix: SparseSym,
    factor: LdltFactor,
    /// Orthonormalized discrete rigid motions (for compatibility checks).
    rigid: [Vec<f64>; 3],
    constraint_scale: f64,
}

impl ElasticSystem {
    pub fn new(space: Arc<FeSpace>, phases: PhaseField) -> Result<ElasticSystem> {
        for (name, c) in [("background", &phases.background), ("inclusion", &phases.inclusion)] {
            let margin = c.convexity_margin();
            if margin <= 0.0 {
                return Err(LabError::Config(format!(
                    "{name} tensor is not strongly convex (margin {margin:e})"
                )));
            }
        }
        let ndof = space.dof_count();
        let n = ndof + 3;
        let mut tri = SymTriplets::new(n);
        assemble_stiffness(&space, &phases, &mut tri);

        // orthonormalize the rigid vectors (modified Gram-Schmidt)
        let raw = space.rigid_vectors();
        let mut rigid = raw;
        for m in 0..3 {
            for k in 0..m {
                let (head, tail) = rigid.split_at_mut(m);
                let dot: f64 = head[k].iter().zip(tail[0].iter()).map(|(a, b)| a * b).sum();
                for (r, &q) in tail[0].iter_mut().zip(head[k].iter()) {
                    *r -= dot * q;
                }
            }
            let norm: f64 = rigid[m].iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in rigid[m].iter_mut() {
                *v /= norm;
            }
        }

        // constraint columns: the normalization functionals, unit-normalized
        // then scaled to the stiffness diagonal
        let probe = tri.clone().build();
        let scale = probe.mean_diag().max(1e-300);
        let mut constraints = normalization_functionals(&space);
        for c in constraints.iter_mut() {
            let norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in c.iter_mut() {
                *v *= scale / norm;
            }
        }
        for (m, c) in constraints.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                if v != 0.0 {
                    tri.add(i, ndof + m, v);
                }
            }
        }
        let matrix = tri.build();

        // the trailing pivots of the K block are exactly singular with the
        // multipliers last; static regularization keeps every pivot safely
        // signed and iterative refinement restores full accuracy
        let delta = 1e-8 * scale;
        let regularized = matrix.regularized(ndof, delta);
        let perm = ordering(&space, ndof);
        let factor = LdltFactor::factor(&regularized, perm)?;
        if factor.negative_pivots() != 3 {
            return Err(LabError::Solver(format!(
                "expected 3 negative pivots (rigid multipliers), got {}",
                factor.negative_pivots()
            )));
        }
        Ok(ElasticSystem { space, phases, matrix, factor, rigid, constraint_scale: scale })
    }

    /// Assembled load vector for traction plus optional body force.
    pub fn assemble_load(
        &self,
        traction: &Traction,
        body: Option<&dyn Fn(Vec2) -> Vec2>,
    ) -> Vec<f64> {
        let space = &self.space;
        let mut f = vec![0.0; space.dof_count()];
        for (ei, (dofs, normal, len)) in space.bedges.iter().enumerate() {
            for &(t, w) in EDGE_GAUSS.iter() {
                let psi = traction.eval(ei, t, *normal);
                let shapes: [f64; 3] = if dofs.len() == 2 {
                    [1.0 - t, t, 0.0]
                } else {
                    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
                };
                for (a, &node) in dofs.iter().enumerate() {
                    f[2 * node] += w * len * psi.x * shapes[a];
                    f[2 * node + 1] += w * len * psi.y * shapes[a];
                }
            }
        }
        if let Some(load) = body {
            let rule = quad_deg5();
            let mut shapes = [0.0; 6];
            for e in 0..space.elems.len() {
                let (p0, _, area) = space.geometry(e);
                let t = &space.mesh.triangles[e];
                let d1 = space.mesh.nodes[t[1]] - p0;
                let d2 = space.mesh.nodes[t[2]] - p0;
                for &(xi, eta, w) in rule.iter() {
                    let x = p0 + d1 * xi + d2 * eta;
                    let fval = load(x);
                    space.shapes(xi, eta, &mut shapes);
                    for (a, &node) in space.elems[e].iter().enumerate() {
                        f[2 * node] += w * area * fval.x * shapes[a];
                        f[2 * node + 1] += w * area * fval.y * shapes[a];
                    }
                }
            }
        }
        f
    }

    /// Rigid-motion compatibility residual of a load vector, relative to its
    /// norm.
    pub fn compatibility_residual(&self, f: &[f64]) -> f64 {
        let fn2: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fn2 == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in &self.rigid {
            let dot: f64 = f.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
            worst = worst.max(dot.abs());
        }
        worst / fn2
    }

    /// Solves the pure-traction problem. The load must be compatible; the
    /// result carries the zero-boundary-mean / zero-spin normalization.
    pub fn solve_neumann(
        &self,
        traction: &Traction,
        body: Option<&dyn Fn(Vec2) -> Vec2>,
    ) -> Result<FemField> {
        let f = self.assemble_load(traction, body);
        let resid = self.compatibility_residual(&f);
        if resid > COMPAT_TOL {
            return Err(LabError::IncompatibleTraction { residual: resid, tolerance: COMPAT_TOL });
        }
        self.solve_raw(f)
    }

    /// Cell-problem solve: traction `(C0 E^{ij}) ν` with
    /// `E^{ij} = sym(e_i ⊗ e_j)`, against this system's phase field.
    pub fn solve_cell(&self, c0: &Tensor4, i: usize, j: usize) -> Result<FemField> {
        let e = SymMat2::sym_outer(unit(i), unit(j));
        self.solve_neumann(&Traction::from_constant_strain(c0, e), None)
    }

    /// Solves with a nodal point load at `node` in direction `dir` plus the
    /// uniform compensating boundary traction `-e_dir / |∂Ω|`. The torque
    /// incompatibility of these data is absorbed by the constraint
    /// multipliers (a rigid-motion-generating correction of the load).
    pub fn solve_point_load(&self, node: usize, dir: usize) -> Result<FemField> {
        let perimeter = self.space.boundary_length();
        let mut f = vec![0.0; self.space.dof_count()];
        // uniform boundary traction
        for (dofs, _, len) in &self.space.bedges {
            for &(t, w) in EDGE_GAUSS.iter() {
                let shapes: [f64; 3] = if dofs.len() == 2 {
                    [1.0 - t, t, 0.0]
                } else {
                    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
                };
                for (a, &nd) in dofs.iter().enumerate() {
                    f[2 * nd + dir] += w * len * (-1.0 / perimeter) * shapes[a];
                }
            }
        }
        // point load
        f[2 * node + dir] += 1.0;
        self.solve_raw(f)
    }

    fn solve_raw(&self, f: Vec<f64>) -> Result<FemField> {
        let ndof = self.space.dof_count();
        let mut b = f;
        b.resize(ndof + 3, 0.0);
        let (x, resid) = self.factor.solve_against(&self.matrix, &b, 1e-12, 20);
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if resid > RESIDUAL_TOL * scale.max(self.constraint_scale) {
            return Err(LabError::Solver(format!(
                "linear residual {resid:e} exceeds tolerance (scale {scale:e})"
            )));
        }
        let mut field = FemField { space: self.space.clone(), values: x[..ndof].to_vec() };
        // constraints already enforce the normalization to solver tolerance;
        // the closed-form correction pins the integrals to exact zero
        field.normalize();
        Ok(field)
    }

    /// Energy pairing `∫ C ∇̂a : ∇̂b` restricted to one region with the
    /// contrast tensor `d`, evaluated with the assembly quadrature.
    pub fn region_energy_pairing(&self, d: &Tensor4, region: Region, a: &FemField, b: &FemField) -> f64 {
        let space = &self.space;
        let mut total = 0.0;
        for e in 0..space.elems.len() {
            if space.mesh.regions[e] != region {
                continue;
            }
            let (_, _, area) = space.geometry(e);
            for &(xi, eta, w) in QUAD_DEG2.iter() {
                let ga = SymMat2::symmetrize(a.gradient_in(e, xi, eta));
                let gb = SymMat2::symmetrize(b.gradient_in(e, xi, eta));
                total += w * area * d.double_contract(ga, gb);
            }
        }
        total
    }
}

fn unit(i: usize) -> Vec2 {
    if i == 0 {
        Vec2::EX
    } else {
        Vec2::EY
    }
}

fn assemble_stiffness(space: &FeSpace, phases: &PhaseField, tri: &mut SymTriplets) {
    let nl = space.local_count();
    let mut grads = [Vec2::ZERO; 6];
    for e in 0..space.elems.len() {
        let c = phases.of(space.mesh.regions[e]);
        let m = c.mandel();
        let (_, _, area) = space.geometry(e);
        let mut k_local = [[0.0f64; 12]; 12];
        for &(xi, eta, w) in QUAD_DEG2.iter() {
            space.physical_grads(e, xi, eta, &mut grads);
            // strain of basis function (a, comp) in Mandel coordinates
            let mut b = [[0.0f64; 3]; 12];
            for a in 0..nl {
                let g = grads[a];
                b[2 * a][0] = g.x;
                b[2 * a][2] = g.y / std::f64::consts::SQRT_2;
                b[2 * a + 1][1] = g.y;
                b[2 * a + 1][2] = g.x / std::f64::consts::SQRT_2;
            }
            for r in 0..2 * nl {
                // m * b[r]
                let mb = [
                    m[0][0] * b[r][0] + m[0][1] * b[r][1] + m[0][2] * b[r][2],
                    m[1][0] * b[r][0] + m[1][1] * b[r][1] + m[1][2] * b[r][2],
                    m[2][0] * b[r][0] + m[2][1] * b[r][1] + m[2][2] * b[r][2],
                ];
                for s in r..2 * nl {
                    let v = b[s][0] * mb[0] + b[s][1] * mb[1] + b[s][2] * mb[2];
                    k_local[r][s] += w * area * v;
                }
            }
        }
        let dofs = &space.elems[e];
        for r in 0..2 * nl {
            let gi = 2 * dofs[r / 2] + (r % 2);
            for s in r..2 * nl {
                let gj = 2 * dofs[s / 2] + (s % 2);
                tri.add(gi, gj, k_local[r][s]);
            }
        }
    }
}

/// The three normalization functionals as load-space vectors: boundary mean
/// in x and y (edge quadrature) and integrated spin (element quadrature).
fn normalization_functionals(space: &FeSpace) -> [Vec<f64>; 3] {
    let ndof = space.dof_count();
    let mut cx = vec![0.0; ndof];
    let mut cy = vec![0.0; ndof];
    let mut cs = vec![0.0; ndof];
    for (dofs, _, len) in &space.bedges {
        for &(t, w) in EDGE_GAUSS.iter() {
            let shapes: [f64; 3] = if dofs.len() == 2 {
                [1.0 - t, t, 0.0]
            } else {
                [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
            };
            for (a, &node) in dofs.iter().enumerate() {
                cx[2 * node] += w * len * shapes[a];
                cy[2 * node + 1] += w * len * shapes[a];
            }
        }
    }
    let mut grads = [Vec2::ZERO; 6];
    for e in 0..space.elems.len() {
        let (_, _, area) = space.geometry(e);
        for &(xi, eta, w) in QUAD_DEG2.iter() {
            space.physical_grads(e, xi, eta, &mut grads);
            for (a, &node) in space.elems[e].iter().enumerate() {
                // spin(u) = ∂_x u_y − ∂_y u_x
                cs[2 * node + 1] += w * area * grads[a].x;
                cs[2 * node] -= w * area * grads[a].y;
            }
        }
    }
    [cx, cy, cs]
}

/// Nested-dissection ordering of the dofs (paired per node), with the three
/// multiplier rows appended last.
fn ordering(space: &FeSpace, ndof: usize) -> Vec<usize> {
    let nn = space.nodes.len();
    let mut adj_sets: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for dofs in &space.elems {
        for &a in dofs {
            for &b in dofs {
                if a != b {
                    adj_sets[a].push(b);
                }
            }
        }
    }
    let mut adj_ptr = vec![0usize; nn + 1];
    let mut adj = Vec::new();
    for (v, list) in adj_sets.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        adj.extend_from_slice(list);
        adj_ptr[v + 1] = adj.len();
    }
    let node_perm = nested_dissection(&adj_ptr, &adj, &space.nodes);
    let mut perm = Vec::with_capacity(ndof + 3);
    for &node in &node_perm {
        perm.push(2 * node);
        perm.push(2 * node + 1);
    }
    perm.push(ndof);
    perm.push(ndof + 1);
    perm.push(ndof + 2);
    perm
}

/// L2 and full H1 norms of the difference of two fields on one space.
pub fn energy_norms(a: &FemField, b: &FemField) -> Result<(f64, f64)> {
    if !Arc::ptr_eq(&a.space, &b.space)
        && (a.values.len() != b.values.len() || a.space.nodes != b.space.nodes)
    {
        return Err(LabError::MeshMismatch);
    }
    let space = &a.space;
    let rule = quad_deg5();
    let mut shapes = [0.0; 6];
    let mut grads = [Vec2::ZERO; 6];
    let mut l2_sq = 0.0;
    let mut h1_grad_sq = 0.0;
    for e in 0..space.elems.len() {
        let (_, _, area) = space.geometry(e);
        for &(xi, eta, w) in rule.iter() {
            space.shapes(xi, eta, &mut shapes);
            space.physical_grads(e, xi, eta, &mut grads);
            let mut val = Vec2::ZERO;
            let mut g = [[0.0f64; 2]; 2];
            for (ai, &node) in space.elems[e].iter().enumerate() {
                let d = a.node_value(node) - b.node_value(node);
                val += d * shapes[ai];
                g[0][0] += d.x * grads[ai].x;
                g[0][1] += d.x * grads[ai].y;
                g[1][0] += d.y * grads[ai].x;
                g[1][1] += d.y * grads[ai].y;
            }
            l2_sq += w * area * val.norm_sq();
            h1_grad_sq += w * area
                * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
    }
    Ok((l2_sq.sqrt(), (l2_sq + h1_grad_sq).sqrt()))
}

/// Builds the Neumann-matrix column for direction `dir` at boundary node
/// `node`: unit point load there plus the uniform compensating traction
/// `-e_dir/|∂Ω|`, normalized to zero boundary mean and zero spin.
///
/// The point data balance force but not torque; the torque gap is absorbed
/// by the constraint multipliers, which amounts to correcting the load by a
/// rigid-motion generator. Both sides of the verification pipeline consume
/// the same column, so the comparison is self-consistent. For the
/// displacement representation identity use [`representation_kernel`], the
/// negative of this column, which satisfies
/// `(u_eps - U)(y) = ∫ (C1-C0) ∇̂u_eps : ∇̂G dx` with the plus sign.
pub fn neumann_field(system: &ElasticSystem, node: usize, dir: usize) -> Result<FemField> {
    let p = system.space.nodes[node];
    if system
        .space
        .bedges
        .iter()
        .all(|(dofs, _, _)| dofs.first() != Some(&node) && dofs.last() != Some(&node))
    {
        return Err(LabError::Config(format!("node {node} ({}, {}) is not a boundary vertex", p.x, p.y)));
    }
    system.solve_point_load(node, dir)
}

/// The kernel entering the displacement representation identity: the
/// negative of [`neumann_field`].
pub fn representation_kernel(system: &ElasticSystem, node: usize, dir: usize) -> Result<FemField> {
    Ok(neumann_field(system, node, dir)?.negated())
}
