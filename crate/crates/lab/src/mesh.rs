//! Unstructured triangle meshes: graded point placement, Bowyer-Watson
//! Delaunay triangulation, thin-tube layering with region tags, boundary
//! extraction, and the plain-text exchange format.
//!
//! Tube handling: when an inclusion tube of half-width ε is present, points
//! are laid on five offset curves at `h ∈ {-ε, -ε/2, 0, ε/2, ε}` with
//! arclength spacing ε/2, plus polar fans in the end caps. The tagged region
//! then has at least four element layers across the width and its interface
//! follows the ±ε offsets to within the layer spacing. Structured points are
//! jittered only tangentially so they stay exactly on their offset curve.

use crate::error::{LabError, Result};
use emt_core::curve::{CurveSpec, TubeRegion};
use emt_core::domain::Domain;
use emt_core::rng::SplitMix64;
use emt_core::Vec2;
use std::collections::HashMap;
use std::fmt::Write as _;

const NONE: usize = usize::MAX;

/// Material tag of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Background,
    Inclusion,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// Outward unit normal.
    pub normal: Vec2,
    pub length: f64,
}

/// A conforming triangulation with positively oriented triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.tri_area(t)).sum()
    }

    pub fn region_area(&self, r: Region) -> f64 {
        self.triangles
            .iter()
            .zip(self.regions.iter())
            .filter(|(_, &reg)| reg == r)
            .map(|(t, _)| self.tri_area(t))
            .sum()
    }

    fn tri_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = *t;
        0.5 * (self.nodes[b] - self.nodes[a]).cross(self.nodes[c] - self.nodes[a])
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary.iter().map(|e| e.length).sum()
    }

    /// Index of the boundary node closest to `p`, if within `tol`.
    pub fn boundary_node_near(&self, p: Vec2, tol: f64) -> Option<usize> {
        let mut best = None;
        let mut best_d = tol;
        for e in &self.boundary {
            for &v in &e.nodes {
                let d = self.nodes[v].dist(p);
                if d <= best_d {
                    best_d = d;
                    best = Some(v);
                }
            }
        }
        best
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in &self.triangles {
            for k in 0..3 {
                let a = self.nodes[t[k]];
                let b = self.nodes[t[(k + 1) % 3]];
                let c = self.nodes[t[(k + 2) % 3]];
                let u = b - a;
                let v = c - a;
                let ang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(ang);
            }
        }
        min.to_degrees()
    }

    /// Plain-text format: header `nodes N triangles T edges E`, then node
    /// lines `x y`, triangle lines `i j k tag`, edge lines `i j`.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "nodes {} triangles {} edges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary.len()
        );
        for n in &self.nodes {
            let _ = writeln!(out, "{} {}", n.x, n.y);
        }
        for (t, r) in self.triangles.iter().zip(self.regions.iter()) {
            let tag = match r {
                Region::Background => 0,
                Region::Inclusion => 1,
            };
            let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], tag);
        }
        for e in &self.boundary {
            let _ = writeln!(out, "{} {}", e.nodes[0], e.nodes[1]);
        }
        out
    }

    pub fn import_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| LabError::Mesh("empty mesh file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "nodes" || parts[2] != "triangles" || parts[4] != "edges" {
            return Err(LabError::Mesh("bad mesh header".into()));
        }
        let nn: usize = parts[1].parse().map_err(|_| LabError::Mesh("bad node count".into()))?;
        let nt: usize = parts[3].parse().map_err(|_| LabError::Mesh("bad tri count".into()))?;
        let ne: usize = parts[5].parse().map_err(|_| LabError::Mesh("bad edge count".into()))?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let l = lines.next().ok_or_else(|| LabError::Mesh("truncated nodes".into()))?;
            let mut it = l.split_whitespace();
            let x: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| LabError::Mesh("bad node line".into()))?;
            let y: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| LabError::Mesh("bad node line".into()))?;
            nodes.push(Vec2::new(x, y));
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = lines.next().ok_or_else(|| LabError::Mesh("truncated triangles".into()))?;
            let v: Vec<usize> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            if v.len() != 4 {
                return Err(LabError::Mesh("bad triangle line".into()));
            }
            triangles.push([v[0], v[1], v[2]]);
            regions.push(if v[3] == 1 { Region::Inclusion } else { Region::Background });
        }
        for _ in 0..ne {
            let _ = lines.next();
        }
        let boundary = extract_boundary(&nodes, &triangles);
        Ok(Mesh { nodes, triangles, regions, boundary })
    }
}

/// Inputs to mesh generation.
pub struct MeshSpec<'a> {
    pub domain: &'a Domain,
    /// Background target size.
    pub h: f64,
    pub tube: Option<&'a TubeRegion>,
    /// Refine near a curve without tagging a tube: (curve, size, band).
    pub curve_refine: Option<(&'a CurveSpec, f64, f64)>,
    /// Points that must become boundary vertices, with local refinement.
    pub focus: &'a [Vec2],
    /// Sizing divisor near focus points.
    pub focus_factor: f64,
    pub seed: u64,
}

impl<'a> MeshSpec<'a> {
    pub fn new(domain: &'a Domain, h: f64) -> Self {
        MeshSpec { domain, h, tube: None, curve_refine: None, focus: &[], focus_factor: 4.0, seed: 0 }
    }

    fn size_at(&self, p: Vec2) -> f64 {
        let mut s = self.h;
        if let Some(tube) = self.tube {
            let eps = tube.half_width();
            let d = tube.curve().distance(p);
            s = s.min(0.5 * eps + 0.5 * (d - eps).max(0.0));
        }
        if let Some((curve, size, band)) = self.curve_refine {
            let d = curve.distance(p);
            s = s.min(size + 0.5 * (d - band).max(0.0));
        }
        for &y in self.focus {
            s = s.min(self.h / self.focus_factor + 0.5 * p.dist(y));
        }
        s
    }
}

pub fn generate_mesh(spec: &MeshSpec) -> Result<Mesh> {
    if spec.h <= 0.0 {
        return Err(LabError::Mesh("target size must be positive".into()));
    }
    if let Some(tube) = spec.tube {
        // TubeRegion::new already guards the reach; resolvability guard here
        if tube.half_width() < spec.h * 1e-3 {
            return Err(LabError::Mesh("tube half-width too small for target size".into()));
        }
    }
    let mut rng = SplitMix64::new(spec.seed ^ 0x6d65_7368);
    let mut points: Vec<Vec2> = Vec::new();

    // boundary points, focus vertices pinned exactly
    let boundary_pts = boundary_points(spec)?;
    points.extend_from_slice(&boundary_pts);

    // structured tube layers and end caps
    if let Some(tube) = spec.tube {
        tube_points(tube, &mut rng, &mut points);
    }

    let filter = ProximityFilter::new(&points, spec);

    // graded interior fill
    let (lo, hi) = spec.domain.bounding_box();
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    let center = (lo + hi) * 0.5;
    quadtree_fill(spec, &filter, center, extent, &mut rng, &mut points);

    // triangulate, filter, tag
    let tris = delaunay(&points)?;
    let mut triangles = Vec::new();
    for t in tris {
        let centroid = (points[t[0]] + points[t[1]] + points[t[2]]) * (1.0 / 3.0);
        if spec.domain.boundary_distance(centroid) <= 0.0 {
            continue;
        }
        let area = 0.5 * (points[t[1]] - points[t[0]]).cross(points[t[2]] - points[t[0]]);
        if area <= 1e-16 * extent * extent {
            continue;
        }
        triangles.push(t);
    }
    // drop nodes that ended up unused to keep the mesh tight
    let (nodes, triangles) = compact(points, triangles);
    let regions: Vec<Region> = triangles
        .iter()
        .map(|t| {
            let centroid = (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) * (1.0 / 3.0);
            match spec.tube {
                Some(tube) if tube.contains(centroid) => Region::Inclusion,
                _ => Region::Background,
            }
        })
        .collect();
    let boundary = extract_boundary(&nodes, &triangles);

    let mesh = Mesh { nodes, triangles, regions, boundary };
    for &y in spec.focus {
        if mesh.boundary_node_near(y, 1e-9).is_none() {
            return Err(LabError::Mesh(format!("focus point ({}, {}) missing from boundary", y.x, y.y)));
        }
    }
    Ok(mesh)
}

fn boundary_points(spec: &MeshSpec) -> Result<Vec<Vec2>> {
    match spec.domain {
        Domain::Disk { center, radius } => {
            let mut required: Vec<f64> = spec
                .focus
                .iter()
                .map(|&p| {
                    let rel = p - *center;
                    rel.y.atan2(rel.x)
                })
                .collect();
            required.sort_by(|a, b| a.partial_cmp(b).unwrap());
            required.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            if required.is_empty() {
                required.push(0.0);
            }
            let mut angles: Vec<f64> = Vec::new();
            let k = required.len();
            for i in 0..k {
                let a0 = required[i];
                let a1 = if i + 1 < k { required[i + 1] } else { required[0] + 2.0 * std::f64::consts::PI };
                angles.push(a0);
                subdivide_arc(spec, *center, *radius, a0, a1, &mut angles);
            }
            Ok(angles
                .into_iter()
                .map(|a| *center + Vec2::unit_from_angle(a) * *radius)
                .collect())
        }
        Domain::Polygon { vertices } => {
            let n = vertices.len();
            if n < 3 {
                return Err(LabError::Mesh("polygon needs at least 3 vertices".into()));
            }
            // each edge contributes its opening vertex, any foci on it, and
            // graded subdivision points; the closing vertex opens the next edge
            let mut pts = Vec::new();
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let ab = b - a;
                let len = ab.norm();
                let mut params: Vec<f64> = vec![0.0];
                for &f in spec.focus {
                    let t = (f - a).dot(ab) / (len * len);
                    if (1e-12..1.0 - 1e-12).contains(&t) && (a + ab * t).dist(f) < 1e-9 {
                        params.push(t);
                    }
                }
                params.sort_by(|x, y| x.partial_cmp(y).unwrap());
                params.push(1.0);
                for w in params.windows(2) {
                    pts.push(a + ab * w[0]);
                    subdivide_segment(spec, a + ab * w[0], a + ab * w[1], &mut pts);
                }
            }
            Ok(pts)
        }
    }
}

fn subdivide_arc(spec: &MeshSpec, center: Vec2, radius: f64, a0: f64, a1: f64, out: &mut Vec<f64>) {
    let mid = 0.5 * (a0 + a1);
    let arc = radius * (a1 - a0);
    let p = center + Vec2::unit_from_angle(mid) * radius;
    if arc <= spec.size_at(p) {
        return;
    }
    subdivide_arc(spec, center, radius, a0, mid, out);
    out.push(mid);
    subdivide_arc(spec, center, radius, mid, a1, out);
}

fn subdivide_segment(spec: &MeshSpec, a: Vec2, b: Vec2, out: &mut Vec<Vec2>) {
    let mid = (a + b) * 0.5;
    if a.dist(b) <= spec.size_at(mid) {
        return;
    }
    subdivide_segment(spec, a, mid, out);
    out.push(mid);
    subdivide_segment(spec, mid, b, out);
}

fn tube_points(tube: &TubeRegion, rng: &mut SplitMix64, out: &mut Vec<Vec2>) {
    let curve = tube.curve();
    let eps = tube.half_width();
    let step = 0.5 * eps;
    let length = curve.length();
    let closed = curve.is_closed();
    let n_s = (length / step).ceil().max(4.0) as usize;
    let ds = length / n_s as f64;
    let last = if closed { n_s - 1 } else { n_s };
    for layer in -2i32..=2 {
        let offset = layer as f64 * step;
        for i in 0..=last {
            let mut s = i as f64 * ds;
            let endpoint = !closed && (i == 0 || i == last);
            if !endpoint {
                // tangential jitter: stays exactly on the offset curve
                s += rng.uniform(-0.12, 0.12) * ds;
            }
            let f = curve.frame_at(s.clamp(0.0, length)).expect("s within range");
            out.push(curve.point_at(s) + f.normal() * offset);
        }
    }
    if !closed {
        for (s_end, dir) in [(0.0, -1.0), (length, 1.0)] {
            let f = curve.frame_at(s_end).expect("endpoint frame");
            let u = f.tangent() * dir; // points out of the curve
            let n = f.normal();
            for ring in [0.5 * eps, eps] {
                let m = ((std::f64::consts::PI * ring) / step).ceil().max(2.0) as usize;
                for k in 1..m {
                    let mut phi = -0.5 * std::f64::consts::PI
                        + std::f64::consts::PI * k as f64 / m as f64;
                    phi += rng.uniform(-0.1, 0.1) * std::f64::consts::PI / m as f64;
                    let dirv = n * phi.sin() + u * phi.cos();
                    out.push(curve.point_at(s_end) + dirv * ring);
                }
            }
        }
    }
}

/// Uniform-grid proximity lookup over the structured points.
struct ProximityFilter {
    cell: f64,
    origin: Vec2,
    nx: usize,
    ny: usize,
    bins: HashMap<(usize, usize), Vec<usize>>,
    pts: Vec<Vec2>,
}

impl ProximityFilter {
    fn new(points: &[Vec2], spec: &MeshSpec) -> ProximityFilter {
        let (lo, hi) = spec.domain.bounding_box();
        let pad = 0.1 * (hi.x - lo.x).max(hi.y - lo.y) + 1e-12;
        let origin = Vec2::new(lo.x - pad, lo.y - pad);
        let extent_x = hi.x - lo.x + 2.0 * pad;
        let extent_y = hi.y - lo.y + 2.0 * pad;
        let mut min_sz = spec.h;
        if let Some(t) = spec.tube {
            min_sz = min_sz.min(0.5 * t.half_width());
        }
        if let Some((_, s, _)) = spec.curve_refine {
            min_sz = min_sz.min(s);
        }
        min_sz = min_sz.min(spec.h / spec.focus_factor).max(1e-6);
        let cell = min_sz;
        let nx = (extent_x / cell).ceil() as usize + 1;
        let ny = (extent_y / cell).ceil() as usize + 1;
        let mut f = ProximityFilter {
            cell,
            origin,
            nx,
            ny,
            bins: HashMap::new(),
            pts: points.to_vec(),
        };
        for (i, &p) in points.iter().enumerate() {
            let key = f.key(p);
            f.bins.entry(key).or_default().push(i);
        }
        f
    }

    fn key(&self, p: Vec2) -> (usize, usize) {
        let ix = (((p.x - self.origin.x) / self.cell) as usize).min(self.nx - 1);
        let iy = (((p.y - self.origin.y) / self.cell) as usize).min(self.ny - 1);
        (ix, iy)
    }

    fn min_dist(&self, p: Vec2, radius: f64) -> f64 {
        let reach = (radius / self.cell).ceil() as isize + 1;
        let (cx, cy) = self.key(p);
        let mut best = f64::INFINITY;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                let ix = cx as isize + dx;
                let iy = cy as isize + dy;
                if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
                    continue;
                }
                if let Some(list) = self.bins.get(&(ix as usize, iy as usize)) {
                    for &i in list {
                        best = best.min(self.pts[i].dist(p));
                    }
                }
            }
        }
        best
    }
}

fn quadtree_fill(
    spec: &MeshSpec,
    filter: &ProximityFilter,
    center: Vec2,
    size: f64,
    rng: &mut SplitMix64,
    out: &mut Vec<Vec2>,
) {
    // fully outside cells are pruned
    let bd = spec.domain.boundary_distance(center);
    if bd < -0.75 * size {
        return;
    }
    let target = spec.size_at(center);
    if size > target {
        let q = 0.25 * size;
        for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            quadtree_fill(spec, filter, center + Vec2::new(dx * q, dy * q), 0.5 * size, rng, out);
        }
        return;
    }
    let jit = Vec2::new(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)) * size;
    let p = center + jit;
    let local = spec.size_at(p);
    if spec.domain.boundary_distance(p) < 0.55 * local {
        return;
    }
    if let Some(tube) = spec.tube {
        // structured layers own the tube plus half a step of margin
        if tube.curve().distance(p) < tube.half_width() + 0.55 * 0.5 * tube.half_width() {
            return;
        }
    }
    if filter.min_dist(p, 0.75 * local) < 0.55 * local {
        return;
    }
    out.push(p);
}

fn compact(points: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> (Vec<Vec2>, Vec<[usize; 3]>) {
    let mut used = vec![NONE; points.len()];
    let mut nodes = Vec::new();
    let mut tris = Vec::with_capacity(triangles.len());
    for t in triangles {
        let mut new_t = [0usize; 3];
        for (k, &v) in t.iter().enumerate() {
            if used[v] == NONE {
                used[v] = nodes.len();
                nodes.push(points[v]);
            }
            new_t[k] = used[v];
        }
        tris.push(new_t);
    }
    (nodes, tris)
}

fn extract_boundary(nodes: &[Vec2], triangles: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    // edges owned by exactly one triangle, directed as in their CCW owner so
    // the domain lies on the left and rot270 of the direction points outward
    let mut edges: Vec<BoundaryEdge> = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            if count[&(a.min(b), a.max(b))] == 1 {
                let d = nodes[b] - nodes[a];
                let len = d.norm();
                edges.push(BoundaryEdge { nodes: [a, b], normal: d.rot270() * (1.0 / len), length: len });
            }
        }
    }
    edges.sort_by_key(|e| (e.nodes[0], e.nodes[1]));
    edges
}

/// Bowyer-Watson Delaunay triangulation of a point set. Points are inserted
/// in Morton order with walk-based location. Returns triangles indexed by
/// the input point order.
fn delaunay(points: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(LabError::Mesh("need at least three points".into()));
    }
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let center = (lo + hi) * 0.5;

    // insertion order: Morton code over quantized coordinates
    let mut order: Vec<usize> = (0..n).collect();
    let code = |p: Vec2| -> u64 {
        let qx = (((p.x - lo.x) / span).clamp(0.0, 1.0) * (u32::MAX as f64)) as u64;
        let qy = (((p.y - lo.y) / span).clamp(0.0, 1.0) * (u32::MAX as f64)) as u64;
        let mut z = 0u64;
        for b in 0..32 {
            z |= ((qx >> b) & 1) << (2 * b) | ((qy >> b) & 1) << (2 * b + 1);
        }
        z
    };
    order.sort_by_key(|&i| (code(points[i]), i));

    // internal vertex list: 3 super vertices then the points
    let m = 24.0 * span;
    let mut verts: Vec<Vec2> = vec![
        center + Vec2::new(-m, -m),
        center + Vec2::new(m, -m),
        center + Vec2::new(0.0, m),
    ];
    verts.extend(points.iter().copied());

    let mut tris: Vec<[usize; 3]> = vec![[0, 1, 2]];
    let mut adj: Vec<[usize; 3]> = vec![[NONE, NONE, NONE]];
    let mut alive: Vec<bool> = vec![true];
    let mut free: Vec<usize> = Vec::new();
    let mut hint = 0usize;

    let orient = |a: Vec2, b: Vec2, c: Vec2| (b - a).cross(c - a);
    let incircle = |a: Vec2, b: Vec2, c: Vec2, d: Vec2| {
        let (ax, ay) = (a.x - d.x, a.y - d.y);
        let (bx, by) = (b.x - d.x, b.y - d.y);
        let (cx, cy) = (c.x - d.x, c.y - d.y);
        let a2 = ax * ax + ay * ay;
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
    };

    for &orig in &order {
        let pv = orig + 3;
        let p = verts[pv];

        // locate by walking
        let mut t = if alive[hint] { hint } else { tris.len() - 1 };
        if !alive[t] {
            t = alive.iter().rposition(|&a| a).ok_or_else(|| LabError::Mesh("triangulation lost".into()))?;
        }
        let mut steps = 0usize;
        let located = loop {
            steps += 1;
            if steps > 4 * (tris.len() + 16) {
                // fallback: exhaustive scan
                let found = (0..tris.len()).find(|&ti| {
                    alive[ti]
                        && (0..3).all(|k| {
                            orient(verts[tris[ti][k]], verts[tris[ti][(k + 1) % 3]], p) >= -1e-14 * span * span
                        })
                });
                break found.ok_or_else(|| LabError::Mesh("point location failed".into()))?;
            }
            let v = tris[t];
            let mut moved = false;
            for k in 0..3 {
                if orient(verts[v[k]], verts[v[(k + 1) % 3]], p) < 0.0 {
                    let nb = adj[t][k];
                    if nb == NONE {
                        return Err(LabError::Mesh("walked out of the super triangle".into()));
                    }
                    t = nb;
                    moved = true;
                    break;
                }
            }
            if !moved {
                break t;
            }
        };

        // grow cavity of circumcircle-violated triangles
        let mut bad: Vec<usize> = vec![located];
        let mut mark: HashMap<usize, bool> = HashMap::new();
        mark.insert(located, true);
        let mut stack = vec![located];
        while let Some(ti) = stack.pop() {
            for &nb in &adj[ti] {
                if nb == NONE || mark.contains_key(&nb) {
                    continue;
                }
                let v = tris[nb];
                if incircle(verts[v[0]], verts[v[1]], verts[v[2]], p) > 0.0 {
                    mark.insert(nb, true);
                    bad.push(nb);
                    stack.push(nb);
                } else {
                    mark.insert(nb, false);
                }
            }
        }

        // cavity boundary: directed edges of bad triangles facing non-bad land
        let is_bad = |ti: usize, mark: &HashMap<usize, bool>| *mark.get(&ti).unwrap_or(&false);
        let mut rim: Vec<(usize, usize, usize)> = Vec::new(); // (a, b, outside)
        for &ti in &bad {
            for k in 0..3 {
                let nb = adj[ti][k];
                if nb == NONE || !is_bad(nb, &mark) {
                    rim.push((tris[ti][k], tris[ti][(k + 1) % 3], nb));
                }
            }
        }

        // retire cavity triangles
        for &ti in &bad {
            alive[ti] = false;
            free.push(ti);
        }

        // fan p to the rim
        let mut by_u: HashMap<usize, usize> = HashMap::new();
        let mut by_v: HashMap<usize, usize> = HashMap::new();
        let mut created: Vec<usize> = Vec::with_capacity(rim.len());
        for &(u, v, outside) in &rim {
            let ti = if let Some(slot) = free.pop() {
                tris[slot] = [pv, u, v];
                adj[slot] = [NONE, outside, NONE];
                slot
            } else {
                tris.push([pv, u, v]);
                adj.push([NONE, outside, NONE]);
                alive.push(true);
                tris.len() - 1
            };
            alive[ti] = true;
            if outside != NONE {
                // fix the back pointer of the outside neighbor
                let ov = tris[outside];
                for k in 0..3 {
                    if (ov[k] == v && ov[(k + 1) % 3] == u) || (ov[k] == u && ov[(k + 1) % 3] == v) {
                        adj[outside][k] = ti;
                    }
                }
            }
            by_u.insert(u, ti);
            by_v.insert(v, ti);
            created.push(ti);
        }
        for &ti in &created {
            let [_, u, v] = tris[ti];
            // edge 0 = (p, u): mate is fan triangle whose v == u
            adj[ti][0] = *by_v.get(&u).unwrap_or(&NONE);
            // edge 2 = (v, p): mate is fan triangle whose u == v
            adj[ti][2] = *by_u.get(&v).unwrap_or(&NONE);
        }
        hint = created.last().copied().unwrap_or(hint);
    }

    let mut out = Vec::new();
    for (ti, t) in tris.iter().enumerate() {
        if !alive[ti] {
            continue;
        }
        if t[0] < 3 || t[1] < 3 || t[2] < 3 {
            continue;
        }
        out.push([t[0] - 3, t[1] - 3, t[2] - 3]);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use emt_core::curve::CurveSpec;

    #[test]
    fn delaunay_of_grid_covers_square() {
        let mut pts = Vec::new();
        let n = 11;
        for j in 0..n {
            for i in 0..n {
                pts.push(Vec2::new(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64));
            }
        }
        let tris = delaunay(&pts).unwrap();
        let area: f64 = tris
            .iter()
            .map(|t| 0.5 * (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]))
            .sum();
        assert!((area - 1.0).abs() < 1e-10, "area {area}");
        // Euler check for a triangulated convex region: T = 2n - 2 - b
        assert_eq!(tris.len(), 2 * (n * n) - 2 - (4 * (n - 1)));
    }

    #[test]
    fn disk_mesh_area_close_to_pi() {
        let domain = Domain::unit_disk();
        let spec = MeshSpec::new(&domain, 0.1);
        let mesh = generate_mesh(&spec).unwrap();
        let area = mesh.area();
        assert!((area - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.02, "area {area}");
        assert!(mesh.min_angle_deg() > 12.0, "min angle {}", mesh.min_angle_deg());
        // boundary normals point outward
        for e in &mesh.boundary {
            let midpoint = (mesh.nodes[e.nodes[0]] + mesh.nodes[e.nodes[1]]) * 0.5;
            assert!(e.normal.dot(midpoint) > 0.0);
        }
    }

    #[test]
    fn tube_mesh_tags_cover_tube_area() {
        let domain = Domain::unit_disk();
        let curve = CurveSpec::segment(Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0)).unwrap();
        let eps = 0.02;
        let tube = TubeRegion::new(curve, eps, 0.45).unwrap();
        let mut spec = MeshSpec::new(&domain, 0.08);
        spec.tube = Some(&tube);
        let mesh = generate_mesh(&spec).unwrap();
        let tagged = mesh.region_area(Region::Inclusion);
        let exact = tube.area();
        assert!(
            (tagged - exact).abs() / exact < 0.05,
            "tagged {tagged} vs exact {exact}"
        );
        assert!(mesh.min_angle_deg() > 8.0, "min angle {}", mesh.min_angle_deg());
    }

    #[test]
    fn focus_points_become_boundary_vertices() {
        let domain = Domain::unit_disk();
        let focus = [Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        let mut spec = MeshSpec::new(&domain, 0.15);
        spec.focus = &focus;
        let mesh = generate_mesh(&spec).unwrap();
        for f in focus {
            let node = mesh.boundary_node_near(f, 1e-9).unwrap();
            assert!(mesh.nodes[node].dist(f) < 1e-12);
        }
    }

    #[test]
    fn degenerate_tube_is_rejected() {
        let curve = CurveSpec::circle(Vec2::ZERO, 0.1).unwrap();
        assert!(TubeRegion::new(curve, 0.2, 0.45).is_err());
    }

    #[test]
    fn export_import_round_trip() {
        let domain = Domain::unit_square();
        let spec = MeshSpec::new(&domain, 0.3);
        let mesh = generate_mesh(&spec).unwrap();
        let text = mesh.export_text();
        let back = Mesh::import_text(&text).unwrap();
        assert_eq!(mesh.nodes.len(), back.nodes.len());
        assert_eq!(mesh.triangles, back.triangles);
        assert_eq!(mesh.boundary.len(), back.boundary.len());
        assert!((mesh.area() - back.area()).abs() < 1e-15);
        // a second export is bit-identical
        assert_eq!(text, back.export_text());
    }

    #[test]
    fn square_mesh_respects_sizing() {
        let domain = Domain::unit_square();
        let spec = MeshSpec::new(&domain, 0.2);
        let mesh = generate_mesh(&spec).unwrap();
        assert!((mesh.area() - 1.0).abs() < 1e-9, "square is polygonal: area must be exact");
        assert!((mesh.boundary_length() - 4.0).abs() < 1e-9);
    }
}
