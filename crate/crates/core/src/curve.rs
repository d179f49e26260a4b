//! Inclusion spine curves: segments, circular arcs, and natural cubic
//! splines, with arclength parametrization, frame fields, tube coordinates,
//! admissibility checks, and composite Gauss quadrature along the curve.
//!
//! Frames follow one fixed convention: `τ` is the unit velocity of the
//! arclength parametrization and `n = τ` rotated by -90 degrees. For a
//! counterclockwise closed curve this makes `n` the outward normal of the
//! enclosed region. Everything downstream is invariant under `n → -n`.

use crate::domain::{segment_distance, Domain};
use crate::moment::Frame;
use crate::quadrature::GaussLegendre;
use crate::scalar;
use crate::vec2::Vec2;
use crate::Error;
use alloc::string::String;
use alloc::vec::Vec;

const ANGLE_TOL: f64 = 1e-12;

/// A simple planar curve with an orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    repr: Repr,
    reversed: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Segment { p0: Vec2, p1: Vec2 },
    Arc { center: Vec2, radius: f64, angle0: f64, angle1: f64 },
    Spline(SplineCurve),
}

impl CurveSpec {
    pub fn segment(p0: Vec2, p1: Vec2) -> Result<CurveSpec, Error> {
        if p0.dist(p1) <= 0.0 {
            return Err(Error::DegenerateCurve("segment endpoints coincide"));
        }
        Ok(CurveSpec { repr: Repr::Segment { p0, p1 }, reversed: false })
    }

    /// Arc of a circle, parametrized counterclockwise from `angle0` to
    /// `angle1 > angle0`. A span of `2π` is a closed circle.
    pub fn arc(center: Vec2, radius: f64, angle0: f64, angle1: f64) -> Result<CurveSpec, Error> {
        if radius <= 0.0 {
            return Err(Error::DegenerateCurve("arc radius must be positive"));
        }
        if angle1 - angle0 <= ANGLE_TOL || angle1 - angle0 > 2.0 * scalar::PI + ANGLE_TOL {
            return Err(Error::DegenerateCurve("arc span must lie in (0, 2π]"));
        }
        Ok(CurveSpec { repr: Repr::Arc { center, radius, angle0, angle1 }, reversed: false })
    }

    pub fn circle(center: Vec2, radius: f64) -> Result<CurveSpec, Error> {
        CurveSpec::arc(center, radius, 0.0, 2.0 * scalar::PI)
    }

    /// Natural cubic spline through the given control points (open curves
    /// only; use a full-circle arc for closed spines).
    pub fn spline(points: &[Vec2]) -> Result<CurveSpec, Error> {
        Ok(CurveSpec { repr: Repr::Spline(SplineCurve::new(points)?), reversed: false })
    }

    /// The same curve traversed in the opposite direction.
    pub fn reversed(mut self) -> CurveSpec {
        self.reversed = !self.reversed;
        self
    }

    pub fn is_closed(&self) -> bool {
        match &self.repr {
            Repr::Segment { .. } => false,
            Repr::Arc { angle0, angle1, .. } => angle1 - angle0 >= 2.0 * scalar::PI - ANGLE_TOL,
            Repr::Spline(_) => false,
        }
    }

    pub fn length(&self) -> f64 {
        match &self.repr {
            Repr::Segment { p0, p1 } => p0.dist(*p1),
            Repr::Arc { radius, angle0, angle1, .. } => radius * (angle1 - angle0),
            Repr::Spline(sp) => sp.length(),
        }
    }

    fn oriented_s(&self, s: f64) -> f64 {
        if self.reversed {
            self.length() - s
        } else {
            s
        }
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = self.oriented_s(s.clamp(0.0, self.length()));
        match &self.repr {
            Repr::Segment { p0, p1 } => {
                let t = s / p0.dist(*p1);
                *p0 + (*p1 - *p0) * t
            }
            Repr::Arc { center, radius, angle0, .. } => {
                let theta = angle0 + s / radius;
                *center + Vec2::unit_from_angle(theta) * *radius
            }
            Repr::Spline(sp) => sp.point_at_arclength(s),
        }
    }

    /// Unit tangent of the oriented parametrization at arclength `s`.
    fn tangent_at(&self, s: f64) -> Vec2 {
        let so = self.oriented_s(s);
        let t = match &self.repr {
            Repr::Segment { p0, p1 } => (*p1 - *p0) * (1.0 / p0.dist(*p1)),
            Repr::Arc { radius, angle0, .. } => {
                let theta = angle0 + so / radius;
                Vec2::new(-scalar::sin(theta), scalar::cos(theta))
            }
            Repr::Spline(sp) => sp.tangent_at_arclength(so),
        };
        if self.reversed {
            -t
        } else {
            t
        }
    }

    /// Frame at arclength `s ∈ [0, length]` with `n = τ` rotated -90 degrees.
    pub fn frame_at(&self, s: f64) -> Result<Frame, Error> {
        let length = self.length();
        if !(-1e-12..=length + 1e-12).contains(&s) {
            return Err(Error::ArclengthOutOfRange { s, length });
        }
        Frame::from_tangent(self.tangent_at(s.clamp(0.0, length)))
    }

    /// Unsigned curvature at arclength `s` (sampled for splines).
    pub fn curvature_at(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Segment { .. } => 0.0,
            Repr::Arc { radius, .. } => 1.0 / radius,
            Repr::Spline(sp) => sp.curvature_at_arclength(self.oriented_s(s.clamp(0.0, self.length()))),
        }
    }

    /// Distance from a point to the curve as a set (endpoints included).
    pub fn distance(&self, p: Vec2) -> f64 {
        match &self.repr {
            Repr::Segment { p0, p1 } => segment_distance(p, *p0, *p1),
            Repr::Arc { center, radius, angle0, angle1 } => {
                let rel = p - *center;
                let r = rel.norm();
                if r == 0.0 {
                    return *radius;
                }
                let phi = scalar::atan2(rel.y, rel.x);
                if angle_in_span(phi, *angle0, *angle1) {
                    scalar::abs(r - radius)
                } else {
                    let a = *center + Vec2::unit_from_angle(*angle0) * *radius;
                    let b = *center + Vec2::unit_from_angle(*angle1) * *radius;
                    p.dist(a).min(p.dist(b))
                }
            }
            Repr::Spline(sp) => sp.distance(p),
        }
    }

    /// Footpoint coordinates `(s, h)` with `p = σ(s) + h n(s)`.
    ///
    /// Returns `None` when the nearest point is an endpoint (cap region) or
    /// the point is otherwise outside the perpendicular tube of the curve.
    pub fn signed_tube_coordinates(&self, p: Vec2) -> Option<TubeCoords> {
        let (s_raw, foot) = match &self.repr {
            Repr::Segment { p0, p1 } => {
                let ab = *p1 - *p0;
                let len = ab.norm();
                let t = (p - *p0).dot(ab) / (len * len);
                if !(0.0..=1.0).contains(&t) {
                    return None;
                }
                (t * len, *p0 + ab * t)
            }
            Repr::Arc { center, radius, angle0, angle1 } => {
                let rel = p - *center;
                if rel.norm() == 0.0 {
                    return None;
                }
                let phi = scalar::atan2(rel.y, rel.x);
                let closed = self.is_closed();
                let phi_span = unwrap_into_span(phi, *angle0, *angle1, closed)?;
                let foot = *center + Vec2::unit_from_angle(phi_span) * *radius;
                ((phi_span - angle0) * radius, foot)
            }
            Repr::Spline(sp) => sp.foot_of(p)?,
        };
        let s = if self.reversed { self.length() - s_raw } else { s_raw };
        let n = self.frame_at(s).ok()?.normal();
        let h = (p - foot).dot(n);
        // reject feet that are not perpendicular (numerical safety net)
        let recon = foot + n * h;
        if recon.dist(p) > 1e-9 * (1.0 + p.norm()) {
            return None;
        }
        Some(TubeCoords { s, h, foot })
    }

    /// Reach surrogate: the curvature-limited radius combined with half the
    /// closest approach between far-apart curve samples. The two-disc
    /// admissibility condition is checked against this estimate.
    pub fn reach_estimate(&self) -> f64 {
        match &self.repr {
            Repr::Segment { .. } => f64::INFINITY,
            Repr::Arc { radius, .. } => *radius,
            Repr::Spline(_) => {
                let length = self.length();
                let m = 400usize;
                let pts: Vec<Vec2> =
                    (0..=m).map(|i| self.point_at(length * i as f64 / m as f64)).collect();
                let mut kappa_max = 0.0f64;
                for i in 0..=m {
                    kappa_max = kappa_max.max(self.curvature_at(length * i as f64 / m as f64));
                }
                let mut reach = if kappa_max > 0.0 { 1.0 / kappa_max } else { f64::INFINITY };
                // pairs separated by more arclength than the curvature arc
                let ds = length / m as f64;
                let min_sep = if kappa_max > 0.0 {
                    scalar::PI / kappa_max
                } else {
                    f64::INFINITY
                };
                for i in 0..=m {
                    for j in (i + 1)..=m {
                        let sep = (j - i) as f64 * ds;
                        if sep >= min_sep {
                            reach = reach.min(pts[i].dist(pts[j]) * 0.5);
                        }
                    }
                }
                reach
            }
        }
    }

    /// Composite Gauss rule along the curve on `[trim, length - trim]`,
    /// returning points, weights, and frames. Weights sum to
    /// `length - 2 trim`.
    pub fn quadrature_nodes(
        &self,
        order: usize,
        panels: usize,
        trim: f64,
    ) -> Result<Vec<CurveNode>, Error> {
        let length = self.length();
        if trim < 0.0 || 2.0 * trim >= length {
            return Err(Error::InvalidTrim { trim, length });
        }
        if self.is_closed() && trim > 0.0 {
            return Err(Error::InvalidTrim { trim, length });
        }
        if panels == 0 {
            return Err(Error::InvalidQuadrature("panel count must be positive"));
        }
        let rule = GaussLegendre::new(order)?;
        let (a, b) = (trim, length - trim);
        let dx = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * dx;
            for (s, w) in rule.mapped(lo, lo + dx) {
                nodes.push(CurveNode {
                    s,
                    point: self.point_at(s),
                    weight: w,
                    frame: self.frame_at(s)?,
                });
            }
        }
        Ok(nodes)
    }

    /// Checks the admissibility conditions against a constant `K`:
    /// distance to the domain boundary, length bounds, a sampled
    /// regularity surrogate, and the reach (two-disc) surrogate.
    pub fn validate(&self, domain: &Domain, k: f64) -> ValidationReport {
        let length = self.length();
        let m = 200usize;
        let mut min_boundary = f64::INFINITY;
        let mut kappa_max = 0.0f64;
        let mut kappa_prev = self.curvature_at(0.0);
        let mut dkappa_max = 0.0f64;
        let ds = length / m as f64;
        for i in 0..=m {
            let s = length * i as f64 / m as f64;
            min_boundary = min_boundary.min(domain.boundary_distance(self.point_at(s)));
            let kappa = self.curvature_at(s);
            kappa_max = kappa_max.max(kappa);
            if i > 0 {
                dkappa_max = dkappa_max.max(scalar::abs(kappa - kappa_prev) / ds);
            }
            kappa_prev = kappa;
        }
        let regularity = kappa_max.max(scalar::sqrt(dkappa_max)).max(1.0);
        let reach = self.reach_estimate();
        let checks = alloc::vec![
            CurveCheck {
                name: "distance to domain boundary >= 1/K",
                ok: min_boundary >= 1.0 / k,
                value: min_boundary,
                bound: 1.0 / k,
            },
            CurveCheck {
                name: "length >= 1/K",
                ok: length >= 1.0 / k,
                value: length,
                bound: 1.0 / k,
            },
            CurveCheck { name: "length <= K", ok: length <= k, value: length, bound: k },
            CurveCheck {
                name: "sampled C3 regularity surrogate <= K",
                ok: regularity <= k,
                value: regularity,
                bound: k,
            },
            CurveCheck {
                name: "two-sided reach >= 1/K",
                ok: reach >= 1.0 / k,
                value: reach,
                bound: 1.0 / k,
            },
        ];
        ValidationReport { checks }
    }
}

/// Tube coordinates of a point: arclength of the footpoint and signed
/// normal offset.
#[derive(Debug, Clone, Copy)]
pub struct TubeCoords {
    pub s: f64,
    pub h: f64,
    pub foot: Vec2,
}

/// One node of a curve quadrature rule.
#[derive(Debug, Clone, Copy)]
pub struct CurveNode {
    pub s: f64,
    pub point: Vec2,
    pub weight: f64,
    pub frame: Frame,
}

/// Outcome of the admissibility checks, one entry per condition.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CurveCheck>,
}

#[derive(Debug, Clone)]
pub struct CurveCheck {
    pub name: &'static str,
    pub ok: bool,
    pub value: f64,
    pub bound: f64,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn render(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {} (value {:.6e}, bound {:.6e})",
                if c.ok { "ok" } else { "VIOLATED" },
                c.name,
                c.value,
                c.bound
            );
        }
        out
    }
}

/// The tube neighborhood of a spine curve: all points within `half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeRegion {
    curve: CurveSpec,
    half_width: f64,
    trim_exponent: f64,
}

impl TubeRegion {
    /// `half_width` is the ε of the tube; `trim_exponent` the β of the
    /// trimmed sub-tube. Requires `0 < ε <` reach and `β ∈ (0, 1)`.
    pub fn new(curve: CurveSpec, half_width: f64, trim_exponent: f64) -> Result<TubeRegion, Error> {
        if half_width <= 0.0 {
            return Err(Error::DegenerateCurve("tube half-width must be positive"));
        }
        if !(0.0..1.0).contains(&trim_exponent) || trim_exponent == 0.0 {
            return Err(Error::DegenerateCurve("trim exponent must lie in (0, 1)"));
        }
        if half_width >= curve.reach_estimate() {
            return Err(Error::DegenerateCurve("tube half-width exceeds curve reach"));
        }
        Ok(TubeRegion { curve, half_width, trim_exponent })
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn trim_exponent(&self) -> f64 {
        self.trim_exponent
    }

    /// Endpoint trim `ε^β` of the reduced tube (zero for closed spines).
    pub fn trim(&self) -> f64 {
        if self.curve.is_closed() {
            0.0
        } else {
            scalar::powf(self.half_width, self.trim_exponent)
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.curve.distance(p) < self.half_width
    }

    /// Exact area of the tube: `2εL` plus the two end half-disks when the
    /// spine is open.
    pub fn area(&self) -> f64 {
        let base = 2.0 * self.half_width * self.curve.length();
        if self.curve.is_closed() {
            base
        } else {
            base + scalar::PI * self.half_width * self.half_width
        }
    }
}

fn angle_in_span(phi: f64, a0: f64, a1: f64) -> bool {
    let span = a1 - a0;
    if span >= 2.0 * scalar::PI - ANGLE_TOL {
        return true;
    }
    let mut d = phi - a0;
    while d < 0.0 {
        d += 2.0 * scalar::PI;
    }
    while d >= 2.0 * scalar::PI {
        d -= 2.0 * scalar::PI;
    }
    d <= span + ANGLE_TOL
}

fn unwrap_into_span(phi: f64, a0: f64, a1: f64, closed: bool) -> Option<f64> {
    if closed {
        let mut d = phi - a0;
        while d < 0.0 {
            d += 2.0 * scalar::PI;
        }
        while d >= 2.0 * scalar::PI {
            d -= 2.0 * scalar::PI;
        }
        return Some(a0 + d);
    }
    for k in [-1.0, 0.0, 1.0] {
        let cand = phi + k * 2.0 * scalar::PI;
        if cand >= a0 - ANGLE_TOL && cand <= a1 + ANGLE_TOL {
            return Some(cand.clamp(a0, a1));
        }
    }
    None
}

/// Natural cubic spline with chord-length parametrization and a dense
/// arclength table for `s ↔ t` conversion.
#[derive(Debug, Clone, PartialEq)]
struct SplineCurve {
    pts: Vec<Vec2>,
    t: Vec<f64>,
    // second derivatives at knots (natural boundary conditions)
    m2: Vec<Vec2>,
    // arclength lookup: s_table[i] is the arclength at t_table[i]
    t_table: Vec<f64>,
    s_table: Vec<f64>,
}

impl SplineCurve {
    fn new(points: &[Vec2]) -> Result<SplineCurve, Error> {
        if points.len() < 3 {
            return Err(Error::DegenerateCurve("spline needs at least 3 control points"));
        }
        let n = points.len();
        let mut t = Vec::with_capacity(n);
        t.push(0.0);
        for i in 1..n {
            let d = points[i].dist(points[i - 1]);
            if d <= 0.0 {
                return Err(Error::DegenerateCurve("repeated spline control point"));
            }
            t.push(t[i - 1] + d);
        }
        let m2 = solve_natural_spline(points, &t);
        let mut sp = SplineCurve { pts: points.to_vec(), t, m2, t_table: Vec::new(), s_table: Vec::new() };
        sp.build_arclength_table();
        Ok(sp)
    }

    fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn eval(&self, t: f64) -> Vec2 {
        let (i, h, a, b) = self.locate(t);
        self.pts[i] * a
            + self.pts[i + 1] * b
            + (self.m2[i] * (a * a * a - a) + self.m2[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }

    fn deriv(&self, t: f64) -> Vec2 {
        let (i, h, a, b) = self.locate(t);
        (self.pts[i + 1] - self.pts[i]) * (1.0 / h)
            + (self.m2[i] * (1.0 - 3.0 * a * a) + self.m2[i + 1] * (3.0 * b * b - 1.0)) * (h / 6.0)
    }

    fn deriv2(&self, t: f64) -> Vec2 {
        let (i, _h, a, b) = self.locate(t);
        self.m2[i] * a + self.m2[i + 1] * b
    }

    fn locate(&self, t: f64) -> (usize, f64, f64, f64) {
        let tc = t.clamp(0.0, self.t_max());
        let mut i = match self.t.binary_search_by(|v| v.partial_cmp(&tc).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= self.t.len() - 1 {
            i = self.t.len() - 2;
        }
        let h = self.t[i + 1] - self.t[i];
        let b = (tc - self.t[i]) / h;
        (i, h, 1.0 - b, b)
    }

    fn build_arclength_table(&mut self) {
        let rule = GaussLegendre::new(8).unwrap();
        let sub = 16usize;
        let mut t_table = Vec::new();
        let mut s_table = Vec::new();
        t_table.push(0.0);
        s_table.push(0.0);
        let mut s = 0.0;
        for i in 0..self.t.len() - 1 {
            let (lo, hi) = (self.t[i], self.t[i + 1]);
            let d = (hi - lo) / sub as f64;
            for j in 0..sub {
                let a = lo + j as f64 * d;
                s += rule.integrate(a, a + d, |x| self.deriv(x).norm());
                t_table.push(a + d);
                s_table.push(s);
            }
        }
        self.t_table = t_table;
        self.s_table = s_table;
    }

    fn length(&self) -> f64 {
        *self.s_table.last().unwrap()
    }

    fn t_of_arclength(&self, s: f64) -> f64 {
        let sc = s.clamp(0.0, self.length());
        let i = match self.s_table.binary_search_by(|v| v.partial_cmp(&sc).unwrap()) {
            Ok(i) => return self.t_table[i],
            Err(i) => i.clamp(1, self.s_table.len() - 1),
        };
        let (s0, s1) = (self.s_table[i - 1], self.s_table[i]);
        let (t0, t1) = (self.t_table[i - 1], self.t_table[i]);
        let mut t = t0 + (t1 - t0) * (sc - s0) / (s1 - s0);
        // Newton refinement of ∫|σ'| = s using the local table anchor
        for _ in 0..8 {
            let rule = GaussLegendre::new(8).unwrap();
            let here = s0 + rule.integrate(t0, t, |x| self.deriv(x).norm());
            let speed = self.deriv(t).norm();
            if speed <= 0.0 {
                break;
            }
            let step = (here - sc) / speed;
            t -= step;
            if scalar::abs(step) < 1e-13 {
                break;
            }
        }
        t.clamp(0.0, self.t_max())
    }

    fn point_at_arclength(&self, s: f64) -> Vec2 {
        self.eval(self.t_of_arclength(s))
    }

    fn tangent_at_arclength(&self, s: f64) -> Vec2 {
        self.deriv(self.t_of_arclength(s)).normalized().unwrap_or(Vec2::EX)
    }

    fn curvature_at_arclength(&self, s: f64) -> f64 {
        let t = self.t_of_arclength(s);
        let d1 = self.deriv(t);
        let d2 = self.deriv2(t);
        let speed = d1.norm();
        if speed <= 0.0 {
            return 0.0;
        }
        scalar::abs(d1.cross(d2)) / (speed * speed * speed)
    }

    fn distance(&self, p: Vec2) -> f64 {
        let (t, _) = self.nearest_t(p);
        p.dist(self.eval(t))
    }

    fn nearest_t(&self, p: Vec2) -> (f64, bool) {
        let m = (self.pts.len() * 32).max(128);
        let tmax = self.t_max();
        let mut best_t = 0.0;
        let mut best_d = f64::INFINITY;
        for i in 0..=m {
            let t = tmax * i as f64 / m as f64;
            let d = p.dist(self.eval(t));
            if d < best_d {
                best_d = d;
                best_t = t;
            }
        }
        let mut t = best_t;
        for _ in 0..12 {
            let r = p - self.eval(t);
            let d1 = self.deriv(t);
            let d2 = self.deriv2(t);
            let g = -r.dot(d1);
            let gp = d1.norm_sq() - r.dot(d2);
            if scalar::abs(gp) < 1e-14 {
                break;
            }
            let step = g / gp;
            t = (t - step).clamp(0.0, tmax);
            if scalar::abs(step) < 1e-13 {
                break;
            }
        }
        let interior = t > 1e-12 && t < tmax - 1e-12;
        (t, interior)
    }

    fn foot_of(&self, p: Vec2) -> Option<(f64, Vec2)> {
        let (t, interior) = self.nearest_t(p);
        let foot = self.eval(t);
        let tang = self.deriv(t).normalized()?;
        let ortho = scalar::abs((p - foot).dot(tang));
        if !interior && ortho > 1e-9 * (1.0 + p.norm()) {
            return None;
        }
        // arclength of the foot
        let i = self
            .t_table
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
            .unwrap_or_else(|i| i.clamp(1, self.t_table.len() - 1));
        let s = if self.t_table[i] >= t && i > 0 {
            let rule = GaussLegendre::new(8).unwrap();
            self.s_table[i - 1] + rule.integrate(self.t_table[i - 1], t, |x| self.deriv(x).norm())
        } else {
            self.s_table[i]
        };
        Some((s, foot))
    }
}

fn solve_natural_spline(pts: &[Vec2], t: &[f64]) -> Vec<Vec2> {
    let n = pts.len();
    let mut m2 = alloc::vec![Vec2::ZERO; n];
    if n < 3 {
        return m2;
    }
    // tridiagonal system for interior second derivatives
    let k = n - 2;
    let mut diag = alloc::vec![0.0; k];
    let mut lower = alloc::vec![0.0; k];
    let mut upper = alloc::vec![0.0; k];
    let mut rhs = alloc::vec![Vec2::ZERO; k];
    for i in 0..k {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        lower[i] = h0;
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = ((pts[i + 2] - pts[i + 1]) * (1.0 / h1) - (pts[i + 1] - pts[i]) * (1.0 / h0)) * 6.0;
    }
    // Thomas algorithm
    for i in 1..k {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] = rhs[i] - rhs[i - 1] * w;
    }
    let mut x = alloc::vec![Vec2::ZERO; k];
    x[k - 1] = rhs[k - 1] * (1.0 / diag[k - 1]);
    for i in (0..k - 1).rev() {
        x[i] = (rhs[i] - x[i + 1] * upper[i]) * (1.0 / diag[i]);
    }
    m2[1..=k].copy_from_slice(&x);
    m2
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::*;
    use serde::{Deserialize, Serialize};

    /// Wire format of a curve: tagged by `kind`.
    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "lowercase")]
    enum CurveJson {
        Segment { p0: Vec2, p1: Vec2, #[serde(default)] reversed: bool },
        Arc {
            center: Vec2,
            radius: f64,
            angle0: f64,
            angle1: f64,
            #[serde(default)]
            reversed: bool,
        },
        Spline { points: Vec<Vec2>, #[serde(default)] reversed: bool },
    }

    impl Serialize for CurveSpec {
        fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            let j = match &self.repr {
                Repr::Segment { p0, p1 } => {
                    CurveJson::Segment { p0: *p0, p1: *p1, reversed: self.reversed }
                }
                Repr::Arc { center, radius, angle0, angle1 } => CurveJson::Arc {
                    center: *center,
                    radius: *radius,
                    angle0: *angle0,
                    angle1: *angle1,
                    reversed: self.reversed,
                },
                Repr::Spline(sp) => {
                    CurveJson::Spline { points: sp.pts.clone(), reversed: self.reversed }
                }
            };
            j.serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for CurveSpec {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            let j = CurveJson::deserialize(d)?;
            let (built, reversed) = match j {
                CurveJson::Segment { p0, p1, reversed } => {
                    (CurveSpec::segment(p0, p1), reversed)
                }
                CurveJson::Arc { center, radius, angle0, angle1, reversed } => {
                    (CurveSpec::arc(center, radius, angle0, angle1), reversed)
                }
                CurveJson::Spline { points, reversed } => (CurveSpec::spline(&points), reversed),
            };
            let mut c = built.map_err(serde::de::Error::custom)?;
            if reversed {
                c = c.reversed();
            }
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn segment_frame_is_constant() {
        let c = CurveSpec::segment(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        for s in [0.0, 0.3, 1.0] {
            let f = c.frame_at(s).unwrap();
            assert!((f.tangent() - Vec2::new(1.0, 0.0)).norm() < 1e-15);
            assert!((f.normal() - Vec2::new(0.0, -1.0)).norm() < 1e-15);
        }
        assert!(c.frame_at(1.5).is_err());
    }

    #[test]
    fn circle_normal_points_outward() {
        let r = 0.7;
        let c = CurveSpec::circle(Vec2::ZERO, r).unwrap();
        assert!(c.is_closed());
        let f = c.frame_at(0.0).unwrap();
        assert!((f.normal() - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((c.length() - 2.0 * scalar::PI * r).abs() < 1e-12);
    }

    #[test]
    fn frames_are_orthonormal_everywhere() {
        let curves = [
            CurveSpec::segment(Vec2::new(-0.2, 0.1), Vec2::new(0.4, 0.5)).unwrap(),
            CurveSpec::arc(Vec2::new(0.1, 0.0), 0.5, -0.4, 1.7).unwrap(),
            CurveSpec::spline(&[
                Vec2::new(-0.4, 0.0),
                Vec2::new(-0.1, 0.15),
                Vec2::new(0.2, -0.05),
                Vec2::new(0.45, 0.1),
            ])
            .unwrap(),
        ];
        let mut rng = SplitMix64::new(83);
        for c in &curves {
            for _ in 0..100 {
                let s = rng.uniform(0.0, c.length());
                let f = c.frame_at(s).unwrap();
                assert!((f.normal().norm() - 1.0).abs() < 1e-12);
                assert!((f.tangent().norm() - 1.0).abs() < 1e-12);
                assert!(f.normal().dot(f.tangent()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversed_flips_tangent_and_point() {
        let c = CurveSpec::segment(Vec2::ZERO, Vec2::new(2.0, 0.0)).unwrap();
        let r = c.clone().reversed();
        assert!((r.point_at(0.0) - Vec2::new(2.0, 0.0)).norm() < 1e-15);
        assert!((r.frame_at(0.5).unwrap().tangent() + Vec2::EX).norm() < 1e-15);
    }

    #[test]
    fn tube_coords_on_segment() {
        let c = CurveSpec::segment(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        let tc = c.signed_tube_coordinates(Vec2::new(0.5, -0.2)).unwrap();
        assert!((tc.s - 0.5).abs() < 1e-12);
        assert!((tc.h - 0.2).abs() < 1e-12);
        let on = c.signed_tube_coordinates(Vec2::new(0.3, 0.0)).unwrap();
        assert!(on.h.abs() < 1e-15);
        assert!(c.signed_tube_coordinates(Vec2::new(1.4, 0.1)).is_none());
    }

    #[test]
    fn tube_coords_round_trip() {
        let curves = [
            CurveSpec::segment(Vec2::new(-0.3, -0.1), Vec2::new(0.5, 0.2)).unwrap(),
            CurveSpec::arc(Vec2::new(0.0, 0.1), 0.6, 0.3, 2.1).unwrap(),
            CurveSpec::spline(&[
                Vec2::new(-0.4, 0.0),
                Vec2::new(0.0, 0.12),
                Vec2::new(0.3, 0.05),
                Vec2::new(0.5, -0.1),
            ])
            .unwrap(),
        ];
        let mut rng = SplitMix64::new(89);
        for c in &curves {
            let len = c.length();
            let mut hits = 0usize;
            for _ in 0..1000 {
                let s = rng.uniform(0.05 * len, 0.95 * len);
                let h = rng.uniform(-0.05, 0.05);
                let f = c.frame_at(s).unwrap();
                let p = c.point_at(s) + f.normal() * h;
                let Some(tc) = c.signed_tube_coordinates(p) else {
                    continue;
                };
                hits += 1;
                let recon = c.point_at(tc.s) + c.frame_at(tc.s).unwrap().normal() * tc.h;
                assert!(recon.dist(p) < 1e-10, "round trip failed: {:?}", recon.dist(p));
                // |h| must match the set distance
                assert!((tc.h.abs() - c.distance(p)).abs() < 1e-9);
            }
            assert!(hits > 900, "too many projection failures: {hits}");
        }
    }

    #[test]
    fn distance_matches_bruteforce() {
        let c = CurveSpec::spline(&[
            Vec2::new(-0.4, 0.0),
            Vec2::new(0.0, 0.2),
            Vec2::new(0.4, -0.1),
            Vec2::new(0.7, 0.15),
        ])
        .unwrap();
        let mut rng = SplitMix64::new(97);
        let len = c.length();
        for _ in 0..200 {
            let p = Vec2::new(rng.uniform(-0.6, 0.9), rng.uniform(-0.5, 0.5));
            // coarse scan then ternary refinement around the best sample
            let m = 4000usize;
            let mut best_i = 0usize;
            let mut brute = f64::INFINITY;
            for i in 0..=m {
                let s = len * i as f64 / m as f64;
                let d = p.dist(c.point_at(s));
                if d < brute {
                    brute = d;
                    best_i = i;
                }
            }
            let mut lo = len * best_i.saturating_sub(1) as f64 / m as f64;
            let mut hi = len * (best_i + 1).min(m) as f64 / m as f64;
            for _ in 0..80 {
                let s1 = lo + (hi - lo) / 3.0;
                let s2 = hi - (hi - lo) / 3.0;
                if p.dist(c.point_at(s1)) < p.dist(c.point_at(s2)) {
                    hi = s2;
                } else {
                    lo = s1;
                }
            }
            brute = brute.min(p.dist(c.point_at(0.5 * (lo + hi))));
            let got = c.distance(p);
            assert!(
                (got - brute).abs() < 1e-9,
                "distance vs refined nearest-point search: got {got}, brute {brute} at {p:?}"
            );
        }
    }

    #[test]
    fn quadrature_constant_and_linear() {
        let c = CurveSpec::segment(Vec2::ZERO, Vec2::new(0.0, 0.8)).unwrap();
        let nodes = c.quadrature_nodes(6, 8, 0.0).unwrap();
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        assert!((total - 0.8).abs() < 1e-12);
        let int_s: f64 = nodes.iter().map(|n| n.weight * n.s).sum();
        assert!((int_s - 0.8 * 0.8 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_weights_positive_and_scale_with_panels() {
        let c = CurveSpec::arc(Vec2::ZERO, 0.5, 0.0, 2.0).unwrap();
        let n1 = c.quadrature_nodes(4, 3, 0.0).unwrap();
        let n2 = c.quadrature_nodes(4, 6, 0.0).unwrap();
        assert_eq!(n1.len() * 2, n2.len());
        assert!(n1.iter().all(|n| n.weight > 0.0));
    }

    #[test]
    fn quadrature_trim_reduces_support() {
        let c = CurveSpec::segment(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        let trim = 0.1;
        let nodes = c.quadrature_nodes(4, 8, trim).unwrap();
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        assert!((total - 0.8).abs() < 1e-12);
        assert!(nodes.iter().all(|n| n.s >= trim && n.s <= 1.0 - trim));
        assert!(c.quadrature_nodes(4, 8, 0.5).is_err());
    }

    #[test]
    fn curve_arclength_consistency_on_spline() {
        let c = CurveSpec::spline(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.3, 0.1),
            Vec2::new(0.6, 0.05),
            Vec2::new(1.0, 0.2),
        ])
        .unwrap();
        // consecutive points separated by equal arclength must be equidistant
        // along the curve to high order
        let len = c.length();
        let m = 50;
        for i in 0..m {
            let s0 = len * i as f64 / m as f64;
            let s1 = len * (i + 1) as f64 / m as f64;
            let chord = c.point_at(s0).dist(c.point_at(s1));
            assert!(chord <= (s1 - s0) * (1.0 + 1e-6));
            assert!(chord >= (s1 - s0) * 0.98);
        }
    }

    #[test]
    fn validate_baseline_segment() {
        let domain = Domain::unit_disk();
        let c = CurveSpec::segment(Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0)).unwrap();
        let r = c.validate(&domain, 10.0);
        assert!(r.all_ok(), "{}", r.render());
    }

    #[test]
    fn validate_flags_boundary_contact() {
        let domain = Domain::unit_disk();
        let c = CurveSpec::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        let r = c.validate(&domain, 10.0);
        assert!(!r.checks[0].ok, "distance check must fail");
    }

    #[test]
    fn validate_flags_small_circle_reach() {
        let domain = Domain::unit_disk();
        let c = CurveSpec::circle(Vec2::ZERO, 0.05).unwrap();
        let r = c.validate(&domain, 10.0);
        let reach_check = r.checks.iter().find(|c| c.name.contains("reach")).unwrap();
        assert!(!reach_check.ok, "reach 0.05 < 0.1 must fail");
        assert!((reach_check.value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn tube_region_guards() {
        let c = CurveSpec::circle(Vec2::ZERO, 0.3).unwrap();
        assert!(TubeRegion::new(c.clone(), 0.4, 0.45).is_err());
        let t = TubeRegion::new(c, 0.05, 0.45).unwrap();
        assert_eq!(t.trim(), 0.0);
        assert!((t.area() - 2.0 * 0.05 * 2.0 * scalar::PI * 0.3).abs() < 1e-12);
        let seg = CurveSpec::segment(Vec2::ZERO, Vec2::new(0.6, 0.0)).unwrap();
        let ts = TubeRegion::new(seg, 0.02, 0.45).unwrap();
        assert!((ts.trim() - scalar::powf(0.02, 0.45)).abs() < 1e-15);
        assert!(ts.contains(Vec2::new(0.61, 0.0)));
        assert!(!ts.contains(Vec2::new(0.63, 0.0)));
    }
}
