//! Bounded planar domains: disks and convex polygons.

use crate::scalar;
use crate::vec2::Vec2;
use alloc::vec::Vec;

/// The region occupied by the elastic body.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Domain {
    Disk { center: Vec2, radius: f64 },
    /// Vertices in counterclockwise order. Meshing assumes convexity.
    Polygon { vertices: Vec<Vec2> },
}

impl Domain {
    pub fn unit_disk() -> Domain {
        Domain::Disk { center: Vec2::ZERO, radius: 1.0 }
    }

    pub fn unit_square() -> Domain {
        Domain::Polygon {
            vertices: alloc::vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.boundary_distance(p) > 0.0
    }

    /// Signed distance to the boundary: positive inside.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        match self {
            Domain::Disk { center, radius } => radius - p.dist(*center),
            Domain::Polygon { vertices } => {
                let mut min_edge = f64::INFINITY;
                let mut inside = true;
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    min_edge = min_edge.min(segment_distance(p, a, b));
                    if (b - a).cross(p - a) < 0.0 {
                        inside = false;
                    }
                }
                if inside {
                    min_edge
                } else {
                    -min_edge
                }
            }
        }
    }

    pub fn boundary_length(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => 2.0 * scalar::PI * radius,
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).sum()
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => scalar::PI * radius * radius,
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum::<f64>()
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            Domain::Disk { center, radius } => (
                Vec2::new(center.x - radius, center.y - radius),
                Vec2::new(center.x + radius, center.y + radius),
            ),
            Domain::Polygon { vertices } => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                }
                (lo, hi)
            }
        }
    }
}

pub(crate) fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_distance_and_area() {
        let d = Domain::unit_disk();
        assert!((d.boundary_distance(Vec2::ZERO) - 1.0).abs() < 1e-15);
        assert!((d.boundary_distance(Vec2::new(0.6, 0.0)) - 0.4).abs() < 1e-15);
        assert!(d.boundary_distance(Vec2::new(2.0, 0.0)) < 0.0);
        assert!((d.area() - scalar::PI).abs() < 1e-15);
    }

    #[test]
    fn square_distance_inside_outside() {
        let s = Domain::unit_square();
        assert!((s.boundary_distance(Vec2::new(0.5, 0.5)) - 0.5).abs() < 1e-15);
        assert!((s.boundary_distance(Vec2::new(0.5, -0.25)) + 0.25).abs() < 1e-15);
        assert!((s.area() - 1.0).abs() < 1e-15);
        assert!((s.boundary_length() - 4.0).abs() < 1e-15);
    }
}
