//! Rounded convex polygons: the Minkowski sum of a convex polygon with a
//! closed disk of radius `rho`. A two-vertex polygon is a segment, which
//! makes the stadium a special case.

use super::Vec2;
use crate::error::{Error, Result};

const CORNER_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct PolygonGeom {
    /// Counter-clockwise vertices.
    pub vertices: Vec<Vec2>,
    pub rho: f64,
}

/// Nearest point of the polygon boundary, with the edge it lies on and the
/// clamped edge parameter in `[0, 1]`.
struct Foot {
    point: Vec2,
    edge: usize,
    t: f64,
    dist: f64,
}

impl PolygonGeom {
    pub fn new(mut vertices: Vec<Vec2>, rho: f64) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid("polygon needs at least two vertices"));
        }
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::invalid("rounding radius must be finite and >= 0"));
        }
        if vertices.len() >= 3 {
            if signed_area(&vertices) < 0.0 {
                vertices.reverse();
            }
            let n = vertices.len();
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let c = vertices[(i + 2) % n];
                if cross(b - a, c - b) <= 0.0 {
                    return Err(Error::invalid("polygon vertices are not in strictly convex position"));
                }
            }
        } else {
            if (vertices[1] - vertices[0]).norm() == 0.0 {
                return Err(Error::invalid("segment endpoints coincide"));
            }
            if rho == 0.0 {
                return Err(Error::invalid("a segment needs a positive radius"));
            }
        }
        Ok(Self { vertices, rho })
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    fn is_segment(&self) -> bool {
        self.vertices.len() == 2
    }

    fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % self.n()])
    }

    /// Outward unit normal of edge `i` (for a segment, edge 0 uses the right
    /// side and edge 1 runs back along it).
    fn edge_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Vec2::new(t.y, -t.x)
    }

    fn edges(&self) -> usize {
        self.n()
    }

    fn inside_core(&self, x: Vec2) -> bool {
        if self.is_segment() {
            return false;
        }
        (0..self.n()).all(|i| {
            let (a, b) = self.edge(i);
            cross(b - a, x - a) >= 0.0
        })
    }

    fn foot(&self, x: Vec2) -> Foot {
        let mut best = Foot {
            point: self.vertices[0],
            edge: 0,
            t: 0.0,
            dist: f64::INFINITY,
        };
        let m = if self.is_segment() { 1 } else { self.edges() };
        for i in 0..m {
            let (a, b) = self.edge(i);
            let e = b - a;
            let t = ((x - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            let p = a + e * t;
            let d = (x - p).norm();
            if d < best.dist {
                best = Foot {
                    point: p,
                    edge: i,
                    t,
                    dist: d,
                };
            }
        }
        best
    }

    pub fn signed_distance(&self, x: Vec2) -> f64 {
        let f = self.foot(x);
        if self.inside_core(x) {
            self.rho + f.dist
        } else {
            self.rho - f.dist
        }
    }

    pub fn projection(&self, x: Vec2) -> Vec2 {
        let f = self.foot(x);
        if self.inside_core(x) {
            return f.point + self.edge_normal(f.edge) * self.rho;
        }
        if f.dist > 0.0 {
            f.point + (x - f.point) * (self.rho / f.dist)
        } else {
            // On the core boundary: ties broken towards the edge normal.
            f.point + self.edge_normal(f.edge) * self.rho
        }
    }

    /// Inward normal and curvature at a boundary point.
    pub fn frame(&self, p: Vec2) -> Result<(Vec2, f64)> {
        let f = self.foot(p);
        let at_vertex = f.t <= CORNER_TOL || f.t >= 1.0 - CORNER_TOL;
        if self.rho == 0.0 {
            if at_vertex {
                return Err(Error::Undefined("normal undefined at corner"));
            }
            return Ok((-self.edge_normal(f.edge), 0.0));
        }
        let out = if f.dist > 0.0 {
            (p - f.point) / f.dist
        } else {
            self.edge_normal(f.edge)
        };
        // On an arc when the foot is a vertex and the direction is strictly
        // inside the normal cone of that vertex.
        let n = self.edge_normal(f.edge);
        let on_arc = at_vertex && (1.0 - out.dot(&n)).abs() > 1e-12;
        let kappa = if on_arc { 1.0 / self.rho } else { 0.0 };
        Ok((-out, kappa))
    }

    pub fn core_perimeter(&self) -> f64 {
        (0..self.edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b - a).norm()
            })
            .sum()
    }

    pub fn core_area(&self) -> f64 {
        if self.is_segment() {
            0.0
        } else {
            signed_area(&self.vertices)
        }
    }

    pub fn area(&self) -> f64 {
        self.core_area() + self.rho * self.core_perimeter() + std::f64::consts::PI * self.rho * self.rho
    }

    pub fn perimeter(&self) -> f64 {
        self.core_perimeter() + std::f64::consts::TAU * self.rho
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d + 2.0 * self.rho
    }

    /// Centroid of the rounded region: core polygon, one rectangle per edge
    /// and one circular sector per vertex.
    pub fn centroid(&self) -> Vec2 {
        let rho = self.rho;
        let mut moment = Vec2::zeros();
        let mut area = 0.0;
        if !self.is_segment() {
            let (c, a) = polygon_centroid(&self.vertices);
            moment += c * a;
            area += a;
        }
        for i in 0..self.edges() {
            let (a, b) = self.edge(i);
            let len = (b - a).norm();
            let n = self.edge_normal(i);
            let c = (a + b) * 0.5 + n * (0.5 * rho);
            moment += c * (len * rho);
            area += len * rho;
        }
        for i in 0..self.n() {
            let v = self.vertices[i];
            let n_prev = self.edge_normal((i + self.n() - 1) % self.n());
            let n_next = self.edge_normal(i);
            let phi = exterior_angle(n_prev, n_next);
            if phi <= 0.0 || rho == 0.0 {
                continue;
            }
            let bis = (n_prev + n_next)
                .try_normalize(1e-15)
                .unwrap_or_else(|| Vec2::new(-n_prev.y, n_prev.x));
            let dist = 4.0 * rho * (0.5 * phi).sin() / (3.0 * phi);
            let a = 0.5 * rho * rho * phi;
            moment += (v + bis * dist) * a;
            area += a;
        }
        moment / area
    }

    /// Boundary point at arclength `s` along the rounded outline, with its
    /// inward normal and curvature.
    pub fn point_at_arclength(&self, s: f64) -> (Vec2, Vec2, f64) {
        let n = self.n();
        let rho = self.rho;
        let total = self.perimeter();
        let mut s = s.rem_euclid(total);
        for i in 0..n {
            let v = self.vertices[i];
            let n_prev = self.edge_normal((i + n - 1) % n);
            let n_next = self.edge_normal(i);
            let phi = exterior_angle(n_prev, n_next);
            let arc = rho * phi;
            if s < arc {
                let ang = s / rho;
                let dir = rotate(n_prev, ang);
                return (v + dir * rho, -dir, 1.0 / rho);
            }
            s -= arc;
            let (a, b) = self.edge(i);
            let len = (b - a).norm();
            if s < len || i == n - 1 {
                let t = (s / len).min(1.0);
                return (a + (b - a) * t + n_next * rho, -n_next, 0.0);
            }
            s -= len;
        }
        unreachable!()
    }

    pub fn transformed(&self, scale: f64, shift: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v * scale + shift).collect(),
            rho: self.rho * scale,
        }
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn rotate(v: Vec2, ang: f64) -> Vec2 {
    let (s, c) = ang.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Counter-clockwise turning angle from `a` to `b` in `[0, 2pi)`.
fn exterior_angle(a: Vec2, b: Vec2) -> f64 {
    let ang = cross(a, b).atan2(a.dot(&b));
    if ang < -1e-15 {
        ang + std::f64::consts::TAU
    } else if ang.abs() <= 1e-15 && a.dot(&b) < 0.0 {
        std::f64::consts::PI
    } else {
        ang.max(0.0)
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn polygon_centroid(v: &[Vec2]) -> (Vec2, f64) {
    let n = v.len();
    let mut c = Vec2::zeros();
    let mut a = 0.0;
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        let w = cross(p, q);
        a += w;
        c += (p + q) * w;
    }
    (c / (3.0 * a), 0.5 * a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(rho: f64) -> PolygonGeom {
        PolygonGeom::new(
            vec![
                Vec2::new(-0.5, -0.5),
                Vec2::new(0.5, -0.5),
                Vec2::new(0.5, 0.5),
                Vec2::new(-0.5, 0.5),
            ],
            rho,
        )
        .unwrap()
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = PolygonGeom::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)], 0.0).unwrap();
        assert!(signed_area(&p.vertices) > 0.0);
    }

    #[test]
    fn rejects_reflex_vertex() {
        let r = PolygonGeom::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(1.0, 0.2),
                Vec2::new(2.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            0.1,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rounded_square_measures() {
        let p = square(0.1);
        let pi = std::f64::consts::PI;
        assert!((p.area() - (1.0 + 0.4 + pi * 0.01)).abs() < 1e-14);
        assert!((p.perimeter() - (4.0 + 0.2 * pi)).abs() < 1e-14);
        assert!(p.centroid().norm() < 1e-14);
        assert!((p.signed_distance(Vec2::zeros()) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn arclength_walk_stays_on_boundary() {
        let p = square(0.2);
        let total = p.perimeter();
        for k in 0..400 {
            let s = total * k as f64 / 400.0;
            let (x, n, _) = p.point_at_arclength(s);
            assert!(p.signed_distance(x).abs() < 1e-12);
            let (n2, _) = p.frame(x).unwrap();
            assert!((n - n2).norm() < 1e-9, "s={s} {n:?} {n2:?}");
        }
    }

    #[test]
    fn sharp_corner_has_no_normal() {
        let p = square(0.0);
        assert!(p.frame(Vec2::new(0.5, 0.5)).is_err());
        let (n, k) = p.frame(Vec2::new(0.5, 0.1)).unwrap();
        assert!((n - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(k, 0.0);
    }
}
