//! Ellipse distance and projection.
//!
//! The nearest point on `(x/a)^2 + (y/b)^2 = 1` (with `a >= b`) to a point in
//! the closed first quadrant is obtained from the Lagrange-multiplier root of
//! `G(s) = (r0 z0 / (s + r0))^2 + (z1 / (s + 1))^2 - 1`, which is convex and
//! strictly decreasing on the admissible bracket. Newton from the left end of
//! the bracket converges monotonically; bisection takes over whenever a step
//! would leave the bracket.

use super::Vec2;

#[derive(Clone, Debug)]
pub(crate) struct EllipseGeom {
    pub center: Vec2,
    pub a: f64,
    pub b: f64,
    pub rotation: f64,
    cos: f64,
    sin: f64,
}

impl EllipseGeom {
    pub fn new(center: Vec2, a: f64, b: f64, rotation: f64) -> Self {
        Self {
            center,
            a,
            b,
            rotation,
            cos: rotation.cos(),
            sin: rotation.sin(),
        }
    }

    pub fn to_local(&self, x: Vec2) -> Vec2 {
        let d = x - self.center;
        Vec2::new(self.cos * d.x + self.sin * d.y, -self.sin * d.x + self.cos * d.y)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.center + self.rotate(p)
    }

    pub fn rotate(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }

    pub fn contains_local(&self, p: Vec2) -> bool {
        let q = (p.x / self.a).powi(2) + (p.y / self.b).powi(2);
        q <= 1.0
    }

    /// Nearest boundary point in local coordinates.
    pub fn nearest_local(&self, p: Vec2) -> Vec2 {
        let q = nearest_first_quadrant(self.a, self.b, p.x.abs(), p.y.abs());
        Vec2::new(if p.x < 0.0 { -q.x } else { q.x }, if p.y < 0.0 { -q.y } else { q.y })
    }

    pub fn signed_distance(&self, x: Vec2) -> f64 {
        let p = self.to_local(x);
        let q = self.nearest_local(p);
        let d = (p - q).norm();
        if self.contains_local(p) {
            d
        } else {
            -d
        }
    }

    /// Inward unit normal at a boundary point given in local coordinates.
    pub fn inward_normal_local(&self, q: Vec2) -> Vec2 {
        let n = Vec2::new(q.x / (self.a * self.a), q.y / (self.b * self.b));
        -n / n.norm()
    }

    pub fn curvature_local(&self, q: Vec2) -> f64 {
        let (a, b) = (self.a, self.b);
        let t = b * b * q.x * q.x / (a * a) + a * a * q.y * q.y / (b * b);
        a * b / t.powf(1.5)
    }

    /// Parameter interval `{t : x + t u inside}` for a line, if it meets the ellipse.
    pub fn chord(&self, x: Vec2, u: Vec2) -> Option<(f64, f64)> {
        let p = self.to_local(x);
        let v = Vec2::new(self.cos * u.x + self.sin * u.y, -self.sin * u.x + self.cos * u.y);
        let (ia2, ib2) = (1.0 / (self.a * self.a), 1.0 / (self.b * self.b));
        let qa = v.x * v.x * ia2 + v.y * v.y * ib2;
        let qb = 2.0 * (p.x * v.x * ia2 + p.y * v.y * ib2);
        let qc = p.x * p.x * ia2 + p.y * p.y * ib2 - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // Numerically stable pair of roots.
        let k = -0.5 * (qb + sq.copysign(qb));
        let (r1, r2) = if k != 0.0 { (k / qa, qc / k) } else { (0.0, 0.0) };
        Some((r1.min(r2), r1.max(r2)))
    }

    pub fn perimeter(&self) -> f64 {
        // Trapezoid rule is spectrally accurate for the periodic integrand.
        let n = 4096;
        let h = std::f64::consts::TAU / n as f64;
        (0..n)
            .map(|k| {
                let t = k as f64 * h;
                (self.a * self.a * t.sin().powi(2) + self.b * self.b * t.cos().powi(2)).sqrt()
            })
            .sum::<f64>()
            * h
    }
}

fn nearest_first_quadrant(a: f64, b: f64, y0: f64, y1: f64) -> Vec2 {
    if a == b {
        let r = (y0 * y0 + y1 * y1).sqrt();
        if r == 0.0 {
            return Vec2::new(a, 0.0);
        }
        return Vec2::new(a * y0 / r, a * y1 / r);
    }
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / a;
            let z1 = y1 / b;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (a / b) * (a / b);
                let t = lagrange_root(r0, z0, z1, g);
                Vec2::new(r0 * y0 / (t + r0 - 1.0), y1 / t)
            } else {
                Vec2::new(y0, y1)
            }
        } else {
            Vec2::new(0.0, b)
        }
    } else {
        let numer = a * y0;
        let denom = a * a - b * b;
        if numer < denom {
            let xd = numer / denom;
            Vec2::new(a * xd, b * (1.0 - xd * xd).max(0.0).sqrt())
        } else {
            Vec2::new(a, 0.0)
        }
    }
}

/// Root `t = s + 1` of the secular equation, solved in the shifted variable
/// so that points near the major axis (`t ~ z1`) keep full relative precision.
fn lagrange_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let r1 = r0 - 1.0;
    let eval = |t: f64| {
        let ra = n0 / (t + r1);
        let rb = z1 / t;
        let val = ra * ra + rb * rb - 1.0;
        let der = -2.0 * (ra * ra / (t + r1) + rb * rb / t);
        (val, der)
    };
    let mut lo = z1;
    let mut hi = if g < 0.0 { 1.0 } else { n0.hypot(z1) };
    let mut t = lo;
    for _ in 0..200 {
        let (val, der) = eval(t);
        if val.abs() <= 1e-15 {
            return t;
        }
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - val / der;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * t.abs().max(1e-300) {
            return next;
        }
        t = next;
    }
    t
}
