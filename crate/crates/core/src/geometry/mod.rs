//! Convex planar domains.
//!
//! Every shape family has a closed-form or one-dimensional root-finding
//! implementation of signed distance, metric projection, inward normal and
//! curvature. Signed distance is positive inside.

mod ellipse;
mod polygon;
mod symdiff;

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::numerics::{brent_root, gauss_legendre, golden_max};
use ellipse::EllipseGeom;
use polygon::PolygonGeom;

pub use symdiff::{best_fit_ball, disk_symmetric_difference};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Serializable description of a domain.
///
/// ```json
/// {"shape": "ellipse", "a": 1.05, "b": 0.9524, "rotation": 0}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        #[serde(default)]
        center: [f64; 2],
        a: f64,
        b: f64,
        #[serde(default)]
        rotation: f64,
    },
    RoundedPolygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        rho: f64,
    },
    Stadium {
        p0: [f64; 2],
        p1: [f64; 2],
        radius: f64,
    },
    /// Minkowski enlargement of `base` by a disk of radius `r`.
    Offset {
        base: Box<Shape>,
        r: f64,
    },
}

/// Geometric tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute distance tolerance.
    pub geom: f64,
    /// Relative area tolerance (multiplied by the domain area).
    pub area: f64,
    /// Step size at which the best-fit-ball search stops.
    pub center: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            geom: 1e-9,
            area: 1e-6,
            center: 1e-5,
        }
    }
}

/// A boundary point with its local frame.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySample {
    pub point: Vec2,
    pub inward_normal: Vec2,
    pub curvature: f64,
    pub arclength: f64,
}

#[derive(Clone, Debug)]
enum Geom {
    Disk {
        center: Vec2,
        radius: f64,
    },
    /// Ellipse enlarged by `r >= 0`.
    Ellipse {
        e: EllipseGeom,
        r: f64,
    },
    Polygon(PolygonGeom),
}

/// Closed convex planar region.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct ConvexDomain {
    geom: Geom,
    #[serde(skip)]
    pub tolerances: Tolerances,
    /// Cumulative arclength table for curved shapes: parameter values and
    /// arclength at each.
    #[serde(skip)]
    arc_table: Option<ArcTable>,
}

#[derive(Clone, Debug)]
struct ArcTable {
    params: Vec<f64>,
    lengths: Vec<f64>,
}

impl TryFrom<Shape> for ConvexDomain {
    type Error = Error;
    fn try_from(s: Shape) -> Result<Self> {
        ConvexDomain::new(s)
    }
}

impl From<ConvexDomain> for Shape {
    fn from(d: ConvexDomain) -> Shape {
        d.shape()
    }
}

fn v(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn arr(p: Vec2) -> [f64; 2] {
    [p.x, p.y]
}

fn finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite")))
    }
}

impl ConvexDomain {
    pub fn new(shape: Shape) -> Result<Self> {
        let geom = Self::compile(&shape)?;
        Ok(Self::from_geom(geom))
    }

    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        Self::new(Shape::Disk {
            center: arr(center),
            radius,
        })
    }

    pub fn unit_disk() -> Self {
        Self::disk(Vec2::zeros(), 1.0).expect("unit disk")
    }

    pub fn ellipse(center: Vec2, a: f64, b: f64, rotation: f64) -> Result<Self> {
        Self::new(Shape::Ellipse {
            center: arr(center),
            a,
            b,
            rotation,
        })
    }

    /// Centered ellipse with area `pi` and aspect ratio `a / b = aspect`.
    pub fn unit_area_ellipse(aspect: f64) -> Result<Self> {
        let a = aspect.sqrt();
        Self::ellipse(Vec2::zeros(), a, 1.0 / a, 0.0)
    }

    pub fn rounded_polygon(vertices: Vec<Vec2>, rho: f64) -> Result<Self> {
        Self::new(Shape::RoundedPolygon {
            vertices: vertices.into_iter().map(arr).collect(),
            rho,
        })
    }

    pub fn stadium(p0: Vec2, p1: Vec2, radius: f64) -> Result<Self> {
        Self::new(Shape::Stadium {
            p0: arr(p0),
            p1: arr(p1),
            radius,
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    fn from_geom(geom: Geom) -> Self {
        let arc_table = match &geom {
            Geom::Ellipse { e, r } => Some(ArcTable::build(e, *r)),
            _ => None,
        };
        Self {
            geom,
            tolerances: Tolerances::default(),
            arc_table,
        }
    }

    fn compile(shape: &Shape) -> Result<Geom> {
        match shape {
            Shape::Disk { center, radius } => {
                finite(center[0] + center[1], "center")?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("disk radius must be positive"));
                }
                Ok(Geom::Disk {
                    center: v(*center),
                    radius: *radius,
                })
            }
            Shape::Ellipse { center, a, b, rotation } => {
                finite(center[0] + center[1] + rotation, "ellipse center and rotation")?;
                if !(b.is_finite() && *b > 0.0 && a.is_finite() && a >= b) {
                    return Err(Error::invalid("ellipse semi-axes must satisfy a >= b > 0"));
                }
                if a == b {
                    return Ok(Geom::Disk {
                        center: v(*center),
                        radius: *a,
                    });
                }
                Ok(Geom::Ellipse {
                    e: EllipseGeom::new(v(*center), *a, *b, *rotation),
                    r: 0.0,
                })
            }
            Shape::RoundedPolygon { vertices, rho } => {
                for p in vertices {
                    finite(p[0] + p[1], "vertex")?;
                }
                if vertices.len() < 3 {
                    return Err(Error::invalid("rounded polygon needs at least three vertices"));
                }
                Ok(Geom::Polygon(PolygonGeom::new(
                    vertices.iter().map(|p| v(*p)).collect(),
                    *rho,
                )?))
            }
            Shape::Stadium { p0, p1, radius } => {
                finite(p0[0] + p0[1] + p1[0] + p1[1], "stadium endpoints")?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("stadium radius must be positive"));
                }
                if p0 == p1 {
                    return Ok(Geom::Disk {
                        center: v(*p0),
                        radius: *radius,
                    });
                }
                Ok(Geom::Polygon(PolygonGeom::new(vec![v(*p0), v(*p1)], *radius)?))
            }
            Shape::Offset { base, r } => {
                if !(r.is_finite() && *r >= 0.0) {
                    return Err(Error::invalid("offset radius must be finite and >= 0"));
                }
                Ok(Self::offset_geom(Self::compile(base)?, *r))
            }
        }
    }

    fn offset_geom(g: Geom, r: f64) -> Geom {
        match g {
            Geom::Disk { center, radius } => Geom::Disk {
                center,
                radius: radius + r,
            },
            Geom::Ellipse { e, r: r0 } => Geom::Ellipse { e, r: r0 + r },
            Geom::Polygon(p) => Geom::Polygon(PolygonGeom {
                vertices: p.vertices,
                rho: p.rho + r,
            }),
        }
    }

    /// Canonical serializable description.
    pub fn shape(&self) -> Shape {
        match &self.geom {
            Geom::Disk { center, radius } => Shape::Disk {
                center: arr(*center),
                radius: *radius,
            },
            Geom::Ellipse { e, r } => {
                let base = Shape::Ellipse {
                    center: arr(e.center),
                    a: e.a,
                    b: e.b,
                    rotation: e.rotation,
                };
                if *r == 0.0 {
                    base
                } else {
                    Shape::Offset {
                        base: Box::new(base),
                        r: *r,
                    }
                }
            }
            Geom::Polygon(p) if p.n() == 2 => Shape::Stadium {
                p0: arr(p.vertices[0]),
                p1: arr(p.vertices[1]),
                radius: p.rho,
            },
            Geom::Polygon(p) => Shape::RoundedPolygon {
                vertices: p.vertices.iter().map(|q| arr(*q)).collect(),
                rho: p.rho,
            },
        }
    }

    pub fn signed_distance(&self, x: Vec2) -> f64 {
        match &self.geom {
            Geom::Disk { center, radius } => radius - (x - center).norm(),
            Geom::Ellipse { e, r } => e.signed_distance(x) + r,
            Geom::Polygon(p) => p.signed_distance(x),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.signed_distance(x) >= 0.0
    }

    /// Nearest boundary point. Unique for interior points and for all points
    /// outside; on the medial axis the tie is broken deterministically.
    pub fn metric_projection(&self, x: Vec2) -> Vec2 {
        match &self.geom {
            Geom::Disk { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n == 0.0 {
                    center + Vec2::new(*radius, 0.0)
                } else {
                    center + d * (radius / n)
                }
            }
            Geom::Ellipse { e, r } => {
                let p = e.to_local(x);
                let q = e.nearest_local(p);
                if *r == 0.0 {
                    return e.to_world(q);
                }
                let outward = if e.contains_local(p) || (p - q).norm() == 0.0 {
                    -e.inward_normal_local(q)
                } else {
                    (p - q).normalize()
                };
                e.to_world(q + outward * *r)
            }
            Geom::Polygon(p) => p.projection(x),
        }
    }

    /// Inward unit normal and curvature at a boundary point.
    pub fn boundary_frame(&self, p: Vec2) -> Result<(Vec2, f64)> {
        match &self.geom {
            Geom::Disk { center, radius } => {
                let d = p - center;
                if d.norm() == 0.0 {
                    return Err(Error::invalid("point is the disk center"));
                }
                Ok((-d.normalize(), 1.0 / radius))
            }
            Geom::Ellipse { e, r } => {
                let loc = e.to_local(p);
                // Offset curves share normals with the base ellipse.
                let q = e.nearest_local(loc);
                let n = e.inward_normal_local(q);
                let k = e.curvature_local(q);
                Ok((e.rotate(n), k / (1.0 + r * k)))
            }
            Geom::Polygon(poly) => poly.frame(self.metric_projection(p)),
        }
    }

    pub fn inward_normal(&self, p: Vec2) -> Result<Vec2> {
        self.boundary_frame(p).map(|f| f.0)
    }

    pub fn curvature(&self, p: Vec2) -> Result<f64> {
        self.boundary_frame(p).map(|f| f.1).map_err(|e| match e {
            Error::Undefined(_) => Error::Undefined("curvature undefined at corner"),
            other => other,
        })
    }

    pub fn area(&self) -> f64 {
        match &self.geom {
            Geom::Disk { radius, .. } => PI * radius * radius,
            Geom::Ellipse { e, r } => PI * e.a * e.b + r * e.perimeter() + PI * r * r,
            Geom::Polygon(p) => p.area(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match &self.geom {
            Geom::Disk { radius, .. } => TAU * radius,
            Geom::Ellipse { e, r } => e.perimeter() + TAU * r,
            Geom::Polygon(p) => p.perimeter(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.geom {
            Geom::Disk { radius, .. } => 2.0 * radius,
            Geom::Ellipse { e, r } => 2.0 * (e.a + r),
            Geom::Polygon(p) => p.diameter(),
        }
    }

    pub fn centroid(&self) -> Vec2 {
        match &self.geom {
            Geom::Disk { center, .. } => *center,
            Geom::Ellipse { e, .. } => e.center,
            Geom::Polygon(p) => p.centroid(),
        }
    }

    /// Support function `max_{x in domain} x . u` for a unit vector `u`.
    pub fn support(&self, u: Vec2) -> f64 {
        match &self.geom {
            Geom::Disk { center, radius } => center.dot(&u) + radius,
            Geom::Ellipse { e, r } => {
                let w = Vec2::new(e.a * (e.rotate(Vec2::x()).dot(&u)), e.b * (e.rotate(Vec2::y()).dot(&u)));
                e.center.dot(&u) + w.norm() + r
            }
            Geom::Polygon(p) => p.vertices.iter().map(|q| q.dot(&u)).fold(f64::NEG_INFINITY, f64::max) + p.rho,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let xmax = self.support(Vec2::x());
        let xmin = -self.support(-Vec2::x());
        let ymax = self.support(Vec2::y());
        let ymin = -self.support(-Vec2::y());
        (Vec2::new(xmin, ymin), Vec2::new(xmax, ymax))
    }

    /// Minkowski enlargement by a disk of radius `r`.
    pub fn enlarge(&self, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("enlargement radius must be finite and >= 0"));
        }
        Ok(Self::from_geom(Self::offset_geom(self.geom.clone(), r)).with_tolerances(self.tolerances))
    }

    /// Image under `x -> scale * x + shift`.
    pub fn similarity(&self, scale: f64, shift: Vec2) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("scale must be positive"));
        }
        let geom = match &self.geom {
            Geom::Disk { center, radius } => Geom::Disk {
                center: center * scale + shift,
                radius: radius * scale,
            },
            Geom::Ellipse { e, r } => Geom::Ellipse {
                e: EllipseGeom::new(e.center * scale + shift, e.a * scale, e.b * scale, e.rotation),
                r: r * scale,
            },
            Geom::Polygon(p) => Geom::Polygon(p.transformed(scale, shift)),
        };
        Ok(Self::from_geom(geom).with_tolerances(self.tolerances))
    }

    pub fn translate(&self, shift: Vec2) -> Self {
        self.similarity(1.0, shift).expect("unit scale")
    }

    /// Copy with centroid at the origin and diameter 2.
    pub fn normalize(&self) -> Self {
        let s = 2.0 / self.diameter();
        let c = self.centroid();
        self.similarity(s, -c * s).expect("positive diameter")
    }

    /// `n` boundary samples equally spaced in arclength.
    pub fn boundary_samples(&self, n: usize) -> Vec<BoundarySample> {
        let total = self.perimeter();
        (0..n).map(|k| self.sample_at(total * k as f64 / n as f64)).collect()
    }

    /// Boundary sample at arclength `s`, measured counter-clockwise from a
    /// fixed starting point.
    pub fn sample_at(&self, s: f64) -> BoundarySample {
        match &self.geom {
            Geom::Disk { center, radius } => {
                let t = s / radius;
                let dir = Vec2::new(t.cos(), t.sin());
                BoundarySample {
                    point: center + dir * *radius,
                    inward_normal: -dir,
                    curvature: 1.0 / radius,
                    arclength: s,
                }
            }
            Geom::Ellipse { e, r } => {
                let t = self.arc_table.as_ref().expect("ellipse arc table").param(e, *r, s);
                let q = Vec2::new(e.a * t.cos(), e.b * t.sin());
                let n = e.inward_normal_local(q);
                let k = e.curvature_local(q);
                BoundarySample {
                    point: e.to_world(q - n * *r),
                    inward_normal: e.rotate(n),
                    curvature: k / (1.0 + r * k),
                    arclength: s,
                }
            }
            Geom::Polygon(p) => {
                let (x, n, k) = p.point_at_arclength(s);
                BoundarySample {
                    point: x,
                    inward_normal: n,
                    curvature: k,
                    arclength: s,
                }
            }
        }
    }

    /// Largest boundary curvature and a point where it is attained.
    pub fn max_curvature(&self) -> (f64, Vec2) {
        match &self.geom {
            Geom::Disk { center, radius } => (1.0 / radius, center + Vec2::new(*radius, 0.0)),
            Geom::Ellipse { e, r } => {
                let k = e.a / (e.b * e.b);
                (k / (1.0 + r * k), e.to_world(Vec2::new(e.a + r, 0.0)))
            }
            Geom::Polygon(p) if p.rho == 0.0 => (f64::INFINITY, p.vertices[0]),
            Geom::Polygon(p) => (1.0 / p.rho, self.sample_at(0.0).point),
        }
    }

    /// Parameter interval `{t : x + t u in domain}` for a unit vector `u`,
    /// or `None` if the line misses the domain.
    pub fn chord(&self, x: Vec2, u: Vec2) -> Option<(f64, f64)> {
        match &self.geom {
            Geom::Disk { center, radius } => {
                let p = x - center;
                let b = p.dot(&u);
                let c = p.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                Some((-b - sq, -b + sq))
            }
            Geom::Ellipse { e, r } if *r == 0.0 => e.chord(x, u),
            _ => self.chord_by_search(x, u),
        }
    }

    fn chord_by_search(&self, x: Vec2, u: Vec2) -> Option<(f64, f64)> {
        // The signed distance restricted to a line is concave.
        let c = self.centroid();
        let t0 = (c - x).dot(&u);
        let half = self.diameter() + 1.0;
        let f = |t: f64| self.signed_distance(x + u * t);
        let (tm, fm) = golden_max(f, t0 - half, t0 + half, 1e-10);
        if fm < 0.0 {
            return None;
        }
        if fm == 0.0 {
            return Some((tm, tm));
        }
        let lo = brent_root(f, t0 - half, tm, 1e-15)?;
        let hi = brent_root(f, tm, t0 + half, 1e-15)?;
        Some((lo, hi))
    }
}

impl ArcTable {
    const SEGMENTS: usize = 2048;

    fn speed(e: &EllipseGeom, r: f64, t: f64) -> f64 {
        let q = Vec2::new(e.a * t.cos(), e.b * t.sin());
        let base = (e.a * e.a * t.sin().powi(2) + e.b * e.b * t.cos().powi(2)).sqrt();
        base * (1.0 + r * e.curvature_local(q))
    }

    fn build(e: &EllipseGeom, r: f64) -> Self {
        let (gx, gw) = gauss_legendre(8);
        let n = Self::SEGMENTS;
        let dt = TAU / n as f64;
        let mut params = Vec::with_capacity(n + 1);
        let mut lengths = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for k in 0..=n {
            let t = k as f64 * dt;
            params.push(t);
            lengths.push(acc);
            let mut seg = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                seg += w * Self::speed(e, r, t + 0.5 * dt * (1.0 + x));
            }
            acc += 0.5 * dt * seg;
        }
        Self { params, lengths }
    }

    fn param(&self, e: &EllipseGeom, r: f64, s: f64) -> f64 {
        let total = *self.lengths.last().unwrap();
        let s = s.rem_euclid(total);
        let k = match self.lengths.binary_search_by(|l| l.partial_cmp(&s).unwrap()) {
            Ok(i) => return self.params[i],
            Err(i) => i.saturating_sub(1).min(self.params.len() - 2),
        };
        let (t0, t1) = (self.params[k], self.params[k + 1]);
        let (l0, l1) = (self.lengths[k], self.lengths[k + 1]);
        let mut t = t0 + (t1 - t0) * (s - l0) / (l1 - l0);
        // Newton on the arclength measured from t0 (Simpson within the segment).
        for _ in 0..4 {
            let m = 0.5 * (t0 + t);
            let len = (t - t0) / 6.0 * (Self::speed(e, r, t0) + 4.0 * Self::speed(e, r, m) + Self::speed(e, r, t));
            t -= (l0 + len - s) / Self::speed(e, r, t);
        }
        t.clamp(t0, t1)
    }
}
