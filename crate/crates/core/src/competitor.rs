//! Low-energy test fields built by adaptive mollification of the distance
//! function.
//!
//! The field is `xi(x) = int v(x - w(d(x)) z) rho(z) dz` where `d` is the
//! distance to the boundary, `w` the [`WidthRamp`], `rho` the normalized bump
//! `exp(-1/(1 - |z|^2))` on the unit disk, and `v` either the signed distance
//! or its cone-capped version `min(d(x), 1 - kappa beta^{3/32} + |x|)`. The
//! signed distance (negative outside) serves as the extension of `d` where
//! the kernel reaches past the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{hessian, rasterize, Discretization, Region, ScalarField};
use crate::geometry::{ConvexDomain, Vec2};
use crate::numerics::{gauss_legendre, pairwise_sum};
use crate::ramp::WidthRamp;

/// `int_{B_1} exp(-1/(1-|z|^2)) dz`.
pub const KERNEL_MASS: f64 = 0.466_512_393_178;
/// `int |z|^2 rho(z) dz` for the normalized kernel.
pub const KERNEL_SECOND_MOMENT: f64 = 0.261_311_203_421;
/// Slope of the cone cap in the construction's own scaling.
pub const CONSTRUCTION_CAP_SLOPE: f64 = 10.0;

/// Unnormalized bump profile as a function of `r = |z|`.
pub fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Polar product rule for the bump kernel: `q` Gauss-Legendre radii on
/// `[0, 1]` times `2q` equally spaced angles. Antipodal nodes carry equal
/// weights, so first moments vanish exactly and affine functions are
/// reproduced to rounding.
#[derive(Clone, Debug)]
pub struct KernelRule {
    pub q: usize,
    pub offsets: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl KernelRule {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::invalid("kernel quadrature order must be at least 2"));
        }
        let (x, w) = gauss_legendre(q);
        let na = 2 * q;
        let mut offsets = Vec::with_capacity(q * na);
        let mut weights = Vec::with_capacity(q * na);
        for (xi, wi) in x.iter().zip(&w) {
            let r = 0.5 * (xi + 1.0);
            let radial = 0.5 * wi * r * bump(r);
            for a in 0..na {
                let t = (a as f64 + 0.5) * 2.0 * PI / na as f64;
                offsets.push(Vec2::new(r * t.cos(), r * t.sin()));
                weights.push(radial);
            }
        }
        let total = pairwise_sum(&weights);
        for v in &mut weights {
            *v /= total;
        }
        Ok(Self { q, offsets, weights })
    }

    /// `int f(x - width z) rho(z) dz`; `f(x)` when `width == 0`.
    pub fn mollify(&self, f: impl Fn(Vec2) -> f64, x: Vec2, width: f64) -> f64 {
        if width == 0.0 {
            return f(x);
        }
        let mut acc = 0.0;
        for (z, w) in self.offsets.iter().zip(&self.weights) {
            acc += w * f(x - z * width);
        }
        acc
    }
}

/// `int source(x - z) rho_width(z) dz` with `rho_width(z) = width^{-2} rho(z / width)`.
pub fn adaptive_mollify(source: impl Fn(Vec2) -> f64, x: Vec2, width: f64, q: usize) -> Result<f64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid("mollification width must be positive"));
    }
    Ok(KernelRule::new(q)?.mollify(source, x, width))
}

/// Parameters of the competitor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CompetitorParams {
    pub eps: f64,
    pub beta: f64,
    /// Radial kernel quadrature order.
    pub q: usize,
    /// Slope `kappa` of the cap `1 - kappa beta^{3/32} + |x|`; `None` leaves
    /// the distance uncapped.
    pub cap_slope: Option<f64>,
}

impl CompetitorParams {
    pub fn new(eps: f64, beta: f64, q: usize, cap_slope: Option<f64>) -> Result<Self> {
        let p = Self {
            eps,
            beta,
            q,
            cap_slope,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0 && self.eps <= self.beta.sqrt() / 4.0 * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "eps = {} must lie in (0, sqrt(beta)/4] = (0, {}]",
                self.eps,
                self.beta.sqrt() / 4.0
            )));
        }
        if self.q < 16 {
            return Err(Error::invalid("kernel quadrature order q must be at least 16"));
        }
        if let Some(k) = self.cap_slope {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid("cap slope must be positive"));
            }
        }
        Ok(())
    }

    /// `1 - kappa beta^{3/32}`.
    pub fn cap_offset(&self) -> Option<f64> {
        self.cap_slope.map(|k| 1.0 - k * self.beta.powf(3.0 / 32.0))
    }

    /// Radius where the cap meets the distance function of the unit disk.
    pub fn contact_radius(&self) -> Option<f64> {
        self.cap_slope.map(|k| 0.5 * k * self.beta.powf(3.0 / 32.0))
    }
}

/// `min(d(x), offset + |x|)`.
pub fn cone_cap(d: f64, x: Vec2, offset: f64) -> f64 {
    d.min(offset + x.norm())
}

/// Cone-capped distance field on the nodes of `u`.
pub fn cone_cap_field(u: &ScalarField, beta: f64, cap_slope: f64) -> ScalarField {
    let offset = 1.0 - cap_slope * beta.powf(3.0 / 32.0);
    let g = u.disc.grid;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if v.is_finite() {
                cone_cap(*v, g.node_at(k), offset)
            } else {
                f64::NAN
            }
        })
        .collect();
    ScalarField {
        disc: u.disc.clone(),
        values,
    }
}

fn check_curvature(domain: &ConvexDomain, eps: f64) -> Result<()> {
    let (k, p) = domain.max_curvature();
    let bound = eps.powf(-0.5);
    if k > bound {
        return Err(Error::CurvatureViolation {
            curvature: k,
            bound,
            x: p.x,
            y: p.y,
        });
    }
    Ok(())
}

/// Mollify `source` with width `w(d(x))` at every active node of `disc`.
fn mollified_field(
    domain: &ConvexDomain,
    disc: &Arc<Discretization>,
    source: impl Fn(Vec2) -> f64 + Sync,
    eps: f64,
    q: usize,
) -> Result<ScalarField> {
    let rule = KernelRule::new(q)?;
    let ramp = WidthRamp::new(eps)?;
    let g = disc.grid;
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !disc.is_active(k) {
                return f64::NAN;
            }
            let x = g.node_at(k);
            let w = ramp.value(domain.signed_distance(x));
            rule.mollify(&source, x, w)
        })
        .collect();
    ScalarField::from_values(disc, values)
}

/// The mollified distance on the band of width `eps` inside the boundary.
pub fn boundary_layer_field(domain: &ConvexDomain, eps: f64, q: usize, h: f64) -> Result<ScalarField> {
    check_curvature(domain, eps)?;
    let band = crate::fields::Band {
        domain: domain.clone(),
        width: eps,
    };
    let disc = rasterize(&band, h)?;
    mollified_field(domain, &disc, |y| domain.signed_distance(y), eps, q)
}

/// The competitor on a covering grid of spacing `h`.
pub fn build_competitor(domain: &ConvexDomain, params: &CompetitorParams, h: f64) -> Result<ScalarField> {
    params.validate()?;
    check_curvature(domain, params.eps)?;
    let disc = rasterize(domain, h)?;
    build_competitor_on(domain, params, &disc)
}

/// The competitor on the nodes of an existing discretization (of the domain
/// or a subregion of it).
pub fn build_competitor_on(
    domain: &ConvexDomain,
    params: &CompetitorParams,
    disc: &Arc<Discretization>,
) -> Result<ScalarField> {
    params.validate()?;
    check_curvature(domain, params.eps)?;
    match params.cap_offset() {
        Some(off) => mollified_field(
            domain,
            disc,
            |y| cone_cap(domain.signed_distance(y), y, off),
            params.eps,
            params.q,
        ),
        None => mollified_field(domain, disc, |y| domain.signed_distance(y), params.eps, params.q),
    }
}

/// The competitor restricted to a region inside the domain.
pub fn build_competitor_in(
    domain: &ConvexDomain,
    params: &CompetitorParams,
    region: &dyn Region,
    h: f64,
) -> Result<ScalarField> {
    let disc = rasterize(region, h)?;
    build_competitor_on(domain, params, &disc)
}

/// Where the distance field meets the cone.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContactDiagnostic {
    /// Number of located contact points (grid-edge crossings).
    pub points: usize,
    /// Radius `(kappa / 2) beta^{3/32}` predicted for the unit disk.
    pub predicted_radius: f64,
    /// Largest distance of a contact point from the predicted circle.
    pub hausdorff_band: f64,
    /// Area of the `2 eps` neighborhood of the contact polyline.
    pub tube_area: f64,
}

/// Locate `{u = 1 - kappa beta^{3/32} + |x|}` on the grid edges of `u` by
/// linear interpolation of `u - cone` across sign changes, join the points
/// into a polyline, and measure its `2 eps` tube with rows of height
/// `eps / 8`.
pub fn contact_set_diagnostic(u: &ScalarField, beta: f64, cap_slope: f64, eps: f64) -> Result<ContactDiagnostic> {
    let off = 1.0 - cap_slope * beta.powf(3.0 / 32.0);
    let predicted_radius = 0.5 * cap_slope * beta.powf(3.0 / 32.0);
    let g = u.disc.grid;
    let diff = |i: usize, j: usize| -> Option<f64> {
        let v = u.values[g.index(i, j)];
        v.is_finite().then(|| v - (off + g.node(i, j).norm()))
    };
    let mut pts: Vec<Vec2> = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let Some(a) = diff(i, j) else { continue };
            for (di, dj) in [(1, 0), (0, 1)] {
                if i + di >= g.nx || j + dj >= g.ny {
                    continue;
                }
                let Some(b) = diff(i + di, j + dj) else { continue };
                if (a < 0.0) != (b < 0.0) {
                    let t = a / (a - b);
                    let p = g.node(i, j) + (g.node(i + di, j + dj) - g.node(i, j)) * t;
                    pts.push(p);
                }
            }
        }
    }
    if pts.is_empty() {
        return Ok(ContactDiagnostic {
            points: 0,
            predicted_radius,
            hausdorff_band: 0.0,
            tube_area: 0.0,
        });
    }
    let hausdorff_band = pts
        .iter()
        .map(|p| (p.norm() - predicted_radius).abs())
        .fold(0.0, f64::max);
    Ok(ContactDiagnostic {
        points: pts.len(),
        predicted_radius,
        hausdorff_band,
        tube_area: tube_area(&contact_polyline(&pts, 3.0 * g.h), 2.0 * eps, eps / 8.0),
    })
}

/// Contact points joined into a polyline by angle about their mean;
/// consecutive points further apart than `max_gap` are left unjoined.
fn contact_polyline(pts: &[Vec2], max_gap: f64) -> Vec<(Vec2, Vec2)> {
    let c = pts.iter().sum::<Vec2>() / pts.len() as f64;
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| {
        let ta = (a.y - c.y).atan2(a.x - c.x);
        let tb = (b.y - c.y).atan2(b.x - c.x);
        ta.total_cmp(&tb)
    });
    let n = sorted.len();
    (0..n)
        .map(|k| (sorted[k], sorted[(k + 1) % n]))
        .map(|(a, b)| if (b - a).norm() <= max_gap { (a, b) } else { (a, a) })
        .collect()
}

/// Area of the `r`-neighborhood of a union of segments, by the midpoint rule
/// over rows of height `s`. Each row meets each capsule in an interval,
/// computed exactly; the intervals of a row are merged before measuring.
pub fn tube_area(segments: &[(Vec2, Vec2)], r: f64, s: f64) -> f64 {
    let mut pieces: Vec<(i64, f64, f64)> = Vec::new();
    for &(a, b) in segments {
        let j0 = ((a.y.min(b.y) - r) / s).floor() as i64;
        let j1 = ((a.y.max(b.y) + r) / s).ceil() as i64;
        for j in j0..=j1 {
            if let Some((lo, hi)) = capsule_row(a, b, r, (j as f64 + 0.5) * s) {
                pieces.push((j, lo, hi));
            }
        }
    }
    pieces.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut len = 0.0;
    let mut cur: Option<(i64, f64, f64)> = None;
    for (j, lo, hi) in pieces {
        cur = match cur {
            Some((cj, clo, chi)) if cj == j && lo <= chi => Some((cj, clo, chi.max(hi))),
            Some((_, clo, chi)) => {
                len += chi - clo;
                Some((j, lo, hi))
            }
            None => Some((j, lo, hi)),
        };
    }
    if let Some((_, lo, hi)) = cur {
        len += hi - lo;
    }
    len * s
}

/// `{x : dist((x, y), [a, b]) <= r}`.
fn capsule_row(a: Vec2, b: Vec2, r: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in [a, b] {
        let dy = y - p.y;
        if dy.abs() <= r {
            let w = (r * r - dy * dy).sqrt();
            lo = lo.min(p.x - w);
            hi = hi.max(p.x + w);
        }
    }
    let d = b - a;
    let len = d.norm();
    if len > 0.0 {
        let t = d / len;
        let n = Vec2::new(-t.y, t.x);
        // Slab 0 <= t.(p - a) <= len and |n.(p - a)| <= r, both affine in x.
        let mut slo = f64::NEG_INFINITY;
        let mut shi = f64::INFINITY;
        let mut ok = true;
        for (coef, base, l, u) in [(t.x, t.y * (y - a.y), 0.0, len), (n.x, n.y * (y - a.y), -r, r)] {
            if coef.abs() < 1e-300 {
                ok &= base >= l && base <= u;
            } else {
                let (x1, x2) = ((l - base) / coef + a.x, (u - base) / coef + a.x);
                slo = slo.max(x1.min(x2));
                shi = shi.min(x1.max(x2));
            }
        }
        if ok && slo <= shi {
            lo = lo.min(slo);
            hi = hi.max(shi);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Discrete total variation of `grad u`: `int |D^2 u|` over nodes `x` with
/// `keep(x)`.
pub fn tv_gradient(u: &ScalarField, keep: impl Fn(Vec2) -> bool) -> Result<f64> {
    u.check_finite()?;
    let hs = hessian(u).frobenius_squared();
    let mag: Vec<f64> = hs.iter().map(|v| v.sqrt()).collect();
    let g = u.disc.grid;
    u.disc.integrate_where(&mag, |k| keep(g.node_at(k)))
}
