//! Grid-sampled fields on a region.
//!
//! Nodes sit at `origin + h (i, j)`. A node is *interior* if the signed
//! distance is at least `h`, *exterior* if at most `-h`, and *cut*
//! otherwise. Interior and cut nodes carry values; derivative stencils use
//! only those. Central differences are used where the neighbors exist,
//! second-order one-sided stencils elsewhere. Cut nodes for which no stencil
//! fits are *invalid*: they keep their value (neighbors may use it) but are
//! left out of integrals, and their weight is reported as excluded area.

use rayon::prelude::*;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, ConvexDomain, Vec2};
use crate::numerics::{pairwise_sum, snap};

/// Minimum number of interior nodes for a usable grid.
pub const MIN_INTERIOR_NODES: usize = 256;
/// Subcell samples per axis for cut weights.
const SUBCELLS: usize = 4;
/// Relative slack on the mask thresholds.
const TIE: f64 = 1e-9;

/// A region described by a signed distance (positive inside).
pub trait Region: Sync {
    fn signed_distance(&self, x: Vec2) -> f64;
    fn bounding_box(&self) -> (Vec2, Vec2);
}

impl Region for ConvexDomain {
    fn signed_distance(&self, x: Vec2) -> f64 {
        ConvexDomain::signed_distance(self, x)
    }
    fn bounding_box(&self) -> (Vec2, Vec2) {
        ConvexDomain::bounding_box(self)
    }
}

/// Points of `domain` within `width` of its boundary.
#[derive(Clone, Debug)]
pub struct Band {
    pub domain: ConvexDomain,
    pub width: f64,
}

impl Region for Band {
    fn signed_distance(&self, x: Vec2) -> f64 {
        let d = self.domain.signed_distance(x);
        d.min(self.width - d)
    }
    fn bounding_box(&self) -> (Vec2, Vec2) {
        self.domain.bounding_box()
    }
}

/// `r0 <= |x - center| <= r1`.
#[derive(Clone, Copy, Debug)]
pub struct Annulus {
    pub center: Vec2,
    pub r0: f64,
    pub r1: f64,
}

impl Region for Annulus {
    fn signed_distance(&self, x: Vec2) -> f64 {
        let r = (x - self.center).norm();
        (r - self.r0).min(self.r1 - r)
    }
    fn bounding_box(&self) -> (Vec2, Vec2) {
        let r = Vec2::new(self.r1, self.r1);
        (self.center - r, self.center + r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Grid aligned to integer multiples of `h` covering the box with a
    /// margin of three cells.
    pub fn covering(lo: Vec2, hi: Vec2, h: f64) -> Self {
        // The offsets keep box edges lying on grid lines from rounding to
        // either side, so translated boxes get grids of the same shape.
        let i0 = (lo.x / h + 1e-7).floor() - 3.0;
        let j0 = (lo.y / h + 1e-7).floor() - 3.0;
        let i1 = (hi.x / h - 1e-7).ceil() + 3.0;
        let j1 = (hi.y / h - 1e-7).ceil() + 3.0;
        Self {
            origin: Vec2::new(i0 * h, j0 * h),
            h,
            nx: (i1 - i0) as usize + 1,
            ny: (j1 - j0) as usize + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn node_at(&self, k: usize) -> Vec2 {
        self.node(k % self.nx, k / self.nx)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Node nearest to `x`, if it lies on the grid.
    pub fn nearest(&self, x: Vec2) -> Option<(usize, usize)> {
        let fi = ((x.x - self.origin.x) / self.h).round();
        let fj = ((x.y - self.origin.y) / self.h).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mask {
    Interior,
    Cut,
    Exterior,
}

impl Mask {
    pub fn as_str(self) -> &'static str {
        match self {
            Mask::Interior => "interior",
            Mask::Cut => "cut",
            Mask::Exterior => "exterior",
        }
    }
}

/// Finite-difference operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Dx,
    Dy,
    Dxx,
    Dxy,
    Dyy,
}

impl Op {
    pub const ALL: [Op; 5] = [Op::Dx, Op::Dy, Op::Dxx, Op::Dxy, Op::Dyy];
    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeKind {
    /// Exterior, or a cut node without a usable stencil.
    Inactive,
    Central,
    Custom(u32),
}

/// Stencils of one node as `(flat offset, coefficient)` lists, one per [`Op`].
#[derive(Clone, Debug, Default)]
struct CustomStencil {
    ops: [Vec<(isize, f64)>; 5],
}

/// Mask, quadrature weights and stencils of a region on a grid. Shared by
/// every field sampled on it.
#[derive(Debug)]
pub struct Discretization {
    pub grid: GridSpec,
    pub mask: Vec<Mask>,
    /// Fraction of each node's cell inside the region.
    pub weight: Vec<f64>,
    pub signed_distance: Vec<f64>,
    kind: Vec<NodeKind>,
    custom: Vec<CustomStencil>,
    pub interior_count: usize,
    pub cut_count: usize,
    pub invalid_count: usize,
    /// Total weight times `h^2` of invalid cut nodes.
    pub excluded_area: f64,
}

/// Classify the nodes of a covering grid of `region`.
pub fn rasterize(region: &dyn Region, h: f64) -> Result<Arc<Discretization>> {
    Discretization::new(region, h)
}

// One-dimensional first- and second-derivative candidates (offsets, coefficients
// in units of 1/h and 1/h^2).
const D1: [(&[i32], &[f64]); 3] = [
    (&[-1, 1], &[-0.5, 0.5]),
    (&[0, 1, 2], &[-1.5, 2.0, -0.5]),
    (&[0, -1, -2], &[1.5, -2.0, 0.5]),
];
const D2: [(&[i32], &[f64]); 3] = [
    (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
    (&[0, 1, 2, 3], &[2.0, -5.0, 4.0, -1.0]),
    (&[0, -1, -2, -3], &[2.0, -5.0, 4.0, -1.0]),
];

impl Discretization {
    pub fn new(region: &dyn Region, h: f64) -> Result<Arc<Self>> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let (lo, hi) = region.bounding_box();
        let extent = (hi - lo).norm();
        if h > extent / 16.0 {
            return Err(Error::GridTooCoarse {
                interior: 0,
                required: MIN_INTERIOR_NODES,
            });
        }
        Self::on_grid(region, GridSpec::covering(lo, hi, h))
    }

    pub fn on_grid(region: &dyn Region, grid: GridSpec) -> Result<Arc<Self>> {
        let h = grid.h;
        let n = grid.len();
        let sub: Vec<f64> = (0..SUBCELLS)
            .map(|k| ((k as f64 + 0.5) / SUBCELLS as f64 - 0.5) * h)
            .collect();
        let s = h / SUBCELLS as f64;
        let rows: Vec<(Vec<f64>, Vec<Mask>, Vec<f64>)> = (0..grid.ny)
            .into_par_iter()
            .map(|j| {
                let mut sd = Vec::with_capacity(grid.nx);
                let mut mask = Vec::with_capacity(grid.nx);
                let mut weight = Vec::with_capacity(grid.nx);
                for i in 0..grid.nx {
                    let x = grid.node(i, j);
                    let d = region.signed_distance(x);
                    // Thresholds sit slightly inside the band so that nodes at
                    // distance exactly h classify the same after translation.
                    let (m, w) = if d >= h * (1.0 - TIE) {
                        (Mask::Interior, 1.0)
                    } else if d <= -h * (1.0 - TIE) {
                        (Mask::Exterior, 0.0)
                    } else {
                        let mut acc = 0.0;
                        for dy in &sub {
                            for dx in &sub {
                                let ds = region.signed_distance(x + Vec2::new(*dx, *dy));
                                acc += (0.5 + ds / s).clamp(0.0, 1.0);
                            }
                        }
                        (Mask::Cut, snap(acc / (SUBCELLS * SUBCELLS) as f64, 32))
                    };
                    sd.push(d);
                    mask.push(m);
                    weight.push(w);
                }
                (sd, mask, weight)
            })
            .collect();
        let mut signed_distance = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for (a, b, c) in rows {
            signed_distance.extend(a);
            mask.extend(b);
            weight.extend(c);
        }
        let interior_count = mask.iter().filter(|m| **m == Mask::Interior).count();
        if interior_count < MIN_INTERIOR_NODES {
            return Err(Error::GridTooCoarse {
                interior: interior_count,
                required: MIN_INTERIOR_NODES,
            });
        }
        let cut_count = mask.iter().filter(|m| **m == Mask::Cut).count();

        let active = |i: i64, j: i64| -> bool {
            i >= 0
                && j >= 0
                && (i as usize) < grid.nx
                && (j as usize) < grid.ny
                && mask[grid.index(i as usize, j as usize)] != Mask::Exterior
        };
        let mut kind = vec![NodeKind::Inactive; n];
        let mut custom = Vec::new();
        let mut invalid_count = 0;
        let mut excluded = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                if mask[k] == Mask::Exterior {
                    continue;
                }
                let (ii, jj) = (i as i64, j as i64);
                let central = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)]
                    .iter()
                    .all(|(a, b)| active(ii + a, jj + b));
                if central {
                    kind[k] = NodeKind::Central;
                    continue;
                }
                match Self::custom_stencil(&active, ii, jj, grid.nx as isize, h) {
                    Some(st) => {
                        kind[k] = NodeKind::Custom(custom.len() as u32);
                        custom.push(st);
                    }
                    None => {
                        invalid_count += 1;
                        excluded.push(weight[k] * h * h);
                    }
                }
            }
        }
        Ok(Arc::new(Self {
            grid,
            mask,
            weight,
            signed_distance,
            kind,
            custom,
            interior_count,
            cut_count,
            invalid_count,
            excluded_area: pairwise_sum(&excluded),
        }))
    }

    fn custom_stencil(active: &dyn Fn(i64, i64) -> bool, i: i64, j: i64, nx: isize, h: f64) -> Option<CustomStencil> {
        let ok_x = |offs: &[i32]| offs.iter().all(|&o| active(i + o as i64, j));
        let ok_y = |offs: &[i32]| offs.iter().all(|&o| active(i, j + o as i64));
        let pick = |cands: &[(&'static [i32], &'static [f64])], ok: &dyn Fn(&[i32]) -> bool| {
            cands.iter().copied().find(|(o, _)| ok(o))
        };
        let dx = pick(&D1, &ok_x)?;
        let dy = pick(&D1, &ok_y)?;
        let dxx = pick(&D2, &ok_x)?;
        let dyy = pick(&D2, &ok_y)?;
        // Mixed derivative: first tensor pair whose whole block is active.
        let mut dxy = None;
        'outer: for sx in D1.iter().filter(|(o, _)| ok_x(o)) {
            for sy in D1.iter().filter(|(o, _)| ok_y(o)) {
                let all =
                    sx.0.iter()
                        .all(|&a| sy.0.iter().all(|&b| active(i + a as i64, j + b as i64)));
                if all {
                    dxy = Some((*sx, *sy));
                    break 'outer;
                }
            }
        }
        let (sx, sy) = dxy?;
        let line = |(o, c): (&[i32], &[f64]), stride: isize, scale: f64| -> Vec<(isize, f64)> {
            o.iter()
                .zip(c)
                .map(|(&a, &w)| (a as isize * stride, w * scale))
                .collect()
        };
        let mut st = CustomStencil::default();
        st.ops[Op::Dx.slot()] = line(dx, 1, 1.0 / h);
        st.ops[Op::Dy.slot()] = line(dy, nx, 1.0 / h);
        st.ops[Op::Dxx.slot()] = line(dxx, 1, 1.0 / (h * h));
        st.ops[Op::Dyy.slot()] = line(dyy, nx, 1.0 / (h * h));
        let mut mixed = Vec::new();
        for (&a, &wa) in sx.0.iter().zip(sx.1) {
            for (&b, &wb) in sy.0.iter().zip(sy.1) {
                mixed.push((a as isize + b as isize * nx, wa * wb / (h * h)));
            }
        }
        st.ops[Op::Dxy.slot()] = mixed;
        Some(st)
    }

    /// Nodes carrying a value (interior and cut).
    pub fn is_active(&self, k: usize) -> bool {
        self.mask[k] != Mask::Exterior
    }

    /// Nodes whose derivatives are defined and which enter integrals.
    pub fn is_valid(&self, k: usize) -> bool {
        self.kind[k] != NodeKind::Inactive
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// Quadrature weight `w h^2` of a node (zero if invalid).
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        if self.is_valid(k) {
            self.weight[k] * self.grid.h * self.grid.h
        } else {
            0.0
        }
    }

    /// Apply a difference operator. Invalid nodes receive NaN.
    pub fn apply(&self, op: Op, u: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx;
        let h = self.grid.h;
        let (ih, ih2) = (1.0 / h, 1.0 / (h * h));
        let mut out = vec![f64::NAN; u.len()];
        out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let k = j * nx + i;
                *o = match self.kind[k] {
                    NodeKind::Inactive => f64::NAN,
                    NodeKind::Central => match op {
                        Op::Dx => 0.5 * ih * (u[k + 1] - u[k - 1]),
                        Op::Dy => 0.5 * ih * (u[k + nx] - u[k - nx]),
                        Op::Dxx => ih2 * (u[k + 1] - 2.0 * u[k] + u[k - 1]),
                        Op::Dyy => ih2 * (u[k + nx] - 2.0 * u[k] + u[k - nx]),
                        Op::Dxy => 0.25 * ih2 * (u[k + nx + 1] - u[k + nx - 1] - u[k - nx + 1] + u[k - nx - 1]),
                    },
                    NodeKind::Custom(c) => self.custom[c as usize].ops[op.slot()]
                        .iter()
                        .map(|&(off, w)| w * u[(k as isize + off) as usize])
                        .sum(),
                };
            }
        });
        out
    }

    /// Accumulate the transpose of an operator: `out += D^T a`. Entries of
    /// `a` at invalid nodes are ignored.
    pub fn apply_adjoint(&self, op: Op, a: &[f64], out: &mut [f64]) {
        let nx = self.grid.nx;
        let h = self.grid.h;
        let (ih, ih2) = (1.0 / h, 1.0 / (h * h));
        for k in 0..a.len() {
            let v = a[k];
            match self.kind[k] {
                NodeKind::Inactive => {}
                NodeKind::Central => match op {
                    Op::Dx => {
                        out[k + 1] += 0.5 * ih * v;
                        out[k - 1] -= 0.5 * ih * v;
                    }
                    Op::Dy => {
                        out[k + nx] += 0.5 * ih * v;
                        out[k - nx] -= 0.5 * ih * v;
                    }
                    Op::Dxx => {
                        out[k + 1] += ih2 * v;
                        out[k] -= 2.0 * ih2 * v;
                        out[k - 1] += ih2 * v;
                    }
                    Op::Dyy => {
                        out[k + nx] += ih2 * v;
                        out[k] -= 2.0 * ih2 * v;
                        out[k - nx] += ih2 * v;
                    }
                    Op::Dxy => {
                        let w = 0.25 * ih2 * v;
                        out[k + nx + 1] += w;
                        out[k + nx - 1] -= w;
                        out[k - nx + 1] -= w;
                        out[k - nx - 1] += w;
                    }
                },
                NodeKind::Custom(c) => {
                    for &(off, w) in &self.custom[c as usize].ops[op.slot()] {
                        out[(k as isize + off) as usize] += w * v;
                    }
                }
            }
        }
    }

    /// `sum g w h^2` over valid nodes, with pairwise summation. A non-finite
    /// `g` at a valid node is an error naming that node.
    pub fn integrate(&self, g: &[f64]) -> Result<f64> {
        let mut terms = vec![0.0; g.len()];
        for k in 0..g.len() {
            if !self.is_valid(k) {
                continue;
            }
            if !g[k].is_finite() {
                return Err(self.non_finite(k));
            }
            terms[k] = g[k] * self.quadrature_weight(k);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Integral over valid nodes where `g` is finite, with the quadrature
    /// weight of the skipped valid nodes.
    pub fn integrate_finite(&self, g: &[f64]) -> (f64, f64) {
        let mut terms = vec![0.0; g.len()];
        let mut skipped = vec![0.0; g.len()];
        for k in 0..g.len() {
            if !self.is_valid(k) {
                continue;
            }
            if g[k].is_finite() {
                terms[k] = g[k] * self.quadrature_weight(k);
            } else {
                skipped[k] = self.quadrature_weight(k);
            }
        }
        (pairwise_sum(&terms), pairwise_sum(&skipped))
    }

    /// Integral restricted to nodes where `keep` holds.
    pub fn integrate_where(&self, g: &[f64], keep: impl Fn(usize) -> bool) -> Result<f64> {
        let masked: Vec<f64> = (0..g.len()).map(|k| if keep(k) { g[k] } else { 0.0 }).collect();
        self.integrate(&masked)
    }

    pub fn area(&self) -> f64 {
        let ones = vec![1.0; self.grid.len()];
        self.integrate(&ones).expect("finite")
    }

    pub(crate) fn non_finite(&self, k: usize) -> Error {
        let (i, j) = (k % self.grid.nx, k / self.grid.nx);
        let x = self.grid.node(i, j);
        Error::NonFinite { i, j, x: x.x, y: x.y }
    }

    pub fn same_as(&self, other: &Discretization) -> bool {
        std::ptr::eq(self, other) || (self.grid == other.grid && self.mask == other.mask)
    }
}

/// Scalar values on the nodes of a discretization (NaN on exterior nodes).
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub disc: Arc<Discretization>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub disc: Arc<Discretization>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Second derivatives `(f_xx, f_xy, f_yy)`.
#[derive(Clone, Debug)]
pub struct HessianField {
    pub disc: Arc<Discretization>,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl ScalarField {
    /// Evaluate `f` at every active node.
    pub fn sample(disc: &Arc<Discretization>, f: impl Fn(Vec2) -> f64 + Sync) -> Self {
        let g = disc.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|k| if disc.is_active(k) { f(g.node_at(k)) } else { f64::NAN })
            .collect();
        Self {
            disc: disc.clone(),
            values,
        }
    }

    pub fn from_values(disc: &Arc<Discretization>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != disc.grid.len() {
            return Err(Error::GridMismatch);
        }
        for (k, v) in values.iter_mut().enumerate() {
            if !disc.is_active(k) {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(disc.non_finite(k));
            }
        }
        Ok(Self {
            disc: disc.clone(),
            values,
        })
    }

    /// First active node holding a non-finite value.
    pub fn check_finite(&self) -> Result<()> {
        match (0..self.values.len()).find(|&k| self.disc.is_active(k) && !self.values[k].is_finite()) {
            Some(k) => Err(self.disc.non_finite(k)),
            None => Ok(()),
        }
    }

    pub fn integral(&self) -> Result<f64> {
        self.disc.integrate(&self.values)
    }

    /// Value at the node nearest to `x`.
    pub fn at(&self, x: Vec2) -> Option<f64> {
        let (i, j) = self.disc.grid.nearest(x)?;
        let v = self.values[self.disc.grid.index(i, j)];
        v.is_finite().then_some(v)
    }
}

impl VectorField {
    pub fn norm_squared(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).collect()
    }
}

impl HessianField {
    /// `f_xx^2 + 2 f_xy^2 + f_yy^2`.
    pub fn frobenius_squared(&self) -> Vec<f64> {
        (0..self.xx.len())
            .map(|k| self.xx[k].powi(2) + 2.0 * self.xy[k].powi(2) + self.yy[k].powi(2))
            .collect()
    }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField {
        disc: f.disc.clone(),
        x: f.disc.apply(Op::Dx, &f.values),
        y: f.disc.apply(Op::Dy, &f.values),
    }
}

pub fn hessian(f: &ScalarField) -> HessianField {
    HessianField {
        disc: f.disc.clone(),
        xx: f.disc.apply(Op::Dxx, &f.values),
        xy: f.disc.apply(Op::Dxy, &f.values),
        yy: f.disc.apply(Op::Dyy, &f.values),
    }
}

/// Field value and gradient extrapolated to a boundary sample.
#[derive(Clone, Copy, Debug)]
pub struct TraceSample {
    pub sample: BoundarySample,
    pub value: f64,
    pub gradient: Vec2,
}

impl TraceSample {
    /// `grad f . eta`.
    pub fn normal_derivative(&self) -> f64 {
        self.gradient.dot(&self.sample.inward_normal)
    }
}

/// Trace of `f` and `grad f` at `n` boundary samples equally spaced in
/// arclength. Each sample uses the biquadratic interpolant on the 3x3 block
/// centered at the node nearest to `p + h eta` (moved further inward if that
/// block is incomplete), evaluated at `p` itself.
pub fn boundary_trace(f: &ScalarField, domain: &ConvexDomain, n: usize) -> Result<Vec<TraceSample>> {
    if n < 64 {
        return Err(Error::invalid("boundary trace needs at least 64 samples"));
    }
    domain.boundary_samples(n).into_iter().map(|s| trace_at(f, s)).collect()
}

pub fn trace_at(f: &ScalarField, s: BoundarySample) -> Result<TraceSample> {
    let st = TraceStencil::new(&f.disc, s)?;
    let mut value = 0.0;
    let mut grad = Vec2::zeros();
    for (n, &k) in st.nodes.iter().enumerate() {
        let v = f.values[k];
        value += v * st.value[n];
        grad.x += v * st.dx[n];
        grad.y += v * st.dy[n];
    }
    Ok(TraceSample {
        sample: s,
        value,
        gradient: grad,
    })
}

/// Linear weights taking the nine node values of an interpolation block to
/// the trace value and gradient at a boundary point.
#[derive(Clone, Copy, Debug)]
pub struct TraceStencil {
    pub nodes: [usize; 9],
    pub value: [f64; 9],
    pub dx: [f64; 9],
    pub dy: [f64; 9],
}

impl TraceStencil {
    pub fn new(disc: &Discretization, s: BoundarySample) -> Result<Self> {
        let g = disc.grid;
        let h = g.h;
        for shift in 1..=4 {
            let q = s.point + s.inward_normal * (shift as f64 * h);
            let Some((ci, cj)) = g.nearest(q) else { continue };
            if ci == 0 || cj == 0 || ci + 1 >= g.nx || cj + 1 >= g.ny {
                continue;
            }
            let block_ok = (0..3).all(|b| (0..3).all(|a| disc.is_active(g.index(ci + a - 1, cj + b - 1))));
            if !block_ok {
                continue;
            }
            let c = g.node(ci, cj);
            let (lx, dlx) = lagrange3(snap((s.point.x - c.x) / h, 32));
            let (ly, dly) = lagrange3(snap((s.point.y - c.y) / h, 32));
            let mut st = Self {
                nodes: [0; 9],
                value: [0.0; 9],
                dx: [0.0; 9],
                dy: [0.0; 9],
            };
            for b in 0..3 {
                for a in 0..3 {
                    let n = 3 * b + a;
                    st.nodes[n] = g.index(ci + a - 1, cj + b - 1);
                    st.value[n] = lx[a] * ly[b];
                    st.dx[n] = dlx[a] * ly[b] / h;
                    st.dy[n] = lx[a] * dly[b] / h;
                }
            }
            return Ok(st);
        }
        Err(Error::Numerical(format!(
            "no complete interpolation block near boundary point ({:.6}, {:.6})",
            s.point.x, s.point.y
        )))
    }
}

/// Quadratic Lagrange basis on nodes -1, 0, 1 and its derivative.
fn lagrange3(t: f64) -> ([f64; 3], [f64; 3]) {
    (
        [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
        [t - 0.5, -2.0 * t, t + 0.5],
    )
}

/// `sqrt(int (f - g)^2 + int |grad f - grad g|^2)`.
pub fn w12_distance(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    if !f.disc.same_as(&g.disc) {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
    let d = ScalarField {
        disc: f.disc.clone(),
        values: diff,
    };
    let gd = gradient(&d);
    let sq: Vec<f64> = (0..d.values.len())
        .map(|k| d.values[k].powi(2) + gd.x[k].powi(2) + gd.y[k].powi(2))
        .collect();
    Ok(f.disc.integrate(&sq)?.max(0.0).sqrt())
}

/// CSV with columns `x, y, value, mask`.
pub fn write_csv<W: Write>(f: &ScalarField, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Numerical(format!("csv write failed: {e}"));
    wr.write_record(["x", "y", "value", "mask"]).map_err(io)?;
    let g = f.disc.grid;
    for k in 0..g.len() {
        let x = g.node_at(k);
        wr.write_record(&[
            format!("{}", x.x),
            format!("{}", x.y),
            format!("{}", f.values[k]),
            f.disc.mask[k].as_str().to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush()
        .map_err(|e| Error::Numerical(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Little-endian binary snapshot: `nx: u64, ny: u64, h: f64, origin_x: f64,
/// origin_y: f64`, then `nx * ny` values of type `f64`, row by row (`j`
/// outer). Exterior nodes are NaN.
pub fn write_binary<W: Write>(f: &ScalarField, mut w: W) -> std::io::Result<()> {
    let g = f.disc.grid;
    w.write_all(&(g.nx as u64).to_le_bytes())?;
    w.write_all(&(g.ny as u64).to_le_bytes())?;
    for v in [g.h, g.origin.x, g.origin.y] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * g.len());
    for v in &f.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Inverse of [`write_binary`].
pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<(GridSpec, Vec<f64>)> {
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> std::io::Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let nx = u64::from_le_bytes(next(&mut r)?) as usize;
    let ny = u64::from_le_bytes(next(&mut r)?) as usize;
    let h = f64::from_le_bytes(next(&mut r)?);
    let ox = f64::from_le_bytes(next(&mut r)?);
    let oy = f64::from_le_bytes(next(&mut r)?);
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != 8 * nx * ny {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("expected {} values, found {} bytes", nx * ny, data.len()),
        ));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((
        GridSpec {
            origin: Vec2::new(ox, oy),
            h,
            nx,
            ny,
        },
        values,
    ))
}
