//! Entropy pairs.
//!
//! For a direction `theta` and a ramp `s`, work in coordinates where
//! `theta = e1` and let `phi(z) = s(z1)`. Then
//!
//! ```text
//! Phi(z) = (phi z1 + z2^2 phi_1,  phi z2 - z2 z1 phi_1)
//! Psi(z) = (-phi_1,  (z2 / 2) phi_11)
//! ```
//!
//! and for every divergence-free `m` (such as `m = R grad u` with
//! `R(z1, z2) = (-z2, z1)`), `div Phi(m) = Psi(m) . grad(1 - |m|^2)`.
//! Both maps are rotated back to the original frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gradient, Op, ScalarField, VectorField};
use crate::geometry::Vec2;
use crate::ramp::SmoothRamp;

/// Fields are only evaluated inside this radius.
pub const EVAL_RADIUS: f64 = 64.0;

/// Constant in the flux bound `lhs <= C beta^{-1/2} int |m| |1 - |m|^2| |grad m|`,
/// calibrated on the disk competitor and frozen.
pub const CURL_CONSTANT: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPair {
    pub theta: Vec2,
    pub ramp: SmoothRamp,
}

impl EntropyPair {
    pub fn new(theta: Vec2, delta: f64) -> Result<Self> {
        let n = theta.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("direction must be a nonzero vector"));
        }
        Ok(Self {
            theta: theta / n,
            ramp: SmoothRamp::new(delta)?,
        })
    }

    pub fn from_angle(angle: f64, delta: f64) -> Result<Self> {
        Self::new(Vec2::new(angle.cos(), angle.sin()), delta)
    }

    fn to_local(self, z: Vec2) -> Vec2 {
        let t = self.theta;
        Vec2::new(t.x * z.x + t.y * z.y, -t.y * z.x + t.x * z.y)
    }

    fn to_world(self, v: Vec2) -> Vec2 {
        let t = self.theta;
        Vec2::new(t.x * v.x - t.y * v.y, t.y * v.x + t.x * v.y)
    }

    fn check(z: Vec2) -> Result<()> {
        if z.norm() <= EVAL_RADIUS {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "entropy pair evaluated at |z| = {:.3} outside the ball of radius {EVAL_RADIUS}",
                z.norm()
            )))
        }
    }

    /// `theta` if `z . theta > 0`, else 0.
    pub fn lambda(&self, z: Vec2) -> Vec2 {
        if z.dot(&self.theta) > 0.0 {
            self.theta
        } else {
            Vec2::zeros()
        }
    }

    pub fn phi(&self, z: Vec2) -> Result<Vec2> {
        Self::check(z)?;
        Ok(self.phi_unchecked(z))
    }

    pub fn psi(&self, z: Vec2) -> Result<Vec2> {
        Self::check(z)?;
        Ok(self.psi_unchecked(z))
    }

    fn phi_unchecked(&self, z: Vec2) -> Vec2 {
        let l = self.to_local(z);
        let [s, s1, _, _] = self.ramp.eval(l.x);
        self.to_world(Vec2::new(s * l.x + l.y * l.y * s1, s * l.y - l.y * l.x * s1))
    }

    fn psi_unchecked(&self, z: Vec2) -> Vec2 {
        let l = self.to_local(z);
        let [_, s1, s2, _] = self.ramp.eval(l.x);
        self.to_world(Vec2::new(-s1, 0.5 * l.y * s2))
    }

    /// Apply `f` to every valid node of `m`; fails if `|m|` leaves the
    /// evaluation ball.
    fn map(&self, m: &VectorField, f: impl Fn(Vec2) -> Vec2) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = m.x.len();
        let mut ox = vec![f64::NAN; n];
        let mut oy = vec![f64::NAN; n];
        for k in 0..n {
            if !m.disc.is_valid(k) {
                continue;
            }
            let z = Vec2::new(m.x[k], m.y[k]);
            Self::check(z)?;
            let v = f(z);
            ox[k] = v.x;
            oy[k] = v.y;
        }
        Ok((ox, oy))
    }
}

/// `m = R grad u = (-u_y, u_x)`.
pub fn rotated_gradient(u: &ScalarField) -> VectorField {
    let g = gradient(u);
    VectorField {
        disc: g.disc,
        x: g.y.iter().map(|v| -v).collect(),
        y: g.x,
    }
}

fn divergence(m: &VectorField, fx: &[f64], fy: &[f64]) -> Vec<f64> {
    let a = m.disc.apply(Op::Dx, fx);
    let b = m.disc.apply(Op::Dy, fy);
    a.iter().zip(&b).map(|(a, b)| a + b).collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityResidual {
    /// `int |div Phi(m) - Psi(m) . grad(1 - |m|^2)|`.
    pub residual_l1: f64,
    /// `int |Psi(m) . grad(1 - |m|^2)|`.
    pub rhs_check: f64,
    /// Area of valid nodes where a composed stencil reached an invalid node.
    pub excluded_area: f64,
}

pub fn identity_residual(m: &VectorField, pair: &EntropyPair) -> Result<IdentityResidual> {
    let disc = &m.disc;
    let (px, py) = pair.map(m, |z| pair.phi_unchecked(z))?;
    let (sx, sy) = pair.map(m, |z| pair.psi_unchecked(z))?;
    let div_phi = divergence(m, &px, &py);
    let defect: Vec<f64> = m.x.iter().zip(&m.y).map(|(a, b)| 1.0 - a * a - b * b).collect();
    let gx = disc.apply(Op::Dx, &defect);
    let gy = disc.apply(Op::Dy, &defect);
    let n = defect.len();
    let mut res = vec![f64::NAN; n];
    let mut rhs = vec![f64::NAN; n];
    for k in 0..n {
        let r = sx[k] * gx[k] + sy[k] * gy[k];
        rhs[k] = r.abs();
        res[k] = (div_phi[k] - r).abs();
    }
    let (residual_l1, skipped) = disc.integrate_finite(&res);
    let (rhs_check, _) = disc.integrate_finite(&rhs);
    Ok(IdentityResidual {
        residual_l1,
        rhs_check,
        excluded_area: skipped,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurlBound {
    /// `int |div[Phi(m) - Psi(m)(1 - |m|^2)]|`, which equals
    /// `int |curl[R Phi(m) - R Psi(m)(1 - |m|^2)]|`.
    pub lhs: f64,
    /// `C beta^{-1/2} int |m| |1 - |m|^2| |grad m|`.
    pub rhs: f64,
    pub constant: f64,
    pub excluded_area: f64,
}

impl CurlBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

pub fn curl_flux_bound(m: &VectorField, pair: &EntropyPair, beta: f64) -> Result<CurlBound> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    let expect = beta.powf(0.25);
    if (pair.ramp.delta - expect).abs() > 1e-12 * expect {
        return Err(Error::invalid(format!(
            "ramp width {} does not equal beta^(1/4) = {expect}",
            pair.ramp.delta
        )));
    }
    let disc = &m.disc;
    let defect: Vec<f64> = m.x.iter().zip(&m.y).map(|(a, b)| 1.0 - a * a - b * b).collect();
    let (px, py) = pair.map(m, |z| pair.phi_unchecked(z))?;
    let (sx, sy) = pair.map(m, |z| pair.psi_unchecked(z))?;
    let fx: Vec<f64> = (0..defect.len()).map(|k| px[k] - sx[k] * defect[k]).collect();
    let fy: Vec<f64> = (0..defect.len()).map(|k| py[k] - sy[k] * defect[k]).collect();
    let div = divergence(m, &fx, &fy);
    let lhs_int: Vec<f64> = div.iter().map(|v| v.abs()).collect();
    let mxx = disc.apply(Op::Dx, &m.x);
    let mxy = disc.apply(Op::Dy, &m.x);
    let myx = disc.apply(Op::Dx, &m.y);
    let myy = disc.apply(Op::Dy, &m.y);
    let rhs_int: Vec<f64> = (0..defect.len())
        .map(|k| {
            let gm = (mxx[k].powi(2) + mxy[k].powi(2) + myx[k].powi(2) + myy[k].powi(2)).sqrt();
            (m.x[k].powi(2) + m.y[k].powi(2)).sqrt() * defect[k].abs() * gm
        })
        .collect();
    let (lhs, skipped) = disc.integrate_finite(&lhs_int);
    let (rhs_raw, _) = disc.integrate_finite(&rhs_int);
    Ok(CurlBound {
        lhs,
        rhs: CURL_CONSTANT * rhs_raw / beta.sqrt(),
        constant: CURL_CONSTANT,
        excluded_area: skipped,
    })
}
