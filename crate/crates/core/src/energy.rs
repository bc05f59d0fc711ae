//! The Aviles-Giga energy
//! `I_eps(u) = 1/2 int eps^{-1} (1 - |grad u|^2)^2 + eps |D^2 u|^2`
//! and the integrals it controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gradient, hessian, ScalarField};
use crate::geometry::{ConvexDomain, Vec2};

/// Decomposed energy of a field.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyReport {
    pub eps: f64,
    pub h: f64,
    /// `1/(2 eps) int (1 - |grad u|^2)^2`.
    pub penalty_term: f64,
    /// `eps/2 int |D^2 u|^2`.
    pub regularization_term: f64,
    pub total: f64,
    /// `int |1 - |grad u|^2| |D^2 u|`.
    pub entropy_production: f64,
    /// `int (1 - |grad u|^2)^2`.
    pub eikonal_defect: f64,
    pub excluded_area: f64,
    /// Set when `h > eps / 4`: the grid does not resolve the transition
    /// layers and values are grid-sensitive.
    pub coarse_grid: bool,
}

/// Node-wise integrands, NaN at invalid nodes.
#[derive(Clone, Debug)]
pub struct Densities {
    /// `(1 - |grad u|^2)^2`.
    pub defect: Vec<f64>,
    /// `|D^2 u|^2 = u_xx^2 + 2 u_xy^2 + u_yy^2`.
    pub hessian_sq: Vec<f64>,
    /// `|1 - |grad u|^2| |D^2 u|`.
    pub cross: Vec<f64>,
}

impl Densities {
    pub fn of(u: &ScalarField) -> Result<Self> {
        u.check_finite()?;
        let g = gradient(u);
        let hs = hessian(u).frobenius_squared();
        let n = u.values.len();
        let mut defect = vec![f64::NAN; n];
        let mut cross = vec![f64::NAN; n];
        for k in 0..n {
            if !u.disc.is_valid(k) {
                continue;
            }
            let e = 1.0 - g.x[k] * g.x[k] - g.y[k] * g.y[k];
            defect[k] = e * e;
            cross[k] = e.abs() * hs[k].sqrt();
        }
        Ok(Self {
            defect,
            hessian_sq: hs,
            cross,
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("eps must be positive"))
    }
}

pub fn aviles_giga_energy(u: &ScalarField, eps: f64) -> Result<EnergyReport> {
    aviles_giga_energy_where(u, eps, |_| true)
}

/// Energy with every integral restricted to nodes `x` where `keep(x)` holds.
pub fn aviles_giga_energy_where(u: &ScalarField, eps: f64, keep: impl Fn(Vec2) -> bool) -> Result<EnergyReport> {
    check_eps(eps)?;
    let d = Densities::of(u)?;
    let disc = &u.disc;
    let grid = disc.grid;
    let sel = |k: usize| keep(grid.node_at(k));
    let eikonal_defect = disc.integrate_where(&d.defect, sel)?;
    let hess = disc.integrate_where(&d.hessian_sq, sel)?;
    let entropy_production = disc.integrate_where(&d.cross, sel)?;
    let penalty_term = 0.5 * eikonal_defect / eps;
    let regularization_term = 0.5 * eps * hess;
    Ok(EnergyReport {
        eps,
        h: grid.h,
        penalty_term,
        regularization_term,
        total: penalty_term + regularization_term,
        entropy_production,
        eikonal_defect,
        excluded_area: disc.excluded_area,
        coarse_grid: grid.h > eps / 4.0,
    })
}

pub fn entropy_production(u: &ScalarField) -> Result<f64> {
    let d = Densities::of(u)?;
    u.disc.integrate(&d.cross)
}

pub fn eikonal_defect(u: &ScalarField) -> Result<f64> {
    let d = Densities::of(u)?;
    u.disc.integrate(&d.defect)
}

/// `int |grad u + (z - c)/|z - c||^2` with a disk of radius `2h` around `c`
/// left out.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Deviation {
    pub value: f64,
    pub exclusion_radius: f64,
    /// Quadrature weight of the excluded nodes.
    pub excluded_area: f64,
}

pub fn gradient_deviation(u: &ScalarField, domain: &ConvexDomain, center: Vec2) -> Result<Deviation> {
    if domain.signed_distance(center) <= 0.0 {
        return Err(Error::invalid(format!(
            "deviation center ({:.6}, {:.6}) is not inside the domain",
            center.x, center.y
        )));
    }
    u.check_finite()?;
    let g = gradient(u);
    let disc = &u.disc;
    let grid = disc.grid;
    let r = 2.0 * grid.h;
    let mut integrand = vec![f64::NAN; u.values.len()];
    let mut excluded = vec![0.0; u.values.len()];
    for k in 0..integrand.len() {
        if !disc.is_valid(k) {
            continue;
        }
        let z = grid.node_at(k) - center;
        let n = z.norm();
        if n < r {
            integrand[k] = 0.0;
            excluded[k] = 1.0;
            continue;
        }
        let e = Vec2::new(g.x[k], g.y[k]) + z / n;
        integrand[k] = e.norm_squared();
    }
    Ok(Deviation {
        value: disc.integrate(&integrand)?,
        exclusion_radius: r,
        excluded_area: disc.integrate(&excluded)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::rasterize;
    use crate::numerics::{adaptive_integrate, gauss_legendre};
    use std::f64::consts::PI;

    fn disk(h: f64) -> std::sync::Arc<crate::fields::Discretization> {
        rasterize(&ConvexDomain::unit_disk(), h).unwrap()
    }

    #[test]
    fn zero_field_is_pure_penalty() {
        let d = disk(0.0025);
        let u = ScalarField::sample(&d, |_| 0.0);
        let r = aviles_giga_energy(&u, 0.01).unwrap();
        assert_eq!(r.regularization_term, 0.0);
        assert!((r.total - 50.0 * PI).abs() < 0.01 * 50.0 * PI);
        assert_eq!(r.entropy_production, 0.0);
        assert!((r.eikonal_defect - PI).abs() < 0.01 * PI);
        assert!(!r.coarse_grid);
    }

    #[test]
    fn planar_wave_has_no_energy() {
        let d = disk(0.01);
        let u = ScalarField::sample(&d, |x| x.x);
        let r = aviles_giga_energy(&u, 0.05).unwrap();
        assert!(r.total < 1e-20 && r.entropy_production < 1e-10 && r.eikonal_defect < 1e-20);
    }

    #[test]
    fn report_identities() {
        let d = disk(0.02);
        let u = ScalarField::sample(&d, |x| (2.0 * x.x).sin() * x.y + 0.3 * x.y * x.y);
        for eps in [0.3, 0.05, 0.001] {
            let r = aviles_giga_energy(&u, eps).unwrap();
            assert_eq!(r.total, r.penalty_term + r.regularization_term);
            assert!(r.entropy_production <= r.total * (1.0 + 1e-12));
            assert!((r.penalty_term * eps - 0.5 * r.eikonal_defect).abs() <= 1e-15 * r.eikonal_defect);
        }
        let c = ScalarField::sample(&d, |_| 2.5);
        assert_eq!(entropy_production(&c).unwrap(), 0.0);
        assert!((eikonal_defect(&c).unwrap() - d.area()).abs() < 1e-12);
    }

    /// `int_0^1 f(r) 2 pi r dr` by Gauss-Legendre.
    fn radial(f: impl Fn(f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre(64);
        x.iter()
            .zip(&w)
            .map(|(x, w)| {
                let r = 0.5 * (x + 1.0);
                0.5 * w * f(r) * 2.0 * PI * r
            })
            .sum()
    }

    #[test]
    fn radial_bump_matches_radial_oracle() {
        // u = a exp(-r^2): u' = -2ar e, u'' = a(4r^2 - 2) e, hessian eigenvalues u'' and u'/r.
        let a = 0.8;
        let d = disk(0.0025);
        let u = ScalarField::sample(&d, |x| a * (-x.norm_squared()).exp());
        let up = |r: f64| -2.0 * a * r * (-r * r).exp();
        let upp = |r: f64| a * (4.0 * r * r - 2.0) * (-r * r).exp();
        let h2 = |r: f64| upp(r).powi(2) + (2.0 * a * (-r * r).exp()).powi(2);
        let cross = radial(|r| (1.0 - up(r).powi(2)).abs() * h2(r).sqrt());
        let defect = radial(|r| (1.0 - up(r).powi(2)).powi(2));
        let ep = entropy_production(&u).unwrap();
        let ed = eikonal_defect(&u).unwrap();
        assert!((ep - cross).abs() < 0.01 * cross, "{ep} {cross}");
        assert!((ed - defect).abs() < 0.01 * defect, "{ed} {defect}");
    }

    #[test]
    fn deviation_examples() {
        let dom = ConvexDomain::unit_disk();
        let h = 0.005;
        let d = disk(h);
        let cone = ScalarField::sample(&d, |x| 1.0 - x.norm());
        let dv = gradient_deviation(&cone, &dom, Vec2::zeros()).unwrap();
        assert_eq!(dv.exclusion_radius, 2.0 * h);
        assert!(
            dv.value < 50.0 * h * h + 4.0 * PI * (2.0 * h).powi(2) + 1e-3,
            "{}",
            dv.value
        );
        let wrong = ScalarField::sample(&d, |x| x.norm());
        let dw = gradient_deviation(&wrong, &dom, Vec2::zeros()).unwrap();
        assert!((dw.value - 4.0 * PI).abs() < 0.01 * 4.0 * PI, "{}", dw.value);
        // |e1 + z/|z||^2 = 2 + 2 cos(theta): polar integral over the unit disk.
        let wave = ScalarField::sample(&d, |x| x.x);
        let exact = 0.5 * adaptive_integrate(|t| 2.0 + 2.0 * t.cos(), 0.0, 2.0 * PI, 1e-12);
        let dz = gradient_deviation(&wave, &dom, Vec2::zeros()).unwrap();
        assert!((dz.value - exact).abs() < 0.01 * exact, "{} {exact}", dz.value);
        assert!(gradient_deviation(&wave, &dom, Vec2::new(3.0, 0.0)).is_err());
    }
}
