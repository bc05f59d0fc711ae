//! Theorem-level diagnostics of a field and log-log scaling fits over
//! parameter sweeps.
//!
//! For a field `u` on a domain of diameter 2 the report collects the energy,
//! the two hypothesis integrals, the best-fitting unit disk `B_1(x)` with
//! `|Omega \ B_1(x)|`, the gradient deviation from `-(z - x)/|z - x|`, and
//! the `W^{1,2}` distance to the distance function. The power-law bounds
//! with exponents [`GAMMA`], [`LAMBDA`] and [`T1_EXPONENT`] are evaluated
//! with an explicit constant; at laboratory values of the energy they are
//! close to vacuous (`0.01^{1/512} ~ 0.991`), so the substantive checks are
//! the fitted slopes and monotonicity across a sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::competitor::{build_competitor, CompetitorParams};
use crate::energy::{aviles_giga_energy, gradient_deviation};
use crate::error::{Error, Result};
use crate::fields::{boundary_trace, w12_distance, ScalarField};
use crate::geometry::{best_fit_ball, disk_symmetric_difference, ConvexDomain};
use crate::minimize::{minimize, MinimizeOptions};

/// Exponent of the energy in the disk-closeness bound.
pub const GAMMA: f64 = 1.0 / 512.0;
/// Exponent in the `W^{1,2}` bound for minimizers.
pub const LAMBDA: f64 = 1.0 / 3000.0;
/// Exponent of `beta` under the entropy-production hypotheses.
pub const T1_EXPONENT: f64 = 1.0 / 256.0;
/// Largest boundary residual for which a field counts as admissible.
pub const ADMISSIBLE_RESIDUAL: f64 = 0.05;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TheoremReport {
    pub eps: f64,
    pub h: f64,
    /// `I_eps(u)`.
    pub energy: f64,
    /// `int |1 - |grad u|^2| |D^2 u|`.
    pub entropy_production: f64,
    /// `int (1 - |grad u|^2)^2`.
    pub eikonal_defect: f64,
    /// Smallest `beta` with `entropy_production <= beta` and
    /// `eikonal_defect <= beta^2`.
    pub beta_hypothesis: f64,
    pub best_center: [f64; 2],
    /// `|Omega \triangle B_1(best_center)|`.
    pub symdiff: f64,
    /// `int |grad u + (z - x)/|z - x||^2` with `x = best_center`.
    pub deviation: f64,
    /// `||u - dist(., boundary)||_{W^{1,2}}`.
    pub w12_gap: f64,
    /// `inf_y |Omega \triangle B_1(y)|`.
    pub alpha: f64,
    /// `4 (alpha + eps)`.
    pub beta_corollary: f64,
    /// Quadrature weight of nodes left out of the integrals.
    pub excluded_area: f64,
    /// `max |u|` over boundary samples.
    pub boundary_value_residual: f64,
    /// `max |grad u . eta - 1|` over boundary samples.
    pub boundary_normal_residual: f64,
    /// Both boundary residuals are at most [`ADMISSIBLE_RESIDUAL`].
    pub admissible: bool,
}

/// Which power-law bounds hold with a given constant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundCheck {
    pub constant: f64,
    /// `symdiff <= C I^GAMMA` and `deviation <= C I^GAMMA`.
    pub energy_bounds: bool,
    /// `symdiff <= C beta^{1/256}` and `deviation <= C beta^{1/256}` with
    /// `beta = beta_hypothesis`.
    pub hypothesis_bounds: bool,
    /// `w12_gap <= C (eps + alpha)^LAMBDA`.
    pub w12_bound: bool,
}

impl TheoremReport {
    pub fn check_bounds(&self, constant: f64) -> BoundCheck {
        let e = constant * self.energy.powf(GAMMA);
        let b = constant * self.beta_hypothesis.powf(T1_EXPONENT);
        BoundCheck {
            constant,
            energy_bounds: self.symdiff <= e && self.deviation <= e,
            hypothesis_bounds: self.symdiff <= b && self.deviation <= b,
            w12_bound: self.w12_gap <= constant * (self.eps + self.alpha).powf(LAMBDA),
        }
    }
}

/// Fill a [`TheoremReport`] for `u` on `domain`, which must have diameter 2.
pub fn verify_theorem(domain: &ConvexDomain, u: &ScalarField, eps: f64) -> Result<TheoremReport> {
    let diam = domain.diameter();
    if (diam - 2.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "domain diameter is {diam}; normalize it to diameter 2 first"
        )));
    }
    let en = aviles_giga_energy(u, eps)?;
    let (center, alpha) = best_fit_ball(domain);
    let symdiff = disk_symmetric_difference(domain, center);
    let dev = gradient_deviation(u, domain, center)?;
    let zeta = ScalarField::sample(&u.disc, |x| domain.signed_distance(x));
    let w12_gap = w12_distance(u, &zeta)?;
    let trace = boundary_trace(u, domain, 256)?;
    let bv = trace.iter().map(|t| t.value.abs()).fold(0.0, f64::max);
    let bn = trace
        .iter()
        .map(|t| (t.normal_derivative() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(TheoremReport {
        eps,
        h: u.disc.h(),
        energy: en.total,
        entropy_production: en.entropy_production,
        eikonal_defect: en.eikonal_defect,
        beta_hypothesis: en.entropy_production.max(en.eikonal_defect.sqrt()),
        best_center: [center.x, center.y],
        symdiff,
        deviation: dev.value,
        w12_gap,
        alpha,
        beta_corollary: 4.0 * (alpha + eps),
        excluded_area: u.disc.excluded_area + dev.excluded_area,
        boundary_value_residual: bv,
        boundary_normal_residual: bn,
        admissible: bv <= ADMISSIBLE_RESIDUAL && bn <= ADMISSIBLE_RESIDUAL,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl FitResult {
    /// Fitted `y` at `x`.
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::invalid("fit needs equally many x and y values"));
    }
    if x.len() < 3 {
        return Err(Error::invalid("fit needs at least 3 points"));
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        n_points: x.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum Pipeline {
    Competitor {
        #[serde(default = "default_q")]
        q: usize,
        #[serde(default)]
        cap_slope: Option<f64>,
    },
    Minimize(MinimizeOptions),
}

fn default_q() -> usize {
    32
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::Competitor { q: 32, cap_slope: None }
    }
}

/// One sweep member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Member {
    pub label: String,
    pub domain: ConvexDomain,
    pub eps: f64,
    /// `16 eps^2` when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    /// `eps / 4` when absent.
    #[serde(default)]
    pub h: Option<f64>,
}

impl Member {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(16.0 * self.eps * self.eps)
    }
    pub fn h(&self) -> f64 {
        self.h.unwrap_or(self.eps / 4.0)
    }
}

/// Field produced by a pipeline on one member.
pub fn run_pipeline(member: &Member, pipeline: &Pipeline) -> Result<ScalarField> {
    match pipeline {
        Pipeline::Competitor { q, cap_slope } => {
            let p = CompetitorParams::new(member.eps, member.beta(), *q, *cap_slope)?;
            build_competitor(&member.domain, &p, member.h())
        }
        Pipeline::Minimize(opts) => {
            let mut o = opts.clone();
            o.h = Some(member.h());
            o.beta.get_or_insert(member.beta());
            Ok(minimize(&member.domain, member.eps, &o)?.field)
        }
    }
}

/// One row of a sweep table.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub beta: f64,
    pub eps_plus_alpha: f64,
    #[serde(flatten)]
    pub report: TheoremReport,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepFits {
    /// `I_eps(u)` against `beta`.
    pub energy_vs_beta: Option<FitResult>,
    /// `w12_gap` against `eps + alpha`.
    pub w12_vs_eps_alpha: Option<FitResult>,
    /// `deviation` against `I_eps(u)`.
    pub deviation_vs_energy: Option<FitResult>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Members that failed, with the error.
    pub failures: Vec<(String, String)>,
    pub fits: SweepFits,
}

/// Fits over the rows of a sweep; a fit is absent when its values do not
/// admit one (fewer than 3 points, non-positive or identical drivers).
pub fn fit_rows(rows: &[SweepRow]) -> SweepFits {
    let col = |f: &dyn Fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let energy = col(&|r| r.report.energy);
    SweepFits {
        energy_vs_beta: fit_loglog(&col(&|r| r.beta), &energy).ok(),
        w12_vs_eps_alpha: fit_loglog(&col(&|r| r.eps_plus_alpha), &col(&|r| r.report.w12_gap)).ok(),
        deviation_vs_energy: fit_loglog(&energy, &col(&|r| r.report.deviation)).ok(),
    }
}

/// Run `pipeline` and [`verify_theorem`] on every member in parallel.
/// Failing members are listed rather than aborting the sweep.
pub fn exponent_sweep(family: &[Member], pipeline: &Pipeline) -> Result<SweepOutcome> {
    if family.len() < 3 {
        return Err(Error::invalid("a sweep needs at least 3 members"));
    }
    let results: Vec<Result<SweepRow>> = family
        .par_iter()
        .map(|m| {
            let u = run_pipeline(m, pipeline)?;
            let report = verify_theorem(&m.domain, &u, m.eps)?;
            Ok(SweepRow {
                label: m.label.clone(),
                beta: m.beta(),
                eps_plus_alpha: m.eps + report.alpha,
                report,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (m, r) in family.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((m.label.clone(), e.to_string())),
        }
    }
    let fits = fit_rows(&rows);
    Ok(SweepOutcome { rows, failures, fits })
}

/// Column order of sweep tables.
pub const SWEEP_COLUMNS: [&str; 19] = [
    "label",
    "beta",
    "eps_plus_alpha",
    "eps",
    "h",
    "energy",
    "entropy_production",
    "eikonal_defect",
    "beta_hypothesis",
    "center_x",
    "center_y",
    "symdiff",
    "deviation",
    "w12_gap",
    "alpha",
    "beta_corollary",
    "excluded_area",
    "boundary_value_residual",
    "boundary_normal_residual",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Numerical(format!("writing sweep table: {e}"));
    out.write_record(SWEEP_COLUMNS.iter().chain(["admissible"].iter()))
        .map_err(io)?;
    for r in rows {
        let p = &r.report;
        let nums = [
            r.beta,
            r.eps_plus_alpha,
            p.eps,
            p.h,
            p.energy,
            p.entropy_production,
            p.eikonal_defect,
            p.beta_hypothesis,
            p.best_center[0],
            p.best_center[1],
            p.symdiff,
            p.deviation,
            p.w12_gap,
            p.alpha,
            p.beta_corollary,
            p.excluded_area,
            p.boundary_value_residual,
            p.boundary_normal_residual,
        ];
        let mut rec = vec![r.label.clone()];
        rec.extend(nums.iter().map(|v| format!("{v:e}")));
        rec.push(p.admissible.to_string());
        out.write_record(&rec).map_err(io)?;
    }
    out.flush()
        .map_err(|e| Error::Numerical(format!("writing sweep table: {e}")))?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let bad = |msg: String| Error::invalid(format!("malformed sweep table: {msg}"));
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let expected: Vec<&str> = SWEEP_COLUMNS.iter().copied().chain(["admissible"]).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(bad("unexpected columns".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("column {} is not a number: '{}'", expected[i], &rec[i])))
        };
        let report = TheoremReport {
            eps: num(3)?,
            h: num(4)?,
            energy: num(5)?,
            entropy_production: num(6)?,
            eikonal_defect: num(7)?,
            beta_hypothesis: num(8)?,
            best_center: [num(9)?, num(10)?],
            symdiff: num(11)?,
            deviation: num(12)?,
            w12_gap: num(13)?,
            alpha: num(14)?,
            beta_corollary: num(15)?,
            excluded_area: num(16)?,
            boundary_value_residual: num(17)?,
            boundary_normal_residual: num(18)?,
            admissible: rec[19]
                .parse()
                .map_err(|_| bad("admissible must be true or false".into()))?,
        };
        rows.push(SweepRow {
            label: rec[0].to_string(),
            beta: num(1)?,
            eps_plus_alpha: num(2)?,
            report,
        });
    }
    if rows.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(rows)
}

/// Ellipses of unit area with the given aspect ratios, scaled to diameter 2.
pub fn ellipse_family(aspects: &[f64]) -> Result<Vec<ConvexDomain>> {
    aspects
        .iter()
        .map(|&a| Ok(ConvexDomain::unit_area_ellipse(a)?.normalize()))
        .collect()
}

/// Whether `values` is nondecreasing up to a relative slack.
pub fn nondecreasing_within(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack))
}

/// Deviation ceiling `int (|grad u| + 1)^2` on the same nodes as the
/// deviation integral.
pub fn deviation_ceiling(u: &ScalarField) -> Result<f64> {
    let g = crate::fields::gradient(u);
    let v: Vec<f64> = g.norm_squared().iter().map(|s| (s.sqrt() + 1.0).powi(2)).collect();
    u.disc.integrate(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::rasterize;
    use crate::geometry::Vec2;
    use crate::minimize::Seed;

    #[test]
    fn fit_recovers_power_laws() {
        let x = [0.04, 0.02, 0.01, 0.005];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.75)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope - 0.75).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.predict(0.1) - 3.0 * 0.1f64.powf(0.75)).abs() < 1e-12);
        assert!(fit_loglog(&x[..2], &y[..2]).is_err());
        assert!(fit_loglog(&[1.0, 2.0, -1.0], &[1.0, 1.0, 1.0]).is_err());
        let noisy = [1.0, 3.0, 2.0, 5.0];
        let g = fit_loglog(&x, &noisy).unwrap();
        assert!(g.r_squared >= 0.0 && g.r_squared <= 1.0);
    }

    #[test]
    fn disk_competitor_report() {
        let dom = ConvexDomain::unit_disk();
        let eps = 0.02;
        let p = CompetitorParams::new(eps, 16.0 * eps * eps, 32, None).unwrap();
        let xi = build_competitor(&dom, &p, eps / 4.0).unwrap();
        let r = verify_theorem(&dom, &xi, eps).unwrap();
        assert!(r.symdiff <= dom.tolerances.area, "{r:?}");
        assert!(r.deviation <= 0.05, "{r:?}");
        assert!(r.admissible);
        assert_eq!(r.beta_corollary, 4.0 * (r.alpha + r.eps));
        assert!(r.symdiff <= dom.area() + std::f64::consts::PI);
        assert!(r.deviation <= deviation_ceiling(&xi).unwrap());
        let b = r.check_bounds(10.0);
        assert!(b.energy_bounds && b.hypothesis_bounds && b.w12_bound);
    }

    #[test]
    fn wrong_diameter_is_rejected() {
        let dom = ConvexDomain::disk(Vec2::zeros(), 0.5).unwrap();
        let disc = rasterize(&dom, 0.01).unwrap();
        let u = ScalarField::sample(&disc, |x| dom.signed_distance(x));
        assert!(verify_theorem(&dom, &u, 0.04).is_err());
    }

    #[test]
    fn non_admissible_field_is_flagged() {
        let dom = ConvexDomain::unit_disk();
        let disc = rasterize(&dom, 0.01).unwrap();
        let u = ScalarField::sample(&disc, |x| 0.3 + x.x);
        let r = verify_theorem(&dom, &u, 0.04).unwrap();
        assert!(!r.admissible);
        assert!(r.boundary_value_residual > 0.2);
    }

    #[test]
    fn report_is_translation_invariant() {
        let eps = 0.04;
        let h = eps / 4.0;
        let a = ellipse_family(&[1.2]).unwrap().remove(0);
        let b = a.translate(Vec2::new(5.0 * h, 2.0 * h));
        let p = CompetitorParams::new(eps, 16.0 * eps * eps, 32, None).unwrap();
        let ra = verify_theorem(&a, &build_competitor(&a, &p, h).unwrap(), eps).unwrap();
        let rb = verify_theorem(&b, &build_competitor(&b, &p, h).unwrap(), eps).unwrap();
        let pairs = [
            (ra.energy, rb.energy),
            (ra.entropy_production, rb.entropy_production),
            (ra.eikonal_defect, rb.eikonal_defect),
            (ra.symdiff, rb.symdiff),
            (ra.deviation, rb.deviation),
            (ra.w12_gap, rb.w12_gap),
            (ra.alpha, rb.alpha),
            (ra.excluded_area, rb.excluded_area),
            (ra.boundary_normal_residual, rb.boundary_normal_residual),
            (ra.best_center[0] + 5.0 * h, rb.best_center[0]),
            (ra.best_center[1] + 2.0 * h, rb.best_center[1]),
        ];
        for (x, y) in pairs {
            assert!((x - y).abs() <= 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn ellipse_minimizer_deviates_more_than_disk() {
        let eps = 0.08;
        let opts = MinimizeOptions {
            max_iters: 150,
            seed: Seed::Competitor,
            ..Default::default()
        };
        let mut devs = Vec::new();
        for dom in ellipse_family(&[1.0, 1.1]).unwrap() {
            let m = minimize(&dom, eps, &opts).unwrap();
            devs.push(verify_theorem(&dom, &m.field, eps).unwrap().deviation);
        }
        assert!(devs[1] > devs[0], "{devs:?}");
    }

    #[test]
    fn sweep_table_round_trip_and_determinism() {
        let family: Vec<Member> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&eps| Member {
                label: format!("disk-{eps}"),
                domain: ConvexDomain::unit_disk(),
                eps,
                beta: None,
                h: None,
            })
            .collect();
        let out = exponent_sweep(&family, &Pipeline::default()).unwrap();
        assert!(out.failures.is_empty());
        let fit = out.fits.energy_vs_beta.unwrap();
        assert!(fit.slope > 0.0 && fit.n_points == 3);
        let mut a = Vec::new();
        write_sweep_csv(&out.rows, &mut a).unwrap();
        let again = exponent_sweep(&family, &Pipeline::default()).unwrap();
        let mut b = Vec::new();
        write_sweep_csv(&again.rows, &mut b).unwrap();
        assert_eq!(a, b);
        let back = read_sweep_csv(&a[..]).unwrap();
        assert_eq!(back, out.rows);
        assert!(read_sweep_csv(&b"label\n"[..]).is_err());
    }

    #[test]
    fn failing_member_is_reported() {
        let mut family: Vec<Member> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&eps| Member {
                label: format!("disk-{eps}"),
                domain: ConvexDomain::unit_disk(),
                eps,
                beta: None,
                h: None,
            })
            .collect();
        family[1].beta = Some(1e-6);
        let out = exponent_sweep(&family, &Pipeline::default()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, "disk-0.04");
        assert!(out.fits.energy_vs_beta.is_none());
    }
}
