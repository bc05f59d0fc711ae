//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line with the
//! measured values, then asserts.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use aglab_core::competitor::{
    build_competitor, build_competitor_on, contact_set_diagnostic, CompetitorParams, KernelRule, CONSTRUCTION_CAP_SLOPE,
};
use aglab_core::energy::aviles_giga_energy;
use aglab_core::entropy::{identity_residual, rotated_gradient, EntropyPair};
use aglab_core::fields::{gradient, rasterize, trace_at, Discretization, GridSpec, Region, ScalarField};
use aglab_core::minimize::{minimize, minimize_from, MinimizeOptions, Minimized, Objective};
use aglab_core::verify::{ellipse_family, fit_loglog, nondecreasing_within, verify_theorem, TheoremReport};
use aglab_core::{ConvexDomain, Vec2};
use rand::{Rng, SeedableRng};

// Criterion 1.
const IDENTITY_MIN_ORDER: f64 = 1.8;
const IDENTITY_MAX_RESIDUAL: f64 = 1e-3;
// Criterion 2.
const AFFINE_MAX_ERROR: f64 = 1e-6;
// Criterion 3.
const TRACE_MIN_RATE: f64 = 0.35;
const TRACE_SQRT_EPS_FACTOR: f64 = 2.0;
// Criterion 4.
const COMPETITOR_MARGIN: f64 = 1.5;
// Criterion 5.
const GRADIENT_REL_TOL: f64 = 1e-5;
// Criterion 6.
const SCALING_WINDOW: (f64, f64) = (0.8, 1.3);
// Criterion 7.
const MONOTONE_SLACK: f64 = 0.05;
const BOUND_CONSTANT: f64 = 10.0;
// Criterion 8.
const TUBE_CONSTANT: f64 = 8.0 * PI;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    // Written past the test harness's capture so that passing criteria show
    // up in the output as well.
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{verdict} criterion {id} ({name}): {detail}");
}

#[test]
fn criterion_1_entropy_identity() {
    let dom = ConvexDomain::unit_disk();
    let u = |x: Vec2| 0.5 * x.x.sin() + 0.3 * x.y.cos() + 0.2 * (x.x + x.y).sin();
    let hs = [0.04, 0.02, 0.01];
    let mut res = Vec::new();
    for h in hs {
        let d = rasterize(&dom, h).unwrap();
        let m = rotated_gradient(&ScalarField::sample(&d, u));
        let mut worst: f64 = 0.0;
        for k in 0..8 {
            let pair = EntropyPair::from_angle(k as f64 * PI / 4.0 + 0.1, 0.5).unwrap();
            worst = worst.max(identity_residual(&m, &pair).unwrap().residual_l1);
        }
        res.push(worst);
    }
    let order = fit_loglog(&hs, &res).unwrap().slope;
    let pass = order >= IDENTITY_MIN_ORDER && res[2] <= IDENTITY_MAX_RESIDUAL;
    report(
        1,
        "entropy identity",
        pass,
        format!("residuals {res:?} at h {hs:?}, order {order:.3} (>= {IDENTITY_MIN_ORDER}), residual at h=0.01 <= {IDENTITY_MAX_RESIDUAL:e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_affine_mollification() {
    let rule = KernelRule::new(32).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c: [f64; 3] = [
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        ];
        let f = |y: Vec2| c[0] + c[1] * y.x + c[2] * y.y;
        let (w0, w1, k1, k2) = (
            rng.gen_range(0.01..0.2),
            rng.gen_range(0.0..0.009),
            rng.gen_range(0.5..5.0),
            rng.gen_range(0.5..5.0),
        );
        let width = |x: Vec2| w0 + w1 * (k1 * x.x).sin() * (k2 * x.y).cos();
        for _ in 0..20 {
            let x = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            worst = worst.max((rule.mollify(f, x, width(x)) - f(x)).abs());
        }
    }
    let pass = worst <= AFFINE_MAX_ERROR;
    report(
        2,
        "affine exactness",
        pass,
        format!("max |g - f| = {worst:.3e} (<= {AFFINE_MAX_ERROR:e})"),
    );
    assert!(pass);
}

/// Points of the unit disk with `0 <= d <= 2 eps` and `|y| <= 0.25`,
/// `x > 0`: a piece of the boundary layer.
struct LayerPatch {
    eps: f64,
}

impl Region for LayerPatch {
    fn signed_distance(&self, x: Vec2) -> f64 {
        let d = 1.0 - x.norm();
        d.min(2.0 * self.eps - d).min(0.25 - x.y.abs()).min(x.x)
    }
    fn bounding_box(&self) -> (Vec2, Vec2) {
        patch_box(self.eps)
    }
}

fn patch_box(eps: f64) -> (Vec2, Vec2) {
    (
        Vec2::new((1.0f64 - 0.0625).sqrt() - 2.0 * eps, -0.25),
        Vec2::new(1.0, 0.25),
    )
}

#[test]
fn criterion_3_boundary_trace_rate() {
    let dom = ConvexDomain::unit_disk();
    let epss = [4e-2, 1e-2, 2.5e-3];
    let mut band_err = Vec::new();
    let mut trace_ok = true;
    let mut trace_detail = Vec::new();
    for &eps in &epss {
        let h = eps / 8.0;
        let patch = LayerPatch { eps };
        let (lo, hi) = patch_box(eps);
        let disc = Discretization::on_grid(&patch, GridSpec::covering(lo, hi, h)).unwrap();
        let p = CompetitorParams::new(eps, 16.0 * eps * eps, 32, None).unwrap();
        let xi = build_competitor_on(&dom, &p, &disc).unwrap();
        let g = gradient(&xi);
        let mut e: f64 = 0.0;
        for k in 0..xi.values.len() {
            let x = disc.grid.node_at(k);
            let d = dom.signed_distance(x);
            if disc.is_valid(k) && (0.0..=eps).contains(&d) && x.y.abs() <= 0.2 {
                e = e.max(((g.x[k].powi(2) + g.y[k].powi(2)).sqrt() - 1.0).abs());
            }
        }
        band_err.push(e);
        let mut worst: f64 = 0.0;
        for s in dom.boundary_samples(4096) {
            if s.point.x > 0.0 && s.point.y.abs() <= 0.2 {
                worst = worst.max((trace_at(&xi, s).unwrap().normal_derivative() - 1.0).abs());
            }
        }
        trace_ok &= worst <= TRACE_SQRT_EPS_FACTOR * eps.sqrt();
        trace_detail.push(format!("{worst:.2e} vs {:.2e}", TRACE_SQRT_EPS_FACTOR * eps.sqrt()));
    }
    let rate = fit_loglog(&epss, &band_err).unwrap().slope;
    let decreasing = band_err.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && rate >= TRACE_MIN_RATE && trace_ok;
    report(
        3,
        "boundary trace rate",
        pass,
        format!(
            "band eikonal error {band_err:?} at eps {epss:?}, rate {rate:.3} (>= {TRACE_MIN_RATE}); max |d_eta xi - 1| {trace_detail:?}"
        ),
    );
    assert!(pass);
}

const BETAS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];
/// Cap slope at laboratory scale; see the contact-set criterion for why the
/// construction's own slope cannot be used on the unit disk at these beta.
const DESK_CAP_SLOPE: f64 = 1.0;
const COMPETITOR_Q: usize = 16;

fn family_domains() -> Vec<(&'static str, ConvexDomain)> {
    vec![
        ("disk", ConvexDomain::unit_disk()),
        ("ellipse-1.2", ellipse_family(&[1.2]).unwrap().remove(0)),
    ]
}

struct FamilyMember {
    label: String,
    domain: ConvexDomain,
    eps: f64,
    beta: f64,
    field: ScalarField,
    energy: f64,
}

fn competitor_family() -> &'static Vec<FamilyMember> {
    static CELL: OnceLock<Vec<FamilyMember>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for (name, dom) in family_domains() {
            for beta in BETAS {
                let eps = beta.sqrt() / 4.0;
                let p = CompetitorParams::new(eps, beta, COMPETITOR_Q, Some(DESK_CAP_SLOPE)).unwrap();
                let field = build_competitor(&dom, &p, eps / 4.0).unwrap();
                let energy = aviles_giga_energy(&field, eps).unwrap().total;
                out.push(FamilyMember {
                    label: format!("{name} beta={beta}"),
                    domain: dom.clone(),
                    eps,
                    beta,
                    field,
                    energy,
                });
            }
        }
        out
    })
}

#[test]
fn criterion_4_competitor_energy_rate() {
    let fam = competitor_family();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, _) in family_domains() {
        let members: Vec<&FamilyMember> = fam.iter().filter(|m| m.label.starts_with(name)).collect();
        let c = members[0].energy / members[0].beta.powf(3.0 / 32.0);
        let ok_bound = members
            .iter()
            .all(|m| m.energy <= COMPETITOR_MARGIN * c * m.beta.powf(3.0 / 32.0));
        let betas: Vec<f64> = members.iter().map(|m| m.beta).collect();
        let energies: Vec<f64> = members.iter().map(|m| m.energy).collect();
        let slope = fit_loglog(&betas, &energies).unwrap().slope;
        pass &= ok_bound && slope > 0.0;
        detail.push(format!(
            "{name}: I {energies:.4?}, C {c:.4}, bound x{COMPETITOR_MARGIN} {}, slope {slope:.4}",
            if ok_bound { "holds" } else { "violated" }
        ));
    }
    report(4, "competitor energy rate", pass, detail.join("; "));
    assert!(pass);
}

fn fd_gradient_error(u: &ScalarField, dom: &ConvexDomain, eps: f64) -> f64 {
    let obj = Objective::new(&u.disc, dom, eps, 100.0).unwrap();
    let (_, g) = obj.value_and_gradient(&u.values).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dir: Vec<f64> = (0..u.values.len())
            .map(|k| {
                if u.disc.is_active(k) {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let at = |s: f64| {
            let v: Vec<f64> = u.values.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            obj.value(&v).unwrap().total
        };
        let central = |t: f64| (at(t) - at(-t)) / (2.0 * t);
        // Richardson extrapolation removes the t^2 term of the central difference.
        let t = 1e-4;
        let fd = (4.0 * central(t / 2.0) - central(t)) / 3.0;
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs());
    }
    worst
}

#[test]
fn criterion_5_minimizer_integrity() {
    let fam = competitor_family();
    let grad_err = fam
        .iter()
        .filter(|m| m.beta == 0.04)
        .map(|m| fd_gradient_error(&m.field, &m.domain, m.eps))
        .fold(0.0, f64::max);
    let mut monotone = true;
    let mut below = true;
    let mut detail = Vec::new();
    for m in fam {
        let opts = MinimizeOptions {
            max_iters: 40,
            beta: Some(m.beta),
            cap_slope: Some(DESK_CAP_SLOPE),
            ..Default::default()
        };
        let out = minimize_from(&m.domain, m.eps, m.field.clone(), &opts).unwrap();
        monotone &= out.log.windows(2).all(|w| w[1].energy <= w[0].energy);
        // Both sides carry the same boundary penalty; the competitor is the seed.
        let ok = out.value.total <= out.seed_value.total;
        below &= ok;
        detail.push(format!(
            "{}: {:.5} <= {:.5} (energy part {:.5} vs {:.5})",
            m.label, out.value.total, out.seed_value.total, out.value.energy, m.energy
        ));
    }
    let pass = grad_err <= GRADIENT_REL_TOL && monotone && below;
    report(
        5,
        "minimizer integrity",
        pass,
        format!(
            "gradient vs finite differences {grad_err:.2e} (<= {GRADIENT_REL_TOL:e}), monotone log {monotone}, minimized <= competitor: {}",
            detail.join("; ")
        ),
    );
    assert!(pass);
}

const MIN_ITERS: usize = 2000;

type Run = Arc<(ConvexDomain, Minimized)>;
type RunCache = Mutex<HashMap<(u64, u64), Arc<OnceLock<Run>>>>;

/// Minimizers on normalized ellipses of the given aspect (1 is the unit
/// disk), cached across criteria.
fn minimized(aspect: f64, eps: f64) -> Run {
    static CACHE: OnceLock<RunCache> = OnceLock::new();
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry((aspect.to_bits(), eps.to_bits())).or_default().clone()
    };
    slot.get_or_init(|| {
        let dom = ellipse_family(&[aspect]).unwrap().remove(0);
        let opts = MinimizeOptions {
            max_iters: MIN_ITERS,
            ..Default::default()
        };
        let m = minimize(&dom, eps, &opts).unwrap();
        Arc::new((dom, m))
    })
    .clone()
}

#[test]
fn criterion_6_energy_scaling_window() {
    let epss = [0.08, 0.04, 0.02];
    let energies: Vec<f64> = epss.iter().map(|&e| minimized(1.0, e).1.value.energy).collect();
    let slope = fit_loglog(&epss, &energies).unwrap().slope;
    let radial: Vec<f64> = epss.iter().map(|&e| radial_minimum(e, 20000)).collect();
    let radial_slope = fit_loglog(&epss, &radial).unwrap().slope;
    let pass = slope >= SCALING_WINDOW.0 && slope <= SCALING_WINDOW.1;
    report(
        6,
        "energy scaling window",
        pass,
        format!(
            "minimized disk energies {energies:.5?} at eps {epss:?}, slope {slope:.4} (window {SCALING_WINDOW:?}); radial minimum {radial:.5?}, slope {radial_slope:.4}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_theorem_direction() {
    let eps = 0.02;
    let aspects = [1.0, 1.1, 1.2, 1.35, 1.5];
    let reports: Vec<TheoremReport> = aspects
        .iter()
        .map(|&a| {
            let run = minimized(a, eps);
            verify_theorem(&run.0, &run.1.field, eps).unwrap()
        })
        .collect();
    let alpha: Vec<f64> = reports.iter().map(|r| r.alpha).collect();
    let w12: Vec<f64> = reports.iter().map(|r| r.w12_gap).collect();
    let dev: Vec<f64> = reports.iter().map(|r| r.deviation).collect();
    let alpha_sorted = alpha.windows(2).all(|w| w[1] > w[0]);
    let w12_ok = nondecreasing_within(&w12, MONOTONE_SLACK);
    let dev_ok = nondecreasing_within(&dev, MONOTONE_SLACK);
    let bounds_ok = reports.iter().all(|r| {
        let b = r.check_bounds(BOUND_CONSTANT);
        b.energy_bounds && b.hypothesis_bounds && b.w12_bound
    });
    let pass = alpha_sorted && w12_ok && dev_ok && bounds_ok;
    report(
        7,
        "theorem direction",
        pass,
        format!(
            "alpha {alpha:.4?}, w12_gap {w12:.4?} (nondecreasing {w12_ok}), deviation {dev:.4?} (nondecreasing {dev_ok}), bounds with C={BOUND_CONSTANT} {bounds_ok}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_contact_set_geometry() {
    // The contact circle has radius kappa/2 beta^{3/32}; with the
    // construction's slope it lies inside the unit disk only for
    // beta < 0.2^{32/3} ~ 3.5e-8.
    let beta: f64 = 1e-9;
    let eps = beta.sqrt() / 4.0;
    let dom = ConvexDomain::unit_disk();
    let h = 0.002;
    let disc = rasterize(&dom, h).unwrap();
    let u = ScalarField::sample(&disc, |x| dom.signed_distance(x));
    let d = contact_set_diagnostic(&u, beta, CONSTRUCTION_CAP_SLOPE, eps).unwrap();
    let c = d.tube_area / (eps * beta.powf(3.0 / 32.0));
    let near = d.points > 0 && d.hausdorff_band <= h;
    let pass = near && c <= TUBE_CONSTANT;
    // Laboratory slope, for comparison only.
    let lab_beta: f64 = 0.01;
    let lab_eps = lab_beta.sqrt() / 4.0;
    let lab = contact_set_diagnostic(&u, lab_beta, DESK_CAP_SLOPE, lab_eps).unwrap();
    let lab_c = lab.tube_area / (lab_eps * lab_beta.powf(3.0 / 32.0));
    report(
        8,
        "contact-set geometry",
        pass,
        format!(
            "beta {beta:e}, eps {eps:.3e}: {} contact points within {:.2e} of radius {:.4} (h = {h}), tube area {:.4e}, C = {c:.3} = {:.2} pi (<= 8 pi); with cap slope {DESK_CAP_SLOPE} at beta {lab_beta}: C = {lab_c:.3} = {:.2} pi",
            d.points,
            d.hausdorff_band,
            d.predicted_radius,
            d.tube_area,
            c / PI,
            lab_c / PI
        ),
    );
    assert!(pass);
}

// On the unit disk the minimum over radial fields `u' = -f(r)` reduces to
// `E(f) = pi int_0^1 [(1 - f^2)^2 / eps + eps (f'^2 + f^2 / r^2)] r dr`
// with `f(0) = 0`, `f(1) = 1`, solved by damped Newton on a fine 1-D mesh.
// It bounds the disk minimum from above and is the reference for the
// scaling criterion.

fn radial_energy(f: &[f64], eps: f64, dr: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..f.len() - 1 {
        let rm = (i as f64 + 0.5) * dr;
        let fm = 0.5 * (f[i] + f[i + 1]);
        let fp = (f[i + 1] - f[i]) / dr;
        e += PI * rm * dr * ((1.0 - fm * fm).powi(2) / eps + eps * (fp * fp + fm * fm / (rm * rm)));
    }
    e
}

fn radial_minimum(eps: f64, n: usize) -> f64 {
    let dr = 1.0 / n as f64;
    let mut f: Vec<f64> = (0..=n).map(|i| (i as f64 * dr / eps).tanh()).collect();
    f[n] = 1.0;
    for _ in 0..100 {
        // Tridiagonal gradient and Hessian over the free values f[1..n].
        let mut g = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n + 1];
        for i in 0..n {
            let rm = (i as f64 + 0.5) * dr;
            let c = PI * rm * dr;
            let fm = 0.5 * (f[i] + f[i + 1]);
            let fp = (f[i + 1] - f[i]) / dr;
            let dm = c * (-4.0 * fm * (1.0 - fm * fm) / eps + 2.0 * eps * fm / (rm * rm));
            let dp = 2.0 * c * eps * fp;
            let hm = c * ((12.0 * fm * fm - 4.0) / eps + 2.0 * eps / (rm * rm));
            let hp = 2.0 * c * eps / (dr * dr);
            g[i] += 0.5 * dm - dp / dr;
            g[i + 1] += 0.5 * dm + dp / dr;
            diag[i] += 0.25 * hm + hp;
            diag[i + 1] += 0.25 * hm + hp;
            off[i] += 0.25 * hm - hp;
        }
        // Thomas algorithm on rows 1..n-1.
        let m = n - 1;
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            let a = if k > 0 { off[i - 1] } else { 0.0 };
            let den = diag[i] - if k > 0 { a * cp[k - 1] } else { 0.0 };
            cp[k] = off[i] / den;
            dp[k] = (-g[i] - if k > 0 { a * dp[k - 1] } else { 0.0 }) / den;
        }
        let mut step = vec![0.0; m];
        for k in (0..m).rev() {
            step[k] = dp[k] - if k + 1 < m { cp[k] * step[k + 1] } else { 0.0 };
        }
        let e0 = radial_energy(&f, eps, dr);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = (0..=n)
                .map(|i| if i == 0 || i == n { f[i] } else { f[i] + t * step[i - 1] })
                .collect();
            if radial_energy(&trial, eps, dr) <= e0 || t < 1e-8 {
                f = trial;
                break;
            }
            t *= 0.5;
        }
        if step.iter().fold(0.0f64, |a, s| a.max(s.abs())) < 1e-13 {
            break;
        }
    }
    radial_energy(&f, eps, dr)
}

#[test]
fn radial_oracle_has_log_scaling() {
    // E = pi eps ln(1/eps) + c eps with c independent of eps.
    let c: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&e: &f64| (radial_minimum(e, 20000) - PI * e * (1.0 / e).ln()) / e)
        .collect();
    assert!((c[0] - c[2]).abs() < 0.01 * c[2], "{c:?}");
}

#[test]
fn disk_minimizer_approaches_the_radial_minimum() {
    let eps = 0.08;
    let oracle = radial_minimum(eps, 20000);
    let run = minimized(1.0, eps);
    assert!(run.1.seed_value.energy > oracle);
    let rel = (run.1.value.energy - oracle) / oracle;
    assert!(rel.abs() < 0.05, "minimized {} vs radial {oracle}", run.1.value.energy);
}
