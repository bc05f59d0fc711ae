//! Penalized discrete minimization of the energy over fields vanishing on the
//! boundary with unit inward normal derivative.
//!
//! The objective is the discrete energy plus
//! `lambda_b sum_s [u(p_s)^2 + (grad u(p_s) . eta_s - 1)^2] ds` over boundary
//! samples spaced about `h` apart, with traces taken from the biquadratic
//! boundary interpolant. Its gradient is assembled by hand from the transposed
//! stencils. Descent is Polak-Ribiere (PR+) conjugate gradients with Armijo
//! backtracking.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::competitor::{build_competitor_on, CompetitorParams};
use crate::error::{Error, Result};
use crate::fields::{rasterize, Discretization, Op, ScalarField, TraceStencil};
use crate::geometry::{BoundarySample, ConvexDomain};
use crate::numerics::{pairwise_sum, snap};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    /// The mollified distance of [`crate::competitor`].
    Competitor,
    /// The distance function itself.
    Cone,
    Zero,
}

impl std::str::FromStr for Seed {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "competitor" => Ok(Seed::Competitor),
            "cone" => Ok(Seed::Cone),
            "zero" => Ok(Seed::Zero),
            _ => Err(Error::invalid(format!("unknown seed '{s}' (competitor|cone|zero)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MinimizeOptions {
    /// Grid spacing; `eps / 4` when absent.
    pub h: Option<f64>,
    pub max_iters: usize,
    /// Stop when the discrete `L^2` norm of the energy gradient drops below this.
    pub grad_tol: f64,
    /// `lambda_b`.
    pub boundary_penalty: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step reduction factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Restart with steepest descent every this many iterations.
    pub restart_every: usize,
    pub seed: Seed,
    /// `beta` for the competitor seed; `16 eps^2` when absent.
    pub beta: Option<f64>,
    /// Cap slope for the competitor seed.
    pub cap_slope: Option<f64>,
    /// Kernel quadrature order for the competitor seed.
    pub q: usize,
    /// Permit `h > eps / 4`.
    pub allow_coarse_grid: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            h: None,
            max_iters: 2000,
            grad_tol: 1e-6,
            boundary_penalty: 100.0,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            restart_every: 50,
            seed: Seed::Competitor,
            beta: None,
            cap_slope: None,
            q: 32,
            allow_coarse_grid: false,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.boundary_penalty.is_finite() && self.boundary_penalty > 0.0) {
            return Err(Error::invalid("boundary penalty weight must be positive"));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::invalid("Armijo constant must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("backtracking factor must lie in (0, 1)"));
        }
        if self.restart_every == 0 {
            return Err(Error::invalid("restart period must be positive"));
        }
        Ok(())
    }
}

/// The discrete objective: energy terms, boundary penalty and the trace
/// stencils it needs.
pub struct Objective {
    pub disc: Arc<Discretization>,
    pub eps: f64,
    pub boundary_penalty: f64,
    pub samples: Vec<BoundarySample>,
    pub ds: f64,
    stencils: Vec<TraceStencil>,
}

/// Value of the objective split into its parts.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    /// Discrete energy, identical to [`crate::energy::aviles_giga_energy`].
    pub energy: f64,
    pub penalty: f64,
}

impl Objective {
    /// Boundary samples are spaced at most `h` apart (at least 64).
    pub fn new(disc: &Arc<Discretization>, domain: &ConvexDomain, eps: f64, boundary_penalty: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        let n = ((domain.perimeter() / disc.h() - 1e-7).ceil() as usize).max(64);
        let mut samples = domain.boundary_samples(n);
        for s in &mut samples {
            s.inward_normal = s.inward_normal.map(|v| snap(v, 40));
        }
        let stencils = samples
            .iter()
            .map(|s| TraceStencil::new(disc, *s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            disc: disc.clone(),
            eps,
            boundary_penalty,
            ds: snap(domain.perimeter() / n as f64, 50),
            samples,
            stencils,
        })
    }

    /// Trace value and normal-derivative residual at every boundary sample.
    pub fn boundary_residuals(&self, u: &[f64]) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .zip(&self.stencils)
            .map(|(s, st)| {
                let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for n in 0..9 {
                    let x = u[st.nodes[n]];
                    v += st.value[n] * x;
                    gx += st.dx[n] * x;
                    gy += st.dy[n] * x;
                }
                (v, gx * s.inward_normal.x + gy * s.inward_normal.y - 1.0)
            })
            .collect()
    }

    pub fn value(&self, u: &[f64]) -> Result<ObjectiveValue> {
        self.eval(u, None)
    }

    /// Objective value and its exact gradient with respect to node values
    /// (zero at inactive nodes).
    pub fn value_and_gradient(&self, u: &[f64]) -> Result<(ObjectiveValue, Vec<f64>)> {
        let mut g = vec![0.0; u.len()];
        let v = self.eval(u, Some(&mut g))?;
        Ok((v, g))
    }

    fn eval(&self, u: &[f64], grad: Option<&mut Vec<f64>>) -> Result<ObjectiveValue> {
        let d = &self.disc;
        if u.len() != d.grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = (0..u.len()).find(|&k| d.is_active(k) && !u[k].is_finite()) {
            return Err(d.non_finite(k));
        }
        let eps = self.eps;
        let gx = d.apply(Op::Dx, u);
        let gy = d.apply(Op::Dy, u);
        let xx = d.apply(Op::Dxx, u);
        let xy = d.apply(Op::Dxy, u);
        let yy = d.apply(Op::Dyy, u);
        let n = u.len();
        let mut defect = vec![f64::NAN; n];
        let mut hess = vec![f64::NAN; n];
        for k in 0..n {
            if d.is_valid(k) {
                let e = 1.0 - gx[k] * gx[k] - gy[k] * gy[k];
                defect[k] = e * e;
                hess[k] = xx[k].powi(2) + 2.0 * xy[k].powi(2) + yy[k].powi(2);
            }
        }
        let energy = 0.5 * d.integrate(&defect)? / eps + 0.5 * eps * d.integrate(&hess)?;
        let res = self.boundary_residuals(u);
        let sq: Vec<f64> = res.iter().map(|(a, b)| a * a + b * b).collect();
        let penalty = self.boundary_penalty * self.ds * pairwise_sum(&sq);
        if let Some(g) = grad {
            let mut ax = vec![0.0; n];
            let mut ay = vec![0.0; n];
            let mut axx = vec![0.0; n];
            let mut axy = vec![0.0; n];
            let mut ayy = vec![0.0; n];
            for k in 0..n {
                if !d.is_valid(k) {
                    continue;
                }
                let w = d.quadrature_weight(k);
                let e = 1.0 - gx[k] * gx[k] - gy[k] * gy[k];
                ax[k] = -2.0 * w * e * gx[k] / eps;
                ay[k] = -2.0 * w * e * gy[k] / eps;
                axx[k] = eps * w * xx[k];
                axy[k] = 2.0 * eps * w * xy[k];
                ayy[k] = eps * w * yy[k];
            }
            d.apply_adjoint(Op::Dx, &ax, g);
            d.apply_adjoint(Op::Dy, &ay, g);
            d.apply_adjoint(Op::Dxx, &axx, g);
            d.apply_adjoint(Op::Dxy, &axy, g);
            d.apply_adjoint(Op::Dyy, &ayy, g);
            let c = 2.0 * self.boundary_penalty * self.ds;
            for ((s, st), (v, r)) in self.samples.iter().zip(&self.stencils).zip(&res) {
                let eta = s.inward_normal;
                for m in 0..9 {
                    g[st.nodes[m]] += c * (v * st.value[m] + r * (st.dx[m] * eta.x + st.dy[m] * eta.y));
                }
            }
        }
        Ok(ObjectiveValue {
            total: energy + penalty,
            energy,
            penalty,
        })
    }
}

/// Objective value and gradient field of `u` on `domain`.
pub fn discrete_energy_and_gradient(
    u: &ScalarField,
    domain: &ConvexDomain,
    eps: f64,
    boundary_penalty: f64,
) -> Result<(ObjectiveValue, ScalarField)> {
    let obj = Objective::new(&u.disc, domain, eps, boundary_penalty)?;
    let (v, mut g) = obj.value_and_gradient(&u.values)?;
    for (k, x) in g.iter_mut().enumerate() {
        if !u.disc.is_active(k) {
            *x = f64::NAN;
        }
    }
    Ok((
        v,
        ScalarField {
            disc: u.disc.clone(),
            values: g,
        },
    ))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
    pub restarted: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    /// The line search failed; the best iterate is returned.
    Stalled,
    /// The gradient became non-finite; the last finite iterate is returned.
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct Minimized {
    pub field: ScalarField,
    /// One record per accepted iterate, the seed first. `energy` is the
    /// penalized objective.
    pub log: Vec<IterationRecord>,
    pub status: Status,
    pub seed_value: ObjectiveValue,
    pub value: ObjectiveValue,
}

impl Minimized {
    pub fn stalled(&self) -> bool {
        self.status == Status::Stalled
    }
}

/// Seed field on `disc`, rounded to multiples of `2^-40`.
pub fn seed_field(
    disc: &Arc<Discretization>,
    domain: &ConvexDomain,
    eps: f64,
    opts: &MinimizeOptions,
) -> Result<ScalarField> {
    let mut u = match opts.seed {
        Seed::Zero => ScalarField::sample(disc, |_| 0.0),
        Seed::Cone => ScalarField::sample(disc, |x| domain.signed_distance(x)),
        Seed::Competitor => {
            let beta = opts.beta.unwrap_or(16.0 * eps * eps);
            let p = CompetitorParams::new(eps, beta, opts.q, opts.cap_slope)?;
            build_competitor_on(domain, &p, disc)?
        }
    };
    for v in &mut u.values {
        *v = snap(*v, 40);
    }
    Ok(u)
}

/// Minimize on a fresh grid of spacing `opts.h` covering `domain`.
pub fn minimize(domain: &ConvexDomain, eps: f64, opts: &MinimizeOptions) -> Result<Minimized> {
    opts.validate()?;
    let h = opts.h.unwrap_or(eps / 4.0);
    if h > eps / 4.0 * (1.0 + 1e-12) && !opts.allow_coarse_grid {
        return Err(Error::invalid(format!(
            "grid spacing h = {h} exceeds eps/4 = {}; pass the coarse-grid override to proceed",
            eps / 4.0
        )));
    }
    let disc = rasterize(domain, h)?;
    let u0 = seed_field(&disc, domain, eps, opts)?;
    minimize_from(domain, eps, u0, opts)
}

/// Minimize starting from `u0`.
pub fn minimize_from(domain: &ConvexDomain, eps: f64, u0: ScalarField, opts: &MinimizeOptions) -> Result<Minimized> {
    opts.validate()?;
    u0.check_finite()?;
    let disc = u0.disc.clone();
    let obj = Objective::new(&disc, domain, eps, opts.boundary_penalty)?;
    let h = disc.h();
    let mut u = u0.values;
    let (mut val, mut g) = obj.value_and_gradient(&u)?;
    let seed_value = val;
    let norm = |g: &[f64]| pairwise_sum(&g.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt() / h;
    let dot = |a: &[f64], b: &[f64]| pairwise_sum(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
    let mut log = vec![IterationRecord {
        iter: 0,
        energy: val.total,
        grad_norm: norm(&g),
        step: 0.0,
        backtracks: 0,
        restarted: true,
    }];
    let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut gd = dot(&g, &d);
    let ginf = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut alpha = if ginf > 0.0 { 0.1 * h / ginf } else { 1.0 };
    let mut status = Status::MaxIters;
    let mut trial = u.clone();
    for iter in 1..=opts.max_iters {
        if log.last().unwrap().grad_norm <= opts.grad_tol {
            status = Status::Converged;
            break;
        }
        let mut accepted = None;
        let mut step = alpha;
        for bt in 0..=opts.max_backtracks {
            for k in 0..u.len() {
                trial[k] = u[k] + step * d[k];
            }
            if let Ok(tv) = obj.value(&trial) {
                if tv.total.is_finite() && tv.total <= val.total + opts.armijo * step * gd && tv.total <= val.total {
                    accepted = Some((tv, bt));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((_, bt)) = accepted else {
            status = Status::Stalled;
            break;
        };
        let (nv, ng) = obj.value_and_gradient(&trial)?;
        if ng.iter().any(|x| !x.is_finite()) {
            status = Status::NonFinite;
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        val = nv;
        let gg_old = dot(&g, &g);
        let beta_pr = (dot(&ng, &ng) - dot(&ng, &g)) / gg_old;
        let mut restarted = iter % opts.restart_every == 0 || beta_pr.is_nan() || beta_pr <= 0.0;
        let b = if restarted { 0.0 } else { beta_pr };
        let mut nd: Vec<f64> = ng.iter().zip(&d).map(|(gk, dk)| -gk + b * dk).collect();
        let mut ngd = dot(&ng, &nd);
        if ngd.is_nan() || ngd >= 0.0 {
            nd = ng.iter().map(|x| -x).collect();
            ngd = dot(&ng, &nd);
            restarted = true;
        }
        // Next trial step from the previous one, scaled by the change in the
        // directional derivative, with room to grow.
        alpha = 2.0 * step * gd / ngd;
        g = ng;
        d = nd;
        gd = ngd;
        log.push(IterationRecord {
            iter,
            energy: val.total,
            grad_norm: norm(&g),
            step,
            backtracks: bt,
            restarted,
        });
        if iter % 100 == 0 {
            log::debug!("iter {iter}: objective {:.9e}, |g| {:.3e}", val.total, norm(&g));
        }
        if gd == 0.0 {
            status = Status::Converged;
            break;
        }
    }
    if status == Status::MaxIters && log.last().unwrap().grad_norm <= opts.grad_tol {
        status = Status::Converged;
    }
    log::info!(
        "minimize: {status:?} after {} iterations, objective {:.9e} (seed {:.9e})",
        log.len() - 1,
        val.total,
        seed_value.total
    );
    Ok(Minimized {
        field: ScalarField { disc, values: u },
        log,
        status,
        seed_value,
        value: val,
    })
}
