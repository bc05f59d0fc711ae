mod config;
mod io;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aglab_core::competitor::{build_competitor, CompetitorParams};
use aglab_core::energy::aviles_giga_energy;
use aglab_core::entropy::{curl_flux_bound, identity_residual, rotated_gradient, EntropyPair};
use aglab_core::fields::{rasterize, ScalarField};
use aglab_core::minimize::{minimize_from, seed_field, IterationRecord, MinimizeOptions, Seed, Status};
use aglab_core::verify::{exponent_sweep, fit_rows, read_sweep_csv, verify_theorem, write_sweep_csv, Pipeline};
use aglab_core::{best_fit_ball, disk_symmetric_difference, Vec2};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::io::{load_domain, load_field, versioned, write_atomic, write_field, write_json};

/// Numerical experiments on the Aviles-Giga energy over convex domains.
///
/// Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
#[derive(Parser, Debug)]
#[command(name = "aglab", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "AGLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a domain file and report its geometry.
    Domain(DomainArgs),
    /// Build the mollified-distance competitor and its energy.
    Competitor(CompetitorArgs),
    /// Minimize the discrete energy by nonlinear conjugate gradients.
    Minimize(MinimizeArgs),
    /// Energy decomposition of a stored field.
    Energy(EnergyArgs),
    /// Entropy identity residuals (and optionally the curl bound) of a field.
    IdentityCheck(IdentityArgs),
    /// Theorem-side quantities of a stored field.
    Verify(VerifyArgs),
    /// Run a family of experiments and plot the fitted rates.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct DomainOpt {
    /// Domain description (JSON), e.g. {"shape": "disk", "radius": 1}.
    #[arg(long, value_name = "FILE")]
    domain: PathBuf,
}

#[derive(Args, Debug)]
struct OutOpt {
    /// Output directory; files are replaced atomically.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DomainArgs {
    #[command(flatten)]
    domain: DomainOpt,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct CompetitorArgs {
    #[command(flatten)]
    domain: DomainOpt,
    /// Transition-layer width eps (length units of the domain).
    #[arg(long)]
    eps: f64,
    /// Energy level beta (dimensionless); default 16 eps^2.
    #[arg(long)]
    beta: Option<f64>,
    /// Grid spacing (length units); default eps/4.
    #[arg(long)]
    h: Option<f64>,
    /// Kernel quadrature order (radial nodes; twice as many angles).
    #[arg(long, default_value_t = 32)]
    q: usize,
    /// Slope of the cone cap, in units of beta^{3/32}; no cap when absent.
    #[arg(long)]
    cap_slope: Option<f64>,
    /// Permit h > eps/4.
    #[arg(long)]
    override_coarse_grid: bool,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[command(flatten)]
    domain: DomainOpt,
    /// Transition-layer width eps (length units).
    #[arg(long)]
    eps: f64,
    /// Minimizer options (JSON); flags given here take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Grid spacing (length units); default eps/4.
    #[arg(long)]
    h: Option<f64>,
    /// Energy level beta for the competitor seed; default 16 eps^2.
    #[arg(long)]
    beta: Option<f64>,
    /// Kernel quadrature order for the competitor seed.
    #[arg(long)]
    q: Option<usize>,
    /// Cone-cap slope for the competitor seed.
    #[arg(long)]
    cap_slope: Option<f64>,
    /// Iteration limit.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Starting field: competitor, cone or zero.
    #[arg(long)]
    seed: Option<Seed>,
    /// Start from a stored binary field instead of a seed.
    #[arg(long, value_name = "FILE")]
    init: Option<PathBuf>,
    /// Permit h > eps/4.
    #[arg(long)]
    override_coarse_grid: bool,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    domain: DomainOpt,
    /// Binary field file.
    #[arg(long, value_name = "FILE")]
    field: PathBuf,
    /// Transition-layer width eps (length units).
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    #[command(flatten)]
    domain: DomainOpt,
    /// Binary field file; a fixed trigonometric polynomial when absent.
    #[arg(long, value_name = "FILE")]
    field: Option<PathBuf>,
    /// Grid spacing for the trigonometric polynomial (length units).
    #[arg(long, default_value_t = 0.02)]
    h: f64,
    /// Ramp width delta of the entropy pairs; default beta^{1/4} with
    /// --beta, else 0.5.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of equally spaced directions theta.
    #[arg(long, default_value_t = 8)]
    angles: usize,
    /// Also evaluate the curl bound with this beta.
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    domain: DomainOpt,
    /// Binary field file.
    #[arg(long, value_name = "FILE")]
    field: PathBuf,
    /// Transition-layer width eps (length units).
    #[arg(long)]
    eps: f64,
    /// Constant C for the bound checks.
    #[arg(long, default_value_t = 10.0)]
    bound_constant: f64,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Experiment configuration (JSON).
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "from_csv",
        conflicts_with = "from_csv"
    )]
    config: Option<PathBuf>,
    /// Only plot an existing sweep table.
    #[arg(long, value_name = "FILE")]
    from_csv: Option<PathBuf>,
    /// Override the configured pipeline: competitor or minimize (default options).
    #[arg(long)]
    pipeline: Option<String>,
    /// Permit h > min(eps)/4.
    #[arg(long)]
    override_coarse_grid: bool,
    /// Output directory; default the `out` entry of the configuration
    /// (relative to its file), else ".".
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// A computation that ran but failed; maps to exit status 2.
#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 2;
        }
        if let Some(ce) = cause.downcast_ref::<aglab_core::Error>() {
            return if ce.is_numerical() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Domain(a) => domain(a),
        Command::Competitor(a) => competitor(a),
        Command::Minimize(a) => minimize(a),
        Command::Energy(a) => energy(a),
        Command::IdentityCheck(a) => identity_check(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn check_h(h: f64, eps: f64, allow: bool) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        bail!("h must be positive");
    }
    if h > eps / 4.0 * (1.0 + 1e-12) && !allow {
        bail!(
            "h = {h} exceeds eps/4 = {}; pass --override-coarse-grid to proceed",
            eps / 4.0
        );
    }
    Ok(())
}

fn domain(a: DomainArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    let (center, alpha) = best_fit_ball(&d);
    let (kmax, at) = d.max_curvature();
    let c = d.centroid();
    let report = json!({
        "shape": d.shape(),
        "area": d.area(),
        "perimeter": d.perimeter(),
        "diameter": d.diameter(),
        "centroid": [c.x, c.y],
        "max_curvature": kmax,
        "max_curvature_at": [at.x, at.y],
        "best_fit_center": [center.x, center.y],
        "alpha": alpha,
        "symdiff_at_centroid": disk_symmetric_difference(&d, c),
    });
    let path = versioned(&a.out.out, "domain", "json");
    write_json(&path, &report)?;
    Ok(format!(
        "domain: area={:.6} perimeter={:.6} diameter={:.6} alpha={:.6} -> {}",
        d.area(),
        d.perimeter(),
        d.diameter(),
        alpha,
        path.display()
    ))
}

fn competitor(a: CompetitorArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    let h = a.h.unwrap_or(a.eps / 4.0);
    check_h(h, a.eps, a.override_coarse_grid)?;
    let beta = a.beta.unwrap_or(16.0 * a.eps * a.eps);
    let p = CompetitorParams::new(a.eps, beta, a.q, a.cap_slope)?;
    let u = build_competitor(&d, &p, h)?;
    let e = aviles_giga_energy(&u, a.eps)?;
    let (bin, _) = write_field(&a.out.out, "competitor", &u)?;
    let report = json!({ "params": p, "h": h, "energy": e, "field": bin });
    write_json(&versioned(&a.out.out, "competitor", "json"), &report)?;
    Ok(format!(
        "competitor: eps={} beta={beta} h={h} energy={:.6} -> {}",
        a.eps,
        e.total,
        bin.display()
    ))
}

fn write_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        if log.is_empty() {
            c.write_record(["iter", "energy", "grad_norm", "step", "backtracks", "restarted"])?;
        }
        for r in log {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

fn minimize(a: MinimizeArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    let mut opts: MinimizeOptions = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("cannot read config file {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("malformed config file {}", p.display()))?
        }
        None => MinimizeOptions::default(),
    };
    if a.h.is_some() {
        opts.h = a.h;
    }
    if a.beta.is_some() {
        opts.beta = a.beta;
    }
    if a.cap_slope.is_some() {
        opts.cap_slope = a.cap_slope;
    }
    if let Some(q) = a.q {
        opts.q = q;
    }
    if let Some(n) = a.max_iters {
        opts.max_iters = n;
    }
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    opts.allow_coarse_grid |= a.override_coarse_grid;
    opts.validate()?;
    let log_path = versioned(&a.out.out, "minimize_log", "csv");
    let u0: ScalarField = match &a.init {
        Some(p) => {
            let u = load_field(p, &d)?;
            check_h(u.disc.h(), a.eps, opts.allow_coarse_grid)?;
            u
        }
        None => {
            let h = opts.h.unwrap_or(a.eps / 4.0);
            check_h(h, a.eps, opts.allow_coarse_grid)?;
            seed_field(&rasterize(&d, h)?, &d, a.eps, &opts)?
        }
    };
    let m = match minimize_from(&d, a.eps, u0, &opts) {
        Ok(m) => m,
        Err(e) => {
            write_log(&log_path, &[])?;
            return Err(e.into());
        }
    };
    write_log(&log_path, &m.log)?;
    let (bin, _) = write_field(&a.out.out, "minimized", &m.field)?;
    let report = json!({
        "eps": a.eps,
        "options": opts,
        "status": m.status,
        "iterations": m.log.len() - 1,
        "seed_value": m.seed_value,
        "value": m.value,
        "field": bin,
        "log": log_path,
    });
    write_json(&versioned(&a.out.out, "minimize", "json"), &report)?;
    if m.status == Status::NonFinite {
        return Err(anyhow!(NumericalFailure(format!(
            "non-finite gradient after {} iterations; log kept in {}",
            m.log.len() - 1,
            log_path.display()
        ))));
    }
    Ok(format!(
        "minimize: status={} iterations={} energy={:.6} (seed {:.6}) -> {}",
        serde_json::to_value(m.status)?.as_str().unwrap_or("?"),
        m.log.len() - 1,
        m.value.energy,
        m.seed_value.energy,
        bin.display()
    ))
}

fn energy(a: EnergyArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    let u = load_field(&a.field, &d)?;
    let e = aviles_giga_energy(&u, a.eps)?;
    let path = versioned(&a.out.out, "energy", "json");
    write_json(&path, &e)?;
    Ok(format!(
        "energy: total={:.6} penalty={:.6} regularization={:.6} -> {}",
        e.total,
        e.penalty_term,
        e.regularization_term,
        path.display()
    ))
}

/// Field used when no file is given.
fn trig_polynomial(x: Vec2) -> f64 {
    0.5 * x.x.sin() + 0.3 * x.y.cos() + 0.2 * (x.x + x.y).sin()
}

#[derive(Serialize)]
struct AngleRow {
    angle: f64,
    residual_l1: f64,
    rhs_check: f64,
    curl_lhs: Option<f64>,
    curl_rhs: Option<f64>,
}

fn identity_check(a: IdentityArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    if a.angles == 0 {
        bail!("--angles must be positive");
    }
    let u = match &a.field {
        Some(p) => load_field(p, &d)?,
        None => ScalarField::sample(&rasterize(&d, a.h)?, trig_polynomial),
    };
    let m = rotated_gradient(&u);
    let delta = a.delta.unwrap_or_else(|| a.beta.map_or(0.5, |b| b.powf(0.25)));
    let mut rows = Vec::new();
    for k in 0..a.angles {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / a.angles as f64;
        let pair = EntropyPair::from_angle(angle, delta)?;
        let r = identity_residual(&m, &pair)?;
        let curl = a.beta.map(|b| curl_flux_bound(&m, &pair, b)).transpose()?;
        rows.push(AngleRow {
            angle,
            residual_l1: r.residual_l1,
            rhs_check: r.rhs_check,
            curl_lhs: curl.map(|c| c.lhs),
            curl_rhs: curl.map(|c| c.rhs),
        });
    }
    let worst = rows.iter().map(|r| r.residual_l1).fold(0.0, f64::max);
    let curl_holds = rows.iter().all(|r| match (r.curl_lhs, r.curl_rhs) {
        (Some(l), Some(r)) => l <= r,
        _ => true,
    });
    let path = versioned(&a.out.out, "identity", "json");
    write_json(
        &path,
        &json!({ "h": u.disc.h(), "delta": delta, "beta": a.beta, "angles": rows }),
    )?;
    let curl = if a.beta.is_some() {
        format!(" curl_bound_holds={curl_holds}")
    } else {
        String::new()
    };
    Ok(format!(
        "identity-check: h={} max_residual={worst:.3e}{curl} -> {}",
        u.disc.h(),
        path.display()
    ))
}

fn verify(a: VerifyArgs) -> Result<String> {
    let d = load_domain(&a.domain.domain)?;
    let u = load_field(&a.field, &d)?;
    let r = verify_theorem(&d, &u, a.eps)?;
    let b = r.check_bounds(a.bound_constant);
    let path = versioned(&a.out.out, "verify", "json");
    write_json(&path, &json!({ "report": r, "bounds": b }))?;
    Ok(format!(
        "verify: energy={:.6} alpha={:.6} deviation={:.6} w12_gap={:.6} bounds_hold={} admissible={} -> {}",
        r.energy,
        r.alpha,
        r.deviation,
        r.w12_gap,
        b.energy_bounds && b.hypothesis_bounds && b.w12_bound,
        r.admissible,
        path.display()
    ))
}

fn sweep(a: SweepArgs) -> Result<String> {
    let (rows, failures, out) = match (&a.from_csv, &a.config) {
        (Some(csv), _) => {
            let f = std::fs::File::open(csv).with_context(|| format!("cannot read sweep table {}", csv.display()))?;
            let rows = read_sweep_csv(f).with_context(|| format!("malformed sweep table {}", csv.display()))?;
            (rows, Vec::new(), a.out.clone().unwrap_or_else(|| PathBuf::from(".")))
        }
        (None, Some(cfg_path)) => {
            let mut cfg = ExperimentConfig::load(cfg_path)?;
            cfg.override_coarse_grid |= a.override_coarse_grid;
            match a.pipeline.as_deref() {
                None => {}
                Some("competitor") => cfg.pipeline = Pipeline::default(),
                Some("minimize") => cfg.pipeline = Pipeline::Minimize(MinimizeOptions::default()),
                Some(other) => bail!("unknown pipeline '{other}' (competitor|minimize)"),
            }
            if let Pipeline::Minimize(o) = &mut cfg.pipeline {
                o.allow_coarse_grid |= cfg.override_coarse_grid;
            }
            let base = cfg_path.parent().unwrap_or(Path::new("."));
            let members = cfg.members(base)?;
            let out = a
                .out
                .clone()
                .or_else(|| cfg.out.as_ref().map(|o| base.join(o)))
                .unwrap_or_else(|| PathBuf::from("."));
            let outcome = exponent_sweep(&members, &cfg.pipeline)?;
            write_json(&versioned(&out, "config", "json"), &cfg)?;
            (outcome.rows, outcome.failures, out)
        }
        (None, None) => bail!("sweep needs --config or --from-csv"),
    };
    if rows.is_empty() {
        if failures.is_empty() {
            bail!("sweep produced no rows");
        }
        return Err(anyhow!(NumericalFailure(format!(
            "every sweep member failed: {failures:?}"
        ))));
    }
    if a.from_csv.is_none() {
        write_atomic(&versioned(&out, "sweep", "csv"), |w| Ok(write_sweep_csv(&rows, w)?))?;
    }
    let fits = fit_rows(&rows);
    write_json(
        &versioned(&out, "fits", "json"),
        &json!({ "fits": fits, "failures": failures }),
    )?;
    let plots = plot::emit_plots(&rows)?;
    for (name, svg) in &plots {
        write_atomic(&versioned(&out, name, "svg"), |w| Ok(w.write_all(svg.as_bytes())?))?;
    }
    let slope = |f: &Option<aglab_core::verify::FitResult>| f.map_or("none".to_string(), |f| format!("{:.4}", f.slope));
    let summary = format!(
        "sweep: {} rows, {} failed, slopes energy_vs_beta={} w12_vs_eps_alpha={} deviation_vs_energy={} -> {}",
        rows.len(),
        failures.len(),
        slope(&fits.energy_vs_beta),
        slope(&fits.w12_vs_eps_alpha),
        slope(&fits.deviation_vs_energy),
        out.display()
    );
    if !failures.is_empty() {
        return Err(anyhow!(NumericalFailure(format!("{summary}; failures: {failures:?}"))));
    }
    Ok(summary)
}
