use std::fmt::Write;

use aglab_core::verify::{fit_loglog, SweepRow};
use anyhow::{bail, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 60.0;

/// A response plotted against a driver.
pub struct Response {
    pub name: &'static str,
    pub x_label: &'static str,
    pub y_label: &'static str,
    x: fn(&SweepRow) -> f64,
    y: fn(&SweepRow) -> f64,
}

pub const RESPONSES: [Response; 3] = [
    Response {
        name: "energy_vs_beta",
        x_label: "beta",
        y_label: "I_eps(u)",
        x: |r| r.beta,
        y: |r| r.report.energy,
    },
    Response {
        name: "w12_vs_eps_alpha",
        x_label: "eps + alpha",
        y_label: "w12_gap",
        x: |r| r.eps_plus_alpha,
        y: |r| r.report.w12_gap,
    },
    Response {
        name: "deviation_vs_energy",
        x_label: "I_eps(u)",
        y_label: "deviation",
        x: |r| r.report.energy,
        y: |r| r.report.deviation,
    },
];

/// One log-log SVG per response: `(name, document)`. Points with a
/// non-positive coordinate are left out; the fitted line and its slope are
/// drawn when at least three points remain.
pub fn emit_plots(rows: &[SweepRow]) -> Result<Vec<(&'static str, String)>> {
    if rows.is_empty() {
        bail!("sweep table has no rows");
    }
    RESPONSES.iter().map(|r| Ok((r.name, plot(r, rows)))).collect()
}

fn plot(r: &Response, rows: &[SweepRow]) -> String {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|row| ((r.x)(row), (r.y)(row)))
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let fit = fit_loglog(&xs, &ys).ok();
    let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.log10()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = range(&lx);
    let (y0, y1) = range(&ly);
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (l, b, rr, t) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l:.2} {t:.2} L{l:.2} {b:.2} L{rr:.2} {b:.2}" fill="none" stroke="black"/>"#
    );
    for v in [x0, x1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3e}</text>"#,
            sx(v),
            b + 16.0,
            10f64.powf(v)
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3e}</text>"#,
            l - 4.0,
            sy(v) + 4.0,
            10f64.powf(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} (log)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        r.x_label
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{} (log)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        r.y_label
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    match fit {
        Some(f) => {
            let line = |v: f64| f.predict(10f64.powf(v)).log10();
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue"/>"#,
                sx(x0),
                sy(line(x0)),
                sx(x1),
                sy(line(x1))
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">slope {:.4}, R^2 {:.4}, n = {}</text>"#,
                l + 8.0,
                t - 8.0,
                f.slope,
                f.r_squared,
                f.n_points
            );
        }
        None => {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">no fit, n = {}</text>"#,
                l + 8.0,
                t - 8.0,
                pts.len()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
