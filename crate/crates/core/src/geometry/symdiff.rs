//! Area of the symmetric difference between a domain and a unit disk.
//!
//! In polar coordinates about the disk center `y`, each ray meets the convex
//! domain in an interval `[a, b]` of radii, so
//! `|D \ B| + |B \ D| = int (b^2 - a^2)/2 + 1/2 - 2 |[a,b] cap [0,1]|_r dtheta`
//! where `|[a,b] cap [0,1]|_r = (min(b,1)^2 - min(a,1)^2)/2`. The integrand is
//! smooth except where `a` or `b` crosses 1 or the ray becomes tangent; those
//! angles are located first and the pieces integrated adaptively.

use super::{ConvexDomain, Vec2};
use crate::numerics::{adaptive_integrate, brent_root};
use std::f64::consts::TAU;

const SCAN: usize = 720;

fn ray_interval(d: &ConvexDomain, y: Vec2, theta: f64) -> Option<(f64, f64)> {
    let u = Vec2::new(theta.cos(), theta.sin());
    let (a, b) = d.chord(y, u)?;
    if b <= 0.0 {
        return None;
    }
    Some((a.max(0.0), b))
}

fn integrand(d: &ConvexDomain, y: Vec2, theta: f64) -> f64 {
    match ray_interval(d, y, theta) {
        None => 0.5,
        Some((a, b)) => {
            let ov = 0.5 * (b.min(1.0).powi(2) - a.min(1.0).powi(2));
            0.5 * (b * b - a * a) + 0.5 - 2.0 * ov
        }
    }
}

/// `|D triangle B_1(center)|`, accurate to the domain's area tolerance
/// (and never looser than `1e-9` absolute).
pub fn disk_symmetric_difference(d: &ConvexDomain, center: Vec2) -> f64 {
    let tol = (d.tolerances.area * d.area()).min(1e-9);
    // Breakpoint indicators; each changes sign at a kink of the integrand.
    let indicators: [&dyn Fn(f64) -> f64; 3] = [
        &|t| ray_interval(d, center, t).map_or(-1.0, |(_, b)| b - 1.0),
        &|t| ray_interval(d, center, t).map_or(-1.0, |(a, _)| a - 1.0),
        &|t| {
            let u = Vec2::new(t.cos(), t.sin());
            d.chord(center, u)
                .map_or(-1.0, |(_, b)| if b > 0.0 { 1.0 } else { -1.0 })
        },
    ];
    let h = TAU / SCAN as f64;
    let mut breaks = vec![0.0, TAU];
    for f in indicators {
        let mut prev = f(0.0);
        for k in 1..=SCAN {
            let t = k as f64 * h;
            let cur = f(t);
            if (prev < 0.0) != (cur < 0.0) {
                let t0 = t - h;
                let root = brent_root(&f, t0, t, 1e-13).unwrap_or_else(|| bisect(&f, t0, t));
                breaks.push(root);
            }
            prev = cur;
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let total: f64 = breaks.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).count() as f64;
    let per = tol / total.max(1.0);
    breaks
        .windows(2)
        .map(|w| adaptive_integrate(|t| integrand(d, center, t), w[0], w[1], per))
        .sum::<f64>()
        .max(0.0)
}

/// Bisection for indicators that jump rather than cross (the tangent case).
fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a) < 0.0;
    while b - a > 1e-14 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == fa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Center minimizing `|D triangle B_1(y)|` by compass search from the
/// centroid, with the attained value.
pub fn best_fit_ball(d: &ConvexDomain) -> (Vec2, f64) {
    let mut x = d.centroid();
    let mut fx = disk_symmetric_difference(d, x);
    let mut step = 0.25 * d.diameter().min(2.0);
    let dirs = [
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(0.0, -1.0),
    ];
    while step >= d.tolerances.center {
        let mut moved = false;
        for dir in &dirs {
            let y = x + dir * step;
            let fy = disk_symmetric_difference(d, y);
            if fy < fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Lens area of two intersecting disks, used by tests.
#[cfg(test)]
use std::f64::consts::PI;

#[cfg(test)]
fn lens_area(r1: f64, r2: f64, dist: f64) -> f64 {
    if dist >= r1 + r2 {
        return 0.0;
    }
    if dist <= (r1 - r2).abs() {
        return PI * r1.min(r2).powi(2);
    }
    let a1 = ((dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist * r1)).acos();
    let a2 = ((dist * dist + r2 * r2 - r1 * r1) / (2.0 * dist * r2)).acos();
    r1 * r1 * (a1 - a1.sin() * a1.cos()) + r2 * r2 * (a2 - a2.sin() * a2.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn disk_against_itself() {
        let d = ConvexDomain::unit_disk();
        assert!(disk_symmetric_difference(&d, Vec2::zeros()) < 1e-12);
    }

    #[test]
    fn two_disks_match_lens_formula() {
        let d = ConvexDomain::unit_disk();
        for (c, r) in [(2.0, 1.0), (1.0, 1.0), (0.5, 1.0), (0.3, 1.4), (2.5, 1.0)] {
            let dom = ConvexDomain::disk(Vec2::zeros(), r).unwrap();
            let got = disk_symmetric_difference(&dom, Vec2::new(c, 0.0));
            let exact = PI * r * r + PI - 2.0 * lens_area(r, 1.0, c);
            assert!((got - exact).abs() < 1e-8, "c={c} r={r}: {got} vs {exact}");
        }
        let _ = d;
    }

    #[test]
    fn unit_area_ellipse_matches_monte_carlo() {
        let d = ConvexDomain::unit_area_ellipse(1.05f64.powi(2)).unwrap();
        let got = disk_symmetric_difference(&d, Vec2::zeros());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000usize;
        let half = 1.1;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = Vec2::new(rng.gen_range(-half..half), rng.gen_range(-half..half));
            if d.contains(x) != (x.norm_squared() <= 1.0) {
                hits += 1;
            }
        }
        let box_area = 4.0 * half * half;
        let p = hits as f64 / n as f64;
        let mc = p * box_area;
        let se = box_area * (p * (1.0 - p) / n as f64).sqrt();
        assert!((mc - got).abs() < 3.0 * se, "quad {got} mc {mc} se {se}");
    }

    #[test]
    fn polygon_symdiff_matches_monte_carlo() {
        let d = ConvexDomain::rounded_polygon(
            vec![
                Vec2::new(-0.8, -0.7),
                Vec2::new(0.9, -0.6),
                Vec2::new(0.6, 0.8),
                Vec2::new(-0.7, 0.6),
            ],
            0.2,
        )
        .unwrap();
        let y = Vec2::new(0.05, -0.1);
        let got = disk_symmetric_difference(&d, y);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 2_000_000usize;
        let half = 1.3;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = Vec2::new(rng.gen_range(-half..half), rng.gen_range(-half..half));
            if d.contains(x) != ((x - y).norm_squared() <= 1.0) {
                hits += 1;
            }
        }
        let box_area = 4.0 * half * half;
        let p = hits as f64 / n as f64;
        let mc = p * box_area;
        let se = box_area * (p * (1.0 - p) / n as f64).sqrt();
        assert!((mc - got).abs() < 4.0 * se, "quad {got} mc {mc} se {se}");
    }

    #[test]
    fn best_fit_recovers_translated_disk() {
        let c = Vec2::new(0.37, -0.21);
        let d = ConvexDomain::disk(c, 1.0).unwrap();
        let (x, alpha) = best_fit_ball(&d);
        assert!((x - c).norm() <= 1e-5);
        assert!(alpha <= 1e-6 * d.area() + 1e-5 * 4.0);
        let (x0, a0) = best_fit_ball(&ConvexDomain::unit_disk());
        assert!(x0.norm() <= 1e-5 && a0 <= 1e-6 * PI);
    }

    #[test]
    fn best_fit_beats_centroid_and_grid_scan() {
        // Egg-shaped polygon whose optimal center is not its centroid.
        let d = ConvexDomain::rounded_polygon(
            vec![Vec2::new(-0.9, -0.6), Vec2::new(0.9, -0.6), Vec2::new(0.1, 0.9)],
            0.25,
        )
        .unwrap();
        let (x, alpha) = best_fit_ball(&d);
        assert!(alpha <= disk_symmetric_difference(&d, d.centroid()));
        let c = d.centroid();
        let mut scan = f64::INFINITY;
        for i in -10..=10 {
            for j in -10..=10 {
                let y = c + Vec2::new(i as f64, j as f64) * 0.02;
                scan = scan.min(disk_symmetric_difference(&d, y));
            }
        }
        assert!(alpha <= scan * 1.01, "alpha {alpha} scan {scan} at {x:?}");
    }

    #[test]
    fn ellipse_family_against_grid_scan() {
        for aspect in [1.1, 1.3, 1.6] {
            let d = ConvexDomain::unit_area_ellipse(aspect)
                .unwrap()
                .translate(Vec2::new(0.03, 0.02));
            let (_, alpha) = best_fit_ball(&d);
            let mut scan = f64::INFINITY;
            for i in -6..=6 {
                for j in -6..=6 {
                    let y = Vec2::new(0.03, 0.02) + Vec2::new(i as f64, j as f64) * 0.01;
                    scan = scan.min(disk_symmetric_difference(&d, y));
                }
            }
            assert!(
                (alpha - scan).abs() <= 0.01 * scan,
                "aspect {aspect}: {alpha} vs {scan}"
            );
        }
    }
}
