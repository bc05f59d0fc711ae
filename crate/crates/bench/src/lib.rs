//! Fixtures shared by the benchmarks.

use aglab_core::competitor::{build_competitor, CompetitorParams};
use aglab_core::fields::ScalarField;
use aglab_core::ConvexDomain;

/// Uncapped competitor on the unit disk at `h = eps / 4`.
pub fn disk_competitor(eps: f64) -> (ConvexDomain, ScalarField) {
    let dom = ConvexDomain::unit_disk();
    let p = CompetitorParams::new(eps, 16.0 * eps * eps, 16, None).expect("valid parameters");
    let u = build_competitor(&dom, &p, eps / 4.0).expect("competitor builds");
    (dom, u)
}
