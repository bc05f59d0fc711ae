use std::path::{Path, PathBuf};

use aglab_core::verify::{ellipse_family, Member, Pipeline};
use aglab_core::{ConvexDomain, Shape};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::io::load_shape;

/// A domain given inline or as a path to a JSON file, relative to the
/// configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainRef {
    Path(PathBuf),
    Inline(Shape),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Unit-diameter-normalized ellipses of the given aspect ratios.
    EllipseAspects(Vec<f64>),
    Domains(Vec<DomainRef>),
}

/// A sweep: every domain is paired with every `(eps, beta)` entry.
///
/// Either `eps` or `beta` (or both, of equal length) must be given. A
/// missing `beta` defaults to `16 eps^2`, a missing `eps` to `sqrt(beta)/4`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: Option<DomainRef>,
    #[serde(default)]
    pub family: Option<Family>,
    /// Grid spacing; `min(eps)/4` when absent.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub pipeline: Pipeline,
    /// Output directory, relative to the configuration file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Seed for randomized utilities; recorded with the outputs.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub override_coarse_grid: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed config file {}", path.display()))
    }

    fn resolve(r: &DomainRef, base: &Path) -> Result<ConvexDomain> {
        let shape = match r {
            DomainRef::Inline(s) => s.clone(),
            DomainRef::Path(p) => load_shape(&base.join(p))?,
        };
        Ok(ConvexDomain::new(shape)?)
    }

    fn domains(&self, base: &Path) -> Result<Vec<(String, ConvexDomain)>> {
        let mut out = Vec::new();
        if let Some(d) = &self.domain {
            out.push(("domain".to_string(), Self::resolve(d, base)?));
        }
        match &self.family {
            Some(Family::EllipseAspects(a)) => {
                if a.is_empty() {
                    bail!("family.ellipse_aspects is empty");
                }
                for (asp, d) in a.iter().zip(ellipse_family(a)?) {
                    out.push((format!("ellipse-{asp}"), d));
                }
            }
            Some(Family::Domains(list)) => {
                if list.is_empty() {
                    bail!("family.domains is empty");
                }
                for (i, r) in list.iter().enumerate() {
                    out.push((format!("domain-{i}"), Self::resolve(r, base)?));
                }
            }
            None => {}
        }
        if out.is_empty() {
            bail!("config names no domain: give `domain` or `family`");
        }
        Ok(out)
    }

    fn parameters(&self) -> Result<Vec<(f64, Option<f64>)>> {
        let p: Vec<(f64, Option<f64>)> = match (self.eps.is_empty(), self.beta.is_empty()) {
            (true, true) => bail!("config needs a non-empty `eps` or `beta` list"),
            (false, true) => self.eps.iter().map(|&e| (e, None)).collect(),
            (true, false) => self.beta.iter().map(|&b| (b.sqrt() / 4.0, Some(b))).collect(),
            (false, false) => {
                if self.eps.len() != self.beta.len() {
                    bail!("`eps` and `beta` lists differ in length");
                }
                self.eps.iter().zip(&self.beta).map(|(&e, &b)| (e, Some(b))).collect()
            }
        };
        for &(e, b) in &p {
            if !(e.is_finite() && e > 0.0) || b.is_some_and(|b| !(b.is_finite() && b > 0.0)) {
                bail!("eps and beta must be positive");
            }
        }
        Ok(p)
    }

    /// Sweep members; `base` is the directory domain paths are relative to.
    pub fn members(&self, base: &Path) -> Result<Vec<Member>> {
        let params = self.parameters()?;
        let min_eps = params.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        if let Some(h) = self.h {
            if !(h.is_finite() && h > 0.0) {
                bail!("h must be positive");
            }
            if h > min_eps / 4.0 && !self.override_coarse_grid {
                bail!(
                    "h = {h} exceeds min(eps)/4 = {}; set override_coarse_grid to proceed",
                    min_eps / 4.0
                );
            }
        }
        let mut out = Vec::new();
        for (name, d) in self.domains(base)? {
            for &(eps, beta) in &params {
                let label = match beta {
                    Some(b) => format!("{name} eps={eps} beta={b}"),
                    None => format!("{name} eps={eps}"),
                };
                out.push(Member {
                    label,
                    domain: d.clone(),
                    eps,
                    beta,
                    h: self.h,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> ExperimentConfig {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn beta_list_sets_eps() {
        let c = parse(r#"{"domain": {"shape": "disk", "radius": 1}, "beta": [0.04, 0.01]}"#);
        let m = c.members(Path::new(".")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].eps, 0.05);
        assert_eq!(m[1].beta, Some(0.01));
    }

    #[test]
    fn family_times_eps() {
        let c = parse(r#"{"family": {"ellipse_aspects": [1.0, 1.2]}, "eps": [0.08, 0.04, 0.02]}"#);
        assert_eq!(c.members(Path::new(".")).unwrap().len(), 6);
    }

    #[test]
    fn empty_lists_are_rejected() {
        let c = parse(r#"{"domain": {"shape": "disk", "radius": 1}}"#);
        assert!(c.members(Path::new(".")).is_err());
        let c = parse(r#"{"family": {"ellipse_aspects": []}, "eps": [0.1]}"#);
        assert!(c.members(Path::new(".")).is_err());
    }

    #[test]
    fn coarse_h_needs_override() {
        let c = parse(r#"{"domain": {"shape": "disk", "radius": 1}, "eps": [0.08, 0.04], "h": 0.02}"#);
        assert!(c.members(Path::new(".")).is_err());
        let c = parse(
            r#"{"domain": {"shape": "disk", "radius": 1}, "eps": [0.08, 0.04], "h": 0.02, "override_coarse_grid": true}"#,
        );
        assert!(c.members(Path::new(".")).is_ok());
    }

    #[test]
    fn missing_domain_file_is_named() {
        let c = parse(r#"{"domain": "no_such_domain.json", "eps": [0.1]}"#);
        let e = format!("{:#}", c.members(Path::new("/nonexistent")).unwrap_err());
        assert!(e.contains("no_such_domain.json"), "{e}");
    }

    #[test]
    fn pipeline_defaults_to_uncapped_competitor() {
        let c = parse(r#"{"domain": {"shape": "disk", "radius": 1}, "eps": [0.1]}"#);
        assert_eq!(c.pipeline, Pipeline::default());
        let c = parse(
            r#"{"domain": {"shape": "disk", "radius": 1}, "eps": [0.1], "pipeline": {"pipeline": "minimize", "max_iters": 5}}"#,
        );
        assert!(matches!(c.pipeline, Pipeline::Minimize(ref o) if o.max_iters == 5));
    }
}
