//! Run configuration: TOML with fixed sections, unknown keys rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use resonator_core::cavity::RectCavity;
use resonator_core::solver::{ResonatorGeometry, SearchWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub oracle: Oracle,
    #[serde(default)]
    pub verify: Verify,
    #[serde(default)]
    pub run: Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub a: f64,
    pub b: f64,
    pub neck_length: f64,
    /// Single half-width for `resonance` and `oracle-compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Half-widths for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub k_neck: usize,
    /// Cavity modes; derived from the geometry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_cavity: Option<usize>,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { k_neck: 16, m_cavity: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub m: usize,
    pub n: usize,
}

impl Default for Target {
    fn default() -> Self {
        Self { m: 1, n: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    /// Coarsest spacing; the run also uses `2h/3` and `h/2`.
    pub h: f64,
    pub sigma: f64,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { h: 0.05, sigma: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verify {
    pub gamma2_target: f64,
    pub gamma2_tolerance: f64,
}

impl Default for Verify {
    fn default() -> Self {
        Self {
            gamma2_target: 0.879,
            gamma2_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    pub seed: u64,
    /// Worker threads; 0 leaves the choice to rayon.
    pub threads: usize,
    pub out: String,
}

impl Default for Run {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 0,
            out: "out".into(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry {
                a: 1.0,
                b: 1.0,
                neck_length: 1.0,
                eps: Some(0.3),
                eps_list: Some(vec![0.35, 0.30, 0.25, 0.20, 0.16, 0.125]),
            },
            truncation: Truncation::default(),
            target: Target::default(),
            oracle: Oracle::default(),
            verify: Verify::default(),
            run: Run::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (key, v) in [("geometry.a", g.a), ("geometry.b", g.b), ("geometry.neck_length", g.neck_length)] {
            if !(v > 0.0) || !v.is_finite() {
                bail!("`{key}` must be positive, got {v}");
            }
        }
        for e in g.eps.iter().chain(g.eps_list.iter().flatten()) {
            if !(*e > 0.0) || *e >= g.b / 2.0 {
                bail!("half-width {e} must lie in (0, b/2)");
            }
        }
        if self.truncation.k_neck < 4 {
            bail!("`truncation.k_neck` must be at least 4");
        }
        if self.target.m == 0 || self.target.n == 0 {
            bail!("`target.m` and `target.n` start at 1");
        }
        if !(self.oracle.h > 0.0) || !(self.oracle.sigma > 0.0) {
            bail!("`oracle.h` and `oracle.sigma` must be positive");
        }
        Ok(())
    }

    pub fn eps(&self) -> Result<f64> {
        self.geometry.eps.context("missing key `geometry.eps`")
    }

    pub fn eps_list(&self) -> Result<&[f64]> {
        match &self.geometry.eps_list {
            Some(v) if !v.is_empty() => Ok(v),
            Some(_) => bail!("`geometry.eps_list` is empty"),
            None => bail!("missing key `geometry.eps_list`"),
        }
    }

    pub fn geometry_at(&self, eps: f64) -> Result<ResonatorGeometry> {
        let g = &self.geometry;
        Ok(ResonatorGeometry::new(RectCavity::new(g.a, g.b)?, g.neck_length, eps)?)
    }

    pub fn window(&self) -> SearchWindow {
        SearchWindow::new(self.target.m, self.target.n)
    }

    pub fn lambda0(&self) -> Result<f64> {
        Ok(RectCavity::new(self.geometry.a, self.geometry.b)?.eigenvalue(self.target.m, self.target.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RunConfig::default().to_toml().replace("neck_length", "neck_lenght");
        assert!(RunConfig::parse(&text).is_err());
        let text = format!("{}\n[extra]\nx = 1\n", RunConfig::default().to_toml());
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn missing_eps_list_names_the_key() {
        let mut c = RunConfig::default();
        c.geometry.eps_list = None;
        let parsed = RunConfig::parse(&c.to_toml()).unwrap();
        let e = parsed.eps_list().unwrap_err().to_string();
        assert!(e.contains("geometry.eps_list"), "{e}");
    }

    #[test]
    fn sections_other_than_geometry_default() {
        let c = RunConfig::parse("[geometry]\na = 1.0\nb = 1.0\nneck_length = 1.0\neps = 0.2\n").unwrap();
        assert_eq!(c.truncation, Truncation::default());
        assert_eq!(c.eps().unwrap(), 0.2);
        assert!(RunConfig::parse("[geometry]\na = 1.0\nb = 1.0\nneck_length = 1.0\neps = 0.6\n").is_err());
    }
}
