//! Declarative experiment configuration.
//!
//! A single TOML file describes the map, the roof function, an optional
//! perturbation family, and run parameters. Numeric fields are plain
//! decimals; parse errors carry line/column positions and unknown keys are
//! rejected.

use anyhow::{bail, Context, Result};
use captivity_core::captivity::XStrategy;
use captivity_core::cocycle::{PerturbationFamily, RoofFunction};
use captivity_core::trig::TrigPoly;
use captivity_core::CircleMap;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: Option<MapConfig>,
    pub tau: Option<TauConfig>,
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub degree: usize,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
    /// Analytically known `‖τ'‖∞`, validated against a grid maximum.
    pub sup_deriv: Option<f64>,
    pub coboundary: Option<CoboundaryConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoboundaryConfig {
    #[serde(default)]
    pub phi_sin: Vec<f64>,
    #[serde(default)]
    pub phi_cos: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub max_freq: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub r: Option<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
    /// "grid" (default), "paper", or "adaptive".
    pub strategy: Option<String>,
    pub grid_points: Option<usize>,
    pub paper_cap: Option<usize>,
    pub adaptive_coarse: Option<usize>,
    pub adaptive_max_rounds: Option<usize>,
    pub rho: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub x: Option<f64>,
    pub max_period: Option<usize>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub r_tilde: Vec<f64>,
    pub q: Option<usize>,
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    pub rows: Option<usize>,
    pub trials: Option<usize>,
    pub x_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn build_map(&self) -> Result<CircleMap> {
        let map = self.map.as_ref().context("config section [map] is required")?;
        let poly = TrigPoly::new(0.0, map.sin.clone(), map.cos.clone());
        CircleMap::new(map.degree, poly).context("map: invalid specification")
    }

    pub fn build_tau(&self, map: &CircleMap) -> Result<RoofFunction> {
        let tau = self.tau.as_ref().context("config section [tau] is required")?;
        if let Some(cob) = &tau.coboundary {
            if !tau.sin.is_empty() || !tau.cos.is_empty() || tau.constant != 0.0 {
                bail!("tau: coboundary form excludes direct sin/cos/constant coefficients");
            }
            if tau.sup_deriv.is_some() {
                bail!("tau.sup_deriv: not supported for coboundary roofs (bound is certified internally)");
            }
            let phi = TrigPoly::new(0.0, cob.phi_sin.clone(), cob.phi_cos.clone());
            return Ok(RoofFunction::coboundary(phi, cob.c, map));
        }
        let poly = TrigPoly::new(tau.constant, tau.sin.clone(), tau.cos.clone());
        match tau.sup_deriv {
            Some(bound) => RoofFunction::with_certified_sup_deriv(poly, bound)
                .context("tau.sup_deriv: rejected"),
            None => Ok(RoofFunction::from_trig(poly)),
        }
    }

    pub fn build_family(&self, tau: &RoofFunction) -> Result<PerturbationFamily> {
        let family = self.family.as_ref().context("config section [family] is required")?;
        PerturbationFamily::fourier(tau, family.max_freq, family.scale)
            .context("family: invalid specification")
    }

    pub fn strategy(&self) -> Result<XStrategy> {
        let name = self.run.strategy.as_deref().unwrap_or("grid");
        match name {
            "grid" => Ok(XStrategy::Grid { points: self.run.grid_points.unwrap_or(64) }),
            "paper" => Ok(XStrategy::PaperGrid {
                max_points: self.run.paper_cap.unwrap_or(1 << 16),
            }),
            "adaptive" => Ok(XStrategy::Adaptive {
                coarse: self.run.adaptive_coarse.unwrap_or(64),
                max_rounds: self.run.adaptive_max_rounds.unwrap_or(10),
            }),
            other => bail!("run.strategy: unknown strategy {other:?} (grid | paper | adaptive)"),
        }
    }

    pub fn require_r(&self, tau: &RoofFunction) -> Result<f64> {
        let r = self.run.r.context("run.r is required")?;
        // NaN must fail this check, hence the negated form.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(r > tau.sup_deriv()) {
            bail!(
                "run.r = {r} must exceed the certified |tau'| bound {}",
                tau.sup_deriv()
            );
        }
        Ok(r)
    }

    pub fn require_depths(&self) -> Result<Vec<usize>> {
        if self.run.n.is_empty() {
            bail!("run.n: at least one depth is required");
        }
        if self.run.n.contains(&0) {
            bail!("run.n: depths must be at least 1");
        }
        Ok(self.run.n.clone())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.run.seed.context("run.seed is required whenever sampling is used")
    }
}
