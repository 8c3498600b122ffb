//! Pipeline configuration: one TOML file plus flag overrides, flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use needleloc::detection::{FocalParams, LossWeights, NoiseSpec};
use needleloc::matcher::MatchConstraints;
use needleloc::phantom::SceneSpec;

/// Which volume the pairing score reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Substrate {
    /// Raw HU phantom volume.
    Raw,
    /// White top-hat preprocessed volume (default).
    Tophat,
}

/// Heatmap-domain parameters (kernel σ is radius/3 by construction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapParams {
    pub downsample: usize,
    pub tip_radius_mm: f64,
    pub handle_radius_mm: f64,
    pub peak_threshold: f64,
    pub link_radius_mm: f64,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self {
            downsample: 4,
            tip_radius_mm: 3.0,
            handle_radius_mm: 4.0,
            peak_threshold: 0.3,
            link_radius_mm: 2.5,
        }
    }
}

/// Everything a run needs; every field has a default matching the
/// published pipeline constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub name: String,
    pub score_substrate: Substrate,
    pub tophat_radius_px: usize,
    pub norm_floor_hu: f64,
    pub norm_max_hu: f64,
    pub scene: SceneSpec<f64>,
    pub noise: NoiseSpec<f64>,
    pub heatmap: HeatmapParams,
    pub constraints: MatchConstraints<f64>,
    pub weights: LossWeights<f64>,
    pub focal: FocalParams<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            name: "scene".into(),
            score_substrate: Substrate::Tophat,
            tophat_radius_px: 5,
            norm_floor_hu: needleloc::volume::HU_CLAMP_FLOOR,
            norm_max_hu: needleloc::volume::HU_CLAMP_MAX,
            scene: SceneSpec::default(),
            noise: NoiseSpec::default(),
            heatmap: HeatmapParams::default(),
            constraints: MatchConstraints::default(),
            weights: LossWeights::default(),
            focal: FocalParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// Artifact base path `{out_dir}/{name}`.
    pub fn base(&self) -> PathBuf {
        self.out_dir.join(&self.name)
    }

    pub fn artifact(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}{suffix}", self.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.norm_max_hu, 800.0);
        assert_eq!(c.focal.alpha, 2.0);
        assert_eq!(c.focal.beta, 4.0);
        assert_eq!(
            (c.weights.lambda_hm, c.weights.lambda_off, c.weights.lambda_ang),
            (2.0, 1.0, 1.0)
        );
        assert_eq!(c.constraints.merge_radius_mm, 2.5);
        assert_eq!(c.heatmap.tip_radius_mm, 3.0);
        assert_eq!(c.heatmap.handle_radius_mm, 4.0);
        assert_eq!(c.score_substrate, Substrate::Tophat);
        assert_eq!(c.tophat_radius_px, 5);
    }

    #[test]
    fn partial_toml_fills_from_defaults() {
        let config: PipelineConfig = toml::from_str(
            r#"
            seed = 9
            [scene]
            n_needles = 4
            [constraints]
            eps_l_mm = 7.5
        "#,
        )
        .unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.scene.n_needles, 4);
        assert_eq!(config.constraints.eps_l_mm, 7.5);
        assert_eq!(config.scene.l_prior_mm, 150.0);
        assert_eq!(config.heatmap.downsample, 4);
    }
}
