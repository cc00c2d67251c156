use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::connector::AStarParams;
use crate::graph_builder::{RuleParams, SNAP_DISTANCE_MM, TRIM_CAP_MM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
#[value(rename_all = "UPPERCASE")]
pub enum Modality {
    #[default]
    #[value(alias = "cta")]
    Cta,
    #[value(alias = "mra")]
    Mra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    ReferenceThinning,
    ExternalSkeleton,
}

/// Settings for one pipeline run. Every field has a default, so an empty
/// config file is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub modality: Modality,
    pub mode: Mode,
    /// Isotropic working spacing (mm).
    pub target_spacing: f64,
    /// Components whose bounding-box diagonal is below this fraction of the
    /// largest component's are dropped.
    pub filter_rel_diag: f64,
    pub bulge_size: f64,
    pub w1: f64,
    pub w2: f64,
    /// Moving-average window (odd, >= 3).
    pub window: usize,
    pub trim_cap_mm: f64,
    /// Spline knots sit at every `knot_stride`-th centerline point.
    pub knot_stride: usize,
    pub rules: RuleParams,
    /// Labels re-extracted from their own skeleton and spliced in.
    pub merge_labels: Vec<u8>,
    pub snap_mm: f64,
    pub outdir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            modality: Modality::Cta,
            mode: Mode::ReferenceThinning,
            target_spacing: 0.25,
            filter_rel_diag: 0.05,
            bulge_size: 1.0,
            w1: 1.0,
            w2: 2.0,
            window: 5,
            trim_cap_mm: TRIM_CAP_MM,
            knot_stride: crate::morphometry::KNOT_STRIDE,
            rules: RuleParams::default(),
            merge_labels: Vec::new(),
            snap_mm: SNAP_DISTANCE_MM,
            outdir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn astar(&self) -> AStarParams {
        AStarParams {
            w1: self.w1,
            w2: self.w2,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.target_spacing > 0.0 && self.target_spacing.is_finite()) {
            return Err(format!("target_spacing must be positive, got {}", self.target_spacing));
        }
        if !(0.0..1.0).contains(&self.filter_rel_diag) {
            return Err(format!("filter_rel_diag must be in [0, 1), got {}", self.filter_rel_diag));
        }
        if !(self.bulge_size >= 0.0) {
            return Err(format!("bulge_size must be >= 0, got {}", self.bulge_size));
        }
        self.astar().validate()?;
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(format!("window must be odd and >= 3, got {}", self.window));
        }
        if self.knot_stride == 0 {
            return Err("knot_stride must be >= 1".into());
        }
        if !(self.trim_cap_mm >= 0.0) || !(self.snap_mm >= 0.0) {
            return Err("trim_cap_mm and snap_mm must be >= 0".into());
        }
        if !(self.rules.self_loop_factor >= 0.0) {
            return Err("rules.self_loop_factor must be >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = PipelineConfig::from_toml("modality = \"MRA\"\nwindow = 7\n[rules]\nself_loop_factor = 3.0\n").unwrap();
        assert_eq!(c.modality, Modality::Mra);
        assert_eq!(c.window, 7);
        assert_eq!(c.rules.self_loop_factor, 3.0);
        assert!(PipelineConfig::from_toml("windw = 7").is_err());
    }

    #[test]
    fn validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            window: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            w1: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn round_trip() {
        let c = PipelineConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
    }
}
