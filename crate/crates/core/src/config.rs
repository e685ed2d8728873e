//! TOML run configuration: parsing, validation, experiment presets.
//!
//! A run config has four required sections (`scenario`, `protocol`,
//! `sweep`, `output`) plus an optional `adapt` section for the closed
//! loop. Unknown keys are rejected. Validation checks every module
//! precondition up front and reports all violations at once, each naming
//! the offending key.

use crate::adapt::EstimatorKind;
use crate::geometry::{LambertianParams, Scenario};
use crate::protocol::DegreeDistribution;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub protocol: ProtocolConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub adapt: AdaptConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room_width_m: f64,
    pub room_depth_m: f64,
    pub height_m: f64,
    pub tx_per_side: usize,
    pub tx_pitch_m: f64,
    pub rx_per_side: usize,
    pub fov_deg: f64,
    #[serde(default)]
    pub lambertian: LambertianConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambertianConfig {
    pub detector_area_m2: f64,
    pub half_power_semiangle_deg: f64,
    pub optical_filter_gain: f64,
    pub refractive_index: f64,
    pub tx_power_w: f64,
}

impl Default for LambertianConfig {
    fn default() -> Self {
        let p = LambertianParams::default();
        Self {
            detector_area_m2: p.detector_area_m2,
            half_power_semiangle_deg: p.half_power_semiangle_deg,
            optical_filter_gain: p.optical_filter_gain,
            refractive_index: p.refractive_index,
            tx_power_w: p.tx_power_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Frame length L.
    pub slots_per_frame: usize,
    /// Replication degree -> raw weight; normalized on load.
    pub degree_weights: BTreeMap<String, f64>,
    /// Activation probabilities for simulate/sweep/optimize.
    pub pa_list: Vec<f64>,
    /// Per-frame activation trajectory for the adapt subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pa_trajectory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// FOV grid (degrees).
    pub fov_deg_list: Vec<f64>,
    /// Frames per grid cell.
    pub frames: u64,
    /// Master seed; `OWCSIM_SEED` and `--seed` override it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output file; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: FormatConfig,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: None, format: FormatConfig::Csv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FormatConfig {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Additive Gaussian preamble noise std per AP (W).
    #[serde(default)]
    pub preamble_noise_std_w: f64,
    /// Observe the preamble at this fixed FOV instead of the current one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble_fov_deg: Option<f64>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::Oracle,
            preamble_noise_std_w: 0.0,
            preamble_fov_deg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorConfig {
    #[default]
    Oracle,
    Power,
}

impl From<EstimatorConfig> for EstimatorKind {
    fn from(value: EstimatorConfig) -> Self {
        match value {
            EstimatorConfig::Oracle => EstimatorKind::Oracle,
            EstimatorConfig::Power => EstimatorKind::Power,
        }
    }
}

impl RunConfig {
    /// Parse and fully validate a TOML document.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse and validate a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serialize back to TOML; `parse(emit(config))` is the identity.
    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Check every module precondition, reporting all violations.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();

        let scenario = self.scenario.to_scenario();
        if let Err(e) = scenario.validate() {
            errors.push(format!("scenario: {e}"));
        }

        if self.protocol.slots_per_frame == 0 {
            errors.push("protocol.slots_per_frame: must be at least 1".into());
        }
        match self.protocol.degree_distribution() {
            Ok(dist) => {
                if dist.max_degree() > self.protocol.slots_per_frame {
                    errors.push(format!(
                        "protocol.degree_weights: max degree {} exceeds slots_per_frame {}",
                        dist.max_degree(),
                        self.protocol.slots_per_frame
                    ));
                }
            }
            Err(e) => errors.push(format!("protocol.degree_weights: {e}")),
        }
        if self.protocol.pa_list.is_empty() {
            errors.push("protocol.pa_list: must not be empty".into());
        }
        for (idx, &pa) in self.protocol.pa_list.iter().enumerate() {
            if !(0.0..=1.0).contains(&pa) {
                errors.push(format!(
                    "protocol.pa_list[{idx}]: activation probability must lie in [0, 1], got {pa}"
                ));
            }
        }
        if let Some(trajectory) = &self.protocol.pa_trajectory {
            if trajectory.is_empty() {
                errors.push("protocol.pa_trajectory: must not be empty when present".into());
            }
            for (idx, &pa) in trajectory.iter().enumerate() {
                if !(0.0..=1.0).contains(&pa) {
                    errors.push(format!(
                        "protocol.pa_trajectory[{idx}]: activation probability must lie in [0, 1], got {pa}"
                    ));
                }
            }
        }

        if self.sweep.fov_deg_list.is_empty() {
            errors.push("sweep.fov_deg_list: must not be empty".into());
        }
        for (idx, &fov) in self.sweep.fov_deg_list.iter().enumerate() {
            if !(fov > 0.0 && fov < 90.0) {
                errors.push(format!(
                    "sweep.fov_deg_list[{idx}]: FOV must lie in (0, 90) degrees, got {fov}"
                ));
            }
        }
        if self.sweep.frames == 0 {
            errors.push("sweep.frames: must be at least 1".into());
        }

        if !(self.adapt.preamble_noise_std_w >= 0.0 && self.adapt.preamble_noise_std_w.is_finite())
        {
            errors.push(format!(
                "adapt.preamble_noise_std_w: must be nonnegative, got {}",
                self.adapt.preamble_noise_std_w
            ));
        }
        if let Some(fov) = self.adapt.preamble_fov_deg {
            if !(fov > 0.0 && fov < 90.0) {
                errors.push(format!(
                    "adapt.preamble_fov_deg: FOV must lie in (0, 90) degrees, got {fov}"
                ));
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(errors))
        }
    }
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            room_width_m: self.room_width_m,
            room_depth_m: self.room_depth_m,
            height_m: self.height_m,
            tx_per_side: self.tx_per_side,
            tx_pitch_m: self.tx_pitch_m,
            rx_per_side: self.rx_per_side,
            lambertian: LambertianParams {
                detector_area_m2: self.lambertian.detector_area_m2,
                half_power_semiangle_deg: self.lambertian.half_power_semiangle_deg,
                optical_filter_gain: self.lambertian.optical_filter_gain,
                refractive_index: self.lambertian.refractive_index,
                tx_power_w: self.lambertian.tx_power_w,
            },
            fov_deg: self.fov_deg,
        }
    }
}

impl ProtocolConfig {
    /// Build the normalized degree distribution from the config map.
    pub fn degree_distribution(&self) -> Result<DegreeDistribution, ConfigError> {
        let mut weights = BTreeMap::new();
        for (key, &value) in &self.degree_weights {
            let degree: usize = key.parse().map_err(|_| {
                ConfigError::Validation(vec![format!(
                    "protocol.degree_weights: key {key:?} is not a positive integer degree"
                )])
            })?;
            weights.insert(degree, value);
        }
        DegreeDistribution::from_weights(&weights)
            .map_err(|e| ConfigError::Validation(vec![e.to_string()]))
    }
}

/// Bundled experiment presets: scenario, protocol and grids of the three
/// reference experiments; frames, seed and output come from the base
/// config. Each preset expands to one named variant per curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Spatial decoding (L = 1, one replica) on 1x1, 3x3 and 5x5 AP grids.
    Fig4,
    /// Spatio-temporal decoding, L = 100, 16-max-degree distribution, on
    /// 1x1 and 3x3 AP grids.
    Fig5,
    /// Spatio-temporal decoding on 3x3 APs with two replicas, for
    /// L in {5, 10, 100}.
    Fig6,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "fig4" => Some(Preset::Fig4),
            "fig5" => Some(Preset::Fig5),
            "fig6" => Some(Preset::Fig6),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    /// Expand into named variant configs against a base config.
    pub fn variants(&self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        match self {
            Preset::Fig4 => [1usize, 3, 5]
                .iter()
                .map(|&rx| {
                    let mut cfg = preset_base(base, rx, 1, &[(1, 1.0)]);
                    cfg.scenario.fov_deg = 60.0;
                    (format!("ap{rx}"), cfg)
                })
                .collect(),
            Preset::Fig5 => {
                let weights: Vec<(usize, f64)> = DegreeDistribution::optimized_d16()
                    .entries()
                    .iter()
                    .copied()
                    .collect();
                [1usize, 3]
                    .iter()
                    .map(|&rx| (format!("ap{rx}"), preset_base(base, rx, 100, &weights)))
                    .collect()
            }
            Preset::Fig6 => [5usize, 10, 100]
                .iter()
                .map(|&l| (format!("l{l}"), preset_base(base, 3, l, &[(2, 1.0)])))
                .collect(),
        }
    }
}

fn preset_base(
    base: &RunConfig,
    rx_per_side: usize,
    slots_per_frame: usize,
    weights: &[(usize, f64)],
) -> RunConfig {
    let scenario = Scenario::open_hall(rx_per_side, 60.0);
    let lambertian = LambertianConfig::default();
    RunConfig {
        scenario: ScenarioConfig {
            room_width_m: scenario.room_width_m,
            room_depth_m: scenario.room_depth_m,
            height_m: scenario.height_m,
            tx_per_side: scenario.tx_per_side,
            tx_pitch_m: scenario.tx_pitch_m,
            rx_per_side,
            fov_deg: scenario.fov_deg,
            lambertian,
        },
        protocol: ProtocolConfig {
            slots_per_frame,
            degree_weights: weights
                .iter()
                .map(|(d, w)| (d.to_string(), *w))
                .collect(),
            pa_list: float_grid(0.02, 1.0, 0.02),
            pa_trajectory: None,
        },
        sweep: SweepConfig {
            fov_deg_list: float_grid(10.0, 89.0, 1.0),
            frames: base.sweep.frames,
            seed: base.sweep.seed,
        },
        output: base.output.clone(),
        adapt: base.adapt.clone(),
    }
}

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
pub fn float_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "grid step must be positive");
    let count = ((stop - start) / step + 1.5).floor() as usize;
    (0..count)
        .map(|i| start + i as f64 * step)
        .filter(|&v| v <= stop + step * 1e-9)
        .collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn hall_config_text() -> String {
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/spatial.toml"))
            .expect("bundled config present")
    }

    #[test]
    fn bundled_config_parses_to_hall_scenario() {
        let cfg = RunConfig::parse(&hall_config_text()).unwrap();
        let scenario = cfg.scenario.to_scenario();
        assert_eq!(scenario.device_count(), 676);
        assert_eq!(scenario.height_m, 3.0);
        assert_eq!(scenario.tx_pitch_m, 2.0);
    }

    #[test]
    fn crdsa_degree_block() {
        let mut cfg = RunConfig::parse(&hall_config_text()).unwrap();
        cfg.protocol.degree_weights = [("2".to_string(), 1.0)].into_iter().collect();
        cfg.protocol.slots_per_frame = 10;
        let dist = cfg.protocol.degree_distribution().unwrap();
        assert_eq!(dist.probability(2), 1.0);
        assert_eq!(dist.max_degree(), 2);
    }

    #[test]
    fn fov_out_of_range_names_the_bound() {
        let mut cfg = RunConfig::parse(&hall_config_text()).unwrap();
        cfg.scenario.fov_deg = 95.0;
        let err = cfg.validate().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("(0, 90)"), "error should name the FOV range: {text}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{}\nbogus_key = 1\n", hall_config_text());
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_collects_all_errors() {
        let mut cfg = RunConfig::parse(&hall_config_text()).unwrap();
        cfg.scenario.fov_deg = 95.0;
        cfg.sweep.frames = 0;
        cfg.protocol.pa_list = vec![1.5];
        match cfg.validate() {
            Err(ConfigError::Validation(errors)) => {
                assert!(errors.len() >= 3, "expected all violations, got {errors:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::parse(&hall_config_text()).unwrap();
        let emitted = cfg.emit();
        let reparsed = RunConfig::parse(&emitted).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn degree_weights_reject_bad_keys() {
        let mut cfg = RunConfig::parse(&hall_config_text()).unwrap();
        cfg.protocol.degree_weights = [("two".to_string(), 1.0)].into_iter().collect();
        assert!(cfg.protocol.degree_distribution().is_err());
        cfg.protocol.degree_weights = [("0".to_string(), 1.0)].into_iter().collect();
        assert!(cfg.protocol.degree_distribution().is_err());
    }

    #[test]
    fn preset_variants_cover_the_reference_grids() {
        let base = RunConfig::parse(&hall_config_text()).unwrap();
        let fig4 = Preset::Fig4.variants(&base);
        assert_eq!(fig4.len(), 3);
        assert_eq!(fig4[0].0, "ap1");
        assert_eq!(fig4[1].1.scenario.rx_per_side, 3);
        assert_eq!(fig4[2].1.scenario.rx_per_side, 5);
        for (_, cfg) in &fig4 {
            assert_eq!(cfg.protocol.slots_per_frame, 1);
            cfg.validate().unwrap();
        }
        let fig5 = Preset::Fig5.variants(&base);
        assert_eq!(fig5.len(), 2);
        assert_eq!(fig5[0].1.protocol.slots_per_frame, 100);
        assert_eq!(fig5[0].1.protocol.degree_weights.len(), 12);
        let fig6 = Preset::Fig6.variants(&base);
        assert_eq!(fig6.len(), 3);
        assert_eq!(fig6[0].0, "l5");
        assert_eq!(fig6[2].1.protocol.slots_per_frame, 100);
        for (_, cfg) in &fig6 {
            assert_eq!(cfg.scenario.rx_per_side, 3);
            assert_eq!(cfg.protocol.degree_weights.get("2"), Some(&1.0));
        }
    }

    #[test]
    fn float_grid_endpoints() {
        let grid = float_grid(0.02, 1.0, 0.02);
        assert_eq!(grid.len(), 50);
        assert!((grid[0] - 0.02).abs() < 1e-12);
        assert!((grid[49] - 1.0).abs() < 1e-9);
        let fovs = float_grid(10.0, 89.0, 1.0);
        assert_eq!(fovs.len(), 80);
    }
}
