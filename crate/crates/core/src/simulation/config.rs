use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fov::FovRegion;

/// Target size, in pixels, that inputs are padded to before simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadTo {
    pub width: usize,
    pub height: usize,
}

/// Full parameterization of the simulator for one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub fov: FovRegion,
    /// dToF cell rows laid over the FoV.
    pub grid_rows: usize,
    /// dToF cell columns laid over the FoV.
    pub grid_cols: usize,
    #[serde(default)]
    pub pad_to: Option<PadTo>,
    /// Theoretical range limit in meters.
    pub detection_max: f64,
    /// Range in meters beyond which returns start to get lost.
    pub reliable_max: f64,
    /// Probability that any cell loses its signal.
    pub loss_prob_base: f64,
    /// V-channel level (0-255) below which a surface counts as dark.
    pub low_reflect_v_threshold: f64,
    pub low_reflect_loss_prob: f64,
    /// Chance a non-Lambertian anomaly is a dropout.
    pub nl_loss_prob: f64,
    /// Chance a non-dropped non-Lambertian anomaly returns a farther depth.
    pub nl_farther_prob: f64,
    pub nl_far_factor_range: [f64; 2],
    pub noise_frac: f64,
    pub blank_frac: f64,
    /// Maximum calibration shift in dToF cells.
    pub calib_shift_max: f64,
    /// GT percentile separating foreground from shifted background.
    pub background_percentile: f64,
    /// Maximum rotation of the in-cell jitter offset, in degrees.
    pub jitter_rotation_max: f64,
}

impl SimConfig {
    /// ST VL53L5CX (8x8) against 480x640 ground truth.
    pub fn zju_l5() -> Self {
        Self {
            schema_version: crate::SCHEMA_VERSION,
            name: "zju-l5".into(),
            fov: FovRegion {
                h_u: -25.0,
                h_l: 405.0,
                w_l: 85.0,
                w_r: 535.0,
                ifov_h: 52.0,
                ifov_w: 56.0,
            },
            grid_rows: 8,
            grid_cols: 8,
            pad_to: None,
            detection_max: 4.1,
            reliable_max: 4.1,
            loss_prob_base: 0.30,
            low_reflect_v_threshold: 40.0,
            low_reflect_loss_prob: 0.0,
            // the L5 drops returns instead of reporting wrong depths
            nl_loss_prob: 1.0,
            nl_farther_prob: 0.0,
            nl_far_factor_range: [1.2, 2.0],
            noise_frac: 0.05,
            blank_frac: 0.05,
            calib_shift_max: 0.0,
            background_percentile: 60.0,
            jitter_rotation_max: 15.0,
        }
    }

    /// Phone dToF (40x30) against 912x684 RGB padded to 928x714.
    pub fn phone() -> Self {
        Self {
            schema_version: crate::SCHEMA_VERSION,
            name: "phone".into(),
            fov: FovRegion {
                h_u: 30.0,
                h_l: 900.0,
                w_l: 40.0,
                w_r: 660.0,
                ifov_h: 21.0,
                ifov_w: 21.0,
            },
            grid_rows: 40,
            grid_cols: 30,
            pad_to: Some(PadTo {
                width: 714,
                height: 928,
            }),
            detection_max: 8.1,
            reliable_max: 6.0,
            loss_prob_base: 0.0,
            low_reflect_v_threshold: 40.0,
            low_reflect_loss_prob: 0.80,
            nl_loss_prob: 0.5,
            nl_farther_prob: 0.5,
            nl_far_factor_range: [1.2, 2.0],
            noise_frac: 0.05,
            blank_frac: 0.05,
            calib_shift_max: 2.0,
            background_percentile: 60.0,
            jitter_rotation_max: 15.0,
        }
    }

    /// Built-in profile by name.
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "zju-l5" => Some(Self::zju_l5()),
            "phone" => Some(Self::phone()),
            _ => None,
        }
    }

    pub fn builtin_profile_names() -> &'static [&'static str] {
        &["zju-l5", "phone"]
    }

    /// All random stages switched off: the pipeline only grid-samples GT.
    pub fn without_anomalies(mut self) -> Self {
        self.loss_prob_base = 0.0;
        self.low_reflect_loss_prob = 0.0;
        self.nl_loss_prob = 0.0;
        self.nl_farther_prob = 0.0;
        self.noise_frac = 0.0;
        self.blank_frac = 0.0;
        self.calib_shift_max = 0.0;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        crate::check_schema_version(self.schema_version)?;
        self.fov.validate()?;
        let probs = [
            ("loss_prob_base", self.loss_prob_base),
            ("low_reflect_loss_prob", self.low_reflect_loss_prob),
            ("nl_loss_prob", self.nl_loss_prob),
            ("nl_farther_prob", self.nl_farther_prob),
            ("noise_frac", self.noise_frac),
            ("blank_frac", self.blank_frac),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {p} is not in [0, 1]"
                )));
            }
        }
        if self.noise_frac + self.blank_frac > 1.0 {
            return Err(Error::InvalidConfig(
                "noise_frac + blank_frac exceeds 1".into(),
            ));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::InvalidConfig(
                "grid must have at least one cell".into(),
            ));
        }
        if !(self.detection_max > 0.0) {
            return Err(Error::InvalidConfig(
                "detection_max must be positive".into(),
            ));
        }
        if !(self.reliable_max > 0.0 && self.reliable_max <= self.detection_max) {
            return Err(Error::InvalidConfig(format!(
                "reliable_max = {} must lie in (0, detection_max = {}]",
                self.reliable_max, self.detection_max
            )));
        }
        if !(0.0..=255.0).contains(&self.low_reflect_v_threshold) {
            return Err(Error::InvalidConfig(
                "low_reflect_v_threshold must lie in [0, 255]".into(),
            ));
        }
        let [lo, hi] = self.nl_far_factor_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "nl_far_factor_range [{lo}, {hi}] must be positive and ordered"
            )));
        }
        if !(self.calib_shift_max >= 0.0 && self.calib_shift_max.is_finite()) {
            return Err(Error::InvalidConfig("calib_shift_max must be >= 0".into()));
        }
        if !(0.0..=100.0).contains(&self.background_percentile) {
            return Err(Error::InvalidConfig(
                "background_percentile must lie in [0, 100]".into(),
            ));
        }
        if !(self.jitter_rotation_max >= 0.0 && self.jitter_rotation_max.is_finite()) {
            return Err(Error::InvalidConfig(
                "jitter_rotation_max must be >= 0".into(),
            ));
        }
        if let Some(p) = self.pad_to {
            if p.width == 0 || p.height == 0 {
                return Err(Error::InvalidConfig("pad_to must be non-empty".into()));
            }
        }
        Ok(())
    }
}
