//! Synthesis of realistic dToF sparse depth from dense ground truth.
//!
//! The pipeline runs, in order: grid sampling with in-cell jitter, cell-level
//! signal loss, non-Lambertian anomalies, low-reflectivity dropouts,
//! long-range dropouts, random blank/noise points and finally the
//! calibration shift of background points. Each stage draws from its own
//! keyed stream (see [`rng`]), so its output is a pure function of its
//! inputs, the configuration and the [`SimSeed`].

mod config;
mod inputs;
pub mod rng;

use serde::{Deserialize, Serialize};

pub use config::{PadTo, SimConfig};
pub use inputs::{rgb_to_hsv, MaterialMap, RgbImage};
pub use rng::{SimSeed, StageRng};

use crate::depth::{DepthMap, SparseDepth, SparsePoint};
use crate::error::{Error, Result};
use crate::projection::round_pixel;

pub const STAGE_SAMPLE: &str = "sample";
pub const STAGE_SIGNAL_LOSS: &str = "signal_loss";
pub const STAGE_NON_LAMBERTIAN: &str = "non_lambertian";
pub const STAGE_LOW_REFLECTIVITY: &str = "low_reflectivity";
pub const STAGE_LONG_DISTANCE: &str = "long_distance";
pub const STAGE_RANDOM_ANOMALIES: &str = "random_anomalies";
pub const STAGE_CALIBRATION_SHIFT: &str = "calibration_shift";

/// Scenes with at least this share of valid depths beyond
/// [`HYPERSIM_FAR_DEPTH`] get halved by [`preprocess_hypersim`].
pub const HYPERSIM_FAR_FRACTION: f64 = 0.6;
pub const HYPERSIM_FAR_DEPTH: f64 = 6.0;

/// A simulated return. `(row, col)` is where the point sits in the output
/// map; `(src_row, src_col)` is the GT pixel its depth was read from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint {
    pub row: usize,
    pub col: usize,
    pub depth_m: f64,
    pub src_row: usize,
    pub src_col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub input: usize,
    pub dropped: usize,
    pub modified: usize,
}

impl StageStats {
    fn new(stage: &str, input: usize) -> Self {
        Self {
            stage: stage.to_string(),
            input,
            dropped: 0,
            modified: 0,
        }
    }

    pub fn output(&self) -> usize {
        self.input - self.dropped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub schema_version: u32,
    pub seed: u64,
    pub frame: u64,
    pub width: usize,
    pub height: usize,
    pub grid_cells: usize,
    pub stages: Vec<StageStats>,
    /// Points merged because they shared a pixel after the calibration shift.
    pub collisions: usize,
    pub output_points: usize,
    /// Depth separating foreground from shifted background; `None` when the
    /// calibration stage is off or no GT pixel is valid.
    pub background_threshold: Option<f64>,
}

impl SimStats {
    pub fn stage(&self, name: &str) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub sparse: SparseDepth,
    pub stats: SimStats,
}

/// Halves every depth when at least 60% of valid pixels lie beyond 6 m.
pub fn preprocess_hypersim(gt: &DepthMap) -> DepthMap {
    let valid = gt.valid_count();
    if valid == 0 {
        return gt.clone();
    }
    let far = gt
        .valid_values()
        .filter(|&d| d > HYPERSIM_FAR_DEPTH)
        .count();
    if far as f64 >= HYPERSIM_FAR_FRACTION * valid as f64 {
        gt.map_valid(|d| d * 0.5)
    } else {
        gt.clone()
    }
}

/// Linear-interpolated percentile (`p` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let (_, &mut lo_val, above) = v.select_nth_unstable_by(lo, f64::total_cmp);
    // the next order statistic is the minimum of the upper partition
    let hi_val = if pos > lo as f64 {
        above.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        lo_val
    };
    Some(lo_val + (hi_val - lo_val) * (pos - lo as f64))
}

fn pixel_in(row: f64, col: f64, width: usize, height: usize) -> Option<(usize, usize)> {
    let (r, c) = (round_pixel(row), round_pixel(col));
    (r >= 0.0 && c >= 0.0 && r < height as f64 && c < width as f64)
        .then_some((r as usize, c as usize))
}

/// Lays one cell per dToF pixel uniformly over the FoV and reads GT at a
/// jittered pixel inside each cell's iFoV window.
///
/// The jitter offset is uniform over the `ifov_h` x `ifov_w` window around
/// the cell center, rotated by an angle uniform in
/// `±jitter_rotation_max`. The point is placed at the cell center. A
/// sampled pixel outside the image is clamped to the nearest edge pixel.
/// Cells whose center falls outside the image, or whose sampled GT is
/// invalid, yield nothing.
pub fn sample_grid_points(
    gt: &DepthMap,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_SAMPLE);
    let fov = &cfg.fov;
    let cell_h = fov.height() / cfg.grid_rows as f64;
    let cell_w = fov.width() / cfg.grid_cols as f64;
    let half_h = (fov.ifov_h - 1.0) / 2.0;
    let half_w = (fov.ifov_w - 1.0) / 2.0;
    let max_angle = cfg.jitter_rotation_max.to_radians();

    let mut stats = StageStats::new(STAGE_SAMPLE, cfg.grid_rows * cfg.grid_cols);
    let mut points = Vec::with_capacity(stats.input);
    for i in 0..cfg.grid_rows {
        for j in 0..cfg.grid_cols {
            let dy = rng.uniform_in(-half_h, half_h);
            let dx = rng.uniform_in(-half_w, half_w);
            let angle = rng.uniform_in(-max_angle, max_angle);

            let yc = fov.h_u + (i as f64 + 0.5) * cell_h;
            let xc = fov.w_l + (j as f64 + 0.5) * cell_w;
            let (sin, cos) = angle.sin_cos();
            let ry = dx * sin + dy * cos;
            let rx = dx * cos - dy * sin;

            let candidate = pixel_in(yc, xc, gt.width(), gt.height()).and_then(|(row, col)| {
                let src_row = round_pixel(yc + ry).clamp(0.0, (gt.height() - 1) as f64) as usize;
                let src_col = round_pixel(xc + rx).clamp(0.0, (gt.width() - 1) as f64) as usize;
                let depth_m = gt.get(src_row, src_col)?;
                Some(SimPoint {
                    row,
                    col,
                    depth_m,
                    src_row,
                    src_col,
                })
            });
            match candidate {
                Some(p) => points.push(p),
                None => stats.dropped += 1,
            }
        }
    }
    (points, stats)
}

/// Drops each point independently with probability `loss_prob_base`.
pub fn apply_signal_loss(
    points: Vec<SimPoint>,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_SIGNAL_LOSS);
    let mut stats = StageStats::new(STAGE_SIGNAL_LOSS, points.len());
    let out = points
        .into_iter()
        .filter(|_| {
            let lost = rng.bernoulli(cfg.loss_prob_base);
            stats.dropped += lost as usize;
            !lost
        })
        .collect();
    (out, stats)
}

/// With probability `materials(src)` a point is anomalous; an anomaly is a
/// dropout with probability `nl_loss_prob`, otherwise a far return with
/// probability `nl_farther_prob` (depth scaled by a factor drawn from
/// `nl_far_factor_range`, capped at `detection_max`).
pub fn apply_non_lambertian(
    points: Vec<SimPoint>,
    materials: &MaterialMap,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_NON_LAMBERTIAN);
    let mut stats = StageStats::new(STAGE_NON_LAMBERTIAN, points.len());
    let [lo, hi] = cfg.nl_far_factor_range;
    let mut out = Vec::with_capacity(points.len());
    for mut p in points {
        let anomalous = rng.uniform() < materials.get(p.src_row, p.src_col);
        let dropout = rng.uniform() < cfg.nl_loss_prob;
        let farther = rng.uniform() < cfg.nl_farther_prob;
        let factor = rng.uniform_in(lo, hi);
        if anomalous && dropout {
            stats.dropped += 1;
            continue;
        }
        if anomalous && farther {
            p.depth_m = (p.depth_m * factor).min(cfg.detection_max);
            stats.modified += 1;
        }
        out.push(p);
    }
    (out, stats)
}

/// Drops points on dark pixels (V < threshold) with `low_reflect_loss_prob`.
pub fn apply_low_reflectivity(
    points: Vec<SimPoint>,
    rgb: &RgbImage,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_LOW_REFLECTIVITY);
    let mut stats = StageStats::new(STAGE_LOW_REFLECTIVITY, points.len());
    let out = points
        .into_iter()
        .filter(|p| {
            let u = rng.uniform();
            let (_, _, v) = rgb_to_hsv(rgb.get(p.src_row, p.src_col));
            let lost = v < cfg.low_reflect_v_threshold && u < cfg.low_reflect_loss_prob;
            stats.dropped += lost as usize;
            !lost
        })
        .collect();
    (out, stats)
}

/// Drop probability for a return at `depth`: zero up to `reliable_max`,
/// rising linearly to one at `detection_max`, one beyond it.
pub fn long_distance_loss_prob(depth: f64, cfg: &SimConfig) -> f64 {
    if depth > cfg.detection_max {
        1.0
    } else if depth <= cfg.reliable_max {
        0.0
    } else {
        (depth - cfg.reliable_max) / (cfg.detection_max - cfg.reliable_max)
    }
}

pub fn apply_long_distance(
    points: Vec<SimPoint>,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_LONG_DISTANCE);
    let mut stats = StageStats::new(STAGE_LONG_DISTANCE, points.len());
    let out = points
        .into_iter()
        .filter(|p| {
            let u = rng.uniform();
            let lost = u < long_distance_loss_prob(p.depth_m, cfg);
            stats.dropped += lost as usize;
            !lost
        })
        .collect();
    (out, stats)
}

/// Each point independently becomes a blank (removed) with probability
/// `blank_frac` or a noise point with probability `noise_frac`; noise
/// depths are uniform in `(0, detection_max]`.
pub fn apply_random_anomalies(
    points: Vec<SimPoint>,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut rng = seed.stream(STAGE_RANDOM_ANOMALIES);
    let mut stats = StageStats::new(STAGE_RANDOM_ANOMALIES, points.len());
    let mut out = Vec::with_capacity(points.len());
    for mut p in points {
        let u = rng.uniform();
        let v = rng.uniform();
        if u < cfg.blank_frac {
            stats.dropped += 1;
            continue;
        }
        if u < cfg.blank_frac + cfg.noise_frac {
            p.depth_m = cfg.detection_max * (1.0 - v);
            stats.modified += 1;
        }
        out.push(p);
    }
    (out, stats)
}

/// Shifts background points (depth above the GT percentile threshold) by a
/// per-frame displacement of up to `calib_shift_max` dToF cells in a random
/// direction. Cells are converted to pixels with the iFoV size. Points
/// leaving the image are dropped.
pub fn apply_calibration_shift(
    points: Vec<SimPoint>,
    gt: &DepthMap,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let threshold = background_threshold(gt, cfg);
    calibration_shift_with_threshold(points, threshold, gt.width(), gt.height(), cfg, seed)
}

fn background_threshold(gt: &DepthMap, cfg: &SimConfig) -> Option<f64> {
    if cfg.calib_shift_max == 0.0 {
        return None;
    }
    let values: Vec<f64> = gt.valid_values().collect();
    percentile(&values, cfg.background_percentile)
}

/// Per-frame calibration displacement `(d_row, d_col)` in RGB pixels.
pub fn calibration_displacement(cfg: &SimConfig, seed: SimSeed) -> (f64, f64) {
    let mut rng = seed.stream(STAGE_CALIBRATION_SHIFT);
    let magnitude = cfg.calib_shift_max * rng.uniform();
    let theta = std::f64::consts::TAU * rng.uniform();
    (
        magnitude * theta.sin() * cfg.fov.ifov_h,
        magnitude * theta.cos() * cfg.fov.ifov_w,
    )
}

fn calibration_shift_with_threshold(
    points: Vec<SimPoint>,
    threshold: Option<f64>,
    width: usize,
    height: usize,
    cfg: &SimConfig,
    seed: SimSeed,
) -> (Vec<SimPoint>, StageStats) {
    let mut stats = StageStats::new(STAGE_CALIBRATION_SHIFT, points.len());
    let Some(threshold) = threshold.filter(|_| cfg.calib_shift_max > 0.0) else {
        return (points, stats);
    };
    let (d_row, d_col) = calibration_displacement(cfg, seed);
    let mut out = Vec::with_capacity(points.len());
    for mut p in points {
        if p.depth_m > threshold {
            match pixel_in(p.row as f64 + d_row, p.col as f64 + d_col, width, height) {
                Some((row, col)) => {
                    if (row, col) != (p.row, p.col) {
                        stats.modified += 1;
                    }
                    p.row = row;
                    p.col = col;
                }
                None => {
                    stats.dropped += 1;
                    continue;
                }
            }
        }
        out.push(p);
    }
    (out, stats)
}

fn pad_inputs(
    gt: &DepthMap,
    rgb: Option<&RgbImage>,
    materials: Option<&MaterialMap>,
    cfg: &SimConfig,
) -> Result<(DepthMap, Option<RgbImage>, Option<MaterialMap>)> {
    let (w, h) = (gt.width(), gt.height());
    if let Some(img) = rgb {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "rgb is {}x{}, ground truth is {w}x{h}",
                img.width(),
                img.height()
            )));
        }
    }
    if let Some(m) = materials {
        if (m.width(), m.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "material map is {}x{}, ground truth is {w}x{h}",
                m.width(),
                m.height()
            )));
        }
    }
    match cfg.pad_to {
        Some(PadTo { width, height }) if (width, height) != (w, h) => Ok((
            gt.pad_replicate(width, height)?,
            rgb.map(|i| i.pad_replicate(width, height)).transpose()?,
            materials
                .map(|m| m.pad_replicate(width, height))
                .transpose()?,
        )),
        _ => Ok((gt.clone(), rgb.cloned(), materials.cloned())),
    }
}

/// Runs the full pipeline on one frame.
///
/// Inputs must share one resolution; when `cfg.pad_to` is set they are
/// edge-padded (bottom and right) to that size first. An RGB image is
/// required whenever the low-reflectivity stage is active. Without a
/// material map the non-Lambertian stage passes points through.
pub fn simulate_dtof(
    gt: &DepthMap,
    rgb: Option<&RgbImage>,
    materials: Option<&MaterialMap>,
    cfg: &SimConfig,
    seed: SimSeed,
) -> Result<SimOutput> {
    cfg.validate()?;
    if rgb.is_none() && cfg.low_reflect_loss_prob > 0.0 {
        return Err(Error::InvalidConfig(
            "low-reflectivity stage is enabled but no RGB image was given".into(),
        ));
    }
    let (gt, rgb, materials) = pad_inputs(gt, rgb, materials, cfg)?;

    let mut stages = Vec::with_capacity(7);
    let (points, s) = sample_grid_points(&gt, cfg, seed);
    stages.push(s);
    let (points, s) = apply_signal_loss(points, cfg, seed);
    stages.push(s);
    let (points, s) = match &materials {
        Some(m) => apply_non_lambertian(points, m, cfg, seed),
        None => {
            let s = StageStats::new(STAGE_NON_LAMBERTIAN, points.len());
            (points, s)
        }
    };
    stages.push(s);
    let (points, s) = match &rgb {
        Some(img) => apply_low_reflectivity(points, img, cfg, seed),
        None => {
            let s = StageStats::new(STAGE_LOW_REFLECTIVITY, points.len());
            (points, s)
        }
    };
    stages.push(s);
    let (points, s) = apply_long_distance(points, cfg, seed);
    stages.push(s);
    let (points, s) = apply_random_anomalies(points, cfg, seed);
    stages.push(s);
    let threshold = background_threshold(&gt, cfg);
    let (points, s) =
        calibration_shift_with_threshold(points, threshold, gt.width(), gt.height(), cfg, seed);
    stages.push(s);

    let (sparse, collisions) = SparseDepth::from_points_nearest(
        gt.width(),
        gt.height(),
        points.into_iter().map(|p| SparsePoint {
            row: p.row,
            col: p.col,
            depth_m: p.depth_m,
        }),
    )?;
    let stats = SimStats {
        schema_version: crate::SCHEMA_VERSION,
        seed: seed.seed,
        frame: seed.frame,
        width: gt.width(),
        height: gt.height(),
        grid_cells: cfg.grid_rows * cfg.grid_cols,
        stages,
        collisions,
        output_points: sparse.len(),
        background_threshold: threshold,
    };
    Ok(SimOutput { sparse, stats })
}
