//! Non-learned numeric kernels of the completion model: depth-bin
//! combination, inverse/relative depth, scale-shift alignment of monocular
//! inverse depth, and multi-kernel affinity propagation.

use serde::{Deserialize, Serialize};

use crate::depth::{DepthMap, Field, SparseDepth, Volume};
use crate::error::{Error, Result};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_BIN_COUNT: usize = 128;
pub const DEFAULT_ITERATIONS: usize = 6;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_KERNELS: [usize; 3] = [3, 5, 7];

fn check_distribution(what: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Unnormalized(format!("{what} is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Unnormalized(format!(
            "{what} has negative entry {v}"
        )));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Adaptive partition of `[d_min, d_max]` into normalized bin widths.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBins {
    widths: Vec<f64>,
    d_min: f64,
    d_max: f64,
}

impl DepthBins {
    pub fn new(widths: Vec<f64>, d_min: f64, d_max: f64) -> Result<Self> {
        check_distribution("bin widths", &widths)?;
        if !(d_min < d_max && d_min.is_finite() && d_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "depth range [{d_min}, {d_max}] is empty"
            )));
        }
        Ok(Self {
            widths,
            d_min,
            d_max,
        })
    }

    pub fn uniform(n: usize, d_min: f64, d_max: f64) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n], d_min, d_max)
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// `c_i = d_min + (d_max - d_min) * (b_i / 2 + Σ_{j<i} b_j)`.
    pub fn centers(&self) -> Vec<f64> {
        let span = self.d_max - self.d_min;
        let mut edge = 0.0;
        self.widths
            .iter()
            .map(|&b| {
                let c = self.d_min + span * (edge + b / 2.0);
                edge += b;
                c
            })
            .collect()
    }
}

pub fn bin_centers(bins: &DepthBins) -> Vec<f64> {
    bins.centers()
}

/// `d = Σ k_i c_i` for per-pixel probabilities `k`.
pub fn bins_to_depth(centers: &[f64], weights: &[f64]) -> Result<f64> {
    if centers.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} bin centers but {} weights",
            centers.len(),
            weights.len()
        )));
    }
    check_distribution("bin weights", weights)?;
    let d: f64 = centers.iter().zip(weights).map(|(c, k)| c * k).sum();
    // keep the convex combination inside its hull despite rounding
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(d.clamp(lo, hi))
}

/// Applies [`bins_to_depth`] at every pixel of a `(n_bins, H, W)` volume.
pub fn bins_to_depth_map(bins: &DepthBins, weights: &Volume) -> Result<Field> {
    if weights.channels() != bins.len() {
        return Err(Error::DimensionMismatch(format!(
            "weight volume has {} channels for {} bins",
            weights.channels(),
            bins.len()
        )));
    }
    let centers = bins.centers();
    let (w, h) = (weights.width(), weights.height());
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            out.push(bins_to_depth(&centers, &weights.pixel(r, c))?);
        }
    }
    Field::new(w, h, out)
}

/// `1 / (d_inv + ε)` elementwise.
pub fn inverse_to_relative(d_inv: &Field, epsilon: f64) -> Result<Field> {
    if let Some(v) = d_inv.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidValue(format!(
            "inverse depth must be non-negative, found {v}"
        )));
    }
    Field::new(
        d_inv.width(),
        d_inv.height(),
        d_inv.data().iter().map(|&v| 1.0 / (v + epsilon)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// One pass of outlier rejection at 2×MAD of the residuals, then refit.
    pub robust: bool,
    /// Lower bound on the aligned inverse depth before inversion.
    pub inverse_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            robust: false,
            inverse_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleShift {
    pub scale: f64,
    pub shift: f64,
    /// RMS of `s·d_inv + t - 1/depth` over the points used in the fit.
    pub residual_rms: f64,
    pub points_used: usize,
    pub points_rejected: usize,
}

/// Ordinary least squares of `target ≈ s·x + t`.
fn solve_affine(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 sparse points, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (sxx, sxy) = samples.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    let scale_x = samples
        .iter()
        .map(|s| s.0.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    if !(sxx > (f64::EPSILON * scale_x).powi(2) * n) {
        return Err(Error::Degenerate(
            "inverse-depth values at the sparse points are all equal".into(),
        ));
    }
    let s = sxy / sxx;
    Ok((s, my - s * mx))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits `1/depth ≈ s·d_inv + t` over the sparse points in inverse-depth
/// space and returns the fit with the aligned metric map
/// `1 / max(s·d_inv + t, floor)`.
pub fn fit_scale_shift(
    d_inv: &Field,
    sparse: &SparseDepth,
    opts: &FitOptions,
) -> Result<(ScaleShift, DepthMap)> {
    if (sparse.width(), sparse.height()) != (d_inv.width(), d_inv.height()) {
        return Err(Error::DimensionMismatch(format!(
            "sparse map is {}x{}, inverse depth is {}x{}",
            sparse.width(),
            sparse.height(),
            d_inv.width(),
            d_inv.height()
        )));
    }
    if !(opts.inverse_floor > 0.0) {
        return Err(Error::InvalidConfig(
            "inverse_floor must be positive".into(),
        ));
    }
    let mut samples: Vec<(f64, f64)> = sparse
        .points()
        .iter()
        .map(|p| (d_inv.at(p.row, p.col), 1.0 / p.depth_m))
        .filter(|(x, _)| x.is_finite())
        .collect();
    let (mut s, mut t) = solve_affine(&samples)?;
    let mut rejected = 0;
    if opts.robust {
        let mut residuals: Vec<f64> = samples.iter().map(|&(x, y)| s * x + t - y).collect();
        let med = median(&mut residuals.clone());
        let mut dev: Vec<f64> = residuals.iter().map(|r| (r - med).abs()).collect();
        let mad = median(&mut dev);
        if mad > 0.0 {
            let before = samples.len();
            let mut keep = residuals.drain(..).map(|r| (r - med).abs() <= 2.0 * mad);
            samples.retain(|_| keep.next().unwrap_or(true));
            rejected = before - samples.len();
            if rejected > 0 {
                (s, t) = solve_affine(&samples)?;
            }
        }
    }
    let n = samples.len() as f64;
    let rms = (samples
        .iter()
        .map(|&(x, y)| (s * x + t - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let aligned: Vec<f64> = d_inv
        .data()
        .iter()
        .map(|&x| 1.0 / (s * x + t).max(opts.inverse_floor))
        .collect();
    let map = DepthMap::from_values(d_inv.width(), d_inv.height(), aligned)?;
    Ok((
        ScaleShift {
            scale: s,
            shift: t,
            residual_rms: rms,
            points_used: samples.len(),
            points_rejected: rejected,
        },
        map,
    ))
}

/// Normalized per-pixel affinities of one square kernel.
///
/// Raw channel order per pixel: self weight first, then the `k² - 1`
/// neighbors in row-major order with the center skipped. On construction
/// all weights are divided by their absolute sum and the self weight is
/// reset to `1 - Σ|ω_j|`, so `|ω_i| + Σ|ω_j| = 1` at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityField {
    kernel: usize,
    width: usize,
    height: usize,
    /// `[pixel][0]` self weight, `[pixel][1..]` neighbors.
    weights: Vec<f64>,
}

impl AffinityField {
    pub fn kernel_size(&self) -> usize {
        self.kernel
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn check_kernel(kernel: usize) -> Result<()> {
        if kernel < 3 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "kernel size must be odd and at least 3, got {kernel}"
            )));
        }
        Ok(())
    }

    /// Builds from a raw `(k², H, W)` volume.
    pub fn from_raw(kernel: usize, raw: &Volume) -> Result<Self> {
        Self::check_kernel(kernel)?;
        let taps = kernel * kernel;
        if raw.channels() != taps {
            return Err(Error::DimensionMismatch(format!(
                "kernel {kernel} needs {taps} channels, volume has {}",
                raw.channels()
            )));
        }
        let (w, h) = (raw.width(), raw.height());
        let mut weights = Vec::with_capacity(w * h * taps);
        for r in 0..h {
            for c in 0..w {
                let px = raw.pixel(r, c);
                if px.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidValue(format!(
                        "non-finite affinity at ({r}, {c})"
                    )));
                }
                let total: f64 = px.iter().map(|v| v.abs()).sum();
                let norm = if total > 0.0 { total } else { 1.0 };
                let neighbors: Vec<f64> = px[1..].iter().map(|v| v / norm).collect();
                let mass: f64 = neighbors.iter().map(|v| v.abs()).sum();
                weights.push(1.0 - mass);
                weights.extend(neighbors);
            }
        }
        Ok(Self {
            kernel,
            width: w,
            height: h,
            weights,
        })
    }

    /// Same raw weights at every pixel.
    pub fn uniform(kernel: usize, width: usize, height: usize, raw: &[f64]) -> Result<Self> {
        Self::check_kernel(kernel)?;
        let taps = kernel * kernel;
        if raw.len() != taps {
            return Err(Error::DimensionMismatch(format!(
                "kernel {kernel} needs {taps} weights, got {}",
                raw.len()
            )));
        }
        let mut data = Vec::with_capacity(taps * width * height);
        for &v in raw {
            data.extend(std::iter::repeat_n(v, width * height));
        }
        Self::from_raw(kernel, &Volume::new(width, height, taps, data)?)
    }

    /// Self weight 1 everywhere.
    pub fn identity(kernel: usize, width: usize, height: usize) -> Result<Self> {
        let mut raw = vec![0.0; kernel * kernel];
        raw[0] = 1.0;
        Self::uniform(kernel, width, height, &raw)
    }

    /// Normalized weights of one pixel: self first, then neighbors.
    pub fn pixel_weights(&self, row: usize, col: usize) -> &[f64] {
        let taps = self.kernel * self.kernel;
        let i = (row * self.width + col) * taps;
        &self.weights[i..i + taps]
    }

    /// `(d_row, d_col)` of each neighbor channel.
    fn offsets(&self) -> Vec<(isize, isize)> {
        let r = (self.kernel / 2) as isize;
        (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
            .filter(|&o| o != (0, 0))
            .collect()
    }
}

/// One synchronous propagation step:
/// `D_i ← ω_i·D_i + Σ_j ω_j·D_j`, reading only the previous field.
/// Neighbors outside the image hand their weight magnitude to the center.
pub fn propagate_step(field: &Field, affinity: &AffinityField) -> Result<Field> {
    let (w, h) = (field.width(), field.height());
    if (affinity.width, affinity.height) != (w, h) {
        return Err(Error::DimensionMismatch(format!(
            "affinity is {}x{}, field is {w}x{h}",
            affinity.width, affinity.height
        )));
    }
    let offsets = affinity.offsets();
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let wts = affinity.pixel_weights(r, c);
            let center = field.at(r, c);
            let mut self_w = wts[0];
            let mut acc = 0.0;
            for (&(dy, dx), &wj) in offsets.iter().zip(&wts[1..]) {
                let (nr, nc) = (r as isize + dy, c as isize + dx);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    self_w += wj.abs();
                } else {
                    acc += wj * field.at(nr as usize, nc as usize);
                }
            }
            out.push(self_w * center + acc);
        }
    }
    Field::new(w, h, out)
}

/// Normalized mixing weights, either one set per image or one per pixel.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSet {
    Global(Vec<f64>),
    /// `(n, H, W)` volume; each pixel's `n` values sum to 1.
    PerPixel(Volume),
}

impl WeightSet {
    pub fn len(&self) -> usize {
        match self {
            WeightSet::Global(v) => v.len(),
            WeightSet::PerPixel(v) => v.channels(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self {
            WeightSet::Global(v) => check_distribution(what, v),
            WeightSet::PerPixel(vol) => {
                for r in 0..vol.height() {
                    for c in 0..vol.width() {
                        check_distribution(&format!("{what} at ({r}, {c})"), &vol.pixel(r, c))?;
                    }
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn get(&self, k: usize, row: usize, col: usize) -> f64 {
        match self {
            WeightSet::Global(v) => v[k],
            WeightSet::PerPixel(vol) => vol.at(k, row, col),
        }
    }

    fn check_shape(&self, width: usize, height: usize) -> Result<()> {
        if let WeightSet::PerPixel(vol) = self {
            if (vol.width(), vol.height()) != (width, height) {
                return Err(Error::DimensionMismatch(format!(
                    "per-pixel weights are {}x{}, depth is {width}x{height}",
                    vol.width(),
                    vol.height()
                )));
            }
        }
        Ok(())
    }
}

/// Weights over iteration snapshots `t ∈ {0, T/2, T}` (`tau`) and over
/// kernels (`sigma`).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    tau: WeightSet,
    sigma: WeightSet,
}

impl AggregationWeights {
    pub fn new(tau: WeightSet, sigma: WeightSet) -> Result<Self> {
        if tau.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "tau needs 3 weights (t = 0, T/2, T), got {}",
                tau.len()
            )));
        }
        tau.validate("tau")?;
        sigma.validate("sigma")?;
        Ok(Self { tau, sigma })
    }

    pub fn global(tau: [f64; 3], sigma: &[f64]) -> Result<Self> {
        Self::new(
            WeightSet::Global(tau.to_vec()),
            WeightSet::Global(sigma.to_vec()),
        )
    }

    pub fn tau(&self) -> &WeightSet {
        &self.tau
    }

    pub fn sigma(&self) -> &WeightSet {
        &self.sigma
    }
}

/// Runs `iterations` propagation steps per kernel and blends the snapshots
/// at `t = 0, T/2, T`: `D = Σ_t τ_t Σ_k σ_k D_{k,t}`. Snapshot `t = 0` is
/// the initial field.
pub fn refine(
    initial: &Field,
    affinities: &[AffinityField],
    agg: &AggregationWeights,
    iterations: usize,
) -> Result<Field> {
    if iterations < 2 || !iterations.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "iteration count must be even and at least 2, got {iterations}"
        )));
    }
    if affinities.len() != agg.sigma.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} affinity kernels but {} sigma weights",
            affinities.len(),
            agg.sigma.len()
        )));
    }
    let (w, h) = (initial.width(), initial.height());
    agg.tau.check_shape(w, h)?;
    agg.sigma.check_shape(w, h)?;

    let half = iterations / 2;
    // every kernel starts from the same field and Σσ = 1, so the t = 0 term
    // is τ_0·D_0 exactly
    let mut out: Vec<f64> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| agg.tau.get(0, r, c) * initial.at(r, c))
        .collect();
    for (k, aff) in affinities.iter().enumerate() {
        let mut current = initial.clone();
        let mut snapshots = [None, None];
        for step in 1..=iterations {
            current = propagate_step(&current, aff)?;
            if step == half {
                snapshots[0] = Some(current.clone());
            }
        }
        snapshots[1] = Some(current);
        let [mid, last] = snapshots.map(|s| s.expect("snapshots taken"));
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let blended =
                    agg.tau.get(1, r, c) * mid.at(r, c) + agg.tau.get(2, r, c) * last.at(r, c);
                out[i] += agg.sigma.get(k, r, c) * blended;
            }
        }
    }
    Field::new(w, h, out)
}
