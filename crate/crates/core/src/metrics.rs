//! Depth evaluation metrics and the scaled affine-invariant training loss.
//!
//! All metrics are taken over the pixels selected by an explicit mask.
//! `pred` is the prediction `x`, `gt` the reference `y`.

use serde::{Deserialize, Serialize};

use crate::depth::{DepthMap, Field};
use crate::error::{Error, Result};

pub const DELTA_BASE: f64 = 1.25;
pub const LOSS_ALPHA: f64 = 10.0;
pub const LOSS_LAMBDA: f64 = 0.85;
pub const DEFAULT_KAPPA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeightParams {
    /// Conduction knee, in depth units.
    pub kappa: f64,
    /// Multiply the weighted mean by an extra `1 / |P|`, as the formula is
    /// sometimes printed. Off by default: the literal form shrinks with
    /// image size.
    pub literal_prefactor: bool,
}

impl Default for EdgeWeightParams {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            literal_prefactor: false,
        }
    }
}

impl EdgeWeightParams {
    pub fn with_kappa(kappa: f64) -> Result<Self> {
        let p = Self {
            kappa,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub rel: f64,
    pub rmse: f64,
    pub log10: f64,
    pub valid_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub rel: f64,
    pub rmse: f64,
    pub log10: f64,
    pub ewmae: f64,
    pub loss: f64,
    pub valid_count: usize,
    pub kappa: f64,
    pub max_depth: Option<f64>,
}

/// Pixels valid in `gt` with depth at most `detection_max`.
pub fn valid_mask(gt: &DepthMap, detection_max: f64) -> Vec<bool> {
    (0..gt.len())
        .map(|i| gt.get_index(i).is_some_and(|d| d <= detection_max))
        .collect()
}

fn check_shapes(pred: &Field, gt: &Field, mask: &[bool]) -> Result<()> {
    if !pred.same_shape(gt) || mask.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "pred {}x{}, gt {}x{}, mask {}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
            mask.len()
        )));
    }
    Ok(())
}

/// Masked `(pred, gt)` pairs; both must be finite and positive.
fn masked_pairs(pred: &Field, gt: &Field, mask: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_shapes(pred, gt, mask)?;
    let mut pairs = Vec::new();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (pred.data()[i], gt.data()[i]);
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "pixel {i}: pred {x} / gt {y} must be positive and finite"
            )));
        }
        pairs.push((x, y));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(pairs)
}

pub fn basic_metrics(pred: &Field, gt: &Field, mask: &[bool]) -> Result<BasicMetrics> {
    let pairs = masked_pairs(pred, gt, mask)?;
    let n = pairs.len() as f64;
    let thresholds = [DELTA_BASE, DELTA_BASE.powi(2), DELTA_BASE.powi(3)];
    let mut hits = [0usize; 3];
    let (mut rel, mut sq, mut lg) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let ratio = (y / x).max(x / y);
        for (h, t) in hits.iter_mut().zip(thresholds) {
            *h += (ratio < t) as usize;
        }
        rel += (y - x).abs() / y;
        sq += (y - x) * (y - x);
        lg += (y.log10() - x.log10()).abs();
    }
    Ok(BasicMetrics {
        delta1: hits[0] as f64 / n,
        delta2: hits[1] as f64 / n,
        delta3: hits[2] as f64 / n,
        rel: rel / n,
        rmse: (sq / n).sqrt(),
        log10: lg / n,
        valid_count: pairs.len(),
    })
}

/// Conduction-based edge weight per pixel:
/// `G_p = mean over N/S/E/W of g²/(g² + κ²)` with `g = V_neighbor - V_p`.
/// Neighbors outside the image contribute `g = 0` (replicate padding).
pub fn edge_weights(gt: &Field, params: &EdgeWeightParams) -> Result<Field> {
    edge_weights_masked(gt, None, params)
}

/// As [`edge_weights`], but neighbors (and centers) flagged invalid in
/// `valid` are treated like padding.
pub fn edge_weights_masked(
    gt: &Field,
    valid: Option<&[bool]>,
    params: &EdgeWeightParams,
) -> Result<Field> {
    params.validate()?;
    let (w, h) = (gt.width(), gt.height());
    if let Some(v) = valid {
        if v.len() != gt.len() {
            return Err(Error::DimensionMismatch("validity mask size".into()));
        }
    }
    let ok = |i: usize| valid.is_none_or(|v| v[i]);
    let k2 = params.kappa * params.kappa;
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !ok(i) {
                continue;
            }
            let vp = gt.data()[i];
            let neighbors = [
                (r > 0).then(|| i - w),
                (r + 1 < h).then(|| i + w),
                (c + 1 < w).then(|| i + 1),
                (c > 0).then(|| i - 1),
            ];
            let sum: f64 = neighbors
                .into_iter()
                .flatten()
                .filter(|&j| ok(j))
                .map(|j| {
                    let g = gt.data()[j] - vp;
                    let g2 = g * g;
                    g2 / (g2 + k2)
                })
                .sum();
            out[i] = sum / 4.0;
        }
    }
    Field::new(w, h, out)
}

fn weighted_mae(
    pred: &Field,
    gt: &Field,
    mask: &[bool],
    weights: &Field,
    params: &EdgeWeightParams,
) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    let mut count = 0usize;
    let (mut num, mut den, mut plain) = (0.0, 0.0, 0.0);
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        let err = (gt.data()[i] - pred.data()[i]).abs();
        let g = weights.data()[i];
        num += g * err;
        den += g;
        plain += err;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let value = if den > 0.0 {
        num / den
    } else {
        // homogeneous region: no edges to weight
        plain / count as f64
    };
    Ok(if params.literal_prefactor {
        value / count as f64
    } else {
        value
    })
}

/// Edge-weighted MAE with weights from `gt`. Falls back to the plain MAE
/// when all masked weights are zero.
pub fn ewmae(pred: &Field, gt: &Field, mask: &[bool], params: &EdgeWeightParams) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    let weights = edge_weights(gt, params)?;
    weighted_mae(pred, gt, mask, &weights, params)
}

/// `α · sqrt(mean(g²) - λ·mean(g)²)` with `g = ln pred - ln gt`.
///
/// Evaluated as `var(g) + (1 - λ)·mean(g)²` with a centered variance so a
/// pure scale offset gives an exact zero at `λ = 1`.
pub fn affine_invariant_loss(
    pred: &Field,
    gt: &Field,
    mask: &[bool],
    alpha: f64,
    lambda: f64,
) -> Result<f64> {
    let pairs = masked_pairs(pred, gt, mask)?;
    let t = pairs.len() as f64;
    let g: Vec<f64> = pairs.iter().map(|&(x, y)| x.ln() - y.ln()).collect();
    let mean = g.iter().sum::<f64>() / t;
    let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
    let radicand = var + (1.0 - lambda) * mean * mean;
    Ok(alpha * radicand.max(0.0).sqrt())
}

/// Full report for a prediction against GT. Pixels count when GT is valid
/// and within `max_depth` (if given) and the prediction is valid.
pub fn evaluate(
    pred: &DepthMap,
    gt: &DepthMap,
    max_depth: Option<f64>,
    params: &EdgeWeightParams,
) -> Result<MetricReport> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mask: Vec<bool> = valid_mask(gt, max_depth.unwrap_or(f64::INFINITY))
        .into_iter()
        .zip(pred.mask())
        .map(|(a, &b)| a && b)
        .collect();
    let pred_f = Field::new(pred.width(), pred.height(), pred.to_filled_vec(0.0))?;
    let gt_f = Field::new(gt.width(), gt.height(), gt.to_filled_vec(0.0))?;
    let basic = basic_metrics(&pred_f, &gt_f, &mask)?;
    let weights = edge_weights_masked(&gt_f, Some(gt.mask()), params)?;
    let ewmae = weighted_mae(&pred_f, &gt_f, &mask, &weights, params)?;
    let loss = affine_invariant_loss(&pred_f, &gt_f, &mask, LOSS_ALPHA, LOSS_LAMBDA)?;
    Ok(MetricReport {
        schema_version: crate::SCHEMA_VERSION,
        delta1: basic.delta1,
        delta2: basic.delta2,
        delta3: basic.delta3,
        rel: basic.rel,
        rmse: basic.rmse,
        log10: basic.log10,
        ewmae,
        loss,
        valid_count: basic.valid_count,
        kappa: params.kappa,
        max_depth,
    })
}

/// `|pred - gt|` where both are valid, `None` elsewhere.
pub fn abs_error_map(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<Option<f64>>> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch(
            "error map inputs differ in size".into(),
        ));
    }
    Ok((0..gt.len())
        .map(|i| Some((pred.get_index(i)? - gt.get_index(i)?).abs()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(w: usize, h: usize, v: &[f64]) -> Field {
        Field::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn mask_cases() {
        let gt = DepthMap::from_values(3, 1, vec![2.0, 5.0, 9.0]).unwrap();
        assert_eq!(valid_mask(&gt, f64::INFINITY), gt.mask());
        assert_eq!(valid_mask(&gt, 8.1), vec![true, true, false]);
        let far = DepthMap::filled(2, 2, 9.0).unwrap();
        assert!(valid_mask(&far, 8.1).iter().all(|&m| !m));
    }

    #[test]
    fn perfect_prediction() {
        let gt = field(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = basic_metrics(&gt, &gt, &[true; 4]).unwrap();
        assert_eq!((m.rel, m.rmse, m.log10), (0.0, 0.0, 0.0));
        assert_eq!((m.delta1, m.delta2, m.delta3), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_computed_errors() {
        let m = basic_metrics(
            &field(2, 1, &[2.0, 4.0]),
            &field(2, 1, &[1.0, 2.0]),
            &[true; 2],
        )
        .unwrap();
        assert_relative_eq!(m.rel, 1.0);
        assert_relative_eq!(m.rmse, 2.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m.rmse, 1.58114, epsilon = 1e-5);
    }

    #[test]
    fn delta_thresholds() {
        let m = basic_metrics(
            &field(3, 1, &[1.0, 1.3, 2.0]),
            &field(3, 1, &[1.0, 1.0, 1.0]),
            &[true; 3],
        )
        .unwrap();
        assert_relative_eq!(m.delta1, 1.0 / 3.0);
        assert_relative_eq!(m.delta2, 2.0 / 3.0);
        assert_relative_eq!(m.delta3, 2.0 / 3.0);
    }

    #[test]
    fn empty_mask_errors() {
        let f = field(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            basic_metrics(&f, &f, &[false; 2]),
            Err(Error::EmptyMask)
        ));
        assert!(matches!(
            ewmae(&f, &f, &[false; 2], &EdgeWeightParams::default()),
            Err(Error::EmptyMask)
        ));
        assert!(matches!(
            affine_invariant_loss(&f, &f, &[false; 2], 10.0, 0.85),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn edge_weight_cases() {
        let p = EdgeWeightParams::default();
        let flat = edge_weights(&Field::filled(4, 3, 2.0), &p).unwrap();
        assert!(flat.data().iter().all(|&g| g == 0.0));
        let pair = edge_weights(&field(2, 1, &[0.0, 1.0]), &p).unwrap();
        for &g in pair.data() {
            assert_relative_eq!(g, (1.0 / 1.01) / 4.0, max_relative = 1e-14);
            assert_relative_eq!(g, 0.247525, epsilon = 1e-6);
        }
        // a tall step: interior pixels see one crossing direction each
        let step = edge_weights(&field(2, 1, &[0.0, 1e6]), &p).unwrap();
        assert!(step.data().iter().all(|&g| (g - 0.25).abs() < 1e-12));
        assert!(EdgeWeightParams::with_kappa(0.0).is_err());
    }

    #[test]
    fn ewmae_cases() {
        let p = EdgeWeightParams::default();
        let gt = field(2, 1, &[0.0, 1.0]);
        assert_eq!(ewmae(&gt, &gt, &[true; 2], &p).unwrap(), 0.0);
        let pred = field(2, 1, &[0.5, 1.0]);
        assert_relative_eq!(
            ewmae(&pred, &gt, &[true; 2], &p).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        let flat = Field::filled(3, 3, 2.0);
        let off = Field::filled(3, 3, 2.5);
        assert_relative_eq!(ewmae(&off, &flat, &[true; 9], &p).unwrap(), 0.5);
        let literal = EdgeWeightParams {
            literal_prefactor: true,
            ..p
        };
        assert_relative_eq!(
            ewmae(&pred, &gt, &[true; 2], &literal).unwrap(),
            0.125,
            epsilon = 1e-12
        );
    }

    #[test]
    fn loss_cases() {
        let gt = field(3, 1, &[1.0, 2.0, 3.0]);
        let mask = [true; 3];
        assert_eq!(
            affine_invariant_loss(&gt, &gt, &mask, 10.0, 0.85).unwrap(),
            0.0
        );
        let e = std::f64::consts::E;
        let pred = field(3, 1, &[e, 2.0 * e, 3.0 * e]);
        let l = affine_invariant_loss(&pred, &gt, &mask, 10.0, 0.85).unwrap();
        assert_relative_eq!(l, 10.0 * 0.15f64.sqrt(), max_relative = 1e-12);
        for c in [0.5, 2.0, 10.0] {
            let scaled = field(3, 1, &[c, 2.0 * c, 3.0 * c]);
            assert!(affine_invariant_loss(&scaled, &gt, &mask, 10.0, 1.0).unwrap() < 1e-9);
        }
        let neg = field(3, 1, &[-1.0, 2.0, 3.0]);
        assert!(affine_invariant_loss(&neg, &gt, &mask, 10.0, 0.85).is_err());
    }

    #[test]
    fn evaluate_uses_validity() {
        let gt = DepthMap::new(3, 1, vec![1.0, 2.0, 3.0], vec![true, true, false]).unwrap();
        let pred = DepthMap::from_values(3, 1, vec![1.0, 2.0, 100.0]).unwrap();
        let r = evaluate(&pred, &gt, None, &EdgeWeightParams::default()).unwrap();
        assert_eq!(r.valid_count, 2);
        assert_eq!(r.rmse, 0.0);
        assert!(matches!(
            evaluate(&pred, &gt, Some(0.5), &EdgeWeightParams::default()),
            Err(Error::EmptyMask)
        ));
    }

    fn arb_maps() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
        (
            prop::collection::vec(0.1f64..10.0, 36),
            prop::collection::vec(0.1f64..10.0, 36),
            prop::collection::vec(any::<bool>(), 36),
        )
            .prop_filter("non-empty mask", |(_, _, m)| m.iter().any(|&b| b))
    }

    proptest! {
        #[test]
        fn delta_monotone_and_weights_bounded((p, g, m) in arb_maps()) {
            let (pred, gt) = (field(6, 6, &p), field(6, 6, &g));
            let r = basic_metrics(&pred, &gt, &m).unwrap();
            prop_assert!(r.delta1 <= r.delta2 && r.delta2 <= r.delta3);
            prop_assert!(r.rmse >= 0.0 && r.rel >= 0.0 && r.log10 >= 0.0);
            let w = edge_weights(&gt, &EdgeWeightParams::default()).unwrap();
            prop_assert!(w.data().iter().all(|&g| (0.0..1.0).contains(&g)));
        }

        #[test]
        fn unmasked_pixels_do_not_matter((p, g, m) in arb_maps(), noise in 0.1f64..5.0) {
            let (pred, gt) = (field(6, 6, &p), field(6, 6, &g));
            let perturbed: Vec<f64> = p.iter().zip(&m).map(|(&x, &k)| if k { x } else { x + noise }).collect();
            let a = basic_metrics(&pred, &gt, &m).unwrap();
            let b = basic_metrics(&field(6, 6, &perturbed), &gt, &m).unwrap();
            prop_assert_eq!(a, b);
            let la = affine_invariant_loss(&pred, &gt, &m, 10.0, 0.85).unwrap();
            let lb = affine_invariant_loss(&field(6, 6, &perturbed), &gt, &m, 10.0, 0.85).unwrap();
            prop_assert_eq!(la, lb);
        }
    }
}
