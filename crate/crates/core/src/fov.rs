use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Footprint of the dToF field of view on the RGB image, in pixels.
///
/// Boundaries are given before clipping and may lie outside the image.
/// `h_u`/`h_l` are the upper/lower rows, `w_l`/`w_r` the left/right columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovRegion {
    pub h_u: f64,
    pub h_l: f64,
    pub w_l: f64,
    pub w_r: f64,
    /// Image pixels spanned by one dToF cell, vertically.
    pub ifov_h: f64,
    /// Image pixels spanned by one dToF cell, horizontally.
    pub ifov_w: f64,
}

impl FovRegion {
    pub fn new(bounds: [f64; 4], ifov_h: f64, ifov_w: f64) -> Result<Self> {
        let [h_u, h_l, w_l, w_r] = bounds;
        let region = Self {
            h_u,
            h_l,
            w_l,
            w_r,
            ifov_h,
            ifov_w,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.h_u,
            self.h_l,
            self.w_l,
            self.w_r,
            self.ifov_h,
            self.ifov_w,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(
                "FoV region has non-finite values".into(),
            ));
        }
        if self.h_u >= self.h_l || self.w_l >= self.w_r {
            return Err(Error::InvalidConfig(format!(
                "FoV bounds must satisfy h_u < h_l and w_l < w_r, got [{}, {}, {}, {}]",
                self.h_u, self.h_l, self.w_l, self.w_r
            )));
        }
        if self.ifov_h < 1.0 || self.ifov_w < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "iFoV must be at least 1x1 pixel, got {}x{}",
                self.ifov_h, self.ifov_w
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.h_l - self.h_u
    }

    pub fn width(&self) -> f64 {
        self.w_r - self.w_l
    }

    pub fn area(&self) -> f64 {
        self.height() * self.width()
    }
}

/// Fraction of a `width` x `height` image covered by `region` after
/// clipping it to `[0, height) x [0, width)`.
pub fn fov_coverage(region: &FovRegion, width: usize, height: usize) -> f64 {
    if width == 0 || height == 0 {
        return 0.0;
    }
    let rows = (region.h_l.min(height as f64) - region.h_u.max(0.0)).max(0.0);
    let cols = (region.w_r.min(width as f64) - region.w_l.max(0.0)).max(0.0);
    (rows * cols / (width as f64 * height as f64)).clamp(0.0, 1.0)
}
