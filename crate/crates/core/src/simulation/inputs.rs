use crate::depth::pad_index;
use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "rgb image has {} pixels, expected {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pad_replicate(&self, width: usize, height: usize) -> Result<Self> {
        let idx = pad_index(self.width, self.height, width, height)?;
        Ok(Self {
            width,
            height,
            pixels: idx.iter().map(|&i| self.pixels[i]).collect(),
        })
    }
}

/// Hexcone HSV: hue in degrees `[0, 360)`, saturation in `[0, 1]`,
/// value on the 0-255 scale (`max(R, G, B)`).
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

/// Per-pixel probability that a surface is non-Lambertian.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl MaterialMap {
    pub fn new(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "material map has {} entries, expected {width}x{height}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidValue(format!(
                "material probability {p} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            probs,
        })
    }

    pub fn filled(width: usize, height: usize, p: f64) -> Result<Self> {
        Self::new(width, height, vec![p; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.width + col]
    }

    pub fn pad_replicate(&self, width: usize, height: usize) -> Result<Self> {
        let idx = pad_index(self.width, self.height, width, height)?;
        Ok(Self {
            width,
            height,
            probs: idx.iter().map(|&i| self.probs[i]).collect(),
        })
    }
}
