//! Dense and sparse depth containers.
//!
//! Validity is always carried by an explicit mask. A pixel that is not
//! valid never takes part in arithmetic, whatever value sits in `data`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_len(what: &str, len: usize, width: usize, height: usize) -> Result<()> {
    if len != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {len} entries, expected {width}x{height} = {}",
            width * height
        )));
    }
    Ok(())
}

#[inline]
fn usable_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Dense metric depth with a per-pixel validity mask, row-major.
///
/// Equality ignores whatever value is stored under an invalid pixel.
#[derive(Debug, Clone)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl PartialEq for DepthMap {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.valid == other.valid
            && self
                .data
                .iter()
                .zip(&other.data)
                .zip(&self.valid)
                .all(|((a, b), &v)| !v || a == b)
    }
}

impl DepthMap {
    /// Builds a map from values and a mask. Pixels whose value is not a
    /// finite positive number are forced invalid regardless of the mask.
    pub fn new(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        check_len("depth data", data.len(), width, height)?;
        check_len("validity mask", valid.len(), width, height)?;
        let valid = data
            .iter()
            .zip(valid)
            .map(|(&d, v)| v && usable_depth(d))
            .collect();
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    /// Mask derived from the values: zero, negative and non-finite are invalid.
    pub fn from_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let valid = vec![true; data.len()];
        Self::new(width, height, data, valid)
    }

    pub fn filled(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::from_values(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Depth at `(row, col)`, `None` when invalid or outside the map.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row >= self.height || col >= self.width {
            return None;
        }
        let i = row * self.width + col;
        self.valid[i].then_some(self.data[i])
    }

    pub fn get_index(&self, index: usize) -> Option<f64> {
        self.valid
            .get(index)
            .copied()
            .filter(|&v| v)
            .map(|_| self.data[index])
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_some()
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    /// Raw storage. Entries under a cleared mask bit are meaningless.
    pub fn raw_data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid depths in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.data
            .iter()
            .zip(&self.valid)
            .filter_map(|(&d, &v)| v.then_some(d))
    }

    /// Applies `f` to every valid depth; results that are not usable depths
    /// become invalid.
    pub fn map_valid(&self, f: impl Fn(f64) -> f64) -> DepthMap {
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { f(d) } else { 0.0 })
            .collect();
        let valid = self.valid.clone();
        DepthMap::new(self.width, self.height, data, valid).expect("shape preserved")
    }

    /// Values with invalid pixels written as `fill`.
    pub fn to_filled_vec(&self, fill: f64) -> Vec<f64> {
        self.data
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { d } else { fill })
            .collect()
    }

    /// Dense field view; fails if any pixel is invalid.
    pub fn to_field(&self) -> Result<Field> {
        if let Some(i) = self.valid.iter().position(|&v| !v) {
            return Err(Error::InvalidValue(format!(
                "depth map is not dense: pixel ({}, {}) is invalid",
                i / self.width,
                i % self.width
            )));
        }
        Field::new(self.width, self.height, self.data.clone())
    }

    /// Replicates edge pixels (values and validity) out to `width` x `height`.
    pub fn pad_replicate(&self, width: usize, height: usize) -> Result<DepthMap> {
        let (data, valid) = pad_pair(
            &self.data,
            &self.valid,
            self.width,
            self.height,
            width,
            height,
        )?;
        DepthMap::new(width, height, data, valid)
    }
}

pub(crate) fn pad_index(
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Result<Vec<usize>> {
    if dst_w < src_w || dst_h < src_h {
        return Err(Error::DimensionMismatch(format!(
            "cannot pad {src_w}x{src_h} down to {dst_w}x{dst_h}"
        )));
    }
    if src_w == 0 || src_h == 0 {
        return Err(Error::DimensionMismatch("cannot pad an empty image".into()));
    }
    let mut idx = Vec::with_capacity(dst_w * dst_h);
    for r in 0..dst_h {
        let sr = r.min(src_h - 1);
        for c in 0..dst_w {
            idx.push(sr * src_w + c.min(src_w - 1));
        }
    }
    Ok(idx)
}

fn pad_pair(
    data: &[f64],
    valid: &[bool],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let idx = pad_index(src_w, src_h, dst_w, dst_h)?;
    Ok((
        idx.iter().map(|&i| data[i]).collect(),
        idx.iter().map(|&i| valid[i]).collect(),
    ))
}

/// Dense real-valued grid without validity semantics (inverse depth,
/// relative depth, propagation state, edge weights).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len("field data", data.len(), width, height)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.data.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Interprets the field as depth; non-positive values become invalid.
    pub fn to_depth_map(&self) -> DepthMap {
        DepthMap::from_values(self.width, self.height, self.data.clone()).expect("shape preserved")
    }
}

/// Multi-channel grid stored channel-major: `data[c * H * W + row * W + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "volume has {} entries, expected {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    /// Channel values of one pixel.
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.at(c, row, col)).collect()
    }
}

/// One measured point of a sparse map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsePoint {
    pub row: usize,
    pub col: usize,
    pub depth_m: f64,
}

/// High-resolution map where only listed pixels carry depth.
///
/// Points are kept unique per pixel and sorted row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth {
    width: usize,
    height: usize,
    points: Vec<SparsePoint>,
}

impl SparseDepth {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            points: Vec::new(),
        }
    }

    /// Strict constructor: rejects out-of-bounds, non-positive and duplicate points.
    pub fn new(width: usize, height: usize, points: Vec<SparsePoint>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for p in points {
            Self::check_point(width, height, &p)?;
            if seen.insert((p.row, p.col), p).is_some() {
                return Err(Error::InvalidValue(format!(
                    "duplicate sparse point at ({}, {})",
                    p.row, p.col
                )));
            }
        }
        Ok(Self {
            width,
            height,
            points: seen.into_values().collect(),
        })
    }

    /// Builds a map keeping the smallest depth when points share a pixel.
    /// Returns the map and the number of collisions resolved.
    pub fn from_points_nearest(
        width: usize,
        height: usize,
        points: impl IntoIterator<Item = SparsePoint>,
    ) -> Result<(Self, usize)> {
        let mut acc: BTreeMap<(usize, usize), SparsePoint> = BTreeMap::new();
        let mut collisions = 0;
        for p in points {
            Self::check_point(width, height, &p)?;
            match acc.entry((p.row, p.col)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(p);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    collisions += 1;
                    if p.depth_m < e.get().depth_m {
                        e.insert(p);
                    }
                }
            }
        }
        Ok((
            Self {
                width,
                height,
                points: acc.into_values().collect(),
            },
            collisions,
        ))
    }

    fn check_point(width: usize, height: usize, p: &SparsePoint) -> Result<()> {
        if p.row >= height || p.col >= width {
            return Err(Error::InvalidValue(format!(
                "sparse point ({}, {}) outside {width}x{height}",
                p.row, p.col
            )));
        }
        if !usable_depth(p.depth_m) {
            return Err(Error::InvalidValue(format!(
                "sparse point ({}, {}) has non-positive depth {}",
                p.row, p.col, p.depth_m
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[SparsePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.points
            .binary_search_by(|p| (p.row, p.col).cmp(&(row, col)))
            .ok()
            .map(|i| self.points[i].depth_m)
    }

    pub fn to_depth_map(&self) -> DepthMap {
        let mut data = vec![0.0; self.width * self.height];
        let mut valid = vec![false; self.width * self.height];
        for p in &self.points {
            let i = p.row * self.width + p.col;
            data[i] = p.depth_m;
            valid[i] = true;
        }
        DepthMap::new(self.width, self.height, data, valid).expect("shape preserved")
    }

    /// Collects every valid pixel of a dense map as a point.
    pub fn from_depth_map(map: &DepthMap) -> Self {
        let points = (0..map.height())
            .flat_map(|row| (0..map.width()).map(move |col| (row, col)))
            .filter_map(|(row, col)| {
                map.get(row, col)
                    .map(|depth_m| SparsePoint { row, col, depth_m })
            })
            .collect();
        Self {
            width: map.width(),
            height: map.height(),
            points,
        }
    }
}

/// Low-resolution grid of raw dToF measurements. `None` marks a cell
/// without a return.
#[derive(Debug, Clone, PartialEq)]
pub struct DToFGrid {
    rows: usize,
    cols: usize,
    cells: Vec<Option<f64>>,
}

impl DToFGrid {
    pub fn new(rows: usize, cols: usize, cells: Vec<Option<f64>>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} cells, expected {rows}x{cols}",
                cells.len()
            )));
        }
        if let Some((i, d)) = cells
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.filter(|&d| !usable_depth(d)).map(|d| (i, d)))
        {
            return Err(Error::InvalidValue(format!(
                "cell ({}, {}) has non-positive depth {d}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![None; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row >= self.rows || col >= self.cols {
            return None;
        }
        self.cells[row * self.cols + col]
    }

    /// Checks the sensor range invariant: every valid depth in `(0, detection_max]`.
    pub fn check_range(&self, detection_max: f64) -> Result<()> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if let Some(d) = self.get(r, c) {
                    if d > detection_max {
                        return Err(Error::InvalidValue(format!(
                            "cell ({r}, {c}) depth {d} exceeds detection range {detection_max}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Valid cells in row-major order.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|d| (i / self.cols, i % self.cols, d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_valid_construction() {
        let m = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![true; 4]).unwrap();
        assert_eq!(m.valid_count(), 4);
        assert_eq!(m.get(1, 1), Some(4.0));
    }

    #[test]
    fn negative_depth_forced_invalid() {
        let m = DepthMap::new(2, 2, vec![1.0, -1.0, 3.0, 4.0], vec![true; 4]).unwrap();
        assert_eq!(m.valid_count(), 3);
        assert_eq!(m.get(0, 1), None);
        let n = DepthMap::from_values(3, 1, vec![f64::NAN, f64::INFINITY, 0.0]).unwrap();
        assert_eq!(n.valid_count(), 0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            DepthMap::from_values(1, 2, vec![1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(DepthMap::new(1, 2, vec![1.0, 2.0], vec![true]).is_err());
    }

    #[test]
    fn sparse_rejects_duplicates_and_bounds() {
        let p = |row, col, depth_m| SparsePoint { row, col, depth_m };
        assert!(SparseDepth::new(4, 4, vec![p(0, 0, 1.0), p(0, 0, 2.0)]).is_err());
        assert!(SparseDepth::new(4, 4, vec![p(4, 0, 1.0)]).is_err());
        assert!(SparseDepth::new(4, 4, vec![p(0, 0, 0.0)]).is_err());
        let s = SparseDepth::new(4, 4, vec![p(2, 1, 1.0), p(0, 3, 2.0)]).unwrap();
        assert_eq!(s.points()[0], p(0, 3, 2.0));
        assert_eq!(s.get(2, 1), Some(1.0));
    }

    #[test]
    fn nearest_wins_on_collision() {
        let p = |depth_m| SparsePoint {
            row: 1,
            col: 1,
            depth_m,
        };
        let (s, n) = SparseDepth::from_points_nearest(3, 3, [p(5.0), p(2.0), p(3.0)]).unwrap();
        assert_eq!(n, 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(1, 1), Some(2.0));
    }

    #[test]
    fn replicate_padding() {
        let m = DepthMap::new(2, 1, vec![1.0, 2.0], vec![true, false]).unwrap();
        let p = m.pad_replicate(3, 2).unwrap();
        assert_eq!(p.get(1, 0), Some(1.0));
        assert_eq!(p.get(1, 2), None);
        assert!(m.pad_replicate(1, 1).is_err());
    }

    #[test]
    fn grid_range_check() {
        let g = DToFGrid::new(1, 2, vec![Some(4.0), None]).unwrap();
        assert!(g.check_range(4.1).is_ok());
        assert!(g.check_range(3.9).is_err());
        assert!(DToFGrid::new(1, 1, vec![Some(-1.0)]).is_err());
    }
}
