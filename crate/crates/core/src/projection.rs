//! Moving dToF returns into the RGB camera and splatting them onto a
//! high-resolution sparse map.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{check_rotation, CameraModel, CameraRig};
use crate::depth::{DToFGrid, SparseDepth, SparsePoint};
use crate::error::{Error, Result};

/// Rigid motion from the dToF frame into the RGB frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }
}

/// `R_T = R_rgb R_dtofᵀ`, `t_T = t_rgb - R_T t_dtof`.
pub fn compose_transform(rig: &CameraRig) -> Result<RigidTransform> {
    let r_dtof = rig.dtof.rotation();
    let r_rgb = rig.rgb.rotation();
    check_rotation(r_dtof)?;
    check_rotation(r_rgb)?;
    // the inverse of a rotation is its transpose
    let rotation = r_rgb * r_dtof.transpose();
    let translation = rig.rgb.translation() - rotation * rig.dtof.translation();
    RigidTransform::new(rotation, translation)
}

pub fn transform_point(p: &Vector3<f64>, transform: &RigidTransform) -> Vector3<f64> {
    transform.rotation * p + transform.translation
}

/// Perspective projection to sub-pixel `(u, v)`: `u` along columns, `v` along rows.
pub fn project_point(p: &Vector3<f64>, cam: &CameraModel) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok((
        cam.fx() * p.x / p.z + cam.cx(),
        cam.fy() * p.y / p.z + cam.cy(),
    ))
}

/// Back-projects a cell along the ray through its center so that the
/// camera-frame z equals the measured depth. Cell `(row, col)` has its
/// center at pixel coordinates `(u, v) = (col, row)` of the dToF camera.
pub fn dtof_cell_to_point(
    grid: &DToFGrid,
    row: usize,
    col: usize,
    dtof_cam: &CameraModel,
) -> Result<Vector3<f64>> {
    let depth = grid.get(row, col).ok_or(Error::InvalidCell { row, col })?;
    Ok(cell_ray_point(row, col, depth, dtof_cam))
}

fn cell_ray_point(row: usize, col: usize, depth: f64, cam: &CameraModel) -> Vector3<f64> {
    let x = (col as f64 - cam.cx()) / cam.fx();
    let y = (row as f64 - cam.cy()) / cam.fy();
    Vector3::new(x * depth, y * depth, depth)
}

/// Nearest pixel index for a sub-pixel coordinate; halves round toward +inf.
#[inline]
pub fn round_pixel(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Bookkeeping for one projected frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    pub valid_cells: usize,
    pub projected: usize,
    pub behind_camera: usize,
    pub out_of_image: usize,
    pub collisions: usize,
}

/// Projects every valid cell into a `width` x `height` RGB image.
///
/// The stored depth is the z coordinate in the RGB frame. Points outside
/// the image or behind the camera are dropped and counted; when two points
/// land on the same pixel the nearer one is kept.
pub fn project_dtof_frame(
    grid: &DToFGrid,
    rig: &CameraRig,
    width: usize,
    height: usize,
) -> Result<(SparseDepth, ProjectionStats)> {
    let transform = compose_transform(rig)?;
    let mut stats = ProjectionStats::default();
    let mut points = Vec::new();
    for (row, col, depth) in grid.valid_cells() {
        stats.valid_cells += 1;
        let p_dtof = cell_ray_point(row, col, depth, &rig.dtof);
        let p_rgb = transform_point(&p_dtof, &transform);
        let (u, v) = match project_point(&p_rgb, &rig.rgb) {
            Ok(uv) => uv,
            Err(_) => {
                stats.behind_camera += 1;
                continue;
            }
        };
        let (pu, pv) = (round_pixel(u), round_pixel(v));
        if !(pu >= 0.0 && pv >= 0.0 && pu < width as f64 && pv < height as f64) {
            stats.out_of_image += 1;
            continue;
        }
        points.push(SparsePoint {
            row: pv as usize,
            col: pu as usize,
            depth_m: p_rgb.z,
        });
    }
    let (sparse, collisions) = SparseDepth::from_points_nearest(width, height, points)?;
    stats.collisions = collisions;
    stats.projected = sparse.len();
    Ok((sparse, stats))
}
