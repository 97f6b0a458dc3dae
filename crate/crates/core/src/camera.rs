//! Pinhole camera models and the dToF/RGB rig.
//!
//! Extrinsics map world coordinates into the camera frame:
//! `p_cam = R * p_world + t`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Checks `RᵀR = I` entrywise within [`ROTATION_TOLERANCE`] and `det R = 1`.
pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let deviation = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !deviation.is_finite()
        || deviation > ROTATION_TOLERANCE
        || (det - 1.0).abs() > ROTATION_TOLERANCE
    {
        return Err(Error::NotOrthonormal { deviation, det });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) || translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite parameter".into()));
        }
        check_rotation(&rotation)?;
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        })
    }

    /// Camera at the world origin looking down +z.
    pub fn with_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(fx, fy, cx, cy, Matrix3::identity(), Vector3::zeros())
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub dtof: CameraModel,
    pub rgb: CameraModel,
}

/// JSON form of a camera: rotation row-major in `R`, translation in `t`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RigRecord {
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
    pub dtof: CameraRecord,
    pub rgb: CameraRecord,
}

impl TryFrom<&CameraRecord> for CameraModel {
    type Error = Error;

    fn try_from(rec: &CameraRecord) -> Result<Self> {
        CameraModel::new(
            rec.fx,
            rec.fy,
            rec.cx,
            rec.cy,
            Matrix3::from_row_slice(&rec.r),
            Vector3::from_column_slice(&rec.t),
        )
    }
}

impl From<&CameraModel> for CameraRecord {
    fn from(cam: &CameraModel) -> Self {
        let r = cam.rotation;
        CameraRecord {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            r: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            t: [cam.translation.x, cam.translation.y, cam.translation.z],
        }
    }
}

impl TryFrom<&RigRecord> for CameraRig {
    type Error = Error;

    fn try_from(rec: &RigRecord) -> Result<Self> {
        crate::check_schema_version(rec.schema_version)?;
        Ok(CameraRig {
            dtof: (&rec.dtof).try_into()?,
            rgb: (&rec.rgb).try_into()?,
        })
    }
}

impl From<&CameraRig> for RigRecord {
    fn from(rig: &CameraRig) -> Self {
        RigRecord {
            schema_version: crate::SCHEMA_VERSION,
            dtof: (&rig.dtof).into(),
            rgb: (&rig.rgb).into(),
        }
    }
}

/// Rotation by `angle` radians about +z.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}
