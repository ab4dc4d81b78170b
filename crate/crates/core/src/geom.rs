//! Rigid-body poses, pinhole camera model, and so(3) conversions.
//!
//! Conventions: camera frame is x-right, y-down, z-forward; the world frame
//! is right-handed with gravity along -z. A [`Pose`] is the camera-to-world
//! transform T_WC. Quaternions are stored scalar-last (qx, qy, qz, qw) at
//! file boundaries and normalized on construction.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
}

/// Rigid transform mapping camera coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        // renormalize so accumulated products stay on the unit sphere
        let q = UnitQuaternion::from_quaternion(*rotation.quaternion());
        Pose {
            rotation: q,
            translation,
        }
    }

    /// Construct from scalar-last quaternion components (qx, qy, qz, qw).
    pub fn from_parts(t: [f64; 3], q_xyzw: [f64; 4]) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(
            q_xyzw[3], q_xyzw[0], q_xyzw[1], q_xyzw[2],
        ));
        Pose {
            rotation: q,
            translation: Vector3::new(t[0], t[1], t[2]),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// Scalar-last quaternion components (qx, qy, qz, qw).
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Applies `other` then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    /// Maps a point given in this pose's local (camera) frame to the world frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation angle (rad) plus translation distance to the identity.
    pub fn distance_to_identity(&self) -> (f64, f64) {
        (self.rotation.angle(), self.translation.norm())
    }
}

/// Logarithm map: unit quaternion to axis-angle vector, |v| in [0, pi].
pub fn so3_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut quat = *q.quaternion();
    if quat.w < 0.0 {
        quat = -quat;
    }
    let vec = Vector3::new(quat.i, quat.j, quat.k);
    let vnorm = vec.norm();
    let w = quat.w;
    if vnorm < 1e-9 {
        // small-angle series: 2*atan2(v,w)/v ~ 2/w * (1 - v^2/(3w^2))
        return vec * (2.0 / w);
    }
    let angle = 2.0 * vnorm.atan2(w);
    vec * (angle / vnorm)
}

/// Exponential map: axis-angle vector to unit quaternion.
pub fn so3_exp(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    let angle = v.norm();
    let (w, k) = if angle < 1e-8 {
        // sin(a/2)/a ~ 1/2 - a^2/48
        (1.0 - angle * angle / 8.0, 0.5 - angle * angle / 48.0)
    } else {
        ((angle / 2.0).cos(), (angle / 2.0).sin() / angle)
    };
    UnitQuaternion::from_quaternion(Quaternion::new(w, v.x * k, v.y * k, v.z * k))
}

/// Base rotation taking the camera frame (x-right, y-down, z-forward) to a
/// level heading along world +x with world +z up.
pub fn camera_base_rotation() -> UnitQuaternion<f64> {
    // camera x -> world -y, camera y -> world -z, camera z -> world +x
    let m = Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(1.0, 0.0, 0.0),
    ]);
    UnitQuaternion::from_matrix(&m)
}

/// Camera-to-world pose at `eye` with the optical axis pointing at `target`.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let forward = (target - eye).normalize();
    let up = if forward.z.abs() > 0.999 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(0.0, 0.0, 1.0)
    };
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right).normalize();
    let m = Matrix3::from_columns(&[right, down, forward]);
    Pose::new(UnitQuaternion::from_matrix(&m), eye)
}

/// Result of projecting a camera-frame point onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionStatus {
    Valid,
    OutOfBounds,
    BehindCamera,
}

#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub status: ProjectionStatus,
}

/// Pinhole intrinsics plus image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeomError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeomError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if cx < 0.0 || cx >= width as f64 || cy < 0.0 || cy >= height as f64 {
            return Err(GeomError::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square camera with the given horizontal field of view (degrees).
    pub fn with_fov(fov_deg: f64, size: u32) -> Self {
        let half = size as f64 / 2.0;
        let f = half / (fov_deg.to_radians() / 2.0).tan();
        CameraModel {
            fx: f,
            fy: f,
            cx: half,
            cy: half,
            width: size,
            height: size,
        }
    }

    pub fn project(&self, p: &Vector3<f64>) -> Projection {
        if p.z <= 0.0 {
            return Projection {
                u: 0.0,
                v: 0.0,
                status: ProjectionStatus::BehindCamera,
            };
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        // small tolerance so unproject->project roundoff at the image border
        // cannot flip a pixel to out-of-bounds
        let eps = 1e-6;
        let status = if u >= -eps && u < self.width as f64 && v >= -eps && v < self.height as f64 {
            ProjectionStatus::Valid
        } else {
            ProjectionStatus::OutOfBounds
        };
        Projection { u, v, status }
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>, GeomError> {
        if depth <= 0.0 {
            return Err(GeomError::NonPositiveDepth(depth));
        }
        Ok(Vector3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        ))
    }

    /// Unnormalized camera-frame ray direction through pixel coordinate (u, v), z = 1.
    pub fn ray_dir(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}
