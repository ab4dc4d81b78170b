//! Dense ground-truth labels derived from depth and pose: optical flow with
//! occlusion/out-of-FOV masks, stereo disparity, and simulated LiDAR.

use crate::geom::{CameraModel, Pose, ProjectionStatus};
use crate::raster::{
    Dtype, RasterImage, DEPTH_MISS, MASK_INVALID, MASK_OCCLUDED, MASK_OUT_OF_FOV,
};
use crate::scene::Scene;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error(
        "LiDAR camera resolution {given} too low: adjacent beams share pixels, need at least {required}"
    )]
    LidarResolution { given: u32, required: u32 },
    #[error("invalid LiDAR spec: {0}")]
    InvalidLidarSpec(String),
    #[error("invalid stereo rig: baseline must be positive, got {0}")]
    InvalidBaseline(f64),
}

/// Default occlusion threshold: a warped point deeper than the test depth by
/// more than this is hidden behind nearer geometry.
pub const DEFAULT_TAU_OCC: f64 = 0.05;

/// Per-pixel 2-D displacement plus validity mask (bit flags; 0 = valid).
#[derive(Debug, Clone)]
pub struct FlowField {
    /// f32 x 2 raster of (fx, fy) in pixels.
    pub flow: RasterImage,
    /// u8 x 1 raster of mask flags.
    pub mask: RasterImage,
}

impl FlowField {
    pub fn valid_fraction(&self) -> f64 {
        let m = self.mask.as_u8().expect("mask is u8");
        let valid = m.iter().filter(|&&f| f == 0).count();
        valid as f64 / m.len() as f64
    }
}

/// Warps every reference pixel into the test view: unproject with the
/// reference depth, transform by inverse(pose_tst) . pose_ref, reproject.
/// Flow is the image-coordinate difference. Behind-camera points carry
/// MASK_INVALID, off-image projections MASK_OUT_OF_FOV, and points deeper
/// than the bilinearly interpolated test depth by more than `tau_occ`
/// MASK_OCCLUDED.
pub fn compute_flow(
    depth_ref: &RasterImage,
    pose_ref: &Pose,
    pose_tst: &Pose,
    depth_tst: &RasterImage,
    cam: &CameraModel,
    tau_occ: f64,
) -> Result<FlowField, LabelError> {
    if depth_ref.width != depth_tst.width
        || depth_ref.height != depth_tst.height
        || depth_ref.width != cam.width
        || depth_ref.height != cam.height
    {
        return Err(LabelError::SizeMismatch(
            depth_ref.width,
            depth_ref.height,
            depth_tst.width,
            depth_tst.height,
        ));
    }
    let rel = pose_tst.inverse().compose(pose_ref);
    let mut flow = RasterImage::zeros(cam.width, cam.height, 2, Dtype::F32);
    let mut mask = RasterImage::zeros(cam.width, cam.height, 1, Dtype::U8);
    let zbuf = depth_ref.as_f32().expect("depth is f32");

    for v in 0..cam.height {
        for u in 0..cam.width {
            let z = zbuf[(v * cam.width + u) as usize] as f64;
            if !(z > 0.0) || z >= DEPTH_MISS as f64 {
                mask.set_u8(u, v, 0, MASK_INVALID);
                continue;
            }
            let p_ref = cam.unproject(u as f64, v as f64, z).expect("z > 0");
            let p_tst = rel.transform_point(&p_ref);
            let proj = cam.project(&p_tst);
            match proj.status {
                ProjectionStatus::BehindCamera => {
                    // behind the test camera center: invalid, and by
                    // convention part of the out-of-FOV set for consumers
                    mask.set_u8(u, v, 0, MASK_INVALID);
                }
                ProjectionStatus::OutOfBounds => {
                    flow.set_f32(u, v, 0, (proj.u - u as f64) as f32);
                    flow.set_f32(u, v, 1, (proj.v - v as f64) as f32);
                    mask.set_u8(u, v, 0, MASK_OUT_OF_FOV);
                }
                ProjectionStatus::Valid => {
                    flow.set_f32(u, v, 0, (proj.u - u as f64) as f32);
                    flow.set_f32(u, v, 1, (proj.v - v as f64) as f32);
                    let d_tst = depth_tst.sample_bilinear_f32(proj.u, proj.v, 0) as f64;
                    if p_tst.z > d_tst + tau_occ {
                        mask.set_u8(u, v, 0, MASK_OCCLUDED);
                    }
                }
            }
        }
    }
    Ok(FlowField { flow, mask })
}

/// Rectified stereo pair sharing one camera model; the right camera is
/// displaced +x by `baseline` in the left camera frame.
#[derive(Debug, Clone, Copy)]
pub struct StereoRig {
    pub cam: CameraModel,
    pub baseline: f64,
}

impl StereoRig {
    pub fn new(cam: CameraModel, baseline: f64) -> Result<Self, LabelError> {
        if baseline <= 0.0 {
            return Err(LabelError::InvalidBaseline(baseline));
        }
        Ok(StereoRig { cam, baseline })
    }

    /// World pose of the right camera given the left camera pose.
    pub fn right_pose(&self, left: &Pose) -> Pose {
        left.compose(&Pose::from_translation(Vector3::new(self.baseline, 0.0, 0.0)))
    }
}

/// Disparity d = fx * baseline / z plus a mask from the left->right flow
/// machinery (the flow reduces to a horizontal shift of -d). Miss pixels get
/// disparity 0 with MASK_INVALID.
pub fn compute_disparity(
    depth_left: &RasterImage,
    depth_right: &RasterImage,
    rig: &StereoRig,
) -> Result<(RasterImage, RasterImage), LabelError> {
    let cam = &rig.cam;
    let left = Pose::identity();
    let right = rig.right_pose(&left);
    let field = compute_flow(depth_left, &left, &right, depth_right, cam, DEFAULT_TAU_OCC)?;

    let mut disparity = RasterImage::zeros(cam.width, cam.height, 1, Dtype::F32);
    let zbuf = depth_left.as_f32().expect("depth is f32");
    for v in 0..cam.height {
        for u in 0..cam.width {
            let z = zbuf[(v * cam.width + u) as usize] as f64;
            if z > 0.0 && z < DEPTH_MISS as f64 {
                disparity.set_f32(u, v, 0, (cam.fx * rig.baseline / z) as f32);
            }
        }
    }
    Ok((disparity, field.mask))
}

/// Spinning multi-line LiDAR simulated through four 90-degree-FOV depth
/// cameras covering the full azimuth circle.
#[derive(Debug, Clone)]
pub struct LidarSpec {
    pub n_lines: usize,
    /// Vertical field of view in degrees, low to high.
    pub vertical_fov_deg: (f64, f64),
    pub points_per_line: usize,
    pub max_range: f64,
    /// Side length of each square quadrant depth camera, pixels.
    pub cam_resolution: u32,
}

impl Default for LidarSpec {
    fn default() -> Self {
        LidarSpec {
            n_lines: 32,
            vertical_fov_deg: (-25.0, 15.0),
            points_per_line: 360,
            max_range: 60.0,
            cam_resolution: 512,
        }
    }
}

impl LidarSpec {
    /// Minimum quadrant-camera resolution so adjacent beams never land in
    /// the same pixel: the angular pixel pitch at the image center is 1/f
    /// with f = resolution/2.
    pub fn required_resolution(&self) -> u32 {
        let az_spacing = std::f64::consts::TAU / self.points_per_line as f64;
        let el_spacing = if self.n_lines > 1 {
            (self.vertical_fov_deg.1 - self.vertical_fov_deg.0).to_radians()
                / (self.n_lines - 1) as f64
        } else {
            f64::INFINITY
        };
        let min_spacing = az_spacing.min(el_spacing);
        (2.0 / min_spacing).ceil() as u32 + 1
    }

    fn validate(&self) -> Result<(), LabelError> {
        if self.n_lines < 1 {
            return Err(LabelError::InvalidLidarSpec("n_lines must be >= 1".into()));
        }
        if self.vertical_fov_deg.1 <= self.vertical_fov_deg.0 && self.n_lines > 1 {
            return Err(LabelError::InvalidLidarSpec(
                "vertical FOV must be increasing".into(),
            ));
        }
        let required = self.required_resolution();
        if self.cam_resolution < required {
            return Err(LabelError::LidarResolution {
                given: self.cam_resolution,
                required,
            });
        }
        Ok(())
    }
}

/// Sensor frame: x forward (camera z), y left (camera -x), z up (camera -y).
fn sensor_from_camera() -> UnitQuaternion<f64> {
    let m = Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0), // camera x -> sensor -y
        Vector3::new(0.0, 0.0, -1.0), // camera y -> sensor -z
        Vector3::new(1.0, 0.0, 0.0),  // camera z -> sensor +x
    ]);
    UnitQuaternion::from_matrix(&m)
}

/// Rotation taking quadrant-camera coordinates to sensor coordinates for the
/// quadrant centered at azimuth `yaw`.
fn quadrant_in_sensor(yaw: f64) -> Matrix3<f64> {
    let fwd = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
    let down = Vector3::new(0.0, 0.0, -1.0);
    Matrix3::from_columns(&[right, down, fwd])
}

/// Simulates one scan: renders four quadrant depth images at the sensor
/// position and extracts one range per (line, azimuth) beam by bilinear
/// interpolation over the four nearest depth pixels. Beams with no return or
/// beyond `max_range` are omitted. Returned points are sensor-frame.
pub fn simulate_lidar(
    scene: &Scene,
    pose: &Pose,
    spec: &LidarSpec,
) -> Result<Vec<Vector3<f64>>, LabelError> {
    spec.validate()?;
    let res = spec.cam_resolution;
    let half = res as f64 / 2.0;
    // 90-degree FOV spanning pixel coordinates 0..res-1: f chosen so the
    // outermost beam of each quadrant (+-45 deg) stays inside the image
    let f = (res as f64 - 1.0) / 2.0;
    let cam = CameraModel {
        fx: f,
        fy: f,
        cx: half - 0.5,
        cy: half - 0.5,
        width: res,
        height: res,
    };

    let world_from_sensor = pose.rotation() * sensor_from_camera().inverse();
    let sensor_pos = pose.translation();

    // render the 4 quadrant depth images
    let mut quad_depth = Vec::with_capacity(4);
    let mut quad_rot = Vec::with_capacity(4);
    for q in 0..4 {
        let yaw = std::f64::consts::FRAC_PI_2 * q as f64;
        let cam_in_sensor = quadrant_in_sensor(yaw);
        let rot = world_from_sensor * UnitQuaternion::from_matrix(&cam_in_sensor);
        let quad_pose = Pose::new(rot, sensor_pos);
        quad_depth.push(scene.render_depth(&quad_pose, &cam));
        quad_rot.push(cam_in_sensor);
    }

    let (el_lo, el_hi) = (
        spec.vertical_fov_deg.0.to_radians(),
        spec.vertical_fov_deg.1.to_radians(),
    );
    let mut points = Vec::new();
    for line in 0..spec.n_lines {
        let elevation = if spec.n_lines == 1 {
            (el_lo + el_hi) / 2.0
        } else {
            el_lo + (el_hi - el_lo) * line as f64 / (spec.n_lines - 1) as f64
        };
        for k in 0..spec.points_per_line {
            let azimuth = std::f64::consts::TAU * k as f64 / spec.points_per_line as f64;
            let dir_s = Vector3::new(
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            );
            // quadrant whose center is nearest in azimuth
            let q = ((azimuth + std::f64::consts::FRAC_PI_4) / std::f64::consts::FRAC_PI_2)
                .floor() as usize
                % 4;
            let dir_cam = quad_rot[q].transpose() * dir_s;
            debug_assert!(dir_cam.z > 0.0);
            let u = cam.fx * dir_cam.x / dir_cam.z + cam.cx;
            let v = cam.fy * dir_cam.y / dir_cam.z + cam.cy;
            if u < 0.0 || v < 0.0 || u > (res - 1) as f64 || v > (res - 1) as f64 {
                continue;
            }
            let z = quad_depth[q].sample_bilinear_f32(u, v, 0) as f64;
            if z >= DEPTH_MISS as f64 * 0.5 {
                continue; // one of the four pixels missed
            }
            // z-depth to Euclidean range along the exact beam direction
            let range = z / dir_cam.z;
            if range > spec.max_range {
                continue;
            }
            points.push(dir_s * range);
        }
    }
    Ok(points)
}
