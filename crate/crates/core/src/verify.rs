//! Automatic data verification: photometric warp check for pose/image
//! synchronization, occlusion-area screening, and collision screening.

use crate::labelgen::FlowField;
use crate::raster::{RasterImage, DEPTH_MISS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("no valid pixels to compare")]
    NoValidPixels,
}

/// Default occlusion-area fraction above which a frame is flagged.
pub const DEFAULT_THETA_OCC: f64 = 0.3;
/// Default minimum obstacle distance in meters.
pub const DEFAULT_COLLISION_THRESHOLD: f64 = 0.25;

/// Mean RGB-space Euclidean error between the reference image warped by the
/// ground-truth flow and the test image, over valid-mask pixels. Range is
/// [0, 255*sqrt(3)].
pub fn warp_photometric_error(
    rgb_ref: &RasterImage,
    rgb_tst: &RasterImage,
    flow: &FlowField,
) -> Result<f64, VerifyError> {
    if rgb_ref.width != rgb_tst.width
        || rgb_ref.height != rgb_tst.height
        || rgb_ref.width != flow.flow.width
        || rgb_ref.height != flow.flow.height
    {
        return Err(VerifyError::SizeMismatch(
            rgb_ref.width,
            rgb_ref.height,
            rgb_tst.width,
            rgb_tst.height,
        ));
    }
    let mask = flow.mask.as_u8().expect("mask is u8");
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for v in 0..rgb_ref.height {
        for u in 0..rgb_ref.width {
            if mask[(v * rgb_ref.width + u) as usize] != 0 {
                continue;
            }
            let tu = u as f64 + flow.flow.get_f32(u, v, 0) as f64;
            let tv = v as f64 + flow.flow.get_f32(u, v, 1) as f64;
            let mut e2 = 0.0f64;
            for c in 0..3 {
                let a = rgb_ref.get_u8(u, v, c) as f64;
                let b = rgb_tst.sample_bilinear_u8(tu, tv, c);
                e2 += (a - b) * (a - b);
            }
            sum += e2.sqrt();
            n += 1;
        }
    }
    if n == 0 {
        return Err(VerifyError::NoValidPixels);
    }
    Ok(sum / n as f64)
}

/// Fraction of pixels carrying any mask flag.
pub fn occlusion_fraction(flow: &FlowField) -> f64 {
    let m = flow.mask.as_u8().expect("mask is u8");
    if m.is_empty() {
        return 0.0;
    }
    m.iter().filter(|&&f| f != 0).count() as f64 / m.len() as f64
}

/// Minimum finite depth of a frame; infinity when nothing is visible.
pub fn min_finite_depth(depth: &RasterImage) -> f64 {
    depth
        .as_f32()
        .expect("depth is f32")
        .iter()
        .filter(|&&z| z < DEPTH_MISS)
        .fold(f64::INFINITY, |m, &z| m.min(z as f64))
}

/// Per-frame minimum finite depth plus a pass verdict against `threshold`.
pub fn collision_check(depths: &[RasterImage], threshold: f64) -> Vec<(f64, bool)> {
    depths
        .iter()
        .map(|d| {
            let m = min_finite_depth(d);
            (m, m >= threshold)
        })
        .collect()
}

/// One consecutive-pair row of the verification report.
#[derive(Debug, Clone)]
pub struct PairRecord {
    pub frame_ref: usize,
    pub frame_tst: usize,
    pub mean_error: f64,
    pub occlusion_fraction: f64,
    pub min_depth: f64,
    pub photometric_ok: bool,
    pub occlusion_ok: bool,
    pub collision_ok: bool,
}

impl PairRecord {
    pub fn all_ok(&self) -> bool {
        self.photometric_ok && self.occlusion_ok && self.collision_ok
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyThresholds {
    pub max_photometric_error: f64,
    pub theta_occ: f64,
    pub min_obstacle_distance: f64,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        VerifyThresholds {
            max_photometric_error: 5.0,
            theta_occ: DEFAULT_THETA_OCC,
            min_obstacle_distance: DEFAULT_COLLISION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub pairs: Vec<PairRecord>,
    pub thresholds: VerifyThresholds,
}

impl VerifyReport {
    pub fn max_error(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| m.max(p.mean_error))
    }

    pub fn passed(&self) -> bool {
        self.pairs.iter().all(PairRecord::all_ok)
    }

    /// Line-oriented plain text: one pair per line plus a summary footer.
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# ref tst mean_error occ_fraction min_depth photometric occlusion collision\n",
        );
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        for p in &self.pairs {
            out.push_str(&format!(
                "{} {} {:.6} {:.6} {:.6} {} {} {}\n",
                p.frame_ref,
                p.frame_tst,
                p.mean_error,
                p.occlusion_fraction,
                p.min_depth,
                verdict(p.photometric_ok),
                verdict(p.occlusion_ok),
                verdict(p.collision_ok),
            ));
        }
        out.push_str(&format!(
            "# summary pairs={} max_error={:.6} verdict={}\n",
            self.pairs.len(),
            self.max_error(),
            verdict(self.passed()),
        ));
        out
    }
}

/// Runs all three checks on a rendered sequence of consecutive frame pairs.
/// `frames[i]` supplies (rgb, depth); `flows[i]` maps frame i to frame i+1.
pub fn verify_sequence(
    rgbs: &[RasterImage],
    depths: &[RasterImage],
    flows: &[FlowField],
    thresholds: &VerifyThresholds,
) -> Result<VerifyReport, VerifyError> {
    let mut pairs = Vec::with_capacity(flows.len());
    for (i, flow) in flows.iter().enumerate() {
        let err = warp_photometric_error(&rgbs[i], &rgbs[i + 1], flow)?;
        let occ = occlusion_fraction(flow);
        let min_d = min_finite_depth(&depths[i]);
        pairs.push(PairRecord {
            frame_ref: i,
            frame_tst: i + 1,
            mean_error: err,
            occlusion_fraction: occ,
            min_depth: min_d,
            photometric_ok: err < thresholds.max_photometric_error,
            occlusion_ok: occ <= thresholds.theta_occ,
            collision_ok: min_d >= thresholds.min_obstacle_distance,
        });
    }
    Ok(VerifyReport {
        pairs,
        thresholds: *thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{look_at, CameraModel, Pose};
    use crate::labelgen::{compute_flow, DEFAULT_TAU_OCC};
    use crate::raster::{Dtype, MASK_OCCLUDED};
    use crate::scene::generate_scene;
    use nalgebra::Vector3;

    fn zero_flow(w: u32, h: u32) -> FlowField {
        FlowField {
            flow: RasterImage::zeros(w, h, 2, Dtype::F32),
            mask: RasterImage::zeros(w, h, 1, Dtype::U8),
        }
    }

    #[test]
    fn identical_images_zero_error() {
        let mut rgb = RasterImage::zeros(16, 16, 3, Dtype::U8);
        for (i, px) in rgb.as_u8_mut().unwrap().iter_mut().enumerate() {
            *px = (i % 251) as u8;
        }
        let err = warp_photometric_error(&rgb, &rgb, &zero_flow(16, 16)).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn constant_offset_invariance() {
        let mut a = RasterImage::zeros(16, 16, 3, Dtype::U8);
        for (i, px) in a.as_u8_mut().unwrap().iter_mut().enumerate() {
            *px = 50 + (i % 100) as u8;
        }
        let mut b = a.clone();
        for px in b.as_u8_mut().unwrap() {
            *px += 30;
        }
        let flow = zero_flow(16, 16);
        let base = warp_photometric_error(&a, &a, &flow).unwrap();
        let shifted = warp_photometric_error(&b, &b, &flow).unwrap();
        assert!((base - shifted).abs() < 1e-12);
    }

    #[test]
    fn all_masked_is_an_error() {
        let rgb = RasterImage::zeros(8, 8, 3, Dtype::U8);
        let mut flow = zero_flow(8, 8);
        for f in flow.mask.as_u8_mut().unwrap() {
            *f = MASK_OCCLUDED;
        }
        assert!(matches!(
            warp_photometric_error(&rgb, &rgb, &flow),
            Err(VerifyError::NoValidPixels)
        ));
    }

    #[test]
    fn occlusion_fraction_counts_flags() {
        let mut flow = zero_flow(10, 10);
        assert_eq!(occlusion_fraction(&flow), 0.0);
        for f in flow.mask.as_u8_mut().unwrap().iter_mut().take(50) {
            *f = MASK_OCCLUDED;
        }
        assert_eq!(occlusion_fraction(&flow), 0.5);
    }

    #[test]
    fn collision_check_verdicts() {
        let mut far = RasterImage::zeros(4, 4, 1, Dtype::F32);
        for z in far.as_f32_mut().unwrap() {
            *z = 5.0;
        }
        let mut near = far.clone();
        near.set_f32(2, 2, 0, 0.1);
        let out = collision_check(&[far, near], 0.25);
        assert_eq!(out[0], (5.0, true));
        assert!((out[1].0 - 0.1).abs() < 1e-7);
        assert!(!out[1].1);
    }

    #[test]
    fn empty_depth_passes() {
        let mut miss = RasterImage::zeros(4, 4, 1, Dtype::F32);
        for z in miss.as_f32_mut().unwrap() {
            *z = DEPTH_MISS;
        }
        let out = collision_check(&[miss], 0.25);
        assert!(out[0].1);
        assert!(out[0].0.is_infinite());
    }

    #[test]
    fn rendered_pair_warp_error_small_and_desync_large() {
        let scene = generate_scene(3);
        let cam = CameraModel::with_fov(90.0, 96);
        let mut poses = Vec::new();
        for i in 0..8 {
            let t = i as f64 * 0.15;
            let eye = Vector3::new(-1.0 + t, 0.2 * t, 1.5);
            poses.push(look_at(eye, Vector3::new(5.0, 0.0, 1.5)));
        }
        let rgbs: Vec<_> = poses.iter().map(|p| scene.render_rgb(p, &cam)).collect();
        let depths: Vec<_> = poses.iter().map(|p| scene.render_depth(p, &cam)).collect();

        let flow_sync =
            compute_flow(&depths[0], &poses[0], &poses[1], &depths[1], &cam, DEFAULT_TAU_OCC)
                .unwrap();
        let e_sync = warp_photometric_error(&rgbs[0], &rgbs[1], &flow_sync).unwrap();
        assert!(e_sync < 5.0, "synchronized error {e_sync}");

        // desynchronize: flow from poses 0->1 but compare against image 6
        let e_desync = warp_photometric_error(&rgbs[0], &rgbs[6], &flow_sync).unwrap();
        assert!(
            e_desync > 3.0 * e_sync.max(0.2),
            "desync {e_desync} vs sync {e_sync}"
        );
    }

    #[test]
    fn report_text_roundtrip_shape() {
        let rec = PairRecord {
            frame_ref: 0,
            frame_tst: 1,
            mean_error: 1.25,
            occlusion_fraction: 0.1,
            min_depth: 2.0,
            photometric_ok: true,
            occlusion_ok: true,
            collision_ok: false,
        };
        let report = VerifyReport {
            pairs: vec![rec],
            thresholds: VerifyThresholds::default(),
        };
        assert!(!report.passed());
        let text = report.to_text();
        assert!(text.contains("0 1 1.250000"));
        assert!(text.contains("verdict=FAIL"));
        assert_eq!(text.lines().count(), 3);
    }
}
