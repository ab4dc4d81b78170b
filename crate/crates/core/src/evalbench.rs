//! Trajectory benchmark: ATE, RPE, similarity alignment (scale correction),
//! success rate, and fixed-length sequence cutting.

use crate::geom::Pose;
use nalgebra::{Matrix3, Vector3, SVD};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} poses, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate point set: all positions coincide")]
    Degenerate,
    #[error("no sequence outcomes supplied")]
    EmptyOutcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Rigid alignment, scale fixed at 1.
    Se3,
    /// Similarity alignment with uniform scale (monocular scale correction).
    Sim3,
    None,
}

/// Similarity transform mapping estimate positions onto ground truth:
/// p_gt ~= scale * rotation * p_est + translation.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Alignment {
    pub fn identity() -> Self {
        Alignment {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Closed-form least-squares alignment of `est` onto `gt` (Umeyama).
pub fn align_similarity(
    est: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    mode: AlignMode,
) -> Result<Alignment, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::LengthMismatch(est.len(), gt.len()));
    }
    if mode == AlignMode::None {
        return Ok(Alignment::identity());
    }
    let n = est.len();
    if n < 3 {
        return Err(EvalError::TooShort { needed: 3, got: n });
    }
    let mean_e: Vector3<f64> = est.iter().sum::<Vector3<f64>>() / n as f64;
    let mean_g: Vector3<f64> = gt.iter().sum::<Vector3<f64>>() / n as f64;

    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for i in 0..n {
        let de = est[i] - mean_e;
        let dg = gt[i] - mean_g;
        cov += dg * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= n as f64;
    var_e /= n as f64;
    if var_e < 1e-24 {
        return Err(EvalError::Degenerate);
    }

    let svd = SVD::new(cov, true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * vt;
    let scale = match mode {
        AlignMode::Sim3 => {
            let trace_ds = svd.singular_values[0] * s[(0, 0)]
                + svd.singular_values[1] * s[(1, 1)]
                + svd.singular_values[2] * s[(2, 2)];
            trace_ds / var_e
        }
        _ => 1.0,
    };
    let translation = mean_g - scale * (rotation * mean_e);
    Ok(Alignment {
        scale,
        rotation,
        translation,
    })
}

fn positions(poses: &[Pose]) -> Vec<Vector3<f64>> {
    poses.iter().map(|p| p.translation()).collect()
}

fn rmse(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// RMSE of position differences after aligning `est` onto `gt`.
pub fn ate(est: &[Pose], gt: &[Pose], mode: AlignMode) -> Result<f64, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::LengthMismatch(est.len(), gt.len()));
    }
    if est.is_empty() {
        return Err(EvalError::TooShort { needed: 1, got: 0 });
    }
    let pe = positions(est);
    let pg = positions(gt);
    let align = align_similarity(&pe, &pg, mode)?;
    Ok(rmse(
        pe.iter().zip(&pg).map(|(e, g)| (align.apply(e) - g).norm()),
    ))
}

/// Relative pose error over consecutive frames: the residual transform
/// between the estimated and ground-truth per-step motions, aggregated as
/// (RMSE of translation norm in meters, RMSE of rotation angle in degrees).
pub fn rpe(est: &[Pose], gt: &[Pose]) -> Result<(f64, f64), EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::LengthMismatch(est.len(), gt.len()));
    }
    if est.len() < 2 {
        return Err(EvalError::TooShort {
            needed: 2,
            got: est.len(),
        });
    }
    let mut trans = Vec::with_capacity(est.len() - 1);
    let mut rot = Vec::with_capacity(est.len() - 1);
    for i in 0..est.len() - 1 {
        let d_gt = gt[i].inverse().compose(&gt[i + 1]);
        let d_est = est[i].inverse().compose(&est[i + 1]);
        let e = d_gt.inverse().compose(&d_est);
        trans.push(e.translation().norm());
        rot.push(e.rotation().angle().to_degrees());
    }
    Ok((rmse(trans.into_iter()), rmse(rot.into_iter())))
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub ate: f64,
    pub rpe_t: f64,
    pub rpe_r: f64,
    pub aligned: bool,
    pub scale: f64,
}

/// Full metric set for one estimated trajectory against ground truth.
pub fn evaluate(est: &[Pose], gt: &[Pose], mode: AlignMode) -> Result<EvalResult, EvalError> {
    let scale = if mode == AlignMode::None {
        1.0
    } else {
        align_similarity(&positions(est), &positions(gt), mode)?.scale
    };
    Ok(EvalResult {
        ate: ate(est, gt, mode)?,
        rpe_t: rpe(est, gt)?.0,
        rpe_r: rpe(est, gt)?.1,
        aligned: mode != AlignMode::None,
        scale,
    })
}

/// A fixed-length window cut from a longer source sequence.
#[derive(Debug, Clone)]
pub struct SequenceWindow<T> {
    pub source_id: usize,
    pub start: usize,
    pub frames: Vec<T>,
}

/// Partitions each input sequence into consecutive non-overlapping windows of
/// exactly `length` frames, discarding shorter remainders.
pub fn cut_sequences<T: Clone>(sequences: &[Vec<T>], length: usize) -> Vec<SequenceWindow<T>> {
    assert!(length > 0, "window length must be positive");
    let mut out = Vec::new();
    for (source_id, seq) in sequences.iter().enumerate() {
        let mut start = 0;
        while start + length <= seq.len() {
            out.push(SequenceWindow {
                source_id,
                start,
                frames: seq[start..start + length].to_vec(),
            });
            start += length;
        }
    }
    out
}

/// Whether an external SLAM system completed a sequence without losing track.
#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub id: String,
    pub tracked: bool,
}

/// Ratio of non-lost sequences to total.
pub fn success_rate(outcomes: &[SequenceOutcome]) -> Result<f64, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyOutcomes);
    }
    let tracked = outcomes.iter().filter(|o| o.tracked).count();
    Ok(tracked as f64 / outcomes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_trajectory(seed: u64, n: usize) -> Vec<Pose> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut poses = vec![Pose::identity()];
        for _ in 1..n {
            let prev = poses.last().unwrap().clone();
            let dt = Vector3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.2..0.2),
            );
            let dq = UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            ));
            poses.push(prev.compose(&Pose::new(dq, dt)));
        }
        poses
    }

    #[test]
    fn identity_alignment_for_equal_sets() {
        let pts: Vec<Vector3<f64>> = (0..10)
            .map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.1, -(i as f64)))
            .collect();
        let a = align_similarity(&pts, &pts, AlignMode::Sim3).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-12);
        assert!((a.rotation - Matrix3::identity()).norm() < 1e-9);
        assert!(a.translation.norm() < 1e-9);
    }

    #[test]
    fn sim3_recovers_double_scale() {
        let gt: Vec<Vector3<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                Vector3::new(t.cos(), t.sin(), 0.1 * t)
            })
            .collect();
        let est: Vec<Vector3<f64>> = gt.iter().map(|p| p * 2.0).collect();
        let a = align_similarity(&est, &gt, AlignMode::Sim3).unwrap();
        assert!((a.scale - 0.5).abs() < 1e-12);
        let residual = rmse(est.iter().zip(&gt).map(|(e, g)| (a.apply(e) - g).norm()));
        assert!(residual < 1e-9);
    }

    #[test]
    fn synthesize_then_recover_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..10 {
            let gt: Vec<Vector3<f64>> = (0..30)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                    )
                })
                .collect();
            let rot = UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            )
            .to_rotation_matrix()
            .into_inner();
            let scale: f64 = rng.gen_range(0.2..5.0);
            let shift = Vector3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            );
            // est is gt pushed through the inverse similarity
            let est: Vec<Vector3<f64>> = gt
                .iter()
                .map(|g| rot.transpose() * ((g - shift) / scale))
                .collect();
            let a = align_similarity(&est, &gt, AlignMode::Sim3).unwrap();
            let residual = rmse(est.iter().zip(&gt).map(|(e, g)| (a.apply(e) - g).norm()));
            assert!(residual < 1e-9, "residual {residual}");
        }
    }

    #[test]
    fn degenerate_set_rejected() {
        let pts = vec![Vector3::new(1.0, 1.0, 1.0); 10];
        assert!(matches!(
            align_similarity(&pts, &pts, AlignMode::Se3),
            Err(EvalError::Degenerate)
        ));
    }

    #[test]
    fn ate_zero_and_shift_cases() {
        let gt = random_trajectory(1, 50);
        assert!(ate(&gt, &gt, AlignMode::Se3).unwrap() < 1e-12);

        let shifted: Vec<Pose> = gt
            .iter()
            .map(|p| Pose::new(p.rotation(), p.translation() + Vector3::x()))
            .collect();
        assert!(ate(&shifted, &gt, AlignMode::Se3).unwrap() < 1e-9);
        assert!((ate(&shifted, &gt, AlignMode::None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ate_single_displaced_frame() {
        let mut gt = Vec::new();
        for i in 0..100 {
            gt.push(Pose::from_translation(Vector3::new(i as f64 * 0.1, 0.0, 0.0)));
        }
        let mut est = gt.clone();
        est[40] = Pose::from_translation(est[40].translation() + Vector3::new(0.0, 1.0, 0.0));
        let e = ate(&est, &gt, AlignMode::None).unwrap();
        assert!((e - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rpe_zero_and_global_transform_invariance() {
        let gt = random_trajectory(2, 60);
        let (t, r) = rpe(&gt, &gt).unwrap();
        assert!(t < 1e-12 && r < 1e-12);

        let g = Pose::new(
            UnitQuaternion::from_euler_angles(0.4, -0.2, 1.1),
            Vector3::new(3.0, -7.0, 2.0),
        );
        let moved: Vec<Pose> = gt.iter().map(|p| g.compose(p)).collect();
        let (t, r) = rpe(&moved, &gt).unwrap();
        assert!(t < 1e-9, "rpe_t {t}");
        assert!(r < 1e-9, "rpe_r {r}");
    }

    #[test]
    fn rpe_step_length_arithmetic() {
        let mut gt = Vec::new();
        let mut est = Vec::new();
        for i in 0..10 {
            gt.push(Pose::from_translation(Vector3::new(i as f64, 0.0, 0.0)));
            est.push(Pose::from_translation(Vector3::new(i as f64 * 1.1, 0.0, 0.0)));
        }
        let (t, r) = rpe(&est, &gt).unwrap();
        assert!((t - 0.1).abs() < 1e-9);
        assert!(r < 1e-12);
    }

    #[test]
    fn length_mismatch_errors() {
        let a = random_trajectory(3, 10);
        let b = random_trajectory(3, 11);
        assert!(matches!(
            ate(&a, &b, AlignMode::Se3),
            Err(EvalError::LengthMismatch(10, 11))
        ));
        assert!(matches!(rpe(&a, &b), Err(EvalError::LengthMismatch(..))));
    }

    #[test]
    fn ate_monotone_in_noise() {
        let gt = random_trajectory(5, 120);
        let mut prev = 0.0;
        for (k, mag) in [0.0, 0.05, 0.2, 0.8].iter().enumerate() {
            let mut acc = 0.0;
            for seed in 0..5u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let est: Vec<Pose> = gt
                    .iter()
                    .map(|p| {
                        let noise = Vector3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        ) * *mag;
                        Pose::new(p.rotation(), p.translation() + noise)
                    })
                    .collect();
                acc += ate(&est, &gt, AlignMode::Se3).unwrap();
            }
            let mean = acc / 5.0;
            if k > 0 {
                assert!(mean + 1e-6 >= prev, "ATE decreased with more noise");
            }
            prev = mean;
        }
    }

    #[test]
    fn cut_windows() {
        let seq: Vec<usize> = (0..700).collect();
        let windows = cut_sequences(&[seq], 200);
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[0].start, 0);
        assert_eq!(windows[1].start, 200);
        assert_eq!(windows[2].start, 400);
        assert_eq!(windows[2].frames[0], 400);
        assert_eq!(windows[2].frames.len(), 200);

        let short: Vec<usize> = (0..150).collect();
        assert!(cut_sequences(&[short], 200).is_empty());
    }

    #[test]
    fn cut_counting_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seqs: Vec<Vec<u8>> = (0..12)
            .map(|_| vec![0u8; rng.gen_range(0..900)])
            .collect();
        let windows = cut_sequences(&seqs, 200);
        let emitted: usize = windows.iter().map(|w| w.frames.len()).sum();
        let expected: usize = seqs.iter().map(|s| (s.len() / 200) * 200).sum();
        assert_eq!(emitted, expected);
    }

    #[test]
    fn success_rate_arithmetic() {
        let outcomes: Vec<SequenceOutcome> = (0..10)
            .map(|i| SequenceOutcome {
                id: format!("seq{i}"),
                tracked: i >= 3,
            })
            .collect();
        assert!((success_rate(&outcomes).unwrap() - 0.7).abs() < 1e-12);
        let all: Vec<SequenceOutcome> = outcomes
            .iter()
            .map(|o| SequenceOutcome {
                id: o.id.clone(),
                tracked: true,
            })
            .collect();
        assert_eq!(success_rate(&all).unwrap(), 1.0);
        assert!(matches!(success_rate(&[]), Err(EvalError::EmptyOutcomes)));
    }

    #[test]
    fn ate_sim3_invariant_to_similarity_of_estimate() {
        let gt = random_trajectory(8, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let est: Vec<Pose> = gt
            .iter()
            .map(|p| {
                let noise = Vector3::new(
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                );
                Pose::new(p.rotation(), p.translation() + noise)
            })
            .collect();
        let base = ate(&est, &gt, AlignMode::Sim3).unwrap();
        let g = Pose::new(
            UnitQuaternion::from_euler_angles(1.0, 0.2, -0.5),
            Vector3::new(4.0, 4.0, -1.0),
        );
        let warped: Vec<Pose> = est
            .iter()
            .map(|p| {
                let moved = g.compose(p);
                Pose::new(moved.rotation(), moved.translation() * 3.0)
            })
            .collect();
        let after = ate(&warped, &gt, AlignMode::Sim3).unwrap();
        assert!((base - after).abs() < 1e-9, "{base} vs {after}");
    }
}
