//! Motion-pattern diversity: per-frame motion matrices, principal motion
//! components, the diversity metric sigma, and principal-space projections.

use crate::geom::{so3_log, Pose};
use nalgebra::{Matrix3, Matrix3xX};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 poses, got {0}")]
    TooFewPoses(usize),
}

/// Frame in which per-pair translation deltas are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaFrame {
    World,
    /// Deltas expressed in the earlier frame's camera frame (default).
    Body,
}

/// Columns of per-frame translation and rotation (so(3)) deltas.
#[derive(Debug, Clone)]
pub struct MotionMatrices {
    pub translations: Matrix3xX<f64>,
    pub rotations: Matrix3xX<f64>,
}

pub fn motion_matrices(
    poses: &[Pose],
    delta_frame: DeltaFrame,
) -> Result<MotionMatrices, StatsError> {
    if poses.len() < 2 {
        return Err(StatsError::TooFewPoses(poses.len()));
    }
    let n = poses.len() - 1;
    let mut t = Matrix3xX::zeros(n);
    let mut r = Matrix3xX::zeros(n);
    for i in 0..n {
        let dp_world = poses[i + 1].translation() - poses[i].translation();
        let dt = match delta_frame {
            DeltaFrame::World => dp_world,
            DeltaFrame::Body => poses[i].rotation().inverse() * dp_world,
        };
        let dq = poses[i].rotation().inverse() * poses[i + 1].rotation();
        t.set_column(i, &dt);
        r.set_column(i, &so3_log(&dq));
    }
    Ok(MotionMatrices {
        translations: t,
        rotations: r,
    })
}

/// One half (translation or rotation) of the principal-motion decomposition.
#[derive(Debug, Clone)]
pub struct PrincipalMotion {
    /// Singular values in descending order.
    pub values: [f64; 3],
    /// Left singular vectors as columns, orthonormal.
    pub basis: Matrix3<f64>,
}

/// SVD of M without mean subtraction, as left singular values/vectors of M,
/// i.e. the eigendecomposition of M*M^T. Zero matrix yields zero values with
/// an identity basis.
pub fn principal_motion(m: &Matrix3xX<f64>) -> PrincipalMotion {
    let gram = m * m.transpose();
    if gram.norm() < 1e-300 {
        return PrincipalMotion {
            values: [0.0; 3],
            basis: Matrix3::identity(),
        };
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    // sort eigenpairs descending
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = [0.0; 3];
    let mut basis = Matrix3::zeros();
    for (k, &i) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[i].max(0.0).sqrt();
        basis.set_column(k, &eig.eigenvectors.column(i).into_owned());
    }
    // fix a right-handed basis for reproducibility
    if basis.determinant() < 0.0 {
        let c = -basis.column(2).into_owned();
        basis.set_column(2, &c);
    }
    PrincipalMotion { values, basis }
}

fn sigma_term(v: &[f64; 3]) -> f64 {
    if v[0] <= 0.0 {
        0.0
    } else {
        (v[1] * v[2]).sqrt() / v[0]
    }
}

/// Diversity metric: the mean, over translation and rotation, of
/// sqrt(s2*s3)/s1 of the principal motion singular values. Ranges [0, 1];
/// 0 for rank-1 motion, 1 for isotropic motion.
pub fn diversity_sigma(poses: &[Pose]) -> Result<f64, StatsError> {
    let m = motion_matrices(poses, DeltaFrame::Body)?;
    let pt = principal_motion(&m.translations);
    let pr = principal_motion(&m.rotations);
    Ok(0.5 * (sigma_term(&pt.values) + sigma_term(&pr.values)))
}

/// Projects motion columns onto a principal basis: U^T * M.
pub fn project_motions(m: &Matrix3xX<f64>, principal: &PrincipalMotion) -> Matrix3xX<f64> {
    principal.basis.transpose() * m
}
