//! Reprojection residuals, total squared error, and the analytic Jacobian
//! with respect to `(x, y, theta)`.

use crate::geometry::{self, Correspondence, GeometryError, Pose2D};

/// Stacked residuals, ordered `(r_1x, r_1y, r_2x, r_2y, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
}

impl ResidualVector {
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|r| r * r).sum()
    }
}

/// Row-major 2n x 3 Jacobian; columns ordered `(d/dx, d/dy, d/dtheta)`.
/// Row `2i` differentiates `r_ix`, row `2i + 1` differentiates `r_iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub rows: Vec<[f64; 3]>,
}

/// Residuals of the observed (rectified) image points against the projections
/// under `pose`.
pub fn residuals(
    pose: Pose2D,
    beta: f64,
    corrs: &[Correspondence],
) -> Result<ResidualVector, GeometryError> {
    let mut values = Vec::with_capacity(2 * corrs.len());
    for corr in corrs {
        let (q, _) = geometry::project(pose, beta, corr.world)?;
        values.push(corr.image.qx - q.qx);
        values.push(corr.image.qy - q.qy);
    }
    Ok(ResidualVector { values })
}

/// Sum of squared residuals.
pub fn error(pose: Pose2D, beta: f64, corrs: &[Correspondence]) -> Result<f64, GeometryError> {
    Ok(residuals(pose, beta, corrs)?.squared_norm())
}

/// Closed-form partial derivatives of every residual component.
///
/// With `A = dx cos t + dy sin t`, `w = dy cos t - dx sin t` and depth
/// `d = A sin b - pz cos b`, the quotient rule collapses to
/// `d(rx)/d(x,y,t) = pz / d^2 * (cos t, sin t, w)` because the numerator and
/// denominator of the x-residual differ only in the `(cos b, sin b)` mix.
pub fn jacobian(
    pose: Pose2D,
    beta: f64,
    corrs: &[Correspondence],
) -> Result<JacobianMatrix, GeometryError> {
    let mut rows = Vec::with_capacity(2 * corrs.len());
    append_rows(pose, beta, corrs, &mut rows)?;
    Ok(JacobianMatrix { rows })
}

/// Residuals and Jacobian in a single pass; the refiner's inner loop.
pub fn residuals_and_jacobian(
    pose: Pose2D,
    beta: f64,
    corrs: &[Correspondence],
) -> Result<(ResidualVector, JacobianMatrix), GeometryError> {
    let residuals = residuals(pose, beta, corrs)?;
    let jacobian = jacobian(pose, beta, corrs)?;
    Ok((residuals, jacobian))
}

fn append_rows(
    pose: Pose2D,
    beta: f64,
    corrs: &[Correspondence],
    rows: &mut Vec<[f64; 3]>,
) -> Result<(), GeometryError> {
    let (sin_t, cos_t) = pose.theta.sin_cos();
    let (sin_b, cos_b) = beta.sin_cos();
    for corr in corrs {
        let p = corr.world;
        let dx = pose.x - p.x;
        let dy = pose.y - p.y;
        let along = dx * cos_t + dy * sin_t;
        let across = dy * cos_t - dx * sin_t;
        let depth = along * sin_b - p.z * cos_b;
        if depth.abs() < geometry::DEPTH_SINGULARITY_EPS {
            return Err(GeometryError::ProjectionSingular { depth });
        }
        let inv_d2 = 1.0 / (depth * depth);
        rows.push([
            cos_t * p.z * inv_d2,
            sin_t * p.z * inv_d2,
            across * p.z * inv_d2,
        ]);
        rows.push([
            (across * cos_t * sin_b + sin_t * depth) * inv_d2,
            (across * sin_t * sin_b - cos_t * depth) * inv_d2,
            (across * across * sin_b + along * depth) * inv_d2,
        ]);
    }
    Ok(())
}
