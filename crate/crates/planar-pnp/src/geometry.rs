//! Camera model, coordinate conventions, and forward projection.
//!
//! Conventions used throughout the crate:
//!
//! * World `z` is up; the camera origin moves in the world `xy`-plane, so a
//!   camera pose is `(x, y, theta)` with `theta` the in-plane heading.
//! * The mounting offset `C` (a full 3D rotation) is factored into ZYZ Euler
//!   angles `(alpha, beta, gamma)`. `alpha` is absorbed into the planar pose,
//!   `gamma` is removed by pre-rotating the image points ([`rectify`]), and
//!   only the pitch `beta` enters the projection model.
//! * With `theta = 0`, `beta = pi/2`, `gamma = 0` the optical axis points
//!   along world `-x`. Visible points have `depth > 0` as returned by
//!   [`project`].

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Guard band around the ZYZ gimbal degeneracy (`beta` near 0 or pi).
pub const BETA_DEGENERACY_EPS: f64 = 1e-9;

/// Points closer than this to the camera's principal plane cannot be
/// projected.
pub const DEPTH_SINGULARITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// `|sin(beta)|` is below the guard band: the camera axis is perpendicular
    /// to the plane of motion and the planar heading is undefined.
    DegenerateRotation { sin_beta: f64 },
    /// The point lies on the camera's principal plane (projective depth ~ 0).
    ProjectionSingular { depth: f64 },
    /// The supplied matrix is not a proper rotation.
    NotARotation { deviation: f64 },
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::DegenerateRotation { sin_beta } => write!(
                f,
                "camera pitch is degenerate for planar pose (|sin beta| = {:.3e})",
                sin_beta.abs()
            ),
            GeometryError::ProjectionSingular { depth } => {
                write!(f, "point on the camera's principal plane (depth = {depth:.3e})")
            }
            GeometryError::NotARotation { deviation } => write!(
                f,
                "matrix is not orthonormal with determinant +1 (deviation = {deviation:.3e})"
            ),
        }
    }
}

impl std::error::Error for GeometryError {}

/// A known 3D point, `z` measured above the plane of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Raw pixel observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Observation on the normalized image plane (third homogeneous coordinate
/// fixed at 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedImagePoint {
    pub qx: f64,
    pub qy: f64,
}

impl NormalizedImagePoint {
    pub fn new(qx: f64, qy: f64) -> Self {
        Self { qx, qy }
    }
}

/// Pinhole intrinsics; `fx`, `fy` in pixels, principal point `(cx, cy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }
}

/// Planar camera pose: position in the world plane plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, wrapped to `(-pi, pi]`.
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }
}

/// One world point paired with its (already gamma-rectified) normalized
/// image observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: WorldPoint,
    pub image: NormalizedImagePoint,
}

/// The known mounting rotation `C` together with its ZYZ factorization.
///
/// The stored rotation is the recomposition `Rz(alpha) * Ry(beta) * Rz(gamma)`
/// of the extracted angles, so the factorization identity holds to roundoff
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraOffset {
    rotation: Matrix3<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl CameraOffset {
    /// Builds the offset from a rotation matrix.
    ///
    /// `tolerance` bounds the accepted deviation from orthonormality; the
    /// stored matrix is the ZYZ recomposition, which is exactly orthonormal.
    pub fn from_rotation(rotation: &Matrix3<f64>, tolerance: f64) -> Result<Self, GeometryError> {
        let deviation = rotation_deviation(rotation);
        if !deviation.is_finite() || deviation > tolerance {
            return Err(GeometryError::NotARotation { deviation });
        }
        let (alpha, beta, gamma) = zyz_decompose(rotation)?;
        Ok(Self { rotation: rot_z(alpha) * rot_y(beta) * rot_z(gamma), alpha, beta, gamma })
    }

    /// Builds the offset from ZYZ angles directly.
    pub fn from_angles(alpha: f64, beta: f64, gamma: f64) -> Result<Self, GeometryError> {
        let sin_beta = beta.sin();
        if sin_beta.abs() < BETA_DEGENERACY_EPS || !(0.0..std::f64::consts::PI).contains(&beta) {
            return Err(GeometryError::DegenerateRotation { sin_beta });
        }
        Ok(Self { rotation: rot_z(alpha) * rot_y(beta) * rot_z(gamma), alpha, beta, gamma })
    }

    /// Builds the offset from a (not necessarily normalized) quaternion.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::NotARotation { deviation: f64::INFINITY });
        }
        let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        Self::from_rotation(&rotation, 1e-9)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// An image observation lifted to the plane-aligned camera frame.
///
/// `Ry(beta) * [qx', qy', 1]` written in spherical form. The ray points from
/// the observed object toward the camera, so `elevation` has the opposite
/// sign of the object's height for consistent data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedRay {
    /// Azimuth of the ray in the plane-aligned camera frame (radians).
    pub azimuth: f64,
    /// Elevation of the ray above the plane of motion (radians).
    pub elevation: f64,
    /// Ray norm; always >= 1 because the homogeneous coordinate is 1.
    pub norm: f64,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut wrapped = theta.rem_euclid(two_pi);
    if wrapped > std::f64::consts::PI {
        wrapped -= two_pi;
    }
    wrapped
}

/// Rotation about the z-axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about the y-axis.
pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Max deviation of `r` from a proper rotation: entrywise `|r^T r - I|` and
/// `|det r - 1|`.
pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    gram.amax().max((r.determinant() - 1.0).abs())
}

/// Extracts ZYZ Euler angles `(alpha, beta, gamma)` with `beta` in `(0, pi)`
/// from a proper rotation, such that `Rz(alpha) Ry(beta) Rz(gamma)`
/// reproduces the input.
pub fn zyz_decompose(rotation: &Matrix3<f64>) -> Result<(f64, f64, f64), GeometryError> {
    let cos_beta = rotation[(2, 2)].clamp(-1.0, 1.0);
    let sin_beta = (1.0 - cos_beta * cos_beta).sqrt();
    if sin_beta < BETA_DEGENERACY_EPS {
        return Err(GeometryError::DegenerateRotation { sin_beta });
    }
    let beta = cos_beta.acos();
    let alpha = rotation[(1, 2)].atan2(rotation[(0, 2)]);
    let gamma = rotation[(2, 1)].atan2(-rotation[(2, 0)]);
    Ok((alpha, beta, gamma))
}

/// Pre-rotates a raw normalized observation by `Rz(gamma)` so the solver can
/// assume `gamma = 0`. The homogeneous third coordinate stays exactly 1.
pub fn rectify(q: NormalizedImagePoint, gamma: f64) -> NormalizedImagePoint {
    let (s, c) = gamma.sin_cos();
    NormalizedImagePoint::new(c * q.qx - s * q.qy, s * q.qx + c * q.qy)
}

/// Lifts a rectified observation into the plane-aligned camera frame:
/// `v = Ry(beta) * [qx', qy', 1]` expressed as azimuth, elevation and norm.
pub fn spherical_ray(q_prime: NormalizedImagePoint, beta: f64) -> RectifiedRay {
    let v = rot_y(beta) * Vector3::new(q_prime.qx, q_prime.qy, 1.0);
    let norm = v.norm();
    RectifiedRay {
        azimuth: v.y.atan2(v.x),
        elevation: (v.z / norm).asin(),
        norm,
    }
}

/// Projects a world point through the planar camera model.
///
/// Returns the normalized image coordinates and the projective depth; the
/// point is in front of the camera iff `depth > 0`.
pub fn project(
    pose: Pose2D,
    beta: f64,
    p: WorldPoint,
) -> Result<(NormalizedImagePoint, f64), GeometryError> {
    let (sin_t, cos_t) = pose.theta.sin_cos();
    let (sin_b, cos_b) = beta.sin_cos();
    let dx = pose.x - p.x;
    let dy = pose.y - p.y;
    let along = dx * cos_t + dy * sin_t;
    let depth = along * sin_b - p.z * cos_b;
    if depth.abs() < DEPTH_SINGULARITY_EPS {
        return Err(GeometryError::ProjectionSingular { depth });
    }
    let qx = (along * cos_b + p.z * sin_b) / depth;
    let qy = (dy * cos_t - dx * sin_t) / depth;
    Ok((NormalizedImagePoint::new(qx, qy), depth))
}

/// Maps a pixel observation to the normalized image plane.
pub fn normalize(intr: &Intrinsics, pix: PixelPoint) -> NormalizedImagePoint {
    NormalizedImagePoint::new((pix.u - intr.cx) / intr.fx, (pix.v - intr.cy) / intr.fy)
}

/// Exact inverse of [`normalize`].
pub fn denormalize(intr: &Intrinsics, q: NormalizedImagePoint) -> PixelPoint {
    PixelPoint::new(q.qx * intr.fx + intr.cx, q.qy * intr.fy + intr.cy)
}
