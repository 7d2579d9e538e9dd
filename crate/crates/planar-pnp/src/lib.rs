//! Planar perspective-n-point: estimate the pose `(x, y, theta)` of a
//! camera constrained to move in the world `xy`-plane from n 3D-to-2D point
//! correspondences.
//!
//! The pipeline normalizes and gamma-rectifies the observations, enumerates
//! candidate positions as the real roots of two Sylvester resultants of the
//! linearized elevation error's gradient cubics, attaches harmonic-addition
//! heading candidates, ranks everything by reprojection error and refines
//! the winner with Levenberg-Marquardt. A heading prior (e.g. from an IMU)
//! replaces the polynomial stage with a linear least-squares position fit.
//!
//! ```
//! use planar_pnp::prelude::*;
//!
//! # fn main() {
//! let offset = CameraOffset::from_angles(0.0, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
//! let world_points = vec![
//!     WorldPoint::new(-5.0, 0.0, 0.0),
//!     WorldPoint::new(-5.0, 1.0, 0.5),
//!     WorldPoint::new(-6.0, -1.0, 1.0),
//!     WorldPoint::new(-4.0, 0.5, -0.5),
//! ];
//! let intrinsics = Intrinsics::new(800.0, 800.0, 0.0, 0.0);
//! let pixels: Vec<PixelPoint> = world_points
//!     .iter()
//!     .map(|&p| {
//!         let (q, _) = planar_pnp::geometry::project(Pose2D::new(0.0, 0.0, 0.0), offset.beta(), p).unwrap();
//!         planar_pnp::geometry::denormalize(&intrinsics, q)
//!     })
//!     .collect();
//! let request = SolveRequest {
//!     world_points,
//!     pixels,
//!     intrinsics,
//!     camera_offset: offset,
//!     heading_prior: None,
//!     refine_options: RefineOptions::default(),
//! };
//! let solution = planar_pnp::solve(&request).unwrap();
//! assert!(solution.pose.x.abs() < 1e-8);
//! # }
//! ```

pub mod geometry;
pub mod harness;
pub mod initializer;
pub mod polysolve;
pub mod refiner;
pub mod reprojection;
pub mod solver;

pub use solver::{solve, SolveError, SolveRequest, Solution};

/// The types most callers need.
pub mod prelude {
    pub use crate::geometry::{
        CameraOffset, Correspondence, Intrinsics, NormalizedImagePoint, PixelPoint, Pose2D,
        RectifiedRay, WorldPoint,
    };
    pub use crate::refiner::{RefineOptions, RefineResult};
    pub use crate::solver::{solve, SolveError, SolveRequest, Solution};
}
