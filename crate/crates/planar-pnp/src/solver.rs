//! End-to-end planar pose estimation from raw pixels, intrinsics and the
//! camera mounting offset.
//!
//! The mounting rotation's first ZYZ angle `alpha` is absorbed into the
//! planar pose at request ingestion: the solver estimates the planar
//! transform `P` satisfying `R = P * blockdiag(Ry(beta) Rz(gamma), 1)`, so
//! the reported heading already contains `alpha`. Callers composing with
//! their own body-to-camera transform must use the full offset rotation.

use crate::geometry::{
    self, CameraOffset, Correspondence, GeometryError, Intrinsics, PixelPoint, Pose2D,
    RectifiedRay, WorldPoint,
};
use crate::initializer::{self, InitDiagnostics, InitError};
use crate::polysolve::{self, ElevationTerm, PolysolveError};
use crate::refiner::{self, RefineError, RefineOptions, RefineResult};
use crate::reprojection;

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// Request violates a structural invariant (mismatched lengths, too few
    /// points, non-finite values, bad intrinsics).
    InvalidRequest { reason: String },
    Geometry(GeometryError),
    Polysolve(PolysolveError),
    Init(InitError),
    Refine(RefineError),
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::InvalidRequest { reason } => write!(f, "invalid request: {reason}"),
            SolveError::Geometry(e) => write!(f, "geometry: {e}"),
            SolveError::Polysolve(e) => write!(f, "initializer polynomial stage: {e}"),
            SolveError::Init(e) => write!(f, "initializer: {e}"),
            SolveError::Refine(e) => write!(f, "refinement: {e}"),
        }
    }
}

impl std::error::Error for SolveError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SolveError::InvalidRequest { .. } => None,
            SolveError::Geometry(e) => Some(e),
            SolveError::Polysolve(e) => Some(e),
            SolveError::Init(e) => Some(e),
            SolveError::Refine(e) => Some(e),
        }
    }
}

impl From<GeometryError> for SolveError {
    fn from(e: GeometryError) -> Self {
        SolveError::Geometry(e)
    }
}

impl From<PolysolveError> for SolveError {
    fn from(e: PolysolveError) -> Self {
        SolveError::Polysolve(e)
    }
}

impl From<RefineError> for SolveError {
    fn from(e: RefineError) -> Self {
        SolveError::Refine(e)
    }
}

/// Everything a solve needs. `heading_prior` (radians, same convention as
/// the reported heading) switches to the linear position initializer.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest {
    pub world_points: Vec<WorldPoint>,
    pub pixels: Vec<PixelPoint>,
    pub intrinsics: Intrinsics,
    pub camera_offset: CameraOffset,
    pub heading_prior: Option<f64>,
    pub refine_options: RefineOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub pose: Pose2D,
    pub reprojection_error: f64,
    /// Present only for the full polynomial initialization path.
    pub init_diagnostics: Option<InitDiagnostics>,
    pub refine_result: RefineResult,
    /// True when n = 2: three degrees of freedom against four constraints.
    pub low_redundancy: bool,
}

fn validate(req: &SolveRequest) -> Result<(), SolveError> {
    let invalid = |reason: String| Err(SolveError::InvalidRequest { reason });
    if req.world_points.len() != req.pixels.len() {
        return invalid(format!(
            "world point count {} does not match pixel count {}",
            req.world_points.len(),
            req.pixels.len()
        ));
    }
    if req.world_points.len() < 2 {
        return invalid(format!(
            "at least 2 correspondences required, got {}",
            req.world_points.len()
        ));
    }
    if !(req.intrinsics.fx > 0.0 && req.intrinsics.fy > 0.0)
        || !req.intrinsics.fx.is_finite()
        || !req.intrinsics.fy.is_finite()
        || !req.intrinsics.cx.is_finite()
        || !req.intrinsics.cy.is_finite()
    {
        return invalid("intrinsics must be finite with fx, fy > 0".to_string());
    }
    for (i, p) in req.world_points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return invalid(format!("world point {i} is not finite"));
        }
    }
    for (i, p) in req.pixels.iter().enumerate() {
        if !(p.u.is_finite() && p.v.is_finite()) {
            return invalid(format!("pixel {i} is not finite"));
        }
    }
    if let Some(prior) = req.heading_prior {
        if !prior.is_finite() {
            return invalid("heading prior is not finite".to_string());
        }
    }
    Ok(())
}

/// Runs the full pipeline: normalize, gamma-rectify, initialize (polynomial
/// enumeration or heading prior), then Levenberg-Marquardt refinement.
pub fn solve(req: &SolveRequest) -> Result<Solution, SolveError> {
    validate(req)?;
    let beta = req.camera_offset.beta();
    let gamma = req.camera_offset.gamma();

    let corrs: Vec<Correspondence> = req
        .world_points
        .iter()
        .zip(&req.pixels)
        .map(|(&world, &pix)| Correspondence {
            world,
            image: geometry::rectify(geometry::normalize(&req.intrinsics, pix), gamma),
        })
        .collect();
    let rays: Vec<RectifiedRay> =
        corrs.iter().map(|c| geometry::spherical_ray(c.image, beta)).collect();

    let (pose0, init_diagnostics) = match req.heading_prior {
        Some(prior) => {
            let points: Vec<WorldPoint> = corrs.iter().map(|c| c.world).collect();
            let (x, y) = initializer::position_from_heading(prior, &rays, &points)
                .map_err(SolveError::Init)?;
            (Pose2D::new(x, y, prior), None)
        }
        None => {
            let terms: Vec<ElevationTerm> = corrs
                .iter()
                .zip(&rays)
                .map(|(c, r)| ElevationTerm {
                    px: c.world.x,
                    py: c.world.y,
                    pz: c.world.z,
                    phi: -r.elevation,
                })
                .collect();
            let sys = polysolve::build_system(&terms)?;
            match initializer::initial_pose(beta, &corrs, &rays, &sys) {
                Ok((pose, diag)) => (pose, Some(diag)),
                // Keep going from the least-bad candidate; refinement can
                // still pull it into the admissible region.
                Err(InitError::AllCandidatesRejected { fallback, diagnostics }) => {
                    (fallback, Some(*diagnostics))
                }
                Err(e) => return Err(SolveError::Init(e)),
            }
        }
    };

    let refine_result = refiner::refine(pose0, beta, &corrs, &req.refine_options)?;
    let pose = refine_result.pose;
    let reprojection_error = reprojection::error(pose, beta, &corrs)?;

    Ok(Solution {
        pose,
        reprojection_error,
        init_diagnostics,
        refine_result,
        low_redundancy: corrs.len() == 2,
    })
}
