//! Initial pose estimation: candidate positions from the cubic system, per
//! position a pair of harmonic-addition headings, everything ranked by
//! reprojection error. Also the heading-prior linear initializer.

use crate::geometry::{self, Correspondence, Pose2D, RectifiedRay, WorldPoint};
use crate::polysolve::{self, CubicSystem, PolysolveError};

/// Conditioning bound on the 2x2 normal matrix of the heading-prior
/// least-squares problem.
const RANK_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum InitError {
    /// All world points coincide with the candidate position in the plane.
    DegeneratePosition,
    /// All camera rays are parallel; the position is not observable.
    RankDeficient { condition: f64 },
    /// Every candidate pose places at least one point behind the camera.
    /// Carries the least-bad pose so callers can keep going.
    AllCandidatesRejected { fallback: Pose2D, diagnostics: Box<InitDiagnostics> },
    Polysolve(PolysolveError),
}

impl std::fmt::Display for InitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitError::DegeneratePosition => {
                write!(f, "all points coincide with the candidate position in the plane")
            }
            InitError::RankDeficient { condition } => {
                write!(f, "camera rays are parallel (normal matrix condition {condition:.3e})")
            }
            InitError::AllCandidatesRejected { fallback, .. } => write!(
                f,
                "every candidate pose has points behind the camera; fallback ({:.4}, {:.4}, {:.4})",
                fallback.x, fallback.y, fallback.theta
            ),
            InitError::Polysolve(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for InitError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            InitError::Polysolve(e) => Some(e),
            _ => None,
        }
    }
}

impl From<PolysolveError> for InitError {
    fn from(e: PolysolveError) -> Self {
        InitError::Polysolve(e)
    }
}

/// A scored candidate pose. `reproj_error` is finite iff no point projects
/// behind the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePose {
    pub pose: Pose2D,
    pub reproj_error: f64,
    pub depth_violations: usize,
}

/// What the enumeration saw, for diagnostics and candidate-bound checks.
#[derive(Debug, Clone, PartialEq)]
pub struct InitDiagnostics {
    pub n_position_candidates: usize,
    pub n_pose_candidates: usize,
    pub chosen_index: usize,
    pub candidates: Vec<CandidatePose>,
}

/// The two heading candidates for a camera at `(x, y)`.
///
/// Harmonic addition collapses the sum of per-point azimuth alignment terms
/// into `A cos(theta + delta)`; the extrema are `-delta` and `pi - delta`.
/// Each term is weighted by the inverse planar distance so it enters with
/// unit amplitude.
pub fn heading_candidates(
    x: f64,
    y: f64,
    rays: &[RectifiedRay],
    points: &[WorldPoint],
) -> Result<(f64, f64), InitError> {
    let mut sum_sin = 0.0;
    let mut sum_cos = 0.0;
    let mut usable = false;
    for (ray, p) in rays.iter().zip(points) {
        let dx = x - p.x;
        let dy = y - p.y;
        let dist = dx.hypot(dy);
        if dist == 0.0 {
            continue;
        }
        usable = true;
        let w = 1.0 / dist;
        let (sin_a, cos_a) = ray.azimuth.sin_cos();
        sum_sin += w * (dx * sin_a - dy * cos_a);
        sum_cos += w * (dx * cos_a + dy * sin_a);
    }
    if !usable {
        return Err(InitError::DegeneratePosition);
    }
    let delta = sum_sin.atan2(sum_cos);
    Ok((
        geometry::wrap_angle(-delta),
        geometry::wrap_angle(std::f64::consts::PI - delta),
    ))
}

/// Enumerates candidate positions from the cubic system, attaches both
/// headings to each, scores them all by reprojection error and returns the
/// best admissible pose.
///
/// Poses that put any point at non-positive depth are rejected; if every
/// candidate is rejected the error carries the pose with the fewest
/// violations as a fallback. Ties break toward the lowest candidate index.
pub fn initial_pose(
    beta: f64,
    corrs: &[Correspondence],
    rays: &[RectifiedRay],
    sys: &CubicSystem,
) -> Result<(Pose2D, InitDiagnostics), InitError> {
    let positions = polysolve::candidate_positions(sys)?;
    let points: Vec<WorldPoint> = corrs.iter().map(|c| c.world).collect();

    let mut candidates = Vec::with_capacity(2 * positions.len());
    for &(x, y) in &positions {
        let (theta_a, theta_b) = match heading_candidates(x, y, rays, &points) {
            Ok(pair) => pair,
            Err(InitError::DegeneratePosition) => continue,
            Err(e) => return Err(e),
        };
        for theta in [theta_a, theta_b] {
            candidates.push(score_candidate(Pose2D { x, y, theta }, beta, corrs));
        }
    }
    if candidates.is_empty() {
        return Err(InitError::Polysolve(PolysolveError::NoCandidates));
    }

    let diagnostics = |chosen: usize| InitDiagnostics {
        n_position_candidates: positions.len(),
        n_pose_candidates: candidates.len(),
        chosen_index: chosen,
        candidates: candidates.clone(),
    };

    match select_admissible(&candidates) {
        Some(index) => Ok((candidates[index].pose, diagnostics(index))),
        None => {
            let index = select_fallback(&candidates);
            Err(InitError::AllCandidatesRejected {
                fallback: candidates[index].pose,
                diagnostics: Box::new(diagnostics(index)),
            })
        }
    }
}

/// Lowest-error admissible candidate; ties break toward the lowest index,
/// so the comparison is strict.
fn select_admissible(candidates: &[CandidatePose]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.depth_violations == 0
            && best.is_none_or(|b| c.reproj_error < candidates[b].reproj_error)
        {
            best = Some(i);
        }
    }
    best
}

/// When everything is rejected, rank by violation count only.
fn select_fallback(candidates: &[CandidatePose]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.depth_violations < candidates[best].depth_violations {
            best = i;
        }
    }
    best
}

fn score_candidate(pose: Pose2D, beta: f64, corrs: &[Correspondence]) -> CandidatePose {
    let mut violations = 0usize;
    let mut error = 0.0;
    for corr in corrs {
        match geometry::project(pose, beta, corr.world) {
            Ok((q, depth)) if depth > 0.0 => {
                let rx = corr.image.qx - q.qx;
                let ry = corr.image.qy - q.qy;
                error += rx * rx + ry * ry;
            }
            _ => violations += 1,
        }
    }
    CandidatePose {
        pose,
        reproj_error: if violations == 0 { error } else { f64::INFINITY },
        depth_violations: violations,
    }
}

/// Closed-form position for a known heading: minimizes the summed squared
/// perpendicular distances from the plane-projected points to the camera
/// rays via the 2x2 normal equations.
pub fn position_from_heading(
    theta: f64,
    rays: &[RectifiedRay],
    points: &[WorldPoint],
) -> Result<(f64, f64), InitError> {
    // Residual_i = (x - px_i) sin(theta + az_i) - (y - py_i) cos(theta + az_i).
    let mut suu = 0.0;
    let mut suv = 0.0;
    let mut svv = 0.0;
    let mut bu = 0.0;
    let mut bv = 0.0;
    for (ray, p) in rays.iter().zip(points) {
        let (u, v) = (theta + ray.azimuth).sin_cos();
        let d = u * p.x - v * p.y;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        bu += u * d;
        bv += v * d;
    }
    // Normal equations for (x, y): [suu, -suv; -suv, svv] [x; y] = [bu; -bv].
    let trace = suu + svv;
    let det = suu * svv - suv * suv;
    let discriminant = (trace * trace / 4.0 - det).max(0.0).sqrt();
    let lambda_max = trace / 2.0 + discriminant;
    let lambda_min = trace / 2.0 - discriminant;
    let condition = if lambda_min <= 0.0 { f64::INFINITY } else { lambda_max / lambda_min };
    if !condition.is_finite() || condition > RANK_CONDITION_LIMIT {
        return Err(InitError::RankDeficient { condition });
    }
    let x = (bu * svv - bv * suv) / det;
    let y = (bu * suv - bv * suu) / det;
    Ok((x, y))
}
