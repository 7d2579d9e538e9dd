//! Levenberg-Marquardt minimization of the reprojection error over
//! `(x, y, theta)`.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{Correspondence, GeometryError, Pose2D};
use crate::reprojection::{self, JacobianMatrix, ResidualVector};

/// Damping beyond this is treated as a singular normal system.
const DAMPING_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum RefineError {
    /// The damped normal equations stayed singular up to the damping limit.
    /// Carries the best result reached so far (`converged = false`).
    NumericalFailure { best: Box<RefineResult> },
    /// Residuals could not be evaluated at the starting pose.
    Geometry(GeometryError),
}

impl std::fmt::Display for RefineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RefineError::NumericalFailure { best } => write!(
                f,
                "normal equations singular at damping {DAMPING_LIMIT:.0e} (best error {:.3e})",
                best.final_error
            ),
            RefineError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RefineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            RefineError::Geometry(e) => Some(e),
            _ => None,
        }
    }
}

impl From<GeometryError> for RefineError {
    fn from(e: GeometryError) -> Self {
        RefineError::Geometry(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping: f64,
    pub damping_up_factor: f64,
    pub damping_down_factor: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-12,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_up_factor: 10.0,
            damping_down_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Gradient,
    Step,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    pub pose: Pose2D,
    pub final_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination_reason: TerminationReason,
}

fn normal_equations(residuals: &ResidualVector, jacobian: &JacobianMatrix) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (row, &r) in jacobian.rows.iter().zip(&residuals.values) {
        for a in 0..3 {
            jtr[a] += row[a] * r;
            for b in a..3 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    (jtj, jtr)
}

/// Standard LM loop with Marquardt scaling: solve
/// `(J^T J + lambda diag(J^T J)) step = -J^T r`, accept only strictly
/// decreasing steps, shrink/grow the damping by the configured factors.
pub fn refine(
    pose0: Pose2D,
    beta: f64,
    corrs: &[Correspondence],
    opts: &RefineOptions,
) -> Result<RefineResult, RefineError> {
    let mut pose = pose0;
    let mut current = reprojection::residuals(pose, beta, corrs)?;
    let mut error = current.squared_norm();
    let mut damping = opts.initial_damping;
    let mut iterations = 0;

    loop {
        let jacobian = reprojection::jacobian(pose, beta, corrs)?;
        let (jtj, jtr) = normal_equations(&current, &jacobian);

        if jtr.amax() < opts.gradient_tolerance {
            return Ok(RefineResult {
                pose,
                final_error: error,
                iterations,
                converged: true,
                termination_reason: TerminationReason::Gradient,
            });
        }
        if iterations >= opts.max_iterations {
            return Ok(RefineResult {
                pose,
                final_error: error,
                iterations,
                converged: false,
                termination_reason: TerminationReason::MaxIterations,
            });
        }
        iterations += 1;

        // Inner damping loop: grow lambda until a step is accepted.
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                // Guard zero diagonal entries so damping can still regularize.
                let d = jtj[(i, i)].max(1e-300);
                damped[(i, i)] = jtj[(i, i)] + damping * d;
            }
            let step = damped.lu().solve(&-jtr);
            let step = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    damping *= opts.damping_up_factor;
                    if damping > DAMPING_LIMIT {
                        return Err(RefineError::NumericalFailure {
                            best: Box::new(RefineResult {
                                pose,
                                final_error: error,
                                iterations,
                                converged: false,
                                termination_reason: TerminationReason::MaxIterations,
                            }),
                        });
                    }
                    continue;
                }
            };

            let trial = Pose2D::new(pose.x + step.x, pose.y + step.y, pose.theta + step.z);
            let trial_outcome = reprojection::residuals(trial, beta, corrs)
                .map(|r| {
                    let e = r.squared_norm();
                    (r, e)
                })
                .ok();

            match trial_outcome {
                Some((r, e)) if e < error => {
                    let pose_norm = (pose.x * pose.x + pose.y * pose.y + pose.theta * pose.theta).sqrt();
                    let small_step = step.norm() < opts.step_tolerance * (1.0 + pose_norm);
                    pose = trial;
                    current = r;
                    error = e;
                    damping /= opts.damping_down_factor;
                    if small_step {
                        return Ok(RefineResult {
                            pose,
                            final_error: error,
                            iterations,
                            converged: true,
                            termination_reason: TerminationReason::Step,
                        });
                    }
                    break;
                }
                _ => {
                    damping *= opts.damping_up_factor;
                    if damping > DAMPING_LIMIT {
                        // No acceptable step exists at any damping: local
                        // minimum to machine precision.
                        return Ok(RefineResult {
                            pose,
                            final_error: error,
                            iterations,
                            converged: true,
                            termination_reason: TerminationReason::Step,
                        });
                    }
                }
            }
        }
    }
}
