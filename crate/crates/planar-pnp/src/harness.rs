//! Synthetic experiment engine: scene generation, accuracy metrics, and the
//! point-count / noise / timing sweeps.
//!
//! Every trial derives its own RNG seed from the master seed, the swept
//! value and the trial index, so results do not depend on execution order.
//! With the `parallel` feature enabled the accuracy sweeps fan trials out on
//! a rayon pool; the timing sweep always runs sequentially so wall-clock
//! measurements do not contend for cores.

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::geometry::{self, CameraOffset, Intrinsics, PixelPoint, Pose2D, WorldPoint};
use crate::refiner::RefineOptions;
use crate::solver::{self, SolveError, SolveRequest};

/// Rotation rejection sampling gives up after this many draws.
const MAX_ROTATION_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    /// No rotation with pitch in range found within the draw budget.
    RotationSamplingExhausted { draws: usize },
    Solve(SolveError),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::RotationSamplingExhausted { draws } => {
                write!(f, "no admissible rotation after {draws} draws")
            }
            HarnessError::Solve(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HarnessError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            HarnessError::Solve(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SolveError> for HarnessError {
    fn from(e: SolveError) -> Self {
        HarnessError::Solve(e)
    }
}

/// Axis-aligned sampling volume in the camera frame; `z` is the distance
/// along the viewing direction, so `z_min > 0` keeps points in front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuboidBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Default for CuboidBounds {
    fn default() -> Self {
        Self { x: (-2.0, 2.0), y: (-2.0, 2.0), z: (4.0, 8.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_points: usize,
    pub noise_sigma_px: f64,
    pub focal_px: f64,
    pub cuboid: CuboidBounds,
    pub beta_range_deg: (f64, f64),
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_points: 50,
            noise_sigma_px: 2.0,
            focal_px: 800.0,
            cuboid: CuboidBounds::default(),
            beta_range_deg: (10.0, 170.0),
            trials: 250,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub translational_error: f64,
    pub rotational_error: f64,
    /// Wall-clock seconds spent inside `solve` only.
    pub solve_time: f64,
    pub converged: bool,
}

pub type TrialResult = Result<TrialRecord, HarnessError>;

/// One row of a sweep: means over the successful trials at one swept value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub swept_value: f64,
    pub mean_translational_error: f64,
    pub mean_rotational_error: f64,
    /// Median of the per-trial solve times. Scheduler hiccups are heavy
    /// tailed enough here that chunk means break down on long rows; the
    /// median has a 50% breakdown point.
    pub mean_time: f64,
    pub failure_count: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// n in {10, 20, ..., 200} at sigma = 2 px.
    Points,
    /// sigma in {1, ..., 10} px at n = 50.
    Noise,
    /// n in {50, 100, ..., 1000} at sigma = 2 px, sequential timing.
    Timing,
}

/// Stable seed mixing (splitmix64 over the three inputs); identical across
/// platforms and runs.
pub fn derive_trial_seed(master_seed: u64, sweep_value: f64, trial_index: usize) -> u64 {
    let mut state = master_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(sweep_value.to_bits())
        .wrapping_add((trial_index as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    for _ in 0..3 {
        state = (state ^ (state >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        state = (state ^ (state >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state ^= state >> 31;
    }
    state
}

fn sample_offset(rng: &mut ChaCha8Rng, beta_range_deg: (f64, f64)) -> Result<CameraOffset, HarnessError> {
    let lo = beta_range_deg.0.to_radians();
    let hi = beta_range_deg.1.to_radians();
    for _ in 0..MAX_ROTATION_DRAWS {
        let w: f64 = StandardNormal.sample(rng);
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let quat = nalgebra::Quaternion::new(w, x, y, z);
        if quat.norm() < 1e-9 {
            continue;
        }
        let rotation = nalgebra::UnitQuaternion::from_quaternion(quat)
            .to_rotation_matrix()
            .into_inner();
        let beta = rotation[(2, 2)].clamp(-1.0, 1.0).acos();
        if beta < lo || beta > hi {
            continue;
        }
        if let Ok(offset) = CameraOffset::from_rotation(&rotation, 1e-9) {
            return Ok(offset);
        }
    }
    Err(HarnessError::RotationSamplingExhausted { draws: MAX_ROTATION_DRAWS })
}

/// Generates one synthetic scene.
///
/// The camera sits at the world origin with the sampled mounting offset;
/// points are drawn uniformly in the camera-frame cuboid (distances along
/// the viewing axis), mapped to world coordinates, projected through the
/// homogeneous chain `q = (u_x / u_z, u_y / u_z)`, `u = R^-1 [p; 1]`, and
/// perturbed with Gaussian pixel noise. The returned ground truth is the
/// pose the solver reports: `(0, 0, alpha)` with `alpha` from the offset's
/// ZYZ factorization.
pub fn generate_scene(
    cfg: &ScenarioConfig,
    trial_seed: u64,
) -> Result<(SolveRequest, Pose2D), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let offset = sample_offset(&mut rng, cfg.beta_range_deg)?;
    let rotation = *offset.rotation();
    let intrinsics = Intrinsics::new(cfg.focal_px, cfg.focal_px, 0.0, 0.0);

    let mut world_points = Vec::with_capacity(cfg.n_points);
    let mut pixels = Vec::with_capacity(cfg.n_points);
    for _ in 0..cfg.n_points {
        let cam = Vector3::new(
            rng.random_range(cfg.cuboid.x.0..=cfg.cuboid.x.1),
            rng.random_range(cfg.cuboid.y.0..=cfg.cuboid.y.1),
            -rng.random_range(cfg.cuboid.z.0..=cfg.cuboid.z.1),
        );
        let world = rotation * cam;
        // Homogeneous chain at the ground-truth pose: u = R^-1 world = cam.
        let q = geometry::NormalizedImagePoint::new(cam.x / cam.z, cam.y / cam.z);
        let clean = geometry::denormalize(&intrinsics, q);
        let noise_u: f64 = StandardNormal.sample(&mut rng);
        let noise_v: f64 = StandardNormal.sample(&mut rng);
        world_points.push(WorldPoint::new(world.x, world.y, world.z));
        pixels.push(PixelPoint::new(
            clean.u + cfg.noise_sigma_px * noise_u,
            clean.v + cfg.noise_sigma_px * noise_v,
        ));
    }

    let truth = Pose2D::new(0.0, 0.0, offset.alpha());
    Ok((
        SolveRequest {
            world_points,
            pixels,
            intrinsics,
            camera_offset: offset,
            heading_prior: None,
            refine_options: RefineOptions::default(),
        },
        truth,
    ))
}

/// Planar distance and wrapped absolute heading difference.
pub fn metrics(estimate: Pose2D, truth: Pose2D) -> (f64, f64) {
    let trans = (estimate.x - truth.x).hypot(estimate.y - truth.y);
    let rot = geometry::wrap_angle(estimate.theta - truth.theta).abs();
    (trans, rot)
}

fn run_single_trial(cfg: &ScenarioConfig, sweep_value: f64, trial_index: usize) -> TrialResult {
    let seed = derive_trial_seed(cfg.master_seed, sweep_value, trial_index);
    let (request, truth) = generate_scene(cfg, seed)?;
    let started = Instant::now();
    let solution = solver::solve(&request)?;
    let solve_time = started.elapsed().as_secs_f64();
    let (translational_error, rotational_error) = metrics(solution.pose, truth);
    Ok(TrialRecord {
        trial_index,
        translational_error,
        rotational_error,
        solve_time,
        converged: solution.refine_result.converged,
    })
}

/// Runs `cfg.trials` independent trials sequentially.
pub fn run_trials_seq(cfg: &ScenarioConfig, sweep_value: f64) -> Vec<TrialResult> {
    (0..cfg.trials).map(|t| run_single_trial(cfg, sweep_value, t)).collect()
}

/// Runs `cfg.trials` independent trials on the rayon pool. Per-trial seeding
/// keeps the output identical to [`run_trials_seq`] up to solve timings.
#[cfg(feature = "parallel")]
pub fn run_trials_par(cfg: &ScenarioConfig, sweep_value: f64) -> Vec<TrialResult> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_single_trial(cfg, sweep_value, t))
        .collect()
}

/// Dispatches to the parallel runner when the `parallel` feature is enabled,
/// the sequential one otherwise.
pub fn run_trials(cfg: &ScenarioConfig, sweep_value: f64) -> Vec<TrialResult> {
    #[cfg(feature = "parallel")]
    {
        run_trials_par(cfg, sweep_value)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_trials_seq(cfg, sweep_value)
    }
}

/// Collapses trial results into one sweep row. Failed trials are excluded
/// from the means and counted. Timing reports the per-trial median.
pub fn aggregate(sweep_value: f64, results: &[TrialResult]) -> SweepRow {
    let records: Vec<&TrialRecord> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failure_count = results.len() - records.len();
    let n = records.len();
    let (mut trans, mut rot) = (0.0, 0.0);
    for r in &records {
        trans += r.translational_error;
        rot += r.rotational_error;
    }
    let mean = |total: f64| if n > 0 { total / n as f64 } else { f64::NAN };
    SweepRow {
        swept_value: sweep_value,
        mean_translational_error: mean(trans),
        mean_rotational_error: mean(rot),
        mean_time: median_solve_time(&records),
        failure_count,
        trials: results.len(),
    }
}

fn median_solve_time(records: &[&TrialRecord]) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    let mut times: Vec<f64> = records.iter().map(|r| r.solve_time).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times[times.len() / 2]
}

/// Sweep values for a kind, mirroring the experimental protocol.
pub fn sweep_values(kind: SweepKind) -> Vec<f64> {
    match kind {
        SweepKind::Points => (1..=20).map(|i| (i * 10) as f64).collect(),
        SweepKind::Noise => (1..=10).map(|i| i as f64).collect(),
        SweepKind::Timing => (1..=20).map(|i| (i * 50) as f64).collect(),
    }
}

/// Runs the full sweep of the given kind on top of `cfg` (its `n_points` /
/// `noise_sigma_px` field is overridden by the swept value row by row).
pub fn run_sweep(kind: SweepKind, cfg: &ScenarioConfig) -> Vec<SweepRow> {
    sweep_values(kind)
        .into_iter()
        .map(|value| {
            let mut row_cfg = cfg.clone();
            match kind {
                SweepKind::Points => row_cfg.n_points = value as usize,
                SweepKind::Noise => row_cfg.noise_sigma_px = value,
                SweepKind::Timing => row_cfg.n_points = value as usize,
            }
            let results = match kind {
                SweepKind::Timing => run_trials_seq(&row_cfg, value),
                _ => run_trials(&row_cfg, value),
            };
            aggregate(value, &results)
        })
        .collect()
}
