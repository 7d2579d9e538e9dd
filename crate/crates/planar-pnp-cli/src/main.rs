//! `planar-pnp`: one-shot planar pose solving from a JSON problem file, and
//! the synthetic benchmark sweeps with CSV output.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 numerical/solver failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Matrix3;
use serde::Deserialize;

use planar_pnp::geometry::{CameraOffset, Intrinsics, PixelPoint, WorldPoint};
use planar_pnp::harness::{self, ScenarioConfig, SweepKind, SweepRow};
use planar_pnp::refiner::RefineOptions;
use planar_pnp::solver::{self, SolveRequest};

/// Accepted deviation from orthonormality for user-supplied rotations.
const ROTATION_TOLERANCE: f64 = 1e-6;

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;

#[derive(Parser)]
#[command(name = "planar-pnp", version, about = "Planar pose from 3D-2D correspondences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single pose problem from a JSON file.
    Solve {
        /// Problem description (see the repository README for the schema).
        input: PathBuf,
        /// Heading prior in degrees; switches to the linear initializer.
        /// Overrides `heading_prior_deg` from the file.
        #[arg(long = "prior-deg")]
        prior_deg: Option<f64>,
    },
    /// Run a benchmark sweep and emit CSV.
    Bench {
        /// Which protocol sweep to run.
        kind: BenchKind,
        /// Master seed; fixes scenes, noise and trial order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Independent trials per sweep row.
        #[arg(long, default_value_t = 250)]
        trials: usize,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    /// n = 10..200 step 10 at sigma = 2 px.
    Points,
    /// sigma = 1..10 px at n = 50.
    Noise,
    /// n = 50..1000 step 50 at sigma = 2 px, timed.
    Time,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputFile {
    intrinsics: IntrinsicsSpec,
    camera_offset: CameraOffsetSpec,
    correspondences: Vec<CorrespondenceSpec>,
    #[serde(default)]
    heading_prior_deg: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsSpec {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraOffsetSpec {
    #[serde(default)]
    rotation: Option<RotationSpec>,
    #[serde(default)]
    quaternion: Option<QuaternionSpec>,
}

/// Row-major 3x3 rotation, nested rows or a flat list of nine.
#[derive(Deserialize)]
#[serde(untagged)]
enum RotationSpec {
    Nested([[f64; 3]; 3]),
    Flat([f64; 9]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuaternionSpec {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrespondenceSpec {
    px: f64,
    py: f64,
    pz: f64,
    u: f64,
    v: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            if e.use_stderr() {
                let _ = e.print();
                return ExitCode::from(EXIT_INPUT);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Solve { input, prior_deg } => cmd_solve(&input, prior_deg),
        Command::Bench { kind, seed, trials, out } => cmd_bench(kind, seed, trials, out.as_deref()),
    }
}

fn cmd_solve(input: &PathBuf, prior_deg_flag: Option<f64>) -> ExitCode {
    let request = match load_request(input, prior_deg_flag) {
        Ok(req) => req,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let solution = match solver::solve(&request) {
        Ok(sol) => sol,
        Err(e) => {
            eprintln!("solver error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    let pose = solution.pose;
    println!("x={}", pose.x);
    println!("y={}", pose.y);
    println!("theta_rad={}", pose.theta);
    println!("theta_deg={}", pose.theta.to_degrees());
    println!("reprojection_error={}", solution.reprojection_error);
    println!("iterations={}", solution.refine_result.iterations);
    println!(
        "candidates_considered={}",
        solution.init_diagnostics.as_ref().map_or(0, |d| d.n_pose_candidates)
    );
    if !solution.refine_result.converged {
        eprintln!("solver error: refinement did not converge (max iterations)");
        return ExitCode::from(EXIT_SOLVER);
    }
    ExitCode::SUCCESS
}

fn load_request(path: &PathBuf, prior_deg_flag: Option<f64>) -> Result<SolveRequest, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let parsed: InputFile = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;

    if parsed.correspondences.len() < 2 {
        return Err(format!(
            "field `correspondences`: at least 2 correspondences are required, got {}",
            parsed.correspondences.len()
        ));
    }
    if !(parsed.intrinsics.fx > 0.0 && parsed.intrinsics.fy > 0.0) {
        return Err("field `intrinsics`: fx and fy must be positive".to_string());
    }

    let camera_offset = match (&parsed.camera_offset.rotation, &parsed.camera_offset.quaternion) {
        (Some(rotation), None) => {
            let m = match rotation {
                RotationSpec::Nested(rows) => Matrix3::new(
                    rows[0][0], rows[0][1], rows[0][2],
                    rows[1][0], rows[1][1], rows[1][2],
                    rows[2][0], rows[2][1], rows[2][2],
                ),
                RotationSpec::Flat(v) => {
                    Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
                }
            };
            CameraOffset::from_rotation(&m, ROTATION_TOLERANCE)
                .map_err(|e| format!("field `camera_offset.rotation`: {e}"))?
        }
        (None, Some(q)) => CameraOffset::from_quaternion(q.w, q.x, q.y, q.z)
            .map_err(|e| format!("field `camera_offset.quaternion`: {e}"))?,
        _ => {
            return Err(
                "field `camera_offset`: exactly one of `rotation` or `quaternion` is required"
                    .to_string(),
            )
        }
    };

    let heading_prior = prior_deg_flag
        .or(parsed.heading_prior_deg)
        .map(f64::to_radians);

    Ok(SolveRequest {
        world_points: parsed
            .correspondences
            .iter()
            .map(|c| WorldPoint::new(c.px, c.py, c.pz))
            .collect(),
        pixels: parsed
            .correspondences
            .iter()
            .map(|c| PixelPoint::new(c.u, c.v))
            .collect(),
        intrinsics: Intrinsics::new(
            parsed.intrinsics.fx,
            parsed.intrinsics.fy,
            parsed.intrinsics.cx,
            parsed.intrinsics.cy,
        ),
        camera_offset,
        heading_prior,
        refine_options: RefineOptions::default(),
    })
}

fn cmd_bench(kind: BenchKind, seed: u64, trials: usize, out: Option<&std::path::Path>) -> ExitCode {
    if trials == 0 {
        eprintln!("error: --trials must be at least 1");
        return ExitCode::from(EXIT_INPUT);
    }
    let cfg = ScenarioConfig { trials, master_seed: seed, ..Default::default() };
    let (sweep_kind, timed) = match kind {
        BenchKind::Points => (SweepKind::Points, false),
        BenchKind::Noise => (SweepKind::Noise, false),
        BenchKind::Time => (SweepKind::Timing, true),
    };
    let rows = harness::run_sweep(sweep_kind, &cfg);
    let csv = render_csv(&rows, timed);
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_INPUT);
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(csv.as_bytes()).is_err() {
                return ExitCode::from(EXIT_INPUT);
            }
        }
    }
    ExitCode::SUCCESS
}

/// Fixed schema. Accuracy sweeps write a zero time column: timing is only
/// measured by the `time` sweep, which keeps `points`/`noise` output
/// byte-identical across runs under a fixed seed.
fn render_csv(rows: &[SweepRow], timed: bool) -> String {
    let mut csv = String::from("sweep_value,mean_trans_err,mean_rot_err_rad,mean_time_s,failures,trials\n");
    for row in rows {
        let time = if timed { row.mean_time } else { 0.0 };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.swept_value,
            row.mean_translational_error,
            row.mean_rotational_error,
            time,
            row.failure_count,
            row.trials
        ));
    }
    csv
}
