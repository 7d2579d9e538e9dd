//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Run with
//! `cargo test -p planar-pnp --test acceptance`.

use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planar_pnp::geometry::{self, Correspondence, Pose2D};
use planar_pnp::harness::{self, ScenarioConfig, SweepKind};
use planar_pnp::initializer;
use planar_pnp::polysolve::{self, ElevationTerm, EliminationAxis, Poly1D};
use planar_pnp::refiner::TerminationReason;
use planar_pnp::reprojection;
use planar_pnp::solver::{self, SolveRequest};

/// Criteria run one at a time: several saturate the rayon pool and the
/// timing criterion measures wall clock.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Rectified correspondences and rays as the solver sees them.
fn prepare(request: &SolveRequest) -> (Vec<Correspondence>, Vec<geometry::RectifiedRay>, f64) {
    let beta = request.camera_offset.beta();
    let gamma = request.camera_offset.gamma();
    let corrs: Vec<Correspondence> = request
        .world_points
        .iter()
        .zip(&request.pixels)
        .map(|(&world, &pix)| Correspondence {
            world,
            image: geometry::rectify(geometry::normalize(&request.intrinsics, pix), gamma),
        })
        .collect();
    let rays = corrs.iter().map(|c| geometry::spherical_ray(c.image, beta)).collect();
    (corrs, rays, beta)
}

fn elevation_terms(corrs: &[Correspondence], rays: &[geometry::RectifiedRay]) -> Vec<ElevationTerm> {
    corrs
        .iter()
        .zip(rays)
        .map(|(c, r)| ElevationTerm {
            px: c.world.x,
            py: c.world.y,
            pz: c.world.z,
            phi: -r.elevation,
        })
        .collect()
}

#[test]
fn acceptance_01_zero_noise_exact_recovery() {
    let _guard = serial();
    let cfg = ScenarioConfig { n_points: 10, noise_sigma_px: 0.0, ..Default::default() };
    let started = Instant::now();
    let trials = 1000;
    for trial in 0..trials {
        let seed = harness::derive_trial_seed(0xACCE01, 0.0, trial);
        let (request, truth) = harness::generate_scene(&cfg, seed).expect("scene generation");
        let solution = solver::solve(&request).expect("zero-noise solve must succeed");
        let (trans, rot) = harness::metrics(solution.pose, truth);
        assert!(trans < 1e-6, "trial {trial}: translational error {trans}");
        assert!(rot < 1e-8, "trial {trial}: rotational error {rot}");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "1000 zero-noise solves took {elapsed:.2} s (budget 10 s)");
    println!("ACCEPTANCE 1 (zero-noise exact recovery, 1000 scenes in {elapsed:.2} s): PASS");
}

#[test]
fn acceptance_02_jacobian_matches_finite_differences() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE02);
    // Zero image noise keeps the residual magnitudes small, which is what
    // bounds the rounding floor of the central-difference oracle.
    let cfg = ScenarioConfig { n_points: 12, noise_sigma_px: 0.0, ..Default::default() };
    let mut worst: f64 = 0.0;
    for pair in 0..100 {
        let seed = harness::derive_trial_seed(0xACCE02, 0.0, pair);
        let (request, truth) = harness::generate_scene(&cfg, seed).unwrap();
        let (corrs, _, beta) = prepare(&request);
        let pose = Pose2D {
            x: truth.x + rng.random_range(-0.1..0.1),
            y: truth.y + rng.random_range(-0.1..0.1),
            theta: truth.theta + rng.random_range(-0.05..0.05),
        };
        let analytic = reprojection::jacobian(pose, beta, &corrs).unwrap();

        let params = [pose.x, pose.y, pose.theta];
        for (col, &p) in params.iter().enumerate() {
            let step = 1e-6 * (1.0 + p.abs());
            let mut plus = params;
            let mut minus = params;
            plus[col] += step;
            minus[col] -= step;
            let rp = reprojection::residuals(
                Pose2D { x: plus[0], y: plus[1], theta: plus[2] },
                beta,
                &corrs,
            )
            .unwrap();
            let rm = reprojection::residuals(
                Pose2D { x: minus[0], y: minus[1], theta: minus[2] },
                beta,
                &corrs,
            )
            .unwrap();
            for (i, row) in analytic.rows.iter().enumerate() {
                let numeric = (rp.values[i] - rm.values[i]) / (2.0 * step);
                // The oracle carries ~1e-10 absolute rounding noise
                // (eps * |r| / step), so relative comparison is meaningful
                // only above that; entries under the 1e-4 floor must agree
                // absolutely to 1e-9.
                let discrepancy = (row[col] - numeric).abs() / numeric.abs().max(1e-4);
                worst = worst.max(discrepancy);
            }
        }
    }
    assert!(worst < 1e-5, "max Jacobian discrepancy {worst}");
    println!("ACCEPTANCE 2 (analytic Jacobian vs central differences, max {worst:.2e}): PASS");
}

#[test]
fn acceptance_03_resultant_degree_collapse() {
    let _guard = serial();
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        // Half exact, half pixel-noise systems.
        let sigma = if trial % 2 == 0 { 0.0 } else { 2.0 };
        let cfg = ScenarioConfig {
            n_points: 8 + (trial % 17),
            noise_sigma_px: sigma,
            ..Default::default()
        };
        let seed = harness::derive_trial_seed(0xACCE03, sigma, trial);
        let (request, _) = harness::generate_scene(&cfg, seed).unwrap();
        let (corrs, rays, _) = prepare(&request);
        let sys = match polysolve::build_system(&elevation_terms(&corrs, &rays)) {
            Ok(sys) => sys,
            Err(_) => continue,
        };
        for axis in [EliminationAxis::Y, EliminationAxis::X] {
            let (_, tail) = polysolve::sylvester_resultant_with_tail(&sys, axis).unwrap();
            assert!(tail < 1e-8, "trial {trial}: degree 6..9 tail ratio {tail}");
            worst = worst.max(tail);
        }
    }
    assert!(worst < 1e-8);
    println!("ACCEPTANCE 3 (resultant degree collapse, worst tail {worst:.2e}): PASS");
}

#[test]
fn acceptance_04_root_completeness_against_scan_oracle() {
    let _guard = serial();
    fn bisect(p: &Poly1D, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.eval(lo) * p.eval(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE04);
    let mut matched_roots = 0usize;
    for trial in 0..1000 {
        let degree = rng.random_range(1..=5usize);
        let mut coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect();
        if coeffs[degree].abs() < 0.1 {
            coeffs[degree] = if coeffs[degree] < 0.0 { -0.5 } else { 0.5 };
        }
        let p = Poly1D::new(coeffs);
        let reported = polysolve::real_roots(&p).unwrap();

        // Cauchy bound scan with 10^4 points, bisection on sign changes.
        let bound = 1.0
            + p.coeffs[..degree].iter().map(|c| c.abs()).fold(0.0f64, f64::max)
                / p.coeffs[degree].abs();
        let step = 2.0 * bound / 1e4;
        let mut oracle = Vec::new();
        let mut prev_x = -bound;
        let mut prev_val = p.eval(prev_x);
        for i in 1..=10_000 {
            let x = -bound + step * i as f64;
            let val = p.eval(x);
            if prev_val * val <= 0.0 && (prev_val != 0.0 || val != 0.0) {
                oracle.push(bisect(&p, prev_x, x));
            }
            prev_x = x;
            prev_val = val;
        }

        for root in &oracle {
            let hit = reported.iter().any(|r| (r - root).abs() < 1e-8 * (1.0 + root.abs()));
            assert!(hit, "trial {trial}: oracle root {root} missed; got {reported:?}");
            matched_roots += 1;
        }
        // No spurious roots: anything the oracle did not see must still be a
        // genuine root by residual (the scan can merge near-equal pairs).
        let coeff_scale = p.coeff_scale();
        for r in &reported {
            let near_oracle = oracle.iter().any(|o| (r - o).abs() < 1e-6 * (1.0 + o.abs()));
            if !near_oracle {
                let residual = p.eval(*r).abs();
                let local_scale = coeff_scale * (1.0 + r.abs()).powi(degree as i32);
                assert!(
                    residual <= 1e-9 * local_scale,
                    "trial {trial}: spurious root {r} (residual {residual})"
                );
            }
        }
    }
    println!("ACCEPTANCE 4 (root completeness, {matched_roots} oracle roots matched): PASS");
}

#[test]
fn acceptance_05_candidate_bounds() {
    let _guard = serial();
    let cfg = ScenarioConfig { n_points: 50, noise_sigma_px: 2.0, ..Default::default() };
    let mut max_positions = 0usize;
    let mut max_poses = 0usize;
    for trial in 0..250 {
        let seed = harness::derive_trial_seed(0xACCE05, 2.0, trial);
        let (request, _) = harness::generate_scene(&cfg, seed).unwrap();
        let solution = solver::solve(&request).expect("solve");
        let diag = solution.init_diagnostics.expect("full pipeline diagnostics");
        assert!(diag.n_position_candidates <= 25, "trial {trial}: {} pairs", diag.n_position_candidates);
        assert!(diag.n_pose_candidates <= 50, "trial {trial}: {} poses", diag.n_pose_candidates);
        max_positions = max_positions.max(diag.n_position_candidates);
        max_poses = max_poses.max(diag.n_pose_candidates);
    }
    println!(
        "ACCEPTANCE 5 (candidate bounds over 250 trials: max {max_positions} pairs, max {max_poses} poses): PASS"
    );
}

fn spearman(values: &[f64]) -> f64 {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    for (rank, &index) in order.iter().enumerate() {
        ranks[index] = rank as f64;
    }
    // Against the identity ranking 0..n.
    let mean = (n as f64 - 1.0) / 2.0;
    let mut num = 0.0;
    let mut den_a = 0.0;
    let mut den_b = 0.0;
    for (i, &r) in ranks.iter().enumerate() {
        let a = i as f64 - mean;
        let b = r - mean;
        num += a * b;
        den_a += a * a;
        den_b += b * b;
    }
    num / (den_a * den_b).sqrt()
}

#[test]
fn acceptance_06_noise_monotonicity() {
    let _guard = serial();
    let cfg = ScenarioConfig { master_seed: 0xACCE06, ..Default::default() };
    let rows = harness::run_sweep(SweepKind::Noise, &cfg);
    assert_eq!(rows.len(), 10);
    let trans: Vec<f64> = rows.iter().map(|r| r.mean_translational_error).collect();
    let rot: Vec<f64> = rows.iter().map(|r| r.mean_rotational_error).collect();
    let rho_trans = spearman(&trans);
    let rho_rot = spearman(&rot);
    assert!(rho_trans > 0.9, "translational Spearman {rho_trans}");
    assert!(rho_rot > 0.9, "rotational Spearman {rho_rot}");
    println!(
        "ACCEPTANCE 6 (noise monotonicity, Spearman trans {rho_trans:.3} rot {rho_rot:.3}): PASS"
    );
}

#[test]
fn acceptance_07_point_count_benefit() {
    let _guard = serial();
    let cfg = ScenarioConfig { master_seed: 0xACCE07, ..Default::default() };
    let rows = harness::run_sweep(SweepKind::Points, &cfg);
    assert_eq!(rows.len(), 20);
    let first = &rows[0];
    let last = &rows[19];
    assert_eq!(first.swept_value, 10.0);
    assert_eq!(last.swept_value, 200.0);
    let ratio = last.mean_translational_error / first.mean_translational_error;
    assert!(
        ratio <= 0.6,
        "mean translational error at n=200 is {ratio:.3}x the n=10 value"
    );
    println!("ACCEPTANCE 7 (point-count benefit, n=200/n=10 error ratio {ratio:.3}): PASS");
}

#[test]
fn acceptance_08_linear_solve_time() {
    let _guard = serial();
    let cfg = ScenarioConfig { master_seed: 0xACCE08, ..Default::default() };
    let rows = harness::run_sweep(SweepKind::Timing, &cfg);
    assert_eq!(rows.len(), 20);

    let ns: Vec<f64> = rows.iter().map(|r| r.swept_value).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.mean_time).collect();
    let n = ns.len() as f64;
    let mean_x = ns.iter().sum::<f64>() / n;
    let mean_y = times.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in ns.iter().zip(&times) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
        syy += (y - mean_y) * (y - mean_y);
    }
    let r_squared = sxy * sxy / (sxx * syy);
    assert!(r_squared > 0.95, "linear fit R^2 = {r_squared}");

    let t100 = rows.iter().find(|r| r.swept_value == 100.0).unwrap().mean_time;
    let t1000 = rows.iter().find(|r| r.swept_value == 1000.0).unwrap().mean_time;
    let ratio = t1000 / t100;
    assert!(ratio < 15.0, "time(n=1000)/time(n=100) = {ratio}");
    println!(
        "ACCEPTANCE 8 (linear solve time, R^2 {r_squared:.4}, t(1000)/t(100) {ratio:.2}): PASS"
    );
}

#[test]
fn acceptance_09_initializer_quality() {
    let _guard = serial();
    let cfg = ScenarioConfig { n_points: 50, noise_sigma_px: 2.0, ..Default::default() };
    let trials = 1000;
    let mut converged = 0usize;
    for trial in 0..trials {
        let seed = harness::derive_trial_seed(0xACCE09, 2.0, trial);
        let (request, _) = harness::generate_scene(&cfg, seed).unwrap();
        if let Ok(solution) = solver::solve(&request) {
            let reason = solution.refine_result.termination_reason;
            if solution.refine_result.converged
                && matches!(reason, TerminationReason::Gradient | TerminationReason::Step)
            {
                converged += 1;
            }
        }
    }
    let rate = converged as f64 / trials as f64;
    assert!(rate >= 0.99, "only {converged}/{trials} trials converged");
    println!("ACCEPTANCE 9 (initializer quality, {converged}/{trials} converged): PASS");
}

#[test]
fn acceptance_10_heading_prior_path() {
    let _guard = serial();
    // Zero noise: prior-initialized solutions match the full pipeline.
    let cfg = ScenarioConfig { n_points: 12, noise_sigma_px: 0.0, ..Default::default() };
    for trial in 0..200 {
        let seed = harness::derive_trial_seed(0xACCE10, 0.0, trial);
        let (request, truth) = harness::generate_scene(&cfg, seed).unwrap();
        let full = solver::solve(&request).expect("full pipeline");
        let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
        let mut with_prior = request.clone();
        with_prior.heading_prior = Some(truth.theta + sign * 2f64.to_radians());
        let prior = solver::solve(&with_prior).expect("prior pipeline");
        let dx = (full.pose.x - prior.pose.x).abs();
        let dy = (full.pose.y - prior.pose.y).abs();
        let dt = geometry::wrap_angle(full.pose.theta - prior.pose.theta).abs();
        assert!(
            dx < 1e-8 && dy < 1e-8 && dt < 1e-8,
            "trial {trial}: paths diverge by ({dx}, {dy}, {dt})"
        );
    }

    // Pixel noise: mean errors of the two paths agree within 10%.
    let noisy_cfg = ScenarioConfig { n_points: 50, noise_sigma_px: 2.0, ..Default::default() };
    let trials = 250;
    let mut full_trans = 0.0;
    let mut full_rot = 0.0;
    let mut prior_trans = 0.0;
    let mut prior_rot = 0.0;
    for trial in 0..trials {
        let seed = harness::derive_trial_seed(0xACCE10, 2.0, trial);
        let (request, truth) = harness::generate_scene(&noisy_cfg, seed).unwrap();
        let full = solver::solve(&request).expect("full pipeline");
        let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
        let mut with_prior = request.clone();
        with_prior.heading_prior = Some(truth.theta + sign * 2f64.to_radians());
        let prior = solver::solve(&with_prior).expect("prior pipeline");
        let (ft, fr) = harness::metrics(full.pose, truth);
        let (pt, pr) = harness::metrics(prior.pose, truth);
        full_trans += ft;
        full_rot += fr;
        prior_trans += pt;
        prior_rot += pr;
    }
    let trans_gap = (prior_trans - full_trans).abs() / full_trans;
    let rot_gap = (prior_rot - full_rot).abs() / full_rot;
    assert!(trans_gap < 0.10, "mean translational errors differ by {trans_gap:.3}");
    assert!(rot_gap < 0.10, "mean rotational errors differ by {rot_gap:.3}");
    println!(
        "ACCEPTANCE 10 (heading-prior path, noisy mean gaps trans {trans_gap:.3} rot {rot_gap:.3}): PASS"
    );
}

#[test]
fn noisy_mean_error_regression_baseline() {
    // Frozen from a 250-trial run at n = 50, sigma = 2 px, f = 800 px. The
    // pipeline is deterministic under the fixed seed; drift beyond the libm
    // wobble allowance means behavior changed.
    let _guard = serial();
    let cfg = ScenarioConfig {
        n_points: 50,
        noise_sigma_px: 2.0,
        master_seed: 0xBA5E,
        ..Default::default()
    };
    let results = harness::run_trials(&cfg, 0.0);
    let row = harness::aggregate(0.0, &results);
    assert_eq!(row.failure_count, 0);
    let baseline_trans = 7.84008023088437166e-3;
    let baseline_rot = 1.26047813704295597e-3;
    assert!(
        (row.mean_translational_error - baseline_trans).abs() < 1e-6 * baseline_trans,
        "translational baseline drifted: {}",
        row.mean_translational_error
    );
    assert!(
        (row.mean_rotational_error - baseline_rot).abs() < 1e-6 * baseline_rot,
        "rotational baseline drifted: {}",
        row.mean_rotational_error
    );
}

#[test]
fn initializer_zero_noise_recovery_without_refinement() {
    let _guard = serial();
    // Companion property to criterion 1: the polynomial initializer alone
    // already lands on the truth.
    let cfg = ScenarioConfig { n_points: 10, noise_sigma_px: 0.0, ..Default::default() };
    for trial in 0..1000 {
        let seed = harness::derive_trial_seed(0xF00D, 0.0, trial);
        let (request, truth) = harness::generate_scene(&cfg, seed).unwrap();
        let (corrs, rays, beta) = prepare(&request);
        let sys = polysolve::build_system(&elevation_terms(&corrs, &rays)).unwrap();
        let (pose, diag) = initializer::initial_pose(beta, &corrs, &rays, &sys).unwrap();
        assert!(diag.n_pose_candidates <= 50);
        let (trans, rot) = harness::metrics(pose, truth);
        assert!(trans < 1e-6 * 10.0, "trial {trial}: init translation {trans}");
        assert!(rot < 1e-8, "trial {trial}: init rotation {rot}");
    }
}
