//! Solver contract tests: finite-difference gradient oracle, fixed points,
//! initialization schemes, phase diagnostics and desk-scale trajectory
//! properties on fixed seeds.

use tubal::fgd::{
    error_decomposition, fgd_step, init_small, init_spectral, phase_diagnostics, solve,
    spectral_factor, train_loss, GroundTruth, InitScheme, SolverConfig,
};
use tubal::rng::{stream, stream_rng};
use tubal::sensing::{sample_noise, NoiseKind, NoiseSpec, SensingOperator};
use tubal::talg::{norms, tprod, tsvd, ttranspose, tubal_rank};
use tubal::Tensor3;

fn rand_tensor(n1: usize, n2: usize, k: usize, seed: u64) -> Tensor3 {
    let mut rng = stream_rng(seed, stream::TRUTH);
    Tensor3::gaussian(n1, n2, k, &mut rng)
}

/// Noiseless measurements of a ground truth.
fn noiseless(gt: &GroundTruth, op: &SensingOperator) -> Vec<f64> {
    op.forward(&gt.x_star).unwrap()
}

#[test]
fn gradient_matches_central_finite_differences() {
    let (n, k, m) = (4, 3, 40);
    let gt = GroundTruth::synthesize(n, 2, k, 101).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 102).unwrap();
    let mut y = noiseless(&gt, &op);
    let noise = sample_noise(&NoiseSpec::new(NoiseKind::Gaussian { sigma: 0.05 }, 103), m).unwrap();
    for (yi, si) in y.iter_mut().zip(&noise) {
        *yi += si;
    }
    let rank = 3;
    let eta = 1e-3;
    for point in 0..10 {
        let u = rand_tensor(n, rank, k, 200 + point).scale(0.7);
        // Implied gradient of the step, with the symmetrized adjoint so the
        // update is the exact gradient of the quarter loss.
        let next = fgd_step(&u, &op, &y, eta, true).unwrap();
        let implied: Vec<f64> = u
            .data()
            .iter()
            .zip(next.data())
            .map(|(a, b)| (a - b) / eta)
            .collect();

        let mut fd = vec![0.0; u.len()];
        let scale = u.max_abs().max(1.0);
        let h = 1e-6 * scale;
        for idx in 0..u.len() {
            let mut up = u.clone();
            up.data_mut()[idx] += h;
            let fp = train_loss(&op, &y, &up).unwrap();
            let mut dn = u.clone();
            dn.data_mut()[idx] -= h;
            let fm = train_loss(&op, &y, &dn).unwrap();
            fd[idx] = (fp - fm) / (2.0 * h);
        }
        let num: f64 = implied
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "point {point}: rel err {}", num / den);
    }
}

#[test]
fn fixed_points_of_the_update() {
    let (n, k, r) = (6, 3, 2);
    let gt = GroundTruth::synthesize(n, r, k, 301).unwrap();
    let op = SensingOperator::gaussian(n, k, 10 * n * r * k, 302).unwrap();
    let y = noiseless(&gt, &op);

    // Global minimizer padded to width R is a fixed point.
    let u = gt.x_factor.pad_columns(4);
    let next = fgd_step(&u, &op, &y, 0.1, false).unwrap();
    assert!(next.sub(&u).frobenius() < 1e-10 * u.frobenius());

    // The origin is a stationary point.
    let z = Tensor3::zeros(n, 4, k);
    let next = fgd_step(&z, &op, &y, 0.1, false).unwrap();
    assert_eq!(next.frobenius(), 0.0);
}

#[test]
fn eta_zero_keeps_the_trace_constant() {
    let (n, k, r) = (6, 2, 2);
    let gt = GroundTruth::synthesize(n, r, k, 303).unwrap();
    let op = SensingOperator::gaussian(n, k, 120, 304).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(r, 0.0, 20, InitScheme::Small { alpha: 1e-3 }, 305);
    let out = solve(&op, &y, &config, Some(&gt)).unwrap();
    let u0 = init_small(n, r, k, 1e-3, 305).unwrap();
    assert_eq!(out.factor.data(), u0.data());
    let first = out.trace.rows[0].train_loss;
    assert!(out
        .trace
        .rows
        .iter()
        .all(|row| (row.train_loss - first).abs() < 1e-15 * first.max(1.0)));
}

#[test]
fn one_solver_iteration_equals_fgd_step() {
    let (n, k, r) = (5, 3, 2);
    let gt = GroundTruth::synthesize(n, r, k, 306).unwrap();
    let op = SensingOperator::gaussian(n, k, 90, 307).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(3, 0.05, 1, InitScheme::Small { alpha: 1e-2 }, 308);
    let out = solve(&op, &y, &config, None).unwrap();
    let u0 = init_small(n, 3, k, 1e-2, 308).unwrap();
    let stepped = fgd_step(&u0, &op, &y, 0.05, false).unwrap();
    assert!(out.factor.sub(&stepped).frobenius() < 1e-14 * stepped.frobenius().max(1.0));
}

#[test]
fn loss_nonincreasing_under_small_step() {
    let (n, k, r) = (8, 2, 2);
    let gt = GroundTruth::synthesize(n, r, k, 309).unwrap();
    let op = SensingOperator::gaussian(n, k, 10 * n * r * k, 310).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(4, 1e-3, 100, InitScheme::Small { alpha: 0.1 }, 311);
    let out = solve(&op, &y, &config, None).unwrap();
    for pair in out.trace.rows.windows(2) {
        assert!(pair[1].train_loss <= pair[0].train_loss + 1e-12 * pair[0].train_loss.max(1e-300));
    }
}

#[test]
fn iterate_rank_never_exceeds_width() {
    let (n, k, r) = (8, 2, 2);
    let rank = 3;
    let gt = GroundTruth::synthesize(n, r, k, 312).unwrap();
    let op = SensingOperator::gaussian(n, k, 320, 313).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(rank, 0.05, 50, InitScheme::Small { alpha: 1e-2 }, 314);
    let out = solve(&op, &y, &config, None).unwrap();
    let est_rank = tubal_rank(&out.estimate, 1e-12).unwrap();
    assert!(est_rank <= rank, "rank {est_rank} exceeds width {rank}");
}

#[test]
fn spectral_factor_of_exact_target_is_best_truncation() {
    // With the exact target as input (the adjoint-of-forward stub composed
    // to the identity), the spectral factor reproduces the best tubal-rank-R
    // approximation.
    let (n, k, r) = (8, 3, 3);
    let gt = GroundTruth::synthesize(n, r, k, 315).unwrap();
    for rank in [1usize, 2, 3] {
        let u0 = spectral_factor(&gt.x_star, rank).unwrap();
        let est = tprod(&u0, &ttranspose(&u0)).unwrap();
        let best = tsvd(&gt.x_star).unwrap().truncate(rank);
        assert!(
            est.sub(&best).frobenius() <= 1e-8 * best.frobenius().max(1e-12),
            "rank {rank}"
        );
    }
}

#[test]
fn spectral_init_zero_measurements_and_concentration() {
    let (n, k, r) = (10, 3, 2);
    let op = SensingOperator::gaussian(n, k, 50 * n * r * k, 316).unwrap();
    let zero = vec![0.0; op.m()];
    let u0 = init_spectral(&op, &zero, 2).unwrap();
    assert_eq!(u0.frobenius(), 0.0);

    let gt = GroundTruth::synthesize(n, r, k, 317).unwrap();
    let y = noiseless(&gt, &op);
    let u0 = init_spectral(&op, &y, r).unwrap();
    let est = tprod(&u0, &ttranspose(&u0)).unwrap();
    let err = est.sub(&gt.x_star).frobenius() / gt.x_star.frobenius();
    assert!(err < 0.5, "spectral init error {err}");
}

#[test]
fn phase_diagnostics_on_aligned_and_orthogonal_iterates() {
    let (n, k, r) = (8, 3, 2);
    let rank = 4;
    let gt = GroundTruth::synthesize(n, r, k, 318).unwrap();

    // Exactly aligned iterate: the padded true factor.
    let u = gt.x_factor.pad_columns(rank);
    let d = phase_diagnostics(&u, &gt).unwrap();
    assert!(d.misalignment < 1e-8, "misalignment {}", d.misalignment);
    assert!(d.overparam_norm < 1e-8, "overparam {}", d.overparam_norm);
    // Singular values of the target are the squares of the factor's.
    let sig_min_factor = gt.spectrum.sigma_min_pos.sqrt();
    assert!(
        (d.sigma_min_signal - sig_min_factor).abs() < 1e-8,
        "signal {} vs sigma_min of the factor {}",
        d.sigma_min_signal,
        sig_min_factor
    );
    assert!(!d.degenerate);

    // Iterate supported on the orthogonal complement of col(X).
    let dec = tsvd(&gt.x_star).unwrap();
    let mut comp = Tensor3::zeros(n, rank, k);
    for l in 0..k {
        for j in 0..rank {
            for i in 0..n {
                comp.set(i, j, l, dec.v.get(i, r + j, l));
            }
        }
    }
    let d = phase_diagnostics(&comp, &gt).unwrap();
    assert!(d.degenerate);
    assert_eq!(d.misalignment, 1.0);
    assert!(d.sigma_min_signal < 1e-8);

    // Exact width: the over-parameterization term vanishes identically.
    let d = phase_diagnostics(&gt.x_factor, &gt).unwrap();
    assert_eq!(d.overparam_norm, 0.0);
}

#[test]
fn error_decomposition_examples() {
    let (n, k, r) = (8, 3, 2);
    let rank = 4;
    let gt = GroundTruth::synthesize(n, r, k, 319).unwrap();

    let exact = gt.x_factor.pad_columns(rank);
    let e = error_decomposition(&exact, &gt).unwrap();
    assert!(e.in_subspace < 1e-10);
    assert!(e.overparam < 1e-16);
    assert!(e.total < 1e-10);

    // Random iterates satisfy the bound total <= 4*in_subspace + overparam.
    for seed in 0..5 {
        let u = rand_tensor(n, rank, k, 400 + seed).scale(0.5);
        let e = error_decomposition(&u, &gt).unwrap();
        assert!(
            e.total <= 4.0 * e.in_subspace + e.overparam + 1e-8 * (1.0 + e.total),
            "seed {seed}: {e:?}"
        );
        // Frobenius form of the in-subspace error is within sqrt(r) of the
        // spectral form.
        let d = tprod(&u, &ttranspose(&u)).unwrap().sub(&gt.x_star);
        let proj = tprod(&ttranspose(gt.v_x()), &d).unwrap();
        let fro = proj.frobenius();
        let spec = norms(&proj).unwrap().spectral;
        assert!(fro <= (r as f64).sqrt() * spec * (1.0 + 1e-10));
    }
}

#[test]
fn noiseless_exact_rank_recovery_reaches_deep_accuracy() {
    let (n, k, r) = (10, 2, 2);
    let gt = GroundTruth::synthesize(n, r, k, 320).unwrap();
    let op = SensingOperator::gaussian(n, k, 10 * n * r * k, 321).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(r, 0.1, 3000, InitScheme::Small { alpha: 1e-8 }, 322);
    let out = solve(&op, &y, &config, Some(&gt)).unwrap();
    let rse = out.trace.final_rse().unwrap();
    assert!(rse < 1e-8, "final rse {rse}");
}

#[test]
fn four_phase_shape_on_fixed_seed() {
    let (n, k, r) = (12, 2, 2);
    let rank = 4;
    let gt = GroundTruth::synthesize(n, r, k, 323).unwrap();
    let m = 10 * n * r * k;
    let op = SensingOperator::gaussian(n, k, m, 324).unwrap();
    let mut y = noiseless(&gt, &op);
    let noise = sample_noise(&NoiseSpec::new(NoiseKind::Gaussian { sigma: 1e-3 }, 325), m).unwrap();
    for (yi, si) in y.iter_mut().zip(&noise) {
        *yi += si;
    }
    let config = SolverConfig::new(rank, 0.1, 1200, InitScheme::Small { alpha: 1e-3 }, 326)
        .with_diagnostics(1);
    let out = solve(&op, &y, &config, Some(&gt)).unwrap();
    let rows = &out.trace.rows;
    let (t_min, _) = out.trace.min_rse().unwrap();
    let sig_1 = rows[1].sigma_min_signal.unwrap();
    let sig_at_min = rows[t_min].sigma_min_signal.unwrap();
    assert!(
        sig_at_min >= 10.0 * sig_1,
        "signal grew only {sig_1} -> {sig_at_min}"
    );
    let over_1 = rows[1].overparam_norm.unwrap();
    let max_over = rows[1..=t_min]
        .iter()
        .map(|r| r.overparam_norm.unwrap())
        .fold(0.0f64, f64::max);
    assert!(
        max_over < 10.0 * over_1,
        "overparam {over_1} grew to {max_over} before the rse minimum"
    );
}

#[test]
fn error_floor_does_not_grow_with_width() {
    let (n, k, r) = (12, 2, 2);
    let m = 10 * n * r * k;
    let gt = GroundTruth::synthesize(n, r, k, 327).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 328).unwrap();
    let mut y = noiseless(&gt, &op);
    let noise = sample_noise(&NoiseSpec::new(NoiseKind::Gaussian { sigma: 1e-3 }, 329), m).unwrap();
    for (yi, si) in y.iter_mut().zip(&noise) {
        *yi += si;
    }
    let mut best = Vec::new();
    for rank in [r, 2 * r, 3 * r] {
        let config = SolverConfig::new(rank, 0.1, 1500, InitScheme::Small { alpha: 1e-8 }, 330);
        let out = solve(&op, &y, &config, Some(&gt)).unwrap();
        best.push(out.trace.min_rse().unwrap().1);
    }
    let lo = best.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = best.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi <= 2.0 * lo, "floors {best:?}");
}

#[test]
fn divergence_guard_fires_on_a_huge_step() {
    let (n, k, r) = (6, 2, 2);
    let gt = GroundTruth::synthesize(n, r, k, 331).unwrap();
    let op = SensingOperator::gaussian(n, k, 100, 332).unwrap();
    let y = noiseless(&gt, &op);
    let config = SolverConfig::new(r, 50.0, 500, InitScheme::Large { alpha: 10.0 }, 333);
    assert!(solve(&op, &y, &config, None).is_err());
}
