//! Early-stopping contract tests: argmin property, dual-path validation
//! loss, leakage isolation, and the noiseless late-stop behavior.

use tubal::earlystop::{run_with_early_stopping, split, validation_loss};
use tubal::fgd::{GroundTruth, InitScheme, SolverConfig};
use tubal::rng::{stream, stream_rng};
use tubal::sensing::{sample_noise, NoiseKind, NoiseSpec, SensingOperator};
use tubal::Tensor3;

fn measurements(gt: &GroundTruth, op: &SensingOperator, sigma: f64, seed: u64) -> Vec<f64> {
    let mut y = op.forward(&gt.x_star).unwrap();
    if sigma > 0.0 {
        let s = sample_noise(&NoiseSpec::new(NoiseKind::Gaussian { sigma }, seed), op.m()).unwrap();
        for (yi, si) in y.iter_mut().zip(&s) {
            *yi += si;
        }
    }
    y
}

#[test]
fn validation_loss_examples_and_dual_path() {
    let (n, k, r) = (6, 3, 2);
    let gt = GroundTruth::synthesize(n, r, k, 501).unwrap();
    let op = SensingOperator::gaussian(n, k, 20, 502).unwrap();
    let y = measurements(&gt, &op, 0.0, 0);

    // Exact factor, no noise: zero validation loss.
    let e = validation_loss(&gt.x_factor, &op, &y).unwrap();
    assert!(e < 1e-20, "e = {e}");

    // Zero iterate: ||y||^2 / (4 m_val).
    let z = Tensor3::zeros(n, r, k);
    let e = validation_loss(&z, &op, &y).unwrap();
    let expect = y.iter().map(|v| v * v).sum::<f64>() / (4.0 * op.m() as f64);
    assert!((e - expect).abs() < 1e-12 * expect);

    // Same value via explicit per-measurement inner products.
    let mut rng = stream_rng(503, stream::TRUTH);
    let u = Tensor3::gaussian(n, 3, k, &mut rng);
    let e = validation_loss(&u, &op, &y).unwrap();
    let w = tubal::talg::tprod(&u, &tubal::talg::ttranspose(&u)).unwrap();
    let mut sq = 0.0;
    for i in 0..op.m() {
        let pred = op.measurement(i).inner(&w);
        sq += (y[i] - pred) * (y[i] - pred);
    }
    let direct = sq / (4.0 * op.m() as f64);
    assert!((e - direct).abs() < 1e-12 * direct.max(1e-300));
}

#[test]
fn single_iteration_stops_at_one() {
    let (n, k, r) = (6, 2, 2);
    let gt = GroundTruth::synthesize(n, r, k, 504).unwrap();
    let op = SensingOperator::gaussian(n, k, 40, 505).unwrap();
    let y = measurements(&gt, &op, 1e-3, 506);
    let plan = split(op.m(), 0.1, 507).unwrap();
    let config = SolverConfig::new(r, 0.05, 1, InitScheme::Small { alpha: 1e-4 }, 508);
    let res = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt)).unwrap();
    assert_eq!(res.t_check, 1);
    assert_eq!(res.val_loss_curve.len(), 2);
}

#[test]
fn argmin_property_holds_exactly() {
    let (n, k, r) = (8, 2, 2);
    let m = 10 * n * r * k;
    let gt = GroundTruth::synthesize(n, r, k, 509).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 510).unwrap();
    let y = measurements(&gt, &op, 1e-3, 511);
    let plan = split(m, 0.1, 512).unwrap();
    let config = SolverConfig::new(2 * r, 0.1, 400, InitScheme::Small { alpha: 1e-6 }, 513);
    let res = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt)).unwrap();
    let min_tail = res.val_loss_curve[1..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert_eq!(res.val_loss_curve[res.t_check], min_tail);
    // Ties break toward the earliest iterate.
    assert!(res.val_loss_curve[1..res.t_check]
        .iter()
        .all(|&e| e > min_tail));
    // The trace carries the same curve in its val_loss column.
    for (row, e) in res.trace.rows.iter().zip(&res.val_loss_curve) {
        assert_eq!(row.val_loss.unwrap(), *e);
    }

    // Summary record: t_check,val_loss_min,rse_at_t_check.
    let summary = res.summary_line();
    let fields: Vec<&str> = summary.split(',').collect();
    assert_eq!(fields.len(), 3);
    assert_eq!(fields[0].parse::<usize>().unwrap(), res.t_check);
    // The record renders 12 fractional digits.
    let min = res.val_loss_min();
    assert!((fields[1].parse::<f64>().unwrap() - min).abs() <= 1e-11 * min.abs());
    let rse = res.rse_at_t_check.unwrap();
    assert!((fields[2].parse::<f64>().unwrap() - rse).abs() <= 1e-11 * rse.abs());
}

#[test]
fn noiseless_run_stops_late_at_deep_accuracy() {
    let (n, k, r) = (8, 2, 2);
    let m = 10 * n * r * k;
    let gt = GroundTruth::synthesize(n, r, k, 514).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 515).unwrap();
    let y = measurements(&gt, &op, 0.0, 0);
    let plan = split(m, 0.05, 516).unwrap();
    let config = SolverConfig::new(r, 0.1, 2500, InitScheme::Small { alpha: 1e-8 }, 517);
    let res = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt)).unwrap();
    let first_deep = res
        .trace
        .rows
        .iter()
        .find(|row| row.rse.unwrap() < 1e-6)
        .map(|row| row.iter)
        .expect("run reaches rse < 1e-6");
    assert!(
        res.t_check >= first_deep,
        "stopped at {} before reaching depth at {first_deep}",
        res.t_check
    );
    assert!(res.rse_at_t_check.unwrap() < 1e-6);
}

#[test]
fn training_never_touches_validation_measurements() {
    let (n, k, r) = (7, 2, 2);
    let m = 120;
    let gt = GroundTruth::synthesize(n, r, k, 518).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 519).unwrap();
    let y = measurements(&gt, &op, 1e-3, 520);
    let plan = split(m, 0.1, 521).unwrap();
    let config = SolverConfig::new(r, 0.05, 60, InitScheme::Small { alpha: 1e-3 }, 522);
    let base = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt)).unwrap();

    // Corrupt every validation measurement; the trained trajectory must be
    // bitwise identical because the gradient never reads them.
    let mut y_bad = y.clone();
    for &i in &plan.val_indices {
        y_bad[i] += 1e6;
    }
    let twisted = run_with_early_stopping(&op, &y_bad, &config, &plan, Some(&gt)).unwrap();
    assert_eq!(base.final_factor.data(), twisted.final_factor.data());
    for (a, b) in base.trace.rows.iter().zip(&twisted.trace.rows) {
        assert_eq!(a.train_loss, b.train_loss);
    }
    // While the validation curve of course differs.
    assert_ne!(base.val_loss_curve, twisted.val_loss_curve);
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap());
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &ii in &idx[i..=j] {
                r[ii] = avg;
            }
            i = j + 1;
        }
        r
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        da += (x - mean) * (x - mean);
        db += (y - mean) * (y - mean);
    }
    num / (da.sqrt() * db.sqrt())
}

#[test]
fn validation_loss_tracks_oracle_error() {
    // Desk-sized version of the proxy-fidelity property: the validation
    // loss and the oracle error must rank the iterates almost identically.
    let (n, k, r) = (12, 2, 2);
    let m = 10 * n * r * k;
    let gt = GroundTruth::synthesize(n, r, k, 523).unwrap();
    let op = SensingOperator::gaussian(n, k, m, 524).unwrap();
    let y = measurements(&gt, &op, 1e-3, 525);
    let plan = split(m, 0.05, 526).unwrap();
    let config = SolverConfig::new(3 * r, 0.1, 1200, InitScheme::Small { alpha: 1e-8 }, 527);
    let res = run_with_early_stopping(&op, &y, &config, &plan, Some(&gt)).unwrap();
    let rses: Vec<f64> = res.trace.rows.iter().map(|row| row.rse.unwrap()).collect();
    let rho = spearman(&res.val_loss_curve, &rses);
    assert!(rho > 0.9, "spearman {rho}");
}
