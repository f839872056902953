use std::time::Instant;
use tubal::sensing::SensingOperator;
use tubal::Tensor3;
use tubal::rng::{stream_rng, stream};

fn main() {
    let (n, k) = (20usize, 3usize);
    let m = 1200usize;
    let op = SensingOperator::gaussian(n, k, m, 1).unwrap();
    let mut rng = stream_rng(2, stream::TRUTH);
    let w = Tensor3::gaussian(n, n, k, &mut rng);
    let y: Vec<f64> = (0..m).map(|i| i as f64 * 0.01).collect();
    // warmup
    for _ in 0..50 { let _ = op.residual_gradient(w.data(), &y); }
    let t0 = Instant::now();
    let reps = 2000;
    let mut acc = 0.0;
    for _ in 0..reps {
        let (res, g) = op.residual_gradient(w.data(), &y);
        acc += res[0] + g[0];
    }
    let dt = t0.elapsed().as_secs_f64();
    let flops = (2.0 * 2.0 * (m * n * n * k) as f64) * reps as f64;
    println!("fused pass: {:.3} ms/iter, {:.2} Gflop/s (sink {acc:.3e})", dt / reps as f64 * 1e3, flops / dt / 1e9);
}
