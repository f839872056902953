//! Random linear measurement operators over tensors, their adjoints, noise
//! generators, and an empirical t-RIP probe.
//!
//! An operator holds `m` dense measurement tensors with i.i.d. standard
//! normal entries; `forward` maps a tensor to the vector of elementwise
//! inner products, `adjoint` maps a vector back to the weighted sum of the
//! measurement tensors. Summation order is fixed (measurement index order),
//! so results never depend on how callers schedule runs.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use crate::error::{Result, TubalError};
use crate::rng::{stream, stream_rng};
use crate::talg::{tprod, ttranspose, Tensor3};

/// Measurement scaling convention. `Raw` leaves the tensors as drawn; the
/// gradient then carries an explicit `1/m`. `InvSqrtM` absorbs `1/sqrt(m)`
/// into every measurement, the convention some analyses prefer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    Raw,
    InvSqrtM,
}

impl Scaling {
    pub fn flag(self) -> u32 {
        match self {
            Scaling::Raw => 0,
            Scaling::InvSqrtM => 1,
        }
    }

    pub fn from_flag(v: u32) -> Result<Self> {
        match v {
            0 => Ok(Scaling::Raw),
            1 => Ok(Scaling::InvSqrtM),
            _ => Err(TubalError::CorruptFile(format!("unknown scaling flag {v}"))),
        }
    }
}

/// A bank of `m` Gaussian measurement tensors of shape `n x n x k`, stored
/// row-major as flattened tensors for streaming access.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    n: usize,
    k: usize,
    m: usize,
    seed: u64,
    scaling: Scaling,
    rows: Vec<f64>,
}

impl SensingOperator {
    /// Draws `m` measurement tensors with i.i.d. N(0, 1) entries from the
    /// operator stream of `seed`.
    pub fn gaussian(n: usize, k: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(TubalError::InvalidParam("m must be at least 1".into()));
        }
        let d = n * n * k;
        let mut rng = stream_rng(seed, stream::OPERATOR);
        let rows = (0..m * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            n,
            k,
            m,
            seed,
            scaling: Scaling::Raw,
            rows,
        })
    }

    pub(crate) fn from_parts(
        n: usize,
        k: usize,
        m: usize,
        seed: u64,
        scaling: Scaling,
        rows: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != m * n * n * k {
            return Err(TubalError::DimMismatch("operator payload size".into()));
        }
        Ok(Self {
            n,
            k,
            m,
            seed,
            scaling,
            rows,
        })
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    /// Flattened tensor dimension `n * n * k`.
    pub fn dim(&self) -> usize {
        self.n * self.n * self.k
    }

    pub(crate) fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    fn scale(&self) -> f64 {
        match self.scaling {
            Scaling::Raw => 1.0,
            Scaling::InvSqrtM => 1.0 / (self.m as f64).sqrt(),
        }
    }

    /// The i-th measurement tensor (scaling applied).
    pub fn measurement(&self, i: usize) -> Tensor3 {
        let d = self.dim();
        let mut data = self.rows[i * d..(i + 1) * d].to_vec();
        let s = self.scale();
        if s != 1.0 {
            for v in &mut data {
                *v *= s;
            }
        }
        Tensor3::from_data(self.n, self.n, self.k, data).expect("row is a valid tensor")
    }

    /// `forward(t)_i = <A_i, t>` (scaling applied).
    pub fn forward(&self, t: &Tensor3) -> Result<Vec<f64>> {
        if t.dims() != (self.n, self.n, self.k) {
            return Err(TubalError::DimMismatch(format!(
                "forward: tensor {:?} vs operator {}x{}x{}",
                t.dims(),
                self.n,
                self.n,
                self.k
            )));
        }
        Ok(self.forward_flat(t.data()))
    }

    pub(crate) fn forward_flat(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let s = self.scale();
        self.rows
            .chunks_exact(d)
            .map(|row| s * dot(row, z))
            .collect()
    }

    /// `adjoint(e) = sum_i e_i A_i` (scaling applied).
    pub fn adjoint(&self, e: &[f64]) -> Result<Tensor3> {
        if e.len() != self.m {
            return Err(TubalError::DimMismatch(format!(
                "adjoint: vector length {} vs m = {}",
                e.len(),
                self.m
            )));
        }
        let d = self.dim();
        let s = self.scale();
        let mut acc = vec![0.0; d];
        for (row, &ei) in self.rows.chunks_exact(d).zip(e) {
            axpy(s * ei, row, &mut acc);
        }
        Tensor3::from_data(self.n, self.n, self.k, acc)
    }

    /// Fused residual and adjoint pass: returns `forward(z) - y` and the
    /// flattened `adjoint(forward(z) - y)`, reading each measurement row
    /// once.
    pub fn residual_gradient(&self, z: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(z.len(), self.dim());
        debug_assert_eq!(y.len(), self.m);
        let d = self.dim();
        let s = self.scale();
        let mut res = vec![0.0; self.m];
        let mut grad = vec![0.0; d];
        #[cfg(target_arch = "x86_64")]
        if use_avx() {
            // SAFETY: guarded by the avx2+fma feature check.
            unsafe { simd::fused_rows_avx2(&self.rows, d, z, y, s, &mut res, &mut grad) };
            return (res, grad);
        }
        fused_rows_portable(&self.rows, d, z, y, s, &mut res, &mut grad);
        (res, grad)
    }

    /// New operator from a subset of the measurements, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(TubalError::InvalidParam("empty measurement subset".into()));
        }
        let d = self.dim();
        let mut rows = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= self.m {
                return Err(TubalError::InvalidParam(format!(
                    "subset index {i} out of range (m = {})",
                    self.m
                )));
            }
            rows.extend_from_slice(&self.rows[i * d..(i + 1) * d]);
        }
        Ok(Self {
            n: self.n,
            k: self.k,
            m: indices.len(),
            seed: self.seed,
            scaling: self.scaling,
            rows,
        })
    }
}

// The dot/axpy pair below is the hot path of every solve: each iteration
// streams the whole measurement bank through them. On x86-64 an AVX2+FMA
// variant is selected once at runtime; any other hardware takes the
// unrolled portable path. Results are deterministic per machine (kernel
// choice is fixed by the CPU, never by threading or scheduling).

fn use_avx() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        use std::sync::OnceLock;
        static AVX: OnceLock<bool> = OnceLock::new();
        *AVX.get_or_init(|| {
            std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
        })
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if use_avx() {
        // SAFETY: guarded by the avx2+fma feature check above.
        return unsafe { simd::dot_avx2(a, b) };
    }
    dot_portable(a, b)
}

fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    let split = a.len() - a.len() % 4;
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[split..].iter().zip(&b[split..]) {
        s += x * y;
    }
    s
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if use_avx() {
        // SAFETY: guarded by the avx2+fma feature check above.
        unsafe { simd::axpy_avx2(c, x, y) };
        return;
    }
    axpy_portable(c, x, y);
}

fn axpy_portable(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

fn fused_rows_portable(
    rows: &[f64],
    d: usize,
    z: &[f64],
    y: &[f64],
    s: f64,
    res: &mut [f64],
    grad: &mut [f64],
) {
    for ((row, &yi), r_out) in rows.chunks_exact(d).zip(y).zip(res.iter_mut()) {
        let r = s * dot_portable(row, z) - yi;
        *r_out = r;
        axpy_portable(s * r, row, grad);
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;

    /// # Safety
    /// Requires avx2 and fma.
    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let mut acc0 = _mm256_setzero_pd();
        let mut acc1 = _mm256_setzero_pd();
        let ca = a.chunks_exact(8);
        let cb = b.chunks_exact(8);
        let (ta, tb) = (ca.remainder(), cb.remainder());
        for (xa, xb) in ca.zip(cb) {
            acc0 = _mm256_fmadd_pd(
                _mm256_loadu_pd(xa.as_ptr()),
                _mm256_loadu_pd(xb.as_ptr()),
                acc0,
            );
            acc1 = _mm256_fmadd_pd(
                _mm256_loadu_pd(xa.as_ptr().add(4)),
                _mm256_loadu_pd(xb.as_ptr().add(4)),
                acc1,
            );
        }
        let acc = _mm256_add_pd(acc0, acc1);
        let mut lanes = [0.0f64; 4];
        _mm256_storeu_pd(lanes.as_mut_ptr(), acc);
        let mut s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        for (x, y) in ta.iter().zip(tb) {
            s += x * y;
        }
        s
    }

    /// Whole fused pass behind one dispatch: residual and gradient row by
    /// row, association identical to the portable path.
    ///
    /// # Safety
    /// Requires avx2 and fma.
    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn fused_rows_avx2(
        rows: &[f64],
        d: usize,
        z: &[f64],
        y: &[f64],
        s: f64,
        res: &mut [f64],
        grad: &mut [f64],
    ) {
        for ((row, &yi), r_out) in rows.chunks_exact(d).zip(y).zip(res.iter_mut()) {
            let r = s * dot_avx2(row, z) - yi;
            *r_out = r;
            axpy_avx2(s * r, row, grad);
        }
    }

    /// # Safety
    /// Requires avx2 and fma.
    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn axpy_avx2(c: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), y.len());
        let vc = _mm256_set1_pd(c);
        let cx = x.chunks_exact(4);
        let tx = cx.remainder();
        let mut cy = y.chunks_exact_mut(4);
        for (xa, ya) in cx.zip(&mut cy) {
            let vy = _mm256_loadu_pd(ya.as_ptr());
            let vx = _mm256_loadu_pd(xa.as_ptr());
            _mm256_storeu_pd(ya.as_mut_ptr(), _mm256_fmadd_pd(vx, vc, vy));
        }
        for (xi, yi) in tx.iter().zip(cy.into_remainder()) {
            *yi += c * xi;
        }
    }
}

/// Additive measurement noise models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// N(0, sigma^2).
    Gaussian { sigma: f64 },
    /// Laplace(mu, b), variance 2 b^2.
    Laplace { mu: f64, b: f64 },
    /// Exp(lambda), mean and standard deviation 1/lambda.
    Exponential { lambda: f64 },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn none(seed: u64) -> Self {
        Self {
            kind: NoiseKind::None,
            seed,
        }
    }
}

/// Draws `m` i.i.d. noise samples from the spec's noise stream.
pub fn sample_noise(spec: &NoiseSpec, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(TubalError::InvalidParam("m must be at least 1".into()));
    }
    let mut rng = stream_rng(spec.seed, stream::NOISE);
    match spec.kind {
        NoiseKind::None => Ok(vec![0.0; m]),
        NoiseKind::Gaussian { sigma } => {
            if sigma <= 0.0 {
                return Err(TubalError::InvalidParam("gaussian sigma must be > 0".into()));
            }
            Ok((0..m)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect())
        }
        NoiseKind::Laplace { mu, b } => {
            if b <= 0.0 {
                return Err(TubalError::InvalidParam("laplace b must be > 0".into()));
            }
            Ok((0..m).map(|_| mu + laplace_unit(&mut rng) * b).collect())
        }
        NoiseKind::Exponential { lambda } => {
            if lambda <= 0.0 {
                return Err(TubalError::InvalidParam(
                    "exponential lambda must be > 0".into(),
                ));
            }
            let exp = Exp::new(lambda)
                .map_err(|e| TubalError::InvalidParam(format!("exponential: {e}")))?;
            Ok((0..m).map(|_| rng.sample(exp)).collect())
        }
    }
}

/// Standard Laplace draw by inverse-CDF from a uniform in (0, 1).
fn laplace_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    let c = u - 0.5;
    -c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// Empirical t-RIP estimate: the largest deviation `|energy(Y) - 1|` over
/// random unit-Frobenius tensors of tubal rank at most `r`.
#[derive(Debug, Clone, Copy)]
pub struct TripEstimate {
    /// Sampling lower estimate of the restricted-isometry constant; the true
    /// constant can only be larger.
    pub delta_hat: f64,
    pub trials: usize,
}

/// Probe against an arbitrary normalized energy map: `energy(Y)` must equal
/// `||M(Y)||^2 / m` in the raw convention (an exact isometry gives 1.0 for
/// every unit-norm input).
pub fn trip_probe_with_energy<F: Fn(&Tensor3) -> f64>(
    energy: F,
    n: usize,
    k: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<TripEstimate> {
    if trials == 0 {
        return Err(TubalError::InvalidParam("trials must be at least 1".into()));
    }
    if r == 0 || r > n {
        return Err(TubalError::InvalidParam(format!(
            "probe rank {r} out of range 1..={n}"
        )));
    }
    let mut rng = stream_rng(seed, stream::PROBE);
    let mut delta_hat = 0.0f64;
    for _ in 0..trials {
        let left = Tensor3::gaussian(n, r, k, &mut rng);
        let right = Tensor3::gaussian(r, n, k, &mut rng);
        let mut y = tprod(&left, &right)?;
        let nrm = y.frobenius();
        if nrm == 0.0 {
            continue;
        }
        y.scale_mut(1.0 / nrm);
        delta_hat = delta_hat.max((energy(&y) - 1.0).abs());
    }
    Ok(TripEstimate { delta_hat, trials })
}

/// Probe a sensing operator. The estimate is a lower bound on the true
/// restricted-isometry constant, never a certificate.
pub fn empirical_trip_probe(
    op: &SensingOperator,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<TripEstimate> {
    let m = op.m() as f64;
    let energy = |y: &Tensor3| {
        let v = op.forward(y).expect("probe tensors match operator shape");
        let sq: f64 = v.iter().map(|x| x * x).sum();
        match op.scaling() {
            Scaling::Raw => sq / m,
            Scaling::InvSqrtM => sq,
        }
    };
    trip_probe_with_energy(energy, op.n(), op.k(), r, trials, seed)
}

/// Symmetrized normalized backprojection `(Z + Z') / 2` with
/// `Z = adjoint(y) / m`, the tensor the spectral initialization factors.
pub fn backprojection(op: &SensingOperator, y: &[f64]) -> Result<Tensor3> {
    let raw = op.adjoint(y)?;
    let scale = match op.scaling() {
        Scaling::Raw => 1.0 / op.m() as f64,
        Scaling::InvSqrtM => 1.0,
    };
    let z = raw.scale(scale);
    let zt = ttranspose(&z);
    Ok(z.add(&zt).scale(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_is_seed_deterministic() {
        let a = SensingOperator::gaussian(4, 2, 10, 42).unwrap();
        let b = SensingOperator::gaussian(4, 2, 10, 42).unwrap();
        assert_eq!(a.rows_flat(), b.rows_flat());
        let c = SensingOperator::gaussian(4, 2, 10, 43).unwrap();
        assert_ne!(a.rows_flat(), c.rows_flat());
    }

    #[test]
    fn zero_measurements_rejected() {
        assert!(SensingOperator::gaussian(4, 2, 0, 1).is_err());
    }

    #[test]
    fn forward_of_zero_and_unit_adjoint() {
        let op = SensingOperator::gaussian(3, 2, 5, 7).unwrap();
        let z = Tensor3::zeros(3, 3, 2);
        assert!(op.forward(&z).unwrap().iter().all(|v| *v == 0.0));

        let mut e = vec![0.0; 5];
        e[2] = 1.0;
        let a2 = op.adjoint(&e).unwrap();
        assert_eq!(a2.data(), op.measurement(2).data());

        let zero = op.adjoint(&vec![0.0; 5]).unwrap();
        assert_eq!(zero.frobenius(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let op = SensingOperator::gaussian(3, 2, 5, 7).unwrap();
        assert!(op.forward(&Tensor3::zeros(2, 2, 2)).is_err());
        assert!(op.adjoint(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn noise_none_and_invalid_params() {
        let z = sample_noise(&NoiseSpec::none(1), 4).unwrap();
        assert_eq!(z, vec![0.0; 4]);
        assert!(sample_noise(&NoiseSpec::new(NoiseKind::Gaussian { sigma: 0.0 }, 1), 4).is_err());
        assert!(
            sample_noise(&NoiseSpec::new(NoiseKind::Laplace { mu: 0.0, b: -1.0 }, 1), 4).is_err()
        );
        assert!(
            sample_noise(
                &NoiseSpec::new(NoiseKind::Exponential { lambda: 0.0 }, 1),
                4
            )
            .is_err()
        );
    }

    #[test]
    fn kernel_paths_agree() {
        let mut rng = stream_rng(99, stream::TRUTH);
        for len in [1usize, 3, 4, 7, 8, 31, 256, 1025] {
            let a: Vec<f64> = (0..len)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let b: Vec<f64> = (0..len)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let fast = dot(&a, &b);
            let slow = dot_portable(&a, &b);
            assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "len {len}");
            let mut y1 = b.clone();
            let mut y2 = b.clone();
            axpy(0.37, &a, &mut y1);
            axpy_portable(0.37, &a, &mut y2);
            for (u, v) in y1.iter().zip(&y2) {
                assert!((u - v).abs() <= 1e-13 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn identity_stub_probe_is_exact() {
        // An exact isometry: energy(Y) = ||Y||_F^2 = 1 on unit inputs.
        let est =
            trip_probe_with_energy(|y| y.frobenius().powi(2), 6, 3, 2, 50, 11).unwrap();
        assert!(est.delta_hat < 1e-12);
        assert!(trip_probe_with_energy(|y| y.frobenius(), 6, 3, 0, 10, 1).is_err());
    }
}
