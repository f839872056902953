//! Factorized gradient descent for the symmetric PSD sensing model
//! `min_U (1/4m) ||y - M(U * U')||^2`, with small-random, spectral and
//! large-random initializations and per-iteration phase diagnostics.
//!
//! The update is applied exactly as stated for the factorized model:
//! `U <- U - (eta/m) * adjoint(forward(U * U') - y) * U`. The adjoint of a
//! finite noisy sample is not exactly symmetric; an optional flag
//! symmetrizes it, which turns the update into the exact gradient of the
//! quarter loss (the finite-difference checks run with the flag on).

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TubalError};
use crate::rng::{stream, stream_rng};
use crate::sensing::{backprojection, Scaling, SensingOperator};
use crate::talg::cmat;
use crate::talg::{
    fft_mode3, spectrum, tprod, tsvd, ttranspose, FourierSlices, SpectrumSummary, Tensor3,
};

/// A synthetic recovery target `x_star = x * x'`, Frobenius-normalized,
/// with its factor, spectrum and cached column subspace.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Factor scaled so that `tprod(x_factor, x_factor') == x_star`.
    pub x_factor: Tensor3,
    /// Symmetric PSD target with unit Frobenius norm.
    pub x_star: Tensor3,
    pub r: usize,
    pub spectrum: SpectrumSummary,
    v_x: Tensor3,
    v_x_fourier: FourierSlices,
}

impl GroundTruth {
    /// Gaussian factor of shape `n x r x k`, normalized target.
    pub fn synthesize(n: usize, r: usize, k: usize, seed: u64) -> Result<Self> {
        if r == 0 || r > n {
            return Err(TubalError::InvalidParam(format!(
                "rank {r} out of range 1..={n}"
            )));
        }
        let mut rng = stream_rng(seed, stream::TRUTH);
        let factor = Tensor3::gaussian(n, r, k, &mut rng);
        Self::from_factor(factor)
    }

    /// Builds the normalized target from an explicit factor.
    pub fn from_factor(factor: Tensor3) -> Result<Self> {
        let (_, r, _) = factor.dims();
        let raw = tprod(&factor, &ttranspose(&factor))?;
        let scale = raw.frobenius();
        if scale == 0.0 {
            return Err(TubalError::ZeroTensor);
        }
        let x_star = raw.scale(1.0 / scale);
        let x_factor = factor.scale(1.0 / scale.sqrt());
        let spectrum = spectrum(&x_star, 1e-8)?;
        if spectrum.tubal_rank != r {
            return Err(TubalError::InvalidParam(format!(
                "factor of width {r} produced tubal rank {}",
                spectrum.tubal_rank
            )));
        }
        let dec = tsvd(&x_star)?;
        let v_x = dec.v.leading_columns(r);
        let v_x_fourier = fft_mode3(&v_x);
        Ok(Self {
            x_factor,
            x_star,
            r,
            spectrum,
            v_x,
            v_x_fourier,
        })
    }

    /// Leading `r` tensor columns of the left t-SVD factor of `x_star`.
    pub fn v_x(&self) -> &Tensor3 {
        &self.v_x
    }

    /// Relative squared error of an estimate against the target.
    pub fn rse(&self, estimate: &Tensor3) -> f64 {
        let num = estimate.sub(&self.x_star).frobenius();
        let den = self.x_star.frobenius();
        (num / den).powi(2)
    }
}

/// Initialization schemes for the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// i.i.d. N(0, alpha^2 / R) entries with small alpha.
    Small { alpha: f64 },
    /// Same sampler at a large scale (pairs with a small step size).
    Large { alpha: f64 },
    /// Square-root factor of the truncated eigendecomposition of the
    /// symmetrized backprojection.
    Spectral,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Over-specified factor width R.
    pub rank: usize,
    pub eta: f64,
    /// Iteration budget T; the trace records iterates 0..=T.
    pub max_iters: usize,
    pub init: InitScheme,
    /// Abort when the train loss exceeds this multiple of the initial loss.
    pub divergence_guard: f64,
    pub seed: u64,
    /// Phase-diagnostic cadence; 0 disables them.
    pub diag_stride: usize,
    pub symmetrize_gradient: bool,
}

impl SolverConfig {
    pub fn new(rank: usize, eta: f64, max_iters: usize, init: InitScheme, seed: u64) -> Self {
        Self {
            rank,
            eta,
            max_iters,
            init,
            divergence_guard: 1e6,
            seed,
            diag_stride: 0,
            symmetrize_gradient: false,
        }
    }

    pub fn with_diagnostics(mut self, stride: usize) -> Self {
        self.diag_stride = stride;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.rank == 0 || self.rank > n {
            return Err(TubalError::InvalidParam(format!(
                "rank {} out of range 1..={n}",
                self.rank
            )));
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(TubalError::InvalidParam("eta must be >= 0".into()));
        }
        if let InitScheme::Small { alpha } | InitScheme::Large { alpha } = self.init {
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(TubalError::InvalidParam("alpha must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// One recorded iterate.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub train_loss: f64,
    /// Oracle metric, present when ground truth is supplied.
    pub rse: Option<f64>,
    pub sigma_min_signal: Option<f64>,
    pub overparam_norm: Option<f64>,
    pub misalignment: Option<f64>,
    /// Validation loss, present under early stopping.
    pub val_loss: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    /// Iterate with the smallest recorded rse.
    pub fn min_rse(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.rse.map(|v| (r.iter, v)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

    pub fn final_rse(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rse)
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_loss)
    }

    fn opt(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.12e}")).unwrap_or_default()
    }

    /// CSV body with the documented column contract.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iter,train_loss,rse,sigma_min_signal,overparam_norm,misalignment,elapsed_ms,val_loss\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{},{},{},{},{:.3},{}\n",
                r.iter,
                r.train_loss,
                Self::opt(r.rse),
                Self::opt(r.sigma_min_signal),
                Self::opt(r.overparam_norm),
                Self::opt(r.misalignment),
                r.elapsed_ms,
                Self::opt(r.val_loss),
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trace: SolveTrace,
    /// Final factor U_T.
    pub factor: Tensor3,
    /// Final estimate U_T * U_T'.
    pub estimate: Tensor3,
}

/// i.i.d. N(0, alpha^2 / R) factor of shape `n x rank x k`.
pub fn init_small(n: usize, rank: usize, k: usize, alpha: f64, seed: u64) -> Result<Tensor3> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(TubalError::InvalidParam("alpha must be > 0".into()));
    }
    let std = alpha / (rank as f64).sqrt();
    let mut rng = stream_rng(seed, stream::INIT);
    let mut t = Tensor3::zeros(n, rank, k);
    for v in t.data_mut() {
        *v = std * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(t)
}

/// Square-root factor of the best rank-`rank` PSD approximation of a
/// symmetric tensor: per Fourier slice, a Hermitian eigendecomposition with
/// negative eigenvalues clipped to zero.
pub fn spectral_factor(m0: &Tensor3, rank: usize) -> Result<Tensor3> {
    let (n, n2, k) = m0.dims();
    if n != n2 {
        return Err(TubalError::DimMismatch(
            "spectral factor needs a square tensor".into(),
        ));
    }
    if rank == 0 || rank > n {
        return Err(TubalError::InvalidParam(format!(
            "rank {rank} out of range 1..={n}"
        )));
    }
    let f = fft_mode3(m0);
    let mut fu = FourierSlices::zeros(n, rank, k);
    for l in 0..FourierSlices::explicit_slices(k) {
        let mut h = cmat::to_dmatrix(f.slice(l), n, n);
        // Kill round-off asymmetry before the Hermitian solver.
        let ha = h.adjoint();
        h += ha;
        h.scale_mut(0.5);
        let eig = h
            .try_symmetric_eigen(f64::EPSILON, cmat::SVD_MAX_ITER)
            .ok_or(TubalError::EigFailure { slice: l })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut slice = vec![Complex64::ZERO; n * rank];
        for (c, &idx) in order.iter().take(rank).enumerate() {
            let lam = eig.eigenvalues[idx].max(0.0);
            let s = lam.sqrt();
            for i in 0..n {
                slice[c * n + i] = eig.eigenvectors[(i, idx)] * s;
            }
        }
        fu.slices[l] = slice;
    }
    fu.mirror_tail();
    Ok(crate::talg::ifft_mode3_unchecked(&fu))
}

/// Spectral initialization: factor the symmetrized backprojection of the
/// measurements.
pub fn init_spectral(op: &SensingOperator, y: &[f64], rank: usize) -> Result<Tensor3> {
    let m0 = backprojection(op, y)?;
    spectral_factor(&m0, rank)
}

fn init_factor(op: &SensingOperator, y: &[f64], config: &SolverConfig) -> Result<Tensor3> {
    match config.init {
        InitScheme::Small { alpha } | InitScheme::Large { alpha } => {
            init_small(op.n(), config.rank, op.k(), alpha, config.seed)
        }
        InitScheme::Spectral => init_spectral(op, y, config.rank),
    }
}

fn gradient_normalizer(op: &SensingOperator) -> f64 {
    match op.scaling() {
        Scaling::Raw => 1.0 / op.m() as f64,
        Scaling::InvSqrtM => 1.0,
    }
}

fn loss_normalizer(op: &SensingOperator) -> f64 {
    match op.scaling() {
        Scaling::Raw => 1.0 / (4.0 * op.m() as f64),
        Scaling::InvSqrtM => 0.25,
    }
}

/// Train loss `(1/4m) ||y - M(U U')||^2` at a factor.
pub fn train_loss(op: &SensingOperator, y: &[f64], u: &Tensor3) -> Result<f64> {
    let w = tprod(u, &ttranspose(u))?;
    let fw = op.forward(&w)?;
    let sq: f64 = fw.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq * loss_normalizer(op))
}

/// One factorized gradient step.
pub fn fgd_step(
    u: &Tensor3,
    op: &SensingOperator,
    y: &[f64],
    eta: f64,
    symmetrize: bool,
) -> Result<Tensor3> {
    let w = tprod(u, &ttranspose(u))?;
    let (_, grad) = op.residual_gradient(w.data(), y);
    if !grad.iter().all(|v| v.is_finite()) {
        return Err(TubalError::Diverged {
            iter: 0,
            loss: f64::INFINITY,
        });
    }
    let g = Tensor3::from_data(op.n(), op.n(), op.k(), grad)?;
    let g = if symmetrize {
        g.add(&ttranspose(&g)).scale(0.5)
    } else {
        g
    };
    let step = tprod(&g, u)?;
    let mut next = u.clone();
    next.axpy_mut(-eta * gradient_normalizer(op), &step);
    Ok(next)
}

/// Per-iterate validation data consumed read-only by the loop.
pub(crate) struct Validation<'a> {
    pub op: &'a SensingOperator,
    pub y: &'a [f64],
}

pub(crate) struct ValTracking {
    pub curve: Vec<f64>,
    pub best_iter: usize,
    pub best_val: f64,
    pub best_factor: Tensor3,
}

pub(crate) fn solve_inner(
    op: &SensingOperator,
    y: &[f64],
    val: Option<Validation<'_>>,
    config: &SolverConfig,
    gt: Option<&GroundTruth>,
) -> Result<(SolveOutcome, Option<ValTracking>)> {
    config.validate(op.n())?;
    if y.len() != op.m() {
        return Err(TubalError::DimMismatch(format!(
            "measurement vector length {} vs m = {}",
            y.len(),
            op.m()
        )));
    }
    let grad_norm = gradient_normalizer(op);
    let loss_norm = loss_normalizer(op);
    let mut u = init_factor(op, y, config)?;
    let mut trace = SolveTrace::default();
    let mut tracking: Option<ValTracking> = None;
    let mut initial_loss = f64::NAN;
    let t_max = config.max_iters;
    for t in 0..=t_max {
        let tick = Instant::now();
        let w = tprod(&u, &ttranspose(&u))?;
        let (res, grad) = op.residual_gradient(w.data(), y);
        let loss = res.iter().map(|v| v * v).sum::<f64>() * loss_norm;
        if !loss.is_finite() {
            return Err(TubalError::Diverged { iter: t, loss });
        }
        if t == 0 {
            initial_loss = loss;
        } else if loss > config.divergence_guard * (initial_loss + f64::EPSILON) {
            return Err(TubalError::Diverged { iter: t, loss });
        }
        let rse = gt.map(|g| g.rse(&w));
        let diag = match (gt, config.diag_stride) {
            (Some(g), s) if s > 0 && t % s == 0 => Some(phase_diagnostics(&u, g)?),
            _ => None,
        };
        let val_loss = match &val {
            Some(v) => {
                let fv = v.op.forward(&w)?;
                let sq: f64 = fv.iter().zip(v.y).map(|(a, b)| (a - b) * (a - b)).sum();
                let e_t = sq / (4.0 * v.op.m() as f64);
                let track = tracking.get_or_insert_with(|| ValTracking {
                    curve: Vec::with_capacity(t_max + 1),
                    best_iter: 0,
                    best_val: f64::INFINITY,
                    best_factor: u.clone(),
                });
                track.curve.push(e_t);
                // The argmin ranges over iterates 1..=T; ties keep the
                // earliest iterate.
                if t >= 1 && e_t < track.best_val {
                    track.best_val = e_t;
                    track.best_iter = t;
                    track.best_factor = u.clone();
                }
                Some(e_t)
            }
            None => None,
        };
        trace.rows.push(TraceRow {
            iter: t,
            train_loss: loss,
            rse,
            sigma_min_signal: diag.as_ref().map(|d| d.sigma_min_signal),
            overparam_norm: diag.as_ref().map(|d| d.overparam_norm),
            misalignment: diag.as_ref().map(|d| d.misalignment),
            val_loss,
            elapsed_ms: tick.elapsed().as_secs_f64() * 1e3,
        });
        if t == t_max {
            break;
        }
        if !grad.iter().all(|v| v.is_finite()) {
            return Err(TubalError::Diverged { iter: t, loss });
        }
        let g = Tensor3::from_data(op.n(), op.n(), op.k(), grad)?;
        let g = if config.symmetrize_gradient {
            g.add(&ttranspose(&g)).scale(0.5)
        } else {
            g
        };
        let step = tprod(&g, &u)?;
        u.axpy_mut(-config.eta * grad_norm, &step);
    }
    let estimate = tprod(&u, &ttranspose(&u))?;
    Ok((
        SolveOutcome {
            trace,
            factor: u,
            estimate,
        },
        tracking,
    ))
}

/// Runs T iterations of FGD, recording the trace; oracle metrics and phase
/// diagnostics are filled when ground truth is supplied.
pub fn solve(
    op: &SensingOperator,
    y: &[f64],
    config: &SolverConfig,
    gt: Option<&GroundTruth>,
) -> Result<SolveOutcome> {
    solve_inner(op, y, None, config, gt).map(|(outcome, _)| outcome)
}

/// The three trajectory indicators of the signal/over-parameterization
/// decomposition.
#[derive(Debug, Clone, Copy)]
pub struct PhaseDiagnostics {
    /// Smallest singular value of the block-diagonal Fourier matrix of
    /// `U * W`, the signal magnitude.
    pub sigma_min_signal: f64,
    /// Spectral norm of `U * W_perp`, the over-parameterization magnitude.
    pub overparam_norm: f64,
    /// Spectral norm of the projection of the signal column space onto the
    /// complement of the ground-truth column space.
    pub misalignment: f64,
    /// Set when `V_x' * U` is rank deficient on some slice; the
    /// misalignment is then reported as 1 by convention.
    pub degenerate: bool,
}

const DEGENERACY_TOL: f64 = 1e-10;

/// Computes the signal/over-parameterization indicators of an iterate.
///
/// `W` holds the top-r right directions of `V_x' * U` per Fourier slice;
/// all three indicators are gauge-invariant, so the per-slice bases need no
/// cross-slice alignment.
pub fn phase_diagnostics(u: &Tensor3, gt: &GroundTruth) -> Result<PhaseDiagnostics> {
    let (n, rank, k) = u.dims();
    let r = gt.r;
    if rank < r {
        return Err(TubalError::InvalidParam(format!(
            "factor width {rank} below true rank {r}"
        )));
    }
    let fu = fft_mode3(u);
    let fv = &gt.v_x_fourier;
    let mut sigma_min_signal = f64::INFINITY;
    let mut overparam = 0.0f64;
    let mut misalignment = 0.0f64;
    let mut degenerate = false;
    for l in 0..FourierSlices::explicit_slices(k) {
        // r x rank matrix V^H U on this slice.
        let m = cmat::adjoint_mul(fv.slice(l), fu.slice(l), n, r, rank);
        let svd = cmat::slice_svd(&m, r, rank, l)?;
        let smax = svd.sigma.first().copied().unwrap_or(0.0);
        let smin = svd.sigma.last().copied().unwrap_or(0.0);
        // Judged against the scale of U itself: a projection that is
        // uniformly negligible is rank-deficient even if its tiny singular
        // values happen to be comparable to each other.
        let u_scale: f64 = fu.slice(l).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let slice_degenerate =
            smax <= DEGENERACY_TOL * u_scale || smin <= DEGENERACY_TOL * smax;
        degenerate |= slice_degenerate;

        // Signal factor U W (n x r).
        let w = &svd.v; // rank x r, orthonormal columns
        let mut sig = vec![Complex64::ZERO; n * r];
        cmat::gemm_acc(&mut sig, fu.slice(l), w, n, rank, r);
        if slice_degenerate {
            // Rank-deficient signal: its r-th singular value is zero by
            // convention (null right-directions carry arbitrary gauge).
            sigma_min_signal = 0.0;
        } else {
            let sv = cmat::slice_singular_values(&sig, n, r, l)?;
            sigma_min_signal = sigma_min_signal.min(sv.last().copied().unwrap_or(0.0));
        }

        if rank > r {
            let wperp = cmat::unitary_complement(w, rank, r)?;
            let mut over = vec![Complex64::ZERO; n * (rank - r)];
            cmat::gemm_acc(&mut over, fu.slice(l), &wperp, n, rank, rank - r);
            overparam = overparam.max(cmat::spectral_norm(&over, n, rank - r, l)?);
        }

        if !slice_degenerate {
            // Orthonormal basis of col(U W), projected off col(V_x).
            let basis = cmat::column_basis(&sig, n, r, r, l)?;
            let coeff = cmat::adjoint_mul(fv.slice(l), &basis, n, r, r);
            let mut proj = basis.clone();
            let back = reconstruct(fv.slice(l), &coeff, n, r, r);
            for (p, q) in proj.iter_mut().zip(back) {
                *p -= q;
            }
            misalignment = misalignment.max(cmat::spectral_norm(&proj, n, r, l)?);
        }
    }
    if degenerate {
        misalignment = 1.0;
    }
    Ok(PhaseDiagnostics {
        sigma_min_signal,
        overparam_norm: overparam,
        misalignment,
        degenerate,
    })
}

fn reconstruct(
    v: &[Complex64],
    coeff: &[Complex64],
    n: usize,
    r: usize,
    q: usize,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; n * q];
    cmat::gemm_acc(&mut out, v, coeff, n, r, q);
    out
}

/// In-subspace and over-parameterization components of the recovery error.
#[derive(Debug, Clone, Copy)]
pub struct ErrorDecomposition {
    /// Spectral norm of `V_x' * (U U' - X)`.
    pub in_subspace: f64,
    /// Squared spectral norm of `U * W_perp`.
    pub overparam: f64,
    /// Spectral norm of `U U' - X`.
    pub total: f64,
}

pub fn error_decomposition(u: &Tensor3, gt: &GroundTruth) -> Result<ErrorDecomposition> {
    let d = tprod(u, &ttranspose(u))?.sub(&gt.x_star);
    let projected = tprod(&ttranspose(&gt.v_x), &d)?;
    let in_subspace = crate::talg::norms(&projected)?.spectral;
    let diag = phase_diagnostics(u, gt)?;
    let overparam = diag.overparam_norm * diag.overparam_norm;
    let total = crate::talg::norms(&d)?.spectral;
    assert!(
        diag.degenerate || total <= 4.0 * in_subspace + overparam + 1e-8 * (1.0 + total),
        "error decomposition bound violated: {total} vs {in_subspace}/{overparam}"
    );
    Ok(ErrorDecomposition {
        in_subspace,
        overparam,
        total,
    })
}

/// Information-theoretic lower bound `n r k sigma^2 / ((1 + delta) m)` on
/// the mean squared recovery error, reported alongside achieved errors.
pub fn minimax_floor(n: usize, r: usize, k: usize, sigma: f64, m: usize, delta: f64) -> f64 {
    (n * r * k) as f64 * sigma * sigma / ((1.0 + delta) * m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimax_floor_values() {
        assert_eq!(minimax_floor(30, 3, 3, 0.0, 2700, 0.0), 0.0);
        let v = minimax_floor(30, 3, 3, 1e-3, 2700, 0.0);
        assert!((v - 1e-7).abs() < 1e-20);
        let half = minimax_floor(30, 3, 3, 1e-3, 5400, 0.0);
        assert!((v / half - 2.0).abs() < 1e-12);
    }

    #[test]
    fn init_small_scale_and_seeds() {
        let (n, rank, k) = (20, 4, 3);
        let alpha = 1e-10;
        let u = init_small(n, rank, k, alpha, 77).unwrap();
        let expect = alpha * ((n * k) as f64).sqrt();
        let got = u.frobenius();
        assert!(
            (got / expect - 1.0).abs() < 0.3,
            "||U0|| = {got}, expected about {expect}"
        );
        let v = init_small(n, rank, k, alpha, 78).unwrap();
        assert_ne!(u.data(), v.data());
        assert!(init_small(n, rank, k, 0.0, 1).is_err());
    }
}
