//! Asymmetric low-tubal-rank tensor completion from Bernoulli-masked noisy
//! entries, factorized as `L * R'` and optimized by simultaneous gradient
//! steps on both factors, with validation-based early stopping and
//! PSNR / relative-error reporting.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TubalError};
use crate::rng::{stream, stream_rng};
use crate::sensing::{sample_noise, NoiseSpec};
use crate::talg::{tprod, ttranspose, Tensor3};

/// Boolean tensor of observation positions, same layout as [`Tensor3`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask3 {
    n1: usize,
    n2: usize,
    k: usize,
    data: Vec<bool>,
}

impl Mask3 {
    pub fn new_false(n1: usize, n2: usize, k: usize) -> Self {
        Self {
            n1,
            n2,
            k,
            data: vec![false; n1 * n2 * k],
        }
    }

    /// i.i.d. Bernoulli(p) mask drawn from the mask stream of `seed`.
    pub fn bernoulli(n1: usize, n2: usize, k: usize, p: f64, seed: u64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 || p > 1.0 {
            return Err(TubalError::InvalidParam(format!(
                "observation probability must lie in (0, 1], got {p}"
            )));
        }
        let mut rng = stream_rng(seed, stream::MASK);
        let data = (0..n1 * n2 * k)
            .map(|_| rng.random::<f64>() < p)
            .collect();
        Ok(Self { n1, n2, k, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.k)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| !(*a && *b))
    }
}

/// Noisy Bernoulli observations of a target tensor: `(truth + noise)` at
/// observed positions, exactly zero elsewhere.
#[derive(Debug, Clone)]
pub struct MaskedObservation {
    pub observed: Tensor3,
    pub mask: Mask3,
    pub p: f64,
    pub seed: u64,
}

/// Samples a mask and entrywise noise, masking the noisy truth.
pub fn observe(truth: &Tensor3, p: f64, noise: &NoiseSpec, seed: u64) -> Result<MaskedObservation> {
    let (n1, n2, k) = truth.dims();
    let mask = Mask3::bernoulli(n1, n2, k, p, seed)?;
    let noise_values = sample_noise(noise, truth.len())?;
    let mut observed = Tensor3::zeros(n1, n2, k);
    for (idx, out) in observed.data_mut().iter_mut().enumerate() {
        if mask.data[idx] {
            *out = truth.data()[idx] + noise_values[idx];
        }
    }
    Ok(MaskedObservation {
        observed,
        mask,
        p,
        seed,
    })
}

/// Carves a validation subset out of the observed entries by independent
/// Bernoulli thinning with fraction `val_frac`; the remainder trains.
pub fn thin_validation(obs: &MaskedObservation, val_frac: f64, seed: u64) -> Result<(Mask3, Mask3)> {
    if !val_frac.is_finite() || val_frac <= 0.0 || val_frac >= 1.0 {
        return Err(TubalError::InvalidParam(format!(
            "val_frac must lie in (0, 1), got {val_frac}"
        )));
    }
    let (n1, n2, k) = obs.mask.dims();
    let mut train = Mask3::new_false(n1, n2, k);
    let mut val = Mask3::new_false(n1, n2, k);
    let mut rng = stream_rng(seed, stream::SPLIT);
    for idx in 0..obs.mask.data.len() {
        if obs.mask.data[idx] {
            if rng.random::<f64>() < val_frac {
                val.data[idx] = true;
            } else {
                train.data[idx] = true;
            }
        }
    }
    if train.count() == 0 || val.count() == 0 {
        return Err(TubalError::InvalidParam(
            "validation thinning emptied one side of the split".into(),
        ));
    }
    Ok((train, val))
}

/// The two completion factors, `l` of shape n1 x R x k and `rt` of shape
/// n2 x R x k; the estimate is `l * rt'`.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub l: Tensor3,
    pub rt: Tensor3,
}

impl FactorPair {
    /// Both factors i.i.d. N(0, alpha^2 / R).
    pub fn init_gaussian(
        n1: usize,
        n2: usize,
        rank: usize,
        k: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(TubalError::InvalidParam("alpha must be > 0".into()));
        }
        let std = alpha / (rank as f64).sqrt();
        let mut rng = stream_rng(seed, stream::INIT);
        let mut l = Tensor3::zeros(n1, rank, k);
        for v in l.data_mut() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
        let mut rt = Tensor3::zeros(n2, rank, k);
        for v in rt.data_mut() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(Self { l, rt })
    }

    pub fn zeros(n1: usize, n2: usize, rank: usize, k: usize) -> Self {
        Self {
            l: Tensor3::zeros(n1, rank, k),
            rt: Tensor3::zeros(n2, rank, k),
        }
    }

    pub fn estimate(&self) -> Result<Tensor3> {
        tprod(&self.l, &ttranspose(&self.rt))
    }

    /// Normalized factor imbalance `||L'L - R'R||_F / max(||L'L||_F,
    /// ||R'R||_F)`, the drift monitor for the balancedness of the two
    /// factors (1 when both Gram tensors vanish).
    pub fn balance_gap(&self) -> Result<f64> {
        let gl = tprod(&ttranspose(&self.l), &self.l)?;
        let gr = tprod(&ttranspose(&self.rt), &self.rt)?;
        let denom = gl.frobenius().max(gr.frobenius());
        if denom == 0.0 {
            return Ok(1.0);
        }
        Ok(gl.sub(&gr).frobenius() / denom)
    }
}

/// Masked half-quadratic loss `(1/2p) || mask . (L R' - observed) ||_F^2`.
pub fn completion_loss(fp: &FactorPair, mask: &Mask3, observed: &Tensor3, p: f64) -> Result<f64> {
    let est = fp.estimate()?;
    let mut sq = 0.0;
    for (idx, flag) in mask.data.iter().enumerate() {
        if *flag {
            let d = est.data()[idx] - observed.data()[idx];
            sq += d * d;
        }
    }
    Ok(sq / (2.0 * p))
}

/// One simultaneous gradient step on both factors; both updates read the
/// pre-step pair.
pub fn completion_step(
    fp: &FactorPair,
    mask: &Mask3,
    observed: &Tensor3,
    p: f64,
    eta: f64,
) -> Result<FactorPair> {
    let est = fp.estimate()?;
    let (n1, n2, k) = est.dims();
    let mut g = Tensor3::zeros(n1, n2, k);
    for (idx, flag) in mask.data.iter().enumerate() {
        if *flag {
            g.data_mut()[idx] = est.data()[idx] - observed.data()[idx];
        }
    }
    if !g.is_finite() {
        return Err(TubalError::Diverged {
            iter: 0,
            loss: f64::INFINITY,
        });
    }
    let step = eta / p;
    let gl = tprod(&g, &fp.rt)?;
    let gr = tprod(&ttranspose(&g), &fp.l)?;
    let mut l = fp.l.clone();
    l.axpy_mut(-step, &gl);
    let mut rt = fp.rt.clone();
    rt.axpy_mut(-step, &gr);
    Ok(FactorPair { l, rt })
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionConfig {
    /// Over-specified factor width R.
    pub rank: usize,
    pub eta: f64,
    pub max_iters: usize,
    pub alpha: f64,
    pub divergence_guard: f64,
    pub seed: u64,
}

impl CompletionConfig {
    pub fn new(rank: usize, eta: f64, max_iters: usize, alpha: f64, seed: u64) -> Self {
        Self {
            rank,
            eta,
            max_iters,
            alpha,
            divergence_guard: 1e6,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionTraceRow {
    pub iter: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Oracle metrics, present when the truth is supplied.
    pub re: Option<f64>,
    pub psnr: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    /// Argmin of the validation loss over iterates 1..=T.
    pub t_check: usize,
    pub es_estimate: Tensor3,
    pub es_factors: FactorPair,
    pub re_es: Option<f64>,
    pub psnr_es: Option<f64>,
    /// Oracle-best iterate (smallest relative error), when truth supplied.
    pub t_best: Option<usize>,
    pub re_best: Option<f64>,
    pub psnr_best: Option<f64>,
    pub trace: Vec<CompletionTraceRow>,
    /// Factor-imbalance monitor at iterate 0 and its maximum over the run.
    pub balance_initial: f64,
    pub balance_max: f64,
}

impl CompletionOutcome {
    /// One-line summary record
    /// `method,p,sigma,R,re_best,re_es,psnr_best,psnr_es`.
    pub fn summary_line(&self, method: &str, p: f64, sigma: f64, rank: usize) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        format!(
            "{method},{p},{sigma},{rank},{},{},{},{}",
            f(self.re_best),
            f(self.re_es),
            f(self.psnr_best),
            f(self.psnr_es),
        )
    }

    /// CSV body `iter,train_loss,val_loss,re,psnr`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,train_loss,val_loss,re,psnr\n");
        for r in &self.trace {
            let re = r.re.map(|v| format!("{v:.12e}")).unwrap_or_default();
            let psnr = r.psnr.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{},{}\n",
                r.iter, r.train_loss, r.val_loss, re, psnr
            ));
        }
        out
    }
}

/// Iterates masked FGD on the train mask, evaluating the validation loss on
/// the held-out mask; returns both the early-stopped and (when the truth is
/// available) the oracle-best iterates.
pub fn complete(
    obs: &MaskedObservation,
    train: &Mask3,
    val: &Mask3,
    config: &CompletionConfig,
    truth: Option<&Tensor3>,
) -> Result<CompletionOutcome> {
    let (n1, n2, k) = obs.observed.dims();
    if train.dims() != (n1, n2, k) || val.dims() != (n1, n2, k) {
        return Err(TubalError::DimMismatch("mask shape".into()));
    }
    if !train.is_disjoint(val) {
        return Err(TubalError::InvalidParam(
            "train and validation masks overlap".into(),
        ));
    }
    if config.rank == 0 || config.rank > n1.min(n2) {
        return Err(TubalError::InvalidParam(format!(
            "rank {} out of range 1..={}",
            config.rank,
            n1.min(n2)
        )));
    }
    let p = obs.p;
    let step = config.eta / p;
    let mut fp = FactorPair::init_gaussian(n1, n2, config.rank, k, config.alpha, config.seed)?;
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut best_val = f64::INFINITY;
    let mut t_check = 0usize;
    let mut es_factors = fp.clone();
    let mut best_re = f64::INFINITY;
    let mut t_best = None;
    let mut initial_loss = f64::NAN;
    let mut balance_initial = 0.0;
    let mut balance_max = 0.0f64;
    for t in 0..=config.max_iters {
        let tick = Instant::now();
        let est = fp.estimate()?;
        let mut train_sq = 0.0;
        let mut g = Tensor3::zeros(n1, n2, k);
        for (idx, flag) in train.data.iter().enumerate() {
            if *flag {
                let d = est.data()[idx] - obs.observed.data()[idx];
                g.data_mut()[idx] = d;
                train_sq += d * d;
            }
        }
        let train_loss = train_sq / (2.0 * p);
        if !train_loss.is_finite() {
            return Err(TubalError::Diverged {
                iter: t,
                loss: train_loss,
            });
        }
        if t == 0 {
            initial_loss = train_loss;
        } else if train_loss > config.divergence_guard * (initial_loss + f64::EPSILON) {
            return Err(TubalError::Diverged {
                iter: t,
                loss: train_loss,
            });
        }
        let mut val_sq = 0.0;
        for (idx, flag) in val.data.iter().enumerate() {
            if *flag {
                let d = est.data()[idx] - obs.observed.data()[idx];
                val_sq += d * d;
            }
        }
        let val_loss = val_sq / (2.0 * p);
        if t >= 1 && val_loss < best_val {
            best_val = val_loss;
            t_check = t;
            es_factors = fp.clone();
        }
        let (re, psnr_v) = match truth {
            Some(x) => {
                let re = relative_error(&est, x)?;
                if re < best_re {
                    best_re = re;
                    t_best = Some(t);
                }
                (Some(re), Some(psnr(&est, x)?))
            }
            None => (None, None),
        };
        let gap = fp.balance_gap()?;
        if t == 0 {
            balance_initial = gap;
        }
        balance_max = balance_max.max(gap);
        trace.push(CompletionTraceRow {
            iter: t,
            train_loss,
            val_loss,
            re,
            psnr: psnr_v,
            elapsed_ms: tick.elapsed().as_secs_f64() * 1e3,
        });
        if t == config.max_iters {
            break;
        }
        let gl = tprod(&g, &fp.rt)?;
        let gr = tprod(&ttranspose(&g), &fp.l)?;
        let mut l = fp.l;
        l.axpy_mut(-step, &gl);
        let mut rt = fp.rt;
        rt.axpy_mut(-step, &gr);
        fp = FactorPair { l, rt };
    }
    let es_estimate = es_factors.estimate()?;
    let (re_es, psnr_es) = match truth {
        Some(x) => (
            Some(relative_error(&es_estimate, x)?),
            Some(psnr(&es_estimate, x)?),
        ),
        None => (None, None),
    };
    let (re_best, psnr_best) = match (truth, t_best) {
        (Some(_), Some(_)) => {
            let best_psnr = trace
                .iter()
                .filter_map(|r| r.psnr)
                .fold(f64::NEG_INFINITY, f64::max);
            (Some(best_re), Some(best_psnr))
        }
        _ => (None, None),
    };
    Ok(CompletionOutcome {
        t_check,
        es_estimate,
        es_factors,
        re_es,
        psnr_es,
        t_best,
        re_best,
        psnr_best,
        trace,
        balance_initial,
        balance_max,
    })
}

/// Synthetic asymmetric low-tubal-rank target `L0 * R0'` from Gaussian
/// factors, scaled to unit max-entry so additive noise levels read as
/// fractions of the signal peak.
pub fn synthesize_lowrank(n1: usize, n2: usize, r: usize, k: usize, seed: u64) -> Result<Tensor3> {
    if r == 0 || r > n1.min(n2) {
        return Err(TubalError::InvalidParam(format!(
            "rank {r} out of range 1..={}",
            n1.min(n2)
        )));
    }
    let mut rng = stream_rng(seed, stream::TRUTH);
    let l = Tensor3::gaussian(n1, r, k, &mut rng);
    let rt = Tensor3::gaussian(n2, r, k, &mut rng);
    let mut x = tprod(&l, &ttranspose(&rt))?;
    let peak = x.max_abs();
    if peak == 0.0 {
        return Err(TubalError::ZeroTensor);
    }
    x.scale_mut(1.0 / peak);
    Ok(x)
}

/// PSNR is capped here when the estimate matches the truth exactly.
pub const PSNR_CAP: f64 = 300.0;

/// Peak signal-to-noise ratio
/// `10 log10( ||truth||_inf^2 / mean squared error )`.
pub fn psnr(estimate: &Tensor3, truth: &Tensor3) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return Err(TubalError::DimMismatch("psnr shapes".into()));
    }
    let peak = truth.max_abs();
    if peak == 0.0 {
        return Err(TubalError::ZeroTensor);
    }
    let mse = estimate.sub(truth).frobenius().powi(2) / truth.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP))
}

/// Relative Frobenius error `||estimate - truth||_F / ||truth||_F`.
pub fn relative_error(estimate: &Tensor3, truth: &Tensor3) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return Err(TubalError::DimMismatch("relative error shapes".into()));
    }
    let denom = truth.frobenius();
    if denom == 0.0 {
        return Err(TubalError::ZeroTensor);
    }
    Ok(estimate.sub(truth).frobenius() / denom)
}
