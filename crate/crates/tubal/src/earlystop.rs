//! Train/validation splitting of measurements and the argmin-validation
//! early-stopping wrapper around the FGD solver.
//!
//! The loop trains on the training measurements only; after each iteration
//! the validation loss `e_t = ||y_val - M_val(U_t * U_t')||^2 / (4 m_val)`
//! is recorded, and the returned estimate is the iterate minimizing it.
//! Only the per-measurement count in the normalization differs from the
//! quarter-loss form of the training objective; the argmin is invariant to
//! any positive rescaling.

use rand::seq::SliceRandom;

use crate::error::{Result, TubalError};
use crate::fgd::{solve_inner, GroundTruth, SolveTrace, SolverConfig, Validation};
use crate::rng::{stream, stream_rng};
use crate::sensing::SensingOperator;
use crate::talg::{tprod, ttranspose, Tensor3};

/// Disjoint, exhaustive partition of measurement indices.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub val_frac: f64,
    pub seed: u64,
}

impl SplitPlan {
    pub fn m(&self) -> usize {
        self.train_indices.len() + self.val_indices.len()
    }
}

/// Uniformly random partition without replacement; `|val|` is
/// `round(val_frac * m)`, clamped so both sides stay nonempty.
pub fn split(m: usize, val_frac: f64, seed: u64) -> Result<SplitPlan> {
    if m < 2 {
        return Err(TubalError::InvalidParam(
            "need at least 2 measurements".into(),
        ));
    }
    if !val_frac.is_finite() || val_frac <= 0.0 || val_frac >= 1.0 {
        return Err(TubalError::InvalidParam(format!(
            "val_frac must lie in (0, 1), got {val_frac}"
        )));
    }
    let n_val = ((val_frac * m as f64).round() as usize).clamp(1, m - 1);
    let mut indices: Vec<usize> = (0..m).collect();
    let mut rng = stream_rng(seed, stream::SPLIT);
    indices.shuffle(&mut rng);
    let mut val_indices: Vec<usize> = indices[..n_val].to_vec();
    let mut train_indices: Vec<usize> = indices[n_val..].to_vec();
    val_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok(SplitPlan {
        train_indices,
        val_indices,
        val_frac,
        seed,
    })
}

/// Validation loss of a factor iterate: quarter squared residual on the
/// validation measurements, normalized by their count.
pub fn validation_loss(u: &Tensor3, op_val: &SensingOperator, y_val: &[f64]) -> Result<f64> {
    let w = tprod(u, &ttranspose(u))?;
    let fv = op_val.forward(&w)?;
    if y_val.len() != fv.len() {
        return Err(TubalError::DimMismatch("validation vector length".into()));
    }
    let sq: f64 = fv.iter().zip(y_val).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / (4.0 * op_val.m() as f64))
}

#[derive(Debug, Clone)]
pub struct EarlyStopResult {
    /// Iterate index minimizing the validation loss (ties keep the earliest).
    pub t_check: usize,
    /// e_t for t = 0..=T.
    pub val_loss_curve: Vec<f64>,
    /// Estimate at the chosen iterate, `U_t * U_t'`.
    pub chosen_estimate: Tensor3,
    pub chosen_factor: Tensor3,
    /// Oracle metric at the chosen iterate, when ground truth is supplied.
    pub rse_at_t_check: Option<f64>,
    /// Final factor U_T, unaffected by the stopping choice.
    pub final_factor: Tensor3,
    /// Trace with the `val_loss` column populated.
    pub trace: SolveTrace,
}

impl EarlyStopResult {
    pub fn val_loss_min(&self) -> f64 {
        self.val_loss_curve[self.t_check]
    }

    /// One-line summary record `t_check,val_loss_min,rse_at_t_check`.
    pub fn summary_line(&self) -> String {
        let rse = self
            .rse_at_t_check
            .map(|v| format!("{v:.12e}"))
            .unwrap_or_default();
        format!("{},{:.12e},{}", self.t_check, self.val_loss_min(), rse)
    }
}

/// Trains on the train split only, records the validation loss each
/// iteration, and returns the argmin iterate.
pub fn run_with_early_stopping(
    op: &SensingOperator,
    y: &[f64],
    config: &SolverConfig,
    plan: &SplitPlan,
    gt: Option<&GroundTruth>,
) -> Result<EarlyStopResult> {
    if plan.m() != op.m() || y.len() != op.m() {
        return Err(TubalError::DimMismatch(format!(
            "split plan covers {} measurements, operator has {}",
            plan.m(),
            op.m()
        )));
    }
    let op_train = op.subset(&plan.train_indices)?;
    let y_train: Vec<f64> = plan.train_indices.iter().map(|&i| y[i]).collect();
    let op_val = op.subset(&plan.val_indices)?;
    let y_val: Vec<f64> = plan.val_indices.iter().map(|&i| y[i]).collect();
    let (outcome, tracking) = solve_inner(
        &op_train,
        &y_train,
        Some(Validation {
            op: &op_val,
            y: &y_val,
        }),
        config,
        gt,
    )?;
    let tracking = tracking.expect("validation data was supplied");
    let chosen_factor = tracking.best_factor;
    let chosen_estimate = tprod(&chosen_factor, &ttranspose(&chosen_factor))?;
    let rse_at_t_check = gt.map(|g| g.rse(&chosen_estimate));
    Ok(EarlyStopResult {
        t_check: tracking.best_iter,
        val_loss_curve: tracking.curve,
        chosen_estimate,
        chosen_factor,
        rse_at_t_check,
        final_factor: outcome.factor,
        trace: outcome.trace,
    })
}

/// Reports whether the simplified sufficient validation-size condition
/// `m_val >= r^2 kappa^8 log T` holds (unit constant). Informational only;
/// nothing is enforced.
pub fn validation_size_adequate(m_val: usize, r: usize, kappa: f64, t_max: usize) -> bool {
    let need = (r * r) as f64 * kappa.powi(8) * (t_max.max(2) as f64).ln();
    m_val as f64 >= need
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_determinism() {
        let plan = split(100, 0.05, 9).unwrap();
        assert_eq!(plan.val_indices.len(), 5);
        assert_eq!(plan.train_indices.len(), 95);

        let tiny = split(2, 0.5, 9).unwrap();
        assert_eq!(tiny.val_indices.len(), 1);
        assert_eq!(tiny.train_indices.len(), 1);

        let again = split(100, 0.05, 9).unwrap();
        assert_eq!(plan.val_indices, again.val_indices);
        let other = split(100, 0.05, 10).unwrap();
        assert_ne!(plan.val_indices, other.val_indices);

        // Disjoint and exhaustive.
        let mut all: Vec<usize> = plan
            .train_indices
            .iter()
            .chain(&plan.val_indices)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split(1, 0.5, 0).is_err());
        assert!(split(10, 0.0, 0).is_err());
        assert!(split(10, 1.0, 0).is_err());
    }

    #[test]
    fn validation_size_condition_reports() {
        assert!(validation_size_adequate(1000, 2, 1.2, 5000));
        assert!(!validation_size_adequate(5, 3, 2.0, 5000));
    }
}
