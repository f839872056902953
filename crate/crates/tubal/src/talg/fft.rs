//! Mode-3 discrete Fourier transform of third-order tensors.
//!
//! Conventions follow the MATLAB `fft`/`ifft` pair the t-product literature
//! assumes: the forward transform is unnormalized, the inverse carries the
//! `1/k` factor. For a real tensor the transformed slices satisfy the
//! conjugate symmetry `slice[k - j] = conj(slice[j])` (0-based, j >= 1),
//! which the product and factorization kernels exploit.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TubalError};
use crate::talg::Tensor3;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(k: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(k)
        } else {
            p.plan_fft_inverse(k)
        }
    })
}

/// Complex frontal slices of a tensor after the mode-3 DFT.
///
/// Slice `l` is stored column-major, matching [`Tensor3`]. When the slices
/// originate from a real tensor they are conjugate-symmetric and
/// [`ifft_mode3`] recovers the tensor to round-off.
#[derive(Debug, Clone)]
pub struct FourierSlices {
    pub(crate) n1: usize,
    pub(crate) n2: usize,
    pub(crate) k: usize,
    pub(crate) slices: Vec<Vec<Complex64>>,
}

impl FourierSlices {
    /// Assembles slices directly. Lengths are validated; conjugate symmetry
    /// is not — [`ifft_mode3`] enforces it on the way back.
    pub fn from_slices(n1: usize, n2: usize, slices: Vec<Vec<Complex64>>) -> Result<Self> {
        if slices.is_empty() || slices.iter().any(|s| s.len() != n1 * n2) {
            return Err(TubalError::DimMismatch(format!(
                "expected {} slices of length {}",
                slices.len(),
                n1 * n2
            )));
        }
        let k = slices.len();
        Ok(Self { n1, n2, k, slices })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.k)
    }

    pub fn slice(&self, l: usize) -> &[Complex64] {
        &self.slices[l]
    }

    pub(crate) fn zeros(n1: usize, n2: usize, k: usize) -> Self {
        Self {
            n1,
            n2,
            k,
            slices: vec![vec![Complex64::ZERO; n1 * n2]; k],
        }
    }

    /// Number of slices that must be computed explicitly; the remaining ones
    /// follow by conjugate symmetry.
    pub(crate) fn explicit_slices(k: usize) -> usize {
        k / 2 + 1
    }

    /// Fills slices `[explicit..k]` as conjugates of their mirrors.
    pub(crate) fn mirror_tail(&mut self) {
        let k = self.k;
        for l in Self::explicit_slices(k)..k {
            let src = k - l;
            self.slices[l] = self.slices[src].iter().map(|z| z.conj()).collect();
        }
    }
}

/// Unnormalized forward DFT along mode 3.
pub fn fft_mode3(t: &Tensor3) -> FourierSlices {
    let (n1, n2, k) = t.dims();
    let mut out = FourierSlices::zeros(n1, n2, k);
    let fft = plan(k, true);
    let mut buf = vec![Complex64::ZERO; k];
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    let plane = n1 * n2;
    for idx in 0..plane {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(t.data()[l * plane + idx], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (l, b) in buf.iter().enumerate() {
            out.slices[l][idx] = *b;
        }
    }
    out
}

/// Relative tolerance above which an imaginary residue after the inverse
/// transform is treated as evidence of a non-real origin.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Inverse DFT along mode 3 with `1/k` normalization.
///
/// Fails when the imaginary residue exceeds [`IMAG_RESIDUE_TOL`] relative to
/// the output magnitude, which happens exactly when the slices violate the
/// conjugate symmetry of a real origin.
pub fn ifft_mode3(f: &FourierSlices) -> Result<Tensor3> {
    let (t, rel) = ifft_with_residue(f);
    if rel > IMAG_RESIDUE_TOL {
        return Err(TubalError::NonRealInverse { rel });
    }
    Ok(t)
}

/// Inverse transform for slices that are conjugate-symmetric by
/// construction; skips the residue check.
pub(crate) fn ifft_mode3_unchecked(f: &FourierSlices) -> Tensor3 {
    ifft_with_residue(f).0
}

fn ifft_with_residue(f: &FourierSlices) -> (Tensor3, f64) {
    let (n1, n2, k) = f.dims();
    let mut t = Tensor3::zeros(n1, n2, k);
    let ifft = plan(k, false);
    let mut buf = vec![Complex64::ZERO; k];
    let mut scratch = vec![Complex64::ZERO; ifft.get_inplace_scratch_len()];
    let plane = n1 * n2;
    let scale = 1.0 / k as f64;
    let mut imag_sq = 0.0;
    let mut real_sq = 0.0;
    for idx in 0..plane {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = f.slices[l][idx];
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        for (l, b) in buf.iter().enumerate() {
            let re = b.re * scale;
            let im = b.im * scale;
            real_sq += re * re;
            imag_sq += im * im;
            t.data_mut()[l * plane + idx] = re;
        }
    }
    let rel = if real_sq > 0.0 {
        (imag_sq / real_sq).sqrt()
    } else if imag_sq > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (t, rel)
}
