//! Tensor SVD and the derived quantities: tubal rank, norms, spectrum.

use num_complex::Complex64;

use crate::error::{Result, TubalError};
use crate::talg::cmat;
use crate::talg::fft::{fft_mode3, ifft_mode3_unchecked, FourierSlices};
use crate::talg::Tensor3;

/// Tensor singular value decomposition `t = v * s * w'` with orthogonal
/// `v` (n1 x n1 x k), `w` (n2 x n2 x k) and f-diagonal `s` (n1 x n2 x k).
///
/// The factors are canonical only up to a per-slice unitary gauge; callers
/// should compare reconstructions or subspace projectors, never raw factors.
#[derive(Debug, Clone)]
pub struct Tsvd {
    pub v: Tensor3,
    pub s: Tensor3,
    pub w: Tensor3,
    /// Fourier-domain singular values per slice, each list nonincreasing.
    pub slice_singular_values: Vec<Vec<f64>>,
}

impl Tsvd {
    pub fn reconstruct(&self) -> Tensor3 {
        use crate::talg::{tprod, ttranspose};
        let vs = tprod(&self.v, &self.s).expect("factor shapes agree");
        tprod(&vs, &ttranspose(&self.w)).expect("factor shapes agree")
    }

    /// Reconstruction keeping only the leading `r` diagonal tubes of `s`.
    pub fn truncate(&self, r: usize) -> Tensor3 {
        use crate::talg::{tprod, ttranspose};
        let (n1, n2, k) = self.s.dims();
        let mut s_r = self.s.clone();
        for l in 0..k {
            for d in r..n1.min(n2) {
                s_r.set(d, d, l, 0.0);
            }
        }
        let vs = tprod(&self.v, &s_r).expect("factor shapes agree");
        tprod(&vs, &ttranspose(&self.w)).expect("factor shapes agree")
    }

    /// Frobenius norm of the discarded tail when truncating to rank `r`:
    /// `sqrt(sum_{i>r} sum_l sigma_{l,i}^2 / k)`.
    pub fn tail_energy(&self, r: usize) -> f64 {
        let k = self.slice_singular_values.len() as f64;
        let sq: f64 = self
            .slice_singular_values
            .iter()
            .flat_map(|sv| sv.iter().skip(r))
            .map(|s| s * s)
            .sum();
        (sq / k).sqrt()
    }

    /// Frobenius norms of the diagonal tubes of `s`, nonincreasing.
    pub fn tube_norms(&self) -> Vec<f64> {
        let k = self.slice_singular_values.len() as f64;
        let min_dim = self
            .slice_singular_values
            .first()
            .map_or(0, |sv| sv.len());
        (0..min_dim)
            .map(|i| {
                let sq: f64 = self
                    .slice_singular_values
                    .iter()
                    .map(|sv| sv[i] * sv[i])
                    .sum();
                (sq / k).sqrt()
            })
            .collect()
    }
}

/// Completes a thin unitary factor (n x min) to a full n x n unitary by
/// appending an orthonormal complement basis.
fn complete_unitary(thin: Vec<Complex64>, n: usize, min: usize) -> Result<Vec<Complex64>> {
    if min == n {
        return Ok(thin);
    }
    let tail = cmat::unitary_complement(&thin, n, min)?;
    let mut full = thin;
    full.extend_from_slice(&tail);
    Ok(full)
}

/// Tensor SVD via per-slice complex SVD in the Fourier domain.
pub fn tsvd(t: &Tensor3) -> Result<Tsvd> {
    let (n1, n2, k) = t.dims();
    let min = n1.min(n2);
    let ft = fft_mode3(t);
    let mut fv = FourierSlices::zeros(n1, n1, k);
    let mut fs = FourierSlices::zeros(n1, n2, k);
    let mut fw = FourierSlices::zeros(n2, n2, k);
    let mut slice_singular_values = vec![Vec::new(); k];
    for (l, sv_out) in slice_singular_values
        .iter_mut()
        .enumerate()
        .take(FourierSlices::explicit_slices(k))
    {
        let svd = cmat::slice_svd(ft.slice(l), n1, n2, l)?;
        let u_full = complete_unitary(svd.u, n1, min)?;
        let v_full = complete_unitary(svd.v, n2, min)?;
        let mut s = vec![Complex64::ZERO; n1 * n2];
        for (d, sigma) in svd.sigma.iter().enumerate() {
            s[d * n1 + d] = Complex64::new(*sigma, 0.0);
        }
        fv.slices[l] = u_full;
        fs.slices[l] = s;
        fw.slices[l] = v_full;
        *sv_out = svd.sigma;
    }
    fv.mirror_tail();
    fs.mirror_tail();
    fw.mirror_tail();
    let explicit = FourierSlices::explicit_slices(k);
    let (head, tail) = slice_singular_values.split_at_mut(explicit);
    for (i, sv) in tail.iter_mut().enumerate() {
        *sv = head[k - (explicit + i)].clone();
    }
    Ok(Tsvd {
        v: ifft_mode3_unchecked(&fv),
        s: ifft_mode3_unchecked(&fs),
        w: ifft_mode3_unchecked(&fw),
        slice_singular_values,
    })
}

/// Number of diagonal tubes of `s` whose Frobenius norm exceeds
/// `rel_tol` times the largest tube norm. The zero tensor has rank 0.
pub fn tubal_rank(t: &Tensor3, rel_tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&rel_tol) || rel_tol <= 0.0 {
        return Err(TubalError::InvalidParam(format!(
            "tubal_rank rel_tol must lie in (0, 1), got {rel_tol}"
        )));
    }
    let dec = tsvd(t)?;
    let tubes = dec.tube_norms();
    let top = tubes.first().copied().unwrap_or(0.0);
    Ok(tubes.iter().filter(|&&n| n > rel_tol * top).count())
}

/// Spectral, Frobenius and tubal nuclear norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// Largest singular value over all Fourier slices (the spectral norm of
    /// the block-circulant matrix).
    pub spectral: f64,
    pub frobenius: f64,
    /// Sum of all Fourier-slice singular values (nuclear norm of the
    /// block-diagonal Fourier matrix).
    pub tubal_nuclear: f64,
}

pub fn norms(t: &Tensor3) -> Result<Norms> {
    let (n1, n2, k) = t.dims();
    let ft = fft_mode3(t);
    let mut spectral = 0.0f64;
    let mut nuclear = 0.0f64;
    for l in 0..FourierSlices::explicit_slices(k) {
        let sv = cmat::slice_singular_values(ft.slice(l), n1, n2, l)?;
        // Mirrored slices contribute the same singular values.
        let mult = if l == 0 || (k % 2 == 0 && l == k / 2) {
            1.0
        } else {
            2.0
        };
        if let Some(&top) = sv.first() {
            spectral = spectral.max(top);
        }
        nuclear += mult * sv.iter().sum::<f64>();
    }
    Ok(Norms {
        spectral,
        frobenius: t.frobenius(),
        tubal_nuclear: nuclear,
    })
}

/// Singular-value summary of a tensor in the Fourier domain.
#[derive(Debug, Clone)]
pub struct SpectrumSummary {
    pub tubal_rank: usize,
    /// Per-slice singular values, nonincreasing within each slice.
    pub singular_values: Vec<Vec<f64>>,
    /// Smallest singular value of the block-diagonal Fourier matrix that is
    /// positive relative to `rel_tol * sigma_max`.
    pub sigma_min_pos: f64,
    pub sigma_max: f64,
    pub condition_number: f64,
}

pub fn spectrum(t: &Tensor3, rel_tol: f64) -> Result<SpectrumSummary> {
    let dec = tsvd(t)?;
    let singular_values = dec.slice_singular_values.clone();
    let sigma_max = singular_values
        .iter()
        .flat_map(|sv| sv.iter())
        .fold(0.0f64, |m, &s| m.max(s));
    if sigma_max == 0.0 {
        return Err(TubalError::ZeroTensor);
    }
    let threshold = rel_tol * sigma_max;
    let sigma_min_pos = singular_values
        .iter()
        .flat_map(|sv| sv.iter())
        .filter(|&&s| s > threshold)
        .fold(f64::INFINITY, |m, &s| m.min(s));
    let tubes = dec.tube_norms();
    let top_tube = tubes.first().copied().unwrap_or(0.0);
    let tubal_rank = tubes.iter().filter(|&&n| n > rel_tol * top_tube).count();
    Ok(SpectrumSummary {
        tubal_rank,
        singular_values,
        sigma_min_pos,
        sigma_max,
        condition_number: sigma_max / sigma_min_pos,
    })
}
