//! Core t-product tensor algebra: mode-3 transforms, tensor-tensor products,
//! tensor SVD, tubal rank, and the spectral/Frobenius/tubal-nuclear norms.
//!
//! All tensors are dense real third-order arrays. Products and
//! factorizations run slicewise in the Fourier domain, computing only the
//! first `k/2 + 1` slices explicitly and mirroring the rest by the conjugate
//! symmetry of real data. With `k = 1` every operation reduces exactly to
//! its dense matrix counterpart.

pub(crate) mod cmat;
mod bcirc;
mod fft;
mod tsvd;

pub use bcirc::{bcirc, fold, tprod_bcirc_oracle, unfold};
pub use fft::{fft_mode3, ifft_mode3, FourierSlices, IMAG_RESIDUE_TOL};
pub(crate) use fft::ifft_mode3_unchecked;
pub use tsvd::{norms, spectrum, tsvd, tubal_rank, Norms, SpectrumSummary, Tsvd};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TubalError};

/// Dense real third-order tensor of shape `n1 x n2 x k`.
///
/// Storage is slice-major with column-major frontal slices: entry
/// `(i, j, l)` lives at `l * n1 * n2 + j * n1 + i`. This matches the byte
/// order of the binary tensor format.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    k: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, k: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && k > 0, "dimensions must be positive");
        Self {
            n1,
            n2,
            k,
            data: vec![0.0; n1 * n2 * k],
        }
    }

    pub fn from_data(n1: usize, n2: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n1 * n2 * k {
            return Err(TubalError::DimMismatch(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                n1,
                n2,
                k
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TubalError::InvalidParam("non-finite tensor entry".into()));
        }
        Ok(Self { n1, n2, k, data })
    }

    /// Identity tensor: first frontal slice is the identity matrix, the
    /// rest are zero.
    pub fn identity(n: usize, k: usize) -> Self {
        let mut t = Self::zeros(n, n, k);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Tensor with i.i.d. standard normal entries.
    pub fn gaussian<R: Rng + ?Sized>(n1: usize, n2: usize, k: usize, rng: &mut R) -> Self {
        let data = (0..n1 * n2 * k)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { n1, n2, k, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.k)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[l * self.n1 * self.n2 + j * self.n1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, v: f64) {
        self.data[l * self.n1 * self.n2 + j * self.n1 + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise inner product, summed over all entries.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(c);
        out
    }

    pub fn scale_mut(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// `self += c * other`.
    pub fn axpy_mut(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Keeps the first `r` lateral columns, zero-pads up to width `width`.
    pub fn pad_columns(&self, width: usize) -> Self {
        assert!(width >= self.n2);
        let mut out = Self::zeros(self.n1, width, self.k);
        for l in 0..self.k {
            for j in 0..self.n2 {
                for i in 0..self.n1 {
                    let v = self.get(i, j, l);
                    out.set(i, j, l, v);
                }
            }
        }
        out
    }

    /// The sub-tensor of the first `r` lateral columns.
    pub fn leading_columns(&self, r: usize) -> Self {
        assert!(r <= self.n2);
        let mut out = Self::zeros(self.n1, r, self.k);
        for l in 0..self.k {
            for j in 0..r {
                for i in 0..self.n1 {
                    out.set(i, j, l, self.get(i, j, l));
                }
            }
        }
        out
    }
}

/// Tensor transpose: transposes each frontal slice and reverses the order of
/// slices 2 through k.
pub fn ttranspose(t: &Tensor3) -> Tensor3 {
    let (n1, n2, k) = t.dims();
    let mut out = Tensor3::zeros(n2, n1, k);
    for l in 0..k {
        let src = if l == 0 { 0 } else { k - l };
        for j in 0..n2 {
            for i in 0..n1 {
                out.set(j, i, l, t.get(i, j, src));
            }
        }
    }
    out
}

/// Tensor-tensor product via the Fourier path: slicewise complex matrix
/// products on the first `k/2 + 1` slices, conjugate mirroring for the rest.
/// Equals `fold(bcirc(a) * unfold(b))`.
pub fn tprod(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    let (n1, p, k) = a.dims();
    let (pb, n2, kb) = b.dims();
    if p != pb || k != kb {
        return Err(TubalError::DimMismatch(format!(
            "tprod: {}x{}x{} * {}x{}x{}",
            n1, p, k, pb, n2, kb
        )));
    }
    let fa = fft_mode3(a);
    let fb = fft_mode3(b);
    let fc = tprod_fourier(&fa, &fb);
    Ok(fft::ifft_mode3_unchecked(&fc))
}

/// Fourier-domain product kernel shared by `tprod` and the solvers.
pub(crate) fn tprod_fourier(fa: &FourierSlices, fb: &FourierSlices) -> FourierSlices {
    let (n1, p, k) = fa.dims();
    let (_, n2, _) = fb.dims();
    let mut fc = FourierSlices::zeros(n1, n2, k);
    for l in 0..FourierSlices::explicit_slices(k) {
        let mut c = vec![Complex64::ZERO; n1 * n2];
        cmat::gemm_acc(&mut c, fa.slice(l), fb.slice(l), n1, p, n2);
        fc.slices[l] = c;
    }
    fc.mirror_tail();
    fc
}

/// True when the lateral columns of `t` are orthonormal under the t-product,
/// i.e. `||t' * t - I||_F <= tol`.
pub fn orthonormal_columns(t: &Tensor3, tol: f64) -> bool {
    let (_, r, k) = t.dims();
    let gram = tprod(&ttranspose(t), t).expect("shapes agree by construction");
    let eye = Tensor3::identity(r, k);
    gram.sub(&eye).frobenius() <= tol
}
