//! Small column-major complex matrix helpers shared by the Fourier-domain
//! kernels. Frontal slices are tiny at the scales this crate targets, so
//! clarity wins over blocking; nalgebra supplies the dense factorizations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TubalError};

pub(crate) const SVD_MAX_ITER: usize = 1000;

/// `c += a * b` for column-major buffers, `a` is n1 x p, `b` is p x n2.
pub(crate) fn gemm_acc(
    c: &mut [Complex64],
    a: &[Complex64],
    b: &[Complex64],
    n1: usize,
    p: usize,
    n2: usize,
) {
    debug_assert_eq!(a.len(), n1 * p);
    debug_assert_eq!(b.len(), p * n2);
    debug_assert_eq!(c.len(), n1 * n2);
    for j in 0..n2 {
        let col = &mut c[j * n1..(j + 1) * n1];
        for q in 0..p {
            let s = b[j * p + q];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            let acol = &a[q * n1..(q + 1) * n1];
            for (ci, ai) in col.iter_mut().zip(acol) {
                *ci += ai * s;
            }
        }
    }
}

/// `a^H * b`, `a` is n x p, `b` is n x q, result p x q.
pub(crate) fn adjoint_mul(
    a: &[Complex64],
    b: &[Complex64],
    n: usize,
    p: usize,
    q: usize,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; p * q];
    for j in 0..q {
        let bcol = &b[j * n..(j + 1) * n];
        for i in 0..p {
            let acol = &a[i * n..(i + 1) * n];
            let mut s = Complex64::ZERO;
            for (x, y) in acol.iter().zip(bcol) {
                s += x.conj() * y;
            }
            out[j * p + i] = s;
        }
    }
    out
}

pub(crate) fn to_dmatrix(data: &[Complex64], nrows: usize, ncols: usize) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(nrows, ncols, data)
}

pub(crate) fn from_dmatrix(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.as_slice().to_vec()
}

/// Thin SVD of a column-major slice; singular values sorted nonincreasing.
pub(crate) struct SliceSvd {
    /// n1 x min columns.
    pub u: Vec<Complex64>,
    /// Singular values, length min(n1, n2), nonincreasing.
    pub sigma: Vec<f64>,
    /// n2 x min columns (right singular vectors, not transposed).
    pub v: Vec<Complex64>,
}

pub(crate) fn slice_svd(data: &[Complex64], n1: usize, n2: usize, slice: usize) -> Result<SliceSvd> {
    let m = to_dmatrix(data, n1, n2);
    let mut svd = m
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(TubalError::SvdFailure { slice })?;
    svd.sort_by_singular_values();
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    Ok(SliceSvd {
        u: from_dmatrix(&u),
        sigma,
        v: from_dmatrix(&v_t.adjoint()),
    })
}

/// Singular values only, sorted nonincreasing.
pub(crate) fn slice_singular_values(
    data: &[Complex64],
    n1: usize,
    n2: usize,
    slice: usize,
) -> Result<Vec<f64>> {
    let m = to_dmatrix(data, n1, n2);
    let svd = m
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(TubalError::SvdFailure { slice })?;
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigma)
}

/// Orthonormal basis of the orthogonal complement of the column space of a
/// matrix with orthonormal columns (n x p, p <= n). Returns n x (n - p).
///
/// Built from the eigenvectors of the projector `I - Q Q^H`, whose spectrum
/// is exactly {0, 1} up to round-off.
pub(crate) fn unitary_complement(q: &[Complex64], n: usize, p: usize) -> Result<Vec<Complex64>> {
    debug_assert!(p <= n);
    if p == n {
        return Ok(Vec::new());
    }
    let qm = to_dmatrix(q, n, p);
    let mut proj = DMatrix::<Complex64>::identity(n, n);
    proj -= &qm * qm.adjoint();
    let eig = proj
        .try_symmetric_eigen(f64::EPSILON, SVD_MAX_ITER)
        .ok_or(TubalError::EigFailure { slice: 0 })?;
    let mut cols: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for (idx, lam) in eig.eigenvalues.iter().enumerate() {
        if *lam > 0.5 {
            cols.push((*lam, eig.eigenvectors.column(idx).iter().copied().collect()));
        }
    }
    if cols.len() != n - p {
        return Err(TubalError::EigFailure { slice: 0 });
    }
    let mut out = Vec::with_capacity(n * (n - p));
    for (_, c) in cols {
        out.extend_from_slice(&c);
    }
    Ok(out)
}

/// Orthonormal basis for the column space of an n x p slice, keeping the
/// leading `rank` left singular vectors.
pub(crate) fn column_basis(
    data: &[Complex64],
    n: usize,
    p: usize,
    rank: usize,
    slice: usize,
) -> Result<Vec<Complex64>> {
    let svd = slice_svd(data, n, p, slice)?;
    Ok(svd.u[..n * rank].to_vec())
}

pub(crate) fn spectral_norm(data: &[Complex64], n1: usize, n2: usize, slice: usize) -> Result<f64> {
    Ok(slice_singular_values(data, n1, n2, slice)?
        .first()
        .copied()
        .unwrap_or(0.0))
}
