//! Block-circulant reference path for the t-product.
//!
//! Materializes the dense `n1*k x n2*k` block-circulant matrix of a tensor
//! and the matching fold/unfold maps. Intended for small instances: it is
//! the independent oracle the Fourier-path kernels are validated against.

use nalgebra::DMatrix;

use crate::talg::Tensor3;

/// Dense block-circulant matrix: block `(bi, bj)` is frontal slice
/// `(bi - bj) mod k`.
pub fn bcirc(t: &Tensor3) -> DMatrix<f64> {
    let (n1, n2, k) = t.dims();
    let mut m = DMatrix::zeros(n1 * k, n2 * k);
    for bi in 0..k {
        for bj in 0..k {
            let src = (bi + k - bj) % k;
            for j in 0..n2 {
                for i in 0..n1 {
                    m[(bi * n1 + i, bj * n2 + j)] = t.get(i, j, src);
                }
            }
        }
    }
    m
}

/// Stacks the frontal slices vertically into an `n1*k x n2` matrix.
pub fn unfold(t: &Tensor3) -> DMatrix<f64> {
    let (n1, n2, k) = t.dims();
    let mut m = DMatrix::zeros(n1 * k, n2);
    for l in 0..k {
        for j in 0..n2 {
            for i in 0..n1 {
                m[(l * n1 + i, j)] = t.get(i, j, l);
            }
        }
    }
    m
}

/// Inverse of [`unfold`].
pub fn fold(m: &DMatrix<f64>, n1: usize, n2: usize, k: usize) -> Tensor3 {
    assert_eq!(m.nrows(), n1 * k);
    assert_eq!(m.ncols(), n2);
    let mut t = Tensor3::zeros(n1, n2, k);
    for l in 0..k {
        for j in 0..n2 {
            for i in 0..n1 {
                t.set(i, j, l, m[(l * n1 + i, j)]);
            }
        }
    }
    t
}

/// t-product through the dense block-circulant route,
/// `fold(bcirc(a) * unfold(b))`.
pub fn tprod_bcirc_oracle(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let (n1, p, k) = a.dims();
    let (pb, n2, kb) = b.dims();
    assert_eq!(p, pb);
    assert_eq!(k, kb);
    let prod = bcirc(a) * unfold(b);
    fold(&prod, n1, n2, k)
}
