//! Small dense-matrix helpers on top of `faer` used throughout the crate.

use faer::{c64, Mat, MatRef};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diagonal(values: &[f64]) -> Mat<c64> {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { ZERO })
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: MatRef<'_, c64>) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Frobenius norm of `m - m†`.
pub fn hermitian_deviation(m: MatRef<'_, c64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Real part of the Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn inner(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            let y = b[(i, j)];
            acc += x.re * y.re + x.im * y.im;
        }
    }
    acc
}

/// `Tr(a b)` for square matrices of equal size, real part only.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn scaled(m: MatRef<'_, c64>, s: f64) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// `y += a * x`.
pub fn axpy(y: &mut Mat<c64>, a: f64, x: MatRef<'_, c64>) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] += x[(i, j)] * a;
        }
    }
}

/// Subtracts `shift * I` in place.
pub fn shift_diagonal(m: &mut Mat<c64>, shift: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)].re -= shift;
    }
}

/// `V diag(f) V†` for a unitary `V`.
pub fn conjugate_diagonal(vectors: MatRef<'_, c64>, f: &[f64]) -> Mat<c64> {
    let n = vectors.nrows();
    let scaled = Mat::from_fn(n, f.len(), |i, j| vectors[(i, j)] * f[j]);
    hermitian_part((&scaled * vectors.adjoint()).as_ref())
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Largest absolute entry.
pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut acc: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}
