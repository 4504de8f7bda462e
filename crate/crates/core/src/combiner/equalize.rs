//! Unitary rotations that make the diagonal of a Hermitian matrix constant.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, trace_re, CMatrix};
use crate::scalar::{cabs, creal, Real};

/// Returns a unitary `U` such that `U H Uᴴ` has every diagonal entry equal
/// to `Tr(H) / P`.
///
/// Each step rotates the current largest and smallest diagonal entries so
/// that the largest one lands exactly on the mean, which fixes one entry per
/// rotation.
pub fn equalizing_unitary<T: Real>(h: &CMatrix<T>) -> Result<CMatrix<T>> {
    let p = h.nrows();
    if h.ncols() != p {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square", p, h.ncols())));
    }
    let scale = h.iter().fold(T::zero(), |a, &z| a.max(cabs(z)));
    if hermitian_defect(h) > T::of(1e-9) * scale.max(T::one()) {
        return Err(Error::NotPsd("equalization input is not Hermitian".into()));
    }
    let mut u = CMatrix::identity(p, p);
    if p < 2 {
        return Ok(u);
    }
    let mean = trace_re(h) / T::of(p as f64);
    let tol = T::of(1e-10) * mean.abs();
    let mut cur = h.clone();
    let cap = 50 * p * p;
    for _ in 0..cap {
        let (mut hi, mut lo) = (0, 0);
        for k in 1..p {
            if cur[(k, k)].re > cur[(hi, hi)].re {
                hi = k;
            }
            if cur[(k, k)].re < cur[(lo, lo)].re {
                lo = k;
            }
        }
        let (a, d) = (cur[(hi, hi)].re, cur[(lo, lo)].re);
        if a - mean <= tol && mean - d <= tol {
            return Ok(u);
        }
        let z = cur[(hi, lo)];
        let mz = cabs(z);
        let w = if mz > T::zero() { Complex::new(-z.im / mz, z.re / mz) } else { creal(T::one()) };
        let c = ((mean - d) / (a - d)).max(T::zero()).min(T::one()).sqrt();
        let s = (T::one() - c * c).sqrt();
        rotate_rows(&mut cur, hi, lo, c, s, w);
        rotate_cols(&mut cur, hi, lo, c, s, w);
        rotate_rows(&mut u, hi, lo, c, s, w);
        // Pin the rotated entry to the target to stop rounding drift.
        cur[(hi, hi)] = creal(mean);
    }
    Err(Error::IterationCap(cap))
}

/// Left-multiplies by the rotation with rows `(c, s·w)` and `(−s·w̄, c)`.
fn rotate_rows<T: Real>(m: &mut CMatrix<T>, i: usize, j: usize, c: T, s: T, w: Complex<T>) {
    let sw = w.scale(s);
    for k in 0..m.ncols() {
        let (ri, rj) = (m[(i, k)], m[(j, k)]);
        m[(i, k)] = ri.scale(c) + sw * rj;
        m[(j, k)] = rj.scale(c) - sw.conj() * ri;
    }
}

/// Right-multiplies by the adjoint of the rotation in [`rotate_rows`].
fn rotate_cols<T: Real>(m: &mut CMatrix<T>, i: usize, j: usize, c: T, s: T, w: Complex<T>) {
    let sw = w.scale(s);
    for k in 0..m.nrows() {
        let (ci, cj) = (m[(k, i)], m[(k, j)]);
        m[(k, i)] = ci.scale(c) + sw.conj() * cj;
        m[(k, j)] = cj.scale(c) - sw * ci;
    }
}
