//! Small dense linear-algebra helpers on complex matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{cabs, czero, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Condition number above which a ridge is added before inversion.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Ridge magnitude relative to `trace / dim`.
pub const RIDGE_SCALE: f64 = 1e-12;

/// Draws one sample of CN(0, `variance`).
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::of(s * re), T::of(s * im))
}

pub fn complex_normal_vector<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    variance: f64,
) -> CVector<T> {
    DVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

pub fn complex_normal_matrix<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix<T> {
    // Column-major fill so the draw order matches the storage order.
    let mut m = DMatrix::from_element(rows, cols, czero());
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng, variance);
        }
    }
    m
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = cabs(m[(i, j)] - m[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn trace_re<T: Real>(m: &CMatrix<T>) -> T {
    (0..m.nrows().min(m.ncols())).fold(T::zero(), |acc, i| acc + m[(i, i)].re)
}

/// Checks that `m` is square, Hermitian and positive semidefinite up to
/// rounding, returning its eigen-decomposition.
pub fn check_psd<T: Real>(m: &CMatrix<T>, what: &str) -> Result<SymmetricEigen<Complex<T>, nalgebra::Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{what} is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    let scale = m.iter().fold(T::zero(), |a, z| a.max(cabs(*z)));
    if hermitian_defect(m) > T::of(1e-9) * scale.max(T::one()) {
        return Err(Error::NotPsd(format!("{what} is not Hermitian")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let low = eig.eigenvalues.iter().fold(T::zero(), |a, &v| a.min(v));
    if low < -T::of(1e-9) * top.max(T::of(f64::MIN_POSITIVE)) {
        return Err(Error::NotPsd(format!("{what} has negative eigenvalue {}", low.as_f64())));
    }
    Ok(eig)
}

/// Eigenvalues of a Hermitian matrix after the ridge policy is applied.
///
/// A ridge of `RIDGE_SCALE * trace / dim` is added whenever the condition
/// number exceeds `RIDGE_CONDITION`; the event is logged.
fn regularized_eigen<T: Real>(m: &CMatrix<T>, what: &str) -> Result<(DVector<T>, CMatrix<T>)> {
    let eig = check_psd(m, what)?;
    let dim = m.nrows();
    let trace = trace_re(m);
    if dim == 0 {
        return Ok((eig.eigenvalues, eig.eigenvectors));
    }
    if trace <= T::zero() {
        return Err(Error::Singular(format!("{what} is zero")));
    }
    let top = eig.eigenvalues.max();
    let low = eig.eigenvalues.min();
    let mut values = eig.eigenvalues;
    if low <= T::zero() || top / low > T::of(RIDGE_CONDITION) {
        let ridge = T::of(RIDGE_SCALE) * trace / T::of(dim as f64);
        log::warn!(
            "{what}: condition number {:.3e} exceeds {:.0e}, adding ridge {:.3e}",
            (top / low.max(T::of(f64::MIN_POSITIVE))).as_f64(),
            RIDGE_CONDITION,
            ridge.as_f64()
        );
        values.iter_mut().for_each(|v| *v = v.max(T::zero()) + ridge);
    }
    Ok((values, eig.eigenvectors))
}

fn spectral_map<T: Real>(values: &DVector<T>, vectors: &CMatrix<T>, f: impl Fn(T) -> T) -> CMatrix<T> {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let g = f(v);
        scaled.column_mut(j).iter_mut().for_each(|z| *z = z.scale(g));
    }
    &scaled * vectors.adjoint()
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hermitian_inverse<T: Real>(m: &CMatrix<T>, what: &str) -> Result<CMatrix<T>> {
    let (values, vectors) = regularized_eigen(m, what)?;
    Ok(spectral_map(&values, &vectors, |v| T::one() / v))
}

/// Inverse square root of a Hermitian positive-definite matrix.
pub fn hermitian_inv_sqrt<T: Real>(m: &CMatrix<T>, what: &str) -> Result<CMatrix<T>> {
    let (values, vectors) = regularized_eigen(m, what)?;
    Ok(spectral_map(&values, &vectors, |v| T::one() / v.sqrt()))
}

/// Applies `F_L^H ⊗ I_P` with the unitary L-point DFT.
///
/// `x` is laid out tone-major: entry `k * p + q` is channel `q` of tone `k`.
pub fn fbar_apply<T: Real>(x: &CVector<T>, channels: usize, tones: usize) -> Result<CVector<T>> {
    dft_blocks(x, channels, tones, 1.0)
}

/// Applies `F_L ⊗ I_P`, the inverse of [`fbar_apply`].
pub fn fbar_adjoint<T: Real>(x: &CVector<T>, channels: usize, tones: usize) -> Result<CVector<T>> {
    dft_blocks(x, channels, tones, -1.0)
}

fn dft_blocks<T: Real>(x: &CVector<T>, channels: usize, tones: usize, sign: f64) -> Result<CVector<T>> {
    if x.len() != channels * tones {
        return Err(Error::Dimension(format!(
            "DFT input has length {}, expected {channels}x{tones}",
            x.len()
        )));
    }
    if tones == 1 {
        return Ok(x.clone());
    }
    let norm = T::of(1.0 / (tones as f64).sqrt());
    let twiddle: Vec<Complex<T>> = (0..tones)
        .map(|r| crate::scalar::cis::<T>(sign * 2.0 * std::f64::consts::PI * r as f64 / tones as f64))
        .collect();
    let mut y = DVector::from_element(x.len(), czero());
    for k in 0..tones {
        for kk in 0..tones {
            let w = twiddle[(k * kk) % tones] * norm;
            for q in 0..channels {
                y[k * channels + q] += w * x[kk * channels + q];
            }
        }
    }
    Ok(y)
}

/// Squared Euclidean norm.
pub fn norm_sq<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
}
