//! Sparse recovery of the grid vector: LASSO via monotone FISTA, support
//! extraction, error metrics and the coherence-based recovery bound.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::SteeringDictionary;
use crate::error::{Error, Result};
use crate::linalg::{complex_normal_vector, norm_sq, CMatrix, CVector};
use crate::model::{GridCell, TargetScene};
use crate::scalar::{cabs, czero, Real};
use crate::statistics::CompressionMatrix;

/// A linear map available through forward and adjoint products.
pub trait LinearOperator<T: Real>: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &CVector<T>) -> Result<CVector<T>>;
    fn apply_adjoint(&self, y: &CVector<T>) -> Result<CVector<T>>;
}

impl<T: Real> LinearOperator<T> for CMatrix<T> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &CVector<T>) -> Result<CVector<T>> {
        if x.len() != self.ncols() {
            return Err(Error::Dimension(format!("operand has length {}, expected {}", x.len(), self.ncols())));
        }
        Ok(self * x)
    }

    fn apply_adjoint(&self, y: &CVector<T>) -> Result<CVector<T>> {
        if y.len() != self.nrows() {
            return Err(Error::Dimension(format!("operand has length {}, expected {}", y.len(), self.nrows())));
        }
        Ok(self.ad_mul(y))
    }
}

/// The map from grid vector to measurements: `P Φ` on its own, or followed
/// by the per-tone task blocks.
#[derive(Debug, Clone, Copy)]
pub struct SensingOperator<'a, T: Real> {
    dictionary: &'a SteeringDictionary<T>,
    task: Option<&'a CompressionMatrix<T>>,
}

impl<'a, T: Real> SensingOperator<'a, T> {
    /// `P Φ`: grid vector to tone-major coefficients.
    pub fn coefficients(dictionary: &'a SteeringDictionary<T>) -> Self {
        Self { dictionary, task: None }
    }

    /// `M Φ`: grid vector to task vector.
    pub fn task(dictionary: &'a SteeringDictionary<T>, task: &'a CompressionMatrix<T>) -> Self {
        Self { dictionary, task: Some(task) }
    }
}

impl<T: Real> LinearOperator<T> for SensingOperator<'_, T> {
    fn rows(&self) -> usize {
        self.task.map_or(self.dictionary.coeff_len(), |m| m.rows())
    }

    fn cols(&self) -> usize {
        self.dictionary.grid_len()
    }

    fn apply(&self, x: &CVector<T>) -> Result<CVector<T>> {
        let c = self.dictionary.apply_tone_major(x)?;
        match self.task {
            Some(m) => m.apply(&c),
            None => Ok(c),
        }
    }

    fn apply_adjoint(&self, y: &CVector<T>) -> Result<CVector<T>> {
        match self.task {
            Some(m) => self.dictionary.apply_tone_major_adjoint(&m.apply_adjoint(y)?),
            None => self.dictionary.apply_tone_major_adjoint(y),
        }
    }
}

/// Materializes an operator column by column.
pub fn dense_operator<T: Real>(op: &dyn LinearOperator<T>) -> Result<CMatrix<T>> {
    let mut out = CMatrix::from_element(op.rows(), op.cols(), czero());
    for j in 0..op.cols() {
        let mut e = CVector::from_element(op.cols(), czero());
        e[j] = crate::scalar::cone();
        out.set_column(j, &op.apply(&e)?);
    }
    Ok(out)
}

/// How the LASSO weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// A fixed weight.
    Fixed(f64),
    /// A multiple of `‖Aᴴ ŝ‖_∞`, computed per solve.
    Relative(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Self::Relative(0.05)
    }
}

impl std::fmt::Display for Regularization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(r) => write!(f, "rho = {r}"),
            Self::Relative(s) => write!(f, "rho = {s} * max|A^H s|"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverySpec {
    pub rho: Regularization,
    pub max_iter: usize,
    pub tol: f64,
    /// Least-squares refit on the estimated support.
    pub debias: bool,
}

impl Default for RecoverySpec {
    fn default() -> Self {
        Self { rho: Regularization::default(), max_iter: 400, tol: 1e-5, debias: false }
    }
}

impl RecoverySpec {
    pub fn validate(&self) -> Result<()> {
        let rho = match self.rho {
            Regularization::Fixed(r) | Regularization::Relative(r) => r,
        };
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidArgument(format!("regularization must be nonnegative, got {rho}")));
        }
        if self.max_iter == 0 || self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument("max_iter must be positive and tol > 0".into()));
        }
        Ok(())
    }
}

/// Safety margin applied to the estimated Lipschitz constant.
pub const LIPSCHITZ_MARGIN: f64 = 1.05;

/// Largest eigenvalue of `AᴴA` by power iteration from a fixed start.
pub fn lipschitz_constant<T: Real>(op: &dyn LinearOperator<T>, iterations: usize, tol: f64) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: CVector<T> = complex_normal_vector(&mut rng, op.cols(), 1.0);
    x.unscale_mut(x.norm());
    let mut estimate = T::zero();
    for _ in 0..iterations {
        let y = op.apply_adjoint(&op.apply(&x)?)?;
        let norm = y.norm();
        if norm == T::zero() {
            return Err(Error::InvalidArgument("operator is zero".into()));
        }
        let next = norm;
        x = y.unscale(norm);
        let done = (next - estimate).abs() <= T::of(tol) * next;
        estimate = next;
        if done {
            break;
        }
    }
    Ok(estimate)
}

/// Complex soft threshold `v · max(1 − t/|v|, 0)`.
#[inline]
pub fn shrink<T: Real>(v: Complex<T>, t: T) -> Complex<T> {
    let m = cabs(v);
    if m <= t {
        czero()
    } else {
        v.scale(T::one() - t / m)
    }
}

#[derive(Debug, Clone)]
pub struct FistaOutcome<T: Real> {
    pub estimate: CVector<T>,
    pub rho: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration.
    pub objective: Vec<T>,
}

fn l1<T: Real>(x: &CVector<T>) -> T {
    x.iter().fold(T::zero(), |a, &z| a + cabs(z))
}

/// Solves `min ½‖ŝ − A x‖² + ρ‖x‖₁` with the monotone variant of FISTA.
///
/// `lipschitz` is the largest eigenvalue of `AᴴA`; it is estimated by power
/// iteration when not supplied.
pub fn fista<T: Real>(op: &dyn LinearOperator<T>, s: &CVector<T>, spec: &RecoverySpec, lipschitz: Option<T>) -> Result<FistaOutcome<T>> {
    spec.validate()?;
    if s.len() != op.rows() {
        return Err(Error::Dimension(format!("measurement has length {}, operator has {} rows", s.len(), op.rows())));
    }
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("measurement vector".into()));
    }
    let lf = match lipschitz {
        Some(l) => l,
        None => lipschitz_constant(op, 30, 1e-6)?,
    };
    if !lf.is_finite() || lf <= T::zero() {
        return Err(Error::InvalidArgument("operator is zero or non-finite".into()));
    }
    let step = T::one() / (lf * T::of(LIPSCHITZ_MARGIN));
    let ahs = op.apply_adjoint(s)?;
    let rho = match spec.rho {
        Regularization::Fixed(r) => T::of(r),
        Regularization::Relative(k) => T::of(k) * ahs.iter().fold(T::zero(), |a, &z| a.max(cabs(z))),
    };
    let thresh = rho * step;
    let n = op.cols();
    let half = T::of(0.5);

    let mut x = CVector::from_element(n, czero());
    let mut ax = CVector::from_element(s.len(), czero());
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut fx = half * norm_sq(s.as_slice());
    let mut t = T::one();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < spec.max_iter {
        iterations += 1;
        let grad = if iterations == 1 { -ahs.clone() } else { op.apply_adjoint(&(&ay - s))? };
        let z = (&y - grad.scale(step)).map(|v| shrink(v, thresh));
        let az = op.apply(&z)?;
        let fz = half * norm_sq((&az - s).as_slice()) + rho * l1(&z);
        let t_next = (T::one() + (T::one() + T::of(4.0) * t * t).sqrt()) * half;
        let (w_z, w_x) = (t / t_next, (t - T::one()) / t_next);
        if fz <= fx {
            let change = (&z - &x).norm();
            let scale = z.norm().max(x.norm());
            // y = z + ((t−1)/t')(z − x)
            y = &z + (&z - &x).scale(w_x);
            ay = &az + (&az - &ax).scale(w_x);
            x = z;
            ax = az;
            fx = fz;
            objective.push(fx);
            if change <= T::of(spec.tol) * scale || scale == T::zero() {
                converged = true;
                break;
            }
        } else {
            // y = x + (t/t')(z − x)
            y = &x + (&z - &x).scale(w_z);
            ay = &ax + (&az - &ax).scale(w_z);
            objective.push(fx);
        }
        t = t_next;
    }
    Ok(FistaOutcome { estimate: x, rho, iterations, converged, objective })
}

/// Least-squares refit of `ŝ` on the given flat support.
pub fn debias<T: Real>(op: &dyn LinearOperator<T>, s: &CVector<T>, support: &[usize]) -> Result<CVector<T>> {
    let mut cols = CMatrix::from_element(op.rows(), support.len(), czero());
    for (j, &idx) in support.iter().enumerate() {
        let mut e = CVector::from_element(op.cols(), czero());
        e[idx] = crate::scalar::cone();
        cols.set_column(j, &op.apply(&e)?);
    }
    let coeffs = cols
        .svd(true, true)
        .solve(s, T::of(1e-12))
        .map_err(|e| Error::Decomposition(e.to_string()))?;
    let mut out = CVector::from_element(op.cols(), czero());
    for (j, &idx) in support.iter().enumerate() {
        out[idx] = coeffs[j];
    }
    Ok(out)
}

/// Flat indices of the `k` largest-magnitude entries; ties go to the lower
/// index.
pub fn top_k_indices<T: Real>(x: &CVector<T>, k: usize) -> Result<Vec<usize>> {
    if k > x.len() {
        return Err(Error::InvalidArgument(format!("cannot pick {k} entries from {}", x.len())));
    }
    let mags: Vec<T> = x.iter().map(|&z| cabs(z)).collect();
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| mags[b].partial_cmp(&mags[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Grid cells of the `k` largest entries of an estimate.
pub fn estimate_support<T: Real>(x: &CVector<T>, k: usize, virtual_len: usize) -> Result<Vec<GridCell>> {
    Ok(top_k_indices(x, k)?.into_iter().map(|i| GridCell::from_flat(i, virtual_len)).collect())
}

/// Fraction of true targets whose cell appears among the estimates.
pub fn hit_rate(scene: &TargetScene, estimated: &[GridCell]) -> f64 {
    if scene.is_empty() {
        return 1.0;
    }
    let hits = scene.cells().filter(|c| estimated.contains(c)).count();
    hits as f64 / scene.len() as f64
}

/// `‖x − x̂‖² / ‖x‖²`.
pub fn relative_mse<T: Real>(truth: &CVector<T>, estimate: &CVector<T>) -> Result<T> {
    if truth.len() != estimate.len() {
        return Err(Error::Dimension(format!("lengths {} and {} differ", truth.len(), estimate.len())));
    }
    let reference = norm_sq(truth.as_slice());
    if reference == T::zero() {
        return Err(Error::InvalidArgument("reference vector is zero".into()));
    }
    Ok(norm_sq((truth - estimate).as_slice()) / reference)
}

/// Outcome of the coherence-based recovery bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryBound {
    Bound(f64),
    /// The sparsity exceeds `(1/μ + 1) / 4`.
    ConditionFailed { targets: usize, limit: f64 },
}

/// `(ε_L + ε_o + ε̃) / (1 − (4K − 1)μ)` when `K < (1/μ + 1)/4`.
pub fn recovery_error_bound(targets: usize, coherence: f64, lmmse: f64, emse: f64, slack: f64) -> Result<RecoveryBound> {
    if !(0.0..=1.0).contains(&coherence) {
        return Err(Error::InvalidArgument(format!("coherence {coherence} outside [0, 1]")));
    }
    let limit = (1.0 / coherence + 1.0) / 4.0;
    if (targets as f64) >= limit {
        return Ok(RecoveryBound::ConditionFailed { targets, limit });
    }
    let denom = 1.0 - (4.0 * targets as f64 - 1.0) * coherence;
    Ok(RecoveryBound::Bound((lmmse + emse + slack) / denom))
}

/// Sparse matrix helper for tests and small problems: `A` restricted to a
/// set of columns.
pub fn columns_of<T: Real>(op: &dyn LinearOperator<T>, support: &[usize]) -> Result<CMatrix<T>> {
    let mut out = DMatrix::from_element(op.rows(), support.len(), czero());
    for (j, &idx) in support.iter().enumerate() {
        let mut e = CVector::from_element(op.cols(), czero());
        e[idx] = crate::scalar::cone();
        out.set_column(j, &op.apply(&e)?);
    }
    Ok(out)
}
