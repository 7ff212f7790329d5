//! Sigma-point primitives: matrix square root, point generation, weighted
//! moments and covariance repair.
//!
//! Everything here is a pure function of its arguments. Reductions run in
//! fixed index order so results do not depend on how the inputs were produced.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, UtcError};

/// Eigenvalue floor used by [`psd_repair`].
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Negative eigenvalues down to this magnitude are treated as round-off by
/// [`matrix_sqrt`].
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Mean control vector and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl ControlBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() != mean.len() {
            return Err(UtcError::Contract(format!(
                "belief mean has length {} but covariance is {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.is_empty() {
            return Err(UtcError::Contract("empty control vector".into()));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The 2m+1 deterministic samples of a belief and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn center_weight(&self) -> f64 {
        self.weights[0]
    }

    /// Weighted mean of per-point values.
    pub fn weighted_mean(&self, values: &[DVector<f64>]) -> Result<DVector<f64>> {
        weighted_mean(&self.weights, values)
    }

    /// `qu` plus the weighted spread of `values` around `mean`.
    pub fn weighted_covariance(
        &self,
        values: &[DVector<f64>],
        mean: &DVector<f64>,
        qu: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        weighted_covariance(&self.weights, values, mean, qu)
    }
}

/// Largest elementwise asymmetry `|P[i][j] - P[j][i]|`.
pub fn max_asymmetry(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

pub fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(p))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower-triangular factor `L` with `L * L^T = P`.
///
/// Zero or slightly negative pivots (down to the round-off tolerance) produce
/// a zero column instead of failing, so semidefinite inputs are accepted.
pub fn matrix_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !p.is_square() {
        return Err(UtcError::Contract(format!(
            "matrix_sqrt needs a square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let scale = 1.0 + p.amax();
    let asym = max_asymmetry(p);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(UtcError::NotSymmetric { asymmetry: asym });
    }
    match cholesky_semidefinite(p, NEGATIVE_EIGEN_TOLERANCE * scale) {
        Some(l) => Ok(l),
        None => {
            // A pivot went clearly negative. Decide on the spectrum itself.
            let eig = SymmetricEigen::new(symmetrize(p));
            let min = eig
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min < -NEGATIVE_EIGEN_TOLERANCE {
                return Err(UtcError::Indefinite {
                    min_eigenvalue: min,
                });
            }
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let rebuilt =
                &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
            cholesky_semidefinite(&symmetrize(&rebuilt), f64::INFINITY).ok_or(
                UtcError::Indefinite {
                    min_eigenvalue: min,
                },
            )
        }
    }
}

/// Cholesky-Banachiewicz with zeroed columns for non-positive pivots.
/// Returns `None` when a pivot falls below `-neg_tol`.
fn cholesky_semidefinite(p: &DMatrix<f64>, neg_tol: f64) -> Option<DMatrix<f64>> {
    let n = p.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > 0.0 {
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = p[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        } else if d < -neg_tol {
            return None;
        }
    }
    Some(l)
}

/// Sigma points `mean`, `mean ± sqrt(m / (1 - w0)) * S_j` with weights
/// `w0` and `(1 - w0) / 2m`.
pub fn generate_sigma_points(belief: &ControlBelief, w0: f64) -> Result<SigmaPointSet> {
    if !(0.0..1.0).contains(&w0) {
        return Err(UtcError::InvalidWeight(w0));
    }
    let m = belief.dim();
    let s = matrix_sqrt(&belief.covariance)?;
    let spread = (m as f64 / (1.0 - w0)).sqrt();

    let mut points = Vec::with_capacity(2 * m + 1);
    points.push(belief.mean.clone());
    for j in 0..m {
        points.push(&belief.mean + s.column(j) * spread);
    }
    for j in 0..m {
        points.push(&belief.mean - s.column(j) * spread);
    }

    let side = (1.0 - w0) / (2 * m) as f64;
    let mut weights = vec![side; 2 * m + 1];
    weights[0] = w0;
    Ok(SigmaPointSet { points, weights })
}

pub fn weighted_mean(weights: &[f64], values: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_len(weights, values.len())?;
    let dim = values[0].len();
    let mut acc = DVector::zeros(dim);
    for (w, v) in weights.iter().zip(values) {
        if v.len() != dim {
            return Err(UtcError::Contract("ragged value vectors".into()));
        }
        acc.axpy(*w, v, 1.0);
    }
    Ok(acc)
}

pub fn weighted_covariance(
    weights: &[f64],
    values: &[DVector<f64>],
    mean: &DVector<f64>,
    qu: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let cov = weighted_cross_covariance(weights, values, mean, values, mean)?;
    if qu.shape() != cov.shape() {
        return Err(UtcError::Contract(format!(
            "noise matrix is {}x{}, expected {}x{}",
            qu.nrows(),
            qu.ncols(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    Ok(symmetrize(&(cov + qu)))
}

/// `sum_i w_i (a_i - a_mean)(b_i - b_mean)^T`.
pub fn weighted_cross_covariance(
    weights: &[f64],
    a: &[DVector<f64>],
    a_mean: &DVector<f64>,
    b: &[DVector<f64>],
    b_mean: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_len(weights, a.len())?;
    check_len(weights, b.len())?;
    let mut acc = DMatrix::zeros(a_mean.len(), b_mean.len());
    for ((w, ai), bi) in weights.iter().zip(a).zip(b) {
        if ai.len() != a_mean.len() || bi.len() != b_mean.len() {
            return Err(UtcError::Contract("value/mean dimension mismatch".into()));
        }
        let da = ai - a_mean;
        let db = bi - b_mean;
        acc.ger(*w, &da, &db, 1.0);
    }
    Ok(acc)
}

fn check_len(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n || n == 0 {
        return Err(UtcError::Contract(format!(
            "{} weights for {} values",
            weights.len(),
            n
        )));
    }
    Ok(())
}

/// Symmetrize, then floor every eigenvalue at [`EIGEN_FLOOR`].
pub fn psd_repair(p: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(p);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= EIGEN_FLOOR) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&rebuilt)
}
