//! Dense complex linear algebra and entropy primitives.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Everything here is sized for
//! the small systems this crate handles: a handful of qubits, capped at
//! [`MAX_DIM`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::DensityMatrix;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hermiticity tolerance, max absolute elementwise deviation.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Largest operator dimension accepted (ten qubits).
pub const MAX_DIM: usize = 1024;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `(M + M^dagger) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `|v><v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Pauli matrices `[X, Y, Z]`.
pub fn paulis() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

/// A Hermitian matrix, symmetrized exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() > MAX_DIM {
            return Err(Error::TooLarge {
                dim: mat.nrows(),
                max: MAX_DIM,
            });
        }
        let deviation = hermiticity_deviation(&mat);
        if !(deviation <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            mat: symmetrize(&mat),
        })
    }

    /// Skips validation; the caller guarantees Hermiticity up to rounding.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self {
            mat: symmetrize(&mat),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }
}

/// Spectral decomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: CMatrix,
}

pub fn eig_hermitian(m: &HermitianOperator) -> Eigen {
    eig_matrix(m.matrix())
}

/// Eigendecomposition of a matrix already known to be Hermitian.
pub(crate) fn eig_matrix(m: &CMatrix) -> Eigen {
    let dim = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(dim, dim, |r, k| eig.eigenvectors[(r, order[k])]);
    Eigen { values, vectors }
}

/// Eigenvalues (unordered) of a Hermitian matrix; closed form up to 2x2.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)].re],
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)];
            let mean = 0.5 * (a + d);
            let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - radius, mean + radius]
        }
        _ => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    }
}

/// `-x log2 x` with `0 log 0 = 0`.
#[inline]
pub fn xlog2x_neg(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// Binary entropy `h2(x)`.
pub fn h2(x: f64) -> f64 {
    xlog2x_neg(x) + xlog2x_neg(1.0 - x)
}

/// Shannon entropy of raw nonnegative weights (not renormalized).
pub fn entropy_bits(weights: &[f64]) -> f64 {
    weights.iter().map(|&w| xlog2x_neg(w)).sum()
}

/// Entropy in bits of a Hermitian unit-trace matrix from its spectrum.
pub(crate) fn matrix_entropy(m: &CMatrix) -> f64 {
    let vals = hermitian_eigenvalues(m);
    entropy_bits(&vals).max(0.0)
}

/// A finite probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityDistribution {
    weights: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Weights above `-1e-12` are accepted and negative ones clamped to zero;
    /// the sum must be 1 within `1e-10`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= -1e-12)) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is below -1e-12"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, not 1 within 1e-10"
            )));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ProbabilityDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityDistribution> for Vec<f64> {
    fn from(p: ProbabilityDistribution) -> Self {
        p.weights
    }
}

pub fn shannon_entropy(p: &ProbabilityDistribution) -> f64 {
    entropy_bits(p.weights())
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    matrix_entropy(rho.matrix())
}

/// `1/2 ||rho - sigma||_1`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            context: "trace distance",
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    Ok(trace_distance_matrices(rho.matrix(), sigma.matrix()))
}

pub(crate) fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = symmetrize(&(a - b));
    0.5 * hermitian_eigenvalues(&diff)
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
}

/// `exp(i H)` for Hermitian `H`.
pub fn unitary_from_hermitian(h: &CMatrix) -> CMatrix {
    let eig = eig_matrix(&symmetrize(h));
    let phases = CVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&v| C64::from_polar(1.0, v)),
    );
    let scaled = CMatrix::from_fn(h.nrows(), h.ncols(), |r, k| eig.vectors[(r, k)] * phases[k]);
    scaled * eig.vectors.adjoint()
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.ncols()))
}
