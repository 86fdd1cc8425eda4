//! Density matrices, their composition, and the state families used
//! throughout the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::ProjectiveBasis;
use crate::numerics::{
    self, c, kron, outer, trace, CMatrix, CVector, HermitianOperator, ProbabilityDistribution, C64,
    EIGEN_CLAMP, ONE,
};

/// Tolerance on `|Tr rho - 1|`.
pub const TRACE_TOL: f64 = 1e-10;

/// A unit-trace positive semidefinite operator on a product of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let op = HermitianOperator::new(mat)?;
        check_dims(&dims, op.dim())?;
        let tr = trace(op.matrix());
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::BadTrace { trace: tr.re });
        }
        let min_eigenvalue = numerics::hermitian_eigenvalues(op.matrix())
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -EIGEN_CLAMP {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { op, dims })
    }

    /// For matrices produced by trace- and positivity-preserving maps inside
    /// the crate.
    pub(crate) fn assume_valid(mat: CMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), mat.nrows());
        debug_assert!((trace(&mat).re - 1.0).abs() < 1e-8);
        Self {
            op: HermitianOperator::from_matrix_unchecked(mat),
            dims,
        }
    }

    /// `|psi><psi|` for a (renormalized) state vector.
    pub fn from_pure(psi: &CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::Config("zero state vector".into()));
        }
        check_dims(&dims, psi.len())?;
        Ok(Self::assume_valid(outer(&psi.unscale(norm)), dims))
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self::assume_valid(numerics::identity(d).unscale(d as f64), dims)
    }

    /// Computational basis state `|index><index|`.
    pub fn basis_state(dims: Vec<usize>, index: usize) -> Self {
        let d: usize = dims.iter().product();
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = ONE;
        Self::assume_valid(m, dims)
    }

    /// Reinterprets the subsystem split; the product must be unchanged.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, self.dim())?;
        Ok(Self { op: self.op, dims })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn purity(&self) -> f64 {
        let m = self.matrix();
        m.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        numerics::eig_matrix(self.matrix()).values
    }

    /// Number of eigenvalues above `1e-10`.
    pub fn rank(&self) -> usize {
        self.eigenvalues()
            .iter()
            .filter(|&&v| v > EIGEN_CLAMP)
            .count()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix()
            .diagonal()
            .iter()
            .map(|z| z.re.max(0.0))
            .collect()
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "unitary conjugation",
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Ok(Self::assume_valid(
            u * self.matrix() * u.adjoint(),
            self.dims.clone(),
        ))
    }

    /// Convex combination `t self + (1 - t) other`.
    pub fn mix(&self, t: f64, other: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange {
                name: "mixing weight",
                value: t,
                range: "[0, 1]",
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "mixture",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self::assume_valid(
            self.matrix().scale(t) + other.matrix().scale(1.0 - t),
            self.dims.clone(),
        ))
    }
}

fn check_dims(dims: &[usize], dim: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidSubsystems(format!(
            "subsystem dimensions {dims:?} must be a nonempty list of positive integers"
        )));
    }
    let product: usize = dims.iter().product();
    if product != dim {
        return Err(Error::DimensionMismatch {
            context: "product of subsystem dimensions",
            expected: dim,
            found: product,
        });
    }
    Ok(())
}

/// Row-major strides of a subsystem layout.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Validates a sorted, duplicate-free subsystem index list.
pub(crate) fn check_subsystems(keep: &[usize], n: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems("keep set is empty".into()));
    }
    if keep.iter().any(|&k| k >= n) {
        return Err(Error::InvalidSubsystems(format!(
            "index in {keep:?} out of range for {n} subsystems"
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSubsystems(format!(
            "{keep:?} must be strictly increasing"
        )));
    }
    Ok(())
}

/// For every full index, its (kept index, traced index) pair.
pub(crate) fn split_indices(dims: &[usize], keep: &[usize]) -> (usize, usize, Vec<(usize, usize)>) {
    let full_strides = strides(dims);
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let ks = strides(&kept_dims);
    let ts = strides(&traced_dims);
    let total: usize = dims.iter().product();
    let map = (0..total)
        .map(|f| {
            let digit = |k: usize| (f / full_strides[k]) % dims[k];
            let ki = keep.iter().zip(&ks).map(|(&k, &s)| digit(k) * s).sum();
            let ti = traced.iter().zip(&ts).map(|(&k, &s)| digit(k) * s).sum();
            (ki, ti)
        })
        .collect();
    (
        kept_dims.iter().product(),
        traced_dims.iter().product(),
        map,
    )
}

pub(crate) fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let (kd, td, map) = split_indices(dims, keep);
    // position[k][t] = full index
    let mut position = vec![0usize; kd * td];
    for (f, &(k, t)) in map.iter().enumerate() {
        position[k * td + t] = f;
    }
    CMatrix::from_fn(kd, kd, |a, b| {
        (0..td)
            .map(|t| m[(position[a * td + t], position[b * td + t])])
            .sum()
    })
}

/// Reduced state on the subsystems in `keep` (ascending), order preserved.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    check_subsystems(keep, rho.dims().len())?;
    let m = partial_trace_matrix(rho.matrix(), rho.dims(), keep);
    Ok(DensityMatrix::assume_valid(
        m,
        keep.iter().map(|&k| rho.dims()[k]).collect(),
    ))
}

pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let dims = a.dims().iter().chain(b.dims()).copied().collect();
    DensityMatrix::assume_valid(kron(a.matrix(), b.matrix()), dims)
}

/// A rank-one state on `[..source dims, d_E]` whose marginal is the source.
#[derive(Debug, Clone)]
pub struct Purification {
    pub state: DensityMatrix,
    pub vector: CVector,
}

impl Purification {
    pub fn env_dim(&self) -> usize {
        *self.state.dims().last().unwrap()
    }

    /// Traces out the purifying system.
    pub fn reduced(&self) -> DensityMatrix {
        let n = self.state.dims().len();
        let keep: Vec<usize> = (0..n - 1).collect();
        partial_trace(&self.state, &keep).expect("purification layout")
    }
}

/// Spectral purification `sum_i sqrt(l_i) |e_i> |i>_E` over eigenvalues above `1e-10`.
pub fn purify(rho: &DensityMatrix) -> Purification {
    let eig = numerics::eig_matrix(rho.matrix());
    let support: Vec<usize> = (0..eig.values.len())
        .rev()
        .filter(|&i| eig.values[i] > EIGEN_CLAMP)
        .collect();
    let d = rho.dim();
    let de = support.len().max(1);
    let mut psi = CVector::zeros(d * de);
    for (j, &i) in support.iter().enumerate() {
        let amp = eig.values[i].sqrt();
        for r in 0..d {
            psi[r * de + j] += eig.vectors[(r, i)] * amp;
        }
    }
    let psi = psi.unscale(psi.norm());
    let mut dims = rho.dims().to_vec();
    dims.push(de);
    Purification {
        state: DensityMatrix::assume_valid(outer(&psi), dims),
        vector: psi,
    }
}

/// `p |Psi-><Psi-| + (1 - p) I/4`.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "Werner parameter p",
            value: p,
            range: "[0, 1]",
        });
    }
    let singlet = bell_vector(Bell::PsiMinus);
    let m = outer(&singlet).scale(p) + numerics::identity(4).scale((1.0 - p) / 4.0);
    Ok(DensityMatrix::assume_valid(m, vec![2, 2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bell {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

pub fn bell_vector(which: Bell) -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b, cc, d) = match which {
        Bell::PhiPlus => (h, 0.0, 0.0, h),
        Bell::PhiMinus => (h, 0.0, 0.0, -h),
        Bell::PsiPlus => (0.0, h, h, 0.0),
        Bell::PsiMinus => (0.0, h, -h, 0.0),
    };
    CVector::from_vec(vec![c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0)])
}

pub fn bell_state(which: Bell) -> DensityMatrix {
    DensityMatrix::assume_valid(outer(&bell_vector(which)), vec![2, 2])
}

/// `sum_i p_i |a_i><a_i| (x) |b_i><b_i|`.
pub fn classically_correlated(
    p: &ProbabilityDistribution,
    basis_a: &ProjectiveBasis,
    basis_b: &ProjectiveBasis,
) -> Result<DensityMatrix> {
    for basis in [basis_a, basis_b] {
        if basis.dim() < p.len() {
            return Err(Error::DimensionMismatch {
                context: "basis size must cover the distribution support",
                expected: p.len(),
                found: basis.dim(),
            });
        }
    }
    let (da, db) = (basis_a.dim(), basis_b.dim());
    let mut m = CMatrix::zeros(da * db, da * db);
    for (i, &w) in p.weights().iter().enumerate() {
        if w > 0.0 {
            m += kron(&basis_a.projector(i), &basis_b.projector(i)).scale(w);
        }
    }
    Ok(DensityMatrix::assume_valid(m, vec![da, db]))
}

pub(crate) fn random_vector(dim: usize, rng: &mut impl Rng) -> CVector {
    let v = CVector::from_fn(dim, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = v.norm();
    v.unscale(n)
}

/// Ginibre-induced random state of the given rank, deterministic in `seed`.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::OutOfRange {
            name: "rank",
            value: rank as f64,
            range: "[1, dim]",
        });
    }
    if dim > numerics::MAX_DIM {
        return Err(Error::TooLarge {
            dim,
            max: numerics::MAX_DIM,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(dim, rank, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    Ok(DensityMatrix::assume_valid(m.unscale(tr), vec![dim]))
}

/// One product term `w |a><a| (x) |b><b|` of a separable decomposition.
#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub weight: f64,
    pub a: CVector,
    pub b: CVector,
}

/// An explicit convex decomposition of a two-qubit separable state.
#[derive(Debug, Clone)]
pub struct SeparableDecomposition {
    pub terms: Vec<ProductTerm>,
}

impl SeparableDecomposition {
    pub fn state(&self) -> DensityMatrix {
        let (da, db) = (self.terms[0].a.len(), self.terms[0].b.len());
        let mut m = CMatrix::zeros(da * db, da * db);
        for t in &self.terms {
            m += kron(&outer(&t.a), &outer(&t.b)).scale(t.weight);
        }
        DensityMatrix::assume_valid(m, vec![da, db])
    }

    /// Extension `sum_i w_i |a_i><a_i| (x) |b_i><b_i| (x) |i><i|_E` in which
    /// Eve holds a perfectly distinguishable copy of the term index.
    pub fn label_register_extension(&self) -> DensityMatrix {
        let n = self.terms.len();
        let (da, db) = (self.terms[0].a.len(), self.terms[0].b.len());
        let d = da * db * n;
        let mut m = CMatrix::zeros(d, d);
        for (i, t) in self.terms.iter().enumerate() {
            let mut label = CMatrix::zeros(n, n);
            label[(i, i)] = ONE;
            m += kron(&kron(&outer(&t.a), &outer(&t.b)), &label).scale(t.weight);
        }
        DensityMatrix::assume_valid(m, vec![da, db, n])
    }
}

/// Random mixture of one to eight random product pure qubit states.
pub fn random_separable_decomposition(seed: u64) -> SeparableDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e9a_ab1e);
    let n = rng.random_range(1..=8);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let terms = raw
        .into_iter()
        .map(|w| ProductTerm {
            weight: w / total,
            a: random_vector(2, &mut rng),
            b: random_vector(2, &mut rng),
        })
        .collect();
    SeparableDecomposition { terms }
}

pub fn random_separable(seed: u64) -> DensityMatrix {
    random_separable_decomposition(seed).state()
}

/// Product decomposition of a Werner state with `p <= 1/3`.
///
/// Anti-aligned pairs `|n>|-n>` over the six axis directions average to the
/// Werner state at `p = 1/3`; the remaining weight goes to the four
/// computational product states.
pub fn werner_separable_decomposition(p: f64) -> Result<SeparableDecomposition> {
    if !(0.0..=1.0 / 3.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "separable Werner parameter p",
            value: p,
            range: "[0, 1/3]",
        });
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(-h, 0.0)],
        [c(h, 0.0), c(0.0, h)],
        [c(h, 0.0), c(0.0, -h)],
    ];
    let v = |a: [C64; 2]| CVector::from_vec(a.to_vec());
    let mut terms = Vec::new();
    if p > 0.0 {
        for k in 0..6 {
            terms.push(ProductTerm {
                weight: 3.0 * p / 6.0,
                a: v(dirs[k]),
                b: v(dirs[k ^ 1]),
            });
        }
    }
    if p < 1.0 / 3.0 {
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            terms.push(ProductTerm {
                weight: (1.0 - 3.0 * p) / 4.0,
                a: v(dirs[i]),
                b: v(dirs[j]),
            });
        }
    }
    Ok(SeparableDecomposition { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs_diff, paulis, trace_distance, von_neumann_entropy, ZERO};

    #[test]
    fn tensor_of_mixed_qubits() {
        let half = DensityMatrix::maximally_mixed(vec![2]);
        let t = tensor(&half, &half);
        assert_eq!(t.dims(), &[2, 2]);
        assert!(
            max_abs_diff(
                t.matrix(),
                DensityMatrix::maximally_mixed(vec![2, 2]).matrix()
            ) < 1e-15
        );
    }

    #[test]
    fn tensor_of_basis_states() {
        let t = tensor(
            &DensityMatrix::basis_state(vec![2], 0),
            &DensityMatrix::basis_state(vec![2], 1),
        );
        assert_eq!(t.matrix()[(1, 1)], ONE);
        assert_eq!(t.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn partial_trace_round_trips() {
        let rho = random_density(2, 2, 1).unwrap();
        let sigma = random_density(3, 2, 2).unwrap();
        let joint = tensor(&rho, &sigma);
        let back = partial_trace(&joint, &[0]).unwrap();
        assert!(trace_distance(&back, &rho).unwrap() < 1e-12);
        let other = partial_trace(&joint, &[1]).unwrap();
        assert!(trace_distance(&other, &sigma).unwrap() < 1e-12);
    }

    #[test]
    fn bell_marginal_is_mixed() {
        let b = partial_trace(&bell_state(Bell::PhiPlus), &[1]).unwrap();
        assert!(max_abs_diff(b.matrix(), DensityMatrix::maximally_mixed(vec![2]).matrix()) < 1e-15);
        assert!(von_neumann_entropy(&bell_state(Bell::PsiMinus)).abs() < 1e-12);
    }

    #[test]
    fn werner_marginal_and_spectrum() {
        for p in [0.0, 0.3, 0.7, 1.0] {
            let w = werner_state(p).unwrap();
            let b = partial_trace(&w, &[1]).unwrap();
            assert!(
                max_abs_diff(b.matrix(), DensityMatrix::maximally_mixed(vec![2]).matrix()) < 1e-15
            );
        }
        let ev = werner_state(0.5).unwrap().eigenvalues();
        let expected = [0.125, 0.125, 0.125, 0.625];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(
            max_abs_diff(
                werner_state(0.0).unwrap().matrix(),
                DensityMatrix::maximally_mixed(vec![2, 2]).matrix()
            ) < 1e-15
        );
        assert!(
            max_abs_diff(
                werner_state(1.0).unwrap().matrix(),
                bell_state(Bell::PsiMinus).matrix()
            ) < 1e-15
        );
        assert!(werner_state(1.5).is_err());
    }

    #[test]
    fn werner_pauli_form() {
        let s = paulis();
        for p in [0.0, 0.25, 0.6, 1.0] {
            let mut m = numerics::identity(4);
            for sigma in &s {
                m -= kron(sigma, sigma).scale(p);
            }
            let m = m.scale(0.25);
            assert!(max_abs_diff(&m, werner_state(p).unwrap().matrix()) < 1e-12);
        }
    }

    #[test]
    fn purification_examples() {
        let pure = bell_state(Bell::PhiPlus);
        let pu = purify(&pure);
        assert_eq!(pu.env_dim(), 1);
        assert!(
            trace_distance(&pu.state.clone().with_dims(vec![2, 2]).unwrap(), &pure).unwrap()
                < 1e-12
        );

        let half = DensityMatrix::maximally_mixed(vec![1, 2]);
        let pu = purify(&half);
        assert_eq!(pu.env_dim(), 2);
        assert!((pu.state.purity() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&pu.reduced(), &half).unwrap() < 1e-12);

        let w = werner_state(0.6).unwrap();
        let pu = purify(&w);
        assert_eq!(pu.env_dim(), 4);
        assert!(trace_distance(&pu.reduced(), &w).unwrap() < 1e-9);
    }

    #[test]
    fn random_states_are_deterministic() {
        let a = random_density(4, 1, 11).unwrap();
        assert!((a.purity() - 1.0).abs() < 1e-9);
        assert_eq!(a, random_density(4, 1, 11).unwrap());
        assert!(random_density(2, 3, 0).is_err());
        assert_eq!(random_separable(5), random_separable(5));
    }

    #[test]
    fn classically_correlated_example() {
        let p = ProbabilityDistribution::uniform(2);
        let z = ProjectiveBasis::computational(2);
        let cc = classically_correlated(&p, &z, &z).unwrap();
        assert!((cc.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((cc.matrix()[(3, 3)].re - 0.5).abs() < 1e-15);
        let b = partial_trace(&cc, &[1]).unwrap();
        assert!(max_abs_diff(b.matrix(), DensityMatrix::maximally_mixed(vec![2]).matrix()) < 1e-15);
        let p3 = ProbabilityDistribution::uniform(3);
        assert!(classically_correlated(&p3, &z, &z).is_err());
    }

    #[test]
    fn invalid_matrices_rejected() {
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(matches!(
            DensityMatrix::new(neg, vec![2]),
            Err(Error::NotPositive { .. })
        ));
        let tr = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), ZERO, ZERO, c(0.6, 0.0)]);
        assert!(matches!(
            DensityMatrix::new(tr, vec![2]),
            Err(Error::BadTrace { .. })
        ));
        let ok = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), ZERO, ZERO, c(0.5, 0.0)]);
        assert!(DensityMatrix::new(ok.clone(), vec![3]).is_err());
        assert!(partial_trace(&DensityMatrix::new(ok, vec![2]).unwrap(), &[1]).is_err());
    }

    #[test]
    fn werner_decomposition_reproduces_state() {
        for p in [0.0, 0.1, 0.3, 1.0 / 3.0] {
            let d = werner_separable_decomposition(p).unwrap();
            let w = werner_state(p).unwrap();
            assert!(max_abs_diff(d.state().matrix(), w.matrix()) < 1e-12, "{p}");
        }
        assert!(werner_separable_decomposition(0.4).is_err());
    }
}
