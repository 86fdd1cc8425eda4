//! Measurements, dephasing, conditional ensembles and basis complementarity.

use crate::error::{Error, Result};
use crate::numerics::{
    self, c, entropy_bits, max_abs_diff, outer, CMatrix, CVector, ProbabilityDistribution, ZERO,
};
use crate::states::{self, check_subsystems, partial_trace_matrix, split_indices, DensityMatrix};

/// Outcomes with smaller probability are dropped from ensembles.
pub const OUTCOME_CUTOFF: f64 = 1e-12;

/// An orthonormal basis stored as the columns of a unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveBasis {
    vectors: CMatrix,
}

impl ProjectiveBasis {
    pub fn new(vectors: CMatrix) -> Result<Self> {
        if !vectors.is_square() {
            return Err(Error::NotSquare {
                rows: vectors.nrows(),
                cols: vectors.ncols(),
            });
        }
        let gram = vectors.adjoint() * &vectors;
        let deviation = max_abs_diff(&gram, &numerics::identity(vectors.ncols()));
        if !(deviation <= 1e-9) {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { vectors })
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            vectors: numerics::identity(dim),
        }
    }

    /// `{|+>, |->}`, the eigenbasis of Pauli X.
    pub fn hadamard() -> Self {
        Self {
            vectors: numerics::hadamard(),
        }
    }

    /// Columns `|f_k> = d^{-1/2} sum_j w^{jk} |j>`, unbiased to the computational basis.
    pub fn fourier(dim: usize) -> Self {
        let norm = (dim as f64).sqrt();
        let vectors = CMatrix::from_fn(dim, dim, |j, k| {
            let angle = 2.0 * std::f64::consts::PI * (j * k) as f64 / dim as f64;
            numerics::C64::from_polar(1.0 / norm, angle)
        });
        Self { vectors }
    }

    /// Eigenbasis of `r . sigma` with the `+1` vector first.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        let (plus, minus) = bloch_vectors(theta, phi);
        Self {
            vectors: CMatrix::from_columns(&[plus, minus]),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    pub fn projector(&self, i: usize) -> CMatrix {
        outer(&self.vector(i))
    }

    /// Basis vectors as columns.
    pub fn matrix(&self) -> &CMatrix {
        &self.vectors
    }

    /// Same basis with complex-conjugated vectors.
    pub fn conjugate(&self) -> Self {
        Self {
            vectors: self.vectors.map(|z| z.conj()),
        }
    }

    pub fn to_povm(&self) -> RankOnePOVM {
        RankOnePOVM {
            dim: self.dim(),
            vectors: (0..self.dim()).map(|i| self.vector(i)).collect(),
        }
    }

    /// Outcome distribution `<x_i| rho |x_i>` of a single-system state.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let v = self.vectors.column(i);
                (v.adjoint() * rho * v)[(0, 0)].re.max(0.0)
            })
            .collect()
    }
}

/// `|+r>`, `|-r>` for `r = (sin t cos p, sin t sin p, cos t)`.
pub(crate) fn bloch_vectors(theta: f64, phi: f64) -> (CVector, CVector) {
    let (s, co) = (0.5 * theta).sin_cos();
    let e = numerics::C64::from_polar(1.0, phi);
    let plus = CVector::from_vec(vec![c(co, 0.0), e * s]);
    let minus = CVector::from_vec(vec![c(s, 0.0), -e * co]);
    (plus, minus)
}

/// A POVM whose elements are `|v_k><v_k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOnePOVM {
    dim: usize,
    vectors: Vec<CVector>,
}

impl RankOnePOVM {
    /// Elements `|v_k><v_k|` must sum to the identity within `1e-8`.
    pub fn from_vectors(vectors: Vec<CVector>) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        if vectors.len() < dim.max(1) {
            return Err(Error::TooFewOutcomes {
                dim,
                outcomes: vectors.len(),
            });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "POVM element",
                expected: dim,
                found: v.len(),
            });
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for v in &vectors {
            sum += outer(v);
        }
        let deviation = max_abs_diff(&sum, &numerics::identity(dim));
        if !(deviation <= 1e-8) {
            return Err(Error::IncompletePovm { deviation });
        }
        Ok(Self { dim, vectors })
    }

    /// Columns of a `dim x m` isometry (rows of a unitary), Naimark style.
    pub(crate) fn from_isometry(u: &CMatrix, dim: usize) -> Self {
        Self {
            dim,
            vectors: (0..u.ncols())
                .map(|k| u.view((0, k), (dim, 1)).into_owned().column(0).into_owned())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn element(&self, k: usize) -> CMatrix {
        outer(&self.vectors[k])
    }
}

/// `Pi+- = (I +- r . sigma) / 2`, `+` outcome first.
pub fn bloch_projectors(theta: f64, phi: f64) -> RankOnePOVM {
    let (plus, minus) = bloch_vectors(theta, phi);
    RankOnePOVM {
        dim: 2,
        vectors: vec![plus, minus],
    }
}

/// Precomputed blocks `B[a][a'] = Tr_rest[(<a| (x) I) rho (|a'> (x) I)]` so
/// that measuring `v` on one subsystem leaves the unnormalized state
/// `sum conj(v_a) v_a' B[a][a']` on the kept subsystems.
#[derive(Debug, Clone)]
pub(crate) struct ConditionalMap {
    measured_dim: usize,
    blocks: Vec<CMatrix>,
    pub kept_dims: Vec<usize>,
}

impl ConditionalMap {
    pub fn new(rho: &CMatrix, dims: &[usize], measured: usize, keep: &[usize]) -> Result<Self> {
        if measured >= dims.len() || keep.contains(&measured) {
            return Err(Error::InvalidSubsystems(format!(
                "measured subsystem {measured} must exist and not be kept"
            )));
        }
        check_subsystems(keep, dims.len())?;
        let dm = dims[measured];
        let rest: Vec<usize> = (0..dims.len()).filter(|&k| k != measured).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&k| dims[k]).collect();
        let (rd, _, map) = split_indices(dims, &rest);
        // full index from (measured digit, rest index)
        let mut full = vec![0usize; dm * rd];
        let stride = states::strides(dims)[measured];
        for (f, &(r, _)) in map.iter().enumerate() {
            full[((f / stride) % dm) * rd + r] = f;
        }
        let keep_in_rest: Vec<usize> = keep
            .iter()
            .map(|k| rest.iter().position(|r| r == k).unwrap())
            .collect();
        let mut blocks = Vec::with_capacity(dm * dm);
        for a in 0..dm {
            for b in 0..dm {
                let block =
                    CMatrix::from_fn(rd, rd, |i, j| rho[(full[a * rd + i], full[b * rd + j])]);
                blocks.push(if keep_in_rest.len() == rest.len() {
                    block
                } else {
                    partial_trace_matrix(&block, &rest_dims, &keep_in_rest)
                });
            }
        }
        Ok(Self {
            measured_dim: dm,
            blocks,
            kept_dims: keep.iter().map(|&k| dims[k]).collect(),
        })
    }

    /// Unnormalized conditional state for outcome vector `v`.
    pub fn apply(&self, v: &CVector) -> CMatrix {
        let dm = self.measured_dim;
        let n = self.blocks[0].nrows();
        let mut out = CMatrix::from_element(n, n, ZERO);
        for a in 0..dm {
            let va = v[a].conj();
            if va == ZERO {
                continue;
            }
            for b in 0..dm {
                let w = va * v[b];
                if w == ZERO {
                    continue;
                }
                out.zip_apply(&self.blocks[a * dm + b], |o, x| *o += w * x);
            }
        }
        out
    }

    /// `sum_k p_k S(rho_k)` for the POVM with outcome vectors `vs`.
    pub fn average_entropy(&self, vs: &[CVector]) -> f64 {
        vs.iter()
            .map(|v| {
                let k = self.apply(v);
                let p = numerics::trace(&k).re;
                if p > OUTCOME_CUTOFF {
                    p * numerics::matrix_entropy(&k.unscale(p))
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// One outcome of a measurement: its index, probability and post-measurement state.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub index: usize,
    pub probability: f64,
    pub state: DensityMatrix,
}

/// An ensemble `{p_k, rho_k}`; also used for assemblages.
#[derive(Debug, Clone)]
pub struct ConditionalEnsemble {
    outcomes: Vec<Outcome>,
}

impl ConditionalEnsemble {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        ProbabilityDistribution::new(outcomes.iter().map(|o| o.probability).collect())?;
        if let Some(first) = outcomes.first() {
            if let Some(o) = outcomes.iter().find(|o| o.state.dim() != first.state.dim()) {
                return Err(Error::DimensionMismatch {
                    context: "ensemble member",
                    expected: first.state.dim(),
                    found: o.state.dim(),
                });
            }
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.probability).collect()
    }

    /// `sum_k p_k rho_k`.
    pub fn average(&self) -> DensityMatrix {
        let first = &self.outcomes[0].state;
        let mut m = CMatrix::zeros(first.dim(), first.dim());
        for o in &self.outcomes {
            m += o.state.matrix().scale(o.probability);
        }
        DensityMatrix::assume_valid(m, first.dims().to_vec())
    }
}

/// Measures subsystem `measured` with `m` and keeps the subsystems in `keep`.
pub fn conditional_ensemble_on(
    rho: &DensityMatrix,
    measured: usize,
    m: &RankOnePOVM,
    keep: &[usize],
) -> Result<ConditionalEnsemble> {
    if measured >= rho.dims().len() || rho.dims()[measured] != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "POVM on measured subsystem",
            expected: rho.dims().get(measured).copied().unwrap_or(0),
            found: m.dim(),
        });
    }
    let map = ConditionalMap::new(rho.matrix(), rho.dims(), measured, keep)?;
    let mut outcomes = Vec::new();
    let mut total = 0.0;
    for (index, v) in m.vectors().iter().enumerate() {
        let k = map.apply(v);
        let p = numerics::trace(&k).re;
        total += p.max(0.0);
        if p > OUTCOME_CUTOFF {
            outcomes.push(Outcome {
                index,
                probability: p,
                state: DensityMatrix::assume_valid(k.unscale(p), map.kept_dims.clone()),
            });
        }
    }
    for o in &mut outcomes {
        o.probability /= total;
    }
    ConditionalEnsemble::new(outcomes)
}

/// Measures `A` (subsystem 0) of a bipartite state and returns the ensemble on `B`.
pub fn conditional_ensemble(
    rho_ab: &DensityMatrix,
    m: &RankOnePOVM,
) -> Result<ConditionalEnsemble> {
    require_bipartite(rho_ab)?;
    conditional_ensemble_on(rho_ab, 0, m, &[1])
}

pub(crate) fn require_bipartite(rho: &DensityMatrix) -> Result<()> {
    if rho.dims().len() != 2 {
        return Err(Error::InvalidSubsystems(format!(
            "expected a bipartite state, got subsystem dimensions {:?}",
            rho.dims()
        )));
    }
    Ok(())
}

/// `I (x) |x_i><x_i| (x) I` with the projector on `subsystem`.
fn embedded_projector(dims: &[usize], subsystem: usize, p: &CMatrix) -> CMatrix {
    let before: usize = dims[..subsystem].iter().product();
    let after: usize = dims[subsystem + 1..].iter().product();
    numerics::kron(
        &numerics::kron(&numerics::identity(before), p),
        &numerics::identity(after),
    )
}

/// Completely dephases `subsystem` in `basis`.
pub fn dephase(
    rho: &DensityMatrix,
    basis: &ProjectiveBasis,
    subsystem: usize,
) -> Result<DensityMatrix> {
    if subsystem >= rho.dims().len() || rho.dims()[subsystem] != basis.dim() {
        return Err(Error::DimensionMismatch {
            context: "dephasing basis",
            expected: rho.dims().get(subsystem).copied().unwrap_or(0),
            found: basis.dim(),
        });
    }
    let d = rho.dim();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..basis.dim() {
        let p = embedded_projector(rho.dims(), subsystem, &basis.projector(i));
        out += &p * rho.matrix() * &p;
    }
    Ok(DensityMatrix::assume_valid(out, rho.dims().to_vec()))
}

/// A joint distribution `p(x, y)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "joint distribution table",
                expected: rows * cols,
                found: probs.len(),
            });
        }
        let p = ProbabilityDistribution::new(probs)?;
        Ok(Self {
            rows,
            cols,
            probs: p.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.cols + y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|x| (0..self.cols).map(|y| self.get(x, y)).sum())
            .collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|y| (0..self.rows).map(|x| self.get(x, y)).sum())
            .collect()
    }

    pub fn transposed(&self) -> Self {
        let probs = (0..self.cols)
            .flat_map(|y| (0..self.rows).map(move |x| (x, y)))
            .map(|(x, y)| self.get(x, y))
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            probs,
        }
    }

    /// `H(X | Y) = H(X, Y) - H(Y)`, never negative.
    pub fn entropy_first_given_second(&self) -> f64 {
        (entropy_bits(&self.probs) - entropy_bits(&self.second_marginal())).max(0.0)
    }

    /// `H(Y | X)`.
    pub fn entropy_second_given_first(&self) -> f64 {
        (entropy_bits(&self.probs) - entropy_bits(&self.first_marginal())).max(0.0)
    }
}

/// `p(a, b) = Tr[(Pi_a (x) |b><b|) rho_AB]`.
pub fn joint_distribution(
    rho_ab: &DensityMatrix,
    m_a: &RankOnePOVM,
    basis_b: &ProjectiveBasis,
) -> Result<JointDistribution> {
    require_bipartite(rho_ab)?;
    let dims = rho_ab.dims();
    if dims[0] != m_a.dim() || dims[1] != basis_b.dim() {
        return Err(Error::DimensionMismatch {
            context: "joint distribution measurement",
            expected: dims[0] * dims[1],
            found: m_a.dim() * basis_b.dim(),
        });
    }
    let map = ConditionalMap::new(rho_ab.matrix(), dims, 0, &[1])?;
    joint_from_map(&map, m_a.vectors(), basis_b)
}

pub(crate) fn joint_from_map(
    map: &ConditionalMap,
    vectors: &[CVector],
    basis_b: &ProjectiveBasis,
) -> Result<JointDistribution> {
    let mut probs = Vec::with_capacity(vectors.len() * basis_b.dim());
    for v in vectors {
        let k = map.apply(v);
        probs.extend(basis_b.probabilities(&k));
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    JointDistribution::new(vectors.len(), basis_b.dim(), probs)
}

/// `C(R, S) = -2 log2 max_ij |<r_i|s_j>|`.
pub fn complementarity(r: &ProjectiveBasis, s: &ProjectiveBasis) -> Result<f64> {
    if r.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            context: "complementarity bases",
            expected: r.dim(),
            found: s.dim(),
        });
    }
    let overlaps = r.matrix().adjoint() * s.matrix();
    let max = overlaps
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .min(1.0);
    Ok((-2.0 * max.log2()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{paulis, trace_distance, von_neumann_entropy};
    use crate::states::{bell_state, random_density, tensor, werner_state, Bell};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bloch_projectors_match_paulis() {
        let [x, _, z] = paulis();
        let id = numerics::identity(2);
        let zp = bloch_projectors(0.0, 0.0);
        assert!(max_abs_diff(&zp.element(0), &(&id + &z).scale(0.5)) < 1e-15);
        assert!(max_abs_diff(&zp.element(1), &(&id - &z).scale(0.5)) < 1e-15);
        let xp = bloch_projectors(std::f64::consts::FRAC_PI_2, 0.0);
        assert!(max_abs_diff(&xp.element(0), &(&id + &x).scale(0.5)) < 1e-15);
        for (t, p) in [(0.3, 1.1), (2.0, -0.4), (1.234, 5.0)] {
            let m = bloch_projectors(t, p);
            assert!(max_abs_diff(&(m.element(0) + m.element(1)), &id) < 1e-14);
        }
    }

    #[test]
    fn werner_z_conditionals() {
        for p in [0.2, 0.6, 0.9] {
            let ens = conditional_ensemble(&werner_state(p).unwrap(), &bloch_projectors(0.0, 0.0))
                .unwrap();
            let out = ens.outcomes();
            assert!(close(out[0].probability, 0.5, 1e-14));
            let plus = out[0].state.matrix();
            assert!(close(plus[(0, 0)].re, (1.0 - p) / 2.0, 1e-14));
            assert!(close(plus[(1, 1)].re, (1.0 + p) / 2.0, 1e-14));
            let minus = out[1].state.matrix();
            assert!(close(minus[(0, 0)].re, (1.0 + p) / 2.0, 1e-14));
        }
    }

    #[test]
    fn product_state_conditionals_are_marginal() {
        let a = random_density(2, 2, 3).unwrap();
        let b = random_density(2, 2, 4).unwrap();
        let ens = conditional_ensemble(&tensor(&a, &b), &bloch_projectors(0.7, 0.2)).unwrap();
        for o in ens.outcomes() {
            assert!(trace_distance(&o.state, &b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bell_z_conditionals_are_pure() {
        let ens =
            conditional_ensemble(&bell_state(Bell::PhiPlus), &bloch_projectors(0.0, 0.0)).unwrap();
        let out = ens.outcomes();
        assert!(close(out[0].state.matrix()[(0, 0)].re, 1.0, 1e-14));
        assert!(close(out[1].state.matrix()[(1, 1)].re, 1.0, 1e-14));
    }

    #[test]
    fn dephase_examples() {
        let z = ProjectiveBasis::computational(2);
        let d = dephase(&bell_state(Bell::PhiPlus), &z, 1).unwrap();
        let m = d.matrix();
        assert!(close(m[(0, 0)].re, 0.5, 1e-15) && close(m[(3, 3)].re, 0.5, 1e-15));
        assert!(m[(0, 3)].norm() < 1e-15);
        let twice = dephase(&d, &z, 1).unwrap();
        assert!(max_abs_diff(twice.matrix(), d.matrix()) < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let dm = dephase(&mixed, &ProjectiveBasis::hadamard(), 1).unwrap();
        assert!(max_abs_diff(dm.matrix(), mixed.matrix()) < 1e-15);
        assert!(dephase(&mixed, &ProjectiveBasis::computational(3), 1).is_err());
    }

    #[test]
    fn joint_distribution_examples() {
        let z = ProjectiveBasis::computational(2);
        let j = joint_distribution(&bell_state(Bell::PhiPlus), &z.to_povm(), &z).unwrap();
        assert!(close(j.get(0, 0), 0.5, 1e-15) && close(j.get(1, 1), 0.5, 1e-15));
        assert!(j.get(0, 1) < 1e-15);

        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let j = joint_distribution(&mixed, &z.to_povm(), &z).unwrap();
        assert!(j.as_slice().iter().all(|&p| close(p, 0.25, 1e-15)));

        for p in [0.1, 0.5, 0.8] {
            let j = joint_distribution(&werner_state(p).unwrap(), &z.to_povm(), &z).unwrap();
            // agreement probability
            assert!(close(j.get(0, 0) + j.get(1, 1), (1.0 - p) / 2.0, 1e-14));
        }
    }

    #[test]
    fn complementarity_examples() {
        let z = ProjectiveBasis::computational(2);
        let x = ProjectiveBasis::hadamard();
        assert!(close(complementarity(&z, &x).unwrap(), 1.0, 1e-12));
        assert_eq!(complementarity(&z, &z).unwrap(), 0.0);
        let c3 = complementarity(
            &ProjectiveBasis::computational(3),
            &ProjectiveBasis::fourier(3),
        )
        .unwrap();
        assert!(close(c3, 3f64.log2(), 1e-12));
        assert!(complementarity(&z, &ProjectiveBasis::fourier(3)).is_err());
    }

    #[test]
    fn ensemble_average_is_marginal() {
        for seed in 0..20 {
            let rho = random_density(6, 3, seed)
                .unwrap()
                .with_dims(vec![2, 3])
                .unwrap();
            let m = bloch_projectors(seed as f64 * 0.37, seed as f64 * 1.3);
            let ens = conditional_ensemble(&rho, &m).unwrap();
            let marginal = states::partial_trace(&rho, &[1]).unwrap();
            assert!(trace_distance(&ens.average(), &marginal).unwrap() < 1e-9);
        }
    }

    #[test]
    fn dephasing_never_lowers_entropy() {
        for seed in 0..20 {
            let rho = random_density(4, 2, 100 + seed)
                .unwrap()
                .with_dims(vec![2, 2])
                .unwrap();
            let b = ProjectiveBasis::from_bloch(seed as f64, 2.0 * seed as f64);
            let d = dephase(&rho, &b, 1).unwrap();
            assert!(von_neumann_entropy(&d) >= von_neumann_entropy(&rho) - 1e-9);
        }
    }

    #[test]
    fn povm_validation() {
        let v = CVector::from_vec(vec![c(1.0, 0.0), ZERO]);
        assert!(RankOnePOVM::from_vectors(vec![v.clone()]).is_err());
        assert!(matches!(
            RankOnePOVM::from_vectors(vec![v.clone(), v]),
            Err(Error::IncompletePovm { .. })
        ));
        // trine POVM on a qubit
        let trine: Vec<CVector> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                let (plus, _) = bloch_vectors(t, 0.0);
                plus * c((2.0f64 / 3.0).sqrt(), 0.0)
            })
            .collect();
        assert_eq!(RankOnePOVM::from_vectors(trine).unwrap().outcomes(), 3);
    }
}
