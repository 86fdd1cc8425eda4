//! Semi-device-independent erasure: Bob dephases his memory in one of two
//! public bases, a helper announces a symbol, Bob corrects and erases, and a
//! Szilard-engine test checks that the memory really ended up pure.
//!
//! Costs here are Shannon entropies of Bob's dephased outcome given the
//! announcement, so they depend only on observed statistics. Without
//! steering no helper can push the average below `C(R, S) / 2`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{OptimizerConfig, COST_TOL};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::measurements::{
    bloch_vectors, complementarity, joint_from_map, require_bipartite, ConditionalMap,
    JointDistribution, ProjectiveBasis, RankOnePOVM,
};
use crate::numerics::{
    self, entropy_bits, hadamard, identity, paulis, CMatrix, ProbabilityDistribution,
};
use crate::optim::{minimize_bloch, minimize_povm};
use crate::states::{partial_trace, DensityMatrix, SeparableDecomposition};
use crate::FORMAT_VERSION;

/// Margin by which a certificate must beat the floor.
pub const CERTIFICATE_TOL: f64 = 1e-9;
/// Default Szilard-test threshold.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Which of Bob's two dephasing bases was used in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    R,
    S,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::R, Branch::S];

    pub fn index(self) -> usize {
        match self {
            Branch::R => 0,
            Branch::S => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::R => "R",
            Branch::S => "S",
        }
    }
}

/// Bob's two dephasing bases.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPair {
    r: ProjectiveBasis,
    s: ProjectiveBasis,
}

impl BasisPair {
    pub fn new(r: ProjectiveBasis, s: ProjectiveBasis) -> Result<Self> {
        if r.dim() != s.dim() {
            return Err(Error::DimensionMismatch {
                context: "dephasing bases R and S",
                expected: r.dim(),
                found: s.dim(),
            });
        }
        Ok(Self { r, s })
    }

    /// Computational and Hadamard bases.
    pub fn qubit_mubs() -> Self {
        Self {
            r: ProjectiveBasis::computational(2),
            s: ProjectiveBasis::hadamard(),
        }
    }

    pub fn get(&self, branch: Branch) -> &ProjectiveBasis {
        match branch {
            Branch::R => &self.r,
            Branch::S => &self.s,
        }
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }
}

/// Announcement alphabet of the given size: `up`/`down` for two symbols,
/// decimal labels otherwise.
pub fn default_alphabet(n: usize) -> Vec<String> {
    if n == 2 {
        vec!["up".into(), "down".into()]
    } else {
        (0..n).map(|k| k.to_string()).collect()
    }
}

/// A hidden-variable model: `lambda` is drawn with `weights`, Bob's memory
/// is prepared in `bob_states[lambda]`, and in branch `X` the announcement
/// `k` is drawn with `responses[X][lambda][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LhsModel {
    weights: Vec<f64>,
    bob_states: Vec<DensityMatrix>,
    responses: [Vec<Vec<f64>>; 2],
    alphabet: Vec<String>,
}

impl LhsModel {
    pub fn new(
        weights: Vec<f64>,
        bob_states: Vec<DensityMatrix>,
        responses: [Vec<Vec<f64>>; 2],
        alphabet: Vec<String>,
    ) -> Result<Self> {
        let n = weights.len();
        let weights: Vec<f64> = ProbabilityDistribution::new(weights)
            .map_err(|e| Error::InvalidModel(format!("hidden-variable weights: {e}")))?
            .into();
        if bob_states.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} Bob states for {n} hidden-variable values",
                bob_states.len()
            )));
        }
        if let Some(s) = bob_states.iter().find(|s| s.dim() != bob_states[0].dim()) {
            return Err(Error::InvalidModel(format!(
                "Bob states of different dimensions {} and {}",
                bob_states[0].dim(),
                s.dim()
            )));
        }
        check_alphabet(&alphabet)?;
        let mut clean: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for branch in Branch::ALL {
            let table = &responses[branch.index()];
            if table.len() != n {
                return Err(Error::InvalidModel(format!(
                    "branch {} has responses for {} of {n} hidden-variable values",
                    branch.name(),
                    table.len()
                )));
            }
            for (lambda, row) in table.iter().enumerate() {
                if row.len() != alphabet.len() {
                    return Err(Error::InvalidModel(format!(
                        "branch {} response {lambda} has {} entries for an alphabet of {}",
                        branch.name(),
                        row.len(),
                        alphabet.len()
                    )));
                }
                let row = ProbabilityDistribution::new(row.clone()).map_err(|e| {
                    Error::InvalidModel(format!("branch {} response {lambda}: {e}", branch.name()))
                })?;
                clean[branch.index()].push(row.into());
            }
        }
        Ok(Self {
            weights,
            bob_states,
            responses: clean,
            alphabet,
        })
    }

    /// Model induced by measuring `A` with `povms[X]` on a separable state:
    /// `q(k | lambda, X) = <v_k| a_lambda><a_lambda |v_k>`.
    pub fn from_separable(
        decomp: &SeparableDecomposition,
        povm_r: &RankOnePOVM,
        povm_s: &RankOnePOVM,
        alphabet: Vec<String>,
    ) -> Result<Self> {
        let mut responses: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for (slot, povm) in [povm_r, povm_s].into_iter().enumerate() {
            for t in &decomp.terms {
                if t.a.len() != povm.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "helper measurement on hidden states",
                        expected: t.a.len(),
                        found: povm.dim(),
                    });
                }
                let row = povm
                    .vectors()
                    .iter()
                    .map(|v| v.dotc(&t.a).norm_sqr())
                    .collect();
                responses[slot].push(row);
            }
        }
        let bob_states = decomp
            .terms
            .iter()
            .map(|t| DensityMatrix::from_pure(&t.b, vec![t.b.len()]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            decomp.terms.iter().map(|t| t.weight).collect(),
            bob_states,
            responses,
            alphabet,
        )
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bob_states(&self) -> &[DensityMatrix] {
        &self.bob_states
    }

    pub fn responses(&self, branch: Branch) -> &[Vec<f64>] {
        &self.responses[branch.index()]
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// `P(b, k) = sum_l w_l <x_b| sigma_l |x_b> q(k | l, X)`.
    fn joint(&self, basis: &ProjectiveBasis, branch: Branch) -> Result<Vec<f64>> {
        let dim = self.bob_states[0].dim();
        if basis.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "dephasing basis on hidden Bob states",
                expected: dim,
                found: basis.dim(),
            });
        }
        let n = self.alphabet.len();
        let mut probs = vec![0.0; dim * n];
        for (lambda, w) in self.weights.iter().enumerate() {
            let pb = basis.probabilities(self.bob_states[lambda].matrix());
            let q = &self.responses[branch.index()][lambda];
            for (b, &pb) in pb.iter().enumerate() {
                for (k, &qk) in q.iter().enumerate() {
                    probs[b * n + k] += w * pb * qk;
                }
            }
        }
        Ok(probs)
    }
}

fn check_alphabet(alphabet: &[String]) -> Result<()> {
    if alphabet.is_empty() {
        return Err(Error::InvalidStrategy(
            "announcement alphabet is empty".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in alphabet {
        if !seen.insert(s) {
            return Err(Error::InvalidStrategy(format!(
                "announcement `{s}` listed twice"
            )));
        }
    }
    Ok(())
}

/// How announcements are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    /// Measure the helper's system with `povms[X]` and announce the outcome index.
    Measure { povms: [RankOnePOVM; 2] },
    /// Replay a hidden-variable model.
    HiddenVariable(LhsModel),
    /// Always announce the same symbol.
    Constant { symbol: usize },
    /// Announce a uniformly random symbol.
    UniformRandom,
    /// An honest announcement shifted to the next symbol with probability `flip_probability`.
    InterceptResend {
        inner: Box<Strategy>,
        flip_probability: f64,
    },
}

/// A labelled rule mapping the branch and the helper's system to a symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    label: String,
    alphabet: Vec<String>,
    kind: StrategyKind,
}

impl Strategy {
    pub fn new(
        label: impl Into<String>,
        alphabet: Vec<String>,
        kind: StrategyKind,
    ) -> Result<Self> {
        check_alphabet(&alphabet)?;
        let n = alphabet.len();
        match &kind {
            StrategyKind::Measure { povms } => {
                if povms[0].dim() != povms[1].dim() {
                    return Err(Error::InvalidStrategy(
                        "the two branch measurements act on different dimensions".into(),
                    ));
                }
                for (povm, branch) in povms.iter().zip(Branch::ALL) {
                    if povm.outcomes() != n {
                        return Err(Error::InvalidStrategy(format!(
                            "branch {} measurement has {} outcomes for an alphabet of {n}",
                            branch.name(),
                            povm.outcomes()
                        )));
                    }
                }
            }
            StrategyKind::HiddenVariable(model) => {
                if model.alphabet != alphabet {
                    return Err(Error::InvalidStrategy(
                        "strategy alphabet differs from the model alphabet".into(),
                    ));
                }
            }
            StrategyKind::Constant { symbol } => {
                if *symbol >= n {
                    return Err(Error::InvalidStrategy(format!(
                        "constant symbol index {symbol} outside an alphabet of {n}"
                    )));
                }
            }
            StrategyKind::UniformRandom => {}
            StrategyKind::InterceptResend {
                inner,
                flip_probability,
            } => {
                if !(0.0..=1.0).contains(flip_probability) {
                    return Err(Error::InvalidStrategy(format!(
                        "flip probability {flip_probability} outside [0, 1]"
                    )));
                }
                if inner.alphabet != alphabet {
                    return Err(Error::InvalidStrategy(
                        "intercept-resend alphabet differs from the intercepted strategy".into(),
                    ));
                }
            }
        }
        Ok(Self {
            label: label.into(),
            alphabet,
            kind,
        })
    }

    /// Measures in the basis matched to Bob's branch. With a `|Phi+>`-type
    /// correlation the conjugate basis reproduces Bob's outcome exactly.
    pub fn honest_matched(bases: &BasisPair) -> Self {
        let povms = [bases.r.conjugate().to_povm(), bases.s.conjugate().to_povm()];
        Self {
            label: "honest-matched".into(),
            alphabet: default_alphabet(bases.dim()),
            kind: StrategyKind::Measure { povms },
        }
    }

    /// Measures in the other branch's basis.
    pub fn wrong_basis(bases: &BasisPair) -> Self {
        let povms = [bases.s.conjugate().to_povm(), bases.r.conjugate().to_povm()];
        Self {
            label: "wrong-basis".into(),
            alphabet: default_alphabet(bases.dim()),
            kind: StrategyKind::Measure { povms },
        }
    }

    pub fn constant(alphabet: Vec<String>, symbol: usize) -> Result<Self> {
        Self::new("constant", alphabet, StrategyKind::Constant { symbol })
    }

    pub fn uniform_random(alphabet: Vec<String>) -> Result<Self> {
        Self::new("uniform-random", alphabet, StrategyKind::UniformRandom)
    }

    pub fn intercept_resend(inner: Strategy, flip_probability: f64) -> Result<Self> {
        let alphabet = inner.alphabet.clone();
        Self::new(
            "intercept-resend",
            alphabet,
            StrategyKind::InterceptResend {
                inner: Box::new(inner),
                flip_probability,
            },
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }
}

/// Eve's strategy for a hidden-variable model: she holds a copy of
/// `lambda` and samples announcements with the same response function.
pub fn lhs_eve_strategy(model: &LhsModel) -> Result<Strategy> {
    let model = LhsModel::new(
        model.weights.clone(),
        model.bob_states.clone(),
        model.responses.clone(),
        model.alphabet.clone(),
    )?;
    Strategy::new(
        "lambda-replay",
        model.alphabet.clone(),
        StrategyKind::HiddenVariable(model),
    )
}

/// Exact joint distribution of Bob's dephased outcome `b` (rows) and the
/// announcement `k` (columns) in one branch.
pub fn strategy_joint(
    rho_ab: &DensityMatrix,
    bases: &BasisPair,
    strat: &Strategy,
    branch: Branch,
) -> Result<JointDistribution> {
    require_bipartite(rho_ab)?;
    let db = rho_ab.dims()[1];
    if db != bases.dim() {
        return Err(Error::DimensionMismatch {
            context: "dephasing basis on B",
            expected: db,
            found: bases.dim(),
        });
    }
    let basis = bases.get(branch);
    let n = strat.alphabet.len();
    let probs = match &strat.kind {
        StrategyKind::Measure { povms } => {
            let povm = &povms[branch.index()];
            if povm.dim() != rho_ab.dims()[0] {
                return Err(Error::DimensionMismatch {
                    context: "helper measurement on A",
                    expected: rho_ab.dims()[0],
                    found: povm.dim(),
                });
            }
            let map = ConditionalMap::new(rho_ab.matrix(), rho_ab.dims(), 0, &[1])?;
            joint_from_map(&map, povm.vectors(), basis)?
                .transposed()
                .as_slice()
                .to_vec()
        }
        StrategyKind::HiddenVariable(model) => model.joint(basis, branch)?,
        StrategyKind::Constant { symbol } => {
            let pb = bob_marginal(rho_ab, basis)?;
            let mut probs = vec![0.0; db * n];
            for (b, p) in pb.into_iter().enumerate() {
                probs[b * n + symbol] = p;
            }
            probs
        }
        StrategyKind::UniformRandom => {
            let pb = bob_marginal(rho_ab, basis)?;
            pb.into_iter()
                .flat_map(|p| std::iter::repeat_n(p / n as f64, n))
                .collect()
        }
        StrategyKind::InterceptResend {
            inner,
            flip_probability: f,
        } => {
            let base = strategy_joint(rho_ab, bases, inner, branch)?;
            let mut probs = vec![0.0; db * n];
            for b in 0..db {
                for k in 0..n {
                    let p = base.get(b, k);
                    probs[b * n + k] += (1.0 - f) * p;
                    probs[b * n + (k + 1) % n] += f * p;
                }
            }
            probs
        }
    };
    JointDistribution::new(db, n, probs)
}

fn bob_marginal(rho_ab: &DensityMatrix, basis: &ProjectiveBasis) -> Result<Vec<f64>> {
    Ok(basis.probabilities(partial_trace(rho_ab, &[1])?.matrix()))
}

/// `W~0 = (H(R) + H(S)) / 2` for Bob's marginal dephased in each basis.
pub fn unassisted_dephased_cost(rho_b: &DensityMatrix, bases: &BasisPair) -> Result<f64> {
    if rho_b.dim() != bases.dim() {
        return Err(Error::DimensionMismatch {
            context: "dephasing basis on B",
            expected: rho_b.dim(),
            found: bases.dim(),
        });
    }
    let h = |b: &ProjectiveBasis| entropy_bits(&b.probabilities(rho_b.matrix()));
    Ok(0.5 * (h(&bases.r) + h(&bases.s)))
}

/// `H(X | K_X)` for both branches.
pub fn branch_costs(
    rho_ab: &DensityMatrix,
    bases: &BasisPair,
    strat: &Strategy,
) -> Result<[f64; 2]> {
    Ok([
        strategy_joint(rho_ab, bases, strat, Branch::R)?.entropy_first_given_second(),
        strategy_joint(rho_ab, bases, strat, Branch::S)?.entropy_first_given_second(),
    ])
}

/// `W~_A = (H(R | A_R) + H(S | A_S)) / 2`.
pub fn observed_assisted_cost(
    rho_ab: &DensityMatrix,
    bases: &BasisPair,
    strat: &Strategy,
) -> Result<f64> {
    let [r, s] = branch_costs(rho_ab, bases, strat)?;
    Ok(0.5 * (r + s))
}

/// `C(R, S) / 2`, the smallest observed cost a helper without steering can reach.
pub fn lhs_floor(bases: &BasisPair) -> f64 {
    0.5 * complementarity(&bases.r, &bases.s).expect("bases of equal dimension")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringCertificate {
    pub format_version: u32,
    pub strategy: String,
    pub w_tilde_0: f64,
    pub w_tilde_a: f64,
    pub floor: f64,
    /// `floor - W~_A`; positive when the helper beats the floor.
    pub margin: f64,
    pub tolerance: f64,
    pub fired: bool,
    /// When fired: `W~_A < floor <= W~_E` for any adversary.
    pub conclusion: String,
}

pub fn certify_steering(
    rho_ab: &DensityMatrix,
    bases: &BasisPair,
    strat: &Strategy,
) -> Result<SteeringCertificate> {
    let w_tilde_a = observed_assisted_cost(rho_ab, bases, strat)?;
    let w_tilde_0 = unassisted_dephased_cost(&partial_trace(rho_ab, &[1])?, bases)?;
    Ok(certificate(
        strat.label(),
        w_tilde_0,
        w_tilde_a,
        lhs_floor(bases),
    ))
}

fn certificate(label: &str, w_tilde_0: f64, w_tilde_a: f64, floor: f64) -> SteeringCertificate {
    let fired = w_tilde_a < floor - CERTIFICATE_TOL;
    let conclusion = if fired {
        format!(
            "steering certified: W~_A = {w_tilde_a:.6} < {floor:.6} <= W~_E, the helper holds an exclusive advantage"
        )
    } else {
        format!("no certificate: W~_A = {w_tilde_a:.6} is not below the floor {floor:.6}")
    };
    SteeringCertificate {
        format_version: FORMAT_VERSION,
        strategy: label.to_string(),
        w_tilde_0,
        w_tilde_a,
        floor,
        margin: floor - w_tilde_a,
        tolerance: CERTIFICATE_TOL,
        fired,
        conclusion,
    }
}

/// Per-branch measurements minimizing `H(X | A_X)`.
pub fn best_matched_strategy(
    rho_ab: &DensityMatrix,
    bases: &BasisPair,
    cfg: &OptimizerConfig,
) -> Result<Strategy> {
    require_bipartite(rho_ab)?;
    cfg.validate()?;
    let da = rho_ab.dims()[0];
    if rho_ab.dims()[1] != bases.dim() {
        return Err(Error::DimensionMismatch {
            context: "dephasing basis on B",
            expected: rho_ab.dims()[1],
            found: bases.dim(),
        });
    }
    let map = ConditionalMap::new(rho_ab.matrix(), rho_ab.dims(), 0, &[1])?;
    let cost = |vs: &[numerics::CVector], basis: &ProjectiveBasis| {
        joint_from_map(&map, vs, basis)
            .map(|j| j.entropy_second_given_first())
            .unwrap_or(f64::INFINITY)
    };
    let mut povms = Vec::with_capacity(2);
    for branch in Branch::ALL {
        let basis = bases.get(branch);
        let povm = if da == 2 {
            let s = minimize_bloch(
                |t, p| {
                    let (a, b) = bloch_vectors(t, p);
                    cost(&[a, b], basis)
                },
                cfg,
            );
            crate::measurements::bloch_projectors(s.theta, s.phi)
        } else {
            minimize_povm(|m| cost(m.vectors(), basis), da, da, cfg).povm
        };
        povms.push(povm);
    }
    let s = povms.pop().expect("two branches");
    let r = povms.pop().expect("two branches");
    Strategy::new(
        "optimized",
        default_alphabet(da),
        StrategyKind::Measure { povms: [r, s] },
    )
}

/// Named single-qubit gates composed right to left, e.g. `XH = X * H`.
pub fn gate(name: &str) -> Result<CMatrix> {
    let [x, y, z] = paulis();
    let mut u = identity(2);
    for ch in name.chars() {
        let g = match ch {
            'I' => identity(2),
            'X' => x.clone(),
            'Y' => y.clone(),
            'Z' => z.clone(),
            'H' => hadamard(),
            _ => {
                return Err(Error::Config(format!(
                    "unknown gate `{ch}` in correction `{name}` (use I, X, Y, Z, H)"
                )))
            }
        };
        u *= g;
    }
    if name.is_empty() {
        return Err(Error::Config("empty correction gate name".into()));
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub name: String,
    pub unitary: CMatrix,
}

impl Correction {
    pub fn new(name: impl Into<String>, unitary: CMatrix) -> Result<Self> {
        if !unitary.is_square() {
            return Err(Error::NotSquare {
                rows: unitary.nrows(),
                cols: unitary.ncols(),
            });
        }
        let deviation = numerics::unitarity_deviation(&unitary);
        if !(deviation <= 1e-9) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self {
            name: name.into(),
            unitary,
        })
    }

    pub fn gate(name: &str) -> Result<Self> {
        Self::new(name, gate(name)?)
    }
}

/// Bob's correction for each branch and announced symbol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corrections {
    table: [BTreeMap<String, Correction>; 2],
}

impl Corrections {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, branch: Branch, symbol: impl Into<String>, c: Correction) {
        self.table[branch.index()].insert(symbol.into(), c);
    }

    /// `up -> I, down -> X` after `Z` dephasing and `up -> H, down -> XH`
    /// after `X` dephasing: maps the announced basis vector to `|0>`.
    pub fn qubit_standard() -> Self {
        let mut c = Self::new();
        for (branch, up, down) in [(Branch::R, "I", "X"), (Branch::S, "H", "XH")] {
            c.insert(branch, "up", Correction::gate(up).expect("known gate"));
            c.insert(branch, "down", Correction::gate(down).expect("known gate"));
        }
        c
    }

    pub fn get(&self, branch: Branch, symbol: &str) -> Result<&Correction> {
        self.table[branch.index()]
            .get(symbol)
            .ok_or_else(|| Error::MissingCorrection {
                basis: branch.name().into(),
                symbol: symbol.into(),
            })
    }

    /// Every symbol must have a correction of the memory's dimension in both branches.
    pub fn check(&self, alphabet: &[String], dim: usize) -> Result<()> {
        for branch in Branch::ALL {
            for symbol in alphabet {
                let c = self.get(branch, symbol)?;
                if c.unitary.nrows() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "correction unitary on B",
                        expected: dim,
                        found: c.unitary.nrows(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VerifyMode {
    Exact {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    Sampled {
        shots: usize,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        seed: u64,
    },
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for VerifyMode {
    fn default() -> Self {
        VerifyMode::Exact {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl VerifyMode {
    pub fn epsilon(&self) -> f64 {
        match *self {
            VerifyMode::Exact { epsilon } | VerifyMode::Sampled { epsilon, .. } => epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub extractable_work: f64,
    pub passed: bool,
}

/// Szilard-engine test in the computational basis:
/// `W_ext = log2 d - H(diagonal)`, passing when `W_ext >= log2 d - epsilon`.
pub fn szilard_verify(rho_final: &DensityMatrix, mode: VerifyMode) -> Verification {
    match mode {
        VerifyMode::Exact { .. } => verify_diagonal(&rho_final.diagonal(), mode, None),
        VerifyMode::Sampled { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            verify_diagonal(&rho_final.diagonal(), mode, Some(&mut rng))
        }
    }
}

fn verify_diagonal(diag: &[f64], mode: VerifyMode, rng: Option<&mut ChaCha8Rng>) -> Verification {
    let log_d = (diag.len() as f64).log2();
    let h = match (mode, rng) {
        (VerifyMode::Sampled { shots, .. }, Some(rng)) => {
            let mut counts = vec![0usize; diag.len()];
            for _ in 0..shots {
                counts[sample_index(diag, rng.random())] += 1;
            }
            let freq: Vec<f64> = counts
                .iter()
                .map(|&c| c as f64 / shots.max(1) as f64)
                .collect();
            entropy_bits(&freq)
        }
        _ => entropy_bits(diag).max(0.0),
    };
    let extractable_work = (log_d - h).min(log_d);
    Verification {
        extractable_work,
        passed: extractable_work >= log_d - mode.epsilon(),
    }
}

/// Inverse-CDF sampling; `u` in `[0, 1)`.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Everything needed to run the protocol.
#[derive(Debug, Clone)]
pub struct ProtocolSetup {
    pub state: DensityMatrix,
    pub bases: BasisPair,
    pub strategy: Strategy,
    pub corrections: Corrections,
    pub runs: usize,
    pub seed: u64,
    pub w_max: f64,
    pub verify: VerifyMode,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRunRecord {
    pub run: usize,
    pub basis: Branch,
    /// Bob's dephased outcome; never read by the protocol itself.
    pub outcome: usize,
    pub announcement: String,
    pub correction: String,
    /// Entropy of Bob's corrected memory in the computational basis.
    pub bill: f64,
    pub committed: bool,
    pub work_spent: f64,
    pub extractable_work: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub runs: usize,
    /// Plug-in `H(X | K)` from the sampled counts.
    pub empirical_entropy: f64,
    pub exact_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub format_version: u32,
    pub strategy: String,
    pub runs: usize,
    pub seed: u64,
    pub w_max: f64,
    /// Mean erasure bill per run.
    pub mean_cost: f64,
    /// Sample standard deviation of the bill.
    pub cost_std: f64,
    /// Mean work actually spent (committed runs only).
    pub mean_work_spent: f64,
    pub commit_rate: f64,
    pub pass_rate: f64,
    pub mean_extractable_work: f64,
    /// `(H_R + H_S) / 2` from sampled counts.
    pub empirical_cost: f64,
    /// Delta-method standard error of `empirical_cost`.
    pub empirical_cost_stderr: f64,
    pub branches: BTreeMap<String, BranchSummary>,
    pub floor: f64,
    pub certificate: SteeringCertificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub records: Vec<ProtocolRunRecord>,
    pub summary: ProtocolSummary,
}

/// Bob's view of one `(branch, announcement)` pair.
struct Cell {
    correction: String,
    bill: f64,
    corrected: DensityMatrix,
}

/// Runs the four-step protocol `setup.runs` times.
///
/// Run `i` draws from a ChaCha8 stream selected by `i`, so results are
/// identical whether the runs execute sequentially or in parallel.
pub fn simulate_protocol(setup: &ProtocolSetup) -> Result<ProtocolOutcome> {
    let ProtocolSetup {
        state,
        bases,
        strategy,
        corrections,
        runs,
        seed,
        w_max,
        verify,
        execution,
    } = setup;
    require_bipartite(state)?;
    let db = state.dims()[1];
    corrections.check(strategy.alphabet(), db)?;
    if !w_max.is_finite() {
        return Err(Error::Config(format!(
            "work cap W_max = {w_max} must be finite"
        )));
    }
    if *runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let n = strategy.alphabet().len();
    let joints = [
        strategy_joint(state, bases, strategy, Branch::R)?,
        strategy_joint(state, bases, strategy, Branch::S)?,
    ];

    // Bob's state given (X, k) is the dephased mixture sum_b P(b|k) |x_b><x_b|.
    let mut cells: Vec<Vec<Option<Cell>>> = Vec::new();
    for branch in Branch::ALL {
        let joint = &joints[branch.index()];
        let basis = bases.get(branch);
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let pk: f64 = (0..db).map(|b| joint.get(b, k)).sum();
            if pk <= 0.0 {
                row.push(None);
                continue;
            }
            let mut m = CMatrix::zeros(db, db);
            for b in 0..db {
                m += basis.projector(b).scale(joint.get(b, k) / pk);
            }
            let c = corrections.get(branch, &strategy.alphabet()[k])?;
            let corrected = DensityMatrix::new(&c.unitary * m * c.unitary.adjoint(), vec![db])?;
            row.push(Some(Cell {
                correction: c.name.clone(),
                bill: entropy_bits(&corrected.diagonal()).max(0.0),
                corrected,
            }));
        }
        cells.push(row);
    }
    let erased = DensityMatrix::basis_state(vec![db], 0);

    let records = map_indexed(*execution, *runs, |run| {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        rng.set_stream(run as u64);
        let branch = if rng.random_bool(0.5) {
            Branch::S
        } else {
            Branch::R
        };
        let cell_index = sample_index(joints[branch.index()].as_slice(), rng.random());
        let (outcome, k) = (cell_index / n, cell_index % n);
        let cell = cells[branch.index()][k]
            .as_ref()
            .expect("sampled cell has positive probability");
        let committed = cell.bill <= w_max + COST_TOL;
        let final_state = if committed { &erased } else { &cell.corrected };
        let v = match verify {
            VerifyMode::Exact { .. } => verify_diagonal(&final_state.diagonal(), *verify, None),
            VerifyMode::Sampled { seed: vs, .. } => {
                let mut vr = ChaCha8Rng::seed_from_u64(*vs);
                vr.set_stream(run as u64);
                verify_diagonal(&final_state.diagonal(), *verify, Some(&mut vr))
            }
        };
        ProtocolRunRecord {
            run,
            basis: branch,
            outcome,
            announcement: strategy.alphabet()[k].clone(),
            correction: cell.correction.clone(),
            bill: cell.bill,
            committed,
            work_spent: if committed { cell.bill } else { 0.0 },
            extractable_work: v.extractable_work,
            passed: v.passed,
        }
    });

    let summary = summarize(setup, &records, &joints)?;
    Ok(ProtocolOutcome { records, summary })
}

fn summarize(
    setup: &ProtocolSetup,
    records: &[ProtocolRunRecord],
    joints: &[JointDistribution; 2],
) -> Result<ProtocolSummary> {
    let runs = records.len() as f64;
    let mean = |f: &dyn Fn(&ProtocolRunRecord) -> f64| records.iter().map(f).sum::<f64>() / runs;
    let mean_cost = mean(&|r| r.bill);
    let cost_std = if records.len() > 1 {
        (records
            .iter()
            .map(|r| (r.bill - mean_cost).powi(2))
            .sum::<f64>()
            / (runs - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let n = setup.strategy.alphabet().len();
    let db = setup.bases.dim();
    let index: BTreeMap<&str, usize> = setup
        .strategy
        .alphabet()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut branches = BTreeMap::new();
    let mut empirical = 0.0;
    let mut variance = 0.0;
    for branch in Branch::ALL {
        let mut counts = vec![0usize; db * n];
        for r in records.iter().filter(|r| r.basis == branch) {
            counts[r.outcome * n + index[r.announcement.as_str()]] += 1;
        }
        let total: usize = counts.iter().sum();
        let (h, var) = if total == 0 {
            (0.0, 0.0)
        } else {
            let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            let table = JointDistribution::new(db, n, freq)?;
            let h = table.entropy_first_given_second();
            // Var[-log2 P(b|k)] / total
            let pk = table.second_marginal();
            let second: f64 = (0..db)
                .flat_map(|b| (0..n).map(move |k| (b, k)))
                .filter(|&(b, k)| table.get(b, k) > 0.0)
                .map(|(b, k)| table.get(b, k) * (table.get(b, k) / pk[k]).log2().powi(2))
                .sum();
            (h, ((second - h * h).max(0.0)) / total as f64)
        };
        empirical += 0.5 * h;
        variance += 0.25 * var;
        branches.insert(
            branch.name().to_string(),
            BranchSummary {
                runs: total,
                empirical_entropy: h,
                exact_entropy: joints[branch.index()].entropy_first_given_second(),
            },
        );
    }
    let certificate = certify_steering(&setup.state, &setup.bases, &setup.strategy)?;
    Ok(ProtocolSummary {
        format_version: FORMAT_VERSION,
        strategy: setup.strategy.label().to_string(),
        runs: records.len(),
        seed: setup.seed,
        w_max: setup.w_max,
        mean_cost,
        cost_std,
        mean_work_spent: mean(&|r| r.work_spent),
        commit_rate: mean(&|r| f64::from(u8::from(r.committed))),
        pass_rate: mean(&|r| f64::from(u8::from(r.passed))),
        mean_extractable_work: mean(&|r| r.extractable_work),
        empirical_cost: empirical,
        empirical_cost_stderr: variance.sqrt(),
        branches,
        floor: certificate.floor,
        certificate,
    })
}

/// Per-run CSV with one column per record field.
pub fn write_runs_csv<W: Write>(mut w: W, records: &[ProtocolRunRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "run,basis,outcome,announcement,correction,bill,committed,work_spent,extractable_work,passed"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run,
            r.basis.name(),
            r.outcome,
            r.announcement,
            r.correction,
            crate::werner::format_g12(r.bill),
            u8::from(r.committed),
            crate::werner::format_g12(r.work_spent),
            crate::werner::format_g12(r.extractable_work),
            u8::from(r.passed)
        )?;
    }
    Ok(())
}

/// Largest elementwise difference between two joint tables, used to
/// confirm that two strategies induce the same statistics.
pub fn joint_difference(a: &JointDistribution, b: &JointDistribution) -> f64 {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return f64::INFINITY;
    }
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Total variation distance between two joint tables of equal shape.
pub fn total_variation(a: &JointDistribution, b: &JointDistribution) -> f64 {
    0.5 * a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::h2;
    use crate::states::{
        bell_state, random_separable_decomposition, tensor, werner_separable_decomposition,
        werner_state, Bell,
    };

    fn z_and_x_pauli_strategy() -> Strategy {
        let b = BasisPair::qubit_mubs();
        Strategy::new(
            "matched-pauli",
            default_alphabet(2),
            StrategyKind::Measure {
                povms: [b.get(Branch::R).to_povm(), b.get(Branch::S).to_povm()],
            },
        )
        .unwrap()
    }

    #[test]
    fn unassisted_dephased_examples() {
        let b = BasisPair::qubit_mubs();
        let mixed = DensityMatrix::maximally_mixed(vec![2]);
        assert!((unassisted_dephased_cost(&mixed, &b).unwrap() - 1.0).abs() < 1e-12);
        let zero = DensityMatrix::basis_state(vec![2], 0);
        assert!((unassisted_dephased_cost(&zero, &b).unwrap() - 0.5).abs() < 1e-12);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = numerics::c(0.3, 0.0);
        m[(1, 1)] = numerics::c(0.7, 0.0);
        let diag = DensityMatrix::new(m, vec![2]).unwrap();
        let z = BasisPair::new(
            ProjectiveBasis::computational(2),
            ProjectiveBasis::computational(2),
        )
        .unwrap();
        assert!((unassisted_dephased_cost(&diag, &z).unwrap() - h2(0.3)).abs() < 1e-12);
    }

    #[test]
    fn observed_cost_examples() {
        let b = BasisPair::qubit_mubs();
        let bell = bell_state(Bell::PhiPlus);
        assert!(
            observed_assisted_cost(&bell, &b, &Strategy::honest_matched(&b))
                .unwrap()
                .abs()
                < 1e-12
        );
        for p in [0.2, 0.6, 0.9] {
            let w = werner_state(p).unwrap();
            let v = observed_assisted_cost(&w, &b, &z_and_x_pauli_strategy()).unwrap();
            assert!((v - h2((1.0 - p) / 2.0)).abs() < 1e-9);
        }
        let rho = crate::states::random_density(4, 3, 7)
            .unwrap()
            .with_dims(vec![2, 2])
            .unwrap();
        let constant = Strategy::constant(default_alphabet(2), 1).unwrap();
        let w0 = unassisted_dephased_cost(&partial_trace(&rho, &[1]).unwrap(), &b).unwrap();
        assert!((observed_assisted_cost(&rho, &b, &constant).unwrap() - w0).abs() < 1e-12);
        let uniform = Strategy::uniform_random(default_alphabet(3)).unwrap();
        assert!((observed_assisted_cost(&rho, &b, &uniform).unwrap() - w0).abs() < 1e-12);
    }

    #[test]
    fn floor_values() {
        assert!((lhs_floor(&BasisPair::qubit_mubs()) - 0.5).abs() < 1e-12);
        let z = ProjectiveBasis::computational(2);
        assert!(lhs_floor(&BasisPair::new(z.clone(), z).unwrap()).abs() < 1e-12);
        let f3 = BasisPair::new(
            ProjectiveBasis::computational(3),
            ProjectiveBasis::fourier(3),
        )
        .unwrap();
        assert!((lhs_floor(&f3) - 0.5 * 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn certificates() {
        let b = BasisPair::qubit_mubs();
        let s = z_and_x_pauli_strategy();
        let c = certify_steering(&werner_state(0.9).unwrap(), &b, &s).unwrap();
        assert!(c.fired && (c.w_tilde_a - 0.286397).abs() < 1e-6);
        let c = certify_steering(&werner_state(0.6).unwrap(), &b, &s).unwrap();
        assert!(!c.fired && (c.w_tilde_a - 0.721928).abs() < 1e-6);
    }

    #[test]
    fn lambda_replay_matches_helper() {
        let b = BasisPair::qubit_mubs();
        let povms = [b.get(Branch::R).to_povm(), b.get(Branch::S).to_povm()];
        for decomp in [
            werner_separable_decomposition(0.3).unwrap(),
            random_separable_decomposition(3),
        ] {
            let model =
                LhsModel::from_separable(&decomp, &povms[0], &povms[1], default_alphabet(2))
                    .unwrap();
            let alice = Strategy::new(
                "lhs",
                default_alphabet(2),
                StrategyKind::HiddenVariable(model.clone()),
            )
            .unwrap();
            let eve = lhs_eve_strategy(&model).unwrap();
            let rho = decomp.state();
            for branch in Branch::ALL {
                let ja = strategy_joint(&rho, &b, &alice, branch).unwrap();
                let je = strategy_joint(&rho, &b, &eve, branch).unwrap();
                assert_eq!(ja, je);
                let measured = Strategy::new(
                    "measure",
                    default_alphabet(2),
                    StrategyKind::Measure {
                        povms: povms.clone(),
                    },
                )
                .unwrap();
                let jm = strategy_joint(&rho, &b, &measured, branch).unwrap();
                assert!(joint_difference(&jm, &je) < 1e-12);
            }
        }
    }

    #[test]
    fn model_validation() {
        let s = vec![DensityMatrix::maximally_mixed(vec![2])];
        assert!(LhsModel::new(
            vec![0.5],
            s.clone(),
            [vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]],
            default_alphabet(2)
        )
        .is_err());
        assert!(LhsModel::new(
            vec![1.0],
            s.clone(),
            [vec![vec![0.5, 0.6]], vec![vec![1.0, 0.0]]],
            default_alphabet(2)
        )
        .is_err());
        assert!(LhsModel::new(
            vec![1.0],
            s,
            [vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]],
            default_alphabet(2)
        )
        .is_ok());
    }

    #[test]
    fn szilard_examples() {
        let v = szilard_verify(
            &DensityMatrix::basis_state(vec![2], 0),
            VerifyMode::default(),
        );
        assert!((v.extractable_work - 1.0).abs() < 1e-12 && v.passed);
        let v = szilard_verify(
            &DensityMatrix::maximally_mixed(vec![2]),
            VerifyMode::default(),
        );
        assert!(v.extractable_work.abs() < 1e-12 && !v.passed);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = numerics::c(0.9, 0.0);
        m[(1, 1)] = numerics::c(0.1, 0.0);
        let v = szilard_verify(
            &DensityMatrix::new(m, vec![2]).unwrap(),
            VerifyMode::default(),
        );
        assert!((v.extractable_work - 0.531004).abs() < 1e-6 && !v.passed);
        let sampled = VerifyMode::Sampled {
            shots: 1000,
            epsilon: 1e-6,
            seed: 4,
        };
        assert!(szilard_verify(&DensityMatrix::basis_state(vec![2], 0), sampled).passed);
        let a = szilard_verify(&DensityMatrix::maximally_mixed(vec![2]), sampled);
        assert!(!a.passed);
        assert_eq!(
            a,
            szilard_verify(&DensityMatrix::maximally_mixed(vec![2]), sampled)
        );
    }

    fn setup(state: DensityMatrix, strategy: Strategy, w_max: f64, runs: usize) -> ProtocolSetup {
        ProtocolSetup {
            state,
            bases: BasisPair::qubit_mubs(),
            strategy,
            corrections: Corrections::qubit_standard(),
            runs,
            seed: 17,
            w_max,
            verify: VerifyMode::default(),
            execution: Execution::Parallel,
        }
    }

    #[test]
    fn protocol_examples() {
        let b = BasisPair::qubit_mubs();
        let honest = simulate_protocol(&setup(
            bell_state(Bell::PhiPlus),
            Strategy::honest_matched(&b),
            0.0,
            2000,
        ))
        .unwrap();
        assert_eq!(honest.summary.pass_rate, 1.0);
        assert_eq!(honest.summary.mean_cost, 0.0);
        let wrong = simulate_protocol(&setup(
            bell_state(Bell::PhiPlus),
            Strategy::wrong_basis(&b),
            0.0,
            2000,
        ))
        .unwrap();
        assert_eq!(wrong.summary.pass_rate, 0.0);
        assert!((wrong.summary.mean_extractable_work).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let u = simulate_protocol(&setup(mixed, Strategy::honest_matched(&b), 0.0, 500)).unwrap();
        assert_eq!(u.summary.pass_rate, 0.0);
    }

    #[test]
    fn protocol_is_schedule_independent() {
        let b = BasisPair::qubit_mubs();
        let mut s = setup(
            werner_state(0.8).unwrap(),
            Strategy::intercept_resend(Strategy::honest_matched(&b), 0.1).unwrap(),
            0.5,
            3000,
        );
        let par = simulate_protocol(&s).unwrap();
        s.execution = Execution::Sequential;
        let seq = simulate_protocol(&s).unwrap();
        assert_eq!(par.records, seq.records);
        assert_eq!(par.summary, seq.summary);
    }

    #[test]
    fn missing_correction_names_symbol() {
        let b = BasisPair::qubit_mubs();
        let mut s = setup(
            bell_state(Bell::PhiPlus),
            Strategy::honest_matched(&b),
            0.0,
            10,
        );
        s.corrections = Corrections::new();
        s.corrections
            .insert(Branch::R, "up", Correction::gate("I").unwrap());
        let err = simulate_protocol(&s).unwrap_err();
        assert!(err.to_string().contains("`down`"), "{err}");
    }

    #[test]
    fn gates_compose() {
        let xh = gate("XH").unwrap();
        let plus_to_zero = &gate("H").unwrap() * ProjectiveBasis::hadamard().vector(0);
        assert!((plus_to_zero[0].re - 1.0).abs() < 1e-12);
        let minus = ProjectiveBasis::hadamard().vector(1);
        assert!(((&xh * minus)[0].norm() - 1.0).abs() < 1e-12);
        assert!(gate("Q").is_err());
    }

    #[test]
    fn product_state_gives_no_help() {
        let b = BasisPair::qubit_mubs();
        let rho = tensor(
            &DensityMatrix::maximally_mixed(vec![2]),
            &DensityMatrix::basis_state(vec![2], 0),
        );
        let best = best_matched_strategy(&rho, &b, &OptimizerConfig::default()).unwrap();
        let v = observed_assisted_cost(&rho, &b, &best).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }
}
