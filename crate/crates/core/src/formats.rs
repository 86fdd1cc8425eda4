//! JSON documents read and written by the command-line tool.
//!
//! Matrices are row-major arrays of rows, split into real and imaginary
//! parts. Basis vectors are listed one per inner array. Paths inside
//! configuration files are resolved relative to the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costs::OptimizerConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measurements::{ProjectiveBasis, RankOnePOVM};
use crate::numerics::{c, CMatrix};
use crate::recovery::{
    compression_plan, ledger_check, replay_blocks, run_dd_recovery, run_sdi_recovery, BlockSpec,
    CompressionPlan, Deviation, RecoveryReport, SdiRecoveryReport,
};
use crate::semidi::{
    best_matched_strategy, default_alphabet, BasisPair, Branch, Correction, Corrections, LhsModel,
    ProtocolSetup, Strategy, StrategyKind, VerifyMode,
};
use crate::states::{
    bell_state, werner_separable_decomposition, werner_state, Bell, DensityMatrix,
};
use crate::FORMAT_VERSION;

fn matrix_from_parts(re: &[Vec<f64>], im: &[Vec<f64>], what: &str) -> Result<CMatrix> {
    let rows = re.len();
    if im.len() != rows {
        return Err(Error::Config(format!(
            "{what}: `re` has {rows} rows but `im` has {}",
            im.len()
        )));
    }
    let cols = re.first().map_or(0, Vec::len);
    for (i, (r, m)) in re.iter().zip(im).enumerate() {
        if r.len() != cols || m.len() != cols {
            return Err(Error::Config(format!(
                "{what}: row {i} does not have {cols} entries in both `re` and `im`"
            )));
        }
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| c(re[i][j], im[i][j])))
}

fn matrix_to_parts(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
        .collect();
    let im = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
        .collect();
    (re, im)
}

/// `{"dims": [...], "re": [[...]], "im": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateJson {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let (re, im) = matrix_to_parts(rho.matrix());
        Self {
            dims: rho.dims().to_vec(),
            re,
            im,
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(
            matrix_from_parts(&self.re, &self.im, "state")?,
            self.dims.clone(),
        )
    }
}

/// `{"dim": d, "vectors_re": [[...]], "vectors_im": [[...]]}`, one vector per inner array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisJson {
    pub dim: usize,
    pub vectors_re: Vec<Vec<f64>>,
    pub vectors_im: Vec<Vec<f64>>,
}

impl BasisJson {
    pub fn from_basis(b: &ProjectiveBasis) -> Self {
        let (re, im) = matrix_to_parts(&b.matrix().transpose());
        Self {
            dim: b.dim(),
            vectors_re: re,
            vectors_im: im,
        }
    }

    pub fn to_basis(&self) -> Result<ProjectiveBasis> {
        let rows = matrix_from_parts(&self.vectors_re, &self.vectors_im, "basis")?;
        if rows.nrows() != self.dim || rows.ncols() != self.dim {
            return Err(Error::Config(format!(
                "basis declares dim {} but lists {} vectors of length {}",
                self.dim,
                rows.nrows(),
                rows.ncols()
            )));
        }
        ProjectiveBasis::new(rows.transpose())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    read_json::<StateJson>(path)?.to_state()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Where a configuration gets its state from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateRef {
    Werner {
        p: f64,
    },
    Bell {
        which: Bell,
    },
    File {
        path: PathBuf,
    },
    Inline {
        dims: Vec<usize>,
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
}

impl StateRef {
    pub fn load(&self, base: &Path) -> Result<DensityMatrix> {
        match self {
            StateRef::Werner { p } => werner_state(*p),
            StateRef::Bell { which } => Ok(bell_state(*which)),
            StateRef::File { path } => load_state(&resolve(base, path)),
            StateRef::Inline { dims, re, im } => StateJson {
                dims: dims.clone(),
                re: re.clone(),
                im: im.clone(),
            }
            .to_state(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasisSpec {
    Computational { dim: usize },
    Hadamard,
    Fourier { dim: usize },
    Bloch { theta: f64, phi: f64 },
    File { path: PathBuf },
    Inline(BasisJson),
}

impl BasisSpec {
    pub fn load(&self, base: &Path) -> Result<ProjectiveBasis> {
        match self {
            BasisSpec::Computational { dim } => Ok(ProjectiveBasis::computational(*dim)),
            BasisSpec::Hadamard => Ok(ProjectiveBasis::hadamard()),
            BasisSpec::Fourier { dim } => Ok(ProjectiveBasis::fourier(*dim)),
            BasisSpec::Bloch { theta, phi } => Ok(ProjectiveBasis::from_bloch(*theta, *phi)),
            BasisSpec::File { path } => read_json::<BasisJson>(&resolve(base, path))?.to_basis(),
            BasisSpec::Inline(b) => b.to_basis(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasesSpec {
    pub r: BasisSpec,
    pub s: BasisSpec,
}

pub fn load_bases(spec: Option<&BasesSpec>, base: &Path) -> Result<BasisPair> {
    match spec {
        None => Ok(BasisPair::qubit_mubs()),
        Some(b) => BasisPair::new(b.r.load(base)?, b.s.load(base)?),
    }
}

/// Explicit hidden-variable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LhsModelJson {
    pub weights: Vec<f64>,
    pub bob_states: Vec<StateJson>,
    /// `responses[branch][lambda][symbol]`, branches `R` and `S`.
    pub responses: BTreeMap<Branch, Vec<Vec<f64>>>,
    pub alphabet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Explicit(LhsModelJson),
    /// The product decomposition of a Werner state with `p <= 1/3`, with the
    /// helper measuring in Bob's two bases.
    WernerSeparable {
        p: f64,
    },
}

impl ModelSpec {
    pub fn build(&self, bases: &BasisPair) -> Result<LhsModel> {
        match self {
            ModelSpec::Explicit(m) => {
                let states = m
                    .bob_states
                    .iter()
                    .map(StateJson::to_state)
                    .collect::<Result<Vec<_>>>()?;
                let table = |b: Branch| {
                    m.responses.get(&b).cloned().ok_or_else(|| {
                        Error::InvalidModel(format!("missing responses for branch {}", b.name()))
                    })
                };
                LhsModel::new(
                    m.weights.clone(),
                    states,
                    [table(Branch::R)?, table(Branch::S)?],
                    m.alphabet.clone(),
                )
            }
            ModelSpec::WernerSeparable { p } => {
                let d = werner_separable_decomposition(*p)?;
                LhsModel::from_separable(
                    &d,
                    &bases.get(Branch::R).to_povm(),
                    &bases.get(Branch::S).to_povm(),
                    default_alphabet(2),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategySpec {
    HonestMatched,
    WrongBasis,
    /// Per-branch measurements found by the optimizer.
    Optimized,
    /// Measure the helper in the given bases.
    Measure {
        r: BasisSpec,
        s: BasisSpec,
    },
    Constant {
        symbol: String,
        alphabet: Vec<String>,
    },
    UniformRandom {
        alphabet: Vec<String>,
    },
    LhsModel {
        model: ModelSpec,
    },
    LambdaReplay {
        model: ModelSpec,
    },
    InterceptResend {
        inner: Box<StrategySpec>,
        flip_probability: f64,
    },
}

impl StrategySpec {
    pub fn build(
        &self,
        rho_ab: &DensityMatrix,
        bases: &BasisPair,
        cfg: &OptimizerConfig,
        base: &Path,
    ) -> Result<Strategy> {
        match self {
            StrategySpec::HonestMatched => Ok(Strategy::honest_matched(bases)),
            StrategySpec::WrongBasis => Ok(Strategy::wrong_basis(bases)),
            StrategySpec::Optimized => best_matched_strategy(rho_ab, bases, cfg),
            StrategySpec::Measure { r, s } => {
                let povms: [RankOnePOVM; 2] = [r.load(base)?.to_povm(), s.load(base)?.to_povm()];
                Strategy::new(
                    "measure",
                    default_alphabet(povms[0].outcomes()),
                    StrategyKind::Measure { povms },
                )
            }
            StrategySpec::Constant { symbol, alphabet } => {
                let index = alphabet.iter().position(|a| a == symbol).ok_or_else(|| {
                    Error::InvalidStrategy(format!(
                        "constant symbol `{symbol}` is not in the alphabet"
                    ))
                })?;
                Strategy::constant(alphabet.clone(), index)
            }
            StrategySpec::UniformRandom { alphabet } => Strategy::uniform_random(alphabet.clone()),
            StrategySpec::LhsModel { model } => {
                let m = model.build(bases)?;
                Strategy::new(
                    "lhs-model",
                    m.alphabet().to_vec(),
                    StrategyKind::HiddenVariable(m),
                )
            }
            StrategySpec::LambdaReplay { model } => {
                crate::semidi::lhs_eve_strategy(&model.build(bases)?)
            }
            StrategySpec::InterceptResend {
                inner,
                flip_probability,
            } => Strategy::intercept_resend(
                inner.build(rho_ab, bases, cfg, base)?,
                *flip_probability,
            ),
        }
    }
}

/// A correction given as a gate word (`"XH"`) or an explicit unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrectionSpec {
    Gate(String),
    Matrix {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
}

pub fn load_corrections(
    spec: &BTreeMap<Branch, BTreeMap<String, CorrectionSpec>>,
) -> Result<Corrections> {
    let mut out = Corrections::new();
    for (&branch, table) in spec {
        for (symbol, c) in table {
            let correction = match c {
                CorrectionSpec::Gate(name) => Correction::gate(name)?,
                CorrectionSpec::Matrix { re, im } => {
                    Correction::new("matrix", matrix_from_parts(re, im, "correction")?)?
                }
            };
            out.insert(branch, symbol.clone(), correction);
        }
    }
    Ok(out)
}

/// Configuration of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub state: StateRef,
    #[serde(default)]
    pub bases: Option<BasesSpec>,
    pub strategy: StrategySpec,
    pub corrections: BTreeMap<Branch, BTreeMap<String, CorrectionSpec>>,
    pub runs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub w_max: f64,
    #[serde(default)]
    pub verification: VerifyMode,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
}

impl ProtocolConfig {
    /// Builds the protocol. `seed_override` takes precedence over the file's seed.
    pub fn setup(
        &self,
        base: &Path,
        seed_override: Option<u64>,
        exec: Execution,
    ) -> Result<ProtocolSetup> {
        let seed = seed_override.or(self.seed).ok_or_else(|| {
            Error::Config(
                "missing field `seed` (or pass --seed): simulation samples randomness".into(),
            )
        })?;
        let state = self.state.load(base)?;
        let bases = load_bases(self.bases.as_ref(), base)?;
        let mut cfg = self.optimizer.clone().unwrap_or_default();
        cfg.execution = exec;
        let strategy = self.strategy.build(&state, &bases, &cfg, base)?;
        Ok(ProtocolSetup {
            state,
            bases,
            strategy,
            corrections: load_corrections(&self.corrections)?,
            runs: self.runs,
            seed,
            w_max: self.w_max,
            verify: self.verification,
            execution: exec,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub s_rho: f64,
    pub w: f64,
    pub n: u64,
    pub d: usize,
}

/// One block of a recovery scenario. Explicit blocks give `honest` (and
/// optionally `replace`); ledger blocks give `deviation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockJson {
    pub label: String,
    #[serde(default)]
    pub basis: Option<Branch>,
    #[serde(default)]
    pub honest: Option<StateRef>,
    #[serde(default)]
    pub replace: Option<StateRef>,
    #[serde(default)]
    pub deviation: Option<f64>,
    /// Qubits to reset for explicit blocks, bits for ledger blocks.
    #[serde(default)]
    pub erase: f64,
}

impl BlockJson {
    fn spec(&self, base: &Path) -> Result<BlockSpec> {
        match (&self.honest, self.deviation) {
            (Some(h), None) => {
                let deviation = match &self.replace {
                    None => Deviation::Honest,
                    Some(r) => Deviation::Replace(r.load(base)?),
                };
                if self.erase.fract() != 0.0 || self.erase < 0.0 {
                    return Err(Error::Config(format!(
                        "block `{}`: explicit blocks erase a whole number of qubits",
                        self.label
                    )));
                }
                Ok(BlockSpec::Explicit {
                    label: self.label.clone(),
                    honest: h.load(base)?,
                    deviation,
                    erase_qubits: self.erase as usize,
                })
            }
            (None, Some(d)) if self.replace.is_none() => Ok(BlockSpec::Ledger {
                label: self.label.clone(),
                deviation: d,
                erase_bits: self.erase,
            }),
            _ => Err(Error::Config(format!(
                "block `{}` needs either `honest` (explicit) or `deviation` (ledger-only), not both",
                self.label
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    pub state: StateRef,
    #[serde(default)]
    pub bases: Option<BasesSpec>,
    pub model: ModelSpec,
    #[serde(default)]
    pub erase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    Dd,
    Sdi,
}

/// Configuration of `recover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryScenario {
    pub mode: RecoveryMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub plan: Option<PlanSpec>,
    #[serde(default)]
    pub blocks: Vec<BlockJson>,
    /// Adds one ledger block per basis for a hidden-variable replay adversary.
    #[serde(default)]
    pub replay: Option<ReplaySpec>,
}

fn default_epsilon() -> f64 {
    crate::semidi::DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutput {
    pub format_version: u32,
    pub plan: Option<CompressionPlan>,
    pub ledger_ok: Option<bool>,
    pub dd: Option<RecoveryReport>,
    pub sdi: Option<SdiRecoveryReport>,
}

impl RecoveryScenario {
    pub fn run(&self, base: &Path, exec: Execution) -> Result<RecoveryOutput> {
        let plan = self
            .plan
            .as_ref()
            .map(|p| compression_plan(p.s_rho, p.w, p.n, p.d))
            .transpose()?;
        let ledger_ok = plan.as_ref().map(ledger_check);
        let mut specs: Vec<(Option<Branch>, BlockSpec)> = self
            .blocks
            .iter()
            .map(|b| Ok((b.basis, b.spec(base)?)))
            .collect::<Result<_>>()?;
        let mut costs = None;
        if let Some(r) = &self.replay {
            let rho = r.state.load(base)?;
            let bases = load_bases(r.bases.as_ref(), base)?;
            let model = r.model.build(&bases)?;
            let helper = Strategy::new(
                "lhs-model",
                model.alphabet().to_vec(),
                StrategyKind::HiddenVariable(model.clone()),
            )?;
            let adversary = crate::semidi::lhs_eve_strategy(&model)?;
            let ([rb, sb], c) = replay_blocks(&rho, &bases, &helper, &adversary, r.erase)?;
            specs.push((Some(Branch::R), rb));
            specs.push((Some(Branch::S), sb));
            costs = Some(c);
        }
        let (dd, sdi) = match self.mode {
            RecoveryMode::Dd => {
                let blocks: Vec<BlockSpec> = specs.into_iter().map(|(_, s)| s).collect();
                (Some(run_dd_recovery(&blocks, self.epsilon, exec)?), None)
            }
            RecoveryMode::Sdi => {
                let mut r = Vec::new();
                let mut s = Vec::new();
                for (tag, spec) in specs {
                    match tag {
                        Some(Branch::R) => r.push(spec),
                        Some(Branch::S) => s.push(spec),
                        None => {
                            return Err(Error::Config(
                                "sdi scenarios need a `basis` tag (R or S) on every block".into(),
                            ))
                        }
                    }
                }
                let mut rep = run_sdi_recovery(&r, &s, self.epsilon, exec)?;
                rep.costs = costs;
                (None, Some(rep))
            }
        };
        Ok(RecoveryOutput {
            format_version: FORMAT_VERSION,
            plan,
            ledger_ok,
            dd,
            sdi,
        })
    }
}
