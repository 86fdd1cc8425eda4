//! Compression-based erasure and the verify-or-revert control flow.
//!
//! Erasing `W < S(rho)` bits per copy of `rho^{(x) n}` is done in three
//! steps: a reversible compression concentrates the entropy into
//! `nS/log2 d` noisy registers, `nW/log2 d` of them are reset at
//! `log2 d` each, and a reversible decompression returns `n(1 - W/S)`
//! intact copies. Before anything irreversible happens, Bob checks that the
//! registers the compression should have emptied are in fact pure. If not,
//! every reversible step is undone and nothing is lost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::numerics::{self, trace_distance_matrices, CMatrix};
use crate::states::{partial_trace, tensor, DensityMatrix};
use crate::FORMAT_VERSION;

/// Largest explicit block, in qubits.
pub const MAX_BLOCK_QUBITS: usize = 10;
/// Reverted blocks must match their initial state this closely.
pub const REVERT_TOL: f64 = 1e-12;
const LEDGER_TOL: f64 = 1e-9;

/// Entropy and work bookkeeping for erasing `W` bits from each of `n` copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    pub n: u64,
    pub d: usize,
    pub s_rho: f64,
    pub w: f64,
    pub pure_registers: f64,
    pub noisy_registers: f64,
    pub erased_registers: f64,
    pub recovered_copies: f64,
    pub work_invested: f64,
}

/// Whole-register view of a plan: counts rounded down, with the total
/// amount dropped by rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerPlan {
    pub pure_registers: u64,
    pub noisy_registers: u64,
    pub erased_registers: u64,
    pub recovered_copies: u64,
    pub slack: f64,
}

impl CompressionPlan {
    /// `1 - W/S`, the fraction of copies returned intact.
    pub fn recovery_rate(&self) -> f64 {
        self.recovered_copies / self.n as f64
    }

    pub fn integer_view(&self) -> IntegerPlan {
        let counts = [
            self.pure_registers,
            self.noisy_registers,
            self.erased_registers,
            self.recovered_copies,
        ];
        // guard against 49.999999999 style values
        let down = |x: f64| (x + 1e-9).floor().max(0.0);
        IntegerPlan {
            pure_registers: down(counts[0]) as u64,
            noisy_registers: down(counts[1]) as u64,
            erased_registers: down(counts[2]) as u64,
            recovered_copies: down(counts[3]) as u64,
            slack: counts.iter().map(|&x| (x - down(x)).max(0.0)).sum(),
        }
    }
}

pub fn compression_plan(s_rho: f64, w: f64, n: u64, d: usize) -> Result<CompressionPlan> {
    if n == 0 {
        return Err(Error::Config(
            "number of copies n must be at least 1".into(),
        ));
    }
    if d < 2 {
        return Err(Error::Config(format!(
            "local dimension d = {d} must be at least 2"
        )));
    }
    let log_d = (d as f64).log2();
    if !(0.0..=log_d + LEDGER_TOL).contains(&s_rho) {
        return Err(Error::OutOfRange {
            name: "entropy per copy S",
            value: s_rho,
            range: "[0, log2 d]",
        });
    }
    if !(w >= 0.0) {
        return Err(Error::OutOfRange {
            name: "work budget per copy W",
            value: w,
            range: "[0, S]",
        });
    }
    if w > s_rho {
        return Err(Error::BudgetExceedsEntropy {
            budget: w,
            entropy: s_rho,
        });
    }
    let nf = n as f64;
    let noisy = nf * s_rho / log_d;
    let erased = nf * w / log_d;
    let recovered = if s_rho == 0.0 || w == 0.0 {
        nf
    } else {
        nf * (1.0 - w / s_rho)
    };
    Ok(CompressionPlan {
        n,
        d,
        s_rho,
        w,
        pure_registers: nf - noisy,
        noisy_registers: noisy,
        erased_registers: erased,
        recovered_copies: recovered,
        work_invested: erased * log_d,
    })
}

/// Re-derives every plan invariant; tolerances scale with the register count.
pub fn ledger_check(plan: &CompressionPlan) -> bool {
    let log_d = (plan.d as f64).log2();
    let nf = plan.n as f64;
    let tol = LEDGER_TOL * (nf * log_d).max(1.0);
    let counts = [
        plan.pure_registers,
        plan.noisy_registers,
        plan.erased_registers,
        plan.recovered_copies,
    ];
    let rate_ok = if plan.s_rho == 0.0 {
        (plan.recovered_copies - nf).abs() <= tol
    } else {
        (plan.recovered_copies - nf * (1.0 - plan.w / plan.s_rho)).abs() <= tol
    };
    plan.w <= plan.s_rho + LEDGER_TOL
        && counts.iter().all(|&x| x >= -tol)
        && (plan.pure_registers + plan.noisy_registers - nf).abs() <= tol
        && (plan.work_invested - plan.erased_registers * log_d).abs() <= tol
        && (plan.recovered_copies * plan.s_rho
            - (plan.noisy_registers - plan.erased_registers) * log_d)
            .abs()
            <= tol
        && rate_ok
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Compressed,
    Verified,
    Reverted,
    Erased,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Compressed => "compressed",
            Phase::Verified => "verified",
            Phase::Reverted => "reverted",
            Phase::Erased => "erased",
        }
    }
}

/// What the adversary did to a block before Bob processes it.
#[derive(Debug, Clone, PartialEq)]
pub enum Deviation {
    Honest,
    /// Deviation from the honest pattern, for ledger-only blocks.
    Ledger(f64),
    /// The block actually holds this state instead of the honest one.
    Replace(DensityMatrix),
}

#[derive(Debug, Clone)]
enum Content {
    Explicit {
        initial: DensityMatrix,
        current: DensityMatrix,
        /// Eigenbasis of the honest state mapped to the computational basis,
        /// largest eigenvalue first.
        compressor: CMatrix,
        qubits: usize,
        pure_registers: usize,
    },
    Ledger {
        deviation: f64,
    },
}

/// One block moving through `initial -> compressed -> {verified -> erased, reverted}`.
#[derive(Debug, Clone)]
pub struct Block {
    label: String,
    phase: Phase,
    content: Content,
    /// Registers reset once verification passes (qubits, or bits for ledger blocks).
    erase: f64,
    deviation: Option<f64>,
}

impl Block {
    /// An explicit block of at most ten qubits. Bob designs the compression
    /// from `honest`; `deviation` decides what the block really contains.
    pub fn explicit(
        label: impl Into<String>,
        honest: &DensityMatrix,
        deviation: Deviation,
        erase_qubits: usize,
    ) -> Result<Self> {
        let dim = honest.dim();
        let qubits = dim.trailing_zeros() as usize;
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Config(format!(
                "explicit block dimension {dim} is not a power of two"
            )));
        }
        if qubits > MAX_BLOCK_QUBITS {
            return Err(Error::TooLarge {
                dim,
                max: 1 << MAX_BLOCK_QUBITS,
            });
        }
        let initial =
            match deviation {
                Deviation::Honest => honest.clone(),
                Deviation::Replace(state) => {
                    if state.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            context: "replacement block state",
                            expected: dim,
                            found: state.dim(),
                        });
                    }
                    state
                }
                Deviation::Ledger(_) => return Err(Error::Config(
                    "explicit blocks take an honest or replacement state, not a ledger deviation"
                        .into(),
                )),
            };
        let initial = initial.with_dims(vec![2; qubits])?;
        let eig = numerics::eig_matrix(honest.matrix());
        let rank = honest.rank().max(1);
        let noisy = (rank as f64).log2().ceil() as usize;
        if erase_qubits > noisy {
            return Err(Error::Config(format!(
                "block erases {erase_qubits} qubits but only {noisy} hold entropy"
            )));
        }
        // row i of the compressor is the i-th largest eigenvector
        let compressor = CMatrix::from_fn(dim, dim, |i, j| eig.vectors[(j, dim - 1 - i)].conj());
        Ok(Self {
            label: label.into(),
            phase: Phase::Initial,
            content: Content::Explicit {
                current: initial.clone(),
                initial,
                compressor,
                qubits,
                pure_registers: qubits - noisy,
            },
            erase: erase_qubits as f64,
            deviation: None,
        })
    }

    /// A block tracked only through its reported deviation.
    pub fn ledger(label: impl Into<String>, deviation: f64, erase_bits: f64) -> Result<Self> {
        if !(deviation >= 0.0) || !(erase_bits >= 0.0) {
            return Err(Error::Config(format!(
                "ledger block needs nonnegative deviation and erasure, got {deviation} and {erase_bits}"
            )));
        }
        Ok(Self {
            label: label.into(),
            phase: Phase::Initial,
            content: Content::Ledger { deviation },
            erase: erase_bits,
            deviation: None,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pure_registers(&self) -> Option<usize> {
        match &self.content {
            Content::Explicit { pure_registers, .. } => Some(*pure_registers),
            Content::Ledger { .. } => None,
        }
    }

    /// The block's state, for explicit blocks.
    pub fn state(&self) -> Option<&DensityMatrix> {
        match &self.content {
            Content::Explicit { current, .. } => Some(current),
            Content::Ledger { .. } => None,
        }
    }

    fn transition(&mut self, from: Phase, to: Phase) -> Result<()> {
        if self.phase != from {
            return Err(Error::IllegalTransition {
                from: self.phase.name(),
                to: to.name(),
            });
        }
        self.phase = to;
        Ok(())
    }

    /// Applies the reversible compression.
    pub fn compress(&mut self) -> Result<()> {
        self.transition(Phase::Initial, Phase::Compressed)?;
        if let Content::Explicit {
            current,
            compressor,
            ..
        } = &mut self.content
        {
            *current = current.conjugate_by(compressor)?;
        }
        Ok(())
    }

    /// Trace distance of the leading registers from `|0...0>`, or the
    /// reported deviation for ledger blocks. Passing requires `delta <= epsilon`.
    pub fn verify(&mut self, epsilon: f64) -> Result<(f64, bool)> {
        if self.phase != Phase::Compressed {
            return Err(Error::IllegalTransition {
                from: self.phase.name(),
                to: Phase::Verified.name(),
            });
        }
        let delta = match &self.content {
            Content::Explicit {
                current,
                pure_registers,
                ..
            } => {
                let m = *pure_registers;
                if m == 0 {
                    0.0
                } else {
                    let keep: Vec<usize> = (0..m).collect();
                    let lead = partial_trace(current, &keep)?;
                    let zero = DensityMatrix::basis_state(vec![2; m], 0);
                    trace_distance_matrices(lead.matrix(), zero.matrix())
                }
            }
            Content::Ledger { deviation } => *deviation,
        };
        self.deviation = Some(delta);
        let passed = delta <= epsilon;
        if passed {
            self.phase = Phase::Verified;
        }
        Ok((delta, passed))
    }

    /// Resets the planned registers; returns the work spent in bits.
    pub fn erase(&mut self) -> Result<f64> {
        self.transition(Phase::Verified, Phase::Erased)?;
        if let Content::Explicit {
            current, qubits, ..
        } = &mut self.content
        {
            let k = self.erase as usize;
            if k > 0 {
                let keep: Vec<usize> = (0..*qubits - k).collect();
                let kept = partial_trace(current, &keep)?;
                *current = tensor(&kept, &DensityMatrix::basis_state(vec![2; k], 0));
            }
        }
        Ok(self.erase)
    }

    /// Undoes the compression after a failed verification and returns the
    /// trace distance to the initial state.
    pub fn revert(&mut self) -> Result<f64> {
        self.transition(Phase::Compressed, Phase::Reverted)?;
        match &mut self.content {
            Content::Explicit {
                initial,
                current,
                compressor,
                ..
            } => {
                *current = current.conjugate_by(&compressor.adjoint())?;
                Ok(trace_distance_matrices(current.matrix(), initial.matrix()))
            }
            Content::Ledger { .. } => Ok(0.0),
        }
    }
}

/// A block to process: its content and the adversary's deviation.
#[derive(Debug, Clone)]
pub enum BlockSpec {
    Explicit {
        label: String,
        honest: DensityMatrix,
        deviation: Deviation,
        erase_qubits: usize,
    },
    Ledger {
        label: String,
        deviation: f64,
        erase_bits: f64,
    },
}

impl BlockSpec {
    fn build(&self) -> Result<Block> {
        match self {
            BlockSpec::Explicit {
                label,
                honest,
                deviation,
                erase_qubits,
            } => Block::explicit(label.clone(), honest, deviation.clone(), *erase_qubits),
            BlockSpec::Ledger {
                label,
                deviation,
                erase_bits,
            } => Block::ledger(label.clone(), *deviation, *erase_bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub label: String,
    pub explicit: bool,
    pub deviation: f64,
    pub passed: bool,
    pub final_phase: Phase,
    pub work: f64,
    /// Trace distance to the initial state after a revert.
    pub restoration_error: Option<f64>,
    pub pure_registers: Option<usize>,
    /// Passed and erased, or reverted exactly.
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub format_version: u32,
    pub epsilon: f64,
    pub blocks: Vec<BlockOutcome>,
    pub passed: usize,
    pub reverted: usize,
    pub total_work: f64,
    /// Sum of restoration errors over reverted blocks.
    pub reverted_loss: f64,
    /// Every block is either honest-equivalent or fully restored.
    pub all_safe: bool,
}

fn process(spec: &BlockSpec, epsilon: f64) -> Result<BlockOutcome> {
    let mut block = spec.build()?;
    block.compress()?;
    let (delta, passed) = block.verify(epsilon)?;
    let (work, restoration_error) = if passed {
        (block.erase()?, None)
    } else {
        (0.0, Some(block.revert()?))
    };
    let safe = passed || restoration_error.is_some_and(|e| e <= REVERT_TOL);
    Ok(BlockOutcome {
        label: block.label().to_string(),
        explicit: matches!(spec, BlockSpec::Explicit { .. }),
        deviation: delta,
        passed,
        final_phase: block.phase(),
        work,
        restoration_error,
        pure_registers: block.pure_registers(),
        safe,
    })
}

/// Compress, verify, then erase or revert every block independently.
pub fn run_dd_recovery(
    blocks: &[BlockSpec],
    epsilon: f64,
    exec: Execution,
) -> Result<RecoveryReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "verification threshold {epsilon} must be nonnegative"
        )));
    }
    let outcomes = map_indexed(exec, blocks.len(), |i| process(&blocks[i], epsilon))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let reverted: Vec<&BlockOutcome> = outcomes.iter().filter(|o| !o.passed).collect();
    Ok(RecoveryReport {
        format_version: FORMAT_VERSION,
        epsilon,
        passed: outcomes.len() - reverted.len(),
        reverted: reverted.len(),
        total_work: outcomes.iter().map(|o| o.work).sum(),
        reverted_loss: reverted.iter().filter_map(|o| o.restoration_error).sum(),
        all_safe: outcomes.iter().all(|o| o.safe),
        blocks: outcomes,
    })
}

/// Observed costs of the designated helper and of a replaying adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCosts {
    pub helper: f64,
    pub adversary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdiRecoveryReport {
    pub format_version: u32,
    pub r: RecoveryReport,
    pub s: RecoveryReport,
    pub all_safe: bool,
    pub costs: Option<ReplayCosts>,
}

/// Runs the block logic separately on the `R`-tagged and `S`-tagged blocks.
pub fn run_sdi_recovery(
    r_blocks: &[BlockSpec],
    s_blocks: &[BlockSpec],
    epsilon: f64,
    exec: Execution,
) -> Result<SdiRecoveryReport> {
    let r = run_dd_recovery(r_blocks, epsilon, exec)?;
    let s = run_dd_recovery(s_blocks, epsilon, exec)?;
    Ok(SdiRecoveryReport {
        format_version: FORMAT_VERSION,
        all_safe: r.all_safe && s.all_safe,
        r,
        s,
        costs: None,
    })
}

/// Ledger blocks for an adversary replaying a hidden-variable model: the
/// deviation in each branch is the total variation distance between the
/// statistics the helper and the adversary induce.
pub fn replay_blocks(
    rho_ab: &DensityMatrix,
    bases: &crate::semidi::BasisPair,
    helper: &crate::semidi::Strategy,
    adversary: &crate::semidi::Strategy,
    erase_bits: f64,
) -> Result<([BlockSpec; 2], ReplayCosts)> {
    use crate::semidi::{observed_assisted_cost, strategy_joint, total_variation, Branch};
    let mut specs = Vec::with_capacity(2);
    for branch in Branch::ALL {
        let a = strategy_joint(rho_ab, bases, helper, branch)?;
        let e = strategy_joint(rho_ab, bases, adversary, branch)?;
        specs.push(BlockSpec::Ledger {
            label: format!("{}-replay", branch.name()),
            deviation: total_variation(&a, &e),
            erase_bits,
        });
    }
    let costs = ReplayCosts {
        helper: observed_assisted_cost(rho_ab, bases, helper)?,
        adversary: observed_assisted_cost(rho_ab, bases, adversary)?,
    };
    let s = specs.pop().expect("two branches");
    let r = specs.pop().expect("two branches");
    Ok(([r, s], costs))
}
