//! Device-dependent erasure costs and the exclusivity certificate.
//!
//! `W0 = S(B)` is the cost of resetting `B` alone. With help from a party
//! that measures its share and announces the outcome, the cost drops to
//! `W_A = min_M sum_k p_k S(B | k)`. For two qubits the best an adversary
//! holding a purification can do is `W_E = E_f(A:B)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measurements::{
    bloch_vectors, require_bipartite, ConditionalEnsemble, ConditionalMap, ProjectiveBasis,
    RankOnePOVM,
};
use crate::numerics::{self, c, entropy_bits, h2, von_neumann_entropy, CMatrix};
use crate::optim::{minimize_bloch, minimize_povm};
use crate::states::{partial_trace, purify, DensityMatrix, SeparableDecomposition};
use crate::FORMAT_VERSION;

/// Tolerance used when comparing costs against caps.
pub const COST_TOL: f64 = 1e-9;

/// Settings for the measurement searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Random restarts in addition to the best grid cell.
    pub restarts: usize,
    /// Grid points along `theta`; `phi` uses twice as many.
    pub grid_points: usize,
    /// Simplex spread at which a local refinement stops.
    pub refine_tolerance: f64,
    /// Largest POVM size tried when the measured party is not a qubit.
    pub max_outcomes: usize,
    /// Evaluation cap for one simplex run.
    pub max_evaluations: usize,
    pub seed: u64,
    pub execution: Execution,
    /// Accepted optimization gap for the Koashi-Winter residual.
    pub kw_slack: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            grid_points: 36,
            refine_tolerance: 1e-9,
            max_outcomes: 8,
            max_evaluations: 4000,
            seed: 0x00e7_a5e0,
            execution: Execution::Parallel,
            kw_slack: 0.02,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Config(
                "optimizer restarts must be at least 1".into(),
            ));
        }
        if !(self.refine_tolerance > 0.0) {
            return Err(Error::Config(
                "optimizer refine_tolerance must be positive".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(Error::Config(
                "optimizer grid_points must be at least 2".into(),
            ));
        }
        if self.max_evaluations < 10 {
            return Err(Error::Config(
                "optimizer max_evaluations must be at least 10".into(),
            ));
        }
        if !(self.kw_slack >= 0.0) {
            return Err(Error::Config(
                "optimizer kw_slack must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// `W0 = S(rho_B)`.
pub fn unassisted_cost(rho_b: &DensityMatrix) -> f64 {
    von_neumann_entropy(rho_b)
}

/// `sum_k p_k S(rho_{B|k})` when `A` is measured with `m`.
pub fn avg_conditional_entropy(rho_ab: &DensityMatrix, m: &RankOnePOVM) -> Result<f64> {
    require_bipartite(rho_ab)?;
    if rho_ab.dims()[0] != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "helper measurement",
            expected: rho_ab.dims()[0],
            found: m.dim(),
        });
    }
    let map = ConditionalMap::new(rho_ab.matrix(), rho_ab.dims(), 0, &[1])?;
    Ok(map.average_entropy(m.vectors()))
}

/// Minimum of the average conditional entropy with the measurement achieving it.
#[derive(Debug, Clone)]
pub struct AssistedCost {
    pub value: f64,
    pub measurement: RankOnePOVM,
    pub probes: usize,
}

/// Searches the measured party's rank-one measurements for the lowest
/// average conditional entropy on the kept party.
fn minimize_conditional_entropy(
    rho: &CMatrix,
    dims: &[usize],
    measured: usize,
    keep: usize,
    cfg: &OptimizerConfig,
) -> Result<AssistedCost> {
    cfg.validate()?;
    let dm = dims[measured];
    let map = ConditionalMap::new(rho, dims, measured, &[keep])?;
    if dm == 1 {
        let m = RankOnePOVM::from_vectors(vec![numerics::CVector::from_element(1, numerics::ONE)])?;
        let value = map.average_entropy(m.vectors());
        return Ok(AssistedCost {
            value,
            measurement: m,
            probes: 1,
        });
    }
    if dm == 2 {
        let s = minimize_bloch(
            |t, p| {
                let (a, b) = bloch_vectors(t, p);
                map.average_entropy(&[a, b])
            },
            cfg,
        );
        return Ok(AssistedCost {
            value: s.value,
            measurement: crate::measurements::bloch_projectors(s.theta, s.phi),
            probes: s.probes,
        });
    }
    let mut sizes = vec![dm];
    let extra = cfg.max_outcomes.min(2 * dm);
    if extra > dm {
        sizes.push(extra);
    }
    let mut best: Option<AssistedCost> = None;
    let mut probes = 0;
    for m in sizes {
        let s = minimize_povm(|povm| map.average_entropy(povm.vectors()), dm, m, cfg);
        probes += s.probes;
        if best.as_ref().is_none_or(|b| s.value < b.value) {
            best = Some(AssistedCost {
                value: s.value,
                measurement: s.povm,
                probes: 0,
            });
        }
    }
    let mut best = best.expect("at least one POVM size");
    best.probes = probes;
    Ok(best)
}

/// `W_A = min_M sum_k p_k S(rho_{B|k})` over measurements on `A`.
pub fn assisted_cost(rho_ab: &DensityMatrix, cfg: &OptimizerConfig) -> Result<AssistedCost> {
    require_bipartite(rho_ab)?;
    minimize_conditional_entropy(rho_ab.matrix(), rho_ab.dims(), 0, 1, cfg)
}

/// `J0(B|A) = S(B) - W_A`, clamped to `[0, S(B)]`.
pub fn one_way_classical_corr(rho_ab: &DensityMatrix, cfg: &OptimizerConfig) -> Result<f64> {
    let s_b = unassisted_cost(&partial_trace(rho_ab, &[1])?);
    let w_a = assisted_cost(rho_ab, cfg)?.value;
    Ok((s_b - w_a).clamp(0.0, s_b))
}

/// Holevo quantity `S(sum p_k rho_k) - sum p_k S(rho_k)`.
pub fn holevo_chi(ens: &ConditionalEnsemble) -> f64 {
    let avg = von_neumann_entropy(&ens.average());
    let members: f64 = ens
        .outcomes()
        .iter()
        .map(|o| o.probability * von_neumann_entropy(&o.state))
        .sum();
    (avg - members).max(0.0)
}

/// Entanglement entropy of a pure bipartite state.
pub fn eof_pure(psi_ab: &DensityMatrix) -> Result<f64> {
    require_bipartite(psi_ab)?;
    let purity = psi_ab.purity();
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::NotPure { purity });
    }
    Ok(von_neumann_entropy(&partial_trace(psi_ab, &[1])?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitEntanglement {
    pub concurrence: f64,
    pub eof: f64,
}

/// `E_f = h2((1 + sqrt(1 - C^2)) / 2)`.
pub fn eof_from_concurrence(concurrence: f64) -> f64 {
    let c = concurrence.clamp(0.0, 1.0);
    h2(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Concurrence and entanglement of formation of a two-qubit state.
///
/// The concurrence uses the singular values of `tau_ij = v_i^T (Y (x) Y) v_j`
/// with `v_i = sqrt(l_i) e_i` the subnormalized eigenvectors of `rho`. They
/// equal the square roots of the eigenvalues of `rho (Y (x) Y) rho* (Y (x) Y)`
/// without taking a matrix square root.
pub fn eof_two_qubit(rho_ab: &DensityMatrix) -> Result<TwoQubitEntanglement> {
    if rho_ab.dims() != [2, 2] {
        return Err(Error::DimensionMismatch {
            context: "two-qubit state required for the concurrence",
            expected: 4,
            found: rho_ab.dim(),
        });
    }
    let eig = numerics::eig_matrix(rho_ab.matrix());
    let v = CMatrix::from_fn(4, 4, |r, k| {
        eig.vectors[(r, k)] * eig.values[k].max(0.0).sqrt()
    });
    let yy = spin_flip();
    let tau = v.transpose() * yy * &v;
    let mut s: Vec<f64> = tau
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let concurrence = (s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0);
    Ok(TwoQubitEntanglement {
        concurrence,
        eof: eof_from_concurrence(concurrence),
    })
}

/// `sigma_y (x) sigma_y`.
pub(crate) fn spin_flip() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 3)] = c(-1.0, 0.0);
    m[(1, 2)] = c(1.0, 0.0);
    m[(2, 1)] = c(1.0, 0.0);
    m[(3, 0)] = c(-1.0, 0.0);
    m
}

/// `S(X|E)` of the classical-quantum state `sum_k p_k |k><k| (x) rho_k`.
pub fn conditional_vn_entropy_cq(ens: &ConditionalEnsemble) -> f64 {
    let joint: f64 = ens
        .outcomes()
        .iter()
        .map(|o| {
            let vals: Vec<f64> = o
                .state
                .eigenvalues()
                .iter()
                .map(|l| l * o.probability)
                .collect();
            entropy_bits(&vals)
        })
        .sum();
    (joint - von_neumann_entropy(&ens.average())).max(0.0)
}

/// Outcome of the Koashi-Winter consistency check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoashiWinterReport {
    pub s_b: f64,
    /// Best `J0(B|E)` found by the search over measurements on the purifying system.
    pub j0_be: f64,
    pub ef_ab: f64,
    /// `[S(B) - J0(B|E)] - E_f(A:B)`.
    pub residual: f64,
    pub env_dim: usize,
    pub probes: usize,
    /// `-1e-6 <= residual <= slack`.
    pub within_contract: bool,
}

/// Checks `J0(B|E) + E_f(A:B) = S(B)` numerically on a purification.
///
/// The search over the purifying system uses projective measurements and
/// POVMs with twice as many outcomes, so `J0(B|E)` can only be
/// underestimated and the residual is expected to be slightly positive.
pub fn koashi_winter_check(
    rho_ab: &DensityMatrix,
    cfg: &OptimizerConfig,
) -> Result<KoashiWinterReport> {
    let ef_ab = eof_two_qubit(rho_ab)?.eof;
    cfg.validate()?;
    let purification = purify(rho_ab);
    let de = purification.env_dim();
    let rho_be = partial_trace(&purification.state, &[1, 2])?;
    let s_b = von_neumann_entropy(&partial_trace(rho_ab, &[1])?);
    let map = ConditionalMap::new(rho_be.matrix(), rho_be.dims(), 1, &[0])?;

    let (best, probes) = if de == 1 {
        (s_b, 0)
    } else {
        let mut best = f64::INFINITY;
        let mut probes = 0;
        if de == 2 {
            let s = minimize_bloch(
                |t, p| {
                    let (a, b) = bloch_vectors(t, p);
                    map.average_entropy(&[a, b])
                },
                cfg,
            );
            best = s.value;
            probes += s.probes;
        }
        let mut sizes = vec![de];
        if cfg.max_outcomes >= 2 * de {
            sizes.push(2 * de);
        }
        for m in sizes {
            let s = minimize_povm(|povm| map.average_entropy(povm.vectors()), de, m, cfg);
            probes += s.probes;
            best = best.min(s.value);
        }
        (best, probes)
    };
    let j0_be = s_b - best;
    let residual = best - ef_ab;
    Ok(KoashiWinterReport {
        s_b,
        j0_be,
        ef_ab,
        residual,
        env_dim: de,
        probes,
        within_contract: residual >= -1e-6 && residual <= cfg.kw_slack,
    })
}

/// Costs, gap and exclusivity verdict for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErasureReport {
    pub format_version: u32,
    /// `S(B)`.
    pub w0: f64,
    /// Minimal cost with the designated helper.
    pub w_a: f64,
    /// Minimal cost with an adversary holding the purification.
    pub w_e: Option<f64>,
    pub j0_ba: f64,
    pub ef_ab: Option<f64>,
    pub concurrence: Option<f64>,
    /// `W_E - W_A`.
    pub gap: Option<f64>,
    pub w_max: f64,
    pub exclusive: bool,
    pub reason: String,
    pub probes: usize,
}

/// Definition of exclusivity: `W_A <= W_max < W_E`.
pub fn exclusivity_verdict(w_a: f64, w_e: f64, w_max: f64) -> (bool, &'static str) {
    if w_a > w_max + COST_TOL {
        (false, "cap below assisted cost")
    } else if w_e <= w_max + COST_TOL {
        (false, "adversary cost within cap")
    } else {
        (true, "helper within cap, adversary above it")
    }
}

/// Report with the helper's cost only.
pub fn assisted_report(
    rho_ab: &DensityMatrix,
    cfg: &OptimizerConfig,
    w_max: Option<f64>,
) -> Result<ErasureReport> {
    let w0 = unassisted_cost(&partial_trace(rho_ab, &[1])?);
    let a = assisted_cost(rho_ab, cfg)?;
    let w_a = a.value.min(w0);
    let w_max = w_max.unwrap_or(w_a);
    let reason = if w_a > w_max + COST_TOL {
        "cap below assisted cost"
    } else {
        "adversary cost not evaluated"
    };
    Ok(ErasureReport {
        format_version: FORMAT_VERSION,
        w0,
        w_a,
        w_e: None,
        j0_ba: (w0 - w_a).max(0.0),
        ef_ab: None,
        concurrence: None,
        gap: None,
        w_max,
        exclusive: false,
        reason: reason.into(),
        probes: a.probes,
    })
}

/// Device-dependent exclusivity of a two-qubit state. `w_max` defaults to `W_A`.
pub fn exclusivity_dd(
    rho_ab: &DensityMatrix,
    cfg: &OptimizerConfig,
    w_max: Option<f64>,
) -> Result<ErasureReport> {
    let ent = eof_two_qubit(rho_ab)?;
    let mut report = assisted_report(rho_ab, cfg, w_max)?;
    let (exclusive, reason) = exclusivity_verdict(report.w_a, ent.eof, report.w_max);
    report.w_e = Some(ent.eof);
    report.ef_ab = Some(ent.eof);
    report.concurrence = Some(ent.concurrence);
    report.gap = Some(ent.eof - report.w_a);
    report.exclusive = exclusive;
    report.reason = reason.into();
    Ok(report)
}

/// Cost for an adversary who holds the term label of a separable
/// decomposition and announces it: `B` is left in a known pure state.
pub fn label_register_cost(decomp: &SeparableDecomposition) -> Result<f64> {
    let ext = decomp.label_register_extension();
    let n = ext.dims()[2];
    let map = ConditionalMap::new(ext.matrix(), ext.dims(), 2, &[1])?;
    let basis = ProjectiveBasis::computational(n);
    let vs: Vec<_> = (0..n).map(|i| basis.vector(i)).collect();
    Ok(map.average_entropy(&vs))
}
