//! Derivative-free minimization used for measurement searches.
//!
//! Qubit measurements are searched on a coarse `(theta, phi)` grid followed
//! by Nelder-Mead refinement from the best cell and from seeded random
//! restarts. Higher-dimensional rank-one POVMs are parameterized by the
//! first `dim` rows of `exp(iH)` for an `m x m` Hermitian `H`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costs::OptimizerConfig;
use crate::exec::map_indexed;
use crate::measurements::RankOnePOVM;
use crate::numerics::{c, unitary_from_hermitian, CMatrix};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder-Mead with standard coefficients. Stops when the spread of
/// simplex values drops to `tolerance` or after `max_evaluations`.
pub fn nelder_mead<F>(
    mut f: F,
    start: &[f64],
    step: f64,
    tolerance: f64,
    max_evaluations: usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evaluations);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    while evaluations < max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst - best <= tolerance {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < best {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let x = along(0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        };
        if fc < worst.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink towards the best vertex
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + 0.5 * (v - a))
                .collect();
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Minimum {
        point,
        value,
        evaluations,
    }
}

/// Repeats Nelder-Mead from the incumbent with a shrinking step until a
/// cycle improves by less than `tolerance`.
pub fn refine<F>(f: F, start: &[f64], step: f64, cfg: &OptimizerConfig) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = Minimum {
        point: start.to_vec(),
        value: f(start),
        evaluations: 1,
    };
    let mut step = step;
    for _ in 0..4 {
        let m = nelder_mead(
            &f,
            &best.point,
            step,
            cfg.refine_tolerance,
            cfg.max_evaluations,
        );
        let gained = best.value - m.value;
        let evaluations = best.evaluations + m.evaluations;
        if m.value < best.value {
            best = Minimum { evaluations, ..m };
        } else {
            best.evaluations = evaluations;
        }
        if gained <= cfg.refine_tolerance {
            break;
        }
        step *= 0.25;
    }
    best
}

/// Result of a search over qubit projective measurements.
#[derive(Debug, Clone)]
pub struct BlochSearch {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
    pub probes: usize,
}

/// Minimizes `objective(theta, phi)` over the Bloch sphere.
pub fn minimize_bloch<F>(objective: F, cfg: &OptimizerConfig) -> BlochSearch
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let nt = cfg.grid_points.max(2);
    let np = 2 * nt;
    let dt = PI / (nt - 1) as f64;
    let dp = 2.0 * PI / np as f64;
    let grid = map_indexed(cfg.execution, nt * np, |idx| {
        let (i, j) = (idx / np, idx % np);
        objective(i as f64 * dt, j as f64 * dp)
    });
    let (best_idx, &best_val) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let grid_best = ((best_idx / np) as f64 * dt, (best_idx % np) as f64 * dp);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![grid_best];
    for _ in 0..cfg.restarts {
        let u: f64 = rng.random();
        starts.push((u.mul_add(2.0, -1.0).acos(), rng.random::<f64>() * 2.0 * PI));
    }
    let runs = map_indexed(cfg.execution, starts.len(), |k| {
        let (t0, p0) = starts[k];
        refine(|x| objective(x[0], x[1]), &[t0, p0], dt, cfg)
    });

    let mut out = BlochSearch {
        theta: grid_best.0,
        phi: grid_best.1,
        value: best_val,
        probes: grid.len(),
    };
    for r in runs {
        out.probes += r.evaluations;
        if r.value < out.value {
            out.value = r.value;
            out.theta = r.point[0];
            out.phi = r.point[1];
        }
    }
    out
}

/// Hermitian matrix from `m * m` real parameters.
pub(crate) fn hermitian_from_params(params: &[f64], m: usize) -> CMatrix {
    let mut h = CMatrix::zeros(m, m);
    let mut it = params.iter().copied();
    for i in 0..m {
        h[(i, i)] = c(it.next().unwrap_or(0.0), 0.0);
        for j in i + 1..m {
            let z = c(it.next().unwrap_or(0.0), it.next().unwrap_or(0.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Rank-one POVM with `outcomes` elements on a `dim`-dimensional space.
pub fn povm_from_params(params: &[f64], dim: usize, outcomes: usize) -> RankOnePOVM {
    let u = unitary_from_hermitian(&hermitian_from_params(params, outcomes));
    RankOnePOVM::from_isometry(&u, dim)
}

#[derive(Debug, Clone)]
pub struct PovmSearch {
    pub povm: RankOnePOVM,
    pub value: f64,
    pub probes: usize,
}

/// Minimizes `objective` over rank-one POVMs with `outcomes` elements.
/// Starts from the computational basis and from `cfg.restarts` random points.
pub fn minimize_povm<F>(
    objective: F,
    dim: usize,
    outcomes: usize,
    cfg: &OptimizerConfig,
) -> PovmSearch
where
    F: Fn(&RankOnePOVM) -> f64 + Sync + Send,
{
    let n = outcomes * outcomes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((dim as u64) << 32 | outcomes as u64));
    let mut starts = vec![vec![0.0; n]];
    for _ in 0..cfg.restarts {
        starts.push(
            (0..n)
                .map(|_| rng.random::<f64>() * 2.0 * PI - PI)
                .collect(),
        );
    }
    let runs = map_indexed(cfg.execution, starts.len(), |k| {
        refine(
            |x| objective(&povm_from_params(x, dim, outcomes)),
            &starts[k],
            0.5,
            cfg,
        )
    });
    let probes = runs.iter().map(|r| r.evaluations).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    PovmSearch {
        povm: povm_from_params(&best.point, dim, outcomes),
        value: best.value,
        probes,
    }
}
