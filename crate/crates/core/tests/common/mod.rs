//! Proptest generators shared by the property tests.
#![allow(dead_code)]

use erasure_core::numerics::{c, unitary_from_hermitian, CMatrix, CVector};
use erasure_core::states::{ProductTerm, SeparableDecomposition};
use erasure_core::DensityMatrix;
use proptest::prelude::*;

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

/// Full-rank-ish state `G G^dag / tr` with a small identity admixture.
pub fn density(dims: Vec<usize>) -> impl Strategy<Value = DensityMatrix> {
    let d: usize = dims.iter().product();
    entries(2 * d * d).prop_map(move |v| {
        let g = CMatrix::from_fn(d, d, |i, j| c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        let m = &g * g.adjoint() + CMatrix::identity(d, d) * c(1e-3, 0.0);
        let t = m.trace().re;
        DensityMatrix::new(m.unscale(t), dims.clone()).unwrap()
    })
}

pub fn vector(d: usize) -> impl Strategy<Value = CVector> {
    entries(2 * d)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(move |v| CVector::from_fn(d, |i, _| c(v[2 * i], v[2 * i + 1])))
}

pub fn pure(dims: Vec<usize>) -> impl Strategy<Value = DensityMatrix> {
    let d: usize = dims.iter().product();
    vector(d).prop_map(move |v| DensityMatrix::from_pure(&v, dims.clone()).unwrap())
}

/// `exp(iH)` for a random Hermitian `H`.
pub fn unitary(d: usize) -> impl Strategy<Value = CMatrix> {
    entries(2 * d * d).prop_map(move |v| {
        let a = CMatrix::from_fn(d, d, |i, j| c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        unitary_from_hermitian(&((&a + a.adjoint()) * c(1.5, 0.0)))
    })
}

/// Two-qubit separable state from up to four weighted product terms.
pub fn separable() -> impl Strategy<Value = SeparableDecomposition> {
    proptest::collection::vec((0.05f64..1.0, vector(2), vector(2)), 1..5).prop_map(|terms| {
        let total: f64 = terms.iter().map(|t| t.0).sum();
        SeparableDecomposition {
            terms: terms
                .into_iter()
                .map(|(w, a, b)| ProductTerm {
                    weight: w / total,
                    a: a.normalize(),
                    b: b.normalize(),
                })
                .collect(),
        }
    })
}
