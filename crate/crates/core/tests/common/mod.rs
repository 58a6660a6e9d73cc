#![allow(dead_code)]

use ncverify_core::quantum::{uniform_state, StateVector, C64};
use ncverify_core::verifier::BipartiteWitness;

/// Binomial standard deviation of a frequency estimate.
pub fn sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|hits/n - p| <= 4σ`, with a floor so that `p ∈ {0, 1}` demands exactness.
pub fn within_4_sigma(hits: usize, n: usize, p: f64) -> bool {
    let freq = hits as f64 / n as f64;
    (freq - p).abs() <= 4.0 * sigma(p, n) + 1e-12
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_state(amps: &[f64]) -> StateVector {
    ncverify_core::quantum::normalize(&amps.iter().map(|&a| c(a, 0.0)).collect::<Vec<_>>()).unwrap()
}

pub fn uniform_witness(r: usize, kappa: usize) -> BipartiteWitness {
    BipartiteWitness::from_state(uniform_state(r * kappa).unwrap(), r, kappa).unwrap()
}
