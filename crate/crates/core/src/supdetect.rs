//! Superposition detectors.
//!
//! A detector for `k` qubits with threshold `ε` and margin `Δ` must accept
//! every computational basis state with certainty and accept any state whose
//! largest basis overlap is at most `1 - ε` with probability at most `1 - Δ`.
//!
//! Two constructions are provided:
//!
//! * **one non-collapsing measurement**: sample the state without disturbing
//!   it, then measure it for real and accept iff the outcomes agree. The
//!   acceptance probability is the collision probability `Σ_e p_e²`, which
//!   gives the margin `2(x - x²)` with `x = min(ε, 2^-k)`;
//! * **Fourier test for non-negative amplitudes** (`Verify⁺`): measure in the
//!   Fourier basis and output 0 on the zero-frequency outcome. Shifted up by
//!   `2^-k`, this is a detector on states with non-negative amplitudes only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::quantum::{
    computational_measure, ensemble_density, fourier_measure, fourier_probabilities,
    noncollapse_measure, StateVector, MAX_DIM,
};

/// Which detector implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    /// One non-collapsing measurement followed by one collapsing measurement.
    #[serde(rename = "noncollapsing")]
    NonCollapsing,
    /// `Verify⁺` plus the `2^-k` offset; sound only on non-negative states.
    #[serde(rename = "nonneg")]
    NonNegativeFourier,
    /// The exact collision probability, evaluated analytically.
    #[serde(rename = "analytic")]
    AnalyticCollision,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [
        DetectorKind::NonCollapsing,
        DetectorKind::NonNegativeFourier,
        DetectorKind::AnalyticCollision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::NonCollapsing => "noncollapsing",
            DetectorKind::NonNegativeFourier => "nonneg",
            DetectorKind::AnalyticCollision => "analytic",
        }
    }

    /// The detector only carries its soundness guarantee on states with
    /// non-negative amplitudes.
    pub fn requires_nonnegative(self) -> bool {
        matches!(self, DetectorKind::NonNegativeFourier)
    }

    /// Margin this kind achieves on `k` qubits at threshold `epsilon`.
    pub fn margin(self, k: u32, epsilon: f64) -> Result<f64> {
        match self {
            DetectorKind::NonCollapsing | DetectorKind::AnalyticCollision => {
                delta_noncollapsing(k, epsilon)
            }
            DetectorKind::NonNegativeFourier => delta_nonneg(k, epsilon),
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown detector kind `{s}`")))
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A configured detector on `k` qubits (dimension `2^k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub k: u32,
    pub epsilon: f64,
    pub delta: f64,
}

impl DetectorSpec {
    /// Builds a detector whose margin is the one its kind provably achieves.
    pub fn new(kind: DetectorKind, k: u32, epsilon: f64) -> Result<Self> {
        let delta = kind.margin(k, epsilon)?;
        Ok(DetectorSpec {
            kind,
            k,
            epsilon,
            delta,
        })
    }

    /// Detector acting on a value register of dimension `kappa`.
    pub fn for_dim(kind: DetectorKind, kappa: usize, epsilon: f64) -> Result<Self> {
        DetectorSpec::new(kind, qubits_for_dim(kappa)?, epsilon)
    }

    pub fn dim(&self) -> usize {
        1usize << self.k
    }

    /// Re-checks the margin against the kind's formula.
    pub fn validate(&self) -> Result<()> {
        let expected = self.kind.margin(self.k, self.epsilon)?;
        if (expected - self.delta).abs() > 1e-12 * expected.max(1e-300) {
            return Err(Error::Inconsistent(format!(
                "detector margin {} does not match the {} margin {expected}",
                self.delta, self.kind
            )));
        }
        Ok(())
    }
}

/// Number of qubits `k` with `2^k = dim`.
pub fn qubits_for_dim(dim: usize) -> Result<u32> {
    if dim < 2 || !dim.is_power_of_two() || dim > MAX_DIM {
        return Err(Error::InvalidDimension(format!(
            "detector register dimension must be a power of two in [2, {MAX_DIM}], got {dim}"
        )));
    }
    Ok(dim.trailing_zeros())
}

fn check_k(k: u32) -> Result<usize> {
    if k == 0 || (1usize << k.min(31)) > MAX_DIM {
        return Err(Error::InvalidDimension(format!("unsupported qubit count k = {k}")));
    }
    Ok(1usize << k)
}

/// Largest basis overlap and acceptance for one detector/state pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorAnalysis {
    /// `max_e |<e|ψ>|²`.
    pub t: f64,
    /// `min(ε, 2^-k)`.
    pub x: f64,
    pub accept_prob: f64,
}

pub fn analyze(spec: &DetectorSpec, psi: &StateVector) -> Result<DetectorAnalysis> {
    let accept_prob = detector_accept_prob(spec, psi)?;
    let t = psi.probabilities().into_iter().fold(0.0, f64::max);
    Ok(DetectorAnalysis {
        t,
        x: spec.epsilon.min(1.0 / spec.dim() as f64),
        accept_prob,
    })
}

/// `Σ_e |<e|ψ>|⁴`, the probability that a non-collapsing sample and a
/// subsequent collapsing measurement agree.
pub fn collision_accept_prob(psi: &StateVector) -> f64 {
    psi.probabilities().iter().map(|p| p * p).sum()
}

/// One run of the non-collapsing detector.
pub fn noncollapsing_detect<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> bool {
    let peek = noncollapse_measure(psi, rng);
    let real = computational_measure(&peek.post_state, rng);
    peek.outcome == real.outcome
}

/// `2(x - x²)` with `x = min(ε, 2^-k)`.
pub fn delta_noncollapsing(k: u32, epsilon: f64) -> Result<f64> {
    let d = check_k(k)? as f64;
    if !(epsilon > 0.0 && epsilon <= 1.0 - 1.0 / d) {
        return Err(Error::InvalidThreshold(format!(
            "epsilon = {epsilon} must lie in (0, 1 - 2^-{k}]"
        )));
    }
    let x = epsilon.min(1.0 / d);
    Ok(2.0 * (x - x * x))
}

/// `1 - (1/d) |Σ_i a_i|²`: the probability that `Verify⁺` outputs 1.
pub fn verify_plus_accept_prob(psi: &StateVector) -> f64 {
    let sum: num_complex::Complex64 = psi.amps().iter().sum();
    (1.0 - sum.norm_sqr() / psi.dim() as f64).clamp(0.0, 1.0)
}

/// One run of `Verify⁺`: Fourier measurement, 0 on the zero frequency.
pub fn nonneg_detect<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> bool {
    fourier_measure(psi, rng).outcome != 0
}

/// Exact margin of the shifted `Verify⁺` detector over non-negative states.
///
/// The worst state puts `n = ⌊1/(1-ε)⌋` squared amplitudes at `1 - ε` and the
/// remainder on one more coordinate; the margin is `((Σ a)² - 1) / 2^k` there.
pub fn delta_nonneg(k: u32, epsilon: f64) -> Result<f64> {
    let d = check_k(k)? as f64;
    if !(epsilon > 0.0 && epsilon <= 1.0 - 1.0 / d) {
        return Err(Error::InvalidThreshold(format!(
            "epsilon = {epsilon} must lie in (0, 1 - 2^-{k}]"
        )));
    }
    let cap = 1.0 - epsilon;
    let full = (1.0 / cap + 1e-12).floor();
    let rest = (1.0 - full * cap).max(0.0);
    let l1 = full * cap.sqrt() + rest.sqrt();
    Ok((l1 * l1 - 1.0) / d)
}

/// Margin obtained by following the cross-term chain
/// `Σ_{i≠j} a_i a_j >= √ε / 2^{k/2}` and scaling by `1/2^k`.
pub fn delta_nonneg_proof_chain(k: u32, epsilon: f64) -> f64 {
    epsilon.sqrt() * 2f64.powf(-1.5 * k as f64)
}

/// The headline margin `√(ε / 2^k)` quoted for the Fourier detector.
pub fn delta_nonneg_stated(k: u32, epsilon: f64) -> f64 {
    (epsilon / 2f64.powi(k as i32)).sqrt()
}

/// Exact acceptance probability of the detector described by `spec`.
///
/// For [`DetectorKind::NonNegativeFourier`] this is `Verify⁺ + 2^-k`,
/// clamped to `[0, 1]`.
pub fn detector_accept_prob(spec: &DetectorSpec, psi: &StateVector) -> Result<f64> {
    ensure_dim(spec.dim(), psi.dim())?;
    Ok(match spec.kind {
        DetectorKind::NonCollapsing | DetectorKind::AnalyticCollision => {
            collision_accept_prob(psi)
        }
        DetectorKind::NonNegativeFourier => {
            (verify_plus_accept_prob(psi) + 1.0 / spec.dim() as f64).clamp(0.0, 1.0)
        }
    })
}

/// Acceptance probability of the physical procedure run by [`detector_sample`].
///
/// Equal to [`detector_accept_prob`] except for the Fourier detector, whose
/// `2^-k` offset is an affine shift with no measurement realizing it; the
/// sampled path runs plain `Verify⁺`.
pub fn detector_sampled_prob(spec: &DetectorSpec, psi: &StateVector) -> Result<f64> {
    ensure_dim(spec.dim(), psi.dim())?;
    Ok(match spec.kind {
        DetectorKind::NonCollapsing | DetectorKind::AnalyticCollision => {
            collision_accept_prob(psi)
        }
        DetectorKind::NonNegativeFourier => verify_plus_accept_prob(psi),
    })
}

/// Runs the detector's sampled procedure once.
pub fn detector_sample<R: Rng + ?Sized>(
    spec: &DetectorSpec,
    psi: &StateVector,
    rng: &mut R,
) -> Result<bool> {
    ensure_dim(spec.dim(), psi.dim())?;
    Ok(match spec.kind {
        DetectorKind::NonCollapsing | DetectorKind::AnalyticCollision => {
            noncollapsing_detect(psi, rng)
        }
        DetectorKind::NonNegativeFourier => nonneg_detect(psi, rng),
    })
}

/// Outcome of running the non-collapsing detector on the uniformly mixed
/// computational and Fourier ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub acc_computational: f64,
    pub acc_fourier: f64,
    pub density_gap: f64,
}

/// Both ensembles have density matrix `I / 2^k`, yet the detector accepts
/// them with probabilities `1` and `2^-k`.
pub fn distinguish_ensembles_experiment<R: Rng + ?Sized>(
    k: u32,
    n: usize,
    rng: &mut R,
) -> Result<EnsembleReport> {
    let d = check_k(k)?;
    if n == 0 {
        return Err(Error::InvalidDimension("sample count must be positive".into()));
    }
    let computational: Vec<StateVector> =
        (0..d).map(|i| StateVector::basis(d, i)).collect::<Result<_>>()?;
    let fourier: Vec<StateVector> =
        (0..d).map(|i| StateVector::fourier(d, i)).collect::<Result<_>>()?;

    let weights = vec![1.0 / d as f64; d];
    let density_gap = ensemble_density(&computational, &weights)?
        .max_entry_distance(&ensemble_density(&fourier, &weights)?)?;

    let mut run = |ensemble: &[StateVector]| {
        let hits = (0..n)
            .filter(|_| noncollapsing_detect(&ensemble[rng.gen_range(0..d)], rng))
            .count();
        hits as f64 / n as f64
    };
    let acc_computational = run(&computational);
    let acc_fourier = run(&fourier);
    Ok(EnsembleReport {
        acc_computational,
        acc_fourier,
        density_gap,
    })
}

/// Exact Fourier-ensemble acceptance of the collision detector, `2^-k`.
pub fn fourier_ensemble_collision(k: u32) -> Result<f64> {
    let d = check_k(k)?;
    let total: f64 = (0..d)
        .map(|i| StateVector::fourier(d, i).map(|f| collision_accept_prob(&f)))
        .sum::<Result<f64>>()?;
    Ok(total / d as f64)
}

/// Zero-frequency probability of a Fourier measurement, `|<+|ψ>|²`.
pub fn plus_overlap(psi: &StateVector) -> f64 {
    fourier_probabilities(psi)[0]
}
