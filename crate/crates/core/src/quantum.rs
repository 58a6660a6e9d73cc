//! Finite-dimensional pure states, measurements and distance utilities.
//!
//! A [`StateVector`] is a unit vector in `C^d` for any `d >= 1`; dimensions are
//! not required to be powers of two. Measurements come in three flavours:
//!
//! * [`collapse_measure`] measures the left factor of a [`RegisterSplit`] and
//!   returns the normalized conditional state of the right factor;
//! * [`noncollapse_measure`] samples the full computational-basis distribution
//!   and hands back the input untouched;
//! * [`fourier_measure`] samples the generalized discrete Fourier basis over
//!   `Z_d`, whose zero-frequency vector is the uniform superposition.
//!
//! Every sampling routine takes an explicit random source so that a seeded
//! generator yields a reproducible transcript.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Tolerance used for unit-norm, trace and Hermiticity checks.
pub const NORM_TOL: f64 = 1e-12;
/// Lowest eigenvalue accepted for a positive semidefinite matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Largest dimension handled by the dense routines.
pub const MAX_DIM: usize = 4096;

pub type C64 = Complex64;

/// A unit-norm amplitude vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct StateVector {
    amps: Vec<C64>,
}

/// On-disk form: `{"dim": d, "amps": [[re, im], ...]}`.
#[derive(Serialize, Deserialize)]
struct StateJson {
    dim: usize,
    amps: Vec<[f64; 2]>,
}

impl TryFrom<StateJson> for StateVector {
    type Error = Error;

    fn try_from(raw: StateJson) -> Result<Self> {
        ensure_dim(raw.dim, raw.amps.len())?;
        StateVector::new(raw.amps.iter().map(|&[re, im]| C64::new(re, im)).collect())
    }
}

impl From<StateVector> for StateJson {
    fn from(state: StateVector) -> Self {
        StateJson {
            dim: state.dim(),
            amps: state.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
    }
}

impl StateVector {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NotNormalized(f64::NAN));
        }
        let norm_sq = norm_sq(&amps);
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(StateVector { amps })
    }

    /// Computational basis vector `|index>` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(Error::BadIndex { index, len: dim });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { amps })
    }

    /// Fourier basis vector with the given frequency: `(1/√d) Σ_j ω^{jk} |j>`.
    pub fn fourier(dim: usize, freq: usize) -> Result<Self> {
        check_dim(dim)?;
        if freq >= dim {
            return Err(Error::BadIndex { index: freq, len: dim });
        }
        let twiddles = twiddle_table(dim);
        let scale = 1.0 / (dim as f64).sqrt();
        let amps = (0..dim)
            .map(|j| twiddles[(j * freq) % dim] * scale)
            .collect();
        Ok(StateVector { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    /// Computational-basis outcome distribution `|a_i|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Rank-one projector `|ψ><ψ|`.
    pub fn projector(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj())
    }

    /// `<ψ|M|ψ>` (real part; exact for Hermitian `M`).
    pub fn expectation(&self, op: &DMatrix<C64>) -> Result<f64> {
        ensure_dim(self.dim(), op.nrows())?;
        ensure_dim(self.dim(), op.ncols())?;
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.dim() {
            let row: C64 = (0..self.dim()).map(|c| op[(r, c)] * self.amps[c]).sum();
            acc += self.amps[r].conj() * row;
        }
        Ok(acc.re)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    if dim > MAX_DIM {
        return Err(Error::InvalidDimension(format!(
            "dimension {dim} exceeds the supported maximum {MAX_DIM}"
        )));
    }
    Ok(())
}

fn norm_sq(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// `ω^m` for `m in 0..d`, with `ω = e^{2πi/d}`.
fn twiddle_table(dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / dim as f64))
        .collect()
}

/// Scales `raw` to unit Euclidean norm.
pub fn normalize(raw: &[C64]) -> Result<StateVector> {
    check_dim(raw.len())?;
    let norm = norm_sq(raw).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(StateVector {
        amps: raw.iter().map(|a| a / norm).collect(),
    })
}

/// The uniform superposition `|+>` in dimension `d`.
pub fn uniform_state(d: usize) -> Result<StateVector> {
    check_dim(d)?;
    let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    Ok(StateVector { amps: vec![a; d] })
}

/// `|<a|b>|²`.
pub fn squared_overlap(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Trace distance between the pure states `|a><a|` and `|b><b|`.
pub fn trace_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok((1.0 - squared_overlap(a, b)?).max(0.0).sqrt())
}

/// Fidelity `|<a|b>|` between two pure states.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(squared_overlap(a, b)?.sqrt())
}

/// Factorization of a state's index space as `left ⊗ right`, with the
/// global index `j * right_dim + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSplit {
    pub left_dim: usize,
    pub right_dim: usize,
}

impl RegisterSplit {
    pub fn new(left_dim: usize, right_dim: usize) -> Result<Self> {
        if left_dim == 0 || right_dim == 0 {
            return Err(Error::InvalidDimension(
                "register dimensions must be positive".into(),
            ));
        }
        Ok(RegisterSplit { left_dim, right_dim })
    }

    pub fn total(&self) -> usize {
        self.left_dim * self.right_dim
    }
}

/// Result of one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub outcome: usize,
    pub collapsed: bool,
    pub post_state: StateVector,
}

/// Draws an index from an (unnormalized) discrete distribution.
///
/// Outcomes with zero weight are never returned.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_nonzero = i;
        if u < acc {
            return i;
        }
    }
    last_nonzero
}

/// Bernoulli trial that is exact at `p = 0` and `p = 1`.
pub fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < p
}

/// Measures the left register in the computational basis.
///
/// The post-measurement state is the normalized conditional state of the right
/// register (dimension `split.right_dim`).
pub fn collapse_measure<R: Rng + ?Sized>(
    psi: &StateVector,
    split: RegisterSplit,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    ensure_dim(split.total(), psi.dim())?;
    let rows: Vec<&[C64]> = psi.amps.chunks(split.right_dim).collect();
    let weights: Vec<f64> = rows.iter().map(|row| norm_sq(row)).collect();
    let outcome = sample_index(&weights, rng);
    let post_state = normalize(rows[outcome])?;
    Ok(MeasurementRecord {
        outcome,
        collapsed: true,
        post_state,
    })
}

/// Samples the computational basis without disturbing the state.
pub fn noncollapse_measure<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> MeasurementRecord {
    let outcome = sample_index(&psi.probabilities(), rng);
    MeasurementRecord {
        outcome,
        collapsed: false,
        post_state: psi.clone(),
    }
}

/// Ordinary projective measurement of the full state in the computational basis.
pub fn computational_measure<R: Rng + ?Sized>(
    psi: &StateVector,
    rng: &mut R,
) -> MeasurementRecord {
    let outcome = sample_index(&psi.probabilities(), rng);
    MeasurementRecord {
        outcome,
        collapsed: true,
        post_state: StateVector::basis(psi.dim(), outcome).expect("outcome is in range"),
    }
}

/// Outcome distribution of a measurement in the Fourier basis over `Z_d`.
///
/// Entry `k` is `|<f_k|ψ>|²`; entry 0 is the overlap with `|+>`.
pub fn fourier_probabilities(psi: &StateVector) -> Vec<f64> {
    let d = psi.dim();
    let twiddles = twiddle_table(d);
    (0..d)
        .map(|k| {
            let coeff: C64 = psi
                .amps
                .iter()
                .enumerate()
                .map(|(j, a)| twiddles[(j * k) % d].conj() * a)
                .sum();
            coeff.norm_sqr() / d as f64
        })
        .collect()
}

/// Projective measurement in the Fourier basis.
pub fn fourier_measure<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> MeasurementRecord {
    let outcome = sample_index(&fourier_probabilities(psi), rng);
    MeasurementRecord {
        outcome,
        collapsed: true,
        post_state: StateVector::fourier(psi.dim(), outcome).expect("outcome is in range"),
    }
}

/// A validated density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let d = entries.nrows();
        ensure_dim(d, entries.ncols())?;
        check_dim(d)?;
        if hermitian_defect(&entries) > NORM_TOL {
            return Err(Error::InvalidEffect("density matrix is not Hermitian".into()));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::InvalidEffect(format!("trace {trace} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidEffect(format!(
                "negative eigenvalue {min_eig}"
            )));
        }
        Ok(DensityMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_entry_distance(&self, other: &DensityMatrix) -> Result<f64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok((&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    /// Row-major `[re, im]` pairs.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|r| {
                (0..self.dim())
                    .map(|c| {
                        let z = self.entries[(r, c)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let d = rows.len();
        for row in rows {
            ensure_dim(d, row.len())?;
        }
        DensityMatrix::new(DMatrix::from_fn(d, d, |r, c| {
            C64::new(rows[r][c][0], rows[r][c][1])
        }))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        DensityMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    // Symmetrize first so round-off in the input cannot leak into the solver.
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `Σ_i w_i |ψ_i><ψ_i|`.
pub fn ensemble_density(states: &[StateVector], weights: &[f64]) -> Result<DensityMatrix> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} states but {} weights",
            states.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(Error::InvalidWeights("weights must lie in [0, 1]".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    let d = states[0].dim();
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (state, &w) in states.iter().zip(weights) {
        ensure_dim(d, state.dim())?;
        rho += state.projector() * C64::new(w, 0.0);
    }
    DensityMatrix::new(rho)
}

/// Both sides of the trace-distance bound
/// `|<ψ1|Π|ψ1> - <ψ2|Π|ψ2>| <= sqrt(1 - |<ψ1|ψ2>|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuchsTerms {
    pub difference: f64,
    pub bound: f64,
}

/// Validates `0 <= Π <= I` and evaluates both sides of the bound.
pub fn fuchs_terms(effect: &DMatrix<C64>, psi1: &StateVector, psi2: &StateVector) -> Result<FuchsTerms> {
    ensure_dim(psi1.dim(), psi2.dim())?;
    ensure_dim(psi1.dim(), effect.nrows())?;
    ensure_dim(psi1.dim(), effect.ncols())?;
    if hermitian_defect(effect) > NORM_TOL {
        return Err(Error::InvalidEffect("effect is not Hermitian".into()));
    }
    for lambda in hermitian_eigenvalues(effect) {
        if lambda < -PSD_TOL || lambda > 1.0 + PSD_TOL {
            return Err(Error::InvalidEffect(format!(
                "eigenvalue {lambda} outside [0, 1]"
            )));
        }
    }
    let difference = (psi1.expectation(effect)? - psi2.expectation(effect)?).abs();
    let bound = trace_distance(psi1, psi2)?;
    Ok(FuchsTerms { difference, bound })
}

/// True iff the trace-distance bound holds up to `1e-10`.
pub fn fuchs_bound_holds(effect: &DMatrix<C64>, psi1: &StateVector, psi2: &StateVector) -> Result<bool> {
    let t = fuchs_terms(effect, psi1, psi2)?;
    Ok(t.difference <= t.bound + PSD_TOL)
}
