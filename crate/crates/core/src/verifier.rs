//! The verifier: Density, QuasiCheck and a dampened ConstraintCheck, the
//! constant selection and the three-way mixture that combines them.
//!
//! Witnesses live on a constraint-index register of dimension `R` and a value
//! register of dimension `κ = |Σ|^q`; amplitude `a_{j,x}` sits at global index
//! `j * κ + x`.
//!
//! Every test has an analytic acceptance probability and a sampled twin that
//! draws from the same distribution using explicit measurements.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csp::CspSystem;
use crate::error::{ensure_dim, Error, Result};
use crate::quantum::{
    bernoulli, collapse_measure, computational_measure, fourier_measure, normalize, sample_index,
    RegisterSplit, StateVector, C64, NORM_TOL,
};
use crate::supdetect::{
    detector_accept_prob, detector_sample, detector_sampled_prob, qubits_for_dim, DetectorKind,
    DetectorSpec,
};

/// A unit vector over `[R] x [κ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteWitness {
    r: usize,
    kappa: usize,
    state: StateVector,
}

impl BipartiteWitness {
    pub fn new(r: usize, kappa: usize, amps: Vec<C64>) -> Result<Self> {
        BipartiteWitness::from_state(StateVector::new(amps)?, r, kappa)
    }

    /// Normalizes `raw` and shapes it as an `R x κ` witness.
    pub fn normalized(r: usize, kappa: usize, raw: &[C64]) -> Result<Self> {
        BipartiteWitness::from_state(normalize(raw)?, r, kappa)
    }

    pub fn from_state(state: StateVector, r: usize, kappa: usize) -> Result<Self> {
        let split = RegisterSplit::new(r, kappa)?;
        ensure_dim(split.total(), state.dim())?;
        Ok(BipartiteWitness { r, kappa, state })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn split(&self) -> RegisterSplit {
        RegisterSplit {
            left_dim: self.r,
            right_dim: self.kappa,
        }
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn into_state(self) -> StateVector {
        self.state
    }

    pub fn amps(&self) -> &[C64] {
        self.state.amps()
    }

    pub fn amp(&self, j: usize, x: usize) -> C64 {
        self.amps()[j * self.kappa + x]
    }

    pub fn row(&self, j: usize) -> &[C64] {
        &self.amps()[j * self.kappa..(j + 1) * self.kappa]
    }

    /// `Σ_x |a_{j,x}|²`.
    pub fn row_weight(&self, j: usize) -> f64 {
        self.row(j).iter().map(|a| a.norm_sqr()).sum()
    }

    /// Normalized value-register state conditioned on index `j`, or `None` for
    /// a zero-weight row.
    pub fn row_state(&self, j: usize) -> Option<StateVector> {
        normalize(self.row(j)).ok()
    }

    /// True when every amplitude is real and non-negative (up to `1e-12`).
    pub fn is_nonnegative(&self) -> bool {
        self.amps()
            .iter()
            .all(|a| a.re >= -NORM_TOL && a.im.abs() <= NORM_TOL)
    }
}

/// `Σ_j b_j |j>|σ(j)>`; rigid when every `b_j = 1/√R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidDescriptor {
    pub sigma: Vec<usize>,
    pub b: Vec<C64>,
}

impl RigidDescriptor {
    pub fn rigid(sigma: Vec<usize>) -> Self {
        let r = sigma.len();
        let b = vec![C64::new(1.0 / (r as f64).sqrt(), 0.0); r];
        RigidDescriptor { sigma, b }
    }

    pub fn is_rigid(&self) -> bool {
        let target = 1.0 / (self.sigma.len() as f64).sqrt();
        self.b.iter().all(|b| (b - target).norm() <= NORM_TOL)
    }

    pub fn to_witness(&self, kappa: usize) -> Result<BipartiteWitness> {
        let r = self.sigma.len();
        if r == 0 || self.b.len() != r {
            return Err(Error::BadAssignment(format!(
                "descriptor has {} indices and {} coefficients",
                r,
                self.b.len()
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); r * kappa];
        for (j, (&s, &b)) in self.sigma.iter().zip(&self.b).enumerate() {
            if s >= kappa {
                return Err(Error::BadAssignment(format!(
                    "sigma({j}) = {s} outside the value register [0, {kappa})"
                )));
            }
            amps[j * kappa + s] = b;
        }
        BipartiteWitness::new(r, kappa, amps)
    }
}

/// `(1/√R) Σ_j |j>|σ(j)>`.
pub fn build_rigid_witness(sigma: &[usize], r: usize, kappa: usize) -> Result<BipartiteWitness> {
    if sigma.len() != r {
        return Err(Error::BadAssignment(format!(
            "sigma covers {} of {r} constraint indices",
            sigma.len()
        )));
    }
    RigidDescriptor::rigid(sigma.to_vec()).to_witness(kappa)
}

/// `|<+|ψ>|²` with `|+>` uniform over all `R κ` basis states.
pub fn density_accept_prob(psi: &BipartiteWitness) -> f64 {
    let sum: C64 = psi.amps().iter().sum();
    (sum.norm_sqr() / psi.amps().len() as f64).min(1.0)
}

/// Fourier-basis measurement; accept on the zero frequency.
pub fn density_sample<R: Rng + ?Sized>(psi: &BipartiteWitness, rng: &mut R) -> bool {
    fourier_measure(psi.state(), rng).outcome == 0
}

/// Per-row data behind the QuasiCheck upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiCheckBreakdown {
    /// `Σ_x |a_{j,x}|²` per row.
    pub weights: Vec<f64>,
    /// `c_{j,ε}`: `1 - Δ` for rows with no dominant value, `1` otherwise.
    pub flags: Vec<f64>,
    /// Detector acceptance on each normalized row (0 for empty rows).
    pub row_accept: Vec<f64>,
}

impl QuasiCheckBreakdown {
    /// `Σ_j w_j c_{j,ε}`.
    pub fn upper_bound(&self) -> f64 {
        self.weights.iter().zip(&self.flags).map(|(w, c)| w * c).sum()
    }

    /// Total weight on rows whose flag is 1.
    pub fn dominant_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.flags)
            .filter(|(_, &c)| c == 1.0)
            .map(|(w, _)| w)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiCheckOutcome {
    pub accept_prob: f64,
    pub breakdown: QuasiCheckBreakdown,
}

fn check_detector(psi: &BipartiteWitness, det: &DetectorSpec) -> Result<()> {
    ensure_dim(det.dim(), psi.kappa())
}

/// Collapse the index register, then run the detector on what remains:
/// `Σ_j w_j · A(det, row_j)`.
pub fn quasicheck_accept_prob(psi: &BipartiteWitness, det: &DetectorSpec) -> Result<QuasiCheckOutcome> {
    check_detector(psi, det)?;
    let mut weights = Vec::with_capacity(psi.r());
    let mut flags = Vec::with_capacity(psi.r());
    let mut row_accept = Vec::with_capacity(psi.r());
    let mut accept_prob = 0.0;
    for j in 0..psi.r() {
        let w = psi.row_weight(j);
        let peak = psi.row(j).iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        let flag = if peak <= (1.0 - det.epsilon) * w {
            1.0 - det.delta
        } else {
            1.0
        };
        let acc = match psi.row_state(j) {
            Some(row) if w > 0.0 => detector_accept_prob(det, &row)?,
            _ => 0.0,
        };
        accept_prob += w * acc;
        weights.push(w);
        flags.push(flag);
        row_accept.push(acc);
    }
    Ok(QuasiCheckOutcome {
        accept_prob: accept_prob.clamp(0.0, 1.0),
        breakdown: QuasiCheckBreakdown {
            weights,
            flags,
            row_accept,
        },
    })
}

/// Expected value of [`quasicheck_sample`]; differs from
/// [`quasicheck_accept_prob`] only by the Fourier detector's `2^-k` offset.
pub fn quasicheck_sampled_prob(psi: &BipartiteWitness, det: &DetectorSpec) -> Result<f64> {
    check_detector(psi, det)?;
    let mut total = 0.0;
    for j in 0..psi.r() {
        if let Some(row) = psi.row_state(j) {
            total += psi.row_weight(j) * detector_sampled_prob(det, &row)?;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

pub fn quasicheck_sample<R: Rng + ?Sized>(
    psi: &BipartiteWitness,
    det: &DetectorSpec,
    rng: &mut R,
) -> Result<bool> {
    check_detector(psi, det)?;
    let rec = collapse_measure(psi.state(), psi.split(), rng)?;
    detector_sample(det, &rec.post_state, rng)
}

fn check_system(psi: &BipartiteWitness, csp: &CspSystem) -> Result<()> {
    ensure_dim(csp.n_constraints(), psi.r())?;
    ensure_dim(csp.kappa(), psi.kappa())
}

fn check_c_yes(c_yes: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c_yes) {
        return Err(Error::InvalidThreshold(format!("C_YES = {c_yes} must lie in [0, 1]")));
    }
    Ok(())
}

/// Measure both registers, accept iff the value satisfies the indexed
/// constraint, then keep the verdict with probability `C_YES`:
/// `C_YES · Σ_{j,x} |a_{j,x}|² [x ∈ allowed(j)]`.
pub fn constraintcheck_accept_prob(psi: &BipartiteWitness, csp: &CspSystem, c_yes: f64) -> Result<f64> {
    check_system(psi, csp)?;
    check_c_yes(c_yes)?;
    let mut sat = 0.0;
    for j in 0..psi.r() {
        let mask = csp.allowed_mask(j)?;
        sat += psi
            .row(j)
            .iter()
            .zip(mask)
            .filter(|(_, &ok)| ok)
            .map(|(a, _)| a.norm_sqr())
            .sum::<f64>();
    }
    Ok((c_yes * sat).clamp(0.0, 1.0))
}

pub fn constraintcheck_sample<R: Rng + ?Sized>(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    c_yes: f64,
    rng: &mut R,
) -> Result<bool> {
    check_system(psi, csp)?;
    check_c_yes(c_yes)?;
    let outcome = computational_measure(psi.state(), rng).outcome;
    let (j, x) = (outcome / psi.kappa(), outcome % psi.kappa());
    let satisfied = csp.allowed_mask(j)?[x];
    Ok(satisfied && bernoulli(c_yes, rng))
}

/// Mixture probabilities and the resulting completeness and gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub z: f64,
    pub p_yes: f64,
    pub gap: f64,
}

/// `p1 = 1/Z`, `p2 = (ν_low+ν_high)(1-ε) / (Δ(ν_high²-ε)Z)`,
/// `p3 = ν_low / (2(1-C_YES)Z)`, with `Z` the sum of the numerators.
pub fn mixture(
    kappa: usize,
    epsilon: f64,
    nu_low: f64,
    nu_high: f64,
    delta: f64,
    c_yes: f64,
) -> Result<Mixture> {
    if kappa == 0 {
        return Err(Error::InvalidDimension("kappa must be positive".into()));
    }
    let denom = nu_high * nu_high - epsilon;
    if !(denom > 0.0) {
        return Err(Error::DegenerateConstants(format!(
            "nu_high² - epsilon = {denom} must be positive"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::DegenerateConstants(format!("delta = {delta} must be positive")));
    }
    if !(c_yes < 1.0) {
        return Err(Error::DegenerateConstants(format!("C_YES = {c_yes} must be below 1")));
    }
    let n1 = 1.0;
    let n2 = (nu_low + nu_high) * (1.0 - epsilon) / (delta * denom);
    let n3 = nu_low / (2.0 * (1.0 - c_yes));
    let z = n1 + n2 + n3;
    let (p1, p2, p3) = (n1 / z, n2 / z, n3 / z);
    Ok(Mixture {
        p1,
        p2,
        p3,
        z,
        p_yes: p1 / kappa as f64 + p2 + p3 * c_yes,
        gap: nu_high / (2.0 * z),
    })
}

/// All protocol constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub kappa: usize,
    pub epsilon: f64,
    pub nu_low: f64,
    pub nu_high: f64,
    pub c_yes: f64,
    pub xi: f64,
    pub delta: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub z: f64,
    pub p_yes: f64,
    pub gap: f64,
}

/// Which of the three constant inequalities hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantChecks {
    /// `ε < ν_high² <= ν_low² <= 1`.
    pub ordering: bool,
    /// `ν_high / ν_low <= ξ / (6(1 - C_YES))`.
    pub ratio: bool,
    /// `(κ ν_low + (κ+1) √(ε + ν_low))^{1/2} <= ξ / 2`.
    pub closeness: bool,
}

impl ConstantChecks {
    pub fn all(&self) -> bool {
        self.ordering && self.ratio && self.closeness
    }
}

/// Constants of the diagnostic preset.
pub const DIAGNOSTIC_EPSILON: f64 = 0.0025;
pub const DIAGNOSTIC_NU: f64 = 0.1;
pub const DEFAULT_C_YES: f64 = 0.75;
/// `C_YES (1 - δ)` for `δ = 1/3`.
pub const DEFAULT_XI: f64 = 0.5;

impl ProtocolParams {
    pub fn from_constants(
        kappa: usize,
        epsilon: f64,
        nu_low: f64,
        nu_high: f64,
        c_yes: f64,
        xi: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(xi > 0.0 && xi <= c_yes && c_yes < 1.0) {
            return Err(Error::InvalidThreshold(format!(
                "need 0 < xi <= C_YES < 1 (xi = {xi}, C_YES = {c_yes})"
            )));
        }
        let m = mixture(kappa, epsilon, nu_low, nu_high, delta, c_yes)?;
        Ok(ProtocolParams {
            kappa,
            epsilon,
            nu_low,
            nu_high,
            c_yes,
            xi,
            delta,
            p1: m.p1,
            p2: m.p2,
            p3: m.p3,
            z: m.z,
            p_yes: m.p_yes,
            gap: m.gap,
        })
    }

    /// `ε = 0.0025`, `ν_low = ν_high = 0.1`, `C_YES = 0.75`, `ξ = 0.5`, with the
    /// detector margin at that `ε`. Breaks the ratio and closeness
    /// inequalities in exchange for a gap large enough to measure.
    pub fn diagnostic(kappa: usize, kind: DetectorKind) -> Result<Self> {
        let delta = kind.margin(qubits_for_dim(kappa)?, DIAGNOSTIC_EPSILON)?;
        ProtocolParams::from_constants(
            kappa,
            DIAGNOSTIC_EPSILON,
            DIAGNOSTIC_NU,
            DIAGNOSTIC_NU,
            DEFAULT_C_YES,
            DEFAULT_XI,
            delta,
        )
    }

    /// Constants satisfying every inequality the soundness argument needs.
    pub fn proof_faithful(kappa: usize, xi: f64, c_yes: f64, kind: DetectorKind) -> Result<Self> {
        let k = qubits_for_dim(kappa)?;
        choose_constants(kappa, xi, c_yes, &|eps| kind.margin(k, eps))
    }

    pub fn constant_checks(&self) -> ConstantChecks {
        let (eps, lo, hi) = (self.epsilon, self.nu_low, self.nu_high);
        let kappa = self.kappa as f64;
        ConstantChecks {
            ordering: eps < hi * hi && hi * hi <= lo * lo && lo * lo <= 1.0,
            ratio: hi / lo <= self.xi / (6.0 * (1.0 - self.c_yes)),
            closeness: (kappa * lo + (kappa + 1.0) * (eps + lo).sqrt()).sqrt() <= self.xi / 2.0,
        }
    }

    pub fn mixture(&self) -> Mixture {
        Mixture {
            p1: self.p1,
            p2: self.p2,
            p3: self.p3,
            z: self.z,
            p_yes: self.p_yes,
            gap: self.gap,
        }
    }

    /// Detector of the given kind at this `ε`, carrying this `Δ`.
    pub fn detector(&self, kind: DetectorKind) -> Result<DetectorSpec> {
        let spec = DetectorSpec {
            kind,
            k: qubits_for_dim(self.kappa)?,
            epsilon: self.epsilon,
            delta: self.delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn check_detector(&self, det: &DetectorSpec) -> Result<()> {
        ensure_dim(self.kappa, det.dim())?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if !close(det.epsilon, self.epsilon) || !close(det.delta, self.delta) {
            return Err(Error::Inconsistent(format!(
                "detector (ε = {}, Δ = {}) does not match the protocol (ε = {}, Δ = {})",
                det.epsilon, det.delta, self.epsilon, self.delta
            )));
        }
        Ok(())
    }
}

fn closeness_lhs(kappa: f64, nu_low: f64, eps: f64) -> f64 {
    (kappa * nu_low + (kappa + 1.0) * (eps + nu_low).sqrt()).sqrt()
}

/// Largest `ε` meeting the closeness inequality at this `ν_low` (may be negative).
fn closeness_eps_cap(kappa: f64, xi: f64, nu_low: f64) -> f64 {
    let slack = (xi * xi / 4.0 - kappa * nu_low) / (kappa + 1.0);
    if slack <= 0.0 {
        return -1.0;
    }
    slack * slack - nu_low
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    if fa >= fb {
        a
    } else {
        b
    }
}

/// Picks `ε, ν_low, ν_high` satisfying all three constant inequalities.
///
/// Start from a common value small enough for the closeness inequality, shrink
/// `ν_high` to meet the ratio inequality and `ε` to sit below `ν_high²`; then
/// refine `ν_low` by golden section on the final gap `ν_high / (2Z)`, choosing
/// `ν_high` and `ε` afresh for each candidate.
pub fn choose_constants(
    kappa: usize,
    xi: f64,
    c_yes: f64,
    delta_of_eps: &dyn Fn(f64) -> Result<f64>,
) -> Result<ProtocolParams> {
    if !(xi > 0.0 && xi <= c_yes && c_yes < 1.0) {
        return Err(Error::InvalidThreshold(format!(
            "need 0 < xi <= C_YES < 1 (xi = {xi}, C_YES = {c_yes})"
        )));
    }
    if kappa < 2 {
        return Err(Error::InvalidDimension("kappa must be at least 2".into()));
    }
    let kf = kappa as f64;
    let ratio = (xi / (6.0 * (1.0 - c_yes))).min(1.0) * (1.0 - 1e-12);

    // Common value c with closeness(c, c) <= ξ/2.
    let target = xi / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if closeness_lhs(kf, hi, hi) <= target {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if closeness_lhs(kf, mid, mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let seed = lo;
    if !(seed > 0.0) {
        return Err(Error::Infeasible("no positive common constant".into()));
    }

    // Largest ν_low leaving room for some ε > 0.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closeness_eps_cap(kf, xi, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu_max = lo;

    let derive = |nu_low: f64| -> Option<ProtocolParams> {
        let nu_high = nu_low * ratio;
        let cap = (nu_high * nu_high).min(closeness_eps_cap(kf, xi, nu_low)) * (1.0 - 1e-9);
        if !(cap > 0.0) {
            return None;
        }
        // ε maximizing Δ(ε)(ν_high² - ε)/(1 - ε), i.e. minimizing p2's numerator.
        let score = |eps: f64| match delta_of_eps(eps) {
            Ok(d) => d * (nu_high * nu_high - eps) / (1.0 - eps),
            Err(_) => f64::NEG_INFINITY,
        };
        let log_eps = golden_max(|l| score(l.exp()), (cap * 1e-6).ln(), cap.ln(), 80);
        let epsilon = log_eps.exp().min(cap);
        let delta = delta_of_eps(epsilon).ok()?;
        let params =
            ProtocolParams::from_constants(kappa, epsilon, nu_low, nu_high, c_yes, xi, delta).ok()?;
        params.constant_checks().all().then_some(params)
    };

    let gap_at = |log_nu: f64| derive(log_nu.exp()).map_or(f64::NEG_INFINITY, |p| p.gap);
    let refined = golden_max(gap_at, (nu_max * 1e-8).ln(), (nu_max * (1.0 - 1e-9)).ln(), 120);

    [derive(seed.min(nu_max * (1.0 - 1e-9))), derive(refined.exp())]
        .into_iter()
        .flatten()
        .max_by(|a, b| a.gap.total_cmp(&b.gap))
        .ok_or_else(|| Error::Infeasible("bounded search found no feasible triple".into()))
}

/// Acceptance of each test plus the derived deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceProfile {
    pub w_d: f64,
    pub w_q: f64,
    pub w_c: f64,
    /// `w_D - 1/κ`.
    pub d: f64,
    /// `(1 - w_Q) / Δ`.
    pub d_q: f64,
}

impl AcceptanceProfile {
    pub fn new(w_d: f64, w_q: f64, w_c: f64, kappa: usize, delta: f64) -> Self {
        AcceptanceProfile {
            w_d,
            w_q,
            w_c,
            d: w_d - 1.0 / kappa as f64,
            d_q: (1.0 - w_q) / delta,
        }
    }

    /// `p1 w_D + p2 w_Q + p3 w_C`.
    pub fn mix(&self, params: &ProtocolParams) -> f64 {
        (params.p1 * self.w_d + params.p2 * self.w_q + params.p3 * self.w_c).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub accept_prob: f64,
    pub profile: AcceptanceProfile,
}

fn check_protocol(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
) -> Result<()> {
    check_system(psi, csp)?;
    ensure_dim(params.kappa, psi.kappa())?;
    params.check_detector(det)
}

/// Exact acceptance of the mixed protocol.
pub fn protocol_accept_prob(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
) -> Result<ProtocolOutcome> {
    check_protocol(psi, csp, params, det)?;
    let w_d = density_accept_prob(psi);
    let w_q = quasicheck_accept_prob(psi, det)?.accept_prob;
    let w_c = constraintcheck_accept_prob(psi, csp, params.c_yes)?;
    let profile = AcceptanceProfile::new(w_d, w_q, w_c, params.kappa, params.delta);
    Ok(ProtocolOutcome {
        accept_prob: profile.mix(params),
        profile,
    })
}

/// Expected value of [`protocol_sample`].
pub fn protocol_sampled_prob(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
) -> Result<f64> {
    check_protocol(psi, csp, params, det)?;
    let w_q = quasicheck_sampled_prob(psi, det)?;
    let w_c = constraintcheck_accept_prob(psi, csp, params.c_yes)?;
    Ok(params.p1 * density_accept_prob(psi) + params.p2 * w_q + params.p3 * w_c)
}

/// Picks one test with probabilities `(p1, p2, p3)` and runs it.
pub fn protocol_sample<R: Rng + ?Sized>(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
    rng: &mut R,
) -> Result<bool> {
    check_protocol(psi, csp, params, det)?;
    match sample_index(&[params.p1, params.p2, params.p3], rng) {
        0 => Ok(density_sample(psi, rng)),
        1 => quasicheck_sample(psi, det, rng),
        _ => constraintcheck_sample(psi, csp, params.c_yes, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{gen_no_instance, gen_yes_instance_planted, Constraint};
    use crate::quantum::uniform_state;

    fn uniform_witness(r: usize, kappa: usize) -> BipartiteWitness {
        BipartiteWitness::from_state(uniform_state(r * kappa).unwrap(), r, kappa).unwrap()
    }

    fn det(kind: DetectorKind, eps: f64) -> DetectorSpec {
        DetectorSpec::new(kind, 2, eps).unwrap()
    }

    #[test]
    fn rigid_witness_examples() {
        let w = build_rigid_witness(&[3], 1, 4).unwrap();
        assert_eq!(w.state(), &StateVector::basis(4, 3).unwrap());
        assert!(matches!(
            build_rigid_witness(&[0, 4], 2, 4),
            Err(Error::BadAssignment(_))
        ));
        assert!(build_rigid_witness(&[0], 2, 4).is_err());
        let sigma = [0, 3, 1, 2, 2, 0];
        let w = build_rigid_witness(&sigma, 6, 4).unwrap();
        assert!((density_accept_prob(&w) - 0.25).abs() < 1e-12);
        for kind in DetectorKind::ALL {
            let q = quasicheck_accept_prob(&w, &det(kind, 0.1)).unwrap();
            assert!((q.accept_prob - 1.0).abs() < 1e-12, "{kind}");
        }
        assert!(RigidDescriptor::rigid(sigma.to_vec()).is_rigid());
    }

    #[test]
    fn density_examples() {
        assert!((density_accept_prob(&uniform_witness(3, 4)) - 1.0).abs() < 1e-12);
        let e = BipartiteWitness::from_state(StateVector::basis(16, 5).unwrap(), 4, 4).unwrap();
        assert!((density_accept_prob(&e) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn quasicheck_uniform_and_breakdown() {
        let w = uniform_witness(4, 4);
        let q = quasicheck_accept_prob(&w, &det(DetectorKind::AnalyticCollision, 0.1)).unwrap();
        assert!((q.accept_prob - 0.25).abs() < 1e-12);
        // Every row is flat, so every flag is 1 - Δ.
        let delta = delta_noncollapsing_ref(0.1);
        for &c in &q.breakdown.flags {
            assert_eq!(c, 1.0 - delta);
        }
        assert!(q.accept_prob <= q.breakdown.upper_bound() + 1e-12);
        assert!(quasicheck_accept_prob(&w, &DetectorSpec::new(DetectorKind::NonCollapsing, 1, 0.1).unwrap()).is_err());
    }

    fn delta_noncollapsing_ref(eps: f64) -> f64 {
        let x = f64::min(eps, 0.25);
        2.0 * (x - x * x)
    }

    #[test]
    fn zero_rows_contribute_nothing() {
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        amps[4] = C64::new(0.6, 0.0);
        amps[5] = C64::new(0.8, 0.0);
        let w = BipartiteWitness::new(2, 4, amps).unwrap();
        let q = quasicheck_accept_prob(&w, &det(DetectorKind::NonCollapsing, 0.1)).unwrap();
        assert_eq!(q.breakdown.weights[0], 0.0);
        assert_eq!(q.breakdown.row_accept[0], 0.0);
        assert!((q.accept_prob - (0.36f64.powi(2) + 0.64f64.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn constraintcheck_examples() {
        let (inst, planted) = gen_yes_instance_planted(4, 6, 2, 3).unwrap();
        let sys = &inst.system;
        let w = build_rigid_witness(&sys.rigid_map(&planted).unwrap(), 6, 4).unwrap();
        assert!((constraintcheck_accept_prob(&w, sys, 0.75).unwrap() - 0.75).abs() < 1e-12);
        let half = constraintcheck_accept_prob(&w, sys, 0.375).unwrap();
        assert!((half - 0.375).abs() < 1e-12);

        let empty = CspSystem::new(
            2,
            2,
            2,
            (0..3)
                .map(|_| Constraint {
                    vars: vec![0, 1],
                    allowed: vec![],
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(constraintcheck_accept_prob(&uniform_witness(3, 4), &empty, 0.75).unwrap(), 0.0);
        assert!(matches!(
            constraintcheck_accept_prob(&uniform_witness(2, 4), &empty, 0.75),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn rigid_on_no_instance_is_capped() {
        let inst = gen_no_instance(4, 6, 2, 1.0 / 3.0, 9).unwrap();
        let sys = &inst.system;
        // All 4^6 rigid maps.
        let mut best: f64 = 0.0;
        for code in 0..4usize.pow(6) {
            let sigma: Vec<usize> = (0..6).map(|j| (code >> (2 * j)) & 3).collect();
            let w = build_rigid_witness(&sigma, 6, 4).unwrap();
            best = best.max(constraintcheck_accept_prob(&w, sys, 0.75).unwrap());
        }
        assert!(best <= 0.75 * sys.local_value() + 1e-12);
        assert!(best <= 0.75 / 3.0 + 1e-12);
    }

    #[test]
    fn mixture_diagnostic_values() {
        let delta = 2.0 * (0.0025 - 0.0025f64.powi(2));
        assert!((delta - 0.0049875).abs() < 1e-15);
        let m = mixture(4, 0.0025, 0.1, 0.1, delta, 0.75).unwrap();
        assert!((m.p1 + m.p2 + m.p3 - 1.0).abs() < 1e-12);
        assert!((m.z - 5334.5333).abs() < 1e-3);
        assert!((m.p2 * m.z - 5333.3333).abs() < 1e-3);
        assert!((m.p3 * m.z - 0.2).abs() < 1e-12);
        assert!(m.p2 * delta >= 2.0 * m.p1);
        assert!(matches!(
            mixture(4, 0.02, 0.1, 0.1, delta, 0.75),
            Err(Error::DegenerateConstants(_))
        ));
        assert!(mixture(4, 0.001, 0.1, 0.1, delta, 1.0).is_err());
    }

    #[test]
    fn diagnostic_preset_breaks_ratio_and_closeness() {
        let p = ProtocolParams::diagnostic(4, DetectorKind::NonCollapsing).unwrap();
        let checks = p.constant_checks();
        assert!(checks.ordering);
        assert!(!checks.ratio);
        // (4 * 0.1 + 5 * sqrt(0.1025))^(1/2) ≈ 1.41 against xi/2 = 0.25.
        assert!(!checks.closeness);
        assert!((p.delta - 0.0049875).abs() < 1e-15);
    }

    #[test]
    fn proof_faithful_constants_satisfy_all_inequalities() {
        for kind in DetectorKind::ALL {
            for (xi, c) in [(0.5, 0.75), (0.2, 0.9), (0.6, 0.6)] {
                let p = ProtocolParams::proof_faithful(4, xi, c, kind).unwrap();
                assert!(p.constant_checks().all(), "{kind} xi={xi} c={c}: {p:?}");
                assert!((p.p1 + p.p2 + p.p3 - 1.0).abs() < 1e-12);
                assert!(p.gap > 0.0);
            }
        }
        assert!(matches!(
            choose_constants(4, 0.8, 0.75, &|e| Ok(e)),
            Err(Error::InvalidThreshold(_))
        ));
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 100);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn completeness_identity() {
        let (inst, planted) = gen_yes_instance_planted(4, 6, 2, 1).unwrap();
        let sys = &inst.system;
        let w = build_rigid_witness(&sys.rigid_map(&planted).unwrap(), 6, 4).unwrap();
        for kind in DetectorKind::ALL {
            let p = ProtocolParams::diagnostic(4, kind).unwrap();
            let out = protocol_accept_prob(&w, sys, &p, &p.detector(kind).unwrap()).unwrap();
            assert!((out.accept_prob - p.p_yes).abs() < 1e-12);
            assert!(out.profile.d.abs() < 1e-12);
            assert!(out.profile.d_q.abs() < 1e-9);
        }
    }

    #[test]
    fn protocol_rejects_mismatched_detector() {
        let (inst, planted) = gen_yes_instance_planted(4, 6, 2, 1).unwrap();
        let w = build_rigid_witness(&inst.system.rigid_map(&planted).unwrap(), 6, 4).unwrap();
        let p = ProtocolParams::diagnostic(4, DetectorKind::NonCollapsing).unwrap();
        let other = DetectorSpec::new(DetectorKind::NonCollapsing, 2, 0.1).unwrap();
        assert!(matches!(
            protocol_accept_prob(&w, &inst.system, &p, &other),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn params_json_field_names() {
        let p = ProtocolParams::diagnostic(4, DetectorKind::NonCollapsing).unwrap();
        let v = serde_json::to_value(p).unwrap();
        for key in [
            "epsilon", "nu_low", "nu_high", "c_yes", "xi", "delta", "p1", "p2", "p3", "z", "p_yes", "gap",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ProtocolParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
