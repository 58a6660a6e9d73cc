//! Executable rigidity bounds, the soundness case split and empirical
//! soundness certification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::CspSystem;
use crate::error::{Error, Result};
use crate::quantum::{squared_overlap, StateVector, C64};
use crate::supdetect::DetectorSpec;
use crate::verifier::{
    build_rigid_witness, constraintcheck_accept_prob, density_accept_prob, protocol_accept_prob,
    quasicheck_accept_prob, AcceptanceProfile, BipartiteWitness, ProtocolParams,
};

/// Additive slack on every bound checked in this module.
pub const BOUND_TOL: f64 = 1e-10;

/// Row-wise argmax truncation of a witness.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasirigidProjection {
    pub phi: BipartiteWitness,
    /// Selected value index per row.
    pub f: Vec<usize>,
    /// `Σ_j |a_{j,f(j)}|²`, which equals `|<ψ|φ>|²`.
    pub gamma: f64,
}

/// Keeps the heaviest entry of every row (lowest index on ties) and
/// renormalizes.
pub fn nearest_quasirigid(psi: &BipartiteWitness) -> QuasirigidProjection {
    let (r, kappa) = (psi.r(), psi.kappa());
    let f: Vec<usize> = (0..r)
        .map(|j| {
            let row = psi.row(j);
            let mut best = 0;
            for x in 1..kappa {
                if row[x].norm_sqr() > row[best].norm_sqr() {
                    best = x;
                }
            }
            best
        })
        .collect();
    let gamma: f64 = f.iter().enumerate().map(|(j, &x)| psi.amp(j, x).norm_sqr()).sum();
    let mut amps = vec![C64::new(0.0, 0.0); r * kappa];
    for (j, &x) in f.iter().enumerate() {
        amps[j * kappa + x] = psi.amp(j, x);
    }
    let phi = BipartiteWitness::normalized(r, kappa, &amps)
        .expect("a unit vector has a nonzero row maximum");
    QuasirigidProjection { phi, f, gamma }
}

/// The rigid state supported on the same basis elements as
/// [`nearest_quasirigid`].
pub fn nearest_rigid(psi: &BipartiteWitness) -> BipartiteWitness {
    let proj = nearest_quasirigid(psi);
    build_rigid_witness(&proj.f, psi.r(), psi.kappa()).expect("argmax indices are in range")
}

/// `(1-ε)(w - (1-Δ))/Δ`: guaranteed overlap with a quasirigid state when
/// QuasiCheck accepts with probability `w`.
pub fn quasirigid_overlap_bound(w: f64, epsilon: f64, delta: f64) -> f64 {
    (1.0 - epsilon) * (w - (1.0 - delta)) / delta
}

/// `κ w_D - (κ+1)√(ε + d_Q)`: guaranteed overlap with a rigid state when
/// QuasiCheck accepts with probability at least `1 - Δ d_Q`.
pub fn rigid_overlap_bound(kappa: usize, w_d: f64, epsilon: f64, d_q: f64) -> f64 {
    let k = kappa as f64;
    k * w_d - (k + 1.0) * (epsilon + d_q).max(0.0).sqrt()
}

/// `(w_D - 1/κ)² + (1-ε)(w_Q - (1-Δ))/Δ`.
pub fn quadratic_lhs(w_d: f64, w_q: f64, epsilon: f64, delta: f64, kappa: usize) -> f64 {
    let dev = w_d - 1.0 / kappa as f64;
    dev * dev + quasirigid_overlap_bound(w_q, epsilon, delta)
}

/// Whether `(w_D, w_Q)` lies in the region allowed for `w_D >= 1/κ`.
pub fn quadratic_feasible(w_d: f64, w_q: f64, epsilon: f64, delta: f64, kappa: usize) -> Result<bool> {
    if w_d < 1.0 / kappa as f64 - BOUND_TOL {
        return Err(Error::HypothesisNotMet(format!(
            "w_D = {w_d} is below 1/kappa = {}",
            1.0 / kappa as f64
        )));
    }
    Ok(quadratic_lhs(w_d, w_q, epsilon, delta, kappa) <= 1.0 + BOUND_TOL)
}

/// Largest feasible `w_Q` at a given `w_D >= 1/κ`, clamped to `[0, 1]`.
pub fn max_quasicheck(w_d: f64, epsilon: f64, delta: f64, kappa: usize) -> f64 {
    let dev = w_d - 1.0 / kappa as f64;
    ((1.0 - delta) + delta * (1.0 - dev * dev) / (1.0 - epsilon)).clamp(0.0, 1.0)
}

/// Boundary of the allowed `(w_D, w_Q)` region on a uniform grid over
/// `[1/κ, 1]`.
pub fn region_boundary(kappa: usize, epsilon: f64, delta: f64, grid_points: usize) -> Result<Vec<(f64, f64)>> {
    if grid_points < 2 {
        return Err(Error::InvalidDimension("grid needs at least 2 points".into()));
    }
    if kappa == 0 {
        return Err(Error::InvalidDimension("kappa must be positive".into()));
    }
    let lo = 1.0 / kappa as f64;
    let step = (1.0 - lo) / (grid_points - 1) as f64;
    Ok((0..grid_points)
        .map(|i| {
            let w_d = if i + 1 == grid_points { 1.0 } else { lo + step * i as f64 };
            (w_d, max_quasicheck(w_d, epsilon, delta, kappa))
        })
        .collect())
}

/// `(w_D, w_Q)` for `count` random witnesses. Witnesses are made entrywise
/// non-negative when the detector needs it.
pub fn region_scatter<R: Rng + ?Sized>(
    r: usize,
    det: &DetectorSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let kappa = det.dim();
    (0..count)
        .map(|_| {
            let mut w = random_witness(r, kappa, rng);
            if det.kind.requires_nonnegative() {
                w = to_nonnegative(&w);
            }
            Ok((density_accept_prob(&w), quasicheck_accept_prob(&w, det)?.accept_prob))
        })
        .collect()
}

/// The four soundness regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SoundnessCase {
    /// `d <= -ν_low`.
    DensityLow = 1,
    /// `d >= ν_high`.
    DensityHigh = 2,
    /// Density in range, `w_Q <= 1 - Δ ν_low`.
    QuasiCheckLow = 3,
    /// Density in range, `w_Q > 1 - Δ ν_low`: close to rigid.
    NearRigid = 4,
}

impl SoundnessCase {
    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: SoundnessCase,
    pub p_no: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn soundness_case(profile: &AcceptanceProfile, params: &ProtocolParams) -> SoundnessCase {
    if profile.d <= -params.nu_low {
        SoundnessCase::DensityLow
    } else if profile.d >= params.nu_high {
        SoundnessCase::DensityHigh
    } else if profile.w_q <= 1.0 - params.delta * params.nu_low {
        SoundnessCase::QuasiCheckLow
    } else {
        SoundnessCase::NearRigid
    }
}

/// Classifies the witness and checks the acceptance bound for its case:
/// `P_YES - ν_low/(2Z)` for cases 1-3 and `P_YES - ν_high/(2Z)` for case 4.
/// The case-4 bound presumes a No instance.
pub fn classify_soundness_case(profile: &AcceptanceProfile, params: &ProtocolParams) -> CaseReport {
    let case = soundness_case(profile, params);
    let p_no = profile.mix(params);
    let margin = match case {
        SoundnessCase::NearRigid => params.nu_high,
        _ => params.nu_low,
    };
    let bound = params.p_yes - margin / (2.0 * params.z);
    CaseReport {
        case,
        p_no,
        bound,
        holds: p_no <= bound + BOUND_TOL,
    }
}

/// One named step of a case argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn le(name: &'static str, lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            name,
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseAudit {
    pub report: CaseReport,
    pub checks: Vec<InequalityCheck>,
}

impl CaseAudit {
    pub fn all_hold(&self) -> bool {
        self.report.holds && self.checks.iter().all(|c| c.holds)
    }
}

/// Evaluates the intermediate inequalities of the witness's soundness case
/// alongside the final bound. Case 4 is only meaningful on No instances.
pub fn audit_soundness_case(
    psi: &BipartiteWitness,
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
) -> Result<CaseAudit> {
    let outcome = protocol_accept_prob(psi, csp, params, det)?;
    let profile = outcome.profile;
    let report = classify_soundness_case(&profile, params);
    let p = params;
    let kappa = p.kappa as f64;
    let mut checks = Vec::new();
    match report.case {
        SoundnessCase::DensityLow => {
            checks.push(InequalityCheck::le(
                "p_no <= p1(1/k - d) + p2 + p3",
                report.p_no,
                p.p1 * profile.w_d + p.p2 + p.p3,
            ));
        }
        SoundnessCase::DensityHigh => {
            let d = profile.d;
            checks.push(InequalityCheck::le(
                "w_q <= 1 - delta + delta (1 - d^2)/(1 - eps)",
                profile.w_q,
                max_quasicheck(profile.w_d, p.epsilon, p.delta, p.kappa),
            ));
            checks.push(InequalityCheck::le(
                "p1 d - p2 delta (d^2 - eps)/(1 - eps) <= -p1 nu_low",
                p.p1 * d - p.p2 * p.delta * (d * d - p.epsilon) / (1.0 - p.epsilon),
                -p.p1 * p.nu_low,
            ));
        }
        SoundnessCase::QuasiCheckLow => {
            checks.push(InequalityCheck::le("2 p1 <= p2 delta", 2.0 * p.p1, p.p2 * p.delta));
            checks.push(InequalityCheck::le(
                "p1 d - p2 delta nu_low <= -p1 nu_low",
                p.p1 * profile.d - p.p2 * p.delta * p.nu_low,
                -p.p1 * p.nu_low,
            ));
        }
        SoundnessCase::NearRigid => {
            let chi = nearest_rigid(psi);
            let overlap = squared_overlap(chi.state(), psi.state())?;
            let root = (p.epsilon + p.nu_low).sqrt();
            checks.push(InequalityCheck::le(
                "1 + k d - (k+1) sqrt(eps + nu_low) <= |<chi|psi>|^2",
                1.0 + kappa * profile.d - (kappa + 1.0) * root,
                overlap,
            ));
            let w_c_chi = constraintcheck_accept_prob(&chi, csp, p.c_yes)?;
            let fuchs = (1.0 - overlap).max(0.0).sqrt();
            checks.push(InequalityCheck::le(
                "|w_c(psi) - w_c(chi)| <= sqrt(1 - |<chi|psi>|^2)",
                (profile.w_c - w_c_chi).abs(),
                fuchs,
            ));
            checks.push(InequalityCheck::le(
                "sqrt(1 - |<chi|psi>|^2) <= xi/2",
                fuchs,
                p.xi / 2.0,
            ));
            checks.push(InequalityCheck::le("w_c(chi) <= c_yes - xi", w_c_chi, p.c_yes - p.xi));
        }
    }
    Ok(CaseAudit { report, checks })
}

/// Families used to draw test witnesses that cover the whole `(w_D, w_Q)`
/// region, not just the Haar bulk near `w_D ≈ 1/(Rκ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WitnessFamily {
    /// Complex Gaussian amplitudes.
    Haar,
    /// Absolute values of Gaussian amplitudes.
    NonNegative,
    /// A random rigid state plus complex noise of log-uniform scale.
    PerturbedRigid,
    /// A quasirigid state with random coefficients plus noise.
    PerturbedQuasirigid,
    /// `α` rigid + `(1-α)` uniform, with a little noise.
    RigidUniformBlend,
}

impl WitnessFamily {
    pub const ALL: [WitnessFamily; 5] = [
        WitnessFamily::Haar,
        WitnessFamily::NonNegative,
        WitnessFamily::PerturbedRigid,
        WitnessFamily::PerturbedQuasirigid,
        WitnessFamily::RigidUniformBlend,
    ];
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn add_noise<R: Rng + ?Sized>(amps: &mut [C64], scale: f64, rng: &mut R) {
    for a in amps {
        *a += gaussian(rng) * scale;
    }
}

pub fn random_witness_from<R: Rng + ?Sized>(
    family: WitnessFamily,
    r: usize,
    kappa: usize,
    rng: &mut R,
) -> BipartiteWitness {
    let n = r * kappa;
    let mut amps = vec![C64::new(0.0, 0.0); n];
    match family {
        WitnessFamily::Haar => amps.iter_mut().for_each(|a| *a = gaussian(rng)),
        WitnessFamily::NonNegative => {
            amps.iter_mut().for_each(|a| *a = C64::new(gaussian(rng).norm(), 0.0))
        }
        WitnessFamily::PerturbedRigid | WitnessFamily::PerturbedQuasirigid => {
            for j in 0..r {
                let b = if family == WitnessFamily::PerturbedRigid {
                    C64::new(1.0, 0.0)
                } else {
                    gaussian(rng)
                };
                amps[j * kappa + rng.gen_range(0..kappa)] = b;
            }
            let scale = 10f64.powf(rng.gen_range(-8.0..0.0));
            add_noise(&mut amps, scale, rng);
        }
        WitnessFamily::RigidUniformBlend => {
            let alpha: f64 = rng.gen();
            let uniform = (1.0 - alpha) / (kappa as f64).sqrt();
            for j in 0..r {
                let s = rng.gen_range(0..kappa);
                for x in 0..kappa {
                    amps[j * kappa + x] = C64::new(uniform + if x == s { alpha } else { 0.0 }, 0.0);
                }
            }
            let scale = 10f64.powf(rng.gen_range(-6.0..-1.0));
            add_noise(&mut amps, scale, rng);
        }
    }
    BipartiteWitness::normalized(r, kappa, &amps).unwrap_or_else(|_| {
        BipartiteWitness::from_state(StateVector::basis(n, 0).expect("n >= 1"), r, kappa)
            .expect("shape matches")
    })
}

/// A witness from a uniformly chosen [`WitnessFamily`].
pub fn random_witness<R: Rng + ?Sized>(r: usize, kappa: usize, rng: &mut R) -> BipartiteWitness {
    let family = WitnessFamily::ALL[rng.gen_range(0..WitnessFamily::ALL.len())];
    random_witness_from(family, r, kappa, rng)
}

/// Entrywise modulus of a witness; stays a unit vector.
pub fn to_nonnegative(psi: &BipartiteWitness) -> BipartiteWitness {
    let amps = psi.amps().iter().map(|a| C64::new(a.norm(), 0.0)).collect();
    BipartiteWitness::new(psi.r(), psi.kappa(), amps).expect("modulus preserves the norm")
}

/// Settings for [`optimize_witness_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Stop once an accepted step improves the objective by less than this.
    pub tol: f64,
    pub initial_step: f64,
    /// Optimize over real non-negative amplitudes only.
    pub nonnegative: bool,
}

impl OptimizerConfig {
    pub fn new(restarts: usize, seed: u64) -> Self {
        OptimizerConfig {
            restarts,
            seed,
            max_iters: 10_000,
            fd_step: 1e-5,
            tol: 1e-10,
            initial_step: 0.1,
            nonnegative: false,
        }
    }
}

/// Largest `R κ` accepted by the optimizer.
pub const OPTIMIZER_MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub best_state: BipartiteWitness,
    pub best_value: f64,
    pub restarts_used: usize,
    /// Final value of each restart, in restart order.
    pub trace: Vec<f64>,
}

/// Seed of restart `index`, independent of scheduling.
pub fn restart_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Maps optimizer coordinates to a witness.
struct Chart {
    r: usize,
    kappa: usize,
    nonnegative: bool,
}

impl Chart {
    fn n_params(&self) -> usize {
        let n = self.r * self.kappa;
        if self.nonnegative {
            n
        } else {
            2 * n
        }
    }

    fn witness(&self, v: &[f64]) -> Option<BipartiteWitness> {
        let amps: Vec<C64> = if self.nonnegative {
            v.iter().map(|&x| C64::new(x.abs(), 0.0)).collect()
        } else {
            v.chunks(2).map(|p| C64::new(p[0], p[1])).collect()
        };
        BipartiteWitness::normalized(self.r, self.kappa, &amps).ok()
    }
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Multi-restart projected gradient ascent with a default configuration.
pub fn optimize_witness<F>(objective: F, r: usize, kappa: usize, restarts: usize, seed: u64) -> Result<OptimizerResult>
where
    F: Fn(&BipartiteWitness) -> f64 + Sync,
{
    optimize_witness_with(objective, r, kappa, &OptimizerConfig::new(restarts, seed))
}

/// Projected gradient ascent on the unit sphere of `R^{2Rκ}` with central
/// finite-difference gradients, renormalization after every step and step
/// halving on failure. Restarts run in parallel; the result does not depend
/// on scheduling.
pub fn optimize_witness_with<F>(
    objective: F,
    r: usize,
    kappa: usize,
    config: &OptimizerConfig,
) -> Result<OptimizerResult>
where
    F: Fn(&BipartiteWitness) -> f64 + Sync,
{
    if r == 0 || kappa == 0 {
        return Err(Error::InvalidDimension("witness registers must be nonempty".into()));
    }
    if r * kappa > OPTIMIZER_MAX_DIM {
        return Err(Error::TooLarge {
            size: (r * kappa) as f64,
            limit: OPTIMIZER_MAX_DIM as f64,
        });
    }
    if config.restarts == 0 {
        return Err(Error::InvalidDimension("at least one restart is required".into()));
    }
    let chart = Chart {
        r,
        kappa,
        nonnegative: config.nonnegative,
    };
    let runs: Vec<Result<(Vec<f64>, f64)>> = (0..config.restarts)
        .into_par_iter()
        .map(|i| ascend(&objective, &chart, config, restart_seed(config.seed, i)))
        .collect();

    let mut trace = Vec::with_capacity(runs.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for run in runs {
        let (v, value) = run?;
        trace.push(value);
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((v, value));
        }
    }
    let (v, _) = best.expect("at least one restart");
    let best_state = chart.witness(&v).ok_or(Error::ObjectiveError)?;
    let best_value = objective(&best_state);
    Ok(OptimizerResult {
        best_state,
        best_value,
        restarts_used: config.restarts,
        trace,
    })
}

fn ascend<F>(objective: &F, chart: &Chart, config: &OptimizerConfig, seed: u64) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&BipartiteWitness) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.n_params();
    let eval = |v: &[f64]| -> Result<f64> {
        let value = chart.witness(v).map_or(f64::NAN, |w| objective(&w));
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::ObjectiveError)
        }
    };

    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    if chart.nonnegative {
        v.iter_mut().for_each(|x| *x = x.abs());
    }
    unit(&mut v);
    let mut value = eval(&v)?;
    let mut step = config.initial_step;
    let mut grad = vec![0.0; n];
    let mut probe = v.clone();

    for _ in 0..config.max_iters {
        for i in 0..n {
            probe[i] = v[i] + config.fd_step;
            let up = eval(&probe)?;
            probe[i] = v[i] - config.fd_step;
            let down = eval(&probe)?;
            probe[i] = v[i];
            grad[i] = (up - down) / (2.0 * config.fd_step);
        }
        // Tangent component at the current point.
        let radial: f64 = grad.iter().zip(&v).map(|(g, x)| g * x).sum();
        grad.iter_mut().zip(&v).for_each(|(g, x)| *g -= radial * x);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }

        let mut accepted = None;
        while step > 1e-14 {
            let mut cand: Vec<f64> = v.iter().zip(&grad).map(|(x, g)| x + step * g / gnorm).collect();
            unit(&mut cand);
            let cand_value = eval(&cand)?;
            if cand_value > value {
                accepted = Some((cand, cand_value));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else {
            break;
        };
        let gain = cand_value - value;
        v = cand;
        probe.copy_from_slice(&v);
        value = cand_value;
        if gain < config.tol {
            break;
        }
        step = (step * 1.25).min(1.0);
    }
    Ok((v, value))
}

/// Maximum of the protocol acceptance over all rigid witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidSearchResult {
    pub best_value: f64,
    pub best_sigma: Vec<usize>,
    pub evaluated: usize,
}

/// Upper limit on `κ^R` for [`exhaustive_rigid_search`].
pub const MAX_RIGID_MAPS: f64 = 1e6;

/// Enumerates every map `σ: [R] -> [κ]` and evaluates the rigid witness.
pub fn exhaustive_rigid_search(
    csp: &CspSystem,
    params: &ProtocolParams,
    det: &DetectorSpec,
) -> Result<RigidSearchResult> {
    let (r, kappa) = (csp.n_constraints(), csp.kappa());
    let size = (kappa as f64).powi(r as i32);
    if size > MAX_RIGID_MAPS {
        return Err(Error::TooLarge {
            size,
            limit: MAX_RIGID_MAPS,
        });
    }
    let total = size as usize;
    let mut sigma = vec![0usize; r];
    let mut best = RigidSearchResult {
        best_value: f64::NEG_INFINITY,
        best_sigma: sigma.clone(),
        evaluated: 0,
    };
    for code in 0..total {
        let mut rest = code;
        for slot in sigma.iter_mut().rev() {
            *slot = rest % kappa;
            rest /= kappa;
        }
        let w = build_rigid_witness(&sigma, r, kappa)?;
        let value = protocol_accept_prob(&w, csp, params, det)?.accept_prob;
        if value > best.best_value {
            best.best_value = value;
            best.best_sigma.clone_from(&sigma);
        }
        best.evaluated += 1;
    }
    Ok(best)
}
