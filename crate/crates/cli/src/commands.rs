use std::path::Path;

use ncverify_core::analysis::{
    classify_soundness_case, exhaustive_rigid_search, max_quasicheck, optimize_witness_with,
    region_boundary, region_scatter, CaseReport, OptimizerConfig, BOUND_TOL,
};
use ncverify_core::csp::Label;
use ncverify_core::supdetect::{
    distinguish_ensembles_experiment, fourier_ensemble_collision, DetectorKind, DetectorSpec,
};
use ncverify_core::verifier::{
    build_rigid_witness, protocol_accept_prob, protocol_sample, protocol_sampled_prob,
    AcceptanceProfile, BipartiteWitness, ConstantChecks, ProtocolParams,
};
use ncverify_core::{Error, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{
    Command, ConstantsArgs, DistinguishArgs, GenerateArgs, OptimizeArgs, Preset, RegionArgs,
    VerifyArgs,
};
use crate::error::{CliError, CliResult};
use crate::setup::{
    generate, load_instance, read_witness, resolve_params, to_json, warn_if_unsound, write_text,
    LoadedInstance,
};
use crate::svg::{render, RegionPlot};

/// Gaps below this are not resolvable in double precision next to `P_YES`.
const GAP_WARN: f64 = 1e-12;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Verify(a) => verify(a),
        Command::Region(a) => region(a),
        Command::Distinguish(a) => distinguish(a),
        Command::Constants(a) => constants(a),
        Command::Optimize(a) => optimize(a),
        Command::Generate(a) => generate_cmd(a),
    }
}

fn emit<T: Serialize>(out: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = to_json(value);
    print!("{text}");
    write_text(out, name, &text)
}

#[derive(Serialize)]
struct InstanceSummary {
    source: String,
    label: Label,
    n_vars: usize,
    n_constraints: usize,
    arity: usize,
    alphabet: u32,
    kappa: usize,
    delta: f64,
    local_value: f64,
    csp_value: Option<f64>,
}

impl InstanceSummary {
    fn new(loaded: &LoadedInstance) -> Self {
        let sys = &loaded.instance.system;
        InstanceSummary {
            source: loaded.source.clone(),
            label: loaded.instance.label,
            n_vars: sys.n_vars(),
            n_constraints: sys.n_constraints(),
            arity: sys.arity(),
            alphabet: sys.alphabet(),
            kappa: sys.kappa(),
            delta: loaded.instance.delta,
            local_value: sys.local_value(),
            csp_value: sys.csp_value().ok(),
        }
    }
}

#[derive(Serialize)]
struct CaseSummary {
    #[serde(flatten)]
    report: CaseReport,
    case_number: u8,
    /// The case-4 bound presumes a No instance.
    applies: bool,
}

fn case_summary(profile: &AcceptanceProfile, params: &ProtocolParams, label: Label) -> CaseSummary {
    let report = classify_soundness_case(profile, params);
    let case_number = report.case.number();
    CaseSummary {
        report,
        case_number,
        applies: case_number != 4 || label == Label::No,
    }
}

#[derive(Serialize)]
struct RigidSearchSummary {
    best_value: f64,
    best_sigma: Vec<usize>,
    evaluated: usize,
    measured_gap: f64,
    below_p_yes_minus_gap: bool,
}

#[derive(Serialize)]
struct RunReport {
    preset: Preset,
    detector: DetectorKind,
    instance: InstanceSummary,
    params: ProtocolParams,
    witness_source: String,
    profile: AcceptanceProfile,
    analytic_accept: f64,
    /// Expected frequency of the sampled protocol; differs from the analytic
    /// value only by the Fourier detector's `2^-k` offset.
    sampled_model_accept: f64,
    empirical_accept: f64,
    samples: u64,
    seed: u64,
    sigma: f64,
    status: &'static str,
    case: CaseSummary,
    rigid_search: Option<RigidSearchSummary>,
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    let seed = a.common.seed;
    let loaded = load_instance(&a.source, seed)?;
    let sys = &loaded.instance.system;
    let (r, kappa) = (sys.n_constraints(), sys.kappa());
    let kind = a.protocol.detector;
    let params = resolve_params(&a.protocol, kappa)?;
    let det = params.detector(kind)?;

    let mut rigid_search = None;
    let (witness, witness_source) = if let Some(path) = &a.witness {
        (read_witness(path, r, kappa)?, format!("file {}", path.display()))
    } else if let Some(planted) = &loaded.planted {
        let sigma = sys.rigid_map(planted)?;
        (build_rigid_witness(&sigma, r, kappa)?, "planted rigid".to_string())
    } else if loaded.instance.label == Label::Yes {
        let (assignment, value) = sys.best_assignment()?;
        if value < 1.0 {
            return Err(Error::Inconsistent(format!(
                "instance is labelled yes but its best assignment satisfies a {value} fraction"
            ))
            .into());
        }
        let sigma = sys.rigid_map(&assignment)?;
        (build_rigid_witness(&sigma, r, kappa)?, "satisfying rigid".to_string())
    } else {
        let found = exhaustive_rigid_search(sys, &params, &det)?;
        let witness = build_rigid_witness(&found.best_sigma, r, kappa)?;
        let measured_gap = params.p_yes - found.best_value;
        rigid_search = Some(RigidSearchSummary {
            below_p_yes_minus_gap: found.best_value <= params.p_yes - params.gap,
            best_value: found.best_value,
            best_sigma: found.best_sigma,
            evaluated: found.evaluated,
            measured_gap,
        });
        (witness, "best rigid (exhaustive)".to_string())
    };
    warn_if_unsound(kind, &witness);

    let outcome = protocol_accept_prob(&witness, sys, &params, &det)?;
    let model = protocol_sampled_prob(&witness, sys, &params, &det)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..a.samples {
        hits += protocol_sample(&witness, sys, &params, &det, &mut rng)? as u64;
    }
    let empirical = hits as f64 / a.samples as f64;
    let sigma = (model * (1.0 - model) / a.samples as f64).sqrt();
    let divergent = (empirical - model).abs() > 4.0 * sigma + 1e-12;
    if divergent {
        eprintln!("warning: empirical acceptance {empirical} is more than 4 sigma from {model}");
    }
    if params.gap < GAP_WARN {
        eprintln!("warning: promise gap {:.3e} is below double-precision resolution", params.gap);
    }

    let report = RunReport {
        preset: a.protocol.preset,
        detector: kind,
        instance: InstanceSummary::new(&loaded),
        case: case_summary(&outcome.profile, &params, loaded.instance.label),
        params,
        witness_source,
        profile: outcome.profile,
        analytic_accept: outcome.accept_prob,
        sampled_model_accept: model,
        empirical_accept: empirical,
        samples: a.samples,
        seed,
        sigma,
        status: if divergent { "divergent" } else { "consistent" },
        rigid_search,
    };
    emit(&a.common.out, "verify.json", &report)
}

#[derive(Serialize)]
struct RegionSummary {
    kappa: usize,
    epsilon: f64,
    delta: f64,
    detector: DetectorKind,
    grid: usize,
    seed: u64,
    scatter_points: usize,
    /// Scatter points with `w_D >= 1/κ`, the only ones the bound speaks about.
    points_in_scope: usize,
    points_above_boundary: usize,
}

fn write_csv<R: Serialize>(dir: &Path, name: &str, header: &[&str], rows: &[R]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let path = dir.join(name);
    let csv_err = |source| CliError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(&path))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn region(a: RegionArgs) -> CliResult<()> {
    let seed = a.common.seed;
    let spec = DetectorSpec::for_dim(a.detector, a.kappa, a.epsilon);
    let delta = match (a.delta, &spec) {
        (Some(d), _) => d,
        (None, Ok(spec)) => spec.delta,
        (None, Err(e)) => return Err(e.clone().into()),
    };
    if !(delta > 0.0 && delta <= 1.0) || !(0.0..1.0).contains(&a.epsilon) {
        return Err(Error::InvalidThreshold(format!(
            "need 0 < delta <= 1 and 0 <= epsilon < 1 (delta = {delta}, epsilon = {})",
            a.epsilon
        ))
        .into());
    }
    let boundary = region_boundary(a.kappa, a.epsilon, delta, a.grid)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match &spec {
        Ok(spec) => region_scatter(a.n_constraints, spec, a.samples, &mut rng)?,
        Err(e) => {
            eprintln!("warning: no scatter ({e})");
            Vec::new()
        }
    };
    let floor = 1.0 / a.kappa as f64;
    let scatter: Vec<(f64, f64, bool)> = points
        .iter()
        .map(|&(w_d, w_q)| {
            let above = w_d >= floor && w_q > max_quasicheck(w_d, a.epsilon, delta, a.kappa) + BOUND_TOL;
            (w_d, w_q, above)
        })
        .collect();
    let above = scatter.iter().filter(|p| p.2).count();
    if above > 0 {
        eprintln!("warning: {above} scatter points lie above the boundary");
    }

    let out = &a.common.out;
    write_csv(out, "region.csv", &["w_d", "w_q_max"], &boundary)?;
    write_csv(out, "scatter.csv", &["w_d", "w_q"], &points)?;
    write_text(
        out,
        "region.svg",
        &render(&RegionPlot {
            kappa: a.kappa,
            boundary: &boundary,
            scatter: &scatter,
        }),
    )?;
    let summary = RegionSummary {
        kappa: a.kappa,
        epsilon: a.epsilon,
        delta,
        detector: a.detector,
        grid: a.grid,
        seed,
        scatter_points: points.len(),
        points_in_scope: points.iter().filter(|p| p.0 >= floor).count(),
        points_above_boundary: above,
    };
    emit(out, "region.json", &summary)
}

#[derive(Serialize)]
struct DistinguishReport {
    k: u32,
    samples: u64,
    seed: u64,
    acc_computational: f64,
    acc_fourier: f64,
    density_gap: f64,
    acceptance_gap: f64,
    analytic_fourier: f64,
    analytic_gap: f64,
    within_4_sigma: bool,
}

fn distinguish(a: DistinguishArgs) -> CliResult<()> {
    let seed = a.common.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = distinguish_ensembles_experiment(a.k, a.samples as usize, &mut rng)?;
    let analytic = fourier_ensemble_collision(a.k)?;
    let sigma = (analytic * (1.0 - analytic) / a.samples as f64).sqrt();
    let out = DistinguishReport {
        k: a.k,
        samples: a.samples,
        seed,
        acc_computational: report.acc_computational,
        acc_fourier: report.acc_fourier,
        density_gap: report.density_gap,
        acceptance_gap: report.acc_computational - report.acc_fourier,
        analytic_fourier: analytic,
        analytic_gap: 1.0 - analytic,
        within_4_sigma: (report.acc_fourier - analytic).abs() <= 4.0 * sigma + 1e-12
            && report.acc_computational == 1.0,
    };
    emit(&a.common.out, "distinguish.json", &out)
}

#[derive(Serialize)]
struct ConstantsReport {
    preset: Preset,
    detector: DetectorKind,
    params: ProtocolParams,
    checks: ConstantChecks,
    gap: f64,
    sub_precision_gap: bool,
}

fn constants(a: ConstantsArgs) -> CliResult<()> {
    let params = resolve_params(&a.protocol, a.kappa)?;
    let checks = params.constant_checks();
    let sub_precision_gap = params.gap < GAP_WARN;
    if sub_precision_gap {
        eprintln!(
            "warning: promise gap {:.3e} is below 1e-12; P_YES and the soundness bound are not separable in double precision",
            params.gap
        );
    }
    if !checks.all() {
        eprintln!("note: these constants do not satisfy every inequality of the soundness argument: {checks:?}");
    }
    let report = ConstantsReport {
        preset: a.protocol.preset,
        detector: a.protocol.detector,
        gap: params.gap,
        params,
        checks,
        sub_precision_gap,
    };
    emit(&a.common.out, "constants.json", &report)
}

#[derive(Serialize)]
struct OptimizeReport {
    preset: Preset,
    detector: DetectorKind,
    instance: InstanceSummary,
    params: ProtocolParams,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    best_value: f64,
    p_yes: f64,
    p_yes_minus_best: f64,
    profile: AcceptanceProfile,
    case: CaseSummary,
    trace: Vec<f64>,
    witness_file: &'static str,
}

fn optimize(a: OptimizeArgs) -> CliResult<()> {
    let seed = a.common.seed;
    let loaded = load_instance(&a.source, seed)?;
    let sys = &loaded.instance.system;
    let (r, kappa) = (sys.n_constraints(), sys.kappa());
    let kind = a.protocol.detector;
    let params = resolve_params(&a.protocol, kappa)?;
    let det = params.detector(kind)?;
    let objective = |w: &BipartiteWitness| {
        protocol_accept_prob(w, sys, &params, &det).map_or(f64::NAN, |o| o.accept_prob)
    };
    let mut config = OptimizerConfig::new(a.restarts, seed);
    config.max_iters = a.max_iters;
    config.nonnegative = kind.requires_nonnegative();
    let result = optimize_witness_with(objective, r, kappa, &config)?;
    let profile = protocol_accept_prob(&result.best_state, sys, &params, &det)?.profile;

    let out = &a.common.out;
    let state: &StateVector = result.best_state.state();
    write_text(out, "witness.json", &to_json(state))?;
    let report = OptimizeReport {
        preset: a.protocol.preset,
        detector: kind,
        instance: InstanceSummary::new(&loaded),
        case: case_summary(&profile, &params, loaded.instance.label),
        p_yes: params.p_yes,
        p_yes_minus_best: params.p_yes - result.best_value,
        params,
        restarts: result.restarts_used,
        max_iters: a.max_iters,
        seed,
        best_value: result.best_value,
        profile,
        trace: result.trace,
        witness_file: "witness.json",
    };
    emit(out, "optimize.json", &report)
}

fn generate_cmd(a: GenerateArgs) -> CliResult<()> {
    let loaded = generate(a.label, a.n_vars, a.n_constraints, a.arity, a.delta, a.common.seed)?;
    let mut text = loaded.instance.to_json();
    text.push('\n');
    print!("{text}");
    write_text(&a.common.out, "instance.json", &text)
}
