//! Instance, constants and witness resolution shared by the commands.

use std::fs;
use std::path::Path;

use ncverify_core::csp::{gen_no_instance, gen_yes_instance_planted, Assignment, GapInstance};
use ncverify_core::supdetect::{qubits_for_dim, DetectorKind};
use ncverify_core::verifier::{
    BipartiteWitness, ProtocolParams, DIAGNOSTIC_EPSILON, DIAGNOSTIC_NU,
};
use ncverify_core::{Error, StateVector};
use serde::Serialize;

use crate::args::{GenLabel, InstanceArgs, Preset, ProtocolArgs};
use crate::error::{CliError, CliResult};

pub struct LoadedInstance {
    pub instance: GapInstance,
    /// Known satisfying assignment of a generated Yes instance.
    pub planted: Option<Assignment>,
    pub source: String,
}

pub fn generate(label: GenLabel, n: usize, r: usize, q: usize, delta: f64, seed: u64) -> CliResult<LoadedInstance> {
    let (instance, planted) = match label {
        GenLabel::Yes => {
            let (inst, planted) = gen_yes_instance_planted(n, r, q, seed)?;
            (inst, Some(planted))
        }
        GenLabel::No => (gen_no_instance(n, r, q, delta, seed)?, None),
    };
    Ok(LoadedInstance {
        instance,
        planted,
        source: format!("generated {label:?} N={n} R={r} q={q} seed={seed}").to_lowercase(),
    })
}

pub fn load_instance(args: &InstanceArgs, seed: u64) -> CliResult<LoadedInstance> {
    match (&args.instance, args.generate) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            Ok(LoadedInstance {
                instance: GapInstance::from_json(&text)?,
                planted: None,
                source: path.display().to_string(),
            })
        }
        (None, Some(label)) => generate(label, args.n_vars, args.n_constraints, args.arity, args.delta, seed),
        (None, None) => Err(Error::Parse("either --instance or --generate is required".into()).into()),
    }
}

pub fn resolve_params(args: &ProtocolArgs, kappa: usize) -> CliResult<ProtocolParams> {
    let params = match args.preset {
        Preset::Proof => ProtocolParams::proof_faithful(kappa, args.xi, args.c_yes, args.detector)?,
        Preset::Diagnostic => {
            let delta = args.detector.margin(qubits_for_dim(kappa)?, DIAGNOSTIC_EPSILON)?;
            ProtocolParams::from_constants(
                kappa,
                DIAGNOSTIC_EPSILON,
                DIAGNOSTIC_NU,
                DIAGNOSTIC_NU,
                args.c_yes,
                args.xi,
                delta,
            )?
        }
    };
    Ok(params)
}

pub fn read_witness(path: &Path, r: usize, kappa: usize) -> CliResult<BipartiteWitness> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let state: StateVector =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(BipartiteWitness::from_state(state, r, kappa)?)
}

pub fn warn_if_unsound(kind: DetectorKind, witness: &BipartiteWitness) {
    if kind.requires_nonnegative() && !witness.is_nonnegative() {
        eprintln!("warning: the {kind} detector is only sound on witnesses with non-negative amplitudes");
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(CliError::io(&path))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
