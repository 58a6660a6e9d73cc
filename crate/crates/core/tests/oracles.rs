//! Randomized checks against independent oracles.

mod common;

use common::{c, uniform_witness};
use nalgebra::{DMatrix, DVector};
use ncverify_core::analysis::{
    nearest_quasirigid, nearest_rigid, optimize_witness, random_witness, random_witness_from,
    to_nonnegative, WitnessFamily,
};
use ncverify_core::csp::{
    gen_no_instance, gen_yes_instance_planted, Constraint, CspSystem, GapInstance, Label,
};
use ncverify_core::quantum::{fuchs_terms, normalize, squared_overlap, StateVector, C64};
use ncverify_core::supdetect::{DetectorKind, DetectorSpec};
use ncverify_core::verifier::{
    density_accept_prob, protocol_accept_prob, quasicheck_accept_prob, BipartiteWitness,
    ProtocolParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_system(rng: &mut ChaCha8Rng, n: usize, r: usize, q: usize, sigma: u32) -> CspSystem {
    let kappa = (sigma as usize).pow(q as u32);
    let constraints = (0..r)
        .map(|_| {
            let vars = (0..q).map(|_| rng.gen_range(0..n)).collect();
            let allowed = (0..kappa)
                .filter(|_| rng.gen_bool(0.3))
                .map(|mut code| {
                    let mut t = vec![0u32; q];
                    for slot in t.iter_mut().rev() {
                        *slot = (code % sigma as usize) as u32;
                        code /= sigma as usize;
                    }
                    t
                })
                .collect();
            Constraint { vars, allowed }
        })
        .collect();
    CspSystem::new(n, q, sigma, constraints).unwrap()
}

/// Second enumerator: recursion over variables, membership by tuple search.
fn reference_value(sys: &CspSystem) -> f64 {
    fn go(sys: &CspSystem, values: &mut Vec<u32>, best: &mut usize) {
        if values.len() == sys.n_vars() {
            let count = sys
                .constraints()
                .iter()
                .filter(|c| {
                    let local: Vec<u32> = c.vars.iter().map(|&v| values[v]).collect();
                    c.allowed.contains(&local)
                })
                .count();
            *best = (*best).max(count);
            return;
        }
        for s in 0..sys.alphabet() {
            values.push(s);
            go(sys, values, best);
            values.pop();
        }
    }
    let mut best = 0;
    go(sys, &mut Vec::new(), &mut best);
    best as f64 / sys.n_constraints() as f64
}

#[test]
fn csp_value_matches_reference_enumerator() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let sys = random_system(&mut rng, 4, 6, 2, 2);
        assert_eq!(sys.csp_value().unwrap(), reference_value(&sys));
    }
    for _ in 0..50 {
        let sys = random_system(&mut rng, 3, 5, 2, 3);
        assert_eq!(sys.csp_value().unwrap(), reference_value(&sys));
    }
}

#[test]
fn local_value_dominates_csp_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=5);
        let r = rng.gen_range(1..=6);
        let q = rng.gen_range(1..=2);
        let sys = random_system(&mut rng, n, r, q, 2);
        assert!(sys.local_value() >= sys.csp_value().unwrap());
    }
}

#[test]
fn is_satisfied_agrees_with_allowed_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let sys = random_system(&mut rng, 5, 4, 2, 3);
        for j in 0..4 {
            for _ in 0..10 {
                let x: Vec<u32> = (0..2).map(|_| rng.gen_range(0..3)).collect();
                assert_eq!(
                    sys.is_satisfied(j, &x).unwrap(),
                    sys.constraints()[j].allowed.contains(&x)
                );
            }
        }
    }
}

#[test]
fn instance_json_roundtrip_on_generated_instances() {
    for seed in 0..1000u64 {
        let inst = if seed % 2 == 0 {
            gen_yes_instance_planted(4, 6, 2, seed).unwrap().0
        } else {
            gen_no_instance(4, 6, 2, 1.0 / 3.0, seed).unwrap()
        };
        let text = inst.to_json();
        let back = GapInstance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn generators_keep_their_promises() {
    for seed in 0..50u64 {
        let (yes, planted) = gen_yes_instance_planted(4, 6, 2, seed).unwrap();
        assert!(yes.promise_holds().unwrap());
        for (j, c) in yes.system.constraints().iter().enumerate() {
            let x: Vec<u32> = c.vars.iter().map(|&v| planted.values[v]).collect();
            assert!(yes.system.is_satisfied(j, &x).unwrap());
        }
        let no = gen_no_instance(4, 6, 2, 1.0 / 3.0, seed).unwrap();
        assert_eq!(no.label, Label::No);
        let empty = no.system.constraints().iter().filter(|c| c.allowed.is_empty()).count();
        assert!(empty >= 4);
        assert!(no.system.csp_value().unwrap() <= no.system.local_value());
        assert!(no.system.local_value() <= 1.0 / 3.0 + 1e-12);
    }
}

fn random_effect(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let raw: Vec<C64> = (0..dim * dim)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let q = DMatrix::from_row_slice(dim, dim, &raw).qr().q();
    let lambdas = DVector::from_iterator(dim, (0..dim).map(|_| c(rng.gen_range(0.0..=1.0), 0.0)));
    &q * DMatrix::from_diagonal(&lambdas) * q.adjoint()
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let raw: Vec<C64> = (0..dim)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&raw).unwrap()
}

#[test]
fn fuchs_bound_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=16);
        let pi = random_effect(dim, &mut rng);
        let (a, b) = (random_state(dim, &mut rng), random_state(dim, &mut rng));
        let t = fuchs_terms(&pi, &a, &b).unwrap();
        assert!(t.difference <= t.bound + 1e-10, "{t:?}");
    }
}

#[test]
fn quasicheck_respects_row_flag_upper_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for i in 0..1000 {
        let w = random_witness(4, 4, &mut rng);
        let eps = if i % 2 == 0 { 0.01 } else { 0.1 };
        for kind in DetectorKind::ALL {
            let w = if kind.requires_nonnegative() { to_nonnegative(&w) } else { w.clone() };
            let det = DetectorSpec::for_dim(kind, 4, eps).unwrap();
            let q = quasicheck_accept_prob(&w, &det).unwrap();
            assert!(q.accept_prob <= q.breakdown.upper_bound() + 1e-10, "{kind} #{i}");
            let alt = (1.0 - det.delta) + det.delta * q.breakdown.dominant_weight();
            assert!((alt - q.breakdown.upper_bound()).abs() < 1e-12);
        }
    }
}

#[test]
fn rigid_overlap_is_kappa_times_plus_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for _ in 0..1000 {
        let w = random_witness(4, 4, &mut rng);
        let phi = nearest_quasirigid(&w).phi;
        let chi = nearest_rigid(&w);
        let lhs = squared_overlap(chi.state(), phi.state()).unwrap();
        assert!((lhs - 4.0 * density_accept_prob(&phi)).abs() < 1e-12);
    }
}

#[test]
fn witness_families_are_unit_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for family in WitnessFamily::ALL {
        for _ in 0..50 {
            let w = random_witness_from(family, 3, 4, &mut rng);
            let n: f64 = w.amps().iter().map(|a| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
    let nn = to_nonnegative(&random_witness_from(WitnessFamily::Haar, 3, 4, &mut rng));
    assert!(nn.is_nonnegative());
}

#[test]
fn optimizer_matches_grid_on_a_qubit() {
    // One unary constraint allowing only the value 1.
    let sys = CspSystem::new(1, 1, 2, vec![Constraint { vars: vec![0], allowed: vec![vec![1]] }]).unwrap();
    let params = ProtocolParams::diagnostic(2, DetectorKind::NonCollapsing).unwrap();
    let det = params.detector(DetectorKind::NonCollapsing).unwrap();
    let objective = |w: &BipartiteWitness| protocol_accept_prob(w, &sys, &params, &det).unwrap().accept_prob;

    // Global phase is irrelevant, so (θ, φ) parametrize the whole state space.
    let mut grid_best = f64::NEG_INFINITY;
    let steps_theta = (std::f64::consts::FRAC_PI_2 / 0.01).ceil() as usize;
    let steps_phi = (std::f64::consts::TAU / 0.01).ceil() as usize;
    for a in 0..=steps_theta {
        let theta = (a as f64 * 0.01).min(std::f64::consts::FRAC_PI_2);
        for b in 0..steps_phi {
            let phi = b as f64 * 0.01;
            let amps = vec![c(theta.cos(), 0.0), C64::from_polar(theta.sin(), phi)];
            let w = BipartiteWitness::new(1, 2, amps).unwrap();
            grid_best = grid_best.max(objective(&w));
        }
    }
    let result = optimize_witness(objective, 1, 2, 8, 5).unwrap();
    assert!(
        (result.best_value - grid_best).abs() <= 1e-3,
        "optimizer {} vs grid {grid_best}",
        result.best_value
    );
}

#[test]
fn rigid_witness_from_planted_assignment_reaches_p_yes() {
    let (inst, planted) = gen_yes_instance_planted(4, 6, 2, 99).unwrap();
    let sigma = inst.system.rigid_map(&planted).unwrap();
    let w = ncverify_core::verifier::build_rigid_witness(&sigma, 6, 4).unwrap();
    for kind in DetectorKind::ALL {
        let params = ProtocolParams::diagnostic(4, kind).unwrap();
        let det = params.detector(kind).unwrap();
        let p = protocol_accept_prob(&w, &inst.system, &params, &det).unwrap();
        assert!((p.accept_prob - params.p_yes).abs() < 1e-12);
    }
    assert!((density_accept_prob(&uniform_witness(6, 4)) - 1.0).abs() < 1e-12);
}
