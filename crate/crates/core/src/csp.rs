//! Explicit constraint systems with brute-force values and (1, δ) promise
//! instances.
//!
//! Value tuples in `Σ^q` are identified with indices in `[0, |Σ|^q)` by reading
//! the tuple as a big-endian base-`|Σ|` number; the same index addresses the
//! value register of a witness.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::MAX_DIM;

/// Upper limit on `|Σ|^N` for exhaustive search.
pub const MAX_ASSIGNMENTS: f64 = 1e6;

/// One constraint: a variable tuple and the set of allowed value tuples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub vars: Vec<usize>,
    pub allowed: Vec<Vec<u32>>,
}

/// A `(N, R, q, Σ)` constraint system. Constraints form a multiset: duplicates
/// are kept in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspSystem {
    n_vars: usize,
    arity: usize,
    alphabet: u32,
    constraints: Vec<Constraint>,
    masks: Vec<Vec<bool>>,
}

/// A total map from variables to `Σ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<u32>,
}

impl CspSystem {
    pub fn new(n_vars: usize, arity: usize, alphabet: u32, constraints: Vec<Constraint>) -> Result<Self> {
        if n_vars == 0 || arity == 0 || alphabet < 2 {
            return Err(Error::Parse(format!(
                "need N >= 1, q >= 1 and |Σ| >= 2 (got N={n_vars}, q={arity}, sigma={alphabet})"
            )));
        }
        if constraints.is_empty() {
            return Err(Error::Parse("a system needs at least one constraint".into()));
        }
        let kappa = (alphabet as f64).powi(arity as i32);
        if kappa > MAX_DIM as f64 {
            return Err(Error::TooLarge {
                size: kappa,
                limit: MAX_DIM as f64,
            });
        }
        let kappa = kappa as usize;
        let mut masks = Vec::with_capacity(constraints.len());
        for (j, c) in constraints.iter().enumerate() {
            if c.vars.len() != arity {
                return Err(Error::Parse(format!(
                    "constraint {j}: expected {arity} variables, found {}",
                    c.vars.len()
                )));
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n_vars) {
                return Err(Error::Parse(format!(
                    "constraint {j}: variable index {v} out of range [0, {n_vars})"
                )));
            }
            let mut mask = vec![false; kappa];
            for tuple in &c.allowed {
                if tuple.len() != arity || tuple.iter().any(|&s| s >= alphabet) {
                    return Err(Error::Parse(format!(
                        "constraint {j}: allowed tuple {tuple:?} is not in Σ^{arity} with |Σ| = {alphabet}"
                    )));
                }
                mask[encode(tuple, alphabet)] = true;
            }
            masks.push(mask);
        }
        Ok(CspSystem {
            n_vars,
            arity,
            alphabet,
            constraints,
            masks,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of constraints `R`.
    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Value-register dimension `κ = |Σ|^q`.
    pub fn kappa(&self) -> usize {
        self.masks[0].len()
    }

    /// Allowed-set indicator of constraint `j`, indexed by tuple index.
    pub fn allowed_mask(&self, j: usize) -> Result<&[bool]> {
        self.masks
            .get(j)
            .map(Vec::as_slice)
            .ok_or(Error::BadIndex {
                index: j,
                len: self.n_constraints(),
            })
    }

    pub fn tuple_index(&self, x: &[u32]) -> Result<usize> {
        if x.len() != self.arity || x.iter().any(|&s| s >= self.alphabet) {
            return Err(Error::BadAssignment(format!("{x:?} is not a value tuple")));
        }
        Ok(encode(x, self.alphabet))
    }

    pub fn tuple_from_index(&self, index: usize) -> Result<Vec<u32>> {
        if index >= self.kappa() {
            return Err(Error::BadIndex {
                index,
                len: self.kappa(),
            });
        }
        let mut out = vec![0; self.arity];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = (rest % self.alphabet as usize) as u32;
            rest /= self.alphabet as usize;
        }
        Ok(out)
    }

    /// Whether value tuple `x` satisfies constraint `j`.
    pub fn is_satisfied(&self, j: usize, x: &[u32]) -> Result<bool> {
        let mask = self.allowed_mask(j)?;
        Ok(mask[self.tuple_index(x)?])
    }

    /// Number of constraints satisfied by `assignment`.
    pub fn satisfied_count(&self, assignment: &Assignment) -> Result<usize> {
        self.check_assignment(assignment)?;
        Ok(self
            .constraints
            .iter()
            .zip(&self.masks)
            .filter(|(c, mask)| mask[self.restrict(c, &assignment.values)])
            .count())
    }

    fn restrict(&self, c: &Constraint, values: &[u32]) -> usize {
        c.vars
            .iter()
            .fold(0, |acc, &v| acc * self.alphabet as usize + values[v] as usize)
    }

    fn check_assignment(&self, assignment: &Assignment) -> Result<()> {
        if assignment.values.len() != self.n_vars
            || assignment.values.iter().any(|&s| s >= self.alphabet)
        {
            return Err(Error::BadAssignment(format!(
                "assignment must map {} variables into [0, {})",
                self.n_vars, self.alphabet
            )));
        }
        Ok(())
    }

    /// Per-constraint value tuple index selected by `assignment`; this is the
    /// map `σ` of the rigid witness encoding the assignment.
    pub fn rigid_map(&self, assignment: &Assignment) -> Result<Vec<usize>> {
        self.check_assignment(assignment)?;
        Ok(self
            .constraints
            .iter()
            .map(|c| self.restrict(c, &assignment.values))
            .collect())
    }

    /// Exhaustive maximum over all assignments, with a maximizer (the first in
    /// lexicographic order).
    pub fn best_assignment(&self) -> Result<(Assignment, f64)> {
        let size = (self.alphabet as f64).powi(self.n_vars as i32);
        if size > MAX_ASSIGNMENTS {
            return Err(Error::TooLarge {
                size,
                limit: MAX_ASSIGNMENTS,
            });
        }
        let total = size as usize;
        let mut values = vec![0u32; self.n_vars];
        let mut best = (values.clone(), 0usize);
        for code in 0..total {
            let mut rest = code;
            for slot in values.iter_mut().rev() {
                *slot = (rest % self.alphabet as usize) as u32;
                rest /= self.alphabet as usize;
            }
            let count = self
                .constraints
                .iter()
                .zip(&self.masks)
                .filter(|(c, mask)| mask[self.restrict(c, &values)])
                .count();
            if count > best.1 || code == 0 {
                best = (values.clone(), count);
                if count == self.n_constraints() {
                    break;
                }
            }
        }
        Ok((
            Assignment { values: best.0 },
            best.1 as f64 / self.n_constraints() as f64,
        ))
    }

    /// Maximum fraction of simultaneously satisfiable constraints.
    pub fn csp_value(&self) -> Result<f64> {
        Ok(self.best_assignment()?.1)
    }

    /// Fraction of constraints with a nonempty allowed set.
    pub fn local_value(&self) -> f64 {
        let live = self.masks.iter().filter(|m| m.iter().any(|&b| b)).count();
        live as f64 / self.n_constraints() as f64
    }
}

fn encode(tuple: &[u32], alphabet: u32) -> usize {
    tuple
        .iter()
        .fold(0, |acc, &s| acc * alphabet as usize + s as usize)
}

/// Promise label of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
    Unknown,
}

/// A constraint system together with its `(1, δ)` promise.
#[derive(Debug, Clone, PartialEq)]
pub struct GapInstance {
    pub system: CspSystem,
    pub delta: f64,
    pub label: Label,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "R")]
    r: usize,
    q: usize,
    sigma: u32,
    constraints: Vec<Constraint>,
    delta: f64,
    label: Label,
}

impl GapInstance {
    pub fn new(system: CspSystem, delta: f64, label: Label) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidThreshold(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(GapInstance { system, delta, label })
    }

    /// Checks the promise attached to the label by brute force.
    pub fn promise_holds(&self) -> Result<bool> {
        Ok(match self.label {
            Label::Yes => self.system.csp_value()? == 1.0,
            Label::No => self.system.local_value() <= self.delta + 1e-12,
            Label::Unknown => true,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.r != raw.constraints.len() {
            return Err(Error::Parse(format!(
                "field `R` is {} but `constraints` has {} entries",
                raw.r,
                raw.constraints.len()
            )));
        }
        let system = CspSystem::new(raw.n, raw.q, raw.sigma, raw.constraints)?;
        GapInstance::new(system, raw.delta, raw.label).map_err(|e| Error::Parse(format!("field `delta`: {e}")))
    }

    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            n: self.system.n_vars,
            r: self.system.n_constraints(),
            q: self.system.arity,
            sigma: self.system.alphabet,
            constraints: self.system.constraints.clone(),
            delta: self.delta,
            label: self.label,
        };
        serde_json::to_string_pretty(&raw).expect("instance serializes")
    }
}

fn check_shape(n: usize, r: usize, q: usize) -> Result<()> {
    if n == 0 || r == 0 || q == 0 {
        return Err(Error::InvalidDimension(format!(
            "need N, R, q >= 1 (got N={n}, R={r}, q={q})"
        )));
    }
    if n > 20 {
        return Err(Error::TooLarge {
            size: n as f64,
            limit: 20.0,
        });
    }
    Ok(())
}

fn random_vars(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if q <= n {
        sample(rng, n, q).into_vec()
    } else {
        (0..q).map(|_| rng.gen_range(0..n)).collect()
    }
}

fn all_tuples(q: usize, alphabet: u32) -> Vec<Vec<u32>> {
    let count = (alphabet as usize).pow(q as u32);
    (0..count)
        .map(|mut code| {
            let mut t = vec![0; q];
            for slot in t.iter_mut().rev() {
                *slot = (code % alphabet as usize) as u32;
                code /= alphabet as usize;
            }
            t
        })
        .collect()
}

/// Yes instance over `Σ = {0, 1}` with a planted satisfying assignment, which
/// is returned alongside.
pub fn gen_yes_instance_planted(n: usize, r: usize, q: usize, seed: u64) -> Result<(GapInstance, Assignment)> {
    check_shape(n, r, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = Assignment {
        values: (0..n).map(|_| rng.gen_range(0..2)).collect(),
    };
    let tuples = all_tuples(q, 2);
    let constraints = (0..r)
        .map(|_| {
            let vars = random_vars(n, q, &mut rng);
            let keep: Vec<u32> = vars.iter().map(|&v| planted.values[v]).collect();
            let allowed = tuples
                .iter()
                .filter(|t| **t == keep || rng.gen_bool(0.5))
                .cloned()
                .collect();
            Constraint { vars, allowed }
        })
        .collect();
    let system = CspSystem::new(n, q, 2, constraints)?;
    Ok((GapInstance::new(system, 1.0 / 3.0, Label::Yes)?, planted))
}

/// Yes instance over `Σ = {0, 1}`; `csp_value` is 1 by construction.
pub fn gen_yes_instance(n: usize, r: usize, q: usize, seed: u64) -> Result<GapInstance> {
    Ok(gen_yes_instance_planted(n, r, q, seed)?.0)
}

/// Number of constraints a No instance leaves empty: `⌈(1-δ)R⌉`.
pub fn empty_constraint_count(r: usize, delta: f64) -> usize {
    (((1.0 - delta) * r as f64) - 1e-9).ceil().max(0.0) as usize
}

/// No instance over `Σ = {0, 1}` in which at least `(1-δ)R` constraints have
/// empty allowed sets, so `csp_value <= local_value <= δ`.
pub fn gen_no_instance(n: usize, r: usize, q: usize, delta: f64, seed: u64) -> Result<GapInstance> {
    check_shape(n, r, q)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidThreshold(format!("delta = {delta} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let empty = empty_constraint_count(r, delta);
    let mut is_empty = vec![false; r];
    for j in sample(&mut rng, r, empty) {
        is_empty[j] = true;
    }
    let tuples = all_tuples(q, 2);
    let constraints = is_empty
        .iter()
        .map(|&blank| {
            let vars = random_vars(n, q, &mut rng);
            let allowed = if blank {
                Vec::new()
            } else {
                let anchor = rng.gen_range(0..tuples.len());
                tuples
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i == anchor || rng.gen_bool(0.5))
                    .map(|(_, t)| t.clone())
                    .collect()
            };
            Constraint { vars, allowed }
        })
        .collect();
    let system = CspSystem::new(n, q, 2, constraints)?;
    GapInstance::new(system, delta, Label::No)
}
