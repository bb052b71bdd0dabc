//! Phase-oracle synthesis and Grover circuit assembly.
//!
//! Layout for a formula with `n` variables and `m` clauses: variable `i`
//! (1-based) lives on qubit `i - 1`, clause `j` (0-based) computes into
//! ancilla `n + j`, and the phase-kickback target is qubit `n + m`.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, Registers};
use crate::cnf::{Clause, Cnf};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the formula has no clauses, so there are no ancillas to conjoin")]
    EmptyFormula,
    #[error("the formula has no models; Grover search cannot amplify an empty set")]
    NoSolutions,
    #[error("{0}")]
    Domain(String),
    #[error("ancilla qubit {ancilla} is outside a circuit of width {width}")]
    Index { ancilla: usize, width: usize },
    #[error("{0} Grover iterations do not fit in memory")]
    TooManyIterations(BigUint),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Number of Grover rounds to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Iterations {
    /// Use [`GroverPlan::k_best`].
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Iterations {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(Iterations::Auto)
        } else {
            s.parse()
                .map(Iterations::Fixed)
                .map_err(|_| format!("expected AUTO or a nonnegative integer, got `{s}`"))
        }
    }
}

/// Iteration plan derived from the search-space size and the model count.
#[derive(Debug, Clone, PartialEq)]
pub struct GroverPlan {
    pub num_vars: usize,
    /// `N = 2^n`.
    pub num_states: BigUint,
    /// `M`, the number of models.
    pub num_models: BigUint,
    /// `M / N`.
    pub fraction: f64,
    /// Half the rotation angle per round, `asin(sqrt(M / N))`.
    pub theta_half: f64,
    pub k_best: BigUint,
}

impl GroverPlan {
    pub fn k_best_usize(&self) -> Option<usize> {
        self.k_best.to_usize()
    }

    /// Probability of measuring a model after `k` rounds.
    pub fn success_after(&self, k: u64) -> f64 {
        ((2 * k + 1) as f64 * self.theta_half).sin().powi(2)
    }
}

/// `M / 2^n` as a float, without forming `2^n` as a float (it overflows past
/// n = 1023).
pub fn fraction_of_space(num_models: &BigUint, num_vars: usize) -> f64 {
    let bits = num_models.bits();
    let shift = bits.saturating_sub(64);
    let top = (num_models >> shift).to_f64().unwrap_or(0.0);
    scale_by_pow2(top, shift as i64 - num_vars as i64)
}

fn scale_by_pow2(mut x: f64, mut exp: i64) -> f64 {
    while exp > 0 {
        let step = exp.min(1000);
        x *= 2f64.powi(step as i32);
        exp -= step;
    }
    while exp < 0 {
        let step = exp.max(-1000);
        x *= 2f64.powi(step as i32);
        exp -= step;
    }
    x
}

/// Plans the iteration count for `num_models` solutions among `2^num_vars`.
///
/// `k_best = floor(pi / (4 * theta_half))` when fewer than half the states are
/// models, else 0: a single measurement then already succeeds with
/// probability at least 1/2 and rejection handles the rest.
pub fn plan(num_vars: usize, num_models: &BigUint) -> Result<GroverPlan, OracleError> {
    if num_models.is_zero() {
        return Err(OracleError::NoSolutions);
    }
    let num_states = BigUint::from(1u8) << num_vars;
    if *num_models > num_states {
        return Err(OracleError::Domain(format!(
            "{num_models} models exceed the {num_states} assignments of {num_vars} variables"
        )));
    }
    let fraction = fraction_of_space(num_models, num_vars);
    let theta_half = fraction.sqrt().asin();
    let half = BigUint::from(1u8) << num_vars.saturating_sub(1);
    let k_best = if num_vars >= 1 && *num_models < half {
        BigUint::from_f64((PI / (4.0 * theta_half)).floor()).unwrap_or_default()
    } else {
        BigUint::zero()
    };
    Ok(GroverPlan {
        num_vars,
        num_states,
        num_models: num_models.clone(),
        fraction,
        theta_half,
        k_best,
    })
}

/// `sin^2((2k + 1) * asin(sqrt(M / N)))`.
pub fn analytic_success(num_vars: usize, num_models: &BigUint, k: u64) -> Result<f64, OracleError> {
    if *num_models > BigUint::from(1u8) << num_vars {
        return Err(OracleError::Domain(format!(
            "{num_models} models exceed 2^{num_vars}"
        )));
    }
    let theta_half = fraction_of_space(num_models, num_vars).sqrt().asin();
    Ok(((2 * k + 1) as f64 * theta_half).sin().powi(2))
}

/// Gates writing the truth value of `clause` into ancilla `num_vars + clause_index`.
///
/// Positive-literal qubits are X-conjugated so that the multi-controlled X
/// fires exactly when every literal is false; the ancilla is pre-flipped to 1,
/// leaving it at 1 iff the clause is satisfied.
pub fn build_clause_fragment(
    clause: &Clause,
    clause_index: usize,
    num_vars: usize,
    width: usize,
) -> Result<Vec<Gate>, OracleError> {
    let ancilla = num_vars + clause_index;
    if ancilla >= width {
        return Err(OracleError::Index { ancilla, width });
    }
    let flips: Vec<Gate> = clause
        .literals()
        .iter()
        .filter(|l| l.is_positive())
        .map(|l| Gate::X(l.var() - 1))
        .collect();
    let controls: Vec<usize> = clause.literals().iter().map(|l| l.var() - 1).collect();
    let mut gates = flips.clone();
    gates.push(Gate::X(ancilla));
    gates.push(Gate::Mcx(controls, ancilla));
    gates.extend(flips);
    Ok(gates)
}

fn oracle_gates(cnf: &Cnf) -> Result<Vec<Gate>, OracleError> {
    let (n, m) = (cnf.num_vars(), cnf.num_clauses());
    if m == 0 {
        return Err(OracleError::EmptyFormula);
    }
    let width = n + m + 1;
    let target = n + m;
    let fragments = cnf
        .clauses()
        .iter()
        .enumerate()
        .map(|(j, c)| build_clause_fragment(c, j, n, width))
        .collect::<Result<Vec<_>, _>>()?;

    let mut gates = vec![Gate::X(target), Gate::H(target)];
    gates.extend(fragments.iter().flatten().cloned());
    gates.push(Gate::Mcx((n..n + m).collect(), target));
    // every gate is self-inverse, so reversing the list uncomputes
    gates.extend(fragments.iter().rev().flat_map(|f| f.iter().rev()).cloned());
    gates.push(Gate::H(target));
    gates.push(Gate::X(target));
    Ok(gates)
}

/// Phase oracle `|x>|0..0> -> (-1)^f(x) |x>|0..0>` of width `n + m + 1`.
pub fn build_oracle(cnf: &Cnf) -> Result<Circuit, OracleError> {
    let gates = oracle_gates(cnf)?;
    let registers = Registers::oracle(cnf.num_vars(), cnf.num_clauses());
    Ok(Circuit::with_gates(
        cnf.num_vars() + cnf.num_clauses() + 1,
        registers,
        gates,
    )?)
}

/// Reflection about the uniform superposition of qubits `0..n`, up to a
/// global phase of -1.
pub fn build_diffusion(num_vars: usize) -> Vec<Gate> {
    let mut gates: Vec<Gate> = (0..num_vars).map(Gate::H).collect();
    gates.extend((0..num_vars).map(Gate::X));
    match num_vars {
        0 => {}
        1 => gates.push(Gate::Z(0)),
        n => gates.push(Gate::Mcz((0..n - 1).collect(), n - 1)),
    }
    gates.extend((0..num_vars).map(Gate::X));
    gates.extend((0..num_vars).map(Gate::H));
    gates
}

/// Hadamard layer on the variable qubits followed by `k` oracle/diffusion
/// rounds.
pub fn build_grover(
    cnf: &Cnf,
    num_models: &BigUint,
    iterations: Iterations,
) -> Result<(Circuit, GroverPlan), OracleError> {
    let plan = plan(cnf.num_vars(), num_models)?;
    let k = match iterations {
        Iterations::Fixed(k) => k,
        Iterations::Auto => plan
            .k_best_usize()
            .ok_or_else(|| OracleError::TooManyIterations(plan.k_best.clone()))?,
    };
    Ok((build_grover_rounds(cnf, k)?, plan))
}

/// Hadamard layer plus `rounds` oracle/diffusion rounds, without consulting
/// the model count.
pub fn build_grover_rounds(cnf: &Cnf, rounds: usize) -> Result<Circuit, OracleError> {
    let (n, m) = (cnf.num_vars(), cnf.num_clauses());
    let mut circuit = Circuit::new(n + m + 1, Registers::oracle(n, m))?;
    circuit.extend((0..n).map(Gate::H))?;
    if rounds > 0 {
        let mut round = oracle_gates(cnf)?;
        round.extend(build_diffusion(n));
        for _ in 0..rounds {
            circuit.extend(round.iter().cloned())?;
        }
    }
    Ok(circuit)
}

/// Rounds in a Grover circuit built by [`build_grover`], counted by the
/// `X` on the target that opens each oracle.
pub fn count_rounds(circuit: &Circuit) -> usize {
    let Some(target) = circuit.registers().target else {
        return 0;
    };
    let mut rounds = 0;
    let gates = circuit.gates();
    for w in gates.windows(2) {
        if w[0] == Gate::X(target) && w[1] == Gate::H(target) {
            rounds += 1;
        }
    }
    rounds
}
