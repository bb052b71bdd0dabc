//! Statevector execution and measurement.
//!
//! Two backends share the [`Statevector`] type. The gate backend applies a
//! [`Circuit`] gate by gate over all `2^width` amplitudes. The fast backend
//! exploits that the phase oracle is diagonal in the variable basis and the
//! ancillas return to zero, so a Grover run needs only the `2^n` variable
//! amplitudes: negate models, then reflect about the mean.
//!
//! Amplitude index bit `i` is qubit `i`. Kernels split work across threads
//! only along disjoint amplitude ranges, and each amplitude is updated by the
//! same arithmetic regardless of the split, so results do not depend on the
//! thread count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::cnf::Cnf;
use crate::rng::Xoshiro256;

/// Default qubit cap of the gate backend (2^26 amplitudes, 1 GiB).
pub const DEFAULT_GATE_CAP: usize = 26;

/// Largest variable count of the fast backend.
pub const MAX_FAST_VARS: usize = 24;

/// Block size of the deterministic mean reduction.
pub const REDUCTION_BLOCK: usize = 4096;

const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("circuit width {width} exceeds the gate-backend cap of {cap} qubits")]
    WidthExceeded { width: usize, cap: usize },
    #[error("{num_vars} variables exceed the fast-backend limit of {limit}")]
    TooManyVariables { num_vars: usize, limit: usize },
    #[error("invalid statevector: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            num_qubits,
            amplitudes,
        }
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut sv = Self::zero(num_qubits);
        sv.amplitudes.swap(0, index);
        sv
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1
    /// within 1e-9.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        if !amplitudes.len().is_power_of_two() {
            return Err(SimError::InvalidState(format!(
                "length {} is not a power of two",
                amplitudes.len()
            )));
        }
        let sv = Self {
            num_qubits: amplitudes.len().trailing_zeros() as usize,
            amplitudes,
        };
        let norm = sv.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidState(format!("norm {norm} is not 1")));
        }
        Ok(sv)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// The state of qubits `0..num_low`, provided every other qubit is `|0>`.
    ///
    /// Returns `None` when more than `tol` probability sits outside that
    /// subspace.
    pub fn restrict_low(&self, num_low: usize, tol: f64) -> Option<Statevector> {
        let size = 1usize << num_low;
        let leaked: f64 = self.amplitudes[size..].iter().map(|a| a.norm_sqr()).sum();
        (leaked <= tol).then(|| Statevector {
            num_qubits: num_low,
            amplitudes: self.amplitudes[..size].to_vec(),
        })
    }

    /// Applies every gate of `circuit`; the widths must agree.
    pub fn apply_circuit(&mut self, circuit: &Circuit) {
        assert_eq!(circuit.width(), self.num_qubits, "circuit width mismatch");
        for g in circuit.gates() {
            self.apply(g);
        }
    }

    pub fn apply(&mut self, gate: &Gate) {
        let amps = &mut self.amplitudes;
        match gate {
            Gate::X(t) => for_each_pair(amps, *t, 0, std::mem::swap),
            Gate::H(t) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for_each_pair(amps, *t, 0, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * s;
                    *b = (x - y) * s;
                })
            }
            Gate::Z(t) => for_each_pair(amps, *t, 0, |_, b| *b = -*b),
            Gate::Cx(c, t) => for_each_pair(amps, *t, 1 << c, std::mem::swap),
            Gate::Mcx(cs, t) => {
                let mask = cs.iter().fold(0usize, |m, c| m | 1 << c);
                for_each_pair(amps, *t, mask, std::mem::swap)
            }
            Gate::Mcz(cs, t) => {
                // symmetric in all its qubits
                let mask = cs.iter().fold(1usize << t, |m, c| m | 1 << c);
                let flip = |(i, a): (usize, &mut Complex64)| {
                    if i & mask == mask {
                        *a = -*a;
                    }
                };
                if amps.len() >= PAR_THRESHOLD {
                    amps.par_iter_mut().enumerate().for_each(flip);
                } else {
                    amps.iter_mut().enumerate().for_each(flip);
                }
            }
        }
    }
}

/// Runs `f(lo, hi)` on every amplitude pair differing only in bit `target`
/// whose index carries all bits of `control_mask`.
fn for_each_pair<F>(amps: &mut [Complex64], target: usize, control_mask: usize, f: F)
where
    F: Fn(&mut Complex64, &mut Complex64) + Sync,
{
    let stride = 1usize << target;
    let block = |(chunk_idx, chunk): (usize, &mut [Complex64])| {
        let base = chunk_idx * 2 * stride;
        let (lo, hi) = chunk.split_at_mut(stride);
        for (i, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            if (base + i) & control_mask == control_mask {
                f(a, b);
            }
        }
    };
    if amps.len() >= PAR_THRESHOLD && amps.len() / (2 * stride) > 1 {
        amps.par_chunks_mut(2 * stride)
            .enumerate()
            .with_min_len((PAR_THRESHOLD / (2 * stride)).max(1))
            .for_each(block);
    } else if amps.len() >= PAR_THRESHOLD {
        // one chunk: split the pair range instead
        let (lo, hi) = amps.split_at_mut(stride);
        lo.par_iter_mut()
            .zip(hi.par_iter_mut())
            .enumerate()
            .for_each(|(i, (a, b))| {
                if i & control_mask == control_mask {
                    f(a, b);
                }
            });
    } else {
        amps.chunks_mut(2 * stride).enumerate().for_each(block);
    }
}

/// Applies `circuit` to `|0...0>`.
pub fn run_gate_backend(circuit: &Circuit, cap: usize) -> Result<Statevector, SimError> {
    if circuit.width() > cap {
        return Err(SimError::WidthExceeded {
            width: circuit.width(),
            cap,
        });
    }
    let mut sv = Statevector::zero(circuit.width());
    sv.apply_circuit(circuit);
    Ok(sv)
}

/// Grover iteration restricted to the variable register.
#[derive(Debug, Clone)]
pub struct FastGrover {
    marked: Vec<bool>,
    amplitudes: Vec<f64>,
    rounds: usize,
}

impl FastGrover {
    /// Uniform superposition over `2^n` assignments.
    pub fn new(cnf: &Cnf) -> Result<Self, SimError> {
        let n = cnf.num_vars();
        if n > MAX_FAST_VARS {
            return Err(SimError::TooManyVariables {
                num_vars: n,
                limit: MAX_FAST_VARS,
            });
        }
        let eval = cnf.index_evaluator().expect("at most 24 variables");
        let size = 1usize << n;
        let marked: Vec<bool> = (0..size)
            .into_par_iter()
            .with_min_len(REDUCTION_BLOCK)
            .map(|x| eval.is_model(x as u64))
            .collect();
        let amp = 1.0 / (size as f64).sqrt();
        Ok(Self {
            marked,
            amplitudes: vec![amp; size],
            rounds: 0,
        })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn is_marked(&self, index: usize) -> bool {
        self.marked[index]
    }

    /// One oracle + diffusion round.
    pub fn step(&mut self) {
        self.amplitudes
            .par_iter_mut()
            .with_min_len(REDUCTION_BLOCK)
            .zip(self.marked.par_iter())
            .for_each(|(a, &m)| {
                if m {
                    *a = -*a;
                }
            });
        let twice_mean = 2.0 * deterministic_sum(&self.amplitudes) / self.amplitudes.len() as f64;
        self.amplitudes
            .par_iter_mut()
            .with_min_len(REDUCTION_BLOCK)
            .for_each(|a| *a = twice_mean - *a);
        self.rounds += 1;
    }

    pub fn into_statevector(self) -> Statevector {
        let num_qubits = self.amplitudes.len().trailing_zeros() as usize;
        Statevector {
            num_qubits,
            amplitudes: self
                .amplitudes
                .into_iter()
                .map(|a| Complex64::new(a, 0.0))
                .collect(),
        }
    }
}

/// Sums blocks of [`REDUCTION_BLOCK`] sequentially, then combines the block
/// sums pairwise. The grouping is fixed, so the result is bitwise stable.
pub fn deterministic_sum(values: &[f64]) -> f64 {
    fn pairwise(xs: &[f64]) -> f64 {
        match xs.len() {
            0 => 0.0,
            1 => xs[0],
            n => pairwise(&xs[..n / 2]) + pairwise(&xs[n / 2..]),
        }
    }
    let block_sums: Vec<f64> = values
        .par_chunks(REDUCTION_BLOCK)
        .map(|b| b.iter().sum())
        .collect();
    pairwise(&block_sums)
}

/// Runs `rounds` Grover iterations on the variable register only.
pub fn run_fast_backend(cnf: &Cnf, rounds: usize) -> Result<Statevector, SimError> {
    let mut g = FastGrover::new(cnf)?;
    for _ in 0..rounds {
        g.step();
    }
    Ok(g.into_statevector())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementCounts {
    pub counts: BTreeMap<u64, u64>,
    pub shots: u64,
    pub seed: u64,
}

/// Draws `shots` basis indices from `|a_x|^2`, in draw order.
///
/// Each draw maps `u` in `[0, 1)` to the first index whose running
/// probability exceeds `u * total`.
pub fn sample_outcomes(sv: &Statevector, shots: u64, seed: u64) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(sv.amplitudes.len());
    let mut acc = 0.0f64;
    for a in &sv.amplitudes {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = sv
        .amplitudes
        .iter()
        .rposition(|a| a.norm_sqr() > 0.0)
        .unwrap_or(0);
    let mut rng = Xoshiro256::from_seed(seed);
    (0..shots)
        .map(|_| {
            let target = rng.next_f64() * total;
            cdf.partition_point(|&c| c <= target).min(last_nonzero) as u64
        })
        .collect()
}

pub fn measure(sv: &Statevector, shots: u64, seed: u64) -> MeasurementCounts {
    let mut counts = BTreeMap::new();
    for x in sample_outcomes(sv, shots, seed) {
        *counts.entry(x).or_insert(0) += 1;
    }
    MeasurementCounts {
        counts,
        shots,
        seed,
    }
}

/// Total probability of the given basis indices.
pub fn success_probability(sv: &Statevector, models: &[u64]) -> f64 {
    models.iter().map(|&x| sv.probability(x as usize)).sum()
}
