//! End-to-end sampling, uniformity testing and resource analysis.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::cnf::{count_models_with_budget, Cnf, CnfError, DEFAULT_COUNT_BUDGET};
use crate::oracle::{self, Iterations, OracleError};
use crate::sim::{self, FastGrover, SimError, DEFAULT_GATE_CAP};
use crate::stats::chi_square_sf;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("chi-square needs at least two models, found {0}")]
    DegenerateTest(u64),
    #[error("no accepted samples to test")]
    EmptySample,
    #[error("at least one shot is required")]
    NoShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Variable-register simulation of the diagonal oracle.
    #[default]
    Fast,
    /// Full gate-level simulation of the Grover circuit.
    Gate,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Fast => "fast",
            Backend::Gate => "gate",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Backend::Fast),
            "gate" => Ok(Backend::Gate),
            other => Err(format!("unknown backend `{other}` (expected fast or gate)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub shots: u64,
    pub seed: u64,
    pub backend: Backend,
    pub iterations: Iterations,
    /// Drop outcomes that violate the formula.
    pub reject: bool,
    /// Also report accepted outcomes deduplicated in first-seen order.
    pub distinct: bool,
    pub gate_cap: usize,
    pub count_budget: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            shots: 1000,
            seed: 0,
            backend: Backend::Fast,
            iterations: Iterations::Auto,
            reject: true,
            distinct: false,
            gate_cap: DEFAULT_GATE_CAP,
            count_budget: DEFAULT_COUNT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleReport {
    pub model: String,
    pub shots: u64,
    pub seed: u64,
    pub backend: Backend,
    pub k: usize,
    pub num_models: u64,
    pub reject: bool,
    pub valid_counts: BTreeMap<u64, u64>,
    pub invalid_counts: BTreeMap<u64, u64>,
    pub rejected: u64,
    /// Every measured assignment index, in draw order.
    pub outcomes: Vec<u64>,
    /// Accepted outcomes without repeats, when requested.
    pub distinct: Option<Vec<u64>>,
}

impl SampleReport {
    pub fn valid_shots(&self) -> u64 {
        self.valid_counts.values().sum()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_shots() as f64 / self.shots as f64
    }

    /// The returned sample: valid outcomes only when rejecting, otherwise all.
    pub fn accepted(&self) -> impl Iterator<Item = u64> + '_ {
        self.outcomes.iter().copied().filter(move |x| {
            !self.reject || self.valid_counts.contains_key(x)
        })
    }

    pub fn uniformity(&self) -> Result<UniformityResult, SamplerError> {
        uniformity_test(&self.valid_counts, self.num_models)
    }

    /// Report JSON; `chi2`/`p_value` are null when the test is undefined.
    pub fn to_json(&self) -> String {
        let counts = |m: &BTreeMap<u64, u64>| {
            Value::Object(m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<Map<_, _>>())
        };
        let test = self.uniformity().ok();
        let mut obj = Map::new();
        obj.insert("model".into(), json!(self.model));
        obj.insert("shots".into(), json!(self.shots));
        obj.insert("k".into(), json!(self.k));
        obj.insert("seed".into(), json!(self.seed));
        obj.insert("backend".into(), json!(self.backend.to_string()));
        obj.insert("models".into(), json!(self.num_models));
        obj.insert("valid".into(), counts(&self.valid_counts));
        obj.insert("invalid".into(), counts(&self.invalid_counts));
        obj.insert("rejected".into(), json!(self.rejected));
        obj.insert("chi2".into(), json!(test.as_ref().map(|t| t.chi2)));
        obj.insert("p_value".into(), json!(test.as_ref().map(|t| t.p_value)));
        if let Some(d) = &self.distinct {
            obj.insert("distinct".into(), json!(d));
        }
        Value::Object(obj).to_string()
    }

    pub fn to_human(&self) -> String {
        let mut out = format!(
            "model {}: {} shots, k = {}, seed {}, {} backend\n",
            if self.model.is_empty() { "-" } else { &self.model },
            self.shots,
            self.k,
            self.seed,
            self.backend
        );
        out += &format!(
            "valid {} ({:.4}), invalid {}, rejected {}, {} of {} models seen\n",
            self.valid_shots(),
            self.valid_fraction(),
            self.shots - self.valid_shots(),
            self.rejected,
            self.valid_counts.len(),
            self.num_models
        );
        if let Ok(t) = self.uniformity() {
            out += &format!("{t}\n");
        }
        if let Some(d) = &self.distinct {
            out += &format!("distinct: {}\n", d.len());
        }
        out
    }
}

/// Draws `shots` measurements from a Grover run over `cnf`.
pub fn sample(cnf: &Cnf, opts: &SampleOptions) -> Result<SampleReport, SamplerError> {
    if opts.shots == 0 {
        return Err(SamplerError::NoShots);
    }
    let n = cnf.num_vars();
    let num_models = count_models_with_budget(cnf, opts.count_budget)?;
    let plan = oracle::plan(n, &num_models)?;
    let k = match opts.iterations {
        Iterations::Fixed(k) => k,
        Iterations::Auto => plan
            .k_best_usize()
            .ok_or_else(|| OracleError::TooManyIterations(plan.k_best.clone()))?,
    };

    let outcomes: Vec<u64> = match opts.backend {
        Backend::Fast => {
            let mut g = FastGrover::new(cnf)?;
            for _ in 0..k {
                g.step();
            }
            sim::sample_outcomes(&g.into_statevector(), opts.shots, opts.seed)
        }
        Backend::Gate => {
            let width = n + cnf.num_clauses() + 1;
            if width > opts.gate_cap {
                return Err(SimError::WidthExceeded {
                    width,
                    cap: opts.gate_cap,
                }
                .into());
            }
            let circuit = oracle::build_grover_rounds(cnf, k)?;
            let sv = sim::run_gate_backend(&circuit, opts.gate_cap)?;
            let mask = (1u64 << n) - 1;
            sim::sample_outcomes(&sv, opts.shots, opts.seed)
                .into_iter()
                .map(|x| x & mask)
                .collect()
        }
    };

    let eval = cnf.index_evaluator().expect("simulated formulas have at most 24 variables");
    let mut valid_counts = BTreeMap::new();
    let mut invalid_counts = BTreeMap::new();
    for &x in &outcomes {
        let bucket = if eval.is_model(x) {
            &mut valid_counts
        } else {
            &mut invalid_counts
        };
        *bucket.entry(x).or_insert(0u64) += 1;
    }
    let rejected = if opts.reject {
        invalid_counts.values().sum()
    } else {
        0
    };
    let mut report = SampleReport {
        model: String::new(),
        shots: opts.shots,
        seed: opts.seed,
        backend: opts.backend,
        k,
        num_models: num_models.to_u64().expect("at most 2^24 models"),
        reject: opts.reject,
        valid_counts,
        invalid_counts,
        rejected,
        outcomes,
        distinct: None,
    };
    if opts.distinct {
        let mut seen = HashSet::new();
        let d = report.accepted().filter(|x| seen.insert(*x)).collect();
        report.distinct = Some(d);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityResult {
    pub chi2: f64,
    pub dof: u64,
    pub p_value: f64,
    pub shots_used: u64,
    /// Expected count per model falls below 5.
    pub underpowered: bool,
}

impl fmt::Display for UniformityResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "chi2 = {:.4}, dof = {}, p = {:.6} over {} accepted shots",
            self.chi2, self.dof, self.p_value, self.shots_used
        )?;
        if self.underpowered {
            write!(f, " (warning: fewer than 5 expected per model)")?;
        }
        Ok(())
    }
}

/// Pearson chi-square of the valid counts against the uniform distribution
/// over all `num_models` models; unseen models count as zero.
pub fn uniformity_test(
    valid_counts: &BTreeMap<u64, u64>,
    num_models: u64,
) -> Result<UniformityResult, SamplerError> {
    if num_models < 2 {
        return Err(SamplerError::DegenerateTest(num_models));
    }
    let total: u64 = valid_counts.values().sum();
    if total == 0 {
        return Err(SamplerError::EmptySample);
    }
    let expected = total as f64 / num_models as f64;
    let unseen = num_models.saturating_sub(valid_counts.len() as u64);
    let chi2 = valid_counts
        .values()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>()
        + unseen as f64 * expected;
    let dof = num_models - 1;
    Ok(UniformityResult {
        chi2,
        dof,
        p_value: chi_square_sf(chi2, dof as f64),
        shots_used: total,
        underpowered: expected < 5.0,
    })
}

/// One row of the resource report.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub name: String,
    pub n_features: usize,
    pub n_clauses: usize,
    /// `None` when counting ran out of budget.
    pub models: Option<BigUint>,
    /// Percentage of the `2^n` assignments that are models.
    pub pct_valid: Option<f64>,
    pub k_best: Option<BigUint>,
    pub width: usize,
    pub depth_k1: Option<usize>,
    pub total_depth: Option<BigUint>,
}

pub fn analyze_one(name: &str, cnf: &Cnf, count_budget: u64) -> AnalysisRow {
    let n = cnf.num_vars();
    let m = cnf.num_clauses();
    let models = count_models_with_budget(cnf, count_budget).ok();
    let pct_valid = models
        .as_ref()
        .map(|mc| oracle::fraction_of_space(mc, n) * 100.0);
    let k_best = models
        .as_ref()
        .and_then(|mc| oracle::plan(n, mc).ok())
        .map(|p| p.k_best);
    let depth_k1 = oracle::build_grover_rounds(cnf, 1).ok().map(|c| c.depth());
    let total_depth = match (&k_best, depth_k1) {
        (Some(k), Some(d)) if d >= 1 => Some(k * BigUint::from(d - 1) + 1u8),
        _ => None,
    };
    AnalysisRow {
        name: name.to_string(),
        n_features: n,
        n_clauses: m,
        models,
        pct_valid,
        k_best,
        width: 1 + n + m,
        depth_k1,
        total_depth,
    }
}

/// Rows in input order; inputs are processed in parallel.
pub fn analyze(inputs: &[(String, Cnf)], count_budget: u64) -> Vec<AnalysisRow> {
    inputs
        .par_iter()
        .map(|(name, cnf)| analyze_one(name, cnf, count_budget))
        .collect()
}

pub const CSV_HEADER: &str = "name,features,clauses,models,pct_valid,k_best,width,depth_k1,total_depth";

const NA: &str = "n/a";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| NA.to_string(), T::to_string)
}

fn fmt_pct(p: f64) -> String {
    if p == 0.0 || p >= 1e-4 {
        format!("{p:.4}")
    } else {
        format!("{p:.4e}")
    }
}

/// `d.dde+X` for integers of seven or more digits, exact below.
pub fn fmt_scientific(x: &BigUint) -> String {
    let digits = x.to_string();
    if digits.len() < 7 {
        return digits;
    }
    let mut exp = digits.len() - 1;
    let take = digits.len().min(17);
    let lead: f64 = digits[..take].parse::<f64>().unwrap() / 10f64.powi(take as i32 - 1);
    let mut mantissa = format!("{lead:.2}");
    if mantissa.starts_with("10") {
        mantissa = "1.00".into();
        exp += 1;
    }
    format!("{mantissa}e+{exp:02}")
}

impl AnalysisRow {
    pub fn to_csv(&self) -> String {
        [
            self.name.clone(),
            self.n_features.to_string(),
            self.n_clauses.to_string(),
            opt(&self.models),
            self.pct_valid.map_or_else(|| NA.into(), fmt_pct),
            opt(&self.k_best),
            self.width.to_string(),
            opt(&self.depth_k1),
            opt(&self.total_depth),
        ]
        .join(",")
    }

    /// Big integers are decimal strings so they stay exact.
    pub fn to_json_value(&self) -> Value {
        let big = |v: &Option<BigUint>| v.as_ref().map(|x| x.to_string());
        json!({
            "name": self.name,
            "features": self.n_features,
            "clauses": self.n_clauses,
            "models": big(&self.models),
            "pct_valid": self.pct_valid,
            "k_best": big(&self.k_best),
            "width": self.width,
            "depth_k1": self.depth_k1,
            "total_depth": big(&self.total_depth),
        })
    }
}

pub fn rows_to_csv(rows: &[AnalysisRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out += &r.to_csv();
        out.push('\n');
    }
    out
}

pub fn rows_to_json(rows: &[AnalysisRow]) -> String {
    Value::Array(rows.iter().map(AnalysisRow::to_json_value).collect()).to_string()
}

pub fn rows_to_human(rows: &[AnalysisRow]) -> String {
    let header = [
        "model", "features", "clauses", "models", "% valid", "k_best", "width", "depth k=1",
        "total depth",
    ];
    let sci = |v: &Option<BigUint>| v.as_ref().map_or_else(|| NA.into(), fmt_scientific);
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.n_features.to_string(),
                r.n_clauses.to_string(),
                sci(&r.models),
                r.pct_valid.map_or_else(|| NA.into(), |p| format!("{}%", fmt_pct_short(p))),
                sci(&r.k_best),
                r.width.to_string(),
                opt(&r.depth_k1),
                sci(&r.total_depth),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in &body {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn fmt_pct_short(p: f64) -> String {
    if p == 0.0 || p >= 0.01 {
        format!("{p:.2}")
    } else {
        format!("{p:.2e}")
    }
}

impl AnalysisRow {
    pub fn is_complete(&self) -> bool {
        self.models.as_ref().is_some_and(|m| !m.is_zero()) && self.total_depth.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{enumerate_models, parse_dimacs};
    use crate::fixtures::CAR_DIMACS;
    use crate::model::{parse_feature_model, to_cnf};

    fn car() -> Cnf {
        parse_dimacs(CAR_DIMACS).unwrap()
    }

    #[test]
    fn exact_grover_sampling() {
        let cnf = Cnf::new(2, [vec![1], vec![2]]).unwrap();
        for backend in [Backend::Fast, Backend::Gate] {
            let opts = SampleOptions {
                shots: 500,
                seed: 3,
                backend,
                iterations: Iterations::Fixed(1),
                ..Default::default()
            };
            let r = sample(&cnf, &opts).unwrap();
            assert_eq!(r.valid_counts, BTreeMap::from([(3, 500)]), "{backend}");
            assert_eq!(r.rejected, 0);
        }
    }

    #[test]
    fn unamplified_half_space() {
        let cnf = Cnf::new(3, [vec![1]]).unwrap();
        let opts = SampleOptions {
            shots: 4000,
            seed: 1,
            iterations: Iterations::Fixed(0),
            ..Default::default()
        };
        let r = sample(&cnf, &opts).unwrap();
        assert!((r.valid_fraction() - 0.5).abs() < 0.04, "{}", r.valid_fraction());
        assert_eq!(r.rejected, r.shots - r.valid_shots());
        assert_eq!(r.accepted().count() as u64, r.valid_shots());
        // AUTO on M = N/2 is also zero rounds
        let auto = sample(&cnf, &SampleOptions { iterations: Iterations::Auto, ..opts.clone() }).unwrap();
        assert_eq!(auto.k, 0);
        let keep = sample(&cnf, &SampleOptions { reject: false, ..opts }).unwrap();
        assert_eq!(keep.rejected, 0);
        assert_eq!(keep.accepted().count() as u64, keep.shots);
    }

    #[test]
    fn car_sampling_stays_in_band() {
        let opts = SampleOptions {
            shots: 10_000,
            seed: 7,
            ..Default::default()
        };
        let r = sample(&car(), &opts).unwrap();
        assert_eq!(r.k, 5);
        assert!((0.978..=0.998).contains(&r.valid_fraction()), "{}", r.valid_fraction());
        let models: HashSet<u64> = enumerate_models(&car()).unwrap().into_iter().collect();
        assert!(r.valid_counts.keys().all(|x| models.contains(x)));
        assert!(r.invalid_counts.keys().all(|x| !models.contains(x)));
        assert_eq!(r.valid_shots() + r.invalid_counts.values().sum::<u64>(), r.shots);
    }

    #[test]
    fn sampling_errors() {
        let unsat = Cnf::new(1, [vec![1], vec![-1]]).unwrap();
        assert_eq!(
            sample(&unsat, &SampleOptions::default()),
            Err(SamplerError::Oracle(OracleError::NoSolutions))
        );
        let zero = SampleOptions {
            shots: 0,
            ..Default::default()
        };
        assert_eq!(sample(&car(), &zero), Err(SamplerError::NoShots));
        let capped = SampleOptions {
            backend: Backend::Gate,
            gate_cap: 18,
            ..Default::default()
        };
        assert_eq!(
            sample(&car(), &capped),
            Err(SamplerError::Sim(SimError::WidthExceeded { width: 19, cap: 18 }))
        );
    }

    #[test]
    fn distinct_mode_keeps_first_occurrences() {
        let opts = SampleOptions {
            shots: 300,
            seed: 9,
            distinct: true,
            ..Default::default()
        };
        let r = sample(&car(), &opts).unwrap();
        let d = r.distinct.clone().unwrap();
        assert_eq!(d.len(), r.valid_counts.len());
        let first: Vec<u64> = {
            let mut seen = HashSet::new();
            r.outcomes
                .iter()
                .copied()
                .filter(|x| r.valid_counts.contains_key(x) && seen.insert(*x))
                .collect()
        };
        assert_eq!(d, first);
    }

    #[test]
    fn equal_counts_give_zero_statistic() {
        let counts: BTreeMap<u64, u64> = (0..18).map(|i| (i, 50)).collect();
        let t = uniformity_test(&counts, 18).unwrap();
        assert_eq!(t.chi2, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.dof, 17);
        assert!(!t.underpowered);
    }

    #[test]
    fn unseen_models_count_as_zero() {
        // two of four models observed, 10 each: E = 5
        let counts = BTreeMap::from([(0, 10), (1, 10)]);
        let t = uniformity_test(&counts, 4).unwrap();
        assert!((t.chi2 - 20.0).abs() < 1e-12);
        assert!(uniformity_test(&counts, 1).is_err());
        assert_eq!(uniformity_test(&BTreeMap::new(), 4), Err(SamplerError::EmptySample));
        let thin = uniformity_test(&BTreeMap::from([(0, 3)]), 2).unwrap();
        assert!(thin.underpowered);
    }

    #[test]
    fn analysis_rows() {
        let row = analyze_one("car", &car(), DEFAULT_COUNT_BUDGET);
        assert_eq!(row.models, Some(BigUint::from(18u32)));
        assert_eq!(row.k_best, Some(BigUint::from(5u32)));
        assert_eq!((row.n_features, row.n_clauses, row.width), (10, 8, 19));
        assert!((row.pct_valid.unwrap() - 1.7578125).abs() < 1e-12);
        let d = row.depth_k1.unwrap();
        assert_eq!(row.total_depth, Some(BigUint::from(5 * (d - 1) + 1)));
        assert!(row.to_csv().starts_with("car,10,8,18,1.7578,5,19,"));

        let single = to_cnf(&parse_feature_model("only\n").unwrap()).unwrap().0;
        let row = analyze_one("single", &single, DEFAULT_COUNT_BUDGET);
        assert_eq!(row.models, Some(BigUint::from(1u32)));
        assert_eq!(row.pct_valid, Some(50.0));
        assert_eq!(row.k_best, Some(BigUint::zero()));
        assert_eq!(row.width, 3);
        assert_eq!(row.total_depth, Some(BigUint::from(1u32)));

        let unsat = Cnf::new(1, [vec![1], vec![-1]]).unwrap();
        let row = analyze_one("unsat", &unsat, DEFAULT_COUNT_BUDGET);
        assert_eq!(row.models, Some(BigUint::zero()));
        assert!(row.k_best.is_none());
        assert_eq!(row.to_csv(), format!("unsat,1,2,0,0.0000,n/a,4,{},n/a", row.depth_k1.unwrap()));

        let timeout = analyze_one("slow", &car(), 2);
        assert!(timeout.models.is_none());
        assert!(timeout.to_csv().contains("n/a"));
    }

    #[test]
    fn analysis_output_formats() {
        let rows = analyze(&[("car".into(), car())], DEFAULT_COUNT_BUDGET);
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with(CSV_HEADER));
        let json: Value = serde_json::from_str(&rows_to_json(&rows)).unwrap();
        assert_eq!(json[0]["models"], "18");
        let human = rows_to_human(&rows);
        assert!(human.contains("1.76%"), "{human}");
    }

    #[test]
    fn scientific_formatting() {
        let parse = |s: &str| BigUint::parse_bytes(s.as_bytes(), 10).unwrap();
        assert_eq!(fmt_scientific(&parse("18")), "18");
        assert_eq!(fmt_scientific(&parse("999999")), "999999");
        assert_eq!(fmt_scientific(&parse("11200000")), "1.12e+07");
        assert_eq!(fmt_scientific(&parse("9999999")), "1.00e+07");
        let busybox = parse("206") * BigUint::from(10u8).pow(199);
        assert_eq!(fmt_scientific(&busybox), "2.06e+201");
    }

    #[test]
    fn report_json_is_stable() {
        let opts = SampleOptions {
            shots: 200,
            seed: 42,
            ..Default::default()
        };
        let a = sample(&car(), &opts).unwrap().to_json();
        let b = sample(&car(), &opts).unwrap().to_json();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["shots"], 200);
        assert_eq!(v["k"], 5);
        assert!(v["p_value"].as_f64().unwrap() >= 0.0);
    }
}
