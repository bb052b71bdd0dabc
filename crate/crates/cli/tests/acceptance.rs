//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_complex::Complex64;

use qgs_core::circuit::total_depth;
use qgs_core::cnf::{count_models, enumerate_models, parse_dimacs, Cnf, DEFAULT_COUNT_BUDGET};
use qgs_core::fixtures::{random_cnf, CAR_DIMACS, CAR_FM, CAR_MODELS};
use qgs_core::model::{parse_feature_model, to_cnf};
use qgs_core::oracle::{analytic_success, build_grover_rounds, build_oracle, plan};
use qgs_core::rng::Xoshiro256;
use qgs_core::sampler::{analyze_one, sample, uniformity_test, SampleOptions};
use qgs_core::sim::{run_fast_backend, run_gate_backend, success_probability, FastGrover, Statevector, DEFAULT_GATE_CAP};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, format!("took {spent:.2?}, limit {limit:?}"))
}

fn car_cnf() -> Cnf {
    parse_dimacs(CAR_DIMACS).unwrap()
}

/// Random formulas whose oracle needs at most 16 qubits.
fn oracle_corpus() -> Vec<Cnf> {
    let mut rng = Xoshiro256::from_seed(0xacce);
    (0..30)
        .map(|_| {
            let n = 2 + (rng.next_u64() % 6) as usize;
            let m = 1 + (rng.next_u64() % (14 - n as u64)) as usize;
            let width = 1 + (rng.next_u64() % 3) as usize;
            random_cnf(&mut rng, n, m, width)
        })
        .collect()
}

fn car_fidelity() -> Result<String, String> {
    let start = Instant::now();
    let fm = parse_feature_model(CAR_FM).map_err(|e| e.to_string())?;
    let (encoded, _) = to_cnf(&fm).map_err(|e| e.to_string())?;
    let fixture = car_cnf();
    let m_encoded = count_models(&encoded).map_err(|e| e.to_string())?;
    let m_fixture = count_models(&fixture).map_err(|e| e.to_string())?;
    ensure(m_encoded == BigUint::from(18u8), format!("encoded model count {m_encoded}"))?;
    ensure(m_fixture == BigUint::from(18u8), format!("fixture model count {m_fixture}"))?;
    let pct = analyze_one("car", &fixture, DEFAULT_COUNT_BUDGET)
        .pct_valid
        .ok_or("pct_valid missing")?;
    ensure(
        format!("{pct:.3}") == "1.758" && format!("{pct:.2}") == "1.76",
        format!("pct_valid {pct}"),
    )?;
    let width = build_oracle(&fixture).map_err(|e| e.to_string())?.width();
    ensure(width == 19, format!("fixture oracle width {width}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("M = 18 for both encodings, pct_valid = {pct:.3}%, width = {width}"))
}

fn k_best_reproduction() -> Result<String, String> {
    let car = plan(10, &BigUint::from(18u8)).map_err(|e| e.to_string())?;
    let sandwich = plan(19, &BigUint::from(2810u32)).map_err(|e| e.to_string())?;
    ensure(car.k_best == BigUint::from(5u8), format!("car k_best {}", car.k_best))?;
    ensure(sandwich.k_best == BigUint::from(10u8), format!("n=19 k_best {}", sandwich.k_best))?;
    Ok("k_best(10, 18) = 5, k_best(19, 2810) = 10".into())
}

fn total_depth_formula() -> Result<String, String> {
    let d = total_depth(162, 5).map_err(|e| e.to_string())?;
    ensure(d == 806, format!("total_depth(162, 5) = {d}"))?;
    Ok("total_depth(162, 5) = 806".into())
}

fn exact_grover() -> Result<String, String> {
    let cnf = Cnf::new(2, [vec![1], vec![2]]).unwrap();
    let fast = run_fast_backend(&cnf, 1).map_err(|e| e.to_string())?;
    let circuit = build_grover_rounds(&cnf, 1).map_err(|e| e.to_string())?;
    let gate = run_gate_backend(&circuit, DEFAULT_GATE_CAP).map_err(|e| e.to_string())?;
    let p_fast = fast.probability(0b11);
    let p_gate = gate.probability(0b11);
    ensure((p_fast - 1.0).abs() <= 1e-12, format!("fast P(|11>) = {p_fast}"))?;
    ensure((p_gate - 1.0).abs() <= 1e-12, format!("gate P(|11>) = {p_gate}"))?;
    Ok(format!("P(|11>) fast = {p_fast:.15}, gate = {p_gate:.15}"))
}

fn oracle_exhaustive() -> Result<String, String> {
    let start = Instant::now();
    let corpus = oracle_corpus();
    let mut states = 0;
    for (i, cnf) in corpus.iter().enumerate() {
        let oracle = build_oracle(cnf).map_err(|e| e.to_string())?;
        ensure(oracle.width() <= 16, format!("formula {i} width {}", oracle.width()))?;
        let models = enumerate_models(cnf).unwrap();
        for x in 0..1usize << cnf.num_vars() {
            let mut sv = Statevector::basis(oracle.width(), x);
            sv.apply_circuit(&oracle);
            let sign = if models.binary_search(&(x as u64)).is_ok() { -1.0 } else { 1.0 };
            for (j, a) in sv.amplitudes().iter().enumerate() {
                let want = if j == x { sign } else { 0.0 };
                ensure(
                    (a - Complex64::new(want, 0.0)).norm() <= 1e-10,
                    format!("formula {i}, input {x}: amplitude {j} = {a}"),
                )?;
            }
            states += 1;
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("{} formulas, {states} basis states", corpus.len()))
}

fn backend_equivalence() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let corpus = oracle_corpus();
    for cnf in &corpus {
        let n = cnf.num_vars();
        for k in 0..=2 {
            let fast = run_fast_backend(cnf, k).map_err(|e| e.to_string())?;
            let circuit = build_grover_rounds(cnf, k).map_err(|e| e.to_string())?;
            let gate = run_gate_backend(&circuit, DEFAULT_GATE_CAP).map_err(|e| e.to_string())?;
            let low = gate
                .restrict_low(n, 1e-18)
                .ok_or("gate backend left ancillas entangled")?;
            // fix the global phase on the largest fast amplitude
            let (pivot, _) = fast
                .amplitudes()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            let phase = low.amplitudes()[pivot] / fast.amplitudes()[pivot];
            let phase = phase / phase.norm();
            for (g, f) in low.amplitudes().iter().zip(fast.amplitudes()) {
                worst = worst.max((g - f * phase).norm());
            }
        }
    }
    ensure(worst < 1e-9, format!("max amplitude difference {worst:e}"))?;
    Ok(format!("{} formulas x k in {{0,1,2}}, max difference {worst:.1e}", corpus.len()))
}

fn success_probability_check() -> Result<String, String> {
    let car = car_cnf();
    let models = enumerate_models(&car).unwrap();
    let sv = run_fast_backend(&car, 5).map_err(|e| e.to_string())?;
    let p = success_probability(&sv, &models);
    let analytic = analytic_success(10, &BigUint::from(18u8), 5).unwrap();
    ensure((p - 0.9884).abs() <= 1e-4, format!("simulated success {p}"))?;
    ensure((p - analytic).abs() <= 1e-12, format!("simulated {p} vs analytic {analytic}"))?;
    let mut inside = 0;
    for seed in 0..20 {
        let opts = SampleOptions {
            shots: 10_000,
            seed,
            reject: false,
            ..SampleOptions::default()
        };
        let report = sample(&car, &opts).map_err(|e| e.to_string())?;
        let f = report.valid_fraction();
        if (0.978..=0.998).contains(&f) {
            inside += 1;
        }
    }
    ensure(inside >= 19, format!("only {inside}/20 seeds inside [0.978, 0.998]"))?;
    Ok(format!("success = {p:.6}, {inside}/20 seeds inside the 4-sigma band"))
}

fn uniformity() -> Result<String, String> {
    let car = car_cnf();
    let mut g = FastGrover::new(&car).map_err(|e| e.to_string())?;
    for round in 1..=8 {
        g.step();
        let mut reps = [None, None];
        for (x, &a) in g.amplitudes().iter().enumerate() {
            let slot = &mut reps[g.is_marked(x) as usize];
            match *slot {
                None => *slot = Some(a),
                Some(r) => ensure(r == a, format!("class broken at index {x}, round {round}"))?,
            }
        }
    }

    let mut passes = 0;
    for seed in 0..20 {
        let opts = SampleOptions {
            shots: 20_000,
            seed,
            reject: true,
            ..SampleOptions::default()
        };
        let report = sample(&car, &opts).map_err(|e| e.to_string())?;
        if report.uniformity().map_err(|e| e.to_string())?.p_value > 0.01 {
            passes += 1;
        }
    }
    ensure(passes >= 18, format!("only {passes}/20 seeds gave p > 0.01"))?;

    // one model drawn with double weight, same sample size
    let models = enumerate_models(&car).unwrap();
    let mut rng = Xoshiro256::from_seed(1);
    let mut counts = BTreeMap::new();
    let slots = models.len() as u64 + 1;
    for _ in 0..20_000 {
        let r = (rng.next_u64() % slots) as usize;
        let x = models[r.min(models.len() - 1)];
        *counts.entry(x).or_insert(0u64) += 1;
    }
    let biased = uniformity_test(&counts, CAR_MODELS).map_err(|e| e.to_string())?;
    ensure(biased.p_value < 0.01, format!("biased generator p = {}", biased.p_value))?;
    Ok(format!(
        "classes exact for 8 rounds, {passes}/20 seeds p > 0.01, biased p = {:.1e}",
        biased.p_value
    ))
}

fn counter_correctness() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = Xoshiro256::from_seed(0xc0);
    for i in 0..50 {
        let n = 3 + (rng.next_u64() % 14) as usize;
        let m = 1 + (rng.next_u64() % (5 * n as u64)) as usize;
        let cnf = random_cnf(&mut rng, n, m, 3);
        let raw = cnf.to_raw();
        let brute = (0..1u64 << n)
            .filter(|x| {
                raw.iter()
                    .all(|c| c.iter().any(|&l| ((x >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0)))
            })
            .count();
        let dpll = count_models(&cnf).map_err(|e| e.to_string())?;
        ensure(dpll == BigUint::from(brute), format!("instance {i}: {dpll} vs {brute}"))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("50 random 3-CNFs in {:.2?}", start.elapsed()))
}

fn width_law() -> Result<String, String> {
    let mut checked = 0;
    let mut formulas = oracle_corpus();
    formulas.push(car_cnf());
    let (encoded, _) = to_cnf(&parse_feature_model(CAR_FM).unwrap()).unwrap();
    formulas.push(encoded.clone());
    for cnf in &formulas {
        let expected = 1 + cnf.num_vars() + cnf.num_clauses();
        let oracle = build_oracle(cnf).map_err(|e| e.to_string())?;
        let grover = build_grover_rounds(cnf, 2).map_err(|e| e.to_string())?;
        ensure(oracle.width() == expected && grover.width() == expected, "width law violated")?;
        checked += 1;
    }
    ensure(encoded.num_clauses() == 17, format!("encoded car has {} clauses", encoded.num_clauses()))?;
    let width = build_oracle(&encoded).unwrap().width();
    ensure(width == 28, format!("17-clause car width {width}"))?;
    Ok(format!("{checked} oracles, 17-clause car width = 1 + 10 + 17 = {width}"))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("car.dimacs");
    std::fs::write(&input, CAR_DIMACS).map_err(|e| e.to_string())?;
    let run = |threads: &str, backend: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_qgs"))
            .args(["sample", "--shots", "10000", "--seed", "7", "--reject", "--distinct"])
            .args(["--format", "json", "--backend", backend])
            .arg(&input)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
        Ok(out.stdout)
    };
    let mut variants = 0;
    for backend in ["fast", "gate"] {
        let reference = run("1", backend)?;
        for threads in ["1", "2", "8"] {
            ensure(run(threads, backend)? == reference, format!("{backend} backend differs with {threads} threads"))?;
            variants += 1;
        }
    }
    Ok(format!("{variants} runs byte-identical across 1/2/8 threads and repeats"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("car model fidelity", car_fidelity),
        ("k_best reproduction", k_best_reproduction),
        ("total-depth formula", total_depth_formula),
        ("exact Grover case", exact_grover),
        ("oracle exhaustive correctness", oracle_exhaustive),
        ("backend equivalence", backend_equivalence),
        ("success probability", success_probability_check),
        ("uniformity", uniformity),
        ("counter correctness", counter_correctness),
        ("width law", width_law),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
