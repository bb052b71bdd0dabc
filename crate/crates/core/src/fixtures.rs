//! Canonical inputs used by tests, benches and the CLI examples.

use crate::cnf::Cnf;
use crate::rng::Xoshiro256;

/// The car product line in the textual feature-model format.
pub const CAR_FM: &str = "\
car
  m body
  m engine
    or
      electric
      gas
  m gear
    alt
      manual
      automatic
  o power_locks
    o keyless_entry
constraints:
  keyless_entry => power_locks
";

/// Minimal 8-clause CNF of the car model, using the depth-first variable
/// numbering of [`CAR_FM`]: car=1 body=2 engine=3 electric=4 gas=5 gear=6
/// manual=7 automatic=8 power_locks=9 keyless_entry=10.
pub const CAR_DIMACS: &str = "\
c car product line, minimal CNF
p cnf 10 8
1 0
2 0
3 0
6 0
-10 9 0
4 5 0
7 8 0
-7 -8 0
";

/// Number of valid car configurations.
pub const CAR_MODELS: u64 = 18;

/// Random CNF with `num_clauses` clauses of `min(width, num_vars)` distinct
/// variables each and random polarities.
pub fn random_cnf(rng: &mut Xoshiro256, num_vars: usize, num_clauses: usize, width: usize) -> Cnf {
    let width = width.min(num_vars);
    let clauses: Vec<Vec<i32>> = (0..num_clauses)
        .map(|_| {
            let mut vars: Vec<i32> = (1..=num_vars as i32).collect();
            for i in 0..width {
                let j = i + (rng.next_u64() % (num_vars - i) as u64) as usize;
                vars.swap(i, j);
            }
            vars[..width]
                .iter()
                .map(|&v| if rng.next_u64() & 1 == 1 { v } else { -v })
                .collect()
        })
        .collect();
    Cnf::new(num_vars, clauses).expect("distinct variables per clause")
}
