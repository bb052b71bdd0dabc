//! Propositional formulas in conjunctive normal form.
//!
//! Variables are 1-based. An assignment over `n` variables is identified with a
//! basis-state index: bit `i - 1` of the index holds the value of variable `i`,
//! so variable 1 is the least significant bit. The same convention binds
//! variables to qubits in [`crate::oracle`] and [`crate::sim`].

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Largest variable count accepted by [`enumerate_models`].
pub const MAX_ENUMERATION_VARS: usize = 24;

/// Default decision/propagation budget of [`count_models`].
pub const DEFAULT_COUNT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid clause {clause}: {message}")]
    InvalidClause { clause: usize, message: String },
    #[error("assignment has {actual} values but the formula has {expected} variables")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{num_vars} variables exceed the limit of {limit}")]
    TooManyVariables { num_vars: usize, limit: usize },
    #[error("model counting exceeded its budget of {budget} steps")]
    Timeout { budget: u64 },
}

/// A signed, nonzero DIMACS literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal(i32);

impl Literal {
    pub fn new(value: i32) -> Option<Self> {
        (value != 0 && value != i32::MIN).then_some(Self(value))
    }

    /// 1-based variable index.
    pub fn var(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn negated(self) -> Self {
        Self(-self.0)
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    /// Value of the literal under the assignment encoded by `index`.
    #[inline]
    pub fn eval_index(self, index: u64) -> bool {
        let bit = (index >> (self.var() - 1)) & 1 == 1;
        bit == self.is_positive()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A nonempty disjunction of literals without repeats or complementary pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        self.literals
            .iter()
            .any(|lit| assignment.value(lit.var()) == lit.is_positive())
    }
}

/// A CNF formula over variables `1..=num_vars`.
///
/// Clause order is preserved exactly; it fixes the ancilla layout of the
/// oracle circuit. Duplicate clauses are kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cnf {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl Cnf {
    /// Builds a formula from DIMACS-style integer clauses, validating every
    /// clause.
    pub fn new<I, C>(num_vars: usize, clauses: I) -> Result<Self, CnfError>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[i32]>,
    {
        let clauses = clauses
            .into_iter()
            .enumerate()
            .map(|(idx, raw)| make_clause(num_vars, idx, raw.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clauses as signed DIMACS integers.
    pub fn to_raw(&self) -> Vec<Vec<i32>> {
        self.clauses
            .iter()
            .map(|c| c.literals.iter().map(|l| l.0).collect())
            .collect()
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, CnfError> {
        if assignment.len() != self.num_vars {
            return Err(CnfError::LengthMismatch {
                expected: self.num_vars,
                actual: assignment.len(),
            });
        }
        Ok(self.clauses.iter().all(|c| c.is_satisfied_by(assignment)))
    }

    /// Bitmask evaluator for formulas with at most 64 variables.
    pub fn index_evaluator(&self) -> Option<IndexEvaluator> {
        IndexEvaluator::new(self)
    }
}

fn make_clause(num_vars: usize, idx: usize, raw: &[i32]) -> Result<Clause, CnfError> {
    let invalid = |message: String| CnfError::InvalidClause {
        clause: idx + 1,
        message,
    };
    if raw.is_empty() {
        return Err(invalid("empty clause".into()));
    }
    let mut literals: Vec<Literal> = Vec::with_capacity(raw.len());
    for &value in raw {
        let lit = Literal::new(value).ok_or_else(|| invalid(format!("bad literal {value}")))?;
        if lit.var() > num_vars {
            return Err(invalid(format!(
                "literal {value} out of range for {num_vars} variables"
            )));
        }
        if literals.contains(&lit) {
            return Err(invalid(format!("duplicate literal {value}")));
        }
        if literals.contains(&lit.negated()) {
            return Err(invalid(format!("tautology on variable {}", lit.var())));
        }
        literals.push(lit);
    }
    Ok(Clause { literals })
}

/// Truth values for variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Decodes a basis-state index; `num_vars` must be at most 64.
    pub fn from_index(index: u64, num_vars: usize) -> Self {
        assert!(num_vars <= 64, "index encoding holds at most 64 variables");
        Self {
            bits: (0..num_vars).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    /// Builds an assignment from the 1-based variables that are true.
    pub fn from_true_vars(num_vars: usize, true_vars: &[usize]) -> Self {
        let mut bits = vec![false; num_vars];
        for &v in true_vars {
            bits[v - 1] = true;
        }
        Self { bits }
    }

    pub fn to_index(&self) -> Option<u64> {
        (self.bits.len() <= 64).then(|| {
            self.bits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Value of 1-based variable `var`.
    pub fn value(&self, var: usize) -> bool {
        self.bits[var - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Evaluates a formula directly on basis-state indices.
///
/// A clause is satisfied iff `(x & pos) != 0 || (!x & neg) != 0`.
#[derive(Debug, Clone)]
pub struct IndexEvaluator {
    masks: Vec<(u64, u64)>,
}

impl IndexEvaluator {
    fn new(cnf: &Cnf) -> Option<Self> {
        if cnf.num_vars > 64 {
            return None;
        }
        let masks = cnf
            .clauses
            .iter()
            .map(|c| {
                c.literals.iter().fold((0u64, 0u64), |(pos, neg), lit| {
                    let bit = 1u64 << (lit.var() - 1);
                    if lit.is_positive() {
                        (pos | bit, neg)
                    } else {
                        (pos, neg | bit)
                    }
                })
            })
            .collect();
        Some(Self { masks })
    }

    #[inline]
    pub fn is_model(&self, index: u64) -> bool {
        self.masks
            .iter()
            .all(|&(pos, neg)| index & pos != 0 || !index & neg != 0)
    }
}

/// All satisfying assignments as basis-state indices, ascending.
pub fn enumerate_models(cnf: &Cnf) -> Result<Vec<u64>, CnfError> {
    if cnf.num_vars > MAX_ENUMERATION_VARS {
        return Err(CnfError::TooManyVariables {
            num_vars: cnf.num_vars,
            limit: MAX_ENUMERATION_VARS,
        });
    }
    let eval = cnf.index_evaluator().expect("at most 24 variables");
    Ok((0..1u64 << cnf.num_vars)
        .filter(|&x| eval.is_model(x))
        .collect())
}

/// Exact model count with the default step budget.
pub fn count_models(cnf: &Cnf) -> Result<BigUint, CnfError> {
    count_models_with_budget(cnf, DEFAULT_COUNT_BUDGET)
}

/// Exact model count by DPLL.
///
/// Each search node runs unit propagation to a fixpoint, then branches on the
/// lowest-index variable still occurring in an open clause. A node whose
/// clauses are all satisfied contributes `2^free` where `free` counts the
/// unassigned variables. `budget` bounds the number of search nodes plus
/// propagated units.
pub fn count_models_with_budget(cnf: &Cnf, budget: u64) -> Result<BigUint, CnfError> {
    let clauses = cnf.to_raw();
    let mut counter = Counter {
        steps: 0,
        budget,
    };
    counter.count(clauses, cnf.num_vars)
}

struct Counter {
    steps: u64,
    budget: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<(), CnfError> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(CnfError::Timeout {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    /// `unassigned` counts the variables not fixed on the path to this node.
    fn count(&mut self, mut clauses: Vec<Vec<i32>>, mut unassigned: usize) -> Result<BigUint, CnfError> {
        self.tick()?;
        while let Some(unit) = clauses.iter().find(|c| c.len() == 1).map(|c| c[0]) {
            self.tick()?;
            match condition(&clauses, unit) {
                Some(next) => clauses = next,
                None => return Ok(BigUint::zero()),
            }
            unassigned -= 1;
        }
        let Some(var) = clauses.iter().flatten().map(|l| l.unsigned_abs()).min() else {
            return Ok(BigUint::one() << unassigned);
        };
        let var = var as i32;
        let mut total = BigUint::zero();
        for lit in [var, -var] {
            if let Some(next) = condition(&clauses, lit) {
                total += self.count(next, unassigned - 1)?;
            }
        }
        Ok(total)
    }
}

/// Sets `lit` true. Returns `None` when a clause becomes empty.
fn condition(clauses: &[Vec<i32>], lit: i32) -> Option<Vec<Vec<i32>>> {
    let mut out = Vec::with_capacity(clauses.len());
    for clause in clauses {
        if clause.contains(&lit) {
            continue;
        }
        if clause.contains(&-lit) {
            let reduced: Vec<i32> = clause.iter().copied().filter(|&l| l != -lit).collect();
            if reduced.is_empty() {
                return None;
            }
            out.push(reduced);
        } else {
            out.push(clause.clone());
        }
    }
    Some(out)
}

/// Parses a DIMACS CNF document.
///
/// Accepts `c` comment lines anywhere, clauses spanning several lines, and a
/// trailing `%` line as found in SATLIB files. The declared clause count must
/// match.
pub fn parse_dimacs(text: &str) -> Result<Cnf, CnfError> {
    let err = |line: usize, message: String| CnfError::Parse { line, message };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", n, m] => n.parse::<usize>().ok().zip(m.parse::<usize>().ok()),
                _ => None,
            };
            let Some((n, m)) = parsed else {
                return Err(err(line_no, format!("malformed header `{line}`")));
            };
            if n > i32::MAX as usize {
                return Err(err(line_no, format!("variable count {n} too large")));
            }
            header = Some((n, m));
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(err(line_no, "clause before `p cnf` header".into()));
        };
        for token in line.split_whitespace() {
            let value: i32 = token
                .parse()
                .map_err(|_| err(line_no, format!("invalid literal `{token}`")))?;
            if value == 0 {
                let clause = std::mem::take(&mut current);
                make_clause(num_vars, clauses.len(), &clause)
                    .map_err(|e| err(line_no, e.to_string()))?;
                clauses.push(clause);
            } else {
                if value.unsigned_abs() as usize > num_vars {
                    return Err(err(
                        line_no,
                        format!("literal {value} out of range for {num_vars} variables"),
                    ));
                }
                current.push(value);
            }
        }
    }

    let Some((num_vars, num_clauses)) = header else {
        return Err(err(last_line.max(1), "missing `p cnf` header".into()));
    };
    if !current.is_empty() {
        return Err(err(last_line, "last clause is missing its `0` terminator".into()));
    }
    if clauses.len() != num_clauses {
        return Err(err(
            last_line.max(1),
            format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        ));
    }
    Cnf::new(num_vars, clauses).map_err(|e| err(last_line, e.to_string()))
}

/// Writes the header and one `0`-terminated clause per line, LF endings.
pub fn emit_dimacs(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    for clause in &cnf.clauses {
        for lit in &clause.literals {
            out.push_str(&lit.0.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::CAR_DIMACS;

    fn cnf(n: usize, clauses: &[&[i32]]) -> Cnf {
        Cnf::new(n, clauses.iter().copied()).unwrap()
    }

    #[test]
    fn parses_small_document() {
        let parsed = parse_dimacs("p cnf 2 1\n1 -2 0\n").unwrap();
        assert_eq!(parsed, cnf(2, &[&[1, -2]]));
    }

    #[test]
    fn empty_clause_list_counts_everything() {
        let parsed = parse_dimacs("p cnf 1 0\n").unwrap();
        assert_eq!(parsed.num_clauses(), 0);
        assert_eq!(count_models(&parsed).unwrap(), BigUint::from(2u32));
        let wide = cnf(10, &[]);
        assert_eq!(count_models(&wide).unwrap(), BigUint::from(1024u32));
    }

    #[test]
    fn clause_may_span_lines() {
        let parsed = parse_dimacs("c x\np cnf 3 2\n1 2\n 3 0 -1\n0\n%\n0\n").unwrap();
        assert_eq!(parsed.to_raw(), vec![vec![1, 2, 3], vec![-1]]);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "p cnf x 1\n1 0\n",
            "1 0\n",
            "p cnf 2 1\n3 0\n",
            "p cnf 2 1\n1 2\n",
            "p cnf 2 2\n1 0\n",
            "p cnf 2 1\n1 -1 0\n",
            "p cnf 2 1\n1 1 0\n",
            "p cnf 2 1\n1 a 0\n",
            "",
        ] {
            assert!(
                matches!(parse_dimacs(bad), Err(CnfError::Parse { .. })),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn emit_is_bit_exact() {
        let f = cnf(3, &[&[1, -2], &[3]]);
        assert_eq!(emit_dimacs(&f), "p cnf 3 2\n1 -2 0\n3 0\n");
    }

    #[test]
    fn car_round_trip() {
        let car = parse_dimacs(CAR_DIMACS).unwrap();
        assert_eq!(parse_dimacs(&emit_dimacs(&car)).unwrap(), car);
    }

    #[test]
    fn construction_rejects_bad_clauses() {
        assert!(Cnf::new(2, [vec![]]).is_err());
        assert!(Cnf::new(2, [vec![1, -1]]).is_err());
        assert!(Cnf::new(2, [vec![3]]).is_err());
        assert!(Cnf::new(2, [vec![2, 2]]).is_err());
        // duplicate clauses are fine
        assert_eq!(Cnf::new(2, [vec![1], vec![1]]).unwrap().num_clauses(), 2);
    }

    #[test]
    fn car_configurations() {
        let car = parse_dimacs(CAR_DIMACS).unwrap();
        // car, body, engine, gas, gear, manual
        let valid = Assignment::from_true_vars(10, &[1, 2, 3, 5, 6, 7]);
        assert!(car.evaluate(&valid).unwrap());
        let no_body = Assignment::from_true_vars(10, &[1, 3, 5, 6, 7]);
        assert!(!car.evaluate(&no_body).unwrap());
        assert_eq!(
            car.evaluate(&Assignment::from_index(0, 3)),
            Err(CnfError::LengthMismatch {
                expected: 10,
                actual: 3
            })
        );
        assert_eq!(enumerate_models(&car).unwrap().len(), 18);
        assert_eq!(count_models(&car).unwrap(), BigUint::from(18u32));
    }

    #[test]
    fn empty_formula_is_always_true() {
        let f = cnf(4, &[]);
        for x in 0..16 {
            assert!(f.evaluate(&Assignment::from_index(x, 4)).unwrap());
        }
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_models(&cnf(2, &[&[1], &[2]])).unwrap(), vec![0b11]);
        assert!(enumerate_models(&cnf(1, &[&[1], &[-1]])).unwrap().is_empty());
        assert_eq!(
            enumerate_models(&cnf(25, &[])),
            Err(CnfError::TooManyVariables {
                num_vars: 25,
                limit: 24
            })
        );
    }

    #[test]
    fn counter_respects_budget() {
        let clauses: Vec<Vec<i32>> = (1..30).map(|v| vec![v, v + 1]).collect();
        let f = Cnf::new(30, clauses).unwrap();
        assert_eq!(
            count_models_with_budget(&f, 10),
            Err(CnfError::Timeout { budget: 10 })
        );
        assert!(count_models(&f).is_ok());
    }

    #[test]
    fn count_beyond_64_bits() {
        let f = cnf(96, &[&[1, 2]]);
        assert_eq!(count_models(&f).unwrap(), BigUint::from(3u32) << 94);
    }

    #[test]
    fn index_round_trip() {
        let a = Assignment::from_index(0b1011, 5);
        assert_eq!(a.bits(), &[true, true, false, true, false]);
        assert_eq!(a.to_index(), Some(0b1011));
    }
}
