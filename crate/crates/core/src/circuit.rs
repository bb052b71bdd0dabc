//! Gate-level quantum circuit IR.
//!
//! Qubits are 0-based. Multi-controlled gates are primitives; nothing here
//! decomposes them into a hardware basis.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("invalid gate {gate}: {message}")]
    InvalidGate { gate: String, message: String },
    #[error("invalid register layout: {0}")]
    InvalidRegisters(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Gate {
    X(usize),
    H(usize),
    Z(usize),
    Cx(usize, usize),
    Mcx(Vec<usize>, usize),
    Mcz(Vec<usize>, usize),
}

impl Gate {
    pub fn target(&self) -> usize {
        match self {
            Gate::X(t) | Gate::H(t) | Gate::Z(t) | Gate::Cx(_, t) => *t,
            Gate::Mcx(_, t) | Gate::Mcz(_, t) => *t,
        }
    }

    pub fn controls(&self) -> &[usize] {
        match self {
            Gate::X(_) | Gate::H(_) | Gate::Z(_) => &[],
            Gate::Cx(c, _) => std::slice::from_ref(c),
            Gate::Mcx(cs, _) | Gate::Mcz(cs, _) => cs,
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.controls().iter().copied().chain(std::iter::once(self.target()))
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::X(_) => "x",
            Gate::H(_) => "h",
            Gate::Z(_) => "z",
            Gate::Cx(..) => "cx",
            Gate::Mcx(..) => "mcx",
            Gate::Mcz(..) => "mcz",
        }
    }

    fn validate(&self, width: usize) -> Result<(), CircuitError> {
        let fail = |message: String| CircuitError::InvalidGate {
            gate: format!("{self:?}"),
            message,
        };
        let qubits: Vec<usize> = self.qubits().collect();
        if let Some(q) = qubits.iter().find(|&&q| q >= width) {
            return Err(fail(format!("qubit {q} outside width {width}")));
        }
        for (i, q) in qubits.iter().enumerate() {
            if qubits[i + 1..].contains(q) {
                return Err(fail(format!("qubit {q} used twice")));
            }
        }
        Ok(())
    }
}

/// Partition of the qubits into roles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Registers {
    pub variables: Vec<usize>,
    pub ancillas: Vec<usize>,
    pub target: Option<usize>,
}

impl Registers {
    /// Every qubit holds a variable.
    pub fn plain(width: usize) -> Self {
        Self {
            variables: (0..width).collect(),
            ancillas: Vec::new(),
            target: None,
        }
    }

    /// Variables `0..n`, clause ancillas `n..n+m`, target `n+m`.
    pub fn oracle(num_vars: usize, num_clauses: usize) -> Self {
        Self {
            variables: (0..num_vars).collect(),
            ancillas: (num_vars..num_vars + num_clauses).collect(),
            target: Some(num_vars + num_clauses),
        }
    }

    fn validate(&self, width: usize) -> Result<(), CircuitError> {
        let mut seen = vec![false; width];
        let all = self
            .variables
            .iter()
            .chain(&self.ancillas)
            .chain(self.target.as_ref());
        for &q in all {
            match seen.get_mut(q) {
                None => {
                    return Err(CircuitError::InvalidRegisters(format!(
                        "qubit {q} outside width {width}"
                    )))
                }
                Some(true) => {
                    return Err(CircuitError::InvalidRegisters(format!(
                        "qubit {q} has two roles"
                    )))
                }
                Some(s) => *s = true,
            }
        }
        match seen.iter().position(|s| !s) {
            Some(q) => Err(CircuitError::InvalidRegisters(format!("qubit {q} has no role"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    width: usize,
    registers: Registers,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize, registers: Registers) -> Result<Self, CircuitError> {
        registers.validate(width)?;
        Ok(Self {
            width,
            registers,
            gates: Vec::new(),
        })
    }

    pub fn with_gates(
        width: usize,
        registers: Registers,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Self, CircuitError> {
        let mut c = Self::new(width, registers)?;
        c.extend(gates)?;
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), CircuitError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn registers(&self) -> &Registers {
        &self.registers
    }

    /// ASAP layer count: each gate lands one layer above the latest gate on
    /// any qubit it touches.
    pub fn depth(&self) -> usize {
        let mut last = vec![0usize; self.width];
        let mut depth = 0;
        for g in &self.gates {
            let layer = 1 + g.qubits().map(|q| last[q]).max().unwrap_or(0);
            for q in g.qubits() {
                last[q] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    pub fn to_json(&self) -> String {
        let gates: Vec<Value> = self
            .gates
            .iter()
            .map(|g| {
                let mut obj = Map::new();
                obj.insert("g".into(), json!(g.name()));
                if !g.controls().is_empty() || matches!(g, Gate::Mcx(..) | Gate::Mcz(..)) {
                    obj.insert("c".into(), json!(g.controls()));
                }
                obj.insert("q".into(), json!([g.target()]));
                Value::Object(obj)
            })
            .collect();
        json!({
            "version": 1,
            "num_qubits": self.width,
            "registers": {
                "variables": self.registers.variables,
                "ancillas": self.registers.ancillas,
                "target": self.registers.target,
            },
            "gates": gates,
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let root: Value = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        let version = field(&root, "$", "version")?;
        if version.as_u64() != Some(1) {
            return Err(schema("$.version", "expected 1".into()));
        }
        let width = as_index(field(&root, "$", "num_qubits")?, "$.num_qubits")?;
        let regs = field(&root, "$", "registers")?;
        let registers = Registers {
            variables: index_list(field(regs, "$.registers", "variables")?, "$.registers.variables")?,
            ancillas: index_list(field(regs, "$.registers", "ancillas")?, "$.registers.ancillas")?,
            target: match regs.get("target") {
                None | Some(Value::Null) => None,
                Some(v) => Some(as_index(v, "$.registers.target")?),
            },
        };
        registers.validate(width).map_err(|e| schema("$.registers", e.to_string()))?;

        let gates_value = field(&root, "$", "gates")?;
        let gate_values = gates_value
            .as_array()
            .ok_or_else(|| schema("$.gates", "expected an array".into()))?;
        let mut circuit = Circuit::new(width, registers)?;
        for (i, gv) in gate_values.iter().enumerate() {
            let path = format!("$.gates[{i}]");
            let name = field(gv, &path, "g")?
                .as_str()
                .ok_or_else(|| schema(&format!("{path}.g"), "expected a string".into()))?;
            let targets = index_list(field(gv, &path, "q")?, &format!("{path}.q"))?;
            let controls = match gv.get("c") {
                None => None,
                Some(v) => Some(index_list(v, &format!("{path}.c"))?),
            };
            let [t] = targets.as_slice() else {
                return Err(schema(&format!("{path}.q"), "expected exactly one target".into()));
            };
            let t = *t;
            let gate = match (name, controls) {
                ("x", None) => Gate::X(t),
                ("h", None) => Gate::H(t),
                ("z", None) => Gate::Z(t),
                ("cx", Some(c)) if c.len() == 1 => Gate::Cx(c[0], t),
                ("mcx", Some(c)) => Gate::Mcx(c, t),
                ("mcz", Some(c)) => Gate::Mcz(c, t),
                ("x" | "h" | "z", Some(_)) => {
                    return Err(schema(&format!("{path}.c"), "uncontrolled gate has controls".into()))
                }
                ("cx", _) => {
                    return Err(schema(&format!("{path}.c"), "cx needs exactly one control".into()))
                }
                ("mcx" | "mcz", None) => {
                    return Err(schema(&format!("{path}.c"), "missing controls".into()))
                }
                (other, _) => {
                    return Err(schema(&format!("{path}.g"), format!("unknown gate `{other}`")))
                }
            };
            circuit
                .push(gate)
                .map_err(|e| schema(&path, e.to_string()))?;
        }
        Ok(circuit)
    }

    pub fn to_qasm3(&self) -> String {
        let mut out = String::from("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
        let _ = writeln!(out, "qubit[{}] q;", self.width);
        for g in &self.gates {
            let _ = match g {
                Gate::X(t) => writeln!(out, "x q[{t}];"),
                Gate::H(t) => writeln!(out, "h q[{t}];"),
                Gate::Z(t) => writeln!(out, "z q[{t}];"),
                Gate::Cx(c, t) => writeln!(out, "cx q[{c}], q[{t}];"),
                Gate::Mcx(cs, t) | Gate::Mcz(cs, t) => {
                    let op = if matches!(g, Gate::Mcx(..)) { "x" } else { "z" };
                    let args: Vec<String> = cs.iter().chain([t]).map(|q| format!("q[{q}]")).collect();
                    writeln!(out, "ctrl({}) @ {op} {};", cs.len(), args.join(", "))
                }
            };
        }
        out
    }
}

/// Depth of `k` Grover rounds given the depth of a single round, counting the
/// shared Hadamard layer once: `k * (depth_k1 - 1) + 1`.
pub fn total_depth(depth_k1: u64, k: u64) -> Result<u64, CircuitError> {
    if depth_k1 == 0 {
        return Err(CircuitError::Domain("single-round depth must be at least 1".into()));
    }
    k.checked_mul(depth_k1 - 1)
        .and_then(|d| d.checked_add(1))
        .ok_or_else(|| CircuitError::Domain("total depth overflows u64".into()))
}

fn schema(path: &str, message: String) -> CircuitError {
    CircuitError::Schema {
        path: path.to_string(),
        message,
    }
}

fn field<'v>(v: &'v Value, path: &str, key: &str) -> Result<&'v Value, CircuitError> {
    v.get(key)
        .ok_or_else(|| schema(&format!("{path}.{key}"), "missing field".into()))
}

fn as_index(v: &Value, path: &str) -> Result<usize, CircuitError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected a nonnegative integer".into()))
}

fn index_list(v: &Value, path: &str) -> Result<Vec<usize>, CircuitError> {
    v.as_array()
        .ok_or_else(|| schema(path, "expected an array".into()))?
        .iter()
        .enumerate()
        .map(|(i, x)| as_index(x, &format!("{path}[{i}]")))
        .collect()
}
