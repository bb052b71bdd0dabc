//! Uniform random sampling of product-line configurations with Grover search.
//!
//! The pipeline runs feature model → CNF → phase oracle → Grover circuit →
//! simulation → measurement, with an exact model counter supplying the number
//! of valid configurations that fixes the iteration count.
//!
//! * [`model`] parses feature models and compiles them to CNF.
//! * [`cnf`] holds DIMACS I/O, evaluation, enumeration and model counting.
//! * [`circuit`] is the gate-level IR with depth metrics, JSON and OpenQASM 3.
//! * [`oracle`] synthesizes the phase oracle, diffusion and Grover circuits.
//! * [`sim`] executes circuits on a gate-level or a CNF-phase statevector.
//! * [`sampler`] draws samples, tests their uniformity and builds reports.

pub mod circuit;
pub mod cnf;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod stats;

pub use circuit::{Circuit, CircuitError, Gate, Registers};
pub use cnf::{count_models, emit_dimacs, enumerate_models, parse_dimacs, Assignment, Clause, Cnf, CnfError, Literal};
pub use model::{parse_feature_model, to_cnf, FeatureModel, ModelError, VariableMap};
pub use oracle::{GroverPlan, Iterations, OracleError};
pub use sampler::{AnalysisRow, Backend, SampleOptions, SampleReport, SamplerError, UniformityResult};
pub use sim::{MeasurementCounts, SimError, Statevector};
