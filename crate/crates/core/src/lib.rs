// SPDX-License-Identifier: Apache-2.0

//! Threshold-logic synthesis and spin-memristor array mapping.
//!
//! The flow runs `.bench` netlist → threshold network → staged, buffered and
//! partitioned array design → behavioral evaluation (functional simulation
//! under conductance variation, power, delay, area).

pub mod artifact;
pub mod devices;
pub mod evaluator;
pub mod mapper;
pub mod netlist;
pub mod partition;
pub mod synthesis;
pub mod threshold;
pub mod vectors;

pub use netlist::{parse_bench, BooleanNetwork, GateKind, NetlistError};
pub use synthesis::{synthesize_tln, verify_equivalence, SynthesisConfig, SynthesisError};
pub use threshold::{Source, ThresholdGate, ThresholdLogicNetwork};
pub use vectors::{PackedVectors, VectorMode};
