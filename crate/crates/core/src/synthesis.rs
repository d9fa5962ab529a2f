// SPDX-License-Identifier: Apache-2.0

//! Boolean network to threshold network compilation.
//!
//! The flow is a plain two-phase heuristic:
//!
//! 1. every primitive gate becomes one threshold gate (wide gates are split
//!    into balanced trees first, XOR into a two-gate fragment);
//! 2. a greedy collapse folds a node into its only reader whenever the merged
//!    function is still a threshold function within the fan-in and weight
//!    limits.
//!
//! Structurally identical gates are shared as they are created.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{BooleanNetwork, GateKind};
use crate::threshold::{
    solve_weights, ThresholdError, ThresholdGate, ThresholdLogicNetwork, TlnNode, TlnOutput,
    WeightSolution, DEFAULT_FANIN_LIMIT, DEFAULT_W_MAX, MAX_FANIN,
};
use crate::vectors::{PackedVectors, VectorMode};

pub use crate::threshold::Source;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthesisError {
    #[error("XOR is not a threshold function; decompose it first")]
    XorNotThreshold,
    #[error("arity {arity} exceeds the fan-in limit {limit}")]
    ArityOverflow { arity: usize, limit: usize },
    #[error("fan-in limit {0} unsupported (must be 2..={max})", max = MAX_FANIN)]
    BadFaninLimit(usize),
    #[error("weight bound {0} unsupported (must be at least 2)")]
    BadWeightBound(i32),
    #[error("network shapes differ: {0}")]
    ArityMismatch(String),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub fanin_limit: usize,
    pub w_max: i32,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            fanin_limit: DEFAULT_FANIN_LIMIT,
            w_max: DEFAULT_W_MAX,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(2..=MAX_FANIN).contains(&self.fanin_limit) {
            return Err(SynthesisError::BadFaninLimit(self.fanin_limit));
        }
        if self.w_max < 2 {
            return Err(SynthesisError::BadWeightBound(self.w_max));
        }
        Ok(())
    }
}

/// Threshold gate for one primitive Boolean gate, reading `Input(0..arity)`.
///
/// All results have margin 1: AND(n) is `2..2, 1-2n`, OR(n) is `2..2, -1`,
/// NAND and NOR are their negations, NOT is `(-2), 1` and BUFF `(2), -1`.
pub fn gate_to_tlg(
    kind: GateKind,
    arity: usize,
    fanin_limit: usize,
) -> Result<ThresholdGate, SynthesisError> {
    if arity > fanin_limit {
        return Err(SynthesisError::ArityOverflow {
            arity,
            limit: fanin_limit,
        });
    }
    let n = arity as i32;
    let (w, bias) = match kind {
        GateKind::Xor => return Err(SynthesisError::XorNotThreshold),
        GateKind::And => (2, 1 - 2 * n),
        GateKind::Or => (2, -1),
        GateKind::Nand => (-2, 2 * n - 1),
        GateKind::Nor => (-2, 1),
        GateKind::Not => (-2, 1),
        GateKind::Buff => (2, -1),
    };
    if matches!(kind, GateKind::Not | GateKind::Buff) && arity != 1 {
        return Err(SynthesisError::ArityOverflow { arity, limit: 1 });
    }
    Ok(ThresholdGate::new(
        vec![w; arity],
        bias,
        (0..arity).map(Source::Input).collect(),
    ))
}

/// Incremental TLN construction with structural sharing.
struct Builder {
    config: SynthesisConfig,
    nodes: Vec<TlnNode>,
    shared: HashMap<ThresholdGate, usize>,
}

impl Builder {
    fn new(config: SynthesisConfig) -> Self {
        Builder {
            config,
            nodes: Vec::new(),
            shared: HashMap::new(),
        }
    }

    fn push(&mut self, mut gate: ThresholdGate, label: Option<&str>) -> Source {
        let mut pairs: Vec<(Source, i32)> = gate.inputs.iter().copied().zip(gate.weights).collect();
        pairs.sort();
        gate.inputs = pairs.iter().map(|p| p.0).collect();
        gate.weights = pairs.iter().map(|p| p.1).collect();
        if let Some(&id) = self.shared.get(&gate) {
            if self.nodes[id].label.is_none() {
                self.nodes[id].label = label.map(str::to_string);
            }
            return Source::Node(id);
        }
        let id = self.nodes.len();
        self.shared.insert(gate.clone(), id);
        self.nodes.push(TlnNode {
            id,
            gate,
            label: label.map(str::to_string),
            stage: None,
        });
        Source::Node(id)
    }

    fn primitive(&mut self, kind: GateKind, operands: &[Source], label: Option<&str>) -> Source {
        let mut gate = gate_to_tlg(kind, operands.len(), self.config.fanin_limit)
            .expect("operand count checked by caller");
        gate.inputs = operands.to_vec();
        self.push(gate, label)
    }

    /// Reduces `operands` with `kind` through a balanced tree until at most
    /// `fanin_limit` signals remain.
    fn narrow(&mut self, kind: GateKind, mut operands: Vec<Source>) -> Vec<Source> {
        let limit = self.config.fanin_limit;
        while operands.len() > limit {
            let groups = operands.len().div_ceil(limit);
            let base = operands.len() / groups;
            let extra = operands.len() % groups;
            let mut next = Vec::with_capacity(groups);
            let mut rest = operands.as_slice();
            for g in 0..groups {
                let take = base + usize::from(g < extra);
                let (chunk, tail) = rest.split_at(take);
                rest = tail;
                next.push(if chunk.len() == 1 {
                    chunk[0]
                } else {
                    self.primitive(kind, chunk, None)
                });
            }
            operands = next;
        }
        operands
    }

    /// `a XOR b` as `(a OR b) AND NOT (a AND b)`: an AND2 node and one
    /// three-input threshold node, or three two-input gates when the fan-in
    /// limit is 2.
    fn xor2(&mut self, a: Source, b: Source, label: Option<&str>) -> Source {
        if self.config.fanin_limit < 3 {
            let either = self.primitive(GateKind::Or, &[a, b], None);
            let not_both = self.primitive(GateKind::Nand, &[a, b], None);
            return self.primitive(GateKind::And, &[either, not_both], label);
        }
        let both = self.primitive(GateKind::And, &[a, b], None);
        // x0 = a, x1 = b, x2 = a AND b
        let table: Vec<bool> = (0..8usize)
            .map(|r| {
                let (x0, x1, x2) = (r & 1 == 1, r & 2 == 2, r & 4 == 4);
                (x0 || x1) && !x2
            })
            .collect();
        let gate = solve_weights(&table, 3, self.config.w_max)
            .expect("3-input table is in range")
            .into_gate(vec![a, b, both])
            .expect("XOR2 output stage is a threshold function");
        self.push(gate, label)
    }

    fn xor(&mut self, mut operands: Vec<Source>, label: Option<&str>) -> Source {
        if operands.len() == 1 {
            return operands[0];
        }
        while operands.len() > 2 {
            let mut next = Vec::with_capacity(operands.len().div_ceil(2));
            for pair in operands.chunks(2) {
                next.push(match pair {
                    [a, b] => self.xor2(*a, *b, None),
                    [a] => *a,
                    _ => unreachable!(),
                });
            }
            operands = next;
        }
        self.xor2(operands[0], operands[1], label)
    }
}

/// Threshold network computing XOR of `arity` inputs (balanced tree of
/// two-input fragments; each fragment uses two gates).
pub fn decompose_xor(arity: usize) -> ThresholdLogicNetwork {
    assert!(arity >= 1);
    let config = SynthesisConfig {
        fanin_limit: 3,
        w_max: DEFAULT_W_MAX,
    };
    let mut b = Builder::new(config);
    let operands = (0..arity).map(Source::Input).collect();
    let out = match b.xor(operands, Some("y")) {
        Source::Node(n) => n,
        Source::Input(i) => match b.push(ThresholdGate::buffer(Source::Input(i)), Some("y")) {
            Source::Node(n) => n,
            Source::Input(_) => unreachable!(),
        },
    };
    ThresholdLogicNetwork {
        inputs: (0..arity).map(|i| format!("x{i}")).collect(),
        nodes: b.nodes,
        outputs: vec![TlnOutput {
            name: "y".into(),
            node: out,
        }],
        fanin_limit: 3,
        w_max: DEFAULT_W_MAX,
    }
}

/// Node-count bookkeeping for one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub nodes_before_collapse: usize,
    pub nodes_after_collapse: usize,
    pub merges: usize,
}

/// Compiles `net` into an equivalent threshold network.
pub fn synthesize_tln(
    net: &BooleanNetwork,
    config: SynthesisConfig,
) -> Result<(ThresholdLogicNetwork, SynthesisStats), SynthesisError> {
    config.validate()?;
    let mut b = Builder::new(config);
    let mut signal: Vec<Source> = (0..net.inputs().len()).map(Source::Input).collect();

    for (g, gate) in net.gates().iter().enumerate() {
        let mut operands: Vec<Source> = net.gate_fanin(g).iter().map(|&id| signal[id]).collect();
        let label = Some(gate.output.as_str());
        let out = match gate.kind {
            GateKind::Buff => operands[0],
            GateKind::Not => b.primitive(GateKind::Not, &operands, label),
            GateKind::Xor => b.xor(operands, label),
            kind => {
                let mut seen = Vec::new();
                operands.retain(|s| {
                    let fresh = !seen.contains(s);
                    seen.push(*s);
                    fresh
                });
                let inner = match kind {
                    GateKind::And | GateKind::Nand => GateKind::And,
                    _ => GateKind::Or,
                };
                let narrowed = b.narrow(inner, operands);
                if narrowed.len() == 1 {
                    match kind {
                        GateKind::And | GateKind::Or => narrowed[0],
                        _ => b.primitive(GateKind::Not, &narrowed, label),
                    }
                } else {
                    b.primitive(kind, &narrowed, label)
                }
            }
        };
        signal.push(out);
    }

    let mut outputs = Vec::with_capacity(net.outputs().len());
    for (name, &id) in net.outputs().iter().zip(net.output_ids()) {
        let node = match signal[id] {
            Source::Node(n) => n,
            Source::Input(i) => match b.push(ThresholdGate::buffer(Source::Input(i)), Some(name)) {
                Source::Node(n) => n,
                Source::Input(_) => unreachable!(),
            },
        };
        outputs.push(TlnOutput {
            name: name.clone(),
            node,
        });
    }

    let mut tln = ThresholdLogicNetwork {
        inputs: net.inputs().to_vec(),
        nodes: b.nodes,
        outputs,
        fanin_limit: config.fanin_limit,
        w_max: config.w_max,
    };
    sweep_dead(&mut tln);
    let before = tln.nodes.len();
    let merges = collapse(&mut tln, config);
    tln.validate()?;
    let stats = SynthesisStats {
        nodes_before_collapse: before,
        nodes_after_collapse: tln.nodes.len(),
        merges,
    };
    Ok((tln, stats))
}

/// Removes nodes that no output depends on and renumbers the rest.
pub(crate) fn sweep_dead(tln: &mut ThresholdLogicNetwork) {
    let mut live = vec![false; tln.nodes.len()];
    for o in &tln.outputs {
        live[o.node] = true;
    }
    for id in (0..tln.nodes.len()).rev() {
        if live[id] {
            for s in &tln.nodes[id].gate.inputs {
                if let Source::Node(n) = *s {
                    live[n] = true;
                }
            }
        }
    }
    compact(tln, &live);
}

fn compact(tln: &mut ThresholdLogicNetwork, keep: &[bool]) {
    let mut new_id = vec![usize::MAX; tln.nodes.len()];
    let mut next = 0;
    for (id, &k) in keep.iter().enumerate() {
        if k {
            new_id[id] = next;
            next += 1;
        }
    }
    let old = std::mem::take(&mut tln.nodes);
    for (id, mut node) in old.into_iter().enumerate() {
        if !keep[id] {
            continue;
        }
        node.id = new_id[id];
        for s in node.gate.inputs.iter_mut() {
            if let Source::Node(n) = s {
                *n = new_id[*n];
            }
        }
        tln.nodes.push(node);
    }
    for o in tln.outputs.iter_mut() {
        o.node = new_id[o.node];
    }
}

/// Truth table of `reader` with `merged` substituted by its own function,
/// over the deduplicated list of signals both read.
fn merged_table(reader: &ThresholdGate, merged_id: usize, merged: &ThresholdGate) -> (Vec<Source>, Vec<bool>) {
    let mut support: Vec<Source> = Vec::new();
    for s in reader.inputs.iter().chain(&merged.inputs) {
        if *s != Source::Node(merged_id) && !support.contains(s) {
            support.push(*s);
        }
    }
    let pos = |s: &Source| support.iter().position(|t| t == s).unwrap();
    let table = (0..1usize << support.len())
        .map(|row| {
            let bit = |s: &Source| (row >> pos(s)) & 1 == 1;
            let inner: i64 = merged
                .inputs
                .iter()
                .zip(&merged.weights)
                .filter(|(s, _)| bit(s))
                .map(|(_, &w)| w as i64)
                .sum::<i64>()
                + merged.bias as i64;
            let inner = inner >= 0;
            let outer: i64 = reader
                .inputs
                .iter()
                .zip(&reader.weights)
                .filter(|(s, _)| {
                    if **s == Source::Node(merged_id) {
                        inner
                    } else {
                        bit(s)
                    }
                })
                .map(|(_, &w)| w as i64)
                .sum::<i64>()
                + reader.bias as i64;
            outer >= 0
        })
        .collect();
    (support, table)
}

/// Drops inputs the table does not depend on.
fn drop_vacuous(support: Vec<Source>, table: Vec<bool>) -> (Vec<Source>, Vec<bool>) {
    let n = support.len();
    let essential: Vec<usize> = (0..n)
        .filter(|&i| (0..table.len()).any(|r| (r >> i) & 1 == 0 && table[r] != table[r | 1 << i]))
        .collect();
    if essential.len() == n {
        return (support, table);
    }
    let reduced = (0..1usize << essential.len())
        .map(|r| {
            let full = essential
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &i)| acc | (((r >> k) & 1) << i));
            table[full]
        })
        .collect();
    (essential.iter().map(|&i| support[i]).collect(), reduced)
}

/// Greedy single-reader collapse. Visits nodes from the highest id down and
/// repeats whole passes until nothing merges. Returns the merge count.
fn collapse(tln: &mut ThresholdLogicNetwork, config: SynthesisConfig) -> usize {
    let mut total = 0;
    loop {
        let mut merged_any = false;
        let mut alive = vec![true; tln.nodes.len()];
        let mut is_output = vec![false; tln.nodes.len()];
        for o in &tln.outputs {
            is_output[o.node] = true;
        }
        let mut readers: Vec<Vec<usize>> = vec![Vec::new(); tln.nodes.len()];
        for node in &tln.nodes {
            for s in &node.gate.inputs {
                if let Source::Node(n) = *s {
                    if !readers[n].contains(&node.id) {
                        readers[n].push(node.id);
                    }
                }
            }
        }

        for u in (0..tln.nodes.len()).rev() {
            if !alive[u] || is_output[u] || readers[u].len() != 1 {
                continue;
            }
            let v = readers[u][0];
            let (support, table) = merged_table(&tln.nodes[v].gate, u, &tln.nodes[u].gate);
            if support.len() > config.fanin_limit {
                continue;
            }
            let (support, table) = drop_vacuous(support, table);
            if support.is_empty() {
                continue;
            }
            let Ok(WeightSolution::Threshold { weights, bias }) =
                solve_weights(&table, config.fanin_limit, config.w_max)
            else {
                continue;
            };
            for s in &tln.nodes[v].gate.inputs {
                if let Source::Node(n) = *s {
                    readers[n].retain(|&r| r != v);
                }
            }
            for s in &support {
                if let Source::Node(n) = *s {
                    if !readers[n].contains(&v) {
                        readers[n].push(v);
                    }
                }
            }
            readers[u].clear();
            tln.nodes[v].gate = ThresholdGate::new(weights, bias, support);
            alive[u] = false;
            merged_any = true;
            total += 1;
        }

        if !merged_any {
            break;
        }
        compact(tln, &alive);
        sweep_dead(tln);
    }
    total
}

/// First disagreement found by [`verify_equivalence`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub inputs: Vec<bool>,
    pub expected: Vec<bool>,
    pub actual: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub passed: bool,
    pub mode: VectorMode,
    pub vectors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

/// Compares `tln` against the gate-level oracle on a vector set. The reported
/// counterexample is the lowest-numbered failing vector.
pub fn verify_equivalence(
    net: &BooleanNetwork,
    tln: &ThresholdLogicNetwork,
    mode: VectorMode,
) -> Result<EquivalenceReport, SynthesisError> {
    if net.inputs().len() != tln.inputs.len() || net.outputs().len() != tln.outputs.len() {
        return Err(SynthesisError::ArityMismatch(format!(
            "netlist {}x{}, threshold network {}x{}",
            net.inputs().len(),
            net.outputs().len(),
            tln.inputs.len(),
            tln.outputs.len()
        )));
    }
    let vectors = PackedVectors::generate(net.inputs().len(), mode);
    let first_bad = vectors
        .chunks()
        .par_iter()
        .enumerate()
        .filter_map(|(c, words)| {
            let want = net.evaluate_packed(words).expect("shape checked");
            let got = tln.evaluate_packed(words).expect("shape checked");
            let diff = want
                .iter()
                .zip(&got)
                .fold(0u64, |acc, (a, b)| acc | (a ^ b))
                & vectors.lane_mask(c);
            (diff != 0).then(|| c * 64 + diff.trailing_zeros() as usize)
        })
        .min();

    let counterexample = first_bad.map(|v| {
        let inputs = vectors.vector(v);
        Counterexample {
            expected: net.evaluate(&inputs).expect("shape checked"),
            actual: tln.evaluate(&inputs).expect("shape checked"),
            inputs,
        }
    });
    Ok(EquivalenceReport {
        passed: counterexample.is_none(),
        mode,
        vectors: vectors.len(),
        counterexample,
    })
}
