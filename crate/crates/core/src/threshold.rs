// SPDX-License-Identifier: Apache-2.0

//! Threshold logic gates and networks.
//!
//! A gate computes `y = 1` iff `sum(w_i * x_i) + b >= 0`. Synthesized gates
//! additionally keep every row at least one unit away from the decision
//! boundary (margin >= 1), so a zero net current is never a legal operating
//! point of the comparator.
//!
//! Truth tables are indexed by row number `r`, with input `i` equal to bit
//! `i` of `r` (input 0 is the least significant bit).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FANIN_LIMIT: usize = 4;
pub const DEFAULT_W_MAX: i32 = 6;
/// Largest fan-in the table-based helpers support (a table fits in a `u64`).
pub const MAX_FANIN: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("expected {expected} inputs, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fan-in {fanin} exceeds the limit of {limit}")]
    FaninExceeded { fanin: usize, limit: usize },
    #[error("a gate needs at least one input")]
    EmptyFanin,
    #[error("truth table has {len} rows, expected {expected}")]
    TableLength { len: usize, expected: usize },
    #[error("node {node}: weight {weight} outside 1..={w_max} in magnitude")]
    WeightOutOfRange { node: usize, weight: i32, w_max: i32 },
    #[error("node {node}: robustness margin {margin} is below 1")]
    InsufficientMargin { node: usize, margin: u32 },
    #[error("node {node}: reference to {input} is not defined before it")]
    BadReference { node: usize, input: Source },
    #[error("output `{name}` refers to missing node {node}")]
    BadOutput { name: String, node: usize },
    #[error("node {node}: weight and input lists differ in length")]
    Malformed { node: usize },
}

/// Where a gate input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Primary input by position.
    Input(usize),
    /// Output of another node by id.
    Node(usize),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Input(i) => write!(f, "input {i}"),
            Source::Node(n) => write!(f, "node {n}"),
        }
    }
}

/// A threshold logic gate: integer weights, an integer bias and the signals
/// feeding each weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdGate {
    pub weights: Vec<i32>,
    pub bias: i32,
    pub inputs: Vec<Source>,
}

impl ThresholdGate {
    pub fn new(weights: Vec<i32>, bias: i32, inputs: Vec<Source>) -> Self {
        debug_assert_eq!(weights.len(), inputs.len());
        ThresholdGate {
            weights,
            bias,
            inputs,
        }
    }

    /// Unit buffer `W = (2), b = -1`.
    pub fn buffer(input: Source) -> Self {
        ThresholdGate::new(vec![2], -1, vec![input])
    }

    pub fn fanin(&self) -> usize {
        self.weights.len()
    }

    /// `sum(w_i x_i) + b` for row `r` of the truth table.
    pub fn row_sum(&self, row: usize) -> i64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| (row >> i) & 1 == 1)
            .map(|(_, &w)| w as i64)
            .sum::<i64>()
            + self.bias as i64
    }

    /// Truth table as a bit mask over `2^fanin` rows. Requires `fanin <= 6`.
    pub fn truth_mask(&self) -> u64 {
        assert!(self.fanin() <= MAX_FANIN);
        (0..1usize << self.fanin())
            .filter(|&r| self.row_sum(r) >= 0)
            .fold(0u64, |acc, r| acc | (1 << r))
    }

    pub fn truth_table(&self) -> Vec<bool> {
        (0..1usize << self.fanin())
            .map(|r| self.row_sum(r) >= 0)
            .collect()
    }

    /// Same gate with all weights and the bias negated.
    pub fn negated(&self) -> Self {
        ThresholdGate::new(
            self.weights.iter().map(|w| -w).collect(),
            -self.bias,
            self.inputs.clone(),
        )
    }
}

/// Evaluates a gate: 1 iff the weighted sum plus bias is non-negative.
pub fn eval_tlg(gate: &ThresholdGate, x: &[bool]) -> Result<bool, ThresholdError> {
    if x.len() != gate.fanin() {
        return Err(ThresholdError::LengthMismatch {
            expected: gate.fanin(),
            got: x.len(),
        });
    }
    let sum: i64 = gate
        .weights
        .iter()
        .zip(x)
        .filter(|(_, &xi)| xi)
        .map(|(&w, _)| w as i64)
        .sum::<i64>()
        + gate.bias as i64;
    Ok(sum >= 0)
}

/// Smallest `|sum(w_i x_i) + b|` over every input row.
pub fn gate_margin(gate: &ThresholdGate) -> u32 {
    (0..1usize << gate.fanin())
        .map(|r| gate.row_sum(r).unsigned_abs())
        .min()
        .unwrap_or(0) as u32
}

/// Outcome of [`solve_weights`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSolution {
    Threshold { weights: Vec<i32>, bias: i32 },
    NotThreshold,
}

impl WeightSolution {
    pub fn into_gate(self, inputs: Vec<Source>) -> Option<ThresholdGate> {
        match self {
            WeightSolution::Threshold { weights, bias } => {
                Some(ThresholdGate::new(weights, bias, inputs))
            }
            WeightSolution::NotThreshold => None,
        }
    }
}

/// Largest bias magnitude considered for an `n`-input gate.
pub fn bias_bound(n: usize, w_max: i32) -> i32 {
    n as i32 * w_max + 1
}

/// Feasible bias interval `[lo, hi]` for a weight vector, or `None`.
///
/// Rows where the function is 1 need `s + b >= 1`; rows where it is 0 need
/// `s + b <= -1`.
fn bias_interval(weights: &[i32], table: &[bool], bound: i32) -> Option<(i32, i32)> {
    let mut lo = -bound;
    let mut hi = bound;
    for (row, &value) in table.iter().enumerate() {
        let s: i32 = weights
            .iter()
            .enumerate()
            .filter(|(i, _)| (row >> i) & 1 == 1)
            .map(|(_, &w)| w)
            .sum();
        if value {
            lo = lo.max(1 - s);
        } else {
            hi = hi.min(-1 - s);
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// Picks the bias with the largest margin; ties go to the smaller magnitude,
/// then to the smaller value.
fn pick_bias(lo: i32, hi: i32) -> i32 {
    let mid_lo = (lo + hi).div_euclid(2);
    let mid_hi = mid_lo + (lo + hi).rem_euclid(2);
    if mid_lo == mid_hi || mid_lo.abs() <= mid_hi.abs() {
        mid_lo
    } else {
        mid_hi
    }
}

#[derive(Clone, Copy)]
enum Polarity {
    Positive,
    Negative,
    Either,
}

fn polarities(table: &[bool], n: usize) -> Option<Vec<Polarity>> {
    (0..n)
        .map(|i| {
            let mut pos = true;
            let mut neg = true;
            for row in 0..table.len() {
                if (row >> i) & 1 == 0 {
                    let (f0, f1) = (table[row], table[row | 1 << i]);
                    pos &= !f0 || f1;
                    neg &= f0 || !f1;
                }
            }
            match (pos, neg) {
                (true, true) => Some(Polarity::Either),
                (true, false) => Some(Polarity::Positive),
                (false, true) => Some(Polarity::Negative),
                (false, false) => None,
            }
        })
        .collect()
}

/// Finds integer weights `1 <= |w_i| <= w_max` and a bias realizing `table`
/// with margin >= 1 on every row.
///
/// Among all realizations the one with the smallest `sum(|w_i|)` wins, then
/// the lexicographically smallest weight vector. Only weight signs consistent
/// with the unateness of each input are enumerated; a function that is not
/// unate in some input cannot be a threshold function.
pub fn solve_weights(
    table: &[bool],
    fanin_limit: usize,
    w_max: i32,
) -> Result<WeightSolution, ThresholdError> {
    let n = table.len().trailing_zeros() as usize;
    if table.is_empty() || table.len() != 1 << n {
        return Err(ThresholdError::TableLength {
            len: table.len(),
            expected: 1 << n,
        });
    }
    if n == 0 {
        return Err(ThresholdError::EmptyFanin);
    }
    let limit = fanin_limit.min(MAX_FANIN);
    if n > limit {
        return Err(ThresholdError::FaninExceeded { fanin: n, limit });
    }
    let Some(signs) = polarities(table, n) else {
        return Ok(WeightSolution::NotThreshold);
    };

    let mut candidates: Vec<(i32, Vec<i32>)> = Vec::new();
    let mut magnitudes = vec![1i32; n];
    loop {
        let mut options: Vec<Vec<i32>> = vec![Vec::new()];
        for (i, &m) in magnitudes.iter().enumerate() {
            let choices: &[i32] = match signs[i] {
                Polarity::Positive => &[1],
                Polarity::Negative => &[-1],
                Polarity::Either => &[-1, 1],
            };
            options = options
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&s| {
                        let mut v = prefix.clone();
                        v.push(s * m);
                        v
                    })
                })
                .collect();
        }
        let total: i32 = magnitudes.iter().sum();
        candidates.extend(options.into_iter().map(|w| (total, w)));

        // Odometer over 1..=w_max per position.
        let mut pos = 0;
        while pos < n && magnitudes[pos] == w_max {
            magnitudes[pos] = 1;
            pos += 1;
        }
        if pos == n {
            break;
        }
        magnitudes[pos] += 1;
    }
    candidates.sort();

    let bound = bias_bound(n, w_max);
    for (_, weights) in candidates {
        if let Some((lo, hi)) = bias_interval(&weights, table, bound) {
            // With no rows on one side the margin keeps growing toward the
            // bound.
            let bias = if table.iter().all(|&v| v) {
                hi
            } else if table.iter().all(|&v| !v) {
                lo
            } else {
                pick_bias(lo, hi)
            };
            return Ok(WeightSolution::Threshold { bias, weights });
        }
    }
    Ok(WeightSolution::NotThreshold)
}

/// One node of a [`ThresholdLogicNetwork`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlnNode {
    pub id: usize,
    #[serde(flatten)]
    pub gate: ThresholdGate,
    /// Net name carried over from the source netlist, when one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Pipeline stage, once assigned by the mapper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlnOutput {
    pub name: String,
    pub node: usize,
}

/// A DAG of threshold gates. Node `i` has id `i` and may only read primary
/// inputs and nodes with smaller ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdLogicNetwork {
    pub inputs: Vec<String>,
    pub nodes: Vec<TlnNode>,
    pub outputs: Vec<TlnOutput>,
    pub fanin_limit: usize,
    pub w_max: i32,
}

impl ThresholdLogicNetwork {
    /// Checks ids, ordering, fan-in, weight range and margin of every node.
    pub fn validate(&self) -> Result<(), ThresholdError> {
        for (idx, node) in self.nodes.iter().enumerate() {
            let gate = &node.gate;
            if node.id != idx || gate.weights.len() != gate.inputs.len() {
                return Err(ThresholdError::Malformed { node: idx });
            }
            if gate.fanin() == 0 {
                return Err(ThresholdError::EmptyFanin);
            }
            let limit = self.fanin_limit.min(MAX_FANIN);
            if gate.fanin() > limit {
                return Err(ThresholdError::FaninExceeded {
                    fanin: gate.fanin(),
                    limit,
                });
            }
            if let Some(&w) = gate
                .weights
                .iter()
                .find(|w| **w == 0 || w.abs() > self.w_max)
            {
                return Err(ThresholdError::WeightOutOfRange {
                    node: idx,
                    weight: w,
                    w_max: self.w_max,
                });
            }
            for &src in &gate.inputs {
                let ok = match src {
                    Source::Input(i) => i < self.inputs.len(),
                    Source::Node(n) => n < idx,
                };
                if !ok {
                    return Err(ThresholdError::BadReference {
                        node: idx,
                        input: src,
                    });
                }
            }
            let margin = gate_margin(gate);
            if margin < 1 {
                return Err(ThresholdError::InsufficientMargin { node: idx, margin });
            }
        }
        for out in &self.outputs {
            if out.node >= self.nodes.len() {
                return Err(ThresholdError::BadOutput {
                    name: out.name.clone(),
                    node: out.node,
                });
            }
        }
        Ok(())
    }

    pub fn max_fanin(&self) -> usize {
        self.nodes.iter().map(|n| n.gate.fanin()).max().unwrap_or(0)
    }

    /// ASAP level of each node: one above its deepest input, inputs at 0.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let lvl = node
                .gate
                .inputs
                .iter()
                .map(|s| match *s {
                    Source::Input(_) => 0,
                    Source::Node(n) => levels[n],
                })
                .max()
                .unwrap_or(0)
                + 1;
            levels.push(lvl);
        }
        levels
    }

    pub fn depth(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    pub fn evaluate(&self, assignment: &[bool]) -> Result<Vec<bool>, ThresholdError> {
        if assignment.len() != self.inputs.len() {
            return Err(ThresholdError::LengthMismatch {
                expected: self.inputs.len(),
                got: assignment.len(),
            });
        }
        let mut values: Vec<bool> = Vec::with_capacity(self.nodes.len());
        let mut x = Vec::new();
        for node in &self.nodes {
            x.clear();
            x.extend(node.gate.inputs.iter().map(|s| match *s {
                Source::Input(i) => assignment[i],
                Source::Node(n) => values[n],
            }));
            values.push(eval_tlg(&node.gate, &x)?);
        }
        Ok(self.outputs.iter().map(|o| values[o.node]).collect())
    }

    /// 64-lane evaluation.
    pub fn evaluate_packed(&self, inputs: &[u64]) -> Result<Vec<u64>, ThresholdError> {
        if inputs.len() != self.inputs.len() {
            return Err(ThresholdError::LengthMismatch {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values: Vec<u64> = Vec::with_capacity(self.nodes.len());
        let mut x = Vec::new();
        for node in &self.nodes {
            x.clear();
            x.extend(node.gate.inputs.iter().map(|s| match *s {
                Source::Input(i) => inputs[i],
                Source::Node(n) => values[n],
            }));
            values.push(eval_table_packed(node.gate.truth_mask(), &x));
        }
        Ok(self.outputs.iter().map(|o| values[o.node]).collect())
    }

    /// Number of node readers of every node (outputs not counted).
    pub fn fanout_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        for node in &self.nodes {
            for s in &node.gate.inputs {
                if let Source::Node(n) = *s {
                    counts[n] += 1;
                }
            }
        }
        counts
    }
}

/// Evaluates a truth table over `xs.len()` packed inputs by Shannon expansion.
pub fn eval_table_packed(table: u64, xs: &[u64]) -> u64 {
    match xs.split_last() {
        None => {
            if table & 1 == 1 {
                !0
            } else {
                0
            }
        }
        Some((&top, rest)) => {
            let half = 1usize << rest.len();
            let low_mask = if half == 64 { !0 } else { (1u64 << half) - 1 };
            let low = eval_table_packed(table & low_mask, rest);
            let high = eval_table_packed(if half == 64 { 0 } else { table >> half }, rest);
            (top & high) | (!top & low)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate(weights: &[i32], bias: i32) -> ThresholdGate {
        let inputs = (0..weights.len()).map(Source::Input).collect();
        ThresholdGate::new(weights.to_vec(), bias, inputs)
    }

    fn row(v: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| (v >> i) & 1 == 1).collect()
    }

    #[test]
    fn eval_basic_gates() {
        let and2 = gate(&[1, 1], -2);
        assert!(eval_tlg(&and2, &[true, true]).unwrap());
        assert!(!eval_tlg(&and2, &[true, false]).unwrap());
        let maj3 = gate(&[1, 1, 1], -2);
        assert!(eval_tlg(&maj3, &[true, true, false]).unwrap());
        let buf = gate(&[2], -1);
        assert!(eval_tlg(&buf, &[true]).unwrap());
        assert!(!eval_tlg(&buf, &[false]).unwrap());
    }

    #[test]
    fn eval_length_mismatch() {
        assert_eq!(
            eval_tlg(&gate(&[1, 1], -2), &[true]),
            Err(ThresholdError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn margins_by_enumeration() {
        // Row sums: AND2 {-2,-1,-1,0}; buffer {-1,1}; majority {..,0,..}.
        assert_eq!(gate_margin(&gate(&[1, 1], -2)), 0);
        assert_eq!(gate_margin(&gate(&[2], -1)), 1);
        assert_eq!(gate_margin(&gate(&[1, 1, 1], -2)), 0);
        assert_eq!(gate_margin(&gate(&[2, 2], -3)), 1);
        assert_eq!(gate_margin(&gate(&[2, 2, 2], -3)), 1);
    }

    #[test]
    fn solve_and_or_xor() {
        // Smallest margin-1 realizations, confirmed by the brute-force oracle
        // in tests/threshold_oracle.rs.
        assert_eq!(
            solve_weights(&[false, false, false, true], 4, 6).unwrap(),
            WeightSolution::Threshold {
                weights: vec![2, 2],
                bias: -3
            }
        );
        assert_eq!(
            solve_weights(&[false, true, true, true], 4, 6).unwrap(),
            WeightSolution::Threshold {
                weights: vec![2, 2],
                bias: -1
            }
        );
        assert_eq!(
            solve_weights(&[false, true, true, false], 4, 6).unwrap(),
            WeightSolution::NotThreshold
        );
    }

    #[test]
    fn solve_rejects_oversized_tables() {
        assert_eq!(
            solve_weights(&[false; 32], 4, 6),
            Err(ThresholdError::FaninExceeded { fanin: 5, limit: 4 })
        );
        assert!(matches!(
            solve_weights(&[false; 3], 4, 6),
            Err(ThresholdError::TableLength { .. })
        ));
    }

    #[test]
    fn solved_gates_reproduce_tables() {
        for n in 1..=3usize {
            for bits in 0..(1u32 << (1 << n)) {
                let table: Vec<bool> = (0..1 << n).map(|r| (bits >> r) & 1 == 1).collect();
                if let WeightSolution::Threshold { weights, bias } =
                    solve_weights(&table, 4, 6).unwrap()
                {
                    let g = gate(&weights, bias);
                    assert!(gate_margin(&g) >= 1);
                    for r in 0..1 << n {
                        assert_eq!(eval_tlg(&g, &row(r, n)).unwrap(), table[r]);
                    }
                }
            }
        }
    }

    #[test]
    fn negation_complements_margin_gates() {
        for (w, b) in [(vec![2, 2], -3), (vec![-2], 1), (vec![3, -2, 1], 0), (vec![1, 1], -2)] {
            let g = gate(&w, b);
            let neg = g.negated();
            for r in 0..1 << w.len() {
                // Negated gate read with a strict `> 0` test is the complement.
                assert_eq!(neg.row_sum(r) > 0, !(g.row_sum(r) >= 0));
                if gate_margin(&g) >= 1 {
                    assert_eq!(
                        eval_tlg(&neg, &row(r, w.len())).unwrap(),
                        !eval_tlg(&g, &row(r, w.len())).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn packed_table_eval_matches_rows() {
        let g = gate(&[3, -2, 1, 2], -2);
        let mask = g.truth_mask();
        let mut xs = vec![0u64; 4];
        for v in 0..16usize {
            for (i, x) in xs.iter_mut().enumerate() {
                *x |= (((v >> i) & 1) as u64) << v;
            }
        }
        let out = eval_table_packed(mask, &xs);
        for v in 0..16 {
            assert_eq!((out >> v) & 1 == 1, g.row_sum(v) >= 0);
        }
    }

    #[test]
    fn validate_catches_margin_zero() {
        let tln = ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes: vec![TlnNode {
                id: 0,
                gate: gate(&[1, 1], -2),
                label: None,
                stage: None,
            }],
            outputs: vec![TlnOutput {
                name: "y".into(),
                node: 0,
            }],
            fanin_limit: 4,
            w_max: 6,
        };
        assert_eq!(
            tln.validate(),
            Err(ThresholdError::InsufficientMargin { node: 0, margin: 0 })
        );
    }

    #[test]
    fn tln_json_shape() {
        let tln = ThresholdLogicNetwork {
            inputs: vec!["a".into()],
            nodes: vec![TlnNode {
                id: 0,
                gate: ThresholdGate::buffer(Source::Input(0)),
                label: Some("y".into()),
                stage: None,
            }],
            outputs: vec![TlnOutput {
                name: "y".into(),
                node: 0,
            }],
            fanin_limit: 4,
            w_max: 6,
        };
        let json = serde_json::to_string(&tln).unwrap();
        assert!(json.contains(r#""weights":[2],"bias":-1,"inputs":[{"input":0}]"#), "{json}");
        let back: ThresholdLogicNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tln);
    }
}
