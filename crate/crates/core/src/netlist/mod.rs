// SPDX-License-Identifier: Apache-2.0

//! Gate-level Boolean networks.
//!
//! A [`BooleanNetwork`] is the functional reference for every later stage of
//! the flow: synthesized threshold networks and mapped designs are checked
//! against [`BooleanNetwork::evaluate`].

mod bench;

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::parse_bench;

/// Primitive gate kinds understood by the `.bench` reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Not,
    Buff,
    Xor,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Not => "NOT",
            GateKind::Buff => "BUFF",
            GateKind::Xor => "XOR",
        }
    }

    /// Parses a gate keyword; `BUF` is accepted as an alias of `BUFF`.
    pub fn from_keyword(word: &str) -> Option<GateKind> {
        Some(match word.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "NAND" => GateKind::Nand,
            "NOR" => GateKind::Nor,
            "NOT" => GateKind::Not,
            "BUFF" | "BUF" => GateKind::Buff,
            "XOR" => GateKind::Xor,
            _ => return None,
        })
    }

    /// Evaluates the gate on a slice of input values.
    pub fn apply(self, inputs: &[bool]) -> bool {
        match self {
            GateKind::And => inputs.iter().all(|&x| x),
            GateKind::Or => inputs.iter().any(|&x| x),
            GateKind::Nand => !inputs.iter().all(|&x| x),
            GateKind::Nor => !inputs.iter().any(|&x| x),
            GateKind::Not => !inputs[0],
            GateKind::Buff => inputs[0],
            GateKind::Xor => inputs.iter().filter(|&&x| x).count() % 2 == 1,
        }
    }

    /// Word-parallel evaluation: each bit of the words is an independent lane.
    pub fn apply_packed(self, inputs: &[u64]) -> u64 {
        match self {
            GateKind::And => inputs.iter().fold(!0, |acc, &x| acc & x),
            GateKind::Or => inputs.iter().fold(0, |acc, &x| acc | x),
            GateKind::Nand => !inputs.iter().fold(!0, |acc, &x| acc & x),
            GateKind::Nor => !inputs.iter().fold(0, |acc, &x| acc | x),
            GateKind::Not => !inputs[0],
            GateKind::Buff => inputs[0],
            GateKind::Xor => inputs.iter().fold(0, |acc, &x| acc ^ x),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate: `output = kind(inputs...)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub output: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: sequential element `{kind}` is not supported")]
    Sequential { line: usize, kind: String },
    #[error("net `{net}` referenced by `{user}` is never defined")]
    UndefinedNet { net: String, user: String },
    #[error("net `{0}` is defined more than once")]
    DuplicateDefinition(String),
    #[error("combinational cycle through net `{0}`")]
    Cycle(String),
    #[error("gate `{net}` ({kind}) has invalid arity {arity}")]
    Arity {
        net: String,
        kind: GateKind,
        arity: usize,
    },
    #[error("expected {expected} input values, got {got}")]
    AssignmentLength { expected: usize, got: usize },
}

#[derive(Serialize, Deserialize)]
struct NetworkDef {
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<Gate>,
}

/// A validated, topologically ordered combinational gate network.
///
/// Net ids are dense: primary inputs occupy `0..inputs().len()` and gate `i`
/// drives net `inputs().len() + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDef", into = "NetworkDef")]
pub struct BooleanNetwork {
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<Gate>,
    gate_fanin: Vec<Vec<usize>>,
    output_ids: Vec<usize>,
}

impl TryFrom<NetworkDef> for BooleanNetwork {
    type Error = NetlistError;

    fn try_from(def: NetworkDef) -> Result<Self, Self::Error> {
        BooleanNetwork::new(def.inputs, def.outputs, def.gates)
    }
}

impl From<BooleanNetwork> for NetworkDef {
    fn from(net: BooleanNetwork) -> Self {
        NetworkDef {
            inputs: net.inputs,
            outputs: net.outputs,
            gates: net.gates,
        }
    }
}

impl BooleanNetwork {
    /// Validates and builds a network. Gates may be listed in any order; they
    /// are stored in a topological order that keeps the given order wherever
    /// dependencies allow.
    pub fn new(
        inputs: Vec<String>,
        outputs: Vec<String>,
        gates: Vec<Gate>,
    ) -> Result<Self, NetlistError> {
        let mut defined: HashMap<&str, usize> = HashMap::new();
        for (i, name) in inputs.iter().enumerate() {
            if defined.insert(name.as_str(), i).is_some() {
                return Err(NetlistError::DuplicateDefinition(name.clone()));
            }
        }
        for (g, gate) in gates.iter().enumerate() {
            let arity = gate.inputs.len();
            let arity_ok = match gate.kind {
                GateKind::Not | GateKind::Buff => arity == 1,
                _ => arity >= 1,
            };
            if !arity_ok {
                return Err(NetlistError::Arity {
                    net: gate.output.clone(),
                    kind: gate.kind,
                    arity,
                });
            }
            if defined
                .insert(gate.output.as_str(), inputs.len() + g)
                .is_some()
            {
                return Err(NetlistError::DuplicateDefinition(gate.output.clone()));
            }
        }

        let resolve = |net: &str, user: &str| {
            defined
                .get(net)
                .copied()
                .ok_or_else(|| NetlistError::UndefinedNet {
                    net: net.to_string(),
                    user: user.to_string(),
                })
        };
        let mut raw_fanin = Vec::with_capacity(gates.len());
        for gate in &gates {
            let ids = gate
                .inputs
                .iter()
                .map(|n| resolve(n, &gate.output))
                .collect::<Result<Vec<_>, _>>()?;
            raw_fanin.push(ids);
        }
        for name in &outputs {
            resolve(name, "OUTPUT")?;
        }

        // Stable Kahn ordering over gates.
        let n_in = inputs.len();
        let mut pending = vec![0usize; gates.len()];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
        for (g, ids) in raw_fanin.iter().enumerate() {
            for &id in ids {
                if id >= n_in {
                    pending[g] += 1;
                    users[id - n_in].push(g);
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> = pending
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 0)
            .map(|(g, _)| Reverse(g))
            .collect();
        let mut order = Vec::with_capacity(gates.len());
        while let Some(Reverse(g)) = ready.pop() {
            order.push(g);
            for &u in &users[g] {
                pending[u] -= 1;
                if pending[u] == 0 {
                    ready.push(Reverse(u));
                }
            }
        }
        if order.len() != gates.len() {
            let stuck = pending.iter().position(|&p| p > 0).unwrap();
            return Err(NetlistError::Cycle(gates[stuck].output.clone()));
        }

        let mut new_pos = vec![0usize; gates.len()];
        for (pos, &g) in order.iter().enumerate() {
            new_pos[g] = pos;
        }
        let remap = |id: usize| if id < n_in { id } else { n_in + new_pos[id - n_in] };
        let output_ids = outputs
            .iter()
            .map(|n| remap(defined[n.as_str()]))
            .collect();
        let mut slots: Vec<Option<Gate>> = gates.into_iter().map(Some).collect();
        let mut sorted = Vec::with_capacity(slots.len());
        let mut gate_fanin = Vec::with_capacity(slots.len());
        for &g in &order {
            sorted.push(slots[g].take().unwrap());
            gate_fanin.push(raw_fanin[g].iter().map(|&id| remap(id)).collect());
        }

        Ok(BooleanNetwork {
            inputs,
            outputs,
            gates: sorted,
            gate_fanin,
            output_ids,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Gates in topological order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_nets(&self) -> usize {
        self.inputs.len() + self.gates.len()
    }

    /// Fan-in net ids of gate `g` (gate index, not net id).
    pub fn gate_fanin(&self, g: usize) -> &[usize] {
        &self.gate_fanin[g]
    }

    /// Net ids driving each primary output.
    pub fn output_ids(&self) -> &[usize] {
        &self.output_ids
    }

    pub fn net_name(&self, id: usize) -> &str {
        if id < self.inputs.len() {
            &self.inputs[id]
        } else {
            &self.gates[id - self.inputs.len()].output
        }
    }

    /// Exact evaluation of the primary outputs for one input assignment.
    pub fn evaluate(&self, assignment: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if assignment.len() != self.inputs.len() {
            return Err(NetlistError::AssignmentLength {
                expected: self.inputs.len(),
                got: assignment.len(),
            });
        }
        let mut values = Vec::with_capacity(self.num_nets());
        values.extend_from_slice(assignment);
        let mut scratch = Vec::new();
        for (gate, fanin) in self.gates.iter().zip(&self.gate_fanin) {
            scratch.clear();
            scratch.extend(fanin.iter().map(|&id| values[id]));
            values.push(gate.kind.apply(&scratch));
        }
        Ok(self.output_ids.iter().map(|&id| values[id]).collect())
    }

    /// Evaluates 64 assignments at once; bit `l` of every word is lane `l`.
    pub fn evaluate_packed(&self, inputs: &[u64]) -> Result<Vec<u64>, NetlistError> {
        if inputs.len() != self.inputs.len() {
            return Err(NetlistError::AssignmentLength {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values = Vec::with_capacity(self.num_nets());
        values.extend_from_slice(inputs);
        let mut scratch = Vec::new();
        for (gate, fanin) in self.gates.iter().zip(&self.gate_fanin) {
            scratch.clear();
            scratch.extend(fanin.iter().map(|&id| values[id]));
            values.push(gate.kind.apply_packed(&scratch));
        }
        Ok(self.output_ids.iter().map(|&id| values[id]).collect())
    }

    /// Level of every net, indexed by net id: inputs are level 0 and a gate
    /// sits one level above its deepest input.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels = vec![0usize; self.num_nets()];
        let n_in = self.inputs.len();
        for (g, fanin) in self.gate_fanin.iter().enumerate() {
            levels[n_in + g] = 1 + fanin.iter().map(|&id| levels[id]).max().unwrap_or(0);
        }
        levels
    }

    /// Level of every net keyed by net name.
    pub fn topological_levels(&self) -> HashMap<&str, usize> {
        self.levels()
            .into_iter()
            .enumerate()
            .map(|(id, lvl)| (self.net_name(id), lvl))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    /// Renders the network back to `.bench` text.
    pub fn to_bench(&self) -> String {
        let mut out = String::new();
        for name in &self.inputs {
            out.push_str(&format!("INPUT({name})\n"));
        }
        for name in &self.outputs {
            out.push_str(&format!("OUTPUT({name})\n"));
        }
        for gate in &self.gates {
            out.push_str(&format!(
                "{} = {}({})\n",
                gate.output,
                gate.kind,
                gate.inputs.join(", ")
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C17: &str = include_str!("../../data/c17.bench");

    fn bits(v: u32, n: usize) -> Vec<bool> {
        (0..n).map(|i| (v >> i) & 1 == 1).collect()
    }

    #[test]
    fn c17_shape() {
        let net = parse_bench(C17).unwrap();
        assert_eq!(net.inputs().len(), 5);
        assert_eq!(net.outputs().len(), 2);
        assert_eq!(net.gates().len(), 6);
    }

    #[test]
    fn c17_hand_evaluated() {
        // All zeros: N10 = N11 = 1, N16 = N19 = 1, so both outputs NAND(1, 1) = 0.
        let net = parse_bench(C17).unwrap();
        assert_eq!(net.evaluate(&[false; 5]).unwrap(), vec![false, false]);
        // All ones: N10 = N11 = 0, N16 = N19 = 1, N22 = 1, N23 = 0.
        assert_eq!(net.evaluate(&[true; 5]).unwrap(), vec![true, false]);
    }

    #[test]
    fn c17_depth_three() {
        let net = parse_bench(C17).unwrap();
        assert_eq!(net.depth(), 3);
        let levels = net.topological_levels();
        assert_eq!(levels["N1"], 0);
        assert_eq!(levels["N11"], 1);
        assert_eq!(levels["N16"], 2);
        assert_eq!(levels["N23"], 3);
    }

    #[test]
    fn identity_netlist() {
        let net = parse_bench("INPUT(a)\nOUTPUT(a)\n").unwrap();
        assert!(net.gates().is_empty());
        assert_eq!(net.evaluate(&[true]).unwrap(), vec![true]);
        assert_eq!(net.evaluate(&[false]).unwrap(), vec![false]);
    }

    #[test]
    fn single_gates() {
        let not = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n").unwrap();
        assert_eq!(not.evaluate(&[true]).unwrap(), vec![false]);
        let xor = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n").unwrap();
        assert_eq!(xor.evaluate(&[true, true]).unwrap(), vec![false]);
        assert_eq!(xor.evaluate(&[true, false]).unwrap(), vec![true]);
    }

    #[test]
    fn buffer_chain_levels() {
        let text = "INPUT(a)\nOUTPUT(d)\nb1 = BUFF(a)\nb2 = BUFF(b1)\nb3 = BUFF(b2)\nd = BUFF(b3)\n";
        let net = parse_bench(text).unwrap();
        let levels = net.topological_levels();
        assert_eq!(
            ["b1", "b2", "b3", "d"].map(|n| levels[n]),
            [1, 2, 3, 4]
        );
    }

    #[test]
    fn independent_nots_share_level() {
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(x)\nOUTPUT(y)\nx = NOT(a)\ny = NOT(b)\n";
        let levels = parse_bench(text).unwrap().levels();
        assert_eq!(&levels[2..], &[1, 1]);
    }

    #[test]
    fn forward_references_are_reordered() {
        let text = "INPUT(a)\nOUTPUT(y)\ny = NOT(m)\nm = BUFF(a)\n";
        let net = parse_bench(text).unwrap();
        assert_eq!(net.gates()[0].output, "m");
        assert_eq!(net.evaluate(&[true]).unwrap(), vec![false]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = parse_bench("INPUT(a)\nOUTPUT(n)\nn = NAND(a, n)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Cycle(ref n) if n == "n"));
    }

    #[test]
    fn length_mismatch() {
        let net = parse_bench(C17).unwrap();
        assert_eq!(
            net.evaluate(&[true; 3]).unwrap_err(),
            NetlistError::AssignmentLength { expected: 5, got: 3 }
        );
    }

    #[test]
    fn packed_matches_scalar_on_c17() {
        let net = parse_bench(C17).unwrap();
        let mut words = vec![0u64; 5];
        for v in 0..32u32 {
            for (i, w) in words.iter_mut().enumerate() {
                *w |= (((v >> i) & 1) as u64) << v;
            }
        }
        let packed = net.evaluate_packed(&words).unwrap();
        for v in 0..32u32 {
            let scalar = net.evaluate(&bits(v, 5)).unwrap();
            for (o, &bit) in scalar.iter().enumerate() {
                assert_eq!((packed[o] >> v) & 1 == 1, bit);
            }
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let net = parse_bench(C17).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        assert!(json.contains("\"kind\":\"NAND\""));
        let back: BooleanNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(back, net);

        let bad = r#"{"inputs":["a"],"outputs":["z"],"gates":[]}"#;
        assert!(serde_json::from_str::<BooleanNetwork>(bad).is_err());
    }

    #[test]
    fn gate_truth_tables_exhaustive() {
        // Every kind of arity 1..=4 against an independent reading of its definition.
        let kinds = [
            GateKind::And,
            GateKind::Or,
            GateKind::Nand,
            GateKind::Nor,
            GateKind::Xor,
            GateKind::Not,
            GateKind::Buff,
        ];
        for kind in kinds {
            let arities: Vec<usize> = match kind {
                GateKind::Not | GateKind::Buff => vec![1],
                _ => (1..=4).collect(),
            };
            for n in arities {
                let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let gate = Gate {
                    output: "y".into(),
                    kind,
                    inputs: names.clone(),
                };
                let net = BooleanNetwork::new(names, vec!["y".into()], vec![gate]).unwrap();
                for v in 0..(1u32 << n) {
                    let ones = v.count_ones() as usize;
                    let expected = match kind {
                        GateKind::And => ones == n,
                        GateKind::Or => ones > 0,
                        GateKind::Nand => ones != n,
                        GateKind::Nor => ones == 0,
                        GateKind::Xor => ones % 2 == 1,
                        GateKind::Not => ones == 0,
                        GateKind::Buff => ones == 1,
                    };
                    assert_eq!(net.evaluate(&bits(v, n)).unwrap(), vec![expected], "{kind} {v:b}");
                }
            }
        }
    }
}
