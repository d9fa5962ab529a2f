// SPDX-License-Identifier: Apache-2.0

//! Pipeline staging and array placement of a threshold network.
//!
//! A [`MappedDesign`] is a flat list of cells. Primary inputs are cells of
//! stage 0; every other cell is one array column (a threshold gate, a copy
//! made by fan-out splitting, or a buffer). Gate inputs refer to cell ids.
//! Placement is a slot number per stage; the block of a cell is
//! `slot / cols`.
//!
//! [`map_tln`] runs the whole flow:
//!
//! 1. ASAP levels, `stage = ceil(level / k)`;
//! 2. buffer chains so every cross-stage edge spans one boundary, and every
//!    output is available at the last stage;
//! 3. fan-out splitting;
//! 4. optional per-stage capacity (nodes deferred one stage at a time);
//! 5. sequential placement, then sweeps that move nodes next to their
//!    sources and readers;
//! 6. nearly empty stages folded into their predecessor through
//!    backward connections.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{bias_rows, classify_links, Link, LinkKind};
use crate::threshold::{
    gate_margin, Source, ThresholdError, ThresholdGate, ThresholdLogicNetwork, TlnOutput,
};

pub const DEFAULT_LEVELS_PER_STAGE: usize = 2;
pub const DEFAULT_ROWS: usize = 64;
pub const DEFAULT_COLS: usize = 32;
pub const DEFAULT_FANOUT_MAX: usize = 8;
pub const DEFAULT_MIN_FILL: f64 = 0.10;
pub const DEFAULT_BACKWARD_MAX: usize = 4;
pub const DEFAULT_REORDER_SWEEPS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("levels per stage must be at least 1")]
    BadLevels,
    #[error("fan-out limit {0} must be at least 2")]
    BadFanout(usize),
    #[error("sub-arrays need at least one row and one column")]
    BadGeometry,
    #[error("minimum fill {0} must lie in [0, 1]")]
    BadFill(f64),
    #[error("node {node} needs {rows} input rows but a sub-array has {limit}")]
    RowsExceeded { node: usize, rows: usize, limit: usize },
    #[error("stage {stage} holds {count} columns against a capacity of {capacity}")]
    CapacityInfeasible {
        stage: usize,
        count: usize,
        capacity: usize,
    },
    #[error("stage {stage} needs {needed} blocks but only {allowed} are available")]
    BlocksExceeded {
        stage: usize,
        needed: usize,
        allowed: usize,
    },
    #[error("invalid mapped design: {0}")]
    Invalid(String),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    /// Array levels evaluated within one pipeline stage (`k`).
    pub levels_per_stage: usize,
    /// Blocks per stage; `None` leaves stage width unbounded.
    pub blocks: Option<usize>,
    /// Input rows per block (`M`).
    pub rows: usize,
    /// Gate columns per block (`N`).
    pub cols: usize,
    pub fanout_max: usize,
    pub min_fill: f64,
    /// Backward connections allowed per block.
    pub backward_max: usize,
    pub reorder_sweeps: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            levels_per_stage: DEFAULT_LEVELS_PER_STAGE,
            blocks: None,
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            fanout_max: DEFAULT_FANOUT_MAX,
            min_fill: DEFAULT_MIN_FILL,
            backward_max: DEFAULT_BACKWARD_MAX,
            reorder_sweeps: DEFAULT_REORDER_SWEEPS,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        if self.levels_per_stage == 0 {
            return Err(MapError::BadLevels);
        }
        if self.fanout_max < 2 {
            return Err(MapError::BadFanout(self.fanout_max));
        }
        if self.rows == 0 || self.cols == 0 || self.blocks == Some(0) {
            return Err(MapError::BadGeometry);
        }
        if !(0.0..=1.0).contains(&self.min_fill) {
            return Err(MapError::BadFill(self.min_fill));
        }
        Ok(())
    }

    pub fn stage_capacity(&self) -> Option<usize> {
        self.blocks.map(|b| b * self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRole {
    Input { index: usize },
    /// Implements threshold network node `node` (copies share the id).
    Logic { node: usize },
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub role: CellRole,
    /// Absent for primary inputs. Inputs are `Source::Node(cell id)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<ThresholdGate>,
    /// Global logic depth; strictly increases along every edge.
    pub level: usize,
    pub stage: usize,
    pub slot: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub absorbed: bool,
}

impl Cell {
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.gate.iter().flat_map(|g| {
            g.inputs.iter().map(|s| match *s {
                Source::Node(n) => n,
                Source::Input(i) => i,
            })
        })
    }

    pub fn is_input(&self) -> bool {
        matches!(self.role, CellRole::Input { .. })
    }

    pub fn is_buffer(&self) -> bool {
        matches!(self.role, CellRole::Buffer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageInfo {
    pub index: usize,
    pub cells: usize,
    pub blocks: usize,
    /// Longest chain of gates inside the stage.
    pub depth: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapStats {
    pub logic: usize,
    pub copies: usize,
    pub buffers: usize,
    pub deferred: usize,
    pub absorbed_stages: usize,
    pub skipped_absorptions: usize,
    pub reorder_sweeps: usize,
    pub direct_links: usize,
    pub routed_links: usize,
    pub backward_links: usize,
    pub route_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedDesign {
    pub inputs: Vec<String>,
    pub cells: Vec<Cell>,
    /// Output `node` fields are cell ids.
    pub outputs: Vec<TlnOutput>,
    pub config: MapConfig,
    pub w_max: i32,
    #[serde(default)]
    pub stages: Vec<StageInfo>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default)]
    pub stats: MapStats,
}

fn stage_of(level: usize, k: usize) -> usize {
    level.div_ceil(k)
}

impl MappedDesign {
    /// Index of the last pipeline stage.
    pub fn last_stage(&self) -> usize {
        self.cells.iter().map(|c| c.stage).max().unwrap_or(0)
    }

    pub fn block_of(&self, cell: usize) -> usize {
        self.cells[cell].slot / self.config.cols
    }

    /// Non-input cells, i.e. array columns.
    pub fn column_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_input()).count()
    }

    pub fn buffer_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_buffer()).count()
    }

    pub fn stage_cells(&self, stage: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .cells
            .iter()
            .filter(|c| c.stage == stage)
            .map(|c| c.id)
            .collect();
        ids.sort_by_key(|&id| (self.cells[id].slot, id));
        ids
    }

    /// Distinct reader cells of every cell, ascending.
    pub fn readers(&self) -> Vec<Vec<usize>> {
        let mut readers: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.cells.len()];
        for c in &self.cells {
            for s in c.sources() {
                readers[s].insert(c.id);
            }
        }
        readers.into_iter().map(|r| r.into_iter().collect()).collect()
    }

    /// Cell ids in evaluation order.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        order.sort_by_key(|&id| (self.cells[id].level, id));
        order
    }

    /// Ideal functional evaluation of one assignment.
    pub fn evaluate(&self, assignment: &[bool]) -> Result<Vec<bool>, ThresholdError> {
        if assignment.len() != self.inputs.len() {
            return Err(ThresholdError::LengthMismatch {
                expected: self.inputs.len(),
                got: assignment.len(),
            });
        }
        let mut values = vec![false; self.cells.len()];
        let mut x = Vec::new();
        for id in self.topological_order() {
            let cell = &self.cells[id];
            values[id] = match (&cell.role, &cell.gate) {
                (CellRole::Input { index }, _) => assignment[*index],
                (_, Some(gate)) => {
                    x.clear();
                    x.extend(cell.sources().map(|s| values[s]));
                    crate::threshold::eval_tlg(gate, &x)?
                }
                (_, None) => return Err(ThresholdError::Malformed { node: id }),
            };
        }
        Ok(self.outputs.iter().map(|o| values[o.node]).collect())
    }

    fn retain_cells(&mut self, keep: &[bool]) {
        let mut new_id = vec![usize::MAX; self.cells.len()];
        let mut next = 0;
        for (id, &k) in keep.iter().enumerate() {
            if k {
                new_id[id] = next;
                next += 1;
            }
        }
        let old = std::mem::take(&mut self.cells);
        for (id, mut cell) in old.into_iter().enumerate() {
            if !keep[id] {
                continue;
            }
            cell.id = new_id[id];
            if let Some(g) = cell.gate.as_mut() {
                for s in g.inputs.iter_mut() {
                    if let Source::Node(n) = s {
                        debug_assert_ne!(new_id[*n], usize::MAX);
                        *n = new_id[*n];
                    }
                }
            }
            self.cells.push(cell);
        }
        for o in self.outputs.iter_mut() {
            o.node = new_id[o.node];
        }
    }

    fn replace_source(&mut self, reader: usize, from: usize, to: usize) {
        if let Some(g) = self.cells[reader].gate.as_mut() {
            for s in g.inputs.iter_mut() {
                if *s == Source::Node(from) {
                    *s = Source::Node(to);
                }
            }
        }
    }

    fn push_cell(&mut self, role: CellRole, gate: ThresholdGate, level: usize, stage: usize) -> usize {
        let id = self.cells.len();
        self.cells.push(Cell {
            id,
            role,
            gate: Some(gate),
            level,
            stage,
            slot: 0,
            absorbed: false,
        });
        id
    }

    /// Removes buffers and fan-out copies, rewiring their readers to the
    /// cell they stand for.
    fn strip(&mut self) {
        let mut primary: BTreeMap<usize, usize> = BTreeMap::new();
        for c in &self.cells {
            if let CellRole::Logic { node } = c.role {
                primary.entry(node).or_insert(c.id);
            }
        }
        let mut root: Vec<usize> = (0..self.cells.len()).collect();
        for id in self.topological_order() {
            let c = &self.cells[id];
            root[id] = match c.role {
                CellRole::Buffer => root[c.sources().next().expect("buffer has a source")],
                CellRole::Logic { node } => primary[&node],
                CellRole::Input { .. } => id,
            };
        }
        for c in self.cells.iter_mut() {
            if let Some(g) = c.gate.as_mut() {
                for s in g.inputs.iter_mut() {
                    if let Source::Node(n) = s {
                        *n = root[*n];
                    }
                }
            }
        }
        for o in self.outputs.iter_mut() {
            o.node = root[o.node];
        }
        let keep: Vec<bool> = (0..self.cells.len()).map(|id| root[id] == id).collect();
        self.retain_cells(&keep);
    }
}

/// Builds the unbuffered staged design: one cell per input and per node.
pub fn assign_stages(tln: &ThresholdLogicNetwork, k: usize) -> Result<MappedDesign, MapError> {
    if k == 0 {
        return Err(MapError::BadLevels);
    }
    tln.validate()?;
    let n_in = tln.inputs.len();
    let levels = tln.levels();
    let mut cells: Vec<Cell> = (0..n_in)
        .map(|i| Cell {
            id: i,
            role: CellRole::Input { index: i },
            gate: None,
            level: 0,
            stage: 0,
            slot: i,
            absorbed: false,
        })
        .collect();
    for node in &tln.nodes {
        let mut gate = node.gate.clone();
        for s in gate.inputs.iter_mut() {
            *s = match *s {
                Source::Input(i) => Source::Node(i),
                Source::Node(n) => Source::Node(n_in + n),
            };
        }
        let level = levels[node.id];
        cells.push(Cell {
            id: n_in + node.id,
            role: CellRole::Logic { node: node.id },
            gate: Some(gate),
            level,
            stage: stage_of(level, k),
            slot: 0,
            absorbed: false,
        });
    }
    let outputs = tln
        .outputs
        .iter()
        .map(|o| TlnOutput {
            name: o.name.clone(),
            node: n_in + o.node,
        })
        .collect();
    Ok(MappedDesign {
        inputs: tln.inputs.clone(),
        cells,
        outputs,
        config: MapConfig {
            levels_per_stage: k,
            ..MapConfig::default()
        },
        w_max: tln.w_max,
        stages: Vec::new(),
        links: Vec::new(),
        stats: MapStats::default(),
    })
}

/// Breaks every edge spanning more than one stage boundary with a chain of
/// buffers (one per intermediate stage, shared by all readers of a source)
/// and extends outputs to the last stage. Returns the number of buffers
/// added.
pub fn insert_buffers(design: &mut MappedDesign) -> usize {
    let k = design.config.levels_per_stage;
    let last = design.last_stage();
    let readers = design.readers();
    let original = design.cells.len();
    let mut added = 0;
    for u in 0..original {
        let su = design.cells[u].stage;
        let feeds_output = design.outputs.iter().any(|o| o.node == u);
        let mut reach = readers[u]
            .iter()
            .map(|&v| design.cells[v].stage.saturating_sub(1))
            .max()
            .unwrap_or(0);
        if feeds_output {
            reach = reach.max(last);
        }
        if reach <= su {
            continue;
        }
        // chain[t - su - 1] is the buffer in stage t.
        let mut chain = Vec::with_capacity(reach - su);
        let mut prev = u;
        for t in su + 1..=reach {
            let b = design.push_cell(
                CellRole::Buffer,
                ThresholdGate::buffer(Source::Node(prev)),
                (t - 1) * k + 1,
                t,
            );
            chain.push(b);
            prev = b;
            added += 1;
        }
        for &v in &readers[u] {
            let sv = design.cells[v].stage;
            if sv > su + 1 {
                let b = chain[sv - su - 2];
                design.replace_source(v, u, b);
            }
        }
        if feeds_output && last > su {
            let b = chain[last - su - 1];
            for o in design.outputs.iter_mut().filter(|o| o.node == u) {
                o.node = b;
            }
        }
    }
    added
}

/// Duplicates every gate with more than `f_max` readers into
/// `ceil(fan-out / f_max)` cells, handing readers out in ascending id order.
/// Sinks are handled first so the extra reads of copies are accounted for.
/// Primary inputs are never split. Returns the number of copies added.
pub fn split_fanout(design: &mut MappedDesign, f_max: usize) -> usize {
    assert!(f_max >= 1);
    let mut readers = design.readers();
    let mut order = design.topological_order();
    order.reverse();
    let mut added = 0;
    for u in order {
        if design.cells[u].is_input() || readers[u].len() <= f_max {
            continue;
        }
        let chunks: Vec<Vec<usize>> = readers[u].chunks(f_max).map(<[usize]>::to_vec).collect();
        readers[u] = chunks[0].clone();
        for chunk in &chunks[1..] {
            let cell = &design.cells[u];
            let (role, gate, level, stage) = (cell.role, cell.gate.clone().unwrap(), cell.level, cell.stage);
            let copy = design.push_cell(role, gate, level, stage);
            readers.push(chunk.clone());
            for s in design.cells[copy].sources().collect::<Vec<_>>() {
                readers[s].push(copy);
                readers[s].sort_unstable();
            }
            for &v in chunk {
                design.replace_source(v, u, copy);
            }
            added += 1;
        }
    }
    added
}

fn materialize(design: &mut MappedDesign, f_max: usize) {
    insert_buffers(design);
    split_fanout(design, f_max);
}

fn stage_counts(design: &MappedDesign) -> Vec<usize> {
    let mut counts = vec![0; design.last_stage() + 1];
    for c in design.cells.iter().filter(|c| !c.is_input()) {
        counts[c.stage] += 1;
    }
    counts
}

/// Node of stage `s` to defer first, on a design without buffers: nodes
/// with no reader in the next stage, then the smallest fan-in, then the
/// lowest id.
pub fn pick_deferral(design: &MappedDesign, s: usize) -> Option<usize> {
    let last = design.last_stage();
    let readers = design.readers();
    design
        .cells
        .iter()
        .filter(|c| c.stage == s && matches!(c.role, CellRole::Logic { .. }))
        .map(|c| {
            let next = readers[c.id]
                .iter()
                .any(|&v| design.cells[v].stage <= s + 1)
                || (s == last && design.outputs.iter().any(|o| o.node == c.id));
            (next, c.gate.as_ref().map_or(0, ThresholdGate::fanin), c.id)
        })
        .min()
        .map(|(_, _, id)| id)
}

/// Re-derives levels after a node was pushed later and recomputes stages.
fn propagate_levels(design: &mut MappedDesign) {
    let k = design.config.levels_per_stage;
    loop {
        let mut changed = false;
        for id in design.topological_order() {
            let need = design.cells[id]
                .sources()
                .map(|s| design.cells[s].level + 1)
                .max()
                .unwrap_or(0);
            if design.cells[id].level < need {
                design.cells[id].level = need;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for c in design.cells.iter_mut().filter(|c| !c.is_input()) {
        c.stage = stage_of(c.level, k);
    }
}

/// Defers nodes out of every stage holding more than `capacity` columns
/// (buffers and copies included). Candidates are taken from the first
/// overfull stage: nodes without readers in the next stage first, then the
/// smallest fan-in, then the lowest id. Buffers and copies are rebuilt after
/// every move. Returns the number of moves.
pub fn enforce_capacity(
    design: &mut MappedDesign,
    capacity: usize,
    f_max: usize,
) -> Result<usize, MapError> {
    let k = design.config.levels_per_stage;
    let limit = 4 * design.cells.len().max(16);
    let mut moves = 0;
    loop {
        let counts = stage_counts(design);
        let Some(s) = (1..counts.len()).find(|&s| counts[s] > capacity) else {
            return Ok(moves);
        };
        if capacity == 0 || moves >= limit {
            return Err(MapError::CapacityInfeasible {
                stage: s,
                count: counts[s],
                capacity,
            });
        }
        design.strip();
        let candidate = pick_deferral(design, s);
        let Some(u) = candidate else {
            materialize(design, f_max);
            return Err(MapError::CapacityInfeasible {
                stage: s,
                count: counts[s],
                capacity,
            });
        };
        debug!("deferring cell {u} out of stage {s}");
        design.cells[u].level = s * k + 1;
        propagate_levels(design);
        materialize(design, f_max);
        moves += 1;
    }
}

/// Rows a set of cells occupies in one block: distinct input signals plus
/// the bias rows of the widest bias.
fn rows_needed(design: &MappedDesign, cells: impl IntoIterator<Item = usize>) -> usize {
    let mut signals = BTreeSet::new();
    let mut bias = 0;
    for id in cells {
        let c = &design.cells[id];
        signals.extend(c.sources());
        if let Some(g) = &c.gate {
            bias = bias.max(bias_rows(g.bias, design.w_max));
        }
    }
    signals.len() + bias
}

/// Packs each stage in id order, closing a block when its columns or its
/// input rows run out.
pub fn initial_placement(design: &mut MappedDesign) -> Result<(), MapError> {
    let cols = design.config.cols;
    let rows = design.config.rows;
    for s in 0..=design.last_stage() {
        let mut ids: Vec<usize> = design
            .cells
            .iter()
            .filter(|c| c.stage == s)
            .map(|c| c.id)
            .collect();
        ids.sort_unstable();
        let mut block = 0;
        let mut members: Vec<usize> = Vec::new();
        for id in ids {
            let full = members.len() == cols
                || (s > 0 && {
                    let trial = members.iter().copied().chain([id]);
                    rows_needed(design, trial) > rows
                });
            if full {
                block += 1;
                members.clear();
            }
            design.cells[id].slot = block * cols + members.len();
            members.push(id);
        }
        if let Some(allowed) = design.config.blocks {
            if s > 0 && block + 1 > allowed {
                return Err(MapError::BlocksExceeded {
                    stage: s,
                    needed: block + 1,
                    allowed,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preference {
    /// Follow the blocks of a cell's sources in the previous stage.
    Sources,
    /// Follow the blocks of a cell's readers in the next stage.
    Readers,
}

/// Reassigns the cells of one stage to blocks. Each cell prefers the block
/// holding most of its neighbours in the adjacent stage; cells with the
/// strongest preference are seated first, ties by id. A block is full when
/// its columns or rows run out.
pub fn reorder_stage(design: &mut MappedDesign, stage: usize, preference: Preference) {
    let cols = design.config.cols;
    let rows = design.config.rows;
    let ids = design.stage_cells(stage);
    if ids.is_empty() {
        return;
    }
    let n_blocks = ids
        .iter()
        .map(|&id| design.cells[id].slot / cols + 1)
        .max()
        .unwrap_or(1)
        .max(ids.len().div_ceil(cols));
    let readers = if preference == Preference::Readers {
        design.readers()
    } else {
        Vec::new()
    };

    let mut scored: Vec<(Vec<usize>, usize)> = ids
        .iter()
        .map(|&id| {
            let mut score = vec![0usize; n_blocks];
            let neighbours: Vec<usize> = match preference {
                Preference::Sources => design.cells[id]
                    .sources()
                    .filter(|&s| design.cells[s].stage + 1 == stage)
                    .collect(),
                Preference::Readers => readers[id]
                    .iter()
                    .copied()
                    .filter(|&r| design.cells[r].stage == stage + 1)
                    .collect(),
            };
            for n in neighbours {
                let b = design.block_of(n);
                if b < n_blocks {
                    score[b] += 1;
                }
            }
            (score, id)
        })
        .collect();
    scored.sort_by_key(|(score, id)| (std::cmp::Reverse(score.iter().copied().max().unwrap_or(0)), *id));

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    for (score, id) in scored {
        let mut choices: Vec<usize> = (0..n_blocks).collect();
        choices.sort_by_key(|&b| (std::cmp::Reverse(score[b]), b));
        let fits = |members: &Vec<usize>| {
            members.len() < cols
                && (stage == 0 || rows_needed(design, members.iter().copied().chain([id])) <= rows)
        };
        match choices.into_iter().find(|&b| fits(&members[b])) {
            Some(b) => members[b].push(id),
            None => members.push(vec![id]),
        }
    }
    for (b, mut group) in members.into_iter().enumerate() {
        group.sort_unstable();
        for (col, id) in group.into_iter().enumerate() {
            design.cells[id].slot = b * cols + col;
        }
    }
}

pub fn count_direct(design: &MappedDesign) -> usize {
    classify_links(design, design.config.cols)
        .iter()
        .filter(|l| l.kind != LinkKind::Routed)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderStats {
    pub sweeps: usize,
    pub direct_before: usize,
    pub direct_after: usize,
}

/// Alternating forward (by sources) and backward (by readers) sweeps over
/// all stages. A sweep is kept only if the number of direct links does not
/// drop; the loop stops at a fixed point or after `budget` sweeps.
pub fn reorder(design: &mut MappedDesign, budget: usize) -> ReorderStats {
    let before = count_direct(design);
    let mut best = before;
    let mut sweeps = 0;
    let last = design.last_stage();
    let block_limit = design.config.blocks;
    for _ in 0..budget {
        let snapshot: Vec<usize> = design.cells.iter().map(|c| c.slot).collect();
        for s in 1..=last {
            reorder_stage(design, s, Preference::Sources);
        }
        for s in (0..last).rev() {
            reorder_stage(design, s, Preference::Readers);
        }
        let over_blocks = block_limit.is_some_and(|allowed| {
            (1..=last).any(|s| {
                design
                    .cells
                    .iter()
                    .filter(|c| c.stage == s)
                    .any(|c| c.slot / design.config.cols >= allowed)
            })
        });
        let now = count_direct(design);
        if now < best || over_blocks {
            for (c, slot) in design.cells.iter_mut().zip(snapshot) {
                c.slot = slot;
            }
            break;
        }
        sweeps += 1;
        let unchanged = design.cells.iter().zip(&snapshot).all(|(c, &s)| c.slot == s);
        best = now;
        if unchanged {
            break;
        }
    }
    ReorderStats {
        sweeps,
        direct_before: before,
        direct_after: best,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbStats {
    /// Stage indices (before renumbering) folded into their predecessor.
    pub absorbed: Vec<usize>,
    pub skipped: Vec<usize>,
    pub backward_connections: usize,
}

/// Backward connections of every block of `stage`: distinct same-stage
/// signals read by absorbed cells, keyed by block.
fn backward_sets(design: &MappedDesign, stage: usize) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut sets: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for c in design.cells.iter().filter(|c| c.stage == stage && c.absorbed) {
        for s in c.sources() {
            if design.cells[s].stage == stage {
                sets.entry(design.block_of(c.id)).or_default().insert(s);
            }
        }
    }
    sets
}

fn try_absorb(design: &MappedDesign, s: usize) -> Option<MappedDesign> {
    let mut d = design.clone();
    let cols = d.config.cols;
    let f_max = d.config.fanout_max;
    let mut order = d.stage_cells(s);
    order.sort_by_key(|&id| (d.cells[id].level, id));
    let mut removed = vec![false; d.cells.len()];

    for id in order {
        if d.cells[id].is_buffer() {
            let src = d.cells[id].sources().next().unwrap();
            let readers = d.readers();
            let merged: BTreeSet<usize> = readers[src]
                .iter()
                .chain(&readers[id])
                .copied()
                .filter(|&r| r != id)
                .collect();
            if merged.len() <= f_max || d.cells[src].is_input() {
                for &r in &readers[id] {
                    d.replace_source(r, id, src);
                }
                for o in d.outputs.iter_mut().filter(|o| o.node == id) {
                    o.node = src;
                }
                removed[id] = true;
                continue;
            }
        }
        let same: BTreeSet<usize> = d.cells[id]
            .sources()
            .filter(|&src| d.cells[src].stage + 1 == s || d.cells[src].stage == s)
            .collect();
        if same.iter().any(|&src| d.cells[src].stage == s) {
            // Reads a stage-`s` cell that could not be moved.
            return None;
        }
        let blocks: BTreeSet<usize> = same.iter().map(|&src| d.block_of(src)).collect();
        let occupied: BTreeMap<usize, usize> =
            d.cells
                .iter()
                .filter(|c| c.stage + 1 == s && !removed[c.id])
                .fold(BTreeMap::new(), |mut m, c| {
                    *m.entry(c.slot / cols).or_insert(0) += 1;
                    m
                });
        let candidates: Vec<usize> = match blocks.len() {
            0 => occupied.keys().copied().collect(),
            1 => blocks.into_iter().collect(),
            _ => return None,
        };
        let backward = backward_sets(&d, s - 1);
        let target = candidates.into_iter().find(|&b| {
            let used = occupied.get(&b).copied().unwrap_or(0);
            let members: Vec<usize> = d
                .cells
                .iter()
                .filter(|c| c.stage + 1 == s && c.slot / cols == b && !removed[c.id])
                .map(|c| c.id)
                .collect();
            let mut links = backward.get(&b).cloned().unwrap_or_default();
            links.extend(same.iter().copied());
            used < cols
                && links.len() <= d.config.backward_max
                && rows_needed(&d, members.into_iter().chain([id])) <= d.config.rows
        })?;
        let taken: BTreeSet<usize> = d
            .cells
            .iter()
            .filter(|c| c.stage + 1 == s && c.slot / cols == target && !removed[c.id])
            .map(|c| c.slot % cols)
            .collect();
        let col = (0..cols).find(|c| !taken.contains(c))?;
        let cell = &mut d.cells[id];
        cell.stage = s - 1;
        cell.slot = target * cols + col;
        cell.absorbed = true;
    }

    let keep: Vec<bool> = removed.iter().map(|r| !r).collect();
    d.retain_cells(&keep);
    for c in d.cells.iter_mut().filter(|c| c.stage > s) {
        c.stage -= 1;
    }
    Some(d)
}

/// Folds stages whose fill is below `min_fill` into the previous stage,
/// last stage first. Fill is measured against `blocks * cols`, or against
/// the widest stage when the width is unbounded. Buffers of an absorbed
/// stage are bypassed; gates move into blocks of the previous stage that
/// hold their same-stage sources, at most `backward_max` connections per
/// block. A stage that cannot be placed is left alone with a warning.
pub fn absorb_small_layers(design: &mut MappedDesign) -> AbsorbStats {
    let mut stats = AbsorbStats::default();
    let counts = stage_counts(design);
    let capacity = design
        .config
        .stage_capacity()
        .unwrap_or_else(|| counts.iter().copied().max().unwrap_or(0));
    if capacity == 0 {
        return stats;
    }
    let mut s = design.last_stage();
    while s >= 2 {
        let count = stage_counts(design)[s];
        let fill = count as f64 / capacity as f64;
        if fill < design.config.min_fill {
            match try_absorb(design, s) {
                Some(d) => {
                    debug!("stage {s} ({count} cells) absorbed");
                    *design = d;
                    stats.absorbed.push(s);
                }
                None => {
                    warn!("stage {s} has fill {fill:.3} but cannot be absorbed within the backward-connection bound");
                    stats.skipped.push(s);
                }
            }
        }
        s -= 1;
    }
    stats.backward_connections = (0..=design.last_stage())
        .map(|st| backward_sets(design, st).values().map(BTreeSet::len).sum::<usize>())
        .sum();
    stats
}

/// Puts cells into evaluation order and fills stage and link tables.
pub fn finalize(design: &mut MappedDesign) {
    let order = design.topological_order();
    let mut new_id = vec![0; order.len()];
    for (pos, &id) in order.iter().enumerate() {
        new_id[id] = pos;
    }
    let mut cells: Vec<Cell> = order.iter().map(|&id| design.cells[id].clone()).collect();
    for c in cells.iter_mut() {
        c.id = new_id[c.id];
        if let Some(g) = c.gate.as_mut() {
            for s in g.inputs.iter_mut() {
                if let Source::Node(n) = s {
                    *n = new_id[*n];
                }
            }
        }
    }
    design.cells = cells;
    for o in design.outputs.iter_mut() {
        o.node = new_id[o.node];
    }

    let cols = design.config.cols;
    let last = design.last_stage();
    let mut depth = vec![0usize; design.cells.len()];
    for id in 0..design.cells.len() {
        let c = &design.cells[id];
        if c.is_input() {
            continue;
        }
        depth[id] = 1 + c
            .sources()
            .filter(|&s| design.cells[s].stage == c.stage)
            .map(|s| depth[s])
            .max()
            .unwrap_or(0);
    }
    design.stages = (0..=last)
        .map(|s| {
            let members: Vec<&Cell> = design.cells.iter().filter(|c| c.stage == s).collect();
            StageInfo {
                index: s,
                cells: members.len(),
                blocks: members
                    .iter()
                    .map(|c| c.slot / cols)
                    .collect::<BTreeSet<_>>()
                    .len(),
                depth: members.iter().map(|c| depth[c.id]).max().unwrap_or(0),
            }
        })
        .collect();
    design.links = classify_links(design, cols);

    let stats = &mut design.stats;
    stats.logic = 0;
    stats.copies = 0;
    stats.buffers = 0;
    let mut seen = BTreeSet::new();
    for c in &design.cells {
        match c.role {
            CellRole::Logic { node } => {
                if seen.insert(node) {
                    stats.logic += 1;
                } else {
                    stats.copies += 1;
                }
            }
            CellRole::Buffer => stats.buffers += 1,
            CellRole::Input { .. } => {}
        }
    }
    stats.direct_links = design.links.iter().filter(|l| l.kind == LinkKind::Direct).count();
    stats.routed_links = design.links.iter().filter(|l| l.kind == LinkKind::Routed).count();
    stats.backward_links = design.links.iter().filter(|l| l.kind == LinkKind::Backward).count();
    stats.route_length = design.links.iter().map(|l| l.length).sum();
}

/// Checks every structural invariant of a finished design.
pub fn validate(design: &MappedDesign) -> Result<(), MapError> {
    let bad = |m: String| Err(MapError::Invalid(m));
    let cfg = &design.config;
    let cols = cfg.cols;
    let mut placed = BTreeSet::new();
    for (idx, c) in design.cells.iter().enumerate() {
        if c.id != idx {
            return bad(format!("cell {idx} carries id {}", c.id));
        }
        if !placed.insert((c.stage, c.slot)) {
            return bad(format!("cell {idx} shares stage {} slot {}", c.stage, c.slot));
        }
        match (&c.role, &c.gate) {
            (CellRole::Input { index }, None) => {
                if *index >= design.inputs.len() || c.stage != 0 {
                    return bad(format!("input cell {idx} is malformed"));
                }
            }
            (CellRole::Input { .. }, Some(_)) | (_, None) => {
                return bad(format!("cell {idx} has the wrong gate shape"));
            }
            (_, Some(g)) => {
                if c.stage == 0 {
                    return bad(format!("gate cell {idx} sits in the input stage"));
                }
                if g.fanin() == 0 || g.weights.len() != g.inputs.len() {
                    return bad(format!("cell {idx} has no inputs"));
                }
                if g.weights.iter().any(|w| *w == 0 || w.abs() > design.w_max) {
                    return bad(format!("cell {idx} has a weight outside 1..={}", design.w_max));
                }
                if gate_margin(g) < 1 {
                    return bad(format!("cell {idx} has margin 0"));
                }
                for s in &g.inputs {
                    let Source::Node(src) = *s else {
                        return bad(format!("cell {idx} reads a raw input"));
                    };
                    if src >= design.cells.len() {
                        return bad(format!("cell {idx} reads missing cell {src}"));
                    }
                    let from = &design.cells[src];
                    if from.level >= c.level {
                        return bad(format!("edge {src} -> {idx} does not go forward"));
                    }
                    let ok = from.stage + 1 == c.stage
                        || (from.stage == c.stage && (cfg.levels_per_stage > 1 || c.absorbed));
                    if !ok {
                        return bad(format!(
                            "edge {src} -> {idx} spans stages {} -> {}",
                            from.stage, c.stage
                        ));
                    }
                }
            }
        }
    }
    let last = design.last_stage();
    for o in &design.outputs {
        if o.node >= design.cells.len() {
            return bad(format!("output `{}` refers to missing cell", o.name));
        }
        if design.cells.len() > design.inputs.len() && design.cells[o.node].stage != last {
            return bad(format!("output `{}` is not at the last stage", o.name));
        }
    }
    for s in 1..=last {
        let members: Vec<usize> = design.stage_cells(s);
        if let Some(cap) = cfg.stage_capacity() {
            if members.len() > cap {
                return bad(format!("stage {s} holds {} cells over capacity {cap}", members.len()));
            }
            if let Some(c) = members.iter().find(|&&id| design.block_of(id) >= cfg.blocks.unwrap()) {
                return bad(format!("cell {c} is placed outside the allowed blocks"));
            }
        }
        let mut by_block: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for id in members {
            by_block.entry(design.block_of(id)).or_default().push(id);
        }
        for (b, ids) in by_block {
            let rows = rows_needed(design, ids.iter().copied());
            if rows > cfg.rows {
                return bad(format!("stage {s} block {b} needs {rows} rows"));
            }
        }
        for (b, set) in backward_sets(design, s) {
            if set.len() > cfg.backward_max {
                return bad(format!(
                    "stage {s} block {b} has {} backward connections",
                    set.len()
                ));
            }
        }
    }
    let mut edges = 0;
    for c in &design.cells {
        edges += c.sources().count();
    }
    let fresh = classify_links(design, cols);
    if fresh.len() != edges || (!design.links.is_empty() && fresh != design.links) {
        return bad("link table does not cover every edge".into());
    }
    Ok(())
}

/// Full mapping flow.
pub fn map_tln(tln: &ThresholdLogicNetwork, config: MapConfig) -> Result<MappedDesign, MapError> {
    config.validate()?;
    tln.validate()?;
    for node in &tln.nodes {
        let rows = node.gate.fanin() + bias_rows(node.gate.bias, tln.w_max);
        if rows > config.rows {
            return Err(MapError::RowsExceeded {
                node: node.id,
                rows,
                limit: config.rows,
            });
        }
    }
    let mut design = assign_stages(tln, config.levels_per_stage)?;
    design.config = config;
    materialize(&mut design, config.fanout_max);
    if let Some(capacity) = config.stage_capacity() {
        design.stats.deferred = enforce_capacity(&mut design, capacity, config.fanout_max)?;
    }
    initial_placement(&mut design)?;
    design.stats.reorder_sweeps = reorder(&mut design, config.reorder_sweeps).sweeps;
    let absorbed = absorb_small_layers(&mut design);
    design.stats.absorbed_stages = absorbed.absorbed.len();
    design.stats.skipped_absorptions = absorbed.skipped.len();
    finalize(&mut design);
    validate(&design)?;
    Ok(design)
}

impl MappedDesign {
    /// Human-readable mapping summary.
    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let s = &self.stats;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "stages: {} (k = {})",
            self.last_stage(),
            self.config.levels_per_stage
        );
        let _ = writeln!(
            out,
            "columns: {} ({} logic, {} copies, {} buffers)",
            self.column_count(),
            s.logic,
            s.copies,
            s.buffers
        );
        let _ = writeln!(
            out,
            "links: {} direct, {} routed (length {}), {} backward",
            s.direct_links, s.routed_links, s.route_length, s.backward_links
        );
        if s.deferred > 0 || s.absorbed_stages > 0 || s.skipped_absorptions > 0 {
            let _ = writeln!(
                out,
                "deferred nodes: {}, absorbed stages: {}, skipped absorptions: {}",
                s.deferred, s.absorbed_stages, s.skipped_absorptions
            );
        }
        for st in self.stages.iter().skip(1) {
            let _ = writeln!(
                out,
                "  stage {:>2}: {:>4} cells in {} block(s), depth {}",
                st.index, st.cells, st.blocks, st.depth
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threshold::TlnNode;

    fn node(id: usize, gate: ThresholdGate) -> TlnNode {
        TlnNode {
            id,
            gate,
            label: None,
            stage: None,
        }
    }

    fn buf(src: Source) -> ThresholdGate {
        ThresholdGate::buffer(src)
    }

    /// Chain of `len` buffers from input 0, plus a node at level 1 reading
    /// input 1, both as outputs.
    fn chain(len: usize) -> ThresholdLogicNetwork {
        let mut nodes = vec![node(0, buf(Source::Input(0)))];
        for i in 1..len {
            nodes.push(node(i, buf(Source::Node(i - 1))));
        }
        nodes.push(node(len, buf(Source::Input(1))));
        ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes,
            outputs: vec![
                TlnOutput {
                    name: "y".into(),
                    node: len - 1,
                },
                TlnOutput {
                    name: "z".into(),
                    node: len,
                },
            ],
            fanin_limit: 4,
            w_max: 6,
        }
    }

    fn exhaustive_equal(tln: &ThresholdLogicNetwork, d: &MappedDesign) {
        let n = tln.inputs.len();
        for v in 0..1usize << n {
            let x: Vec<bool> = (0..n).map(|i| (v >> i) & 1 == 1).collect();
            assert_eq!(d.evaluate(&x).unwrap(), tln.evaluate(&x).unwrap(), "vector {v}");
        }
    }

    #[test]
    fn stage_ceiling() {
        for (len, k, stages) in [(4, 1, 4), (4, 2, 2), (5, 2, 3)] {
            let d = assign_stages(&chain(len), k).unwrap();
            assert_eq!(d.last_stage(), stages, "len {len} k {k}");
        }
    }

    #[test]
    fn buffer_chain_over_two_boundaries() {
        // Node at stage 1 read by a node at stage 4: buffers in stages 2, 3.
        let mut tln = chain(4);
        tln.nodes[3].gate = ThresholdGate::new(
            vec![2, 2],
            -3,
            vec![Source::Node(2), Source::Node(4)],
        );
        tln.nodes.swap(3, 4);
        tln.nodes[3].id = 3;
        tln.nodes[4].id = 4;
        tln.nodes[4].gate.inputs = vec![Source::Node(2), Source::Node(3)];
        tln.outputs = vec![
            TlnOutput {
                name: "y".into(),
                node: 4,
            },
        ];
        tln.validate().unwrap();
        let mut d = assign_stages(&tln, 1).unwrap();
        let added = insert_buffers(&mut d);
        assert_eq!(added, 2);
        assert_eq!(d.last_stage(), 4);
        exhaustive_equal(&tln, &d);
    }

    #[test]
    fn balanced_needs_no_buffers() {
        let tln = ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes: vec![
                node(0, ThresholdGate::new(vec![2, 2], -3, vec![Source::Input(0), Source::Input(1)])),
                node(1, ThresholdGate::new(vec![2, 2], -1, vec![Source::Input(0), Source::Input(1)])),
            ],
            outputs: vec![
                TlnOutput {
                    name: "y".into(),
                    node: 0,
                },
                TlnOutput {
                    name: "z".into(),
                    node: 1,
                },
            ],
            fanin_limit: 4,
            w_max: 6,
        };
        let mut d = assign_stages(&tln, 1).unwrap();
        assert_eq!(insert_buffers(&mut d), 0);
    }

    fn fanout_net(fanout: usize) -> ThresholdLogicNetwork {
        let mut nodes = vec![node(0, buf(Source::Input(0)))];
        let mut outputs = Vec::new();
        for i in 1..=fanout {
            nodes.push(node(
                i,
                ThresholdGate::new(vec![2, 2], -3, vec![Source::Node(0), Source::Input(1)]),
            ));
            outputs.push(TlnOutput {
                name: format!("y{i}"),
                node: i,
            });
        }
        ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes,
            outputs,
            fanin_limit: 4,
            w_max: 6,
        }
    }

    #[test]
    fn split_into_ceiling_copies() {
        let tln = fanout_net(9);
        let mut d = assign_stages(&tln, 1).unwrap();
        assert_eq!(split_fanout(&mut d, 4), 2);
        let readers = d.readers();
        let copies: Vec<usize> = d
            .cells
            .iter()
            .filter(|c| c.role == CellRole::Logic { node: 0 })
            .map(|c| readers[c.id].len())
            .collect();
        assert_eq!(copies, vec![4, 4, 1]);
        exhaustive_equal(&tln, &d);

        for (fo, f_max) in [(3, 4), (8, 8)] {
            let mut d = assign_stages(&fanout_net(fo), 1).unwrap();
            assert_eq!(split_fanout(&mut d, f_max), 0);
        }
    }

    #[test]
    fn capacity_defers_node_feeding_two_stages_ahead() {
        // Stage 1 holds five nodes and two input buffers; node 4 feeds only
        // stage 4.
        let a = Source::Input(0);
        let b = Source::Input(1);
        let and = |x, y| ThresholdGate::new(vec![2, 2], -3, vec![x, y]);
        let nodes = vec![
            node(0, and(a, b)),
            node(1, ThresholdGate::new(vec![2, 2], -1, vec![a, b])),
            node(2, ThresholdGate::new(vec![-2, -2], 3, vec![a, b])),
            node(3, ThresholdGate::new(vec![-2, -2], 1, vec![a, b])),
            node(4, ThresholdGate::new(vec![2, -2], -1, vec![a, b])),
            node(5, ThresholdGate::new(vec![2; 3], -5, vec![Source::Node(0), Source::Node(1), b])),
            node(6, ThresholdGate::new(vec![2; 3], -5, vec![Source::Node(2), Source::Node(3), a])),
            node(7, and(Source::Node(5), Source::Node(6))),
            node(8, and(Source::Node(7), Source::Node(4))),
        ];
        let tln = ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes,
            outputs: vec![TlnOutput {
                name: "y".into(),
                node: 8,
            }],
            fanin_limit: 4,
            w_max: 6,
        };
        tln.validate().unwrap();
        let mut d = assign_stages(&tln, 1).unwrap();
        insert_buffers(&mut d);
        assert_eq!(stage_counts(&d)[1], 7);
        let moved = enforce_capacity(&mut d, 6, 8).unwrap();
        assert_eq!(moved, 1);
        let stage_of_node4 = d
            .cells
            .iter()
            .find(|c| c.role == CellRole::Logic { node: 4 })
            .unwrap()
            .stage;
        assert_eq!(stage_of_node4, 2);
        assert!(stage_counts(&d).iter().all(|&c| c <= 6));
        exhaustive_equal(&tln, &d);
    }

    #[test]
    fn capacity_tie_break_lowest_id() {
        // Five stage-2 nodes with equal fan-in, all outputs of the last stage.
        let tln = fanout_net(5);
        let d = assign_stages(&tln, 1).unwrap();
        let picked = pick_deferral(&d, 2).unwrap();
        assert_eq!(d.cells[picked].role, CellRole::Logic { node: 1 });
    }

    #[test]
    fn capacity_untouched_when_under() {
        let tln = fanout_net(3);
        let mut d = assign_stages(&tln, 1).unwrap();
        let before = d.clone();
        assert_eq!(enforce_capacity(&mut d, 32, 8).unwrap(), 0);
        assert_eq!(d, before);
    }

    #[test]
    fn rows_infeasible() {
        let tln = fanout_net(2);
        let cfg = MapConfig {
            rows: 2,
            ..MapConfig::default()
        };
        assert!(matches!(
            map_tln(&tln, cfg),
            Err(MapError::RowsExceeded { limit: 2, .. })
        ));
    }

    #[test]
    fn single_block_all_direct() {
        let tln = fanout_net(6);
        let d = map_tln(&tln, MapConfig::default()).unwrap();
        assert_eq!(d.stats.routed_links, 0);
        assert!(d.stages.iter().skip(1).all(|s| s.blocks == 1));
        exhaustive_equal(&tln, &d);
    }

    /// `width` two-input gates in stage 1, then `tail` (sources, stage
    /// index) gates; the last tail gate is the only output.
    fn tail_net(width: usize, tail: &[&[usize]]) -> ThresholdLogicNetwork {
        let mut nodes: Vec<TlnNode> = (0..width)
            .map(|i| {
                let w = if i % 2 == 0 { 2 } else { -2 };
                node(
                    i,
                    ThresholdGate::new(
                        vec![2, w],
                        if w > 0 { -3 } else { -1 },
                        vec![Source::Input(0), Source::Input(1)],
                    ),
                )
            })
            .collect();
        for srcs in tail {
            let id = nodes.len();
            let inputs: Vec<Source> = srcs.iter().map(|&n| Source::Node(n)).collect();
            nodes.push(node(id, ThresholdGate::new(vec![2; inputs.len()], -1, inputs)));
        }
        let last = nodes.len() - 1;
        ThresholdLogicNetwork {
            inputs: vec!["a".into(), "b".into()],
            nodes,
            outputs: vec![TlnOutput {
                name: "y".into(),
                node: last,
            }],
            fanin_limit: 4,
            w_max: 6,
        }
    }

    #[test]
    fn last_stage_absorbed() {
        // 20 gates, then X = OR(n0, n1) in stage 2 and Y = BUF(X) in stage 3.
        let tln = tail_net(20, &[&[0, 1], &[20]]);
        tln.validate().unwrap();
        let cfg = MapConfig {
            levels_per_stage: 1,
            ..MapConfig::default()
        };
        let d = map_tln(&tln, cfg).unwrap();
        assert_eq!(d.stats.absorbed_stages, 1);
        assert_eq!(d.last_stage(), 2);
        assert_eq!(d.stats.backward_links, 1);
        exhaustive_equal(&tln, &d);

        let strict = MapConfig {
            min_fill: 0.0,
            ..cfg
        };
        let d = map_tln(&tln, strict).unwrap();
        assert_eq!(d.stats.absorbed_stages, 0);
        assert_eq!(d.last_stage(), 3);
    }

    #[test]
    fn absorption_over_bound_is_skipped() {
        // Y reads two stage-2 gates; one backward connection is allowed.
        let tln = tail_net(30, &[&[0, 1, 2, 3], &[4, 5], &[30, 31]]);
        tln.validate().unwrap();
        let cfg = MapConfig {
            levels_per_stage: 1,
            backward_max: 1,
            ..MapConfig::default()
        };
        let d = map_tln(&tln, cfg).unwrap();
        assert_eq!(d.stats.absorbed_stages, 0);
        assert_eq!(d.stats.skipped_absorptions, 2);
        assert_eq!(d.last_stage(), 3);
        exhaustive_equal(&tln, &d);

        let loose = MapConfig {
            backward_max: 2,
            ..cfg
        };
        let d = map_tln(&tln, loose).unwrap();
        assert_eq!(d.stats.absorbed_stages, 1);
        assert_eq!(d.last_stage(), 2);
        exhaustive_equal(&tln, &d);
    }

    #[test]
    fn reorder_never_loses_direct_links() {
        let tln = fanout_net(40);
        let cfg = MapConfig {
            cols: 4,
            levels_per_stage: 1,
            fanout_max: 40,
            ..MapConfig::default()
        };
        let mut d = assign_stages(&tln, 1).unwrap();
        d.config = cfg;
        materialize(&mut d, cfg.fanout_max);
        initial_placement(&mut d).unwrap();
        let stats = reorder(&mut d, 10);
        assert!(stats.direct_after >= stats.direct_before);
        assert_eq!(count_direct(&d), stats.direct_after);
    }

    #[test]
    fn json_round_trip() {
        let tln = fanout_net(3);
        let d = map_tln(&tln, MapConfig::default()).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: MappedDesign = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        validate(&back).unwrap();
        assert!(d.summary().contains("stages: "));
    }
}
