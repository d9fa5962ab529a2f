// SPDX-License-Identifier: Apache-2.0

//! Sub-array partitioning and interconnect accounting.
//!
//! A stage is cut into sub-arrays of `cols` columns by slot: the block of a
//! cell is `slot / cols`. Because the cut only depends on slot numbers,
//! blocks at a power-of-two width nest inside the blocks at twice that
//! width.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::MappedDesign;

/// 45 nm feature size.
pub const DEFAULT_FEATURE_SIZE: f64 = 45e-9;
pub const DEFAULT_PERIPHERY: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("sub-arrays need at least one column")]
    ZeroColumns,
    #[error("cell {cell} needs {rows} rows but sub-arrays have {limit}")]
    RowsExceeded { cell: usize, rows: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// Face-to-face blocks: same block index in consecutive stages, or the
    /// same block within a stage.
    Direct,
    /// Through the interconnect network.
    Routed,
    /// From an output column back to an input row of its own block.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub kind: LinkKind,
    /// Distance between block centres in block pitches (0 unless routed).
    pub length: usize,
}

/// Always-on rows needed to realize bias `b` with per-row weight at most
/// `w_max`.
pub fn bias_rows(bias: i32, w_max: i32) -> usize {
    (bias.unsigned_abs() as usize).div_ceil(w_max.max(1) as usize)
}

/// Per-row bias weights: full `w_max` chunks first, then the remainder, all
/// with the sign of `bias`.
pub fn bias_chunks(bias: i32, w_max: i32) -> Vec<i32> {
    let mut left = bias.abs();
    let mut out = Vec::with_capacity(bias_rows(bias, w_max));
    while left > 0 {
        let c = left.min(w_max);
        out.push(c * bias.signum());
        left -= c;
    }
    out
}

/// Classifies every gate input edge of `design` with blocks `slot / cols`.
pub fn classify_links(design: &MappedDesign, cols: usize) -> Vec<Link> {
    let mut links = Vec::new();
    for c in &design.cells {
        for from in c.sources() {
            let src = &design.cells[from];
            let (bs, bd) = (src.slot / cols, c.slot / cols);
            let kind = if bs != bd {
                LinkKind::Routed
            } else if src.stage == c.stage && c.absorbed {
                LinkKind::Backward
            } else {
                LinkKind::Direct
            };
            links.push(Link {
                from,
                to: c.id,
                kind,
                length: if kind == LinkKind::Routed { bs.abs_diff(bd) } else { 0 },
            });
        }
    }
    links
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubArray {
    pub stage: usize,
    pub index: usize,
    pub cells: Vec<usize>,
    /// Allocated rows: distinct input signals plus shared bias rows.
    pub rows: usize,
    pub cols: usize,
}

impl SubArray {
    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }
}

fn rows_for(design: &MappedDesign, cells: &[usize]) -> usize {
    let mut signals = BTreeSet::new();
    let mut bias = 0;
    for &id in cells {
        let c = &design.cells[id];
        signals.extend(c.sources());
        if let Some(g) = &c.gate {
            bias = bias.max(bias_rows(g.bias, design.w_max));
        }
    }
    signals.len() + bias
}

/// Bins the cells of one stage into sub-arrays of `cols` columns. With a row
/// limit, a sub-array whose rows overflow is closed early and the overflow
/// goes to fresh sub-arrays numbered after the last regular one.
pub fn partition_stage(
    design: &MappedDesign,
    stage: usize,
    rows: Option<usize>,
    cols: usize,
) -> Result<Vec<SubArray>, PartitionError> {
    if cols == 0 {
        return Err(PartitionError::ZeroColumns);
    }
    let mut bins: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for id in design.stage_cells(stage) {
        if let Some(limit) = rows {
            let need = rows_for(design, &[id]);
            if need > limit {
                return Err(PartitionError::RowsExceeded {
                    cell: id,
                    rows: need,
                    limit,
                });
            }
        }
        bins.entry(design.cells[id].slot / cols).or_default().push(id);
    }
    let mut next_index = bins.keys().next_back().map_or(0, |k| k + 1);
    let mut out = Vec::new();
    for (index, cells) in bins {
        let mut current: Vec<usize> = Vec::new();
        let mut current_index = index;
        for id in cells {
            let over = rows.is_some_and(|limit| {
                let mut trial = current.clone();
                trial.push(id);
                rows_for(design, &trial) > limit
            });
            if over {
                out.push(SubArray {
                    stage,
                    index: current_index,
                    rows: rows_for(design, &current),
                    cells: std::mem::take(&mut current),
                    cols,
                });
                current_index = next_index;
                next_index += 1;
            }
            current.push(id);
        }
        out.push(SubArray {
            stage,
            index: current_index,
            rows: rows_for(design, &current),
            cells: current,
            cols,
        });
    }
    Ok(out)
}

/// A whole design cut at one sub-array width. Stage 0 (primary inputs) is
/// grouped for link classification only and holds no arrays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub cols: usize,
    pub rows: Option<usize>,
    pub subarrays: Vec<SubArray>,
    pub links: Vec<Link>,
}

impl Partition {
    pub fn allocated_rows(&self) -> usize {
        self.subarrays.iter().map(|s| s.rows).sum()
    }

    pub fn allocated_cells(&self) -> usize {
        self.subarrays.iter().map(SubArray::cell_count).sum()
    }
}

pub fn partition_design(
    design: &MappedDesign,
    rows: Option<usize>,
    cols: usize,
) -> Result<Partition, PartitionError> {
    if cols == 0 {
        return Err(PartitionError::ZeroColumns);
    }
    let mut subarrays = Vec::new();
    let mut block_of = vec![0usize; design.cells.len()];
    for stage in 0..=design.last_stage() {
        let parts = partition_stage(design, stage, rows, cols)?;
        for p in parts {
            for &c in &p.cells {
                block_of[c] = p.index;
            }
            if stage > 0 {
                subarrays.push(p);
            }
        }
    }
    let mut links = Vec::new();
    for c in &design.cells {
        for from in c.sources() {
            let (bs, bd) = (block_of[from], block_of[c.id]);
            let kind = if bs != bd {
                LinkKind::Routed
            } else if design.cells[from].stage == c.stage && c.absorbed {
                LinkKind::Backward
            } else {
                LinkKind::Direct
            };
            links.push(Link {
                from,
                to: c.id,
                kind,
                length: if kind == LinkKind::Routed { bs.abs_diff(bd) } else { 0 },
            });
        }
    }
    Ok(Partition {
        cols,
        rows,
        subarrays,
        links,
    })
}

/// Width of a single sub-array covering the widest stage.
pub fn single_array_width(design: &MappedDesign) -> usize {
    design
        .cells
        .iter()
        .map(|c| c.slot + 1)
        .max()
        .unwrap_or(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterconnectStats {
    /// Links needing no routing network (backward connections included).
    pub direct: usize,
    pub routed: usize,
    pub backward: usize,
    pub total: usize,
    /// Sum of routed distances in block pitches.
    pub route_length: usize,
}

pub fn interconnect_stats(links: &[Link]) -> InterconnectStats {
    let mut s = InterconnectStats {
        total: links.len(),
        ..InterconnectStats::default()
    };
    for l in links {
        match l.kind {
            LinkKind::Routed => {
                s.routed += 1;
                s.route_length += l.length;
            }
            LinkKind::Backward => {
                s.backward += 1;
                s.direct += 1;
            }
            LinkKind::Direct => s.direct += 1,
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaParams {
    /// One 1T1M cell, m².
    pub cell_area: f64,
    /// Periphery as a fraction of array area, per block.
    pub periphery: f64,
    /// Cell rows of wiring per unit route length.
    pub interconnect_rows: f64,
}

impl Default for AreaParams {
    fn default() -> Self {
        AreaParams {
            cell_area: 4.0 * DEFAULT_FEATURE_SIZE * DEFAULT_FEATURE_SIZE,
            periphery: DEFAULT_PERIPHERY,
            interconnect_rows: 1.0,
        }
    }
}

/// Array area with periphery, plus interconnect area proportional to route
/// length (one sub-array width of cells per row of wiring).
pub fn area_estimate(partition: &Partition, params: &AreaParams) -> f64 {
    let arrays: f64 = partition
        .subarrays
        .iter()
        .map(|s| s.cell_count() as f64 * params.cell_area * (1.0 + params.periphery))
        .sum();
    let route = interconnect_stats(&partition.links).route_length as f64;
    arrays + route * params.interconnect_rows * partition.cols as f64 * params.cell_area
}

/// One plot-ready line of a sub-array sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub subarray_dim: usize,
    pub power: f64,
    pub area: f64,
    pub routed_links: usize,
    pub route_length: usize,
}

pub const PARTITION_CSV_HEADER: &str = "subarray_dim,power,area,routed_links,route_length";

pub fn partition_csv(rows: &[PartitionRow]) -> String {
    let mut out = String::from(PARTITION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{},{}\n",
            r.subarray_dim, r.power, r.area, r.routed_links, r.route_length
        ));
    }
    out
}
