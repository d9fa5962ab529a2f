// SPDX-License-Identifier: Apache-2.0

//! Crossbar-level evaluation of a mapped design: functional simulation under
//! conductance variation, variation tolerance, and power, delay and area
//! estimates with parameter sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{std_switch_time, weight_to_conductance, DeviceError, DeviceParams, SwitchOutcome};
use crate::mapper::{map_tln, CellRole, MapConfig, MapError, MappedDesign};
use crate::netlist::{BooleanNetwork, NetlistError};
use crate::partition::{
    area_estimate, bias_chunks, interconnect_stats, partition_design, AreaParams, Partition,
    PartitionError, PartitionRow,
};
use crate::threshold::{eval_table_packed, ThresholdLogicNetwork};
use crate::vectors::{PackedVectors, VectorMode};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cell {0} has no programmed column")]
    Unprogrammed(usize),
    #[error("design has {design} inputs/{design_out} outputs, reference has {oracle}/{oracle_out}")]
    ShapeMismatch {
        design: usize,
        design_out: usize,
        oracle: usize,
        oracle_out: usize,
    },
    #[error("sigma grid must be non-empty, non-negative and ascending")]
    BadGrid,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("invalid sweep value {0}")]
    BadSweepValue(f64),
    #[error(
        "timing violation: {levels} switching events of {switch_time:e} s need at least one period of {period:e} s"
    )]
    TimingViolation {
        levels: usize,
        switch_time: f64,
        period: f64,
    },
    #[error("drive current {drive:e} A is below the switching threshold {threshold:e} A")]
    NoSwitch { drive: f64, threshold: f64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// One differential conductance pair per input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnConductances {
    /// `(g_plus, g_minus)` per gate input, in input order.
    pub inputs: Vec<(f64, f64)>,
    /// Always-on bias rows.
    pub bias: Vec<(f64, f64)>,
}

impl ColumnConductances {
    pub fn device_count(&self) -> usize {
        2 * (self.inputs.len() + self.bias.len())
    }

    /// Applies `g' = g * max(0, 1 + sigma * eps)`, taking one `eps` per
    /// device from `eps` in row order, plus side before minus side.
    fn perturbed(&self, sigma: f64, eps: &mut impl Iterator<Item = f64>) -> Self {
        let mut scale = |g: f64| g * (1.0 + sigma * eps.next().unwrap_or(0.0)).max(0.0);
        let mut row = |&(p, m): &(f64, f64)| {
            let p = scale(p);
            (p, scale(m))
        };
        ColumnConductances {
            inputs: self.inputs.iter().map(&mut row).collect(),
            bias: self.bias.iter().map(&mut row).collect(),
        }
    }
}

/// Programs the column of a gate with weights `w` and bias `b`.
pub fn program_column(
    weights: &[i32],
    bias: i32,
    w_max: i32,
    params: &DeviceParams,
) -> Result<ColumnConductances, DeviceError> {
    Ok(ColumnConductances {
        inputs: weights
            .iter()
            .map(|&w| weight_to_conductance(w, w_max, params))
            .collect::<Result<_, _>>()?,
        bias: bias_chunks(bias, w_max)
            .into_iter()
            .map(|w| weight_to_conductance(w, w_max, params))
            .collect::<Result<_, _>>()?,
    })
}

/// Net current into the threshold device of a column:
/// `dv * sum_i x_i (g+ - g-)` over inputs, plus every bias row.
pub fn crossbar_net_current(column: &ColumnConductances, x: &[bool], delta_v: f64) -> f64 {
    let inputs: f64 = column
        .inputs
        .iter()
        .zip(x)
        .filter(|(_, &on)| on)
        .map(|(&(p, m), _)| p - m)
        .sum();
    let bias: f64 = column.bias.iter().map(|&(p, m)| p - m).sum();
    delta_v * (inputs + bias)
}

/// Truth tables of a column under the current comparison: bit `r` of
/// `high` is set when row `r` drives at least `+i_eff`, bit `r` of
/// `unknown` when the current falls strictly inside `(-i_eff, +i_eff)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ColumnTable {
    high: u64,
    unknown: u64,
}

fn column_table(column: &ColumnConductances, delta_v: f64, i_eff: f64) -> ColumnTable {
    let n = column.inputs.len();
    let mut x = vec![false; n];
    let mut t = ColumnTable {
        high: 0,
        unknown: 0,
    };
    for r in 0..1usize << n {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = (r >> i) & 1 == 1;
        }
        let current = crossbar_net_current(column, &x, delta_v);
        if current >= i_eff {
            t.high |= 1 << r;
        } else if current > -i_eff {
            t.unknown |= 1 << r;
        }
    }
    t
}

/// A mapped design with every gate column programmed.
#[derive(Debug, Clone)]
pub struct ProgrammedDesign<'a> {
    pub design: &'a MappedDesign,
    /// Indexed by cell id; `None` for primary inputs.
    pub columns: Vec<Option<ColumnConductances>>,
    pub delta_v: f64,
    order: Vec<usize>,
}

impl<'a> ProgrammedDesign<'a> {
    pub fn new(design: &'a MappedDesign, params: &DeviceParams) -> Result<Self, EvalError> {
        let columns = design
            .cells
            .iter()
            .map(|c| match (&c.role, &c.gate) {
                (CellRole::Input { .. }, _) => Ok(None),
                (_, Some(g)) => Ok(Some(program_column(&g.weights, g.bias, design.w_max, params)?)),
                (_, None) => Err(EvalError::Unprogrammed(c.id)),
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(ProgrammedDesign {
            design,
            columns,
            delta_v: params.delta_v,
            order: design.topological_order(),
        })
    }

    pub fn device_count(&self) -> usize {
        self.columns.iter().flatten().map(ColumnConductances::device_count).sum()
    }

    fn tables(&self, i_eff: f64) -> Vec<Option<ColumnTable>> {
        self.columns
            .iter()
            .map(|c| c.as_ref().map(|c| column_table(c, self.delta_v, i_eff)))
            .collect()
    }

    /// Tables after one variation draw. Device `d` (counted over columns in
    /// cell order) always takes the `d`-th normal sample of the seed stream,
    /// so draws at different `sigma` share their random numbers.
    fn perturbed_tables(&self, sigma: f64, seed: u64, i_eff: f64) -> Vec<Option<ColumnTable>> {
        if sigma == 0.0 {
            return self.tables(i_eff);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut eps = std::iter::from_fn(move || Some(StandardNormal.sample(&mut rng)));
        self.columns
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|c| column_table(&c.perturbed(sigma, &mut eps), self.delta_v, i_eff))
            })
            .collect()
    }

    /// Bit-parallel evaluation of one chunk: output words plus a word
    /// marking lanes where some output is indeterminate.
    fn eval_chunk(&self, tables: &[Option<ColumnTable>], xs: &[u64]) -> (Vec<u64>, u64) {
        let cells = &self.design.cells;
        let mut value = vec![0u64; cells.len()];
        let mut unknown = vec![0u64; cells.len()];
        let mut ins = Vec::with_capacity(8);
        for &id in &self.order {
            let cell = &cells[id];
            match (&cell.role, &tables[id]) {
                (CellRole::Input { index }, _) => value[id] = xs[*index],
                (_, Some(t)) => {
                    ins.clear();
                    let mut u = 0;
                    for s in cell.sources() {
                        ins.push(value[s]);
                        u |= unknown[s];
                    }
                    value[id] = eval_table_packed(t.high, &ins);
                    if t.unknown != 0 {
                        u |= eval_table_packed(t.unknown, &ins);
                    }
                    unknown[id] = u;
                }
                (_, None) => {}
            }
        }
        let outs: Vec<u64> = self.design.outputs.iter().map(|o| value[o.node]).collect();
        let u = self
            .design
            .outputs
            .iter()
            .fold(0, |acc, o| acc | unknown[o.node]);
        (outs, u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub sigma: f64,
    pub seed: u64,
    pub vectors: usize,
    /// Vectors with at least one wrong or indeterminate output.
    pub errors: usize,
    /// Wrong or indeterminate output bits.
    pub bit_errors: usize,
    /// Columns whose truth table the variation draw changed.
    pub changed_columns: usize,
}

fn check_shape(design: &MappedDesign, oracle: &BooleanNetwork) -> Result<(), EvalError> {
    if design.inputs.len() != oracle.inputs().len() || design.outputs.len() != oracle.outputs().len()
    {
        return Err(EvalError::ShapeMismatch {
            design: design.inputs.len(),
            design_out: design.outputs.len(),
            oracle: oracle.inputs().len(),
            oracle_out: oracle.outputs().len(),
        });
    }
    Ok(())
}

fn simulate_with_tables(
    prog: &ProgrammedDesign<'_>,
    tables: &[Option<ColumnTable>],
    oracle: &BooleanNetwork,
    vectors: &PackedVectors,
) -> Result<(usize, usize), EvalError> {
    let per_chunk = vectors
        .chunks()
        .par_iter()
        .enumerate()
        .map(|(c, xs)| -> Result<(usize, usize), EvalError> {
            let expected = oracle.evaluate_packed(xs)?;
            let (got, unknown) = prog.eval_chunk(tables, xs);
            let lanes = vectors.lane_mask(c);
            let mut any = unknown & lanes;
            let mut bits = 0;
            for (e, g) in expected.iter().zip(&got) {
                let wrong = ((e ^ g) | unknown) & lanes;
                any |= wrong;
                bits += wrong.count_ones() as usize;
            }
            Ok((any.count_ones() as usize, bits))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_chunk
        .into_iter()
        .fold((0, 0), |(a, b), (x, y)| (a + x, b + y)))
}

/// Simulates one variation draw against the Boolean reference. Every device
/// is perturbed once for the whole vector set.
pub fn simulate_mapped(
    prog: &ProgrammedDesign<'_>,
    oracle: &BooleanNetwork,
    vectors: &PackedVectors,
    sigma: f64,
    seed: u64,
    i_threshold_eff: f64,
) -> Result<SimulationResult, EvalError> {
    check_shape(prog.design, oracle)?;
    let nominal = prog.tables(i_threshold_eff);
    let tables = prog.perturbed_tables(sigma, seed, i_threshold_eff);
    let changed_columns = nominal.iter().zip(&tables).filter(|(a, b)| a != b).count();
    let (errors, bit_errors) = simulate_with_tables(prog, &tables, oracle, vectors)?;
    Ok(SimulationResult {
        sigma,
        seed,
        vectors: vectors.len(),
        errors,
        bit_errors,
        changed_columns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TolerancePoint {
    pub sigma: f64,
    /// Failing vectors summed over all seeds.
    pub errors: usize,
    pub failing_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    /// Largest grid value such that it and every smaller grid value gave no
    /// errors on any seed; 0 when the first grid value already fails.
    pub sigma_star: f64,
    pub vectors_per_probe: usize,
    pub seeds: Vec<u64>,
    pub curve: Vec<TolerancePoint>,
}

/// Sweeps `sigma_grid` with `seeds.len()` variation draws per point. Seed
/// `s` draws its vectors from stream `s` as well, so every grid point sees
/// the same vectors and the same device deviations, only scaled.
pub fn variation_tolerance(
    prog: &ProgrammedDesign<'_>,
    oracle: &BooleanNetwork,
    vectors_per_probe: usize,
    seeds: &[u64],
    sigma_grid: &[f64],
    i_threshold_eff: f64,
) -> Result<ToleranceReport, EvalError> {
    if sigma_grid.is_empty()
        || sigma_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite())
        || sigma_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(EvalError::BadGrid);
    }
    check_shape(prog.design, oracle)?;
    let n = prog.design.inputs.len();
    let nominal = prog.tables(i_threshold_eff);
    let vector_sets: Vec<PackedVectors> = seeds
        .iter()
        .map(|&s| PackedVectors::generate(n, VectorMode::covering(n, vectors_per_probe, s)))
        .collect();
    let baseline: Vec<usize> = vector_sets
        .par_iter()
        .map(|vs| simulate_with_tables(prog, &nominal, oracle, vs).map(|r| r.0))
        .collect::<Result<_, _>>()?;

    let probes: Vec<(usize, usize)> = (0..sigma_grid.len())
        .flat_map(|g| (0..seeds.len()).map(move |s| (g, s)))
        .collect();
    let results: Vec<usize> = probes
        .par_iter()
        .map(|&(g, s)| {
            let tables = prog.perturbed_tables(sigma_grid[g], seeds[s], i_threshold_eff);
            if tables == nominal {
                Ok(baseline[s])
            } else {
                simulate_with_tables(prog, &tables, oracle, &vector_sets[s]).map(|r| r.0)
            }
        })
        .collect::<Result<_, EvalError>>()?;

    let curve: Vec<TolerancePoint> = sigma_grid
        .iter()
        .enumerate()
        .map(|(g, &sigma)| {
            let row = &results[g * seeds.len()..(g + 1) * seeds.len()];
            TolerancePoint {
                sigma,
                errors: row.iter().sum(),
                failing_seeds: row.iter().filter(|&&e| e > 0).count(),
            }
        })
        .collect();
    let sigma_star = curve
        .iter()
        .take_while(|p| p.errors == 0)
        .last()
        .map_or(0.0, |p| p.sigma);
    Ok(ToleranceReport {
        sigma_star,
        vectors_per_probe,
        seeds: seeds.to_vec(),
        curve,
    })
}

/// `start, start + step, ..` up to and including `stop`.
pub fn sigma_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub p_mca: f64,
    pub p_det: f64,
    pub p_interconnect: f64,
    pub p_total: f64,
    /// Terminal voltage after the routing penalty.
    pub delta_v_eff: f64,
    pub drive_current: f64,
    pub rows: usize,
    pub sensing_units: usize,
}

/// Sensing units, driven input rows and routing of a design cut into its
/// configured sub-arrays.
pub fn design_partition(design: &MappedDesign) -> Result<Partition, EvalError> {
    Ok(partition_design(design, Some(design.config.rows), design.config.cols)?)
}

/// Power of `partition` (of `design`) at `k` levels per stage.
pub fn power_report(
    design: &MappedDesign,
    partition: &Partition,
    params: &DeviceParams,
    k: usize,
) -> PowerReport {
    let stats = interconnect_stats(&partition.links);
    let longest = partition.links.iter().map(|l| l.length).max().unwrap_or(0);
    let delta_v_eff = params.delta_v + params.delta_v_penalty * longest as f64;
    let sensing_units = design.column_count();
    let rows = partition.allocated_rows();
    let drive = params.i_dtcs(k);
    let p_det = sensing_units as f64 * params.p_detect * params.f_clk / params.f_ref;
    let p_mca = rows as f64 * drive * delta_v_eff * params.activity;
    let p_interconnect = params.c_wire
        * stats.route_length as f64
        * delta_v_eff
        * delta_v_eff
        * params.f_clk
        * params.activity;
    PowerReport {
        p_mca,
        p_det,
        p_interconnect,
        p_total: p_mca + p_det + p_interconnect,
        delta_v_eff,
        drive_current: drive,
        rows,
        sensing_units,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub pipeline_depth: usize,
    pub clock_period: f64,
    pub latency: f64,
    /// Results per second.
    pub throughput: f64,
    pub drive_current: f64,
    /// `None` when the drive cannot switch the device at all.
    pub switch_time: Option<f64>,
    /// Switching events one stage must fit in a clock period.
    pub levels_per_period: usize,
    pub timing_ok: bool,
}

/// Delay figures without failing on a timing violation. A stage must finish
/// `max(k, longest same-stage chain)` switching events strictly within one
/// clock period.
pub fn compute_delay(design: &MappedDesign, params: &DeviceParams, drive: f64) -> DelayReport {
    let period = 1.0 / params.f_clk;
    let depth = design.last_stage();
    let levels = design
        .stages
        .iter()
        .skip(1)
        .map(|s| s.depth)
        .max()
        .unwrap_or(0)
        .max(design.config.levels_per_stage);
    let switch_time = match std_switch_time(drive, params) {
        SwitchOutcome::Switch { time, .. } => Some(time),
        SwitchOutcome::NoSwitch => None,
    };
    let timing_ok = depth == 0 || switch_time.is_some_and(|t| (levels as f64) * t < period);
    DelayReport {
        pipeline_depth: depth,
        clock_period: period,
        latency: depth as f64 * period,
        throughput: params.f_clk,
        drive_current: drive,
        switch_time,
        levels_per_period: levels,
        timing_ok,
    }
}

/// [`compute_delay`], failing on a timing violation.
pub fn delay_report(
    design: &MappedDesign,
    params: &DeviceParams,
    drive: f64,
) -> Result<DelayReport, EvalError> {
    let r = compute_delay(design, params, drive);
    if r.timing_ok {
        return Ok(r);
    }
    match r.switch_time {
        None => Err(EvalError::NoSwitch {
            drive,
            threshold: params.i_threshold,
        }),
        Some(t) => Err(EvalError::TimingViolation {
            levels: r.levels_per_period,
            switch_time: t,
            period: r.clock_period,
        }),
    }
}

/// Power, delay, energy and area of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figures {
    pub power: PowerReport,
    pub delay: DelayReport,
    /// `P_total * latency`.
    pub energy: f64,
    pub edp: f64,
    pub area: f64,
    pub routed_links: usize,
    pub route_length: usize,
    pub buffers: usize,
}

pub fn figures(
    design: &MappedDesign,
    partition: &Partition,
    params: &DeviceParams,
    drive: Option<f64>,
) -> Figures {
    let k = design.config.levels_per_stage;
    let power = power_report(design, partition, params, k);
    let delay = compute_delay(design, params, drive.unwrap_or(power.drive_current));
    let energy = power.p_total * delay.latency;
    let stats = interconnect_stats(&partition.links);
    Figures {
        power,
        delay,
        energy,
        edp: energy * delay.latency,
        area: area_estimate(partition, &AreaParams::default()),
        routed_links: stats.routed,
        route_length: stats.route_length,
        buffers: design.buffer_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Terminal voltage, grid in mV.
    Dv,
    /// Device threshold, grid in µA.
    Ith,
    /// Levels per stage; remaps the network.
    K,
    /// Sub-array columns; rows uncapped.
    Subarray,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Dv => "dv",
            SweepParam::Ith => "ith",
            SweepParam::K => "k",
            SweepParam::Subarray => "subarray",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dv" => Ok(SweepParam::Dv),
            "ith" => Ok(SweepParam::Ith),
            "k" => Ok(SweepParam::K),
            "subarray" => Ok(SweepParam::Subarray),
            other => Err(format!("unknown sweep parameter `{other}` (dv, ith, k, subarray)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub figures: Figures,
}

fn whole(v: f64, min: usize) -> Result<usize, EvalError> {
    if v.fract() != 0.0 || v < min as f64 {
        return Err(EvalError::BadSweepValue(v));
    }
    Ok(v as usize)
}

/// One evaluation per grid point. Grid points are independent and run in
/// parallel; the result keeps grid order.
pub fn sweep(
    tln: &ThresholdLogicNetwork,
    design: &MappedDesign,
    params: &DeviceParams,
    param: SweepParam,
    grid: &[f64],
    drive: Option<f64>,
) -> Result<Vec<SweepRow>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    grid.par_iter()
        .map(|&value| {
            let mut p = params.clone();
            let figures = match param {
                SweepParam::Dv | SweepParam::Ith => {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(EvalError::BadSweepValue(value));
                    }
                    if param == SweepParam::Dv {
                        p.delta_v = value * 1e-3;
                    } else {
                        p.i_threshold = value * 1e-6;
                    }
                    p.validate()?;
                    figures(design, &design_partition(design)?, &p, drive)
                }
                SweepParam::K => {
                    let config = MapConfig {
                        levels_per_stage: whole(value, 1)?,
                        ..design.config
                    };
                    let d = map_tln(tln, config)?;
                    figures(&d, &design_partition(&d)?, &p, drive)
                }
                SweepParam::Subarray => {
                    let part = partition_design(design, None, whole(value, 1)?)?;
                    figures(design, &part, &p, drive)
                }
            };
            Ok(SweepRow { value, figures })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "param,value,p_mca,p_det,p_interconnect,p_total,latency,energy,edp,area,buffers,routed_links,route_length,timing_ok";

pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let f = &r.figures;
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{}\n",
            param.name(),
            r.value,
            f.power.p_mca,
            f.power.p_det,
            f.power.p_interconnect,
            f.power.p_total,
            f.delay.latency,
            f.energy,
            f.edp,
            f.area,
            f.buffers,
            f.routed_links,
            f.route_length,
            f.delay.timing_ok
        ));
    }
    out
}

/// Sub-array sweep rows in the partition CSV layout.
pub fn partition_rows(rows: &[SweepRow]) -> Vec<PartitionRow> {
    rows.iter()
        .map(|r| PartitionRow {
            subarray_dim: r.value as usize,
            power: r.figures.power.p_total,
            area: r.figures.area,
            routed_links: r.figures.routed_links,
            route_length: r.figures.route_length,
        })
        .collect()
}

/// Externally supplied reference figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub energy: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRatios {
    pub baseline: Baseline,
    /// Baseline over design; above 1 means the design is better.
    pub energy_ratio: f64,
    pub delay_ratio: f64,
    pub edp_ratio: f64,
}

pub fn baseline_ratios(figures: &Figures, baseline: Baseline) -> BaselineRatios {
    let energy_ratio = baseline.energy / figures.energy;
    let delay_ratio = baseline.delay / figures.delay.latency;
    BaselineRatios {
        baseline,
        energy_ratio,
        delay_ratio,
        edp_ratio: energy_ratio * delay_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{synthesize_tln, SynthesisConfig};
    use crate::threshold::{eval_tlg, Source, ThresholdGate};

    fn c17() -> BooleanNetwork {
        crate::parse_bench(include_str!("../data/c17.bench")).unwrap()
    }

    fn mapped(net: &BooleanNetwork, fanin: usize, k: usize) -> (ThresholdLogicNetwork, MappedDesign) {
        let (tln, _) = synthesize_tln(
            net,
            SynthesisConfig {
                fanin_limit: fanin,
                w_max: 6,
            },
        )
        .unwrap();
        let d = map_tln(
            &tln,
            MapConfig {
                levels_per_stage: k,
                ..MapConfig::default()
            },
        )
        .unwrap();
        (tln, d)
    }

    #[test]
    fn single_weight_current() {
        let p = DeviceParams::default();
        let col = program_column(&[6], 0, 6, &p).unwrap();
        let i = crossbar_net_current(&col, &[true], 0.05);
        // 20 µS - 0.1 µS of the off device
        assert!((i - 0.995e-6).abs() < 1e-12, "{i}");
        let ideal = ColumnConductances {
            inputs: vec![(20e-6, 0.0)],
            bias: vec![],
        };
        assert!((crossbar_net_current(&ideal, &[true], 0.05) - 1.0e-6).abs() < 1e-15);
        assert_eq!(crossbar_net_current(&col, &[false], 0.05), 0.0);
    }

    #[test]
    fn and2_sign_matches_gate() {
        let p = DeviceParams::default();
        let gate = ThresholdGate::new(vec![2, 2], -3, vec![Source::Input(0), Source::Input(1)]);
        let col = program_column(&gate.weights, gate.bias, 6, &p).unwrap();
        for r in 0..4 {
            let x = [r & 1 == 1, r & 2 == 2];
            let i = crossbar_net_current(&col, &x, p.delta_v);
            assert_eq!(i >= 0.0, eval_tlg(&gate, &x).unwrap(), "row {r}");
        }
    }

    #[test]
    fn bias_rows_split() {
        let p = DeviceParams::default();
        let col = program_column(&[2, 2, 2, 2], -7, 6, &p).unwrap();
        assert_eq!(col.bias.len(), 2);
        assert_eq!(col.device_count(), 12);
    }

    #[test]
    fn ideal_simulation_is_exact() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let prog = ProgrammedDesign::new(&d, &p).unwrap();
        let vs = PackedVectors::exhaustive(5);
        let r = simulate_mapped(&prog, &net, &vs, 0.0, 1, 0.0).unwrap();
        assert_eq!((r.errors, r.vectors, r.changed_columns), (0, 32, 0));
    }

    #[test]
    fn gross_variation_breaks_c17() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let prog = ProgrammedDesign::new(&d, &p).unwrap();
        let vs = PackedVectors::exhaustive(5);
        let failing = (0..10)
            .filter(|&s| simulate_mapped(&prog, &net, &vs, 0.5, s, 0.0).unwrap().errors > 0)
            .count();
        assert!(failing > 0);
    }

    #[test]
    fn indeterminate_band_counts_as_error() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let prog = ProgrammedDesign::new(&d, &p).unwrap();
        let vs = PackedVectors::exhaustive(5);
        // Far above any column current: every row is indeterminate.
        let r = simulate_mapped(&prog, &net, &vs, 0.0, 1, 1e-3).unwrap();
        assert_eq!(r.errors, 32);
    }

    #[test]
    fn tolerance_prefix_rule() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let prog = ProgrammedDesign::new(&d, &p).unwrap();
        let rep = variation_tolerance(&prog, &net, 32, &[1, 2], &[0.0, 0.01, 0.9], 0.0).unwrap();
        assert_eq!(rep.sigma_star, 0.01);
        assert!(rep.curve[2].errors > 0);
        assert!(matches!(
            variation_tolerance(&prog, &net, 32, &[1], &[0.1, 0.05], 0.0),
            Err(EvalError::BadGrid)
        ));
        assert!(matches!(
            variation_tolerance(&prog, &net, 32, &[1], &[], 0.0),
            Err(EvalError::BadGrid)
        ));
    }

    #[test]
    fn grid_helper() {
        let g = sigma_grid(0.01, 0.05, 0.01);
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], 0.05);
        assert_eq!(sigma_grid(0.005, 0.3, 0.005)[9], 0.05);
    }

    #[test]
    fn empty_design_has_no_power() {
        let tln = ThresholdLogicNetwork {
            inputs: vec![],
            nodes: vec![],
            outputs: vec![],
            fanin_limit: 4,
            w_max: 6,
        };
        let d = map_tln(&tln, MapConfig::default()).unwrap();
        let p = DeviceParams::default();
        let part = design_partition(&d).unwrap();
        let pw = power_report(&d, &part, &p, 2);
        assert_eq!((pw.p_mca, pw.p_det, pw.p_interconnect, pw.p_total), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn power_scales_with_delta_v() {
        let net = c17();
        let (_, d) = mapped(&net, 2, 1);
        let p = DeviceParams::default();
        // One-column sub-arrays force routing, so the quadratic term shows.
        let part = partition_design(&d, None, 1).unwrap();
        let a = power_report(&d, &part, &p, 1);
        let mut p2 = p.clone();
        p2.delta_v *= 2.0;
        let b = power_report(&d, &part, &p2, 1);
        assert!((b.p_mca / a.p_mca - 2.0).abs() < 1e-12);
        assert!(a.p_interconnect > 0.0);
        assert!((b.p_interconnect / a.p_interconnect - 4.0).abs() < 1e-12);
        assert_eq!(a.p_det, b.p_det);
    }

    #[test]
    fn strict_timing_rule() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        assert!(matches!(
            delay_report(&d, &p, 2e-6),
            Err(EvalError::TimingViolation { levels: 2, .. })
        ));
        assert!(matches!(delay_report(&d, &p, 1e-6), Err(EvalError::NoSwitch { .. })));
        let ok = delay_report(&d, &p, p.i_dtcs(2)).unwrap();
        assert_eq!(ok.latency, ok.pipeline_depth as f64 * 2e-9);
        let (_, d1) = mapped(&net, 4, 1);
        assert!(delay_report(&d1, &p, 2.5e-6).is_ok());
    }

    #[test]
    fn sweep_single_point_matches_report() {
        let net = c17();
        let (tln, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let rows = sweep(&tln, &d, &p, SweepParam::Dv, &[50.0], None).unwrap();
        let direct = figures(&d, &design_partition(&d).unwrap(), &p, None);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].figures, direct);
        assert!(matches!(
            sweep(&tln, &d, &p, SweepParam::Dv, &[], None),
            Err(EvalError::EmptyGrid)
        ));
        assert!(matches!(
            sweep(&tln, &d, &p, SweepParam::K, &[1.5], None),
            Err(EvalError::BadSweepValue(_))
        ));
        let csv = sweep_csv(SweepParam::Dv, &rows);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), SWEEP_CSV_HEADER);
    }

    #[test]
    fn ratios() {
        let net = c17();
        let (_, d) = mapped(&net, 4, 2);
        let p = DeviceParams::default();
        let f = figures(&d, &design_partition(&d).unwrap(), &p, None);
        let r = baseline_ratios(
            &f,
            Baseline {
                energy: f.energy * 100.0,
                delay: f.delay.latency * 10.0,
            },
        );
        assert!((r.energy_ratio - 100.0).abs() < 1e-9);
        assert!((r.edp_ratio - 1000.0).abs() < 1e-6);
    }
}
