// SPDX-License-Identifier: Apache-2.0

//! Behavioral device models: memristor conductance levels and feedback
//! programming, and the domain-wall threshold device (switching time and
//! MTJ read-out).
//!
//! All quantities are SI (A, V, Ω, S, s, W, F, m).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default device parameters, as shipped in `device_defaults.json`.
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../data/device_defaults.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("memristor range is empty: {min} .. {max}")]
    BadRange { min: f64, max: f64 },
    #[error("weight {weight} exceeds the weight bound {w_max}")]
    WeightRange { weight: i32, w_max: i32 },
    #[error("read current {current:e} A disturbs the threshold device (threshold {threshold:e} A)")]
    ReadDisturb { current: f64, threshold: f64 },
    #[error("target {target} Ω lies outside {min} .. {max} Ω")]
    TargetRange { target: f64, min: f64, max: f64 },
    #[error("programming current {current:e} A is below the write threshold {threshold:e} A")]
    BelowWriteThreshold { current: f64, threshold: f64 },
    #[error("bad device parameter file: {0}")]
    Parse(String),
}

/// Parameters the models carry for completeness but never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticMetadata {
    /// Free-domain thickness, width, length (m).
    pub free_domain_size: [f64; 3],
    /// Saturation magnetization (A/m).
    pub ms: f64,
    /// Anisotropy energy barrier in units of kT.
    pub ku2v_kt: f64,
    pub beta: f64,
    pub alpha: f64,
    pub mtj_oxide_thickness: f64,
    /// MTJ width, length (m).
    pub mtj_area: [f64; 2],
    pub cmos_node: f64,
}

impl Default for MagneticMetadata {
    fn default() -> Self {
        MagneticMetadata {
            free_domain_size: [3e-9, 20e-9, 40e-9],
            // 400 emu/cm³
            ms: 4.0e5,
            ku2v_kt: 20.0,
            beta: 0.1,
            alpha: 0.01,
            mtj_oxide_thickness: 1.8e-9,
            mtj_area: [20e-9, 20e-9],
            cmos_node: 45e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Threshold device switching current.
    pub i_threshold: f64,
    /// Switching time at `i_threshold`.
    pub t_switch_ref: f64,
    /// Supply at the threshold device terminal.
    pub v_supply: f64,
    /// Crossbar terminal voltage.
    pub delta_v: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Resistance of an unprogrammed (off) device.
    pub r_off: f64,
    pub r_mtj_parallel: f64,
    /// (R_AP - R_P) / R_P.
    pub tmr: f64,
    /// Power of one sensing unit at `f_ref`.
    pub p_detect: f64,
    pub f_ref: f64,
    pub f_clk: f64,
    /// Memristor write threshold current.
    pub i_write_threshold: f64,
    /// Drive of one current source at `i_threshold` = 2 µA and k = 1.
    pub i_dtcs_base: f64,
    /// Wire capacitance per block pitch of routing.
    pub c_wire: f64,
    /// Switching activity.
    pub activity: f64,
    /// Extra terminal voltage per block pitch of routing (0 disables).
    #[serde(default)]
    pub delta_v_penalty: f64,
    #[serde(default)]
    pub metadata: MagneticMetadata,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            i_threshold: 2e-6,
            t_switch_ref: 1e-9,
            v_supply: 0.6,
            delta_v: 0.05,
            r_min: 50e3,
            r_max: 1e6,
            r_off: 10e6,
            r_mtj_parallel: 300e3,
            tmr: 4.0,
            p_detect: 0.15e-6,
            f_ref: 500e6,
            f_clk: 500e6,
            i_write_threshold: 5e-6,
            i_dtcs_base: 5e-6,
            c_wire: 0.2e-15,
            activity: 0.5,
            delta_v_penalty: 0.0,
            metadata: MagneticMetadata::default(),
        }
    }
}

impl DeviceParams {
    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let p: DeviceParams =
            serde_json::from_str(text).map_err(|e| DeviceError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_PARAMS_JSON).expect("shipped parameters are valid")
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [
            ("i_threshold", self.i_threshold),
            ("t_switch_ref", self.t_switch_ref),
            ("v_supply", self.v_supply),
            ("delta_v", self.delta_v),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("r_off", self.r_off),
            ("r_mtj_parallel", self.r_mtj_parallel),
            ("tmr", self.tmr),
            ("p_detect", self.p_detect),
            ("f_ref", self.f_ref),
            ("f_clk", self.f_clk),
            ("i_write_threshold", self.i_write_threshold),
            ("i_dtcs_base", self.i_dtcs_base),
            ("c_wire", self.c_wire),
            ("activity", self.activity),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DeviceError::NotPositive { name, value });
            }
        }
        if self.r_min >= self.r_max || self.r_max > self.r_off {
            return Err(DeviceError::BadRange {
                min: self.r_min,
                max: self.r_max,
            });
        }
        if self.delta_v_penalty < 0.0 {
            return Err(DeviceError::NotPositive {
                name: "delta_v_penalty",
                value: self.delta_v_penalty,
            });
        }
        Ok(())
    }

    /// Conductance of one weight unit: the largest weight maps to `1 / r_min`.
    pub fn g_unit(&self, w_max: i32) -> f64 {
        1.0 / self.r_min / w_max as f64
    }

    pub fn g_off(&self) -> f64 {
        1.0 / self.r_off
    }

    /// Current-source drive for `k` array levels per stage. Scales with the
    /// device threshold and with `k`.
    pub fn i_dtcs(&self, k: usize) -> f64 {
        self.i_dtcs_base * (self.i_threshold / 2e-6) * k as f64
    }
}

/// `(g_plus, g_minus)` for a signed weight: `|w| * g_unit` on the side of
/// the sign, the other side off; zero leaves both off.
pub fn weight_to_conductance(
    w: i32,
    w_max: i32,
    params: &DeviceParams,
) -> Result<(f64, f64), DeviceError> {
    if w.abs() > w_max {
        return Err(DeviceError::WeightRange { weight: w, w_max });
    }
    let off = params.g_off();
    let g = w.unsigned_abs() as f64 * params.g_unit(w_max);
    Ok(match w.signum() {
        1 => (g, off),
        -1 => (off, g),
        _ => (off, off),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchOutcome {
    /// Switches after `time` seconds; `up` is the sign of the current.
    Switch { time: f64, up: bool },
    NoSwitch,
}

/// Linear drive model: `t = t_ref * I_th / |I|` at or above threshold.
pub fn std_switch_time(i_net: f64, params: &DeviceParams) -> SwitchOutcome {
    let mag = i_net.abs();
    if mag >= params.i_threshold {
        SwitchOutcome::Switch {
            time: params.t_switch_ref * params.i_threshold / mag,
            up: i_net > 0.0,
        }
    } else {
        SwitchOutcome::NoSwitch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadOut {
    pub r_parallel: f64,
    pub r_antiparallel: f64,
    pub r_reference: f64,
    pub i_read_parallel: f64,
    pub i_read_antiparallel: f64,
    pub v_swing: f64,
}

/// Read of the device MTJ through a divider with a fixed reference MTJ at
/// the geometric mean of the two states.
pub fn std_read_unchecked(params: &DeviceParams) -> ReadOut {
    let rp = params.r_mtj_parallel;
    let rap = rp * (1.0 + params.tmr);
    let rref = (rp * rap).sqrt();
    let v = params.v_supply;
    ReadOut {
        r_parallel: rp,
        r_antiparallel: rap,
        r_reference: rref,
        i_read_parallel: v / (rp + rref),
        i_read_antiparallel: v / (rap + rref),
        v_swing: v * rref * (1.0 / (rp + rref) - 1.0 / (rap + rref)),
    }
}

/// [`std_read_unchecked`], failing when a read current could switch the
/// device.
pub fn std_read(params: &DeviceParams) -> Result<ReadOut, DeviceError> {
    let r = std_read_unchecked(params);
    for current in [r.i_read_parallel, r.i_read_antiparallel] {
        if current >= params.i_threshold {
            return Err(DeviceError::ReadDisturb {
                current,
                threshold: params.i_threshold,
            });
        }
    }
    Ok(r)
}

/// A programmable memristor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorState {
    pub resistance: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Below this current the resistance does not move.
    pub write_threshold: f64,
}

impl MemristorState {
    pub fn erased(params: &DeviceParams) -> Self {
        MemristorState {
            resistance: params.r_max,
            r_min: params.r_min,
            r_max: params.r_max,
            write_threshold: params.i_write_threshold,
        }
    }

    /// One programming step: resistance falls by `k_w * I * dt` while the
    /// current is above the write threshold, clamped to the range.
    pub fn apply(&mut self, current: f64, k_w: f64, dt: f64) {
        if current.abs() < self.write_threshold {
            return;
        }
        self.resistance = (self.resistance - k_w * current * dt).clamp(self.r_min, self.r_max);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteConfig {
    pub i_prog: f64,
    /// Comparator reference DAC resolution; `None` is ideal.
    pub comparator_bits: Option<u32>,
    pub comparator_offset_sigma: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Delay between the comparator tripping and the source turning off.
    pub response_delay: f64,
    /// Resistance slope per ampere (Ω / (A·s)).
    pub k_w: f64,
}

impl Default for WriteConfig {
    fn default() -> Self {
        WriteConfig {
            i_prog: 10e-6,
            comparator_bits: Some(8),
            comparator_offset_sigma: 0.5e-3,
            dt: 0.1e-9,
            t_max: 2e-6,
            response_delay: 1e-9,
            k_w: default_k_w(&DeviceParams::default()),
        }
    }
}

/// Slope for which a full-range write at 10 µA takes 1 µs.
pub fn default_k_w(params: &DeviceParams) -> f64 {
    (params.r_max - params.r_min) / (10e-6 * 1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteResult {
    pub target: f64,
    pub final_resistance: f64,
    /// `|R_final - R_target| / R_target`.
    pub error_fraction: f64,
    pub elapsed: f64,
    pub timed_out: bool,
}

/// Quantizes `v` to the nearest of `2^bits` levels spanning `[lo, hi]`.
fn quantize(v: f64, lo: f64, hi: f64, bits: Option<u32>) -> f64 {
    match bits {
        None => v,
        Some(b) => {
            let steps = ((1u64 << b.min(52)) - 1).max(1) as f64;
            let code = ((v - lo) / (hi - lo) * steps).round().clamp(0.0, steps);
            lo + code * (hi - lo) / steps
        }
    }
}

/// Programs an erased memristor toward `target` with a constant current.
/// The source voltage `I * R` is compared every `dt` against the
/// DAC-quantized target voltage plus one Gaussian offset drawn for the
/// write; the source stays on `response_delay` past the trip point. Running
/// out of time is reported in the result, not as an error.
pub fn write_with_feedback(
    target: f64,
    config: &WriteConfig,
    params: &DeviceParams,
    seed: u64,
) -> Result<WriteResult, DeviceError> {
    if !(params.r_min..=params.r_max).contains(&target) {
        return Err(DeviceError::TargetRange {
            target,
            min: params.r_min,
            max: params.r_max,
        });
    }
    if config.i_prog < params.i_write_threshold {
        return Err(DeviceError::BelowWriteThreshold {
            current: config.i_prog,
            threshold: params.i_write_threshold,
        });
    }
    for (name, value) in [("dt", config.dt), ("k_w", config.k_w)] {
        if !(value > 0.0) {
            return Err(DeviceError::NotPositive { name, value });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = if config.comparator_offset_sigma > 0.0 {
        Normal::new(0.0, config.comparator_offset_sigma)
            .expect("positive sigma")
            .sample(&mut rng)
    } else {
        0.0
    };
    let i = config.i_prog;
    let v_ref = quantize(i * target, i * params.r_min, i * params.r_max, config.comparator_bits) + offset;

    let mut cell = MemristorState::erased(params);
    let mut t = 0.0;
    let mut tripped = false;
    while t < config.t_max {
        if i * cell.resistance <= v_ref {
            tripped = true;
            break;
        }
        cell.apply(i, config.k_w, config.dt);
        t += config.dt;
    }
    if tripped {
        let lag = config.response_delay.min(config.t_max - t).max(0.0);
        cell.apply(i, config.k_w, lag);
        t += lag;
    }
    Ok(WriteResult {
        target,
        final_resistance: cell.resistance,
        error_fraction: (cell.resistance - target).abs() / target,
        elapsed: t,
        timed_out: !tripped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteStats {
    pub bits: Option<u32>,
    pub i_prog: f64,
    pub t_max: f64,
    pub trials: usize,
    pub mean_error: f64,
    pub p95_error: f64,
    pub timeouts: usize,
}

/// Runs `trials` writes to targets drawn uniformly from the programmable
/// range. Trial `n` uses seed `seed + n` for both target and offset, so
/// different configurations see the same targets.
pub fn write_statistics(
    config: &WriteConfig,
    params: &DeviceParams,
    trials: usize,
    seed: u64,
) -> Result<WriteStats, DeviceError> {
    let targets = Uniform::new_inclusive(params.r_min, params.r_max).expect("ordered range");
    let mut errors = Vec::with_capacity(trials);
    let mut timeouts = 0;
    for n in 0..trials as u64 {
        let trial_seed = seed.wrapping_add(n);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x5eed_7a26_e7f0_0000);
        let target = targets.sample(&mut rng);
        let r = write_with_feedback(target, config, params, trial_seed)?;
        timeouts += usize::from(r.timed_out);
        errors.push(r.error_fraction);
    }
    let mean_error = if trials == 0 {
        0.0
    } else {
        errors.iter().sum::<f64>() / trials as f64
    };
    errors.sort_by(f64::total_cmp);
    let p95_error = if errors.is_empty() {
        0.0
    } else {
        errors[((errors.len() as f64 * 0.95).ceil() as usize).clamp(1, errors.len()) - 1]
    };
    Ok(WriteStats {
        bits: config.comparator_bits,
        i_prog: config.i_prog,
        t_max: config.t_max,
        trials,
        mean_error,
        p95_error,
        timeouts,
    })
}

pub const WRITE_CSV_HEADER: &str = "bits,I_prog,t_max,mean_error,p95_error";

pub fn write_csv(rows: &[WriteStats]) -> String {
    let mut out = String::from(WRITE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let bits = r.bits.map_or_else(|| "inf".to_string(), |b| b.to_string());
        out.push_str(&format!(
            "{bits},{:e},{:e},{:e},{:e}\n",
            r.i_prog, r.t_max, r.mean_error, r.p95_error
        ));
    }
    out
}
