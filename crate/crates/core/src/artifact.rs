// SPDX-License-Identifier: Apache-2.0

//! JSON artifacts passed between flow stages. Each one carries the source
//! netlist so later stages can check against it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::DeviceParams;
use crate::evaluator::{BaselineRatios, Figures, SimulationResult, ToleranceReport};
use crate::mapper::{validate, MapError, MappedDesign};
use crate::netlist::BooleanNetwork;
use crate::partition::InterconnectStats;
use crate::threshold::{ThresholdError, ThresholdLogicNetwork};

pub const TLN_FORMAT: &str = "smtl-tln/1";
pub const MAPPED_FORMAT: &str = "smtl-mapped/1";
pub const REPORT_FORMAT: &str = "smtl-report/1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("expected a `{expected}` document, found `{found}`")]
    Format { expected: &'static str, found: String },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network and source netlist disagree: {0}")]
    Shape(String),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Map(#[from] MapError),
}

fn check_format(found: &str, expected: &'static str) -> Result<(), ArtifactError> {
    if found != expected {
        return Err(ArtifactError::Format {
            expected,
            found: found.to_string(),
        });
    }
    Ok(())
}

fn check_shape(source: &BooleanNetwork, network: &ThresholdLogicNetwork) -> Result<(), ArtifactError> {
    if source.inputs() != network.inputs.as_slice() || source.outputs().len() != network.outputs.len() {
        return Err(ArtifactError::Shape(format!(
            "{} inputs / {} outputs vs {} / {}",
            source.inputs().len(),
            source.outputs().len(),
            network.inputs.len(),
            network.outputs.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlnArtifact {
    pub format: String,
    pub source: BooleanNetwork,
    pub network: ThresholdLogicNetwork,
}

impl TlnArtifact {
    pub fn new(source: BooleanNetwork, network: ThresholdLogicNetwork) -> Self {
        TlnArtifact {
            format: TLN_FORMAT.to_string(),
            source,
            network,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: TlnArtifact = serde_json::from_str(text)?;
        check_format(&a.format, TLN_FORMAT)?;
        a.network.validate()?;
        check_shape(&a.source, &a.network)?;
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedArtifact {
    pub format: String,
    pub source: BooleanNetwork,
    pub network: ThresholdLogicNetwork,
    pub design: MappedDesign,
}

impl MappedArtifact {
    pub fn new(tln: TlnArtifact, design: MappedDesign) -> Self {
        MappedArtifact {
            format: MAPPED_FORMAT.to_string(),
            source: tln.source,
            network: tln.network,
            design,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: MappedArtifact = serde_json::from_str(text)?;
        check_format(&a.format, MAPPED_FORMAT)?;
        a.network.validate()?;
        check_shape(&a.source, &a.network)?;
        validate(&a.design)?;
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: String,
    pub tool_version: String,
    pub seed: u64,
    pub sigma: f64,
    pub i_threshold_eff: f64,
    pub params: DeviceParams,
    /// Ideal devices.
    pub nominal: SimulationResult,
    /// One variation draw at `sigma`.
    pub variation: SimulationResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceReport>,
    pub figures: Figures,
    pub interconnect: InterconnectStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineRatios>,
}
