//! Scenario files: everything needed to reproduce a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{AttitudeError, Quaternion, RateProfile, TruthModel};
use crate::defenses::AlertRule;
use crate::defenses::DefenseConfig;
use crate::downlink::DEFAULT_QUEUE_DEPTH;
use crate::ground::GroundDatabase;
use crate::implant::{ImplantConfig, ImplantConfigError};
use crate::interface::safe_mode::EVENT_TLM_MID;
use crate::interface::star_tracker::{FunctionCode, DATA_TLM_MID, HK_TLM_MID, REQ_MID};
use crate::scheduler::{ScheduleEntry, ScheduleError, Scheduler, TICK_SECONDS};
use crate::spacepacket::MessageId;

pub const DEFAULT_MAX_RATE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCommand {
    pub tick: u64,
    /// Command name from the ground database.
    pub command: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownlinkConfig {
    pub filter: Vec<MessageId>,
    pub queue_depth: usize,
}

impl Default for DownlinkConfig {
    fn default() -> Self {
        Self {
            filter: vec![HK_TLM_MID, DATA_TLM_MID, EVENT_TLM_MID],
            queue_depth: DEFAULT_QUEUE_DEPTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBound {
    pub rule: AlertRule,
    /// Ticks after activation by which the first alert of `rule` must appear.
    pub within_ticks: u64,
}

/// Checked under `run --assert`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    pub alerts: Option<usize>,
    pub absent_rules: Vec<AlertRule>,
    pub detection: Vec<DetectionBound>,
    pub format_violations: Option<usize>,
    pub solo_records_on_tracker_mids: Option<usize>,
    pub solo_delivered: Option<usize>,
    pub genuine_all_delivered: Option<bool>,
    pub data_rows_after_activation: Option<usize>,
    pub command_log_is_script: Option<bool>,
    pub activation_tick: Option<u64>,
    pub mean_error: Option<Tolerance>,
    pub hk_enabled_fraction_min: Option<f64>,
    pub device_disabled_fraction_min: Option<f64>,
    pub cadence_unchanged: Option<bool>,
    pub indistinguishable: Option<bool>,
    pub safe_mode_engaged: Option<bool>,
    pub downlink_matches_reference: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    pub duration_ticks: u64,
    #[serde(default)]
    pub initial_attitude: Quaternion,
    #[serde(default = "still")]
    pub rate_profile: RateProfile,
    #[serde(default = "default_max_rate")]
    pub max_rate: f64,
    #[serde(default)]
    pub tracker_noise_sigma: f64,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub downlink: DownlinkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implant: Option<ImplantConfig>,
    #[serde(default)]
    pub defenses: DefenseConfig,
    #[serde(default)]
    pub operator_script: Vec<OperatorCommand>,
    #[serde(default)]
    pub expect: Expectations,
}

fn still() -> RateProfile {
    RateProfile::constant([0.0; 3])
}

fn default_max_rate() -> f64 {
    DEFAULT_MAX_RATE
}

/// 1 Hz data requests on even seconds, 1 Hz housekeeping half a second later.
pub fn default_schedule() -> Vec<ScheduleEntry> {
    vec![
        ScheduleEntry {
            target_mid: REQ_MID,
            function_code: FunctionCode::ReqData as u8,
            period_ticks: 10,
            phase_ticks: 0,
        },
        ScheduleEntry {
            target_mid: REQ_MID,
            function_code: FunctionCode::ReqHk as u8,
            period_ticks: 10,
            phase_ticks: 5,
        },
    ]
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duration_ticks must be positive")]
    ZeroDuration,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("implant: {0}")]
    Implant(#[from] ImplantConfigError),
    #[error("attitude: {0}")]
    Attitude(#[from] AttitudeError),
    #[error("rate profile changes must be sorted by tick")]
    UnsortedRateChanges,
    #[error("operator script entry {index}: tick {tick} is not before the end of the run")]
    ScriptTickOutOfRange { index: usize, tick: u64 },
    #[error("operator script must be sorted by tick")]
    UnsortedScript,
    #[error("operator script entry {index}: unknown command {name:?}")]
    UnknownCommand { index: usize, name: String },
    #[error("downlink filter MID {0} is not a telemetry MID")]
    FilterNotTelemetry(MessageId),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.duration_ticks == 0 {
            return Err(ScenarioError::ZeroDuration);
        }
        Scheduler::new(self.schedule.clone())?;
        if let Some(i) = &self.implant {
            i.validate()?;
        }
        if !self.rate_profile.changes.windows(2).all(|w| w[0].tick <= w[1].tick) {
            return Err(ScenarioError::UnsortedRateChanges);
        }
        TruthModel::new(
            self.initial_attitude,
            self.rate_profile.clone(),
            TICK_SECONDS,
            self.max_rate,
        )?;
        if !self.operator_script.windows(2).all(|w| w[0].tick <= w[1].tick) {
            return Err(ScenarioError::UnsortedScript);
        }
        let db = GroundDatabase::builtin();
        for (index, c) in self.operator_script.iter().enumerate() {
            if c.tick >= self.duration_ticks {
                return Err(ScenarioError::ScriptTickOutOfRange { index, tick: c.tick });
            }
            if db.command(&c.command).is_none() {
                return Err(ScenarioError::UnknownCommand {
                    index,
                    name: c.command.clone(),
                });
            }
        }
        if let Some(m) = self.downlink.filter.iter().find(|m| !m.is_telemetry()) {
            return Err(ScenarioError::FilterNotTelemetry(*m));
        }
        Ok(())
    }

    /// Same scenario with the implant removed: the reference run for forensic comparison.
    pub fn without_implant(&self) -> Self {
        Self {
            implant: None,
            ..self.clone()
        }
    }
}
