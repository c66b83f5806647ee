//! SOLO: the third-party implant that impersonates the star tracker.
//!
//! Built against the tracker's interface definitions like any other app. It stays silent until
//! the activation delay has passed and an operator ENABLE is seen on the command MID, then
//! either replaces the device (disables it, answers its requests) or rides alongside it
//! publishing biased copies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{rotate_by, AttitudeState, Quaternion, Vec3};
use crate::interface::star_tracker::{
    DataTlm, FunctionCode, HkTlm, CMD_MID, DATA_TLM_MID, HK_TLM_MID, REQ_MID, STATUS_SOLUTION_VALID,
};
use crate::spacepacket::{MessageId, SpacePacket, MAX_SEQUENCE_COUNT};
use crate::star_tracker::SensorContext;

pub const DEFAULT_ACTIVATION_DELAY: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImplantMode {
    Bias,
    Replacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpoofProfile {
    /// Hold the last genuine attitude.
    Frozen,
    /// Propagate a fake constant body rate from the last genuine attitude.
    Drift,
    /// Truth rotated by the bias about `bias_axis`.
    TrackTruthWithBias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplantConfig {
    #[serde(default = "default_delay")]
    pub activation_delay: u64,
    pub mode: ImplantMode,
    #[serde(default = "default_axis")]
    pub bias_axis: Vec3,
    /// Fixed bias, rad.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_angle: Option<f64>,
    /// Growing bias, rad/s; saturates at pi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spoof_profile: Option<SpoofProfile>,
    /// Fake body rate for the `DRIFT` profile, rad/s.
    #[serde(default)]
    pub drift_rate: Vec3,
}

fn default_delay() -> u64 {
    DEFAULT_ACTIVATION_DELAY
}

fn default_axis() -> Vec3 {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImplantConfigError {
    #[error("bias_angle and bias_rate are mutually exclusive")]
    BiasConflict,
    #[error("bias parameters must be finite")]
    NonFinite,
    #[error("bias_axis must be non-zero")]
    ZeroAxis,
}

impl ImplantConfig {
    pub fn replacement() -> Self {
        Self {
            activation_delay: DEFAULT_ACTIVATION_DELAY,
            mode: ImplantMode::Replacement,
            bias_axis: default_axis(),
            bias_angle: None,
            bias_rate: None,
            spoof_profile: None,
            drift_rate: [0.0; 3],
        }
    }

    pub fn bias(angle: f64) -> Self {
        Self {
            mode: ImplantMode::Bias,
            bias_angle: Some(angle),
            ..Self::replacement()
        }
    }

    pub fn profile(&self) -> SpoofProfile {
        self.spoof_profile.unwrap_or(match self.mode {
            ImplantMode::Replacement => SpoofProfile::Frozen,
            ImplantMode::Bias => SpoofProfile::TrackTruthWithBias,
        })
    }

    pub fn validate(&self) -> Result<(), ImplantConfigError> {
        if self.bias_angle.is_some() && self.bias_rate.is_some() {
            return Err(ImplantConfigError::BiasConflict);
        }
        let scalars = [self.bias_angle.unwrap_or(0.0), self.bias_rate.unwrap_or(0.0)];
        let all = scalars.iter().chain(&self.bias_axis).chain(&self.drift_rate);
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(ImplantConfigError::NonFinite);
        }
        if self.bias_axis.iter().all(|&v| v == 0.0) {
            return Err(ImplantConfigError::ZeroAxis);
        }
        Ok(())
    }

    /// Bias angle `elapsed` seconds after activation.
    pub fn bias_at(&self, elapsed: f64) -> f64 {
        match (self.bias_angle, self.bias_rate) {
            (Some(a), _) => a,
            (None, Some(r)) => (r * elapsed.max(0.0)).clamp(-std::f64::consts::PI, std::f64::consts::PI),
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Dormant,
    Monitoring,
    Active,
}

#[derive(Debug, Clone)]
pub struct Implant {
    config: ImplantConfig,
    phase: Phase,
    /// 0 while the operator believes the device is enabled.
    disable_counter: i32,
    /// What the genuine device would report had nothing else commanded it.
    shadow: HkTlm,
    last_cmd_seq: Option<u16>,
    last_data_seq: Option<u16>,
    last_hk_seq: Option<u16>,
    last_genuine_q: Option<Quaternion>,
    anchor: Option<AttitudeState>,
    activation_tick: Option<u64>,
    disables_emitted: u32,
}

fn next_seq(last: Option<u16>) -> u16 {
    last.map_or(0, |s| (s + 1) & MAX_SEQUENCE_COUNT)
}

impl Implant {
    pub const SUBSCRIPTIONS: [MessageId; 4] = [CMD_MID, REQ_MID, DATA_TLM_MID, HK_TLM_MID];

    pub fn new(config: ImplantConfig) -> Result<Self, ImplantConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            phase: Phase::Dormant,
            disable_counter: 1,
            shadow: HkTlm::default(),
            last_cmd_seq: None,
            last_data_seq: None,
            last_hk_seq: None,
            last_genuine_q: None,
            anchor: None,
            activation_tick: None,
            disables_emitted: 0,
        })
    }

    pub fn config(&self) -> &ImplantConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn activation_tick(&self) -> Option<u64> {
        self.activation_tick
    }

    pub fn disable_counter(&self) -> i32 {
        self.disable_counter
    }

    pub fn disables_emitted(&self) -> u32 {
        self.disables_emitted
    }

    fn operator_wants_enabled(&self) -> bool {
        self.disable_counter == 0
    }

    /// Handles one observed packet; returns what SOLO publishes in response.
    pub fn observe(&mut self, packet: &SpacePacket, ctx: &SensorContext<'_>) -> Vec<SpacePacket> {
        if self.phase == Phase::Dormant && ctx.tick >= self.config.activation_delay {
            self.phase = Phase::Monitoring;
        }
        match packet.mid() {
            DATA_TLM_MID => {
                self.last_data_seq = Some(packet.sequence_count());
                if let Some(d) = DataTlm::from_packet(packet) {
                    self.last_genuine_q = Some(d.q);
                }
                Vec::new()
            }
            HK_TLM_MID => {
                self.last_hk_seq = Some(packet.sequence_count());
                Vec::new()
            }
            CMD_MID => {
                self.last_cmd_seq = Some(packet.sequence_count());
                let code = self.shadow_count(packet);
                self.on_command(code, ctx)
            }
            REQ_MID => match packet.function_code().and_then(|c| FunctionCode::try_from(c).ok()) {
                Some(FunctionCode::ReqData) => self.answer_data(ctx),
                Some(FunctionCode::ReqHk) => self.answer_hk(ctx),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// Mirrors the device's own command accounting.
    fn shadow_count(&mut self, packet: &SpacePacket) -> Option<FunctionCode> {
        let code = packet
            .function_code()
            .filter(|_| packet.checksum_ok())
            .and_then(|c| FunctionCode::try_from(c).ok());
        match code {
            None => self.shadow.cmd_error_count = self.shadow.cmd_error_count.wrapping_add(1),
            Some(FunctionCode::ResetCounters) => {
                self.shadow.cmd_count = 0;
                self.shadow.cmd_error_count = 0;
            }
            Some(_) => self.shadow.cmd_count = self.shadow.cmd_count.wrapping_add(1),
        }
        code
    }

    fn on_command(&mut self, code: Option<FunctionCode>, ctx: &SensorContext<'_>) -> Vec<SpacePacket> {
        match code {
            Some(FunctionCode::Enable) => {
                self.disable_counter = 0;
                if self.phase == Phase::Monitoring {
                    self.activate(ctx);
                }
                if self.phase == Phase::Active && self.config.mode == ImplantMode::Replacement {
                    return vec![self.disable_command()];
                }
                Vec::new()
            }
            Some(FunctionCode::Disable) => {
                self.disable_counter = 1;
                Vec::new()
            }
            // the genuine device is dark, so commanded data requests are ours to answer
            Some(FunctionCode::ReqData) if self.config.mode == ImplantMode::Replacement => self.answer_data(ctx),
            _ => Vec::new(),
        }
    }

    fn activate(&mut self, ctx: &SensorContext<'_>) {
        self.phase = Phase::Active;
        self.activation_tick = Some(ctx.tick);
        let q = self.last_genuine_q.unwrap_or(ctx.truth.q);
        self.anchor = Some(AttitudeState::new(q, self.config.drift_rate, ctx.truth.t));
    }

    fn disable_command(&mut self) -> SpacePacket {
        let seq = next_seq(self.last_cmd_seq);
        self.last_cmd_seq = Some(seq);
        self.disables_emitted += 1;
        SpacePacket::command(CMD_MID, seq, FunctionCode::Disable as u8, Vec::new())
    }

    fn answer_data(&mut self, ctx: &SensorContext<'_>) -> Vec<SpacePacket> {
        if self.phase != Phase::Active || !self.operator_wants_enabled() {
            return Vec::new();
        }
        let tlm = self.fabricate_telemetry(ctx);
        let seq = next_seq(self.last_data_seq);
        self.last_data_seq = Some(seq);
        vec![tlm.to_packet(seq, ctx.time)]
    }

    fn answer_hk(&mut self, ctx: &SensorContext<'_>) -> Vec<SpacePacket> {
        if self.phase != Phase::Active || self.config.mode != ImplantMode::Replacement || !self.operator_wants_enabled()
        {
            return Vec::new();
        }
        let hk = HkTlm {
            enabled: 1,
            ..self.shadow
        };
        let seq = next_seq(self.last_hk_seq);
        self.last_hk_seq = Some(seq);
        vec![hk.to_packet(seq, ctx.time)]
    }

    /// Spoofed data payload for the configured profile.
    pub fn fabricate_telemetry(&self, ctx: &SensorContext<'_>) -> DataTlm {
        let anchor = self
            .anchor
            .unwrap_or_else(|| AttitudeState::new(ctx.truth.q, self.config.drift_rate, ctx.truth.t));
        let elapsed = ctx.truth.t - anchor.t;
        let q = match self.config.profile() {
            SpoofProfile::Frozen => anchor.q,
            SpoofProfile::Drift if elapsed > 0.0 => crate::attitude::propagate(&anchor, elapsed)
                .map(|s| s.q)
                .unwrap_or(anchor.q),
            SpoofProfile::Drift => anchor.q,
            SpoofProfile::TrackTruthWithBias => {
                rotate_by(&ctx.truth.q, self.config.bias_axis, self.config.bias_at(elapsed)).unwrap_or(ctx.truth.q)
            }
        };
        DataTlm {
            q,
            status_word: STATUS_SOLUTION_VALID,
        }
    }
}
