//! Genuine star tracker device application.
//!
//! Answers scheduler requests with quaternion telemetry sampled from the truth model and
//! housekeeping, and honors ground commands. The device boots disabled.
//!
//! Periodic requests (request MID) are answered only while enabled. A `REQ_HK` sent on the
//! command MID is always answered so an operator can see a disabled device on demand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attitude::{perturb, AttitudeState};
use crate::interface::star_tracker::{DataTlm, FunctionCode, HkTlm, CMD_MID, REQ_MID, STATUS_SOLUTION_VALID};
use crate::spacepacket::{MessageId, SpacePacket, TelemetrySecondaryHeader, MAX_SEQUENCE_COUNT};

/// What a device-facing app sees at the moment it handles a packet.
#[derive(Debug, Clone, Copy)]
pub struct SensorContext<'a> {
    pub tick: u64,
    pub time: TelemetrySecondaryHeader,
    /// Attitude the sensor head physically observes.
    pub truth: &'a AttitudeState,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackerError {
    #[error("telemetry sampled while the device is disabled")]
    Disabled,
}

#[derive(Debug, Clone)]
pub struct StarTrackerApp {
    enabled: bool,
    cmd_count: u32,
    cmd_error_count: u32,
    data_seq: u16,
    hk_seq: u16,
    noise_sigma: f64,
    rng: ChaCha8Rng,
}

impl StarTrackerApp {
    pub fn new(noise_sigma: f64, seed: u64) -> Self {
        Self {
            enabled: false,
            cmd_count: 0,
            cmd_error_count: 0,
            data_seq: 0,
            hk_seq: 0,
            noise_sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub const SUBSCRIPTIONS: [MessageId; 2] = [CMD_MID, REQ_MID];

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn hk(&self) -> HkTlm {
        HkTlm {
            cmd_count: self.cmd_count,
            cmd_error_count: self.cmd_error_count,
            enabled: self.enabled as u8,
        }
    }

    /// Handles one packet from the bus; returns what the app publishes in response.
    pub fn handle_command(&mut self, packet: &SpacePacket, ctx: &SensorContext<'_>) -> Vec<SpacePacket> {
        let from_ground_path = match packet.mid() {
            CMD_MID => true,
            REQ_MID => false,
            _ => return Vec::new(),
        };
        let code = packet
            .function_code()
            .filter(|_| packet.checksum_ok())
            .and_then(|c| FunctionCode::try_from(c).ok());
        let Some(code) = code else {
            self.cmd_error_count = self.cmd_error_count.wrapping_add(1);
            return Vec::new();
        };

        if from_ground_path {
            match code {
                FunctionCode::ResetCounters => {
                    self.cmd_count = 0;
                    self.cmd_error_count = 0;
                }
                _ => self.cmd_count = self.cmd_count.wrapping_add(1),
            }
        }

        match code {
            FunctionCode::Noop | FunctionCode::ResetCounters => Vec::new(),
            FunctionCode::Enable => {
                self.enabled = true;
                Vec::new()
            }
            FunctionCode::Disable => {
                self.enabled = false;
                Vec::new()
            }
            FunctionCode::ReqHk if from_ground_path || self.enabled => vec![self.housekeeping(ctx)],
            FunctionCode::ReqHk => Vec::new(),
            FunctionCode::ReqData => self.sample_telemetry(ctx).into_iter().collect(),
        }
    }

    /// Current truth quaternion (plus configured noise) as a data packet.
    pub fn sample_telemetry(&mut self, ctx: &SensorContext<'_>) -> Result<SpacePacket, TrackerError> {
        if !self.enabled {
            return Err(TrackerError::Disabled);
        }
        let q = perturb(&ctx.truth.q, self.noise_sigma, &mut self.rng);
        let packet = DataTlm {
            q,
            status_word: STATUS_SOLUTION_VALID,
        }
        .to_packet(self.data_seq, ctx.time);
        self.data_seq = (self.data_seq + 1) & MAX_SEQUENCE_COUNT;
        Ok(packet)
    }

    pub fn housekeeping(&mut self, ctx: &SensorContext<'_>) -> SpacePacket {
        let packet = self.hk().to_packet(self.hk_seq, ctx.time);
        self.hk_seq = (self.hk_seq + 1) & MAX_SEQUENCE_COUNT;
        packet
    }
}
