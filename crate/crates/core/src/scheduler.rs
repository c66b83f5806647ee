//! Table-driven scheduler emitting wakeup / housekeeping-request commands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spacepacket::{MessageId, SpacePacket, MAX_FUNCTION_CODE, MAX_SEQUENCE_COUNT};

/// Simulation base rate: 10 ticks per second.
pub const TICKS_PER_SECOND: u64 = 10;
pub const TICK_MILLIS: u64 = 1000 / TICKS_PER_SECOND;
pub const TICK_SECONDS: f64 = 1.0 / TICKS_PER_SECOND as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub target_mid: MessageId,
    pub function_code: u8,
    pub period_ticks: u64,
    #[serde(default)]
    pub phase_ticks: u64,
}

impl ScheduleEntry {
    pub fn is_due(&self, tick: u64) -> bool {
        tick >= self.phase_ticks && (tick - self.phase_ticks).is_multiple_of(self.period_ticks)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("schedule entry {index}: period must be positive")]
    ZeroPeriod { index: usize },
    #[error("schedule entry {index}: phase {phase} must be below period {period}")]
    PhaseOutOfRange { index: usize, phase: u64, period: u64 },
    #[error("schedule entry {index}: target {mid} is not a command MID")]
    NotACommand { index: usize, mid: MessageId },
    #[error("schedule entry {index}: function code {code} out of range")]
    BadFunctionCode { index: usize, code: u8 },
}

#[derive(Debug, Clone, Default)]
pub struct Scheduler {
    entries: Vec<ScheduleEntry>,
    sequence: BTreeMap<MessageId, u16>,
    last_tick: Option<u64>,
}

impl Scheduler {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self, ScheduleError> {
        for (index, e) in entries.iter().enumerate() {
            if e.period_ticks == 0 {
                return Err(ScheduleError::ZeroPeriod { index });
            }
            if e.phase_ticks >= e.period_ticks {
                return Err(ScheduleError::PhaseOutOfRange {
                    index,
                    phase: e.phase_ticks,
                    period: e.period_ticks,
                });
            }
            if !e.target_mid.is_command() {
                return Err(ScheduleError::NotACommand {
                    index,
                    mid: e.target_mid,
                });
            }
            if e.function_code > MAX_FUNCTION_CODE {
                return Err(ScheduleError::BadFunctionCode {
                    index,
                    code: e.function_code,
                });
            }
        }
        Ok(Self {
            entries,
            ..Default::default()
        })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Request packets due at `tick`, in table order. Ticks must advance by one per call.
    pub fn tick(&mut self, tick: u64) -> Vec<SpacePacket> {
        debug_assert!(
            self.last_tick.is_none_or(|last| tick == last + 1),
            "scheduler ticks must advance by one"
        );
        self.last_tick = Some(tick);
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| e.is_due(tick)) {
            let seq = self.sequence.entry(e.target_mid).or_insert(0);
            out.push(SpacePacket::command(e.target_mid, *seq, e.function_code, Vec::new()));
            *seq = (*seq + 1) & MAX_SEQUENCE_COUNT;
        }
        out
    }
}
