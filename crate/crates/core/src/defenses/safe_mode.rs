//! Cyber-safe mode: once triggered, only the trusted baseline of apps may publish.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Alert, AlertRule};
use crate::interface::safe_mode::EventTlm;
use crate::softbus::AppId;
use crate::spacepacket::{SpacePacket, TelemetrySecondaryHeader, MAX_SEQUENCE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeModeConfig {
    pub enabled: bool,
    /// App names allowed to publish once engaged.
    pub allowlist: Vec<String>,
    pub trigger_rules: Vec<AlertRule>,
}

impl Default for SafeModeConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            allowlist: ["SCH", "ST", "RADIO", "CSM"].map(String::from).to_vec(),
            trigger_rules: AlertRule::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SafeModeManager {
    allow: BTreeSet<AppId>,
    triggers: Vec<AlertRule>,
    engaged: Option<(u64, AlertRule)>,
    pending: Option<EventTlm>,
    event_seq: u16,
    dropped: u64,
}

impl SafeModeManager {
    pub fn new(allow: impl IntoIterator<Item = AppId>, triggers: Vec<AlertRule>) -> Self {
        Self {
            allow: allow.into_iter().collect(),
            triggers,
            engaged: None,
            pending: None,
            event_seq: 0,
            dropped: 0,
        }
    }

    pub fn engaged(&self) -> Option<(u64, AlertRule)> {
        self.engaged
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// False (and counted) for a non-allowlisted publisher while engaged.
    pub fn admit(&mut self, sender: AppId) -> bool {
        if self.engaged.is_none() || self.allow.contains(&sender) {
            return true;
        }
        self.dropped += 1;
        false
    }

    pub fn on_alert(&mut self, alert: &Alert) {
        if self.engaged.is_none() && self.triggers.contains(&alert.rule) {
            self.engaged = Some((alert.tick, alert.rule));
            self.pending = Some(EventTlm {
                rule: alert.rule.code(),
                trigger_tick: alert.tick as u32,
                engaged: 1,
            });
        }
    }

    /// The transition event to downlink, once.
    pub fn take_event(&mut self, time: TelemetrySecondaryHeader) -> Option<SpacePacket> {
        let ev = self.pending.take()?;
        let p = ev.to_packet(self.event_seq, time);
        self.event_seq = (self.event_seq + 1) & MAX_SEQUENCE_COUNT;
        Some(p)
    }
}
