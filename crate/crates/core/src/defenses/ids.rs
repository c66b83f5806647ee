//! Bus-resident intrusion detection. Sees every ledger record with its true endpoint and
//! route tag, which no ordinary subscriber can.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Alert, AlertRule};
use crate::interface::star_tracker::CMD_MID;
use crate::softbus::{AppId, BusRecord, Route};
use crate::spacepacket::MessageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedRate {
    pub mid: MessageId,
    pub period_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdsConfig {
    pub enabled: bool,
    pub dup_window_ticks: u64,
    /// Device command MIDs that only the ground should ever command.
    pub device_command_mids: Vec<MessageId>,
    pub rate_factor: f64,
    pub rate_window_ticks: u64,
    /// Empty means derive from the schedule table.
    pub expected_rates: Vec<ExpectedRate>,
}

impl Default for IdsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            dup_window_ticks: 10,
            device_command_mids: vec![CMD_MID],
            rate_factor: 2.0,
            rate_window_ticks: 100,
            expected_rates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ids {
    config: IdsConfig,
    names: BTreeMap<AppId, String>,
    last_publish: BTreeMap<MessageId, BTreeMap<AppId, u64>>,
    dup_alerted: BTreeMap<MessageId, u64>,
    rate_seen: BTreeMap<MessageId, VecDeque<u64>>,
    rate_alerted: BTreeMap<MessageId, u64>,
}

impl Ids {
    pub fn new(config: IdsConfig, names: BTreeMap<AppId, String>) -> Self {
        Self {
            config,
            names,
            last_publish: BTreeMap::new(),
            dup_alerted: BTreeMap::new(),
            rate_seen: BTreeMap::new(),
            rate_alerted: BTreeMap::new(),
        }
    }

    fn name(&self, app: AppId) -> String {
        self.names.get(&app).cloned().unwrap_or_else(|| app.to_string())
    }

    pub fn inspect(&mut self, record: &BusRecord) -> Vec<Alert> {
        let mut alerts = Vec::new();
        let mid = record.packet.mid();
        let alert = |rule, detail: String| Alert {
            tick: record.tick,
            rule,
            mid,
            detail,
            record: record.index,
        };

        if record.route == Route::Onboard && self.config.device_command_mids.contains(&mid) {
            let fc = record.packet.function_code().unwrap_or_default();
            let detail = format!(
                "{} sent function code {fc} to {mid} from onboard",
                self.name(record.true_sender)
            );
            alerts.push(alert(AlertRule::OnboardDeviceCommand, detail));
        }

        if mid.is_telemetry() {
            let window = self.config.dup_window_ticks;
            let since = record.tick.saturating_sub(window);
            let seen = self.last_publish.entry(mid).or_default();
            seen.insert(record.true_sender, record.tick);
            let recent: Vec<AppId> = seen.iter().filter(|(_, &t)| t >= since).map(|(&a, _)| a).collect();
            let quiet = self.dup_alerted.get(&mid).is_none_or(|&t| record.tick >= t + window);
            if recent.len() >= 2 && quiet {
                self.dup_alerted.insert(mid, record.tick);
                let who: Vec<String> = recent.iter().map(|&a| self.name(a)).collect();
                alerts.push(alert(
                    AlertRule::DupPublisher,
                    format!("{} publishers within {window} ticks: {}", recent.len(), who.join(", ")),
                ));
            }
        }

        if let Some(exp) = self.config.expected_rates.iter().find(|e| e.mid == mid) {
            let window = self.config.rate_window_ticks;
            let seen = self.rate_seen.entry(mid).or_default();
            seen.push_back(record.tick);
            while seen.front().is_some_and(|&t| t + window <= record.tick) {
                seen.pop_front();
            }
            let expected = window as f64 / exp.period_ticks as f64;
            let quiet = self.rate_alerted.get(&mid).is_none_or(|&t| record.tick >= t + window);
            if seen.len() as f64 > self.config.rate_factor * expected && quiet {
                self.rate_alerted.insert(mid, record.tick);
                alerts.push(alert(
                    AlertRule::RateAnomaly,
                    format!("{} packets in {window} ticks, schedule allows {expected}", seen.len()),
                ));
            }
        }
        alerts
    }
}
