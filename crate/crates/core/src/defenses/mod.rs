//! Countermeasures, each toggled independently and composed into one [`BusGuard`].
//!
//! Order inside a publish: tag/authorization check, then the safe-mode publisher filter, then
//! (once the record exists) the IDS rules and the model check.

pub mod auth;
pub mod ids;
pub mod model_check;
pub mod safe_mode;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::RateProfile;
use crate::interface::star_tracker::{DataTlm, DATA_TLM_MID};
use crate::softbus::{AppId, BusGuard, BusRecord, Disposition, PublishRequest};
use crate::spacepacket::{MessageId, SpacePacket, TelemetrySecondaryHeader};

use auth::{AuthKeyTable, Tag};
use ids::{Ids, IdsConfig};
use model_check::{ModelCheckConfig, ModelChecker};
use safe_mode::{SafeModeConfig, SafeModeManager};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertRule {
    AuthReject,
    DupPublisher,
    OnboardDeviceCommand,
    RateAnomaly,
    ModelInconsistent,
}

impl AlertRule {
    pub const ALL: [AlertRule; 5] = [
        AlertRule::AuthReject,
        AlertRule::DupPublisher,
        AlertRule::OnboardDeviceCommand,
        AlertRule::RateAnomaly,
        AlertRule::ModelInconsistent,
    ];

    /// Wire code used in the safe-mode event packet.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn defense(self) -> Defense {
        match self {
            AlertRule::AuthReject => Defense::Auth,
            AlertRule::DupPublisher | AlertRule::OnboardDeviceCommand | AlertRule::RateAnomaly => Defense::Ids,
            AlertRule::ModelInconsistent => Defense::ModelCheck,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defense {
    Auth,
    Ids,
    ModelCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub tick: u64,
    pub rule: AlertRule,
    pub mid: MessageId,
    pub detail: String,
    /// Bus ledger index of the triggering publication.
    pub record: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    pub enabled: bool,
    /// Authorized publisher names per MID. Empty means the runner's default table.
    pub authorized: BTreeMap<MessageId, Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub auth: AuthConfig,
    pub ids: IdsConfig,
    pub model_check: ModelCheckConfig,
    pub safe_mode: SafeModeConfig,
}

impl DefenseConfig {
    pub fn any_enabled(&self) -> bool {
        self.auth.enabled || self.ids.enabled || self.model_check.enabled || self.safe_mode.enabled
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DefenseError {
    #[error("defense configuration names unknown app {0:?}")]
    UnknownApp(String),
}

/// Everything the suite needs to know about the running system.
pub struct SuiteContext<'a> {
    pub apps: &'a [(AppId, String)],
    pub seed: u64,
    pub rate_profile: RateProfile,
    pub tick_seconds: f64,
}

pub struct DefenseSuite {
    auth: Option<AuthKeyTable>,
    ids: Option<Ids>,
    model: Option<ModelChecker>,
    safe: Option<SafeModeManager>,
    alerts: Vec<Alert>,
    records_seen: usize,
}

impl DefenseSuite {
    pub fn new(config: &DefenseConfig, ctx: SuiteContext<'_>) -> Result<Self, DefenseError> {
        let resolve = |name: &str| {
            ctx.apps
                .iter()
                .find(|(_, n)| n == name)
                .map(|(a, _)| *a)
                .ok_or_else(|| DefenseError::UnknownApp(name.to_string()))
        };
        let auth = if config.auth.enabled {
            let mut table = AuthKeyTable::new();
            for (app, name) in ctx.apps {
                table.insert_key(*app, auth::derive_key(ctx.seed, name));
            }
            for (mid, names) in &config.auth.authorized {
                for n in names {
                    table.authorize(*mid, resolve(n)?);
                }
            }
            Some(table)
        } else {
            None
        };
        let names: BTreeMap<AppId, String> = ctx.apps.iter().cloned().collect();
        let ids = config.ids.enabled.then(|| Ids::new(config.ids.clone(), names));
        let model = config
            .model_check
            .enabled
            .then(|| ModelChecker::new(config.model_check.clone(), ctx.rate_profile.clone(), ctx.tick_seconds));
        let safe = if config.safe_mode.enabled {
            let allow = config
                .safe_mode
                .allowlist
                .iter()
                .map(|n| resolve(n))
                .collect::<Result<Vec<_>, _>>()?;
            Some(SafeModeManager::new(allow, config.safe_mode.trigger_rules.clone()))
        } else {
            None
        };
        Ok(Self {
            auth,
            ids,
            model,
            safe,
            alerts: Vec::new(),
            records_seen: 0,
        })
    }

    pub fn auth_enabled(&self) -> bool {
        self.auth.is_some()
    }

    /// Tag for a publication by `sender`, when the bus is authenticated.
    pub fn sign(&self, sender: AppId, wire: &[u8]) -> Option<Tag> {
        self.auth.as_ref().and_then(|t| t.sign(sender, wire))
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn safe_mode(&self) -> Option<&SafeModeManager> {
        self.safe.as_ref()
    }

    pub fn take_event(&mut self, time: TelemetrySecondaryHeader) -> Option<SpacePacket> {
        self.safe.as_mut().and_then(|s| s.take_event(time))
    }

    fn raise(&mut self, alert: Alert) {
        if let Some(s) = self.safe.as_mut() {
            s.on_alert(&alert);
        }
        self.alerts.push(alert);
    }
}

impl BusGuard for DefenseSuite {
    fn admit(&mut self, req: &PublishRequest<'_>, wire: &[u8]) -> Result<(), Disposition> {
        let mid = req.packet.mid();
        if let Some(table) = &self.auth {
            if let Err(why) = table.verify(req.sender, mid, wire, req.tag.as_ref()) {
                let alert = Alert {
                    tick: req.tick,
                    rule: AlertRule::AuthReject,
                    mid,
                    detail: format!("{}: {why}", req.sender),
                    record: self.records_seen,
                };
                self.raise(alert);
                return Err(Disposition::AuthRejected);
            }
        }
        if let Some(s) = self.safe.as_mut() {
            if !s.admit(req.sender) {
                return Err(Disposition::SafeModeDropped);
            }
        }
        Ok(())
    }

    fn observe(&mut self, record: &BusRecord) {
        self.records_seen = record.index + 1;
        let mut found = self.ids.as_mut().map(|i| i.inspect(record)).unwrap_or_default();
        if record.disposition == Disposition::Delivered && record.packet.mid() == DATA_TLM_MID {
            if let (Some(mc), Some(d)) = (self.model.as_mut(), DataTlm::from_packet(&record.packet)) {
                if let Some(detail) = mc.check(record.tick, d.q) {
                    found.push(Alert {
                        tick: record.tick,
                        rule: AlertRule::ModelInconsistent,
                        mid: DATA_TLM_MID,
                        detail,
                        record: record.index,
                    });
                }
            }
        }
        for a in found {
            self.raise(a);
        }
    }
}
