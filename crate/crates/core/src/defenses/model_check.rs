//! Physics-based consistency check of reported attitude against the known rate profile.

use serde::{Deserialize, Serialize};

use crate::attitude::{angular_distance, Quaternion, RateProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelCheckConfig {
    pub enabled: bool,
    /// rad
    pub theta_max: f64,
    /// rad/s
    pub omega_max: f64,
}

impl Default for ModelCheckConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            theta_max: 0.05,
            omega_max: 1.0,
        }
    }
}

/// Returns why a report is inconsistent with the prediction, if it is.
pub fn model_check(
    reported: &Quaternion,
    predicted: &Quaternion,
    previous: Option<(&Quaternion, f64)>,
    config: &ModelCheckConfig,
) -> Option<String> {
    let d = match angular_distance(reported, predicted) {
        Ok(d) => d,
        Err(e) => return Some(format!("reported quaternion rejected: {e}")),
    };
    if d > config.theta_max {
        return Some(format!("{d:.6} rad from prediction, limit {}", config.theta_max));
    }
    if let Some((prev, dt)) = previous.filter(|(_, dt)| *dt > 0.0) {
        let rate = angular_distance(prev, reported)
            .map(|a| a / dt)
            .unwrap_or(f64::INFINITY);
        if rate > config.omega_max {
            return Some(format!("implied rate {rate:.6} rad/s, limit {}", config.omega_max));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct ModelChecker {
    config: ModelCheckConfig,
    profile: RateProfile,
    tick_seconds: f64,
    anchor: Option<(Quaternion, u64)>,
    last_report: Option<(Quaternion, u64)>,
}

impl ModelChecker {
    pub fn new(config: ModelCheckConfig, profile: RateProfile, tick_seconds: f64) -> Self {
        Self {
            config,
            profile,
            tick_seconds,
            anchor: None,
            last_report: None,
        }
    }

    pub fn predicted(&self, tick: u64) -> Option<Quaternion> {
        let (q, t0) = self.anchor?;
        self.profile.propagate_between(&q, t0, tick, self.tick_seconds).ok()
    }

    /// Checks one report; consistent reports become the new anchor.
    pub fn check(&mut self, tick: u64, reported: Quaternion) -> Option<String> {
        let previous = self.last_report.replace((reported, tick));
        let Some(predicted) = self.predicted(tick) else {
            if let Err(e) = reported.check_unit() {
                return Some(format!("reported quaternion rejected: {e}"));
            }
            self.anchor = Some((reported, tick));
            return None;
        };
        let prev = previous.map(|(q, t)| (q, tick.saturating_sub(t) as f64 * self.tick_seconds));
        let verdict = model_check(
            &reported,
            &predicted,
            prev.as_ref().map(|(q, dt)| (q, *dt)),
            &self.config,
        );
        if verdict.is_none() {
            self.anchor = Some((reported, tick));
        }
        verdict
    }
}
