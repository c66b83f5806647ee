//! Run report: every number here is derived from the persisted artifacts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::attitude::{angular_distance, Quaternion};
use crate::defenses::{Alert, AlertRule, Defense};
use crate::ground::{archive_lossless, IndexRow};
use crate::implant::Phase;
use crate::interface::safe_mode::EVENT_TLM_MID;
use crate::interface::star_tracker::{DATA_TLM_MID, HK_TLM_MID};
use crate::softbus::Disposition;
use crate::spacepacket::MessageId;

use super::artifacts::RunArtifacts;
use super::compare::{Comparison, Verdict};
use super::config::Expectations;
use super::sim::{SOLO, TRACKER_MIDS};

/// Counters that live in app state rather than in a log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub unmapped: u64,
    pub uplink_rejects: u64,
    pub downlink_dropped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherCounts {
    pub delivered: usize,
    pub auth_rejected: usize,
    pub safe_mode_dropped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeceptionMetrics {
    /// First tick of the measured window.
    pub from_tick: u64,
    /// Data cycles with a ground-believed attitude.
    pub cycles: usize,
    pub mean_error: Option<f64>,
    pub max_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HkDeception {
    /// Scheduler housekeeping cycles at or after activation.
    pub cycles: usize,
    /// Cycles where the ground display read ENABLED = 1.
    pub displayed_enabled: usize,
    /// Cycles where the genuine device was actually disabled.
    pub device_disabled: usize,
}

impl HkDeception {
    pub fn displayed_enabled_fraction(&self) -> Option<f64> {
        (self.cycles > 0).then(|| self.displayed_enabled as f64 / self.cycles as f64)
    }

    pub fn device_disabled_fraction(&self) -> Option<f64> {
        (self.cycles > 0).then(|| self.device_disabled as f64 / self.cycles as f64)
    }
}

/// Distinct ground inter-arrival intervals (ticks) before and after activation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cadence {
    pub before: BTreeSet<u64>,
    pub after: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_ticks: u64,
    pub counters: Counters,
    pub bus_packets: BTreeMap<MessageId, usize>,
    pub ground_packets: BTreeMap<String, usize>,
    pub publications: BTreeMap<String, PublisherCounts>,
    pub format_violations: usize,
    pub alert_counts: BTreeMap<AlertRule, usize>,
    pub alerts: Vec<Alert>,
    pub activation_tick: Option<u64>,
    pub solo_records_on_tracker_mids: usize,
    pub data_rows_after_activation: Option<usize>,
    pub command_log_is_script: bool,
    pub deception: DeceptionMetrics,
    pub time_to_detection: BTreeMap<Defense, u64>,
    pub hk_deception: HkDeception,
    pub cadence: BTreeMap<MessageId, Cadence>,
    pub cadence_unchanged: Option<bool>,
    pub safe_mode_engaged_tick: Option<u64>,
    pub archive_lossless: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indistinguishability: Option<Comparison>,
    /// Downlink byte stream equals the same scenario run without the implant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downlink_matches_reference: Option<bool>,
    #[serde(default)]
    pub assertions: Vec<AssertionOutcome>,
}

impl RunReport {
    pub fn assertions_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn field_f64(row: &IndexRow, name: &str) -> f64 {
    row.fields.get(name).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

/// Attitude carried by a data row.
pub fn row_quaternion(row: &IndexRow) -> Quaternion {
    Quaternion::new(
        field_f64(row, "Q_X"),
        field_f64(row, "Q_Y"),
        field_f64(row, "Q_Z"),
        field_f64(row, "Q_W"),
    )
}

fn intervals(ticks: &[u64]) -> BTreeSet<u64> {
    ticks.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Derives everything except the forensic comparison and the assertion results.
pub fn compute_report(a: &RunArtifacts, counters: Counters) -> RunReport {
    let s = &a.scenario;
    let activation_tick = a
        .truth
        .iter()
        .find(|t| t.implant_phase == Some(Phase::Active))
        .map(|t| t.tick);
    let after = |tick: u64| activation_tick.is_none_or(|at| tick >= at);

    let mut bus_packets = BTreeMap::new();
    let mut publications: BTreeMap<String, PublisherCounts> = BTreeMap::new();
    for e in &a.ledger {
        *bus_packets.entry(e.mid).or_insert(0) += 1;
        let c = publications.entry(e.sender.clone()).or_default();
        match e.disposition {
            Disposition::Delivered => c.delivered += 1,
            Disposition::AuthRejected => c.auth_rejected += 1,
            Disposition::SafeModeDropped => c.safe_mode_dropped += 1,
        }
    }
    let solo_records_on_tracker_mids = a
        .ledger
        .iter()
        .filter(|e| e.sender == SOLO && TRACKER_MIDS.contains(&e.mid))
        .count();

    let mut ground_packets = BTreeMap::new();
    for r in &a.index {
        *ground_packets.entry(r.name.clone()).or_insert(0) += 1;
    }

    let mut alert_counts = BTreeMap::new();
    for al in &a.alerts {
        *alert_counts.entry(al.rule).or_insert(0) += 1;
    }
    let mut time_to_detection = BTreeMap::new();
    if let Some(at) = activation_tick {
        for al in a.alerts.iter().filter(|al| al.tick >= at) {
            time_to_detection.entry(al.rule.defense()).or_insert(al.tick - at);
        }
    }

    let data_rows: Vec<&IndexRow> = a.index.iter().filter(|r| r.mid == DATA_TLM_MID).collect();
    let data_rows_after_activation = activation_tick.map(|at| data_rows.iter().filter(|r| r.tick >= at).count());

    // ground-believed attitude: the last data row received in a tick
    let mut believed: BTreeMap<u64, &IndexRow> = BTreeMap::new();
    for r in data_rows.iter().filter(|r| after(r.tick)) {
        believed.insert(r.tick, r);
    }
    let errors: Vec<f64> = believed
        .iter()
        .filter_map(|(tick, r)| {
            let truth = a.truth.get(*tick as usize)?;
            Some(angular_distance(&row_quaternion(r), &truth.q).unwrap_or(std::f64::consts::PI))
        })
        .collect();
    let deception = DeceptionMetrics {
        from_tick: activation_tick.unwrap_or(0),
        cycles: errors.len(),
        mean_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        max_error: errors.iter().copied().reduce(f64::max),
    };

    let mut hk_deception = HkDeception::default();
    if let Some(at) = activation_tick {
        let hk: Vec<_> = a.hk_history.iter().filter(|h| h.mid == HK_TLM_MID).collect();
        for t in a.truth.iter().filter(|t| t.hk_request && t.tick >= at) {
            hk_deception.cycles += 1;
            let shown = hk.iter().take_while(|h| h.tick <= t.tick).last();
            if shown.and_then(|h| h.fields.get("ENABLED")).and_then(Value::as_u64) == Some(1) {
                hk_deception.displayed_enabled += 1;
            }
            if !t.tracker_enabled {
                hk_deception.device_disabled += 1;
            }
        }
    }

    let mut cadence = BTreeMap::new();
    let mut cadence_unchanged = None;
    if let Some(at) = activation_tick {
        let mut all_same = true;
        for mid in [DATA_TLM_MID, HK_TLM_MID] {
            let ticks: Vec<u64> = a.index.iter().filter(|r| r.mid == mid).map(|r| r.tick).collect();
            let (pre, post): (Vec<u64>, Vec<u64>) = ticks.iter().partition(|&&t| t < at);
            let c = Cadence {
                before: intervals(&pre),
                after: intervals(&post),
            };
            all_same &= !c.before.is_empty() && c.before == c.after;
            cadence.insert(mid, c);
        }
        let comparable = cadence.values().any(|c: &Cadence| !c.before.is_empty());
        cadence_unchanged = comparable.then_some(all_same);
    }

    let script: Vec<(u64, &str)> = s.operator_script.iter().map(|c| (c.tick, c.command.as_str())).collect();
    let logged: Vec<(u64, &str)> = a.cmdlog.iter().map(|c| (c.tick, c.name.as_str())).collect();

    let safe_mode_engaged_tick = a
        .index
        .iter()
        .filter(|r| r.mid == EVENT_TLM_MID)
        .find(|r| r.fields.get("ENGAGED").and_then(Value::as_u64) == Some(1))
        .and_then(|r| r.fields.get("TRIGGER_TICK").and_then(Value::as_u64));

    RunReport {
        scenario: s.name.clone(),
        seed: s.seed,
        duration_ticks: s.duration_ticks,
        counters,
        bus_packets,
        ground_packets,
        publications,
        format_violations: a.violations.len(),
        alert_counts,
        alerts: a.alerts.clone(),
        activation_tick,
        solo_records_on_tracker_mids,
        data_rows_after_activation,
        command_log_is_script: script == logged,
        deception,
        time_to_detection,
        hk_deception,
        cadence,
        cadence_unchanged,
        safe_mode_engaged_tick,
        archive_lossless: archive_lossless(&a.archive, &a.index),
        indistinguishability: None,
        downlink_matches_reference: None,
        assertions: Vec::new(),
    }
}

impl Expectations {
    pub fn check(&self, r: &RunReport) -> Vec<AssertionOutcome> {
        let mut out = Vec::new();
        let mut push = |name: &str, passed: bool, detail: String| {
            out.push(AssertionOutcome {
                name: name.to_string(),
                passed,
                detail,
            })
        };
        let eq = |got: String, want: String| format!("got {got}, want {want}");

        if let Some(n) = self.alerts {
            push(
                "alerts",
                r.alerts.len() == n,
                eq(r.alerts.len().to_string(), n.to_string()),
            );
        }
        for rule in &self.absent_rules {
            let n = r.alert_counts.get(rule).copied().unwrap_or(0);
            push(&format!("absent {rule:?}"), n == 0, format!("{n} alerts"));
        }
        for d in &self.detection {
            let first = r
                .alerts
                .iter()
                .find(|a| a.rule == d.rule && r.activation_tick.is_some_and(|at| a.tick >= at));
            let delay = first.zip(r.activation_tick).map(|(a, at)| a.tick - at);
            push(
                &format!("detect {:?}", d.rule),
                delay.is_some_and(|t| t <= d.within_ticks),
                format!("delay {delay:?} ticks, bound {}", d.within_ticks),
            );
        }
        if let Some(n) = self.format_violations {
            push(
                "format_violations",
                r.format_violations == n,
                eq(r.format_violations.to_string(), n.to_string()),
            );
        }
        if let Some(n) = self.solo_records_on_tracker_mids {
            let got = r.solo_records_on_tracker_mids;
            push(
                "solo_records_on_tracker_mids",
                got == n,
                eq(got.to_string(), n.to_string()),
            );
        }
        if let Some(n) = self.solo_delivered {
            let got = r.publications.get(SOLO).map_or(0, |c| c.delivered);
            push("solo_delivered", got == n, eq(got.to_string(), n.to_string()));
        }
        if let Some(want) = self.genuine_all_delivered {
            let bad: usize = r
                .publications
                .iter()
                .filter(|(n, _)| n.as_str() != SOLO)
                .map(|(_, c)| c.auth_rejected + c.safe_mode_dropped)
                .sum();
            push(
                "genuine_all_delivered",
                (bad == 0) == want,
                format!("{bad} genuine publications not delivered"),
            );
        }
        if let Some(n) = self.data_rows_after_activation {
            let got = r.data_rows_after_activation;
            push(
                "data_rows_after_activation",
                got == Some(n),
                eq(format!("{got:?}"), n.to_string()),
            );
        }
        if let Some(want) = self.command_log_is_script {
            push(
                "command_log_is_script",
                r.command_log_is_script == want,
                eq(r.command_log_is_script.to_string(), want.to_string()),
            );
        }
        if let Some(t) = self.activation_tick {
            push(
                "activation_tick",
                r.activation_tick == Some(t),
                eq(format!("{:?}", r.activation_tick), t.to_string()),
            );
        }
        if let Some(tol) = self.mean_error {
            let got = r.deception.mean_error;
            push(
                "mean_error",
                got.is_some_and(|g| (g - tol.value).abs() <= tol.tol),
                format!("got {got:?}, want {} ± {}", tol.value, tol.tol),
            );
        }
        if let Some(min) = self.hk_enabled_fraction_min {
            let got = r.hk_deception.displayed_enabled_fraction();
            push(
                "hk_enabled_fraction",
                got.is_some_and(|g| g >= min),
                format!("got {got:?}, min {min}"),
            );
        }
        if let Some(min) = self.device_disabled_fraction_min {
            let got = r.hk_deception.device_disabled_fraction();
            push(
                "device_disabled_fraction",
                got.is_some_and(|g| g >= min),
                format!("got {got:?}, min {min}"),
            );
        }
        if let Some(want) = self.cadence_unchanged {
            push(
                "cadence_unchanged",
                r.cadence_unchanged == Some(want),
                eq(format!("{:?}", r.cadence_unchanged), want.to_string()),
            );
        }
        if let Some(want) = self.indistinguishable {
            let got = r
                .indistinguishability
                .as_ref()
                .map(|c| c.verdict == Verdict::Indistinguishable);
            push(
                "indistinguishable",
                got == Some(want),
                eq(format!("{got:?}"), want.to_string()),
            );
        }
        if let Some(want) = self.downlink_matches_reference {
            let got = r.downlink_matches_reference;
            push(
                "downlink_matches_reference",
                got == Some(want),
                eq(format!("{got:?}"), want.to_string()),
            );
        }
        if let Some(want) = self.safe_mode_engaged {
            let got = r.safe_mode_engaged_tick.is_some();
            push("safe_mode_engaged", got == want, eq(got.to_string(), want.to_string()));
        }
        out
    }
}
