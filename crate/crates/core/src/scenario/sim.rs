//! Flight side of a run: truth model, bus, apps and defenses, stepped one tick at a time.
//!
//! Within a tick: uplinked commands are published and fully delivered, then each scheduler
//! request in table order, then any safe-mode event. Downlinked bytes are returned to the
//! caller and the truth model advances last.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{AttitudeError, Quaternion, TruthModel};
use crate::defenses::{DefenseError, DefenseSuite, SuiteContext};
use crate::downlink::RadioApp;
use crate::implant::{Implant, Phase};
use crate::interface::safe_mode::EVENT_TLM_MID;
use crate::interface::star_tracker::{FunctionCode, CMD_MID, DATA_TLM_MID, HK_TLM_MID, REQ_MID};
use crate::scheduler::{Scheduler, TICK_MILLIS, TICK_SECONDS};
use crate::softbus::{AppId, BusError, PublishRequest, Route, SoftwareBus};
use crate::spacepacket::{MessageId, SpacePacket, TelemetrySecondaryHeader};
use crate::star_tracker::{SensorContext, StarTrackerApp};

use super::config::{Scenario, ScenarioError};

pub const SCH: &str = "SCH";
pub const RADIO: &str = "RADIO";
pub const ST: &str = "ST";
pub const CSM: &str = "CSM";
pub const SOLO: &str = "SOLO";

/// MIDs the implant impersonates or commands.
pub const TRACKER_MIDS: [MessageId; 4] = [CMD_MID, REQ_MID, HK_TLM_MID, DATA_TLM_MID];

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Defense(#[from] DefenseError),
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
    #[error(transparent)]
    Schedule(#[from] crate::scheduler::ScheduleError),
    #[error("operator command: {0}")]
    Ground(#[from] crate::ground::GroundError),
}

/// Per-tick harness observation, invisible to the ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub tick: u64,
    pub q: Quaternion,
    pub tracker_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implant_phase: Option<Phase>,
    /// A scheduler housekeeping request fired this tick.
    pub hk_request: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AppIds {
    pub sch: AppId,
    pub radio: AppId,
    pub st: AppId,
    pub csm: AppId,
    pub solo: Option<AppId>,
}

pub struct Simulation {
    bus: SoftwareBus,
    suite: DefenseSuite,
    ids: AppIds,
    scheduler: Scheduler,
    truth: TruthModel,
    tracker: StarTrackerApp,
    implant: Option<Implant>,
    radio: RadioApp,
    tick: u64,
    samples: Vec<TruthSample>,
}

/// Default authorized publisher per MID: the genuine owner of each stream.
pub fn default_authorizations() -> BTreeMap<MessageId, Vec<String>> {
    [
        (CMD_MID, RADIO),
        (REQ_MID, SCH),
        (HK_TLM_MID, ST),
        (DATA_TLM_MID, ST),
        (EVENT_TLM_MID, CSM),
    ]
    .into_iter()
    .map(|(m, n)| (m, vec![n.to_string()]))
    .collect()
}

fn expected_rates(scenario: &Scenario) -> Vec<crate::defenses::ids::ExpectedRate> {
    scenario
        .schedule
        .iter()
        .filter(|e| e.target_mid == REQ_MID)
        .filter_map(|e| {
            let mid = match FunctionCode::try_from(e.function_code).ok()? {
                FunctionCode::ReqData => DATA_TLM_MID,
                FunctionCode::ReqHk => HK_TLM_MID,
                _ => return None,
            };
            Some(crate::defenses::ids::ExpectedRate {
                mid,
                period_ticks: e.period_ticks,
            })
        })
        .collect()
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let mut bus = SoftwareBus::new();
        let sch = bus.register(SCH)?;
        let radio_id = bus.register(RADIO)?;
        let st = bus.register(ST)?;
        let csm = bus.register(CSM)?;
        let implant = scenario
            .implant
            .clone()
            .map(Implant::new)
            .transpose()
            .map_err(ScenarioError::from)?;
        let solo = implant.as_ref().map(|_| bus.register(SOLO)).transpose()?;

        for mid in StarTrackerApp::SUBSCRIPTIONS {
            bus.subscribe(st, mid)?;
        }
        if let Some(solo) = solo {
            for mid in Implant::SUBSCRIPTIONS {
                bus.subscribe(solo, mid)?;
            }
        }
        let radio = RadioApp::new(scenario.downlink.filter.iter().copied(), scenario.downlink.queue_depth);
        for mid in radio.filter().collect::<Vec<_>>() {
            bus.subscribe(radio_id, mid)?;
        }

        let mut defenses = scenario.defenses.clone();
        if defenses.auth.authorized.is_empty() {
            defenses.auth.authorized = default_authorizations();
        }
        if defenses.ids.expected_rates.is_empty() {
            defenses.ids.expected_rates = expected_rates(scenario);
        }
        let apps: Vec<(AppId, String)> = bus.apps().map(|(a, n)| (a, n.to_string())).collect();
        let suite = DefenseSuite::new(
            &defenses,
            SuiteContext {
                apps: &apps,
                seed: scenario.seed,
                rate_profile: scenario.rate_profile.clone(),
                tick_seconds: TICK_SECONDS,
            },
        )?;

        Ok(Self {
            bus,
            suite,
            ids: AppIds {
                sch,
                radio: radio_id,
                st,
                csm,
                solo,
            },
            scheduler: Scheduler::new(scenario.schedule.clone())?,
            truth: TruthModel::new(
                scenario.initial_attitude,
                scenario.rate_profile.clone(),
                TICK_SECONDS,
                scenario.max_rate,
            )?,
            tracker: StarTrackerApp::new(scenario.tracker_noise_sigma, scenario.seed),
            implant,
            radio,
            tick: 0,
            samples: Vec::new(),
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn bus(&self) -> &SoftwareBus {
        &self.bus
    }

    pub fn defenses(&self) -> &DefenseSuite {
        &self.suite
    }

    pub fn app_ids(&self) -> AppIds {
        self.ids
    }

    pub fn tracker(&self) -> &StarTrackerApp {
        &self.tracker
    }

    pub fn implant(&self) -> Option<&Implant> {
        self.implant.as_ref()
    }

    pub fn radio(&self) -> &RadioApp {
        &self.radio
    }

    pub fn samples(&self) -> &[TruthSample] {
        &self.samples
    }

    fn time(&self) -> TelemetrySecondaryHeader {
        TelemetrySecondaryHeader::from_millis(self.tick * TICK_MILLIS)
    }

    fn publish(&mut self, sender: AppId, route: Route, packet: &SpacePacket) -> Result<(), SimError> {
        let tag = match self.suite.auth_enabled() {
            true => packet.encode().ok().and_then(|w| self.suite.sign(sender, &w)),
            false => None,
        };
        let req = PublishRequest {
            tick: self.tick,
            sender,
            route,
            packet,
            tag,
        };
        self.bus.publish_guarded(&req, &mut self.suite)?;
        Ok(())
    }

    fn drain(&mut self) -> Result<(), SimError> {
        let truth = *self.truth.state();
        let ctx = SensorContext {
            tick: self.tick,
            time: self.time(),
            truth: &truth,
        };
        while let Some(d) = self.bus.next_delivery() {
            let out = if d.to == self.ids.st {
                self.tracker.handle_command(&d.packet, &ctx)
            } else if Some(d.to) == self.ids.solo {
                self.implant
                    .as_mut()
                    .map(|i| i.observe(&d.packet, &ctx))
                    .unwrap_or_default()
            } else if d.to == self.ids.radio {
                self.radio.forward_telemetry(&d.packet);
                Vec::new()
            } else {
                Vec::new()
            };
            for p in out {
                self.publish(d.to, Route::Onboard, &p)?;
            }
        }
        Ok(())
    }

    /// Runs one tick. `uplink` holds command packet bytes received from the ground this tick;
    /// returns the link bytes emitted. Bodies that fail to parse are counted by the radio.
    pub fn step(&mut self, uplink: &[Vec<u8>]) -> Result<Vec<u8>, SimError> {
        for body in uplink {
            if let Ok(p) = self.radio.uplink_command(body) {
                self.publish(self.ids.radio, Route::Ground, &p)?;
                self.drain()?;
            }
        }
        let mut hk_request = false;
        for p in self.scheduler.tick(self.tick) {
            hk_request |= p.function_code() == Some(FunctionCode::ReqHk as u8);
            self.publish(self.ids.sch, Route::Onboard, &p)?;
            self.drain()?;
        }
        if let Some(ev) = self.suite.take_event(self.time()) {
            self.publish(self.ids.csm, Route::Onboard, &ev)?;
            self.drain()?;
        }
        self.samples.push(TruthSample {
            tick: self.tick,
            q: self.truth.state().q,
            tracker_enabled: self.tracker.is_enabled(),
            implant_phase: self.implant.as_ref().map(Implant::phase),
            hk_request,
        });
        let out = self.radio.take_outbox();
        self.truth.advance()?;
        self.tick += 1;
        Ok(out)
    }

    /// Bus-side stand-in for a link outage.
    pub fn set_link_up(&mut self, up: bool) {
        self.radio.set_link_up(up);
    }
}
