//! Scenario runner: composes the stack, drives scripted runs and reports on them.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod report;
pub mod sim;

use crate::ground::{GroundDatabase, GroundStation, QUATERNION_TAG};

pub use artifacts::RunArtifacts;
pub use compare::{compare_runs, resolve_mask, Comparison, Verdict};
pub use config::{Expectations, Scenario, ScenarioError};
pub use report::{compute_report, Counters, RunReport};
pub use sim::{SimError, Simulation, TruthSample};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: RunArtifacts,
    pub report: RunReport,
}

impl RunOutput {
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        self.artifacts.files(&self.report)
    }
}

/// One headless run with an in-process ground station.
pub fn simulate(scenario: &Scenario) -> Result<(RunArtifacts, Counters), SimError> {
    let mut sim = Simulation::new(scenario)?;
    let mut ground = GroundStation::new(GroundDatabase::builtin());
    let mut downlink = Vec::new();
    let mut script = scenario.operator_script.iter().peekable();
    for tick in 0..scenario.duration_ticks {
        let mut uplink = Vec::new();
        while let Some(c) = script.next_if(|c| c.tick == tick) {
            uplink.push(ground.send_named(tick, &c.command, &c.args)?);
        }
        let bytes = sim.step(&uplink)?;
        ground.ingest_stream(tick, &bytes);
        ground.end_tick();
        downlink.extend_from_slice(&bytes);
    }
    Ok(collect(scenario, &sim, &ground, downlink))
}

/// Snapshots a finished (or stopped) run into its artifacts.
pub fn collect(
    scenario: &Scenario,
    sim: &Simulation,
    ground: &GroundStation,
    downlink: Vec<u8>,
) -> (RunArtifacts, Counters) {
    let counters = Counters {
        unmapped: ground.unmapped(),
        uplink_rejects: sim.radio().uplink_rejects(),
        downlink_dropped: sim.radio().dropped(),
    };
    let artifacts = RunArtifacts {
        scenario: scenario.clone(),
        ledger: sim.bus().ledger_entries(),
        downlink,
        archive: ground.archive().to_vec(),
        index: ground.index().to_vec(),
        cmdlog: ground.cmdlog().to_vec(),
        hk_history: ground.hk_history().to_vec(),
        violations: ground.violations().to_vec(),
        alerts: sim.defenses().alerts().to_vec(),
        truth: sim.samples().to_vec(),
    };
    (artifacts, counters)
}

/// Report for a set of artifacts: metrics, forensic comparison against the same scenario
/// without the implant, and the scenario's expectations. Counters are the only inputs that
/// are not in the artifacts themselves.
pub fn finish_report(artifacts: &RunArtifacts, counters: Counters) -> Result<RunReport, SimError> {
    let scenario = &artifacts.scenario;
    let mut report = compute_report(artifacts, counters);
    if scenario.implant.is_some() {
        let (reference, _) = simulate(&scenario.without_implant())?;
        let mask = resolve_mask(&GroundDatabase::builtin(), &[QUATERNION_TAG.to_string()]);
        report.indistinguishability = compare_runs(&reference, artifacts, &mask).ok();
        report.downlink_matches_reference = Some(reference.downlink == artifacts.downlink);
    }
    report.assertions = scenario.expect.check(&report);
    Ok(report)
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let (artifacts, counters) = simulate(scenario)?;
    let report = finish_report(&artifacts, counters)?;
    Ok(RunOutput { artifacts, report })
}
