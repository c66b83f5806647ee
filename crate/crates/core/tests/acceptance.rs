//! Acceptance suite. Each test checks one criterion with values derived here from the raw
//! artifacts, independently of the report code, and prints a single PASS/FAIL line.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use nalgebra::{Quaternion as NQ, UnitQuaternion};
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

use sbsim_core::attitude::Quaternion;
use sbsim_core::defenses::AlertRule;
use sbsim_core::ground::{GroundDatabase, QUATERNION_TAG};
use sbsim_core::implant::Phase;
use sbsim_core::interface::star_tracker::{DataTlm, FunctionCode, CMD_MID, DATA_TLM_MID, HK_TLM_MID, REQ_MID};
use sbsim_core::scenario::{compare_runs, resolve_mask, run_scenario, simulate, RunArtifacts, Scenario, Verdict};
use sbsim_core::scheduler::TICK_SECONDS;
use sbsim_core::softbus::Disposition;
use sbsim_core::spacepacket::{MessageId, SpacePacket};

use common::{all_shipped, arb_packet, shipped, unhex};

const SOLO: &str = "SOLO";

fn verdict(name: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("PASS  {name}");
    } else {
        println!("FAIL  {name}: {}", failures.join("; "));
    }
    assert!(failures.is_empty(), "{name}: {failures:?}");
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn run(s: &Scenario) -> RunArtifacts {
    simulate(s).unwrap().0
}

fn activation(a: &RunArtifacts) -> Option<u64> {
    a.truth
        .iter()
        .find(|t| t.implant_phase == Some(Phase::Active))
        .map(|t| t.tick)
}

/// Decodes the archived packet behind an index row straight from the archive bytes.
fn archived(a: &RunArtifacts, row: usize) -> SpacePacket {
    let r = &a.index[row];
    SpacePacket::decode(&a.archive[r.offset..r.offset + r.len]).unwrap()
}

fn quaternion(p: &SpacePacket) -> Quaternion {
    DataTlm::from_packet(p).unwrap().q
}

fn to_na(q: &Quaternion) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(NQ::new(q.w, q.x, q.y, q.z))
}

fn norm(q: &Quaternion) -> f64 {
    q.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn quiet(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn request_period(s: &Scenario, fc: FunctionCode) -> u64 {
    s.schedule
        .iter()
        .find(|e| e.target_mid == REQ_MID && e.function_code == fc as u8)
        .map(|e| e.period_ticks)
        .unwrap()
}

#[test]
fn integration_phase_is_silent() {
    let s = shipped("integration_phase");
    let delay = s.implant.as_ref().unwrap().activation_delay;
    let started = Instant::now();
    let a = run(&s);
    let elapsed = started.elapsed();
    let tracker: BTreeSet<MessageId> = [CMD_MID, REQ_MID, DATA_TLM_MID, HK_TLM_MID].into_iter().collect();
    let solo = a
        .ledger
        .iter()
        .filter(|e| e.sender == SOLO && tracker.contains(&e.mid))
        .count();
    let mut f = Vec::new();
    check(
        &mut f,
        s.duration_ticks < delay,
        format!("duration {} not below delay {delay}", s.duration_ticks),
    );
    check(&mut f, solo == 0, format!("{solo} SOLO records on tracker MIDs"));
    check(&mut f, a.alerts.is_empty(), format!("{} alerts", a.alerts.len()));
    check(
        &mut f,
        a.violations.is_empty(),
        format!("{} parse errors", a.violations.len()),
    );
    check(&mut f, !a.index.is_empty(), "ground received nothing");
    check(&mut f, elapsed.as_secs_f64() < 5.0, format!("runtime {elapsed:?}"));
    verdict(
        "integration phase: no SOLO traffic on tracker MIDs, no alerts, no parse errors",
        &f,
    );
}

#[test]
fn replacement_delivers_twenty_four_valid_packets() {
    let s = shipped("replacement");
    let started = Instant::now();
    let a = run(&s);
    let elapsed = started.elapsed();
    let from = activation(&a).unwrap();
    let rows: Vec<usize> = a
        .index
        .iter()
        .filter(|r| r.mid == DATA_TLM_MID && r.tick >= from)
        .map(|r| r.row)
        .collect();
    let mut f = Vec::new();
    check(
        &mut f,
        rows.len() == 24,
        format!("{} data rows after activation", rows.len()),
    );
    check(
        &mut f,
        a.violations.is_empty(),
        format!("{} format violations", a.violations.len()),
    );
    let packets: Vec<SpacePacket> = rows.iter().map(|&r| archived(&a, r)).collect();
    for (row, p) in rows.iter().zip(&packets) {
        check(
            &mut f,
            a.index[*row].name == "STAR_TRACKER_DATA",
            format!("row {row} not schema-parsed"),
        );
        let n = norm(&quaternion(p));
        check(&mut f, (n - 1.0).abs() <= 1e-6, format!("row {row} norm {n}"));
    }
    let times: Vec<f64> = packets.iter().map(|p| p.timestamp().unwrap().as_secs_f64()).collect();
    for w in times.windows(2) {
        check(
            &mut f,
            w[1] - w[0] == 1.0,
            format!("timestamp step {} -> {}", w[0], w[1]),
        );
    }
    check(&mut f, elapsed.as_secs_f64() < 5.0, format!("runtime {elapsed:?}"));
    verdict(
        "replacement: 24 post-activation data rows, unit quaternions, 1.0 s timestamps",
        &f,
    );
}

/// Distinct inter-arrival gaps (ticks) per MID at the ground, split at `at`.
fn gaps(a: &RunArtifacts, at: u64) -> BTreeMap<MessageId, (BTreeSet<u64>, BTreeSet<u64>)> {
    let mut last: BTreeMap<MessageId, u64> = BTreeMap::new();
    let mut out: BTreeMap<MessageId, (BTreeSet<u64>, BTreeSet<u64>)> = BTreeMap::new();
    for r in &a.index {
        if let Some(prev) = last.insert(r.mid, r.tick) {
            // A gap spanning the activation tick belongs to neither side.
            if prev >= at {
                out.entry(r.mid).or_default().1.insert(r.tick - prev);
            } else if r.tick < at {
                out.entry(r.mid).or_default().0.insert(r.tick - prev);
            }
        }
    }
    out
}

#[test]
fn cadence_is_unchanged_by_activation() {
    let s = shipped("replacement_checkout");
    let a = run(&s);
    let from = activation(&a).unwrap();
    let g = gaps(&a, from);
    let mut f = Vec::new();
    for mid in [DATA_TLM_MID, HK_TLM_MID] {
        match g.get(&mid) {
            Some((before, after)) => {
                check(
                    &mut f,
                    !before.is_empty() && !after.is_empty(),
                    format!("{mid}: missing samples"),
                );
                check(
                    &mut f,
                    before == after,
                    format!("{mid}: before {before:?} after {after:?}"),
                );
            }
            None => f.push(format!("{mid}: no traffic")),
        }
    }
    verdict(
        "cadence: per-MID ground inter-arrival identical before and after activation",
        &f,
    );
}

/// Index rows with quaternion fields removed, as plain JSON.
fn masked_index(a: &RunArtifacts, masked: &BTreeSet<String>) -> Vec<Value> {
    a.index
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).unwrap();
            let fields = v["fields"].as_object_mut().unwrap();
            fields.retain(|k, _| !masked.contains(k));
            v
        })
        .collect()
}

#[test]
fn forensic_comparison_is_blind() {
    let base = run(&shipped("baseline"));
    let attack = run(&shipped("replacement"));
    let db = GroundDatabase::builtin();
    let mask = resolve_mask(&db, &[QUATERNION_TAG.to_string()]);
    let masked: BTreeSet<String> = db.tagged_fields(QUATERNION_TAG).into_iter().collect();
    let mut f = Vec::new();
    let c = compare_runs(&base, &attack, &mask).unwrap();
    check(
        &mut f,
        c.verdict == Verdict::Indistinguishable,
        format!("verdict {:?}: {:?}", c.verdict, c.differences),
    );
    check(&mut f, base.cmdlog == attack.cmdlog, "command logs differ");
    check(&mut f, base.hk_history == attack.hk_history, "HK histories differ");
    check(
        &mut f,
        masked_index(&base, &masked) == masked_index(&attack, &masked),
        "masked indexes differ",
    );
    check(&mut f, masked.len() == 4, format!("quaternion mask {masked:?}"));
    let unmasked = compare_runs(&base, &attack, &[]).unwrap();
    check(
        &mut f,
        unmasked.verdict == Verdict::Distinguishable,
        "unmasked comparison saw no spoofed values",
    );
    let own = compare_runs(&base, &base, &mask).unwrap();
    check(
        &mut f,
        own.verdict == Verdict::Indistinguishable,
        "baseline differs from itself",
    );
    verdict(
        "forensics: baseline vs replacement INDISTINGUISHABLE with quaternions masked",
        &f,
    );
}

#[test]
fn housekeeping_shows_a_disabled_device_as_operational() {
    let a = run(&shipped("replacement"));
    let from = activation(&a).unwrap();
    let cycles: Vec<_> = a.truth.iter().filter(|t| t.hk_request && t.tick >= from).collect();
    let mut shown = 0usize;
    let mut disabled = 0usize;
    for t in &cycles {
        let view = a
            .hk_history
            .iter()
            .rev()
            .find(|h| h.mid == HK_TLM_MID && h.tick <= t.tick);
        if view.is_some_and(|h| h.fields.get("ENABLED") == Some(&Value::from(1))) {
            shown += 1;
        }
        if !t.tracker_enabled {
            disabled += 1;
        }
    }
    let n = cycles.len();
    let mut f = Vec::new();
    check(&mut f, n > 0, "no HK cycles after activation");
    check(
        &mut f,
        shown as f64 >= 0.95 * n as f64,
        format!("enabled=1 shown in {shown}/{n} cycles"),
    );
    check(
        &mut f,
        disabled == n,
        format!("device disabled in {disabled}/{n} cycles"),
    );
    verdict("housekeeping: ground sees enabled=1 while the device is disabled", &f);
}

#[test]
fn bias_mode_offsets_the_believed_attitude() {
    let s = shipped("bias");
    let bias = s.implant.as_ref().unwrap().bias_angle.unwrap();
    let a = run(&s);
    let from = activation(&a).unwrap();
    let truth: BTreeMap<u64, Quaternion> = a.truth.iter().map(|t| (t.tick, t.q)).collect();
    // Last writer wins per tick.
    let mut believed: BTreeMap<u64, Quaternion> = BTreeMap::new();
    for r in a.index.iter().filter(|r| r.mid == DATA_TLM_MID && r.tick >= from) {
        believed.insert(r.tick, quaternion(&archived(&a, r.row)));
    }
    let errors: Vec<f64> = believed
        .iter()
        .map(|(t, q)| to_na(q).angle_to(&to_na(&truth[t])))
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
    let spoofed: Vec<Quaternion> = a
        .ledger
        .iter()
        .filter(|e| e.sender == SOLO && e.mid == DATA_TLM_MID)
        .map(|e| quaternion(&SpacePacket::decode(&unhex(&e.bytes)).unwrap()))
        .collect();
    let mut f = Vec::new();
    check(&mut f, !errors.is_empty(), "no believed attitudes");
    check(
        &mut f,
        (mean - bias).abs() <= 1e-6,
        format!("mean error {mean}, want {bias}"),
    );
    check(&mut f, !spoofed.is_empty(), "no spoofed packets");
    for q in &spoofed {
        check(
            &mut f,
            (norm(q) - 1.0).abs() <= 1e-9,
            format!("spoofed norm {}", norm(q)),
        );
    }
    verdict(
        "bias: believed attitude off by 0.01 rad, spoofed quaternions unit-norm",
        &f,
    );
}

#[test]
fn authenticated_bus_rejects_every_implant_publication() {
    let reference = run(&shipped("baseline"));
    let mut f = Vec::new();
    for name in ["replacement_auth", "bias_auth"] {
        let s = shipped(name);
        check(&mut f, s.defenses.auth.enabled, format!("{name}: auth off"));
        let a = run(&s);
        let solo: Vec<_> = a.ledger.iter().filter(|e| e.sender == SOLO).collect();
        let rejected = solo
            .iter()
            .filter(|e| e.disposition == Disposition::AuthRejected)
            .count();
        let genuine: Vec<_> = a.ledger.iter().filter(|e| e.sender != SOLO).collect();
        let delivered = genuine
            .iter()
            .filter(|e| e.disposition == Disposition::Delivered)
            .count();
        check(&mut f, !solo.is_empty(), format!("{name}: implant never published"));
        check(
            &mut f,
            rejected == solo.len(),
            format!("{name}: {rejected}/{} SOLO rejected", solo.len()),
        );
        check(
            &mut f,
            delivered == genuine.len(),
            format!("{name}: {delivered}/{} genuine delivered", genuine.len()),
        );
        check(
            &mut f,
            a.downlink == reference.downlink,
            format!("{name}: downlink differs from no-auth baseline"),
        );
    }
    verdict(
        "authentication: all SOLO publications rejected, genuine traffic and downlink unchanged",
        &f,
    );
}

fn first_alert(a: &RunArtifacts, rule: AlertRule) -> Option<u64> {
    a.alerts.iter().find(|x| x.rule == rule).map(|x| x.tick)
}

#[test]
fn ids_detects_both_modes_without_false_positives() {
    let mut f = Vec::new();
    let a = run(&shipped("replacement_ids"));
    let at = activation(&a);
    let first = first_alert(&a, AlertRule::OnboardDeviceCommand);
    check(
        &mut f,
        at.is_some() && first == at,
        format!("replacement: alert {first:?}, activation {at:?}"),
    );
    // The DISABLE is the implant's only onboard command on the device MID.
    let disable = a.ledger.iter().find(|e| {
        e.sender == SOLO
            && SpacePacket::decode(&unhex(&e.bytes))
                .is_ok_and(|p| p.function_code() == Some(FunctionCode::Disable as u8))
    });
    check(
        &mut f,
        disable.map(|e| e.tick) == first,
        "alert tick is not the DISABLE tick",
    );

    let s = shipped("bias_ids");
    let cycle = request_period(&s, FunctionCode::ReqData);
    let a = run(&s);
    let at = activation(&a).unwrap();
    let first = first_alert(&a, AlertRule::DupPublisher);
    check(
        &mut f,
        first.is_some_and(|t| t >= at && t - at <= cycle),
        format!("bias: alert {first:?}, activation {at}"),
    );

    let s = shipped("soak_all");
    let d = &s.defenses;
    check(
        &mut f,
        s.implant.is_none() && s.duration_ticks == 10_000,
        "soak scenario shape",
    );
    check(
        &mut f,
        d.auth.enabled && d.ids.enabled && d.model_check.enabled && d.safe_mode.enabled,
        "soak: not all defenses on",
    );
    let a = run(&s);
    check(&mut f, a.alerts.is_empty(), format!("soak: {} alerts", a.alerts.len()));
    verdict(
        "IDS: ONBOARD_DEVICE_COMMAND at activation, DUP_PUBLISHER within a cycle, clean soak",
        &f,
    );
}

#[test]
fn model_check_catches_frozen_spoof_and_misses_small_bias() {
    let mut f = Vec::new();
    let s = shipped("replacement_model");
    let theta = s.defenses.model_check.theta_max;
    let rate = s.rate_profile.max_rate();
    let cycle = request_period(&s, FunctionCode::ReqData);
    // The frozen spoof departs from truth at `rate`; the first report after the distance
    // crosses theta arrives at the next request cycle.
    let crossing_ticks = (theta / rate / TICK_SECONDS).ceil() as u64;
    let bound = crossing_ticks.div_ceil(cycle) * cycle;
    check(&mut f, bound <= 10, format!("derived bound {bound} ticks exceeds 1 s"));
    let a = run(&s);
    let at = activation(&a).unwrap();
    let first = first_alert(&a, AlertRule::ModelInconsistent);
    check(
        &mut f,
        first.is_some_and(|t| t >= at && t - at <= bound),
        format!("frozen: alert {first:?}, activation {at}, bound {bound}"),
    );

    let s = shipped("bias_model");
    let bias = s.implant.as_ref().unwrap().bias_angle.unwrap();
    check(
        &mut f,
        bias < s.defenses.model_check.theta_max,
        "bias not below theta_max",
    );
    check(
        &mut f,
        !s.defenses.auth.enabled && !s.defenses.ids.enabled,
        "evasion run has auth or IDS on",
    );
    let a = run(&s);
    let n = a
        .alerts
        .iter()
        .filter(|x| x.rule == AlertRule::ModelInconsistent)
        .count();
    check(&mut f, n == 0, format!("bias: {n} model alerts"));
    verdict("model check: frozen spoof flagged within 1 s, 0.01 rad bias evades", &f);
}

#[test]
fn codec_roundtrips_detects_flips_and_archives_losslessly() {
    let mut f = Vec::new();
    let mut runner = TestRunner::new(quiet(10_000));
    let result = runner.run(&arb_packet(), |p| {
        let bytes = p.encode().unwrap();
        proptest::prop_assert_eq!(SpacePacket::decode(&bytes).unwrap(), p);
        Ok(())
    });
    check(&mut f, result.is_ok(), format!("roundtrip: {result:?}"));

    let mut runner = TestRunner::new(quiet(500));
    let result = runner.run(&arb_packet(), |p| {
        let bytes = p.encode().unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            if p.is_command() {
                proptest::prop_assert!(!SpacePacket::decode(&b).is_ok_and(|q| q.is_command()), "bit {}", bit);
            }
        }
        Ok(())
    });
    check(&mut f, result.is_ok(), format!("bit flips: {result:?}"));

    let a = run(&shipped("replacement"));
    let mut rebuilt = Vec::new();
    for r in &a.index {
        check(&mut f, r.offset == rebuilt.len(), format!("row {} offset gap", r.row));
        rebuilt.extend(archived(&a, r.row).encode().unwrap());
    }
    check(
        &mut f,
        rebuilt == a.archive,
        "archive does not re-encode from its index",
    );
    verdict(
        "codec: 10^4 roundtrips, single-bit flips rejected, archive lossless",
        &f,
    );
}

#[test]
fn every_shipped_scenario_is_deterministic() {
    let mut f = Vec::new();
    let scenarios = all_shipped();
    check(
        &mut f,
        scenarios.len() >= 24,
        format!("only {} scenarios shipped", scenarios.len()),
    );
    for s in &scenarios {
        let a = run_scenario(s).unwrap().files();
        let b = run_scenario(s).unwrap().files();
        check(&mut f, a == b, format!("{}: artifacts differ between runs", s.name));
    }
    verdict(
        "determinism: byte-identical artifacts across two runs of every shipped scenario",
        &f,
    );
}
