#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use sbsim_core::scenario::Scenario;
use sbsim_core::spacepacket::{
    MessageId, SpacePacket, TelemetrySecondaryHeader, MAX_FUNCTION_CODE, MAX_SEQUENCE_COUNT,
};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn shipped(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.json"))).unwrap()
}

pub fn all_shipped() -> Vec<Scenario> {
    let mut paths: Vec<_> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Scenario::load(p).unwrap()).collect()
}

pub fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

/// Any packet the codec must be able to carry.
pub fn arb_packet() -> impl Strategy<Value = SpacePacket> {
    let payload = prop::collection::vec(any::<u8>(), 0..256);
    let tlm = (
        0u16..0x800,
        0..=MAX_SEQUENCE_COUNT,
        any::<u32>(),
        any::<u16>(),
        payload.clone(),
    )
        .prop_map(|(apid, seq, seconds, subseconds, payload)| {
            SpacePacket::telemetry(
                MessageId::telemetry(apid),
                seq,
                TelemetrySecondaryHeader { seconds, subseconds },
                payload,
            )
        });
    let cmd = (0u16..0x800, 0..=MAX_SEQUENCE_COUNT, 0..=MAX_FUNCTION_CODE, payload)
        .prop_map(|(apid, seq, fc, payload)| SpacePacket::command(MessageId::command(apid), seq, fc, payload));
    prop_oneof![tlm, cmd]
}
