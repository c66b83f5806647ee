mod common;

use proptest::prelude::*;
use sbsim_core::spacepacket::{DecodeError, MessageId, SpacePacket, TelemetrySecondaryHeader};

use common::arb_packet;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(p in arb_packet()) {
        let bytes = p.encode().unwrap();
        prop_assert_eq!(SpacePacket::decode(&bytes).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn accepted_bytes_are_stable(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        if let Ok(p) = SpacePacket::decode(&bytes) {
            prop_assert_eq!(p.encode().unwrap(), bytes);
        }
    }

    #[test]
    fn no_single_bit_flip_yields_a_valid_command(
        apid in 0u16..0x800,
        fc in 0u8..=0x7F,
        payload in prop::collection::vec(any::<u8>(), 0..32),
    ) {
        let bytes = SpacePacket::command(MessageId::command(apid), 3, fc, payload).encode().unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut flipped = bytes.clone();
            flipped[bit / 8] ^= 1 << (bit % 8);
            if let Ok(p) = SpacePacket::decode(&flipped) {
                prop_assert!(!p.is_command(), "bit {} flip accepted as a command", bit);
            }
        }
    }

    #[test]
    fn truncation_is_rejected(p in arb_packet(), cut in 1usize..16) {
        let bytes = p.encode().unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(SpacePacket::decode(&bytes[..keep]).is_err());
    }
}

#[test]
fn known_telemetry_bytes() {
    let p = SpacePacket::telemetry(
        MessageId::telemetry(0x0D1),
        5,
        TelemetrySecondaryHeader {
            seconds: 41,
            subseconds: 0x8000,
        },
        vec![0xAA, 0xBB],
    );
    assert_eq!(
        p.encode().unwrap(),
        [0x08, 0xD1, 0xC0, 0x05, 0x00, 0x07, 0x00, 0x00, 0x00, 0x29, 0x80, 0x00, 0xAA, 0xBB]
    );
}

#[test]
fn command_checksum_flip_is_reported() {
    let mut bytes = SpacePacket::command(MessageId::command(0x0D0), 0, 2, vec![])
        .encode()
        .unwrap();
    bytes[7] ^= 0x01;
    assert!(matches!(
        SpacePacket::decode(&bytes),
        Err(DecodeError::BadChecksum { .. })
    ));
}
