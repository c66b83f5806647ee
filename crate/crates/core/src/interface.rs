//! Shared interface definitions: message IDs, function codes and payload layouts.
//!
//! Every application that talks to a device imports the device's definitions from here by
//! name, the same way flight apps include a vendor header. The ground database in
//! `schemas/ground.json` mirrors these layouts.

use crate::attitude::Quaternion;
use crate::spacepacket::{MessageId, SpacePacket, TelemetrySecondaryHeader};

/// Star tracker device application.
pub mod star_tracker {
    use super::*;

    /// Ground and inter-app commands (all function codes).
    pub const CMD_MID: MessageId = MessageId::command(0x0D0);
    /// Scheduler wakeups (`REQ_HK`, `REQ_DATA`).
    pub const REQ_MID: MessageId = MessageId::command(0x0D1);
    pub const HK_TLM_MID: MessageId = MessageId::telemetry(0x0D0);
    pub const DATA_TLM_MID: MessageId = MessageId::telemetry(0x0D1);

    pub const DATA_PAYLOAD_LEN: usize = 36;
    pub const HK_PAYLOAD_LEN: usize = 9;

    /// `status_word` bit 0: attitude solution valid.
    pub const STATUS_SOLUTION_VALID: u32 = 0x0000_0001;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    #[repr(u8)]
    pub enum FunctionCode {
        Noop = 0,
        ResetCounters = 1,
        Enable = 2,
        Disable = 3,
        ReqHk = 4,
        ReqData = 5,
    }

    impl TryFrom<u8> for FunctionCode {
        type Error = u8;

        fn try_from(code: u8) -> Result<Self, u8> {
            Ok(match code {
                0 => Self::Noop,
                1 => Self::ResetCounters,
                2 => Self::Enable,
                3 => Self::Disable,
                4 => Self::ReqHk,
                5 => Self::ReqData,
                other => return Err(other),
            })
        }
    }

    /// Data telemetry payload: `q_x q_y q_z q_w` as big-endian f64, then `status_word` u32.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct DataTlm {
        pub q: Quaternion,
        pub status_word: u32,
    }

    impl DataTlm {
        pub fn to_payload(&self) -> Vec<u8> {
            let mut out = Vec::with_capacity(DATA_PAYLOAD_LEN);
            for c in self.q.to_array() {
                out.extend_from_slice(&c.to_be_bytes());
            }
            out.extend_from_slice(&self.status_word.to_be_bytes());
            out
        }

        pub fn from_payload(payload: &[u8]) -> Option<Self> {
            if payload.len() != DATA_PAYLOAD_LEN {
                return None;
            }
            let f = |i: usize| f64::from_be_bytes(payload[i * 8..i * 8 + 8].try_into().unwrap());
            Some(Self {
                q: Quaternion::new(f(0), f(1), f(2), f(3)),
                status_word: u32::from_be_bytes(payload[32..36].try_into().unwrap()),
            })
        }

        pub fn to_packet(&self, sequence_count: u16, time: TelemetrySecondaryHeader) -> SpacePacket {
            SpacePacket::telemetry(DATA_TLM_MID, sequence_count, time, self.to_payload())
        }

        pub fn from_packet(packet: &SpacePacket) -> Option<Self> {
            (packet.mid() == DATA_TLM_MID)
                .then(|| Self::from_payload(&packet.payload))
                .flatten()
        }
    }

    /// Housekeeping payload: `cmd_count` u32, `cmd_error_count` u32, `enabled` u8.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct HkTlm {
        pub cmd_count: u32,
        pub cmd_error_count: u32,
        pub enabled: u8,
    }

    impl HkTlm {
        pub fn to_payload(&self) -> Vec<u8> {
            let mut out = Vec::with_capacity(HK_PAYLOAD_LEN);
            out.extend_from_slice(&self.cmd_count.to_be_bytes());
            out.extend_from_slice(&self.cmd_error_count.to_be_bytes());
            out.push(self.enabled);
            out
        }

        pub fn from_payload(payload: &[u8]) -> Option<Self> {
            if payload.len() != HK_PAYLOAD_LEN {
                return None;
            }
            Some(Self {
                cmd_count: u32::from_be_bytes(payload[0..4].try_into().unwrap()),
                cmd_error_count: u32::from_be_bytes(payload[4..8].try_into().unwrap()),
                enabled: payload[8],
            })
        }

        pub fn to_packet(&self, sequence_count: u16, time: TelemetrySecondaryHeader) -> SpacePacket {
            SpacePacket::telemetry(HK_TLM_MID, sequence_count, time, self.to_payload())
        }

        pub fn from_packet(packet: &SpacePacket) -> Option<Self> {
            (packet.mid() == HK_TLM_MID)
                .then(|| Self::from_payload(&packet.payload))
                .flatten()
        }
    }
}

/// Cyber-safe mode manager.
pub mod safe_mode {
    use super::*;

    pub const EVENT_TLM_MID: MessageId = MessageId::telemetry(0x0E0);
    pub const EVENT_PAYLOAD_LEN: usize = 6;

    /// Mode-transition event: `rule` u8 (alert rule code), `trigger_tick` u32, `engaged` u8.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct EventTlm {
        pub rule: u8,
        pub trigger_tick: u32,
        pub engaged: u8,
    }

    impl EventTlm {
        pub fn to_payload(&self) -> Vec<u8> {
            let mut out = Vec::with_capacity(EVENT_PAYLOAD_LEN);
            out.push(self.rule);
            out.extend_from_slice(&self.trigger_tick.to_be_bytes());
            out.push(self.engaged);
            out
        }

        pub fn from_payload(payload: &[u8]) -> Option<Self> {
            if payload.len() != EVENT_PAYLOAD_LEN {
                return None;
            }
            Some(Self {
                rule: payload[0],
                trigger_tick: u32::from_be_bytes(payload[1..5].try_into().unwrap()),
                engaged: payload[5],
            })
        }

        pub fn to_packet(&self, sequence_count: u16, time: TelemetrySecondaryHeader) -> SpacePacket {
            SpacePacket::telemetry(EVENT_TLM_MID, sequence_count, time, self.to_payload())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::star_tracker::*;
    use super::*;

    #[test]
    fn mids_have_expected_type_bits() {
        assert!(CMD_MID.is_command() && REQ_MID.is_command());
        assert!(HK_TLM_MID.is_telemetry() && DATA_TLM_MID.is_telemetry());
        assert_eq!(CMD_MID.value(), 0x18D0);
        assert_eq!(DATA_TLM_MID.value(), 0x08D1);
    }

    #[test]
    fn payload_layouts() {
        let d = DataTlm {
            q: Quaternion::new(0.0, 0.0, 0.6, 0.8),
            status_word: STATUS_SOLUTION_VALID,
        };
        let p = d.to_payload();
        assert_eq!(p.len(), DATA_PAYLOAD_LEN);
        assert_eq!(&p[16..24], &0.6f64.to_be_bytes());
        assert_eq!(DataTlm::from_payload(&p), Some(d));
        assert_eq!(DataTlm::from_payload(&p[1..]), None);

        let hk = HkTlm {
            cmd_count: 3,
            cmd_error_count: 1,
            enabled: 1,
        };
        assert_eq!(hk.to_payload(), vec![0, 0, 0, 3, 0, 0, 0, 1, 1]);
        assert_eq!(HkTlm::from_payload(&hk.to_payload()), Some(hk));

        let ev = safe_mode::EventTlm {
            rule: 2,
            trigger_tick: 400,
            engaged: 1,
        };
        assert_eq!(safe_mode::EventTlm::from_payload(&ev.to_payload()), Some(ev));
    }

    #[test]
    fn function_codes_roundtrip() {
        for code in 0u8..=5 {
            assert_eq!(FunctionCode::try_from(code).unwrap() as u8, code);
        }
        assert_eq!(FunctionCode::try_from(6), Err(6));
    }
}
