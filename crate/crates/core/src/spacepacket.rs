//! CCSDS-style space packets.
//!
//! A packet is a 6-byte primary header, a secondary header whose shape is selected by the
//! packet-type bit of the message ID, and an opaque payload. Every multi-byte field is
//! big-endian. The byte layout is documented in `docs/wire-format.md`.
//!
//! Decoding performs syntactic checks only (truncation, length consistency, command checksum,
//! unsegmented sequence flags, reserved function-code bit). Nothing here knows what a payload
//! means or who produced it.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const PRIMARY_HEADER_LEN: usize = 6;
pub const TLM_SECONDARY_HEADER_LEN: usize = 6;
pub const CMD_SECONDARY_HEADER_LEN: usize = 2;
pub const MAX_PAYLOAD_LEN: usize = 65528;
pub const MAX_SEQUENCE_COUNT: u16 = 0x3FFF;
pub const MAX_FUNCTION_CODE: u8 = 0x7F;

const TYPE_BIT: u16 = 0x1000;
const SECONDARY_HEADER_FLAG: u16 = 0x0800;
const APID_MASK: u16 = 0x07FF;
const SEQUENCE_FLAGS_MASK: u16 = 0xC000;
const SEQUENCE_FLAGS_UNSEGMENTED: u16 = 0xC000;

/// 16-bit message identifier: `vvv t s aaaaaaaaaaa` (3 version bits, packet type,
/// secondary-header flag, 11-bit APID). Commands have the type bit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageId(u16);

impl MessageId {
    pub const fn new(value: u16) -> Self {
        Self(value)
    }

    /// Telemetry MID for an APID, secondary-header flag set.
    pub const fn telemetry(apid: u16) -> Self {
        Self(SECONDARY_HEADER_FLAG | (apid & APID_MASK))
    }

    /// Command MID for an APID, secondary-header flag set.
    pub const fn command(apid: u16) -> Self {
        Self(TYPE_BIT | SECONDARY_HEADER_FLAG | (apid & APID_MASK))
    }

    pub const fn value(self) -> u16 {
        self.0
    }

    pub const fn apid(self) -> u16 {
        self.0 & APID_MASK
    }

    pub const fn is_command(self) -> bool {
        self.0 & TYPE_BIT != 0
    }

    pub const fn is_telemetry(self) -> bool {
        !self.is_command()
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04X}", self.0)
    }
}

impl std::str::FromStr for MessageId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let value = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            Some(hex) => u16::from_str_radix(hex, 16)?,
            None => s.parse::<u16>()?,
        };
        Ok(Self(value))
    }
}

impl Serialize for MessageId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MessageId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u16),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(n) => Ok(Self(n)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimaryHeader {
    pub mid: MessageId,
    pub sequence_count: u16,
    /// Total packet length in bytes minus 7.
    pub length_field: u16,
}

impl PrimaryHeader {
    pub fn to_bytes(&self) -> [u8; PRIMARY_HEADER_LEN] {
        let seq = SEQUENCE_FLAGS_UNSEGMENTED | (self.sequence_count & MAX_SEQUENCE_COUNT);
        let mut out = [0u8; PRIMARY_HEADER_LEN];
        out[0..2].copy_from_slice(&self.mid.value().to_be_bytes());
        out[2..4].copy_from_slice(&seq.to_be_bytes());
        out[4..6].copy_from_slice(&self.length_field.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() < PRIMARY_HEADER_LEN {
            return Err(DecodeError::Truncated {
                needed: PRIMARY_HEADER_LEN,
                found: bytes.len(),
            });
        }
        let mid = MessageId(u16::from_be_bytes([bytes[0], bytes[1]]));
        let seq = u16::from_be_bytes([bytes[2], bytes[3]]);
        if seq & SEQUENCE_FLAGS_MASK != SEQUENCE_FLAGS_UNSEGMENTED {
            return Err(DecodeError::Segmented {
                flags: (seq >> 14) as u8,
            });
        }
        Ok(Self {
            mid,
            sequence_count: seq & MAX_SEQUENCE_COUNT,
            length_field: u16::from_be_bytes([bytes[4], bytes[5]]),
        })
    }

    /// Full packet length implied by the length field.
    pub fn packet_len(&self) -> usize {
        self.length_field as usize + 7
    }
}

/// Mission-elapsed time: whole seconds plus 1/65536 s fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct TelemetrySecondaryHeader {
    pub seconds: u32,
    pub subseconds: u16,
}

impl TelemetrySecondaryHeader {
    pub fn from_millis(ms: u64) -> Self {
        Self {
            seconds: (ms / 1000) as u32,
            subseconds: ((ms % 1000) * 65536 / 1000) as u16,
        }
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.seconds as f64 + self.subseconds as f64 / 65536.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandSecondaryHeader {
    pub function_code: u8,
    pub checksum: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondaryHeader {
    Telemetry(TelemetrySecondaryHeader),
    Command(CommandSecondaryHeader),
}

impl SecondaryHeader {
    fn len(&self) -> usize {
        match self {
            Self::Telemetry(_) => TLM_SECONDARY_HEADER_LEN,
            Self::Command(_) => CMD_SECONDARY_HEADER_LEN,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD_LEN}-byte limit")]
    PayloadTooLarge(usize),
    #[error("sequence count {0} does not fit in 14 bits")]
    SequenceOutOfRange(u16),
    #[error("function code {0} does not fit in 7 bits")]
    FunctionCodeOutOfRange(u8),
    #[error("secondary header kind does not match the packet-type bit of {0}")]
    SecondaryHeaderMismatch(MessageId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated packet: need {needed} bytes, have {found}")]
    Truncated { needed: usize, found: usize },
    #[error("length field declares {declared} bytes but {actual} were supplied")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("command checksum mismatch: stored 0x{stored:02X}, computed 0x{computed:02X}")]
    BadChecksum { stored: u8, computed: u8 },
    #[error("segmented packet (sequence flags {flags:#04b}) not supported")]
    Segmented { flags: u8 },
    #[error("function-code reserved bit set (byte 0x{0:02X})")]
    ReservedBitSet(u8),
}

/// Structural problems of an in-memory packet (stale length or checksum, unencodable fields).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PacketError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("stored length field {stored} disagrees with payload (expected {expected})")]
    StaleLength { stored: u16, expected: u16 },
    #[error("stored checksum 0x{stored:02X} disagrees with contents (expected 0x{expected:02X})")]
    StaleChecksum { stored: u8, expected: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpacePacket {
    pub primary: PrimaryHeader,
    pub secondary: SecondaryHeader,
    pub payload: Vec<u8>,
}

fn xor_fold(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |acc, b| acc ^ b)
}

fn length_field_for(secondary_len: usize, payload_len: usize) -> u16 {
    (PRIMARY_HEADER_LEN + secondary_len + payload_len).saturating_sub(7) as u16
}

impl SpacePacket {
    /// Builds a telemetry packet with a consistent length field.
    pub fn telemetry(mid: MessageId, sequence_count: u16, time: TelemetrySecondaryHeader, payload: Vec<u8>) -> Self {
        Self {
            primary: PrimaryHeader {
                mid,
                sequence_count,
                length_field: length_field_for(TLM_SECONDARY_HEADER_LEN, payload.len()),
            },
            secondary: SecondaryHeader::Telemetry(time),
            payload,
        }
    }

    /// Builds a command packet with a consistent length field and checksum.
    pub fn command(mid: MessageId, sequence_count: u16, function_code: u8, payload: Vec<u8>) -> Self {
        let mut packet = Self {
            primary: PrimaryHeader {
                mid,
                sequence_count,
                length_field: length_field_for(CMD_SECONDARY_HEADER_LEN, payload.len()),
            },
            secondary: SecondaryHeader::Command(CommandSecondaryHeader {
                function_code,
                checksum: 0,
            }),
            payload,
        };
        let checksum = packet.computed_checksum();
        if let SecondaryHeader::Command(cmd) = &mut packet.secondary {
            cmd.checksum = checksum;
        }
        packet
    }

    pub fn mid(&self) -> MessageId {
        self.primary.mid
    }

    pub fn sequence_count(&self) -> u16 {
        self.primary.sequence_count
    }

    pub fn timestamp(&self) -> Option<TelemetrySecondaryHeader> {
        match self.secondary {
            SecondaryHeader::Telemetry(t) => Some(t),
            SecondaryHeader::Command(_) => None,
        }
    }

    pub fn function_code(&self) -> Option<u8> {
        match self.secondary {
            SecondaryHeader::Command(c) => Some(c.function_code),
            SecondaryHeader::Telemetry(_) => None,
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(self.secondary, SecondaryHeader::Command(_))
    }

    fn expected_length_field(&self) -> u16 {
        length_field_for(self.secondary.len(), self.payload.len())
    }

    /// XOR fold of the encoded packet with the checksum byte zeroed. Zero for telemetry.
    pub fn computed_checksum(&self) -> u8 {
        let SecondaryHeader::Command(cmd) = self.secondary else {
            return 0;
        };
        let header = PrimaryHeader {
            length_field: self.expected_length_field(),
            ..self.primary
        };
        xor_fold(&header.to_bytes()) ^ cmd.function_code ^ xor_fold(&self.payload)
    }

    /// True when a command packet's stored checksum matches its contents.
    pub fn checksum_ok(&self) -> bool {
        match self.secondary {
            SecondaryHeader::Command(cmd) => cmd.checksum == self.computed_checksum(),
            SecondaryHeader::Telemetry(_) => true,
        }
    }

    fn check_encodable(&self) -> Result<(), EncodeError> {
        if self.payload.len() > MAX_PAYLOAD_LEN {
            return Err(EncodeError::PayloadTooLarge(self.payload.len()));
        }
        if self.primary.sequence_count > MAX_SEQUENCE_COUNT {
            return Err(EncodeError::SequenceOutOfRange(self.primary.sequence_count));
        }
        match self.secondary {
            SecondaryHeader::Command(cmd) => {
                if !self.primary.mid.is_command() {
                    return Err(EncodeError::SecondaryHeaderMismatch(self.primary.mid));
                }
                if cmd.function_code > MAX_FUNCTION_CODE {
                    return Err(EncodeError::FunctionCodeOutOfRange(cmd.function_code));
                }
            }
            SecondaryHeader::Telemetry(_) => {
                if self.primary.mid.is_command() {
                    return Err(EncodeError::SecondaryHeaderMismatch(self.primary.mid));
                }
            }
        }
        Ok(())
    }

    /// Checks that the stored length field and checksum agree with the contents. This is the
    /// software bus's admission test.
    pub fn validate(&self) -> Result<(), PacketError> {
        self.check_encodable()?;
        let expected = self.expected_length_field();
        if self.primary.length_field != expected {
            return Err(PacketError::StaleLength {
                stored: self.primary.length_field,
                expected,
            });
        }
        if let SecondaryHeader::Command(cmd) = self.secondary {
            let expected = self.computed_checksum();
            if cmd.checksum != expected {
                return Err(PacketError::StaleChecksum {
                    stored: cmd.checksum,
                    expected,
                });
            }
        }
        Ok(())
    }

    /// Encodes to big-endian bytes. The length field and command checksum are recomputed
    /// from the contents rather than copied from the struct.
    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        self.check_encodable()?;
        let header = PrimaryHeader {
            length_field: self.expected_length_field(),
            ..self.primary
        };
        let mut out = Vec::with_capacity(header.packet_len());
        out.extend_from_slice(&header.to_bytes());
        match self.secondary {
            SecondaryHeader::Telemetry(t) => {
                out.extend_from_slice(&t.seconds.to_be_bytes());
                out.extend_from_slice(&t.subseconds.to_be_bytes());
            }
            SecondaryHeader::Command(cmd) => {
                out.push(cmd.function_code);
                out.push(self.computed_checksum());
            }
        }
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Decodes exactly one packet; `bytes` must hold the whole packet and nothing else.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let primary = PrimaryHeader::from_bytes(bytes)?;
        let declared = primary.packet_len();
        if declared != bytes.len() {
            return Err(DecodeError::LengthMismatch {
                declared,
                actual: bytes.len(),
            });
        }
        let body = &bytes[PRIMARY_HEADER_LEN..];
        if primary.mid.is_command() {
            if body.len() < CMD_SECONDARY_HEADER_LEN {
                return Err(DecodeError::Truncated {
                    needed: PRIMARY_HEADER_LEN + CMD_SECONDARY_HEADER_LEN,
                    found: bytes.len(),
                });
            }
            let function_code = body[0];
            if function_code > MAX_FUNCTION_CODE {
                return Err(DecodeError::ReservedBitSet(function_code));
            }
            let stored = body[1];
            let computed = xor_fold(bytes) ^ stored;
            if stored != computed {
                return Err(DecodeError::BadChecksum { stored, computed });
            }
            Ok(Self {
                primary,
                secondary: SecondaryHeader::Command(CommandSecondaryHeader {
                    function_code,
                    checksum: stored,
                }),
                payload: body[CMD_SECONDARY_HEADER_LEN..].to_vec(),
            })
        } else {
            if body.len() < TLM_SECONDARY_HEADER_LEN {
                return Err(DecodeError::Truncated {
                    needed: PRIMARY_HEADER_LEN + TLM_SECONDARY_HEADER_LEN,
                    found: bytes.len(),
                });
            }
            let time = TelemetrySecondaryHeader {
                seconds: u32::from_be_bytes([body[0], body[1], body[2], body[3]]),
                subseconds: u16::from_be_bytes([body[4], body[5]]),
            };
            Ok(Self {
                primary,
                secondary: SecondaryHeader::Telemetry(time),
                payload: body[TLM_SECONDARY_HEADER_LEN..].to_vec(),
            })
        }
    }
}
