//! Ground station: schema-driven telemetry parsing, command construction, displays and logs.
//!
//! Everything here is attributed by MID. The archive stores the exact bytes received and the
//! command log can only ever contain what an operator sent from this station.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::downlink::FrameDecoder;
use crate::interface::{safe_mode, star_tracker};
use crate::spacepacket::{EncodeError, MessageId, SpacePacket, MAX_FUNCTION_CODE, MAX_SEQUENCE_COUNT};

/// The only origin a command log record can carry.
pub const GROUND_ORIGIN: &str = "GROUND";
/// Tag marking the attitude fields that forensic comparisons may mask.
pub const QUATERNION_TAG: &str = "quaternion";
pub const HEX_BYTES_PER_LINE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FieldType {
    U8,
    U16,
    U32,
    F64,
}

impl FieldType {
    pub fn size(self) -> usize {
        match self {
            FieldType::U8 => 1,
            FieldType::U16 => 2,
            FieldType::U32 => 4,
            FieldType::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> Value {
        match self {
            FieldType::U8 => Value::from(b[0]),
            FieldType::U16 => Value::from(u16::from_be_bytes([b[0], b[1]])),
            FieldType::U32 => Value::from(u32::from_be_bytes(b[..4].try_into().unwrap())),
            FieldType::F64 => Value::from(f64::from_be_bytes(b[..8].try_into().unwrap())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub name: String,
    pub offset: usize,
    #[serde(rename = "type")]
    pub ty: FieldType,
    #[serde(default)]
    pub units: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetrySchema {
    pub mid: MessageId,
    pub name: String,
    pub device: String,
    #[serde(default)]
    pub housekeeping: bool,
    pub payload_len: usize,
    pub fields: Vec<FieldDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandDef {
    pub name: String,
    pub mid: MessageId,
    pub function_code: u8,
    #[serde(default)]
    pub arg_len: usize,
}

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("ground database is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading ground database: {0}")]
    Io(#[from] std::io::Error),
    #[error("{schema}: fields {a} and {b} overlap")]
    Overlap { schema: String, a: String, b: String },
    #[error("{schema}: field {field} extends past payload length {payload_len}")]
    OutOfRange {
        schema: String,
        field: String,
        payload_len: usize,
    },
    #[error("{0} defined twice")]
    Duplicate(String),
    #[error("{name}: {mid} has the wrong packet type")]
    WrongType { name: String, mid: MessageId },
    #[error("{name}: function code {code} out of range")]
    BadFunctionCode { name: String, code: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundDatabase {
    pub telemetry: Vec<TelemetrySchema>,
    pub commands: Vec<CommandDef>,
}

impl GroundDatabase {
    /// Definitions generated from the flight interface file.
    pub fn builtin() -> Self {
        use star_tracker::*;
        let q = |name: &str, offset| FieldDef {
            name: name.into(),
            offset,
            ty: FieldType::F64,
            units: String::new(),
            tags: vec![QUATERNION_TAG.into()],
        };
        let plain = |name: &str, offset, ty, units: &str| FieldDef {
            name: name.into(),
            offset,
            ty,
            units: units.into(),
            tags: Vec::new(),
        };
        let cmd = |name: &str, fc: FunctionCode| CommandDef {
            name: name.into(),
            mid: CMD_MID,
            function_code: fc as u8,
            arg_len: 0,
        };
        Self {
            telemetry: vec![
                TelemetrySchema {
                    mid: HK_TLM_MID,
                    name: "STAR_TRACKER_HK".into(),
                    device: "STAR TRACKER".into(),
                    housekeeping: true,
                    payload_len: HK_PAYLOAD_LEN,
                    fields: vec![
                        plain("CMD_COUNT", 0, FieldType::U32, "count"),
                        plain("CMD_ERROR_COUNT", 4, FieldType::U32, "count"),
                        plain("ENABLED", 8, FieldType::U8, "bool"),
                    ],
                },
                TelemetrySchema {
                    mid: DATA_TLM_MID,
                    name: "STAR_TRACKER_DATA".into(),
                    device: "STAR TRACKER".into(),
                    housekeeping: false,
                    payload_len: DATA_PAYLOAD_LEN,
                    fields: vec![
                        q("Q_X", 0),
                        q("Q_Y", 8),
                        q("Q_Z", 16),
                        q("Q_W", 24),
                        plain("STATUS_WORD", 32, FieldType::U32, "bits"),
                    ],
                },
                TelemetrySchema {
                    mid: safe_mode::EVENT_TLM_MID,
                    name: "CSM_EVENT".into(),
                    device: "CYBER SAFE MODE".into(),
                    housekeeping: false,
                    payload_len: safe_mode::EVENT_PAYLOAD_LEN,
                    fields: vec![
                        plain("RULE", 0, FieldType::U8, "code"),
                        plain("TRIGGER_TICK", 1, FieldType::U32, "tick"),
                        plain("ENGAGED", 5, FieldType::U8, "bool"),
                    ],
                },
            ],
            commands: vec![
                cmd("ST_NOOP", FunctionCode::Noop),
                cmd("ST_RESET_COUNTERS", FunctionCode::ResetCounters),
                cmd("ST_ENABLE", FunctionCode::Enable),
                cmd("ST_DISABLE", FunctionCode::Disable),
                cmd("ST_REQ_HK", FunctionCode::ReqHk),
                cmd("ST_REQ_DATA", FunctionCode::ReqData),
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DatabaseError> {
        let db: Self = serde_json::from_str(text)?;
        db.validate()?;
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, DatabaseError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), DatabaseError> {
        let mut mids = std::collections::BTreeSet::new();
        for s in &self.telemetry {
            if !mids.insert(s.mid) {
                return Err(DatabaseError::Duplicate(s.mid.to_string()));
            }
            if !s.mid.is_telemetry() {
                return Err(DatabaseError::WrongType {
                    name: s.name.clone(),
                    mid: s.mid,
                });
            }
            let mut extents: Vec<(usize, usize, &str)> = Vec::new();
            for f in &s.fields {
                let end = f.offset + f.ty.size();
                if end > s.payload_len {
                    return Err(DatabaseError::OutOfRange {
                        schema: s.name.clone(),
                        field: f.name.clone(),
                        payload_len: s.payload_len,
                    });
                }
                if let Some((_, _, other)) = extents.iter().find(|(a, b, _)| f.offset < *b && *a < end) {
                    return Err(DatabaseError::Overlap {
                        schema: s.name.clone(),
                        a: (*other).to_string(),
                        b: f.name.clone(),
                    });
                }
                extents.push((f.offset, end, &f.name));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.commands {
            if !names.insert(c.name.as_str()) {
                return Err(DatabaseError::Duplicate(c.name.clone()));
            }
            if !c.mid.is_command() {
                return Err(DatabaseError::WrongType {
                    name: c.name.clone(),
                    mid: c.mid,
                });
            }
            if c.function_code > MAX_FUNCTION_CODE {
                return Err(DatabaseError::BadFunctionCode {
                    name: c.name.clone(),
                    code: c.function_code,
                });
            }
        }
        Ok(())
    }

    pub fn schema(&self, mid: MessageId) -> Option<&TelemetrySchema> {
        self.telemetry.iter().find(|s| s.mid == mid)
    }

    pub fn command(&self, name: &str) -> Option<&CommandDef> {
        self.commands.iter().find(|c| c.name == name)
    }

    pub fn command_by_code(&self, mid: MessageId, function_code: u8) -> Option<&CommandDef> {
        self.commands
            .iter()
            .find(|c| c.mid == mid && c.function_code == function_code)
    }

    /// Field names carrying `tag`, across all schemas.
    pub fn tagged_fields(&self, tag: &str) -> Vec<String> {
        self.telemetry
            .iter()
            .flat_map(|s| &s.fields)
            .filter(|f| f.tags.iter().any(|t| t == tag))
            .map(|f| f.name.clone())
            .collect()
    }
}

/// One archived packet as the operator sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub row: usize,
    pub tick: u64,
    pub mid: MessageId,
    pub name: String,
    pub device: String,
    pub seq: u16,
    pub seconds: u32,
    pub subseconds: u16,
    /// Byte range in the archive.
    pub offset: usize,
    pub len: usize,
    pub fields: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandLogRecord {
    pub tick: u64,
    pub mid: MessageId,
    pub function_code: u8,
    pub name: String,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HkSnapshot {
    pub tick: u64,
    pub mid: MessageId,
    pub name: String,
    pub fields: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatViolation {
    pub tick: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Archived(IndexRow),
    Unmapped(MessageId),
    Violation(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
    #[error("no command defined for {mid} function code {function_code}")]
    UnknownCommandCode { mid: MessageId, function_code: u8 },
    #[error("{name} takes {expected} argument bytes, got {found}")]
    BadArgs {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("archive row {row} out of range ({len} rows)")]
    RowOutOfRange { row: usize, len: usize },
    #[error("building command: {0}")]
    Encode(#[from] EncodeError),
    #[error("bad hex dump line {line}: {reason}")]
    HexDump { line: usize, reason: String },
}

/// An encoded command not yet logged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedCommand {
    pub bytes: Vec<u8>,
    pub record: CommandLogRecord,
}

#[derive(Debug, Clone)]
pub struct GroundStation {
    db: GroundDatabase,
    decoder: FrameDecoder,
    archive: Vec<u8>,
    index: Vec<IndexRow>,
    cmdlog: Vec<CommandLogRecord>,
    hk: BTreeMap<MessageId, HkSnapshot>,
    hk_touched: Vec<MessageId>,
    hk_history: Vec<HkSnapshot>,
    violations: Vec<FormatViolation>,
    unmapped: u64,
    cmd_seq: BTreeMap<MessageId, u16>,
}

impl GroundStation {
    pub fn new(db: GroundDatabase) -> Self {
        Self {
            db,
            decoder: FrameDecoder::new(),
            archive: Vec::new(),
            index: Vec::new(),
            cmdlog: Vec::new(),
            hk: BTreeMap::new(),
            hk_touched: Vec::new(),
            hk_history: Vec::new(),
            violations: Vec::new(),
            unmapped: 0,
            cmd_seq: BTreeMap::new(),
        }
    }

    pub fn database(&self) -> &GroundDatabase {
        &self.db
    }

    /// Feeds raw link bytes; parses every complete frame.
    pub fn ingest_stream(&mut self, tick: u64, bytes: &[u8]) -> Vec<ParseOutcome> {
        self.decoder.push(bytes);
        let mut out = Vec::new();
        while let Some(frame) = self.decoder.next_frame() {
            out.push(match frame {
                Ok(body) => self.parse_telemetry(tick, &body),
                Err(e) => self.violation(tick, e.to_string()),
            });
        }
        out
    }

    fn violation(&mut self, tick: u64, error: String) -> ParseOutcome {
        self.violations.push(FormatViolation {
            tick,
            error: error.clone(),
        });
        ParseOutcome::Violation(error)
    }

    /// Parses one frame body against the database and archives it.
    pub fn parse_telemetry(&mut self, tick: u64, body: &[u8]) -> ParseOutcome {
        let packet = match SpacePacket::decode(body) {
            Ok(p) => p,
            Err(e) => return self.violation(tick, e.to_string()),
        };
        let Some(schema) = self.db.schema(packet.mid()) else {
            self.unmapped += 1;
            return ParseOutcome::Unmapped(packet.mid());
        };
        let Some(time) = packet.timestamp() else {
            return self.violation(tick, format!("{} arrived without a telemetry header", packet.mid()));
        };
        if packet.payload.len() != schema.payload_len {
            let msg = format!(
                "{}: payload is {} bytes, schema says {}",
                schema.name,
                packet.payload.len(),
                schema.payload_len
            );
            return self.violation(tick, msg);
        }
        let fields: BTreeMap<String, Value> = schema
            .fields
            .iter()
            .map(|f| (f.name.clone(), f.ty.read(&packet.payload[f.offset..])))
            .collect();
        let row = IndexRow {
            row: self.index.len(),
            tick,
            mid: packet.mid(),
            name: schema.name.clone(),
            device: schema.device.clone(),
            seq: packet.sequence_count(),
            seconds: time.seconds,
            subseconds: time.subseconds,
            offset: self.archive.len(),
            len: body.len(),
            fields,
        };
        if schema.housekeeping {
            self.hk.insert(
                row.mid,
                HkSnapshot {
                    tick,
                    mid: row.mid,
                    name: row.name.clone(),
                    fields: row.fields.clone(),
                },
            );
            if !self.hk_touched.contains(&row.mid) {
                self.hk_touched.push(row.mid);
            }
        }
        self.archive.extend_from_slice(body);
        self.index.push(row.clone());
        ParseOutcome::Archived(row)
    }

    /// Closes a display cycle: HK values that changed this tick are appended to the history.
    pub fn end_tick(&mut self) {
        for mid in std::mem::take(&mut self.hk_touched) {
            if let Some(s) = self.hk.get(&mid) {
                self.hk_history.push(s.clone());
            }
        }
    }

    /// Builds, logs and returns the encoded command packet for the uplink.
    pub fn send_command(
        &mut self,
        tick: u64,
        mid: MessageId,
        function_code: u8,
        args: &[u8],
    ) -> Result<Vec<u8>, GroundError> {
        let p = self.prepare_command(tick, mid, function_code, args)?;
        Ok(self.commit(p))
    }

    pub fn send_named(&mut self, tick: u64, name: &str, args: &[u8]) -> Result<Vec<u8>, GroundError> {
        let p = self.prepare_named(tick, name, args)?;
        Ok(self.commit(p))
    }

    /// Builds a command without logging it or consuming a sequence count.
    pub fn prepare_command(
        &self,
        tick: u64,
        mid: MessageId,
        function_code: u8,
        args: &[u8],
    ) -> Result<PreparedCommand, GroundError> {
        let def = self
            .db
            .command_by_code(mid, function_code)
            .ok_or(GroundError::UnknownCommandCode { mid, function_code })?;
        self.build(tick, def, args)
    }

    pub fn prepare_named(&self, tick: u64, name: &str, args: &[u8]) -> Result<PreparedCommand, GroundError> {
        let def = self
            .db
            .command(name)
            .ok_or_else(|| GroundError::UnknownCommand(name.to_string()))?;
        self.build(tick, def, args)
    }

    fn build(&self, tick: u64, def: &CommandDef, args: &[u8]) -> Result<PreparedCommand, GroundError> {
        if args.len() != def.arg_len {
            return Err(GroundError::BadArgs {
                name: def.name.clone(),
                expected: def.arg_len,
                found: args.len(),
            });
        }
        let seq = self.cmd_seq.get(&def.mid).copied().unwrap_or(0);
        let bytes = SpacePacket::command(def.mid, seq, def.function_code, args.to_vec()).encode()?;
        Ok(PreparedCommand {
            bytes,
            record: CommandLogRecord {
                tick,
                mid: def.mid,
                function_code: def.function_code,
                name: def.name.clone(),
                origin: GROUND_ORIGIN.to_string(),
            },
        })
    }

    /// Logs a prepared command and returns its bytes. Commands must be committed in the
    /// order they were prepared.
    pub fn commit(&mut self, p: PreparedCommand) -> Vec<u8> {
        let seq = self.cmd_seq.entry(p.record.mid).or_insert(0);
        *seq = (*seq + 1) & MAX_SEQUENCE_COUNT;
        self.cmdlog.push(p.record);
        p.bytes
    }

    /// Latest housekeeping per MID, last writer wins.
    pub fn hk_view(&self) -> &BTreeMap<MessageId, HkSnapshot> {
        &self.hk
    }

    pub fn raw_bytes(&self, row: usize) -> Result<&[u8], GroundError> {
        let r = self.index.get(row).ok_or(GroundError::RowOutOfRange {
            row,
            len: self.index.len(),
        })?;
        Ok(&self.archive[r.offset..r.offset + r.len])
    }

    pub fn raw_bytes_view(&self, row: usize) -> Result<String, GroundError> {
        Ok(hex_dump(self.raw_bytes(row)?))
    }

    pub fn archive(&self) -> &[u8] {
        &self.archive
    }

    pub fn index(&self) -> &[IndexRow] {
        &self.index
    }

    pub fn cmdlog(&self) -> &[CommandLogRecord] {
        &self.cmdlog
    }

    pub fn hk_history(&self) -> &[HkSnapshot] {
        &self.hk_history
    }

    pub fn violations(&self) -> &[FormatViolation] {
        &self.violations
    }

    pub fn unmapped(&self) -> u64 {
        self.unmapped
    }

    /// Re-encodes every archived packet; true when that reproduces the archive bytes.
    pub fn archive_is_lossless(&self) -> bool {
        archive_lossless(&self.archive, &self.index)
    }
}

/// True when the index rows tile `archive` and every stored packet re-encodes to its own bytes.
pub fn archive_lossless(archive: &[u8], index: &[IndexRow]) -> bool {
    let mut offset = 0;
    for r in index {
        if r.offset != offset || r.offset + r.len > archive.len() {
            return false;
        }
        let bytes = &archive[r.offset..r.offset + r.len];
        let re = SpacePacket::decode(bytes).ok().and_then(|p| p.encode().ok());
        if re.as_deref() != Some(bytes) {
            return false;
        }
        offset += r.len;
    }
    offset == archive.len()
}

/// `offset: xx xx ...`, sixteen bytes per line.
pub fn hex_dump(bytes: &[u8]) -> String {
    bytes
        .chunks(HEX_BYTES_PER_LINE)
        .enumerate()
        .map(|(i, chunk)| {
            let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
            format!("{:04x}: {}\n", i * HEX_BYTES_PER_LINE, hex.join(" "))
        })
        .collect()
}

pub fn parse_hex_dump(text: &str) -> Result<Vec<u8>, GroundError> {
    let mut out = Vec::new();
    for (line, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |reason: &str| GroundError::HexDump {
            line,
            reason: reason.to_string(),
        };
        let (_, hex) = l.split_once(':').ok_or_else(|| bad("missing offset"))?;
        for tok in hex.split_whitespace() {
            out.push(u8::from_str_radix(tok, 16).map_err(|_| bad(tok))?);
        }
    }
    Ok(out)
}

pub(crate) fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub(crate) fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::Quaternion;
    use crate::downlink::frame;
    use crate::interface::star_tracker::{DataTlm, HkTlm, CMD_MID, DATA_TLM_MID, HK_TLM_MID};
    use crate::spacepacket::TelemetrySecondaryHeader;

    fn station() -> GroundStation {
        GroundStation::new(GroundDatabase::builtin())
    }

    fn data(seq: u16, tick: u64) -> SpacePacket {
        DataTlm {
            q: Quaternion::new(0.0, 0.0, 0.6, 0.8),
            status_word: 1,
        }
        .to_packet(seq, TelemetrySecondaryHeader::from_millis(tick * 100))
    }

    #[test]
    fn builtin_database_is_valid() {
        GroundDatabase::builtin().validate().unwrap();
    }

    #[test]
    fn overlapping_fields_rejected() {
        let mut db = GroundDatabase::builtin();
        db.telemetry[0].fields[1].offset = 2;
        assert!(matches!(db.validate(), Err(DatabaseError::Overlap { .. })));
        let mut db = GroundDatabase::builtin();
        db.telemetry[0].fields[2].offset = 9;
        assert!(matches!(db.validate(), Err(DatabaseError::OutOfRange { .. })));
    }

    #[test]
    fn data_packet_parsed_by_mid() {
        let mut gs = station();
        let out = gs.ingest_stream(10, &frame(&data(0, 10).encode().unwrap()));
        let ParseOutcome::Archived(row) = &out[0] else {
            panic!("{out:?}")
        };
        assert_eq!(row.name, "STAR_TRACKER_DATA");
        assert_eq!(row.device, "STAR TRACKER");
        assert_eq!(row.fields["Q_Z"], Value::from(0.6));
        assert_eq!((row.seconds, row.subseconds), (1, 0));
    }

    #[test]
    fn truncated_frame_is_a_violation_and_not_archived() {
        let mut gs = station();
        let body = data(0, 0).encode().unwrap();
        let out = gs.ingest_stream(0, &frame(&body[..20]));
        assert!(matches!(out[0], ParseOutcome::Violation(_)));
        assert!(gs.archive().is_empty() && gs.index().is_empty());
        assert_eq!(gs.violations().len(), 1);
    }

    #[test]
    fn unknown_mid_only_counts() {
        let mut gs = station();
        let p = SpacePacket::telemetry(
            MessageId::telemetry(0x7FF),
            0,
            TelemetrySecondaryHeader::default(),
            vec![],
        );
        gs.ingest_stream(0, &frame(&p.encode().unwrap()));
        assert_eq!(gs.unmapped(), 1);
        assert!(gs.violations().is_empty());
    }

    #[test]
    fn hk_view_last_writer_wins_and_history_per_tick() {
        let mut gs = station();
        assert!(gs.hk_view().is_empty());
        let hk = |c| {
            HkTlm {
                cmd_count: c,
                cmd_error_count: 0,
                enabled: 1,
            }
            .to_packet(0, TelemetrySecondaryHeader::default())
        };
        gs.ingest_stream(
            5,
            &[frame(&hk(1).encode().unwrap()), frame(&hk(2).encode().unwrap())].concat(),
        );
        gs.end_tick();
        gs.end_tick();
        assert_eq!(gs.hk_view()[&HK_TLM_MID].fields["CMD_COUNT"], Value::from(2));
        assert_eq!(gs.hk_history().len(), 1);
    }

    #[test]
    fn commands_logged_with_ground_origin() {
        let mut gs = station();
        let bytes = gs.send_named(400, "ST_ENABLE", &[]).unwrap();
        let p = SpacePacket::decode(&bytes).unwrap();
        assert_eq!((p.mid(), p.function_code()), (CMD_MID, Some(2)));
        assert_eq!(gs.cmdlog().len(), 1);
        assert_eq!(gs.cmdlog()[0].origin, GROUND_ORIGIN);
        assert_eq!(
            gs.send_named(0, "ST_SELF_DESTRUCT", &[]),
            Err(GroundError::UnknownCommand("ST_SELF_DESTRUCT".into()))
        );
        assert!(matches!(
            gs.send_named(0, "ST_NOOP", &[1]),
            Err(GroundError::BadArgs { .. })
        ));
        assert!(matches!(
            gs.send_command(0, CMD_MID, 99, &[]),
            Err(GroundError::UnknownCommandCode { .. })
        ));
        assert_eq!(gs.cmdlog().len(), 1);
        let second = SpacePacket::decode(&gs.send_command(401, CMD_MID, 0, &[]).unwrap()).unwrap();
        assert_eq!(second.sequence_count(), 1);
    }

    #[test]
    fn raw_view_roundtrips() {
        let mut gs = station();
        assert_eq!(gs.raw_bytes_view(0), Err(GroundError::RowOutOfRange { row: 0, len: 0 }));
        let body = data(7, 3).encode().unwrap();
        gs.ingest_stream(3, &frame(&body));
        let dump = gs.raw_bytes_view(0).unwrap();
        assert_eq!(dump.lines().count(), body.len().div_ceil(16));
        assert!(dump.starts_with("0000: 08 d1 c0 07"));
        let bytes = parse_hex_dump(&dump).unwrap();
        assert_eq!(bytes, body);
        let mut again = station();
        let ParseOutcome::Archived(row) = again.parse_telemetry(3, &bytes) else {
            panic!()
        };
        assert_eq!(row, gs.index()[0]);
    }

    #[test]
    fn archive_lossless() {
        let mut gs = station();
        for k in 0..5 {
            gs.ingest_stream(k * 10, &frame(&data(k as u16, k * 10).encode().unwrap()));
        }
        assert!(gs.archive_is_lossless());
        assert_eq!(gs.index().iter().map(|r| r.len).sum::<usize>(), gs.archive().len());
        assert_eq!(gs.index().iter().filter(|r| r.mid == DATA_TLM_MID).count(), 5);
    }

    #[test]
    fn tagged_fields() {
        assert_eq!(
            GroundDatabase::builtin().tagged_fields(QUATERNION_TAG),
            ["Q_X", "Q_Y", "Q_Z", "Q_W"]
        );
    }
}
