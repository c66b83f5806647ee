//! Radio application and the ground link framing.
//!
//! Frames are a big-endian `u32` byte count followed by one encoded packet. The radio forwards
//! whatever arrives on its filter MIDs without looking inside, and turns uplinked frames back
//! into bus publications.

use std::collections::{BTreeSet, VecDeque};
use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::thread::{self, JoinHandle};

use thiserror::Error;

use crate::spacepacket::{DecodeError, MessageId, SpacePacket, PRIMARY_HEADER_LEN};

pub const DEFAULT_LINK_PORT: u16 = 52100;
pub const FRAME_HEADER_LEN: usize = 4;
/// Largest body a well-formed packet can have: header plus a 65535-length field plus one.
pub const MAX_FRAME_BODY: usize = PRIMARY_HEADER_LEN + u16::MAX as usize + 1;
pub const DEFAULT_QUEUE_DEPTH: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame declares {0} bytes, above the {MAX_FRAME_BODY}-byte limit")]
    TooLarge(usize),
}

/// Length-prefixed frame around `body`.
pub fn frame(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
    out
}

/// Incremental frame splitter for a byte stream.
#[derive(Debug, Default, Clone)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet part of a complete frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn next_frame(&mut self) -> Option<Result<Vec<u8>, FrameError>> {
        if self.buf.len() < FRAME_HEADER_LEN {
            return None;
        }
        let len = u32::from_be_bytes(self.buf[..FRAME_HEADER_LEN].try_into().unwrap()) as usize;
        if len > MAX_FRAME_BODY {
            // the stream is unrecoverable past this point
            self.buf.clear();
            return Some(Err(FrameError::TooLarge(len)));
        }
        if self.buf.len() < FRAME_HEADER_LEN + len {
            return None;
        }
        let body = self.buf[FRAME_HEADER_LEN..FRAME_HEADER_LEN + len].to_vec();
        self.buf.drain(..FRAME_HEADER_LEN + len);
        Some(Ok(body))
    }
}

/// Splits a complete byte stream into frame bodies.
pub fn split_frames(stream: &[u8]) -> Result<Vec<Vec<u8>>, FrameError> {
    let mut dec = FrameDecoder::new();
    dec.push(stream);
    let mut out = Vec::new();
    while let Some(f) = dec.next_frame() {
        out.push(f?);
    }
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UplinkError {
    #[error("uplink frame does not decode: {0}")]
    Decode(#[from] DecodeError),
    #[error("uplink frame carries telemetry MID {0}")]
    NotACommand(MessageId),
}

#[derive(Debug, Clone)]
pub struct RadioApp {
    filter: BTreeSet<MessageId>,
    link_up: bool,
    outbox: Vec<u8>,
    pending: VecDeque<Vec<u8>>,
    queue_depth: usize,
    forwarded: u64,
    dropped: u64,
    uplink_rejects: u64,
}

impl RadioApp {
    pub fn new(filter: impl IntoIterator<Item = MessageId>, queue_depth: usize) -> Self {
        Self {
            filter: filter.into_iter().collect(),
            link_up: true,
            outbox: Vec::new(),
            pending: VecDeque::new(),
            queue_depth,
            forwarded: 0,
            dropped: 0,
            uplink_rejects: 0,
        }
    }

    pub fn filter(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.filter.iter().copied()
    }

    /// Frames the packet onto the link if its MID is in the filter table. Returns whether the
    /// packet was accepted (sent or buffered).
    pub fn forward_telemetry(&mut self, packet: &SpacePacket) -> bool {
        if !self.filter.contains(&packet.mid()) {
            return false;
        }
        let Ok(body) = packet.encode() else {
            return false;
        };
        let f = frame(&body);
        if self.link_up {
            self.outbox.extend_from_slice(&f);
            self.forwarded += 1;
            true
        } else if self.pending.len() < self.queue_depth {
            self.pending.push_back(f);
            true
        } else {
            self.dropped += 1;
            false
        }
    }

    pub fn set_link_up(&mut self, up: bool) {
        self.link_up = up;
        if up {
            while let Some(f) = self.pending.pop_front() {
                self.outbox.extend_from_slice(&f);
                self.forwarded += 1;
            }
        }
    }

    pub fn link_up(&self) -> bool {
        self.link_up
    }

    /// Drains the bytes emitted since the last call.
    pub fn take_outbox(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.outbox)
    }

    /// Parses an uplinked frame body into the command to publish with the ground route tag.
    pub fn uplink_command(&mut self, body: &[u8]) -> Result<SpacePacket, UplinkError> {
        let result = SpacePacket::decode(body).map_err(UplinkError::from).and_then(|p| {
            if p.is_command() {
                Ok(p)
            } else {
                Err(UplinkError::NotACommand(p.mid()))
            }
        });
        if result.is_err() {
            self.uplink_rejects += 1;
        }
        result
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn uplink_rejects(&self) -> u64 {
        self.uplink_rejects
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("link queue full")]
    Full,
    #[error("link closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One end of a framed TCP connection. A writer thread drains a bounded queue so the
/// simulation loop never blocks on the socket; a reader thread yields received frame bodies.
pub struct TcpLink {
    tx: SyncSender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    writer: Option<JoinHandle<()>>,
    reader: Option<JoinHandle<()>>,
}

impl TcpLink {
    pub fn from_stream(stream: TcpStream, depth: usize) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let mut read_half = stream.try_clone()?;
        let mut write_half = stream;
        let (tx, wrx) = mpsc::sync_channel::<Vec<u8>>(depth.max(1));
        let (rtx, rx) = mpsc::channel();

        let writer = thread::spawn(move || {
            for body in wrx {
                if write_half.write_all(&frame(&body)).is_err() {
                    break;
                }
            }
            let _ = write_half.shutdown(std::net::Shutdown::Write);
        });
        let reader = thread::spawn(move || {
            let mut dec = FrameDecoder::new();
            let mut chunk = [0u8; 4096];
            loop {
                match read_half.read(&mut chunk) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => dec.push(&chunk[..n]),
                }
                while let Some(Ok(body)) = dec.next_frame() {
                    if rtx.send(body).is_err() {
                        return;
                    }
                }
            }
        });
        Ok(Self {
            tx,
            rx,
            writer: Some(writer),
            reader: Some(reader),
        })
    }

    pub fn connect(addr: impl std::net::ToSocketAddrs, depth: usize) -> io::Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?, depth)
    }

    /// Queues one frame body; never blocks.
    pub fn send(&self, body: Vec<u8>) -> Result<(), LinkError> {
        self.tx.try_send(body).map_err(|e| match e {
            TrySendError::Full(_) => LinkError::Full,
            TrySendError::Disconnected(_) => LinkError::Closed,
        })
    }

    /// A cloneable handle for queuing frames from another thread.
    pub fn sender(&self) -> SyncSender<Vec<u8>> {
        self.tx.clone()
    }

    pub fn try_recv(&self) -> Option<Vec<u8>> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: std::time::Duration) -> Option<Vec<u8>> {
        self.rx.recv_timeout(timeout).ok()
    }

    /// Flushes queued frames and waits for the writer to finish.
    pub fn close(mut self) {
        let (dead, _) = mpsc::sync_channel(1);
        drop(std::mem::replace(&mut self.tx, dead));
        if let Some(w) = self.writer.take() {
            let _ = w.join();
        }
        // the reader ends when the peer closes; don't wait on it
        drop(self.reader.take());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::star_tracker::{CMD_MID, DATA_TLM_MID, HK_TLM_MID};
    use crate::spacepacket::TelemetrySecondaryHeader;
    use std::net::TcpListener;
    use std::time::Duration;

    fn tlm(mid: MessageId, payload: Vec<u8>) -> SpacePacket {
        SpacePacket::telemetry(mid, 3, TelemetrySecondaryHeader::from_millis(1500), payload)
    }

    #[test]
    fn frame_is_length_prefix_plus_packet() {
        let mut radio = RadioApp::new([DATA_TLM_MID], 4);
        let p = tlm(DATA_TLM_MID, vec![1, 2, 3]);
        assert!(radio.forward_telemetry(&p));
        let out = radio.take_outbox();
        let body = p.encode().unwrap();
        assert_eq!(&out[..4], &(body.len() as u32).to_be_bytes());
        assert_eq!(&out[4..], &body[..]);
        assert_eq!(SpacePacket::decode(&out[4..]).unwrap(), p);
    }

    #[test]
    fn unfiltered_mid_is_not_forwarded() {
        let mut radio = RadioApp::new([DATA_TLM_MID], 4);
        assert!(!radio.forward_telemetry(&tlm(HK_TLM_MID, vec![])));
        assert!(radio.take_outbox().is_empty());
    }

    #[test]
    fn identical_packets_identical_frames() {
        let mut radio = RadioApp::new([DATA_TLM_MID], 4);
        let p = tlm(DATA_TLM_MID, vec![9; 36]);
        radio.forward_telemetry(&p);
        let a = radio.take_outbox();
        radio.forward_telemetry(&p.clone());
        assert_eq!(a, radio.take_outbox());
    }

    #[test]
    fn link_down_buffers_then_drops() {
        let mut radio = RadioApp::new([DATA_TLM_MID], 2);
        radio.set_link_up(false);
        for k in 0..3 {
            radio.forward_telemetry(&tlm(DATA_TLM_MID, vec![k]));
        }
        assert_eq!((radio.pending(), radio.dropped()), (2, 1));
        assert!(radio.take_outbox().is_empty());
        radio.set_link_up(true);
        let frames = split_frames(&radio.take_outbox()).unwrap();
        let payloads: Vec<u8> = frames
            .iter()
            .map(|f| SpacePacket::decode(f).unwrap().payload[0])
            .collect();
        assert_eq!(payloads, vec![0, 1]);
    }

    #[test]
    fn uplink_rejects_corrupt_and_telemetry() {
        let mut radio = RadioApp::new([], 1);
        let mut bytes = SpacePacket::command(CMD_MID, 0, 2, vec![]).encode().unwrap();
        assert_eq!(radio.uplink_command(&bytes).unwrap().function_code(), Some(2));
        bytes[7] ^= 1;
        assert!(matches!(
            radio.uplink_command(&bytes),
            Err(UplinkError::Decode(DecodeError::BadChecksum { .. }))
        ));
        let t = tlm(DATA_TLM_MID, vec![]).encode().unwrap();
        assert_eq!(radio.uplink_command(&t), Err(UplinkError::NotACommand(DATA_TLM_MID)));
        assert_eq!(radio.uplink_rejects(), 2);
    }

    #[test]
    fn decoder_handles_split_reads() {
        let stream = [frame(&[1, 2, 3]), frame(&[]), frame(&[4])].concat();
        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        for b in &stream {
            dec.push(std::slice::from_ref(b));
            while let Some(f) = dec.next_frame() {
                got.push(f.unwrap());
            }
        }
        assert_eq!(got, vec![vec![1, 2, 3], vec![], vec![4]]);
        assert_eq!(dec.buffered(), 0);
    }

    #[test]
    fn oversize_declaration_rejected() {
        let mut dec = FrameDecoder::new();
        dec.push(&u32::MAX.to_be_bytes());
        assert_eq!(dec.next_frame(), Some(Err(FrameError::TooLarge(u32::MAX as usize))));
    }

    #[test]
    fn tcp_link_roundtrip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let client = TcpLink::connect(addr, 8).unwrap();
        let (stream, _) = listener.accept().unwrap();
        let server = TcpLink::from_stream(stream, 8).unwrap();
        client.send(vec![1, 2, 3]).unwrap();
        client.send(vec![]).unwrap();
        server.send(vec![7]).unwrap();
        let t = Duration::from_secs(5);
        assert_eq!(server.recv_timeout(t), Some(vec![1, 2, 3]));
        assert_eq!(server.recv_timeout(t), Some(vec![]));
        assert_eq!(client.recv_timeout(t), Some(vec![7]));
        client.close();
        server.close();
    }
}
