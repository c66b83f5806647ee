//! Onboard publish/subscribe software bus.
//!
//! Routing is keyed on the message ID alone. The bus knows which registered endpoint called
//! `publish` and writes it into the ledger, but subscribers only ever receive the packet;
//! nothing about the producer travels with it. Defenses plug in through [`BusGuard`].

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spacepacket::{MessageId, PacketError, SpacePacket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AppId(pub u16);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "app#{}", self.0)
    }
}

/// How a publication entered the bus. Set by the harness; never serialized into packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Route {
    Ground,
    Onboard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Delivered,
    AuthRejected,
    SafeModeDropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusRecord {
    pub index: usize,
    pub tick: u64,
    pub true_sender: AppId,
    pub route: Route,
    pub packet: SpacePacket,
    pub disposition: Disposition,
    pub deliveries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub to: AppId,
    pub record: usize,
    pub packet: SpacePacket,
}

pub struct PublishRequest<'a> {
    pub tick: u64,
    pub sender: AppId,
    pub route: Route,
    pub packet: &'a SpacePacket,
    /// Message-authentication tag supplied by the sender, when the bus runs authenticated.
    pub tag: Option<[u8; 16]>,
}

/// Hooks executed synchronously inside `publish`.
pub trait BusGuard {
    /// Decide whether a structurally valid publication may be routed.
    fn admit(&mut self, request: &PublishRequest<'_>, wire: &[u8]) -> Result<(), Disposition>;
    /// Called once per ledger record, after admission and before delivery.
    fn observe(&mut self, record: &BusRecord);
}

/// Baseline bus: admits everything, watches nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct OpenBus;

impl BusGuard for OpenBus {
    fn admit(&mut self, _: &PublishRequest<'_>, _: &[u8]) -> Result<(), Disposition> {
        Ok(())
    }

    fn observe(&mut self, _: &BusRecord) {}
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusError {
    #[error("{0} is not registered")]
    UnknownApp(AppId),
    #[error("application name {0:?} already registered")]
    DuplicateName(String),
    #[error("malformed packet: {0}")]
    Malformed(#[from] PacketError),
}

#[derive(Debug, Default)]
pub struct SoftwareBus {
    names: Vec<String>,
    subscriptions: BTreeMap<MessageId, Vec<AppId>>,
    ledger: Vec<BusRecord>,
    queue: VecDeque<Delivery>,
}

/// Persisted form of a [`BusRecord`]: sender by name, packet as lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: usize,
    pub tick: u64,
    pub sender: String,
    pub route: Route,
    pub disposition: Disposition,
    pub mid: MessageId,
    pub deliveries: usize,
    pub bytes: String,
}

impl SoftwareBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str) -> Result<AppId, BusError> {
        if self.names.iter().any(|n| n == name) {
            return Err(BusError::DuplicateName(name.to_string()));
        }
        self.names.push(name.to_string());
        Ok(AppId(self.names.len() as u16 - 1))
    }

    pub fn app_name(&self, app: AppId) -> Option<&str> {
        self.names.get(app.0 as usize).map(String::as_str)
    }

    pub fn app_by_name(&self, name: &str) -> Option<AppId> {
        self.names.iter().position(|n| n == name).map(|i| AppId(i as u16))
    }

    pub fn apps(&self) -> impl Iterator<Item = (AppId, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (AppId(i as u16), n.as_str()))
    }

    fn check_registered(&self, app: AppId) -> Result<(), BusError> {
        if (app.0 as usize) < self.names.len() {
            Ok(())
        } else {
            Err(BusError::UnknownApp(app))
        }
    }

    /// No policy check of any kind: any registered app may subscribe to any MID.
    pub fn subscribe(&mut self, app: AppId, mid: MessageId) -> Result<(), BusError> {
        self.check_registered(app)?;
        let subs = self.subscriptions.entry(mid).or_default();
        if !subs.contains(&app) {
            subs.push(app);
        }
        Ok(())
    }

    pub fn subscribers(&self, mid: MessageId) -> &[AppId] {
        self.subscriptions.get(&mid).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Baseline publish with no guard.
    pub fn publish(&mut self, tick: u64, sender: AppId, route: Route, packet: &SpacePacket) -> Result<usize, BusError> {
        let request = PublishRequest {
            tick,
            sender,
            route,
            packet,
            tag: None,
        };
        self.publish_guarded(&request, &mut OpenBus)
    }

    /// Validates, consults the guard, appends a ledger record and queues one delivery per
    /// subscriber (excluding the sender). Returns the number of queued deliveries.
    pub fn publish_guarded(
        &mut self,
        request: &PublishRequest<'_>,
        guard: &mut dyn BusGuard,
    ) -> Result<usize, BusError> {
        self.check_registered(request.sender)?;
        request.packet.validate()?;
        let wire = request.packet.encode().map_err(PacketError::from)?;

        let admitted = guard.admit(request, &wire);
        let receivers: Vec<AppId> = match admitted {
            Ok(()) => self
                .subscribers(request.packet.mid())
                .iter()
                .copied()
                .filter(|&a| a != request.sender)
                .collect(),
            Err(_) => Vec::new(),
        };
        let record = BusRecord {
            index: self.ledger.len(),
            tick: request.tick,
            true_sender: request.sender,
            route: request.route,
            packet: request.packet.clone(),
            disposition: admitted.err().unwrap_or(Disposition::Delivered),
            deliveries: receivers.len(),
        };
        guard.observe(&record);
        for to in &receivers {
            self.queue.push_back(Delivery {
                to: *to,
                record: record.index,
                packet: request.packet.clone(),
            });
        }
        self.ledger.push(record);
        Ok(receivers.len())
    }

    /// Next queued delivery in FIFO order.
    pub fn next_delivery(&mut self) -> Option<Delivery> {
        self.queue.pop_front()
    }

    pub fn pending_deliveries(&self) -> usize {
        self.queue.len()
    }

    pub fn ledger(&self) -> &[BusRecord] {
        &self.ledger
    }

    pub fn ledger_entries(&self) -> Vec<LedgerEntry> {
        self.ledger
            .iter()
            .map(|r| LedgerEntry {
                index: r.index,
                tick: r.tick,
                sender: self.app_name(r.true_sender).unwrap_or("?").to_string(),
                route: r.route,
                disposition: r.disposition,
                mid: r.packet.mid(),
                deliveries: r.deliveries,
                bytes: hex(&r.packet.encode().unwrap_or_default()),
            })
            .collect()
    }

    /// Ledger as JSON lines, one record per line.
    pub fn ledger_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.ledger_entries() {
            out.push_str(&serde_json::to_string(&line).expect("ledger line serializes"));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
