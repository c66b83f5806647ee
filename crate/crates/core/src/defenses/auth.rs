//! Authenticated bus: keyed tags over the encoded packet plus a per-MID publisher table.

use std::collections::{BTreeMap, BTreeSet};

use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::softbus::AppId;
use crate::spacepacket::{EncodeError, MessageId, SpacePacket};

pub const KEY_LEN: usize = 32;
pub const TAG_LEN: usize = 16;

pub type Key = [u8; KEY_LEN];
pub type Tag = [u8; TAG_LEN];

type HmacSha256 = Hmac<Sha256>;

fn mac(key: &[u8]) -> HmacSha256 {
    HmacSha256::new_from_slice(key).expect("HMAC accepts any key length")
}

/// Per-app key derived from the scenario seed, so runs are reproducible.
pub fn derive_key(seed: u64, app_name: &str) -> Key {
    let mut m = mac(&seed.to_be_bytes());
    m.update(b"sbsim-bus-key:");
    m.update(app_name.as_bytes());
    m.finalize().into_bytes().into()
}

/// HMAC-SHA256 over `wire`, truncated to 16 bytes.
pub fn compute_tag(key: &Key, wire: &[u8]) -> Tag {
    let mut m = mac(key);
    m.update(wire);
    let full = m.finalize().into_bytes();
    full[..TAG_LEN].try_into().unwrap()
}

pub fn verify_tag(key: &Key, wire: &[u8], tag: &Tag) -> bool {
    let mut m = mac(key);
    m.update(wire);
    m.verify_truncated_left(tag).is_ok()
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AuthFailure {
    #[error("sender has no key")]
    UnkeyedSender,
    #[error("publication carries no tag")]
    MissingTag,
    #[error("tag does not verify")]
    BadTag,
    #[error("sender is not an authorized publisher for this MID")]
    Unauthorized,
}

#[derive(Debug, Clone, Default)]
pub struct AuthKeyTable {
    keys: BTreeMap<AppId, Key>,
    authorized: BTreeMap<MessageId, BTreeSet<AppId>>,
}

impl AuthKeyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_key(&mut self, app: AppId, key: Key) {
        self.keys.insert(app, key);
    }

    pub fn authorize(&mut self, mid: MessageId, app: AppId) {
        self.authorized.entry(mid).or_default().insert(app);
    }

    pub fn key(&self, app: AppId) -> Option<&Key> {
        self.keys.get(&app)
    }

    pub fn authorized(&self, mid: MessageId) -> impl Iterator<Item = AppId> + '_ {
        self.authorized.get(&mid).into_iter().flatten().copied()
    }

    pub fn sign(&self, app: AppId, wire: &[u8]) -> Option<Tag> {
        self.keys.get(&app).map(|k| compute_tag(k, wire))
    }

    /// Tag check first, then authorization; MIDs absent from the table admit nobody.
    pub fn verify(&self, sender: AppId, mid: MessageId, wire: &[u8], tag: Option<&Tag>) -> Result<(), AuthFailure> {
        let key = self.keys.get(&sender).ok_or(AuthFailure::UnkeyedSender)?;
        let tag = tag.ok_or(AuthFailure::MissingTag)?;
        if !verify_tag(key, wire, tag) {
            return Err(AuthFailure::BadTag);
        }
        if !self.authorized.get(&mid).is_some_and(|s| s.contains(&sender)) {
            return Err(AuthFailure::Unauthorized);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthenticatedPacket {
    pub packet: SpacePacket,
    pub tag: Tag,
}

impl AuthenticatedPacket {
    pub fn sign(packet: SpacePacket, key: &Key) -> Result<Self, EncodeError> {
        let tag = compute_tag(key, &packet.encode()?);
        Ok(Self { packet, tag })
    }

    pub fn verify(&self, key: &Key) -> bool {
        self.packet.encode().is_ok_and(|wire| verify_tag(key, &wire, &self.tag))
    }
}
