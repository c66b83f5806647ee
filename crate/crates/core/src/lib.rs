//! Deterministic small-satellite flight-software simulator.
//!
//! A packet codec, an MID-routed software bus, a table scheduler, a star tracker with its
//! truth model, the SOLO implant, a radio/ground link, a schema-driven ground station, the
//! countermeasure suite and a scenario runner tying them together.

pub mod attitude;
pub mod defenses;
pub mod downlink;
pub mod ground;
pub mod implant;
pub mod interface;
pub mod scenario;
pub mod scheduler;
pub mod softbus;
pub mod spacepacket;
pub mod star_tracker;
