//! Scenario runner CLI support: the ground-station HTTP/WebSocket service and the
//! wall-clock paced live mode that feeds it over the framed TCP link.

pub mod live;
pub mod service;
