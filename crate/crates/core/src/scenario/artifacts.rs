//! Persisted run artifacts. Every file is a deterministic function of the scenario.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::defenses::Alert;
use crate::ground::{from_jsonl, to_jsonl, CommandLogRecord, FormatViolation, HkSnapshot, IndexRow};
use crate::softbus::LedgerEntry;

use super::config::{Scenario, ScenarioError};
use super::report::RunReport;
use super::sim::TruthSample;

pub const SCENARIO_FILE: &str = "scenario.json";
pub const LEDGER_FILE: &str = "bus_ledger.jsonl";
pub const DOWNLINK_FILE: &str = "downlink.bin";
pub const ARCHIVE_FILE: &str = "tlm.bin";
pub const INDEX_FILE: &str = "tlm_index.jsonl";
pub const CMDLOG_FILE: &str = "cmdlog.jsonl";
pub const HK_HISTORY_FILE: &str = "hk_history.jsonl";
pub const VIOLATIONS_FILE: &str = "format_violations.jsonl";
pub const ALERTS_FILE: &str = "alerts.jsonl";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub ledger: Vec<LedgerEntry>,
    /// Raw link byte stream, frames included.
    pub downlink: Vec<u8>,
    pub archive: Vec<u8>,
    pub index: Vec<IndexRow>,
    pub cmdlog: Vec<CommandLogRecord>,
    pub hk_history: Vec<HkSnapshot>,
    pub violations: Vec<FormatViolation>,
    pub alerts: Vec<Alert>,
    pub truth: Vec<TruthSample>,
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
}

impl RunArtifacts {
    /// File name and contents for every artifact, in a fixed order.
    pub fn files(&self, report: &RunReport) -> Vec<(&'static str, Vec<u8>)> {
        vec![
            (SCENARIO_FILE, self.scenario.to_json().into_bytes()),
            (LEDGER_FILE, to_jsonl(&self.ledger).into_bytes()),
            (DOWNLINK_FILE, self.downlink.clone()),
            (ARCHIVE_FILE, self.archive.clone()),
            (INDEX_FILE, to_jsonl(&self.index).into_bytes()),
            (CMDLOG_FILE, to_jsonl(&self.cmdlog).into_bytes()),
            (HK_HISTORY_FILE, to_jsonl(&self.hk_history).into_bytes()),
            (VIOLATIONS_FILE, to_jsonl(&self.violations).into_bytes()),
            (ALERTS_FILE, to_jsonl(&self.alerts).into_bytes()),
            (TRUTH_FILE, to_jsonl(&self.truth).into_bytes()),
            (
                REPORT_FILE,
                (serde_json::to_string_pretty(report).expect("report serializes") + "\n").into_bytes(),
            ),
        ]
    }

    pub fn write(&self, report: &RunReport, dir: &Path) -> Result<(), ArtifactError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ArtifactError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, bytes) in self.files(report) {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(())
    }

    /// Loads a run directory. The report is returned separately since older runs may lack it.
    pub fn load(dir: &Path) -> Result<(Self, Option<RunReport>), ArtifactError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read(&path).map_err(|source| ArtifactError::Io { path, source })
        };
        let text = |name: &str| read(name).map(|b| String::from_utf8_lossy(&b).into_owned());
        fn lines<T: for<'de> serde::Deserialize<'de>>(
            dir: &Path,
            name: &str,
            text: String,
        ) -> Result<Vec<T>, ArtifactError> {
            from_jsonl(&text).map_err(|source| ArtifactError::Json {
                path: dir.join(name),
                source,
            })
        }
        let scenario = Scenario::from_json(&text(SCENARIO_FILE)?).map_err(|source| ArtifactError::Scenario {
            path: dir.join(SCENARIO_FILE),
            source,
        })?;
        let artifacts = Self {
            scenario,
            ledger: lines(dir, LEDGER_FILE, text(LEDGER_FILE)?)?,
            downlink: read(DOWNLINK_FILE)?,
            archive: read(ARCHIVE_FILE)?,
            index: lines(dir, INDEX_FILE, text(INDEX_FILE)?)?,
            cmdlog: lines(dir, CMDLOG_FILE, text(CMDLOG_FILE)?)?,
            hk_history: lines(dir, HK_HISTORY_FILE, text(HK_HISTORY_FILE)?)?,
            violations: lines(dir, VIOLATIONS_FILE, text(VIOLATIONS_FILE)?)?,
            alerts: lines(dir, ALERTS_FILE, text(ALERTS_FILE)?)?,
            truth: lines(dir, TRUTH_FILE, text(TRUTH_FILE)?)?,
        };
        let report = match std::fs::read_to_string(dir.join(REPORT_FILE)) {
            Ok(t) => Some(serde_json::from_str(&t).map_err(|source| ArtifactError::Json {
                path: dir.join(REPORT_FILE),
                source,
            })?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(source) => {
                return Err(ArtifactError::Io {
                    path: dir.join(REPORT_FILE),
                    source,
                })
            }
        };
        Ok((artifacts, report))
    }
}
