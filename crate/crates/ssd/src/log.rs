//! Newline-delimited JSON episode logs and replay.

use crate::env::{EnvAction, EnvConfig, EnvError, IncentiveKind, RewardBreakdown, SsdEnv};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub seed: u64,
    pub config: EnvConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub actions: Vec<EnvAction>,
    pub incentives: Vec<Vec<IncentiveKind>>,
    pub rewards: RewardBreakdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("log is empty")]
    Empty,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("replay diverged at step {0}")]
    Diverged(usize),
}

impl EpisodeLog {
    pub fn new(config: &EnvConfig, seed: u64) -> Self {
        EpisodeLog { header: LogHeader { seed, config: config.clone() }, records: Vec::new() }
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        serde_json::to_writer(&mut out, &self.header).map_err(|e| LogError::Json { line: 1, source: e })?;
        writeln!(out)?;
        for (i, r) in self.records.iter().enumerate() {
            serde_json::to_writer(&mut out, r).map_err(|e| LogError::Json { line: i + 2, source: e })?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, LogError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(LogError::Empty)?;
        let header = serde_json::from_str(&first?).map_err(|e| LogError::Json { line: 1, source: e })?;
        let mut records = Vec::new();
        for (i, line) in lines {
            records.push(serde_json::from_str(&line?).map_err(|e| LogError::Json { line: i + 1, source: e })?);
        }
        Ok(EpisodeLog { header, records })
    }

    /// Re-simulates the episode from its seed and actions, checking every reward
    /// against the log. Returns the final environment state.
    pub fn replay(&self) -> Result<SsdEnv, LogError> {
        let (mut env, _) = SsdEnv::reset(&self.header.config, self.header.seed)?;
        for r in &self.records {
            let out = env.step(&r.actions, &r.incentives)?;
            if out.rewards != r.rewards {
                return Err(LogError::Diverged(r.step));
            }
        }
        Ok(env)
    }
}
