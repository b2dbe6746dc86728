//! Line-delimited JSON episode traces and their audit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One executed macro action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    /// Primitive time at which the macro started.
    pub t_start: usize,
    pub belief_particles: usize,
    pub belief_summary: Vec<f64>,
    pub macro_action: serde_json::Value,
    pub macro_observation: serde_json::Value,
    pub obs_key: Vec<i64>,
    /// True state after each executed primitive.
    pub states: Vec<serde_json::Value>,
    /// Reward of each executed primitive.
    pub rewards: Vec<f64>,
    /// `sum_i gamma^i rewards[i]`.
    pub reward: f64,
    /// Cumulative `sum_t gamma^t r_t` up to and including this macro.
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    pub planning_ms: f64,
    pub simulations: u64,
    pub tree_size: usize,
    pub depleted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub records: usize,
    pub steps: usize,
    pub undiscounted_return: f64,
    pub discounted_return: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("record {step}: starts at t={found}, expected t={expected}")]
    Time { step: usize, expected: usize, found: usize },
    #[error("record {step}: {states} states for {rewards} rewards")]
    Shape { step: usize, states: usize, rewards: usize },
    #[error("record {step}: {field} reported {reported}, recomputed {recomputed}")]
    Mismatch {
        step: usize,
        field: &'static str,
        reported: f64,
        recomputed: f64,
    },
}

/// Recomputes macro rewards and cumulative returns from the primitive
/// rewards and checks them against the reported values.
pub fn audit_trace(records: &[TraceRecord], gamma: f64, tolerance: f64) -> Result<AuditReport, AuditError> {
    let mut t = 0usize;
    let mut discounted = 0.0;
    let mut undiscounted = 0.0;
    for r in records {
        if r.t_start != t {
            return Err(AuditError::Time {
                step: r.step,
                expected: t,
                found: r.t_start,
            });
        }
        if r.states.len() != r.rewards.len() {
            return Err(AuditError::Shape {
                step: r.step,
                states: r.states.len(),
                rewards: r.rewards.len(),
            });
        }
        let mut local = 0.0;
        for (i, reward) in r.rewards.iter().enumerate() {
            local += gamma.powi(i as i32) * reward;
            discounted += gamma.powi(t as i32) * reward;
            undiscounted += reward;
            t += 1;
        }
        for (field, reported, recomputed) in [
            ("reward", r.reward, local),
            ("discounted_return", r.discounted_return, discounted),
            ("undiscounted_return", r.undiscounted_return, undiscounted),
        ] {
            if (reported - recomputed).abs() > tolerance {
                return Err(AuditError::Mismatch {
                    step: r.step,
                    field,
                    reported,
                    recomputed,
                });
            }
        }
    }
    Ok(AuditReport {
        records: records.len(),
        steps: t,
        undiscounted_return: undiscounted,
        discounted_return: discounted,
    })
}

/// Writes `header` (any serialisable value) then one record per line.
pub fn write_trace<H: Serialize>(path: &Path, header: &H, records: &[TraceRecord]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace<H: for<'de> Deserialize<'de>>(path: &Path) -> std::io::Result<(H, Vec<TraceRecord>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "empty trace"))??;
    let header = serde_json::from_str(&header_line)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}
