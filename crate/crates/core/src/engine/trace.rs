use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::TestKind;
use crate::error::Result;

/// One completed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub worker_id: usize,
    pub candidate_id: usize,
    pub test: TestKind,
    pub revealed_score: f64,
    pub budget_after: f64,
    pub reward_opt: f64,
    pub reward_mine: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispatch_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish_time: Option<f64>,
}

/// Everything that happened in one simulated screen, in completion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub n_top: usize,
    pub c_cheap: f64,
    pub c_expensive: f64,
    /// Cheap tests bought before the screen started (single-test rich mode).
    pub upfront_cheap_tests: usize,
    pub upfront_cost: f64,
}

impl Trace {
    pub fn actions(&self) -> impl Iterator<Item = (usize, TestKind)> + '_ {
        self.records.iter().map(|r| (r.candidate_id, r.test))
    }

    pub fn expensive_candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.records
            .iter()
            .filter(|r| r.test == TestKind::Expensive)
            .map(|r| r.candidate_id)
    }

    pub fn cheap_tests(&self) -> usize {
        self.records.iter().filter(|r| r.test == TestKind::Cheap).count()
    }

    pub fn expensive_tests(&self) -> usize {
        self.records.len() - self.cheap_tests()
    }

    /// Budget spent during the screen.
    pub fn spent(&self) -> f64 {
        self.c_cheap * self.cheap_tests() as f64 + self.c_expensive * self.expensive_tests() as f64
    }

    /// Spend including any up-front purchase.
    pub fn total_cost(&self) -> f64 {
        self.upfront_cost + self.spent()
    }

    pub fn total_reward_opt(&self) -> f64 {
        self.records.iter().map(|r| r.reward_opt).sum()
    }

    pub fn total_reward_mine(&self) -> u32 {
        self.records.iter().map(|r| r.reward_mine).sum()
    }

    pub fn is_timed(&self) -> bool {
        self.records.first().is_some_and(|r| r.dispatch_time.is_some())
    }

    /// CSV with one row per test; timed traces add dispatch/finish columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let timed = self.is_timed();
        let mut header = vec![
            "step", "worker_id", "candidate_id", "test", "revealed_score", "budget_after", "reward_opt", "reward_mine",
        ];
        if timed {
            header.extend(["dispatch_time", "finish_time"]);
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.step.to_string(),
                r.worker_id.to_string(),
                r.candidate_id.to_string(),
                r.test.to_string(),
                r.revealed_score.to_string(),
                r.budget_after.to_string(),
                r.reward_opt.to_string(),
                r.reward_mine.to_string(),
            ];
            if timed {
                row.push(r.dispatch_time.unwrap_or(f64::NAN).to_string());
                row.push(r.finish_time.unwrap_or(f64::NAN).to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
