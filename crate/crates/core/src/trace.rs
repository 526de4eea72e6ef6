//! Per-round run records.

use std::fmt;

/// Numerical slack on `suboptimality >= 0` checks.
pub const TOL_EVAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Single,
    Local,
    Global,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Single => "single",
            Phase::Local => "local",
            Phase::Global => "global",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "init" => Some(Phase::Init),
            "single" => Some(Phase::Single),
            "local" => Some(Phase::Local),
            "global" => Some(Phase::Global),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// `F(x) - F(x*)`, absent when the optimum is unknown.
    pub suboptimality: Option<f64>,
    pub grad_norm_sq: f64,
    pub dist_sq: Option<f64>,
    pub grad_oracle_calls: u64,
    pub value_oracle_calls: u64,
    pub phase: Phase,
}

/// Things that happen between rounds.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    StageBoundary { round: usize, stage: usize, eta: f64 },
    PhaseBoundary { round: usize, picked_local: bool },
    TruncatedStage { round: usize, planned: usize },
    Note(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    pub fn final_suboptimality(&self) -> Option<f64> {
        self.last().and_then(|r| r.suboptimality)
    }

    /// First round whose suboptimality is at or below `target`.
    pub fn rounds_to_reach(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.suboptimality.is_some_and(|s| s <= target))
            .map(|r| r.round)
    }

    pub fn suboptimalities(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.suboptimality).collect()
    }

    /// Checks the record-level invariants: nonnegative metrics (within
    /// [`TOL_EVAL`]) and nondecreasing oracle counters.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev: Option<&RoundRecord> = None;
        for r in &self.records {
            if r.grad_norm_sq < 0.0 {
                return Err(format!("round {}: negative grad norm", r.round));
            }
            if r.dist_sq.is_some_and(|d| d < 0.0) {
                return Err(format!("round {}: negative distance", r.round));
            }
            if r.suboptimality.is_some_and(|s| s < -TOL_EVAL) {
                return Err(format!("round {}: suboptimality below -tol", r.round));
            }
            if let Some(p) = prev {
                if r.grad_oracle_calls < p.grad_oracle_calls || r.value_oracle_calls < p.value_oracle_calls {
                    return Err(format!("round {}: oracle counter decreased", r.round));
                }
            }
            prev = Some(r);
        }
        Ok(())
    }
}
