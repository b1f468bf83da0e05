use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Exact text already in the dataset.
    Duplicate,
    /// Marginal gain below the threshold.
    Threshold,
}

/// One line of the run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Probe {
        count: usize,
        selected: Vec<usize>,
        det: f64,
        tau0: f64,
        sigma: f64,
        fallback: bool,
    },
    Generate {
        iteration: u32,
        explorer_id: String,
        requested: usize,
        returned: usize,
        warnings: Vec<String>,
    },
    Accept {
        iteration: u32,
        explorer_id: String,
        instance_id: String,
        gamma: f64,
        tau: f64,
    },
    Reject {
        iteration: u32,
        explorer_id: String,
        text: String,
        gamma: Option<f64>,
        tau: f64,
        reason: RejectReason,
    },
    Prune {
        iteration: u32,
        before: usize,
        kept: Vec<String>,
        fallback: bool,
    },
    Explore {
        iteration: u32,
        explorer_id: String,
        returned: usize,
        processed: usize,
        accepted: usize,
        rejected: usize,
        successors: Vec<String>,
        /// Generation-class calls made by this explore.
        calls: u64,
    },
    BeamSelect {
        iteration: u32,
        pool: usize,
        selected: Vec<String>,
        mode: String,
    },
}

/// Fraction of tested instances rejected, one entry per explore call in
/// execution order.
pub fn rejection_rate_trace(trace: Option<&[TraceEvent]>) -> Result<Vec<f64>, EngineError> {
    let trace = trace.ok_or(EngineError::TraceDisabled)?;
    Ok(trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Explore { processed, rejected, .. } if *processed > 0 => {
                Some(*rejected as f64 / *processed as f64)
            }
            _ => None,
        })
        .collect())
}

/// Least-squares slope of `values` against their index.
pub fn trend_slope(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = (nf - 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}
