use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Right-continuous step function starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    /// Distinct times with at least one event, ascending.
    pub times: Vec<f64>,
    /// Survival just after each jump.
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl StepSurvival {
    /// S(t) = P(T > t).
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// S(t−) = P(T ≥ t).
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Product-limit estimator. At tied times events are counted before
/// censorings, so subjects censored at `t` are still at risk at `t`.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepSurvival> {
    if times.is_empty() {
        return Err(Error::Empty("kaplan_meier input"));
    }
    if times.len() != events.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: events.len(),
        });
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "times must be finite and nonnegative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut out = StepSurvival {
        times: vec![],
        survival: vec![],
        at_risk: vec![],
        events: vec![],
    };
    let mut s = 1.0;
    let mut at_risk = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut d = 0;
        let mut c = 0;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            out.times.push(t);
            out.survival.push(s);
            out.at_risk.push(at_risk);
            out.events.push(d);
        }
        at_risk -= d + c;
    }
    Ok(out)
}
