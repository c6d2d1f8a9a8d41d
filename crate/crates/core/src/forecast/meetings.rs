//! Folding per-meeting forecasts into the background forecast.

use serde::{Deserialize, Serialize};

use super::cdf::{DurationCdf, Interpolation};
use crate::error::{Error, Result};
use crate::model::Duration;

/// One active meeting's contribution, with its scope in seconds relative to
/// the query time as a half-open interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingTerm {
    pub id: String,
    pub scope: (i64, i64),
    pub cdf: DurationCdf,
    pub p_attend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingWeight {
    pub appointment_id: String,
    pub p_attend: f64,
}

/// Sorts terms by scope start and cuts each scope off where the next begins.
/// Terms left with an empty scope are dropped.
pub fn truncate_scopes(terms: &mut Vec<MeetingTerm>) {
    terms.sort_by(|a, b| a.scope.0.cmp(&b.scope.0).then_with(|| a.id.cmp(&b.id)));
    for i in 1..terms.len() {
        let next_start = terms[i].scope.0;
        let prev = &mut terms[i - 1].scope;
        prev.1 = prev.1.min(next_start);
    }
    terms.retain(|t| t.scope.0 < t.scope.1);
}

/// Evaluation grid `0, step, 2·step, …` ending exactly at `horizon`.
pub fn grid(horizon: Duration, step: Duration) -> Result<Vec<u64>> {
    if step == Duration::ZERO || horizon == Duration::ZERO {
        return Err(Error::InvalidInput("grid step and horizon must be positive".into()));
    }
    let mut g: Vec<u64> = (0..=horizon.secs()).step_by(step.secs() as usize).collect();
    if *g.last().unwrap() != horizon.secs() {
        g.push(horizon.secs());
    }
    Ok(g)
}

/// Mixture before the monotone repair: inside meeting `m`'s scope
/// `G(t) = p·F_m(t) + (1-p)·F0(t)`, elsewhere `G(t) = F0(t)`.
pub fn mix_raw(f0: &DurationCdf, terms: &[MeetingTerm], grid: &[u64]) -> Result<Vec<f64>> {
    for t in terms {
        if !(0.0..=1.0).contains(&t.p_attend) {
            return Err(Error::InvalidInput(format!("p_attend {} for {}", t.p_attend, t.id)));
        }
        if t.scope.0 >= t.scope.1 {
            return Err(Error::InvalidInput(format!("empty scope for {}", t.id)));
        }
    }
    let mut sorted: Vec<&MeetingTerm> = terms.iter().collect();
    sorted.sort_by_key(|t| t.scope.0);
    for w in sorted.windows(2) {
        if w[1].scope.0 < w[0].scope.1 {
            return Err(Error::OverlappingScopes(format!("{} and {}", w[0].id, w[1].id)));
        }
    }
    Ok(grid
        .iter()
        .map(|&t| {
            let base = f0.eval(t as f64);
            let ti = t as i64;
            match sorted.iter().find(|m| m.scope.0 <= ti && ti < m.scope.1) {
                Some(m) => m.p_attend * m.cdf.eval(t as f64) + (1.0 - m.p_attend) * base,
                None => base,
            }
        })
        .collect())
}

/// Mixes meeting forecasts into `f0` on a uniform grid over `[0, horizon]`,
/// then repairs monotonicity with a running maximum and clips to `[0,1]`.
/// Scopes must already be disjoint (see [`truncate_scopes`]).
pub fn integrate_meetings(
    f0: &DurationCdf,
    terms: &[MeetingTerm],
    horizon: Duration,
    step: Duration,
) -> Result<DurationCdf> {
    let g = grid(horizon, step)?;
    let raw = mix_raw(f0, terms, &g)?;
    let mut running = 0.0f64;
    let points = g
        .into_iter()
        .zip(raw)
        .map(|(t, v)| {
            running = running.max(v.clamp(0.0, 1.0));
            (t, running)
        })
        .collect();
    DurationCdf::from_points(points, Interpolation::Linear)
}
