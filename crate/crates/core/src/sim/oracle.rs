//! Ground-truth forecasts by sampling fresh days from a profile. Shares only
//! the day generator and time taxonomy with the rest of the crate; the
//! observation model and case matching are recomputed here directly.

use serde::{Deserialize, Serialize};

use super::{simulate_day, SimDay, SplitMix64, UserProfile};
use crate::error::{Error, Result};
use crate::forecast::{DurationCdf, Interpolation};
use crate::model::{DayClass, Duration, Period, PeriodTable, Timestamp};

/// "The user has been away for `elapsed` after leaving during `period` on a
/// `day_class` day, with no attended meeting at departure; how long until a
/// return of at least `min_stay`?"
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleScenario {
    pub period: Period,
    pub day_class: DayClass,
    pub elapsed: Duration,
    pub min_stay: Duration,
    pub idle_threshold: Duration,
}

/// Observed presence: each activity burst `[u, v]` is seen as `[u, v + θ)`,
/// and bursts closer than θ run together.
pub fn observed_presence(days: &[SimDay], idle_threshold: Duration) -> Vec<(i64, i64)> {
    let theta = idle_threshold.secs() as i64;
    let mut out: Vec<(i64, i64)> = Vec::new();
    for d in days {
        for (u, v) in d.present_intervals() {
            match out.last_mut() {
                Some(last) if u <= last.1 => last.1 = last.1.max(v + theta),
                _ => out.push((u, v + theta)),
            }
        }
    }
    out
}

const BLOCK: i64 = 256;
const LOOKAHEAD: i64 = 7;
/// Far from any start day a generated log would use.
const ORACLE_DAY_OFFSET: i64 = 200_000;

/// Empirical CDF of the remaining wait over `n_samples` matching
/// continuations drawn from fresh days. Fails with `NoSurvivingMass` when no
/// continuation survives the elapsed time within the simulation budget.
pub fn monte_carlo_oracle(
    profile: &UserProfile,
    scenario: &OracleScenario,
    n_samples: usize,
    seed: u64,
) -> Result<DurationCdf> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput("the oracle needs at least 1000 samples".into()));
    }
    if scenario.idle_threshold.secs() < profile.event_spacing_secs {
        return Err(Error::InvalidInput("idle threshold below the event spacing".into()));
    }
    profile.validate()?;
    let table = PeriodTable::default();
    let budget_days = 4_000 + 4 * n_samples as i64;
    let first = profile.start_day + ORACLE_DAY_OFFSET;
    let elapsed = scenario.elapsed.secs() as i64;
    let min_stay = scenario.min_stay.secs() as i64;
    let mut samples: Vec<u64> = Vec::with_capacity(n_samples);
    let mut counter = 0;
    let mut block_start = first;
    while samples.len() < n_samples && block_start - first < budget_days {
        let days: Vec<SimDay> = (block_start..block_start + BLOCK + LOOKAHEAD)
            .map(|day| {
                let mut rng = SplitMix64::derive(seed, day as u64);
                simulate_day(profile, &mut rng, day, &mut counter)
            })
            .collect();
        let block_end = (block_start + BLOCK) * 86_400;
        let present = observed_presence(&days, scenario.idle_threshold);
        for (i, &(_, onset)) in present.iter().enumerate() {
            if onset >= block_end || i + 1 == present.len() {
                break;
            }
            if onset < block_start * 86_400 {
                continue;
            }
            let tp = table.classify(Timestamp::from_unix(onset));
            if tp.period != scenario.period || tp.day_class != scenario.day_class {
                continue;
            }
            let day = &days[(onset.div_euclid(86_400) - block_start) as usize];
            let in_meeting = day
                .meetings
                .iter()
                .any(|m| m.attended && m.record.start.unix() <= onset && onset < m.record.end.unix());
            if in_meeting {
                continue;
            }
            let Some(&(back, _)) = present[i + 1..].iter().find(|(s, e)| e - s >= min_stay) else {
                continue;
            };
            let wait = back - onset;
            if wait > elapsed {
                samples.push((wait - elapsed) as u64);
                if samples.len() == n_samples {
                    break;
                }
            }
        }
        block_start += BLOCK;
    }
    if samples.is_empty() {
        return Err(Error::NoSurvivingMass);
    }
    samples.sort_unstable();
    let n = samples.len() as f64;
    let mut points: Vec<(u64, f64)> = Vec::new();
    for (i, &s) in samples.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == s => last.1 = f,
            _ => points.push((s, f)),
        }
    }
    DurationCdf::from_points(points, Interpolation::Step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(period: Period, elapsed_mins: u64) -> OracleScenario {
        OracleScenario {
            period,
            day_class: DayClass::Weekday,
            elapsed: Duration::from_mins(elapsed_mins),
            min_stay: Duration::ZERO,
            idle_threshold: Duration::from_secs(300),
        }
    }

    #[test]
    fn deterministic_lunch_break_gives_a_step() {
        let mut p = UserProfile::default_profile(11);
        p.meetings_per_day = 0.0;
        p.breaks.rate_per_hour = [0.0, 1.0, 0.0, 0.0, 0.0];
        p.breaks.sigma = [0.0; 5];
        // 35 minutes away is observed as 30: the idle threshold eats five
        p.breaks.median_mins[1] = 35.0;
        let cdf = monte_carlo_oracle(&p, &scenario(Period::Lunchtime, 0), 1000, 3).unwrap();
        assert_eq!(cdf.points(), vec![(1800, 1.0)]);
    }

    #[test]
    fn nothing_survives_two_days() {
        let p = UserProfile::default_profile(1);
        let r = monte_carlo_oracle(&p, &scenario(Period::Morning, 2 * 24 * 60), 1000, 1);
        assert!(matches!(r, Err(Error::NoSurvivingMass)));
    }
}
