//! Expected cost of interruption.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayClass, Period};

/// Per-level interruption costs during a meeting, plus the default cost for
/// meeting-free time in each (period, day class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptCosts {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    pub default_costs: BTreeMap<(Period, DayClass), f64>,
}

impl InterruptCosts {
    pub fn validate(&self) -> Result<()> {
        let all = [self.low, self.medium, self.high]
            .into_iter()
            .chain(self.default_costs.values().copied());
        for c in all {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidConfig(format!("interruption cost {c} is negative")));
            }
        }
        Ok(())
    }

    pub fn default_cost(&self, period: Period, day_class: DayClass) -> Result<f64> {
        self.default_costs.get(&(period, day_class)).copied().ok_or_else(|| {
            Error::NotFound(format!("default cost for {} {}", period.name(), day_class.name()))
        })
    }
}

impl Default for InterruptCosts {
    fn default() -> Self {
        let mut default_costs = BTreeMap::new();
        for p in Period::ALL {
            for (dc, base) in [(DayClass::Weekday, 1.0), (DayClass::Weekend, 0.5)] {
                let scale = match p {
                    Period::Morning | Period::Afternoon => 2.0,
                    Period::Lunchtime => 1.0,
                    Period::Evening => 0.5,
                    Period::Night => 0.25,
                };
                default_costs.insert((p, dc), base * scale);
            }
        }
        InterruptCosts { low: 10.0, medium: 4.0, high: 1.0, default_costs }
    }
}

/// `p_attend · Σ_i p_i c_i + (1 - p_attend) · c_default`, where `dist` is
/// over (low, medium, high) interruptability.
pub fn expected_cost_of_interruption(
    p_attend: f64,
    dist: [f64; 3],
    costs: &InterruptCosts,
    period: Period,
    day_class: DayClass,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_attend) {
        return Err(Error::InvalidInput(format!("p_attend {p_attend} outside [0,1]")));
    }
    if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput(format!("interruptability distribution {dist:?}")));
    }
    let c_default = costs.default_cost(period, day_class)?;
    let in_meeting = compensated_sum(&[dist[0] * costs.low, dist[1] * costs.medium, dist[2] * costs.high]);
    Ok(compensated_sum(&[p_attend * in_meeting, (1.0 - p_attend) * c_default]))
}

/// Neumaier summation.
fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs(c_default: f64) -> InterruptCosts {
        let mut c = InterruptCosts::default();
        c.default_costs.insert((Period::Morning, DayClass::Weekday), c_default);
        c
    }

    #[test]
    fn skipped_meeting_costs_the_default() {
        let eci = expected_cost_of_interruption(0.0, [0.2, 0.3, 0.5], &costs(2.5), Period::Morning, DayClass::Weekday)
            .unwrap();
        assert_eq!(eci, 2.5);
    }

    #[test]
    fn certain_low_interruptability() {
        let eci = expected_cost_of_interruption(1.0, [1.0, 0.0, 0.0], &costs(2.0), Period::Morning, DayClass::Weekday)
            .unwrap();
        assert_eq!(eci, 10.0);
    }

    #[test]
    fn reported_marginals() {
        let eci = expected_cost_of_interruption(0.64, [0.5, 0.4, 0.1], &costs(2.0), Period::Morning, DayClass::Weekday)
            .unwrap();
        assert_eq!(eci, 5.008);
    }

    #[test]
    fn malformed_inputs() {
        let c = costs(2.0);
        let k = (Period::Morning, DayClass::Weekday);
        assert!(expected_cost_of_interruption(0.5, [0.5, 0.4, 0.2], &c, k.0, k.1).is_err());
        assert!(expected_cost_of_interruption(1.5, [0.5, 0.4, 0.1], &c, k.0, k.1).is_err());
        assert!(expected_cost_of_interruption(0.5, [1.5, -0.4, -0.1], &c, k.0, k.1).is_err());
        let mut neg = c.clone();
        neg.low = -1.0;
        assert!(neg.validate().is_err());
    }
}
