//! Engine configuration. Every tunable default lives here and can be
//! overridden from a TOML file; missing keys keep their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calendar::{HoldoutSplit, SubjectTable};
use crate::cases::{BackoffPolicy, ContextAttr};
use crate::error::{Error, Result};
use crate::forecast::InterruptCosts;
use crate::learn::DurationBinning;
use crate::model::{parse_clock, DayClass, Duration, Period, PeriodTable, PeriodWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub taxonomy: TaxonomyConfig,
    pub timeline: TimelineConfig,
    pub backoff: BackoffConfig,
    pub learn: LearnConfig,
    pub forecast: ForecastConfig,
    pub calendar: CalendarConfig,
    pub costs: CostConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            taxonomy: TaxonomyConfig::default(),
            timeline: TimelineConfig::default(),
            backoff: BackoffConfig::default(),
            learn: LearnConfig::default(),
            forecast: ForecastConfig::default(),
            calendar: CalendarConfig::default(),
            costs: CostConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub period: Period,
    /// Local clock time, `HH:MM`.
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyConfig {
    pub utc_offset_secs: i32,
    pub windows: Vec<WindowConfig>,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        let w = |period, start: &str, end: &str| WindowConfig {
            period,
            start: start.into(),
            end: end.into(),
        };
        TaxonomyConfig {
            utc_offset_secs: 0,
            windows: vec![
                w(Period::Morning, "06:00", "11:30"),
                w(Period::Lunchtime, "11:30", "13:30"),
                w(Period::Afternoon, "13:30", "17:30"),
                w(Period::Evening, "17:30", "22:00"),
                w(Period::Night, "22:00", "06:00"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineConfig {
    pub idle_threshold_secs: u64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        TimelineConfig { idle_threshold_secs: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackoffConfig {
    pub ladder: Vec<Vec<ContextAttr>>,
    pub n_min: usize,
    pub include_censored: bool,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        let p = BackoffPolicy::default();
        BackoffConfig { ladder: p.ladder, n_min: p.n_min, include_censored: p.include_censored }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    /// Reference classes at least this large are estimated through a tree.
    pub n_tree: usize,
    pub min_leaf: usize,
    /// Equivalent sample size; `None` means one per class.
    pub alpha_total: Option<f64>,
    pub bin_edges_mins: Vec<u64>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            n_tree: 100,
            min_leaf: 5,
            alpha_total: None,
            bin_edges_mins: vec![2, 5, 10, 15, 30, 60, 120, 240, 480],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub confidence_threshold: f64,
    pub meeting_padding_secs: u64,
    pub horizon_secs: u64,
    pub grid_step_secs: u64,
    /// Extra quantiles reported alongside the threshold.
    pub report_quantiles: Vec<f64>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            confidence_threshold: 0.8,
            meeting_padding_secs: 15 * 60,
            horizon_secs: 8 * 3600,
            grid_step_secs: 60,
            report_quantiles: vec![0.5, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalendarConfig {
    pub draft_f_hi: f64,
    pub draft_f_lo: f64,
    /// Location of devices whose activity counts as being at the desk.
    pub office_location: String,
    pub holdout_last_n: usize,
    pub min_leaf: usize,
    pub subject_keywords: Vec<(String, String)>,
    pub location_model: bool,
}

impl Default for CalendarConfig {
    fn default() -> Self {
        CalendarConfig {
            draft_f_hi: 0.5,
            draft_f_lo: 0.1,
            office_location: "office".into(),
            holdout_last_n: 100,
            min_leaf: 5,
            subject_keywords: SubjectTable::default().keywords,
            location_model: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultCost {
    pub period: Period,
    pub day_class: DayClass,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    pub defaults: Vec<DefaultCost>,
}

impl Default for CostConfig {
    fn default() -> Self {
        let c = InterruptCosts::default();
        CostConfig {
            low: c.low,
            medium: c.medium,
            high: c.high,
            defaults: c
                .default_costs
                .iter()
                .map(|(&(period, day_class), &cost)| DefaultCost { period, day_class, cost })
                .collect(),
        }
    }
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.taxonomy()?;
        self.backoff_policy().validate()?;
        self.binning()?;
        self.costs().validate()?;
        if self.timeline.idle_threshold_secs == 0 {
            return Err(Error::InvalidConfig("idle threshold must be positive".into()));
        }
        let f = &self.forecast;
        if !(f.confidence_threshold > 0.0 && f.confidence_threshold <= 1.0) {
            return Err(Error::InvalidConfig("confidence threshold outside (0,1]".into()));
        }
        if f.horizon_secs == 0 || f.grid_step_secs == 0 {
            return Err(Error::InvalidConfig("horizon and grid step must be positive".into()));
        }
        let c = &self.calendar;
        if !(0.0 <= c.draft_f_lo && c.draft_f_lo < c.draft_f_hi && c.draft_f_hi <= 1.0) {
            return Err(Error::InvalidConfig("draft thresholds need 0 <= lo < hi <= 1".into()));
        }
        if self.learn.min_leaf == 0 || c.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be positive".into()));
        }
        Ok(())
    }

    pub fn taxonomy(&self) -> Result<PeriodTable> {
        let windows = self
            .taxonomy
            .windows
            .iter()
            .map(|w| {
                Ok(PeriodWindow {
                    period: w.period,
                    start: parse_clock(&w.start)?,
                    end: parse_clock(&w.end)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodTable::new(windows, self.taxonomy.utc_offset_secs)
    }

    pub fn idle_threshold(&self) -> Duration {
        Duration::from_secs(self.timeline.idle_threshold_secs)
    }

    pub fn backoff_policy(&self) -> BackoffPolicy {
        BackoffPolicy {
            ladder: self.backoff.ladder.clone(),
            n_min: self.backoff.n_min,
            include_censored: self.backoff.include_censored,
        }
    }

    pub fn binning(&self) -> Result<DurationBinning> {
        DurationBinning::from_minutes(&self.learn.bin_edges_mins)
    }

    pub fn subjects(&self) -> SubjectTable {
        SubjectTable { keywords: self.calendar.subject_keywords.clone() }
    }

    pub fn holdout(&self) -> HoldoutSplit {
        HoldoutSplit::LastN(self.calendar.holdout_last_n)
    }

    pub fn costs(&self) -> InterruptCosts {
        InterruptCosts {
            low: self.costs.low,
            medium: self.costs.medium,
            high: self.costs.high,
            default_costs: self
                .costs
                .defaults
                .iter()
                .map(|d| ((d.period, d.day_class), d.cost))
                .collect(),
        }
    }

    pub fn horizon(&self) -> Duration {
        Duration::from_secs(self.forecast.horizon_secs)
    }

    pub fn grid_step(&self) -> Duration {
        Duration::from_secs(self.forecast.grid_step_secs)
    }

    pub fn padding(&self) -> Duration {
        Duration::from_secs(self.forecast.meeting_padding_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = EngineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(EngineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.taxonomy().unwrap(), PeriodTable::default());
        assert_eq!(cfg.costs(), InterruptCosts::default());
    }

    #[test]
    fn partial_override() {
        let cfg = EngineConfig::from_toml("[forecast]\nconfidence_threshold = 0.9\n[backoff]\nn_min = 500\n")
            .unwrap();
        assert_eq!(cfg.forecast.confidence_threshold, 0.9);
        assert_eq!(cfg.backoff.n_min, 500);
        assert_eq!(cfg.timeline.idle_threshold_secs, 300);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(EngineConfig::from_toml("[calendar]\ndraft_f_hi = 0.05\n").is_err());
        assert!(EngineConfig::from_toml("[nonsense]\nx = 1\n").is_err());
        assert!(EngineConfig::from_toml("[backoff]\nladder = [[\"period\"]]\n").is_err());
    }
}
