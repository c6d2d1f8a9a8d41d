//! Timestamps, durations, and the time-of-day taxonomy.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;

/// A UTC instant with one-second resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_unix(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub const fn unix(self) -> i64 {
        self.0
    }

    /// Elapsed time since `earlier`, or `None` if `earlier` is later than `self`.
    pub fn duration_since(self, earlier: Timestamp) -> Option<Duration> {
        (self.0 >= earlier.0).then(|| Duration((self.0 - earlier.0) as u64))
    }

    /// Signed difference `self - other` in seconds.
    pub fn offset_from(self, other: Timestamp) -> i64 {
        self.0 - other.0
    }

    pub fn parse_rfc3339(s: &str) -> Result<Self> {
        let dt = DateTime::parse_from_rfc3339(s.trim())
            .map_err(|e| Error::InvalidInput(format!("bad timestamp {s:?}: {e}")))?;
        Ok(Timestamp(dt.timestamp()))
    }

    pub fn to_rfc3339(self) -> String {
        match DateTime::<Utc>::from_timestamp(self.0, 0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl FromStr for Timestamp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Timestamp::parse_rfc3339(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse_rfc3339(&s).map_err(serde::de::Error::custom)
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 + rhs.0 as i64)
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 - rhs.0 as i64)
    }
}

/// A nonnegative whole number of seconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Duration(u64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_secs(secs: u64) -> Self {
        Duration(secs)
    }

    pub const fn from_mins(mins: u64) -> Self {
        Duration(mins * 60)
    }

    pub const fn secs(self) -> u64 {
        self.0
    }

    pub fn mins_f64(self) -> f64 {
        self.0 as f64 / 60.0
    }

    /// Parses `90`, `90s`, `15m`, `2h` or `1d`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("bad duration {s:?}"));
        let (digits, unit) = match s.char_indices().find(|(_, c)| !c.is_ascii_digit()) {
            Some((i, _)) => s.split_at(i),
            None => (s, ""),
        };
        let n: u64 = digits.parse().map_err(|_| bad())?;
        let mult = match unit {
            "" | "s" => 1,
            "m" => 60,
            "h" => 3600,
            "d" => 86_400,
            _ => return Err(bad()),
        };
        Ok(Duration(n * mult))
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Morning,
    Lunchtime,
    Afternoon,
    Evening,
    Night,
}

impl Period {
    pub const ALL: [Period; 5] = [
        Period::Morning,
        Period::Lunchtime,
        Period::Afternoon,
        Period::Evening,
        Period::Night,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Period::Morning => "morning",
            Period::Lunchtime => "lunchtime",
            Period::Afternoon => "afternoon",
            Period::Evening => "evening",
            Period::Night => "night",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayOfWeek {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Monday,
        DayOfWeek::Tuesday,
        DayOfWeek::Wednesday,
        DayOfWeek::Thursday,
        DayOfWeek::Friday,
        DayOfWeek::Saturday,
        DayOfWeek::Sunday,
    ];

    /// Day of week for a count of days since 1970-01-01 (a Thursday).
    pub fn from_epoch_day(day: i64) -> Self {
        Self::ALL[(day + 3).rem_euclid(7) as usize]
    }

    pub fn day_class(self) -> DayClass {
        match self {
            DayOfWeek::Saturday | DayOfWeek::Sunday => DayClass::Weekend,
            _ => DayClass::Weekday,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DayOfWeek::Monday => "monday",
            DayOfWeek::Tuesday => "tuesday",
            DayOfWeek::Wednesday => "wednesday",
            DayOfWeek::Thursday => "thursday",
            DayOfWeek::Friday => "friday",
            DayOfWeek::Saturday => "saturday",
            DayOfWeek::Sunday => "sunday",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayClass {
    Weekday,
    Weekend,
}

impl DayClass {
    pub fn name(self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Weekend => "weekend",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The prototypical time segment a timestamp falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimePeriod {
    pub period: Period,
    pub day_of_week: DayOfWeek,
    pub day_class: DayClass,
}

/// One half-open window `[start, end)` of the day, in seconds after local midnight.
/// A window with `end <= start` wraps through midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodWindow {
    pub period: Period,
    pub start: u32,
    pub end: u32,
}

impl PeriodWindow {
    fn len(&self) -> u32 {
        if self.end > self.start {
            self.end - self.start
        } else {
            SECONDS_PER_DAY as u32 - self.start + self.end
        }
    }
}

/// Partition of the local day into named periods, plus the user's fixed UTC offset.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodTable {
    windows: Vec<PeriodWindow>,
    utc_offset: i32,
    // sorted (cut second, period active from that cut); first cut is 0
    cuts: Vec<(u32, Period)>,
}

impl PeriodTable {
    pub fn new(windows: Vec<PeriodWindow>, utc_offset: i32) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidConfig("period table is empty".into()));
        }
        let day = SECONDS_PER_DAY as u32;
        for w in &windows {
            if w.start >= day || w.end > day || w.start == w.end {
                return Err(Error::InvalidConfig(format!(
                    "window {:?} is empty or out of range",
                    w.period
                )));
            }
        }
        let total: u64 = windows.iter().map(|w| w.len() as u64).sum();
        if total != day as u64 {
            return Err(Error::InvalidConfig(format!(
                "windows cover {total} s of a {day} s day"
            )));
        }
        let mut sorted = windows.clone();
        sorted.sort_by_key(|w| w.start);
        for (i, w) in sorted.iter().enumerate() {
            let next = &sorted[(i + 1) % sorted.len()];
            if w.end % day != next.start {
                return Err(Error::InvalidConfig(format!(
                    "gap or overlap between {:?} and {:?}",
                    w.period, next.period
                )));
            }
        }
        if utc_offset.unsigned_abs() >= day {
            return Err(Error::InvalidConfig("utc offset exceeds one day".into()));
        }
        let mut cuts: Vec<(u32, Period)> = sorted.iter().map(|w| (w.start, w.period)).collect();
        if cuts[0].0 != 0 {
            // the last window wraps through midnight
            let wrapping = sorted.last().expect("nonempty").period;
            cuts.insert(0, (0, wrapping));
        }
        Ok(PeriodTable {
            windows,
            utc_offset,
            cuts,
        })
    }

    pub fn windows(&self) -> &[PeriodWindow] {
        &self.windows
    }

    pub fn utc_offset(&self) -> i32 {
        self.utc_offset
    }

    pub fn with_offset(&self, utc_offset: i32) -> Result<Self> {
        PeriodTable::new(self.windows.clone(), utc_offset)
    }

    /// Seconds after local midnight and the local epoch day.
    pub fn local_parts(&self, ts: Timestamp) -> (i64, u32) {
        let local = ts.unix() + self.utc_offset as i64;
        (
            local.div_euclid(SECONDS_PER_DAY),
            local.rem_euclid(SECONDS_PER_DAY) as u32,
        )
    }

    pub fn period_at_second(&self, sec_of_day: u32) -> Period {
        let idx = self.cuts.partition_point(|(c, _)| *c <= sec_of_day) - 1;
        self.cuts[idx].1
    }

    pub fn classify(&self, ts: Timestamp) -> TimePeriod {
        let (day, sec) = self.local_parts(ts);
        let day_of_week = DayOfWeek::from_epoch_day(day);
        TimePeriod {
            period: self.period_at_second(sec),
            day_of_week,
            day_class: day_of_week.day_class(),
        }
    }
}

impl Default for PeriodTable {
    /// morning 06:00-11:30, lunchtime 11:30-13:30, afternoon 13:30-17:30,
    /// evening 17:30-22:00, night 22:00-06:00, UTC.
    fn default() -> Self {
        let h = |hh: u32, mm: u32| hh * 3600 + mm * 60;
        PeriodTable::new(
            vec![
                PeriodWindow { period: Period::Morning, start: h(6, 0), end: h(11, 30) },
                PeriodWindow { period: Period::Lunchtime, start: h(11, 30), end: h(13, 30) },
                PeriodWindow { period: Period::Afternoon, start: h(13, 30), end: h(17, 30) },
                PeriodWindow { period: Period::Evening, start: h(17, 30), end: h(22, 0) },
                PeriodWindow { period: Period::Night, start: h(22, 0), end: h(6, 0) },
            ],
            0,
        )
        .expect("default period table is valid")
    }
}

/// Free-function form of [`PeriodTable::classify`].
pub fn classify_time_period(ts: Timestamp, table: &PeriodTable) -> TimePeriod {
    table.classify(ts)
}

/// Parses `HH:MM` or `HH:MM:SS` into seconds after midnight; `24:00` is accepted.
pub fn parse_clock(s: &str) -> Result<u32> {
    let bad = || Error::InvalidConfig(format!("bad clock time {s:?}"));
    let parts: Vec<&str> = s.trim().split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(bad());
    }
    let mut nums = [0u32; 3];
    for (i, p) in parts.iter().enumerate() {
        nums[i] = p.parse().map_err(|_| bad())?;
    }
    if nums[1] >= 60 || nums[2] >= 60 {
        return Err(bad());
    }
    let secs = nums[0] * 3600 + nums[1] * 60 + nums[2];
    if secs > SECONDS_PER_DAY as u32 {
        return Err(bad());
    }
    Ok(secs)
}

#[cfg(test)]
mod tests {
    use super::*;

    // 2024-01-02 is a Tuesday.
    fn at(day: &str, clock: &str) -> Timestamp {
        Timestamp::parse_rfc3339(&format!("{day}T{clock}Z")).unwrap()
    }

    #[test]
    fn tuesday_morning() {
        let tp = PeriodTable::default().classify(at("2024-01-02", "10:15:00"));
        assert_eq!(tp.period, Period::Morning);
        assert_eq!(tp.day_of_week, DayOfWeek::Tuesday);
        assert_eq!(tp.day_class, DayClass::Weekday);
    }

    #[test]
    fn saturday_night() {
        let tp = PeriodTable::default().classify(at("2024-01-06", "03:00:00"));
        assert_eq!(tp.period, Period::Night);
        assert_eq!(tp.day_of_week, DayOfWeek::Saturday);
        assert_eq!(tp.day_class, DayClass::Weekend);
    }

    #[test]
    fn lower_edge_is_inclusive() {
        let table = PeriodTable::default();
        let tp = table.classify(at("2024-01-01", "11:30:00"));
        assert_eq!(tp.period, Period::Lunchtime);
        assert_eq!(tp.day_of_week, DayOfWeek::Monday);
        assert_eq!(table.classify(at("2024-01-01", "11:29:59")).period, Period::Morning);
    }

    #[test]
    fn offset_shifts_local_day() {
        let table = PeriodTable::default().with_offset(-8 * 3600).unwrap();
        // 03:00Z Tuesday is 19:00 Monday at UTC-8
        let tp = table.classify(at("2024-01-02", "03:00:00"));
        assert_eq!(tp.period, Period::Evening);
        assert_eq!(tp.day_of_week, DayOfWeek::Monday);
    }

    #[test]
    fn rejects_gaps_and_overlaps() {
        let h = |hh: u32| hh * 3600;
        let gap = vec![
            PeriodWindow { period: Period::Morning, start: h(6), end: h(12) },
            PeriodWindow { period: Period::Night, start: h(13), end: h(6) },
        ];
        assert!(PeriodTable::new(gap, 0).is_err());
        let overlap = vec![
            PeriodWindow { period: Period::Morning, start: h(6), end: h(14) },
            PeriodWindow { period: Period::Afternoon, start: h(12), end: h(18) },
            PeriodWindow { period: Period::Night, start: h(18), end: h(6) },
        ];
        assert!(PeriodTable::new(overlap, 0).is_err());
    }

    #[test]
    fn duration_parsing() {
        assert_eq!(Duration::parse("15m").unwrap(), Duration::from_mins(15));
        assert_eq!(Duration::parse("90").unwrap(), Duration::from_secs(90));
        assert_eq!(Duration::parse("2h").unwrap().secs(), 7200);
        assert!(Duration::parse("m15").is_err());
        assert!(Duration::parse("15x").is_err());
    }

    #[test]
    fn timestamp_round_trip() {
        let ts = at("2024-03-05", "08:09:10");
        assert_eq!(ts.to_rfc3339(), "2024-03-05T08:09:10Z");
        assert_eq!(ts.duration_since(ts - Duration::from_secs(5)), Some(Duration::from_secs(5)));
        assert_eq!((ts - Duration::from_secs(5)).duration_since(ts), None);
    }
}
