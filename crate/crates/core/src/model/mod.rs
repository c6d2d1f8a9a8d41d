//! Domain types shared by every stage of the pipeline.

pub mod time;
pub mod timeline;

pub use time::{
    classify_time_period, parse_clock, DayClass, DayOfWeek, Duration, Period, PeriodTable,
    PeriodWindow, TimePeriod, Timestamp,
};
pub use timeline::{
    coalesce_timeline, DeviceProfile, EventKind, PresenceSegment, PresenceState, RawEvent,
    Timeline,
};
