//! Case acquisition: turning a timeline and calendar into wait-to-event
//! observations, measuring the proximal activity context, and selecting a
//! reference class with progressive backoff.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    coalesce_timeline, DeviceProfile, Duration, EventKind, PeriodTable, PresenceState,
    RawEvent, TimePeriod, Timeline, Timestamp,
};
use crate::store::{AnnotationRecord, AppointmentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarStatus {
    NoMeeting,
    MeetingScheduled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAttributes {
    pub period: TimePeriod,
    pub calendar_status: CalendarStatus,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl ContextAttributes {
    pub fn new(period: TimePeriod, calendar_status: CalendarStatus) -> Self {
        ContextAttributes { period, calendar_status, extra: BTreeMap::new() }
    }
}

/// The appointment covering a case's onset, with its attendance label if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingLink {
    pub appointment_id: String,
    pub attended: Option<bool>,
}

/// One wait-to-event observation. A censored case holds the observed lower
/// bound in `wait`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub onset: Timestamp,
    pub context: ContextAttributes,
    pub wait: Duration,
    pub censored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meeting: Option<MeetingLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    TimeUntilReturn,
    TimeUntilLeave,
    TimeUntilDeviceAccess,
    TimeUntilAppEngagement,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::TimeUntilReturn => "time_until_return",
            QueryKind::TimeUntilLeave => "time_until_leave",
            QueryKind::TimeUntilDeviceAccess => "time_until_device_access",
            QueryKind::TimeUntilAppEngagement => "time_until_app_engagement",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "time_until_return" => QueryKind::TimeUntilReturn,
            "time_until_leave" => QueryKind::TimeUntilLeave,
            "time_until_device_access" => QueryKind::TimeUntilDeviceAccess,
            "time_until_app_engagement" => QueryKind::TimeUntilAppEngagement,
            other => return Err(Error::InvalidInput(format!("unknown query kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevicePredicate {
    Capability(String),
    Location(String),
}

impl DevicePredicate {
    pub fn matches(&self, profile: &DeviceProfile) -> bool {
        match self {
            DevicePredicate::Capability(c) => profile.has_capability(c),
            DevicePredicate::Location(l) => &profile.location == l,
        }
    }
}

/// What the query waits for, with the parameters legal for that kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Return and stay present for at least `min_stay`.
    Return { min_stay: Duration },
    /// Leave and stay away for at least `min_absence`.
    Leave { min_absence: Duration },
    DeviceAccess { device: DevicePredicate },
    AppEngagement { app: String },
}

impl Target {
    pub fn kind(&self) -> QueryKind {
        match self {
            Target::Return { .. } => QueryKind::TimeUntilReturn,
            Target::Leave { .. } => QueryKind::TimeUntilLeave,
            Target::DeviceAccess { .. } => QueryKind::TimeUntilDeviceAccess,
            Target::AppEngagement { .. } => QueryKind::TimeUntilAppEngagement,
        }
    }

    /// Transition that starts the wait for this kind of target.
    pub fn landmark(&self) -> Landmark {
        match self {
            Target::Return { .. } | Target::DeviceAccess { .. } => Landmark::PresentToAbsent,
            Target::Leave { .. } => Landmark::AbsentToPresent,
            Target::AppEngagement { .. } => Landmark::AppFocusEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub user: String,
    pub at: Timestamp,
    pub target: Target,
    /// Overrides the proximal context measured from the timeline.
    #[serde(default)]
    pub elapsed: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Landmark {
    PresentToAbsent,
    AbsentToPresent,
    AppFocusEnd,
    DeviceLastSeen,
}

/// Time from the most recent landmark transition at or before `at` to `at`.
///
/// Segment landmarks come from `timeline`; the horizon start is not a
/// transition. Event landmarks come from `events`, which the caller filters to
/// the relevant app or devices.
pub fn proximal_context(
    timeline: &Timeline,
    events: &[RawEvent],
    at: Timestamp,
    landmark: Landmark,
) -> Result<Duration> {
    let found = match landmark {
        Landmark::PresentToAbsent | Landmark::AbsentToPresent => {
            let want = if landmark == Landmark::PresentToAbsent {
                PresenceState::Absent
            } else {
                PresenceState::Present
            };
            let upto = timeline.segments.partition_point(|s| s.start <= at);
            timeline.segments[..upto]
                .iter()
                .enumerate()
                .rev()
                .find(|(i, s)| *i > 0 && s.state == want)
                .map(|(_, s)| s.start)
        }
        Landmark::AppFocusEnd => events
            .iter()
            .rev()
            .find(|e| e.ts <= at && e.kind == EventKind::AppFocusEnd)
            .map(|e| e.ts),
        Landmark::DeviceLastSeen => events.iter().rev().find(|e| e.ts <= at).map(|e| e.ts),
    };
    found
        .and_then(|t| at.duration_since(t))
        .ok_or(Error::InsufficientHistory)
}

/// Everything known about one user that case extraction draws on.
#[derive(Debug, Clone)]
pub struct UserHistory {
    pub events: Vec<RawEvent>,
    pub timeline: Timeline,
    pub calendar: Vec<AppointmentRecord>,
    pub annotations: HashMap<String, AnnotationRecord>,
    pub devices: Vec<DeviceProfile>,
    pub idle_threshold: Duration,
}

impl UserHistory {
    pub fn new(
        events: Vec<RawEvent>,
        horizon: (Timestamp, Timestamp),
        calendar: Vec<AppointmentRecord>,
        annotations: HashMap<String, AnnotationRecord>,
        devices: Vec<DeviceProfile>,
        idle_threshold: Duration,
    ) -> Result<Self> {
        let timeline = coalesce_timeline(&events, idle_threshold, horizon)?;
        Ok(UserHistory { events, timeline, calendar, annotations, devices, idle_threshold })
    }

    /// Events on devices satisfying `pred`.
    pub fn device_events(&self, pred: &DevicePredicate) -> Vec<RawEvent> {
        let ok: Vec<&str> = self
            .devices
            .iter()
            .filter(|d| pred.matches(d))
            .map(|d| d.device.as_str())
            .collect();
        self.events.iter().filter(|e| ok.contains(&e.device.as_str())).cloned().collect()
    }

    pub fn device_timeline(&self, pred: &DevicePredicate) -> Result<Timeline> {
        coalesce_timeline(&self.device_events(pred), self.idle_threshold, self.timeline.horizon)
    }

    pub fn app_events(&self, app: &str) -> Vec<RawEvent> {
        self.events
            .iter()
            .filter(|e| e.kind.is_app_focus() && e.app.as_deref() == Some(app))
            .cloned()
            .collect()
    }

    /// First appointment (by start) covering `ts`.
    pub fn meeting_at(&self, ts: Timestamp) -> Option<&AppointmentRecord> {
        self.calendar.iter().find(|a| a.covers(ts))
    }

    pub fn context_at(&self, ts: Timestamp, taxonomy: &PeriodTable) -> (ContextAttributes, Option<MeetingLink>) {
        let meeting = self.meeting_at(ts).map(|a| MeetingLink {
            appointment_id: a.id.clone(),
            attended: self.annotations.get(&a.id).and_then(|r| r.attended),
        });
        // meetings the user marked as not attended count as meeting-free time
        let skipped = |a: &&AppointmentRecord| {
            self.annotations.get(&a.id).and_then(|r| r.attended) == Some(false)
        };
        let status = if self.calendar.iter().filter(|a| a.covers(ts)).all(|a| skipped(&a)) {
            CalendarStatus::NoMeeting
        } else {
            CalendarStatus::MeetingScheduled
        };
        (ContextAttributes::new(taxonomy.classify(ts), status), meeting)
    }
}

/// One case per landmark transition in the history, waiting for `target`.
/// Waits still open at the end of the log become censored cases.
pub fn extract_cases(history: &UserHistory, target: &Target, taxonomy: &PeriodTable) -> Result<Vec<Case>> {
    let end = history.timeline.horizon.1;
    let raw: Vec<(Timestamp, Option<Timestamp>)> = match target {
        Target::Return { min_stay } => segment_waits(&history.timeline, PresenceState::Absent, *min_stay),
        Target::Leave { min_absence } => {
            segment_waits(&history.timeline, PresenceState::Present, *min_absence)
        }
        Target::DeviceAccess { device } => {
            segment_waits(&history.device_timeline(device)?, PresenceState::Absent, Duration::ZERO)
        }
        Target::AppEngagement { app } => {
            let evs = history.app_events(app);
            evs.iter()
                .filter(|e| e.kind == EventKind::AppFocusEnd)
                .map(|e| {
                    let next = evs
                        .iter()
                        .find(|b| b.ts >= e.ts && b.kind == EventKind::AppFocusBegin)
                        .map(|b| b.ts);
                    (e.ts, next)
                })
                .collect()
        }
    };
    Ok(raw
        .into_iter()
        .map(|(onset, hit)| {
            let (context, meeting) = history.context_at(onset, taxonomy);
            let (stop, censored) = match hit {
                Some(t) => (t, false),
                None => (end, true),
            };
            Case {
                onset,
                context,
                wait: stop.duration_since(onset).unwrap_or_default(),
                censored,
                meeting,
            }
        })
        .collect())
}

/// For each onset of `onset_state` (not the horizon start), the start of the
/// first later segment in the opposite state lasting at least `min_len`.
/// A segment cut off by the horizon end qualifies only if already long enough.
fn segment_waits(
    timeline: &Timeline,
    onset_state: PresenceState,
    min_len: Duration,
) -> Vec<(Timestamp, Option<Timestamp>)> {
    let segs = &timeline.segments;
    let qualifies = |j: usize| segs[j].state != onset_state && segs[j].len() >= min_len;
    let mut out = Vec::new();
    // next qualifying segment index at or after position i, filled right to left
    let mut next_hit: Vec<Option<usize>> = vec![None; segs.len() + 1];
    for j in (0..segs.len()).rev() {
        next_hit[j] = if qualifies(j) { Some(j) } else { next_hit[j + 1] };
    }
    for (i, s) in segs.iter().enumerate() {
        if i == 0 || s.state != onset_state {
            continue;
        }
        out.push((s.start, next_hit[i + 1].map(|j| segs[j].start)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextAttr {
    Period,
    DayOfWeek,
    DayClass,
    CalendarStatus,
}

impl ContextAttr {
    fn matches(self, a: &ContextAttributes, b: &ContextAttributes) -> bool {
        match self {
            ContextAttr::Period => a.period.period == b.period.period,
            ContextAttr::DayOfWeek => a.period.day_of_week == b.period.day_of_week,
            ContextAttr::DayClass => a.period.day_class == b.period.day_class,
            ContextAttr::CalendarStatus => a.calendar_status == b.calendar_status,
        }
    }
}

/// Attribute subsets from most to least specific.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffPolicy {
    pub ladder: Vec<Vec<ContextAttr>>,
    pub n_min: usize,
    #[serde(default)]
    pub include_censored: bool,
}

impl BackoffPolicy {
    pub fn validate(&self) -> Result<()> {
        match self.ladder.last() {
            Some(last) if last.is_empty() => Ok(()),
            _ => Err(Error::InvalidConfig("backoff ladder must end with the empty subset".into())),
        }
    }

    pub fn level_matches(&self, level: usize, case: &ContextAttributes, query: &ContextAttributes) -> bool {
        self.ladder[level].iter().all(|a| a.matches(case, query))
    }
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        use ContextAttr::*;
        BackoffPolicy {
            ladder: vec![
                vec![Period, DayOfWeek, CalendarStatus],
                vec![Period, DayClass, CalendarStatus],
                vec![Period, DayClass],
                vec![DayClass],
                vec![],
            ],
            n_min: 25,
            include_censored: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceClass<'a> {
    pub cases: Vec<&'a Case>,
    pub level: usize,
}

impl ReferenceClass<'_> {
    /// Waits used for estimation under `policy`.
    pub fn waits(&self, policy: &BackoffPolicy) -> Vec<Duration> {
        self.cases
            .iter()
            .filter(|c| policy.include_censored || !c.censored)
            .map(|c| c.wait)
            .collect()
    }
}

/// Cases matching the most specific ladder level that holds at least `n_min`
/// usable cases, or the last level holding any.
pub fn build_reference_class<'a>(
    cases: &'a [Case],
    context: &ContextAttributes,
    policy: &BackoffPolicy,
) -> Result<ReferenceClass<'a>> {
    if policy.ladder.is_empty() {
        return Err(Error::InvalidConfig("empty backoff ladder".into()));
    }
    let usable = |c: &Case| policy.include_censored || !c.censored;
    let mut fallback = None;
    for level in 0..policy.ladder.len() {
        let matched: Vec<&Case> = cases
            .iter()
            .filter(|c| policy.level_matches(level, &c.context, context))
            .collect();
        let n = matched.iter().filter(|c| usable(c)).count();
        if n >= policy.n_min {
            return Ok(ReferenceClass { cases: matched, level });
        }
        if n > 0 {
            fallback = Some(ReferenceClass { cases: matched, level });
        }
    }
    fallback.ok_or(Error::NoData)
}

/// Signed offsets, relative to a meeting anchor, of the target event after
/// each attended meeting. Return targets anchor on the meeting end, leave
/// targets on the meeting start.
pub fn meeting_offsets(history: &UserHistory, target: &Target) -> Vec<i64> {
    let (state, min_len, anchor_end) = match target {
        Target::Return { min_stay } => (PresenceState::Present, *min_stay, true),
        Target::Leave { min_absence } => (PresenceState::Absent, *min_absence, false),
        _ => return Vec::new(),
    };
    let segs = &history.timeline.segments;
    history
        .calendar
        .iter()
        .filter(|a| history.annotations.get(&a.id).and_then(|r| r.attended) == Some(true))
        .filter_map(|a| {
            let from = segs.partition_point(|s| s.start < a.start);
            let hit = segs[from..]
                .iter()
                .find(|s| s.state == state && s.len() >= min_len)?;
            let anchor = if anchor_end { a.end } else { a.start };
            Some(hit.start.offset_from(anchor))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DayOfWeek, Period, PresenceSegment};
    use std::collections::BTreeSet;

    fn hm(h: i64, m: i64) -> Timestamp {
        // 2024-01-02, a Tuesday
        Timestamp::from_unix(1_704_153_600 + h * 3600 + m * 60)
    }

    fn timeline(spans: &[(Timestamp, Timestamp, bool)]) -> Timeline {
        let segments = spans
            .iter()
            .map(|&(start, end, present)| PresenceSegment {
                start,
                end,
                state: if present { PresenceState::Present } else { PresenceState::Absent },
                devices: if present { BTreeSet::from(["desk".to_string()]) } else { BTreeSet::new() },
            })
            .collect();
        let tl = Timeline { horizon: (spans[0].0, spans.last().unwrap().1), segments };
        tl.check_tiling().unwrap();
        tl
    }

    fn history(tl: Timeline) -> UserHistory {
        UserHistory {
            events: Vec::new(),
            timeline: tl,
            calendar: Vec::new(),
            annotations: HashMap::new(),
            devices: Vec::new(),
            idle_threshold: Duration::from_secs(300),
        }
    }

    #[test]
    fn away_since_departure() {
        let tl = timeline(&[(hm(8, 0), hm(9, 50), true), (hm(9, 50), hm(11, 0), false)]);
        let d = proximal_context(&tl, &[], hm(10, 15), Landmark::PresentToAbsent).unwrap();
        assert_eq!(d, Duration::from_mins(25));
    }

    #[test]
    fn present_since_arrival() {
        let tl = timeline(&[(hm(7, 0), hm(9, 0), false), (hm(9, 0), hm(12, 0), true)]);
        let d = proximal_context(&tl, &[], hm(9, 30), Landmark::AbsentToPresent).unwrap();
        assert_eq!(d, Duration::from_mins(30));
        assert!(matches!(
            proximal_context(&tl, &[], hm(8, 0), Landmark::AbsentToPresent),
            Err(Error::InsufficientHistory)
        ));
        // the horizon start is not a transition
        assert!(matches!(
            proximal_context(&tl, &[], hm(9, 30), Landmark::PresentToAbsent),
            Err(Error::InsufficientHistory)
        ));
    }

    fn fig_timeline() -> Timeline {
        timeline(&[
            (hm(12, 0), hm(13, 0), true),
            (hm(13, 0), hm(13, 40), false),
            (hm(13, 40), hm(14, 5), true),
            (hm(14, 5), hm(14, 50), false),
            (hm(14, 50), hm(15, 50), true),
            (hm(15, 50), hm(16, 0), false),
        ])
    }

    #[test]
    fn return_with_minimum_stay() {
        let h = history(fig_timeline());
        let tax = PeriodTable::default();
        let c15 = extract_cases(&h, &Target::Return { min_stay: Duration::from_mins(15) }, &tax).unwrap();
        assert_eq!(c15[0].onset, hm(13, 0));
        assert_eq!(c15[0].wait, Duration::from_mins(40));
        let c30 = extract_cases(&h, &Target::Return { min_stay: Duration::from_mins(30) }, &tax).unwrap();
        assert_eq!(c30[0].wait, Duration::from_mins(110));
        assert!(!c30[0].censored);
        // absence open at the end of the log
        let last = c30.last().unwrap();
        assert!(last.censored);
        assert_eq!(last.onset, hm(15, 50));
        assert_eq!(last.wait, Duration::from_mins(10));
        assert_eq!(c30[0].context.period.period, Period::Lunchtime);
        assert_eq!(c30[0].context.period.day_of_week, DayOfWeek::Tuesday);
    }

    #[test]
    fn short_trailing_presence_is_censored() {
        let tl = timeline(&[(hm(9, 0), hm(10, 0), true), (hm(10, 0), hm(10, 30), false), (hm(10, 30), hm(10, 40), true)]);
        let h = history(tl);
        let cases = extract_cases(&h, &Target::Return { min_stay: Duration::from_mins(15) }, &PeriodTable::default()).unwrap();
        assert_eq!(cases.len(), 1);
        assert!(cases[0].censored);
        assert_eq!(cases[0].wait, Duration::from_mins(40));
    }

    #[test]
    fn leave_cases() {
        let h = history(fig_timeline());
        let cases = extract_cases(&h, &Target::Leave { min_absence: Duration::from_mins(30) }, &PeriodTable::default()).unwrap();
        // presence onsets at 13:40 and 14:50; the 45-minute absence at 14:05 qualifies
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].wait, Duration::from_mins(25));
        assert!(cases[1].censored);
    }

    #[test]
    fn calendar_status_at_onset() {
        let mut h = history(fig_timeline());
        h.calendar.push(AppointmentRecord {
            id: "m1".into(),
            start: hm(13, 0),
            end: hm(13, 30),
            subject: "review".into(),
            location_field: String::new(),
            organizer: "boss".into(),
            attendees: vec![],
            user_role: crate::store::UserRole::Required,
            response_status: crate::store::ResponseStatus::RespondedYes,
            recurrent: false,
            busy_flag: crate::store::BusyFlag::Busy,
            organized_by_alias: false,
        });
        let cases = extract_cases(&h, &Target::Return { min_stay: Duration::ZERO }, &PeriodTable::default()).unwrap();
        assert_eq!(cases[0].context.calendar_status, CalendarStatus::MeetingScheduled);
        assert_eq!(cases[1].context.calendar_status, CalendarStatus::NoMeeting);
        assert_eq!(cases[0].meeting.as_ref().unwrap().appointment_id, "m1");
    }

    #[test]
    fn app_engagement_cases() {
        let t = |m| hm(9, m);
        let events = vec![
            RawEvent::app_focus(t(0), "u", "desk", true, "mail"),
            RawEvent::app_focus(t(5), "u", "desk", false, "mail"),
            RawEvent::app_focus(t(20), "u", "desk", true, "mail"),
            RawEvent::app_focus(t(22), "u", "desk", false, "mail"),
        ];
        let h = UserHistory::new(events, (t(0), t(60)), vec![], HashMap::new(), vec![], Duration::from_secs(300)).unwrap();
        let cases = extract_cases(&h, &Target::AppEngagement { app: "mail".into() }, &PeriodTable::default()).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].wait, Duration::from_mins(15));
        assert!(cases[1].censored);
        let d = proximal_context(&h.timeline, &h.app_events("mail"), t(30), Landmark::AppFocusEnd).unwrap();
        assert_eq!(d, Duration::from_mins(8));
    }

    fn ctx(day: DayOfWeek, status: CalendarStatus) -> ContextAttributes {
        ContextAttributes::new(
            TimePeriod { period: Period::Morning, day_of_week: day, day_class: day.day_class() },
            status,
        )
    }

    fn case(c: ContextAttributes) -> Case {
        Case { onset: hm(9, 0), context: c, wait: Duration::from_mins(5), censored: false, meeting: None }
    }

    #[test]
    fn backoff_levels() {
        let q = ctx(DayOfWeek::Tuesday, CalendarStatus::NoMeeting);
        let policy = BackoffPolicy::default();
        let forty: Vec<Case> = (0..40).map(|_| case(q.clone())).collect();
        assert_eq!(build_reference_class(&forty, &q, &policy).unwrap().level, 0);

        let mut mixed: Vec<Case> = (0..10).map(|_| case(q.clone())).collect();
        mixed.extend((0..20).map(|_| case(ctx(DayOfWeek::Wednesday, CalendarStatus::NoMeeting))));
        let rc = build_reference_class(&mixed, &q, &policy).unwrap();
        assert_eq!(rc.level, 1);
        assert_eq!(rc.cases.len(), 30);

        assert!(matches!(build_reference_class(&[], &q, &policy), Err(Error::NoData)));
    }

    #[test]
    fn sparse_data_falls_to_last_nonempty_level() {
        let q = ctx(DayOfWeek::Tuesday, CalendarStatus::NoMeeting);
        let few = vec![case(ctx(DayOfWeek::Saturday, CalendarStatus::NoMeeting))];
        let rc = build_reference_class(&few, &q, &BackoffPolicy::default()).unwrap();
        assert_eq!(rc.level, 4);
    }

    #[test]
    fn censored_cases_do_not_count() {
        let q = ctx(DayOfWeek::Tuesday, CalendarStatus::NoMeeting);
        let mut cases: Vec<Case> = (0..30).map(|_| case(q.clone())).collect();
        for c in cases.iter_mut().take(10) {
            c.censored = true;
        }
        let mut p = BackoffPolicy::default();
        assert_eq!(build_reference_class(&cases, &q, &p).unwrap().level, 4);
        assert_eq!(build_reference_class(&cases, &q, &p).unwrap().waits(&p).len(), 20);
        p.include_censored = true;
        assert_eq!(build_reference_class(&cases, &q, &p).unwrap().level, 0);
    }

    #[test]
    fn ladder_must_end_empty() {
        let p = BackoffPolicy { ladder: vec![vec![ContextAttr::Period]], n_min: 1, include_censored: false };
        assert!(p.validate().is_err());
        assert!(BackoffPolicy::default().validate().is_ok());
    }
}
