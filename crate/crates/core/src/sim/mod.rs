//! Synthetic users: a parametric generator of activity logs, calendars and
//! ground-truth labels, plus a Monte-Carlo oracle that samples the same
//! generative model directly.

mod oracle;
mod rng;

pub use oracle::{monte_carlo_oracle, observed_presence, OracleScenario};
pub use rng::SplitMix64;

use std::collections::{BTreeSet, HashMap};

use rand_core::RngCore;
use rand_distr::{Distribution, Exp, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cases::UserHistory;
use crate::error::{Error, Result};
use crate::model::{DeviceProfile, Duration, EventKind, Period, PeriodTable, RawEvent, Timestamp};
use crate::store::{
    AnnotationRecord, AnnotationSource, AppointmentRecord, BusyFlag, DirectoryStub, Interruptability,
    ResponseStatus, UserRole,
};

const DAY: i64 = 86_400;
/// 2024-01-01, a Monday.
pub const DEFAULT_START_DAY: i64 = 19_723;

/// Normal distribution truncated to `[lo, hi]`, in hours after local midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormal {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        if self.sd == 0.0 {
            return self.mean.clamp(self.lo, self.hi);
        }
        let n = Normal::new(self.mean, self.sd).expect("finite normal");
        for _ in 0..64 {
            let x = n.sample(rng);
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        self.mean.clamp(self.lo, self.hi)
    }
}

/// Breaks arrive as a Poisson process whose rate depends on the period of
/// the day; durations are lognormal with period-specific median and spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakProcess {
    /// Breaks per hour of presence, indexed by period.
    pub rate_per_hour: [f64; 5],
    pub median_mins: [f64; 5],
    pub sigma: [f64; 5],
}

/// Who organizes a simulated meeting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgKind {
    SelfOrganized,
    Manager,
    ManagerOfManager,
    DirectReport,
    Peer,
    Other,
    Alias,
}

impl OrgKind {
    pub const ALL: [OrgKind; 7] = [
        OrgKind::SelfOrganized,
        OrgKind::Manager,
        OrgKind::ManagerOfManager,
        OrgKind::DirectReport,
        OrgKind::Peer,
        OrgKind::Other,
        OrgKind::Alias,
    ];
}

const ROLES: [UserRole; 3] = [UserRole::Organizer, UserRole::Required, UserRole::Optional];
const RESPONSES: [ResponseStatus; 4] = [
    ResponseStatus::RespondedYes,
    ResponseStatus::RespondedTentative,
    ResponseStatus::NoResponse,
    ResponseStatus::NoResponseRequested,
];
/// Attendee-list sizes drawn for each count bin.
const ATTENDEE_SIZES: [usize; 4] = [2, 4, 8, 14];
const DURATIONS_MINS: [u64; 4] = [30, 60, 90, 180];
const SUBJECTS: [&str; 6] =
    ["1:1 catch-up", "Design review", "All hands", "Weekly sync", "Interview loop", "Planning"];

/// Independent categorical draws for each appointment feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMix {
    pub org: [f64; 7],
    /// Required vs optional when the user is not the organizer.
    pub p_optional: f64,
    pub response: [f64; 4],
    pub p_recurrent: f64,
    pub p_busy: f64,
    pub attendee_bin: [f64; 4],
    pub p_reports_invited: f64,
    pub p_location_known: f64,
    pub duration: [f64; 4],
}

impl Default for FeatureMix {
    fn default() -> Self {
        FeatureMix {
            org: [0.05, 0.2, 0.05, 0.15, 0.3, 0.15, 0.1],
            p_optional: 0.3,
            response: [0.4, 0.15, 0.3, 0.15],
            p_recurrent: 0.5,
            p_busy: 0.85,
            attendee_bin: [0.3, 0.35, 0.25, 0.1],
            p_reports_invited: 0.3,
            p_location_known: 0.6,
            duration: [0.4, 0.4, 0.15, 0.05],
        }
    }
}

/// Planted attendance rule: `P(attend) = σ(intercept + org + role + response + busy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceRule {
    pub intercept: f64,
    pub org: [f64; 7],
    pub role: [f64; 3],
    pub response: [f64; 4],
    pub busy: f64,
}

impl Default for AttendanceRule {
    fn default() -> Self {
        AttendanceRule {
            intercept: 0.5,
            org: [3.0, 3.0, 2.5, 1.5, 0.5, -1.5, -4.0],
            role: [0.0, 0.5, -4.0],
            response: [1.0, -1.0, 0.0, 0.0],
            busy: 0.0,
        }
    }
}

/// Planted interruptability rule: softmax over (low, medium, high) of summed
/// logits from organizer kind, role and attendee-count bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptRule {
    pub org: [[f64; 3]; 7],
    pub role: [[f64; 3]; 3],
    pub attendee_bin: [[f64; 3]; 4],
}

impl Default for InterruptRule {
    fn default() -> Self {
        InterruptRule {
            org: [
                [3.0, 0.0, 0.0],
                [4.0, 1.0, 0.0],
                [4.0, 1.0, 0.0],
                [0.0, 2.5, 0.0],
                [0.0, 2.0, 0.5],
                [0.0, 0.5, 2.0],
                [0.0, 0.0, 4.0],
            ],
            role: [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 3.0]],
            attendee_bin: [[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 1.5]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub name: String,
    pub user: String,
    pub seed: u64,
    pub start_day: i64,
    pub arrival: TruncNormal,
    pub departure: TruncNormal,
    pub weekend_work_prob: f64,
    pub breaks: BreakProcess,
    pub meetings_per_day: f64,
    /// Attended meetings take the user away from the desk.
    pub meetings_off_desk: bool,
    pub features: FeatureMix,
    pub attendance: AttendanceRule,
    pub interruptability: InterruptRule,
    pub devices: Vec<DeviceProfile>,
    pub event_spacing_secs: u64,
}

fn desk() -> DeviceProfile {
    DeviceProfile {
        device: "desk".into(),
        location: "office".into(),
        capabilities: BTreeSet::from(["keyboard".to_string(), "display".to_string()]),
    }
}

impl UserProfile {
    pub fn default_profile(seed: u64) -> Self {
        UserProfile {
            name: "default".into(),
            user: "alice".into(),
            seed,
            start_day: DEFAULT_START_DAY,
            arrival: TruncNormal { mean: 8.5, sd: 0.5, lo: 7.0, hi: 10.0 },
            departure: TruncNormal { mean: 17.5, sd: 0.75, lo: 15.5, hi: 20.0 },
            weekend_work_prob: 0.0,
            breaks: BreakProcess {
                rate_per_hour: [1.3, 1.0, 1.2, 1.0, 0.0],
                median_mins: [20.0, 35.0, 15.0, 15.0, 10.0],
                sigma: [0.5, 0.4, 0.6, 0.6, 0.5],
            },
            meetings_per_day: 1.5,
            meetings_off_desk: true,
            features: FeatureMix::default(),
            attendance: AttendanceRule::default(),
            interruptability: InterruptRule::default(),
            devices: vec![desk()],
            event_spacing_secs: 60,
        }
    }

    /// Short morning breaks and long lunchtime absences.
    pub fn lunch_absentee(seed: u64) -> Self {
        let mut p = Self::default_profile(seed);
        p.name = "lunch_absentee".into();
        p.user = "bob".into();
        p.breaks = BreakProcess {
            rate_per_hour: [2.0, 1.5, 1.2, 1.0, 0.0],
            median_mins: [12.0, 60.0, 12.0, 15.0, 10.0],
            sigma: [0.5, 0.4, 0.5, 0.6, 0.5],
        };
        p
    }

    pub fn early_bird(seed: u64) -> Self {
        let mut p = Self::default_profile(seed);
        p.name = "early_bird".into();
        p.user = "carol".into();
        p.arrival = TruncNormal { mean: 7.0, sd: 0.4, lo: 6.0, hi: 8.5 };
        p.departure = TruncNormal { mean: 15.5, sd: 0.5, lo: 14.0, hi: 17.0 };
        p.breaks.median_mins = [25.0, 30.0, 20.0, 15.0, 10.0];
        p.breaks.rate_per_hour = [1.0, 1.0, 1.0, 0.5, 0.0];
        p
    }

    pub fn meeting_heavy(seed: u64) -> Self {
        let mut p = Self::default_profile(seed);
        p.name = "meeting_heavy".into();
        p.user = "dave".into();
        p.arrival = TruncNormal { mean: 8.0, sd: 0.4, lo: 7.0, hi: 9.0 };
        p.meetings_per_day = 3.5;
        p.breaks.rate_per_hour = [1.2, 1.0, 1.0, 1.0, 0.0];
        p
    }

    pub fn frequent_breaks(seed: u64) -> Self {
        let mut p = Self::default_profile(seed);
        p.name = "frequent_breaks".into();
        p.user = "erin".into();
        p.breaks = BreakProcess {
            rate_per_hour: [2.5, 2.0, 2.5, 1.5, 0.0],
            median_mins: [16.0, 25.0, 10.0, 12.0, 10.0],
            sigma: [0.7, 0.5, 0.7, 0.6, 0.5],
        };
        p
    }

    /// The five built-in profiles.
    pub fn catalog(seed: u64) -> Vec<UserProfile> {
        vec![
            Self::default_profile(seed),
            Self::lunch_absentee(seed.wrapping_add(1)),
            Self::early_bird(seed.wrapping_add(2)),
            Self::meeting_heavy(seed.wrapping_add(3)),
            Self::frequent_breaks(seed.wrapping_add(4)),
        ]
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        Self::catalog(seed)
            .into_iter()
            .find(|p| p.name == name)
            .map(|mut p| {
                p.seed = seed;
                p
            })
            .ok_or_else(|| Error::NotFound(format!("simulation profile {name}")))
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let probs_ok = |xs: &[f64]| {
            xs.iter().all(|p| (0.0..=1.0).contains(p)) && (xs.iter().sum::<f64>() - 1.0).abs() < 1e-9
        };
        let f = &self.features;
        let ok = probs_ok(&f.org)
            && probs_ok(&f.response)
            && probs_ok(&f.attendee_bin)
            && probs_ok(&f.duration)
            && [f.p_optional, f.p_busy, f.p_recurrent, f.p_reports_invited, f.p_location_known]
                .iter()
                .all(|p| (0.0..=1.0).contains(p))
            && all_finite(&self.attendance.org)
            && all_finite(&self.attendance.role)
            && all_finite(&self.attendance.response)
            && self.attendance.intercept.is_finite()
            && self.attendance.busy.is_finite()
            && self.breaks.rate_per_hour.iter().all(|r| r.is_finite() && *r >= 0.0)
            && self.breaks.median_mins.iter().all(|m| m.is_finite() && *m > 0.0)
            && self.breaks.sigma.iter().all(|s| s.is_finite() && *s >= 0.0)
            && self.meetings_per_day >= 0.0
            && (0.0..=1.0).contains(&self.weekend_work_prob)
            && self.arrival.lo < self.arrival.hi
            && self.departure.lo < self.departure.hi
            && self.arrival.hi < self.departure.lo
            && self.event_spacing_secs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("profile {} is not proper", self.name)))
        }
    }

    fn person(&self, role: &str) -> String {
        format!("{}-{role}", self.user)
    }

    pub fn organizer_id(&self, org: OrgKind) -> String {
        match org {
            OrgKind::SelfOrganized => self.user.clone(),
            OrgKind::Manager => self.person("mgr"),
            OrgKind::ManagerOfManager => self.person("director"),
            OrgKind::DirectReport => self.person("rep2"),
            OrgKind::Peer => self.person("peer1"),
            OrgKind::Other => self.person("ext1"),
            OrgKind::Alias => "team-all".into(),
        }
    }

    /// Org chart around the user: manager, director, two reports, two peers
    /// and an outsider, plus the shared aliases.
    pub fn directory_entries(&self) -> (Vec<(String, String)>, Vec<String>) {
        let mgr = self.person("mgr");
        let managers = vec![
            (self.user.clone(), mgr.clone()),
            (mgr.clone(), self.person("director")),
            (self.person("rep1"), self.user.clone()),
            (self.person("rep2"), self.user.clone()),
            (self.person("peer1"), mgr.clone()),
            (self.person("peer2"), mgr),
            (self.person("ext1"), self.person("ext-boss")),
        ];
        (managers, vec!["team-all".into(), "dev-all".into()])
    }
}

/// Directory covering all given profiles.
pub fn directory_for(profiles: &[&UserProfile]) -> Result<DirectoryStub> {
    let mut managers = Vec::new();
    let mut aliases = BTreeSet::new();
    for p in profiles {
        let (m, a) = p.directory_entries();
        managers.extend(m);
        aliases.extend(a);
    }
    DirectoryStub::new(managers, aliases)
}

/// The categorical draws behind one simulated appointment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingDraw {
    pub org: OrgKind,
    pub role: UserRole,
    pub response: ResponseStatus,
    pub recurrent: bool,
    pub busy: bool,
    pub attendee_bin: usize,
    pub reports_invited: bool,
    pub location_known: bool,
    pub subject: usize,
    pub duration_mins: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeeting {
    pub record: AppointmentRecord,
    pub draw: MeetingDraw,
    pub attended: bool,
    pub interruptability: Interruptability,
}

/// One simulated day. Times are unix seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDay {
    pub day: i64,
    /// Arrival and departure, when the user works that day.
    pub work: Option<(i64, i64)>,
    /// Away intervals inside the working span, merged and sorted.
    pub absences: Vec<(i64, i64)>,
    pub meetings: Vec<SimMeeting>,
}

impl SimDay {
    /// Ground-truth present intervals: the working span minus absences.
    pub fn present_intervals(&self) -> Vec<(i64, i64)> {
        let Some((a, b)) = self.work else { return Vec::new() };
        let mut out = Vec::new();
        let mut cur = a;
        for &(s, e) in &self.absences {
            if s > cur {
                out.push((cur, s));
            }
            cur = cur.max(e);
        }
        if cur < b {
            out.push((cur, b));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingTruth {
    pub appointment_id: String,
    pub attended: bool,
    pub interruptability: Interruptability,
}

/// Labels and generative parameters behind a simulated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub profile: UserProfile,
    pub meetings: Vec<MeetingTruth>,
    pub days: Vec<SimDay>,
}

impl GroundTruth {
    /// Manual annotations carrying the true labels.
    pub fn annotations(&self) -> Vec<AnnotationRecord> {
        self.meetings
            .iter()
            .map(|m| AnnotationRecord {
                appointment_id: m.appointment_id.clone(),
                attended: Some(m.attended),
                interruptability: Some(m.interruptability),
                location: None,
                source: AnnotationSource::Manual,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<RawEvent>,
    pub calendar: Vec<AppointmentRecord>,
    pub truth: GroundTruth,
}

impl SimOutput {
    /// History with ground-truth annotations, coalesced with `idle_threshold`.
    pub fn history(&self, idle_threshold: Duration) -> Result<UserHistory> {
        let (first, last) = match (self.events.first(), self.events.last()) {
            (Some(f), Some(l)) => (f.ts, l.ts),
            _ => return Err(Error::NoData),
        };
        let annotations: HashMap<String, AnnotationRecord> = self
            .truth
            .annotations()
            .into_iter()
            .map(|a| (a.appointment_id.clone(), a))
            .collect();
        UserHistory::new(
            self.events.clone(),
            (first, last + idle_threshold),
            self.calendar.clone(),
            annotations,
            self.truth.profile.devices.clone(),
            idle_threshold,
        )
    }
}

fn categorical(rng: &mut SplitMix64, probs: &[f64]) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(l: [f64; 3]) -> [f64; 3] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = l.map(|x| (x - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

impl AttendanceRule {
    pub fn probability(&self, d: &MeetingDraw) -> f64 {
        let role = ROLES.iter().position(|r| *r == d.role).unwrap();
        let resp = RESPONSES.iter().position(|r| *r == d.response).unwrap();
        let org = OrgKind::ALL.iter().position(|o| *o == d.org).unwrap();
        sigmoid(
            self.intercept
                + self.org[org]
                + self.role[role]
                + self.response[resp]
                + if d.busy { self.busy } else { 0.0 },
        )
    }
}

impl InterruptRule {
    pub fn distribution(&self, d: &MeetingDraw) -> [f64; 3] {
        let role = ROLES.iter().position(|r| *r == d.role).unwrap();
        let org = OrgKind::ALL.iter().position(|o| *o == d.org).unwrap();
        let mut l = [0.0; 3];
        for k in 0..3 {
            l[k] = self.org[org][k] + self.role[role][k] + self.attendee_bin[d.attendee_bin][k];
        }
        softmax(l)
    }
}

fn draw_features(mix: &FeatureMix, rng: &mut SplitMix64) -> MeetingDraw {
    let org = OrgKind::ALL[categorical(rng, &mix.org)];
    let optional = rng.uniform() < mix.p_optional;
    let role = match (org, optional) {
        (OrgKind::SelfOrganized, _) => UserRole::Organizer,
        (_, true) => UserRole::Optional,
        (_, false) => UserRole::Required,
    };
    MeetingDraw {
        org,
        role,
        response: RESPONSES[categorical(rng, &mix.response)],
        recurrent: rng.uniform() < mix.p_recurrent,
        busy: rng.uniform() < mix.p_busy,
        attendee_bin: categorical(rng, &mix.attendee_bin),
        reports_invited: rng.uniform() < mix.p_reports_invited,
        location_known: rng.uniform() < mix.p_location_known,
        subject: (rng.next_u64() % SUBJECTS.len() as u64) as usize,
        duration_mins: DURATIONS_MINS[categorical(rng, &mix.duration)],
    }
}

/// Draws features and labels for a meeting starting at `start`.
fn draw_meeting(profile: &UserProfile, rng: &mut SplitMix64, id: String, start: i64) -> SimMeeting {
    let draw = draw_features(&profile.features, rng);
    let attended = rng.uniform() < profile.attendance.probability(&draw);
    let level = categorical(rng, &profile.interruptability.distribution(&draw));
    let mut attendees = vec![profile.user.clone()];
    if draw.reports_invited {
        attendees.push(profile.person("rep1"));
    }
    let mut g = 0;
    while attendees.len() < ATTENDEE_SIZES[draw.attendee_bin] {
        attendees.push(format!("guest{g}"));
        g += 1;
    }
    let record = AppointmentRecord {
        id,
        start: Timestamp::from_unix(start),
        end: Timestamp::from_unix(start + draw.duration_mins as i64 * 60),
        subject: SUBJECTS[draw.subject].into(),
        location_field: if draw.location_known { "Bldg 9/1020".into() } else { String::new() },
        organizer: profile.organizer_id(draw.org),
        attendees,
        user_role: draw.role,
        response_status: draw.response,
        recurrent: draw.recurrent,
        busy_flag: if draw.busy { BusyFlag::Busy } else { BusyFlag::Free },
        organized_by_alias: draw.org == OrgKind::Alias,
    };
    SimMeeting { record, draw, attended, interruptability: Interruptability::ALL[level] }
}

/// Non-overlapping meetings on half-hour slots between 09:00 and 16:00.
fn draw_day_meetings(profile: &UserProfile, rng: &mut SplitMix64, day: i64, counter: &mut u64) -> Vec<SimMeeting> {
    if profile.meetings_per_day <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(profile.meetings_per_day).expect("positive rate").sample(rng) as usize;
    let mut out: Vec<SimMeeting> = Vec::new();
    for _ in 0..n {
        let slot = (rng.next_u64() % 15) as i64;
        let start = day * DAY + 9 * 3600 + slot * 1800;
        let m = draw_meeting(profile, rng, format!("{}-m{:05}", profile.user, *counter), start);
        *counter += 1;
        let clash = out
            .iter()
            .any(|o| o.record.start < m.record.end && m.record.start < o.record.end);
        if !clash {
            out.push(m);
        }
    }
    out.sort_by_key(|m| m.record.start);
    out
}

fn merge(mut spans: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    spans.sort();
    let mut out: Vec<(i64, i64)> = Vec::new();
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Simulates one day from its own random stream.
pub fn simulate_day(profile: &UserProfile, rng: &mut SplitMix64, day: i64, counter: &mut u64) -> SimDay {
    let table = PeriodTable::default();
    let weekend = crate::model::DayOfWeek::from_epoch_day(day).day_class() == crate::model::DayClass::Weekend;
    let works = !weekend || rng.uniform() < profile.weekend_work_prob;
    if !works {
        return SimDay { day, work: None, absences: Vec::new(), meetings: Vec::new() };
    }
    let to_ts = |hours: f64| day * DAY + (hours * 3600.0).round() as i64;
    let a = to_ts(profile.arrival.sample(rng));
    let b = to_ts(profile.departure.sample(rng));
    let meetings = draw_day_meetings(profile, rng, day, counter);

    let rates = profile.breaks.rate_per_hour;
    let r_max = rates.iter().cloned().fold(0.0, f64::max);
    let mut absences = Vec::new();
    if r_max > 0.0 {
        let gap = Exp::new(r_max / 3600.0).expect("positive rate");
        let mut t = a as f64;
        loop {
            t += gap.sample(rng);
            if t >= b as f64 {
                break;
            }
            let p = table.classify(Timestamp::from_unix(t as i64)).period.index();
            if rng.uniform() * r_max < rates[p] {
                let median = profile.breaks.median_mins[p] * 60.0;
                let dur = LogNormal::new(median.ln(), profile.breaks.sigma[p]).expect("lognormal").sample(rng);
                absences.push((t as i64, (t + dur) as i64));
                t += dur;
            }
        }
    }
    if profile.meetings_off_desk {
        absences.extend(meetings.iter().filter(|m| m.attended).map(|m| (m.record.start.unix(), m.record.end.unix())));
    }
    let absences = merge(absences)
        .into_iter()
        .map(|(s, e)| (s.max(a), e.min(b)))
        .filter(|(s, e)| s < e)
        .collect();
    SimDay { day, work: Some((a, b)), absences, meetings }
}

/// Activity events every `spacing` seconds through each present interval,
/// plus one at its end.
pub fn emit_events(profile: &UserProfile, day: &SimDay, out: &mut Vec<RawEvent>) {
    let spacing = profile.event_spacing_secs as i64;
    let device = profile.devices.first().map(|d| d.device.as_str()).unwrap_or("desk");
    for (u, v) in day.present_intervals() {
        let mut t = u;
        while t < v {
            out.push(RawEvent::new(Timestamp::from_unix(t), &profile.user, device, EventKind::Activity));
            t += spacing;
        }
        out.push(RawEvent::new(Timestamp::from_unix(v), &profile.user, device, EventKind::Activity));
    }
}

/// Simulates `days` consecutive days from the profile's start day.
pub fn generate_user(profile: &UserProfile, days: u32) -> Result<SimOutput> {
    if days == 0 {
        return Err(Error::InvalidInput("days must be at least 1".into()));
    }
    profile.validate()?;
    let mut counter = 0;
    let mut events = Vec::new();
    let mut calendar = Vec::new();
    let mut meetings = Vec::new();
    let mut sim_days = Vec::new();
    for i in 0..days as i64 {
        let day = profile.start_day + i;
        let mut rng = SplitMix64::derive(profile.seed, day as u64);
        let d = simulate_day(profile, &mut rng, day, &mut counter);
        emit_events(profile, &d, &mut events);
        for m in &d.meetings {
            calendar.push(m.record.clone());
            meetings.push(MeetingTruth {
                appointment_id: m.record.id.clone(),
                attended: m.attended,
                interruptability: m.interruptability,
            });
        }
        sim_days.push(d);
    }
    Ok(SimOutput {
        events,
        calendar,
        truth: GroundTruth { profile: profile.clone(), meetings, days: sim_days },
    })
}

/// The first `count` appointments of a calendar drawn on consecutive
/// workdays, in chronological order, from a stream independent of
/// [`generate_user`].
pub fn generate_appointments(profile: &UserProfile, count: usize) -> Result<Vec<SimMeeting>> {
    profile.validate()?;
    if profile.meetings_per_day <= 0.0 {
        return Err(Error::InvalidInput("profile schedules no meetings".into()));
    }
    let mut rng = SplitMix64::derive(profile.seed, 0xCA1E_0DA2);
    let mut counter = 0;
    let mut out = Vec::with_capacity(count);
    let mut day = profile.start_day;
    while out.len() < count {
        if crate::model::DayOfWeek::from_epoch_day(day).day_class() == crate::model::DayClass::Weekday {
            out.extend(draw_day_meetings(profile, &mut rng, day, &mut counter));
        }
        day += 1;
    }
    out.truncate(count);
    Ok(out)
}

/// Bayes-optimal accuracy of predicting attendance from the appointment
/// features, by enumerating every combination of the features the planted
/// rule reads.
pub fn bayes_attendance_accuracy(profile: &UserProfile) -> f64 {
    let f = &profile.features;
    let mut acc = 0.0;
    for (oi, &org) in OrgKind::ALL.iter().enumerate() {
        let roles: Vec<(UserRole, f64)> = if org == OrgKind::SelfOrganized {
            vec![(UserRole::Organizer, 1.0)]
        } else {
            vec![(UserRole::Required, 1.0 - f.p_optional), (UserRole::Optional, f.p_optional)]
        };
        for (role, pr) in roles {
            for (ri, &response) in RESPONSES.iter().enumerate() {
                for (busy, pb) in [(true, f.p_busy), (false, 1.0 - f.p_busy)] {
                    let d = MeetingDraw {
                        org,
                        role,
                        response,
                        recurrent: false,
                        busy,
                        attendee_bin: 0,
                        reports_invited: false,
                        location_known: false,
                        subject: 0,
                        duration_mins: 30,
                    };
                    let p = profile.attendance.probability(&d);
                    acc += f.org[oi] * pr * f.response[ri] * pb * p.max(1.0 - p);
                }
            }
        }
    }
    acc
}

/// Bayes-optimal accuracy for the three-level interruptability label.
pub fn bayes_interruptability_accuracy(profile: &UserProfile) -> f64 {
    let f = &profile.features;
    let mut acc = 0.0;
    for (oi, &org) in OrgKind::ALL.iter().enumerate() {
        let roles: Vec<(UserRole, f64)> = if org == OrgKind::SelfOrganized {
            vec![(UserRole::Organizer, 1.0)]
        } else {
            vec![(UserRole::Required, 1.0 - f.p_optional), (UserRole::Optional, f.p_optional)]
        };
        for (role, pr) in roles {
            for (bi, &pbin) in f.attendee_bin.iter().enumerate() {
                let d = MeetingDraw {
                    org,
                    role,
                    response: ResponseStatus::RespondedYes,
                    recurrent: false,
                    busy: true,
                    attendee_bin: bi,
                    reports_invited: false,
                    location_known: false,
                    subject: 0,
                    duration_mins: 30,
                };
                let p = profile.interruptability.distribution(&d);
                acc += f.org[oi] * pr * pbin * p.iter().cloned().fold(0.0, f64::max);
            }
        }
    }
    acc
}

/// Period of a unix time under the default taxonomy.
pub fn period_of(ts: i64) -> Period {
    PeriodTable::default().classify(Timestamp::from_unix(ts)).period
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let p = UserProfile::default_profile(7);
        let a = generate_user(&p, 20).unwrap();
        let b = generate_user(&p, 20).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.calendar, b.calendar);
        let c = generate_user(&UserProfile::default_profile(8), 20).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn no_breaks_no_meetings_single_block() {
        let mut p = UserProfile::default_profile(3);
        p.breaks.rate_per_hour = [0.0; 5];
        p.meetings_per_day = 0.0;
        let out = generate_user(&p, 7).unwrap();
        for d in &out.truth.days {
            let present = d.present_intervals();
            match d.work {
                Some((a, b)) => assert_eq!(present, vec![(a, b)]),
                None => assert!(present.is_empty()),
            }
        }
        let h = out.history(Duration::from_secs(300)).unwrap();
        let present = h.timeline.segments.iter().filter(|s| s.is_present()).count();
        assert_eq!(present, 5);
    }

    #[test]
    fn events_spaced_within_a_minute() {
        let out = generate_user(&UserProfile::default_profile(1), 3).unwrap();
        for d in &out.truth.days {
            for (u, v) in d.present_intervals() {
                let ts: Vec<i64> = out
                    .events
                    .iter()
                    .map(|e| e.ts.unix())
                    .filter(|&t| u <= t && t <= v)
                    .collect();
                assert!(ts.windows(2).all(|w| w[1] - w[0] <= 60));
            }
        }
    }

    #[test]
    fn appointments_match_directory_features() {
        let p = UserProfile::default_profile(5);
        let dir = directory_for(&[&p]).unwrap();
        let table = PeriodTable::default();
        let subjects = crate::calendar::SubjectTable::default();
        let ctx = crate::calendar::FeatureContext {
            user: &p.user,
            directory: &dir,
            taxonomy: &table,
            subjects: &subjects,
        };
        use crate::calendar::OrganizerRelation as R;
        for m in generate_appointments(&p, 200).unwrap() {
            let f = crate::calendar::extract_features(&m.record, &ctx);
            let want = match m.draw.org {
                OrgKind::SelfOrganized => R::SelfOrganized,
                OrgKind::Manager => R::Manager,
                OrgKind::ManagerOfManager => R::ManagerOfManager,
                OrgKind::DirectReport => R::DirectReport,
                OrgKind::Peer => R::Peer,
                OrgKind::Other | OrgKind::Alias => R::Other,
            };
            assert_eq!(f.organizer_relation, want);
            assert_eq!(f.organized_by_alias, m.draw.org == OrgKind::Alias);
            assert_eq!(f.attendee_count_bin as usize, m.draw.attendee_bin);
            assert_eq!(f.direct_reports_invited, m.draw.reports_invited);
        }
    }

    #[test]
    fn bayes_rates_are_probabilities() {
        let p = UserProfile::default_profile(0);
        let a = bayes_attendance_accuracy(&p);
        let i = bayes_interruptability_accuracy(&p);
        assert!(a > 0.5 && a < 1.0, "{a}");
        assert!(i > 1.0 / 3.0 && i < 1.0, "{i}");
    }
}
