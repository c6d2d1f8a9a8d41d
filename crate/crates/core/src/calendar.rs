//! Appointment features, heuristic attendance drafts, and the attendance,
//! interruptability and location models built on them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{
    evaluate_holdout, learn_tree, Attribute, Dataset, DecisionTree, HoldoutMetrics, Row, TreeParams,
};
use crate::model::{DayClass, Period, PeriodTable, Timeline};
use crate::store::{
    AnnotationRecord, AnnotationSource, AppointmentRecord, BusyFlag, DirectoryStub, Interruptability,
    ResponseStatus, UserRole,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationBin {
    UpTo30,
    UpTo60,
    UpTo120,
    Over120,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttendeeBin {
    OneToTwo,
    ThreeToFive,
    SixToTen,
    OverTen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrganizerRelation {
    SelfOrganized,
    Manager,
    ManagerOfManager,
    DirectReport,
    Peer,
    Other,
}

/// Keyword table mapping subject lines to a small set of classes. Matching is
/// case-insensitive substring search in table order; no match gives `other`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectTable {
    pub keywords: Vec<(String, String)>,
}

impl SubjectTable {
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, c) in &self.keywords {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out.push("other".into());
        out
    }

    pub fn classify(&self, subject: &str) -> String {
        let s = subject.to_lowercase();
        self.keywords
            .iter()
            .find(|(k, _)| s.contains(&k.to_lowercase()))
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| "other".into())
    }
}

impl Default for SubjectTable {
    fn default() -> Self {
        let kw = [
            ("1:1", "one_on_one"),
            ("one on one", "one_on_one"),
            ("review", "review"),
            ("all hands", "all_hands"),
            ("sync", "sync"),
            ("interview", "interview"),
        ];
        SubjectTable {
            keywords: kw.iter().map(|(k, c)| (k.to_string(), c.to_string())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppointmentFeatures {
    pub organized_by_alias: bool,
    pub duration_bin: DurationBin,
    pub role: UserRole,
    pub response_status: ResponseStatus,
    pub recurrent: bool,
    pub busy_flag: bool,
    pub attendee_count_bin: AttendeeBin,
    pub direct_reports_invited: bool,
    pub organizer_relation: OrganizerRelation,
    pub location_known: bool,
    pub subject_token_class: String,
    pub period: Period,
    pub day_class: DayClass,
}

/// Lookup context shared by feature extraction calls for one user.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub user: &'a str,
    pub directory: &'a DirectoryStub,
    pub taxonomy: &'a PeriodTable,
    pub subjects: &'a SubjectTable,
}

fn organizer_relation(organizer: &str, user: &str, dir: &DirectoryStub) -> OrganizerRelation {
    if organizer == user {
        return OrganizerRelation::SelfOrganized;
    }
    let manager = dir.manager_of(user);
    if manager == Some(organizer) {
        return OrganizerRelation::Manager;
    }
    if manager.and_then(|m| dir.manager_of(m)) == Some(organizer) {
        return OrganizerRelation::ManagerOfManager;
    }
    let org_manager = dir.manager_of(organizer);
    if org_manager == Some(user) {
        return OrganizerRelation::DirectReport;
    }
    if manager.is_some() && org_manager == manager {
        return OrganizerRelation::Peer;
    }
    OrganizerRelation::Other
}

pub fn extract_features(appt: &AppointmentRecord, ctx: &FeatureContext<'_>) -> AppointmentFeatures {
    let mins = appt.end.offset_from(appt.start) as f64 / 60.0;
    let duration_bin = match mins {
        m if m <= 30.0 => DurationBin::UpTo30,
        m if m <= 60.0 => DurationBin::UpTo60,
        m if m <= 120.0 => DurationBin::UpTo120,
        _ => DurationBin::Over120,
    };
    let attendee_count_bin = match appt.attendees.len() {
        0..=2 => AttendeeBin::OneToTwo,
        3..=5 => AttendeeBin::ThreeToFive,
        6..=10 => AttendeeBin::SixToTen,
        _ => AttendeeBin::OverTen,
    };
    let tp = ctx.taxonomy.classify(appt.start);
    AppointmentFeatures {
        organized_by_alias: ctx.directory.is_alias(&appt.organizer),
        duration_bin,
        role: appt.user_role,
        response_status: appt.response_status,
        recurrent: appt.recurrent,
        busy_flag: appt.busy_flag == BusyFlag::Busy,
        attendee_count_bin,
        direct_reports_invited: appt
            .attendees
            .iter()
            .any(|a| ctx.directory.manager_of(a) == Some(ctx.user)),
        organizer_relation: organizer_relation(&appt.organizer, ctx.user, ctx.directory),
        location_known: !appt.location_field.trim().is_empty(),
        subject_token_class: ctx.subjects.classify(&appt.subject),
        period: tp.period,
        day_class: tp.day_class,
    }
}

const NO_YES: &[&str] = &["no", "yes"];

pub fn feature_schema(subjects: &SubjectTable) -> Vec<Attribute> {
    let subject_classes = subjects.classes();
    let subject_refs: Vec<&str> = subject_classes.iter().map(String::as_str).collect();
    vec![
        Attribute::new("organized_by_alias", NO_YES),
        Attribute::new("duration", &["<=30", "31-60", "61-120", ">120"]),
        Attribute::new("role", &["organizer", "required", "optional"]),
        Attribute::new(
            "response_status",
            &["responded_yes", "responded_tentative", "no_response", "no_response_requested"],
        ),
        Attribute::new("recurrent", NO_YES),
        Attribute::new("busy", NO_YES),
        Attribute::new("attendees", &["1-2", "3-5", "6-10", ">10"]),
        Attribute::new("direct_reports_invited", NO_YES),
        Attribute::new(
            "organizer_relation",
            &["self", "manager", "manager_of_manager", "direct_report", "peer", "other"],
        ),
        Attribute::new("location_known", NO_YES),
        Attribute::new("subject", &subject_refs),
        Attribute::new("period", &["morning", "lunchtime", "afternoon", "evening", "night"]),
        Attribute::new("day_class", &["weekday", "weekend"]),
    ]
}

impl AppointmentFeatures {
    pub fn encode(&self, subjects: &SubjectTable) -> Vec<usize> {
        let subject = subjects
            .classes()
            .iter()
            .position(|c| *c == self.subject_token_class)
            .unwrap_or(usize::MAX);
        vec![
            self.organized_by_alias as usize,
            self.duration_bin as usize,
            self.role as usize,
            self.response_status as usize,
            self.recurrent as usize,
            self.busy_flag as usize,
            self.attendee_count_bin as usize,
            self.direct_reports_invited as usize,
            self.organizer_relation as usize,
            self.location_known as usize,
            subject,
            self.period.index(),
            self.day_class.index(),
        ]
    }
}

/// Fraction of each meeting covered by office presence decides a draft:
/// `f >= f_hi` drafts not-attended, `f <= f_lo` drafts attended, anything
/// in between is left for manual labeling.
pub fn draft_attendance_labels(
    calendar: &[AppointmentRecord],
    office: &Timeline,
    f_hi: f64,
    f_lo: f64,
) -> Result<Vec<AnnotationRecord>> {
    if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= 1.0) {
        return Err(Error::InvalidInput(format!("draft thresholds lo={f_lo} hi={f_hi}")));
    }
    let mut out = Vec::new();
    for a in calendar {
        let f = presence_fraction(a, office);
        let attended = if f >= f_hi {
            Some(false)
        } else if f <= f_lo {
            Some(true)
        } else {
            None
        };
        if let Some(attended) = attended {
            out.push(AnnotationRecord {
                appointment_id: a.id.clone(),
                attended: Some(attended),
                interruptability: None,
                location: None,
                source: AnnotationSource::HeuristicDraft,
            });
        }
    }
    Ok(out)
}

/// Share of `[start, end)` covered by present segments.
pub fn presence_fraction(appt: &AppointmentRecord, timeline: &Timeline) -> f64 {
    let len = appt.end.offset_from(appt.start);
    if len <= 0 {
        return 0.0;
    }
    let covered: i64 = timeline
        .segments
        .iter()
        .filter(|s| s.is_present())
        .map(|s| {
            let lo = s.start.max(appt.start);
            let hi = s.end.min(appt.end);
            hi.offset_from(lo).max(0)
        })
        .sum();
    covered as f64 / len as f64
}

/// Which chronological slice of the labeled appointments is held out.
/// `LastN` never holds out more than half of the labeled rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldoutSplit {
    LastN(usize),
    Fraction(f64),
}

impl HoldoutSplit {
    fn holdout_len(self, n: usize) -> usize {
        match self {
            HoldoutSplit::LastN(k) => k.min(n / 2),
            HoldoutSplit::Fraction(f) => ((n as f64) * f.clamp(0.0, 1.0)).round() as usize,
        }
    }
}

/// A tree over appointment features with its encoding table.
#[derive(Debug, Clone, PartialEq)]
pub struct AppointmentModel {
    pub tree: DecisionTree,
    pub subjects: SubjectTable,
}

impl AppointmentModel {
    pub fn predict(&self, appt: &AppointmentRecord, ctx: &FeatureContext<'_>) -> Result<Vec<f64>> {
        let feats = extract_features(appt, ctx);
        self.tree.predict_distribution(&feats.encode(&self.subjects))
    }
}

/// Class 1 is "attended".
pub type AttendanceModel = AppointmentModel;
/// Classes are low, medium, high.
pub type InterruptabilityModel = AppointmentModel;

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: AppointmentModel,
    pub train_size: usize,
    pub metrics: Option<HoldoutMetrics>,
}

fn train_labeled(
    labeled: Vec<(&AppointmentRecord, usize)>,
    classes: Vec<String>,
    ctx: &FeatureContext<'_>,
    params: TreeParams,
    split: HoldoutSplit,
) -> Result<TrainedModel> {
    let schema = feature_schema(ctx.subjects);
    let rows: Vec<Row> = labeled
        .iter()
        .map(|(a, class)| Row { attrs: extract_features(a, ctx).encode(ctx.subjects), class: *class })
        .collect();
    let hold = split.holdout_len(rows.len());
    let (train_rows, hold_rows) = rows.split_at(rows.len() - hold);
    let train = Dataset::new(schema.clone(), classes.clone(), train_rows.to_vec())?;
    let counts = train.class_counts();
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::ModelDegenerate(format!(
            "training split lacks a class (counts {counts:?})"
        )));
    }
    let tree = learn_tree(&train, params)?;
    let metrics = if hold_rows.is_empty() {
        None
    } else {
        Some(evaluate_holdout(&tree, &Dataset::new(schema, classes, hold_rows.to_vec())?)?)
    };
    Ok(TrainedModel {
        model: AppointmentModel { tree, subjects: ctx.subjects.clone() },
        train_size: train_rows.len(),
        metrics,
    })
}

fn chronological<'a>(calendar: &'a [AppointmentRecord]) -> Vec<&'a AppointmentRecord> {
    let mut v: Vec<&AppointmentRecord> = calendar.iter().collect();
    v.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.id.cmp(&b.id)));
    v
}

pub fn train_attendance_model(
    calendar: &[AppointmentRecord],
    annotations: &HashMap<String, AnnotationRecord>,
    ctx: &FeatureContext<'_>,
    params: TreeParams,
    split: HoldoutSplit,
) -> Result<TrainedModel> {
    let labeled = chronological(calendar)
        .into_iter()
        .filter_map(|a| annotations.get(&a.id).and_then(|r| r.attended).map(|y| (a, y as usize)))
        .collect();
    train_labeled(labeled, vec!["not_attended".into(), "attended".into()], ctx, params, split)
}

pub fn train_interruptability_model(
    calendar: &[AppointmentRecord],
    annotations: &HashMap<String, AnnotationRecord>,
    ctx: &FeatureContext<'_>,
    params: TreeParams,
    split: HoldoutSplit,
) -> Result<TrainedModel> {
    let labeled = chronological(calendar)
        .into_iter()
        .filter_map(|a| {
            annotations.get(&a.id).and_then(|r| r.interruptability).map(|i| (a, i.index()))
        })
        .collect();
    train_labeled(
        labeled,
        vec!["low".into(), "medium".into(), "high".into()],
        ctx,
        params,
        split,
    )
}

/// Location model over the distinct annotated location labels.
pub fn train_location_model(
    calendar: &[AppointmentRecord],
    annotations: &HashMap<String, AnnotationRecord>,
    ctx: &FeatureContext<'_>,
    split: HoldoutSplit,
    min_leaf: usize,
) -> Result<TrainedModel> {
    let mut labels: Vec<String> = annotations.values().filter_map(|r| r.location.clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::ModelDegenerate("fewer than two distinct locations".into()));
    }
    let labeled = chronological(calendar)
        .into_iter()
        .filter_map(|a| {
            let loc = annotations.get(&a.id)?.location.as_ref()?;
            Some((a, labels.iter().position(|l| l == loc)?))
        })
        .collect();
    let params = TreeParams { alpha_total: labels.len() as f64, min_leaf };
    train_labeled(labeled, labels, ctx, params, split)
}

/// Probability that the user attends `appt`.
pub fn predict_attendance(
    model: &AttendanceModel,
    appt: &AppointmentRecord,
    ctx: &FeatureContext<'_>,
) -> Result<f64> {
    Ok(model.predict(appt, ctx)?[1])
}

/// (p_low, p_medium, p_high).
pub fn predict_interruptability(
    model: &InterruptabilityModel,
    appt: &AppointmentRecord,
    ctx: &FeatureContext<'_>,
) -> Result<[f64; 3]> {
    let p = model.predict(appt, ctx)?;
    if p.len() != 3 {
        return Err(Error::SchemaMismatch(format!("interruptability model has {} classes", p.len())));
    }
    Ok([p[0], p[1], p[2]])
}

pub fn interruptability_from_index(i: usize) -> Option<Interruptability> {
    Interruptability::ALL.get(i).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PresenceSegment, PresenceState, Timestamp};
    use std::collections::BTreeSet;

    fn directory() -> DirectoryStub {
        let pairs = [("u", "mgr"), ("mgr", "dir"), ("rep", "u"), ("peer", "mgr"), ("x", "other_boss")];
        DirectoryStub::new(
            pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())),
            ["dev-all".to_string()],
        )
        .unwrap()
    }

    fn appt(organizer: &str) -> AppointmentRecord {
        // Tuesday 2024-01-02 10:00-11:00
        let start = Timestamp::from_unix(1_704_189_600);
        AppointmentRecord {
            id: "a1".into(),
            start,
            end: Timestamp::from_unix(1_704_193_200),
            subject: "Weekly Design Review".into(),
            location_field: "Bldg 9/1020".into(),
            organizer: organizer.into(),
            attendees: vec!["u".into(), "rep".into(), "peer".into()],
            user_role: UserRole::Required,
            response_status: ResponseStatus::RespondedTentative,
            recurrent: true,
            busy_flag: BusyFlag::Busy,
            organized_by_alias: false,
        }
    }

    fn with_ctx<T>(f: impl FnOnce(&FeatureContext<'_>) -> T) -> T {
        let dir = directory();
        let tax = PeriodTable::default();
        let subjects = SubjectTable::default();
        f(&FeatureContext { user: "u", directory: &dir, taxonomy: &tax, subjects: &subjects })
    }

    #[test]
    fn relations_from_directory() {
        with_ctx(|ctx| {
            let rel = |o: &str| extract_features(&appt(o), ctx).organizer_relation;
            assert_eq!(rel("u"), OrganizerRelation::SelfOrganized);
            assert_eq!(rel("mgr"), OrganizerRelation::Manager);
            assert_eq!(rel("dir"), OrganizerRelation::ManagerOfManager);
            assert_eq!(rel("rep"), OrganizerRelation::DirectReport);
            assert_eq!(rel("peer"), OrganizerRelation::Peer);
            assert_eq!(rel("x"), OrganizerRelation::Other);
            assert!(extract_features(&appt("dev-all"), ctx).organized_by_alias);
        });
    }

    #[test]
    fn unknown_user_relates_as_other() {
        let dir = directory();
        let tax = PeriodTable::default();
        let subjects = SubjectTable::default();
        let ctx = FeatureContext { user: "stranger", directory: &dir, taxonomy: &tax, subjects: &subjects };
        assert_eq!(extract_features(&appt("mgr"), &ctx).organizer_relation, OrganizerRelation::Other);
    }

    #[test]
    fn field_mapping() {
        with_ctx(|ctx| {
            let f = extract_features(&appt("mgr"), ctx);
            assert_eq!(f.duration_bin, DurationBin::UpTo60);
            assert_eq!(f.attendee_count_bin, AttendeeBin::ThreeToFive);
            assert!(f.direct_reports_invited);
            assert!(f.location_known);
            assert_eq!(f.subject_token_class, "review");
            assert_eq!(f.period, Period::Morning);
            assert_eq!(f.response_status, ResponseStatus::RespondedTentative);
            let codes = f.encode(ctx.subjects);
            let schema = feature_schema(ctx.subjects);
            assert!(codes.iter().zip(&schema).all(|(&v, a)| v < a.arity()));
            for status in [
                ResponseStatus::RespondedYes,
                ResponseStatus::RespondedTentative,
                ResponseStatus::NoResponse,
                ResponseStatus::NoResponseRequested,
            ] {
                let mut a = appt("mgr");
                a.response_status = status;
                assert_eq!(extract_features(&a, ctx).response_status, status);
            }
        });
    }

    fn office(spans: &[(i64, i64)], horizon: (i64, i64)) -> Timeline {
        let mut segments = Vec::new();
        let mut cur = horizon.0;
        for &(s, e) in spans {
            if s > cur {
                segments.push(PresenceSegment {
                    start: Timestamp::from_unix(cur),
                    end: Timestamp::from_unix(s),
                    state: PresenceState::Absent,
                    devices: BTreeSet::new(),
                });
            }
            segments.push(PresenceSegment {
                start: Timestamp::from_unix(s),
                end: Timestamp::from_unix(e),
                state: PresenceState::Present,
                devices: BTreeSet::from(["desk".to_string()]),
            });
            cur = e;
        }
        segments.push(PresenceSegment {
            start: Timestamp::from_unix(cur),
            end: Timestamp::from_unix(horizon.1),
            state: PresenceState::Absent,
            devices: BTreeSet::new(),
        });
        Timeline { horizon: (Timestamp::from_unix(horizon.0), Timestamp::from_unix(horizon.1)), segments }
    }

    #[test]
    fn drafts_from_office_activity() {
        let a = appt("mgr");
        let s = a.start.unix();
        let h = (s - 3600, s + 7200);
        let busy = office(&[(s, s + 45 * 60)], h);
        let d = draft_attendance_labels(&[a.clone()], &busy, 0.5, 0.1).unwrap();
        assert_eq!(d[0].attended, Some(false));
        assert_eq!(d[0].source, AnnotationSource::HeuristicDraft);
        let idle = office(&[], h);
        assert_eq!(draft_attendance_labels(&[a.clone()], &idle, 0.5, 0.1).unwrap()[0].attended, Some(true));
        let partial = office(&[(s, s + 18 * 60)], h);
        assert!(draft_attendance_labels(&[a.clone()], &partial, 0.5, 0.1).unwrap().is_empty());
        assert!(draft_attendance_labels(&[a], &partial, 0.5, 0.5).is_err());
    }

    fn labeled_calendar(n: usize, attended: impl Fn(usize) -> bool) -> (Vec<AppointmentRecord>, HashMap<String, AnnotationRecord>) {
        let mut cal = Vec::new();
        let mut ann = HashMap::new();
        for i in 0..n {
            let mut a = appt(if i % 2 == 0 { "mgr" } else { "dev-all" });
            a.id = format!("m{i}");
            a.start = Timestamp::from_unix(a.start.unix() + i as i64 * 86_400);
            a.end = Timestamp::from_unix(a.end.unix() + i as i64 * 86_400);
            ann.insert(
                a.id.clone(),
                AnnotationRecord {
                    appointment_id: a.id.clone(),
                    attended: Some(attended(i)),
                    interruptability: Some(Interruptability::ALL[i % 3]),
                    location: None,
                    source: AnnotationSource::Manual,
                },
            );
            cal.push(a);
        }
        (cal, ann)
    }

    #[test]
    fn always_attend_model_smoothing() {
        let (cal, ann) = labeled_calendar(12, |_| true);
        with_ctx(|ctx| {
            let params = TreeParams { alpha_total: 2.0, min_leaf: 5 };
            let err = train_attendance_model(&cal, &ann, ctx, params, HoldoutSplit::LastN(2)).unwrap_err();
            assert!(matches!(err, Error::ModelDegenerate(_)));
        });
        // one not-attended row keeps the model trainable; the pure leaf for
        // manager-organized meetings then gives (n+1)/(n+2)
        let (cal, ann) = labeled_calendar(13, |i| i != 1);
        with_ctx(|ctx| {
            let params = TreeParams { alpha_total: 2.0, min_leaf: 5 };
            let m = train_attendance_model(&cal, &ann, ctx, params, HoldoutSplit::LastN(0)).unwrap();
            let leaf = m.model.tree.route(&extract_features(&cal[0], ctx).encode(ctx.subjects)).unwrap();
            let p = predict_attendance(&m.model, &cal[0], ctx).unwrap();
            if leaf.counts[0] == 0 {
                let n = leaf.counts[1] as f64;
                assert!((p - (n + 1.0) / (n + 2.0)).abs() < 1e-12);
            }
            assert!(p > 0.0 && p < 1.0);
        });
    }

    #[test]
    fn interruptability_sums_to_one() {
        let (cal, ann) = labeled_calendar(30, |i| i % 3 != 0);
        with_ctx(|ctx| {
            let m = train_interruptability_model(&cal, &ann, ctx, TreeParams::for_classes(3), HoldoutSplit::LastN(10))
                .unwrap();
            assert_eq!(m.train_size, 20);
            assert_eq!(m.metrics.unwrap().n, 10);
            let p = predict_interruptability(&m.model, &cal[0], ctx).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        });
    }
}
