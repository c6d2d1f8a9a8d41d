//! The query engine: an immutable snapshot of stores and trained models that
//! answers forecast, attendance, interruptability and interruption-cost
//! queries.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::calendar::{
    feature_schema, train_attendance_model, train_interruptability_model, train_location_model,
    AppointmentModel, FeatureContext, SubjectTable, TrainedModel,
};
use crate::cases::{
    build_reference_class, extract_cases, meeting_offsets, proximal_context, BackoffPolicy,
    CalendarStatus, Case, ContextAttributes, Landmark, QueryKind, QuerySpec, Target, UserHistory,
};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::forecast::{
    cdf_from_leaf, empirical_cdf, expected_cost_of_interruption, integrate_meetings,
    truncate_scopes, DurationCdf, InterruptCosts, MeetingTerm, MeetingWeight,
};
use crate::learn::{learn_tree, smoothed, Attribute, Dataset, DecisionTree, DurationBinning, Row, TreeParams};
use crate::model::{DayClass, Duration, EventKind, Period, PeriodTable, PresenceState, Timestamp};
use crate::store::{AppointmentRecord, DirectoryStub, Interruptability, Store};

pub const ATTENDANCE_MODEL: &str = "attendance";
pub const INTERRUPTABILITY_MODEL: &str = "interruptability";
pub const LOCATION_MODEL: &str = "location";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Tree,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub kind: QueryKind,
    pub at: Timestamp,
    /// Proximal context the forecast was conditioned on.
    pub elapsed: Duration,
    pub cdf: DurationCdf,
    pub backoff_level: usize,
    pub n_cases: usize,
    pub estimator: Estimator,
    pub threshold: f64,
    /// Quantile levels and the horizon reached, `None` where unattainable.
    pub quantiles: BTreeMap<String, Option<u64>>,
    pub summary: String,
    pub meeting_terms: Vec<MeetingWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EciResult {
    pub eci: f64,
    pub p_attend: f64,
    pub interruptability: [f64; 3],
    pub c_default: f64,
    pub appointment_id: Option<String>,
    pub period: Period,
    pub day_class: DayClass,
}

/// Explicit values that replace model output in an interruption-cost query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EciOverrides {
    pub appointment_id: Option<String>,
    pub p_attend: Option<f64>,
    pub interruptability: Option<[f64; 3]>,
    pub c_default: Option<f64>,
}

/// Attendance, interruptability and location models for one user, with the
/// smoothed label base rates used when a model could not be trained.
#[derive(Debug, Clone)]
pub struct UserModels {
    pub attendance: Option<AppointmentModel>,
    pub interruptability: Option<AppointmentModel>,
    pub location: Option<AppointmentModel>,
    pub attend_base: f64,
    pub interrupt_base: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub user: String,
    pub model: String,
    pub train_size: usize,
    pub holdout_n: usize,
    pub accuracy: Option<f64>,
    pub log_loss: Option<f64>,
    pub error: Option<String>,
}

/// Holdout calibration for one period and day class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub period: Period,
    pub day_class: DayClass,
    pub n_train: usize,
    pub n_holdout: usize,
    pub max_backoff_level: usize,
    pub sup_distance: f64,
}

struct Background {
    cdf: DurationCdf,
    level: usize,
    n_cases: usize,
    estimator: Estimator,
}

struct UserState {
    history: UserHistory,
    models: UserModels,
    cases: Mutex<HashMap<Target, Arc<Vec<Case>>>>,
}

/// Everything a query needs, fixed at load time. Safe to share across threads.
pub struct Snapshot {
    config: EngineConfig,
    taxonomy: PeriodTable,
    binning: DurationBinning,
    policy: BackoffPolicy,
    costs: InterruptCosts,
    subjects: SubjectTable,
    directory: DirectoryStub,
    users: BTreeMap<String, UserState>,
}

impl std::fmt::Debug for Snapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Snapshot").field("users", &self.users.keys().collect::<Vec<_>>()).finish()
    }
}

fn base_rates(history: &UserHistory) -> (f64, [f64; 3]) {
    let mut attend = [0u64; 2];
    let mut level = [0u64; 3];
    for a in &history.calendar {
        if let Some(r) = history.annotations.get(&a.id) {
            if let Some(y) = r.attended {
                attend[y as usize] += 1;
            }
            if let Some(i) = r.interruptability {
                level[i.index()] += 1;
            }
        }
    }
    let a = smoothed(&attend, 2.0);
    let l = smoothed(&level, 3.0);
    (a[1], [l[0], l[1], l[2]])
}

/// Loads the user's event log, calendar, annotations and devices.
pub fn load_history(store: &Store, user: &str, idle_threshold: Duration) -> Result<UserHistory> {
    let events = store.event_log()?.load_user(user)?;
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f.ts, l.ts),
        _ => return Err(Error::NoData),
    };
    UserHistory::new(
        events,
        (first, last + idle_threshold),
        store.load_full_calendar(user)?,
        store.load_annotations(user)?,
        store.load_devices(user)?,
        idle_threshold,
    )
}

impl Snapshot {
    /// Reads every user from the store. Saved models are used where present;
    /// the rest are trained in memory.
    pub fn load(store: &Store, config: EngineConfig) -> Result<Snapshot> {
        config.validate()?;
        let directory = store.load_directory()?;
        let mut histories = Vec::new();
        let mut saved = HashMap::new();
        for user in store.users()? {
            match load_history(store, &user, config.idle_threshold()) {
                Ok(h) => histories.push((user.clone(), h)),
                Err(Error::NoData) => {
                    debug!(user, "no events; user skipped");
                    continue;
                }
                Err(e) => return Err(e),
            }
            let mut models = HashMap::new();
            for name in [ATTENDANCE_MODEL, INTERRUPTABILITY_MODEL, LOCATION_MODEL] {
                let path = store.model_path(&user, name)?;
                if path.exists() {
                    models.insert(name, DecisionTree::load(&path)?);
                }
            }
            saved.insert(user, models);
        }
        Self::build(config, directory, histories, saved)
    }

    /// Builds a snapshot from in-memory histories, training all models.
    pub fn from_histories(
        config: EngineConfig,
        directory: DirectoryStub,
        histories: Vec<(String, UserHistory)>,
    ) -> Result<Snapshot> {
        Self::build(config, directory, histories, HashMap::new())
    }

    fn build(
        config: EngineConfig,
        directory: DirectoryStub,
        histories: Vec<(String, UserHistory)>,
        mut saved: HashMap<String, HashMap<&'static str, DecisionTree>>,
    ) -> Result<Snapshot> {
        config.validate()?;
        let mut snap = Snapshot {
            taxonomy: config.taxonomy()?,
            binning: config.binning()?,
            policy: config.backoff_policy(),
            costs: config.costs(),
            subjects: config.subjects(),
            config,
            directory,
            users: BTreeMap::new(),
        };
        for (user, history) in histories {
            let mut trees = saved.remove(&user).unwrap_or_default();
            let (models, _) = snap.fit_models(&user, &history, &mut trees)?;
            snap.users.insert(
                user,
                UserState { history, models, cases: Mutex::new(HashMap::new()) },
            );
        }
        Ok(snap)
    }

    fn fit_models(
        &self,
        user: &str,
        history: &UserHistory,
        saved: &mut HashMap<&'static str, DecisionTree>,
    ) -> Result<(UserModels, Vec<TrainReport>)> {
        let ctx = self.feature_ctx(user);
        let schema = feature_schema(&self.subjects);
        let (attend_base, interrupt_base) = base_rates(history);
        let mut reports = Vec::new();
        let mut fit = |name: &'static str, train: &dyn Fn() -> Result<TrainedModel>| -> Result<Option<AppointmentModel>> {
            if let Some(tree) = saved.remove(name) {
                if tree.schema != schema {
                    return Err(Error::SchemaMismatch(format!(
                        "saved {name} model for {user} uses a different feature schema"
                    )));
                }
                return Ok(Some(AppointmentModel { tree, subjects: self.subjects.clone() }));
            }
            let mut report = TrainReport {
                user: user.into(),
                model: name.into(),
                train_size: 0,
                holdout_n: 0,
                accuracy: None,
                log_loss: None,
                error: None,
            };
            let out = match train() {
                Ok(t) => {
                    report.train_size = t.train_size;
                    if let Some(m) = t.metrics {
                        report.holdout_n = m.n;
                        report.accuracy = Some(m.accuracy);
                        report.log_loss = Some(m.log_loss);
                    }
                    Some(t.model)
                }
                Err(e @ (Error::ModelDegenerate(_) | Error::NoData)) => {
                    warn!(user, model = name, "falling back to base rates: {e}");
                    report.error = Some(e.to_string());
                    None
                }
                Err(e) => return Err(e),
            };
            reports.push(report);
            Ok(out)
        };
        let cfg = &self.config.calendar;
        let params = |k: usize| TreeParams { alpha_total: k as f64, min_leaf: cfg.min_leaf };
        let split = self.config.holdout();
        let attendance = fit(ATTENDANCE_MODEL, &|| {
            train_attendance_model(&history.calendar, &history.annotations, &ctx, params(2), split)
        })?;
        let interruptability = fit(INTERRUPTABILITY_MODEL, &|| {
            train_interruptability_model(&history.calendar, &history.annotations, &ctx, params(3), split)
        })?;
        let location = if cfg.location_model {
            fit(LOCATION_MODEL, &|| {
                train_location_model(&history.calendar, &history.annotations, &ctx, split, cfg.min_leaf)
            })?
        } else {
            None
        };
        Ok((
            UserModels { attendance, interruptability, location, attend_base, interrupt_base },
            reports,
        ))
    }

    /// Trains the appointment models for `user` from scratch and saves them
    /// next to the store.
    pub fn train_and_save(store: &Store, config: &EngineConfig, user: &str) -> Result<Vec<TrainReport>> {
        config.validate()?;
        let snap = Snapshot::build(config.clone(), store.load_directory()?, Vec::new(), HashMap::new())?;
        let history = load_history(store, user, config.idle_threshold())?;
        let (models, reports) = snap.fit_models(user, &history, &mut HashMap::new())?;
        for (name, m) in [
            (ATTENDANCE_MODEL, &models.attendance),
            (INTERRUPTABILITY_MODEL, &models.interruptability),
            (LOCATION_MODEL, &models.location),
        ] {
            if let Some(m) = m {
                let path = store.model_path(user, name)?;
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                m.tree.save(&path)?;
            }
        }
        Ok(reports)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn taxonomy(&self) -> &PeriodTable {
        &self.taxonomy
    }

    pub fn users(&self) -> Vec<&str> {
        self.users.keys().map(String::as_str).collect()
    }

    pub fn history(&self, user: &str) -> Result<&UserHistory> {
        Ok(&self.user(user)?.history)
    }

    pub fn models(&self, user: &str) -> Result<&UserModels> {
        Ok(&self.user(user)?.models)
    }

    fn user(&self, user: &str) -> Result<&UserState> {
        self.users.get(user).ok_or_else(|| Error::NotFound(format!("user {user}")))
    }

    fn feature_ctx<'a>(&'a self, user: &'a str) -> FeatureContext<'a> {
        FeatureContext {
            user,
            directory: &self.directory,
            taxonomy: &self.taxonomy,
            subjects: &self.subjects,
        }
    }

    /// All cases for `target`, extracted once per snapshot.
    pub fn cases(&self, user: &str, target: &Target) -> Result<Arc<Vec<Case>>> {
        let state = self.user(user)?;
        if let Some(c) = state.cases.lock().expect("case cache").get(target) {
            return Ok(c.clone());
        }
        let cases = Arc::new(extract_cases(&state.history, target, &self.taxonomy)?);
        state.cases.lock().expect("case cache").insert(target.clone(), cases.clone());
        Ok(cases)
    }

    fn appointment<'a>(&'a self, user: &str, id: &str) -> Result<&'a AppointmentRecord> {
        self.user(user)?
            .history
            .calendar
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::NotFound(format!("appointment {id} for {user}")))
    }

    pub fn attendance(&self, user: &str, appointment_id: &str) -> Result<f64> {
        let appt = self.appointment(user, appointment_id)?;
        self.attendance_for(user, appt)
    }

    fn attendance_for(&self, user: &str, appt: &AppointmentRecord) -> Result<f64> {
        let models = &self.user(user)?.models;
        match &models.attendance {
            Some(m) => crate::calendar::predict_attendance(m, appt, &self.feature_ctx(user)),
            None => Ok(models.attend_base),
        }
    }

    pub fn interruptability(&self, user: &str, appointment_id: &str) -> Result<[f64; 3]> {
        let appt = self.appointment(user, appointment_id)?;
        self.interruptability_for(user, appt)
    }

    fn interruptability_for(&self, user: &str, appt: &AppointmentRecord) -> Result<[f64; 3]> {
        let models = &self.user(user)?.models;
        match &models.interruptability {
            Some(m) => crate::calendar::predict_interruptability(m, appt, &self.feature_ctx(user)),
            None => Ok(models.interrupt_base),
        }
    }

    /// Interruption cost at `at`. The appointment covering `at` (or the one
    /// named in `overrides`) supplies attendance and interruptability; with
    /// no meeting the attendance probability is zero.
    pub fn eci(&self, user: &str, at: Timestamp, overrides: &EciOverrides) -> Result<EciResult> {
        let state = self.user(user)?;
        let appt = match &overrides.appointment_id {
            Some(id) => Some(self.appointment(user, id)?),
            None => state.history.meeting_at(at),
        };
        let (p_model, dist_model) = match appt {
            Some(a) => (self.attendance_for(user, a)?, self.interruptability_for(user, a)?),
            None => (0.0, state.models.interrupt_base),
        };
        let p_attend = overrides.p_attend.unwrap_or(p_model);
        let dist = overrides.interruptability.unwrap_or(dist_model);
        let tp = self.taxonomy.classify(at);
        let costs = match overrides.c_default {
            Some(c) => {
                let mut costs = self.costs.clone();
                costs.default_costs.insert((tp.period, tp.day_class), c);
                costs
            }
            None => self.costs.clone(),
        };
        costs.validate()?;
        let eci = expected_cost_of_interruption(p_attend, dist, &costs, tp.period, tp.day_class)?;
        Ok(EciResult {
            eci,
            p_attend,
            interruptability: dist,
            c_default: costs.default_cost(tp.period, tp.day_class)?,
            appointment_id: appt.map(|a| a.id.clone()),
            period: tp.period,
            day_class: tp.day_class,
        })
    }

    /// Time measured since the query's landmark, checking that the user is
    /// in the state the query presumes.
    fn elapsed_at(&self, history: &UserHistory, at: Timestamp, target: &Target) -> Result<Duration> {
        let expect = |tl: &crate::model::Timeline, state: PresenceState| -> Result<()> {
            let i = tl.segment_at(at).ok_or_else(|| Error::OutsideHorizon(at.to_string()))?;
            if tl.segments[i].state != state {
                return Err(Error::InvalidInput(format!(
                    "user is {:?} at {at}, which the {} query does not presume",
                    tl.segments[i].state,
                    target.kind().name()
                )));
            }
            Ok(())
        };
        match target {
            Target::Return { .. } => {
                expect(&history.timeline, PresenceState::Absent)?;
                proximal_context(&history.timeline, &[], at, Landmark::PresentToAbsent)
            }
            Target::Leave { .. } => {
                expect(&history.timeline, PresenceState::Present)?;
                proximal_context(&history.timeline, &[], at, Landmark::AbsentToPresent)
            }
            Target::DeviceAccess { device } => {
                let tl = history.device_timeline(device)?;
                expect(&tl, PresenceState::Absent)?;
                proximal_context(&tl, &[], at, Landmark::PresentToAbsent)
            }
            Target::AppEngagement { app } => {
                let evs = history.app_events(app);
                if let Some(last) = evs.iter().rev().find(|e| e.ts <= at) {
                    if last.kind == EventKind::AppFocusBegin {
                        return Err(Error::InvalidInput(format!("{app} is in focus at {at}")));
                    }
                }
                proximal_context(&history.timeline, &evs, at, Landmark::AppFocusEnd)
            }
        }
    }

    pub fn forecast(&self, query: &QuerySpec, threshold: Option<f64>) -> Result<ForecastResult> {
        let state = self.user(&query.user)?;
        let history = &state.history;
        let (h0, h1) = history.timeline.horizon;
        let at = query.at;
        let elapsed = match query.elapsed {
            Some(d) => d,
            None if at < h0 || at >= h1 => return Err(Error::OutsideHorizon(at.to_string())),
            None => self.elapsed_at(history, at, &query.target)?,
        };
        let threshold = threshold.unwrap_or(self.config.forecast.confidence_threshold);
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidInput(format!("confidence threshold {threshold}")));
        }

        // background forecast from meeting-free cases
        let all = self.cases(&query.user, &query.target)?;
        let free: Vec<Case> = all
            .iter()
            .filter(|c| c.context.calendar_status == CalendarStatus::NoMeeting)
            .cloned()
            .collect();
        let context = ContextAttributes::new(self.taxonomy.classify(at), CalendarStatus::NoMeeting);
        let bg = self.background(&free, &context)?;
        let (backoff_level, n_cases, estimator) = (bg.level, bg.n_cases, bg.estimator);
        let f0 = bg.cdf.condition_on_elapsed(elapsed)?;

        let mut terms = self.meeting_terms(&query.user, history, at, &query.target)?;
        let cdf = if terms.is_empty() {
            f0
        } else {
            truncate_scopes(&mut terms);
            integrate_meetings(&f0, &terms, self.config.horizon(), self.config.grid_step())?
        };
        debug_assert!(cdf.is_proper());
        if !cdf.is_proper() {
            return Err(Error::InvalidInput("forecast produced an improper CDF".into()));
        }

        let mut levels: Vec<f64> = self.config.forecast.report_quantiles.clone();
        levels.push(threshold);
        let quantiles = levels
            .iter()
            .map(|&p| (format!("{p}"), cdf.quantile(p).ok().map(|d| d.secs())))
            .collect();
        let summary = match cdf.quantile(threshold) {
            Ok(q) => format!(
                "with probability ≥ {threshold}, event within {} minutes",
                q.secs().div_ceil(60)
            ),
            Err(Error::QuantileUnattainable { f_max, .. }) => format!(
                "probability of the event within the modeled horizon is {f_max:.3}, below {threshold}"
            ),
            Err(e) => return Err(e),
        };
        Ok(ForecastResult {
            kind: query.target.kind(),
            at,
            elapsed,
            cdf,
            backoff_level,
            n_cases,
            estimator,
            threshold,
            quantiles,
            summary,
            meeting_terms: terms
                .iter()
                .map(|t| MeetingWeight { appointment_id: t.id.clone(), p_attend: t.p_attend })
                .collect(),
        })
    }

    /// Unconditioned wait distribution for `context` from meeting-free cases.
    fn background(&self, free: &[Case], context: &ContextAttributes) -> Result<Background> {
        let rc = build_reference_class(free, context, &self.policy)?;
        let waits = rc.waits(&self.policy);
        let n_cases = waits.len();
        let (cdf, estimator) = if n_cases >= self.config.learn.n_tree {
            (self.tree_estimate(&rc.cases, context)?, Estimator::Tree)
        } else {
            (empirical_cdf(&waits)?, Estimator::Empirical)
        };
        Ok(Background { cdf, level: rc.level, n_cases, estimator })
    }

    /// Refits the appointment models for `user` from the loaded history and
    /// reports holdout metrics; nothing is saved.
    pub fn evaluate_models(&self, user: &str) -> Result<Vec<TrainReport>> {
        let history = self.history(user)?;
        Ok(self.fit_models(user, history, &mut HashMap::new())?.1)
    }

    /// Chronological holdout check of the background forecasts. The oldest
    /// `train_fraction` of meeting-free cases form the reference classes;
    /// for every period and day class with at least `min_holdout` later
    /// uncensored cases, the count-weighted mixture of forecasts for those
    /// cases is compared with their observed waits.
    pub fn holdout_calibration(
        &self,
        user: &str,
        target: &Target,
        train_fraction: f64,
        min_holdout: usize,
    ) -> Result<Vec<CalibrationRow>> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidInput("train fraction must lie in (0,1)".into()));
        }
        let all = self.cases(user, target)?;
        let mut free: Vec<Case> = all
            .iter()
            .filter(|c| c.context.calendar_status == CalendarStatus::NoMeeting)
            .cloned()
            .collect();
        free.sort_by_key(|c| c.onset);
        let cut = (free.len() as f64 * train_fraction).floor() as usize;
        let (train, test) = free.split_at(cut);
        if train.is_empty() {
            return Err(Error::InsufficientHistory);
        }
        let mut groups: BTreeMap<(Period, DayClass), Vec<&Case>> = BTreeMap::new();
        for c in test.iter().filter(|c| !c.censored) {
            groups.entry((c.context.period.period, c.context.period.day_class)).or_default().push(c);
        }
        let horizon = self.config.horizon().secs();
        let mut rows = Vec::new();
        for ((period, day_class), cases) in groups {
            if cases.len() < min_holdout {
                continue;
            }
            let mut by_context: BTreeMap<usize, (ContextAttributes, usize)> = BTreeMap::new();
            for c in &cases {
                let ctx = ContextAttributes::new(c.context.period, CalendarStatus::NoMeeting);
                by_context.entry(c.context.period.day_of_week.index()).or_insert((ctx, 0)).1 += 1;
            }
            let mut forecasts = Vec::new();
            let mut levels = Vec::new();
            for (ctx, n) in by_context.values() {
                let bg = self.background(train, ctx)?;
                levels.push(bg.level);
                forecasts.push((bg.cdf, *n as f64 / cases.len() as f64));
            }
            let waits: Vec<Duration> = cases.iter().map(|c| c.wait).collect();
            let observed = empirical_cdf(&waits)?;
            let mut probe: Vec<u64> = (0..=horizon / 60).map(|m| m * 60).collect();
            for w in &waits {
                probe.push(w.secs());
                probe.push(w.secs().saturating_sub(1));
            }
            let sup = probe
                .iter()
                .filter(|&&t| t <= horizon)
                .map(|&t| {
                    let t = t as f64;
                    let predicted: f64 = forecasts.iter().map(|(f, w)| w * f.eval(t)).sum();
                    (predicted - observed.eval(t)).abs()
                })
                .fold(0.0, f64::max);
            rows.push(CalibrationRow {
                period,
                day_class,
                n_train: train.len(),
                n_holdout: cases.len(),
                max_backoff_level: levels.into_iter().max().unwrap_or(0),
                sup_distance: sup,
            });
        }
        Ok(rows)
    }

    /// Duration-bin tree over the reference class, read at the query context.
    fn tree_estimate(&self, cases: &[&Case], context: &ContextAttributes) -> Result<DurationCdf> {
        let schema = context_schema();
        let rows: Vec<Row> = cases
            .iter()
            .filter(|c| self.policy.include_censored || !c.censored)
            .map(|c| Row { attrs: encode_context(&c.context), class: self.binning.bin(c.wait) })
            .collect();
        let data = Dataset::new(schema, self.binning.labels(), rows)?;
        let k = self.binning.n_bins();
        let params = TreeParams {
            alpha_total: self.config.learn.alpha_total.unwrap_or(k as f64),
            min_leaf: self.config.learn.min_leaf,
        };
        let tree = learn_tree(&data, params)?;
        let dist = tree.predict_distribution(&encode_context(context))?;
        cdf_from_leaf(&dist, &self.binning)
    }

    fn meeting_terms(
        &self,
        user: &str,
        history: &UserHistory,
        at: Timestamp,
        target: &Target,
    ) -> Result<Vec<MeetingTerm>> {
        let anchor_end = match target {
            Target::Return { .. } => true,
            Target::Leave { .. } => false,
            _ => return Ok(Vec::new()),
        };
        let pad = self.config.padding().secs() as i64;
        let until = at + self.config.horizon();
        let active: Vec<&AppointmentRecord> = history
            .calendar
            .iter()
            .filter(|a| a.start.unix() - pad < until.unix() && at.unix() < a.end.unix() + pad)
            .collect();
        if active.is_empty() {
            return Ok(Vec::new());
        }
        let offsets = meeting_offsets(history, target);
        let mut terms = Vec::new();
        for a in active {
            let anchor = if anchor_end { a.end } else { a.start };
            let shift = anchor.offset_from(at);
            let after: Vec<Duration> = offsets
                .iter()
                .map(|o| shift + o)
                .filter(|&v| v > 0)
                .map(|v| Duration::from_secs(v as u64))
                .collect();
            if after.is_empty() {
                debug!(appointment = a.id, "no attended-meeting cases reach past the query");
                continue;
            }
            terms.push(MeetingTerm {
                id: a.id.clone(),
                scope: (a.start.offset_from(at) - pad, a.end.offset_from(at) + pad),
                cdf: empirical_cdf(&after)?,
                p_attend: self.attendance_for(user, a)?,
            });
        }
        Ok(terms)
    }
}

fn context_schema() -> Vec<Attribute> {
    vec![
        Attribute::new("period", &["morning", "lunchtime", "afternoon", "evening", "night"]),
        Attribute::new(
            "day_of_week",
            &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"],
        ),
        Attribute::new("day_class", &["weekday", "weekend"]),
        Attribute::new("calendar_status", &["no_meeting", "meeting_scheduled"]),
    ]
}

fn encode_context(c: &ContextAttributes) -> Vec<usize> {
    vec![
        c.period.period.index(),
        c.period.day_of_week.index(),
        c.period.day_class.index(),
        c.calendar_status as usize,
    ]
}

/// Most likely interruptability level.
pub fn likely_level(dist: [f64; 3]) -> Interruptability {
    Interruptability::ALL[crate::learn::argmax(&dist)]
}
