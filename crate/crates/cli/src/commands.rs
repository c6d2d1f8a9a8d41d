use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use presence_core::calendar::draft_attendance_labels;
use presence_core::cases::{DevicePredicate, Target};
use presence_core::config::EngineConfig;
use presence_core::engine::{load_history, Snapshot};
use presence_core::forecast::DurationCdf;
use presence_core::model::{DeviceProfile, Duration, RawEvent, Timestamp};
use presence_core::sim::{directory_for, generate_user, UserProfile};
use presence_core::store::{
    read_records, AnnotationRecord, AnnotationSource, AppointmentRecord, DirectoryLine,
    DirectoryStub, Interruptability, Store,
};
use presence_core::wire::{handle, Endpoint, WireQuery, WireResponse};
use presence_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::*;

pub fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p),
        None => Ok(EngineConfig::default()),
    }
}

fn read_all<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::NotFound(path.display().to_string()));
    }
    let loaded = read_records(path)?;
    if loaded.dropped > 0 {
        return Err(Error::InvalidInput(format!(
            "{} ends in an incomplete line",
            path.display()
        )));
    }
    Ok(loaded.records)
}

/// The named user, or the only user in the store.
fn resolve_user(store: &Store, user: Option<&str>) -> Result<String> {
    if let Some(u) = user {
        return Ok(u.to_string());
    }
    let users = store.users()?;
    match users.as_slice() {
        [only] => Ok(only.clone()),
        [] => Err(Error::NoData),
        _ => Err(Error::InvalidInput(format!("the store holds several users; pass --user ({users:?})"))),
    }
}

fn need_user(user: &Option<String>, what: &str) -> Result<String> {
    user.clone().ok_or_else(|| Error::InvalidInput(format!("--{what} needs --user")))
}

pub fn ingest(store: &Store, a: &IngestArgs) -> Result<String> {
    let mut report = Vec::new();
    if let Some(p) = &a.directory {
        let lines: Vec<DirectoryLine> = read_all(p)?;
        let dir = DirectoryStub::from_lines(lines)?;
        store.write_directory(&dir)?;
        report.push(format!("directory: {} entries", dir.lines().len()));
    }
    if let Some(p) = &a.events {
        let events: Vec<RawEvent> = read_all(p)?;
        let n = store.event_log()?.append_events(&events)?;
        report.push(format!("events: {n}"));
    }
    if let Some(p) = &a.calendar {
        let user = need_user(&a.user, "calendar")?;
        let appts: Vec<AppointmentRecord> = read_all(p)?;
        let n = store.append_calendar(&user, &appts)?;
        report.push(format!("calendar: {n} appointments for {user}"));
    }
    if let Some(p) = &a.annotations {
        let user = need_user(&a.user, "annotations")?;
        let records: Vec<AnnotationRecord> = read_all(p)?;
        let n = store.append_annotations(&user, &records)?;
        report.push(format!("annotations: {n} for {user}"));
    }
    if let Some(p) = &a.devices {
        let user = need_user(&a.user, "devices")?;
        let devices: Vec<DeviceProfile> = read_all(p)?;
        let n = store.append_devices(&user, &devices)?;
        report.push(format!("devices: {n} for {user}"));
    }
    if report.is_empty() {
        return Err(Error::InvalidInput("nothing to ingest".into()));
    }
    Ok(report.join("\n"))
}

pub fn coalesce(store: &Store, config: &EngineConfig, a: &CoalesceArgs) -> Result<String> {
    let user = resolve_user(store, a.user.as_deref())?;
    let history = load_history(store, &user, config.idle_threshold())?;
    let from = a.from.as_deref().map(Timestamp::parse_rfc3339).transpose()?;
    let to = a.to.as_deref().map(Timestamp::parse_rfc3339).transpose()?;
    let mut out = String::new();
    for s in &history.timeline.segments {
        if from.is_some_and(|f| s.end <= f) || to.is_some_and(|t| s.start >= t) {
            continue;
        }
        out.push_str(&serde_json::to_string(s).expect("segments serialize"));
        out.push('\n');
    }
    Ok(out)
}

/// One editable line of an annotation form. Fill in `attended`,
/// `interruptability` or `location` and ingest the file with
/// `--annotations`; the appointment fields are ignored on the way back in.
/// Prefilled drafts stay drafts until `source` is set to `manual`.
#[derive(Debug, Serialize, Deserialize)]
struct FormLine {
    appointment_id: String,
    start: Timestamp,
    end: Timestamp,
    subject: String,
    organizer: String,
    attended: Option<bool>,
    interruptability: Option<Interruptability>,
    location: Option<String>,
    source: AnnotationSource,
}

pub fn annotate_form(store: &Store, config: &EngineConfig, a: &AnnotateFormArgs) -> Result<String> {
    let user = resolve_user(store, a.user.as_deref())?;
    let calendar = store.load_full_calendar(&user)?;
    let mut existing = store.load_annotations(&user)?;
    if a.drafts {
        let history = load_history(store, &user, config.idle_threshold())?;
        let office = history
            .device_timeline(&DevicePredicate::Location(config.calendar.office_location.clone()))?;
        let pending: Vec<AppointmentRecord> = calendar
            .iter()
            .filter(|c| !existing.contains_key(&c.id))
            .cloned()
            .collect();
        let drafts = draft_attendance_labels(
            &pending,
            &office,
            config.calendar.draft_f_hi,
            config.calendar.draft_f_lo,
        )?;
        store.append_annotations(&user, &drafts)?;
        existing = store.load_annotations(&user)?;
    }
    let mut out = String::new();
    for c in &calendar {
        let ann = existing.get(&c.id);
        if a.pending && ann.is_some_and(|r| r.source == AnnotationSource::Manual) {
            continue;
        }
        let line = FormLine {
            appointment_id: c.id.clone(),
            start: c.start,
            end: c.end,
            subject: c.subject.clone(),
            organizer: c.organizer.clone(),
            attended: ann.and_then(|r| r.attended),
            interruptability: ann.and_then(|r| r.interruptability),
            location: ann.and_then(|r| r.location.clone()),
            source: ann.map_or(AnnotationSource::Manual, |r| r.source),
        };
        out.push_str(&serde_json::to_string(&line).expect("form lines serialize"));
        out.push('\n');
    }
    match &a.out {
        Some(p) => {
            fs::write(p, &out)?;
            Ok(format!("wrote {} appointments to {}", calendar.len(), p.display()))
        }
        None => Ok(out.trim_end().to_string()),
    }
}

pub fn train(store: &Store, config: &EngineConfig, a: &TrainArgs) -> Result<String> {
    let users = match &a.user {
        Some(u) => vec![u.clone()],
        None => store.users()?,
    };
    let mut reports = Vec::new();
    for u in users {
        reports.extend(Snapshot::train_and_save(store, config, &u)?);
    }
    if a.json {
        return Ok(serde_json::to_string(&reports).expect("reports serialize"));
    }
    let mut out = format!(
        "{:<12} {:<18} {:>6} {:>8} {:>9} {:>9}",
        "user", "model", "train", "holdout", "accuracy", "log_loss"
    );
    for r in reports {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        out.push_str(&format!(
            "\n{:<12} {:<18} {:>6} {:>8} {:>9} {:>9}",
            r.user,
            r.model,
            r.train_size,
            r.holdout_n,
            fmt(r.accuracy),
            fmt(r.log_loss)
        ));
        if let Some(e) = r.error {
            out.push_str(&format!("  ({e}; base rates used)"));
        }
    }
    Ok(out)
}

/// The wire query a `forecast` invocation describes.
pub fn forecast_query(user: String, a: &ForecastArgs) -> Result<WireQuery> {
    let mut params = BTreeMap::new();
    for (k, v) in [
        ("min_stay", &a.min_stay),
        ("min_absence", &a.min_absence),
        ("away", &a.away),
        ("device_capability", &a.device_capability),
        ("device_location", &a.device_location),
        ("app", &a.app),
    ] {
        if let Some(v) = v {
            params.insert(k.to_string(), v.clone());
        }
    }
    Ok(WireQuery {
        user,
        kind: Some(a.kind.clone()),
        at: Some(Timestamp::parse_rfc3339(&a.at)?),
        params,
        confidence_threshold: a.threshold,
    })
}

pub fn eci_query(user: String, a: &EciArgs) -> Result<WireQuery> {
    let mut params = BTreeMap::new();
    if let Some(id) = &a.appointment {
        params.insert("appointment_id".into(), id.clone());
    }
    if let Some(p) = a.p_attend {
        params.insert("p_attend".into(), p.to_string());
    }
    if let Some(d) = &a.interruptability {
        if d.len() != 3 {
            return Err(Error::InvalidInput("--interruptability takes low,medium,high".into()));
        }
        for (k, v) in ["p_low", "p_medium", "p_high"].iter().zip(d) {
            params.insert(k.to_string(), v.to_string());
        }
    }
    if let Some(c) = a.c_default {
        params.insert("c_default".into(), c.to_string());
    }
    Ok(WireQuery {
        user,
        kind: None,
        at: Some(Timestamp::parse_rfc3339(&a.at)?),
        params,
        confidence_threshold: None,
    })
}

const TABLE_MINUTES: [u64; 9] = [1, 5, 10, 15, 30, 60, 120, 240, 480];

pub fn forecast(store: &Store, config: EngineConfig, a: &ForecastArgs) -> Result<String> {
    let user = resolve_user(store, a.user.as_deref())?;
    let q = forecast_query(user, a)?;
    let snapshot = Snapshot::load(store, config)?;
    let resp = handle(&snapshot, Endpoint::Forecast, &q)?;
    if a.json {
        return Ok(resp.to_json());
    }
    let WireResponse::Forecast(r) = resp else { unreachable!("forecast endpoint") };
    let cdf = DurationCdf::from_points(r.cdf.clone(), r.interpolation)?;
    let mut out = format!(
        "{} for {} at {}\nelapsed {} min; backoff level {}; {} cases; {:?} estimator",
        r.kind.name(),
        r.user,
        r.at,
        r.elapsed_secs / 60,
        r.backoff_level,
        r.n_cases,
        r.estimator
    );
    for m in &r.meeting_terms {
        out.push_str(&format!("\nmeeting {} attended with p = {:.3}", m.appointment_id, m.p_attend));
    }
    out.push_str("\n  within   P(event)");
    for m in TABLE_MINUTES {
        out.push_str(&format!("\n  {:>4} min  {:.3}", m, cdf.eval((m * 60) as f64)));
    }
    out.push('\n');
    out.push_str(&r.summary);
    Ok(out)
}

pub fn eci(store: &Store, config: EngineConfig, a: &EciArgs) -> Result<String> {
    let user = resolve_user(store, a.user.as_deref())?;
    let q = eci_query(user, a)?;
    let snapshot = Snapshot::load(store, config)?;
    let resp = handle(&snapshot, Endpoint::Eci, &q)?;
    if a.json {
        return Ok(resp.to_json());
    }
    let WireResponse::Eci(r) = resp else { unreachable!("eci endpoint") };
    let d = r.interruptability;
    Ok(format!(
        "expected cost of interrupting {} at {}: {:.3}\nmeeting {}; p_attend {:.3}; interruptability low {:.3} medium {:.3} high {:.3}; default cost {} ({:?}, {:?})",
        r.user,
        r.at,
        r.eci,
        r.appointment_id.as_deref().unwrap_or("none"),
        r.p_attend,
        d.low,
        d.medium,
        d.high,
        r.c_default,
        r.period,
        r.day_class
    ))
}

#[derive(Debug, Serialize)]
struct Evaluation {
    user: String,
    models: Vec<presence_core::engine::TrainReport>,
    calibration: Vec<presence_core::engine::CalibrationRow>,
}

pub fn evaluate(store: &Store, config: EngineConfig, a: &EvaluateArgs) -> Result<String> {
    let snapshot = Snapshot::load(store, config)?;
    let users: Vec<String> = match &a.user {
        Some(u) => vec![u.clone()],
        None => snapshot.users().into_iter().map(String::from).collect(),
    };
    let target = Target::Return { min_stay: Duration::parse(&a.min_stay)? };
    let mut evals = Vec::new();
    for user in users {
        let calibration =
            match snapshot.holdout_calibration(&user, &target, a.train_fraction, a.min_holdout) {
                Ok(rows) => rows,
                Err(Error::InsufficientHistory | Error::NoData) => Vec::new(),
                Err(e) => return Err(e),
            };
        evals.push(Evaluation { models: snapshot.evaluate_models(&user)?, calibration, user });
    }
    if a.json {
        return Ok(serde_json::to_string(&evals).expect("evaluations serialize"));
    }
    let mut out = String::new();
    for e in evals {
        out.push_str(&format!("{}\n", e.user));
        for r in &e.models {
            match (r.accuracy, r.log_loss) {
                (Some(acc), Some(ll)) => out.push_str(&format!(
                    "  {:<18} accuracy {:.3}  log-loss {:.3}  (train {}, holdout {})\n",
                    r.model, acc, ll, r.train_size, r.holdout_n
                )),
                _ => out.push_str(&format!(
                    "  {:<18} {}\n",
                    r.model,
                    r.error.as_deref().unwrap_or("no holdout")
                )),
            }
        }
        for c in &e.calibration {
            out.push_str(&format!(
                "  return calibration {:?}/{:?}: sup |F - G| = {:.3}  (holdout {}, level <= {})\n",
                c.period, c.day_class, c.sup_distance, c.n_holdout, c.max_backoff_level
            ));
        }
    }
    Ok(out.trim_end().to_string())
}

pub fn simulate(a: &SimulateArgs) -> Result<String> {
    if a.out.exists() && fs::read_dir(&a.out)?.next().is_some() {
        return Err(Error::InvalidInput(format!("{} is not empty", a.out.display())));
    }
    let profiles: Vec<UserProfile> = match &a.profiles {
        Some(names) => names
            .iter()
            .enumerate()
            .map(|(i, n)| UserProfile::by_name(n, a.seed.wrapping_add(i as u64)))
            .collect::<Result<_>>()?,
        None => UserProfile::catalog(a.seed),
    };
    let refs: Vec<&UserProfile> = profiles.iter().collect();
    let store = Store::open(&a.out)?;
    store.write_directory(&directory_for(&refs)?)?;
    let mut log = store.event_log()?;
    let mut summary = Vec::new();
    for p in &profiles {
        let sim = generate_user(p, a.days)?;
        log.append_events(&sim.events)?;
        store.append_calendar(&p.user, &sim.calendar)?;
        store.append_annotations(&p.user, &sim.truth.annotations())?;
        store.append_devices(&p.user, &p.devices)?;
        let mut f = fs::File::create(a.out.join(format!("profile-{}.json", p.user)))?;
        writeln!(f, "{}", serde_json::to_string_pretty(p).expect("profiles serialize"))?;
        summary.push(format!(
            "{} ({}): {} events, {} appointments",
            p.user,
            p.name,
            sim.events.len(),
            sim.calendar.len()
        ));
    }
    Ok(summary.join("\n"))
}
