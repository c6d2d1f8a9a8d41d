//! Append-only line-record persistence.
//!
//! Every file holds one JSON object per line. Layout under a store root:
//!
//! ```text
//! events.jsonl               RawEvent lines, all users, nondecreasing ts per user
//! directory.jsonl            {"person","manager"} and {"alias"} lines
//! calendar/<user>.jsonl      AppointmentRecord lines
//! annotations/<user>.jsonl   AnnotationRecord lines
//! devices/<user>.jsonl       DeviceProfile lines
//! models/<user>/<name>.model decision trees
//! ```
//!
//! A final line without its newline is treated as a torn write: readers drop
//! it and count it, and the next append truncates it away first.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceProfile, RawEvent, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    Organizer,
    Required,
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    RespondedYes,
    RespondedTentative,
    NoResponse,
    NoResponseRequested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusyFlag {
    Busy,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppointmentRecord {
    pub id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub subject: String,
    pub location_field: String,
    pub organizer: String,
    pub attendees: Vec<String>,
    pub user_role: UserRole,
    pub response_status: ResponseStatus,
    pub recurrent: bool,
    pub busy_flag: BusyFlag,
    pub organized_by_alias: bool,
}

impl AppointmentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidInput(format!("appointment {} has start >= end", self.id)));
        }
        if self.organizer.is_empty() {
            return Err(Error::InvalidInput(format!("appointment {} has no organizer", self.id)));
        }
        Ok(())
    }

    pub fn overlaps(&self, span: (Timestamp, Timestamp)) -> bool {
        self.start < span.1 && span.0 < self.end
    }

    pub fn covers(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interruptability {
    Low,
    Medium,
    High,
}

impl Interruptability {
    pub const ALL: [Interruptability; 3] =
        [Interruptability::Low, Interruptability::Medium, Interruptability::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    HeuristicDraft,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub appointment_id: String,
    #[serde(default)]
    pub attended: Option<bool>,
    #[serde(default)]
    pub interruptability: Option<Interruptability>,
    #[serde(default)]
    pub location: Option<String>,
    pub source: AnnotationSource,
}

impl AnnotationRecord {
    pub fn is_blank(&self) -> bool {
        self.attended.is_none() && self.interruptability.is_none() && self.location.is_none()
    }
}

/// Organizational chart and mailing-list aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectoryStub {
    managers: HashMap<String, String>,
    aliases: HashSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectoryLine {
    Person { person: String, manager: String },
    Alias { alias: String },
}

impl DirectoryStub {
    pub fn new(
        managers: impl IntoIterator<Item = (String, String)>,
        aliases: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let stub = DirectoryStub {
            managers: managers.into_iter().collect(),
            aliases: aliases.into_iter().collect(),
        };
        stub.check_acyclic()?;
        Ok(stub)
    }

    fn check_acyclic(&self) -> Result<()> {
        for start in self.managers.keys() {
            let mut seen = HashSet::new();
            let mut cur = start.as_str();
            while let Some(m) = self.managers.get(cur) {
                if !seen.insert(cur) {
                    return Err(Error::InvalidInput(format!("manager cycle through {start}")));
                }
                cur = m;
            }
        }
        Ok(())
    }

    pub fn manager_of(&self, person: &str) -> Option<&str> {
        self.managers.get(person).map(String::as_str)
    }

    pub fn is_alias(&self, person: &str) -> bool {
        self.aliases.contains(person)
    }

    pub fn contains(&self, person: &str) -> bool {
        self.managers.contains_key(person)
            || self.managers.values().any(|m| m == person)
            || self.aliases.contains(person)
    }

    pub fn lines(&self) -> Vec<DirectoryLine> {
        let mut people: Vec<_> = self.managers.iter().collect();
        people.sort();
        let mut aliases: Vec<_> = self.aliases.iter().collect();
        aliases.sort();
        people
            .into_iter()
            .map(|(p, m)| DirectoryLine::Person { person: p.clone(), manager: m.clone() })
            .chain(aliases.into_iter().map(|a| DirectoryLine::Alias { alias: a.clone() }))
            .collect()
    }

    pub fn from_lines(lines: Vec<DirectoryLine>) -> Result<Self> {
        let mut managers = Vec::new();
        let mut aliases = Vec::new();
        for l in lines {
            match l {
                DirectoryLine::Person { person, manager } => managers.push((person, manager)),
                DirectoryLine::Alias { alias } => aliases.push(alias),
            }
        }
        DirectoryStub::new(managers, aliases)
    }
}

/// Records read from a line file, plus the count of torn trailing lines dropped.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub dropped: usize,
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(Loaded { records: Vec::new(), dropped: 0 })
        }
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut dropped = 0;
    let mut buf = String::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        lineno += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim();
        if text.is_empty() {
            continue;
        }
        // the final line is only trusted once its newline has landed
        if !complete {
            dropped += 1;
            tracing::warn!(path = %path.display(), line = lineno, "dropping torn final line");
            continue;
        }
        let record = serde_json::from_str::<T>(text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(Loaded { records, dropped })
}

/// Appends all records in a single write. A torn trailing line is cut first.
pub fn append_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
    repair_tail(path, &mut file)?;
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::InvalidInput(e.to_string()))?);
        out.push('\n');
    }
    file.write_all(out.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

fn repair_tail(path: &Path, file: &mut File) -> Result<()> {
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    let mut last = [0u8; 1];
    file.seek(SeekFrom::Start(len - 1))?;
    file.read_exact(&mut last)?;
    if last[0] == b'\n' {
        return Ok(());
    }
    let mut content = Vec::new();
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut content)?;
    let keep = content.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    tracing::warn!(path = %path.display(), "truncating torn final line before append");
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    Ok(())
}

/// The shared raw-event log. Single writer; readers reload from disk.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    last_ts: HashMap<String, Timestamp>,
    ranges: HashMap<String, (Timestamp, Timestamp)>,
}

impl EventLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut log = EventLog { path, last_ts: HashMap::new(), ranges: HashMap::new() };
        let loaded: Loaded<RawEvent> = read_records(&log.path)?;
        for ev in &loaded.records {
            log.note(ev);
        }
        Ok(log)
    }

    fn note(&mut self, ev: &RawEvent) {
        self.last_ts.insert(ev.user.clone(), ev.ts);
        self.ranges
            .entry(ev.user.clone())
            .and_modify(|r| r.1 = ev.ts)
            .or_insert((ev.ts, ev.ts));
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// First and last stored timestamps for `user`.
    pub fn user_range(&self, user: &str) -> Option<(Timestamp, Timestamp)> {
        self.ranges.get(user).copied()
    }

    pub fn users(&self) -> Vec<String> {
        let mut v: Vec<_> = self.ranges.keys().cloned().collect();
        v.sort();
        v
    }

    /// Appends a batch atomically: if any record would regress a user's
    /// timestamp, nothing is written.
    pub fn append_events(&mut self, batch: &[RawEvent]) -> Result<usize> {
        let mut last = self.last_ts.clone();
        for ev in batch {
            ev.validate()?;
            if let Some(prev) = last.get(&ev.user) {
                if ev.ts < *prev {
                    return Err(Error::Unsorted(format!(
                        "event for {} at {} precedes stored {}",
                        ev.user, ev.ts, prev
                    )));
                }
            }
            last.insert(ev.user.clone(), ev.ts);
        }
        append_records(&self.path, batch)?;
        for ev in batch {
            self.note(ev);
        }
        Ok(batch.len())
    }

    /// Stored records for `user` with `span.0 <= ts < span.1`.
    pub fn load_range(&self, user: &str, span: (Timestamp, Timestamp)) -> Result<Vec<RawEvent>> {
        Ok(self.load_range_report(user, span)?.records)
    }

    pub fn load_range_report(
        &self,
        user: &str,
        span: (Timestamp, Timestamp),
    ) -> Result<Loaded<RawEvent>> {
        if span.0 > span.1 {
            return Err(Error::InvalidInput("span start after end".into()));
        }
        let loaded: Loaded<RawEvent> = read_records(&self.path)?;
        let mut records: Vec<RawEvent> = loaded
            .records
            .into_iter()
            .filter(|e| e.user == user && span.0 <= e.ts && e.ts < span.1)
            .collect();
        records.sort_by_key(|e| e.ts);
        Ok(Loaded { records, dropped: loaded.dropped })
    }

    pub fn load_user(&self, user: &str) -> Result<Vec<RawEvent>> {
        self.load_range(user, (Timestamp::from_unix(i64::MIN), Timestamp::from_unix(i64::MAX)))
    }
}

/// Directory-backed store for one deployment.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn event_log(&self) -> Result<EventLog> {
        EventLog::open(self.events_path())
    }

    fn user_file(&self, dir: &str, user: &str) -> Result<PathBuf> {
        if user.is_empty() || user.contains(['/', '\\']) || user.starts_with('.') {
            return Err(Error::InvalidInput(format!("bad user id {user:?}")));
        }
        Ok(self.root.join(dir).join(format!("{user}.jsonl")))
    }

    pub fn model_path(&self, user: &str, name: &str) -> Result<PathBuf> {
        let p = self.user_file("models", user)?;
        Ok(p.with_extension("").join(format!("{name}.model")))
    }

    pub fn append_calendar(&self, user: &str, appts: &[AppointmentRecord]) -> Result<usize> {
        for a in appts {
            a.validate()?;
        }
        append_records(&self.user_file("calendar", user)?, appts)?;
        Ok(appts.len())
    }

    /// Appointments with `[start, end)` intersecting `span`, ordered by start.
    pub fn load_calendar(
        &self,
        user: &str,
        span: (Timestamp, Timestamp),
    ) -> Result<Vec<AppointmentRecord>> {
        let loaded: Loaded<AppointmentRecord> = read_records(&self.user_file("calendar", user)?)?;
        let mut v: Vec<_> = loaded.records.into_iter().filter(|a| a.overlaps(span)).collect();
        v.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.id.cmp(&b.id)));
        Ok(v)
    }

    pub fn load_full_calendar(&self, user: &str) -> Result<Vec<AppointmentRecord>> {
        self.load_calendar(user, (Timestamp::from_unix(i64::MIN), Timestamp::from_unix(i64::MAX)))
    }

    /// Blank records are skipped; returns the number written.
    pub fn append_annotations(&self, user: &str, records: &[AnnotationRecord]) -> Result<usize> {
        let keep: Vec<_> = records.iter().filter(|r| !r.is_blank()).cloned().collect();
        append_records(&self.user_file("annotations", user)?, &keep)?;
        Ok(keep.len())
    }

    /// Latest annotation per appointment; manual entries beat heuristic drafts.
    pub fn load_annotations(&self, user: &str) -> Result<HashMap<String, AnnotationRecord>> {
        let loaded: Loaded<AnnotationRecord> =
            read_records(&self.user_file("annotations", user)?)?;
        Ok(resolve_annotations(loaded.records))
    }

    pub fn write_directory(&self, dir: &DirectoryStub) -> Result<()> {
        let path = self.root.join("directory.jsonl");
        if path.exists() {
            fs::remove_file(&path)?;
        }
        append_records(&path, &dir.lines())
    }

    pub fn load_directory(&self) -> Result<DirectoryStub> {
        let loaded: Loaded<DirectoryLine> = read_records(&self.root.join("directory.jsonl"))?;
        DirectoryStub::from_lines(loaded.records)
    }

    pub fn append_devices(&self, user: &str, devices: &[DeviceProfile]) -> Result<usize> {
        let mut ids: HashSet<String> =
            self.load_devices(user)?.into_iter().map(|d| d.device).collect();
        for d in devices {
            if !ids.insert(d.device.clone()) {
                return Err(Error::InvalidInput(format!("duplicate device id {}", d.device)));
            }
        }
        append_records(&self.user_file("devices", user)?, devices)?;
        Ok(devices.len())
    }

    pub fn load_devices(&self, user: &str) -> Result<Vec<DeviceProfile>> {
        Ok(read_records(&self.user_file("devices", user)?)?.records)
    }

    /// Users with any calendar or event data.
    pub fn users(&self) -> Result<Vec<String>> {
        let mut users: HashSet<String> = self.event_log()?.users().into_iter().collect();
        let cal = self.root.join("calendar");
        if cal.is_dir() {
            for entry in fs::read_dir(cal)? {
                let p = entry?.path();
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    users.insert(stem.to_string());
                }
            }
        }
        let mut v: Vec<_> = users.into_iter().collect();
        v.sort();
        Ok(v)
    }
}

pub fn resolve_annotations(
    records: impl IntoIterator<Item = AnnotationRecord>,
) -> HashMap<String, AnnotationRecord> {
    let mut out: HashMap<String, AnnotationRecord> = HashMap::new();
    for r in records {
        if r.is_blank() {
            continue;
        }
        match out.get(&r.appointment_id) {
            Some(prev)
                if prev.source == AnnotationSource::Manual
                    && r.source == AnnotationSource::HeuristicDraft => {}
            _ => {
                out.insert(r.appointment_id.clone(), r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventKind;

    fn ev(user: &str, t: i64) -> RawEvent {
        RawEvent::new(Timestamp::from_unix(t), user, "desk", EventKind::Activity)
    }

    fn all() -> (Timestamp, Timestamp) {
        (Timestamp::from_unix(0), Timestamp::from_unix(1_000_000))
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path().join("e.jsonl")).unwrap();
        let mut batch = vec![ev("u", 1), ev("u", 2), ev("u", 3)];
        batch[1].kind = EventKind::AppFocusBegin;
        batch[1].app = Some("mail".into());
        assert_eq!(log.append_events(&batch).unwrap(), 3);
        let reopened = EventLog::open(log.path()).unwrap();
        assert_eq!(reopened.load_range("u", all()).unwrap(), batch);
    }

    #[test]
    fn regression_rejected_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path().join("e.jsonl")).unwrap();
        log.append_events(&[ev("u", 10)]).unwrap();
        let err = log.append_events(&[ev("u", 11), ev("u", 5)]).unwrap_err();
        assert!(matches!(err, Error::Unsorted(_)));
        assert_eq!(log.load_range("u", all()).unwrap().len(), 1);
        assert!(log.append_events(&[ev("u", 9)]).is_err());
    }

    #[test]
    fn appends_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path().join("e.jsonl")).unwrap();
        log.append_events(&[ev("u", 1), ev("u", 2)]).unwrap();
        log.append_events(&[ev("u", 3), ev("u", 4)]).unwrap();
        let got: Vec<i64> =
            log.load_range("u", all()).unwrap().iter().map(|e| e.ts.unix()).collect();
        assert_eq!(got, vec![1, 2, 3, 4]);
    }

    #[test]
    fn span_rules() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path().join("e.jsonl")).unwrap();
        log.append_events(&[ev("a", 1), ev("b", 2), ev("a", 3), ev("b", 4), ev("a", 5)])
            .unwrap();
        let t = Timestamp::from_unix;
        assert!(log.load_range("a", (t(100), t(200))).unwrap().is_empty());
        let a: Vec<i64> =
            log.load_range("a", (t(1), t(5))).unwrap().iter().map(|e| e.ts.unix()).collect();
        assert_eq!(a, vec![1, 3]);
        let b: Vec<i64> = log.load_range("b", all()).unwrap().iter().map(|e| e.ts.unix()).collect();
        assert_eq!(b, vec![2, 4]);
        assert!(log.load_range("nobody", all()).unwrap().is_empty());
    }

    #[test]
    fn torn_final_line_dropped_then_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        let mut log = EventLog::open(&path).unwrap();
        log.append_events(&[ev("u", 1), ev("u", 2)]).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"ts":"1970-01-01T00:00:03Z","us"#).unwrap();
        drop(f);
        let report = log.load_range_report("u", all()).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.dropped, 1);
        log.append_events(&[ev("u", 4)]).unwrap();
        let report = log.load_range_report("u", all()).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.dropped, 0);
    }

    #[test]
    fn corrupt_interior_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        fs::write(&path, "garbage\n").unwrap();
        assert!(matches!(EventLog::open(&path), Err(Error::Parse { .. })));
    }

    fn appt(id: &str, start: i64, end: i64) -> AppointmentRecord {
        AppointmentRecord {
            id: id.into(),
            start: Timestamp::from_unix(start),
            end: Timestamp::from_unix(end),
            subject: "sync".into(),
            location_field: String::new(),
            organizer: "boss".into(),
            attendees: vec!["u".into()],
            user_role: UserRole::Required,
            response_status: ResponseStatus::RespondedYes,
            recurrent: false,
            busy_flag: BusyFlag::Busy,
            organized_by_alias: false,
        }
    }

    #[test]
    fn calendar_half_open_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.append_calendar("u", &[appt("a", 0, 100), appt("b", 50, 150)]).unwrap();
        let t = Timestamp::from_unix;
        let got = store.load_calendar("u", (t(100), t(200))).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "b");
        assert!(store.append_calendar("u", &[appt("c", 5, 5)]).is_err());
    }

    #[test]
    fn calendar_holds_659() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let appts: Vec<_> =
            (0..659).map(|i| appt(&format!("m{i}"), i * 3600, i * 3600 + 1800)).collect();
        store.append_calendar("u", &appts).unwrap();
        assert_eq!(store.load_full_calendar("u").unwrap().len(), 659);
    }

    #[test]
    fn manual_annotation_wins() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let manual = AnnotationRecord {
            appointment_id: "a".into(),
            attended: Some(true),
            interruptability: Some(Interruptability::High),
            location: None,
            source: AnnotationSource::Manual,
        };
        let draft = AnnotationRecord {
            attended: Some(false),
            interruptability: None,
            source: AnnotationSource::HeuristicDraft,
            ..manual.clone()
        };
        let blank = AnnotationRecord {
            attended: None,
            interruptability: None,
            ..manual.clone()
        };
        assert_eq!(store.append_annotations("u", &[manual.clone(), draft, blank]).unwrap(), 2);
        assert_eq!(store.load_annotations("u").unwrap()["a"], manual);
    }

    #[test]
    fn directory_cycle_rejected() {
        let cyc = DirectoryStub::new(
            [("a".to_string(), "b".to_string()), ("b".to_string(), "a".to_string())],
            [],
        );
        assert!(cyc.is_err());
        let ok = DirectoryStub::new(
            [("a".to_string(), "b".to_string())],
            ["dev-all".to_string()],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.write_directory(&ok).unwrap();
        assert_eq!(store.load_directory().unwrap(), ok);
    }
}
