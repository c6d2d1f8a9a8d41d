//! Raw device events and their coalescence into a single presence timeline.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::time::{Duration, Timestamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Activity,
    Conversation,
    AppFocusBegin,
    AppFocusEnd,
    Heartbeat,
}

impl EventKind {
    /// Kinds that mark the user as present. Heartbeats only say the device is up.
    pub fn marks_presence(self) -> bool {
        !matches!(self, EventKind::Heartbeat)
    }

    pub fn is_app_focus(self) -> bool {
        matches!(self, EventKind::AppFocusBegin | EventKind::AppFocusEnd)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub ts: Timestamp,
    pub user: String,
    pub device: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
}

impl RawEvent {
    pub fn new(ts: Timestamp, user: &str, device: &str, kind: EventKind) -> Self {
        RawEvent {
            ts,
            user: user.to_string(),
            device: device.to_string(),
            kind,
            app: None,
        }
    }

    pub fn app_focus(ts: Timestamp, user: &str, device: &str, begin: bool, app: &str) -> Self {
        RawEvent {
            ts,
            user: user.to_string(),
            device: device.to_string(),
            kind: if begin {
                EventKind::AppFocusBegin
            } else {
                EventKind::AppFocusEnd
            },
            app: Some(app.to_string()),
        }
    }

    /// An application id is present exactly for app-focus kinds.
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_app_focus() != self.app.is_some() {
            return Err(Error::InvalidInput(format!(
                "event at {} has kind {:?} but app {:?}",
                self.ts, self.kind, self.app
            )));
        }
        if self.user.is_empty() || self.device.is_empty() {
            return Err(Error::InvalidInput(format!(
                "event at {} lacks a user or device",
                self.ts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device: String,
    pub location: String,
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
}

impl DeviceProfile {
    pub fn has_capability(&self, cap: &str) -> bool {
        self.capabilities.contains(cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenceState {
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceSegment {
    pub start: Timestamp,
    pub end: Timestamp,
    pub state: PresenceState,
    pub devices: BTreeSet<String>,
}

impl PresenceSegment {
    pub fn len(&self) -> Duration {
        self.end.duration_since(self.start).unwrap_or_default()
    }

    pub fn is_present(&self) -> bool {
        self.state == PresenceState::Present
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts < self.end
    }
}

/// A user's coalesced timeline tiling `[horizon.0, horizon.1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub horizon: (Timestamp, Timestamp),
    pub segments: Vec<PresenceSegment>,
}

impl Timeline {
    /// Index of the segment containing `ts`.
    pub fn segment_at(&self, ts: Timestamp) -> Option<usize> {
        let idx = self.segments.partition_point(|s| s.start <= ts);
        (idx > 0 && self.segments[idx - 1].contains(ts)).then(|| idx - 1)
    }

    pub fn total_present(&self) -> Duration {
        Duration::from_secs(
            self.segments
                .iter()
                .filter(|s| s.is_present())
                .map(|s| s.len().secs())
                .sum(),
        )
    }

    /// Checks sorted, alternating, gap-free tiling of the horizon.
    pub fn check_tiling(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("timeline does not tile: {m}")));
        let Some(first) = self.segments.first() else {
            return bad("no segments");
        };
        if first.start != self.horizon.0 || self.segments.last().unwrap().end != self.horizon.1 {
            return bad("horizon not covered");
        }
        for s in &self.segments {
            if s.start >= s.end {
                return bad("empty segment");
            }
            if s.is_present() == s.devices.is_empty() {
                return bad("device set inconsistent with state");
            }
        }
        for w in self.segments.windows(2) {
            if w[0].end != w[1].start {
                return bad("gap or overlap");
            }
            if w[0].state == w[1].state {
                return bad("states do not alternate");
            }
        }
        Ok(())
    }
}

/// Merges one user's multi-device event stream into alternating presence and
/// absence segments.
///
/// Each presence-marking event keeps the user present until `idle_threshold`
/// after it; runs whose extents touch or overlap are merged. The output tiles
/// `horizon` exactly.
pub fn coalesce_timeline(
    events: &[RawEvent],
    idle_threshold: Duration,
    horizon: (Timestamp, Timestamp),
) -> Result<Timeline> {
    let (h0, h1) = horizon;
    if h0 >= h1 {
        return Err(Error::InvalidInput("empty log horizon".into()));
    }
    if idle_threshold == Duration::ZERO {
        return Err(Error::InvalidInput("idle threshold must be positive".into()));
    }
    for w in events.windows(2) {
        if w[1].ts < w[0].ts {
            return Err(Error::Unsorted(format!("{} after {}", w[1].ts, w[0].ts)));
        }
    }
    if let (Some(first), Some(last)) = (events.first(), events.last()) {
        if first.ts < h0 || last.ts >= h1 {
            return Err(Error::InvalidInput("events fall outside the log horizon".into()));
        }
    }

    let mut runs: Vec<(Timestamp, Timestamp, BTreeSet<String>)> = Vec::new();
    for ev in events.iter().filter(|e| e.kind.marks_presence()) {
        let until = (ev.ts + idle_threshold).min(h1);
        match runs.last_mut() {
            Some((_, end, devices)) if ev.ts <= *end => {
                *end = (*end).max(until);
                devices.insert(ev.device.clone());
            }
            _ => runs.push((ev.ts, until, BTreeSet::from([ev.device.clone()]))),
        }
    }

    let mut segments = Vec::with_capacity(runs.len() * 2 + 1);
    let mut cursor = h0;
    for (start, end, devices) in runs {
        if start > cursor {
            segments.push(PresenceSegment {
                start: cursor,
                end: start,
                state: PresenceState::Absent,
                devices: BTreeSet::new(),
            });
        }
        segments.push(PresenceSegment {
            start,
            end,
            state: PresenceState::Present,
            devices,
        });
        cursor = end;
    }
    if cursor < h1 {
        segments.push(PresenceSegment {
            start: cursor,
            end: h1,
            state: PresenceState::Absent,
            devices: BTreeSet::new(),
        });
    }
    Ok(Timeline { horizon, segments })
}
