//! The JSON request and response shapes shared by the command line and the
//! HTTP service. Both front ends route queries through [`handle`], so the
//! same snapshot and query serialize to the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cases::{DevicePredicate, QueryKind, QuerySpec, Target};
use crate::engine::{likely_level, EciOverrides, Estimator, Snapshot};
use crate::error::{Error, Result};
use crate::forecast::{Interpolation, MeetingWeight};
use crate::model::{DayClass, Duration, Period, Timestamp};
use crate::store::Interruptability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Forecast,
    Attendance,
    Interruptability,
    Eci,
}

impl Endpoint {
    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Forecast => "/v1/forecast",
            Endpoint::Attendance => "/v1/attendance",
            Endpoint::Interruptability => "/v1/interruptability",
            Endpoint::Eci => "/v1/eci",
        }
    }
}

/// A query as it arrives over the wire. `params` holds the kind-specific
/// arguments as strings, e.g. `min_stay = "15m"` or `appointment_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireQuery {
    pub user: String,
    /// A forecast kind such as `time_until_return`; ignored by the other
    /// endpoints.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub at: Option<Timestamp>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub confidence_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub user: String,
    pub kind: QueryKind,
    pub at: Timestamp,
    pub elapsed_secs: u64,
    /// `[seconds from the query, cumulative probability]` pairs.
    pub cdf: Vec<(u64, f64)>,
    pub interpolation: Interpolation,
    pub f_max: f64,
    pub threshold: f64,
    /// Seconds at each probability level; `null` where the level is never reached.
    pub quantiles: BTreeMap<String, Option<u64>>,
    pub backoff_level: usize,
    pub n_cases: usize,
    pub estimator: Estimator,
    pub meeting_terms: Vec<MeetingWeight>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceResponse {
    pub user: String,
    pub appointment_id: String,
    pub p_attend: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDistribution {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl From<[f64; 3]> for LevelDistribution {
    fn from(d: [f64; 3]) -> Self {
        LevelDistribution { low: d[0], medium: d[1], high: d[2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptabilityResponse {
    pub user: String,
    pub appointment_id: String,
    pub distribution: LevelDistribution,
    pub likely: Interruptability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EciResponse {
    pub user: String,
    pub at: Timestamp,
    pub eci: f64,
    pub p_attend: f64,
    pub interruptability: LevelDistribution,
    pub c_default: f64,
    pub appointment_id: Option<String>,
    pub period: Period,
    pub day_class: DayClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResponse {
    Forecast(ForecastResponse),
    Attendance(AttendanceResponse),
    Interruptability(InterruptabilityResponse),
    Eci(EciResponse),
}

impl WireResponse {
    /// Canonical serialization, identical for both front ends.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("responses serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody { error: ErrorDetail { code: e.code().to_string(), message: e.to_string() } }
    }
}

impl ErrorBody {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("errors serialize")
    }
}

/// Parameters each endpoint or forecast kind accepts.
fn allowed_params(endpoint: Endpoint, kind: Option<QueryKind>) -> &'static [&'static str] {
    match (endpoint, kind) {
        (Endpoint::Forecast, Some(QueryKind::TimeUntilReturn)) => &["min_stay", "away"],
        (Endpoint::Forecast, Some(QueryKind::TimeUntilLeave)) => &["min_absence", "away"],
        (Endpoint::Forecast, Some(QueryKind::TimeUntilDeviceAccess)) => {
            &["device_capability", "device_location", "away"]
        }
        (Endpoint::Forecast, Some(QueryKind::TimeUntilAppEngagement)) => &["app", "away"],
        (Endpoint::Forecast, None) => &[],
        (Endpoint::Attendance | Endpoint::Interruptability, _) => &["appointment_id"],
        (Endpoint::Eci, _) => {
            &["appointment_id", "p_attend", "p_low", "p_medium", "p_high", "c_default"]
        }
    }
}

fn check_params(q: &WireQuery, endpoint: Endpoint, kind: Option<QueryKind>) -> Result<()> {
    let allowed = allowed_params(endpoint, kind);
    for key in q.params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!(
                "parameter {key:?} is not accepted here; expected one of {allowed:?}"
            )));
        }
    }
    Ok(())
}

fn param_duration(q: &WireQuery, key: &str) -> Result<Option<Duration>> {
    q.params.get(key).map(|s| Duration::parse(s)).transpose()
}

fn param_f64(q: &WireQuery, key: &str) -> Result<Option<f64>> {
    q.params
        .get(key)
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("bad number for {key}: {s:?}")))
        })
        .transpose()
}

fn require_at(q: &WireQuery) -> Result<Timestamp> {
    q.at.ok_or_else(|| Error::InvalidInput("the query needs an `at` timestamp".into()))
}

fn require_appointment(q: &WireQuery) -> Result<&str> {
    q.params
        .get("appointment_id")
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidInput("the query needs an appointment_id".into()))
}

/// Builds the forecast query a wire query describes.
pub fn query_spec(q: &WireQuery) -> Result<QuerySpec> {
    let kind = QueryKind::parse(
        q.kind.as_deref().ok_or_else(|| Error::InvalidInput("a forecast needs a kind".into()))?,
    )?;
    check_params(q, Endpoint::Forecast, Some(kind))?;
    let target = match kind {
        QueryKind::TimeUntilReturn => {
            Target::Return { min_stay: param_duration(q, "min_stay")?.unwrap_or(Duration::ZERO) }
        }
        QueryKind::TimeUntilLeave => Target::Leave {
            min_absence: param_duration(q, "min_absence")?.unwrap_or(Duration::ZERO),
        },
        QueryKind::TimeUntilDeviceAccess => {
            let device = match (q.params.get("device_capability"), q.params.get("device_location")) {
                (Some(c), None) => DevicePredicate::Capability(c.clone()),
                (None, Some(l)) => DevicePredicate::Location(l.clone()),
                _ => {
                    return Err(Error::InvalidInput(
                        "give exactly one of device_capability or device_location".into(),
                    ))
                }
            };
            Target::DeviceAccess { device }
        }
        QueryKind::TimeUntilAppEngagement => Target::AppEngagement {
            app: q
                .params
                .get("app")
                .cloned()
                .ok_or_else(|| Error::InvalidInput("an app engagement query needs app".into()))?,
        },
    };
    Ok(QuerySpec {
        user: q.user.clone(),
        at: require_at(q)?,
        target,
        elapsed: param_duration(q, "away")?,
    })
}

/// Answers one query against a snapshot.
pub fn handle(snapshot: &Snapshot, endpoint: Endpoint, q: &WireQuery) -> Result<WireResponse> {
    match endpoint {
        Endpoint::Forecast => {
            let spec = query_spec(q)?;
            let r = snapshot.forecast(&spec, q.confidence_threshold)?;
            Ok(WireResponse::Forecast(ForecastResponse {
                user: q.user.clone(),
                kind: r.kind,
                at: r.at,
                elapsed_secs: r.elapsed.secs(),
                cdf: r.cdf.points(),
                interpolation: r.cdf.mode(),
                f_max: r.cdf.f_max(),
                threshold: r.threshold,
                quantiles: r.quantiles,
                backoff_level: r.backoff_level,
                n_cases: r.n_cases,
                estimator: r.estimator,
                meeting_terms: r.meeting_terms,
                summary: r.summary,
            }))
        }
        Endpoint::Attendance => {
            check_params(q, endpoint, None)?;
            let id = require_appointment(q)?;
            Ok(WireResponse::Attendance(AttendanceResponse {
                user: q.user.clone(),
                appointment_id: id.to_string(),
                p_attend: snapshot.attendance(&q.user, id)?,
            }))
        }
        Endpoint::Interruptability => {
            check_params(q, endpoint, None)?;
            let id = require_appointment(q)?;
            let dist = snapshot.interruptability(&q.user, id)?;
            Ok(WireResponse::Interruptability(InterruptabilityResponse {
                user: q.user.clone(),
                appointment_id: id.to_string(),
                distribution: dist.into(),
                likely: likely_level(dist),
            }))
        }
        Endpoint::Eci => {
            check_params(q, endpoint, None)?;
            let at = require_at(q)?;
            let levels = ["p_low", "p_medium", "p_high"]
                .iter()
                .map(|k| param_f64(q, k))
                .collect::<Result<Vec<_>>>()?;
            let interruptability = match levels.as_slice() {
                [Some(l), Some(m), Some(h)] => Some([*l, *m, *h]),
                [None, None, None] => None,
                _ => {
                    return Err(Error::InvalidInput(
                        "give all of p_low, p_medium and p_high or none".into(),
                    ))
                }
            };
            let overrides = EciOverrides {
                appointment_id: q.params.get("appointment_id").cloned(),
                p_attend: param_f64(q, "p_attend")?,
                interruptability,
                c_default: param_f64(q, "c_default")?,
            };
            let r = snapshot.eci(&q.user, at, &overrides)?;
            Ok(WireResponse::Eci(EciResponse {
                user: q.user.clone(),
                at,
                eci: r.eci,
                p_attend: r.p_attend,
                interruptability: r.interruptability.into(),
                c_default: r.c_default,
                appointment_id: r.appointment_id,
                period: r.period,
                day_class: r.day_class,
            }))
        }
    }
}
