use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "presence", version, about = "Forecast presence and availability from activity logs")]
pub struct Cli {
    /// Store directory holding logs, calendars, annotations and models.
    #[arg(long, global = true, env = "PRESENCE_STORE", default_value = "presence-store")]
    pub store: PathBuf,
    /// TOML file overriding engine defaults.
    #[arg(long, global = true, env = "PRESENCE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Append events, calendars, annotations, devices or the directory to the store.
    Ingest(IngestArgs),
    /// Print the presence timeline for a user as JSON lines.
    Coalesce(CoalesceArgs),
    /// Write an editable annotation form for a user's appointments.
    AnnotateForm(AnnotateFormArgs),
    /// Train and save calendar models.
    Train(TrainArgs),
    /// Forecast the time until an event.
    Forecast(ForecastArgs),
    /// Expected cost of interrupting a user.
    Eci(EciArgs),
    /// Holdout accuracy and calibration for stored data.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic store.
    Simulate(SimulateArgs),
    /// Serve queries over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON-lines raw events; users come from the records.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// JSON-lines appointments for --user.
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    /// JSON-lines annotations (or a filled-in form) for --user.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// JSON-lines device profiles for --user.
    #[arg(long)]
    pub devices: Option<PathBuf>,
    /// JSON-lines directory: `{"person","manager"}` and `{"alias"}` lines.
    #[arg(long)]
    pub directory: Option<PathBuf>,
    #[arg(long)]
    pub user: Option<String>,
}

#[derive(Debug, Args)]
pub struct CoalesceArgs {
    #[arg(long)]
    pub user: Option<String>,
    /// RFC 3339 start of the window to print.
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnnotateFormArgs {
    #[arg(long)]
    pub user: Option<String>,
    /// Write the form here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prefill attendance from desk presence and store the drafts.
    #[arg(long)]
    pub drafts: bool,
    /// Only list appointments without a manual annotation.
    #[arg(long)]
    pub pending: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Train one user; all users by default.
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub user: Option<String>,
    /// time_until_return, time_until_leave, time_until_device_access or
    /// time_until_app_engagement.
    #[arg(long)]
    pub kind: String,
    /// Query time, RFC 3339.
    #[arg(long)]
    pub at: String,
    /// Minimum stay that counts as a return, e.g. 15m.
    #[arg(long)]
    pub min_stay: Option<String>,
    /// Minimum absence that counts as leaving.
    #[arg(long)]
    pub min_absence: Option<String>,
    /// Time already away (or present, or since the landmark), replacing the
    /// value measured from the log.
    #[arg(long)]
    pub away: Option<String>,
    #[arg(long)]
    pub device_capability: Option<String>,
    #[arg(long)]
    pub device_location: Option<String>,
    #[arg(long)]
    pub app: Option<String>,
    /// Probability level for the summary, in (0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EciArgs {
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub at: String,
    /// Appointment to use instead of the one covering --at.
    #[arg(long)]
    pub appointment: Option<String>,
    #[arg(long)]
    pub p_attend: Option<f64>,
    /// Interruptability distribution as `low,medium,high`.
    #[arg(long, value_delimiter = ',')]
    pub interruptability: Option<Vec<f64>>,
    #[arg(long)]
    pub c_default: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub user: Option<String>,
    /// Fraction of cases, oldest first, used to build reference classes.
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Minimum holdout cases for a context to be scored.
    #[arg(long, default_value_t = 30)]
    pub min_holdout: usize,
    /// Minimum stay for the return forecasts being scored.
    #[arg(long, default_value = "15m")]
    pub min_stay: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 180)]
    pub days: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Store directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Profiles to simulate; all built-in profiles by default.
    #[arg(long, value_delimiter = ',')]
    pub profiles: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}
