//! Distribution estimation, elapsed-time conditioning, meeting integration,
//! and interruption cost.

pub mod cdf;
pub mod eci;
pub mod meetings;

pub use cdf::{cdf_from_leaf, condition_on_elapsed, empirical_cdf, quantile, DurationCdf, Interpolation};
pub use eci::{expected_cost_of_interruption, InterruptCosts};
pub use meetings::{integrate_meetings, mix_raw, truncate_scopes, MeetingTerm, MeetingWeight};
