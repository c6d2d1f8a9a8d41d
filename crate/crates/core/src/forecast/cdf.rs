//! Cumulative distributions over time-until-event.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::DurationBinning;
use crate::model::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Right-continuous steps: `F(t)` is the value at the last breakpoint `<= t`.
    Step,
    /// Straight lines between breakpoints.
    Linear,
}

/// Integer counts behind an empirical step CDF, kept so that conditioning
/// stays an exact ratio of counts.
#[derive(Debug, Clone, PartialEq, Eq)]
struct CountBasis {
    cumulative: Vec<u64>,
    total: u64,
}

/// A monotone CDF over whole seconds. `F(t) = 0` before the first breakpoint
/// and equals the terminal mass `F_max <= 1` after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationCdf {
    times: Vec<u64>,
    probs: Vec<f64>,
    mode: Interpolation,
    counts: Option<CountBasis>,
}

impl DurationCdf {
    pub fn from_points(points: Vec<(u64, f64)>, mode: Interpolation) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("a CDF needs at least one breakpoint".into()));
        }
        let (times, probs): (Vec<u64>, Vec<f64>) = points.into_iter().unzip();
        let cdf = DurationCdf { times, probs, mode, counts: None };
        cdf.validate()?;
        Ok(cdf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("CDF times must strictly increase".into()));
        }
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("CDF values must lie in [0,1]".into()));
        }
        if self.probs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("CDF values must not decrease".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn points(&self) -> Vec<(u64, f64)> {
        self.times.iter().copied().zip(self.probs.iter().copied()).collect()
    }

    /// Number of observations behind an empirical CDF.
    pub fn sample_size(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.total)
    }

    pub fn f_max(&self) -> f64 {
        *self.probs.last().expect("nonempty")
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&ti| (ti as f64) <= t);
        if idx == 0 {
            return 0.0;
        }
        match self.mode {
            Interpolation::Step => self.probs[idx - 1],
            Interpolation::Linear => {
                if idx == self.times.len() {
                    return self.f_max();
                }
                let (t0, t1) = (self.times[idx - 1] as f64, self.times[idx] as f64);
                let (f0, f1) = (self.probs[idx - 1], self.probs[idx]);
                f0 + (t - t0) / (t1 - t0) * (f1 - f0)
            }
        }
    }

    pub fn at(&self, d: Duration) -> f64 {
        self.eval(d.secs() as f64)
    }

    /// Monotone and within [0,1]; asserted on every forecast output.
    pub fn is_proper(&self) -> bool {
        self.validate().is_ok()
    }

    /// CDF of the remaining time given the event has not happened by `d`:
    /// `F'(t) = (F(d+t) - F(d)) / (1 - F(d))`. Survivors are waits strictly
    /// greater than `d`.
    pub fn condition_on_elapsed(&self, d: Duration) -> Result<DurationCdf> {
        let d = d.secs();
        if let Some(basis) = &self.counts {
            let cut = self.times.partition_point(|&t| t <= d);
            let dead = if cut == 0 { 0 } else { basis.cumulative[cut - 1] };
            let alive = basis.total - dead;
            if alive == 0 {
                return Err(Error::NoSurvivingMass);
            }
            let times: Vec<u64> = self.times[cut..].iter().map(|t| t - d).collect();
            let cumulative: Vec<u64> = basis.cumulative[cut..].iter().map(|c| c - dead).collect();
            return Ok(DurationCdf::from_counts(times, cumulative, alive));
        }

        let fd = self.eval(d as f64);
        if fd >= self.f_max() || fd >= 1.0 {
            return Err(Error::NoSurvivingMass);
        }
        let rescale = |f: f64| ((f - fd) / (1.0 - fd)).clamp(0.0, 1.0);
        let mut points = Vec::with_capacity(self.times.len() + 1);
        if self.mode == Interpolation::Linear && d >= self.times[0] {
            points.push((0, 0.0));
        }
        for (&t, &f) in self.times.iter().zip(&self.probs) {
            if t > d {
                points.push((t - d, rescale(f)));
            }
        }
        if points.is_empty() {
            return Err(Error::NoSurvivingMass);
        }
        let (times, probs) = points.into_iter().unzip();
        Ok(DurationCdf { times, probs, mode: self.mode, counts: None })
    }

    fn from_counts(times: Vec<u64>, cumulative: Vec<u64>, total: u64) -> Self {
        let probs = cumulative.iter().map(|&c| c as f64 / total as f64).collect();
        DurationCdf {
            times,
            probs,
            mode: Interpolation::Step,
            counts: Some(CountBasis { cumulative, total }),
        }
    }

    /// Smallest `t` with `F(t) >= p`, in whole seconds.
    pub fn quantile(&self, p: f64) -> Result<Duration> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidInput(format!("quantile level {p} outside (0,1]")));
        }
        if p > self.f_max() {
            return Err(Error::QuantileUnattainable { p, f_max: self.f_max() });
        }
        let i = self.probs.partition_point(|&f| f < p);
        let t = match self.mode {
            Interpolation::Step => self.times[i],
            Interpolation::Linear if i == 0 => self.times[0],
            Interpolation::Linear => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let (f0, f1) = (self.probs[i - 1], self.probs[i]);
                let x = t0 as f64 + (p - f0) / (f1 - f0) * (t1 - t0) as f64;
                let mut q = (x.ceil() as u64).clamp(t0, t1);
                while q < t1 && self.eval(q as f64) < p {
                    q += 1;
                }
                q
            }
        };
        Ok(Duration::from_secs(t))
    }

    /// `max |F - G|` over every whole second up to `limit` (or the last
    /// breakpoint of either CDF).
    pub fn sup_distance(&self, other: &DurationCdf, limit: Option<u64>) -> f64 {
        let end = limit.unwrap_or_else(|| {
            *self.times.last().unwrap().max(other.times.last().unwrap())
        });
        let mut probe: Vec<u64> = self
            .times
            .iter()
            .chain(&other.times)
            .flat_map(|&t| [t.saturating_sub(1), t])
            .chain([0, end])
            .filter(|&t| t <= end)
            .collect();
        probe.sort_unstable();
        probe.dedup();
        probe
            .into_iter()
            .map(|t| (self.eval(t as f64) - other.eval(t as f64)).abs())
            .fold(0.0, f64::max)
    }
}

/// Step CDF of a multiset of waits: `F(t) = #{w <= t} / n`.
pub fn empirical_cdf(waits: &[Duration]) -> Result<DurationCdf> {
    if waits.is_empty() {
        return Err(Error::NoData);
    }
    let mut secs: Vec<u64> = waits.iter().map(|w| w.secs()).collect();
    secs.sort_unstable();
    let mut times = Vec::new();
    let mut cumulative = Vec::new();
    for (i, &s) in secs.iter().enumerate() {
        if times.last() == Some(&s) {
            *cumulative.last_mut().unwrap() = i as u64 + 1;
        } else {
            times.push(s);
            cumulative.push(i as u64 + 1);
        }
    }
    Ok(DurationCdf::from_counts(times, cumulative, secs.len() as u64))
}

/// Piecewise-linear CDF from a distribution over duration bins. Mass in the
/// open bin is withheld, leaving `F_max = 1 - p_open`.
pub fn cdf_from_leaf(dist: &[f64], binning: &DurationBinning) -> Result<DurationCdf> {
    if dist.len() != binning.n_bins() {
        return Err(Error::InvalidInput(format!(
            "{} probabilities for {} bins",
            dist.len(),
            binning.n_bins()
        )));
    }
    if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput("bin distribution must sum to 1".into()));
    }
    let mut points = vec![(0u64, 0.0)];
    let mut acc = 0.0;
    for (i, edge) in binning.edges().iter().enumerate() {
        acc += dist[i];
        points.push((edge.secs(), acc.min(1.0)));
    }
    DurationCdf::from_points(points, Interpolation::Linear)
}

/// Free-function form of [`DurationCdf::condition_on_elapsed`].
pub fn condition_on_elapsed(cdf: &DurationCdf, d: Duration) -> Result<DurationCdf> {
    cdf.condition_on_elapsed(d)
}

/// Free-function form of [`DurationCdf::quantile`].
pub fn quantile(cdf: &DurationCdf, p: f64) -> Result<Duration> {
    cdf.quantile(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mins(v: &[u64]) -> Vec<Duration> {
        v.iter().map(|&m| Duration::from_mins(m)).collect()
    }

    #[test]
    fn empirical_counts() {
        let f = empirical_cdf(&mins(&[5, 10, 20, 40])).unwrap();
        assert_eq!(f.at(Duration::from_mins(10)), 0.5);
        assert_eq!(f.at(Duration::from_mins(9)), 0.25);
        assert_eq!(f.at(Duration::from_mins(4)), 0.0);
        let one = empirical_cdf(&mins(&[7])).unwrap();
        assert_eq!(one.eval(419.0), 0.0);
        assert_eq!(one.eval(420.0), 1.0);
        let point = empirical_cdf(&mins(&[5, 5, 5])).unwrap();
        assert_eq!(point.points(), vec![(300, 1.0)]);
        assert!(matches!(empirical_cdf(&[]), Err(Error::NoData)));
    }

    #[test]
    fn leaf_cdf_is_piecewise_linear() {
        let b = DurationBinning::from_minutes(&[2, 5]).unwrap();
        let f = cdf_from_leaf(&[0.5, 0.5, 0.0], &b).unwrap();
        assert_eq!(f.at(Duration::from_mins(2)), 0.5);
        assert_eq!(f.at(Duration::from_mins(5)), 1.0);
        assert!((f.eval(210.0) - 0.75).abs() < 1e-12);

        let b = DurationBinning::default();
        let mut point = vec![0.0; 10];
        point[2] = 1.0;
        let f = cdf_from_leaf(&point, &b).unwrap();
        assert_eq!(f.at(Duration::from_mins(5)), 0.0);
        assert!((f.eval(450.0) - 0.5).abs() < 1e-12);
        assert_eq!(f.at(Duration::from_mins(10)), 1.0);

        let mut sub = vec![0.0; 10];
        sub[0] = 0.8;
        sub[9] = 0.2;
        assert!((cdf_from_leaf(&sub, &b).unwrap().f_max() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn conditioning_on_survivors() {
        let f = empirical_cdf(&mins(&[5, 10, 20, 40])).unwrap();
        let g = f.condition_on_elapsed(Duration::from_mins(10)).unwrap();
        assert_eq!(g.at(Duration::from_mins(10)), 0.5);
        assert_eq!(g.times(), &[600, 1800]);
        assert_eq!(f.condition_on_elapsed(Duration::ZERO).unwrap(), f);
        assert!(matches!(
            f.condition_on_elapsed(Duration::from_mins(40)),
            Err(Error::NoSurvivingMass)
        ));
    }

    #[test]
    fn linear_conditioning_identity_and_exhaustion() {
        let b = DurationBinning::default();
        let mut dist = vec![0.1; 10];
        dist[9] = 0.1;
        let f = cdf_from_leaf(&dist, &b).unwrap();
        assert_eq!(f.condition_on_elapsed(Duration::ZERO).unwrap(), f);
        let mut early = vec![0.0; 10];
        early[0] = 0.5;
        early[9] = 0.5;
        let g = cdf_from_leaf(&early, &b).unwrap();
        assert!(matches!(
            g.condition_on_elapsed(Duration::from_mins(3)),
            Err(Error::NoSurvivingMass)
        ));
    }

    #[test]
    fn quantiles() {
        let f = empirical_cdf(&mins(&[5, 10, 20, 40])).unwrap();
        assert_eq!(f.quantile(0.9).unwrap(), Duration::from_mins(40));
        assert_eq!(f.quantile(1e-12).unwrap(), Duration::from_mins(5));
        assert_eq!(f.quantile(0.5).unwrap(), Duration::from_mins(10));
        let sub = DurationCdf::from_points(vec![(0, 0.0), (600, 0.8)], Interpolation::Linear).unwrap();
        assert!(matches!(sub.quantile(0.9), Err(Error::QuantileUnattainable { .. })));
        assert_eq!(sub.quantile(0.4).unwrap(), Duration::from_secs(300));
        assert!(f.quantile(0.0).is_err());
        assert!(f.quantile(1.5).is_err());
    }

    #[test]
    fn rejects_improper_points() {
        assert!(DurationCdf::from_points(vec![(1, 0.5), (1, 0.6)], Interpolation::Step).is_err());
        assert!(DurationCdf::from_points(vec![(1, 0.5), (2, 0.4)], Interpolation::Step).is_err());
        assert!(DurationCdf::from_points(vec![(1, 1.5)], Interpolation::Step).is_err());
    }

    fn linear_cdf() -> impl Strategy<Value = DurationCdf> {
        prop::collection::vec((1u64..600, 0.0f64..1.0), 1..12).prop_map(|steps| {
            let mut t = 0;
            let mut points = vec![(0, 0.0)];
            let total: f64 = steps.iter().map(|s| s.1).sum::<f64>() + 0.3;
            let mut acc = 0.0;
            for (dt, w) in steps {
                t += dt;
                acc += w / total;
                points.push((t, acc.min(1.0)));
            }
            DurationCdf::from_points(points, Interpolation::Linear).unwrap()
        })
    }

    proptest! {
        #[test]
        fn linear_semigroup(f in linear_cdf(), d1 in 0u64..2000, d2 in 0u64..2000) {
            let (a, b) = (Duration::from_secs(d1), Duration::from_secs(d2));
            let Ok(whole) = f.condition_on_elapsed(a + b) else { return Ok(()); };
            let step = f.condition_on_elapsed(a).unwrap().condition_on_elapsed(b).unwrap();
            for &t in whole.times().iter().chain(step.times()) {
                prop_assert!((whole.eval(t as f64) - step.eval(t as f64)).abs() < 1e-9);
            }
        }

        #[test]
        fn linear_galois(f in linear_cdf(), p in 0.001f64..1.0) {
            if let Ok(q) = f.quantile(p) {
                prop_assert!(f.at(q) >= p);
            }
            for &t in f.times() {
                let ft = f.eval(t as f64);
                if ft > 0.0 {
                    prop_assert!(f.quantile(ft).unwrap().secs() <= t);
                }
            }
        }
    }
}
