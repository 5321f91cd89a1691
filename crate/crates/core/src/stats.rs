//! Descriptive statistics of appliance usage.
//!
//! Energy is integrated with the trapezoidal rule over the raw timestamps.
//! Consecutive samples further apart than the gap threshold contribute no
//! energy, so gaps never fabricate consumption.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::diagnostics::{default_gap_threshold, detect_gaps};
use crate::error::{Error, Result};
use crate::model::{Building, Channel, DataSet, Gap, Measurement};
use crate::preprocessing::Aggregation;

/// Default power above which an appliance counts as on, in W.
pub const DEFAULT_ON_THRESHOLD: f64 = 10.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const JOULES_PER_KWH: f64 = 3.6e6;

fn segments(c: &Channel, gap_threshold: f64) -> Result<impl Iterator<Item = (f64, f64)> + '_> {
    let p = c.require(Measurement::POWER_ACTIVE)?;
    let ts = c.timestamps();
    Ok((1..ts.len()).filter_map(move |i| {
        let dt = ts[i] - ts[i - 1];
        (dt <= gap_threshold).then(|| (ts[i - 1], 0.5 * (p[i - 1] + p[i]) * dt))
    }))
}

/// Active energy of a channel in joules.
pub fn energy(c: &Channel, gap_threshold: Option<f64>) -> Result<f64> {
    let threshold = gap_threshold.unwrap_or_else(|| default_gap_threshold(c));
    Ok(segments(c, threshold)?.map(|(_, e)| e).sum())
}

/// Energy per UTC day (days since the epoch), attributing each trapezoid
/// segment to the day it starts in.
pub fn daily_energy(c: &Channel, gap_threshold: Option<f64>) -> Result<BTreeMap<i64, f64>> {
    let threshold = gap_threshold.unwrap_or_else(|| default_gap_threshold(c));
    let mut out = BTreeMap::new();
    for (t, e) in segments(c, threshold)? {
        *out.entry((t / SECONDS_PER_DAY).floor() as i64).or_insert(0.0) += e;
    }
    Ok(out)
}

/// Drops samples strictly inside any gap; `gaps` must be sorted by start.
pub(crate) fn remove_inside(c: &Channel, gaps: &[Gap]) -> Channel {
    if gaps.is_empty() {
        return c.clone();
    }
    let mut g = 0;
    c.filter_rows(|_, t| {
        while g < gaps.len() && gaps[g].end <= t {
            g += 1;
        }
        !(g < gaps.len() && gaps[g].contains(t))
    })
}

pub(crate) fn mains_gaps(b: &Building, gap_threshold: Option<f64>) -> Vec<Gap> {
    let mut gaps: Vec<Gap> = b
        .mains
        .iter()
        .flat_map(|m| detect_gaps(m, gap_threshold.unwrap_or_else(|| default_gap_threshold(m))))
        .collect();
    gaps.sort_by(|a, b| a.start.total_cmp(&b.start));
    gaps
}


/// Appliance energy over mains energy, after masking mains gaps out of every
/// appliance channel. Values above 1 indicate overlapping meters.
pub fn proportion_energy_submetered(b: &Building, gap_threshold: Option<f64>) -> Result<f64> {
    if b.mains.is_empty() {
        return Err(Error::InvalidInput(format!("building {} has no mains", b.id)));
    }
    let gaps = mains_gaps(b, gap_threshold);
    let mut mains = 0.0;
    for m in &b.mains {
        mains += energy(m, gap_threshold)?;
    }
    if mains <= 0.0 {
        return Err(Error::NoMainsEnergy);
    }
    let mut submetered = 0.0;
    for c in b.appliances.values() {
        submetered += energy(&remove_inside(c, &gaps), gap_threshold)?;
    }
    Ok(submetered / mains)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceEnergy {
    pub name: String,
    /// Joules.
    pub energy: f64,
    /// Share of the summed appliance energy.
    pub fraction: f64,
}

/// Energy of every appliance, in name order.
pub fn appliance_energies(b: &Building) -> Result<Vec<ApplianceEnergy>> {
    let mut out = Vec::with_capacity(b.appliances.len());
    for (name, c) in &b.appliances {
        out.push(ApplianceEnergy {
            name: name.clone(),
            energy: energy(c, None)?,
            fraction: 0.0,
        });
    }
    let total: f64 = out.iter().map(|a| a.energy).sum();
    for a in &mut out {
        a.fraction = if total > 0.0 { a.energy / total } else { 0.0 };
    }
    Ok(out)
}

/// The `k` highest-energy appliances, descending; ties by name.
pub fn top_k_appliances(b: &Building, k: usize) -> Result<Vec<ApplianceEnergy>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut all = appliance_energies(b)?;
    all.sort_by(|a, b| b.energy.total_cmp(&a.energy).then_with(|| a.name.cmp(&b.name)));
    all.truncate(k);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (i, n) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], n));
        }
        out
    }

    /// Midpoint of the most populated bin (first on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = i;
            }
        }
        0.5 * (self.bin_edges[best] + self.bin_edges[best + 1])
    }
}

/// Equal-width bins over `[min, max]` of active power; the maximum falls in
/// the last bin. A constant channel gets unit-width bins starting at its value.
pub fn power_histogram(c: &Channel, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    let p = c.require(Measurement::POWER_ACTIVE)?;
    if p.is_empty() {
        return Err(Error::InvalidInput(format!("channel `{}` is empty", c.id())));
    }
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for &x in p {
        let i = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

/// Samples above `on_threshold` per UTC hour of day.
pub fn usage_histogram_hour_of_day(c: &Channel, on_threshold: f64) -> Result<[u64; 24]> {
    usage_histogram_hour_of_day_local(c, on_threshold, 0)
}

/// As [`usage_histogram_hour_of_day`], shifted by a fixed UTC offset in seconds.
pub fn usage_histogram_hour_of_day_local(c: &Channel, on_threshold: f64, utc_offset: i64) -> Result<[u64; 24]> {
    let p = c.require(Measurement::POWER_ACTIVE)?;
    let mut hours = [0u64; 24];
    for (&t, &w) in c.timestamps().iter().zip(p) {
        if w > on_threshold {
            let local = (t.floor() as i64 + utc_offset).rem_euclid(86_400);
            hours[(local / 3600) as usize] += 1;
        }
    }
    Ok(hours)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct OnOffDurations {
    pub on: Vec<f64>,
    pub off: Vec<f64>,
}

/// Lengths of maximal on and off runs in seconds. Each sample holds its
/// state until the next sample; intervals across gaps belong to no run, so
/// runs bordering a gap end at it.
pub fn on_off_durations(c: &Channel, on_threshold: f64, gap_threshold: Option<f64>) -> Result<OnOffDurations> {
    let threshold = gap_threshold.unwrap_or_else(|| default_gap_threshold(c));
    let p = c.require(Measurement::POWER_ACTIVE)?;
    let ts = c.timestamps();
    let mut out = OnOffDurations::default();
    let mut current: Option<(bool, f64)> = None;
    let flush = |out: &mut OnOffDurations, run: Option<(bool, f64)>| {
        if let Some((on, d)) = run {
            if on {
                out.on.push(d);
            } else {
                out.off.push(d);
            }
        }
    };
    for i in 1..ts.len() {
        let dt = ts[i] - ts[i - 1];
        if dt > threshold {
            flush(&mut out, current.take());
            continue;
        }
        let on = p[i - 1] > on_threshold;
        current = match current {
            Some((state, d)) if state == on => Some((state, d + dt)),
            other => {
                flush(&mut out, other);
                Some((on, dt))
            }
        };
    }
    flush(&mut out, current);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionResult {
    pub fn to_csv(&self) -> String {
        format!(
            "slope,intercept,r_squared,n\n{},{},{},{}\n",
            self.slope, self.intercept, self.r_squared, self.n
        )
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::TooFewSamples(format!("regression needs at least 2 paired points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared,
        n,
    })
}

/// Regresses daily appliance energy (kWh) on an external daily series keyed
/// by days since the epoch, over the days both cover.
pub fn correlate_daily(app: &Channel, external: &BTreeMap<i64, f64>) -> Result<RegressionResult> {
    let daily = daily_energy(app, None)?;
    let (x, y): (Vec<f64>, Vec<f64>) = daily
        .iter()
        .filter_map(|(day, e)| external.get(day).map(|v| (*v, e / JOULES_PER_KWH)))
        .unzip();
    if x.len() < 2 {
        return Err(Error::TooFewSamples(format!("only {} overlapping day(s)", x.len())));
    }
    linear_regression(&x, &y)
}

/// Pearson correlation of two channels after resampling both to one-minute
/// means and pairing the shared timestamps.
pub fn pearson_correlation(a: &Channel, b: &Channel) -> Result<f64> {
    let anchor = match (a.first(), b.first()) {
        (Some(x), Some(y)) => (x.min(y) / 60.0).floor() * 60.0,
        _ => return Err(Error::TooFewSamples("empty channel".into())),
    };
    let resample = |c: &Channel| {
        crate::preprocessing::downsample_anchored(&c.clone().with_nominal_period(c.nominal_period().min(60.0)), 60.0, Aggregation::Mean, anchor)
    };
    let ra = resample(a)?;
    let rb = resample(b)?;
    let common = crate::model::intersect_sorted(ra.timestamps(), rb.timestamps());
    if common.len() < 2 {
        return Err(Error::TooFewSamples("fewer than 2 shared minutes".into()));
    }
    let x = crate::training::values_at(&ra, Measurement::POWER_ACTIVE, &common)?;
    let y = crate::training::values_at(&rb, Measurement::POWER_ACTIVE, &common)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput("constant series has no correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Mean daily energy of one appliance meter in one building.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceDailyEnergy {
    pub dataset: String,
    pub building: u32,
    pub appliance: String,
    pub country: Option<String>,
    pub kwh_per_day: f64,
}

/// Every meter of a canonical appliance type across datasets, e.g. to
/// compare fridges between countries.
pub fn appliance_daily_energy_across(datasets: &[DataSet], appliance: &str) -> Result<Vec<ApplianceDailyEnergy>> {
    let mut out = Vec::new();
    for ds in datasets {
        for b in ds.buildings.values() {
            for (name, c) in &b.appliances {
                if crate::vocab::strip_instance(name) != appliance {
                    continue;
                }
                let daily = daily_energy(c, None)?;
                if daily.is_empty() {
                    continue;
                }
                let mean = daily.values().sum::<f64>() / daily.len() as f64;
                out.push(ApplianceDailyEnergy {
                    dataset: ds.name.clone(),
                    building: b.id,
                    appliance: name.clone(),
                    country: b.metadata.get("country").and_then(|v| v.as_str()).map(str::to_string),
                    kwh_per_day: mean / JOULES_PER_KWH,
                });
            }
        }
    }
    Ok(out)
}

/// Mean daily mains energy per country, over every building that reports one.
pub fn daily_mains_energy_by_country(datasets: &[DataSet]) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ds in datasets {
        for b in ds.buildings.values() {
            let Some(country) = b.metadata.get("country").and_then(|v| v.as_str()) else {
                continue;
            };
            let Ok(agg) = b.aggregate(Measurement::POWER_ACTIVE) else {
                continue;
            };
            let daily = daily_energy(&agg, None)?;
            if daily.is_empty() {
                continue;
            }
            let e = acc.entry(country.to_string()).or_insert((0.0, 0));
            e.0 += daily.values().sum::<f64>() / daily.len() as f64 / JOULES_PER_KWH;
            e.1 += 1;
        }
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(id: &str, ts: Vec<f64>, w: Vec<f64>, period: f64) -> Channel {
        Channel::power(id, ts, w, period).unwrap()
    }

    fn uniform(id: &str, n: usize, period: f64, watts: f64) -> Channel {
        power(id, (0..n).map(|i| i as f64 * period).collect(), vec![watts; n], period)
    }

    #[test]
    fn trapezoid_energy_skips_gaps() {
        let c = power("a", vec![0.0, 1.0, 2.0, 100.0, 101.0], vec![10.0, 20.0, 10.0, 10.0, 10.0], 1.0);
        // 15 + 15 + (gap) + 10
        assert_eq!(energy(&c, None).unwrap(), 40.0);
    }

    #[test]
    fn full_coverage_is_one() {
        let mut b = Building::new(1);
        b.mains.push(uniform("mains_1", 100, 1.0, 300.0));
        b.appliances.insert("fridge".into(), uniform("fridge", 100, 1.0, 100.0));
        b.appliances.insert("kettle".into(), uniform("kettle", 100, 1.0, 200.0));
        assert_eq!(proportion_energy_submetered(&b, None).unwrap(), 1.0);
    }

    #[test]
    fn overlapping_meters_exceed_one() {
        let mut b = Building::new(1);
        b.mains.push(uniform("mains_1", 100, 1.0, 100.0));
        b.appliances.insert("subpanel".into(), uniform("subpanel", 100, 1.0, 100.0));
        b.appliances.insert("fridge".into(), uniform("fridge", 100, 1.0, 60.0));
        let p = proportion_energy_submetered(&b, None).unwrap();
        assert!((p - 1.6).abs() < 1e-12);
    }

    #[test]
    fn mains_gaps_masked_out_of_appliances() {
        let mut b = Building::new(1);
        let ts: Vec<f64> = (0..100).map(f64::from).filter(|t| !(41.0..60.0).contains(t)).collect();
        let n = ts.len();
        b.mains.push(power("mains_1", ts, vec![100.0; n], 1.0));
        b.appliances.insert("fridge".into(), uniform("fridge", 100, 1.0, 100.0));
        assert_eq!(proportion_energy_submetered(&b, None).unwrap(), 1.0);
    }

    #[test]
    fn zero_mains_energy_errors() {
        let mut b = Building::new(1);
        b.mains.push(uniform("mains_1", 10, 1.0, 0.0));
        assert!(matches!(proportion_energy_submetered(&b, None), Err(Error::NoMainsEnergy)));
    }

    #[test]
    fn top_k_ranking() {
        let mut b = Building::new(1);
        b.appliances.insert("television".into(), uniform("television", 11, 3600.0, 500.0));
        b.appliances.insert("fridge".into(), uniform("fridge", 11, 3600.0, 1000.0));
        let top = top_k_appliances(&b, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].name, "fridge");
        assert_eq!(top[0].energy, 10.0 * JOULES_PER_KWH);
        let all = top_k_appliances(&b, 5).unwrap();
        assert_eq!(all.len(), 2);
        assert!((all.iter().map(|a| a.fraction).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(top_k_appliances(&b, 0).is_err());
    }

    #[test]
    fn top_k_ties_by_name() {
        let mut b = Building::new(1);
        b.appliances.insert("lighting".into(), uniform("lighting", 3, 1.0, 50.0));
        b.appliances.insert("kettle".into(), uniform("kettle", 3, 1.0, 50.0));
        let names: Vec<_> = top_k_appliances(&b, 2).unwrap().into_iter().map(|a| a.name).collect();
        assert_eq!(names, vec!["kettle", "lighting"]);
    }

    #[test]
    fn histograms() {
        let h = power_histogram(&uniform("c", 50, 1.0, 100.0), 10).unwrap();
        assert_eq!(h.counts.iter().filter(|&&n| n > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 50);

        let w: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { 1000.0 } else { 0.0 }).collect();
        let c = power("c", (0..40).map(f64::from).collect(), w, 1.0);
        let h = power_histogram(&c, 10).unwrap();
        assert_eq!(h.counts[0], 30);
        assert_eq!(h.counts[9], 10);
        assert_eq!(h.counts[1..9].iter().sum::<u64>(), 0);
        assert_eq!(h.to_csv().lines().count(), 11);

        let empty = Channel::power("e", vec![], vec![], 1.0).unwrap();
        assert!(power_histogram(&empty, 10).is_err());
    }

    #[test]
    fn hour_of_day_buckets() {
        let ts: Vec<f64> = (0..24 * 60).map(|m| 1_300_000_000.0 - 1_300_000_000.0 % 86_400.0 + m as f64 * 60.0).collect();
        let w: Vec<f64> = (0..24 * 60).map(|m| if (480..540).contains(&m) { 200.0 } else { 0.0 }).collect();
        let c = power("c", ts.clone(), w, 60.0);
        let h = usage_histogram_hour_of_day(&c, DEFAULT_ON_THRESHOLD).unwrap();
        assert_eq!(h[8], 60);
        assert_eq!(h.iter().sum::<u64>(), 60);
        let shifted = usage_histogram_hour_of_day_local(&c, DEFAULT_ON_THRESHOLD, 3600).unwrap();
        assert_eq!(shifted[9], 60);
        let off = power("c", ts, vec![0.0; 24 * 60], 60.0);
        assert_eq!(usage_histogram_hour_of_day(&off, DEFAULT_ON_THRESHOLD).unwrap(), [0; 24]);
    }

    #[test]
    fn on_off_runs() {
        let all_on = uniform("c", 10, 1.0, 100.0);
        let d = on_off_durations(&all_on, 10.0, None).unwrap();
        assert_eq!(d.on, vec![9.0]);
        assert!(d.off.is_empty());

        let w: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 100.0 } else { 0.0 }).collect();
        let alt = power("c", (0..10).map(f64::from).collect(), w, 1.0);
        let d = on_off_durations(&alt, 10.0, None).unwrap();
        assert!(d.on.iter().chain(&d.off).all(|&x| x == 1.0));
        assert_eq!(d.on.len() + d.off.len(), 9);

        let empty = Channel::power("e", vec![], vec![], 1.0).unwrap();
        assert_eq!(on_off_durations(&empty, 10.0, None).unwrap(), OnOffDurations::default());

        let gapped = power("c", vec![0.0, 1.0, 2.0, 50.0, 51.0], vec![100.0; 5], 1.0);
        assert_eq!(on_off_durations(&gapped, 10.0, None).unwrap().on, vec![2.0, 1.0]);
    }

    #[test]
    fn regression_perfect_fit() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let r = linear_regression(&x, &y).unwrap();
        assert!((r.slope - 3.0).abs() < 1e-12);
        assert!((r.intercept + 2.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(r.n, 10);
        assert!(linear_regression(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn daily_correlation_needs_overlap() {
        let c = uniform("boiler", 48, 3600.0, 1000.0);
        let mut ext = BTreeMap::new();
        ext.insert(0, 5.0);
        assert!(matches!(correlate_daily(&c, &ext), Err(Error::TooFewSamples(_))));
    }

    #[test]
    fn pearson_of_identical_channels() {
        let w: Vec<f64> = (0..600).map(|i| ((i / 60) % 3) as f64 * 100.0).collect();
        let a = power("a", (0..600).map(f64::from).collect(), w.clone(), 1.0);
        let b = power("b", (0..600).map(f64::from).collect(), w.iter().map(|x| 2.0 * x + 5.0).collect(), 1.0);
        assert!((pearson_correlation(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_dataset_query() {
        let mut b = Building::new(1);
        b.metadata.insert("country".into(), "UK".into());
        b.mains.push(uniform("mains_1", 25, 3600.0, 1000.0));
        b.appliances.insert("fridge".into(), uniform("fridge", 25, 3600.0, 100.0));
        let mut ds = DataSet::new("a");
        ds.buildings.insert(1, b);
        let rows = appliance_daily_energy_across(&[ds.clone()], "fridge").unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].kwh_per_day - 2.4).abs() < 1e-9);
        assert_eq!(rows[0].country.as_deref(), Some("UK"));
        let by_country = daily_mains_energy_by_country(&[ds]).unwrap();
        assert!((by_country["UK"] - 24.0).abs() < 1e-9);
    }
}
