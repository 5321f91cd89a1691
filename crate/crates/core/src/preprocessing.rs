//! Cleaning and reshaping of channels and buildings before training.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{default_gap_threshold, detect_gaps};
use crate::error::{Error, Result};
use crate::model::{common_timestamps, Building, Channel, Gap, Measurement};
use crate::stats::{self, remove_inside};

/// Default maximum hole bridged by [`interpolate_small_gaps`], in nominal periods.
pub const DEFAULT_MAX_GAP_FACTOR: f64 = 5.0;
/// Power-law exponent for resistive and motor-dominated loads.
pub const DEFAULT_BETA: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Mode,
    First,
}

impl Aggregation {
    fn apply(self, xs: &mut [f64]) -> f64 {
        match self {
            Aggregation::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Aggregation::First => xs[0],
            Aggregation::Median => {
                xs.sort_by(f64::total_cmp);
                let n = xs.len();
                if n % 2 == 1 {
                    xs[n / 2]
                } else {
                    0.5 * (xs[n / 2 - 1] + xs[n / 2])
                }
            }
            Aggregation::Mode => {
                xs.sort_by(f64::total_cmp);
                let (mut best, mut best_n) = (xs[0], 0);
                let mut i = 0;
                while i < xs.len() {
                    let mut j = i;
                    while j < xs.len() && xs[j] == xs[i] {
                        j += 1;
                    }
                    if j - i > best_n {
                        best = xs[i];
                        best_n = j - i;
                    }
                    i = j;
                }
                best
            }
        }
    }
}

/// Bins `[edge, edge + period)` anchored at the first timestamp.
pub fn downsample(c: &Channel, period: f64, agg: Aggregation) -> Result<Channel> {
    match c.first() {
        Some(t0) => downsample_anchored(c, period, agg, t0),
        None => {
            check_period(c, period)?;
            Ok(c.clone().with_nominal_period(period))
        }
    }
}

fn check_period(c: &Channel, period: f64) -> Result<()> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid period {period}")));
    }
    if period < c.nominal_period() {
        return Err(Error::Upsampling {
            requested: period,
            nominal: c.nominal_period(),
        });
    }
    Ok(())
}

/// As [`downsample`] with bins anchored at `anchor` (which must not follow
/// the first sample).
pub fn downsample_anchored(c: &Channel, period: f64, agg: Aggregation, anchor: f64) -> Result<Channel> {
    check_period(c, period)?;
    if c.first().is_some_and(|t| t < anchor) {
        return Err(Error::InvalidInput(format!("anchor {anchor} follows the first sample of `{}`", c.id())));
    }
    let ts = c.timestamps();
    let mut bins: Vec<(f64, usize, usize)> = Vec::new();
    let mut start = 0;
    while start < ts.len() {
        let k = ((ts[start] - anchor) / period).floor();
        let edge = anchor + k * period;
        let next = anchor + (k + 1.0) * period;
        let mut end = start;
        while end < ts.len() && ts[end] < next {
            end += 1;
        }
        bins.push((edge, start, end));
        start = end;
    }
    let timestamps = bins.iter().map(|b| b.0).collect();
    let columns: BTreeMap<Measurement, Vec<f64>> = c
        .columns()
        .iter()
        .map(|(m, v)| {
            let agg_values = bins
                .iter()
                .map(|&(_, a, b)| agg.apply(&mut v[a..b].to_vec()))
                .collect();
            (*m, agg_values)
        })
        .collect();
    Channel::new(c.id(), timestamps, columns, period)
}

/// Downsamples every channel with bins anchored at the earliest timestamp in
/// the building, so bin edges line up across channels.
pub fn downsample_building(b: &Building, period: f64, agg: Aggregation) -> Result<Building> {
    let anchor = b.channels().filter_map(Channel::first).fold(f64::INFINITY, f64::min);
    b.try_map_channels(|c| {
        if c.is_empty() {
            downsample(c, period, agg)
        } else {
            downsample_anchored(c, period, agg, anchor)
        }
    })
}

/// Scales active power by `(v_nominal / v_observed)^beta` row by row.
pub fn normalize_voltage(c: &Channel, v_nominal: f64, beta: f64) -> Result<Channel> {
    if !(v_nominal > 0.0) {
        return Err(Error::InvalidInput(format!("nominal voltage must be positive, got {v_nominal}")));
    }
    let volts = c.require(Measurement::VOLTAGE)?;
    let power = c.require(Measurement::POWER_ACTIVE)?;
    if let Some(v) = volts.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("`{}` has non-positive voltage {v}", c.id())));
    }
    let scaled = power
        .iter()
        .zip(volts)
        .map(|(p, v)| (v_nominal / v).powf(beta) * p)
        .collect();
    c.clone().with_column(Measurement::POWER_ACTIVE, scaled)
}

/// Removes rows whose `m` lies outside `[lo, hi]`; use infinities for an
/// open bound.
pub fn filter_out_implausible(c: &Channel, m: Measurement, lo: f64, hi: f64) -> Result<Channel> {
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty range [{lo}, {hi}]")));
    }
    let values = c.require(m)?;
    Ok(c.filter_rows(|i, _| (lo..=hi).contains(&values[i])))
}

/// Forward-fills holes no longer than `max_gap` at nominal-period spacing.
pub fn interpolate_small_gaps(c: &Channel, max_gap: f64) -> Result<Channel> {
    if !(max_gap > 0.0) {
        return Err(Error::InvalidInput(format!("max_gap must be positive, got {max_gap}")));
    }
    let p = c.nominal_period();
    let ts = c.timestamps();
    let mut source = Vec::with_capacity(ts.len());
    let mut timestamps = Vec::with_capacity(ts.len());
    for i in 0..ts.len() {
        timestamps.push(ts[i]);
        source.push(i);
        if i + 1 == ts.len() {
            break;
        }
        let dt = ts[i + 1] - ts[i];
        if dt > p && dt <= max_gap {
            let mut k = 1.0;
            while ts[i] + k * p < ts[i + 1] - 0.5 * p {
                timestamps.push(ts[i] + k * p);
                source.push(i);
                k += 1.0;
            }
        }
    }
    let columns = c
        .columns()
        .iter()
        .map(|(m, v)| (*m, source.iter().map(|&i| v[i]).collect()))
        .collect();
    Channel::new(c.id(), timestamps, columns, p)
}

fn qualifying(b: &Building, keep: impl Fn(usize, &stats::ApplianceEnergy) -> bool) -> Result<Building> {
    let mut ranked = stats::appliance_energies(b)?;
    ranked.sort_by(|a, b| b.energy.total_cmp(&a.energy).then_with(|| a.name.cmp(&b.name)));
    let names: Vec<String> = ranked
        .iter()
        .enumerate()
        .filter(|(i, a)| keep(*i, a))
        .map(|(_, a)| a.name.clone())
        .collect();
    if names.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let mut out = b.clone();
    out.appliances.retain(|n, _| names.contains(n));
    let dropped = |meter: &str| b.appliances.contains_key(meter) && !names.iter().any(|n| n == meter);
    out.wiring.retain(|(p, c)| !dropped(p) && !dropped(c));
    Ok(out)
}

/// Keeps the `k` highest-energy appliances.
pub fn filter_top_k(b: &Building, k: usize) -> Result<Building> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    qualifying(b, |i, _| i < k)
}

/// Keeps appliances whose share of the summed appliance energy exceeds `x`.
pub fn filter_contribution(b: &Building, x: f64) -> Result<Building> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidInput(format!("contribution threshold must be in (0, 1), got {x}")));
    }
    qualifying(b, |_, a| a.fraction > x)
}

/// Removes appliance rows inside mains gaps and mains rows inside the gaps of
/// any appliance.
pub fn intersect_with_mains(b: &Building, gap_threshold: Option<f64>) -> Result<Building> {
    if b.mains.is_empty() {
        return Err(Error::InvalidInput(format!("building {} has no mains", b.id)));
    }
    let mains_gaps = stats::mains_gaps(b, gap_threshold);
    let mut app_gaps: Vec<Gap> = b
        .appliances
        .values()
        .flat_map(|c| detect_gaps(c, gap_threshold.unwrap_or_else(|| default_gap_threshold(c))))
        .collect();
    app_gaps.sort_by(|a, b| a.start.total_cmp(&b.start));

    let mut out = b.clone();
    for c in out.appliances.values_mut() {
        *c = remove_inside(c, &mains_gaps);
    }
    for c in &mut out.mains {
        *c = remove_inside(c, &app_gaps);
    }
    Ok(out)
}

/// Restricts mains and appliances to the timestamps they all share.
pub fn align_common_index(b: &Building) -> Building {
    let common = common_timestamps(b.mains.iter().chain(b.appliances.values()));
    let mut out = b.clone();
    for c in out.mains.iter_mut().chain(out.appliances.values_mut()) {
        *c = keep_timestamps(c, &common);
    }
    out
}

fn keep_timestamps(c: &Channel, sorted: &[f64]) -> Channel {
    let mut j = 0;
    c.filter_rows(|_, t| {
        while j < sorted.len() && sorted[j] < t {
            j += 1;
        }
        j < sorted.len() && sorted[j] == t
    })
}

/// Whether every mains and appliance channel has exactly the same timestamps.
pub fn is_aligned(b: &Building) -> bool {
    let mut channels = b.mains.iter().chain(b.appliances.values());
    match channels.next() {
        None => true,
        Some(first) => channels.all(|c| c.timestamps() == first.timestamps()),
    }
}

/// Temporal split of an aligned building: the first `floor(n * fraction)`
/// samples train, the rest test.
pub fn train_test_split(b: &Building, fraction: f64) -> Result<(Building, Building)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    if !is_aligned(b) {
        return Err(Error::NotAligned("channels do not share one index; align first".into()));
    }
    let index = b
        .mains
        .first()
        .or_else(|| b.appliances.values().next())
        .map(|c| c.timestamps().to_vec())
        .unwrap_or_default();
    let n = index.len();
    let n_train = (n as f64 * fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::TooFewSamples(format!(
            "split of {n} samples at {fraction} leaves a side empty"
        )));
    }
    let cut = index[n_train];
    let mut train = b.clone();
    let mut test = b.clone();
    for c in train.mains.iter_mut().chain(train.appliances.values_mut()) {
        *c = c.filter_rows(|_, t| t < cut);
    }
    for c in test.mains.iter_mut().chain(test.appliances.values_mut()) {
        *c = c.filter_rows(|_, t| t >= cut);
    }
    for c in train.circuits.iter_mut() {
        *c = c.filter_rows(|_, t| t < cut);
    }
    for c in test.circuits.iter_mut() {
        *c = c.filter_rows(|_, t| t >= cut);
    }
    Ok((train, test))
}

/// One configurable preprocessing step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Downsample {
        period: f64,
        #[serde(default)]
        agg: Aggregation,
    },
    NormalizeVoltage {
        v_nominal: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    FilterOutImplausible {
        measurement: Measurement,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    InterpolateSmallGaps {
        #[serde(default)]
        max_gap: Option<f64>,
    },
    FilterTopK {
        k: usize,
    },
    FilterContribution {
        fraction: f64,
    },
    IntersectWithMains {
        #[serde(default)]
        gap_threshold: Option<f64>,
    },
    AlignCommonIndex,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl Step {
    /// Applies the step to a building. Channel-level steps touch only the
    /// channels carrying the measurement they need.
    pub fn apply(&self, b: &Building) -> Result<Building> {
        match *self {
            Step::Downsample { period, agg } => downsample_building(b, period, agg),
            Step::NormalizeVoltage { v_nominal, beta } => {
                if !b.channels().any(|c| c.has(Measurement::VOLTAGE)) {
                    return Err(Error::MissingColumn {
                        channel: format!("building {}", b.id),
                        measurement: Measurement::VOLTAGE.column_name(),
                    });
                }
                b.try_map_channels(|c| {
                    if c.has(Measurement::VOLTAGE) && c.has(Measurement::POWER_ACTIVE) {
                        normalize_voltage(c, v_nominal, beta)
                    } else {
                        Ok(c.clone())
                    }
                })
            }
            Step::FilterOutImplausible { measurement, lo, hi } => {
                let (lo, hi) = (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
                b.try_map_channels(|c| {
                    if c.has(measurement) {
                        filter_out_implausible(c, measurement, lo, hi)
                    } else {
                        Ok(c.clone())
                    }
                })
            }
            Step::InterpolateSmallGaps { max_gap } => b.try_map_channels(|c| {
                interpolate_small_gaps(c, max_gap.unwrap_or(DEFAULT_MAX_GAP_FACTOR * c.nominal_period()))
            }),
            Step::FilterTopK { k } => filter_top_k(b, k),
            Step::FilterContribution { fraction } => filter_contribution(b, fraction),
            Step::IntersectWithMains { gap_threshold } => intersect_with_mains(b, gap_threshold),
            Step::AlignCommonIndex => Ok(align_common_index(b)),
        }
    }
}

pub fn apply_steps(b: &Building, steps: &[Step]) -> Result<Building> {
    let mut out = b.clone();
    for step in steps {
        out = step.apply(&out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(ts: Vec<f64>, w: Vec<f64>, period: f64) -> Channel {
        Channel::power("c", ts, w, period).unwrap()
    }

    fn seq(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    fn watts(c: &Channel) -> &[f64] {
        c.column(Measurement::POWER_ACTIVE).unwrap()
    }

    #[test]
    fn downsample_constant() {
        let c = power(seq(3600), vec![100.0; 3600], 1.0);
        let d = downsample(&c, 60.0, Aggregation::Mean).unwrap();
        assert_eq!(d.len(), 60);
        assert!(watts(&d).iter().all(|&w| w == 100.0));
        assert_eq!(d.nominal_period(), 60.0);
        assert_eq!(d.timestamps()[1], 60.0);
    }

    #[test]
    fn downsample_hand_example() {
        let c = power(vec![0.0, 30.0], vec![0.0, 100.0], 30.0);
        let d = downsample(&c, 60.0, Aggregation::Mean).unwrap();
        assert_eq!(d.timestamps(), &[0.0]);
        assert_eq!(watts(&d), &[50.0]);
    }

    #[test]
    fn downsample_empty_bin_absent() {
        let c = power(vec![0.0, 10.0, 130.0], vec![1.0, 3.0, 5.0], 10.0);
        let d = downsample(&c, 60.0, Aggregation::Mean).unwrap();
        assert_eq!(d.timestamps(), &[0.0, 120.0]);
        assert_eq!(watts(&d), &[2.0, 5.0]);
    }

    #[test]
    fn aggregations() {
        let c = power(seq(5), vec![3.0, 1.0, 3.0, 1.0, 7.0], 1.0);
        let get = |agg| watts(&downsample(&c, 5.0, agg).unwrap())[0];
        assert_eq!(get(Aggregation::Mean), 3.0);
        assert_eq!(get(Aggregation::Median), 3.0);
        assert_eq!(get(Aggregation::Mode), 1.0);
        assert_eq!(get(Aggregation::First), 3.0);
        let even = power(seq(4), vec![4.0, 1.0, 2.0, 3.0], 1.0);
        assert_eq!(watts(&downsample(&even, 4.0, Aggregation::Median).unwrap())[0], 2.5);
    }

    #[test]
    fn upsampling_rejected() {
        let c = power(seq(10), vec![0.0; 10], 60.0);
        let err = downsample(&c, 30.0, Aggregation::Mean).unwrap_err();
        assert!(err.to_string().contains("upsampling not supported here"));
    }

    #[test]
    fn building_downsample_aligns_bins() {
        let mut b = Building::new(1);
        b.mains.push(power(seq(120), vec![1.0; 120], 1.0).with_id("mains_1"));
        b.appliances.insert("fridge".into(), power((7..120).map(f64::from).collect(), vec![1.0; 113], 1.0));
        let d = downsample_building(&b, 60.0, Aggregation::Mean).unwrap();
        assert_eq!(d.appliances["fridge"].timestamps(), d.mains[0].timestamps());
    }

    fn with_voltage(p: f64, v: f64) -> Channel {
        power(vec![0.0], vec![p], 1.0)
            .with_column(Measurement::VOLTAGE, vec![v])
            .unwrap()
    }

    #[test]
    fn voltage_normalisation() {
        let n = |p, v, vn, beta| watts(&normalize_voltage(&with_voltage(p, v), vn, beta).unwrap())[0];
        assert_eq!(n(1000.0, 230.0, 230.0, 0.7), 1000.0);
        assert_eq!(n(1000.0, 115.0, 230.0, 2.0), 4000.0);
        assert!((n(1000.0, 115.0, 230.0, 0.7) - 1624.504792712471).abs() < 1e-9);
        assert_eq!(n(1234.5, 200.0, 230.0, 0.0), 1234.5);
        let v = normalize_voltage(&with_voltage(1000.0, 115.0), 230.0, 2.0).unwrap();
        assert_eq!(v.column(Measurement::VOLTAGE).unwrap(), &[115.0]);
        assert!(normalize_voltage(&power(vec![0.0], vec![1.0], 1.0), 230.0, 0.7).is_err());
    }

    #[test]
    fn implausible_rows_removed() {
        let c = power(seq(3), vec![1.0; 3], 1.0)
            .with_column(Measurement::VOLTAGE, vec![230.0, 500.0, 150.0])
            .unwrap();
        let f = filter_out_implausible(&c, Measurement::VOLTAGE, 160.0, 460.0).unwrap();
        assert_eq!(f.timestamps(), &[0.0]);
        let open = filter_out_implausible(&c, Measurement::VOLTAGE, 160.0, f64::INFINITY).unwrap();
        assert_eq!(open.timestamps(), &[0.0, 1.0]);
        assert_eq!(filter_out_implausible(&c, Measurement::VOLTAGE, 0.0, 1000.0).unwrap(), c);
    }

    #[test]
    fn forward_fill() {
        let c = power(vec![0.0, 1.0, 4.0, 5.0], vec![1.0, 2.0, 3.0, 4.0], 1.0);
        let f = interpolate_small_gaps(&c, 5.0).unwrap();
        assert_eq!(f.timestamps(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(watts(&f), &[1.0, 2.0, 2.0, 2.0, 3.0, 4.0]);
        let wide = power(vec![0.0, 60.0], vec![1.0, 2.0], 1.0);
        assert_eq!(interpolate_small_gaps(&wide, 5.0).unwrap(), wide);
        let full = power(seq(10), vec![1.0; 10], 1.0);
        assert_eq!(interpolate_small_gaps(&full, 5.0).unwrap(), full);
    }

    fn building(powers: &[(&str, f64)]) -> Building {
        let mut b = Building::new(1);
        let total: f64 = powers.iter().map(|p| p.1).sum();
        b.mains.push(power(seq(10), vec![total; 10], 1.0).with_id("mains_1"));
        for (name, w) in powers {
            b.appliances.insert(name.to_string(), power(seq(10), vec![*w; 10], 1.0).with_id(*name));
        }
        b
    }

    #[test]
    fn contribution_and_top_k() {
        let b = building(&[("air_conditioner", 1500.0), ("electric_heating", 800.0), ("television", 50.0), ("laptop_computer", 20.0)]);
        let f = filter_contribution(&b, 0.05).unwrap();
        assert_eq!(f.appliance_names(), vec!["air_conditioner", "electric_heating"]);
        assert_eq!(f.mains, b.mains);
        assert_eq!(filter_top_k(&b, 4).unwrap(), b);
        assert_eq!(filter_top_k(&b, 1).unwrap().appliance_names(), vec!["air_conditioner"]);
        let single = building(&[("fridge", 4.0), ("subpanel", 96.0)]);
        let f = filter_contribution(&single, 0.05).unwrap();
        assert_eq!(f.appliance_names(), vec!["subpanel"]);
        let none = building(&[("a", 1.0), ("b", 1.0)]);
        assert!(matches!(filter_contribution(&none, 0.5), Err(Error::EmptyModelSet)));
    }

    #[test]
    fn mains_gap_removes_appliance_rows() {
        let mut b = Building::new(1);
        let mains_ts: Vec<f64> = seq(100).into_iter().filter(|t| *t <= 40.0 || *t >= 60.0).collect();
        let n = mains_ts.len();
        b.mains.push(power(mains_ts.clone(), vec![1.0; n], 1.0));
        b.appliances.insert("fridge".into(), power(seq(100), vec![1.0; 100], 1.0));
        let out = intersect_with_mains(&b, None).unwrap();
        assert_eq!(out.appliances["fridge"].timestamps(), mains_ts.as_slice());
        assert_eq!(out.mains, b.mains);
    }

    #[test]
    fn appliance_gap_removes_mains_rows() {
        let mut b = Building::new(1);
        b.mains.push(power(seq(100), vec![1.0; 100], 1.0));
        let ts: Vec<f64> = seq(100).into_iter().filter(|t| *t <= 20.0 || *t >= 30.0).collect();
        let n = ts.len();
        b.appliances.insert("fridge".into(), power(ts.clone(), vec![1.0; n], 1.0));
        let out = intersect_with_mains(&b, None).unwrap();
        assert_eq!(out.mains[0].timestamps(), ts.as_slice());
        let aligned = building(&[("fridge", 1.0)]);
        assert_eq!(intersect_with_mains(&aligned, None).unwrap(), aligned);
    }

    #[test]
    fn split() {
        let b = building(&[("fridge", 1.0)]);
        let (train, test) = train_test_split(&b, 0.5).unwrap();
        assert_eq!(train.mains[0].len(), 5);
        assert_eq!(test.appliances["fridge"].len(), 5);
        assert_eq!(test.mains[0].first(), Some(5.0));

        let mut two = Building::new(1);
        two.mains.push(power(seq(2), vec![1.0; 2], 1.0));
        let (a, b2) = train_test_split(&two, 0.5).unwrap();
        assert_eq!((a.mains[0].len(), b2.mains[0].len()), (1, 1));

        let mut one = Building::new(1);
        one.mains.push(power(seq(1), vec![1.0], 1.0));
        assert!(matches!(train_test_split(&one, 0.5), Err(Error::TooFewSamples(_))));

        let mut unaligned = building(&[("fridge", 1.0)]);
        unaligned.appliances.insert("kettle".into(), power(seq(5), vec![1.0; 5], 1.0));
        assert!(matches!(train_test_split(&unaligned, 0.5), Err(Error::NotAligned(_))));
        let aligned = align_common_index(&unaligned);
        assert!(is_aligned(&aligned));
        assert_eq!(aligned.mains[0].len(), 5);
    }

    #[test]
    fn steps_deserialize() {
        let steps: Vec<Step> = serde_json::from_str(
            r#"[{"op": "downsample", "period": 60},
                {"op": "filter_out_implausible", "measurement": "voltage", "lo": 160},
                {"op": "normalize_voltage", "v_nominal": 230},
                {"op": "filter_contribution", "fraction": 0.05},
                {"op": "align_common_index"}]"#,
        )
        .unwrap();
        assert_eq!(
            steps[0],
            Step::Downsample {
                period: 60.0,
                agg: Aggregation::Mean
            }
        );
        assert_eq!(
            steps[2],
            Step::NormalizeVoltage {
                v_nominal: 230.0,
                beta: DEFAULT_BETA
            }
        );
        assert!(serde_json::from_str::<Step>(r#"{"op": "upsample"}"#).is_err());
    }
}
