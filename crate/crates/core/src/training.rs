//! Supervised appliance models learned from sub-metered channels.
//!
//! States are found with deterministic 1-D k-means (quantile seeding, no
//! RNG). HMM parameters come from hard state assignment and transition
//! counting with add-one smoothing; there is no EM refinement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{common_timestamps, Building, Channel, Measurement};

/// Fewer W than this for a state standard deviation is clamped up.
pub const STD_FLOOR: f64 = 1.0;
/// Floor on the FHMM aggregate noise variance, in W².
pub const NOISE_VARIANCE_FLOOR: f64 = 25.0;
pub const DEFAULT_STATES: usize = 2;

const KMEANS_TOLERANCE: f64 = 1e-6;
const KMEANS_MAX_ITER: usize = 300;
const PROBABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    pub mean: f64,
    pub std: f64,
}

/// Discrete power states of one appliance, ascending by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceStateModel {
    pub name: String,
    pub states: Vec<StateParams>,
}

impl ApplianceStateModel {
    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.mean).collect()
    }

    pub fn stds(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.std).collect()
    }

    /// Index of the state whose mean is closest to `watts`; ties go to the lower state.
    pub fn nearest_state(&self, watts: f64) -> usize {
        nearest(&self.means(), watts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidModel(format!("`{}` has no states", self.name)));
        }
        for s in &self.states {
            if !s.mean.is_finite() {
                return Err(Error::InvalidModel(format!("`{}` has a non-finite state mean", self.name)));
            }
            if !(s.std > 0.0 && s.std.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "`{}` has non-positive state std {}",
                    self.name, s.std
                )));
            }
        }
        if self.states.windows(2).any(|w| !(w[1].mean > w[0].mean)) {
            return Err(Error::InvalidModel(format!(
                "`{}` state means are not strictly ascending",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceHmm {
    #[serde(flatten)]
    pub base: ApplianceStateModel,
    pub pi: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl ApplianceHmm {
    pub fn k(&self) -> usize {
        self.base.k()
    }

    pub fn name(&self) -> &str {
        &self.base.name
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let k = self.k();
        let name = &self.base.name;
        check_distribution(&self.pi, k, &format!("`{name}` pi"))?;
        if self.transition.len() != k {
            return Err(Error::InvalidModel(format!(
                "`{name}` transition matrix has {} rows, expected {k}",
                self.transition.len()
            )));
        }
        for (i, row) in self.transition.iter().enumerate() {
            check_distribution(row, k, &format!("`{name}` transition row {i}"))?;
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64], k: usize, what: &str) -> Result<()> {
    if p.len() != k {
        return Err(Error::InvalidModel(format!("{what} has length {}, expected {k}", p.len())));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidModel(format!("{what} has an entry outside [0, 1]")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::InvalidModel(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoModel {
    pub appliances: Vec<ApplianceStateModel>,
}

impl CoModel {
    pub fn validate(&self) -> Result<()> {
        check_names(self.appliances.iter().map(|a| a.name.as_str()))?;
        self.appliances.iter().try_for_each(ApplianceStateModel::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhmmModel {
    pub appliances: Vec<ApplianceHmm>,
    pub noise_variance: f64,
}

impl FhmmModel {
    pub fn validate(&self) -> Result<()> {
        check_names(self.appliances.iter().map(|a| a.name()))?;
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "noise variance {} must be positive",
                self.noise_variance
            )));
        }
        self.appliances.iter().try_for_each(ApplianceHmm::validate)
    }

    /// The state models without the Markov structure.
    pub fn to_co(&self) -> CoModel {
        CoModel {
            appliances: self.appliances.iter().map(|a| a.base.clone()).collect(),
        }
    }
}

fn check_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    let mut any = false;
    for n in names {
        any = true;
        if !seen.insert(n) {
            return Err(Error::InvalidModel(format!("duplicate appliance `{n}`")));
        }
    }
    if !any {
        return Err(Error::EmptyModelSet);
    }
    Ok(())
}

/// Either trained model, as persisted in model JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Co(CoModel),
    Fhmm(FhmmModel),
}

impl Model {
    pub fn algorithm(&self) -> &'static str {
        match self {
            Model::Co(_) => "co",
            Model::Fhmm(_) => "fhmm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Co(m) => m.validate(),
            Model::Fhmm(m) => m.validate(),
        }
    }
}

fn nearest(means: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &m) in means.iter().enumerate() {
        let d = (x - m).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Cluster centroids (ascending) of `values` using Lloyd iterations seeded at
/// the `(2i+1)/2k` quantiles. `k` is reduced to the number of distinct values
/// when there are fewer.
pub fn kmeans_1d(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let k = k.min(distinct.len());
    if k == 0 {
        return Vec::new();
    }

    let quantiles = |data: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|i| {
                let q = (2 * i + 1) as f64 / (2 * k) as f64;
                let idx = ((q * data.len() as f64).floor() as usize).min(data.len() - 1);
                data[idx]
            })
            .collect()
    };
    let mut centroids = quantiles(&sorted);
    if centroids.windows(2).any(|w| w[0] == w[1]) {
        // heavily repeated values: seed on the distinct support instead
        centroids = quantiles(&distinct);
    }

    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for &v in &sorted {
            let c = nearest(&centroids, v);
            sums[c] += v;
            counts[c] += 1;
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] > 0 {
                let next = sums[c] / counts[c] as f64;
                shift = shift.max((next - centroids[c]).abs());
                centroids[c] = next;
            }
        }
        centroids.sort_by(f64::total_cmp);
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    centroids.dedup();
    centroids
}

/// Learns `k` power states of the `feature` column with 1-D k-means.
/// State stds are the within-cluster standard deviations, floored at 1 W.
pub fn learn_states(c: &Channel, feature: Measurement, k: usize) -> Result<ApplianceStateModel> {
    let values = c.require(feature)?;
    learn_states_from(c.id(), values, k)
}

fn learn_states_from(name: &str, values: &[f64], k: usize) -> Result<ApplianceStateModel> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 states, got {k}")));
    }
    if values.is_empty() {
        return Err(Error::TooFewSamples(format!("cannot learn states of empty channel `{name}`")));
    }
    let centroids = kmeans_1d(values, k);
    if centroids.len() < k {
        log::warn!(
            "`{name}`: only {} distinct state(s) found, reducing K from {k}",
            centroids.len()
        );
    }
    let mut sq = vec![0.0; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &v in &sorted {
        let s = nearest(&centroids, v);
        sq[s] += (v - centroids[s]).powi(2);
        counts[s] += 1;
    }
    let states = centroids
        .iter()
        .zip(sq.iter().zip(&counts))
        .map(|(&mean, (&sq, &n))| {
            let std = if n > 0 { (sq / n as f64).sqrt() } else { 0.0 };
            StateParams {
                mean,
                std: std.max(STD_FLOOR),
            }
        })
        .collect();
    Ok(ApplianceStateModel {
        name: name.to_string(),
        states,
    })
}

/// States from [`learn_states`]; prior and transitions from counting the
/// hard-assigned state sequence, transitions with add-one smoothing.
pub fn learn_hmm(c: &Channel, feature: Measurement, k: usize) -> Result<ApplianceHmm> {
    let values = c.require(feature)?;
    learn_hmm_from(c.id(), values, k)
}

fn learn_hmm_from(name: &str, values: &[f64], k: usize) -> Result<ApplianceHmm> {
    let base = learn_states_from(name, values, k)?;
    let k = base.k();
    let means = base.means();
    let states: Vec<usize> = values.iter().map(|&v| nearest(&means, v)).collect();

    let mut freq = vec![0usize; k];
    for &s in &states {
        freq[s] += 1;
    }
    let pi = freq.iter().map(|&n| n as f64 / states.len() as f64).collect();

    let mut counts = vec![vec![1.0; k]; k];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let transition = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect();
    Ok(ApplianceHmm { base, pi, transition })
}

/// Number of states per appliance: a default plus named overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCounts {
    pub default: usize,
    #[serde(default)]
    pub overrides: BTreeMap<String, usize>,
}

impl StateCounts {
    pub fn uniform(k: usize) -> Self {
        StateCounts {
            default: k,
            overrides: BTreeMap::new(),
        }
    }

    pub fn for_appliance(&self, name: &str) -> usize {
        self.overrides.get(name).copied().unwrap_or(self.default)
    }
}

impl Default for StateCounts {
    fn default() -> Self {
        StateCounts::uniform(DEFAULT_STATES)
    }
}

fn appliance_feature<'a>(name: &str, c: &'a Channel, feature: Measurement) -> Result<&'a [f64]> {
    c.column(feature).ok_or_else(|| Error::MissingColumn {
        channel: name.to_string(),
        measurement: feature.column_name(),
    })
}

pub fn train_co(b: &Building, feature: Measurement, states: &StateCounts) -> Result<CoModel> {
    if b.appliances.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let appliances = b
        .appliances
        .iter()
        .map(|(name, c)| learn_states_from(name, appliance_feature(name, c, feature)?, states.for_appliance(name)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoModel { appliances })
}

/// Per-appliance HMMs plus the variance of the unexplained aggregate
/// (mains minus the appliance sum), floored at 25 W².
pub fn train_fhmm(b: &Building, feature: Measurement, states: &StateCounts) -> Result<FhmmModel> {
    if b.appliances.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let appliances = b
        .appliances
        .iter()
        .map(|(name, c)| learn_hmm_from(name, appliance_feature(name, c, feature)?, states.for_appliance(name)))
        .collect::<Result<Vec<_>>>()?;
    let noise_variance = residual_variance(b, feature)?.max(NOISE_VARIANCE_FLOOR);
    Ok(FhmmModel {
        appliances,
        noise_variance,
    })
}

fn residual_variance(b: &Building, feature: Measurement) -> Result<f64> {
    let aggregate = b.aggregate(feature)?;
    let common = common_timestamps(std::iter::once(&aggregate).chain(b.appliances.values()));
    if common.is_empty() {
        return Ok(0.0);
    }
    let mut residual = values_at(&aggregate, feature, &common)?;
    for (name, c) in &b.appliances {
        appliance_feature(name, c, feature)?;
        for (r, v) in residual.iter_mut().zip(values_at(c, feature, &common)?) {
            *r -= v;
        }
    }
    let n = residual.len() as f64;
    let mean = residual.iter().sum::<f64>() / n;
    Ok(residual.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n)
}

/// Values of `m` at the given (sorted, present) timestamps.
pub(crate) fn values_at(c: &Channel, m: Measurement, at: &[f64]) -> Result<Vec<f64>> {
    let values = c.require(m)?;
    let ts = c.timestamps();
    let mut out = Vec::with_capacity(at.len());
    let mut i = 0;
    for &t in at {
        while i < ts.len() && ts[i] < t {
            i += 1;
        }
        if i < ts.len() && ts[i] == t {
            out.push(values[i]);
        } else {
            return Err(Error::NotAligned(format!("`{}` has no sample at {t}", c.id())));
        }
    }
    Ok(out)
}
