//! Combinatorial optimisation and exact factorial-HMM decoding.
//!
//! State vectors are numbered in mixed radix with appliance 0 as the most
//! significant digit, so "lower index" and "lexicographically smaller" agree.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Channel, Measurement};
use crate::training::{ApplianceStateModel, CoModel, FhmmModel};

pub const CO_COMBINATION_LIMIT: u128 = 1 << 20;
pub const FHMM_STATE_LIMIT: u128 = 1 << 14;
pub const PRODUCT_HMM_LIMIT: u128 = 1 << 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceEstimate {
    pub name: String,
    pub states: Vec<usize>,
    /// Mean of the assigned state, floored at 0 W.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predictions {
    pub timestamps: Vec<f64>,
    pub feature: Measurement,
    pub nominal_period: f64,
    pub appliances: Vec<ApplianceEstimate>,
}

impl Predictions {
    fn from_paths(aggregate: &Channel, feature: Measurement, models: &[&ApplianceStateModel], paths: Vec<Vec<usize>>) -> Self {
        let appliances = models
            .iter()
            .zip(paths)
            .map(|(m, states)| ApplianceEstimate {
                name: m.name.clone(),
                power: states.iter().map(|&s| m.states[s].mean.max(0.0)).collect(),
                states,
            })
            .collect();
        Predictions {
            timestamps: aggregate.timestamps().to_vec(),
            feature,
            nominal_period: aggregate.nominal_period(),
            appliances,
        }
    }

    pub fn appliance(&self, name: &str) -> Option<&ApplianceEstimate> {
        self.appliances.iter().find(|a| a.name == name)
    }

    /// State vector at row `t`, appliance order.
    pub fn state_vector(&self, t: usize) -> Vec<usize> {
        self.appliances.iter().map(|a| a.states[t]).collect()
    }

    /// Per-appliance state sequences, appliance order.
    pub fn state_paths(&self) -> Vec<Vec<usize>> {
        self.appliances.iter().map(|a| a.states.clone()).collect()
    }
}

/// One power channel per appliance, named after it.
pub fn predictions_to_power(p: &Predictions) -> Vec<Channel> {
    p.appliances
        .iter()
        .map(|a| {
            Channel::single(a.name.clone(), p.timestamps.clone(), p.feature, a.power.clone(), p.nominal_period)
                .expect("predictions share the aggregate's validated index")
        })
        .collect()
}

fn state_space(radices: impl Iterator<Item = usize>) -> u128 {
    radices.fold(1u128, |acc, k| acc.saturating_mul(k as u128))
}

fn check_limit(states: u128, limit: u128) -> Result<()> {
    if states > limit {
        return Err(Error::StateSpaceLimit { states, limit });
    }
    Ok(())
}

/// Splits a product index into per-appliance states.
pub fn decode_index(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for n in (0..radices.len()).rev() {
        out[n] = index % radices[n];
        index /= radices[n];
    }
    out
}

pub fn encode_index(states: &[usize], radices: &[usize]) -> usize {
    states.iter().zip(radices).fold(0, |acc, (&s, &k)| acc * k + s)
}

/// Sum of state quantities over appliances, in appliance order.
fn combination_sum(index: usize, radices: &[usize], per_state: &[Vec<f64>]) -> f64 {
    let states = decode_index(index, radices);
    let mut total = 0.0;
    for (n, s) in states.into_iter().enumerate() {
        total += per_state[n][s];
    }
    total
}

/// Per time slice, the state vector whose summed means are nearest the
/// aggregate; ties go to the smaller total, then the lexicographically
/// smallest state vector.
pub fn disaggregate_co(m: &CoModel, aggregate: &Channel, feature: Measurement) -> Result<Predictions> {
    m.validate()?;
    let radices: Vec<usize> = m.appliances.iter().map(ApplianceStateModel::k).collect();
    let combos = state_space(radices.iter().copied());
    check_limit(combos, CO_COMBINATION_LIMIT)?;
    let means: Vec<Vec<f64>> = m.appliances.iter().map(ApplianceStateModel::means).collect();

    let mut table: Vec<(f64, usize)> = (0..combos as usize)
        .map(|i| (combination_sum(i, &radices, &means), i))
        .collect();
    table.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    table.dedup_by(|b, a| a.0 == b.0);
    let totals: Vec<f64> = table.iter().map(|e| e.0).collect();

    let y = aggregate.require(feature)?;
    let mut paths = vec![Vec::with_capacity(y.len()); radices.len()];
    for &v in y {
        let best = nearest_total(&totals, v);
        for (n, s) in decode_index(table[best].1, &radices).into_iter().enumerate() {
            paths[n].push(s);
        }
    }
    let models: Vec<&ApplianceStateModel> = m.appliances.iter().collect();
    Ok(Predictions::from_paths(aggregate, feature, &models, paths))
}

/// Index of the nearest sorted total, preferring the smaller total on ties.
fn nearest_total(totals: &[f64], y: f64) -> usize {
    let split = totals.partition_point(|&t| t < y);
    let left = split.checked_sub(1).map(|mut l| {
        // rounding can make several totals equidistant; take the smallest
        while l > 0 && y - totals[l - 1] == y - totals[l] {
            l -= 1;
        }
        l
    });
    match (left, totals.get(split)) {
        (Some(l), Some(&r)) => {
            if y - totals[l] <= r - y {
                l
            } else {
                split
            }
        }
        (Some(l), None) => l,
        (None, _) => split,
    }
}

struct Emissions {
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl Emissions {
    fn new(m: &FhmmModel, radices: &[usize], states: usize) -> Self {
        let means: Vec<Vec<f64>> = m.appliances.iter().map(|a| a.base.means()).collect();
        let vars: Vec<Vec<f64>> = m
            .appliances
            .iter()
            .map(|a| a.base.stds().iter().map(|s| s * s).collect())
            .collect();
        Emissions {
            means: (0..states).map(|i| combination_sum(i, radices, &means)).collect(),
            variances: (0..states)
                .map(|i| combination_sum(i, radices, &vars) + m.noise_variance)
                .collect(),
        }
    }

    fn log_density(&self, state: usize, y: f64) -> f64 {
        gaussian_log_density(y, self.means[state], self.variances[state])
    }
}

pub fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -0.5 * (2.0 * PI * variance).ln() - d * d / (2.0 * variance)
}

fn ln_matrix(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|row| row.iter().map(|p| p.ln()).collect()).collect()
}

/// Exact Viterbi decoding of the product chain. The max over predecessors
/// is taken one appliance at a time, so a step costs O(S·ΣK) rather than
/// O(S²) for S product states.
pub fn disaggregate_fhmm(m: &FhmmModel, aggregate: &Channel, feature: Measurement) -> Result<Predictions> {
    m.validate()?;
    let radices: Vec<usize> = m.appliances.iter().map(|a| a.k()).collect();
    let s = state_space(radices.iter().copied());
    check_limit(s, FHMM_STATE_LIMIT)?;
    let s = s as usize;
    let y = aggregate.require(feature)?;
    let models: Vec<&ApplianceStateModel> = m.appliances.iter().map(|a| &a.base).collect();
    if y.is_empty() {
        return Ok(Predictions::from_paths(aggregate, feature, &models, vec![Vec::new(); radices.len()]));
    }

    let emissions = Emissions::new(m, &radices, s);
    let log_pi: Vec<Vec<f64>> = m.appliances.iter().map(|a| a.pi.iter().map(|p| p.ln()).collect()).collect();
    let log_a: Vec<Vec<Vec<f64>>> = m.appliances.iter().map(|a| ln_matrix(&a.transition)).collect();
    let mut strides = vec![1usize; radices.len()];
    for n in (0..radices.len().saturating_sub(1)).rev() {
        strides[n] = strides[n + 1] * radices[n + 1];
    }

    let mut delta: Vec<f64> = (0..s)
        .map(|j| combination_sum(j, &radices, &log_pi) + emissions.log_density(j, y[0]))
        .collect();
    let mut back: Vec<u16> = Vec::with_capacity(s * (y.len() - 1));
    let mut value = vec![0.0; s];
    let mut best = vec![0usize; s];
    let mut next_value = vec![0.0; s];
    let mut next_best = vec![0usize; s];

    for &obs in &y[1..] {
        value.copy_from_slice(&delta);
        for (i, b) in best.iter_mut().enumerate() {
            *b = i;
        }
        for n in (0..radices.len()).rev() {
            let (k, stride) = (radices[n], strides[n]);
            for idx in 0..s {
                let target = (idx / stride) % k;
                let base = idx - target * stride;
                let mut v = f64::NEG_INFINITY;
                let mut arg = base;
                for from in 0..k {
                    let src = base + from * stride;
                    let cand = value[src] + log_a[n][from][target];
                    if cand > v {
                        v = cand;
                        arg = src;
                    }
                }
                next_value[idx] = v;
                next_best[idx] = best[arg];
            }
            std::mem::swap(&mut value, &mut next_value);
            std::mem::swap(&mut best, &mut next_best);
        }
        for j in 0..s {
            delta[j] = value[j] + emissions.log_density(j, obs);
        }
        back.extend(best.iter().map(|&b| b as u16));
    }

    let mut state = 0;
    for j in 1..s {
        if delta[j] > delta[state] {
            state = j;
        }
    }
    let t_len = y.len();
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = back[(t - 1) * s + state] as usize;
        path[t - 1] = state;
    }
    let mut paths = vec![Vec::with_capacity(t_len); radices.len()];
    for &p in &path {
        for (n, st) in decode_index(p, &radices).into_iter().enumerate() {
            paths[n].push(st);
        }
    }
    Ok(Predictions::from_paths(aggregate, feature, &models, paths))
}

/// Joint log-likelihood of observations and a state path under the FHMM.
/// `states[n][t]` is appliance `n`'s state at row `t`.
pub fn path_log_likelihood(m: &FhmmModel, y: &[f64], states: &[Vec<usize>]) -> Result<f64> {
    let radices: Vec<usize> = m.appliances.iter().map(|a| a.k()).collect();
    if states.len() != radices.len() || states.iter().any(|p| p.len() != y.len()) {
        return Err(Error::InvalidInput("path shape does not match model and observations".into()));
    }
    if states.iter().zip(&radices).any(|(p, &k)| p.iter().any(|&s| s >= k)) {
        return Err(Error::InvalidInput("state index out of range".into()));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let s = state_space(radices.iter().copied());
    check_limit(s, FHMM_STATE_LIMIT)?;
    let emissions = Emissions::new(m, &radices, s as usize);
    let at = |t: usize| -> Vec<usize> { states.iter().map(|p| p[t]).collect() };
    let mut ll = 0.0;
    let first = at(0);
    for (n, a) in m.appliances.iter().enumerate() {
        ll += a.pi[first[n]].ln();
    }
    ll += emissions.log_density(encode_index(&first, &radices), y[0]);
    let mut prev = first;
    for (t, &obs) in y.iter().enumerate().skip(1) {
        let cur = at(t);
        for (n, a) in m.appliances.iter().enumerate() {
            ll += a.transition[prev[n]][cur[n]].ln();
        }
        ll += emissions.log_density(encode_index(&cur, &radices), obs);
        prev = cur;
    }
    Ok(ll)
}

/// An FHMM materialised as a single chain over all state combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductHmm {
    pub radices: Vec<usize>,
    pub pi: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl ProductHmm {
    pub fn states(&self) -> usize {
        self.pi.len()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        decode_index(index, &self.radices)
    }
}

pub fn build_product_hmm(m: &FhmmModel) -> Result<ProductHmm> {
    m.validate()?;
    let radices: Vec<usize> = m.appliances.iter().map(|a| a.k()).collect();
    let s = state_space(radices.iter().copied());
    check_limit(s, PRODUCT_HMM_LIMIT)?;
    let s = s as usize;
    let vectors: Vec<Vec<usize>> = (0..s).map(|i| decode_index(i, &radices)).collect();
    let pi = vectors
        .iter()
        .map(|v| v.iter().zip(&m.appliances).map(|(&st, a)| a.pi[st]).product())
        .collect();
    let transition = vectors
        .iter()
        .map(|from| {
            vectors
                .iter()
                .map(|to| {
                    m.appliances
                        .iter()
                        .enumerate()
                        .map(|(n, a)| a.transition[from[n]][to[n]])
                        .product()
                })
                .collect()
        })
        .collect();
    let emissions = Emissions::new(m, &radices, s);
    Ok(ProductHmm {
        radices,
        pi,
        transition,
        means: emissions.means,
        variances: emissions.variances,
    })
}
