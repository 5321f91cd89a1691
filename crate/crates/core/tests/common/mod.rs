//! Independent oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use nilm_core::disaggregation::ProductHmm;
use nilm_core::training::{ApplianceHmm, ApplianceStateModel, CoModel, FhmmModel, StateParams};
use nilm_core::Channel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn power_channel(id: &str, t0: f64, period: f64, watts: Vec<f64>) -> Channel {
    let ts = (0..watts.len()).map(|i| t0 + i as f64 * period).collect();
    Channel::power(id, ts, watts, period).unwrap()
}

fn states_from_means(means: Vec<f64>, rng: &mut ChaCha8Rng) -> Vec<StateParams> {
    means
        .into_iter()
        .map(|mean| StateParams {
            mean,
            std: rng.random_range(1.0..40.0),
        })
        .collect()
}

/// Random CO model. With `integral` every mean is a multiple of 10 W so that
/// exact ties between combinations are common.
pub fn random_co_model(rng: &mut ChaCha8Rng, n: usize, k_max: usize, integral: bool) -> CoModel {
    let appliances = (0..n)
        .map(|i| {
            let k = rng.random_range(2..=k_max);
            let mut means: Vec<f64> = (0..k)
                .map(|_| {
                    if integral {
                        10.0 * rng.random_range(0..30) as f64
                    } else {
                        rng.random_range(0.0..2000.0)
                    }
                })
                .collect();
            means.sort_by(f64::total_cmp);
            means.dedup();
            while means.len() < 2 {
                means.push(means[means.len() - 1] + 10.0);
            }
            ApplianceStateModel {
                name: format!("a{i}"),
                states: states_from_means(means, rng),
            }
        })
        .collect();
    CoModel { appliances }
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_fhmm_model(rng: &mut ChaCha8Rng, n: usize, k: usize) -> FhmmModel {
    let appliances = (0..n)
        .map(|i| {
            let mut means: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1500.0)).collect();
            means.sort_by(f64::total_cmp);
            ApplianceHmm {
                base: ApplianceStateModel {
                    name: format!("a{i}"),
                    states: states_from_means(means, rng),
                },
                pi: random_distribution(rng, k),
                transition: (0..k).map(|_| random_distribution(rng, k)).collect(),
            }
        })
        .collect();
    FhmmModel {
        appliances,
        noise_variance: rng.random_range(25.0..2500.0),
    }
}

/// Samples an observation sequence from the model's generative process.
pub fn sample_fhmm(rng: &mut ChaCha8Rng, m: &FhmmModel, t_len: usize) -> Vec<f64> {
    let draw = |rng: &mut ChaCha8Rng, p: &[f64]| -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &x) in p.iter().enumerate() {
            acc += x;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    };
    let mut state: Vec<usize> = m.appliances.iter().map(|a| draw(rng, &a.pi)).collect();
    let mut y = Vec::with_capacity(t_len);
    for t in 0..t_len {
        if t > 0 {
            for (n, a) in m.appliances.iter().enumerate() {
                state[n] = draw(rng, &a.transition[state[n]]);
            }
        }
        let mean: f64 = m
            .appliances
            .iter()
            .zip(&state)
            .map(|(a, &s)| a.base.states[s].mean)
            .sum();
        y.push(mean + rng.random_range(-100.0..100.0));
    }
    y
}

/// Every state vector of the given radices in lexicographic order.
pub fn all_state_vectors(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &k in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |s| {
                    let mut v = prefix.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

/// Exhaustive CO: the state vector minimising |y - total|, ties to the
/// smaller total and then the lexicographically smallest vector.
pub fn co_oracle(m: &CoModel, y: f64) -> Vec<usize> {
    let radices: Vec<usize> = m.appliances.iter().map(|a| a.states.len()).collect();
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for v in all_state_vectors(&radices) {
        let mut total = 0.0;
        for (n, &s) in v.iter().enumerate() {
            total += m.appliances[n].states[s].mean;
        }
        let dist = (y - total).abs();
        let better = match &best {
            None => true,
            Some((bd, bt, bv)) => dist < *bd || (dist == *bd && (total < *bt || (total == *bt && v < *bv))),
        };
        if better {
            best = Some((dist, total, v));
        }
    }
    best.unwrap().2
}

/// Textbook O(T·S²) Viterbi over an explicit chain; ties to the lowest index.
/// Returns the product-state path and its log score.
pub fn product_viterbi(p: &ProductHmm, y: &[f64]) -> (Vec<usize>, f64) {
    let s = p.states();
    let log_density = |j: usize, obs: f64| {
        let d = obs - p.means[j];
        -0.5 * (2.0 * std::f64::consts::PI * p.variances[j]).ln() - d * d / (2.0 * p.variances[j])
    };
    let mut delta: Vec<f64> = (0..s).map(|j| p.pi[j].ln() + log_density(j, y[0])).collect();
    let mut back: Vec<Vec<usize>> = Vec::new();
    for &obs in &y[1..] {
        let mut next = vec![0.0; s];
        let mut ptr = vec![0usize; s];
        for j in 0..s {
            let mut best = f64::NEG_INFINITY;
            for i in 0..s {
                let cand = delta[i] + p.transition[i][j].ln();
                if cand > best {
                    best = cand;
                    ptr[j] = i;
                }
            }
            next[j] = best + log_density(j, obs);
        }
        delta = next;
        back.push(ptr);
    }
    let mut state = 0;
    for j in 1..s {
        if delta[j] > delta[state] {
            state = j;
        }
    }
    let score = delta[state];
    let mut path = vec![state];
    for ptr in back.iter().rev() {
        state = ptr[state];
        path.push(state);
    }
    path.reverse();
    (path, score)
}

/// Converts a product-state path to per-appliance paths.
pub fn split_path(p: &ProductHmm, path: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(path.len()); p.radices.len()];
    for &idx in path {
        for (n, s) in p.decode(idx).into_iter().enumerate() {
            out[n].push(s);
        }
    }
    out
}

/// Power iteration for the stationary distribution of a stochastic matrix.
pub fn stationary(a: &[Vec<f64>]) -> Vec<f64> {
    let k = a.len();
    let mut p = vec![1.0 / k as f64; k];
    for _ in 0..10_000 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                next[j] += p[i] * a[i][j];
            }
        }
        p = next;
    }
    p
}
