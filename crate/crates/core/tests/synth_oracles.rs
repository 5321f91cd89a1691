#![allow(clippy::needless_range_loop)]

mod common;

use common::{rng, stationary};
use nilm_core::diagnostics::detect_gaps;
use nilm_core::io::save_nilmtk_df;
use nilm_core::stats::{correlate_daily, daily_energy, proportion_energy_submetered, top_k_appliances, JOULES_PER_KWH};
use nilm_core::synth::{default_benchmark_spec, generate, ExternalSpec, Faults, SynthAppliance, SynthSpec};
use nilm_core::training::{learn_hmm, train_co, StateCounts, StateParams};
use nilm_core::{Gap, Measurement};
use rand::Rng;
use std::collections::BTreeMap;

fn sp(mean: f64, std: f64) -> StateParams {
    StateParams { mean, std }
}

fn spec(appliances: Vec<SynthAppliance>, period: f64, duration: f64, noise: f64) -> SynthSpec {
    SynthSpec {
        seed: 11,
        sample_period: period,
        duration,
        start: 0.0,
        noise_std: noise,
        appliances,
        faults: Faults::default(),
        voltage: None,
        external: None,
    }
}

fn three_state() -> SynthAppliance {
    SynthAppliance {
        name: "washing_machine".into(),
        states: vec![sp(0.0, 1.0), sp(300.0, 10.0), sp(2000.0, 30.0)],
        pi: vec![1.0, 0.0, 0.0],
        transition: vec![vec![0.90, 0.08, 0.02], vec![0.20, 0.70, 0.10], vec![0.05, 0.15, 0.80]],
    }
}

fn two_state(name: &str, on: f64, p_on: f64, p_off: f64) -> SynthAppliance {
    SynthAppliance {
        name: name.into(),
        states: vec![sp(0.0, 2.0), sp(on, 10.0)],
        pi: vec![1.0, 0.0],
        transition: vec![vec![1.0 - p_on, p_on], vec![p_off, 1.0 - p_off]],
    }
}

#[test]
fn state_frequencies_match_stationary_distribution() {
    let a = three_state();
    let expected = stationary(&a.transition);
    let out = generate(&spec(vec![a], 1.0, 1e6, 0.0)).unwrap();
    let states = &out.states["washing_machine"];
    assert_eq!(states.len(), 1_000_000);
    for (k, &p) in expected.iter().enumerate() {
        let freq = states.iter().filter(|&&s| s == k).count() as f64 / states.len() as f64;
        assert!((freq - p).abs() < 0.02, "state {k}: {freq} vs {p}");
    }
}

#[test]
fn injected_gap_is_detected_exactly() {
    let mut s = spec(vec![two_state("fridge", 100.0, 0.1, 0.1)], 1.0, 101.0, 5.0);
    s.faults.gaps = vec![Gap { start: 40.0, end: 60.0 }];
    let out = generate(&s).unwrap();
    let b = out.dataset.building(1).unwrap();
    for c in b.channels() {
        assert_eq!(detect_gaps(c, 3.0), vec![Gap { start: 40.0, end: 60.0 }], "{}", c.id());
    }
}

#[test]
fn zero_noise_mains_is_sum_of_appliances() {
    let s = spec(
        vec![two_state("fridge", 100.0, 0.1, 0.1), two_state("kettle", 2000.0, 0.02, 0.3)],
        1.0,
        5_000.0,
        0.0,
    );
    let out = generate(&s).unwrap();
    let b = out.dataset.building(1).unwrap();
    let mains = b.mains[0].column(Measurement::POWER_ACTIVE).unwrap();
    let parts: Vec<&[f64]> = s
        .appliances
        .iter()
        .map(|a| b.appliances[&a.name].column(Measurement::POWER_ACTIVE).unwrap())
        .collect();
    for (t, &m) in mains.iter().enumerate() {
        let sum: f64 = parts.iter().map(|p| p[t]).sum();
        assert_eq!(m, sum, "t={t}");
    }
}

#[test]
fn saved_bytes_are_deterministic() {
    let s = default_benchmark_spec();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_nilmtk_df(&generate(&s).unwrap().dataset, a.path()).unwrap();
    save_nilmtk_df(&generate(&s).unwrap().dataset, b.path()).unwrap();
    let read = |root: &std::path::Path| {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in std::fs::read_dir(dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                }
            }
        }
        files
    };
    let (fa, fb) = (read(a.path()), read(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn learned_transitions_recover_generator() {
    let a = two_state("fridge", 500.0, 0.05, 0.2);
    let truth = a.transition.clone();
    let out = generate(&spec(vec![a], 1.0, 1e5, 0.0)).unwrap();
    let b = out.dataset.building(1).unwrap();
    let hmm = learn_hmm(&b.appliances["fridge"], Measurement::POWER_ACTIVE, 2).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let diff = (hmm.transition[i][j] - truth[i][j]).abs();
            assert!(diff < 0.05, "A[{i}][{j}] = {} vs {}", hmm.transition[i][j], truth[i][j]);
        }
    }
}

#[test]
fn three_appliance_means_within_5_watts() {
    let s = default_benchmark_spec();
    let out = generate(&s).unwrap();
    let model = train_co(out.dataset.building(1).unwrap(), Measurement::POWER_ACTIVE, &StateCounts::default()).unwrap();
    assert_eq!(model.appliances.len(), 3);
    for a in &s.appliances {
        let learned = model.appliances.iter().find(|m| m.name == a.name).unwrap();
        for (l, t) in learned.means().iter().zip(&a.states) {
            assert!((l - t.mean).abs() < 5.0, "`{}`: {l} vs {}", a.name, t.mean);
        }
    }
}

#[test]
fn default_spec_is_fully_submetered_and_led_by_air_conditioner() {
    let out = generate(&default_benchmark_spec()).unwrap();
    let b = out.dataset.building(1).unwrap();
    let p = proportion_energy_submetered(b, None).unwrap();
    assert!((p - 1.0).abs() <= 0.02, "{p}");
    assert_eq!(top_k_appliances(b, 1).unwrap()[0].name, "air_conditioner");
}

#[test]
fn external_series_reaches_target_r_squared() {
    let mut s = spec(vec![two_state("boiler", 3000.0, 0.01, 0.05)], 60.0, 40.0 * 86_400.0, 10.0);
    s.external = Some(ExternalSpec {
        name: "degree_days".into(),
        appliance: "boiler".into(),
        r_squared: 0.73,
    });
    let out = generate(&s).unwrap();
    let b = out.dataset.building(1).unwrap();
    let fit = correlate_daily(&b.appliances["boiler"], out.external.as_ref().unwrap()).unwrap();
    assert!((fit.r_squared - 0.73).abs() <= 0.05, "{}", fit.r_squared);
    assert!(b.passthrough.keys().any(|k| k.contains("degree_days")));
}

#[test]
fn independent_noise_has_low_r_squared() {
    let s = spec(vec![two_state("boiler", 3000.0, 0.01, 0.05)], 300.0, 100.0 * 86_400.0, 10.0);
    let out = generate(&s).unwrap();
    let app = &out.dataset.building(1).unwrap().appliances["boiler"];
    let days = daily_energy(app, None).unwrap();
    let mut r = rng(99);
    let noise: BTreeMap<i64, f64> = days.keys().map(|&d| (d, r.random_range(0.0..10.0))).collect();
    let fit = correlate_daily(app, &noise).unwrap();
    assert!(days.len() >= 99);
    assert!(fit.r_squared < 0.1, "{}", fit.r_squared);
    assert!(days.values().all(|&j| j / JOULES_PER_KWH < 100.0));
}
