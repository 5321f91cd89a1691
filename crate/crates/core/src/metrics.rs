//! Accuracy metrics for disaggregation output.

use serde::{Deserialize, Serialize};

use crate::disaggregation::Predictions;
use crate::error::{Error, Result};
use crate::model::{Building, Channel};
use crate::stats::DEFAULT_ON_THRESHOLD;
use crate::training::ApplianceStateModel;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("series lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// 1 where power exceeds `threshold`, else 0.
pub fn power_to_states_threshold(values: &[f64], threshold: f64) -> Vec<usize> {
    values.iter().map(|&w| usize::from(w > threshold)).collect()
}

/// Index of the nearest state mean.
pub fn power_to_states_model(values: &[f64], model: &ApplianceStateModel) -> Vec<usize> {
    values.iter().map(|&w| model.nearest_state(w)).collect()
}

/// `|Σy − Σŷ| · dt`, in joules for watts and seconds.
pub fn error_total_energy(y: &[f64], y_hat: &[f64], dt: f64) -> Result<f64> {
    check_len(y.len(), y_hat.len())?;
    Ok((y.iter().sum::<f64>() - y_hat.iter().sum::<f64>()).abs() * dt)
}

/// `Σ_n min(E_n / ΣE, Ê_n / ΣÊ)` over appliances.
pub fn fraction_energy_assigned_correctly(truth: &[&[f64]], predicted: &[&[f64]]) -> Result<f64> {
    check_len(truth.len(), predicted.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidInput("no appliances".into()));
    }
    let e: Vec<f64> = truth.iter().map(|y| y.iter().sum()).collect();
    let e_hat: Vec<f64> = predicted.iter().map(|y| y.iter().sum()).collect();
    let (total, total_hat) = (e.iter().sum::<f64>(), e_hat.iter().sum::<f64>());
    if !(total > 0.0 && total_hat > 0.0) {
        return Err(Error::InvalidInput("total actual and predicted energy must be positive".into()));
    }
    // identical fractions must give exactly 1, not 1 - ulp
    if e.iter().zip(&e_hat).all(|(a, p)| a / total == p / total_hat) {
        return Ok(1.0);
    }
    let fte: f64 = e.iter().zip(&e_hat).map(|(a, p)| (a / total).min(p / total_hat)).sum();
    Ok(fte.min(1.0))
}

/// `Σ|y − ŷ| / Σy`.
pub fn normalized_error_assigned_power(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_len(y.len(), y_hat.len())?;
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("appliance consumed no energy".into()));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / total)
}

pub fn rms_error(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_len(y.len(), y_hat.len())?;
    if y.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassificationCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassificationCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Binary counts; any non-zero state counts as on.
pub fn classification_counts(x: &[usize], x_hat: &[usize]) -> Result<ClassificationCounts> {
    check_len(x.len(), x_hat.len())?;
    let mut c = ClassificationCounts::default();
    for (&a, &p) in x.iter().zip(x_hat) {
        match (a > 0, p > 0) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// A ratio that is 0 and flagged when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub undefined: bool,
}

impl Rate {
    fn ratio(num: u64, den: u64) -> Rate {
        if den == 0 {
            Rate {
                value: 0.0,
                undefined: true,
            }
        } else {
            Rate {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Rate,
    pub fpr: Rate,
    pub precision: Rate,
    pub recall: Rate,
    pub f_score: Rate,
}

pub fn rates(c: &ClassificationCounts) -> Rates {
    let tpr = Rate::ratio(c.tp, c.tp + c.fn_);
    let precision = Rate::ratio(c.tp, c.tp + c.fp);
    let f_score = if precision.undefined || tpr.undefined || precision.value + tpr.value == 0.0 {
        Rate {
            value: 0.0,
            undefined: true,
        }
    } else {
        Rate {
            value: 2.0 * precision.value * tpr.value / (precision.value + tpr.value),
            undefined: false,
        }
    };
    Rates {
        tpr,
        fpr: Rate::ratio(c.fp, c.fp + c.tn),
        precision,
        recall: tpr,
        f_score,
    }
}

/// `matrix[i][j]` counts slices with true state `i` and predicted state `j`.
pub fn confusion_matrix(x: &[usize], x_hat: &[usize], k: usize) -> Result<Vec<Vec<u64>>> {
    check_len(x.len(), x_hat.len())?;
    let mut m = vec![vec![0u64; k]; k];
    for (&a, &p) in x.iter().zip(x_hat) {
        if a >= k || p >= k {
            return Err(Error::InvalidInput(format!("state index outside 0..{k}")));
        }
        m[a][p] += 1;
    }
    Ok(m)
}

/// Mean over slices and appliances of the state-mismatch indicator.
/// `x[n][t]` is appliance `n`'s state at slice `t`.
pub fn hamming_loss(x: &[Vec<usize>], x_hat: &[Vec<usize>]) -> Result<f64> {
    check_len(x.len(), x_hat.len())?;
    if x.is_empty() {
        return Err(Error::InvalidInput("no appliances".into()));
    }
    let t = x[0].len();
    let mut wrong = 0u64;
    for (a, p) in x.iter().zip(x_hat) {
        check_len(a.len(), t)?;
        check_len(p.len(), t)?;
        wrong += a.iter().zip(p).filter(|(u, v)| u != v).count() as u64;
    }
    if t == 0 {
        return Ok(0.0);
    }
    Ok(wrong as f64 / (t as f64 * x.len() as f64))
}

/// How slices are labelled for the classification metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StateRule {
    /// On when power exceeds the threshold, for truth and prediction alike.
    Threshold { on_threshold: f64 },
    /// Truth takes the nearest model state; predictions keep their decoded state.
    NearestState,
}

impl Default for StateRule {
    fn default() -> Self {
        StateRule::Threshold {
            on_threshold: DEFAULT_ON_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceMetrics {
    pub appliance: String,
    pub error_total_energy: f64,
    pub nep: f64,
    pub rmse: f64,
    pub counts: ClassificationCounts,
    pub rates: Rates,
    pub confusion_matrix: Vec<Vec<u64>>,
    /// Metrics reported as 0 because they are undefined here.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub algorithm: String,
    pub samples: usize,
    pub appliances: Vec<ApplianceMetrics>,
    pub fte: f64,
    /// Mean over appliances with defined NEP.
    pub nep: f64,
    /// Mean over appliances.
    pub f_score: f64,
    pub hamming_loss: f64,
    pub undefined: Vec<String>,
    pub train_seconds: Option<f64>,
    pub disaggregate_seconds: Option<f64>,
}

/// Scores predictions against sub-metered truth on their shared timestamps.
/// Truth appliances without predictions count as always off.
pub fn evaluate(predictions: &Predictions, truth: &Building, rule: &StateRule, models: Option<&[ApplianceStateModel]>) -> Result<MetricReport> {
    let mut common = predictions.timestamps.clone();
    for c in truth.appliances.values() {
        common = crate::model::intersect_sorted(&common, c.timestamps());
    }
    if common.is_empty() || truth.appliances.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    for a in &predictions.appliances {
        if !truth.appliances.contains_key(&a.name) {
            log::warn!("no ground truth for predicted appliance `{}`; skipped", a.name);
        }
    }
    let pred_rows = row_positions(&predictions.timestamps, &common);
    let dt = predictions.nominal_period;

    let mut per = Vec::new();
    let mut truth_power = Vec::new();
    let mut pred_power = Vec::new();
    let mut truth_states = Vec::new();
    let mut pred_states = Vec::new();
    for (name, channel) in &truth.appliances {
        let y = crate::training::values_at(channel, predictions.feature, &common)?;
        let estimate = predictions.appliance(name);
        let y_hat: Vec<f64> = match estimate {
            Some(e) => pred_rows.iter().map(|&i| e.power[i]).collect(),
            None => vec![0.0; common.len()],
        };
        let (x, x_hat, k) = match rule {
            StateRule::Threshold { on_threshold } => (
                power_to_states_threshold(&y, *on_threshold),
                power_to_states_threshold(&y_hat, *on_threshold),
                2,
            ),
            StateRule::NearestState => {
                let model = models
                    .and_then(|ms| ms.iter().find(|m| &m.name == name))
                    .ok_or_else(|| Error::InvalidInput(format!("nearest-state scoring needs a model for `{name}`")))?;
                let x_hat = match estimate {
                    Some(e) => pred_rows.iter().map(|&i| e.states[i]).collect(),
                    None => vec![0; common.len()],
                };
                (power_to_states_model(&y, model), x_hat, model.k())
            }
        };
        let mut undefined = Vec::new();
        let nep = normalized_error_assigned_power(&y, &y_hat).unwrap_or_else(|_| {
            undefined.push("NEP".to_string());
            0.0
        });
        let counts = classification_counts(&x, &x_hat)?;
        let r = rates(&counts);
        for (metric, rate) in [
            ("TPR", r.tpr),
            ("FPR", r.fpr),
            ("Precision", r.precision),
            ("Recall", r.recall),
            ("F-score", r.f_score),
        ] {
            if rate.undefined {
                undefined.push(metric.to_string());
            }
        }
        per.push(ApplianceMetrics {
            appliance: name.clone(),
            error_total_energy: error_total_energy(&y, &y_hat, dt)?,
            nep,
            rmse: rms_error(&y, &y_hat)?,
            counts,
            rates: r,
            confusion_matrix: confusion_matrix(&x, &x_hat, k)?,
            undefined,
        });
        truth_power.push(y);
        pred_power.push(y_hat);
        truth_states.push(x);
        pred_states.push(x_hat);
    }

    let mut undefined = Vec::new();
    let t_refs: Vec<&[f64]> = truth_power.iter().map(Vec::as_slice).collect();
    let p_refs: Vec<&[f64]> = pred_power.iter().map(Vec::as_slice).collect();
    let fte = fraction_energy_assigned_correctly(&t_refs, &p_refs).unwrap_or_else(|_| {
        undefined.push("FTE".to_string());
        0.0
    });
    let defined_nep: Vec<f64> = per
        .iter()
        .filter(|a| !a.undefined.iter().any(|u| u == "NEP"))
        .map(|a| a.nep)
        .collect();
    let nep = if defined_nep.is_empty() {
        undefined.push("NEP".to_string());
        0.0
    } else {
        defined_nep.iter().sum::<f64>() / defined_nep.len() as f64
    };
    let f_score = per.iter().map(|a| a.rates.f_score.value).sum::<f64>() / per.len() as f64;
    Ok(MetricReport {
        algorithm: String::new(),
        samples: common.len(),
        appliances: per,
        fte,
        nep,
        f_score,
        hamming_loss: hamming_loss(&truth_states, &pred_states)?,
        undefined,
        train_seconds: None,
        disaggregate_seconds: None,
    })
}

fn row_positions(all: &[f64], subset: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(subset.len());
    let mut i = 0;
    for &t in subset {
        while all[i] < t {
            i += 1;
        }
        out.push(i);
    }
    out
}

/// Reads predictions back from a building's appliance channels, e.g. one
/// saved to disk. States come from the nearest model state when models are
/// given, else from the default on threshold.
pub fn predictions_from_building(
    b: &Building,
    feature: crate::model::Measurement,
    models: Option<&[ApplianceStateModel]>,
) -> Result<Predictions> {
    let common = crate::model::common_timestamps(b.appliances.values());
    let period = b
        .appliances
        .values()
        .map(Channel::nominal_period)
        .fold(f64::NAN, f64::max);
    let mut appliances = Vec::new();
    for (name, c) in &b.appliances {
        let power = crate::training::values_at(c, feature, &common)?;
        let model = models.and_then(|ms| ms.iter().find(|m| &m.name == name));
        let states = match model {
            Some(m) => power_to_states_model(&power, m),
            None => power_to_states_threshold(&power, DEFAULT_ON_THRESHOLD),
        };
        appliances.push(crate::disaggregation::ApplianceEstimate {
            name: name.clone(),
            states,
            power,
        });
    }
    Ok(Predictions {
        timestamps: common,
        feature,
        nominal_period: if period.is_nan() { 1.0 } else { period },
        appliances,
    })
}

pub const CSV_HEADER: &str = "appliance,metric,algorithm,value";
pub const BUILDING_ROW: &str = "building";
pub const TRAIN_TIME: &str = "Train time (s)";
pub const DISAGGREGATE_TIME: &str = "Disaggregate time (s)";

impl MetricReport {
    /// `(appliance, metric, value)` rows, per appliance first, then building-wide.
    pub fn rows(&self) -> Vec<(String, &'static str, f64)> {
        let mut rows = Vec::new();
        for a in &self.appliances {
            let c = &a.counts;
            for (metric, value) in [
                ("Error in total energy (J)", a.error_total_energy),
                ("NEP", a.nep),
                ("RMSE (W)", a.rmse),
                ("TP", c.tp as f64),
                ("FP", c.fp as f64),
                ("FN", c.fn_ as f64),
                ("TN", c.tn as f64),
                ("TPR", a.rates.tpr.value),
                ("FPR", a.rates.fpr.value),
                ("Precision", a.rates.precision.value),
                ("Recall", a.rates.recall.value),
                ("F-score", a.rates.f_score.value),
            ] {
                rows.push((a.appliance.clone(), metric, value));
            }
        }
        for (metric, value) in [
            ("FTE", self.fte),
            ("NEP", self.nep),
            ("F-score", self.f_score),
            ("Hamming loss", self.hamming_loss),
        ] {
            rows.push((BUILDING_ROW.to_string(), metric, value));
        }
        if let Some(t) = self.train_seconds {
            rows.push((BUILDING_ROW.to_string(), TRAIN_TIME, t));
        }
        if let Some(t) = self.disaggregate_seconds {
            rows.push((BUILDING_ROW.to_string(), DISAGGREGATE_TIME, t));
        }
        rows
    }
}

pub fn reports_to_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        for (appliance, metric, value) in r.rows() {
            out.push_str(&format!("{appliance},{metric},{},{value}\n", r.algorithm));
        }
    }
    out
}

pub fn reports_to_json(reports: &[MetricReport]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    Ok(s)
}
