//! Data-quality diagnostics: gaps, dropout and up-time.
//!
//! Dropout is reported as the *missing* fraction, `1 - recorded/expected`,
//! so a perfect channel has dropout 0. The expected sample count over a
//! span counts both endpoints: `floor(span / nominal_period) + 1`.

use serde::Serialize;

use crate::model::{Building, Channel, Gap};
use crate::stats;

pub const DEFAULT_GAP_FACTOR: f64 = 3.0;
const SECONDS_PER_DAY: f64 = 86_400.0;

/// Three nominal periods: one or two lost samples do not open a gap.
pub fn default_gap_threshold(c: &Channel) -> f64 {
    DEFAULT_GAP_FACTOR * c.nominal_period()
}

/// Every consecutive pair further apart than `threshold`, in time order.
pub fn detect_gaps(c: &Channel, threshold: f64) -> Vec<Gap> {
    c.timestamps()
        .windows(2)
        .filter(|w| w[1] - w[0] > threshold)
        .map(|w| Gap { start: w[0], end: w[1] })
        .collect()
}

fn expected_samples(span: f64, period: f64) -> u64 {
    // tolerate span/period landing a hair under an integer
    (span / period + 1e-9).floor() as u64 + 1
}

fn missing_fraction(recorded: usize, span: f64, period: f64) -> f64 {
    let expected = expected_samples(span, period);
    let recorded = recorded as u64;
    if recorded >= expected {
        return 0.0;
    }
    (expected - recorded) as f64 / expected as f64
}

/// Fraction of expected samples that are missing, in [0, 1].
pub fn dropout_rate(c: &Channel) -> f64 {
    if c.len() < 2 {
        return 0.0;
    }
    missing_fraction(c.len(), c.span(), c.nominal_period())
}

/// Dropout over the contiguous sections between gaps, weighted by section
/// duration.
pub fn dropout_rate_ignoring_gaps(c: &Channel, gap_threshold: f64) -> f64 {
    if c.len() < 2 {
        return 0.0;
    }
    let sections = sections(c, gap_threshold);
    if sections.len() == 1 {
        return dropout_rate(c);
    }
    let ts = c.timestamps();
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (a, b) in sections {
        let span = ts[b - 1] - ts[a];
        if span > 0.0 {
            weighted += span * missing_fraction(b - a, span, c.nominal_period());
            total += span;
        }
    }
    if total > 0.0 {
        weighted / total
    } else {
        0.0
    }
}

/// Half-open row ranges of the contiguous sections.
pub(crate) fn sections(c: &Channel, gap_threshold: f64) -> Vec<(usize, usize)> {
    let ts = c.timestamps();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..ts.len() {
        if ts[i] - ts[i - 1] > gap_threshold {
            out.push((start, i));
            start = i;
        }
    }
    if !ts.is_empty() {
        out.push((start, ts.len()));
    }
    out
}

/// Last timestamp minus first timestamp minus the duration of every gap.
pub fn uptime(c: &Channel, gap_threshold: f64) -> f64 {
    if c.len() < 2 {
        return 0.0;
    }
    let gaps: f64 = detect_gaps(c, gap_threshold).iter().map(Gap::duration).sum();
    c.span() - gaps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelDiagnostics {
    pub channel: String,
    pub kind: &'static str,
    pub samples: usize,
    pub gap_threshold: f64,
    pub gaps: Vec<Gap>,
    pub dropout_rate: f64,
    pub dropout_rate_ignoring_gaps: f64,
    pub uptime: f64,
    pub percent_uptime: f64,
}

/// One household row in the layout of the dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingSummary {
    #[serde(rename = "Number of appliances")]
    pub number_of_appliances: usize,
    #[serde(rename = "Percentage energy sub-metered")]
    pub percentage_energy_submetered: Option<f64>,
    #[serde(rename = "Dropout rate (percent) ignoring gaps")]
    pub dropout_rate_ignoring_gaps_percent: f64,
    #[serde(rename = "Mains up-time per house (days)")]
    pub mains_uptime_days: f64,
    #[serde(rename = "Percentage up-time")]
    pub percentage_uptime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub building: u32,
    pub channels: Vec<ChannelDiagnostics>,
    pub summary: BuildingSummary,
}

impl DiagnosticReport {
    /// Per-channel table, one row per channel.
    pub fn channels_csv(&self) -> String {
        let mut out = String::from(
            "channel,kind,samples,gaps,dropout_rate,dropout_rate_ignoring_gaps,uptime_s,percent_uptime\n",
        );
        for c in &self.channels {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.channel,
                c.kind,
                c.samples,
                c.gaps.len(),
                c.dropout_rate,
                c.dropout_rate_ignoring_gaps,
                c.uptime,
                c.percent_uptime
            ));
        }
        out
    }

    /// Building summary with the dataset-table column names.
    pub fn summary_csv(&self) -> String {
        let s = &self.summary;
        format!(
            "Building,Number of appliances,Percentage energy sub-metered,Dropout rate (percent) ignoring gaps,Mains up-time per house (days),Percentage up-time\n{},{},{},{},{},{}\n",
            self.building,
            s.number_of_appliances,
            s.percentage_energy_submetered.map(|p| p.to_string()).unwrap_or_default(),
            s.dropout_rate_ignoring_gaps_percent,
            s.mains_uptime_days,
            s.percentage_uptime
        )
    }
}

fn channel_diagnostics(c: &Channel, kind: &'static str, threshold: Option<f64>) -> ChannelDiagnostics {
    let threshold = threshold.unwrap_or_else(|| default_gap_threshold(c));
    let up = uptime(c, threshold);
    let span = c.span();
    ChannelDiagnostics {
        channel: c.id().to_string(),
        kind,
        samples: c.len(),
        gap_threshold: threshold,
        gaps: detect_gaps(c, threshold),
        dropout_rate: dropout_rate(c),
        dropout_rate_ignoring_gaps: dropout_rate_ignoring_gaps(c, threshold),
        uptime: up,
        percent_uptime: if span > 0.0 { up / span } else { 0.0 },
    }
}

/// Runs every diagnostic on every channel. `None` uses the per-channel
/// default threshold.
pub fn diagnose(b: &Building, gap_threshold: Option<f64>) -> DiagnosticReport {
    let mut channels: Vec<ChannelDiagnostics> = Vec::new();
    channels.extend(b.mains.iter().map(|c| channel_diagnostics(c, "mains", gap_threshold)));
    channels.extend(b.circuits.iter().map(|c| channel_diagnostics(c, "circuit", gap_threshold)));
    channels.extend(b.appliances.values().map(|c| channel_diagnostics(c, "appliance", gap_threshold)));

    let metered: Vec<&ChannelDiagnostics> = channels.iter().filter(|c| c.kind != "circuit").collect();
    let dropout = if metered.is_empty() {
        0.0
    } else {
        metered.iter().map(|c| c.dropout_rate_ignoring_gaps).sum::<f64>() / metered.len() as f64
    };
    let mains = channels.iter().find(|c| c.kind == "mains");
    let summary = BuildingSummary {
        number_of_appliances: b.appliances.len(),
        percentage_energy_submetered: stats::proportion_energy_submetered(b, gap_threshold)
            .ok()
            .map(|p| 100.0 * p),
        dropout_rate_ignoring_gaps_percent: 100.0 * dropout,
        mains_uptime_days: mains.map_or(0.0, |m| m.uptime / SECONDS_PER_DAY),
        percentage_uptime: mains.map_or(0.0, |m| 100.0 * m.percent_uptime),
    };
    DiagnosticReport {
        building: b.id,
        channels,
        summary,
    }
}
