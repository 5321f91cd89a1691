//! REDD-style flat files: `house_<n>/labels.dat` maps channel numbers to
//! labels, `house_<n>/channel_<i>.dat` holds `epoch watts` pairs per line.
//! Channels 1 and 2 are the two mains legs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::descriptor;
use super::nilmtk_df::numbered_entries;
use crate::error::{Error, Result};
use crate::model::{Building, Channel, DataSet};
#[cfg(test)]
use crate::model::Measurement;
use crate::vocab::{canonical_label, instance_name};

const MAINS_CHANNELS: u32 = 2;

/// Rows that were dropped while importing, per file and in total.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImportReport {
    /// Malformed or non-finite rows.
    pub skipped: usize,
    /// Rows repeating an earlier timestamp.
    pub duplicates: usize,
    pub per_file: BTreeMap<String, usize>,
    /// Labels with no canonical mapping, kept verbatim.
    pub unknown_labels: Vec<String>,
}

pub fn import_redd_style(dir: &Path) -> Result<(DataSet, ImportReport)> {
    let desc = descriptor("REDD").expect("REDD is registered");
    let houses = numbered_entries(dir, "house_")?;
    let houses: Vec<_> = houses.into_iter().filter(|(_, p)| p.is_dir()).collect();
    if houses.is_empty() {
        return Err(Error::NoHouses(dir.to_path_buf()));
    }

    let mut ds = DataSet::new("REDD");
    ds.metadata.insert("source_layout".into(), "redd".into());
    let mut report = ImportReport::default();
    for (id, house) in houses {
        let labels_path = house.join("labels.dat");
        if !labels_path.exists() {
            return Err(Error::MissingLabels(labels_path));
        }
        let labels = read_labels(&labels_path)?;

        let mut b = Building::new(id);
        b.metadata.insert("original_name".into(), format!("house_{id}").into());
        b.metadata.insert("country".into(), desc.country.into());
        b.metadata.insert("nominal_voltage".into(), desc.nominal_voltage.into());
        let mut instances: BTreeMap<String, usize> = BTreeMap::new();
        for (n, path) in numbered_entries(&house, "channel_")? {
            if path.extension().is_none_or(|e| e != "dat") {
                continue;
            }
            let key = format!("house_{id}/channel_{n}.dat");
            let (ts, watts, skipped, dups) = read_pairs(&path)?;
            report.skipped += skipped;
            report.duplicates += dups;
            if skipped > 0 {
                report.per_file.insert(key.clone(), skipped);
            }
            if n <= MAINS_CHANNELS {
                let c = Channel::power(format!("mains_{n}"), ts, watts, desc.mains_period)?;
                b.mains.push(c);
                continue;
            }
            let raw = labels.get(&n).cloned().unwrap_or_else(|| format!("channel_{n}"));
            let label = canonical_label(&raw, desc.dataset_name);
            if !label.known {
                report.unknown_labels.push(format!("{key}: {raw}"));
            }
            let count = instances.entry(label.label.clone()).or_insert(0);
            *count += 1;
            let name = instance_name(&label.label, *count);
            let c = Channel::power(name.clone(), ts, watts, desc.nominal_period)?;
            b.appliances.insert(name, c);
        }
        ds.buildings.insert(id, b);
    }
    Ok((ds, report))
}

fn read_labels(path: &Path) -> Result<BTreeMap<u32, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (n, label) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::schema(path, i + 1, "expected `<channel> <label>`"))?;
        let n: u32 = n
            .parse()
            .map_err(|_| Error::schema(path, i + 1, format!("invalid channel number `{n}`")))?;
        out.insert(n, label.trim().to_string());
    }
    Ok(out)
}

/// Parses `epoch watts` lines, sorted by time. Returns (timestamps, watts,
/// malformed rows, duplicate rows).
fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let parsed = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(w), None) => t.parse::<f64>().ok().zip(w.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((t, w)) if t.is_finite() && w.is_finite() => rows.push((t, w)),
            _ => skipped += 1,
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let before = rows.len();
    rows.dedup_by(|b, a| a.0 == b.0);
    let dups = before - rows.len();
    let (ts, watts) = rows.into_iter().unzip();
    Ok((ts, watts, skipped, dups))
}
