//! Channel CSV: a mandatory header `timestamp,<measurement>...` followed by
//! one row per sample. Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Channel, Measurement};

pub(crate) fn write_channel(path: &Path, c: &Channel) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(c.columns().keys().map(Measurement::column_name));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let columns: Vec<&Vec<f64>> = c.columns().values().collect();
    let mut row = Vec::with_capacity(header.len());
    for (i, t) in c.timestamps().iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        row.extend(columns.iter().map(|col| col[i].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_channel(path: &Path, id: &str, nominal_period: Option<f64>) -> Result<Channel> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0).map(str::trim) != Some("timestamp") {
        return Err(Error::schema(path, 1, "first column must be `timestamp`"));
    }
    let mut measurements = Vec::new();
    for name in header.iter().skip(1) {
        let m: Measurement = name
            .trim()
            .parse()
            .map_err(|_| Error::schema(path, 1, format!("unknown measurement `{name}`")))?;
        if measurements.contains(&m) {
            return Err(Error::schema(path, 1, format!("duplicate column `{name}`")));
        }
        measurements.push(m);
    }

    let mut timestamps = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); measurements.len()];
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != measurements.len() + 1 {
            return Err(Error::schema(
                path,
                line,
                format!("expected {} fields, found {}", measurements.len() + 1, record.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::schema(path, line, format!("invalid number `{s}`")))
        };
        let t = parse(&record[0])?;
        if let Some(&prev) = timestamps.last() {
            if t == prev {
                return Err(Error::schema(path, line, format!("duplicate timestamp {t}")));
            }
            if t < prev {
                return Err(Error::schema(path, line, format!("timestamp {t} not increasing")));
            }
        }
        timestamps.push(t);
        for (j, col) in values.iter_mut().enumerate() {
            col.push(parse(&record[j + 1])?);
        }
    }

    let period = match nominal_period {
        Some(p) => p,
        None => infer_period(&timestamps),
    };
    let columns: BTreeMap<Measurement, Vec<f64>> = measurements.into_iter().zip(values).collect();
    Channel::new(id, timestamps, columns, period).map_err(|e| Error::schema(path, 0, e.to_string()))
}

/// Median inter-sample spacing, 1 s when undefined.
pub(crate) fn infer_period(timestamps: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.is_empty() {
        return 1.0;
    }
    diffs.sort_by(f64::total_cmp);
    diffs[diffs.len() / 2]
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path, line, format!("{other:?}")),
    }
}
