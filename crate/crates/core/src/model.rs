//! In-memory household data model shared by every pipeline stage.
//!
//! Missing data is represented by absent rows, never by NaN placeholders.
//! Timestamps are UTC seconds since the Unix epoch stored as `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Power,
    Voltage,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Active,
    Apparent,
    Reactive,
    None,
}

/// A physical quantity measured by a meter, e.g. active power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Measurement {
    quantity: Quantity,
    variant: Variant,
}

impl Measurement {
    pub const POWER_ACTIVE: Measurement = Measurement {
        quantity: Quantity::Power,
        variant: Variant::Active,
    };
    pub const POWER_APPARENT: Measurement = Measurement {
        quantity: Quantity::Power,
        variant: Variant::Apparent,
    };
    pub const POWER_REACTIVE: Measurement = Measurement {
        quantity: Quantity::Power,
        variant: Variant::Reactive,
    };
    pub const VOLTAGE: Measurement = Measurement {
        quantity: Quantity::Voltage,
        variant: Variant::None,
    };

    /// Voltage only exists without a variant.
    pub fn new(quantity: Quantity, variant: Variant) -> Result<Self> {
        if quantity == Quantity::Voltage && variant != Variant::None {
            return Err(Error::InvalidInput(format!(
                "voltage cannot carry variant {variant:?}"
            )));
        }
        Ok(Measurement { quantity, variant })
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Column name in the on-disk CSV schema: `<quantity>_<variant>`, or
    /// the bare quantity when there is no variant.
    pub fn column_name(&self) -> String {
        let q = match self.quantity {
            Quantity::Power => "power",
            Quantity::Voltage => "voltage",
            Quantity::Energy => "energy",
        };
        match self.variant {
            Variant::Active => format!("{q}_active"),
            Variant::Apparent => format!("{q}_apparent"),
            Variant::Reactive => format!("{q}_reactive"),
            Variant::None => q.to_string(),
        }
    }
}

impl Default for Measurement {
    fn default() -> Self {
        Measurement::POWER_ACTIVE
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column_name())
    }
}

impl FromStr for Measurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (q, v) = match s.split_once('_') {
            Some((q, v)) => (q, Some(v)),
            None => (s, None),
        };
        let quantity = match q {
            "power" => Quantity::Power,
            "voltage" => Quantity::Voltage,
            "energy" => Quantity::Energy,
            _ => return Err(Error::InvalidInput(format!("unknown measurement `{s}`"))),
        };
        let variant = match v {
            None => Variant::None,
            Some("active") => Variant::Active,
            Some("apparent") => Variant::Apparent,
            Some("reactive") => Variant::Reactive,
            Some(_) => return Err(Error::InvalidInput(format!("unknown measurement `{s}`"))),
        };
        Measurement::new(quantity, variant)
            .map_err(|_| Error::InvalidInput(format!("unknown measurement `{s}`")))
    }
}

impl Serialize for Measurement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.column_name())
    }
}

impl<'de> Deserialize<'de> for Measurement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Interval between two consecutive samples that exceeds a gap threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub start: f64,
    pub end: f64,
}

impl Gap {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// True when `t` lies strictly between the two samples bounding the gap.
    pub fn contains(&self, t: f64) -> bool {
        t > self.start && t < self.end
    }
}

/// Timestamped measurements from a single meter.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    id: String,
    timestamps: Vec<f64>,
    columns: BTreeMap<Measurement, Vec<f64>>,
    nominal_period: f64,
}

impl Channel {
    /// Builds a channel and rejects any violation of the channel invariants.
    pub fn new(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        columns: BTreeMap<Measurement, Vec<f64>>,
        nominal_period: f64,
    ) -> Result<Self> {
        let channel = Channel::from_raw(id, timestamps, columns, nominal_period);
        match channel.violations().into_iter().next() {
            None => Ok(channel),
            Some(rule) => Err(Error::InvalidInput(format!("channel `{}`: {rule}", channel.id))),
        }
    }

    /// Builds a channel without checking invariants; see [`validate_building`].
    pub fn from_raw(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        columns: BTreeMap<Measurement, Vec<f64>>,
        nominal_period: f64,
    ) -> Self {
        Channel {
            id: id.into(),
            timestamps,
            columns,
            nominal_period,
        }
    }

    /// Single-column convenience constructor.
    pub fn single(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        measurement: Measurement,
        values: Vec<f64>,
        nominal_period: f64,
    ) -> Result<Self> {
        let mut columns = BTreeMap::new();
        columns.insert(measurement, values);
        Channel::new(id, timestamps, columns, nominal_period)
    }

    /// Active power channel.
    pub fn power(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        watts: Vec<f64>,
        nominal_period: f64,
    ) -> Result<Self> {
        Channel::single(id, timestamps, Measurement::POWER_ACTIVE, watts, nominal_period)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn columns(&self) -> &BTreeMap<Measurement, Vec<f64>> {
        &self.columns
    }

    pub fn column(&self, m: Measurement) -> Option<&[f64]> {
        self.columns.get(&m).map(Vec::as_slice)
    }

    pub fn has(&self, m: Measurement) -> bool {
        self.columns.contains_key(&m)
    }

    pub fn require(&self, m: Measurement) -> Result<&[f64]> {
        self.column(m).ok_or_else(|| Error::MissingColumn {
            channel: self.id.clone(),
            measurement: m.column_name(),
        })
    }

    pub fn nominal_period(&self) -> f64 {
        self.nominal_period
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.timestamps.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.timestamps.last().copied()
    }

    /// `last - first`, zero for fewer than two samples.
    pub fn span(&self) -> f64 {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_nominal_period(mut self, period: f64) -> Self {
        self.nominal_period = period;
        self
    }

    /// Keeps the rows for which `keep(row_index, timestamp)` holds.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize, f64) -> bool) -> Channel {
        let mask: Vec<bool> = self
            .timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| keep(i, t))
            .collect();
        let pick = |v: &Vec<f64>| {
            v.iter()
                .zip(&mask)
                .filter_map(|(&x, &k)| k.then_some(x))
                .collect::<Vec<_>>()
        };
        Channel {
            id: self.id.clone(),
            timestamps: pick(&self.timestamps),
            columns: self.columns.iter().map(|(m, v)| (*m, pick(v))).collect(),
            nominal_period: self.nominal_period,
        }
    }

    /// Replaces one column; lengths must match.
    pub fn with_column(mut self, m: Measurement, values: Vec<f64>) -> Result<Channel> {
        if values.len() != self.timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "column `{m}` has {} values for {} timestamps",
                values.len(),
                self.timestamps.len()
            )));
        }
        self.columns.insert(m, values);
        Ok(self)
    }

    /// Invariant violations of this channel, as rule descriptions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.nominal_period > 0.0 && self.nominal_period.is_finite()) {
            out.push("non-positive nominal period".to_string());
        }
        if self.columns.values().any(|v| v.len() != self.timestamps.len()) {
            out.push("column length mismatch".to_string());
        }
        if self.timestamps.iter().any(|t| !t.is_finite()) {
            out.push("non-finite timestamp".to_string());
        }
        if self.timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            out.push("non-monotone timestamps".to_string());
        }
        if self.columns.values().flatten().any(|v| !v.is_finite()) {
            out.push("non-finite value".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub channel: String,
    pub rule: String,
}

pub type Metadata = BTreeMap<String, serde_json::Value>;

/// One household: mains, circuits and appliance meters plus metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Building {
    pub id: u32,
    pub mains: Vec<Channel>,
    pub circuits: Vec<Channel>,
    pub appliances: BTreeMap<String, Channel>,
    pub metadata: Metadata,
    /// (parent meter id, child meter id)
    pub wiring: Vec<(String, String)>,
    /// Non-electric sensor files (gas, water, ambient, external) kept verbatim,
    /// keyed by path relative to the house directory.
    pub passthrough: BTreeMap<String, String>,
}

impl Building {
    pub fn new(id: u32) -> Self {
        Building {
            id,
            ..Default::default()
        }
    }

    /// All mains, circuit and appliance channels.
    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.mains
            .iter()
            .chain(self.circuits.iter())
            .chain(self.appliances.values())
    }

    pub fn appliance_names(&self) -> Vec<&str> {
        self.appliances.keys().map(String::as_str).collect()
    }

    /// Applies `f` to every channel, keeping the building layout.
    pub fn try_map_channels(&self, mut f: impl FnMut(&Channel) -> Result<Channel>) -> Result<Building> {
        let mut out = self.clone();
        for c in out.mains.iter_mut().chain(out.circuits.iter_mut()) {
            *c = f(c)?;
        }
        for c in out.appliances.values_mut() {
            *c = f(c)?;
        }
        Ok(out)
    }

    /// Household aggregate for `feature`: the sum over all mains channels at
    /// the timestamps every mains channel shares.
    pub fn aggregate(&self, feature: Measurement) -> Result<Channel> {
        let first = self
            .mains
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("building {} has no mains", self.id)))?;
        if self.mains.len() == 1 {
            let values = first.require(feature)?.to_vec();
            return Channel::single(
                "aggregate",
                first.timestamps().to_vec(),
                feature,
                values,
                first.nominal_period(),
            );
        }
        let common = common_timestamps(self.mains.iter());
        let mut total = vec![0.0; common.len()];
        for m in &self.mains {
            let values = m.require(feature)?;
            let mut j = 0;
            for (i, &t) in m.timestamps().iter().enumerate() {
                if j < common.len() && common[j] == t {
                    total[j] += values[i];
                    j += 1;
                }
            }
        }
        let period = self
            .mains
            .iter()
            .map(Channel::nominal_period)
            .fold(f64::NAN, f64::max);
        Channel::single("aggregate", common, feature, total, period)
    }
}

/// Timestamps present in every channel (exact equality).
pub fn common_timestamps<'a>(channels: impl Iterator<Item = &'a Channel>) -> Vec<f64> {
    let mut common: Option<Vec<f64>> = None;
    for c in channels {
        common = Some(match common {
            None => c.timestamps().to_vec(),
            Some(prev) => intersect_sorted(&prev, c.timestamps()),
        });
    }
    common.unwrap_or_default()
}

pub(crate) fn intersect_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            i += 1;
        } else if a[i] > b[j] {
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
            j += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSet {
    pub name: String,
    pub buildings: BTreeMap<u32, Building>,
    pub metadata: Metadata,
}

impl DataSet {
    pub fn new(name: impl Into<String>) -> Self {
        DataSet {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn building(&self, id: u32) -> Result<&Building> {
        self.buildings
            .get(&id)
            .ok_or_else(|| Error::InvalidInput(format!("dataset `{}` has no building {id}", self.name)))
    }
}

/// Checks every type invariant of a building. An empty list means valid.
pub fn validate_building(b: &Building) -> Vec<Violation> {
    let mut out = Vec::new();
    let building = format!("building_{}", b.id);
    if b.id < 1 {
        out.push(Violation {
            channel: building.clone(),
            rule: "building id must be at least 1".into(),
        });
    }
    for c in b.channels() {
        for rule in c.violations() {
            out.push(Violation {
                channel: c.id().to_string(),
                rule,
            });
        }
    }
    for name in b.appliances.keys() {
        if !vocab::is_canonical(name) {
            out.push(Violation {
                channel: name.clone(),
                rule: "unknown appliance label".into(),
            });
        }
    }
    out.extend(wiring_violations(b));
    out
}

fn wiring_violations(b: &Building) -> Vec<Violation> {
    let mut out = Vec::new();
    let mains: BTreeSet<&str> = b.mains.iter().map(Channel::id).collect();
    let known: BTreeSet<&str> = b.channels().map(Channel::id).collect();
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (parent, child) in &b.wiring {
        for id in [parent, child] {
            if !known.contains(id.as_str()) {
                out.push(Violation {
                    channel: id.clone(),
                    rule: "unknown meter in wiring".into(),
                });
            }
        }
        if mains.contains(child.as_str()) {
            out.push(Violation {
                channel: child.clone(),
                rule: "mains meter cannot have a parent".into(),
            });
        }
        if parent_of.insert(child, parent).is_some() {
            out.push(Violation {
                channel: child.clone(),
                rule: "meter has multiple parents".into(),
            });
        }
    }
    for &start in parent_of.keys() {
        let mut seen = BTreeSet::from([start]);
        let mut node = start;
        while let Some(&p) = parent_of.get(node) {
            if !seen.insert(p) {
                out.push(Violation {
                    channel: start.to_string(),
                    rule: "wiring cycle".into(),
                });
                break;
            }
            node = p;
        }
        if !parent_of.contains_key(node) && !mains.contains(node) && known.contains(node) {
            out.push(Violation {
                channel: start.to_string(),
                rule: "wiring tree not rooted at mains".into(),
            });
        }
    }
    out
}

/// Rows with `start <= t < end`.
pub fn select_window(c: &Channel, start: f64, end: f64) -> Result<Channel> {
    if !(start < end) {
        return Err(Error::InvalidInput(format!(
            "window start {start} must precede end {end}"
        )));
    }
    Ok(c.filter_rows(|_, t| t >= start && t < end))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(id: &str, ts: &[f64]) -> Channel {
        Channel::power(id, ts.to_vec(), vec![1.0; ts.len()], 1.0).unwrap()
    }

    #[test]
    fn measurement_names_round_trip() {
        for name in ["power_active", "power_apparent", "power_reactive", "voltage", "energy_active"] {
            let m: Measurement = name.parse().unwrap();
            assert_eq!(m.column_name(), name);
        }
        assert!("voltage_active".parse::<Measurement>().is_err());
        assert!("temperature".parse::<Measurement>().is_err());
        assert_eq!(Measurement::default(), Measurement::POWER_ACTIVE);
    }

    #[test]
    fn well_formed_building_has_no_violations() {
        let mut b = Building::new(1);
        b.mains.push(ch("mains_1", &[0.0, 1.0, 2.0]));
        b.appliances.insert("fridge".into(), ch("fridge", &[0.0, 1.0, 2.0]));
        b.wiring.push(("mains_1".into(), "fridge".into()));
        assert!(validate_building(&b).is_empty());
    }

    #[test]
    fn decreasing_timestamps_reported() {
        let mut b = Building::new(1);
        let bad = Channel::from_raw(
            "mains_1",
            vec![0.0, 2.0, 1.0],
            BTreeMap::from([(Measurement::POWER_ACTIVE, vec![1.0; 3])]),
            1.0,
        );
        b.mains.push(bad);
        let v = validate_building(&b);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "non-monotone timestamps");
        assert_eq!(v[0].channel, "mains_1");
    }

    #[test]
    fn raw_label_is_not_canonical() {
        let mut b = Building::new(1);
        b.mains.push(ch("mains_1", &[0.0, 1.0]));
        b.appliances.insert("FGE".into(), ch("FGE", &[0.0, 1.0]));
        let v = validate_building(&b);
        assert_eq!(
            v,
            vec![Violation {
                channel: "FGE".into(),
                rule: "unknown appliance label".into()
            }]
        );
    }

    #[test]
    fn wiring_must_be_a_forest_under_mains() {
        let mut b = Building::new(1);
        b.mains.push(ch("mains_1", &[0.0, 1.0]));
        b.circuits.push(ch("panel_1", &[0.0, 1.0]));
        b.appliances.insert("fridge".into(), ch("fridge", &[0.0, 1.0]));
        b.wiring = vec![
            ("panel_1".into(), "fridge".into()),
            ("fridge".into(), "panel_1".into()),
        ];
        let rules: Vec<_> = validate_building(&b).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"wiring cycle".to_string()));

        b.wiring = vec![("panel_1".into(), "fridge".into())];
        let rules: Vec<_> = validate_building(&b).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec!["wiring tree not rooted at mains".to_string()]);

        b.wiring = vec![
            ("mains_1".into(), "panel_1".into()),
            ("panel_1".into(), "fridge".into()),
        ];
        assert!(validate_building(&b).is_empty());
    }

    #[test]
    fn nan_rejected_by_constructor() {
        assert!(Channel::power("x", vec![0.0, 1.0], vec![1.0, f64::NAN], 1.0).is_err());
        assert!(Channel::power("x", vec![0.0, 0.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(Channel::power("x", vec![0.0], vec![1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn window_selects_half_open_interval() {
        let c = ch("a", &[5.0, 10.0, 15.0, 20.0]);
        let w = select_window(&c, 10.0, 20.0).unwrap();
        assert_eq!(w.timestamps(), &[10.0, 15.0]);
        assert_eq!(w.nominal_period(), 1.0);
        assert_eq!(select_window(&c, 0.0, 100.0).unwrap(), c);
        assert!(select_window(&c, 100.0, 200.0).unwrap().is_empty());
        assert!(select_window(&c, 20.0, 10.0).is_err());
    }

    #[test]
    fn aggregate_sums_mains_on_shared_timestamps() {
        let mut b = Building::new(1);
        b.mains.push(Channel::power("mains_1", vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], 1.0).unwrap());
        b.mains.push(Channel::power("mains_2", vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0], 1.0).unwrap());
        let agg = b.aggregate(Measurement::POWER_ACTIVE).unwrap();
        assert_eq!(agg.timestamps(), &[1.0, 2.0]);
        assert_eq!(agg.column(Measurement::POWER_ACTIVE).unwrap(), &[12.0, 23.0]);
    }
}
