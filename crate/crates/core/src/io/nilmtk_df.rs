//! Canonical directory layout:
//!
//! ```text
//! <root>/dataset.json
//! <root>/house_<i>/metadata.json
//! <root>/house_<i>/ambient/
//! <root>/house_<i>/external/
//! <root>/house_<i>/utility/electricity/mains/mains_<j>.csv
//! <root>/house_<i>/utility/electricity/circuits/<name>.csv
//! <root>/house_<i>/utility/electricity/appliances/<name>.csv
//! <root>/house_<i>/utility/electricity/wiring.json
//! <root>/house_<i>/utility/gas/
//! <root>/house_<i>/utility/water/
//! ```
//!
//! `metadata.json` holds the building metadata and, per meter file, the
//! channel id and nominal sample period.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv_channel::{read_channel, write_channel};
use crate::error::{Error, Result};
use crate::model::{Building, Channel, DataSet, Metadata};

const PASSTHROUGH_DIRS: &[&str] = &["ambient", "external", "utility/gas", "utility/water"];
const ELECTRICITY: &str = "utility/electricity";

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    name: String,
    #[serde(default)]
    metadata: Metadata,
}

#[derive(Serialize, Deserialize, Default)]
struct HouseMetadataFile {
    #[serde(default)]
    metadata: Metadata,
    #[serde(default)]
    meters: BTreeMap<String, MeterEntry>,
}

#[derive(Serialize, Deserialize, Clone)]
struct MeterEntry {
    id: String,
    nominal_period: f64,
}

#[derive(Serialize, Deserialize)]
struct WiringEdge {
    parent: String,
    child: String,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `ds` under `dir`, creating the full per-house hierarchy.
pub fn save_nilmtk_df(ds: &DataSet, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_file(
        &dir.join("dataset.json"),
        &to_json(&DatasetFile {
            name: ds.name.clone(),
            metadata: ds.metadata.clone(),
        })?,
    )?;
    for (id, b) in &ds.buildings {
        save_building(b, &dir.join(format!("house_{id}")))?;
    }
    Ok(())
}

fn save_building(b: &Building, house: &Path) -> Result<()> {
    for sub in PASSTHROUGH_DIRS {
        create_dir(&house.join(sub))?;
    }
    let elec = house.join(ELECTRICITY);
    for sub in ["mains", "circuits", "appliances"] {
        create_dir(&elec.join(sub))?;
    }

    let mut meters = BTreeMap::new();
    let mut write_meter = |rel: String, c: &Channel| -> Result<()> {
        write_channel(&elec.join(&rel), c)?;
        meters.insert(
            rel,
            MeterEntry {
                id: c.id().to_string(),
                nominal_period: c.nominal_period(),
            },
        );
        Ok(())
    };
    for (j, c) in b.mains.iter().enumerate() {
        write_meter(format!("mains/mains_{}.csv", j + 1), c)?;
    }
    for c in &b.circuits {
        write_meter(format!("circuits/{}.csv", file_stem_safe(c.id())?), c)?;
    }
    for (name, c) in &b.appliances {
        write_meter(format!("appliances/{}.csv", file_stem_safe(name)?), c)?;
    }

    let wiring: Vec<WiringEdge> = b
        .wiring
        .iter()
        .map(|(p, c)| WiringEdge {
            parent: p.clone(),
            child: c.clone(),
        })
        .collect();
    write_file(&elec.join("wiring.json"), &to_json(&wiring)?)?;
    write_file(
        &house.join("metadata.json"),
        &to_json(&HouseMetadataFile {
            metadata: b.metadata.clone(),
            meters,
        })?,
    )?;
    for (rel, contents) in &b.passthrough {
        let path = house.join(rel);
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        write_file(&path, contents)?;
    }
    Ok(())
}

fn file_stem_safe(name: &str) -> Result<&str> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(Error::InvalidInput(format!("`{name}` cannot be used as a file name")));
    }
    Ok(name)
}

pub fn load_nilmtk_df(dir: &Path) -> Result<DataSet> {
    load_nilmtk_df_with_warnings(dir).map(|(ds, warnings)| {
        for w in warnings {
            log::warn!("{w}");
        }
        ds
    })
}

/// Loads a dataset and returns non-fatal schema warnings alongside it.
pub fn load_nilmtk_df_with_warnings(dir: &Path) -> Result<(DataSet, Vec<String>)> {
    let mut warnings = Vec::new();
    let dataset_json = dir.join("dataset.json");
    let mut ds = if dataset_json.exists() {
        let f: DatasetFile = read_json(&dataset_json)?;
        DataSet {
            name: f.name,
            metadata: f.metadata,
            buildings: BTreeMap::new(),
        }
    } else {
        warnings.push(format!("{}: missing, dataset name taken from directory", dataset_json.display()));
        DataSet::new(dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
    };

    for (id, house) in numbered_entries(dir, "house_")?.into_iter().filter(|(_, p)| p.is_dir()) {
        ds.buildings.insert(id, load_building(id, &house, &mut warnings)?);
    }
    Ok((ds, warnings))
}

fn load_building(id: u32, house: &Path, warnings: &mut Vec<String>) -> Result<Building> {
    let meta_path = house.join("metadata.json");
    let meta: HouseMetadataFile = if meta_path.exists() {
        read_json(&meta_path)?
    } else {
        warnings.push(format!("{}: missing, periods inferred from data", meta_path.display()));
        HouseMetadataFile::default()
    };
    let elec = house.join(ELECTRICITY);
    let load = |rel: &str, default_id: &str| -> Result<Channel> {
        let entry = meta.meters.get(rel);
        read_channel(
            &elec.join(rel),
            entry.map_or(default_id, |e| e.id.as_str()),
            entry.map(|e| e.nominal_period),
        )
    };

    let mut b = Building::new(id);
    b.metadata = meta.metadata.clone();
    for (j, _) in numbered_entries(&elec.join("mains"), "mains_")? {
        let rel = format!("mains/mains_{j}.csv");
        b.mains.push(load(&rel, &format!("mains_{j}"))?);
    }
    for stem in csv_stems(&elec.join("circuits"))? {
        b.circuits.push(load(&format!("circuits/{stem}.csv"), &stem)?);
    }
    for stem in csv_stems(&elec.join("appliances"))? {
        let c = load(&format!("appliances/{stem}.csv"), &stem)?;
        b.appliances.insert(stem, c);
    }

    let wiring_path = elec.join("wiring.json");
    if wiring_path.exists() {
        let edges: Vec<WiringEdge> = read_json(&wiring_path)?;
        b.wiring = edges.into_iter().map(|e| (e.parent, e.child)).collect();
    } else {
        warnings.push(format!("{}: missing, wiring left empty", wiring_path.display()));
    }

    for sub in PASSTHROUGH_DIRS {
        collect_passthrough(house, &house.join(sub), &mut b.passthrough)?;
    }
    Ok(b)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(path, e.line(), e.to_string()))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Entries named `<prefix><n>` or `<prefix><n>.<ext>`, ordered by `n`.
pub(crate) fn numbered_entries(dir: &Path, prefix: &str) -> Result<Vec<(u32, PathBuf)>> {
    let mut out: Vec<(u32, PathBuf)> = read_dir_sorted(dir)?
        .into_iter()
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?.to_string();
            let rest = name.strip_prefix(prefix)?;
            let rest = rest.split('.').next().unwrap_or(rest);
            rest.parse::<u32>().ok().map(|n| (n, p))
        })
        .collect();
    out.sort_by_key(|(n, _)| *n);
    Ok(out)
}

fn csv_stems(dir: &Path) -> Result<Vec<String>> {
    Ok(read_dir_sorted(dir)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect())
}

fn collect_passthrough(house: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    for p in read_dir_sorted(dir)? {
        if p.is_dir() {
            collect_passthrough(house, &p, out)?;
        } else {
            let rel = p
                .strip_prefix(house)
                .expect("entry lies under house dir")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            out.insert(rel, text);
        }
    }
    Ok(())
}
