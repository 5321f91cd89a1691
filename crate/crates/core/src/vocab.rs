//! Appliance nomenclature: raw dataset labels mapped onto one vocabulary.
//!
//! Only labels that occur in the supported datasets are covered. Canonical
//! names are lowercase snake_case; a numeric instance suffix (`lighting_2`)
//! marks the second meter of the same appliance type in a building.

use serde::Serialize;

pub const CANONICAL: &[&str] = &[
    "air_conditioner",
    "air_handling_unit",
    "bathroom_gfi",
    "boiler",
    "clothes_dryer",
    "computer",
    "dishwasher",
    "electric_heating",
    "electric_oven",
    "electric_stove",
    "electronics",
    "entertainment_unit",
    "freezer",
    "fridge",
    "furnace",
    "garbage_disposal",
    "heat_pump",
    "kettle",
    "kitchen_outlets",
    "laptop_computer",
    "lighting",
    "microwave",
    "network_equipment",
    "outdoor_outlets",
    "pump",
    "security_system",
    "smoke_alarm",
    "sockets",
    "subpanel",
    "television",
    "toaster",
    "unknown_outlets",
    "washer_dryer",
    "washing_machine",
    "water_heater",
];

// (dataset, raw label, canonical); dataset "*" applies to every dataset.
const LABEL_MAP: &[(&str, &str, &str)] = &[
    ("REDD", "refrigerator", "fridge"),
    ("REDD", "dishwaser", "dishwasher"),
    ("REDD", "dishwasher", "dishwasher"),
    ("REDD", "kitchen_outlets", "kitchen_outlets"),
    ("REDD", "washer_dryer", "washer_dryer"),
    ("REDD", "electric_heat", "electric_heating"),
    ("REDD", "stove", "electric_stove"),
    ("REDD", "oven", "electric_oven"),
    ("REDD", "disposal", "garbage_disposal"),
    ("REDD", "smoke_alarms", "smoke_alarm"),
    ("REDD", "outlets_unknown", "unknown_outlets"),
    ("REDD", "outdoor_outlets", "outdoor_outlets"),
    ("REDD", "air_conditioning", "air_conditioner"),
    ("REDD", "miscellaeneous", "unknown_outlets"),
    ("REDD", "subpanel", "subpanel"),
    ("REDD", "bathroom_gfi", "bathroom_gfi"),
    ("AMPds", "FGE", "fridge"),
    ("AMPds", "CDE", "clothes_dryer"),
    ("AMPds", "CWE", "washing_machine"),
    ("AMPds", "DWE", "dishwasher"),
    ("AMPds", "HPE", "heat_pump"),
    ("AMPds", "FRE", "furnace"),
    ("AMPds", "WOE", "electric_oven"),
    ("AMPds", "TVE", "entertainment_unit"),
    ("AMPds", "HTE", "water_heater"),
    ("AMPds", "EQE", "security_system"),
    ("AMPds", "OFE", "computer"),
    ("AMPds", "OUE", "outdoor_outlets"),
    ("AMPds", "UTE", "sockets"),
    ("AMPds", "DNE", "sockets"),
    ("AMPds", "BME", "sockets"),
    ("AMPds", "GRE", "sockets"),
    ("AMPds", "EBE", "electronics"),
    ("AMPds", "B1E", "lighting"),
    ("AMPds", "B2E", "lighting"),
    ("iAWE", "ac", "air_conditioner"),
    ("iAWE", "air conditioner", "air_conditioner"),
    ("iAWE", "entertainment unit", "entertainment_unit"),
    ("iAWE", "laptop", "laptop_computer"),
    ("iAWE", "washing machine", "washing_machine"),
    ("iAWE", "water filter", "pump"),
    ("iAWE", "clothes iron", "electronics"),
    ("UK-DALE", "washing_machine", "washing_machine"),
    ("UK-DALE", "dishwasher", "dishwasher"),
    ("UK-DALE", "kettle", "kettle"),
    ("UK-DALE", "boiler", "boiler"),
    ("UK-DALE", "toaster", "toaster"),
    ("UK-DALE", "tv", "television"),
    ("UK-DALE", "htpc", "computer"),
    ("UK-DALE", "laptop", "laptop_computer"),
    ("UK-DALE", "fridge", "fridge"),
    ("UK-DALE", "freezer", "freezer"),
    ("UK-DALE", "kitchen_lights", "lighting"),
    ("UK-DALE", "solar_thermal_pump", "pump"),
    ("Smart*", "refrigerator", "fridge"),
    ("Smart*", "furnacehrv", "furnace"),
    ("Smart*", "dryer", "clothes_dryer"),
    ("Smart*", "washer", "washing_machine"),
    ("Smart*", "tv", "television"),
    ("Pecan Street", "air1", "air_conditioner"),
    ("Pecan Street", "air2", "air_conditioner"),
    ("Pecan Street", "refrigerator1", "fridge"),
    ("Pecan Street", "furnace1", "furnace"),
    ("Pecan Street", "clotheswasher1", "washing_machine"),
    ("Pecan Street", "dishwasher1", "dishwasher"),
    ("Pecan Street", "microwave1", "microwave"),
    ("Pecan Street", "lights_plugs1", "lighting"),
    ("Pecan Street", "airwindowunit1", "air_conditioner"),
    ("*", "refrigerator", "fridge"),
    ("*", "fridge freezer", "fridge"),
    ("*", "tv", "television"),
    ("*", "ac", "air_conditioner"),
    ("*", "air_conditioning", "air_conditioner"),
    ("*", "lights", "lighting"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalLabel {
    pub label: String,
    pub known: bool,
}

/// Maps a dataset-specific appliance label onto the shared vocabulary.
/// Unmapped labels are returned verbatim with `known == false`.
pub fn canonical_label(raw: &str, dataset: &str) -> CanonicalLabel {
    let trimmed = raw.trim();
    let lookup = |ds: &str| {
        LABEL_MAP
            .iter()
            .find(|(d, r, _)| *d == ds && r.eq_ignore_ascii_case(trimmed))
            .map(|(_, _, c)| *c)
    };
    if let Some(c) = lookup(dataset).or_else(|| lookup("*")) {
        return CanonicalLabel {
            label: c.to_string(),
            known: true,
        };
    }
    let normalized = trimmed.to_ascii_lowercase().replace([' ', '-'], "_");
    if CANONICAL.contains(&normalized.as_str()) {
        return CanonicalLabel {
            label: normalized,
            known: true,
        };
    }
    CanonicalLabel {
        label: trimmed.to_string(),
        known: false,
    }
}

/// Raw-to-canonical pairs registered for `dataset`.
pub fn labels_for(dataset: &str) -> Vec<(&'static str, &'static str)> {
    LABEL_MAP
        .iter()
        .filter(|(d, _, _)| *d == dataset)
        .map(|(_, r, c)| (*r, *c))
        .collect()
}

/// True for canonical names, with or without an `_<n>` instance suffix.
pub fn is_canonical(name: &str) -> bool {
    CANONICAL.contains(&strip_instance(name))
}

pub fn strip_instance(name: &str) -> &str {
    match name.rsplit_once('_') {
        Some((base, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => base,
        _ => name,
    }
}

/// `label`, `label_2`, `label_3`, ... for repeated meters of one type.
pub fn instance_name(label: &str, instance: usize) -> String {
    if instance <= 1 {
        label.to_string()
    } else {
        format!("{label}_{instance}")
    }
}
