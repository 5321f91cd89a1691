//! Dataset importers, the canonical on-disk directory layout and model JSON.

mod csv_channel;
pub mod model_json;
pub mod nilmtk_df;
pub mod redd;

pub use model_json::{export_model_json, import_model_json};
pub use nilmtk_df::{load_nilmtk_df, load_nilmtk_df_with_warnings, save_nilmtk_df};
pub use redd::{import_redd_style, ImportReport};

/// What an importer expects on disk and how its labels translate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImporterDescriptor {
    pub dataset_name: &'static str,
    pub root_layout: &'static str,
    /// Sample period of sub-metered channels, seconds.
    pub nominal_period: f64,
    /// Sample period of mains channels, seconds.
    pub mains_period: f64,
    pub country: &'static str,
    pub nominal_voltage: f64,
    /// Whether this build ships a parser for the layout.
    pub implemented: bool,
}

impl ImporterDescriptor {
    pub fn label_map(&self) -> Vec<(&'static str, &'static str)> {
        crate::vocab::labels_for(self.dataset_name)
    }
}

/// Known datasets. Only `REDD` and `NILMTK-DF` have parsers; the other
/// entries document their source layouts.
pub fn registry() -> &'static [ImporterDescriptor] {
    const REGISTRY: &[ImporterDescriptor] = &[
        ImporterDescriptor {
            dataset_name: "REDD",
            root_layout: "house_<n>/labels.dat + house_<n>/channel_<i>.dat (epoch watts per line)",
            nominal_period: 3.0,
            mains_period: 1.0,
            country: "USA",
            nominal_voltage: 120.0,
            implemented: true,
        },
        ImporterDescriptor {
            dataset_name: "NILMTK-DF",
            root_layout: "dataset.json + house_<i>/utility/electricity/{mains,circuits,appliances}/*.csv",
            nominal_period: 1.0,
            mains_period: 1.0,
            country: "",
            nominal_voltage: 230.0,
            implemented: true,
        },
        ImporterDescriptor {
            dataset_name: "Smart*",
            root_layout: "<house>/<year>/<month>/{meter,circuit}_<id>.csv",
            nominal_period: 1.0,
            mains_period: 1.0,
            country: "USA",
            nominal_voltage: 120.0,
            implemented: false,
        },
        ImporterDescriptor {
            dataset_name: "Pecan Street",
            root_layout: "one CSV per house, one column per circuit (dataid, localminute, ...)",
            nominal_period: 60.0,
            mains_period: 60.0,
            country: "USA",
            nominal_voltage: 120.0,
            implemented: false,
        },
        ImporterDescriptor {
            dataset_name: "iAWE",
            root_layout: "electricity/<meter id>.csv with timestamp,W,VA,VAR,f,V,PF,A",
            nominal_period: 1.0,
            mains_period: 1.0,
            country: "India",
            nominal_voltage: 230.0,
            implemented: false,
        },
        ImporterDescriptor {
            dataset_name: "AMPds",
            root_layout: "Electricity_<CODE>.csv per meter, one-minute rows",
            nominal_period: 60.0,
            mains_period: 60.0,
            country: "Canada",
            nominal_voltage: 120.0,
            implemented: false,
        },
        ImporterDescriptor {
            dataset_name: "UK-DALE",
            root_layout: "house_<n>/labels.dat + house_<n>/channel_<i>.dat (REDD-like, 6 s)",
            nominal_period: 6.0,
            mains_period: 1.0,
            country: "UK",
            nominal_voltage: 230.0,
            implemented: false,
        },
    ];
    REGISTRY
}

pub fn descriptor(dataset_name: &str) -> Option<&'static ImporterDescriptor> {
    registry().iter().find(|d| d.dataset_name == dataset_name)
}
