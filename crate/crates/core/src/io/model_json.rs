//! Persistent model storage.
//!
//! ```json
//! {"algorithm": "co", "appliances": [{"name": "fridge", "states": [{"mean": 0.0, "std": 1.0}, ...]}]}
//! {"algorithm": "fhmm", "noise_variance": 25.0,
//!  "appliances": [{"name": "fridge", "states": [...], "pi": [...], "transition": [[...], ...]}]}
//! ```
//!
//! Floats use shortest round-trip formatting, so export/import is lossless.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::training::{ApplianceHmm, ApplianceStateModel, Model};

#[derive(Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
enum ModelFile {
    Co {
        appliances: Vec<ApplianceStateModel>,
    },
    Fhmm {
        noise_variance: f64,
        appliances: Vec<ApplianceHmm>,
    },
}

pub fn export_model_json(model: &Model) -> Result<String> {
    let file = match model {
        Model::Co(m) => ModelFile::Co {
            appliances: m.appliances.clone(),
        },
        Model::Fhmm(m) => ModelFile::Fhmm {
            noise_variance: m.noise_variance,
            appliances: m.appliances.clone(),
        },
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a model; probabilities must sum to 1 within 1e-6
/// and state stds must be positive.
pub fn import_model_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    let model = match file {
        ModelFile::Co { appliances } => Model::Co(crate::training::CoModel { appliances }),
        ModelFile::Fhmm {
            noise_variance,
            appliances,
        } => Model::Fhmm(crate::training::FhmmModel {
            appliances,
            noise_variance,
        }),
    };
    model.validate()?;
    Ok(model)
}
