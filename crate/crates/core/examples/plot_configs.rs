//! Writes the two structure-plot configurations and a default sweep spec to
//! `configs/`.

use std::fs;
use std::path::Path;

use aoi_core::experiments::{generate_instance, ExperimentSpec};
use aoi_core::SystemConfigF64;

fn main() -> aoi_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    fs::create_dir_all(&dir)?;

    let mixed = ExperimentSpec {
        channel_states: 5,
        ..ExperimentSpec::default()
    };
    let cfg: SystemConfigF64 = generate_instance(&mixed, 2)?;
    fs::write(dir.join("structure_mixed.json"), cfg.to_json_string()?)?;

    let type_ii = ExperimentSpec {
        n_type_i: 0,
        n_type_ii: 3,
        channel_states: 4,
        ..ExperimentSpec::default()
    };
    let cfg: SystemConfigF64 = generate_instance(&type_ii, 3)?;
    fs::write(dir.join("structure_type_ii.json"), cfg.to_json_string()?)?;

    let spec = serde_json::to_string_pretty(&ExperimentSpec::default())?;
    fs::write(dir.join("sweep.json"), spec)?;
    Ok(())
}
