pub mod experiment;
pub mod image;
pub mod moments;
pub mod recover;
pub mod simulate;

use holoarray::scene::{parse_experiment_config, ExperimentConfig};
use holoarray::{Error, Result};
use std::path::{Path, PathBuf};

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_experiment_config(&text)
}

/// Output directory: the flag wins, then the config's [run] out.
pub fn resolve_out(flag: Option<&Path>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&cfg.run.out),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// 1-based receiver flag to a zero-based index, defaulting to the center
/// element.
pub fn resolve_receiver(
    flag: Option<usize>,
    geometry: &holoarray::scene::ArrayGeometry,
) -> Result<usize> {
    match flag {
        None => Ok(geometry.center_element()),
        Some(0) => Err(Error::Validation("receiver indices are 1-based".into())),
        Some(r) if r > geometry.len() => Err(Error::Index(format!(
            "receiver {r} exceeds the array size {}",
            geometry.len()
        ))),
        Some(r) => Ok(r - 1),
    }
}
