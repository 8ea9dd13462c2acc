use holoarray::forward::{response_multi, MultiFreqResponse};
use holoarray::io::{write_intensity_records, write_response, IntensityRecord};
use holoarray::medium::Medium;
use holoarray::recovery::{IlluminationPattern, IntensityOracle, SimulatorOracle};
use holoarray::scene::serialize_experiment_config;
use holoarray::Result;
use std::io::Write;
use std::path::Path;

/// Measurement records for the halved protocol on one receiver.
fn protocol_records(
    p: &MultiFreqResponse,
    receiver: usize,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<Vec<IntensityRecord>> {
    let oracle = match snr_db {
        None => SimulatorOracle::new(p, receiver)?,
        Some(snr) => SimulatorOracle::with_noise(p, receiver, snr, seed ^ receiver as u64)?,
    };
    let dim = p.dim();
    let mut records = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let pattern = IlluminationPattern::Single(i);
        records.push(IntensityRecord {
            pattern,
            receiver,
            intensity: oracle.measure(&pattern)?,
        });
    }
    for i in 0..dim {
        for j in i + 1..dim {
            for pattern in [IlluminationPattern::Sum(i, j), IlluminationPattern::Mix(i, j)] {
                records.push(IntensityRecord {
                    pattern,
                    receiver,
                    intensity: oracle.measure(&pattern)?,
                });
            }
        }
    }
    Ok(records)
}

pub fn run(
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    receiver: Option<usize>,
    all_receivers: bool,
    snr_db: Option<f64>,
    dump_field: bool,
) -> Result<()> {
    let mut cfg = super::load_config(config)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    let dir = super::resolve_out(out, &cfg)?;

    let medium = Medium::from_spec(&cfg.medium, cfg.geometry.positions(), &cfg.window, 0)?;
    if dump_field {
        if let Medium::RandomPhase { field, .. } = &medium {
            holoarray::io::write_field(&dir.join("mu.field"), field)?;
        }
    }
    let p = response_multi(&cfg.scene, &cfg.geometry, &medium, &cfg.frequencies)?;
    write_response(&dir.join("response.bin"), &p)?;

    let receivers: Vec<usize> = if all_receivers {
        (0..cfg.geometry.len()).collect()
    } else {
        vec![super::resolve_receiver(receiver, &cfg.geometry)?]
    };
    let mut records = Vec::new();
    for &r in &receivers {
        records.extend(protocol_records(&p, r, snr_db, cfg.run.seed)?);
    }
    write_intensity_records(&dir.join("records.csv"), &records)?;

    std::fs::write(dir.join("config.normalized.toml"), serialize_experiment_config(&cfg))?;

    let mut summary = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.txt"))?);
    writeln!(summary, "elements = {}", cfg.geometry.len())?;
    writeln!(summary, "frequencies = {}", cfg.frequencies.len())?;
    writeln!(summary, "composite dim = {}", p.dim())?;
    writeln!(summary, "scatterers = {}", cfg.scene.len())?;
    writeln!(summary, "receivers recorded = {:?}", receivers.iter().map(|r| r + 1).collect::<Vec<_>>())?;
    writeln!(summary, "records = {}", records.len())?;
    writeln!(summary, "seed = {}", cfg.run.seed)?;
    if let Some(snr) = snr_db {
        writeln!(summary, "snr_db = {snr}")?;
    }
    println!(
        "simulate: wrote response ({}x{}) and {} records to {}",
        p.n(),
        p.dim(),
        records.len(),
        dir.display()
    );
    Ok(())
}
