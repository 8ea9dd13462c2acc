use crate::presets::{cluster_layout, config_toml, spread_layout, PresetGeometry, CATALOG};
use holoarray::forward::{response_multi, MultiFreqResponse};
use holoarray::imaging::{
    build_mask, build_model_matrix, extract_peaks, image_interf_rank_one, image_km,
    image_srint_rank_one, music_image_multifreq, resolution_metrics, signal_image_multifreq,
    ImageMap, Peak, ProjectionPairing,
};
use holoarray::io::{write_image_csv, write_image_header, write_image_pgm, write_peaks_csv};
use holoarray::medium::Medium;
use holoarray::recovery::{rank_one_interferometric, recover_mr, PairProtocol, SimulatorOracle};
use holoarray::scene::{parse_experiment_config, ExperimentConfig, Pos};
use holoarray::{Error, Result};
use std::io::Write;
use std::path::Path;

fn parse_preset_config(text: &str) -> Result<ExperimentConfig> {
    parse_experiment_config(text)
}

/// Snaps nominal scatterer positions onto cell centers (on-grid) or onto
/// centers displaced by half a cell (off-grid).
fn place_scatterers(cfg: &ExperimentConfig, on_grid: bool) -> Vec<(f64, f64)> {
    let iw = &cfg.window;
    cfg.scene
        .scatterers()
        .iter()
        .map(|(p, _)| {
            let snapped = iw.point(iw.nearest_index(p));
            if on_grid {
                (snapped.x, snapped.z)
            } else {
                (snapped.x + iw.pixel().0 / 2.0, snapped.z + iw.pixel().1 / 2.0)
            }
        })
        .collect()
}

fn build_variant(
    geom: &PresetGeometry,
    layout: &[(f64, f64)],
    medium: Option<(f64, f64, u64)>,
    seed: u64,
    on_grid: bool,
) -> Result<ExperimentConfig> {
    // First pass places the window; second pass snaps the scene onto it.
    let cfg = parse_preset_config(&config_toml(geom, layout, medium, seed, "out"))?;
    let placed = place_scatterers(&cfg, on_grid);
    parse_preset_config(&config_toml(geom, &placed, medium, seed, "out"))
}

fn write_image_set(dir: &Path, img: &ImageMap, params: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let base = dir.join(img.functional().name());
    write_image_csv(&base.with_extension("csv"), img)?;
    write_image_pgm(&base.with_extension("pgm"), img)?;
    write_image_header(&base.with_extension("txt"), img, params)?;
    let peaks = extract_peaks(img, 0.3, 2)?;
    write_peaks_csv(&dir.join(format!("{}_peaks.csv", img.functional().name())), &peaks)?;
    Ok(())
}

fn response_for(cfg: &ExperimentConfig, seed_offset: u64) -> Result<MultiFreqResponse> {
    let medium = Medium::from_spec(&cfg.medium, cfg.geometry.positions(), &cfg.window, seed_offset)?;
    response_multi(&cfg.scene, &cfg.geometry, &medium, &cfg.frequencies)
}

fn truths(cfg: &ExperimentConfig) -> Vec<Pos> {
    cfg.scene.scatterers().iter().map(|s| s.0).collect()
}

/// Mean distance from each true scatterer to the nearest significant peak.
/// Coarse frequency grids alias in range, so all peaks above threshold
/// compete, not only the strongest few.
fn mean_displacement(img: &ImageMap, truths: &[Pos]) -> Result<f64> {
    let peaks: Vec<Peak> = extract_peaks(img, 0.3, 2)?;
    if peaks.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(truths
        .iter()
        .map(|t| peaks.iter().map(|p| p.position.dist(t)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / truths.len() as f64)
}

pub fn run(preset: &str, full: bool, seed: Option<u64>, out: &Path) -> Result<()> {
    let seed = seed.unwrap_or(7);
    match preset {
        "list" => {
            for (name, about) in CATALOG {
                println!("{name:<16} {about}");
            }
            Ok(())
        }
        "fig_h1" => homogeneous_full_phase(preset, full, seed, out, 1, (600.0, 600.0)),
        "fig_h2" => homogeneous_full_phase(preset, full, seed, out, 16, (580.0, 620.0)),
        "fig_h3" => single_receiver_interf(preset, full, seed, out),
        "fig_resolution" => resolution_doubling(preset, full, seed, out),
        "fig_stability" => random_medium_panel(preset, full, seed, out, 10000.0),
        "fig_error1" => random_medium_panel(preset, full, seed, out, 5000.0),
        "fig_error2" => random_medium_panel(preset, full, seed, out, 10000.0 / 3.0),
        "moments" => super::moments::run(2000, seed, 0.2, &out.join("moments")),
        other => {
            let names: Vec<&str> = CATALOG.iter().map(|(n, _)| *n).collect();
            Err(Error::Validation(format!(
                "unknown preset {other:?}; available: {}",
                names.join(", ")
            )))
        }
    }
}

/// Full-phase imaging panels: Kirchhoff migration plus the two subspace
/// functionals, with scatterers on and off the grid.
fn homogeneous_full_phase(
    preset: &str,
    full: bool,
    seed: u64,
    out: &Path,
    s_full: usize,
    band: (f64, f64),
) -> Result<()> {
    let geom = PresetGeometry::homogeneous(full, s_full, band);
    let layout = spread_layout(geom.range);
    let root = out.join(preset);
    std::fs::create_dir_all(&root)?;
    let mut report = std::io::BufWriter::new(std::fs::File::create(root.join("report.txt"))?);
    writeln!(report, "preset {preset} (full = {full}, seed = {seed})")?;

    for on_grid in [true, false] {
        let variant = if on_grid { "on_grid" } else { "off_grid" };
        let cfg = build_variant(&geom, &layout, None, seed, on_grid)?;
        let dir = root.join(variant);
        let p = response_for(&cfg, 0)?;
        let m_est = cfg.scene.len();
        let params = [("variant", variant.to_string()), ("seed", seed.to_string())];

        let km = image_km(&p, &cfg.geometry, &cfg.window)?;
        write_image_set(&dir, &km, &params)?;
        let sig = signal_image_multifreq(
            &p,
            m_est,
            &cfg.geometry,
            &cfg.window,
            ProjectionPairing::Transpose,
        )?;
        write_image_set(&dir, &sig, &params)?;
        let mus = music_image_multifreq(
            &p,
            m_est,
            &cfg.geometry,
            &cfg.window,
            ProjectionPairing::Transpose,
        )?;
        write_image_set(&dir, &mus, &params)?;

        for img in [&km, &sig, &mus] {
            let disp = mean_displacement(img, &truths(&cfg))?;
            writeln!(report, "{variant} {}: mean peak displacement {disp:.3}", img.functional())?;
        }
    }
    println!("experiment {preset}: wrote {}", root.display());
    Ok(())
}

/// Intensity-only single-receiver imaging. The desk variant runs the whole
/// measurement protocol through the polarization identity; the full-scale
/// variant uses the algebraically identical rank-one data path.
fn single_receiver_interf(preset: &str, full: bool, seed: u64, out: &Path) -> Result<()> {
    let geom = PresetGeometry::homogeneous(full, 16, (580.0, 620.0));
    let layout = spread_layout(geom.range);
    let root = out.join(preset);
    std::fs::create_dir_all(&root)?;
    let mut report = std::io::BufWriter::new(std::fs::File::create(root.join("report.txt"))?);
    writeln!(report, "preset {preset} (full = {full}, seed = {seed})")?;

    for on_grid in [true, false] {
        let variant = if on_grid { "on_grid" } else { "off_grid" };
        let cfg = build_variant(&geom, &layout, None, seed, on_grid)?;
        let dir = root.join(variant);
        let p = response_for(&cfg, 0)?;
        let receiver = cfg.geometry.center_element();
        let g0r = build_model_matrix(&cfg.geometry, &cfg.frequencies, &cfg.window, receiver)?;

        let img = if full {
            image_interf_rank_one(&p.row(receiver), &g0r)?
        } else {
            let oracle = SimulatorOracle::new(&p, receiver)?;
            let rec = recover_mr(
                &oracle,
                cfg.geometry.len(),
                cfg.frequencies.len(),
                PairProtocol::HermitianHalved,
            )?;
            let exact = rank_one_interferometric(&p.row(receiver));
            let scale = exact.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let defect =
                (&rec.matrix - &exact).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
            writeln!(
                report,
                "{variant}: recovered receiver {} from {} intensities, max rel error {defect:.3e}",
                receiver + 1,
                rec.oracle_calls
            )?;
            holoarray::imaging::image_interf(&rec.matrix, &g0r)?
        };
        let params = [
            ("variant", variant.to_string()),
            ("receiver", (receiver + 1).to_string()),
            ("seed", seed.to_string()),
        ];
        write_image_set(&dir, &img, &params)?;
        let disp = mean_displacement(&img, &truths(&cfg))?;
        writeln!(report, "{variant} interf: mean peak displacement {disp:.3}")?;
    }
    println!("experiment {preset}: wrote {}", root.display());
    Ok(())
}

/// Doubling the aperture and the bandwidth halves both widths of the
/// point-spread function.
fn resolution_doubling(preset: &str, full: bool, seed: u64, out: &Path) -> Result<()> {
    let base_geom = PresetGeometry::homogeneous(full, 16, (580.0, 620.0));
    let mut doubled = PresetGeometry::homogeneous(full, 16, (560.0, 640.0));
    doubled.aperture = base_geom.aperture * 2.0;

    let root = out.join(preset);
    std::fs::create_dir_all(&root)?;
    let mut report = std::io::BufWriter::new(std::fs::File::create(root.join("report.txt"))?);
    writeln!(report, "preset {preset} (full = {full}, seed = {seed})")?;

    // A single scatterer keeps the point-spread function clean.
    let layout = [(0.0, base_geom.range)];
    let mut widths = Vec::new();
    for (tag, geom) in [("baseline", &base_geom), ("doubled", &doubled)] {
        let cfg = build_variant(geom, &layout, None, seed, false)?;
        let p = response_for(&cfg, 0)?;
        let receiver = cfg.geometry.center_element();
        let g0r = build_model_matrix(&cfg.geometry, &cfg.frequencies, &cfg.window, receiver)?;
        let img = image_interf_rank_one(&p.row(receiver), &g0r)?;
        write_image_set(&root.join(tag), &img, &[("stage", tag.to_string())])?;
        let peaks = extract_peaks(&img, 0.5, 2)?;
        let m = resolution_metrics(&img, &peaks[0])?;
        writeln!(
            report,
            "{tag}: cross-range fwhm {:.3}, range fwhm {:.3} (clipped = {})",
            m.cross_range_fwhm, m.range_fwhm, m.boundary_clipped
        )?;
        widths.push((m.cross_range_fwhm, m.range_fwhm));
    }
    writeln!(
        report,
        "ratios: cross-range {:.3}, range {:.3} (expected 0.5)",
        widths[1].0 / widths[0].0,
        widths[1].1 / widths[0].1
    )?;
    println!("experiment {preset}: wrote {}", root.display());
    Ok(())
}

/// Random-medium panels over several medium realizations: the subspace
/// functionals and unmasked interferometric images lose the scatterers
/// while the masked functional stays put.
fn random_medium_panel(preset: &str, full: bool, seed: u64, out: &Path, range: f64) -> Result<()> {
    let geom = PresetGeometry::random_medium(full, range);
    let layout = cluster_layout(geom.range);
    let corr_len = 100.0;
    let epsilon = 0.2;
    let x_d = 0.25 * geom.aperture;
    let omega_d = 0.12 * geom.bandwidth_omega();

    let root = out.join(preset);
    std::fs::create_dir_all(&root)?;
    let mut report = std::io::BufWriter::new(std::fs::File::create(root.join("report.txt"))?);
    writeln!(report, "preset {preset} (full = {full}, seed = {seed})")?;
    writeln!(report, "epsilon = {epsilon}, corr_len = {corr_len}, range = {range}")?;
    writeln!(report, "mask: x_d = {x_d}, omega_d = {omega_d}")?;

    let cfg = build_variant(&geom, &layout, Some((epsilon, corr_len, seed)), seed, false)?;
    if let holoarray::scene::MediumSpec::RandomPhase(rm) = &cfg.medium {
        writeln!(report, "sigma = {:.6e} (derived from epsilon)", rm.sigma)?;
    }
    let mask = build_mask(&cfg.geometry, &cfg.frequencies, x_d, omega_d)?;
    let receiver = cfg.geometry.center_element();
    let g0r = build_model_matrix(&cfg.geometry, &cfg.frequencies, &cfg.window, receiver)?;
    let truth = truths(&cfg);
    let m_est = cfg.scene.len();

    let mut disp_interf = Vec::new();
    let mut disp_srint = Vec::new();
    for realization in 0..3u64 {
        let dir = root.join(format!("seed_{realization}"));
        let p = response_for(&cfg, realization)?;
        let params = [
            ("realization", realization.to_string()),
            ("x_d", format!("{x_d}")),
            ("omega_d", format!("{omega_d}")),
        ];

        let interf = image_interf_rank_one(&p.row(receiver), &g0r)?;
        write_image_set(&dir, &interf, &params)?;
        let srint = image_srint_rank_one(&p.row(receiver), &mask, &g0r)?;
        write_image_set(&dir, &srint, &params)?;
        let sig = signal_image_multifreq(
            &p,
            m_est,
            &cfg.geometry,
            &cfg.window,
            ProjectionPairing::Transpose,
        )?;
        write_image_set(&dir, &sig, &params)?;
        let mus = music_image_multifreq(
            &p,
            m_est,
            &cfg.geometry,
            &cfg.window,
            ProjectionPairing::Transpose,
        )?;
        write_image_set(&dir, &mus, &params)?;

        let di = mean_displacement(&interf, &truth)?;
        let ds = mean_displacement(&srint, &truth)?;
        writeln!(
            report,
            "realization {realization}: interf displacement {di:.3}, srint displacement {ds:.3}"
        )?;
        disp_interf.push(di);
        disp_srint.push(ds);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    writeln!(
        report,
        "mean displacement: interf {:.3}, srint {:.3}",
        mean(&disp_interf),
        mean(&disp_srint)
    )?;
    println!("experiment {preset}: wrote {}", root.display());
    Ok(())
}
