use holoarray::imaging::{
    build_mask, build_model_matrix, extract_peaks, image_cint, image_interf,
    image_interf_rank_one, image_km, image_srint, image_srint_rank_one, music_image_multifreq,
    resolution_metrics, signal_image_multifreq, Functional, ImageMap, ProjectionPairing,
};
use holoarray::io::{
    read_matrix, read_response, write_image_csv, write_image_header, write_image_pgm,
    write_peaks_csv,
};
use holoarray::scene::Quantity;
use holoarray::{Error, Result};
use std::io::Write;
use std::path::PathBuf;

pub struct Args {
    pub config: PathBuf,
    pub functional: String,
    pub response: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub xd: Option<String>,
    pub omegad: Option<String>,
    pub receiver: Option<usize>,
    pub m_est: Option<usize>,
    pub pairing: String,
    pub out: Option<PathBuf>,
}

fn parse_length(q: &str, cfg: &holoarray::scene::ExperimentConfig, path: &str) -> Result<f64> {
    Quantity::parse(q, path)?.as_length(cfg.frequencies.lambda0_nm(), path)
}

fn parse_omega(q: &str, cfg: &holoarray::scene::ExperimentConfig, path: &str) -> Result<f64> {
    Quantity::parse(q, path)?.as_omega(cfg.frequencies.f0_thz, path)
}

fn thresholds(
    args: &Args,
    cfg: &holoarray::scene::ExperimentConfig,
    functional: Functional,
) -> Result<(f64, f64)> {
    match (&args.xd, &args.omegad) {
        (Some(x), Some(o)) => {
            Ok((parse_length(x, cfg, "--xd")?, parse_omega(o, cfg, "--omegad")?))
        }
        _ => Err(Error::Validation(format!(
            "functional {functional} needs both --xd and --omegad thresholds"
        ))),
    }
}

pub fn run(args: Args) -> Result<()> {
    let cfg = super::load_config(&args.config)?;
    let dir = super::resolve_out(args.out.as_deref(), &cfg)?;
    let functional: Functional = args.functional.parse()?;
    let pairing = match args.pairing.as_str() {
        "transpose" => ProjectionPairing::Transpose,
        "conjugate" => ProjectionPairing::Conjugate,
        other => {
            return Err(Error::Validation(format!(
                "unknown pairing {other:?} (expected transpose or conjugate)"
            )))
        }
    };

    let response = args.response.as_deref().map(read_response).transpose()?;
    let need_response = |what: &str| -> Result<&holoarray::forward::MultiFreqResponse> {
        response
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("functional {what} needs --response")))
    };

    let mut params: Vec<(&str, String)> = vec![("seed", cfg.run.seed.to_string())];
    let img: ImageMap = match functional {
        Functional::Km => image_km(need_response("km")?, &cfg.geometry, &cfg.window)?,
        Functional::Cint => {
            let (x_d, omega_d) = thresholds(&args, &cfg, functional)?;
            params.push(("x_d", format!("{x_d:?}")));
            params.push(("omega_d", format!("{omega_d:?}")));
            image_cint(need_response("cint")?, x_d, omega_d, &cfg.geometry, &cfg.window)?
        }
        Functional::Interf | Functional::Srint => {
            let mask = if functional == Functional::Srint {
                let (x_d, omega_d) = thresholds(&args, &cfg, functional)?;
                params.push(("x_d", format!("{x_d:?}")));
                params.push(("omega_d", format!("{omega_d:?}")));
                Some(build_mask(&cfg.geometry, &cfg.frequencies, x_d, omega_d)?)
            } else {
                None
            };
            match (&args.matrix, &response) {
                (Some(mpath), _) => {
                    let (mr, receiver) = read_matrix(mpath)?;
                    let receiver = receiver.ok_or_else(|| {
                        Error::Validation(
                            "interferometric imaging needs a single-receiver matrix; \
                             this file holds a full matrix"
                                .into(),
                        )
                    })?;
                    params.push(("receiver", (receiver + 1).to_string()));
                    let g0r =
                        build_model_matrix(&cfg.geometry, &cfg.frequencies, &cfg.window, receiver)?;
                    match &mask {
                        Some(mask) => image_srint(&mr, mask, &g0r)?,
                        None => image_interf(&mr, &g0r)?,
                    }
                }
                (None, Some(p)) => {
                    let receiver = super::resolve_receiver(args.receiver, &cfg.geometry)?;
                    params.push(("receiver", (receiver + 1).to_string()));
                    let g0r =
                        build_model_matrix(&cfg.geometry, &cfg.frequencies, &cfg.window, receiver)?;
                    let row = p.row(receiver);
                    match &mask {
                        Some(mask) => image_srint_rank_one(&row, mask, &g0r)?,
                        None => image_interf_rank_one(&row, &g0r)?,
                    }
                }
                (None, None) => {
                    return Err(Error::Validation(format!(
                        "functional {functional} needs --matrix or --response"
                    )))
                }
            }
        }
        Functional::Music | Functional::Signal => {
            let p = need_response(functional.name())?;
            let m_est = args.m_est.ok_or_else(|| {
                Error::Validation(format!("functional {functional} needs --m-est"))
            })?;
            params.push(("m_est", m_est.to_string()));
            if functional == Functional::Music {
                music_image_multifreq(p, m_est, &cfg.geometry, &cfg.window, pairing)?
            } else {
                signal_image_multifreq(p, m_est, &cfg.geometry, &cfg.window, pairing)?
            }
        }
    };

    let base = dir.join(functional.name());
    write_image_csv(&base.with_extension("csv"), &img)?;
    write_image_pgm(&base.with_extension("pgm"), &img)?;
    write_image_header(&base.with_extension("txt"), &img, &params)?;

    let peaks = extract_peaks(&img, 0.5, 2)?;
    write_peaks_csv(&dir.join(format!("{}_peaks.csv", functional.name())), &peaks)?;
    let mut metrics_file = std::io::BufWriter::new(std::fs::File::create(
        dir.join(format!("{}_metrics.csv", functional.name())),
    )?);
    writeln!(metrics_file, "peak,x,z,value,cross_range_fwhm,range_fwhm,clipped")?;
    for (k, peak) in peaks.iter().enumerate() {
        let m = resolution_metrics(&img, peak)?;
        writeln!(
            metrics_file,
            "{},{:.6},{:.6},{:.6e},{:.6},{:.6},{}",
            k,
            peak.position.x,
            peak.position.z,
            peak.value,
            m.cross_range_fwhm,
            m.range_fwhm,
            m.boundary_clipped
        )?;
    }
    println!(
        "image: {} over {}x{} grid, {} peak(s), written to {}",
        functional,
        img.window().nx(),
        img.window().nz(),
        peaks.len(),
        dir.display()
    );
    Ok(())
}
