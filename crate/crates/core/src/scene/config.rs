//! Experiment configuration document.
//!
//! The format is a TOML key/value tree with sections `[array]`,
//! `[frequencies]`, `[window]`, `[scene]`, `[medium]` and `[run]`. Numeric
//! inputs carry an explicit unit tag, e.g. `"500 lambda0"`, `"250 um"`,
//! `"600 THz"`. Lengths are converted to central wavelengths and frequencies
//! to units of the central frequency at parse time; nothing downstream sees
//! physical units.

use super::{ArrayGeometry, FrequencyGrid, ImageWindow, Pos, Scene};
use crate::{Error, Result, C64};
use serde::Deserialize;

const DEFAULT_C0_MPS: f64 = 299_792_458.0;

/// A tagged physical quantity, e.g. `"500 lambda0"` or `"600 THz"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let (value, unit) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(u), None) => (v, u),
            _ => {
                return Err(Error::Config(format!(
                    "{path}: expected \"<number> <unit>\", got {text:?}"
                )))
            }
        };
        let value: f64 = value.parse().map_err(|_| {
            Error::Config(format!("{path}: {value:?} is not a number"))
        })?;
        Ok(Self { value, unit: unit.to_string() })
    }

    /// Length in central wavelengths; `lambda0_nm` converts metric units.
    pub fn as_length(&self, lambda0_nm: f64, path: &str) -> Result<f64> {
        let nm = match self.unit.as_str() {
            "lambda0" => return Ok(self.value),
            "nm" => self.value,
            "um" => self.value * 1e3,
            "mm" => self.value * 1e6,
            "m" => self.value * 1e9,
            other => {
                return Err(Error::Config(format!(
                    "{path}: unknown length unit {other:?} (expected lambda0, nm, um, mm or m)"
                )))
            }
        };
        Ok(nm / lambda0_nm)
    }

    /// Frequency in THz; `f0_thz` anchors the dimensionless `omega0` unit.
    pub fn as_thz(&self, f0_thz: f64, path: &str) -> Result<f64> {
        Ok(match self.unit.as_str() {
            "THz" => self.value,
            "GHz" => self.value * 1e-3,
            "PHz" => self.value * 1e3,
            "Hz" => self.value * 1e-12,
            "omega0" => self.value * f0_thz,
            other => {
                return Err(Error::Config(format!(
                    "{path}: unknown frequency unit {other:?} \
                     (expected THz, GHz, PHz, Hz or omega0)"
                )))
            }
        })
    }

    /// Frequency in units of the central frequency.
    pub fn as_omega(&self, f0_thz: f64, path: &str) -> Result<f64> {
        if self.unit == "omega0" {
            return Ok(self.value);
        }
        Ok(self.as_thz(f0_thz, path)? / f0_thz)
    }
}

fn length(text: &str, lambda0_nm: f64, path: &str) -> Result<f64> {
    Quantity::parse(text, path)?.as_length(lambda0_nm, path)
}

fn point(pair: &[String], lambda0_nm: f64, path: &str) -> Result<Pos> {
    if pair.len() != 2 {
        return Err(Error::Config(format!("{path}: expected [x, z]")));
    }
    Ok(Pos::new(
        length(&pair[0], lambda0_nm, &format!("{path}[0]"))?,
        length(&pair[1], lambda0_nm, &format!("{path}[1]"))?,
    ))
}

/// Propagation medium requested by the configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum MediumSpec {
    Homogeneous,
    RandomPhase(RandomMediumSpec),
}

/// Parameters of the random-phase medium. `sigma` is the resolved fluctuation
/// strength; when the document gives `epsilon` instead, sigma is derived via
/// the characteristic strength `sigma0 = 1 / sqrt(l * L)` with `L` the
/// distance from the array centroid to the window center.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMediumSpec {
    pub sigma: f64,
    /// Correlation length, in central wavelengths.
    pub corr_len: f64,
    pub seed: u64,
    /// Field sample spacing; defaults to `corr_len / 4`.
    pub grid_spacing: f64,
    /// Margin around the hull of array-to-window segments; defaults to
    /// `3 * corr_len`.
    pub margin: f64,
    /// Periodic padding used by the spectral synthesizer; defaults to
    /// `6 * corr_len`.
    pub padding: f64,
}

impl RandomMediumSpec {
    /// Fluctuation strength in units of `sigma0 = 1 / sqrt(l * L)`.
    pub fn epsilon(&self, propagation_distance: f64) -> f64 {
        self.sigma * (self.corr_len * propagation_distance).sqrt()
    }
}

/// Run-level knobs: deterministic seed, worker count, output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub seed: u64,
    /// 0 means "use all available cores".
    pub jobs: usize,
    pub out: String,
    pub preset: Option<String>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { seed: 0, jobs: 0, out: "out".into(), preset: None }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: ArrayGeometry,
    pub frequencies: FrequencyGrid,
    pub window: ImageWindow,
    pub scene: Scene,
    pub medium: MediumSpec,
    pub run: RunSpec,
}

impl ExperimentConfig {
    /// Distance from the array centroid to the window center.
    pub fn propagation_distance(&self) -> f64 {
        let n = self.geometry.len() as f64;
        let cx = self.geometry.positions().iter().map(|p| p.x).sum::<f64>() / n;
        let cz = self.geometry.positions().iter().map(|p| p.z).sum::<f64>() / n;
        Pos::new(cx, cz).dist(&self.window.center())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    array: RawArray,
    frequencies: RawFrequencies,
    window: RawWindow,
    scene: RawScene,
    #[serde(default)]
    medium: Option<RawMedium>,
    #[serde(default)]
    run: Option<RawRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    n: Option<usize>,
    aperture: Option<String>,
    center: Option<Vec<String>>,
    positions: Option<Vec<Vec<String>>>,
    #[serde(default = "default_true")]
    colocated: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrequencies {
    f0: String,
    c0_mps: Option<f64>,
    band: Option<Vec<String>>,
    count: Option<usize>,
    list: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    origin: Option<Vec<String>>,
    center: Option<Vec<String>>,
    extent: Vec<String>,
    pixel: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    scatterers: Vec<RawScatterer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScatterer {
    position: Vec<String>,
    reflectivity: toml::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    kind: String,
    sigma: Option<f64>,
    epsilon: Option<f64>,
    corr_len: Option<String>,
    seed: Option<u64>,
    grid_spacing: Option<String>,
    margin: Option<String>,
    padding: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<String>,
    preset: Option<String>,
}

fn reflectivity(value: &toml::Value, path: &str) -> Result<C64> {
    match value {
        toml::Value::Float(re) => Ok(C64::new(*re, 0.0)),
        toml::Value::Integer(re) => Ok(C64::new(*re as f64, 0.0)),
        toml::Value::Array(parts) if parts.len() == 2 => {
            let get = |v: &toml::Value, which: &str| -> Result<f64> {
                v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).ok_or_else(|| {
                    Error::Config(format!("{path}.{which}: expected a number"))
                })
            };
            Ok(C64::new(get(&parts[0], "re")?, get(&parts[1], "im")?))
        }
        _ => Err(Error::Config(format!(
            "{path}: expected a number or [re, im] pair"
        ))),
    }
}

/// Parses and validates an experiment configuration document.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::Config(e.message().to_string()))?;

    // Frequencies come first: the central wavelength anchors all lengths.
    let f0_q = Quantity::parse(&raw.frequencies.f0, "frequencies.f0")?;
    if f0_q.unit == "omega0" {
        return Err(Error::Config("frequencies.f0: must be in physical units".into()));
    }
    let f0_thz = f0_q.as_thz(1.0, "frequencies.f0")?;
    if f0_thz <= 0.0 {
        return Err(Error::Config("frequencies.f0: must be positive".into()));
    }
    let c0_mps = raw.frequencies.c0_mps.unwrap_or(DEFAULT_C0_MPS);
    let lambda0_nm = c0_mps / (f0_thz * 1e12) * 1e9;

    let frequencies = match (&raw.frequencies.list, &raw.frequencies.band, raw.frequencies.count) {
        (Some(list), None, None) => {
            let mut omegas = Vec::with_capacity(list.len());
            for (k, f) in list.iter().enumerate() {
                let path = format!("frequencies.list[{k}]");
                omegas.push(Quantity::parse(f, &path)?.as_omega(f0_thz, &path)?);
            }
            FrequencyGrid::new(omegas, f0_thz, c0_mps)?
        }
        (None, Some(band), Some(count)) => {
            if band.len() != 2 {
                return Err(Error::Config("frequencies.band: expected [lo, hi]".into()));
            }
            let lo =
                Quantity::parse(&band[0], "frequencies.band[0]")?.as_omega(f0_thz, "frequencies.band[0]")?;
            let hi =
                Quantity::parse(&band[1], "frequencies.band[1]")?.as_omega(f0_thz, "frequencies.band[1]")?;
            if hi < lo {
                return Err(Error::Config("frequencies.band: hi must be >= lo".into()));
            }
            FrequencyGrid::equispaced(lo, hi, count, f0_thz, c0_mps)?
        }
        _ => {
            return Err(Error::Config(
                "frequencies: give either `list`, or `band` together with `count`".into(),
            ))
        }
    };

    let geometry = match (&raw.array.positions, raw.array.n, &raw.array.aperture) {
        (Some(positions), None, None) => {
            let mut pts = Vec::with_capacity(positions.len());
            for (k, p) in positions.iter().enumerate() {
                pts.push(point(p, lambda0_nm, &format!("array.positions[{k}]"))?);
            }
            ArrayGeometry::new(pts, raw.array.colocated)?
        }
        (None, Some(n), Some(aperture)) => {
            let a = length(aperture, lambda0_nm, "array.aperture")?;
            let center = match &raw.array.center {
                Some(c) => point(c, lambda0_nm, "array.center")?,
                None => Pos::new(0.0, 0.0),
            };
            ArrayGeometry::linear(n, a, center, raw.array.colocated)?
        }
        _ => {
            return Err(Error::Config(
                "array: give either `positions`, or `n` together with `aperture`".into(),
            ))
        }
    };

    let extent = (
        length(&raw.window.extent[0], lambda0_nm, "window.extent[0]")?,
        length(&raw.window.extent[1], lambda0_nm, "window.extent[1]")?,
    );
    let pixel = (
        length(&raw.window.pixel[0], lambda0_nm, "window.pixel[0]")?,
        length(&raw.window.pixel[1], lambda0_nm, "window.pixel[1]")?,
    );
    let origin = match (&raw.window.origin, &raw.window.center) {
        (Some(o), None) => point(o, lambda0_nm, "window.origin")?,
        (None, Some(c)) => {
            let c = point(c, lambda0_nm, "window.center")?;
            Pos::new(c.x - extent.0 / 2.0, c.z - extent.1 / 2.0)
        }
        _ => {
            return Err(Error::Config(
                "window: give exactly one of `origin` or `center`".into(),
            ))
        }
    };
    let window = ImageWindow::new(origin, extent, pixel)?;

    if raw.scene.scatterers.is_empty() {
        return Err(Error::Validation("scene.scatterers: at least one scatterer required".into()));
    }
    let mut scatterers = Vec::with_capacity(raw.scene.scatterers.len());
    for (k, s) in raw.scene.scatterers.iter().enumerate() {
        let path = format!("scene.scatterers[{k}]");
        scatterers.push((
            point(&s.position, lambda0_nm, &format!("{path}.position"))?,
            reflectivity(&s.reflectivity, &format!("{path}.reflectivity"))?,
        ));
    }
    let scene = Scene::new(scatterers)?;

    let run = match &raw.run {
        Some(r) => RunSpec {
            seed: r.seed.unwrap_or(0),
            jobs: r.jobs.unwrap_or(0),
            out: r.out.clone().unwrap_or_else(|| "out".into()),
            preset: r.preset.clone(),
        },
        None => RunSpec::default(),
    };

    let medium = match &raw.medium {
        None => MediumSpec::Homogeneous,
        Some(m) => match m.kind.as_str() {
            "homogeneous" => MediumSpec::Homogeneous,
            "random-phase" => {
                let corr_len = match &m.corr_len {
                    Some(cl) => length(cl, lambda0_nm, "medium.corr_len")?,
                    None => return Err(Error::Config("medium.corr_len: required for random-phase".into())),
                };
                if corr_len <= 0.0 {
                    return Err(Error::Config("medium.corr_len: must be positive".into()));
                }
                // A provisional config gives the propagation distance used to
                // resolve epsilon into sigma.
                let n = geometry.len() as f64;
                let cx = geometry.positions().iter().map(|p| p.x).sum::<f64>() / n;
                let cz = geometry.positions().iter().map(|p| p.z).sum::<f64>() / n;
                let center = window.center();
                let l_prop = Pos::new(cx, cz).dist(&center);
                let sigma = match (m.sigma, m.epsilon) {
                    (Some(s), None) => s,
                    (None, Some(eps)) => eps / (corr_len * l_prop).sqrt(),
                    _ => {
                        return Err(Error::Config(
                            "medium: give exactly one of `sigma` or `epsilon`".into(),
                        ))
                    }
                };
                if sigma <= 0.0 {
                    return Err(Error::Config("medium.sigma: must be positive".into()));
                }
                let opt_len = |v: &Option<String>, path: &str, default: f64| -> Result<f64> {
                    match v {
                        Some(q) => length(q, lambda0_nm, path),
                        None => Ok(default),
                    }
                };
                let spec = RandomMediumSpec {
                    sigma,
                    corr_len,
                    seed: m.seed.unwrap_or(run.seed),
                    grid_spacing: opt_len(&m.grid_spacing, "medium.grid_spacing", corr_len / 4.0)?,
                    margin: opt_len(&m.margin, "medium.margin", 3.0 * corr_len)?,
                    padding: opt_len(&m.padding, "medium.padding", 6.0 * corr_len)?,
                };
                if spec.grid_spacing > corr_len / 4.0 {
                    return Err(Error::Config(format!(
                        "medium.grid_spacing: {} exceeds corr_len/4 = {}",
                        spec.grid_spacing,
                        corr_len / 4.0
                    )));
                }
                if spec.margin < 3.0 * corr_len {
                    return Err(Error::Config(format!(
                        "medium.margin: {} is below 3 corr_len = {}; the field must cover \
                         every propagation segment with slack",
                        spec.margin,
                        3.0 * corr_len
                    )));
                }
                MediumSpec::RandomPhase(spec)
            }
            other => {
                return Err(Error::Config(format!(
                    "medium.kind: unknown kind {other:?} (expected \"homogeneous\" or \"random-phase\")"
                )))
            }
        },
    };

    Ok(ExperimentConfig { geometry, frequencies, window, scene, medium, run })
}

/// Serializes a configuration back to its normalized document form: lengths
/// in `lambda0`, frequencies in `THz`, arrays as explicit position lists.
/// Parsing the output reproduces the input configuration exactly.
pub fn serialize_experiment_config(cfg: &ExperimentConfig) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let q = |v: f64| format!("\"{v:?} lambda0\"");

    writeln!(out, "[array]").unwrap();
    write!(out, "positions = [").unwrap();
    for (k, p) in cfg.geometry.positions().iter().enumerate() {
        if k > 0 {
            write!(out, ", ").unwrap();
        }
        write!(out, "[{}, {}]", q(p.x), q(p.z)).unwrap();
    }
    writeln!(out, "]").unwrap();
    writeln!(out, "colocated = {}", cfg.geometry.colocated()).unwrap();

    writeln!(out, "\n[frequencies]").unwrap();
    writeln!(out, "f0 = \"{:?} THz\"", cfg.frequencies.f0_thz).unwrap();
    writeln!(out, "c0_mps = {:?}", cfg.frequencies.c0_mps).unwrap();
    write!(out, "list = [").unwrap();
    for (k, w) in cfg.frequencies.omegas().iter().enumerate() {
        if k > 0 {
            write!(out, ", ").unwrap();
        }
        write!(out, "\"{w:?} omega0\"").unwrap();
    }
    writeln!(out, "]").unwrap();

    let iw = &cfg.window;
    writeln!(out, "\n[window]").unwrap();
    writeln!(out, "origin = [{}, {}]", q(iw.origin().x), q(iw.origin().z)).unwrap();
    writeln!(out, "extent = [{}, {}]", q(iw.extent().0), q(iw.extent().1)).unwrap();
    writeln!(out, "pixel = [{}, {}]", q(iw.pixel().0), q(iw.pixel().1)).unwrap();

    for (p, a) in cfg.scene.scatterers() {
        writeln!(out, "\n[[scene.scatterers]]").unwrap();
        writeln!(out, "position = [{}, {}]", q(p.x), q(p.z)).unwrap();
        writeln!(out, "reflectivity = [{:?}, {:?}]", a.re, a.im).unwrap();
    }

    writeln!(out, "\n[medium]").unwrap();
    match &cfg.medium {
        MediumSpec::Homogeneous => writeln!(out, "kind = \"homogeneous\"").unwrap(),
        MediumSpec::RandomPhase(m) => {
            writeln!(out, "kind = \"random-phase\"").unwrap();
            writeln!(out, "sigma = {:?}", m.sigma).unwrap();
            writeln!(out, "corr_len = {}", q(m.corr_len)).unwrap();
            writeln!(out, "seed = {}", m.seed).unwrap();
            writeln!(out, "grid_spacing = {}", q(m.grid_spacing)).unwrap();
            writeln!(out, "margin = {}", q(m.margin)).unwrap();
            writeln!(out, "padding = {}", q(m.padding)).unwrap();
        }
    }

    writeln!(out, "\n[run]").unwrap();
    writeln!(out, "seed = {}", cfg.run.seed).unwrap();
    writeln!(out, "jobs = {}", cfg.run.jobs).unwrap();
    writeln!(out, "out = {:?}", cfg.run.out).unwrap();
    if let Some(p) = &cfg.run.preset {
        writeln!(out, "preset = {p:?}").unwrap();
    }
    out
}
