//! File formats: flat binary matrices, intensity-record CSV, image CSV/PGM,
//! field dumps and moment reports.
//!
//! Binary payloads are little-endian `f64`, complex entries interleaved as
//! `(re, im)`, matrices row-major. Every format carries a four-byte magic
//! and a version so readers can fail loudly on foreign files.

use crate::forward::MultiFreqResponse;
use crate::imaging::ImageMap;
use crate::medium::{FieldSpec, RandomFieldRealization};
use crate::medium::moments::MomentReport;
use crate::recovery::IlluminationPattern;
use crate::scene::ImageWindow;
use crate::{CMatrix, Error, Result, C64};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const RESPONSE_MAGIC: &[u8; 4] = b"ARSP";
const MATRIX_MAGIC: &[u8; 4] = b"ARIM";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn write_complex_matrix<W: Write>(w: &mut W, m: &CMatrix) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            write_f64(w, m[(r, c)].re)?;
            write_f64(w, m[(r, c)].im)?;
        }
    }
    Ok(())
}

fn read_complex_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(rows, cols);
    for row in 0..rows {
        for col in 0..cols {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            m[(row, col)] = C64::new(re, im);
        }
    }
    Ok(m)
}

/// Writes a multifrequency response: header (magic, version, N, S,
/// frequency list) then the `N x (N S)` payload.
pub fn write_response(path: &Path, p: &MultiFreqResponse) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(RESPONSE_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, p.n() as u32)?;
    write_u32(&mut w, p.s() as u32)?;
    for &omega in p.omegas() {
        write_f64(&mut w, omega)?;
    }
    write_complex_matrix(&mut w, p.entries())?;
    w.flush()?;
    Ok(())
}

pub fn read_response(path: &Path) -> Result<MultiFreqResponse> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RESPONSE_MAGIC {
        return Err(Error::Format(format!("{} is not a response file", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported response version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let s = read_u32(&mut r)? as usize;
    let mut omegas = Vec::with_capacity(s);
    for _ in 0..s {
        omegas.push(read_f64(&mut r)?);
    }
    let entries = read_complex_matrix(&mut r, n, n * s)?;
    MultiFreqResponse::from_raw(omegas, entries)
}

/// Writes a recovered interferometric matrix. `receiver` is the zero-based
/// receiver for a single-receiver matrix, or `None` for the full matrix.
pub fn write_matrix(path: &Path, m: &CMatrix, receiver: Option<usize>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("interferometric matrices are square".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, match receiver {
        Some(r) => r as u32,
        None => u32::MAX,
    })?;
    write_u32(&mut w, m.nrows() as u32)?;
    write_complex_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(CMatrix, Option<usize>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format(format!("{} is not a matrix file", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    let receiver = read_u32(&mut r)?;
    let dim = read_u32(&mut r)? as usize;
    let m = read_complex_matrix(&mut r, dim, dim)?;
    Ok((m, (receiver != u32::MAX).then_some(receiver as usize)))
}

/// CSV export of a complex matrix for small cases: one row per matrix row,
/// entries as `re+imi` pairs in `re;im` cells.
pub fn write_matrix_csv(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in 0..m.nrows() {
        let row: Vec<String> =
            (0..m.ncols()).map(|c| format!("{:.17e};{:.17e}", m[(r, c)].re, m[(r, c)].im)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One intensity measurement: illumination descriptor, receiver, value.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRecord {
    pub pattern: IlluminationPattern,
    pub receiver: usize,
    pub intensity: f64,
}

/// Writes intensity records as CSV with 1-based descriptor indices:
/// `type,i,j,receiver,intensity`.
pub fn write_intensity_records(path: &Path, records: &[IntensityRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "type,i,j,receiver,intensity")?;
    for rec in records {
        let (i, j) = rec.pattern.indices();
        writeln!(
            w,
            "{},{},{},{},{:.17e}",
            rec.pattern.kind(),
            i + 1,
            j + 1,
            rec.receiver + 1,
            rec.intensity
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads intensity records grouped by zero-based receiver.
pub fn read_intensity_records(
    path: &Path,
) -> Result<HashMap<usize, HashMap<IlluminationPattern, f64>>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut grouped: HashMap<usize, HashMap<IlluminationPattern, f64>> = HashMap::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("type,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!(
                "{}:{}: expected 5 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse_idx = |s: &str, what: &str| -> Result<usize> {
            let v: usize = s.trim().parse().map_err(|_| {
                Error::Format(format!("{}:{}: bad {what} {s:?}", path.display(), lineno + 1))
            })?;
            if v == 0 {
                return Err(Error::Format(format!(
                    "{}:{}: {what} indices are 1-based",
                    path.display(),
                    lineno + 1
                )));
            }
            Ok(v - 1)
        };
        let i = parse_idx(fields[1], "index i")?;
        let j = parse_idx(fields[2], "index j")?;
        let receiver = parse_idx(fields[3], "receiver")?;
        let intensity: f64 = fields[4].trim().parse().map_err(|_| {
            Error::Format(format!("{}:{}: bad intensity", path.display(), lineno + 1))
        })?;
        let pattern = match fields[0].trim() {
            "single" => IlluminationPattern::Single(i),
            "sum" => IlluminationPattern::Sum(i, j),
            "mix" => IlluminationPattern::Mix(i, j),
            other => {
                return Err(Error::Format(format!(
                    "{}:{}: unknown illumination type {other:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        grouped.entry(receiver).or_default().insert(pattern, intensity);
    }
    Ok(grouped)
}

/// Image CSV: one row per range index `iz`, columns in cross-range order.
pub fn write_image_csv(path: &Path, img: &ImageMap) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let iw = img.window();
    for iz in 0..iw.nz() {
        let row: Vec<String> =
            (0..iw.nx()).map(|ix| format!("{:.17e}", img.value(ix, iz))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit binary PGM of the image, min-max normalized. Row order: range
/// index `iz` ascending top to bottom, cross-range left to right.
pub fn write_image_pgm(path: &Path, img: &ImageMap) -> Result<()> {
    let iw = img.window();
    let (nx, nz) = (iw.nx(), iw.nz());
    let min = img.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{nx} {nz}\n255\n")?;
    let mut bytes = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            let v = (img.value(ix, iz) - min) / span;
            bytes.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Sidecar text header describing an image file: window metadata, the
/// functional, and caller-supplied parameter pairs.
pub fn write_image_header(
    path: &Path,
    img: &ImageMap,
    params: &[(&str, String)],
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let iw = img.window();
    writeln!(w, "functional = {}", img.functional())?;
    writeln!(w, "origin = {:?} {:?}", iw.origin().x, iw.origin().z)?;
    writeln!(w, "extent = {:?} {:?}", iw.extent().0, iw.extent().1)?;
    writeln!(w, "pixel = {:?} {:?}", iw.pixel().0, iw.pixel().1)?;
    writeln!(w, "grid = {} {}", iw.nx(), iw.nz())?;
    for (k, v) in params {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Field dump: text header, blank line, then row-major `f64` samples.
pub fn write_field(path: &Path, field: &RandomFieldRealization) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let s = field.spec();
    writeln!(w, "x0 = {:?}", s.x0)?;
    writeln!(w, "z0 = {:?}", s.z0)?;
    writeln!(w, "nx = {}", s.nx)?;
    writeln!(w, "nz = {}", s.nz)?;
    writeln!(w, "spacing = {:?}", s.spacing)?;
    writeln!(w, "corr_len = {:?}", s.corr_len)?;
    writeln!(w, "padding = {:?}", s.padding)?;
    writeln!(w, "seed = {}", field.seed())?;
    writeln!(w)?;
    for &v in field.samples() {
        write_f64(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<RandomFieldRealization> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header = HashMap::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("field dump ended inside the header".into()));
        }
        let line = line.trim();
        if line.is_empty() {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad field header line {line:?}")))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<&String> {
        header.get(k).ok_or_else(|| Error::Format(format!("field header missing {k}")))
    };
    let fget = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| Error::Format(format!("bad field header value for {k}")))
    };
    let uget = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::Format(format!("bad field header value for {k}")))
    };
    let spec = FieldSpec {
        x0: fget("x0")?,
        z0: fget("z0")?,
        nx: uget("nx")?,
        nz: uget("nz")?,
        spacing: fget("spacing")?,
        corr_len: fget("corr_len")?,
        padding: fget("padding")?,
    };
    let seed: u64 =
        get("seed")?.parse().map_err(|_| Error::Format("bad field header seed".into()))?;
    let mut samples = Vec::with_capacity(spec.nx * spec.nz);
    for _ in 0..spec.nx * spec.nz {
        samples.push(read_f64(&mut r)?);
    }
    RandomFieldRealization::from_samples(spec, seed, samples)
}

/// Moment report CSV: `quantity,theory,estimate,stderr,n,z` plus comment
/// lines with the derived dimensionless parameters and regime warnings.
pub fn write_moment_report(path: &Path, report: &MomentReport) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# epsilon = {:.6}", report.epsilon)?;
    writeln!(w, "# tau_c = {:.6}", report.tau_c)?;
    writeln!(w, "# omega_d = {:.6}", report.omega_d)?;
    writeln!(w, "# x_d = {:.6}", report.x_d)?;
    for warning in &report.warnings {
        writeln!(w, "# warning: {warning}")?;
    }
    writeln!(w, "quantity,theory,estimate,stderr,n,z")?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{},{:.4}",
            row.quantity, row.theory, row.estimate, row.stderr, row.n, row.z
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Peak table CSV: `index,x,z,value`.
pub fn write_peaks_csv(path: &Path, peaks: &[crate::imaging::Peak]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "index,x,z,value")?;
    for (k, p) in peaks.iter().enumerate() {
        writeln!(w, "{},{:.12e},{:.12e},{:.12e}", k, p.position.x, p.position.z, p.value)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an image CSV written by [`write_image_csv`] back into an
/// [`ImageMap`]; the window metadata must be supplied by the caller.
pub fn read_image_csv(
    path: &Path,
    window: &ImageWindow,
    functional: crate::imaging::Functional,
) -> Result<ImageMap> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut values = vec![0.0; window.k()];
    let mut rows = 0usize;
    for (iz, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if iz >= window.nz() || cells.len() != window.nx() {
            return Err(Error::Format(format!(
                "{}: row {iz} does not match a {}x{} grid",
                path.display(),
                window.nx(),
                window.nz()
            )));
        }
        for (ix, cell) in cells.iter().enumerate() {
            values[window.index(ix, iz)] = cell.trim().parse().map_err(|_| {
                Error::Format(format!("{}: bad value at row {iz}", path.display()))
            })?;
        }
        rows += 1;
    }
    if rows != window.nz() {
        return Err(Error::Format(format!(
            "{}: {rows} rows, window wants {}",
            path.display(),
            window.nz()
        )));
    }
    ImageMap::new(window.clone(), functional, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{response_multi, MultiFreqResponse};
    use crate::imaging::Functional;
    use crate::medium::{sample_mu_field, Medium};
    use crate::scene::{ArrayGeometry, FrequencyGrid, Pos, Scene};

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("holoarray-io-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn sample_response() -> MultiFreqResponse {
        let geometry = ArrayGeometry::linear(4, 12.0, Pos::new(0.0, 0.0), true).unwrap();
        let scene = Scene::new(vec![(Pos::new(1.0, 50.0), C64::new(1.0, -0.5))]).unwrap();
        let freqs = FrequencyGrid::equispaced(0.9, 1.1, 3, 600.0, 3e8).unwrap();
        response_multi(&scene, &geometry, &Medium::Homogeneous, &freqs).unwrap()
    }

    #[test]
    fn response_round_trip() {
        let dir = tmpdir("resp");
        let p = sample_response();
        let path = dir.join("p.bin");
        write_response(&path, &p).unwrap();
        let q = read_response(&path).unwrap();
        assert_eq!(p.omegas(), q.omegas());
        assert_eq!(p.entries(), q.entries());
        // Wrong magic is rejected.
        std::fs::write(dir.join("junk.bin"), b"JUNKxxxx").unwrap();
        assert!(read_response(&dir.join("junk.bin")).is_err());
    }

    #[test]
    fn matrix_round_trip_with_receiver_tag() {
        let dir = tmpdir("mat");
        let m = CMatrix::from_fn(3, 3, |r, c| C64::new(r as f64, c as f64));
        let path = dir.join("m.bin");
        write_matrix(&path, &m, Some(7)).unwrap();
        let (m2, receiver) = read_matrix(&path).unwrap();
        assert_eq!(m, m2);
        assert_eq!(receiver, Some(7));
        write_matrix(&path, &m, None).unwrap();
        assert_eq!(read_matrix(&path).unwrap().1, None);
    }

    #[test]
    fn intensity_records_round_trip() {
        let dir = tmpdir("rec");
        let records = vec![
            IntensityRecord {
                pattern: IlluminationPattern::Single(0),
                receiver: 2,
                intensity: 1.5,
            },
            IntensityRecord {
                pattern: IlluminationPattern::Sum(0, 3),
                receiver: 2,
                intensity: 2.25,
            },
            IntensityRecord {
                pattern: IlluminationPattern::Mix(0, 3),
                receiver: 2,
                intensity: 0.75,
            },
        ];
        let path = dir.join("records.csv");
        write_intensity_records(&path, &records).unwrap();
        let grouped = read_intensity_records(&path).unwrap();
        let map = &grouped[&2];
        assert_eq!(map.len(), 3);
        assert_eq!(map[&IlluminationPattern::Sum(0, 3)], 2.25);
    }

    #[test]
    fn image_csv_and_pgm() {
        let dir = tmpdir("img");
        let iw = ImageWindow::new(Pos::new(0.0, 0.0), (4.0, 2.0), (1.0, 1.0)).unwrap();
        let values: Vec<f64> = (0..iw.k()).map(|k| k as f64).collect();
        let img = ImageMap::new(iw.clone(), Functional::Km, values).unwrap();
        let csv = dir.join("img.csv");
        write_image_csv(&csv, &img).unwrap();
        let back = read_image_csv(&csv, &iw, Functional::Km).unwrap();
        assert_eq!(back.values(), img.values());

        let pgm = dir.join("img.pgm");
        write_image_pgm(&pgm, &img).unwrap();
        let bytes = std::fs::read(&pgm).unwrap();
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), "P5\n4 2\n255\n".len() + 8);

        write_image_header(&dir.join("img.txt"), &img, &[("seed", "7".into())]).unwrap();
        let header = std::fs::read_to_string(dir.join("img.txt")).unwrap();
        assert!(header.contains("functional = km"));
        assert!(header.contains("seed = 7"));
    }

    #[test]
    fn field_dump_round_trip() {
        let dir = tmpdir("field");
        let spec = FieldSpec {
            x0: -1.0,
            z0: 2.0,
            nx: 16,
            nz: 24,
            spacing: 0.5,
            corr_len: 2.0,
            padding: 12.0,
        };
        let field = sample_mu_field(&spec, 99).unwrap();
        let path = dir.join("mu.field");
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.spec(), field.spec());
        assert_eq!(back.seed(), 99);
        assert_eq!(back.samples(), field.samples());
    }
}
