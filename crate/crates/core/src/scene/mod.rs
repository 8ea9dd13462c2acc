//! Experiment geometry: transducer array, frequency grid, image window and
//! scatterer scene, plus the composite source/frequency index convention.
//!
//! All lengths are in units of the central wavelength; angular frequencies
//! are in units of the central angular frequency. The composite index packs a
//! (source, frequency) pair as `i = s + (l - 1) * N` with 1-based `s` and
//! `l`, which is the column convention of every multifrequency matrix in the
//! crate.

mod config;

pub use config::{
    parse_experiment_config, serialize_experiment_config, ExperimentConfig, MediumSpec, Quantity,
    RandomMediumSpec, RunSpec,
};

use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// A 2D point: `x` is cross-range (parallel to the array), `z` is range
/// (depth away from the array). Units: central wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pos {
    pub x: f64,
    pub z: f64,
}

impl Pos {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dist(&self, other: &Pos) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }
}

/// Active array of transducers. Positions are pairwise distinct; when
/// `colocated` is set the same elements both emit and record.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Pos>,
    colocated: bool,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<Pos>, colocated: bool) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Validation("array needs at least one element".into()));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in positions.iter().skip(i + 1) {
                if a.dist(b) == 0.0 {
                    return Err(Error::Validation(format!(
                        "array positions must be pairwise distinct (duplicate at x={}, z={})",
                        a.x, a.z
                    )));
                }
            }
        }
        let geometry = Self { positions, colocated };
        if geometry.len() >= 2 && geometry.aperture() <= 0.0 {
            return Err(Error::Validation(
                "array needs a positive cross-range aperture for two or more elements".into(),
            ));
        }
        Ok(geometry)
    }

    /// Equispaced linear array of `n` elements spanning aperture `a`,
    /// centered at `center` and aligned with the cross-range axis.
    pub fn linear(n: usize, aperture: f64, center: Pos, colocated: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("array needs at least one element".into()));
        }
        if n > 1 && aperture <= 0.0 {
            return Err(Error::Validation("aperture must be positive for n > 1".into()));
        }
        let positions = (0..n)
            .map(|k| {
                let t = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
                Pos::new(center.x - aperture / 2.0 + t * aperture, center.z)
            })
            .collect();
        Self::new(positions, colocated)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Pos] {
        &self.positions
    }

    pub fn position(&self, r: usize) -> Pos {
        self.positions[r]
    }

    pub fn colocated(&self) -> bool {
        self.colocated
    }

    /// Aperture: the maximum pairwise extent along the cross-range axis.
    pub fn aperture(&self) -> f64 {
        let min = self.positions.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max = self.positions.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        max - min
    }

    /// Index of the element closest to the array centroid.
    pub fn center_element(&self) -> usize {
        let cx = self.positions.iter().map(|p| p.x).sum::<f64>() / self.len() as f64;
        let cz = self.positions.iter().map(|p| p.z).sum::<f64>() / self.len() as f64;
        let c = Pos::new(cx, cz);
        (0..self.len())
            .min_by(|&a, &b| {
                self.positions[a]
                    .dist(&c)
                    .total_cmp(&self.positions[b].dist(&c))
            })
            .unwrap()
    }
}

/// Strictly increasing grid of angular frequencies, in units of the central
/// angular frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    /// Central frequency in THz, kept for unit conversion at the I/O boundary.
    pub f0_thz: f64,
    /// Wave speed in m/s, kept for unit conversion at the I/O boundary.
    pub c0_mps: f64,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>, f0_thz: f64, c0_mps: f64) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Validation("frequency grid needs at least one entry".into()));
        }
        if omegas.iter().any(|&w| w <= 0.0) {
            return Err(Error::Validation("frequencies must be positive".into()));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("frequencies must be strictly increasing".into()));
        }
        if f0_thz <= 0.0 || c0_mps <= 0.0 {
            return Err(Error::Validation("f0 and c0 must be positive".into()));
        }
        Ok(Self { omegas, f0_thz, c0_mps })
    }

    /// `count` frequencies equally spaced over `[lo, hi]` (inclusive), given
    /// in units of the central frequency.
    pub fn equispaced(lo: f64, hi: f64, count: usize, f0_thz: f64, c0_mps: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Validation("frequency grid needs at least one entry".into()));
        }
        let omegas = if count == 1 {
            vec![(lo + hi) / 2.0]
        } else {
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect()
        };
        Self::new(omegas, f0_thz, c0_mps)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn omega(&self, l: usize) -> f64 {
        self.omegas[l]
    }

    /// Bandwidth: `max - min`, in units of the central angular frequency.
    pub fn bandwidth(&self) -> f64 {
        self.omegas[self.omegas.len() - 1] - self.omegas[0]
    }

    /// Central wavelength in nanometers implied by `(f0_thz, c0_mps)`.
    pub fn lambda0_nm(&self) -> f64 {
        self.c0_mps / (self.f0_thz * 1e12) * 1e9
    }
}

/// Uniform rectangular pixel grid over the image window.
///
/// The grid holds `K = nx * nz` cell centers enumerated row-major with the
/// range axis fastest: point `k` has `ix = k / nz`, `iz = k % nz` and sits at
/// `origin + ((ix + 1/2) px, (iz + 1/2) pz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageWindow {
    origin: Pos,
    extent: (f64, f64),
    pixel: (f64, f64),
    nx: usize,
    nz: usize,
}

impl ImageWindow {
    pub fn new(origin: Pos, extent: (f64, f64), pixel: (f64, f64)) -> Result<Self> {
        if pixel.0 <= 0.0 || pixel.1 <= 0.0 {
            return Err(Error::Validation("pixel pitches must be positive".into()));
        }
        if extent.0 <= 0.0 || extent.1 <= 0.0 {
            return Err(Error::Validation("window extent must be positive".into()));
        }
        let nx = Self::axis_count(extent.0, pixel.0, "cross-range")?;
        let nz = Self::axis_count(extent.1, pixel.1, "range")?;
        Ok(Self { origin, extent, pixel, nx, nz })
    }

    fn axis_count(extent: f64, pitch: f64, axis: &str) -> Result<usize> {
        let n = (extent / pitch).round();
        if n < 1.0 || ((n * pitch - extent) / extent).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "{axis} extent {extent} is not an integer multiple of pitch {pitch}"
            )));
        }
        Ok(n as usize)
    }

    pub fn origin(&self) -> Pos {
        self.origin
    }

    pub fn extent(&self) -> (f64, f64) {
        self.extent
    }

    pub fn pixel(&self) -> (f64, f64) {
        self.pixel
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// Total number of grid points.
    pub fn k(&self) -> usize {
        self.nx * self.nz
    }

    pub fn center(&self) -> Pos {
        Pos::new(self.origin.x + self.extent.0 / 2.0, self.origin.z + self.extent.1 / 2.0)
    }

    /// Cell center of grid point `k`.
    pub fn point(&self, k: usize) -> Pos {
        let (ix, iz) = (k / self.nz, k % self.nz);
        Pos::new(
            self.origin.x + (ix as f64 + 0.5) * self.pixel.0,
            self.origin.z + (iz as f64 + 0.5) * self.pixel.1,
        )
    }

    /// Flat index of the cell `(ix, iz)`.
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        ix * self.nz + iz
    }

    /// Flat index of the grid point nearest to `p`.
    pub fn nearest_index(&self, p: &Pos) -> usize {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let ix = clamp((p.x - self.origin.x) / self.pixel.0, self.nx);
        let iz = clamp((p.z - self.origin.z) / self.pixel.1, self.nz);
        self.index(ix, iz)
    }
}

/// Ordered cell centers of the window grid. Length is always `iw.k()` and
/// every point lies inside the window's closed bounding box.
pub fn grid_points(iw: &ImageWindow) -> Vec<Pos> {
    (0..iw.k()).map(|k| iw.point(k)).collect()
}

/// Point scatterers with complex reflectivities. Positions do not need to
/// coincide with image-window grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scatterers: Vec<(Pos, C64)>,
}

impl Scene {
    pub fn new(scatterers: Vec<(Pos, C64)>) -> Result<Self> {
        if scatterers.is_empty() {
            return Err(Error::Validation("scene needs at least one scatterer".into()));
        }
        if scatterers.iter().any(|(_, a)| a.norm() == 0.0) {
            return Err(Error::Validation("reflectivities must be nonzero".into()));
        }
        Ok(Self { scatterers })
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn scatterers(&self) -> &[(Pos, C64)] {
        &self.scatterers
    }

    /// Scene with every scatterer displaced by `(dx, dz)`.
    pub fn displaced(&self, dx: f64, dz: f64) -> Scene {
        Scene {
            scatterers: self
                .scatterers
                .iter()
                .map(|(p, a)| (Pos::new(p.x + dx, p.z + dz), *a))
                .collect(),
        }
    }
}

/// Composite index of source `s` and frequency `l`, both 1-based:
/// `i = s + (l - 1) * n`. Bijective onto `1..=n*s_count` with [`split_index`]
/// as its inverse.
pub fn linear_index(s: usize, l: usize, n: usize, s_count: usize) -> Result<usize> {
    if s < 1 || s > n {
        return Err(Error::Index(format!("source index {s} not in 1..={n}")));
    }
    if l < 1 || l > s_count {
        return Err(Error::Index(format!("frequency index {l} not in 1..={s_count}")));
    }
    Ok(s + (l - 1) * n)
}

/// Inverse of [`linear_index`]: recovers `(s, l)` from a 1-based composite
/// index.
pub fn split_index(i: usize, n: usize, s_count: usize) -> Result<(usize, usize)> {
    if i < 1 || i > n * s_count {
        return Err(Error::Index(format!("composite index {i} not in 1..={}", n * s_count)));
    }
    let s = (i - 1) % n + 1;
    let l = (i - 1) / n + 1;
    Ok((s, l))
}

/// Zero-based composite index used for matrix storage; equals
/// `linear_index(s0 + 1, l0 + 1, n, _) - 1`.
#[inline]
pub fn composite0(s0: usize, l0: usize, n: usize) -> usize {
    s0 + l0 * n
}

/// Zero-based inverse of [`composite0`].
#[inline]
pub fn split0(i0: usize, n: usize) -> (usize, usize) {
    (i0 % n, i0 / n)
}
