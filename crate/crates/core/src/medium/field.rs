//! Stationary Gaussian random field synthesis on a regular 2D grid.
//!
//! The field has zero mean, unit variance and Gaussian autocorrelation
//! `R(d) = exp(-d^2 / (2 l^2))` with correlation length `l`. Samples are
//! drawn spectrally: white noise is shaped by the square root of the Gaussian
//! power spectrum on a periodic grid padded well beyond the requested domain,
//! so wraparound correlations are below `exp(-18)` for the default padding of
//! six correlation lengths.

use crate::scene::Pos;
use crate::{Error, Result, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Grid layout for a field realization: `nx` by `nz` samples starting at
/// `(x0, z0)` with isotropic spacing `spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub x0: f64,
    pub z0: f64,
    pub nx: usize,
    pub nz: usize,
    pub spacing: f64,
    pub corr_len: f64,
    /// Extra periodic extent (per axis) used only inside the synthesizer.
    pub padding: f64,
}

impl FieldSpec {
    /// Smallest grid that covers the convex hull of all segments from
    /// `endpoints_a` to `endpoints_b` with `margin` on every side.
    pub fn covering(
        endpoints_a: &[Pos],
        endpoints_b: &[Pos],
        corr_len: f64,
        spacing: f64,
        margin: f64,
        padding: f64,
    ) -> Result<Self> {
        if endpoints_a.is_empty() || endpoints_b.is_empty() {
            return Err(Error::Validation("field domain needs endpoints on both sides".into()));
        }
        let all = endpoints_a.iter().chain(endpoints_b.iter());
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut zmin = f64::INFINITY;
        let mut zmax = f64::NEG_INFINITY;
        for p in all {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            zmin = zmin.min(p.z);
            zmax = zmax.max(p.z);
        }
        let x0 = xmin - margin;
        let z0 = zmin - margin;
        let nx = ((xmax + margin - x0) / spacing).ceil() as usize + 2;
        let nz = ((zmax + margin - z0) / spacing).ceil() as usize + 2;
        Ok(Self { x0, z0, nx, nz, spacing, corr_len, padding })
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nz < 2 {
            return Err(Error::Validation("field grid needs at least 2 samples per axis".into()));
        }
        if self.spacing <= 0.0 || self.corr_len <= 0.0 {
            return Err(Error::Validation("field spacing and corr_len must be positive".into()));
        }
        if self.spacing > self.corr_len / 4.0 {
            return Err(Error::Validation(format!(
                "field grid too coarse: spacing {} exceeds corr_len/4 = {}",
                self.spacing,
                self.corr_len / 4.0
            )));
        }
        Ok(())
    }
}

/// One realization of the stationary Gaussian field, sampled on the grid of
/// its [`FieldSpec`]. Values between samples come from bilinear
/// interpolation. Deterministic in `(spec, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFieldRealization {
    spec: FieldSpec,
    seed: u64,
    /// Row-major, x-major: `samples[ix * nz + iz]`.
    samples: Vec<f64>,
}

/// Draws one field realization from the spectral sampler.
pub fn sample_mu_field(spec: &FieldSpec, seed: u64) -> Result<RandomFieldRealization> {
    spec.validate()?;
    let pad_cells = (spec.padding / spec.spacing).ceil() as usize;
    let px = spec.nx + pad_cells;
    let pz = spec.nz + pad_cells;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    // White noise shaped by sqrt of the spectral density
    // S(k) = 2 pi l^2 exp(-|k|^2 l^2 / 2).
    let h = spec.spacing;
    let l = spec.corr_len;
    let mut data = vec![C64::new(0.0, 0.0); px * pz];
    for jx in 0..px {
        let fx = if jx <= px / 2 { jx as f64 } else { jx as f64 - px as f64 };
        let kx = 2.0 * PI * fx / (px as f64 * h);
        for jz in 0..pz {
            let fz = if jz <= pz / 2 { jz as f64 } else { jz as f64 - pz as f64 };
            let kz = 2.0 * PI * fz / (pz as f64 * h);
            let s = 2.0 * PI * l * l * (-(kx * kx + kz * kz) * l * l / 2.0).exp();
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            data[jx * pz + jz] = C64::new(re * inv_sqrt2, im * inv_sqrt2) * s.sqrt();
        }
    }

    ifft2(&mut data, px, pz);

    // Scale so Re(u) has the target covariance; see module docs.
    let scale = (2.0 * (px * pz) as f64).sqrt() / h;
    let mut samples = Vec::with_capacity(spec.nx * spec.nz);
    for ix in 0..spec.nx {
        for iz in 0..spec.nz {
            samples.push(data[ix * pz + iz].re * scale);
        }
    }
    Ok(RandomFieldRealization { spec: spec.clone(), seed, samples })
}

/// Unnormalized 2D inverse FFT with 1/N scaling, in place on row-major data.
fn ifft2(data: &mut [C64], nx: usize, nz: usize) {
    let mut planner = FftPlanner::new();
    let fft_z = planner.plan_fft_inverse(nz);
    let fft_x = planner.plan_fft_inverse(nx);

    for row in data.chunks_exact_mut(nz) {
        fft_z.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); nx];
    for iz in 0..nz {
        for ix in 0..nx {
            col[ix] = data[ix * nz + iz];
        }
        fft_x.process(&mut col);
        for ix in 0..nx {
            data[ix * nz + iz] = col[ix];
        }
    }
    let norm = 1.0 / (nx * nz) as f64;
    for v in data.iter_mut() {
        *v *= norm;
    }
}

impl RandomFieldRealization {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn corr_len(&self) -> f64 {
        self.spec.corr_len
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Builds a realization directly from samples; used by tests and by the
    /// binary field-dump reader.
    pub fn from_samples(spec: FieldSpec, seed: u64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != spec.nx * spec.nz {
            return Err(Error::Dimension(format!(
                "field payload has {} samples, grid wants {}",
                samples.len(),
                spec.nx * spec.nz
            )));
        }
        Ok(Self { spec, seed, samples })
    }

    pub fn contains(&self, p: &Pos) -> bool {
        let s = &self.spec;
        let xmax = s.x0 + (s.nx - 1) as f64 * s.spacing;
        let zmax = s.z0 + (s.nz - 1) as f64 * s.spacing;
        p.x >= s.x0 && p.x <= xmax && p.z >= s.z0 && p.z <= zmax
    }

    /// Bilinear interpolation of the field at `p`.
    pub fn at(&self, p: &Pos) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::Domain(format!(
                "point (x={}, z={}) outside the field domain",
                p.x, p.z
            )));
        }
        let s = &self.spec;
        let fx = (p.x - s.x0) / s.spacing;
        let fz = (p.z - s.z0) / s.spacing;
        let ix = (fx.floor() as usize).min(s.nx - 2);
        let iz = (fz.floor() as usize).min(s.nz - 2);
        let tx = fx - ix as f64;
        let tz = fz - iz as f64;
        let at = |ix: usize, iz: usize| self.samples[ix * s.nz + iz];
        Ok(at(ix, iz) * (1.0 - tx) * (1.0 - tz)
            + at(ix + 1, iz) * tx * (1.0 - tz)
            + at(ix, iz + 1) * (1.0 - tx) * tz
            + at(ix + 1, iz + 1) * tx * tz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_512() -> FieldSpec {
        FieldSpec {
            x0: 0.0,
            z0: 0.0,
            nx: 512,
            nz: 512,
            spacing: 1.0,
            corr_len: 4.0,
            padding: 24.0,
        }
    }

    #[test]
    fn sample_mean_is_near_zero() {
        let field = sample_mu_field(&spec_512(), 11).unwrap();
        let n = field.samples().len() as f64;
        let mean = field.samples().iter().sum::<f64>() / n;
        // Correlated samples: the effective sample count is n / (2 pi l^2)
        // cells, but the 5/sqrt(cells) bound on independent cells is what we
        // check against the count of correlation cells.
        let cells = n / (2.0 * PI * 16.0);
        assert!(mean.abs() < 5.0 / cells.sqrt(), "mean = {mean}");
    }

    #[test]
    fn autocorrelation_at_one_corr_len() {
        // Estimate E[mu(x) mu(x + l)] over 100 realizations.
        let spec = FieldSpec { nx: 128, nz: 128, ..spec_512() };
        let lag = spec.corr_len as usize; // spacing 1.0
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for r in 0..100u64 {
            let field = sample_mu_field(&spec, 1000 ^ r).unwrap();
            let mut acc = 0.0;
            let mut m = 0usize;
            for ix in 0..spec.nx {
                for iz in 0..spec.nz - lag {
                    acc += field.samples()[ix * spec.nz + iz]
                        * field.samples()[ix * spec.nz + iz + lag];
                    m += 1;
                }
            }
            let per = acc / m as f64;
            sum += per;
            sumsq += per * per;
            count += 1;
        }
        let est = sum / count as f64;
        let var = (sumsq / count as f64 - est * est).max(0.0);
        let se = (var / count as f64).sqrt();
        let theory = (-0.5f64).exp();
        assert!(
            (est - theory).abs() < 4.0 * se.max(1e-3),
            "autocorr at lag l: est {est}, theory {theory}, se {se}"
        );
    }

    #[test]
    fn unit_variance() {
        let field = sample_mu_field(&spec_512(), 5).unwrap();
        let n = field.samples().len() as f64;
        let var = field.samples().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.1, "variance = {var}");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = FieldSpec { nx: 64, nz: 96, ..spec_512() };
        let a = sample_mu_field(&spec, 42).unwrap();
        let b = sample_mu_field(&spec, 42).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = sample_mu_field(&spec, 43).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn rejects_coarse_grid() {
        let spec = FieldSpec { spacing: 1.1, ..spec_512() };
        assert!(sample_mu_field(&spec, 1).is_err());
    }

    #[test]
    fn bilinear_interpolation_matches_nodes() {
        let spec = FieldSpec { nx: 32, nz: 32, ..spec_512() };
        let field = sample_mu_field(&spec, 9).unwrap();
        let p = Pos::new(3.0, 7.0);
        assert!((field.at(&p).unwrap() - field.samples()[3 * 32 + 7]).abs() < 1e-12);
        assert!(field.at(&Pos::new(-1.0, 0.0)).is_err());
    }
}
