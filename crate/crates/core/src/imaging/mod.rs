//! Imaging functionals: Kirchhoff migration of the full response,
//! interferometric migration of single-receiver data (with and without
//! coherence masks), the four-index coherent interferometric sum, and the
//! subspace projections.
//!
//! Every functional migrates with the homogeneous reference medium; the data
//! may come from any medium. Images are real-valued maps over the image
//! window grid: the modulus for Kirchhoff migration, the raw (real) value
//! for the interferometric functionals, and normalized ratios for the
//! subspace methods.

mod metrics;

pub use metrics::{extract_peaks, resolution_metrics, Peak, ResolutionMetrics};

use crate::forward::{MultiFreqResponse, ResponseMatrix};
use crate::medium::green_homogeneous_unchecked;
use crate::scene::{composite0, ArrayGeometry, FrequencyGrid, ImageWindow};
use crate::{CMatrix, CVector, Error, Result, C64};
use rayon::prelude::*;

/// Imaging functional names, as used by file headers and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Km,
    Interf,
    Srint,
    Cint,
    Music,
    Signal,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::Km,
        Functional::Interf,
        Functional::Srint,
        Functional::Cint,
        Functional::Music,
        Functional::Signal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Km => "km",
            Functional::Interf => "interf",
            Functional::Srint => "srint",
            Functional::Cint => "cint",
            Functional::Music => "music",
            Functional::Signal => "signal",
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .iter()
            .find(|f| f.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Functional::ALL.iter().map(|f| f.name()).collect();
                Error::Validation(format!(
                    "unknown functional {s:?}; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

impl std::fmt::Display for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Real-valued image over the window grid, in the grid-point order of
/// [`crate::scene::grid_points`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMap {
    window: ImageWindow,
    functional: Functional,
    values: Vec<f64>,
}

impl ImageMap {
    pub fn new(window: ImageWindow, functional: Functional, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.k() {
            return Err(Error::Dimension(format!(
                "image has {} values, window has {} grid points",
                values.len(),
                window.k()
            )));
        }
        Ok(Self { window, functional, values })
    }

    pub fn window(&self) -> &ImageWindow {
        &self.window
    }

    pub fn functional(&self) -> Functional {
        self.functional
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iz: usize) -> f64 {
        self.values[self.window.index(ix, iz)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0)
    }
}

/// Binary coherence mask over composite index pairs.
///
/// `Z[(i, j)] = 1` iff the source separation is within `x_d` and the
/// frequency separation within `omega_d`. Because the composite index packs
/// sources within frequency blocks, the mask is the Kronecker product of a
/// frequency mask and a spatial mask, and is stored as the two factors.
#[derive(Debug, Clone)]
pub struct Mask {
    n: usize,
    s: usize,
    x_d: f64,
    omega_d: f64,
    space: Vec<bool>,
    freq: Vec<bool>,
    /// Per-source inclusive `lo..=hi` ranges when every row of the spatial
    /// factor is contiguous (true for monotone line arrays).
    space_ranges: Option<Vec<(usize, usize)>>,
    freq_ranges: Vec<(usize, usize)>,
}

/// Builds the coherence mask for the given thresholds.
pub fn build_mask(
    geometry: &ArrayGeometry,
    freqs: &FrequencyGrid,
    x_d: f64,
    omega_d: f64,
) -> Result<Mask> {
    if x_d < 0.0 || omega_d < 0.0 {
        return Err(Error::Validation("mask thresholds must be nonnegative".into()));
    }
    let n = geometry.len();
    let s = freqs.len();
    let mut space = vec![false; n * n];
    for a in 0..n {
        for b in 0..n {
            space[a * n + b] =
                geometry.position(a).dist(&geometry.position(b)) <= x_d + 1e-12 * x_d.max(1.0);
        }
    }
    let mut freq = vec![false; s * s];
    for a in 0..s {
        for b in 0..s {
            freq[a * s + b] = (freqs.omega(a) - freqs.omega(b)).abs()
                <= omega_d + 1e-12 * omega_d.max(1.0);
        }
    }

    let contiguous = |row: &[bool]| -> Option<(usize, usize)> {
        let lo = row.iter().position(|&v| v)?;
        let hi = row.iter().rposition(|&v| v)?;
        row[lo..=hi].iter().all(|&v| v).then_some((lo, hi))
    };
    let space_ranges: Option<Vec<(usize, usize)>> =
        (0..n).map(|a| contiguous(&space[a * n..(a + 1) * n])).collect();
    // Frequencies are strictly increasing, so rows are always contiguous.
    let freq_ranges: Vec<(usize, usize)> = (0..s)
        .map(|a| contiguous(&freq[a * s..(a + 1) * s]).expect("sorted frequencies"))
        .collect();

    Ok(Mask { n, s, x_d, omega_d, space, freq, space_ranges, freq_ranges })
}

impl Mask {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.n * self.s
    }

    pub fn x_d(&self) -> f64 {
        self.x_d
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// Membership for zero-based composite indices.
    #[inline]
    pub fn is_set(&self, i: usize, j: usize) -> bool {
        let (si, li) = crate::scene::split0(i, self.n);
        let (sj, lj) = crate::scene::split0(j, self.n);
        self.space[si * self.n + sj] && self.freq[li * self.s + lj]
    }

    /// Number of ones; the Kronecker structure makes this the product of
    /// the factor counts.
    pub fn count_nonzero(&self) -> usize {
        let ns = self.space.iter().filter(|&&v| v).count();
        let nf = self.freq.iter().filter(|&&v| v).count();
        ns * nf
    }

    /// Dense 0/1 matrix, for export and validation at desk scales.
    pub fn dense(&self) -> nalgebra::DMatrix<u8> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |i, j| u8::from(self.is_set(i, j)))
    }

    /// All nonzero `(i, j)` pairs with `i <= j`.
    pub fn upper_pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut pairs = Vec::with_capacity(self.count_nonzero() / 2 + d);
        for i in 0..d {
            for j in i..d {
                if self.is_set(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }
}

/// Migration model matrix for one receiver: row `k`, composite column
/// `(s, l)` holds `G0(x_r, y_k; omega_l) G0(x_s, y_k; omega_l)`. Always
/// built from the homogeneous reference medium.
#[derive(Debug, Clone)]
pub struct ModelMatrixG0r {
    receiver: usize,
    window: ImageWindow,
    n: usize,
    s: usize,
    entries: CMatrix,
}

/// Builds the receiver-`r` migration matrix over the window grid.
pub fn build_model_matrix(
    geometry: &ArrayGeometry,
    freqs: &FrequencyGrid,
    iw: &ImageWindow,
    receiver: usize,
) -> Result<ModelMatrixG0r> {
    let n = geometry.len();
    let s = freqs.len();
    if receiver >= n {
        return Err(Error::Index(format!("receiver {receiver} not in 0..{n}")));
    }
    let k = iw.k();
    let xr = geometry.position(receiver);
    let rows: Vec<Vec<C64>> = (0..k)
        .into_par_iter()
        .map(|kk| {
            let y = iw.point(kk);
            let mut row = vec![C64::new(0.0, 0.0); n * s];
            for (l, &omega) in freqs.omegas().iter().enumerate() {
                let gr = green_homogeneous_unchecked(xr.dist(&y), omega);
                for (s0, xs) in geometry.positions().iter().enumerate() {
                    row[composite0(s0, l, n)] =
                        gr * green_homogeneous_unchecked(xs.dist(&y), omega);
                }
            }
            row
        })
        .collect();
    let mut entries = CMatrix::zeros(k, n * s);
    for (kk, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            entries[(kk, j)] = *v;
        }
    }
    Ok(ModelMatrixG0r { receiver, window: iw.clone(), n, s, entries })
}

impl ModelMatrixG0r {
    pub fn receiver(&self) -> usize {
        self.receiver
    }

    pub fn window(&self) -> &ImageWindow {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.n * self.s
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

/// Kirchhoff migration of the full multifrequency response: backpropagates
/// every (source, receiver, frequency) datum through the reference medium.
/// The stored image is the modulus of the coherent sum.
pub fn image_km(
    p: &MultiFreqResponse,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
) -> Result<ImageMap> {
    if p.n() != geometry.len() {
        return Err(Error::Dimension(format!(
            "response has {} elements, geometry has {}",
            p.n(),
            geometry.len()
        )));
    }
    let n = p.n();
    let values: Vec<f64> = (0..iw.k())
        .into_par_iter()
        .map(|k| {
            let y = iw.point(k);
            let mut acc = C64::new(0.0, 0.0);
            let mut g = vec![C64::new(0.0, 0.0); n];
            for (l, &omega) in p.omegas().iter().enumerate() {
                for (r, x) in geometry.positions().iter().enumerate() {
                    g[r] = green_homogeneous_unchecked(x.dist(&y), omega);
                }
                let block = p.entries().view((0, l * n), (n, n));
                for s0 in 0..n {
                    let mut col = C64::new(0.0, 0.0);
                    for r in 0..n {
                        col += block[(r, s0)].conj() * g[r];
                    }
                    acc += col * g[s0];
                }
            }
            acc.norm()
        })
        .collect();
    ImageMap::new(iw.clone(), Functional::Km, values)
}

/// Complex single-receiver migration `sum_i conj(row_i) G0r[k, i]`; its
/// squared modulus is the single-receiver interferometric image.
pub fn km_row_field(row: &CVector, g0r: &ModelMatrixG0r) -> Result<CVector> {
    if row.len() != g0r.dim() {
        return Err(Error::Dimension(format!(
            "row has {} entries, model matrix has {} columns",
            row.len(),
            g0r.dim()
        )));
    }
    Ok(&g0r.entries * &row.map(|z| z.conj()))
}

/// Interferometric image `diag(G0r M_r G0r^*)` for a dense single-receiver
/// matrix. Values are real up to roundoff because `M_r` is Hermitian.
pub fn image_interf(mr: &CMatrix, g0r: &ModelMatrixG0r) -> Result<ImageMap> {
    let d = g0r.dim();
    if mr.nrows() != d || mr.ncols() != d {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, model matrix wants {d}x{d}",
            mr.nrows(),
            mr.ncols()
        )));
    }
    // B = M_r G0r^*: one gemm, then per-pixel bilinear contraction.
    let b = mr * g0r.entries.adjoint();
    let values: Vec<f64> = (0..g0r.window.k())
        .into_par_iter()
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                acc += g0r.entries[(k, i)] * b[(i, k)];
            }
            acc.re
        })
        .collect();
    ImageMap::new(g0r.window.clone(), Functional::Interf, values)
}

/// Interferometric image for the rank-one matrix `row^* row` without
/// materializing it: `|G0r conj(row)|^2` per pixel.
pub fn image_interf_rank_one(row: &CVector, g0r: &ModelMatrixG0r) -> Result<ImageMap> {
    let field = km_row_field(row, g0r)?;
    let values: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
    ImageMap::new(g0r.window.clone(), Functional::Interf, values)
}

/// Masked single-receiver interferometric image
/// `diag(G0r (Z o M_r) G0r^*)`: only index pairs the mask admits
/// contribute. Cost is `O(nnz(Z))` per pixel.
pub fn image_srint(mr: &CMatrix, mask: &Mask, g0r: &ModelMatrixG0r) -> Result<ImageMap> {
    let d = g0r.dim();
    if mr.nrows() != d || mr.ncols() != d || mask.dim() != d {
        return Err(Error::Dimension(format!(
            "matrix {}x{} / mask dim {} do not match model matrix dim {d}",
            mr.nrows(),
            mr.ncols(),
            mask.dim()
        )));
    }
    let pairs = mask.upper_pairs();
    let values: Vec<f64> = (0..g0r.window.k())
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0f64;
            for &(i, j) in &pairs {
                let term = g0r.entries[(k, i)] * mr[(i, j)] * g0r.entries[(k, j)].conj();
                // Hermitian pairs contribute twice the real part.
                acc += if i == j { term.re } else { 2.0 * term.re };
            }
            acc
        })
        .collect();
    ImageMap::new(g0r.window.clone(), Functional::Srint, values)
}

/// Masked interferometric image for rank-one data, evaluated with
/// per-frequency-block prefix sums when the spatial mask rows are
/// contiguous; falls back to the generic pair sum otherwise.
pub fn image_srint_rank_one(
    row: &CVector,
    mask: &Mask,
    g0r: &ModelMatrixG0r,
) -> Result<ImageMap> {
    let d = g0r.dim();
    if row.len() != d || mask.dim() != d {
        return Err(Error::Dimension(format!(
            "row len {} / mask dim {} do not match model matrix dim {d}",
            row.len(),
            mask.dim()
        )));
    }
    let Some(space_ranges) = &mask.space_ranges else {
        return image_srint(&crate::recovery::rank_one_interferometric(row), mask, g0r);
    };
    let n = mask.n;
    let s = mask.s;
    let values: Vec<f64> = (0..g0r.window.k())
        .into_par_iter()
        .map(|k| {
            // a_i = G0r[k, i] conj(row_i); the masked quadratic form is
            // sum_i a_i conj(sum_{j allowed} a_j).
            let mut a = vec![C64::new(0.0, 0.0); d];
            for i in 0..d {
                a[i] = g0r.entries[(k, i)] * row[i].conj();
            }
            // Prefix sums per frequency block over the source axis.
            let mut prefix = vec![C64::new(0.0, 0.0); d + s];
            for l in 0..s {
                let base = l * (n + 1);
                for s0 in 0..n {
                    prefix[base + s0 + 1] = prefix[base + s0] + a[composite0(s0, l, n)];
                }
            }
            let mut acc = 0.0f64;
            for l in 0..s {
                let (flo, fhi) = mask.freq_ranges[l];
                for s0 in 0..n {
                    let (slo, shi) = space_ranges[s0];
                    let mut window = C64::new(0.0, 0.0);
                    for lp in flo..=fhi {
                        let base = lp * (n + 1);
                        window += prefix[base + shi + 1] - prefix[base + slo];
                    }
                    acc += (a[composite0(s0, l, n)] * window.conj()).re;
                }
            }
            acc
        })
        .collect();
    ImageMap::new(g0r.window.clone(), Functional::Srint, values)
}

/// Full-array coherent interferometric image: the four-index sum over
/// source, receiver and frequency pairs restricted to
/// `|x_s - x_s'| <= x_d`, `|x_r - x_r'| <= x_d`, `|omega - omega'| <=
/// omega_d`. With maximal thresholds it factorizes into the squared modulus
/// of the Kirchhoff migration image.
pub fn image_cint(
    p: &MultiFreqResponse,
    x_d: f64,
    omega_d: f64,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
) -> Result<ImageMap> {
    if p.n() != geometry.len() {
        return Err(Error::Dimension(format!(
            "response has {} elements, geometry has {}",
            p.n(),
            geometry.len()
        )));
    }
    if x_d < 0.0 || omega_d < 0.0 {
        return Err(Error::Validation("thresholds must be nonnegative".into()));
    }
    let n = p.n();
    let s = p.s();

    // Neighbor index sets along each axis (contiguous for line arrays and
    // sorted frequencies; kept general here).
    let space_allowed: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| {
                    geometry.position(a).dist(&geometry.position(b))
                        <= x_d + 1e-12 * x_d.max(1.0)
                })
                .collect()
        })
        .collect();
    let freq_allowed: Vec<Vec<usize>> = (0..s)
        .map(|a| {
            (0..s)
                .filter(|&b| {
                    (p.omegas()[a] - p.omegas()[b]).abs() <= omega_d + 1e-12 * omega_d.max(1.0)
                })
                .collect()
        })
        .collect();

    let values: Vec<f64> = (0..iw.k())
        .into_par_iter()
        .map(|k| {
            let y = iw.point(k);
            // q[l][r][s] = conj(P_rs(l)) G0(x_r) G0(x_s).
            let mut q = vec![C64::new(0.0, 0.0); s * n * n];
            let mut g = vec![C64::new(0.0, 0.0); n];
            for (l, &omega) in p.omegas().iter().enumerate() {
                for (r, x) in geometry.positions().iter().enumerate() {
                    g[r] = green_homogeneous_unchecked(x.dist(&y), omega);
                }
                let block = p.entries().view((0, l * n), (n, n));
                for r in 0..n {
                    let gr = g[r];
                    for s0 in 0..n {
                        q[(l * n + r) * n + s0] = block[(r, s0)].conj() * gr * g[s0];
                    }
                }
            }
            // Three window-sum passes: over sources, receivers, frequencies.
            let mut w1 = vec![C64::new(0.0, 0.0); s * n * n];
            for l in 0..s {
                for r in 0..n {
                    let base = (l * n + r) * n;
                    for s0 in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for &sp in &space_allowed[s0] {
                            acc += q[base + sp];
                        }
                        w1[base + s0] = acc;
                    }
                }
            }
            let mut w2 = vec![C64::new(0.0, 0.0); s * n * n];
            for l in 0..s {
                for s0 in 0..n {
                    for r in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for &rp in &space_allowed[r] {
                            acc += w1[(l * n + rp) * n + s0];
                        }
                        w2[(l * n + r) * n + s0] = acc;
                    }
                }
            }
            let mut value = 0.0f64;
            for l in 0..s {
                for r in 0..n {
                    for s0 in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for &lp in &freq_allowed[l] {
                            acc += w2[(lp * n + r) * n + s0];
                        }
                        value += (q[(l * n + r) * n + s0] * acc.conj()).re;
                    }
                }
            }
            value
        })
        .collect();
    ImageMap::new(iw.clone(), Functional::Cint, values)
}

/// Input data for the subspace functionals: either a response matrix (its
/// right singular vectors span the signal space) or a single-frequency
/// interferometric matrix (its leading eigenvectors do).
pub enum SubspaceData<'a> {
    Response(&'a ResponseMatrix),
    Interferometric { matrix: &'a CMatrix, omega: f64 },
}

/// Pairing used to expand the beamforming vector over the signal basis.
///
/// `Transpose` pairs bilinearly (`g^t V_j`) and reconstructs against the
/// conjugated basis, which makes the expansion an orthogonal projection onto
/// the span of the conjugated eigenvectors -- the subspace that actually
/// contains the beamforming vectors of a colocated array. `Conjugate` uses
/// the plain Hermitian pairing onto the eigenvector span itself; it is kept
/// for sensitivity comparisons, where it degrades localization because the
/// two spans differ for complex data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionPairing {
    #[default]
    Transpose,
    Conjugate,
}

fn signal_basis(data: &SubspaceData, m_est: usize) -> Result<(CMatrix, f64, usize)> {
    match data {
        SubspaceData::Response(p) => {
            let n = p.n();
            if m_est >= n {
                return Err(Error::Validation(format!(
                    "signal rank {m_est} must be below the array size {n}"
                )));
            }
            let svd = p.entries().clone().svd(false, true);
            let vt = svd.v_t.expect("requested right singular vectors");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let mut basis = CMatrix::zeros(n, m_est);
            for (col, &idx) in order.iter().take(m_est).enumerate() {
                // rows of V^* are conjugated right singular vectors
                for r in 0..n {
                    basis[(r, col)] = vt[(idx, r)].conj();
                }
            }
            Ok((basis, p.omega(), n))
        }
        SubspaceData::Interferometric { matrix, omega } => {
            let n = matrix.nrows();
            if matrix.ncols() != n {
                return Err(Error::Dimension("interferometric matrix must be square".into()));
            }
            if m_est >= n {
                return Err(Error::Validation(format!(
                    "signal rank {m_est} must be below the matrix dimension {n}"
                )));
            }
            let eig = nalgebra::SymmetricEigen::new((*matrix).clone());
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let mut basis = CMatrix::zeros(n, m_est);
            for (col, &idx) in order.iter().take(m_est).enumerate() {
                basis.set_column(col, &eig.eigenvectors.column(idx));
            }
            Ok((basis, *omega, n))
        }
    }
}

/// Per-pixel norms of the noise- and signal-subspace components of the
/// beamforming vector.
fn subspace_norms(
    basis: &CMatrix,
    omega: f64,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
    pairing: ProjectionPairing,
) -> (Vec<f64>, Vec<f64>) {
    let n = geometry.len();
    let m = basis.ncols();
    let norms: Vec<(f64, f64)> = (0..iw.k())
        .into_par_iter()
        .map(|k| {
            let y = iw.point(k);
            let mut g = CVector::zeros(n);
            for (r, x) in geometry.positions().iter().enumerate() {
                g[r] = green_homogeneous_unchecked(x.dist(&y), omega);
            }
            let mut signal = CVector::zeros(n);
            for j in 0..m {
                let col = basis.column(j);
                match pairing {
                    ProjectionPairing::Transpose => {
                        // coefficient g^t V_j against the conjugated basis
                        let mut coeff = C64::new(0.0, 0.0);
                        for r in 0..n {
                            coeff += g[r] * col[r];
                        }
                        for r in 0..n {
                            signal[r] += coeff * col[r].conj();
                        }
                    }
                    ProjectionPairing::Conjugate => {
                        let mut coeff = C64::new(0.0, 0.0);
                        for r in 0..n {
                            coeff += col[r].conj() * g[r];
                        }
                        for r in 0..n {
                            signal[r] += coeff * col[r];
                        }
                    }
                }
            }
            let noise = &g - &signal;
            (noise.norm(), signal.norm())
        })
        .collect();
    norms.into_iter().unzip()
}

/// Subspace localization image: the minimal noise-space residual over the
/// grid divided by the residual at each pixel, so scatterer pixels carry
/// the largest values. `m_est` is the assumed signal rank.
pub fn music_image(
    data: &SubspaceData,
    m_est: usize,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
    pairing: ProjectionPairing,
) -> Result<ImageMap> {
    let (basis, omega, n) = signal_basis(data, m_est)?;
    if n != geometry.len() {
        return Err(Error::Dimension(format!(
            "data dimension {n} does not match array size {}",
            geometry.len()
        )));
    }
    let (noise_norms, _) = subspace_norms(&basis, omega, geometry, iw, pairing);
    let min_norm = noise_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let values = noise_norms
        .iter()
        .map(|&v| if v > 0.0 { min_norm / v } else { 1.0 })
        .collect();
    ImageMap::new(iw.clone(), Functional::Music, values)
}

/// Signal-subspace projection image, normalized by its maximum over the
/// grid; values lie in `[0, 1]`.
pub fn signal_image(
    data: &SubspaceData,
    m_est: usize,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
    pairing: ProjectionPairing,
) -> Result<ImageMap> {
    let (basis, omega, n) = signal_basis(data, m_est)?;
    if n != geometry.len() {
        return Err(Error::Dimension(format!(
            "data dimension {n} does not match array size {}",
            geometry.len()
        )));
    }
    let (_, signal_norms) = subspace_norms(&basis, omega, geometry, iw, pairing);
    let max_norm = signal_norms.iter().cloned().fold(0.0f64, f64::max);
    let values = signal_norms
        .iter()
        .map(|&v| if max_norm > 0.0 { v / max_norm } else { 0.0 })
        .collect();
    ImageMap::new(iw.clone(), Functional::Signal, values)
}

/// Multifrequency subspace image: the single-frequency images averaged
/// incoherently over the blocks of `p`.
pub fn music_image_multifreq(
    p: &MultiFreqResponse,
    m_est: usize,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
    pairing: ProjectionPairing,
) -> Result<ImageMap> {
    let mut acc = vec![0.0f64; iw.k()];
    for l in 0..p.s() {
        let block = p.block(l);
        let img = music_image(&SubspaceData::Response(&block), m_est, geometry, iw, pairing)?;
        for (a, v) in acc.iter_mut().zip(img.values()) {
            *a += v;
        }
    }
    let s = p.s() as f64;
    ImageMap::new(iw.clone(), Functional::Music, acc.into_iter().map(|v| v / s).collect())
}

/// Multifrequency signal-subspace image, averaged like
/// [`music_image_multifreq`].
pub fn signal_image_multifreq(
    p: &MultiFreqResponse,
    m_est: usize,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
    pairing: ProjectionPairing,
) -> Result<ImageMap> {
    let mut acc = vec![0.0f64; iw.k()];
    for l in 0..p.s() {
        let block = p.block(l);
        let img = signal_image(&SubspaceData::Response(&block), m_est, geometry, iw, pairing)?;
        for (a, v) in acc.iter_mut().zip(img.values()) {
            *a += v;
        }
    }
    let s = p.s() as f64;
    ImageMap::new(iw.clone(), Functional::Signal, acc.into_iter().map(|v| v / s).collect())
}

/// Estimates the signal rank as the count of singular values above
/// `rel_threshold` times the largest. Heuristic, off by default: imaging
/// callers pass an explicit rank.
pub fn estimate_signal_rank(p: &ResponseMatrix, rel_threshold: f64) -> usize {
    let sv = p.entries().clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    sv.iter().filter(|&&v| v > rel_threshold * max).count()
}
