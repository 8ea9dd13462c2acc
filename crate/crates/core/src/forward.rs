//! Born-approximation forward model: array response matrices, illumination
//! data, intensity measurements, and the linearized homogeneous model
//! operator used for migration.

use crate::medium::{green_homogeneous, Medium};
use crate::scene::{composite0, ArrayGeometry, FrequencyGrid, ImageWindow, Pos, Scene};
use crate::{CMatrix, CVector, Error, Result, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Full array response at one frequency: entry `(r, s)` is the signal
/// received at element `r` per unit emission from element `s`. Built as the
/// Born sum of rank-one terms, so it is symmetric whenever sources and
/// receivers are colocated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    omega: f64,
    entries: CMatrix,
}

impl ResponseMatrix {
    pub fn new(omega: f64, entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension(format!(
                "response matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { omega, entries })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Largest symmetry defect `max |P - P^t|`, zero for colocated arrays.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n() {
            for s in r + 1..self.n() {
                worst = worst.max((self.entries[(r, s)] - self.entries[(s, r)]).norm());
            }
        }
        worst
    }
}

/// Block row `[P(omega_1) ... P(omega_S)]` of per-frequency responses,
/// `N x (N * S)` with the composite column convention of
/// [`crate::scene::linear_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFreqResponse {
    omegas: Vec<f64>,
    entries: CMatrix,
}

impl MultiFreqResponse {
    /// Concatenates per-frequency blocks; all must share one array size.
    pub fn from_blocks(blocks: Vec<ResponseMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dimension("need at least one frequency block".into()));
        }
        let n = blocks[0].n();
        if blocks.iter().any(|b| b.n() != n) {
            return Err(Error::Dimension("frequency blocks disagree on array size".into()));
        }
        let s = blocks.len();
        let mut entries = CMatrix::zeros(n, n * s);
        for (l, b) in blocks.iter().enumerate() {
            entries.view_mut((0, l * n), (n, n)).copy_from(b.entries());
        }
        Ok(Self { omegas: blocks.iter().map(|b| b.omega()).collect(), entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn s(&self) -> usize {
        self.omegas.len()
    }

    /// Composite dimension `N * S`.
    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Per-frequency block `P(omega_l)`, `l` zero-based.
    pub fn block(&self, l: usize) -> ResponseMatrix {
        let n = self.n();
        ResponseMatrix {
            omega: self.omegas[l],
            entries: self.entries.view((0, l * n), (n, n)).into_owned(),
        }
    }

    /// Row `r` as a composite vector of length `N * S`.
    pub fn row(&self, r: usize) -> CVector {
        self.entries.row(r).transpose()
    }

    pub fn from_raw(omegas: Vec<f64>, entries: CMatrix) -> Result<Self> {
        if entries.ncols() != entries.nrows() * omegas.len() {
            return Err(Error::Dimension(format!(
                "multifrequency response wants {} columns, got {}",
                entries.nrows() * omegas.len(),
                entries.ncols()
            )));
        }
        Ok(Self { omegas, entries })
    }
}

/// Array Green's function vector at `y`: component `r` is the Green's
/// function from element `r` to `y` in the given medium.
pub fn green_vector(
    y: &Pos,
    omega: f64,
    medium: &Medium,
    geometry: &ArrayGeometry,
) -> Result<CVector> {
    let mut g = CVector::zeros(geometry.len());
    for (r, x) in geometry.positions().iter().enumerate() {
        g[r] = medium.green(x, y, omega)?;
    }
    Ok(g)
}

fn check_scene_clear_of_array(scene: &Scene, geometry: &ArrayGeometry) -> Result<()> {
    for (p, _) in scene.scatterers() {
        for x in geometry.positions() {
            if p.dist(x) == 0.0 {
                return Err(Error::Domain(format!(
                    "scatterer at (x={}, z={}) coincides with an array element",
                    p.x, p.z
                )));
            }
        }
    }
    Ok(())
}

/// Single-frequency Born response `P = sum_j alpha_j g(y_j) g(y_j)^t`.
pub fn response_single(
    scene: &Scene,
    geometry: &ArrayGeometry,
    medium: &Medium,
    omega: f64,
) -> Result<ResponseMatrix> {
    check_scene_clear_of_array(scene, geometry)?;
    let n = geometry.len();
    let mut entries = CMatrix::zeros(n, n);
    for (y, alpha) in scene.scatterers() {
        let g = green_vector(y, omega, medium, geometry)?;
        // rank-one update alpha * g g^t
        for s in 0..n {
            let col = *alpha * g[s];
            for r in 0..n {
                entries[(r, s)] += g[r] * col;
            }
        }
    }
    ResponseMatrix::new(omega, entries)
}

/// Multifrequency response with blocks at every grid frequency.
///
/// Travel-time perturbations are frequency independent, so they are computed
/// once per (element, scatterer) path and reused across the band; every
/// frequency block therefore sees the same medium realization.
pub fn response_multi(
    scene: &Scene,
    geometry: &ArrayGeometry,
    medium: &Medium,
    freqs: &FrequencyGrid,
) -> Result<MultiFreqResponse> {
    check_scene_clear_of_array(scene, geometry)?;
    let n = geometry.len();
    let m = scene.len();

    // nu[(r, j)] and distances for every element-scatterer path.
    let mut nu = vec![0.0f64; n * m];
    let mut dist = vec![0.0f64; n * m];
    for (j, (y, _)) in scene.scatterers().iter().enumerate() {
        for (r, x) in geometry.positions().iter().enumerate() {
            nu[r * m + j] = medium.nu(x, y)?;
            dist[r * m + j] = x.dist(y);
        }
    }

    let blocks: Vec<ResponseMatrix> = freqs
        .omegas()
        .par_iter()
        .map(|&omega| {
            let mut entries = CMatrix::zeros(n, n);
            let mut g = CVector::zeros(n);
            for (j, (_, alpha)) in scene.scatterers().iter().enumerate() {
                for r in 0..n {
                    let d = dist[r * m + j];
                    g[r] = C64::from_polar(
                        1.0 / (4.0 * std::f64::consts::PI * d),
                        2.0 * std::f64::consts::PI * omega * d + omega * nu[r * m + j],
                    );
                }
                for s in 0..n {
                    let col = *alpha * g[s];
                    for r in 0..n {
                        entries[(r, s)] += g[r] * col;
                    }
                }
            }
            ResponseMatrix::new(omega, entries)
        })
        .collect::<Result<_>>()?;
    MultiFreqResponse::from_blocks(blocks)
}

/// Received field `b = P f` for a composite illumination vector.
pub fn apply_illumination(p: &MultiFreqResponse, f: &CVector) -> Result<CVector> {
    if f.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "illumination has {} entries, response wants {}",
            f.len(),
            p.dim()
        )));
    }
    Ok(p.entries() * f)
}

/// Composite basis illumination: unit emission from source `s0` at frequency
/// `l0` (both zero-based).
pub fn basis_illumination(s0: usize, l0: usize, n: usize, s_count: usize) -> CVector {
    let mut f = CVector::zeros(n * s_count);
    f[composite0(s0, l0, n)] = C64::new(1.0, 0.0);
    f
}

/// Recorded powers `|b_i|^2` per receiver.
pub fn intensities(b: &CVector) -> Vec<f64> {
    b.iter().map(|z| z.norm_sqr()).collect()
}

/// Adds circular complex Gaussian noise at the given signal-to-noise ratio
/// (in dB, measured against the mean per-entry power of `b`). Measurement
/// noise enters the fields, not the recorded intensities.
pub fn add_noise<R: Rng>(b: &CVector, snr_db: f64, rng: &mut R) -> CVector {
    if b.is_empty() {
        return b.clone();
    }
    let p_signal = b.iter().map(|z| z.norm_sqr()).sum::<f64>() / b.len() as f64;
    let p_noise = p_signal / 10f64.powf(snr_db / 10.0);
    let sd = (p_noise / 2.0).sqrt();
    let normal = StandardNormal;
    b.map(|z| {
        let re: f64 = normal.sample(rng);
        let im: f64 = normal.sample(rng);
        z + C64::new(re * sd, im * sd)
    })
}

/// Homogeneous model operator for one single-frequency illumination `f`:
/// entry `(r, k)` is `G0(x_r, y_k) sum_s G0(y_k, x_s) f_s`, mapping grid
/// reflectivities to array data.
pub fn model_operator_a0(
    f: &CVector,
    omega: f64,
    geometry: &ArrayGeometry,
    iw: &ImageWindow,
) -> Result<CMatrix> {
    let n = geometry.len();
    if f.len() != n {
        return Err(Error::Dimension(format!(
            "single-frequency illumination has {} entries, array has {n}",
            f.len()
        )));
    }
    let cols: Vec<CVector> = (0..iw.k())
        .into_par_iter()
        .map(|k| {
            let y = iw.point(k);
            let mut incident = C64::new(0.0, 0.0);
            for (s, x) in geometry.positions().iter().enumerate() {
                incident += green_homogeneous(x, &y, omega)? * f[s];
            }
            let mut col = CVector::zeros(n);
            for (r, x) in geometry.positions().iter().enumerate() {
                col[r] = green_homogeneous(x, &y, omega)? * incident;
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(CMatrix::from_columns(&cols))
}

/// Adjoint-based migration estimate `rho = A0^* b` on the image grid.
pub fn km_linear_estimate(a0: &CMatrix, b: &CVector) -> Result<CVector> {
    if b.len() != a0.nrows() {
        return Err(Error::Dimension(format!(
            "data has {} entries, model operator has {} rows",
            b.len(),
            a0.nrows()
        )));
    }
    Ok(a0.adjoint() * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::linear_index;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_geometry(n: usize) -> ArrayGeometry {
        ArrayGeometry::linear(n, 20.0, Pos::new(0.0, 0.0), true).unwrap()
    }

    fn desk_scene() -> Scene {
        Scene::new(vec![
            (Pos::new(-3.0, 95.0), C64::new(1.0, 0.0)),
            (Pos::new(4.0, 104.0), C64::new(0.7, -0.4)),
        ])
        .unwrap()
    }

    fn desk_freqs(s: usize) -> FrequencyGrid {
        FrequencyGrid::equispaced(0.95, 1.05, s, 600.0, 3e8).unwrap()
    }

    fn sorted_singular_values(m: &CMatrix) -> Vec<f64> {
        let mut sv = m.clone().svd(false, false).singular_values.as_slice().to_vec();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    #[test]
    fn green_vector_symmetry_and_magnitude() {
        let geometry = desk_geometry(9);
        let y = Pos::new(0.0, 100.0); // equidistant from mirrored elements
        let g = green_vector(&y, 1.0, &Medium::Homogeneous, &geometry).unwrap();
        for r in 0..4 {
            assert_relative_eq!(g[r].re, g[8 - r].re, max_relative = 1e-12);
            assert_relative_eq!(g[r].im, g[8 - r].im, max_relative = 1e-12);
        }
        for (r, x) in geometry.positions().iter().enumerate() {
            assert_relative_eq!(
                g[r].norm(),
                1.0 / (4.0 * std::f64::consts::PI * x.dist(&y)),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn single_scatterer_response_is_rank_one() {
        let geometry = desk_geometry(8);
        let scene = Scene::new(vec![(Pos::new(1.0, 90.0), C64::new(1.0, 0.0))]).unwrap();
        let p = response_single(&scene, &geometry, &Medium::Homogeneous, 1.0).unwrap();
        let g = green_vector(&Pos::new(1.0, 90.0), 1.0, &Medium::Homogeneous, &geometry).unwrap();
        for r in 0..8 {
            for s in 0..8 {
                let expected = g[r] * g[s];
                assert_relative_eq!(p.entries()[(r, s)].re, expected.re, max_relative = 1e-12);
                assert_relative_eq!(p.entries()[(r, s)].im, expected.im, max_relative = 1e-12);
            }
        }
        let sv = sorted_singular_values(p.entries());
        assert!(sv[1] <= 1e-12 * sv[0], "second singular value {:.3e}", sv[1]);
    }

    #[test]
    fn response_is_symmetric_for_colocated_arrays() {
        let geometry = desk_geometry(10);
        let scene = desk_scene();
        let p = response_single(&scene, &geometry, &Medium::Homogeneous, 1.02).unwrap();
        let scale = p.entries().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(p.symmetry_defect() <= 1e-12 * scale);
    }

    #[test]
    fn two_scatterers_give_rank_two() {
        let geometry = desk_geometry(12);
        let p = response_single(&desk_scene(), &geometry, &Medium::Homogeneous, 1.0).unwrap();
        let sv = sorted_singular_values(p.entries());
        assert!(sv[1] > 1e-6 * sv[0]);
        assert!(sv[2] <= 1e-10 * sv[0], "third singular value {:.3e}", sv[2]);
    }

    #[test]
    fn multifreq_reduces_to_single_and_extracts_blocks() {
        let geometry = desk_geometry(7);
        let scene = desk_scene();
        let freqs = desk_freqs(3);
        let multi = response_multi(&scene, &geometry, &Medium::Homogeneous, &freqs).unwrap();
        assert_eq!(multi.s(), 3);
        for l in 0..3 {
            let direct =
                response_single(&scene, &geometry, &Medium::Homogeneous, freqs.omega(l)).unwrap();
            let block = multi.block(l);
            let diff = (block.entries() - direct.entries()).norm();
            assert!(diff <= 1e-12 * direct.entries().norm(), "block {l} differs by {diff}");
        }
        let single = FrequencyGrid::new(vec![1.0], 600.0, 3e8).unwrap();
        let one = response_multi(&scene, &geometry, &Medium::Homogeneous, &single).unwrap();
        let direct = response_single(&scene, &geometry, &Medium::Homogeneous, 1.0).unwrap();
        assert!((one.block(0).entries() - direct.entries()).norm() <= 1e-14);
    }

    #[test]
    fn generic_rank_is_scatterers_times_frequencies() {
        let geometry = desk_geometry(12);
        let scene = desk_scene(); // M = 2
        let freqs = desk_freqs(3); // S = 3, M*S = 6 <= N = 12
        let multi = response_multi(&scene, &geometry, &Medium::Homogeneous, &freqs).unwrap();
        let sv = sorted_singular_values(multi.entries());
        assert!(sv[5] > 1e-10 * sv[0], "rank collapsed: {:?}", &sv[..7]);
        assert!(sv[6] <= 1e-10 * sv[0], "rank exceeds M*S: {:?}", &sv[..8]);
    }

    #[test]
    fn born_linearity_over_scene_union() {
        let geometry = desk_geometry(6);
        let a = Scene::new(vec![(Pos::new(-2.0, 80.0), C64::new(1.0, 0.2))]).unwrap();
        let b = Scene::new(vec![(Pos::new(3.0, 110.0), C64::new(-0.5, 0.9))]).unwrap();
        let both = Scene::new(
            a.scatterers().iter().chain(b.scatterers()).cloned().collect(),
        )
        .unwrap();
        let pa = response_single(&a, &geometry, &Medium::Homogeneous, 1.0).unwrap();
        let pb = response_single(&b, &geometry, &Medium::Homogeneous, 1.0).unwrap();
        let pu = response_single(&both, &geometry, &Medium::Homogeneous, 1.0).unwrap();
        let diff = (pu.entries() - (pa.entries() + pb.entries())).norm();
        assert!(diff <= 1e-12 * pu.entries().norm());
    }

    #[test]
    fn illumination_selects_columns_and_is_linear() {
        let geometry = desk_geometry(5);
        let freqs = desk_freqs(2);
        let p = response_multi(&desk_scene(), &geometry, &Medium::Homogeneous, &freqs).unwrap();

        // Basis vector pulls out the composite column.
        let i = linear_index(3, 2, 5, 2).unwrap() - 1;
        let f = basis_illumination(2, 1, 5, 2);
        let b = apply_illumination(&p, &f).unwrap();
        for r in 0..5 {
            assert_eq!(b[r], p.entries()[(r, i)]);
        }

        // Linearity.
        let f1 = basis_illumination(0, 0, 5, 2);
        let f2 = basis_illumination(4, 1, 5, 2);
        let b1 = apply_illumination(&p, &f1).unwrap();
        let b2 = apply_illumination(&p, &f2).unwrap();
        let b12 = apply_illumination(&p, &(&f1 + &f2)).unwrap();
        assert!((b12 - (&b1 + &b2)).norm() <= 1e-14 * b1.norm());

        // The mixed illumination e_i - i e_j of the recovery protocol.
        let fm = &f1 - &f2 * C64::new(0.0, 1.0);
        let bm = apply_illumination(&p, &fm).unwrap();
        assert!((bm - (&b1 - &b2 * C64::new(0.0, 1.0))).norm() <= 1e-14 * b1.norm());

        // Dimension mismatch is an error.
        assert!(apply_illumination(&p, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn component_data_matches_direct_double_sum() {
        // b_r for a basis illumination equals the direct sum over scatterers
        // and sources, evaluated without the matrix machinery.
        let geometry = desk_geometry(6);
        let scene = desk_scene();
        let freqs = desk_freqs(2);
        let medium = Medium::Homogeneous;
        let p = response_multi(&scene, &geometry, &medium, &freqs).unwrap();
        for (s0, l0) in [(0usize, 0usize), (3, 1), (5, 0)] {
            let f = basis_illumination(s0, l0, 6, 2);
            let b = apply_illumination(&p, &f).unwrap();
            let omega = freqs.omega(l0);
            let xs = geometry.position(s0);
            for (r, xr) in geometry.positions().iter().enumerate() {
                let mut direct = C64::new(0.0, 0.0);
                for (y, alpha) in scene.scatterers() {
                    direct += *alpha
                        * green_homogeneous(xr, y, omega).unwrap()
                        * green_homogeneous(y, &xs, omega).unwrap();
                }
                assert_relative_eq!(b[r].re, direct.re, max_relative = 1e-12);
                assert_relative_eq!(b[r].im, direct.im, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn intensities_basics() {
        let b = CVector::from_vec(vec![C64::new(3.0, 4.0), C64::new(0.0, -2.0)]);
        let beta = intensities(&b);
        assert_eq!(beta, vec![25.0, 4.0]);
        assert_eq!(intensities(&CVector::zeros(4)), vec![0.0; 4]);
        // Global phase invariance.
        let rotated = b.map(|z| z * C64::from_polar(1.0, 1.234));
        let beta2 = intensities(&rotated);
        for (a, b) in beta.iter().zip(&beta2) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // Parseval-style check.
        assert_relative_eq!(beta.iter().sum::<f64>(), b.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn model_operator_scalar_case() {
        let geometry = ArrayGeometry::new(vec![Pos::new(0.0, 0.0)], true).unwrap();
        let iw =
            crate::scene::ImageWindow::new(Pos::new(-0.5, 99.5), (1.0, 1.0), (1.0, 1.0)).unwrap();
        let f = CVector::from_vec(vec![C64::new(2.0, 1.0)]);
        let a0 = model_operator_a0(&f, 1.0, &geometry, &iw).unwrap();
        let g = green_homogeneous(&Pos::new(0.0, 0.0), &iw.point(0), 1.0).unwrap();
        let expected = g * g * f[0];
        assert_relative_eq!(a0[(0, 0)].re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(a0[(0, 0)].im, expected.im, max_relative = 1e-12);
    }

    #[test]
    fn model_operator_reproduces_on_grid_data() {
        // A0 rho with rho supported on true on-grid scatterers equals the
        // response data for the same illumination (homogeneous medium).
        let geometry = desk_geometry(6);
        let iw =
            crate::scene::ImageWindow::new(Pos::new(-8.0, 92.0), (16.0, 16.0), (2.0, 2.0)).unwrap();
        let p1 = iw.point(iw.index(2, 3));
        let p2 = iw.point(iw.index(5, 1));
        let (a1, a2) = (C64::new(1.0, 0.0), C64::new(-0.3, 0.8));
        let scene = Scene::new(vec![(p1, a1), (p2, a2)]).unwrap();
        let omega = 1.0;
        let p = response_single(&scene, &geometry, &Medium::Homogeneous, omega).unwrap();

        let mut f = CVector::zeros(6);
        f[0] = C64::new(0.6, -0.1);
        f[4] = C64::new(-1.0, 0.4);
        let b_response = p.entries() * &f;

        let a0 = model_operator_a0(&f, omega, &geometry, &iw).unwrap();
        let mut rho = CVector::zeros(iw.k());
        rho[iw.index(2, 3)] = a1;
        rho[iw.index(5, 1)] = a2;
        let b_model = &a0 * &rho;
        assert!((b_model - &b_response).norm() <= 1e-12 * b_response.norm());
    }

    #[test]
    fn model_operator_columns_nearly_orthogonal_when_separated() {
        // Columns at grid points separated by more than the resolution
        // limits have small normalized inner products.
        let geometry = ArrayGeometry::linear(21, 100.0, Pos::new(0.0, 0.0), true).unwrap();
        let iw =
            crate::scene::ImageWindow::new(Pos::new(-40.0, 960.0), (80.0, 80.0), (40.0, 40.0))
                .unwrap();
        let f = CVector::from_element(21, C64::new(1.0, 0.0));
        let a0 = model_operator_a0(&f, 1.0, &geometry, &iw).unwrap();
        // cross-range resolution ~ lambda L / a = 10; cells are 40 apart.
        let c0 = a0.column(iw.index(0, 1)).into_owned();
        let c1 = a0.column(iw.index(1, 1)).into_owned();
        let ip = (c0.adjoint() * &c1)[(0, 0)].norm() / (c0.norm() * c1.norm());
        assert!(ip < 0.2, "normalized inner product {ip}");
    }

    #[test]
    fn km_estimate_peaks_at_scatterer() {
        // Wide-angle aperture: the single-frequency adjoint only localizes
        // range once wavefront curvature beats the 1/r^2 amplitude bias of
        // the unnormalized columns.
        let geometry = ArrayGeometry::linear(51, 200.0, Pos::new(0.0, 0.0), true).unwrap();
        let iw =
            crate::scene::ImageWindow::new(Pos::new(-10.0, 90.0), (20.0, 20.0), (2.0, 2.0)).unwrap();
        let target_idx = iw.index(4, 6);
        let scene = Scene::new(vec![(iw.point(target_idx), C64::new(1.0, 0.0))]).unwrap();
        let omega = 1.0;
        let p = response_single(&scene, &geometry, &Medium::Homogeneous, omega).unwrap();
        let f = CVector::from_element(51, C64::new(1.0, 0.0));
        let b = p.entries() * &f;
        let a0 = model_operator_a0(&f, omega, &geometry, &iw).unwrap();
        let rho = km_linear_estimate(&a0, &b).unwrap();
        let argmax = (0..rho.len())
            .max_by(|&a, &b| rho[a].norm().total_cmp(&rho[b].norm()))
            .unwrap();
        assert_eq!(argmax, target_idx);

        // Zero data gives a zero estimate; global phase leaves |rho| alone.
        assert!(km_linear_estimate(&a0, &CVector::zeros(51)).unwrap().norm() == 0.0);
        let rho2 = km_linear_estimate(&a0, &(b * C64::from_polar(1.0, 0.77))).unwrap();
        for k in 0..rho.len() {
            assert_relative_eq!(rho[k].norm(), rho2[k].norm(), max_relative = 1e-12);
        }
        assert!(km_linear_estimate(&a0, &CVector::zeros(5)).is_err());
    }

    #[test]
    fn response_symmetry_survives_random_medium() {
        let geometry = desk_geometry(8);
        let scene = desk_scene();
        let spec = crate::scene::RandomMediumSpec {
            sigma: 5e-3,
            corr_len: 10.0,
            seed: 5,
            grid_spacing: 2.5,
            margin: 30.0,
            padding: 60.0,
        };
        let iw =
            crate::scene::ImageWindow::new(Pos::new(-10.0, 80.0), (20.0, 40.0), (2.0, 2.0)).unwrap();
        let medium = Medium::from_spec(
            &crate::scene::MediumSpec::RandomPhase(spec),
            geometry.positions(),
            &iw,
            0,
        )
        .unwrap();
        let p = response_single(&scene, &geometry, &medium, 1.0).unwrap();
        let scale = p.entries().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(p.symmetry_defect() <= 1e-12 * scale);

        // green_vector under the random medium matches elementwise greens.
        let y = Pos::new(2.0, 100.0);
        let g = green_vector(&y, 1.0, &medium, &geometry).unwrap();
        for (r, x) in geometry.positions().iter().enumerate() {
            let expected = medium.green(x, &y, 1.0).unwrap();
            assert_eq!(g[r], expected);
        }
    }

    #[test]
    fn scatterer_on_element_is_domain_error() {
        let geometry = desk_geometry(4);
        let scene = Scene::new(vec![(geometry.position(2), C64::new(1.0, 0.0))]).unwrap();
        assert!(response_single(&scene, &geometry, &Medium::Homogeneous, 1.0).is_err());
    }

    #[test]
    fn noise_is_off_by_default_and_scales_with_snr() {
        let b = CVector::from_element(64, C64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = add_noise(&b, 20.0, &mut rng);
        let err = (&noisy - &b).norm_squared() / b.norm_squared();
        assert!(err > 1e-3 && err < 1e-1, "snr 20 dB gave relative power {err}");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let quieter = add_noise(&b, 40.0, &mut rng);
        let err2 = (&quieter - &b).norm_squared() / b.norm_squared();
        assert!(err2 < err / 10.0);
    }
}
