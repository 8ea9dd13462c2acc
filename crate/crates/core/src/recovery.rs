//! Recovery of interferometric data matrices from intensity-only
//! measurements.
//!
//! The protocol probes the scene with three illumination families
//! (`e_i`, `e_i + e_j`, `e_i - i e_j`) and rebuilds every entry
//! `m_ij = conj(p_i) p_j` of the single-receiver matrix through the
//! polarization identity. For colocated arrays, reciprocity quotients then
//! assemble the full Gram matrix of the multifrequency response from the
//! per-receiver matrices. Both steps are purely algebraic: they hold in any
//! medium.

use crate::forward::{MultiFreqResponse, ResponseMatrix};
use crate::scene::composite0;
use crate::{CMatrix, CVector, Error, Result, C64};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// An illumination the protocol can request, in zero-based composite
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IlluminationPattern {
    /// `e_i`
    Single(usize),
    /// `e_i + e_j`
    Sum(usize, usize),
    /// `e_i - i e_j`
    Mix(usize, usize),
}

impl IlluminationPattern {
    pub fn kind(&self) -> &'static str {
        match self {
            IlluminationPattern::Single(_) => "single",
            IlluminationPattern::Sum(..) => "sum",
            IlluminationPattern::Mix(..) => "mix",
        }
    }

    /// Indices `(i, j)`; a single illumination reports `j = i`.
    pub fn indices(&self) -> (usize, usize) {
        match *self {
            IlluminationPattern::Single(i) => (i, i),
            IlluminationPattern::Sum(i, j) | IlluminationPattern::Mix(i, j) => (i, j),
        }
    }

    /// Dense composite vector of length `dim`.
    pub fn to_vector(&self, dim: usize) -> CVector {
        let mut f = CVector::zeros(dim);
        match *self {
            IlluminationPattern::Single(i) => f[i] = C64::new(1.0, 0.0),
            IlluminationPattern::Sum(i, j) => {
                f[i] += C64::new(1.0, 0.0);
                f[j] += C64::new(1.0, 0.0);
            }
            IlluminationPattern::Mix(i, j) => {
                f[i] += C64::new(1.0, 0.0);
                f[j] += C64::new(0.0, -1.0);
            }
        }
        f
    }
}

impl std::fmt::Display for IlluminationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (i, j) = self.indices();
        write!(f, "{}({i},{j})", self.kind())
    }
}

/// Measurement interface: the intensity `|P_r f|^2` recorded at one
/// designated receiver for a requested illumination.
pub trait IntensityOracle: Sync {
    fn measure(&self, pattern: &IlluminationPattern) -> Result<f64>;
    /// Composite dimension `N * S` of the illumination space.
    fn dim(&self) -> usize;
    /// Zero-based index of the receiver this oracle is bound to.
    fn receiver(&self) -> usize;
}

/// Oracle backed by the forward model: measures against one row of a
/// synthesized multifrequency response, optionally with additive complex
/// Gaussian noise on the field before the modulus is taken.
pub struct SimulatorOracle {
    row: CVector,
    receiver: usize,
    noise: Option<Mutex<rand_chacha::ChaCha8Rng>>,
    /// Mean per-entry power of the noise, fixed by the row and SNR.
    noise_power: f64,
}

impl SimulatorOracle {
    /// Noise-free oracle for receiver `r` of the response `p`.
    pub fn new(p: &MultiFreqResponse, r: usize) -> Result<Self> {
        if r >= p.n() {
            return Err(Error::Index(format!("receiver {r} not in 0..{}", p.n())));
        }
        Ok(Self { row: p.row(r), receiver: r, noise: None, noise_power: 0.0 })
    }

    /// Oracle with additive measurement noise at `snr_db` relative to the
    /// mean per-entry power of the receiver row.
    pub fn with_noise(p: &MultiFreqResponse, r: usize, snr_db: f64, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut oracle = Self::new(p, r)?;
        let p_signal =
            oracle.row.iter().map(|z| z.norm_sqr()).sum::<f64>() / oracle.row.len() as f64;
        oracle.noise_power = p_signal / 10f64.powf(snr_db / 10.0);
        oracle.noise = Some(Mutex::new(rand_chacha::ChaCha8Rng::seed_from_u64(seed)));
        Ok(oracle)
    }

    fn field(&self, pattern: &IlluminationPattern) -> C64 {
        match *pattern {
            IlluminationPattern::Single(i) => self.row[i],
            IlluminationPattern::Sum(i, j) => self.row[i] + self.row[j],
            IlluminationPattern::Mix(i, j) => self.row[i] - C64::new(0.0, 1.0) * self.row[j],
        }
    }
}

impl IntensityOracle for SimulatorOracle {
    fn measure(&self, pattern: &IlluminationPattern) -> Result<f64> {
        let (i, j) = pattern.indices();
        if i >= self.dim() || j >= self.dim() {
            return Err(Error::Oracle {
                illumination: pattern.to_string(),
                source: Box::new(Error::Index(format!(
                    "composite index out of range (dim {})",
                    self.dim()
                ))),
            });
        }
        let mut b = self.field(pattern);
        if let Some(rng) = &self.noise {
            use rand_distr::Distribution;
            let normal = rand_distr::StandardNormal;
            let mut rng = rng.lock().unwrap();
            let re: f64 = normal.sample(&mut *rng);
            let im: f64 = normal.sample(&mut *rng);
            let sd = (self.noise_power / 2.0).sqrt();
            b += C64::new(re * sd, im * sd);
        }
        Ok(b.norm_sqr())
    }

    fn dim(&self) -> usize {
        self.row.len()
    }

    fn receiver(&self) -> usize {
        self.receiver
    }
}

/// Wrapper that counts oracle calls; used to assert the measurement budget.
pub struct CountingOracle<'a, O: IntensityOracle + 'a> {
    inner: &'a O,
    calls: AtomicUsize,
}

impl<'a, O: IntensityOracle> CountingOracle<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<O: IntensityOracle> IntensityOracle for CountingOracle<'_, O> {
    fn measure(&self, pattern: &IlluminationPattern) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.measure(pattern)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn receiver(&self) -> usize {
        self.inner.receiver()
    }
}

/// How pair entries are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairProtocol {
    /// Measure each unordered pair once and fill the mirror entry by
    /// Hermitian symmetry: `N S + (N S)(N S - 1)` oracle calls.
    #[default]
    HermitianHalved,
    /// Measure every ordered pair; twice the pair budget, useful for
    /// averaging down measurement noise.
    FullOrdered,
}

/// Complex inner product from the four norm measurements of the
/// polarization identity:
/// `<x,y> = (n_sum - n_x - n_y)/2 + i (n_mix - n_x - n_y)/2`.
pub fn polarization_inner(n_sum: f64, n_x: f64, n_y: f64, n_mix: f64) -> Result<C64> {
    for (name, v) in [("n_sum", n_sum), ("n_x", n_x), ("n_y", n_y), ("n_mix", n_mix)] {
        if v < 0.0 {
            return Err(Error::Validation(format!(
                "polarization identity input {name} = {v} is negative"
            )));
        }
    }
    Ok(C64::new((n_sum - n_x - n_y) / 2.0, (n_mix - n_x - n_y) / 2.0))
}

/// A recovered single-receiver interferometric matrix plus its protocol
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct RecoveredMatrix {
    pub receiver: usize,
    pub matrix: CMatrix,
    pub oracle_calls: usize,
}

fn measure(oracle: &dyn IntensityOracle, pattern: IlluminationPattern) -> Result<f64> {
    oracle.measure(&pattern).map_err(|e| match e {
        e @ Error::Oracle { .. } => e,
        other => Error::Oracle { illumination: pattern.to_string(), source: Box::new(other) },
    })
}

/// Recovers the single-receiver matrix `M_r` (entries
/// `m_ij = conj(p_i) p_j`) from intensity-only measurements.
///
/// Diagonal entries are the single-illumination intensities; off-diagonal
/// entries come from the polarization identity. The result is projected onto
/// its Hermitian part, which is a no-op for noise-free data.
pub fn recover_mr(
    oracle: &dyn IntensityOracle,
    n: usize,
    s: usize,
    protocol: PairProtocol,
) -> Result<RecoveredMatrix> {
    let dim = n * s;
    if oracle.dim() != dim {
        return Err(Error::Dimension(format!(
            "oracle dimension {} does not match N*S = {dim}",
            oracle.dim()
        )));
    }
    let mut calls = 0usize;
    let mut singles = vec![0.0f64; dim];
    for (i, slot) in singles.iter_mut().enumerate() {
        *slot = measure(oracle, IlluminationPattern::Single(i))?;
        calls += 1;
    }

    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(singles[i], 0.0);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let n_sum = measure(oracle, IlluminationPattern::Sum(i, j))?;
            let n_mix = measure(oracle, IlluminationPattern::Mix(i, j))?;
            calls += 2;
            let mut entry = polarization_inner(n_sum, singles[i], singles[j], n_mix)?;
            if protocol == PairProtocol::FullOrdered {
                let n_sum_ji = measure(oracle, IlluminationPattern::Sum(j, i))?;
                let n_mix_ji = measure(oracle, IlluminationPattern::Mix(j, i))?;
                calls += 2;
                let mirror = polarization_inner(n_sum_ji, singles[j], singles[i], n_mix_ji)?;
                entry = (entry + mirror.conj()) / 2.0;
            }
            m[(i, j)] = entry;
            m[(j, i)] = entry.conj();
        }
    }

    // Nearest Hermitian matrix; exact data is already Hermitian.
    let herm = (&m + m.adjoint()) / C64::new(2.0, 0.0);
    Ok(RecoveredMatrix { receiver: oracle.receiver(), matrix: herm, oracle_calls: calls })
}

/// Reference transducer and frequency (zero-based) for the reciprocity
/// quotients of [`recover_full_m`]. The defaults use the first transducer
/// and the first frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct RecoveryReference {
    pub transducer: usize,
    pub frequency: usize,
}

/// Assembles the full interferometric matrix `M = P^* P` from all `N`
/// single-receiver matrices of a colocated array.
///
/// Each product `conj(p_rk) p_rn` is formed as
/// `m^r(k, cq) m^r(cq, n) / m^q(c_r, c_r)` with `q` the reference
/// transducer, `cq` its composite index at the reference frequency and
/// `c_r` the composite index of transducer `r` there; reciprocity makes the
/// denominator the intensity `|p_(r,cq)|^2`. A denominator below
/// `tol * max diag(M^q)` aborts with a singular-reference error instead of
/// silently regularizing.
pub fn recover_full_m(
    mr_list: &[CMatrix],
    n: usize,
    s: usize,
    colocated: bool,
    reference: RecoveryReference,
    tol: Option<f64>,
) -> Result<CMatrix> {
    if !colocated {
        return Err(Error::Validation(
            "full interferometric recovery needs colocated sources and receivers: \
             per-receiver matrices carry independent global phases otherwise"
                .into(),
        ));
    }
    let dim = n * s;
    if mr_list.len() != n {
        return Err(Error::Dimension(format!(
            "need all {n} single-receiver matrices, got {}",
            mr_list.len()
        )));
    }
    for (r, m) in mr_list.iter().enumerate() {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Dimension(format!(
                "receiver {r} matrix is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let q = reference.transducer;
    let lref = reference.frequency;
    if q >= n || lref >= s {
        return Err(Error::Index(format!(
            "reference transducer {q} / frequency {lref} out of range for N={n}, S={s}"
        )));
    }
    let cq = composite0(q, lref, n);
    let mq = &mr_list[q];
    let max_diag = (0..dim).map(|i| mq[(i, i)].re).fold(0.0f64, f64::max);
    let tol_abs = tol.unwrap_or(1e-8) * max_diag;

    let mut denom = vec![0.0f64; n];
    for (r, d_slot) in denom.iter_mut().enumerate() {
        let cr = composite0(r, lref, n);
        let d = mq[(cr, cr)].re;
        if d <= tol_abs {
            return Err(Error::SingularReference {
                i: r + 1,
                j: r + 1,
                magnitude: d,
                tolerance: tol_abs,
            });
        }
        *d_slot = d;
    }

    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..n {
        let mr = &mr_list[r];
        let col = mr.column(cq);
        let row = mr.row(cq);
        let inv = 1.0 / denom[r];
        for k in 0..dim {
            let left = col[k] * inv;
            for nn in 0..dim {
                m[(k, nn)] += left * row[nn];
            }
        }
    }
    // Hermitian projection guards against noisy inputs; exact inputs are
    // Hermitian already.
    Ok((&m + m.adjoint()) / C64::new(2.0, 0.0))
}

/// Single-frequency interferometric (time-reversal) matrix
/// `M(omega) = P(omega)^* P(omega)`.
pub fn single_frequency_interferometric(p: &ResponseMatrix) -> CMatrix {
    p.entries().adjoint() * p.entries()
}

/// Gram matrix `M = P^* P` of the full multifrequency response; the
/// noise-free ground truth that recovery reproduces.
pub fn multifreq_gram(p: &MultiFreqResponse) -> CMatrix {
    p.entries().adjoint() * p.entries()
}

/// Rank-one single-receiver matrix `P_r^* P_r` synthesized directly from a
/// response row.
pub fn rank_one_interferometric(row: &CVector) -> CMatrix {
    let dim = row.len();
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let ci = row[i].conj();
        for j in 0..dim {
            m[(i, j)] = ci * row[j];
        }
    }
    m
}

/// Replays recorded intensities instead of measuring; see
/// [`crate::io::read_intensity_records`] for the file format.
pub struct ReplayOracle {
    records: std::collections::HashMap<IlluminationPattern, f64>,
    dim: usize,
    receiver: usize,
}

impl ReplayOracle {
    pub fn new(
        records: std::collections::HashMap<IlluminationPattern, f64>,
        dim: usize,
        receiver: usize,
    ) -> Self {
        Self { records, dim, receiver }
    }

    /// Every illumination the halved protocol will request but the record
    /// set lacks, as `(kind, i, j)` with 1-based indices.
    pub fn missing_for_protocol(&self) -> Vec<(String, usize, usize)> {
        let mut missing = Vec::new();
        for i in 0..self.dim {
            let p = IlluminationPattern::Single(i);
            if !self.records.contains_key(&p) {
                missing.push((p.kind().to_string(), i + 1, i + 1));
            }
        }
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                for p in [IlluminationPattern::Sum(i, j), IlluminationPattern::Mix(i, j)] {
                    if !self.records.contains_key(&p) {
                        missing.push((p.kind().to_string(), i + 1, j + 1));
                    }
                }
            }
        }
        missing
    }
}

impl IntensityOracle for ReplayOracle {
    fn measure(&self, pattern: &IlluminationPattern) -> Result<f64> {
        self.records.get(pattern).copied().ok_or_else(|| Error::Oracle {
            illumination: pattern.to_string(),
            source: Box::new(Error::Format("measurement missing from records".into())),
        })
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn receiver(&self) -> usize {
        self.receiver
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::response_multi;
    use crate::medium::Medium;
    use crate::scene::{
        ArrayGeometry, FrequencyGrid, ImageWindow, MediumSpec, Pos, RandomMediumSpec, Scene,
    };
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk_setup(n: usize, s: usize) -> (ArrayGeometry, Scene, FrequencyGrid) {
        let geometry = ArrayGeometry::linear(n, 30.0, Pos::new(0.0, 0.0), true).unwrap();
        let scene = Scene::new(vec![
            (Pos::new(-4.0, 120.0), C64::new(1.0, 0.3)),
            (Pos::new(5.5, 131.0), C64::new(-0.6, 0.8)),
            (Pos::new(1.0, 115.0), C64::new(0.2, -0.9)),
        ])
        .unwrap();
        let freqs = FrequencyGrid::equispaced(0.95, 1.05, s, 600.0, 3e8).unwrap();
        (geometry, scene, freqs)
    }

    fn desk_response(n: usize, s: usize) -> MultiFreqResponse {
        let (geometry, scene, freqs) = desk_setup(n, s);
        response_multi(&scene, &geometry, &Medium::Homogeneous, &freqs).unwrap()
    }

    fn random_medium_response(n: usize, s: usize) -> MultiFreqResponse {
        let (geometry, scene, freqs) = desk_setup(n, s);
        let iw = ImageWindow::new(Pos::new(-10.0, 110.0), (20.0, 30.0), (2.0, 2.0)).unwrap();
        let spec = MediumSpec::RandomPhase(RandomMediumSpec {
            sigma: 3e-3,
            corr_len: 8.0,
            seed: 91,
            grid_spacing: 2.0,
            margin: 24.0,
            padding: 48.0,
        });
        let medium = Medium::from_spec(&spec, geometry.positions(), &iw, 0).unwrap();
        response_multi(&scene, &geometry, &medium, &freqs).unwrap()
    }

    #[test]
    fn polarization_inner_reference_cases() {
        // Orthogonal real unit vectors.
        let m = polarization_inner(2.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(m, C64::new(0.0, 0.0));
        // x = y with unit norm: <x,x> = 1.
        let m = polarization_inner(4.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(m, C64::new(1.0, 0.0));
        assert!(polarization_inner(-0.1, 1.0, 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn polarization_matches_direct_inner_product(seed in 0u64..500) {
            // Random complex x, y of length 8; the four norms reproduce the
            // conjugate-linear inner product to machine precision.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || {
                CVector::from_fn(8, |_, _| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            };
            let x = draw();
            let y = draw();
            let n_sum = (&x + &y).norm_squared();
            let n_mix = (&x - &y * C64::new(0.0, 1.0)).norm_squared();
            let m = polarization_inner(n_sum, x.norm_squared(), y.norm_squared(), n_mix).unwrap();
            let direct = (x.adjoint() * &y)[(0, 0)];
            prop_assert!((m - direct).norm() <= 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn recover_mr_matches_forward_model() {
        for (label, p) in
            [("homogeneous", desk_response(6, 3)), ("random", random_medium_response(6, 3))]
        {
            let r = 2;
            let oracle = SimulatorOracle::new(&p, r).unwrap();
            let rec = recover_mr(&oracle, 6, 3, PairProtocol::HermitianHalved).unwrap();
            let truth = rank_one_interferometric(&p.row(r));
            let scale = truth.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let defect = (&rec.matrix - &truth).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(defect <= 1e-10 * scale, "{label}: defect {defect:.3e} vs scale {scale:.3e}");

            // Diagonal equals the measured intensities exactly.
            for i in 0..p.dim() {
                let beta = oracle.measure(&IlluminationPattern::Single(i)).unwrap();
                assert_eq!(rec.matrix[(i, i)].re, beta);
                assert_eq!(rec.matrix[(i, i)].im, 0.0);
            }
        }
    }

    #[test]
    fn recover_mr_trivial_dimension() {
        let p = desk_response(1, 1);
        let oracle = SimulatorOracle::new(&p, 0).unwrap();
        let rec = recover_mr(&oracle, 1, 1, PairProtocol::HermitianHalved).unwrap();
        assert_eq!(rec.matrix.nrows(), 1);
        assert_relative_eq!(rec.matrix[(0, 0)].re, p.row(0)[0].norm_sqr(), max_relative = 1e-14);
        assert_eq!(rec.oracle_calls, 1);
    }

    #[test]
    fn measurement_budget_is_exact() {
        let p = desk_response(4, 2);
        let oracle = SimulatorOracle::new(&p, 1).unwrap();
        let counter = CountingOracle::new(&oracle);
        let rec = recover_mr(&counter, 4, 2, PairProtocol::HermitianHalved).unwrap();
        let d = 8usize;
        assert_eq!(counter.calls(), d + d * (d - 1));
        assert_eq!(rec.oracle_calls, counter.calls());

        let counter = CountingOracle::new(&oracle);
        recover_mr(&counter, 4, 2, PairProtocol::FullOrdered).unwrap();
        assert_eq!(counter.calls(), d + 2 * d * (d - 1));
    }

    #[test]
    fn recovered_matrix_is_rank_one() {
        let p = desk_response(5, 2);
        let oracle = SimulatorOracle::new(&p, 0).unwrap();
        let rec = recover_mr(&oracle, 5, 2, PairProtocol::HermitianHalved).unwrap();
        let eig = nalgebra::SymmetricEigen::new(rec.matrix.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!(ev[1].abs() <= 1e-8 * ev[0], "eigenvalues {:?}", &ev[..2]);
    }

    #[test]
    fn full_matrix_recovery_and_refusal() {
        let p = desk_response(5, 2);
        let dim = p.dim();
        let mrs: Vec<CMatrix> = (0..5)
            .map(|r| {
                let oracle = SimulatorOracle::new(&p, r).unwrap();
                recover_mr(&oracle, 5, 2, PairProtocol::HermitianHalved).unwrap().matrix
            })
            .collect();
        let m = recover_full_m(&mrs, 5, 2, true, RecoveryReference::default(), None).unwrap();
        let truth = multifreq_gram(&p);
        let scale = truth.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let defect = (&m - &truth).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect <= 1e-8 * scale, "defect {defect:.3e} vs scale {scale:.3e}");

        // Hermitian up to roundoff by construction.
        let herm_defect = (&m - m.adjoint()).norm();
        assert!(herm_defect <= 1e-12 * m.norm());

        // Positive semidefinite within roundoff.
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min_ev >= -1e-10 * max_ev, "eigenvalue range [{min_ev:.3e}, {max_ev:.3e}]");

        // Phase-reference consistency: entrywise quotient against the truth
        // has unit modulus and zero phase where the truth is significant.
        for k in 0..dim {
            for nn in 0..dim {
                if truth[(k, nn)].norm() > 1e-6 * scale {
                    let ratio = m[(k, nn)] / truth[(k, nn)];
                    assert!((ratio.norm() - 1.0).abs() <= 1e-8, "modulus {}", ratio.norm());
                    assert!(ratio.arg().abs() <= 1e-8, "phase {}", ratio.arg());
                }
            }
        }

        // Non-colocated geometries are refused.
        let err = recover_full_m(&mrs, 5, 2, false, RecoveryReference::default(), None);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn singular_reference_is_reported_not_regularized() {
        let p = desk_response(4, 2);
        let mut mrs: Vec<CMatrix> = (0..4)
            .map(|r| {
                let oracle = SimulatorOracle::new(&p, r).unwrap();
                recover_mr(&oracle, 4, 2, PairProtocol::HermitianHalved).unwrap().matrix
            })
            .collect();
        // Null out the reference diagonal entry for transducer 3 at the
        // reference frequency: the quotient for r = 3 becomes singular.
        let c3 = composite0(3, 0, 4);
        mrs[0][(c3, c3)] = C64::new(0.0, 0.0);
        let err = recover_full_m(&mrs, 4, 2, true, RecoveryReference::default(), None);
        match err {
            Err(Error::SingularReference { i, j, .. }) => {
                assert_eq!((i, j), (4, 4));
            }
            other => panic!("expected singular-reference error, got {other:?}"),
        }
    }

    #[test]
    fn alternate_reference_dodges_nulls() {
        let p = desk_response(4, 2);
        let mrs: Vec<CMatrix> = (0..4)
            .map(|r| {
                let oracle = SimulatorOracle::new(&p, r).unwrap();
                recover_mr(&oracle, 4, 2, PairProtocol::HermitianHalved).unwrap().matrix
            })
            .collect();
        let reference = RecoveryReference { transducer: 2, frequency: 1 };
        let m = recover_full_m(&mrs, 4, 2, true, reference, None).unwrap();
        let truth = multifreq_gram(&p);
        let scale = truth.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let defect = (&m - &truth).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect <= 1e-8 * scale);
    }

    #[test]
    fn single_frequency_gram_matrix() {
        let p = desk_response(6, 2).block(0);
        let m = single_frequency_interferometric(&p);
        // Eigenvalues of M equal squared singular values of P.
        let mut sv: Vec<f64> =
            p.entries().clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (e, s) in ev.iter().zip(sv.iter()) {
            assert_relative_eq!(*e, s * s, max_relative = 1e-9, epsilon = 1e-12 * sv[0] * sv[0]);
        }
        // Rank M for the generic 3-scatterer scene: the 4th eigenvalue
        // collapses.
        assert!(ev[2] > 1e-10 * ev[0]);
        assert!(ev[3] <= 1e-10 * ev[0], "{ev:?}");
    }

    #[test]
    fn noisy_recovery_stays_hermitian_and_close() {
        let p = desk_response(4, 2);
        let oracle = SimulatorOracle::with_noise(&p, 1, 50.0, 3).unwrap();
        let rec = recover_mr(&oracle, 4, 2, PairProtocol::FullOrdered).unwrap();
        assert!((&rec.matrix - rec.matrix.adjoint()).norm() <= 1e-12 * rec.matrix.norm());
        let truth = rank_one_interferometric(&p.row(1));
        let rel = (&rec.matrix - &truth).norm() / truth.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn replay_oracle_reports_gaps() {
        let p = desk_response(2, 1);
        let sim = SimulatorOracle::new(&p, 0).unwrap();
        let mut records = std::collections::HashMap::new();
        for i in 0..2 {
            let pat = IlluminationPattern::Single(i);
            records.insert(pat, sim.measure(&pat).unwrap());
        }
        // Pair measurements left out on purpose.
        let replay = ReplayOracle::new(records, 2, 0);
        let missing = replay.missing_for_protocol();
        assert_eq!(missing.len(), 2);
        assert!(missing.contains(&("sum".to_string(), 1, 2)));
        assert!(missing.contains(&("mix".to_string(), 1, 2)));
        assert!(recover_mr(&replay, 2, 1, PairProtocol::HermitianHalved).is_err());
    }

    #[test]
    fn zero_scene_gives_zero_gram() {
        // A response with zero entries maps to the zero interferometric
        // matrix.
        let p = MultiFreqResponse::from_raw(vec![1.0], CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(multifreq_gram(&p).norm(), 0.0);
    }
}
