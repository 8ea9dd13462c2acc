//! Propagation media: the homogeneous reference medium and a random-phase
//! medium in which travel times are perturbed by a line integral of a
//! stationary Gaussian field.
//!
//! In the random-phase model the Green's function keeps the homogeneous
//! amplitude and acquires a unimodular factor `exp(i omega nu)`, where `nu`
//! is Gaussian with zero mean and covariance `tau_c^2 C(|x - x'| / l)`. The
//! closed-form moment formulas implemented here are the quantities the Monte
//! Carlo estimators in [`moments`] verify.

mod field;
pub mod moments;

pub use field::{sample_mu_field, FieldSpec, RandomFieldRealization};

use crate::scene::{ImageWindow, MediumSpec, Pos};
use crate::{Error, Result, C64, C0_INTERNAL};
use std::f64::consts::PI;

/// Free-space Green's function `exp(i omega |x-y| / c0) / (4 pi |x-y|)` in
/// internal units (`c0 = 1 / 2 pi`, so the phase is `2 pi omega |x-y|`).
pub fn green_homogeneous(x: &Pos, y: &Pos, omega: f64) -> Result<C64> {
    let d = x.dist(y);
    if d == 0.0 {
        return Err(Error::Domain("green function evaluated at coincident points".into()));
    }
    Ok(green_homogeneous_unchecked(d, omega))
}

/// Hot-path variant for callers that have already validated `d > 0`.
#[inline]
pub fn green_homogeneous_unchecked(d: f64, omega: f64) -> C64 {
    C64::from_polar(1.0 / (4.0 * PI * d), 2.0 * PI * omega * d)
}

/// Travel-time perturbation along the straight segment from `y` to `x`:
/// `(sigma |x-y| / 2 c0)` times the composite-midpoint quadrature of the
/// field along the segment, with step `min(l/4, |x-y|/64)` and bilinear
/// field interpolation.
pub fn nu(x: &Pos, y: &Pos, field: &RandomFieldRealization, sigma: f64) -> Result<f64> {
    let d = x.dist(y);
    if d == 0.0 {
        return Err(Error::Domain("travel-time perturbation needs distinct endpoints".into()));
    }
    if !field.contains(x) || !field.contains(y) {
        return Err(Error::Domain("segment endpoint outside the field domain".into()));
    }
    let step = (field.corr_len() / 4.0).min(d / 64.0);
    let n = (d / step).ceil() as usize;
    let mut acc = 0.0;
    for j in 0..n {
        let s = (j as f64 + 0.5) / n as f64;
        let p = Pos::new(y.x + (x.x - y.x) * s, y.z + (x.z - y.z) * s);
        acc += field.at(&p)?;
    }
    Ok(sigma * d / (2.0 * C0_INTERNAL) * acc / n as f64)
}

/// Random-medium Green's function: homogeneous amplitude, perturbed phase.
pub fn green_random(
    x: &Pos,
    y: &Pos,
    omega: f64,
    field: &RandomFieldRealization,
    sigma: f64,
) -> Result<C64> {
    let g0 = green_homogeneous(x, y, omega)?;
    let v = nu(x, y, field, sigma)?;
    Ok(g0 * C64::from_polar(1.0, omega * v))
}

/// Standard deviation of the travel-time perturbation accumulated over
/// distance `big_l`: `tau_c = sqrt( sqrt(2 pi) sigma^2 l L / (4 c0^2) )`.
pub fn tau_c(sigma: f64, l: f64, big_l: f64, c0: f64) -> f64 {
    ((2.0 * PI).sqrt() * sigma * sigma * l * big_l / (4.0 * c0 * c0)).sqrt()
}

/// Normalized covariance kernel `C(r) = (1/r) integral_0^r exp(-u^2/2) du`.
/// `C(0) = 1` and `C(r) ~ sqrt(pi/2) / r` for large `r`.
pub fn covariance_c(r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Domain("covariance kernel needs r >= 0".into()));
    }
    if r < 1e-4 {
        // Series around zero; the r^4 term is below 1e-17 here.
        return Ok(1.0 - r * r / 6.0);
    }
    Ok((PI / 2.0).sqrt() * erf(r / std::f64::consts::SQRT_2) / r)
}

/// Error function via its Maclaurin series for |x| <= 4; beyond that the
/// complement is under 1.6e-8 and erf is taken as +-1.
fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax > 4.0 {
        return 1.0f64.copysign(x);
    }
    let mut term = ax;
    let mut sum = ax;
    let x2 = ax * ax;
    let mut n = 0usize;
    while term.abs() > 1e-18 * sum.abs().max(1.0) && n < 200 {
        n += 1;
        term *= -x2 / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    (2.0 / PI.sqrt() * sum).copysign(x)
}

/// Decoherence thresholds implied by the phase statistics:
/// `Omega_d = 1 / tau_c` and `X_d = sqrt(3) l / (omega0 tau_c)`.
pub fn decoherence_params(tau_c: f64, l: f64, omega0: f64) -> (f64, f64) {
    (1.0 / tau_c, 3f64.sqrt() * l / (omega0 * tau_c))
}

/// Mean of `exp(i omega nu(x) - i omega' nu(x'))` for elements separated by
/// `offset`:
/// `exp{ -(omega-omega')^2 tau_c^2 / 2 - omega omega' tau_c^2 [1 - C(offset/l)] }`.
pub fn moment_exp_cross(
    omega: f64,
    omega_prime: f64,
    offset: f64,
    tau_c: f64,
    l: f64,
) -> Result<C64> {
    let dw = omega - omega_prime;
    let c = covariance_c(offset / l)?;
    let exponent = -dw * dw * tau_c * tau_c / 2.0
        - omega * omega_prime * tau_c * tau_c * (1.0 - c);
    Ok(C64::new(exponent.exp(), 0.0))
}

/// Gaussian approximation of [`moment_exp_cross`], valid for `offset << l`
/// and a narrow band: `exp{ -(omega-omega')^2 / (2 Omega_d^2)
/// - offset^2 / (2 X_d^2) }`.
pub fn moment_exp_cross_gaussian(
    omega: f64,
    omega_prime: f64,
    offset: f64,
    omega_d: f64,
    x_d: f64,
) -> C64 {
    let dw = omega - omega_prime;
    let exponent = -dw * dw / (2.0 * omega_d * omega_d) - offset * offset / (2.0 * x_d * x_d);
    C64::new(exponent.exp(), 0.0)
}

/// Parameters of the random-phase statistics at a given propagation range.
#[derive(Debug, Clone, Copy)]
pub struct RandomPhaseParams {
    pub sigma: f64,
    pub corr_len: f64,
    /// Propagation distance used in the moment formulas.
    pub range: f64,
}

impl RandomPhaseParams {
    pub fn tau_c(&self) -> f64 {
        tau_c(self.sigma, self.corr_len, self.range, C0_INTERNAL)
    }

    /// `(Omega_d, X_d)` at the central frequency (`omega0 = 1` internally).
    pub fn decoherence(&self) -> (f64, f64) {
        decoherence_params(self.tau_c(), self.corr_len, 1.0)
    }
}

/// Mean and variance of the Green's-function product
/// `G(x,y;omega) conj(G(x',y;omega'))`.
///
/// The mean is the homogeneous product times [`moment_exp_cross`]; the
/// variance is `|G0 G0'|^2 (1 - exp{ -(omega-omega')^2/Omega_d^2
/// - |x-x'|^2/X_d^2 })`.
pub fn moment_green_product(
    x: &Pos,
    x_prime: &Pos,
    y: &Pos,
    omega: f64,
    omega_prime: f64,
    params: &RandomPhaseParams,
) -> Result<(C64, f64)> {
    let g0 = green_homogeneous(x, y, omega)?;
    let g0p = green_homogeneous(x_prime, y, omega_prime)?;
    let offset = x.dist(x_prime);
    let tc = params.tau_c();
    let mean = g0 * g0p.conj() * moment_exp_cross(omega, omega_prime, offset, tc, params.corr_len)?;
    let (omega_d, x_d) = params.decoherence();
    let dw = omega - omega_prime;
    let decay =
        (-dw * dw / (omega_d * omega_d) - offset * offset / (x_d * x_d)).exp();
    let variance = (g0 * g0p.conj()).norm_sqr() * (1.0 - decay);
    Ok((mean, variance))
}

/// Diagnostics of the random-phase model's validity at the given parameters.
#[derive(Debug, Clone)]
pub struct RegimeDiagnostics {
    /// `sigma^2 L^3 / l^3`; must stay well below `lambda^2 / (sigma^2 l L)`.
    pub wavefront_ratio: f64,
    /// `lambda^2 / (sigma^2 l L) = 1 / epsilon^2`.
    pub coherence_ratio: f64,
    pub sigma0: f64,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

impl RegimeDiagnostics {
    pub fn valid(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Reports the dimensionless groups governing the random-phase model and
/// warns when the requested strength leaves its regime.
pub fn validate_regime(sigma: f64, l: f64, big_l: f64, lambda0: f64) -> RegimeDiagnostics {
    let sigma0 = lambda0 / (l * big_l).sqrt();
    let epsilon = sigma / sigma0;
    let wavefront_ratio = sigma * sigma * big_l.powi(3) / l.powi(3);
    let coherence_ratio = lambda0 * lambda0 / (sigma * sigma * l * big_l);
    let mut warnings = Vec::new();
    if epsilon > 3.0 {
        warnings.push(format!(
            "fluctuation strength epsilon = {epsilon:.3} well above 1: phases largely incoherent"
        ));
    }
    if wavefront_ratio > 10.0 {
        warnings.push(format!(
            "sigma^2 L^3 / l^3 = {wavefront_ratio:.3e} is large: geometric-optics phase model breaks down"
        ));
    }
    RegimeDiagnostics { wavefront_ratio, coherence_ratio, sigma0, epsilon, warnings }
}

/// A concrete propagation medium: either the homogeneous reference or one
/// realization of the random-phase medium. Immutable after construction and
/// safe to share across workers.
#[derive(Debug, Clone)]
pub enum Medium {
    Homogeneous,
    RandomPhase { field: RandomFieldRealization, sigma: f64 },
}

impl Medium {
    /// Realizes a medium from its configuration. For the random-phase kind
    /// the field grid is sized to cover every array-to-window segment with
    /// the configured margin; `seed_offset` shifts the field seed to draw
    /// independent realizations of the same specification.
    pub fn from_spec(
        spec: &MediumSpec,
        array_positions: &[Pos],
        window: &ImageWindow,
        seed_offset: u64,
    ) -> Result<Medium> {
        match spec {
            MediumSpec::Homogeneous => Ok(Medium::Homogeneous),
            MediumSpec::RandomPhase(rm) => {
                let corners: Vec<Pos> = {
                    let o = window.origin();
                    let (ex, ez) = window.extent();
                    vec![
                        Pos::new(o.x, o.z),
                        Pos::new(o.x + ex, o.z),
                        Pos::new(o.x, o.z + ez),
                        Pos::new(o.x + ex, o.z + ez),
                    ]
                };
                let spec = FieldSpec::covering(
                    array_positions,
                    &corners,
                    rm.corr_len,
                    rm.grid_spacing,
                    rm.margin,
                    rm.padding,
                )?;
                let field = sample_mu_field(&spec, rm.seed ^ seed_offset)?;
                Ok(Medium::RandomPhase { field, sigma: rm.sigma })
            }
        }
    }

    /// Green's function between `x` and `y` at angular frequency `omega`.
    pub fn green(&self, x: &Pos, y: &Pos, omega: f64) -> Result<C64> {
        match self {
            Medium::Homogeneous => green_homogeneous(x, y, omega),
            Medium::RandomPhase { field, sigma } => green_random(x, y, omega, field, *sigma),
        }
    }

    /// Travel-time perturbation between `x` and `y`; zero in the reference
    /// medium. Frequency-independent, so callers evaluating several
    /// frequencies per path should cache it.
    pub fn nu(&self, x: &Pos, y: &Pos) -> Result<f64> {
        match self {
            Medium::Homogeneous => Ok(0.0),
            Medium::RandomPhase { field, sigma } => nu(x, y, field, *sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn green_modulus_and_reciprocity() {
        let x = Pos::new(3.0, 0.0);
        let y = Pos::new(-1.0, 40.0);
        for omega in [0.6, 1.0, 1.7] {
            let g = green_homogeneous(&x, &y, omega).unwrap();
            assert_relative_eq!(g.norm(), 1.0 / (4.0 * PI * x.dist(&y)), max_relative = 1e-14);
            let back = green_homogeneous(&y, &x, omega).unwrap();
            assert_eq!(g, back);
        }
        assert!(green_homogeneous(&x, &x, 1.0).is_err());
    }

    #[test]
    fn green_phase_wraps_every_wavelength() {
        // At omega = 1 the wavelength is one internal length unit, so radii
        // one unit apart carry the same phase.
        let y = Pos::new(0.0, 0.0);
        let g1 = green_homogeneous(&Pos::new(0.0, 5.0), &y, 1.0).unwrap();
        let g2 = green_homogeneous(&Pos::new(0.0, 6.0), &y, 1.0).unwrap();
        assert_relative_eq!(g1.arg(), g2.arg(), epsilon = 1e-10);
    }

    fn small_field(value: Option<f64>) -> RandomFieldRealization {
        let spec = FieldSpec {
            x0: -10.0,
            z0: -10.0,
            nx: 81,
            nz: 81,
            spacing: 0.5,
            corr_len: 2.0,
            padding: 12.0,
        };
        match value {
            Some(v) => {
                let samples = vec![v; spec.nx * spec.nz];
                RandomFieldRealization::from_samples(spec, 0, samples).unwrap()
            }
            None => sample_mu_field(&spec, 77).unwrap(),
        }
    }

    #[test]
    fn nu_vanishes_for_zero_strength() {
        let field = small_field(None);
        let v = nu(&Pos::new(0.0, 0.0), &Pos::new(5.0, 20.0), &field, 0.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nu_constant_field_closed_form() {
        let field = small_field(Some(3.0));
        let x = Pos::new(-4.0, -2.0);
        let y = Pos::new(6.0, 25.0);
        let sigma = 1e-3;
        let v = nu(&x, &y, &field, sigma).unwrap();
        let expected = sigma * x.dist(&y) * 3.0 / (2.0 * C0_INTERNAL);
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn nu_rejects_segment_leaving_domain() {
        let field = small_field(None);
        assert!(nu(&Pos::new(0.0, 0.0), &Pos::new(0.0, 1000.0), &field, 1e-3).is_err());
    }

    #[test]
    fn nu_quadrature_converges_under_step_halving() {
        // Halving the step via a doubled-resolution field changes nu by
        // less than 0.5%: the midpoint rule resolves the correlation scale.
        let coarse = small_field(None);
        let x = Pos::new(-6.0, -6.0);
        let y = Pos::new(8.0, 28.0);
        let v1 = nu(&x, &y, &coarse, 1e-3).unwrap();
        // Same realization, finer quadrature: shrink corr_len of the lookup
        // only through the step rule by calling with a field whose spec
        // reports half the step. Easiest honest check: integrate with the
        // generic rule vs a 4x oversampled manual midpoint sum.
        let d = x.dist(&y);
        let n = 4 * (d / (coarse.corr_len() / 4.0)).ceil() as usize;
        let mut acc = 0.0;
        for j in 0..n {
            let s = (j as f64 + 0.5) / n as f64;
            let p = Pos::new(y.x + (x.x - y.x) * s, y.z + (x.z - y.z) * s);
            acc += coarse.at(&p).unwrap();
        }
        let v2 = 1e-3 * d / (2.0 * C0_INTERNAL) * acc / n as f64;
        assert_relative_eq!(v1, v2, max_relative = 5e-3);
    }

    #[test]
    fn random_green_is_unimodular_perturbation() {
        let field = small_field(None);
        let x = Pos::new(-3.0, -4.0);
        let y = Pos::new(5.0, 22.0);
        for omega in [0.9, 1.0, 1.1] {
            let g = green_random(&x, &y, omega, &field, 2e-3).unwrap();
            let g0 = green_homogeneous(&x, &y, omega).unwrap();
            assert_relative_eq!(g.norm(), g0.norm(), max_relative = 1e-13);
        }
        // sigma -> 0 recovers the homogeneous value exactly.
        let g = green_random(&x, &y, 1.0, &field, 0.0).unwrap();
        assert_eq!(g, green_homogeneous(&x, &y, 1.0).unwrap());
    }

    #[test]
    fn tau_c_dimensionless_identity() {
        // omega0 tau_c squared = pi^2 sqrt(2 pi) eps^2 with eps = sigma/sigma0.
        let (l, big_l): (f64, f64) = (100.0, 10000.0);
        let sigma = 2e-4;
        let eps = sigma * (l * big_l).sqrt();
        let tc = tau_c(sigma, l, big_l, C0_INTERNAL);
        let expected = PI * PI * (2.0 * PI).sqrt() * eps * eps;
        assert_relative_eq!(tc * tc, expected, max_relative = 1e-12);
        // linear in sigma
        assert_relative_eq!(tau_c(2.0 * sigma, l, big_l, C0_INTERNAL), 2.0 * tc, max_relative = 1e-12);
    }

    #[test]
    fn epsilon_bookkeeping_for_reference_parameters() {
        // With l = 100, L = 10000 and sigma = 4e-4 the strength is
        // eps = 0.4; the random-medium presets instead fix eps = 0.2 and
        // derive sigma = 2e-4 from it.
        let diag = validate_regime(4e-4, 100.0, 10000.0, 1.0);
        assert_relative_eq!(diag.epsilon, 0.4, max_relative = 1e-12);
        let diag = validate_regime(2e-4, 100.0, 10000.0, 1.0);
        assert_relative_eq!(diag.epsilon, 0.2, max_relative = 1e-12);
        assert!(diag.valid());
    }

    #[test]
    fn covariance_kernel_limits() {
        assert_relative_eq!(covariance_c(0.0).unwrap(), 1.0, epsilon = 1e-14);
        // Asymptotic tail ~ sqrt(pi/2)/r at r = 100, within 1%.
        let c100 = covariance_c(100.0).unwrap();
        assert_relative_eq!(c100, (PI / 2.0).sqrt() / 100.0, max_relative = 0.01);
        // Small-r expansion 1 - r^2/6 at r = 0.1, within 1e-4.
        let c01 = covariance_c(0.1).unwrap();
        assert!((c01 - (1.0 - 0.01 / 6.0)).abs() < 1e-4);
        // Monotone nonincreasing.
        let mut prev = 1.0;
        for k in 1..200 {
            let c = covariance_c(k as f64 * 0.05).unwrap();
            assert!(c <= prev + 1e-14);
            prev = c;
        }
        assert!(covariance_c(-1.0).is_err());
    }

    #[test]
    fn decoherence_reference_values() {
        // In internal units, Omega_d ~ 0.2 / eps and X_d ~ 0.35 l / eps.
        let eps = 0.2;
        let l: f64 = 100.0;
        let big_l = 10000.0;
        let sigma = eps / (l * big_l).sqrt();
        let tc = tau_c(sigma, l, big_l, C0_INTERNAL);
        let (omega_d, x_d) = decoherence_params(tc, l, 1.0);
        assert_relative_eq!(omega_d, 0.2 / eps, max_relative = 0.01);
        assert_relative_eq!(x_d, 0.35 * l / eps, max_relative = 0.01);
        // Doubling tau_c halves both.
        let (o2, x2) = decoherence_params(2.0 * tc, l, 1.0);
        assert_relative_eq!(o2, omega_d / 2.0, max_relative = 1e-12);
        assert_relative_eq!(x2, x_d / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn exp_cross_moment_limits() {
        let tc = 0.8;
        let l = 5.0;
        // Identical phases cancel.
        let m = moment_exp_cross(1.0, 1.0, 0.0, tc, l).unwrap();
        assert_relative_eq!(m.re, 1.0, epsilon = 1e-14);
        // Full decoherence floor as offset -> infinity.
        let m = moment_exp_cross(1.0, 1.0, 1e9 * l, tc, l).unwrap();
        assert_relative_eq!(m.re, (-tc * tc).exp(), max_relative = 1e-6);
    }

    #[test]
    fn green_product_moment_degenerate_cases() {
        let params = RandomPhaseParams { sigma: 2e-4, corr_len: 100.0, range: 10000.0 };
        let x = Pos::new(10.0, 0.0);
        let y = Pos::new(0.0, 10000.0);
        let (mean, var) = moment_green_product(&x, &x, &y, 1.0, 1.0, &params).unwrap();
        assert!(var.abs() < 1e-30);
        let g0 = green_homogeneous(&x, &y, 1.0).unwrap();
        assert_relative_eq!(mean.re, g0.norm_sqr(), max_relative = 1e-12);
        assert!(mean.im.abs() < 1e-20);
        // Single-element mean ratio |E G| / |G0| = exp(-omega^2 tau^2 / 2).
        let tc = params.tau_c();
        let ratio = moment_exp_cross(1.0, 0.0, 0.0, tc, params.corr_len).unwrap().re;
        // omega' = 0 collapses the formula to exp(-omega^2 tau^2 / 2).
        assert_relative_eq!(ratio, (-tc * tc / 2.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn regime_warnings_fire() {
        let (l, big_l): (f64, f64) = (100.0, 10000.0);
        let sigma0 = 1.0 / (l * big_l).sqrt();
        assert!((validate_regime(sigma0, l, big_l, 1.0).epsilon - 1.0).abs() < 1e-12);
        let diag = validate_regime(10.0 * sigma0, l, big_l, 1.0);
        assert!(!diag.valid());
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.0)).abs() < 1e-15);
        assert_relative_eq!(erf(1.0), 0.842_700_792_949_714_9, max_relative = 1e-10);
        assert_relative_eq!(erf(2.0), 0.995_322_265_018_952_7, max_relative = 1e-10);
        assert_relative_eq!(erf(-1.0), -0.842_700_792_949_714_9, max_relative = 1e-10);
        assert_relative_eq!(erf(5.0), 1.0, epsilon = 1e-7);
    }
}
