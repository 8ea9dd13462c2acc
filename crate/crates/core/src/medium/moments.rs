//! Monte Carlo verification of the random-phase moment formulas.
//!
//! Each run draws `n` independent field realizations (seed xor realization
//! index), evaluates the travel-time perturbations at a probe pair of array
//! points against a probe window point, and compares sample moments with the
//! closed forms. Results carry plain z-scores: `(estimate - theory) / se`.

use super::{
    green_homogeneous, moment_green_product, nu, sample_mu_field, validate_regime, FieldSpec,
    Medium, RandomPhaseParams,
};
use crate::scene::Pos;
use crate::{Error, Result, C64};
use rayon::prelude::*;

/// Probe layout for the moment estimators: two array points separated by
/// `offset`, one window point at range `range`, frequencies `omega` and
/// `omega_prime`.
#[derive(Debug, Clone)]
pub struct MomentProbe {
    pub sigma: f64,
    pub corr_len: f64,
    pub range: f64,
    pub offset: f64,
    pub omega: f64,
    pub omega_prime: f64,
}

impl MomentProbe {
    /// Default desk-scale probe: `L = 100 l`, offset `0.1 l`, a 5% frequency
    /// split, strength `epsilon`.
    pub fn desk_scale(epsilon: f64) -> Self {
        let corr_len: f64 = 5.0;
        let range = 100.0 * corr_len;
        let sigma = epsilon / (corr_len * range).sqrt();
        Self {
            sigma,
            corr_len,
            range,
            offset: 0.1 * corr_len,
            omega: 1.0,
            omega_prime: 0.95,
        }
    }

    fn x(&self) -> Pos {
        Pos::new(-self.offset / 2.0, 0.0)
    }

    fn x_prime(&self) -> Pos {
        Pos::new(self.offset / 2.0, 0.0)
    }

    fn y(&self) -> Pos {
        Pos::new(0.0, self.range)
    }

    fn params(&self) -> RandomPhaseParams {
        RandomPhaseParams { sigma: self.sigma, corr_len: self.corr_len, range: self.range }
    }

    fn field_spec(&self) -> Result<FieldSpec> {
        FieldSpec::covering(
            &[self.x(), self.x_prime()],
            &[self.y()],
            self.corr_len,
            self.corr_len / 4.0,
            3.0 * self.corr_len,
            6.0 * self.corr_len,
        )
    }
}

/// One theory-vs-estimate row.
#[derive(Debug, Clone)]
pub struct MomentRow {
    pub quantity: String,
    pub theory: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub z: f64,
}

impl MomentRow {
    fn new(quantity: &str, theory: f64, estimate: f64, stderr: f64, n: usize) -> Self {
        let z = if stderr > 0.0 { (estimate - theory) / stderr } else { 0.0 };
        Self { quantity: quantity.into(), theory, estimate, stderr, n, z }
    }
}

/// Full verification report: rows for every closed-form moment plus the
/// derived dimensionless parameters and regime warnings.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub n: usize,
    pub epsilon: f64,
    pub tau_c: f64,
    pub omega_d: f64,
    pub x_d: f64,
    pub warnings: Vec<String>,
}

impl MomentReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn all_within(&self, z_limit: f64) -> bool {
        self.rows.iter().all(|r| r.z.abs() <= z_limit)
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the Monte Carlo verification over `n` field realizations.
pub fn estimate_moments(probe: &MomentProbe, n: usize, seed: u64) -> Result<MomentReport> {
    if n < 100 {
        return Err(Error::Validation(format!(
            "moment verification needs at least 100 realizations, got {n}"
        )));
    }
    let spec = probe.field_spec()?;
    let x = probe.x();
    let xp = probe.x_prime();
    let y = probe.y();
    let params = probe.params();
    let tau = params.tau_c();
    let (omega_d, x_d) = params.decoherence();

    // nu pairs per realization, in realization order for determinism.
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|idx| {
            let field = sample_mu_field(&spec, seed ^ idx)?;
            let a = nu(&x, &y, &field, probe.sigma)?;
            let b = nu(&xp, &y, &field, probe.sigma)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();

    // Mean of nu: zero by construction of the field.
    let nus: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (m, se) = mean_and_se(&nus);
    rows.push(MomentRow::new("mean_nu", 0.0, m, se, n));

    // Covariance of nu at the probe offset: tau_c^2 C(offset / l).
    let prods: Vec<f64> = pairs.iter().map(|p| p.0 * p.1).collect();
    let (m, se) = mean_and_se(&prods);
    let theory = tau * tau * super::covariance_c(probe.offset / probe.corr_len)?;
    rows.push(MomentRow::new("cov_nu", theory, m, se, n));

    // Mean of exp(i omega nu): exp(-omega^2 tau^2 / 2).
    let phasor: Vec<C64> =
        pairs.iter().map(|p| C64::from_polar(1.0, probe.omega * p.0)).collect();
    let re: Vec<f64> = phasor.iter().map(|z| z.re).collect();
    let im: Vec<f64> = phasor.iter().map(|z| z.im).collect();
    let theory = (-probe.omega * probe.omega * tau * tau / 2.0).exp();
    let (m, se) = mean_and_se(&re);
    rows.push(MomentRow::new("mean_exp_re", theory, m, se, n));
    let (m, se) = mean_and_se(&im);
    rows.push(MomentRow::new("mean_exp_im", 0.0, m, se, n));

    // Cross moment exp(i omega nu - i omega' nu').
    let cross: Vec<C64> = pairs
        .iter()
        .map(|p| C64::from_polar(1.0, probe.omega * p.0 - probe.omega_prime * p.1))
        .collect();
    let theory = super::moment_exp_cross(
        probe.omega,
        probe.omega_prime,
        probe.offset,
        tau,
        probe.corr_len,
    )?
    .re;
    let re: Vec<f64> = cross.iter().map(|z| z.re).collect();
    let im: Vec<f64> = cross.iter().map(|z| z.im).collect();
    let (m, se) = mean_and_se(&re);
    rows.push(MomentRow::new("cross_exp_re", theory, m, se, n));
    let (m, se) = mean_and_se(&im);
    rows.push(MomentRow::new("cross_exp_im", 0.0, m, se, n));

    // Green's-function product: mean and variance.
    let g0 = green_homogeneous(&x, &y, probe.omega)?;
    let g0p = green_homogeneous(&xp, &y, probe.omega_prime)?;
    let products: Vec<C64> = cross.iter().map(|z| g0 * g0p.conj() * z).collect();
    let (mean_theory, var_theory) =
        moment_green_product(&x, &xp, &y, probe.omega, probe.omega_prime, &params)?;
    let re: Vec<f64> = products.iter().map(|z| z.re).collect();
    let im: Vec<f64> = products.iter().map(|z| z.im).collect();
    let (m, se) = mean_and_se(&re);
    rows.push(MomentRow::new("green_product_mean_re", mean_theory.re, m, se, n));
    let (m, se) = mean_and_se(&im);
    rows.push(MomentRow::new("green_product_mean_im", mean_theory.im, m, se, n));

    let mean_est = C64::new(
        products.iter().map(|z| z.re).sum::<f64>() / n as f64,
        products.iter().map(|z| z.im).sum::<f64>() / n as f64,
    );
    let sq_dev: Vec<f64> = products.iter().map(|z| (z - mean_est).norm_sqr()).collect();
    let (m, se) = mean_and_se(&sq_dev);
    rows.push(MomentRow::new("green_product_var", var_theory, m * n as f64 / (n as f64 - 1.0), se, n));

    let diag = validate_regime(probe.sigma, probe.corr_len, probe.range, 1.0);
    Ok(MomentReport {
        rows,
        n,
        epsilon: diag.epsilon,
        tau_c: tau,
        omega_d,
        x_d,
        warnings: diag.warnings,
    })
}

/// Convenience wrapper: sample mean of `G / G0` over `n` medium realizations
/// for a single path, used by tests of the first Green's-function moment.
pub fn mean_phase_factor(
    probe: &MomentProbe,
    n: usize,
    seed: u64,
) -> Result<(C64, f64)> {
    let spec = probe.field_spec()?;
    let x = probe.x();
    let y = probe.y();
    let factors: Vec<C64> = (0..n as u64)
        .into_par_iter()
        .map(|idx| {
            let field = sample_mu_field(&spec, seed ^ idx)?;
            let medium = Medium::RandomPhase { field, sigma: probe.sigma };
            let g = medium.green(&x, &y, probe.omega)?;
            let g0 = green_homogeneous(&x, &y, probe.omega)?;
            Ok(g / g0)
        })
        .collect::<Result<_>>()?;
    let mean = factors.iter().sum::<C64>() / n as f64;
    let var = factors.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n as f64 - 1.0);
    Ok((mean, (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_underpowered_runs() {
        let probe = MomentProbe::desk_scale(0.2);
        assert!(estimate_moments(&probe, 10, 1).is_err());
    }

    #[test]
    fn nu_variance_matches_tau_c_squared() {
        // Spec case: var(nu) = tau_c^2 C(0) at L = 100 l, within 3 SE.
        let mut probe = MomentProbe::desk_scale(0.2);
        probe.offset = 0.0;
        // offset 0 makes x and x' coincide; covariance row becomes variance.
        let report = estimate_moments(&probe, 2000, 424_242).unwrap();
        let row = report.rows.iter().find(|r| r.quantity == "cov_nu").unwrap();
        assert!(
            row.z.abs() <= 3.0,
            "variance z = {} (est {}, theory {})",
            row.z,
            row.estimate,
            row.theory
        );
    }

    #[test]
    fn first_green_moment_within_three_se() {
        let probe = MomentProbe::desk_scale(0.2);
        let (mean, se) = mean_phase_factor(&probe, 2000, 7_777).unwrap();
        let tau = probe.params().tau_c();
        let theory = (-probe.omega * probe.omega * tau * tau / 2.0).exp();
        assert!(
            (mean.re - theory).abs() <= 3.0 * se,
            "re = {}, theory = {theory}, se = {se}",
            mean.re
        );
        assert!(mean.im.abs() <= 3.0 * se, "im = {}, se = {se}", mean.im);
    }

    #[test]
    fn standard_errors_shrink_like_sqrt_n() {
        let probe = MomentProbe::desk_scale(0.2);
        let small = estimate_moments(&probe, 200, 99).unwrap();
        let large = estimate_moments(&probe, 800, 99).unwrap();
        let se_small = small.rows.iter().find(|r| r.quantity == "mean_nu").unwrap().stderr;
        let se_large = large.rows.iter().find(|r| r.quantity == "mean_nu").unwrap().stderr;
        let ratio = se_small / se_large;
        assert!((ratio - 2.0).abs() < 0.5, "se ratio = {ratio}");
    }
}
