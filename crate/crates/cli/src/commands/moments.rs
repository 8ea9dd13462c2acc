use holoarray::io::write_moment_report;
use holoarray::medium::moments::{estimate_moments, MomentProbe};
use holoarray::Result;
use std::path::Path;

pub fn run(n: usize, seed: u64, epsilon: f64, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let probe = MomentProbe::desk_scale(epsilon);
    let report = estimate_moments(&probe, n, seed)?;
    write_moment_report(&out.join("moments.csv"), &report)?;

    println!(
        "moments: epsilon = {:.3}, tau_c = {:.4}, omega_d = {:.4}, x_d = {:.4}",
        report.epsilon, report.tau_c, report.omega_d, report.x_d
    );
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    println!("{:<24} {:>14} {:>14} {:>12} {:>8}", "quantity", "theory", "estimate", "stderr", "z");
    for row in &report.rows {
        println!(
            "{:<24} {:>14.6e} {:>14.6e} {:>12.3e} {:>8.3}",
            row.quantity, row.theory, row.estimate, row.stderr, row.z
        );
    }
    let verdict = if report.all_within(3.0) { "all within 3 standard errors" } else { "DEVIATIONS above 3 standard errors" };
    println!("moments: {verdict} (n = {n}, max |z| = {:.3})", report.max_abs_z());
    Ok(())
}
