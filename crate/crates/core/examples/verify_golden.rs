//! Runs every bundled scenario and prints its verification report.

use dual_adapt::{golden, simulator::run_scenario, verification::verify};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let only: Vec<String> = std::env::args().skip(1).collect();
    for (name, _) in golden::ALL {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let cfg = golden::load(name)?;
        let start = std::time::Instant::now();
        let log = run_scenario(&cfg)?;
        let elapsed = start.elapsed();
        let report = verify(&cfg, &log)?;
        println!(
            "== {name} ({:.2} s, pass = {})",
            elapsed.as_secs_f64(),
            report.pass
        );
        for w in &report.warnings {
            println!("  warning: {w}");
        }
        for c in &report.checks {
            println!(
                "  {:<22} {:<4} measured {:.4e} bound {:.4e}{}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.measured,
                c.bound,
                c.note
                    .as_deref()
                    .map(|n| format!(" ({n})"))
                    .unwrap_or_default()
            );
            if std::env::var_os("VERBOSE").is_some() {
                for (k, v) in &c.details {
                    println!("      {k} = {v:.6e}");
                }
            }
        }
        let b = &report.summary.bounds;
        println!(
            "  T = {:?}, lambda_min = {:?}, phi_bar = {:.3}, final |e| = {:.3e}, |W~| = {:.3e}, |W~*| = {:.3e}",
            b.activation_time,
            b.lambda_min_snapshot,
            b.phi_bar,
            report.summary.final_norm_e,
            report.summary.final_norm_w_tilde,
            report.summary.final_norm_w_tilde_star
        );
    }
    Ok(())
}
