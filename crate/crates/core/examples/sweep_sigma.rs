//! Sweeps the σ-modification gain on the slowly varying scenario and prints
//! the summary table written by the sweep runner.

use dual_adapt::cli::config::ConfigDocument;
use dual_adapt::cli::sweep::{run_sweep, PointOutcome};
use dual_adapt::golden;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = format!(
        "{}\n[sweep.parameters]\n\"gains.sigma\" = [0.25, 0.5, 1.0, 2.0]\n",
        golden::text("g3_slow_variation")?
    );
    let doc = ConfigDocument::parse(&text)?;
    let out = std::env::temp_dir().join("dual_adapt_sweep_sigma");
    let points = run_sweep(&doc, &out)?;
    for p in &points {
        let sigma = &p.params[0].1;
        match &p.outcome {
            PointOutcome::Report(r) => {
                println!(
                    "σ = {sigma:<5} pass = {:<5} final ‖W̃‖ = {:.4}, UUB radius {:.3}, uub check {}",
                    r.pass,
                    r.summary.final_norm_w_tilde,
                    r.summary.bounds.uub_radius,
                    r.check("uub")
                        .map_or("-", |c| if c.pass { "PASS" } else { "FAIL" })
                );
            }
            PointOutcome::Failed { message, .. } => println!("σ = {sigma}: {message}"),
        }
    }
    println!("summary: {}", out.join("summary.csv").display());
    Ok(())
}
