//! Simulates one bundled scenario and writes its trajectory CSV.
//!
//! `cargo run --example simulate_golden -- g3_slow_variation out.csv`

use dual_adapt::cli::csv_out::write_csv;
use dual_adapt::{golden, simulator::run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "g1_zero_uncertainty".into());
    let out = args.next().unwrap_or_else(|| format!("{name}.csv"));
    let cfg = golden::load(&name)?;
    let log = run_scenario(&cfg)?;
    write_csv(&log, out.as_ref())?;
    let last = log.samples.last().expect("non-empty log");
    println!(
        "{name}: {} samples to {out}; ‖e(t_end)‖ = {:.3e}, max ‖Ŵ‖ = {:.4}",
        log.samples.len(),
        last.e.norm(),
        log.maxima.w_hat_norm
    );
    Ok(())
}
