//! Watches the excitation monitor on the constant-parameter scenario:
//! λ_min(Φ_ff) over time, the switching instant and the filter identity
//! residuals.

use dual_adapt::{golden, simulator::run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = golden::load("g2_constant_ie")?;
    let log = run_scenario(&cfg)?;
    println!(
        "{:>6} {:>12} {:>2} {:>10} {:>10}",
        "t", "λ_min(Φ_ff)", "s", "layer1", "layer2"
    );
    for s in log.samples.iter().step_by(50) {
        println!(
            "{:>6.2} {:>12.5e} {:>2} {:>10.2e} {:>10.2e}",
            s.t, s.lambda_min_phi_ff, s.s as u8, s.residual_layer1, s.residual_layer2
        );
    }
    match &log.activation {
        Some(snap) => println!(
            "IE activated at t = {:.6} with λ_min(Φ_ff) = {:.5}\nΦ_ff(T) = {}",
            snap.t, snap.lambda_min, snap.phi_ff
        ),
        None => println!("IE never activated"),
    }
    let last = log.samples.last().expect("non-empty log");
    println!(
        "Ŵ*(t_end)ᵀ = {}W*ᵀ = {}",
        last.w_hat_star.transpose(),
        cfg.truth.w_star.transpose()
    );
    Ok(())
}
