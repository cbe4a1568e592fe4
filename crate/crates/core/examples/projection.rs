//! Integrates Θ̇ = Proj_Γ(Θ, y) under a constant outward drive and shows the
//! norm saturating at α + ε, compared with the unprojected law.

use dual_adapt::numerics::Mat;
use dual_adapt::primary::{gamma_projection, ProjectionSet};

fn main() {
    let set = ProjectionSet::new(1.0, 0.1);
    let gamma = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
    let y = Mat::from_column_slice(2, 1, &[1.0, 0.5]);
    let dt = 1e-3;

    let mut projected = Mat::zeros(2, 1);
    let mut free = Mat::zeros(2, 1);
    println!(
        "{:>6} {:>12} {:>12} {:>8}",
        "t", "‖Θ‖ proj", "‖Θ‖ free", "f"
    );
    for k in 0..=2000 {
        if k % 200 == 0 {
            let (f, _) = set.f(&projected);
            println!(
                "{:>6.2} {:>12.6} {:>12.6} {:>8.4}",
                k as f64 * dt,
                projected.norm(),
                free.norm(),
                f
            );
        }
        let (f, grad) = set.f(&projected);
        projected += gamma_projection(&projected, &y, f, &grad, &gamma) * dt;
        free += &gamma * &y * dt;
    }
    println!("outer radius α + ε = {:.6}", set.radius());
}
