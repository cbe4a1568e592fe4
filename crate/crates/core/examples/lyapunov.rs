//! Solves AₘᵀP + PAₘ + Q = 0 for the second-order reference model and checks
//! the result.

use dual_adapt::numerics::{max_eigen_sym, min_eigen_sym, solve_lyapunov, Mat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a_m = Mat::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -2.8]);
    let q = Mat::identity(2, 2);
    let p = solve_lyapunov(&a_m, &q)?;
    let residual = a_m.transpose() * &p + &p * &a_m + &q;
    println!("A_m = {a_m}");
    println!("P = {p}");
    println!("residual ‖AₘᵀP + PAₘ + Q‖ = {:.3e}", residual.norm());
    println!(
        "λ(P) ∈ [{:.6}, {:.6}]",
        min_eigen_sym(&p)?,
        max_eigen_sym(&p)?
    );

    let unstable = Mat::from_row_slice(2, 2, &[0.0, 1.0, 4.0, -1.0]);
    match solve_lyapunov(&unstable, &q) {
        Ok(_) => println!("unexpected solution for a non-Hurwitz matrix"),
        Err(e) => println!("non-Hurwitz A_m rejected: {e}"),
    }
    Ok(())
}
