use dual_adapt::golden;
use dual_adapt::numerics::{solve_lyapunov, Mat, Vector};
use dual_adapt::primary::{convex_f, gamma_projection};
use dual_adapt::secondary::{second_layer_derivs, FilterBank};
use dual_adapt::simulator::run_scenario;
use proptest::prelude::*;

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| Mat::from_column_slice(rows, cols, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_never_points_outward(theta in mat(3, 2), y in mat(3, 2), m in mat(3, 3), alpha in 0.5f64..2.0) {
        let eps = 0.1 * alpha;
        let gamma = &m * m.transpose() + Mat::identity(3, 3) * 0.05;
        let (f, grad) = convex_f(&theta, alpha, eps);
        let p = gamma_projection(&theta, &y, f, &grad, &gamma);
        let tol = 1e-10 * (1.0 + grad.norm() * (gamma.norm() * y.norm() + p.norm()));
        let outward = (grad.transpose() * &p).trace();
        let raw = (grad.transpose() * &gamma * &y).trace();
        if f > 0.0 && raw > 0.0 {
            // The outward rate is scaled by (1 − f): zero on the outer boundary.
            prop_assert!((outward - (1.0 - f) * raw).abs() <= tol, "∇fᵀProj = {outward:e}");
            if f >= 1.0 {
                prop_assert!(outward <= tol);
            }
        } else {
            prop_assert!((p - &gamma * &y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn lyapunov_solution_is_spd(a in mat(3, 3), shift in 0.5f64..3.0) {
        // Shift the spectrum left of the imaginary axis.
        let radius = a.clone().symmetric_eigen().eigenvalues.abs().max() + a.norm();
        let a_m = a - Mat::identity(3, 3) * (radius + shift);
        let q = Mat::identity(3, 3);
        let p = solve_lyapunov(&a_m, &q).unwrap();
        let residual = a_m.transpose() * &p + &p * &a_m + &q;
        prop_assert!(residual.norm() <= 1e-9 * (1.0 + p.norm()));
        prop_assert!((&p - p.transpose()).norm() <= 1e-12 * p.norm());
        prop_assert!(p.symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn second_layer_keeps_phi_ff_psd(phis in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..200)) {
        // Euler on a random φ_f sequence: Φ_ff' = -p Φ_ff + φ_f φ_fᵀ stays PSD.
        let mut bank = FilterBank::new(2, 1, 3, Vector::zeros(2), 0.0);
        let dt = 0.01;
        for p in &phis {
            bank.phi_f = Vector::from_column_slice(p);
            let (d_phi_ff, d_u_ff) = second_layer_derivs(&bank, &Vector::zeros(1), 1.0);
            bank.phi_ff += d_phi_ff * dt;
            bank.u_ff += d_u_ff * dt;
            let min = bank.phi_ff.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!(min >= -1e-12 * (1.0 + bank.phi_ff.norm()));
        }
    }
}

#[test]
fn phi_ff_psd_along_goldens() {
    for (name, _) in golden::ALL {
        let log = run_scenario(&golden::load(name).unwrap()).unwrap();
        for s in &log.samples {
            let min = s.phi_ff.clone().symmetric_eigen().eigenvalues.min();
            assert!(
                min >= -1e-12 * (1.0 + s.phi_ff.norm()),
                "{name} t={}: {min:e}",
                s.t
            );
            assert!((&s.phi_ff - s.phi_ff.transpose()).norm() <= 1e-12 * (1.0 + s.phi_ff.norm()));
        }
    }
}

#[test]
fn halving_dt_changes_trajectory_little() {
    for name in ["g2_constant_ie", "g3_slow_variation"] {
        let coarse_cfg = golden::load(name).unwrap();
        let mut fine_cfg = coarse_cfg.clone();
        fine_cfg.integrator.dt /= 2.0;
        fine_cfg.log_every *= 2;
        let coarse = run_scenario(&coarse_cfg).unwrap();
        let fine = run_scenario(&fine_cfg).unwrap();
        assert_eq!(coarse.samples.len(), fine.samples.len());
        let mut worst: f64 = 0.0;
        for (a, b) in coarse.samples.iter().zip(&fine.samples) {
            assert!((a.t - b.t).abs() < 1e-9);
            for (x, y) in [(&a.x, &b.x), (&a.x_m, &b.x_m)] {
                worst = worst.max((x - y).norm() / (1.0 + y.norm()));
            }
            worst = worst.max((&a.w_hat - &b.w_hat).norm() / (1.0 + b.w_hat.norm()));
            worst = worst.max((&a.w_hat_star - &b.w_hat_star).norm() / (1.0 + b.w_hat_star.norm()));
        }
        assert!(worst <= 1e-5, "{name}: relative change {worst:e}");
    }
}

#[test]
fn nominal_estimate_collapses_after_activation() {
    let log = run_scenario(&golden::load("g2_constant_ie").unwrap()).unwrap();
    let t_act = log.activation_time().expect("activates");
    let at_act = log
        .samples
        .iter()
        .find(|s| s.t >= t_act)
        .unwrap()
        .w_tilde_star
        .norm();
    let end = log.samples.last().unwrap().w_tilde_star.norm();
    assert!(end < at_act / 10.0, "‖W̃*‖ {at_act:e} → {end:e}");
}

#[test]
fn oracle_disturbances_respect_their_bounds() {
    let cfg = golden::load("g3_slow_variation").unwrap();
    let log = run_scenario(&cfg).unwrap();
    let g = &cfg.design.gains;
    let d = cfg.truth.bounds.delta_bar;
    let phi_bar = log.maxima.phi;
    let f_bound = d * phi_bar / g.p_f;
    let ff_bound = d * phi_bar * phi_bar / (g.p_f * g.p_f * g.p_ff);
    assert!(
        log.maxima.delta_f <= f_bound * (1.0 + 1e-9),
        "{} > {f_bound}",
        log.maxima.delta_f
    );
    assert!(
        log.maxima.delta_ff <= ff_bound * (1.0 + 1e-9),
        "{} > {ff_bound}",
        log.maxima.delta_ff
    );
    assert!(log.maxima.w_norm <= cfg.truth.bounds.w_bar);

    // Constant truth: the oracle channels stay identically zero.
    let log = run_scenario(&golden::load("g2_constant_ie").unwrap()).unwrap();
    assert_eq!(log.maxima.delta_f, 0.0);
    assert_eq!(log.maxima.delta_ff, 0.0);
}

#[test]
fn seeded_random_estimates_are_reproducible() {
    let text = golden::text("g4_non_exciting")
        .unwrap()
        .replace("[initial]", "[initial]\nrandom_estimates = true\nseed = 7");
    let a = dual_adapt::cli::config::parse_config(&text).unwrap();
    let b = dual_adapt::cli::config::parse_config(&text).unwrap();
    assert_eq!(a.initial.w_hat0, b.initial.w_hat0);
    assert!(a.initial.w_hat0.norm() > 0.0);
    assert!(a.initial.w_hat0.norm() <= a.design.primary.set.alpha);
    let other =
        dual_adapt::cli::config::parse_config(&text.replace("seed = 7", "seed = 8")).unwrap();
    assert_ne!(a.initial.w_hat0, other.initial.w_hat0);
}
