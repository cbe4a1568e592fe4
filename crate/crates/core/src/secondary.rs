//! Secondary estimate `Ŵ*` of the nominal parameter: two layers of
//! first-order filters, an initial-excitation monitor with a one-time
//! snapshot, and a three-term prediction-error drive.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{min_eigen_sym, Mat, Vector};
use crate::primary::{gamma_projection, ProjectionSet};

/// First- and second-layer filter states.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub e_f: Vector,
    pub u_f: Vector,
    pub phi_f: Vector,
    pub phi_ff: Mat,
    pub u_ff: Mat,
    /// Tracking error at `t0`, used by the integration-by-parts form of `g`.
    pub e0: Vector,
    pub t0: f64,
}

impl FilterBank {
    /// All filters at rest at `t0`.
    pub fn new(n: usize, n_u: usize, n_w: usize, e0: Vector, t0: f64) -> Self {
        Self {
            e_f: Vector::zeros(n),
            u_f: Vector::zeros(n_u),
            phi_f: Vector::zeros(n_w),
            phi_ff: Mat::zeros(n_w, n_w),
            u_ff: Mat::zeros(n_u, n_w),
            e0,
            t0,
        }
    }
}

/// Time derivatives of the first-layer filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstLayerDerivs {
    pub e_f: Vector,
    pub u_f: Vector,
    pub phi_f: Vector,
}

pub fn first_layer_derivs(
    bank: &FilterBank,
    e: &Vector,
    u_ad: &Vector,
    phi: &Vector,
    p_f: f64,
) -> FirstLayerDerivs {
    FirstLayerDerivs {
        e_f: e - &bank.e_f * p_f,
        u_f: u_ad - &bank.u_f * p_f,
        phi_f: phi - &bank.phi_f * p_f,
    }
}

/// Filtered error derivative without differentiating `e`:
/// `g = e − exp(−p_f(t−t0)) e0 − p_f e_f`.
pub fn compute_g(e: &Vector, e0: &Vector, e_f: &Vector, t: f64, t0: f64, p_f: f64) -> Vector {
    e - e0 * (-p_f * (t - t0)).exp() - e_f * p_f
}

/// `h = B̄(g − A_m e_f)` with `B̄ = (BᵀB)⁻¹Bᵀ` passed precomputed.
pub fn compute_h(g: &Vector, e_f: &Vector, b_bar: &Mat, a_m: &Mat) -> Vector {
    b_bar * (g - a_m * e_f)
}

/// `(Φ̇_ff, u̇_ff)`.
pub fn second_layer_derivs(bank: &FilterBank, h: &Vector, p_ff: f64) -> (Mat, Mat) {
    let phi_ff_dot = &bank.phi_f * bank.phi_f.transpose() - &bank.phi_ff * p_ff;
    let u_ff_dot = (h + &bank.u_f) * bank.phi_f.transpose() - &bank.u_ff * p_ff;
    (phi_ff_dot, u_ff_dot)
}

/// When the excitation switch `s(t)` turns on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IePolicy {
    /// `s = 1` from `t0 + t_ie` on.
    FixedWindow { t_ie: f64 },
    /// `s = 1` once `λ_min(Φ_ff) ≥ gamma_ie`.
    OnlineThreshold { gamma_ie: f64 },
}

/// Frozen second-layer filters at activation.
#[derive(Debug, Clone, PartialEq)]
pub struct IeSnapshot {
    pub t: f64,
    pub phi_ff: Mat,
    pub u_ff: Mat,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IeMonitor {
    pub policy: IePolicy,
    snapshot: Option<IeSnapshot>,
}

impl IeMonitor {
    pub fn new(policy: IePolicy) -> Self {
        Self {
            policy,
            snapshot: None,
        }
    }

    /// The switching signal `s(t)`.
    pub fn s(&self) -> bool {
        self.snapshot.is_some()
    }

    pub fn snapshot(&self) -> Option<&IeSnapshot> {
        self.snapshot.as_ref()
    }

    /// Whether the switching condition holds for `bank` at time `t`. Always
    /// false once the snapshot is taken.
    pub fn fires(&self, bank: &FilterBank, t: f64) -> Result<bool> {
        if self.snapshot.is_some() {
            return Ok(false);
        }
        Ok(match self.policy {
            IePolicy::FixedWindow { t_ie } => t >= bank.t0 + t_ie,
            IePolicy::OnlineThreshold { gamma_ie } => min_eigen_sym(&bank.phi_ff)? >= gamma_ie,
        })
    }

    /// Freezes the snapshot at `t`. No-op if already active.
    pub fn activate(&mut self, bank: &FilterBank, t: f64) -> Result<Option<&IeSnapshot>> {
        if self.snapshot.is_some() {
            return Ok(None);
        }
        self.snapshot = Some(IeSnapshot {
            t,
            phi_ff: bank.phi_ff.clone(),
            u_ff: bank.u_ff.clone(),
            lambda_min: min_eigen_sym(&bank.phi_ff)?,
        });
        Ok(self.snapshot.as_ref())
    }

    /// Checks the condition at `t` and activates if it holds. Returns the
    /// snapshot on the call where `s` flips to 1.
    pub fn step(&mut self, bank: &FilterBank, t: f64) -> Result<Option<&IeSnapshot>> {
        if !self.fires(bank, t)? {
            return Ok(None);
        }
        self.activate(bank, t)
    }
}

/// The three prediction-error terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTerms {
    pub c_l: Mat,
    pub c_ll: Mat,
    pub c_ie: Option<Mat>,
}

pub fn drive_terms(w_hat_star: &Mat, bank: &FilterBank, mon: &IeMonitor, h: &Vector) -> DriveTerms {
    let w_t = w_hat_star.transpose();
    let c_l = -(&bank.phi_f * (&w_t * &bank.phi_f - (h + &bank.u_f)).transpose());
    let c_ll = -(&w_t * &bank.phi_ff - &bank.u_ff).transpose();
    let c_ie = mon
        .snapshot()
        .map(|snap| -(&w_t * &snap.phi_ff - &snap.u_ff).transpose());
    DriveTerms { c_l, c_ll, c_ie }
}

/// `y* = γ₁C_l + γ₂C_ll + γ₃ s C_IE`; `C_IE` is only evaluated once `s = 1`.
pub fn drive_signal_ystar(
    w_hat_star: &Mat,
    bank: &FilterBank,
    mon: &IeMonitor,
    h: &Vector,
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
) -> Mat {
    let terms = drive_terms(w_hat_star, bank, mon, h);
    let mut y = terms.c_l * gamma1 + terms.c_ll * gamma2;
    if let Some(c_ie) = terms.c_ie {
        y += c_ie * gamma3;
    }
    y
}

/// Gains used by the secondary update law.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryGains {
    pub gamma_w_star: Mat,
    pub set: ProjectionSet,
    pub projection: bool,
}

/// `dŴ*/dt = Proj_Γ_W*(Ŵ*, y*, f*)`.
pub fn secondary_update(w_hat_star: &Mat, y_star: &Mat, gains: &SecondaryGains) -> Mat {
    if !gains.projection {
        return &gains.gamma_w_star * y_star;
    }
    let (f, grad) = gains.set.f(w_hat_star);
    gamma_projection(w_hat_star, y_star, f, &grad, &gains.gamma_w_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{left_pseudoinverse, rk4_step};

    fn v(d: &[f64]) -> Vector {
        Vector::from_column_slice(d)
    }

    #[test]
    fn first_layer_examples() {
        let bank = FilterBank::new(2, 1, 2, Vector::zeros(2), 0.0);
        let d = first_layer_derivs(
            &bank,
            &Vector::zeros(2),
            &Vector::zeros(1),
            &Vector::zeros(2),
            2.0,
        );
        assert_eq!(d.e_f, Vector::zeros(2));
        assert_eq!(d.u_f, Vector::zeros(1));
        assert_eq!(d.phi_f, Vector::zeros(2));
        let d = first_layer_derivs(
            &bank,
            &Vector::zeros(2),
            &Vector::zeros(1),
            &v(&[1.0, 0.0]),
            1.0,
        );
        assert_eq!(d.phi_f, v(&[1.0, 0.0]));
    }

    #[test]
    fn first_layer_settles_to_dc_gain() {
        let p_f: f64 = 2.0;
        let c = v(&[1.0, -3.0]);
        let mut phi_f = Vector::zeros(2);
        let dt = 1e-3;
        let steps = (10.0 / p_f / dt).round() as usize;
        for k in 0..steps {
            phi_f = rk4_step(|s, _| &c - s * p_f, &phi_f, k as f64 * dt, dt).unwrap();
        }
        let target = &c / p_f;
        assert!((&phi_f - &target).norm() <= 1e-3 * target.norm());
    }

    #[test]
    fn g_vanishes_at_start_and_for_constant_error() {
        let e0 = v(&[0.4, -1.0]);
        assert_eq!(
            compute_g(&e0, &e0, &Vector::zeros(2), 3.0, 3.0, 1.5),
            Vector::zeros(2)
        );
        // Constant e: e_f(t) = e(1 - exp(-p t))/p, so g → 0.
        let p_f: f64 = 1.5;
        let t: f64 = 30.0;
        let e_f = &e0 * ((1.0 - (-p_f * t).exp()) / p_f);
        assert!(compute_g(&e0, &e0, &e_f, t, 0.0, p_f).amax() < 1e-15);
    }

    #[test]
    fn g_matches_filtered_derivative_oracle() {
        // e(t) = (sin 2t + 1, t e^{-t}); integrate ġ = −p g + ė alongside ė_f.
        let p_f = 1.3;
        let e = |t: f64| v(&[(2.0 * t).sin() + 1.0, t * (-t).exp()]);
        let e_dot = |t: f64| v(&[2.0 * (2.0 * t).cos(), (1.0 - t) * (-t).exp()]);
        let mut state = Vector::zeros(4);
        let dt = 1e-3;
        let e0 = e(0.0);
        for k in 0..5000 {
            let t = k as f64 * dt;
            state = rk4_step(
                |s, tk| {
                    let (ef, g) = (s.rows(0, 2), s.rows(2, 2));
                    let mut d = Vector::zeros(4);
                    d.rows_mut(0, 2).copy_from(&(e(tk) - ef * p_f));
                    d.rows_mut(2, 2).copy_from(&(e_dot(tk) - g * p_f));
                    d
                },
                &state,
                t,
                dt,
            )
            .unwrap();
            let tk = t + dt;
            let g_alg = compute_g(&e(tk), &e0, &state.rows(0, 2).into_owned(), tk, 0.0, p_f);
            assert!((g_alg - state.rows(2, 2)).amax() < 1e-6);
        }
    }

    #[test]
    fn h_examples() {
        let a_m = Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let b_bar = left_pseudoinverse(&Mat::identity(2, 2)).unwrap();
        assert_eq!(
            compute_h(&Vector::zeros(2), &Vector::zeros(2), &b_bar, &a_m),
            Vector::zeros(2)
        );
        let g = v(&[0.5, -0.25]);
        let e_f = v(&[1.0, 2.0]);
        assert_eq!(compute_h(&g, &e_f, &b_bar, &a_m), &g - &a_m * &e_f);
        let b = Mat::from_column_slice(2, 1, &[0.0, 2.0]);
        let b_bar = left_pseudoinverse(&b).unwrap();
        // B̄ = [0, 1/2]; g − A_m e_f = (0.5 − 2, −0.25 + 2 + 6).
        let h = compute_h(&g, &e_f, &b_bar, &a_m);
        assert!((h[0] - 7.75 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_layer_examples() {
        let mut bank = FilterBank::new(2, 1, 2, Vector::zeros(2), 0.0);
        bank.phi_ff = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (d_phi, _) = second_layer_derivs(&bank, &v(&[0.0]), 0.5);
        assert_eq!(d_phi, -&bank.phi_ff * 0.5);
        bank.phi_f = v(&[0.3, -0.7]);
        bank.u_f = v(&[0.2]);
        let (d_phi, d_u) = second_layer_derivs(&bank, &v(&[1.0]), 0.5);
        assert_eq!(d_phi, d_phi.transpose());
        assert_eq!(
            d_u,
            Mat::from_row_slice(1, 2, &[1.2 * 0.3, 1.2 * -0.7]) - &bank.u_ff * 0.5
        );
    }

    #[test]
    fn window_policy_switches_at_boundary() {
        let bank = FilterBank::new(1, 1, 1, Vector::zeros(1), 0.0);
        let mut mon = IeMonitor::new(IePolicy::FixedWindow { t_ie: 2.0 });
        assert!(mon.step(&bank, 1.999).unwrap().is_none());
        assert!(!mon.s());
        assert!(mon.step(&bank, 2.0).unwrap().is_some());
        assert!(mon.s());
        assert_eq!(mon.snapshot().unwrap().t, 2.0);
        // Monotone and frozen.
        let mut later = bank.clone();
        later.phi_ff[(0, 0)] = 5.0;
        assert!(mon.step(&later, 3.0).unwrap().is_none());
        assert_eq!(mon.snapshot().unwrap().phi_ff[(0, 0)], 0.0);
    }

    #[test]
    fn threshold_policy_needs_full_rank() {
        let mut bank = FilterBank::new(2, 1, 2, Vector::zeros(2), 0.0);
        let mut mon = IeMonitor::new(IePolicy::OnlineThreshold { gamma_ie: 1e-3 });
        // Rank-one Gram matrix from a fixed direction never activates.
        let dir = v(&[0.6, 0.8]);
        bank.phi_ff = &dir * dir.transpose() * 50.0;
        assert!(mon.step(&bank, 1.0).unwrap().is_none());
        bank.phi_ff += Mat::identity(2, 2) * 2e-3;
        let snap = mon.step(&bank, 2.0).unwrap().unwrap();
        assert!((snap.lambda_min - 2e-3).abs() < 1e-12);
        assert_eq!(snap.t, 2.0);
    }

    fn consistent_bank(w_star: &Mat) -> (FilterBank, Vector) {
        // Filters consistent with the algebraic identities when δ_W ≡ 0:
        // h + u_f = W*ᵀφ_f and u_ff = W*ᵀΦ_ff.
        let mut bank = FilterBank::new(2, 1, 2, Vector::zeros(2), 0.0);
        bank.phi_f = v(&[0.4, -1.2]);
        bank.u_f = v(&[0.3]);
        bank.phi_ff = Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        bank.u_ff = w_star.transpose() * &bank.phi_ff;
        let h = w_star.transpose() * &bank.phi_f - &bank.u_f;
        (bank, h)
    }

    #[test]
    fn ystar_vanishes_at_truth() {
        let w_star = Mat::from_column_slice(2, 1, &[0.7, -0.2]);
        let (bank, h) = consistent_bank(&w_star);
        let mut mon = IeMonitor::new(IePolicy::FixedWindow { t_ie: 1.0 });
        mon.step(&bank, 1.0).unwrap();
        let terms = drive_terms(&w_star, &bank, &mon, &h);
        assert!(terms.c_l.amax() < 1e-15);
        assert!(terms.c_ll.amax() < 1e-15);
        assert!(terms.c_ie.unwrap().amax() < 1e-15);
        assert!(drive_signal_ystar(&w_star, &bank, &mon, &h, 1.0, 2.0, 3.0).amax() < 1e-15);
    }

    #[test]
    fn ystar_before_activation_has_two_terms() {
        let w_star = Mat::from_column_slice(2, 1, &[0.7, -0.2]);
        let (bank, h) = consistent_bank(&w_star);
        let w_hat_star = Mat::from_column_slice(2, 1, &[0.1, 0.4]);
        let mon = IeMonitor::new(IePolicy::OnlineThreshold { gamma_ie: 10.0 });
        let terms = drive_terms(&w_hat_star, &bank, &mon, &h);
        assert!(terms.c_ie.is_none());
        let y = drive_signal_ystar(&w_hat_star, &bank, &mon, &h, 1.5, 0.5, 9.0);
        assert_eq!(y, terms.c_l * 1.5 + terms.c_ll * 0.5);
    }

    #[test]
    fn ystar_matches_direct_formula() {
        let w_star = Mat::from_column_slice(2, 1, &[0.7, -0.2]);
        let (mut bank, h) = consistent_bank(&w_star);
        let mut mon = IeMonitor::new(IePolicy::FixedWindow { t_ie: 1.0 });
        mon.step(&bank, 1.0).unwrap();
        bank.phi_ff *= 1.3;
        let w_hat_star = Mat::from_column_slice(2, 1, &[0.1, 0.4]);
        let (g1, g2, g3) = (1.5, 0.5, 2.0);
        let y = drive_signal_ystar(&w_hat_star, &bank, &mon, &h, g1, g2, g3);
        // With W̃* = Ŵ* − W*: C_l = −φ_fφ_fᵀW̃*, C_ll = −Φ_ff Ŵ* + u_ffᵀ,
        // C_IE = −Φ(T)W̃*.
        let wt = &w_hat_star - &w_star;
        let snap = mon.snapshot().unwrap();
        let expected = -(&bank.phi_f * bank.phi_f.transpose() * &wt) * g1
            - (&bank.phi_ff * &w_hat_star - bank.u_ff.transpose()) * g2
            - (&snap.phi_ff * &wt) * g3;
        assert!((y - expected).amax() < 1e-14);
    }

    #[test]
    fn secondary_update_cases() {
        let gains = SecondaryGains {
            gamma_w_star: Mat::identity(2, 2) * 2.0,
            set: ProjectionSet::new(1.0, 0.1),
            projection: true,
        };
        let inside = Mat::from_column_slice(2, 1, &[0.1, 0.1]);
        let y = Mat::from_column_slice(2, 1, &[1.0, -1.0]);
        assert_eq!(secondary_update(&inside, &y, &gains), &y * 2.0);
        let edge = Mat::from_column_slice(2, 1, &[0.0, 1.1]);
        let radial = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(secondary_update(&edge, &radial, &gains).amax() < 1e-12);
        let mixed = Mat::from_column_slice(2, 1, &[0.5, 1.0]);
        let out = secondary_update(&edge, &mixed, &gains);
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
    }
}
