//! Control law `u = K_xᵀx + K_rᵀr − Ŵᵀφ(x)` and the gain set.

use crate::error::{Error, Result};
use crate::numerics::{left_pseudoinverse, require_spd, solve_lyapunov, spd_inverse, Mat, Vector};
use crate::plant::{PlantConfig, ReferenceConfig};

/// Absolute residual allowed on the matching conditions.
pub const MATCHING_TOL: f64 = 1e-10;

/// Controller and adaptation gains. `P` is solved from `A_m` and `Q_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub k_x: Mat,
    pub k_r: Mat,
    pub gamma_w: Mat,
    pub gamma_w_star: Mat,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub p_f: f64,
    pub p_ff: f64,
    pub eps: f64,
    pub eps_star: f64,
    pub q_m: Mat,
    pub p: Mat,
    pub gamma_w_inv: Mat,
    pub gamma_w_star_inv: Mat,
}

/// Tunable inputs to [`GainSet::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct GainInputs {
    pub gamma_w: Mat,
    pub gamma_w_star: Mat,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub p_f: f64,
    pub p_ff: f64,
    pub eps: f64,
    pub eps_star: f64,
    pub q_m: Mat,
}

impl GainSet {
    pub fn new(
        inputs: GainInputs,
        plant: &PlantConfig,
        reference: &ReferenceConfig,
    ) -> Result<Self> {
        let GainInputs {
            gamma_w,
            gamma_w_star,
            sigma,
            gamma1,
            gamma2,
            gamma3,
            p_f,
            p_ff,
            eps,
            eps_star,
            q_m,
        } = inputs;
        let n_w = plant.n_w;
        for (key, m) in [
            ("gains.Gamma_W", &gamma_w),
            ("gains.Gamma_W_star", &gamma_w_star),
        ] {
            if m.shape() != (n_w, n_w) {
                return Err(Error::invalid(key, format!("must be {n_w}x{n_w}")));
            }
            require_spd(m).map_err(|e| Error::invalid(key, e.to_string()))?;
        }
        for (key, value) in [
            ("gains.sigma", sigma),
            ("gains.gamma1", gamma1),
            ("gains.gamma2", gamma2),
            ("gains.gamma3", gamma3),
            ("gains.p_f", p_f),
            ("gains.p_ff", p_ff),
            ("gains.epsilon", eps),
            ("gains.epsilon_star", eps_star),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(
                    key,
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        if q_m.shape() != (plant.n, plant.n) {
            return Err(Error::invalid(
                "gains.Q_m",
                format!("must be {n}x{n}", n = plant.n),
            ));
        }
        require_spd(&q_m).map_err(|e| Error::invalid("gains.Q_m", e.to_string()))?;
        let p = solve_lyapunov(&reference.a_m, &q_m)
            .map_err(|e| Error::invalid("reference.A_m", e.to_string()))?;
        let (k_x, k_r) = matching_gains(plant, reference)?;
        let gamma_w_inv = spd_inverse(&gamma_w)?;
        let gamma_w_star_inv = spd_inverse(&gamma_w_star)?;
        Ok(Self {
            k_x,
            k_r,
            gamma_w,
            gamma_w_star,
            sigma,
            gamma1,
            gamma2,
            gamma3,
            p_f,
            p_ff,
            eps,
            eps_star,
            q_m,
            p,
            gamma_w_inv,
            gamma_w_star_inv,
        })
    }
}

/// Least-squares `K_x`, `K_r` from `A = A_m − BK_xᵀ`, `B_m = BK_rᵀ`, with the
/// matching residual required below [`MATCHING_TOL`].
pub fn matching_gains(plant: &PlantConfig, reference: &ReferenceConfig) -> Result<(Mat, Mat)> {
    if reference.a_m.shape() != plant.a.shape() {
        return Err(Error::invalid("reference.A_m", "shape must match plant.A"));
    }
    let b_bar = left_pseudoinverse(&plant.b)?;
    let k_x_t = &b_bar * (&reference.a_m - &plant.a);
    let k_r_t = &b_bar * &reference.b_m;
    let res_x = (&reference.a_m - &plant.b * &k_x_t - &plant.a).amax();
    if res_x > MATCHING_TOL {
        return Err(Error::invalid(
            "plant.A",
            format!("matching condition A = A_m − BK_xᵀ has residual {res_x:e}"),
        ));
    }
    let res_r = (&plant.b * &k_r_t - &reference.b_m).amax();
    if res_r > MATCHING_TOL {
        return Err(Error::invalid(
            "reference.B_m",
            format!("matching condition B_m = BK_rᵀ has residual {res_r:e}"),
        ));
    }
    Ok((k_x_t.transpose(), k_r_t.transpose()))
}

/// Output of the control law.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub u: Vector,
    pub u_ad: Vector,
    pub phi: Vector,
}

/// `u_ad = Ŵᵀφ(x)`, `u = K_xᵀx + K_rᵀr − u_ad`.
pub fn control(
    x: &Vector,
    r: &Vector,
    w_hat: &Mat,
    gains: &GainSet,
    plant: &PlantConfig,
) -> ControlSignal {
    let phi = plant.phi(x);
    let u_ad = w_hat.transpose() * &phi;
    let u = gains.k_x.transpose() * x + gains.k_r.transpose() * r - &u_ad;
    ControlSignal { u, u_ad, phi }
}
