//! Uncertain plant, reference model, reference input and the ground-truth
//! time-varying parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{min_eigen_sym, require_hurwitz, Mat, Vector};

/// Known regressor basis `φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regressor {
    /// `φ(x) = x`.
    Identity,
    /// `(1, x₁, x₂, |x₁|x₂, |x₂|x₂, x₁³)` for a two-state plant.
    WingRock,
    /// One monomial `Π xᵢ^kᵢ` per exponent row.
    CustomPolynomial { exponents: Vec<Vec<u32>> },
}

impl Regressor {
    /// Basis dimension for a plant with `n` states, or an error if the kind
    /// cannot be used with that state dimension.
    pub fn dim(&self, n: usize) -> Result<usize> {
        match self {
            Regressor::Identity => Ok(n),
            Regressor::WingRock if n == 2 => Ok(6),
            Regressor::WingRock => Err(Error::invalid(
                "plant.regressor",
                format!("wing_rock basis needs n = 2, plant has n = {n}"),
            )),
            Regressor::CustomPolynomial { exponents } => {
                if exponents.is_empty() {
                    return Err(Error::invalid("plant.regressor.exponents", "no monomials"));
                }
                if let Some(bad) = exponents.iter().find(|e| e.len() != n) {
                    return Err(Error::invalid(
                        "plant.regressor.exponents",
                        format!(
                            "monomial {bad:?} has {} exponents, plant has n = {n}",
                            bad.len()
                        ),
                    ));
                }
                Ok(exponents.len())
            }
        }
    }

    /// Evaluates the basis; dimensions are assumed already validated.
    pub fn eval(&self, x: &Vector) -> Vector {
        match self {
            Regressor::Identity => x.clone(),
            Regressor::WingRock => {
                let (x1, x2) = (x[0], x[1]);
                Vector::from_vec(vec![
                    1.0,
                    x1,
                    x2,
                    x1.abs() * x2,
                    x2.abs() * x2,
                    x1 * x1 * x1,
                ])
            }
            Regressor::CustomPolynomial { exponents } => Vector::from_iterator(
                exponents.len(),
                exponents.iter().map(|row| {
                    row.iter()
                        .zip(x.iter())
                        .map(|(&k, &xi)| xi.powi(k as i32))
                        .product::<f64>()
                }),
            ),
        }
    }
}

/// `φ(x)` with a dimension check against `n_w`.
pub fn regressor(x: &Vector, kind: &Regressor, n_w: usize) -> Result<Vector> {
    let dim = kind.dim(x.len())?;
    if dim != n_w {
        return Err(Error::invalid(
            "plant.regressor",
            format!("basis has dimension {dim}, expected n_w = {n_w}"),
        ));
    }
    Ok(kind.eval(x))
}

/// Plant `ẋ = Ax + B(u + Wᵀφ(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub a: Mat,
    pub b: Mat,
    pub regressor: Regressor,
    pub n: usize,
    pub n_u: usize,
    pub n_w: usize,
}

impl PlantConfig {
    pub fn new(a: Mat, b: Mat, regressor: Regressor) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::invalid(
                "plant.A",
                format!("must be square, got {}x{}", n, a.ncols()),
            ));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::invalid(
                "plant.B",
                format!(
                    "must have {n} rows and at least one column, got {}x{}",
                    b.nrows(),
                    b.ncols()
                ),
            ));
        }
        let n_u = b.ncols();
        let btb = b.transpose() * &b;
        let lmin = min_eigen_sym(&btb).map_err(|e| Error::invalid("plant.B", e.to_string()))?;
        if lmin <= 1e-12 * btb.norm().max(1.0) {
            return Err(Error::invalid(
                "plant.B",
                "must have full column rank (BᵀB is singular)",
            ));
        }
        let n_w = regressor.dim(n)?;
        Ok(Self {
            a,
            b,
            regressor,
            n,
            n_u,
            n_w,
        })
    }

    pub fn phi(&self, x: &Vector) -> Vector {
        self.regressor.eval(x)
    }
}

/// `ẋ = Ax + B(u + Wᵀφ(x))`.
pub fn plant_deriv(x: &Vector, u: &Vector, w: &Mat, cfg: &PlantConfig) -> Vector {
    let phi = cfg.phi(x);
    &cfg.a * x + &cfg.b * (u + w.transpose() * phi)
}

/// One channel of the external reference `r(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSignal {
    /// `0` before `start`, `amplitude` from `start` on.
    Step {
        amplitude: f64,
        #[serde(default)]
        start: f64,
    },
    /// `Σ aᵢ sin(ωᵢ t + ψᵢ)` with ω in rad/s.
    SumOfSinusoids {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        #[serde(default)]
        phases: Vec<f64>,
    },
    /// Linear sweep from `omega0` to `omega1` (rad/s) over `duration`, then
    /// held at `omega1`.
    Chirp {
        amplitude: f64,
        omega0: f64,
        omega1: f64,
        duration: f64,
    },
}

impl ReferenceSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ReferenceSignal::Step { amplitude, start } => {
                if t >= *start {
                    *amplitude
                } else {
                    0.0
                }
            }
            ReferenceSignal::SumOfSinusoids {
                amplitudes,
                frequencies,
                phases,
            } => amplitudes
                .iter()
                .zip(frequencies)
                .enumerate()
                .map(|(i, (a, w))| a * (w * t + phases.get(i).copied().unwrap_or(0.0)).sin())
                .sum(),
            ReferenceSignal::Chirp {
                amplitude,
                omega0,
                omega1,
                duration,
            } => {
                let rate = (omega1 - omega0) / duration;
                let phase = if t <= *duration {
                    omega0 * t + 0.5 * rate * t * t
                } else {
                    omega0 * duration + 0.5 * rate * duration * duration + omega1 * (t - duration)
                };
                amplitude * phase.sin()
            }
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        match self {
            ReferenceSignal::SumOfSinusoids {
                amplitudes,
                frequencies,
                phases,
            } => {
                if amplitudes.len() != frequencies.len() {
                    return Err(Error::invalid(
                        key,
                        "amplitudes and frequencies differ in length",
                    ));
                }
                if !phases.is_empty() && phases.len() != amplitudes.len() {
                    return Err(Error::invalid(
                        key,
                        "phases must be empty or match amplitudes",
                    ));
                }
            }
            ReferenceSignal::Chirp { duration, .. } if !(*duration > 0.0) => {
                return Err(Error::invalid(key, "chirp duration must be positive"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Reference model `ẋ_m = A_m x_m + B_m r` and its input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub a_m: Mat,
    pub b_m: Mat,
    pub channels: Vec<ReferenceSignal>,
}

impl ReferenceConfig {
    pub fn new(a_m: Mat, b_m: Mat, channels: Vec<ReferenceSignal>) -> Result<Self> {
        let n = a_m.nrows();
        require_hurwitz(&a_m).map_err(|e| Error::invalid("reference.A_m", e.to_string()))?;
        if b_m.nrows() != n {
            return Err(Error::invalid(
                "reference.B_m",
                format!("must have {n} rows"),
            ));
        }
        if channels.len() != b_m.ncols() {
            return Err(Error::invalid(
                "reference.channels",
                format!(
                    "{} channels declared but B_m has {} columns",
                    channels.len(),
                    b_m.ncols()
                ),
            ));
        }
        for (i, c) in channels.iter().enumerate() {
            c.validate(&format!("reference.channels[{i}]"))?;
        }
        Ok(Self { a_m, b_m, channels })
    }

    pub fn n_r(&self) -> usize {
        self.channels.len()
    }
}

/// `r(t)`.
pub fn reference_input(cfg: &ReferenceConfig, t: f64) -> Vector {
    Vector::from_iterator(cfg.channels.len(), cfg.channels.iter().map(|c| c.eval(t)))
}

/// `ẋ_m = A_m x_m + B_m r`.
pub fn reference_deriv(x_m: &Vector, r: &Vector, cfg: &ReferenceConfig) -> Vector {
    &cfg.a_m * x_m + &cfg.b_m * r
}

/// Declared norm bounds on the true parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterBounds {
    pub w_bar: f64,
    pub delta_bar: f64,
    pub delta_dot_bar: f64,
}

/// `W(t) = W* + δ_W(t)` with `δ_W` an elementwise sinusoid `a sin(ωt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameter {
    pub w_star: Mat,
    pub delta_amplitudes: Mat,
    pub delta_frequencies: Mat,
    pub bounds: ParameterBounds,
}

/// Ground truth at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub w: Mat,
    pub delta: Mat,
    pub delta_dot: Mat,
}

impl TrueParameter {
    /// Builds the parameter; missing `delta_bar` / `delta_dot_bar` default to
    /// the analytic sinusoid bounds `‖a‖_F` and `‖a∘ω‖_F`.
    pub fn new(
        w_star: Mat,
        delta_amplitudes: Mat,
        delta_frequencies: Mat,
        w_bar: f64,
        delta_bar: Option<f64>,
        delta_dot_bar: Option<f64>,
    ) -> Result<Self> {
        let shape = w_star.shape();
        if delta_amplitudes.shape() != shape {
            return Err(Error::invalid(
                "true_parameter.delta_amplitudes",
                "shape must match W_star",
            ));
        }
        if delta_frequencies.shape() != shape {
            return Err(Error::invalid(
                "true_parameter.delta_frequencies",
                "shape must match W_star",
            ));
        }
        let analytic_delta = delta_amplitudes.norm();
        let analytic_delta_dot = delta_amplitudes.component_mul(&delta_frequencies).norm();
        let delta_bar = delta_bar.unwrap_or(analytic_delta);
        let delta_dot_bar = delta_dot_bar.unwrap_or(analytic_delta_dot);
        if !(w_bar >= 0.0) {
            return Err(Error::invalid(
                "true_parameter.W_bar",
                "must be non-negative",
            ));
        }
        if w_star.norm() > w_bar {
            return Err(Error::invalid(
                "true_parameter.W_bar",
                format!("‖W_star‖_F = {} exceeds W_bar = {w_bar}", w_star.norm()),
            ));
        }
        if delta_bar < analytic_delta * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "true_parameter.delta_bar",
                format!("must be at least ‖delta_amplitudes‖_F = {analytic_delta}"),
            ));
        }
        if delta_dot_bar < analytic_delta_dot * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "true_parameter.delta_dot_bar",
                format!("must be at least ‖a∘ω‖_F = {analytic_delta_dot}"),
            ));
        }
        Ok(Self {
            w_star,
            delta_amplitudes,
            delta_frequencies,
            bounds: ParameterBounds {
                w_bar,
                delta_bar,
                delta_dot_bar,
            },
        })
    }

    pub fn is_constant(&self) -> bool {
        self.delta_amplitudes.iter().all(|a| *a == 0.0)
    }
}

/// `W(t)` and `δ̇_W(t)` (plus `δ_W(t)`) from the ground truth.
pub fn true_parameter(p: &TrueParameter, t: f64) -> TruthSample {
    let delta = p
        .delta_amplitudes
        .zip_map(&p.delta_frequencies, |a, w| a * (w * t).sin());
    let delta_dot = p
        .delta_amplitudes
        .zip_map(&p.delta_frequencies, |a, w| a * w * (w * t).cos());
    TruthSample {
        w: &p.w_star + &delta,
        delta,
        delta_dot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rk4_step;

    fn v(data: &[f64]) -> Vector {
        Vector::from_column_slice(data)
    }

    #[test]
    fn regressor_examples() {
        assert_eq!(
            regressor(&v(&[1.0, 2.0]), &Regressor::Identity, 2).unwrap(),
            v(&[1.0, 2.0])
        );
        assert_eq!(
            regressor(&v(&[0.0, 0.0]), &Regressor::WingRock, 6).unwrap(),
            v(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        );
        // (1, x1, x2, |x1| x2, |x2| x2, x1^3) at (1, -2).
        assert_eq!(
            regressor(&v(&[1.0, -2.0]), &Regressor::WingRock, 6).unwrap(),
            v(&[1.0, 1.0, -2.0, -2.0, -4.0, 1.0])
        );
        let custom = Regressor::CustomPolynomial {
            exponents: vec![vec![0, 0], vec![2, 1]],
        };
        assert_eq!(
            regressor(&v(&[3.0, -1.0]), &custom, 2).unwrap(),
            v(&[1.0, -9.0])
        );
    }

    #[test]
    fn regressor_dimension_errors() {
        assert!(regressor(&v(&[1.0, 2.0]), &Regressor::Identity, 3).is_err());
        assert!(regressor(&v(&[1.0, 2.0, 3.0]), &Regressor::WingRock, 6).is_err());
        let custom = Regressor::CustomPolynomial {
            exponents: vec![vec![1]],
        };
        assert!(regressor(&v(&[1.0, 2.0]), &custom, 1).is_err());
    }

    fn sinusoid_truth(a: f64, w: f64) -> TrueParameter {
        TrueParameter::new(
            Mat::from_element(1, 1, 0.5),
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, w),
            1.0,
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn true_parameter_examples() {
        let p = sinusoid_truth(1.0, 2.0);
        assert_eq!(true_parameter(&p, 0.0).w, p.w_star);
        let s = true_parameter(&p, std::f64::consts::FRAC_PI_4);
        assert!((s.delta[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(s.delta_dot[(0, 0)].abs() < 1e-15);
        let constant = sinusoid_truth(0.0, 3.0);
        for t in [0.0, 0.7, 12.3] {
            assert_eq!(true_parameter(&constant, t).w, constant.w_star);
        }
    }

    #[test]
    fn declared_bounds_hold_on_dense_grid() {
        let p = TrueParameter::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.0, -0.2, 0.3]),
            Mat::from_row_slice(2, 2, &[0.1, 0.05, 0.0, 0.2]),
            Mat::from_row_slice(2, 2, &[0.3, 1.1, 2.0, 0.5]),
            1.0,
            None,
            None,
        )
        .unwrap();
        for k in 0..20_000 {
            let s = true_parameter(&p, k as f64 * 1e-3);
            assert!(s.delta.norm() <= p.bounds.delta_bar + 1e-15);
            assert!(s.delta_dot.norm() <= p.bounds.delta_dot_bar + 1e-15);
        }
    }

    #[test]
    fn true_parameter_rejects_inconsistent_bounds() {
        let err = TrueParameter::new(
            Mat::from_element(1, 1, 2.0),
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
            1.0,
            None,
            None,
        )
        .unwrap_err();
        assert_eq!(err.key(), Some("true_parameter.W_bar"));
        let err = TrueParameter::new(
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, 0.3),
            Mat::zeros(1, 1),
            1.0,
            Some(0.1),
            None,
        )
        .unwrap_err();
        assert_eq!(err.key(), Some("true_parameter.delta_bar"));
    }

    fn double_integrator() -> PlantConfig {
        PlantConfig::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            Regressor::WingRock,
        )
        .unwrap()
    }

    #[test]
    fn plant_deriv_examples() {
        let cfg = double_integrator();
        let zero_w = Mat::zeros(6, 1);
        let x0 = Vector::zeros(2);
        assert_eq!(
            plant_deriv(&x0, &v(&[0.0]), &zero_w, &cfg),
            Vector::zeros(2)
        );
        let x = v(&[0.3, -1.0]);
        let u = v(&[2.0]);
        assert_eq!(
            plant_deriv(&x, &u, &zero_w, &cfg),
            &cfg.a * &x + &cfg.b * &u
        );

        // A = 0, B = I, identity regressor, Wᵀφ = -u.
        let cfg =
            PlantConfig::new(Mat::zeros(2, 2), Mat::identity(2, 2), Regressor::Identity).unwrap();
        let x = v(&[1.0, 2.0]);
        let w = -Mat::identity(2, 2) * 0.5;
        let u = v(&[0.5, 1.0]);
        assert_eq!(plant_deriv(&x, &u, &w, &cfg), Vector::zeros(2));
    }

    #[test]
    fn plant_rejects_rank_deficient_b() {
        let err = PlantConfig::new(
            Mat::zeros(2, 2),
            Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            Regressor::Identity,
        )
        .unwrap_err();
        assert_eq!(err.key(), Some("plant.B"));
    }

    fn reference(channels: Vec<ReferenceSignal>) -> ReferenceConfig {
        let b_m = Mat::from_column_slice(2, channels.len(), &vec![1.0; 2 * channels.len()]);
        ReferenceConfig::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -2.8]),
            b_m,
            channels,
        )
        .unwrap()
    }

    #[test]
    fn reference_input_examples() {
        let step = ReferenceSignal::Step {
            amplitude: 2.0,
            start: 1.0,
        };
        assert_eq!(step.eval(0.999), 0.0);
        assert_eq!(step.eval(1.0), 2.0);
        let sines = ReferenceSignal::SumOfSinusoids {
            amplitudes: vec![1.0, 0.5],
            frequencies: vec![1.0, 3.0],
            phases: vec![],
        };
        assert_eq!(sines.eval(0.0), 0.0);
        // sin(0.5 + 0.25·0.25) with ω0 = 1, ω1 = 2, duration 2, t = 0.5.
        let chirp = ReferenceSignal::Chirp {
            amplitude: 1.5,
            omega0: 1.0,
            omega1: 2.0,
            duration: 2.0,
        };
        assert!((chirp.eval(0.5) - 1.5 * (0.5f64 + 0.0625).sin()).abs() < 1e-15);
        // Past the sweep the frequency is held at ω1.
        let held = 1.0 * 2.0 + 0.5 * 0.5 * 4.0 + 2.0 * 1.0;
        assert!((chirp.eval(3.0) - 1.5 * f64::sin(held)).abs() < 1e-15);
        let cfg = reference(vec![step]);
        assert_eq!(reference_input(&cfg, 5.0), v(&[2.0]));
        assert_eq!(
            reference_deriv(&Vector::zeros(2), &v(&[0.0]), &cfg),
            Vector::zeros(2)
        );
    }

    #[test]
    fn reference_rejects_unstable_a_m() {
        let err = ReferenceConfig::new(
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::from_element(1, 1, 1.0),
            vec![ReferenceSignal::Step {
                amplitude: 1.0,
                start: 0.0,
            }],
        )
        .unwrap_err();
        assert_eq!(err.key(), Some("reference.A_m"));
    }

    #[test]
    fn reference_model_decays_and_settles() {
        let cfg = reference(vec![ReferenceSignal::Step {
            amplitude: 1.0,
            start: 0.0,
        }]);
        // Free response decays.
        let mut x = v(&[1.0, -0.5]);
        let zero = v(&[0.0]);
        let dt = 1e-3;
        let initial = x.norm();
        for k in 0..5000 {
            x = rk4_step(
                |s, _| reference_deriv(s, &zero, &cfg),
                &x,
                k as f64 * dt,
                dt,
            )
            .unwrap();
        }
        assert!(x.norm() < 0.05 * initial);

        // Step response reaches -A_m⁻¹ B_m r; slowest |Re λ| = 1.4.
        let r = v(&[1.0]);
        let target = -cfg.a_m.clone().try_inverse().unwrap() * &cfg.b_m * &r;
        let horizon = 10.0 / 1.4;
        let mut x = Vector::zeros(2);
        let steps = (horizon / dt).ceil() as usize;
        for k in 0..steps {
            x = rk4_step(|s, _| reference_deriv(s, &r, &cfg), &x, k as f64 * dt, dt).unwrap();
        }
        assert!((&x - &target).norm() <= 0.01 * target.norm());
    }
}
