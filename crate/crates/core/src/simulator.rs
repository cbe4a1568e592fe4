//! Coupled closed-loop ODE, fixed-step RK4 integration and the trajectory log.
//!
//! The state splits into a measurable part (plant, reference model, both
//! estimates, filter bank) and an oracle part (`Δ_f`, `Δ_ff`, and a `ġ`
//! filter) driven by ground truth. The controller and estimators are
//! evaluated through [`estimator_rates`], which only receives a
//! [`MeasuredState`] and a [`Design`]; ground truth never reaches that path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{control, ControlSignal, GainInputs, GainSet};
use crate::error::{Error, Result};
use crate::numerics::{left_pseudoinverse, min_eigen_sym, try_rk4_step, Mat, Vector};
use crate::plant::{
    plant_deriv, reference_deriv, reference_input, true_parameter, ParameterBounds, PlantConfig,
    ReferenceConfig, TrueParameter,
};
use crate::primary::{primary_update, PrimaryGains, ProjectionSet};
use crate::secondary::{
    compute_g, compute_h, drive_signal_ystar, first_layer_derivs, second_layer_derivs,
    secondary_update, FilterBank, IeMonitor, IePolicy, IeSnapshot, SecondaryGains,
};

/// State norm above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// How the primary projection radius `α` is derived from the declared bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// `α² = W̄² + δ̄²`.
    #[default]
    Quadrature,
    /// `α = W̄ + δ̄`, which always contains `W(t)`.
    Sum,
}

impl AlphaRule {
    pub fn alpha(self, bounds: &ParameterBounds) -> f64 {
        match self {
            AlphaRule::Quadrature => bounds.w_bar.hypot(bounds.delta_bar),
            AlphaRule::Sum => bounds.w_bar + bounds.delta_bar,
        }
    }
}

/// Default boundary-layer width for a set of radius `alpha`.
pub fn default_eps(alpha: f64) -> f64 {
    0.1 * alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub t0: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 30.0,
            t0: 0.0,
        }
    }
}

impl IntegratorConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Time of step `k`, computed directly to avoid accumulated rounding.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub x0: Vector,
    pub x_m0: Vector,
    pub w_hat0: Mat,
    pub w_hat_star0: Mat,
}

/// Uniformly random direction scaled to a uniformly random norm in `[0, radius)`.
pub fn random_estimate<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> Mat {
    let dir = Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let norm = dir.norm();
    if norm == 0.0 {
        return dir;
    }
    dir * (radius * rng.random::<f64>() / norm)
}

/// Everything the controller and estimators may read.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub plant: PlantConfig,
    pub reference: ReferenceConfig,
    pub gains: GainSet,
    pub primary: PrimaryGains,
    pub secondary: SecondaryGains,
    pub b_bar: Mat,
}

/// Unvalidated inputs to [`ScenarioConfig::new`].
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub name: String,
    pub plant: PlantConfig,
    pub reference: ReferenceConfig,
    pub truth: TrueParameter,
    pub gains: GainInputs,
    pub alpha_rule: AlphaRule,
    pub integrator: IntegratorConfig,
    pub initial: InitialConditions,
    pub ie_policy: IePolicy,
    pub log_every: usize,
    pub seed: u64,
    pub projection: bool,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub design: Design,
    pub truth: TrueParameter,
    pub alpha_rule: AlphaRule,
    pub integrator: IntegratorConfig,
    pub initial: InitialConditions,
    pub ie_policy: IePolicy,
    pub log_every: usize,
    pub seed: u64,
    /// Non-fatal findings, e.g. bounds under which an analytic guarantee does
    /// not apply.
    pub warnings: Vec<String>,
}

impl ScenarioConfig {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let ScenarioParts {
            name,
            plant,
            reference,
            truth,
            gains,
            alpha_rule,
            integrator,
            initial,
            ie_policy,
            log_every,
            seed,
            projection,
        } = parts;
        let (n, n_u, n_w) = (plant.n, plant.n_u, plant.n_w);

        if !(integrator.dt > 0.0 && integrator.dt.is_finite()) {
            return Err(Error::invalid(
                "integrator.dt",
                "must be positive and finite",
            ));
        }
        if !(integrator.horizon > 0.0 && integrator.horizon.is_finite()) {
            return Err(Error::invalid(
                "integrator.horizon",
                "must be positive and finite",
            ));
        }
        if !integrator.t0.is_finite() {
            return Err(Error::invalid("integrator.t0", "must be finite"));
        }
        if integrator.steps() == 0 {
            return Err(Error::invalid(
                "integrator.horizon",
                "shorter than one step",
            ));
        }
        if log_every == 0 {
            return Err(Error::invalid("logging.log_every", "must be at least 1"));
        }
        match ie_policy {
            IePolicy::FixedWindow { t_ie } if !(t_ie > 0.0 && t_ie.is_finite()) => {
                return Err(Error::invalid(
                    "ie_policy.t_ie",
                    "must be positive and finite",
                ));
            }
            IePolicy::OnlineThreshold { gamma_ie } if !(gamma_ie > 0.0 && gamma_ie.is_finite()) => {
                return Err(Error::invalid(
                    "ie_policy.gamma_ie",
                    "must be positive and finite",
                ));
            }
            _ => {}
        }
        if truth.w_star.shape() != (n_w, n_u) {
            return Err(Error::invalid(
                "true_parameter.W_star",
                format!(
                    "must be {n_w}x{n_u} (n_w x n_u), got {:?}",
                    truth.w_star.shape()
                ),
            ));
        }

        let gains = GainSet::new(gains, &plant, &reference)?;
        let alpha = alpha_rule.alpha(&truth.bounds);
        let alpha_star = truth.bounds.w_bar;
        if !(alpha > 0.0) {
            return Err(Error::invalid(
                "true_parameter.W_bar",
                "projection radius must be positive",
            ));
        }
        let primary_set = ProjectionSet::new(alpha, gains.eps);
        let secondary_set = ProjectionSet::new(alpha_star, gains.eps_star);

        for (key, v, len) in [
            ("initial.x0", &initial.x0, n),
            ("initial.x_m0", &initial.x_m0, n),
        ] {
            if v.len() != len {
                return Err(Error::invalid(
                    key,
                    format!("must have length {len}, got {}", v.len()),
                ));
            }
        }
        for (key, m, set) in [
            ("initial.W_hat0", &initial.w_hat0, primary_set),
            ("initial.W_hat_star0", &initial.w_hat_star0, secondary_set),
        ] {
            if m.shape() != (n_w, n_u) {
                return Err(Error::invalid(
                    key,
                    format!("must be {n_w}x{n_u}, got {:?}", m.shape()),
                ));
            }
            if m.norm() > set.radius() {
                return Err(Error::invalid(
                    key,
                    format!(
                        "‖·‖_F = {} lies outside the projection set of radius {}",
                        m.norm(),
                        set.radius()
                    ),
                ));
            }
        }

        let mut warnings = Vec::new();
        let b = truth.bounds;
        if truth.w_star.norm() + b.delta_bar > alpha * (1.0 + 1e-12) {
            warnings.push(format!(
                "‖W_star‖_F + delta_bar = {} exceeds alpha = {alpha}; W(t) may leave the primary projection set \
                 (set gains.alpha_rule = \"sum\" to enlarge it)",
                truth.w_star.norm() + b.delta_bar
            ));
        }
        if b.delta_bar > 0.0 && gains.p_f < 1.0 {
            warnings.push(format!(
                "p_f = {} < 1: the unsquared Δ_ff bound δ̄φ̄²/(p_f p_ff) underestimates δ̄φ̄²/(p_f² p_ff)",
                gains.p_f
            ));
        }
        if let IePolicy::FixedWindow { t_ie } = ie_policy {
            if t_ie > integrator.horizon {
                warnings.push(format!(
                    "ie_policy.t_ie = {t_ie} exceeds the horizon; s(t) stays 0"
                ));
            }
        }

        let b_bar = left_pseudoinverse(&plant.b)?;
        let primary = PrimaryGains {
            gamma_w: gains.gamma_w.clone(),
            sigma: gains.sigma,
            pb: &gains.p * &plant.b,
            set: primary_set,
            projection,
        };
        let secondary = SecondaryGains {
            gamma_w_star: gains.gamma_w_star.clone(),
            set: secondary_set,
            projection,
        };
        Ok(Self {
            name,
            design: Design {
                plant,
                reference,
                gains,
                primary,
                secondary,
                b_bar,
            },
            truth,
            alpha_rule,
            integrator,
            initial,
            ie_policy,
            log_every,
            seed,
            warnings,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let p = &self.design.plant;
        (p.n, p.n_u, p.n_w)
    }
}

/// Integrated state: measurable signals plus oracle channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousState {
    pub x: Vector,
    pub x_m: Vector,
    pub w_hat: Mat,
    pub w_hat_star: Mat,
    pub bank: FilterBank,
    pub delta_f: Vector,
    pub delta_ff: Mat,
    pub g_oracle: Vector,
}

impl ContinuousState {
    pub fn initial(cfg: &ScenarioConfig) -> Self {
        let (n, n_u, n_w) = cfg.dims();
        let init = &cfg.initial;
        let e0 = &init.x0 - &init.x_m0;
        Self {
            x: init.x0.clone(),
            x_m: init.x_m0.clone(),
            w_hat: init.w_hat0.clone(),
            w_hat_star: init.w_hat_star0.clone(),
            bank: FilterBank::new(n, n_u, n_w, e0, cfg.integrator.t0),
            delta_f: Vector::zeros(n_u),
            delta_ff: Mat::zeros(n_u, n_w),
            g_oracle: Vector::zeros(n),
        }
    }

    fn blocks(&self) -> [&[f64]; 12] {
        let b = &self.bank;
        [
            self.x.as_slice(),
            self.x_m.as_slice(),
            self.w_hat.as_slice(),
            self.w_hat_star.as_slice(),
            b.e_f.as_slice(),
            b.u_f.as_slice(),
            b.phi_f.as_slice(),
            b.phi_ff.as_slice(),
            b.u_ff.as_slice(),
            self.delta_f.as_slice(),
            self.delta_ff.as_slice(),
            self.g_oracle.as_slice(),
        ]
    }

    const NAMES: [&'static str; 12] = [
        "x",
        "x_m",
        "W_hat",
        "W_hat_star",
        "e_f",
        "u_f",
        "phi_f",
        "Phi_ff",
        "u_ff",
        "Delta_f",
        "Delta_ff",
        "g_oracle",
    ];

    /// Flattens in the fixed order `x, x_m, Ŵ, Ŵ*, e_f, u_f, φ_f, Φ_ff, u_ff,
    /// Δ_f, Δ_ff, g`; matrices column-major.
    pub fn pack(&self) -> Vector {
        let data: Vec<f64> = self
            .blocks()
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect();
        Vector::from_vec(data)
    }

    /// Inverse of [`pack`](Self::pack); `template` supplies dimensions, `e0`, `t0`.
    pub fn unpack(v: &Vector, template: &ContinuousState) -> Self {
        let mut at = 0;
        let mut take = |rows: usize, cols: usize| {
            let m = Mat::from_column_slice(rows, cols, &v.as_slice()[at..at + rows * cols]);
            at += rows * cols;
            m
        };
        let vec = |m: Mat| Vector::from_column_slice(m.as_slice());
        let n = template.x.len();
        let n_u = template.delta_f.len();
        let n_w = template.bank.phi_f.len();
        let x = vec(take(n, 1));
        let x_m = vec(take(n, 1));
        let w_hat = take(n_w, n_u);
        let w_hat_star = take(n_w, n_u);
        let e_f = vec(take(n, 1));
        let u_f = vec(take(n_u, 1));
        let phi_f = vec(take(n_w, 1));
        let phi_ff = take(n_w, n_w);
        let u_ff = take(n_u, n_w);
        let delta_f = vec(take(n_u, 1));
        let delta_ff = take(n_u, n_w);
        let g_oracle = vec(take(n, 1));
        Self {
            x,
            x_m,
            w_hat,
            w_hat_star,
            bank: FilterBank {
                e_f,
                u_f,
                phi_f,
                phi_ff,
                u_ff,
                e0: template.bank.e0.clone(),
                t0: template.bank.t0,
            },
            delta_f,
            delta_ff,
            g_oracle,
        }
    }

    pub fn measured(&self) -> MeasuredState<'_> {
        MeasuredState {
            x: &self.x,
            x_m: &self.x_m,
            w_hat: &self.w_hat,
            w_hat_star: &self.w_hat_star,
            bank: &self.bank,
        }
    }

    /// First non-finite block, if any.
    fn non_finite_block(&self) -> Option<&'static str> {
        self.blocks()
            .iter()
            .zip(Self::NAMES)
            .find(|(s, _)| s.iter().any(|v| !v.is_finite()))
            .map(|(_, name)| name)
    }
}

/// The part of the state available to the controller and estimators.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredState<'a> {
    pub x: &'a Vector,
    pub x_m: &'a Vector,
    pub w_hat: &'a Mat,
    pub w_hat_star: &'a Mat,
    pub bank: &'a FilterBank,
}

/// Controller output and estimator/filter rates at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRates {
    pub r: Vector,
    pub e: Vector,
    pub signal: ControlSignal,
    pub g: Vector,
    pub h: Vector,
    pub w_hat: Mat,
    pub w_hat_star: Mat,
    pub e_f: Vector,
    pub u_f: Vector,
    pub phi_f: Vector,
    pub phi_ff: Mat,
    pub u_ff: Mat,
}

/// Control law, both update laws and the filter bank, from measurable signals.
pub fn estimator_rates(
    s: MeasuredState<'_>,
    t: f64,
    design: &Design,
    mon: &IeMonitor,
) -> EstimatorRates {
    let gains = &design.gains;
    let r = reference_input(&design.reference, t);
    let e = s.x - s.x_m;
    let signal = control(s.x, &r, s.w_hat, gains, &design.plant);
    let bank = s.bank;
    let g = compute_g(&e, &bank.e0, &bank.e_f, t, bank.t0, gains.p_f);
    let h = compute_h(&g, &bank.e_f, &design.b_bar, &design.reference.a_m);
    let first = first_layer_derivs(bank, &e, &signal.u_ad, &signal.phi, gains.p_f);
    let (phi_ff, u_ff) = second_layer_derivs(bank, &h, gains.p_ff);
    let w_hat = primary_update(s.w_hat, &signal.phi, &e, s.w_hat_star, &design.primary);
    let y_star = drive_signal_ystar(
        s.w_hat_star,
        bank,
        mon,
        &h,
        gains.gamma1,
        gains.gamma2,
        gains.gamma3,
    );
    let w_hat_star = secondary_update(s.w_hat_star, &y_star, &design.secondary);
    EstimatorRates {
        r,
        e,
        signal,
        g,
        h,
        w_hat,
        w_hat_star,
        e_f: first.e_f,
        u_f: first.u_f,
        phi_f: first.phi_f,
        phi_ff,
        u_ff,
    }
}

/// Time derivative of the full state. Ground truth enters only the plant and
/// the oracle channels.
pub fn assemble_derivative(
    s: &ContinuousState,
    t: f64,
    cfg: &ScenarioConfig,
    mon: &IeMonitor,
) -> Result<ContinuousState> {
    let design = &cfg.design;
    let rates = estimator_rates(s.measured(), t, design, mon);
    let truth = true_parameter(&cfg.truth, t);
    let x_dot = plant_deriv(&s.x, &rates.signal.u, &truth.w, &design.plant);
    let x_m_dot = reference_deriv(&s.x_m, &rates.r, &design.reference);
    let (p_f, p_ff) = (design.gains.p_f, design.gains.p_ff);
    let delta_f = truth.delta.transpose() * &rates.signal.phi - &s.delta_f * p_f;
    let delta_ff = &s.delta_f * s.bank.phi_f.transpose() - &s.delta_ff * p_ff;
    let g_oracle = (&x_dot - &x_m_dot) - &s.g_oracle * p_f;
    let d = ContinuousState {
        x: x_dot,
        x_m: x_m_dot,
        w_hat: rates.w_hat,
        w_hat_star: rates.w_hat_star,
        bank: FilterBank {
            e_f: rates.e_f,
            u_f: rates.u_f,
            phi_f: rates.phi_f,
            phi_ff: rates.phi_ff,
            u_ff: rates.u_ff,
            e0: s.bank.e0.clone(),
            t0: s.bank.t0,
        },
        delta_f,
        delta_ff,
        g_oracle,
    };
    if let Some(component) = d.non_finite_block() {
        return Err(Error::NonFinite { component, t });
    }
    Ok(d)
}

/// Simulation state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub state: ContinuousState,
    pub mon: IeMonitor,
}

/// `V = eᵀPe + Tr(W̃ᵀΓ_W⁻¹W̃)` and `V* = ½Tr(W̃*ᵀΓ_W*⁻¹W̃*)`.
pub fn lyapunov_values(
    e: &Vector,
    w_tilde: &Mat,
    w_tilde_star: &Mat,
    gains: &GainSet,
) -> (f64, f64) {
    let v = (e.transpose() * &gains.p * e)[(0, 0)]
        + (w_tilde.transpose() * &gains.gamma_w_inv * w_tilde).trace();
    let v_star = 0.5 * (w_tilde_star.transpose() * &gains.gamma_w_star_inv * w_tilde_star).trace();
    (v, v_star)
}

/// One logged instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub x_m: Vector,
    pub e: Vector,
    pub u: Vector,
    pub u_ad: Vector,
    pub r: Vector,
    pub w: Mat,
    pub w_hat: Mat,
    pub w_hat_star: Mat,
    pub w_tilde: Mat,
    pub w_tilde_star: Mat,
    pub phi: Vector,
    pub e_f: Vector,
    pub u_f: Vector,
    pub phi_f: Vector,
    pub phi_ff: Mat,
    pub u_ff: Mat,
    pub g: Vector,
    pub g_oracle: Vector,
    pub h: Vector,
    pub s: bool,
    pub lambda_min_phi_ff: f64,
    pub delta_f: Vector,
    pub delta_ff: Mat,
    pub v: f64,
    pub v_star: f64,
    /// `‖W*ᵀφ_f + Δ_f − h − u_f‖`.
    pub residual_layer1: f64,
    /// `‖u_ff − W*ᵀΦ_ff − Δ_ff‖_F`.
    pub residual_layer2: f64,
    /// `‖ė − (A_m e − BW̃ᵀφ)‖` with `ė` from the true plant.
    pub residual_edot: f64,
    /// `‖g − g_oracle‖`.
    pub residual_g: f64,
}

/// Per-step extrema, recorded at every integrator step rather than only at
/// logged samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepMaxima {
    pub w_hat_norm: f64,
    pub w_hat_star_norm: f64,
    /// Measured `φ̄ = max ‖φ(x(t))‖`.
    pub phi: f64,
    pub phi_f: f64,
    pub delta_f: f64,
    pub delta_ff: f64,
    pub w_norm: f64,
}

impl StepMaxima {
    fn update(&mut self, s: &ContinuousState, phi: &Vector, w: &Mat) {
        self.w_hat_norm = self.w_hat_norm.max(s.w_hat.norm());
        self.w_hat_star_norm = self.w_hat_star_norm.max(s.w_hat_star.norm());
        self.phi = self.phi.max(phi.norm());
        self.phi_f = self.phi_f.max(s.bank.phi_f.norm());
        self.delta_f = self.delta_f.max(s.delta_f.norm());
        self.delta_ff = self.delta_ff.max(s.delta_ff.norm());
        self.w_norm = self.w_norm.max(w.norm());
    }
}

/// Result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub name: String,
    pub dt: f64,
    pub log_every: usize,
    pub n: usize,
    pub n_u: usize,
    pub n_w: usize,
    pub n_r: usize,
    pub samples: Vec<Sample>,
    pub maxima: StepMaxima,
    pub activation: Option<IeSnapshot>,
    pub final_state: SimState,
}

impl TrajectoryLog {
    pub fn sample_period(&self) -> f64 {
        self.dt * self.log_every as f64
    }

    pub fn activation_time(&self) -> Option<f64> {
        self.activation.as_ref().map(|a| a.t)
    }
}

/// Logged quantities at `(s, t)`.
pub fn sample_at(
    s: &ContinuousState,
    t: f64,
    cfg: &ScenarioConfig,
    mon: &IeMonitor,
) -> Result<Sample> {
    let design = &cfg.design;
    let gains = &design.gains;
    let rates = estimator_rates(s.measured(), t, design, mon);
    let truth = true_parameter(&cfg.truth, t);
    let w_star = &cfg.truth.w_star;
    let w_tilde = &s.w_hat - &truth.w;
    let w_tilde_star = &s.w_hat_star - w_star;
    let (v, v_star) = lyapunov_values(&rates.e, &w_tilde, &w_tilde_star, gains);

    let x_dot = plant_deriv(&s.x, &rates.signal.u, &truth.w, &design.plant);
    let x_m_dot = reference_deriv(&s.x_m, &rates.r, &design.reference);
    let e_dot_model = &design.reference.a_m * &rates.e
        - &design.plant.b * (w_tilde.transpose() * &rates.signal.phi);
    let residual_edot = ((x_dot - x_m_dot) - e_dot_model).norm();

    let bank = &s.bank;
    let residual_layer1 =
        (w_star.transpose() * &bank.phi_f + &s.delta_f - &rates.h - &bank.u_f).norm();
    let residual_layer2 = (&bank.u_ff - w_star.transpose() * &bank.phi_ff - &s.delta_ff).norm();
    let residual_g = (&rates.g - &s.g_oracle).norm();
    let lambda_min_phi_ff = min_eigen_sym(&bank.phi_ff)?;

    Ok(Sample {
        t,
        x: s.x.clone(),
        x_m: s.x_m.clone(),
        e: rates.e,
        u: rates.signal.u,
        u_ad: rates.signal.u_ad,
        r: rates.r,
        w: truth.w,
        w_hat: s.w_hat.clone(),
        w_hat_star: s.w_hat_star.clone(),
        w_tilde,
        w_tilde_star,
        phi: rates.signal.phi,
        e_f: bank.e_f.clone(),
        u_f: bank.u_f.clone(),
        phi_f: bank.phi_f.clone(),
        phi_ff: bank.phi_ff.clone(),
        u_ff: bank.u_ff.clone(),
        g: rates.g,
        g_oracle: s.g_oracle.clone(),
        h: rates.h,
        s: mon.s(),
        lambda_min_phi_ff,
        delta_f: s.delta_f.clone(),
        delta_ff: s.delta_ff.clone(),
        v,
        v_star,
        residual_layer1,
        residual_layer2,
        residual_edot,
        residual_g,
    })
}

/// Bisection depth for locating the IE switching time inside a step.
const EVENT_BISECTIONS: usize = 60;

/// Integrates the scenario over its horizon with fixed-step RK4. When the IE
/// monitor's condition first holds at the end of a step, the switching time is
/// located inside that step by bisection; the step is then split there so
/// `s(t)` is constant on each RK4 sub-interval.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    let integ = cfg.integrator;
    let (n, n_u, n_w) = cfg.dims();
    let template = ContinuousState::initial(cfg);
    let mut sim = SimState {
        t: integ.t0,
        state: template.clone(),
        mon: IeMonitor::new(cfg.ie_policy),
    };
    let mut maxima = StepMaxima::default();
    let mut samples = Vec::with_capacity(integ.steps() / cfg.log_every + 1);

    let track = |maxima: &mut StepMaxima, s: &ContinuousState, t: f64| {
        let w = true_parameter(&cfg.truth, t).w;
        maxima.update(s, &cfg.design.plant.phi(&s.x), &w);
    };
    let advance = |packed: &Vector, t: f64, h: f64, mon: &IeMonitor| -> Result<Vector> {
        try_rk4_step(
            |v: &Vector, tk: f64| -> Result<Vector> {
                let s = ContinuousState::unpack(v, &template);
                Ok(assemble_derivative(&s, tk, cfg, mon)?.pack())
            },
            packed,
            t,
            h,
        )
    };
    track(&mut maxima, &sim.state, sim.t);
    sim.mon.step(&sim.state.bank, sim.t)?;
    samples.push(sample_at(&sim.state, sim.t, cfg, &sim.mon)?);

    let mut packed = sim.state.pack();
    for k in 0..integ.steps() {
        let t = integ.time(k);
        let t_next = integ.time(k + 1);
        let dt = t_next - t;
        let mut next = advance(&packed, t, dt, &sim.mon)?;
        let norm = next.norm();
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Divergence { t: t_next, norm });
        }
        let fires_at = |v: &Vector, tau: f64| {
            sim.mon
                .fires(&ContinuousState::unpack(v, &template).bank, tau)
        };
        if fires_at(&next, t_next)? {
            let (mut lo, mut hi) = (0.0, dt);
            let mut at_hi = next.clone();
            for _ in 0..EVENT_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = advance(&packed, t, mid, &sim.mon)?;
                if fires_at(&v, t + mid)? {
                    (hi, at_hi) = (mid, v);
                } else {
                    lo = mid;
                }
            }
            let t_event = t + hi;
            sim.mon
                .activate(&ContinuousState::unpack(&at_hi, &template).bank, t_event)?;
            next = if hi < dt {
                advance(&at_hi, t_event, dt - hi, &sim.mon)?
            } else {
                at_hi
            };
        }
        packed = next;
        sim.state = ContinuousState::unpack(&packed, &template);
        sim.t = t_next;
        track(&mut maxima, &sim.state, t_next);
        if (k + 1) % cfg.log_every == 0 {
            samples.push(sample_at(&sim.state, t_next, cfg, &sim.mon)?);
        }
    }

    Ok(TrajectoryLog {
        name: cfg.name.clone(),
        dt: integ.dt,
        log_every: cfg.log_every,
        n,
        n_u,
        n_w,
        n_r: cfg.design.reference.n_r(),
        samples,
        maxima,
        activation: sim.mon.snapshot().cloned(),
        final_state: sim,
    })
}
