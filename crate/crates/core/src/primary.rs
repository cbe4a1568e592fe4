//! Primary estimate `Ŵ` of the total time-varying parameter: Γ-projection of
//! the tracking drive with a σ-pull toward the secondary estimate.

use crate::numerics::{trace_inner, Mat, Vector};

/// Convex set `{Θ : f(Θ) ≤ 1}` with `f = (‖Θ‖²_F − α²)/(2αε + ε²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSet {
    pub alpha: f64,
    pub eps: f64,
}

impl ProjectionSet {
    pub fn new(alpha: f64, eps: f64) -> Self {
        Self { alpha, eps }
    }

    /// Outer radius `α + ε` of the set.
    pub fn radius(&self) -> f64 {
        self.alpha + self.eps
    }

    pub fn f(&self, theta: &Mat) -> (f64, Mat) {
        convex_f(theta, self.alpha, self.eps)
    }
}

/// `f(Θ)` together with `∇f = 2Θ/(2αε + ε²)`.
pub fn convex_f(theta: &Mat, alpha: f64, eps: f64) -> (f64, Mat) {
    let denom = 2.0 * alpha * eps + eps * eps;
    let f = (trace_inner(theta, theta) - alpha * alpha) / denom;
    (f, theta * (2.0 / denom))
}

/// `y = φ eᵀ P B − σ(Ŵ − Ŵ*)`; `pb` is the precomputed product `PB`.
pub fn drive_signal_y(
    phi: &Vector,
    e: &Vector,
    w_hat: &Mat,
    w_hat_star: &Mat,
    pb: &Mat,
    sigma: f64,
) -> Mat {
    phi * (e.transpose() * pb) - (w_hat - w_hat_star) * sigma
}

/// Γ-projection. When `f > 0` and `Tr(yᵀΓ∇f) > 0` the component of `Γy`
/// along `Γ∇f` is scaled back by `f`; otherwise returns `Γy`.
pub fn gamma_projection(theta: &Mat, y: &Mat, f: f64, grad_f: &Mat, gamma: &Mat) -> Mat {
    let gamma_y = gamma * y;
    if f <= 0.0 {
        return gamma_y;
    }
    let outward = trace_inner(grad_f, &gamma_y);
    if outward <= 0.0 {
        return gamma_y;
    }
    let gamma_grad = gamma * grad_f;
    let norm = trace_inner(grad_f, &gamma_grad);
    assert!(
        norm > 0.0,
        "projection gradient vanished with f = {f} > 0 (‖Θ‖_F = {})",
        theta.norm()
    );
    gamma_y - gamma_grad * (f * outward / norm)
}

/// Gains used by the primary update law.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryGains {
    pub gamma_w: Mat,
    pub sigma: f64,
    pub pb: Mat,
    pub set: ProjectionSet,
    pub projection: bool,
}

/// `dŴ/dt = Proj_Γ_W(Ŵ, y, f)`.
pub fn primary_update(
    w_hat: &Mat,
    phi: &Vector,
    e: &Vector,
    w_hat_star: &Mat,
    gains: &PrimaryGains,
) -> Mat {
    let y = drive_signal_y(phi, e, w_hat, w_hat_star, &gains.pb, gains.sigma);
    if !gains.projection {
        return &gains.gamma_w * y;
    }
    let (f, grad) = gains.set.f(w_hat);
    gamma_projection(w_hat, &y, f, &grad, &gains.gamma_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scaled(m: &Mat, norm: f64) -> Mat {
        m * (norm / m.norm())
    }

    #[test]
    fn convex_f_levels() {
        let dir = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let (alpha, eps) = (1.5, 0.2);
        let (f, _) = convex_f(&scaled(&dir, alpha), alpha, eps);
        assert!(f.abs() < 1e-14);
        let (f, _) = convex_f(&scaled(&dir, alpha + eps), alpha, eps);
        assert!((f - 1.0).abs() < 1e-13);
        let (f, grad) = convex_f(&Mat::zeros(2, 2), alpha, eps);
        assert_eq!(f, -alpha * alpha / (2.0 * alpha * eps + eps * eps));
        assert_eq!(grad, Mat::zeros(2, 2));
    }

    #[test]
    fn convex_f_gradient_matches_finite_difference() {
        let theta = Mat::from_row_slice(3, 1, &[0.4, -1.1, 0.7]);
        let (alpha, eps) = (1.0, 0.3);
        let (_, grad) = convex_f(&theta, alpha, eps);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (convex_f(&up, alpha, eps).0 - convex_f(&dn, alpha, eps).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn drive_signal_examples() {
        let phi = Vector::from_column_slice(&[1.0, 2.0]);
        let e = Vector::zeros(3);
        let pb = Mat::from_row_slice(3, 1, &[1.0, 0.5, 0.2]);
        let w = Mat::from_column_slice(2, 1, &[0.3, -0.4]);
        assert_eq!(drive_signal_y(&phi, &e, &w, &w, &pb, 2.0), Mat::zeros(2, 1));

        let e = Vector::from_column_slice(&[1.0, -1.0, 2.0]);
        // eᵀPB = 1 - 0.5 + 0.4 = 0.9
        let y = drive_signal_y(&phi, &e, &w, &Mat::zeros(2, 1), &pb, 0.0);
        assert!((y - Mat::from_column_slice(2, 1, &[0.9, 1.8])).amax() < 1e-15);
        let y = drive_signal_y(&phi, &e, &w, &Mat::zeros(2, 1), &pb, 0.5);
        assert!((y - Mat::from_column_slice(2, 1, &[0.9 - 0.15, 1.8 + 0.2])).amax() < 1e-15);
    }

    #[test]
    fn projection_interior_and_inward() {
        let gamma = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let y = Mat::from_column_slice(2, 1, &[1.0, -0.5]);
        let set = ProjectionSet::new(1.0, 0.1);
        let inside = Mat::from_column_slice(2, 1, &[0.2, 0.1]);
        let (f, g) = set.f(&inside);
        assert!(f < 0.0);
        assert_eq!(gamma_projection(&inside, &y, f, &g, &gamma), &gamma * &y);
        // In the boundary layer but pointing inward.
        let boundary = Mat::from_column_slice(2, 1, &[-1.05, 0.0]);
        let (f, g) = set.f(&boundary);
        assert!(f > 0.0);
        assert!(trace_inner(&y, &(&gamma * &g)) <= 0.0);
        assert_eq!(gamma_projection(&boundary, &y, f, &g, &gamma), &gamma * &y);
    }

    #[test]
    fn projection_cancels_radial_push_on_boundary() {
        let set = ProjectionSet::new(1.0, 0.25);
        let theta = Mat::from_column_slice(2, 1, &[0.6, 0.8]) * set.radius();
        let (f, grad) = set.f(&theta);
        assert!((f - 1.0).abs() < 1e-12);
        let out = gamma_projection(&theta, &grad, f, &grad, &Mat::identity(2, 2));
        assert!(out.amax() < 1e-12);
    }

    #[test]
    fn primary_update_cases() {
        let gains = PrimaryGains {
            gamma_w: Mat::identity(2, 2) * 3.0,
            sigma: 0.5,
            pb: Mat::from_row_slice(2, 1, &[0.2, 1.0]),
            set: ProjectionSet::new(1.0, 0.1),
            projection: true,
        };
        let w = Mat::from_column_slice(2, 1, &[0.1, 0.2]);
        let zero = primary_update(
            &w,
            &Vector::from_column_slice(&[1.0, 1.0]),
            &Vector::zeros(2),
            &w,
            &gains,
        );
        assert_eq!(zero, Mat::zeros(2, 1));

        let phi = Vector::from_column_slice(&[1.0, -0.5]);
        let e = Vector::from_column_slice(&[0.4, 0.3]);
        let star = Mat::from_column_slice(2, 1, &[0.0, 0.3]);
        let y = drive_signal_y(&phi, &e, &w, &star, &gains.pb, gains.sigma);
        assert_eq!(
            primary_update(&w, &phi, &e, &star, &gains),
            &gains.gamma_w * &y
        );

        // Boundary layer, outward drive: tangential part of Γy survives,
        // radial part is shrunk by (1 - f).
        let w_edge = Mat::from_column_slice(2, 1, &[1.05, 0.0]);
        let e = Vector::from_column_slice(&[1.0, 1.0]);
        let phi = Vector::from_column_slice(&[1.0, 1.0]);
        let y = drive_signal_y(&phi, &e, &w_edge, &Mat::zeros(2, 1), &gains.pb, gains.sigma);
        let (f, _) = gains.set.f(&w_edge);
        let out = primary_update(&w_edge, &phi, &e, &Mat::zeros(2, 1), &gains);
        let gy = &gains.gamma_w * &y;
        assert!((out[0] - gy[0] * (1.0 - f)).abs() < 1e-12);
        assert!((out[1] - gy[1]).abs() < 1e-12);

        let free = PrimaryGains {
            projection: false,
            ..gains.clone()
        };
        assert_eq!(
            primary_update(&w_edge, &phi, &e, &Mat::zeros(2, 1), &free),
            gy
        );
    }

    #[test]
    fn projection_continuous_across_switching_surfaces() {
        let gamma = Mat::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        let set = ProjectionSet::new(1.0, 0.2);
        let y = Mat::from_column_slice(2, 1, &[1.0, 0.3]);
        let dir = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        // Across f = 0.
        let mut prev = f64::INFINITY;
        for k in 1..6 {
            let d = 10f64.powi(-k);
            let out_in = {
                let th = &dir * (set.alpha - d);
                let (f, g) = set.f(&th);
                gamma_projection(&th, &y, f, &g, &gamma)
            };
            let out_out = {
                let th = &dir * (set.alpha + d);
                let (f, g) = set.f(&th);
                gamma_projection(&th, &y, f, &g, &gamma)
            };
            let jump = (out_in - out_out).norm();
            assert!(jump < prev);
            prev = jump;
        }
        assert!(prev < 1e-3);
        // Across Tr(yᵀΓ∇f) = 0, inside the boundary layer.
        let th = &dir * (set.alpha + 0.1);
        let (f, g) = set.f(&th);
        let gg = &gamma * &g;
        let tangent = Mat::from_column_slice(2, 1, &[-gg[1], gg[0]]);
        for k in 1..6 {
            let d = 10f64.powi(-k);
            let y_out = &tangent + &g * d;
            let y_in = &tangent - &g * d;
            let correction = |y: &Mat| gamma_projection(&th, y, f, &g, &gamma) - &gamma * y;
            let jump = (correction(&y_out) - correction(&y_in)).norm();
            assert!(jump < 10.0 * d);
        }
    }

    fn spd(entries: &[f64], n: usize) -> Mat {
        let m = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
        &m * m.transpose() + Mat::identity(n, n) * 0.1
    }

    proptest! {
        #[test]
        fn projection_inequality_holds(
            n in 1usize..4,
            gamma_entries in prop::collection::vec(-1.0f64..1.0, 9),
            w_dir in prop::collection::vec(-1.0f64..1.0, 6),
            what_dir in prop::collection::vec(-1.0f64..1.0, 6),
            y_entries in prop::collection::vec(-5.0f64..5.0, 6),
            w_scale in 0.0f64..1.0,
            what_scale in 0.0f64..1.0,
        ) {
            let cols = 2;
            let set = ProjectionSet::new(1.3, 0.2);
            let gamma = spd(&gamma_entries, n);
            let w = Mat::from_iterator(n, cols, w_dir.iter().copied().take(n * cols));
            let w_hat = Mat::from_iterator(n, cols, what_dir.iter().copied().take(n * cols));
            prop_assume!(w.norm() > 1e-6 && w_hat.norm() > 1e-6);
            let w = scaled(&w, w_scale * set.alpha);
            let w_hat = scaled(&w_hat, what_scale * set.radius());
            let y = Mat::from_iterator(n, cols, y_entries.iter().copied().take(n * cols));
            let (f, g) = set.f(&w_hat);
            let proj = gamma_projection(&w_hat, &y, f, &g, &gamma);
            let lhs = trace_inner(&(&w_hat - &w), &(gamma.clone().try_inverse().unwrap() * proj - &y));
            prop_assert!(lhs <= 1e-12, "lhs = {lhs}");
        }
    }
}
