//! Dense linear-algebra helpers, the continuous Lyapunov solver, a Jacobi
//! symmetric eigenvalue routine and the fixed-step RK4 integrator.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense real matrix.
pub type Mat = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not Hurwitz: eigenvalue {re} + {im}i has non-negative real part")]
    NotHurwitz { re: f64, im: f64 },
    #[error("singular linear system")]
    Singular,
    #[error("Lyapunov residual {residual:e} exceeds bound {bound:e}")]
    LyapunovResidual { residual: f64, bound: f64 },
    #[error("non-finite derivative at t = {t}, state index {index}")]
    NonFiniteDerivative { t: f64, index: usize },
    #[error("step size must be positive, got {dt}")]
    BadStep { dt: f64 },
}

pub fn is_finite_mat(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Trace inner product `Tr(aᵀb)`.
pub fn trace_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest absolute entry of `m - mᵀ`, relative to `max(1, max|m|)`.
pub fn relative_asymmetry(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    let mut scale = 1.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[(i, j)].abs());
            if j > i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
    }
    worst / scale
}

fn check_symmetric(m: &Mat) -> Result<(), NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let asym = relative_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(NumericsError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>, NumericsError> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Work on the exactly symmetrized copy.
    let mut a = (m + m.transpose()) * 0.5;
    let total: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-17 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let negligible = 100.0 * apq.abs();
                if sweep > 3
                    && a[(p, p)].abs() + negligible == a[(p, p)].abs()
                    && a[(q, q)].abs() + negligible == a[(q, q)].abs()
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigen_sym(m: &Mat) -> Result<f64, NumericsError> {
    Ok(sym_eigenvalues(m)?.first().copied().unwrap_or(0.0))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigen_sym(m: &Mat) -> Result<f64, NumericsError> {
    Ok(sym_eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

/// Fails unless `m` is symmetric positive definite.
pub fn require_spd(m: &Mat) -> Result<f64, NumericsError> {
    let lmin = min_eigen_sym(m)?;
    if lmin <= 0.0 {
        return Err(NumericsError::NotPositiveDefinite {
            min_eigenvalue: lmin,
        });
    }
    Ok(lmin)
}

/// Fails with the offending eigenvalue unless every eigenvalue of `a` lies in
/// the open left half-plane.
pub fn require_hurwitz(a: &Mat) -> Result<(), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for ev in a.complex_eigenvalues().iter() {
        if !(ev.re < 0.0) {
            return Err(NumericsError::NotHurwitz {
                re: ev.re,
                im: ev.im,
            });
        }
    }
    Ok(())
}

/// Solves `A_mᵀP + P A_m + Q_m = 0` through the Kronecker-sum vectorization.
pub fn solve_lyapunov(a_m: &Mat, q_m: &Mat) -> Result<Mat, NumericsError> {
    require_hurwitz(a_m)?;
    let n = a_m.nrows();
    if q_m.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch {
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", q_m.nrows(), q_m.ncols()),
        });
    }
    require_spd(q_m)?;

    // Column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec(P), vec(PA) = (Aᵀ ⊗ I) vec(P).
    let eye = Mat::identity(n, n);
    let at = a_m.transpose();
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -Vector::from_column_slice(q_m.as_slice());
    let vec_p = k.lu().solve(&rhs).ok_or(NumericsError::Singular)?;
    let p = Mat::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;

    let residual = (a_m.transpose() * &p + &p * a_m + q_m).norm();
    let bound = 1e-10 * q_m.norm();
    if residual > bound {
        return Err(NumericsError::LyapunovResidual { residual, bound });
    }
    Ok(p)
}

/// Left pseudoinverse `(BᵀB)⁻¹Bᵀ` of a full-column-rank matrix.
pub fn left_pseudoinverse(b: &Mat) -> Result<Mat, NumericsError> {
    let btb = b.transpose() * b;
    let inv = btb.try_inverse().ok_or(NumericsError::Singular)?;
    Ok(inv * b.transpose())
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &Mat) -> Result<Mat, NumericsError> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(NumericsError::NotPositiveDefinite {
            min_eigenvalue: min_eigen_sym(m).unwrap_or(f64::NAN),
        })?;
    Ok(chol.inverse())
}

/// One classical fourth-order Runge–Kutta step with a fallible derivative.
pub fn try_rk4_step<F, E>(mut deriv: F, state: &Vector, t: f64, dt: f64) -> Result<Vector, E>
where
    F: FnMut(&Vector, f64) -> Result<Vector, E>,
    E: From<NumericsError>,
{
    if !(dt > 0.0) {
        return Err(NumericsError::BadStep { dt }.into());
    }
    let check = |k: &Vector, tk: f64| -> Result<(), NumericsError> {
        match k.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(NumericsError::NonFiniteDerivative { t: tk, index }),
            None => Ok(()),
        }
    };
    let half = 0.5 * dt;
    let k1 = deriv(state, t)?;
    check(&k1, t)?;
    let k2 = deriv(&(state + &k1 * half), t + half)?;
    check(&k2, t + half)?;
    let k3 = deriv(&(state + &k2 * half), t + half)?;
    check(&k3, t + half)?;
    let k4 = deriv(&(state + &k3 * dt), t + dt)?;
    check(&k4, t + dt)?;
    Ok(state + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(mut deriv: F, state: &Vector, t: f64, dt: f64) -> Result<Vector, NumericsError>
where
    F: FnMut(&Vector, f64) -> Vector,
{
    try_rk4_step(
        |s: &Vector, tk| Ok::<_, NumericsError>(deriv(s, tk)),
        state,
        t,
        dt,
    )
}
