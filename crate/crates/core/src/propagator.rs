//! One-period integration of the linear system M' = A(x, λ)M.
//!
//! Embedded Dormand-Prince 5(4) with step rejection on the embedded error
//! estimate. The coefficients are smooth trigonometric polynomials, so an
//! explicit adaptive scheme is adequate at desk scale. Backward runs keep
//! the sign in the step size instead of inverting matrices.

use num_complex::Complex64;
use thiserror::Error;

use crate::cmatrix::CMat;
use crate::coefficients::CoefficientProvider;
use crate::companion::assemble_companion;

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("step budget exhausted at x = {x_reached} (of [{x_from}, {x_to}])")]
    StepLimit { x_reached: f64, x_from: f64, x_to: f64 },
    #[error("state diverged (non-finite) near x = {x}")]
    Divergence { x: f64 },
}

/// Adaptive-integrator tolerances and budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            initial_step: 1e-3,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(format!(
                "tolerances must be positive: rel_tol={}, abs_tol={}",
                self.rel_tol, self.abs_tol
            ));
        }
        if !(self.initial_step > 0.0) {
            return Err(format!("initial_step must be positive: {}", self.initial_step));
        }
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        Self {
            rel_tol: self.rel_tol / 2.0,
            abs_tol: self.abs_tol / 2.0,
            ..*self
        }
    }
}

/// The fundamental matrix over one period, X(1, λ) with X(0, λ) = I.
#[derive(Debug, Clone)]
pub struct Monodromy {
    pub x1: CMat,
    pub lambda: Complex64,
    pub settings: IntegratorSettings,
}

/// A solution sampled on an evenly spaced grid (forward or backward).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order minus embedded 4th-order weights (error estimator).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Integrates M' = A(x)M from `x_a` to `x_b` (either direction) with
/// M(x_a) = `m0`, for an arbitrary matrix provider.
pub fn integrate_matrix_ode(
    a: &dyn Fn(f64) -> CMat,
    x_a: f64,
    x_b: f64,
    m0: CMat,
    settings: &IntegratorSettings,
) -> Result<CMat, PropagateError> {
    if x_a == x_b {
        return Ok(m0);
    }
    let direction = (x_b - x_a).signum();
    let span = (x_b - x_a).abs();
    let mut x = x_a;
    let mut y = m0;
    let mut h = direction * settings.initial_step.min(span);
    let mut k1 = a(x) .mul_checked(&y, x)?;
    let mut steps = 0usize;

    while (x_b - x) * direction > 0.0 {
        if steps >= settings.max_steps {
            return Err(PropagateError::StepLimit {
                x_reached: x,
                x_from: x_a,
                x_to: x_b,
            });
        }
        steps += 1;

        if (x + h - x_b) * direction > 0.0 {
            h = x_b - x;
        }

        // Stages. k1 is carried over from the previous step (FSAL).
        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        for stage in 1..7 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let w = A[stage][j];
                if w != 0.0 {
                    arg.scaled_add_assign(Complex64::new(h * w, 0.0), kj);
                }
            }
            let xs = x + C[stage] * h;
            k.push(a(xs).mul_checked(&arg, xs)?);
        }

        // 5th-order update uses the row A[6] (FSAL construction), so the
        // last stage argument is already the candidate solution.
        let mut y_next = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let w = A[6][j];
            if w != 0.0 {
                y_next.scaled_add_assign(Complex64::new(h * w, 0.0), kj);
            }
        }

        // Embedded error estimate.
        let mut err_mat = CMat::zeros(y.rows(), y.cols());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_mat.scaled_add_assign(Complex64::new(h * E[j], 0.0), kj);
            }
        }
        let mut acc = 0.0f64;
        let count = (y.rows() * y.cols()) as f64;
        for ((e, y0), y1) in err_mat
            .entries()
            .iter()
            .zip(y.entries().iter())
            .zip(y_next.entries().iter())
        {
            let scale = settings.abs_tol + settings.rel_tol * y0.norm().max(y1.norm());
            let r = e.norm() / scale;
            acc += r * r;
        }
        let err = (acc / count).sqrt();

        if !err.is_finite() {
            return Err(PropagateError::Divergence { x });
        }

        if err <= 1.0 {
            x += h;
            y = y_next;
            if !y.is_finite() {
                return Err(PropagateError::Divergence { x });
            }
            // FSAL: last stage of the accepted step is k1 of the next.
            k1 = k.pop().expect("7 stages");
        }

        let factor = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };
        h *= factor;
        if h.abs() < 1e-14 * span.max(1.0) {
            return Err(PropagateError::StepLimit {
                x_reached: x,
                x_from: x_a,
                x_to: x_b,
            });
        }
    }
    Ok(y)
}

trait MulChecked {
    fn mul_checked(&self, rhs: &CMat, x: f64) -> Result<CMat, PropagateError>;
}

impl MulChecked for CMat {
    fn mul_checked(&self, rhs: &CMat, x: f64) -> Result<CMat, PropagateError> {
        let out = self * rhs;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(PropagateError::Divergence { x })
        }
    }
}

/// X(1, λ): fundamental matrix of the companion system over one period.
pub fn integrate_fundamental(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    settings: &IntegratorSettings,
) -> Result<Monodromy, PropagateError> {
    let d = set.order() * set.dim();
    let a = |x: f64| assemble_companion(set, lambda, x);
    let x1 = integrate_matrix_ode(&a, 0.0, 1.0, CMat::identity(d), settings)?;
    Ok(Monodromy {
        x1,
        lambda,
        settings: *settings,
    })
}

/// Propagates an arbitrary matrix initial value over [x_a, x_b].
pub fn integrate_interval(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    x_a: f64,
    x_b: f64,
    m0: CMat,
    settings: &IntegratorSettings,
) -> Result<CMat, PropagateError> {
    let a = |x: f64| assemble_companion(set, lambda, x);
    integrate_matrix_ode(&a, x_a, x_b, m0, settings)
}

/// The boundary matrix (Y_j^(ν-1)(1, λ))_{ν,j} - e^{it}·I assembled from n
/// separate integrations with canonical initial data: block column j starts
/// as the j-th identity block. An independent route to X(1, λ) - e^{it}I.
pub fn canonical_boundary_matrix(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<CMat, PropagateError> {
    let n = set.order();
    let m = set.dim();
    let d = n * m;
    let a = |x: f64| assemble_companion(set, lambda, x);
    let mut out = CMat::zeros(d, d);
    for j in 0..n {
        let mut y0 = CMat::zeros(d, m);
        for i in 0..m {
            y0[(j * m + i, i)] = Complex64::ONE;
        }
        let y1 = integrate_matrix_ode(&a, 0.0, 1.0, y0, settings)?;
        out.set_block(0, j * m, &y1);
    }
    let phase = Complex64::from_polar(1.0, t);
    out.shift_diagonal(phase);
    Ok(out)
}

/// Samples the vector solution with initial state `init` at `x_a` on `count`
/// evenly spaced points through `x_b` (backward allowed).
pub fn trajectory(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    init: &[Complex64],
    x_a: f64,
    x_b: f64,
    count: usize,
    settings: &IntegratorSettings,
) -> Result<Trajectory, PropagateError> {
    assert!(count >= 2, "need at least two sample points");
    let d = set.order() * set.dim();
    assert_eq!(init.len(), d, "initial state must have {d} components");
    let a = |x: f64| assemble_companion(set, lambda, x);

    let mut state = CMat::from_fn(d, 1, |i, _| init[i]);
    let mut xs = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    xs.push(x_a);
    states.push(state.column(0));
    for step in 1..count {
        let x_prev = x_a + (x_b - x_a) * (step - 1) as f64 / (count - 1) as f64;
        let x_next = x_a + (x_b - x_a) * step as f64 / (count - 1) as f64;
        state = integrate_matrix_ode(&a, x_prev, x_next, state, settings)?;
        xs.push(x_next);
        states.push(state.column(0));
    }
    Ok(Trajectory { xs, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use crate::companion::companion_trace_integral;
    use crate::eigensolve::determinant;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn default_settings() -> IntegratorSettings {
        IntegratorSettings::default()
    }

    #[test]
    fn scalar_first_order_closed_form() {
        // i y' = λ y with λ = π: X(1) = e^{-iπ} = -1.
        let set = CoefficientSet::zero(1, 1);
        let mono = integrate_fundamental(&set, c(PI, 0.0), &default_settings()).unwrap();
        assert!((mono.x1[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn second_order_hyperbolic_closed_form() {
        // -y'' = -y: A = [[0,1],[1,0]], X(1) = [[cosh 1, sinh 1],[sinh 1, cosh 1]].
        let set = CoefficientSet::zero(2, 1);
        let mono = integrate_fundamental(&set, c(-1.0, 0.0), &default_settings()).unwrap();
        let (ch, sh) = (1.0f64.cosh(), 1.0f64.sinh());
        assert!((mono.x1[(0, 0)] - c(ch, 0.0)).norm() < 1e-9);
        assert!((mono.x1[(0, 1)] - c(sh, 0.0)).norm() < 1e-9);
        assert!((mono.x1[(1, 0)] - c(sh, 0.0)).norm() < 1e-9);
        assert!((mono.x1[(1, 1)] - c(ch, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_provider_integrates_to_identity() {
        let a = |_: f64| CMat::zeros(3, 3);
        let out = integrate_matrix_ode(&a, 0.0, 1.0, CMat::identity(3), &default_settings()).unwrap();
        assert!((&out - &CMat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn interval_degenerate_and_group_property() {
        let set = CoefficientSet::random_pt(2, 2, 2, 1.0, 21).unwrap();
        let lambda = c(0.8, 0.1);
        let s = default_settings();
        let m0 = CMat::identity(4);

        // x_a == x_b returns the initial value untouched.
        let same = integrate_interval(&set, lambda, 0.4, 0.4, m0.clone(), &s).unwrap();
        assert_eq!(same, m0);

        // Forward then backward composes to the identity.
        let fwd = integrate_interval(&set, lambda, 0.0, 1.0, m0.clone(), &s).unwrap();
        let back = integrate_interval(&set, lambda, 1.0, 0.0, fwd, &s).unwrap();
        assert!((&back - &m0).max_abs() < 10.0 * 1e-9);

        // X[0,1] = X[0.5,1] · X[0,0.5].
        let x_full = integrate_interval(&set, lambda, 0.0, 1.0, m0.clone(), &s).unwrap();
        let x_half = integrate_interval(&set, lambda, 0.0, 0.5, m0.clone(), &s).unwrap();
        let x_rest = integrate_interval(&set, lambda, 0.5, 1.0, m0, &s).unwrap();
        assert!((&x_full - &(&x_rest * &x_half)).max_abs() < 1e-8);
    }

    #[test]
    fn scalar_half_interval_closed_form() {
        // y' = -iλy over [0, 0.5] with λ = 1: e^{-0.5i}.
        let set = CoefficientSet::zero(1, 1);
        let out = integrate_interval(
            &set,
            c(1.0, 0.0),
            0.0,
            0.5,
            CMat::identity(1),
            &default_settings(),
        )
        .unwrap();
        assert!((out[(0, 0)] - Complex64::from_polar(1.0, -0.5)).norm() < 1e-10);
    }

    #[test]
    fn liouville_identity_holds() {
        for (n, m, seed) in [(1usize, 1usize, 1u64), (2, 1, 2), (3, 1, 3), (2, 2, 4)] {
            let set = CoefficientSet::random_pt(n, m, 2, 0.8, seed).unwrap();
            let lambda = c(0.7, -0.4);
            let mono = integrate_fundamental(&set, lambda, &default_settings()).unwrap();
            let det = determinant(&mono.x1);
            let want = companion_trace_integral(&set, lambda).exp();
            let rel = (det - want).norm() / want.norm();
            assert!(rel < 1e-8, "(n,m)=({n},{m}): rel error {rel:.2e}");
        }
    }

    #[test]
    fn canonical_boundary_matrix_scalar_case() {
        // n = 1: the boundary matrix is X(1,λ) - e^{it}I by definition.
        let set = CoefficientSet::zero(1, 1);
        let b = canonical_boundary_matrix(&set, c(0.0, 0.0), 0.0, &default_settings()).unwrap();
        assert!(b[(0, 0)].norm() < 1e-10);

        let set = CoefficientSet::random_pt(1, 2, 2, 1.0, 8).unwrap();
        let lambda = c(0.3, 0.2);
        let t = 1.1;
        let b = canonical_boundary_matrix(&set, lambda, t, &default_settings()).unwrap();
        let mono = integrate_fundamental(&set, lambda, &default_settings()).unwrap();
        let mut shifted = mono.x1.clone();
        shifted.shift_diagonal(Complex64::from_polar(1.0, t));
        assert!((&b - &shifted).max_abs() < 1e-8);
    }

    #[test]
    fn canonical_boundary_matrix_determinant_matches() {
        let set = CoefficientSet::random_pt(3, 1, 2, 0.8, 17).unwrap();
        let lambda = c(1.0, 0.5);
        let t = 2.3;
        let s = default_settings();
        let b = canonical_boundary_matrix(&set, lambda, t, &s).unwrap();
        let mono = integrate_fundamental(&set, lambda, &s).unwrap();
        let mut shifted = mono.x1.clone();
        shifted.shift_diagonal(Complex64::from_polar(1.0, t));
        let (d1, d2) = (determinant(&b), determinant(&shifted));
        let rel = (d1 - d2).norm() / d2.norm().max(1.0);
        assert!(rel < 1e-6, "rel {rel:.2e}");
    }

    #[test]
    fn trajectory_unit_modulus_and_linearity() {
        let set = CoefficientSet::zero(1, 1);
        let s = default_settings();
        let traj = trajectory(&set, c(2.2, 0.0), &[Complex64::ONE], 0.0, 1.0, 11, &s).unwrap();
        assert_eq!(traj.xs.len(), 11);
        for st in &traj.states {
            assert!((st[0].norm() - 1.0).abs() < 1e-10);
        }

        // Endpoint equals X(1,λ)·init.
        let set = CoefficientSet::random_pt(2, 1, 2, 1.0, 5).unwrap();
        let lambda = c(0.4, 0.3);
        let init = [c(0.7, -0.1), c(0.2, 0.9)];
        let traj = trajectory(&set, lambda, &init, 0.0, 1.0, 9, &s).unwrap();
        let mono = integrate_fundamental(&set, lambda, &s).unwrap();
        let v0 = CMat::from_fn(2, 1, |i, _| init[i]);
        let want = &mono.x1 * &v0;
        let got = traj.states.last().unwrap();
        let err = (got[0] - want[(0, 0)]).norm().max((got[1] - want[(1, 0)]).norm());
        assert!(err < 10.0 * 1e-9, "err {err:.2e}");

        // Zero initial state stays identically zero.
        let traj = trajectory(&set, lambda, &[Complex64::ZERO; 2], 0.0, 1.0, 5, &s).unwrap();
        assert!(traj.states.iter().all(|st| st.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn tolerance_convergence() {
        let set = CoefficientSet::random_pt(2, 2, 2, 1.0, 31).unwrap();
        let lambda = c(1.5, -0.3);
        let coarse = IntegratorSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            ..Default::default()
        };
        let fine = coarse.halved();
        let a = integrate_fundamental(&set, lambda, &coarse).unwrap();
        let b = integrate_fundamental(&set, lambda, &fine).unwrap();
        assert!((&a.x1 - &b.x1).max_abs() < 10.0 * 1e-8);
    }

    #[test]
    fn step_budget_exhaustion_reports_position() {
        let set = CoefficientSet::zero(2, 1);
        let tight = IntegratorSettings {
            max_steps: 3,
            ..Default::default()
        };
        match integrate_fundamental(&set, c(100.0, 0.0), &tight) {
            Err(PropagateError::StepLimit { x_reached, .. }) => {
                assert!((0.0..1.0).contains(&x_reached));
            }
            other => panic!("expected step limit, got {other:?}"),
        }
    }
}
