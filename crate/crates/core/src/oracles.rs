//! Independent reference computations used by the verification suites.
//!
//! Everything here recomputes quantities by brute force (central finite
//! differences, explicit matrix assembly, normal equations) and deliberately
//! shares no code with the reverse/forward-mode paths it is used to check.
//! These routines are O(d^2) or worse and intended for small models only.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::Result;
use crate::nn::{self, NetworkSpec, ParamVector};

/// Central-finite-difference gradient of the training cost.
pub fn fd_cost_gradient(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    h: f64,
) -> Result<ParamVector> {
    let mut grad = vec![0.0; params.len()];
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let (plus, _) = nn::cost_and_grad(&probe, spec, dataset)?;
        probe.as_mut_slice()[i] = orig - h;
        let (minus, _) = nn::cost_and_grad(&probe, spec, dataset)?;
        probe.as_mut_slice()[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(ParamVector(grad))
}

/// Finite-difference Hessian-vector product from two analytic gradients:
/// `(grad J(theta + h v) - grad J(theta - h v)) / 2h`.
pub fn fd_hvp(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    v: &ParamVector,
    h: f64,
) -> Result<ParamVector> {
    let mut plus = params.clone();
    plus.add_scaled(h, v);
    let mut minus = params.clone();
    minus.add_scaled(-h, v);
    let (_, gp) = nn::cost_and_grad(&plus, spec, dataset)?;
    let (_, gm) = nn::cost_and_grad(&minus, spec, dataset)?;
    let mut out = gp;
    out.add_scaled(-1.0, &gm);
    out.scale(1.0 / (2.0 * h));
    Ok(out)
}

/// Parameter-output Jacobian for one input, one column per parameter, built
/// from per-parameter central differences of the forward pass.
pub fn fd_output_jacobian(
    params: &ParamVector,
    spec: &NetworkSpec,
    input: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    let m = spec.output_dim();
    let mut jac = vec![vec![0.0; params.len()]; m];
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = nn::forward(&probe, spec, input)?;
        probe.as_mut_slice()[i] = orig - h;
        let minus = nn::forward(&probe, spec, input)?;
        probe.as_mut_slice()[i] = orig;
        for r in 0..m {
            jac[r][i] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Explicit damped Gauss-Newton matrix `(1/N) sum_i J_i^T H_i J_i +
/// (damping + l2) I`, assembled from finite-difference Jacobians.
pub fn explicit_gnh(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    damping: f64,
    h: f64,
) -> Result<DMatrix<f64>> {
    let d = params.len();
    let m = spec.output_dim();
    let n = dataset.len() as f64;
    let mut g = DMatrix::<f64>::zeros(d, d);
    for r in 0..dataset.len() {
        let jac = fd_output_jacobian(params, spec, dataset.input(r), h)?;
        let y = nn::forward(params, spec, dataset.input(r))?;
        let hess = nn::output_hessian(&y, dataset.target(r), spec.loss_kind)?;
        let jm = DMatrix::from_fn(m, d, |i, j| jac[i][j]);
        let hm = DMatrix::from_row_slice(m, m, hess.as_slice());
        g += jm.transpose() * hm * jm / n;
    }
    for i in 0..d {
        g[(i, i)] += damping + spec.l2_strength;
    }
    Ok(g)
}

/// Row-major design matrix with the bias column appended, matching the
/// flattening order of a single-layer identity network (weights then bias).
pub fn design_matrix(dataset: &Dataset) -> DMatrix<f64> {
    let n = dataset.len();
    let p = dataset.input_dim();
    DMatrix::from_fn(n, p + 1, |r, c| {
        if c < p {
            dataset.input(r)[c]
        } else {
            1.0
        }
    })
}

/// Regression targets as a vector (single-output datasets).
pub fn target_vector(dataset: &Dataset) -> DVector<f64> {
    DVector::from_fn(dataset.len(), |r, _| match dataset.target(r) {
        crate::nn::TargetRef::Real(v) => v[0],
        crate::nn::TargetRef::Label(c) => c as f64,
    })
}

/// Closed-form ridge gradient `X^T (X theta - t) / N + l2 theta` for a
/// single-layer identity network with squared-error loss.
pub fn ridge_gradient(dataset: &Dataset, theta: &ParamVector, l2: f64) -> ParamVector {
    let x = design_matrix(dataset);
    let t = target_vector(dataset);
    let th = DVector::from_column_slice(theta.as_slice());
    let n = dataset.len() as f64;
    let g = x.transpose() * (&x * &th - t) / n + l2 * th;
    ParamVector(g.iter().copied().collect())
}

/// Closed-form ridge solution `(X^T X / N + l2 I)^-1 X^T t / N`.
pub fn ridge_solution(dataset: &Dataset, l2: f64) -> ParamVector {
    let x = design_matrix(dataset);
    let t = target_vector(dataset);
    let n = dataset.len() as f64;
    let d = x.ncols();
    let a = x.transpose() * &x / n + l2 * DMatrix::identity(d, d);
    let b = x.transpose() * t / n;
    let sol = a.lu().solve(&b).expect("ridge system is nonsingular");
    ParamVector(sol.iter().copied().collect())
}

/// Minimum-distance interpolant of an underdetermined least-squares problem:
/// `theta0 + X^+ (t - X theta0)`, via SVD pseudoinverse.
pub fn min_norm_interpolant(dataset: &Dataset, theta0: &ParamVector) -> ParamVector {
    let x = design_matrix(dataset);
    let t = target_vector(dataset);
    let th0 = DVector::from_column_slice(theta0.as_slice());
    let residual = t - &x * &th0;
    let pinv = x
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("svd converges");
    let sol = th0 + pinv * residual;
    ParamVector(sol.iter().copied().collect())
}
