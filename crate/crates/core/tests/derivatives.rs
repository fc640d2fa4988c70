//! Derivative oracles for the network module: every analytic quantity is
//! checked against an independent brute-force recomputation.

use influence_core::data::{self, Dataset, Targets};
use influence_core::nn::{
    self, Activation, LossKind, NetworkSpec, ParamVector, TargetRef,
};
use influence_core::oracles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn mlp_spec(widths: &[usize], activation: Activation, loss: LossKind, l2: f64) -> NetworkSpec {
    NetworkSpec::new(widths.to_vec(), activation, loss, l2).unwrap()
}

fn random_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
    nn::init_params(spec, seed)
}

fn random_direction(len: usize, seed: u64) -> ParamVector {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    ParamVector((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn regression_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    data::synth_regression(n, p, seed).unwrap()
}

fn classification_dataset(n: usize, p: usize, classes: usize, seed: u64) -> Dataset {
    data::synth_classification(n, p, classes, seed).unwrap()
}

#[test]
fn forward_identity_single_layer_is_linear_map() {
    let spec = mlp_spec(&[1, 1], Activation::Identity, LossKind::SquaredError, 0.0);
    // weights [[2]], bias [0]
    let params = ParamVector(vec![2.0, 0.0]);
    let y = nn::forward(&params, &spec, &[3.0]).unwrap();
    assert_eq!(y, vec![6.0]);
}

#[test]
fn forward_zero_relu_net_is_zero() {
    let spec = mlp_spec(&[3, 4, 2], Activation::Relu, LossKind::SquaredError, 0.0);
    let params = ParamVector::zeros(spec.param_count());
    let y = nn::forward(&params, &spec, &[0.4, -1.0, 2.5]).unwrap();
    assert_eq!(y, vec![0.0, 0.0]);
}

#[test]
fn forward_matches_straight_line_recomputation() {
    // 2-layer [2,2,1] tanh net with seeded parameters; recompute the
    // composition by hand with explicit indexing.
    let spec = mlp_spec(&[2, 2, 1], Activation::Tanh, LossKind::SquaredError, 0.0);
    let params = random_params(&spec, 7);
    let x = [1.0, -1.0];
    let got = nn::forward(&params, &spec, &x).unwrap();

    let p = params.as_slice();
    // layer 0: weights p[0..4] row-major (2x2), bias p[4..6]
    let h0 = (p[0] * x[0] + p[1] * x[1] + p[4]).tanh();
    let h1 = (p[2] * x[0] + p[3] * x[1] + p[5]).tanh();
    // layer 1: weights p[6..8], bias p[8]
    let y = p[6] * h0 + p[7] * h1 + p[8];
    assert!((got[0] - y).abs() < 1e-14, "{} vs {y}", got[0]);
}

#[test]
fn forward_rejects_wrong_input_dim() {
    let spec = mlp_spec(&[3, 2], Activation::Identity, LossKind::SquaredError, 0.0);
    let params = ParamVector::zeros(spec.param_count());
    assert!(nn::forward(&params, &spec, &[1.0, 2.0]).is_err());
}

#[test]
fn gradient_matches_closed_form_ridge() {
    let ds = regression_dataset(30, 4, 3);
    let spec = mlp_spec(&[4, 1], Activation::Identity, LossKind::SquaredError, 0.3);
    let theta = random_params(&spec, 11);
    let (_, grad) = nn::cost_and_grad(&theta, &spec, &ds).unwrap();
    let want = oracles::ridge_gradient(&ds, &theta, 0.3);
    for (a, b) in grad.as_slice().iter().zip(want.as_slice()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn gradient_vanishes_at_ridge_optimum() {
    let ds = regression_dataset(25, 3, 5);
    let spec = mlp_spec(&[3, 1], Activation::Identity, LossKind::SquaredError, 0.2);
    let theta = oracles::ridge_solution(&ds, 0.2);
    let (_, grad) = nn::cost_and_grad(&theta, &spec, &ds).unwrap();
    assert!(grad.norm() <= 1e-10, "gradient norm {}", grad.norm());
}

#[test]
fn gradient_matches_finite_differences_at_random_points() {
    let cases = [
        (
            mlp_spec(&[3, 5, 2], Activation::Tanh, LossKind::SquaredError, 0.01),
            regression_dataset(12, 3, 21),
            false,
        ),
        (
            mlp_spec(&[3, 4, 2], Activation::Relu, LossKind::SoftmaxCrossEntropy, 0.0),
            classification_dataset(12, 3, 2, 22),
            true,
        ),
        (
            mlp_spec(&[3, 4, 1], Activation::Sigmoid, LossKind::BinaryCrossEntropy, 0.05),
            classification_dataset(12, 3, 2, 23),
            true,
        ),
    ];
    // Regression targets are 1-dim; reuse datasets accordingly.
    for (spec, ds, _classification) in cases {
        let ds = if spec.output_dim() == 2 && !ds.is_classification() {
            classification_dataset(12, 3, 2, 24)
        } else {
            ds
        };
        for trial in 0..10 {
            let theta = random_params(&spec, 100 + trial);
            let (_, grad) = nn::cost_and_grad(&theta, &spec, &ds).unwrap();
            let fd = oracles::fd_cost_gradient(&theta, &spec, &ds, 1e-5).unwrap();
            for (i, (a, b)) in grad.as_slice().iter().zip(fd.as_slice()).enumerate() {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
                assert!(rel <= 1e-5, "{spec:?} coord {i}: {a} vs {b} (rel {rel:.2e})");
            }
        }
    }
}

#[test]
fn hvp_of_zero_direction_is_zero() {
    let spec = mlp_spec(&[2, 3, 1], Activation::Tanh, LossKind::SquaredError, 0.1);
    let ds = regression_dataset(10, 2, 1);
    let theta = random_params(&spec, 2);
    let out = nn::hvp(&theta, &spec, &ds, &ParamVector::zeros(spec.param_count())).unwrap();
    assert!(out.norm() == 0.0);
}

#[test]
fn hvp_matches_ridge_quadratic_hessian() {
    let ds = regression_dataset(20, 3, 8);
    let spec = mlp_spec(&[3, 1], Activation::Identity, LossKind::SquaredError, 0.15);
    let theta = random_params(&spec, 3);
    let v = random_direction(spec.param_count(), 4);
    let got = nn::hvp(&theta, &spec, &ds, &v).unwrap();
    // (X^T X / N + l2 I) v, via the design matrix directly.
    let x = oracles::design_matrix(&ds);
    let vv = nalgebra::DVector::from_column_slice(v.as_slice());
    let want = x.transpose() * (&x * &vv) / ds.len() as f64 + 0.15 * vv;
    for (a, b) in got.as_slice().iter().zip(want.iter()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn hvp_matches_finite_difference_of_gradient() {
    let spec = mlp_spec(&[3, 4, 2], Activation::Tanh, LossKind::SoftmaxCrossEntropy, 0.02);
    assert!(spec.param_count() <= 50);
    let ds = classification_dataset(15, 3, 2, 31);
    for trial in 0..5 {
        let theta = random_params(&spec, 40 + trial);
        let v = random_direction(spec.param_count(), 50 + trial);
        let got = nn::hvp(&theta, &spec, &ds, &v).unwrap();
        let fd = oracles::fd_hvp(&theta, &spec, &ds, &v, 1e-5).unwrap();
        for (i, (a, b)) in got.as_slice().iter().zip(fd.as_slice()).enumerate() {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
            assert!(rel <= 1e-4, "coord {i}: {a} vs {b} (rel {rel:.2e})");
        }
    }
}

#[test]
fn jvp_identity_net_is_input_weighted_slice() {
    let spec = mlp_spec(&[3, 1], Activation::Identity, LossKind::SquaredError, 0.0);
    let theta = random_params(&spec, 6);
    let v = ParamVector(vec![0.5, -1.0, 2.0, 0.25]);
    let x = [1.5, -0.5, 3.0];
    let got = nn::jvp_outputs(&theta, &spec, &x, &v).unwrap();
    // J = [x, 1]; result = x . v_w + v_b
    let want = 1.5 * 0.5 + (-0.5) * (-1.0) + 3.0 * 2.0 + 0.25;
    assert!((got[0] - want).abs() < 1e-14);
}

#[test]
fn jvp_basis_vectors_recover_jacobian_columns() {
    let spec = mlp_spec(&[2, 3, 2], Activation::Sigmoid, LossKind::SquaredError, 0.0);
    assert!(spec.param_count() <= 50);
    let theta = random_params(&spec, 9);
    let x = [0.7, -1.2];
    let jac = oracles::fd_output_jacobian(&theta, &spec, &x, 1e-5).unwrap();
    for i in 0..spec.param_count() {
        let mut e = ParamVector::zeros(spec.param_count());
        e.as_mut_slice()[i] = 1.0;
        let col = nn::jvp_outputs(&theta, &spec, &x, &e).unwrap();
        for r in 0..spec.output_dim() {
            let rel = (col[r] - jac[r][i]).abs() / col[r].abs().max(jac[r][i].abs()).max(1e-6);
            assert!(rel <= 1e-6, "col {i} row {r}: {} vs {}", col[r], jac[r][i]);
        }
    }
}

#[test]
fn jvp_is_homogeneous() {
    let spec = mlp_spec(&[2, 4, 3], Activation::Tanh, LossKind::SquaredError, 0.0);
    let theta = random_params(&spec, 12);
    let v = random_direction(spec.param_count(), 13);
    let x = [0.3, 0.9];
    let once = nn::jvp_outputs(&theta, &spec, &x, &v).unwrap();
    let twice = nn::jvp_outputs(&theta, &spec, &x, &v.scaled(2.0)).unwrap();
    for (a, b) in once.iter().zip(&twice) {
        assert!((2.0 * a - b).abs() <= 1e-12);
    }
}

#[test]
fn gnh_equals_hessian_for_linear_squared_error() {
    let ds = regression_dataset(18, 4, 14);
    let spec = mlp_spec(&[4, 1], Activation::Identity, LossKind::SquaredError, 0.0);
    let theta = random_params(&spec, 15);
    let v = random_direction(spec.param_count(), 16);
    let h = nn::hvp(&theta, &spec, &ds, &v).unwrap();
    let g = nn::gnh_vp(&theta, &spec, &ds, &v, 0.0).unwrap();
    for (a, b) in h.as_slice().iter().zip(g.as_slice()) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn gnh_zero_direction_is_zero() {
    let spec = mlp_spec(&[2, 3, 2], Activation::Relu, LossKind::SoftmaxCrossEntropy, 0.0);
    let ds = classification_dataset(9, 2, 2, 17);
    let theta = random_params(&spec, 18);
    let out = nn::gnh_vp(&theta, &spec, &ds, &ParamVector::zeros(spec.param_count()), 0.5).unwrap();
    assert_eq!(out.norm(), 0.0);
}

#[test]
fn gnh_matches_explicit_assembly() {
    let spec = mlp_spec(&[2, 3, 2], Activation::Tanh, LossKind::SoftmaxCrossEntropy, 0.03);
    assert!(spec.param_count() <= 50);
    let ds = classification_dataset(11, 2, 2, 19);
    let theta = random_params(&spec, 20);
    let g = oracles::explicit_gnh(&theta, &spec, &ds, 0.07, 1e-5).unwrap();
    for trial in 0..4 {
        let v = random_direction(spec.param_count(), 60 + trial);
        let got = nn::gnh_vp(&theta, &spec, &ds, &v, 0.07).unwrap();
        let vv = nalgebra::DVector::from_column_slice(v.as_slice());
        let want = &g * vv;
        for (a, b) in got.as_slice().iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn curvature_products_are_linear_and_symmetric() {
    let spec = mlp_spec(&[3, 5, 2], Activation::Sigmoid, LossKind::SoftmaxCrossEntropy, 0.01);
    let ds = classification_dataset(13, 3, 2, 27);
    let theta = random_params(&spec, 28);
    let d = spec.param_count();
    for trial in 0..5 {
        let u = random_direction(d, 70 + trial);
        let v = random_direction(d, 80 + trial);
        let applies: [&dyn Fn(&ParamVector, &ParamVector) -> ParamVector; 2] = [
            &|t, w| nn::hvp(t, &spec, &ds, w).unwrap(),
            &|t, w| nn::gnh_vp(t, &spec, &ds, w, 0.0).unwrap(),
        ];
        for apply in applies {
            // additivity + homogeneity
            let mut combo = u.clone();
            combo.add_scaled(2.5, &v);
            let lhs = apply(&theta, &combo);
            let mut rhs = apply(&theta, &u);
            rhs.add_scaled(2.5, &apply(&theta, &v));
            let scale = lhs.norm().max(rhs.norm()).max(1e-12);
            assert!(lhs.sub(&rhs).norm() / scale <= 1e-10);
            // symmetry u' A v = v' A u
            let a = u.dot(&apply(&theta, &v));
            let b = v.dot(&apply(&theta, &u));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        }
    }
}

#[test]
fn gnh_quadratic_form_is_nonnegative() {
    let spec = mlp_spec(&[3, 4, 3], Activation::Relu, LossKind::SoftmaxCrossEntropy, 0.0);
    let ds = classification_dataset(10, 3, 3, 33);
    let theta = random_params(&spec, 34);
    for trial in 0..20 {
        let v = random_direction(spec.param_count(), 90 + trial);
        let gv = nn::gnh_vp(&theta, &spec, &ds, &v, 0.0).unwrap();
        let q = v.dot(&gv);
        assert!(q >= -1e-10 * v.dot(&v), "quadratic form {q}");
    }
}

#[test]
fn squared_error_uses_half_convention() {
    // loss(y, t) = 1/2 ||y - t||^2, so cost of a single example with y = t + r
    // is |r|^2 / 2.
    let spec = mlp_spec(&[1, 1], Activation::Identity, LossKind::SquaredError, 0.0);
    let params = ParamVector(vec![1.0, 0.0]);
    let ds = Dataset::from_parts(
        vec![3.0],
        1,
        Targets::Real {
            values: vec![1.0],
            dim: 1,
        },
    )
    .unwrap();
    let (cost, _) = nn::cost_and_grad(&params, &spec, &ds).unwrap();
    assert!((cost - 2.0).abs() < 1e-15); // (3-1)^2/2
}

#[test]
fn output_hessian_validates_target_dim() {
    let err = nn::output_hessian(&[0.0, 0.0], TargetRef::Real(&[1.0]), LossKind::SquaredError);
    assert!(err.is_err());
}
