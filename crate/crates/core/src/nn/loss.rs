//! Loss evaluation on network outputs, generic over the scalar type so the
//! same code serves values, gradients, and dual-number tangents.

use crate::error::Result;
use crate::nn::scalar::Scalar;
use crate::nn::spec::{LossKind, OutputHessian, TargetRef};

/// Numerically stable `ln(1 + exp(x))`, branching on the primal only.
#[inline]
fn softplus<S: Scalar>(x: S) -> S {
    if x.value() > 0.0 {
        x + (S::from_f64(1.0) + (-x).exp()).ln()
    } else {
        (S::from_f64(1.0) + x.exp()).ln()
    }
}

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    let one = S::from_f64(1.0);
    one / (one + (-x).exp())
}

/// Softmax with a primal-only max shift; exact for dual inputs because the
/// shift is a constant.
fn softmax<S: Scalar>(y: &[S]) -> Vec<S> {
    let shift = y.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<S> = y.iter().map(|&v| (v - S::from_f64(shift)).exp()).collect();
    let total = exps
        .iter()
        .fold(S::from_f64(0.0), |acc, &e| acc + e);
    exps.into_iter().map(|e| e / total).collect()
}

fn logsumexp<S: Scalar>(y: &[S]) -> S {
    let shift = y.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
    let sum = y
        .iter()
        .fold(S::from_f64(0.0), |acc, &v| acc + (v - S::from_f64(shift)).exp());
    S::from_f64(shift) + sum.ln()
}

impl LossKind {
    /// Loss value at outputs `y` for target `t`.
    pub(crate) fn loss<S: Scalar>(self, y: &[S], t: TargetRef<'_>) -> S {
        match self {
            LossKind::SquaredError => {
                let mut acc = S::from_f64(0.0);
                for (j, &yj) in y.iter().enumerate() {
                    let r = yj - S::from_f64(t.component(j));
                    acc = acc + r * r;
                }
                acc * S::from_f64(0.5)
            }
            LossKind::BinaryCrossEntropy => {
                let mut acc = S::from_f64(0.0);
                for (j, &yj) in y.iter().enumerate() {
                    acc = acc + softplus(yj) - S::from_f64(t.component(j)) * yj;
                }
                acc
            }
            LossKind::SoftmaxCrossEntropy => {
                // logsumexp(y) * sum(t) - t . y; for a hard label sum(t) = 1.
                let lse = logsumexp(y);
                let mut mass = 0.0;
                let mut dot = S::from_f64(0.0);
                for (j, &yj) in y.iter().enumerate() {
                    let tj = t.component(j);
                    mass += tj;
                    dot = dot + S::from_f64(tj) * yj;
                }
                lse * S::from_f64(mass) - dot
            }
        }
    }

    /// Gradient of the loss with respect to the outputs.
    pub(crate) fn grad_outputs<S: Scalar>(self, y: &[S], t: TargetRef<'_>) -> Vec<S> {
        match self {
            LossKind::SquaredError => y
                .iter()
                .enumerate()
                .map(|(j, &yj)| yj - S::from_f64(t.component(j)))
                .collect(),
            LossKind::BinaryCrossEntropy => y
                .iter()
                .enumerate()
                .map(|(j, &yj)| sigmoid(yj) - S::from_f64(t.component(j)))
                .collect(),
            LossKind::SoftmaxCrossEntropy => {
                let p = softmax(y);
                let mass: f64 = (0..y.len()).map(|j| t.component(j)).sum();
                p.into_iter()
                    .enumerate()
                    .map(|(j, pj)| pj * S::from_f64(mass) - S::from_f64(t.component(j)))
                    .collect()
            }
        }
    }

    /// Hessian of the loss with respect to the outputs, row-major m-by-m.
    /// Independent of the target for all three variants.
    pub(crate) fn output_hessian_raw(self, y: &[f64]) -> Vec<f64> {
        let m = y.len();
        match self {
            LossKind::SquaredError => {
                let mut h = vec![0.0; m * m];
                for j in 0..m {
                    h[j * m + j] = 1.0;
                }
                h
            }
            LossKind::BinaryCrossEntropy => {
                let mut h = vec![0.0; m * m];
                for (j, &yj) in y.iter().enumerate() {
                    let s = sigmoid(yj);
                    h[j * m + j] = s * (1.0 - s);
                }
                h
            }
            LossKind::SoftmaxCrossEntropy => {
                let p = softmax(y);
                let mut h = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        h[i * m + j] = if i == j { p[i] * (1.0 - p[i]) } else { -p[i] * p[j] };
                    }
                }
                h
            }
        }
    }
}

/// Loss Hessian with respect to the outputs, validated symmetric PSD.
pub fn output_hessian(y: &[f64], target: TargetRef<'_>, loss_kind: LossKind) -> Result<OutputHessian> {
    target.check_dim(y.len())?;
    OutputHessian::new(loss_kind.output_hessian_raw(y), y.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::scalar::Dual;

    #[test]
    fn squared_error_hessian_is_identity() {
        let h = output_hessian(&[0.3, -1.0, 2.0], TargetRef::Real(&[0.0, 0.0, 0.0]), LossKind::SquaredError)
            .unwrap();
        assert_eq!(h.as_slice(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_hessian_at_uniform_logits() {
        let h = output_hessian(&[0.0, 0.0], TargetRef::Label(0), LossKind::SoftmaxCrossEntropy).unwrap();
        let want = [0.25, -0.25, -0.25, 0.25];
        for (a, b) in h.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn bce_hessian_is_diagonal_sigmoid_variance() {
        let y = [0.7, -1.3];
        let h = output_hessian(&y, TargetRef::Real(&[1.0, 0.0]), LossKind::BinaryCrossEntropy).unwrap();
        for (j, &yj) in y.iter().enumerate() {
            let s = 1.0 / (1.0 + (-yj).exp());
            assert!((h.as_slice()[j * 2 + j] - s * (1.0 - s)).abs() < 1e-15);
        }
        assert_eq!(h.as_slice()[1], 0.0);
    }

    #[test]
    fn output_hessians_are_psd_for_random_outputs() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 6.0 - 3.0
        };
        for kind in [
            LossKind::SquaredError,
            LossKind::BinaryCrossEntropy,
            LossKind::SoftmaxCrossEntropy,
        ] {
            for _ in 0..50 {
                let y: Vec<f64> = (0..4).map(|_| next()).collect();
                // OutputHessian::new enforces eigenvalues >= -1e-10.
                output_hessian(&y, TargetRef::Label(0), kind).unwrap();
            }
        }
    }

    #[test]
    fn loss_gradients_match_dual_tangents() {
        let y = [0.4, -0.8, 1.5];
        for kind in [
            LossKind::SquaredError,
            LossKind::BinaryCrossEntropy,
            LossKind::SoftmaxCrossEntropy,
        ] {
            let t = TargetRef::Label(2);
            let grad: Vec<f64> = kind.grad_outputs(&y, t);
            for j in 0..y.len() {
                let yd: Vec<Dual> = y
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| Dual::new(v, if k == j { 1.0 } else { 0.0 }))
                    .collect();
                let l = kind.loss(&yd, t);
                assert!(
                    (l.d - grad[j]).abs() < 1e-12,
                    "{kind:?} component {j}: {} vs {}",
                    l.d,
                    grad[j]
                );
            }
        }
    }
}
