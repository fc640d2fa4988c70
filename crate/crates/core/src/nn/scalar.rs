//! Scalar abstraction shared by the plain and dual-number evaluation paths.
//!
//! The network forward and backward passes are written once, generically over
//! [`Scalar`]. Instantiated with `f64` they compute values and gradients;
//! instantiated with [`Dual`] they additionally carry a tangent, which yields
//! exact Hessian-vector products (forward-over-reverse) and output-Jacobian
//! vector products (forward mode) without materializing any matrix.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Primal part; used for branch decisions (ReLU, numerically stable exp).
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// First-order dual number: value plus directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    #[inline]
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }

    #[inline]
    pub fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.v + rhs.v, self.d + rhs.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.v - rhs.v, self.d - rhs.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.v * rhs.v, self.v * rhs.d + self.d * rhs.v)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        Dual::new(
            self.v / rhs.v,
            (self.d * rhs.v - self.v * rhs.d) / (rhs.v * rhs.v),
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual::new(e, self.d * e)
    }
    #[inline]
    fn ln(self) -> Self {
        Dual::new(self.v.ln(), self.d / self.v)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        Dual::new(t, self.d * (1.0 - t * t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivative(f: impl Fn(Dual) -> Dual, df: impl Fn(f64) -> f64, xs: &[f64]) {
        for &x in xs {
            let out = f(Dual::new(x, 1.0));
            let expected = df(x);
            assert!(
                (out.d - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "x={x}: got {}, want {expected}",
                out.d
            );
        }
    }

    #[test]
    fn dual_elementary_derivatives() {
        check_derivative(|x| x.exp(), |x| x.exp(), &[-1.5, 0.0, 0.3, 2.0]);
        check_derivative(|x| x.ln(), |x| 1.0 / x, &[0.1, 1.0, 3.7]);
        check_derivative(
            |x| x.tanh(),
            |x| 1.0 - x.tanh().powi(2),
            &[-2.0, -0.1, 0.0, 1.2],
        );
        check_derivative(
            |x| x * x * x,
            |x| 3.0 * x * x,
            &[-1.0, 0.5, 2.0],
        );
        check_derivative(
            |x| Dual::constant(1.0) / x,
            |x| -1.0 / (x * x),
            &[0.5, 1.0, -2.0],
        );
    }

    #[test]
    fn dual_product_rule() {
        // d/dx [x * exp(x)] = (1 + x) exp(x)
        let x = Dual::new(0.7, 1.0);
        let y = x * x.exp();
        let want = (1.0 + 0.7) * 0.7f64.exp();
        assert!((y.d - want).abs() < 1e-14);
    }
}
