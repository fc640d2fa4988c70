//! Network architecture description and the flat parameter vector.
//!
//! Parameter flattening order is fixed so that `ParamVector` arithmetic is
//! reproducible across runs and platforms: layer-major (input-side layer
//! first), weights before bias within a layer, weights row-major with one row
//! per output unit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::scalar::Scalar;

/// Element-wise activation applied to every hidden layer. The output layer is
/// always linear; losses that need a link (sigmoid, softmax) apply it inside
/// the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            // ReLU derivative at exactly 0 is taken as 0 (deterministic
            // subgradient choice), which `grad_from_output` reproduces.
            Activation::Relu => {
                if z.value() > 0.0 {
                    z
                } else {
                    S::from_f64(0.0)
                }
            }
            Activation::Sigmoid => {
                let one = S::from_f64(1.0);
                one / (one + (-z).exp())
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation output. Valid for all
    /// four variants (for ReLU the output sign equals the input sign).
    #[inline]
    pub(crate) fn grad_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y.value() > 0.0 {
                    S::from_f64(1.0)
                } else {
                    S::from_f64(0.0)
                }
            }
            Activation::Sigmoid => y * (S::from_f64(1.0) - y),
            Activation::Tanh => S::from_f64(1.0) - y * y,
            Activation::Identity => S::from_f64(1.0),
        }
    }
}

/// Loss on network outputs. Every variant is convex in the outputs, which the
/// Gauss-Newton curvature and the Bregman objectives rely on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1/2 ||y - t||^2`. The 1/2 convention makes the output Hessian the
    /// identity.
    SquaredError,
    /// Element-wise Bernoulli cross-entropy on logits; targets in [0, 1].
    BinaryCrossEntropy,
    /// Softmax cross-entropy on logits with integer class targets.
    SoftmaxCrossEntropy,
}

/// Architecture plus cost shape: layer widths, hidden activation, loss, and an
/// L2 penalty `l2_strength/2 * ||theta||^2` folded into the cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input dimension first, output dimension last; at least two entries.
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub loss_kind: LossKind,
    #[serde(default)]
    pub l2_strength: f64,
}

impl NetworkSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        activation: Activation,
        loss_kind: LossKind,
        l2_strength: f64,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            layer_widths,
            activation,
            loss_kind,
            l2_strength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::InvalidConfig(
                "layer_widths needs at least an input and an output width".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "all layer widths must be at least 1".into(),
            ));
        }
        if !(self.l2_strength.is_finite() && self.l2_strength >= 0.0) {
            return Err(Error::InvalidConfig(
                "l2_strength must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// (in_dim, out_dim) per dense layer, in flattening order.
    pub fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Total parameter count `d`.
    pub fn param_count(&self) -> usize {
        self.layer_dims().map(|(i, o)| i * o + o).sum()
    }

    /// SHA-256 of the canonical JSON encoding; names saved parameter files.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Flat parameter vector of length `NetworkSpec::param_count()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn validate_finite(&self) -> Result<()> {
        match self.0.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidConfig(format!(
                "parameter vector has non-finite entry at index {i}"
            ))),
        }
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &ParamVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, alpha: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|a| a * alpha).collect())
    }

    pub fn l2_distance(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Loss Hessian with respect to the network outputs: an m-by-m symmetric PSD
/// matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputHessian {
    matrix: Vec<f64>,
    dim: usize,
}

impl OutputHessian {
    /// Validates symmetry (to 1e-12) and positive semidefiniteness
    /// (eigenvalues >= -1e-10).
    pub fn new(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                context: "output hessian",
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = matrix[i * dim + j];
                let b = matrix[j * dim + i];
                if (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "output hessian asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let m = nalgebra::DMatrix::from_row_slice(dim, dim, &matrix);
        let eigs = m.symmetric_eigenvalues();
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -1e-10 {
                return Err(Error::InvalidConfig(format!(
                    "output hessian has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(OutputHessian { matrix, dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }

    /// `H * u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (i, row) in self.matrix.chunks_exact(self.dim).enumerate() {
            out[i] = row.iter().zip(u).map(|(h, x)| h * x).sum();
        }
        out
    }
}

/// Borrowed view of one training target: a real vector for regression-style
/// losses, or a class index (one-hot expansion happens inside the loss).
#[derive(Clone, Copy, Debug)]
pub enum TargetRef<'a> {
    Real(&'a [f64]),
    Label(usize),
}

impl TargetRef<'_> {
    /// Component `j` of the target as a real number.
    #[inline]
    pub fn component(&self, j: usize) -> f64 {
        match self {
            TargetRef::Real(v) => v[j],
            TargetRef::Label(c) => {
                if *c == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Dimension check against the network output dimension `m`.
    pub fn check_dim(&self, m: usize) -> Result<()> {
        match self {
            TargetRef::Real(v) if v.len() != m => Err(Error::ShapeMismatch {
                context: "target",
                expected: m,
                got: v.len(),
            }),
            TargetRef::Label(c) if *c >= m && m > 1 => Err(Error::ShapeMismatch {
                context: "target label",
                expected: m,
                got: *c,
            }),
            _ => Ok(()),
        }
    }
}
