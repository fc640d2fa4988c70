//! Network evaluation and exact derivative oracles.
//!
//! The forward and backward passes are generic over [`Scalar`], so one code
//! path serves four roles:
//!
//! - `f64` forward: predictions.
//! - `f64` forward + backward: loss gradients and output VJPs (reverse mode).
//! - [`Dual`] forward: output JVPs `J v` (forward mode).
//! - [`Dual`] forward + backward: Hessian-vector products `(d/da) grad(theta
//!   + a v)` at `a = 0` (forward-over-reverse).
//!
//! Per-example Jacobians are never materialized here; test oracles assemble
//! them explicitly for small models instead.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::scalar::{Dual, Scalar};
use crate::nn::spec::{NetworkSpec, ParamVector, TargetRef};

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// Post-activation values per layer; `layers[0]` is the lifted input and
/// `layers[L]` the (linear) network output.
struct Trace<S> {
    layers: Vec<Vec<S>>,
}

fn forward_trace<S: Scalar>(params: &[S], spec: &NetworkSpec, input: &[f64]) -> Trace<S> {
    let num_layers = spec.num_layers();
    let mut layers: Vec<Vec<S>> = Vec::with_capacity(num_layers + 1);
    layers.push(input.iter().map(|&x| S::from_f64(x)).collect());

    let mut offset = 0usize;
    for (l, (in_dim, out_dim)) in spec.layer_dims().enumerate() {
        let weights = &params[offset..offset + in_dim * out_dim];
        let biases = &params[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
        offset += in_dim * out_dim + out_dim;

        let prev = &layers[l];
        let mut out = Vec::with_capacity(out_dim);
        for o in 0..out_dim {
            let mut z = biases[o];
            let row = &weights[o * in_dim..(o + 1) * in_dim];
            for (w, a) in row.iter().zip(prev) {
                z = z + *w * *a;
            }
            // Hidden layers use the spec activation; the output layer stays
            // linear and losses apply any link themselves.
            if l + 1 < num_layers {
                z = spec.activation.apply(z);
            }
            out.push(z);
        }
        layers.push(out);
    }
    Trace { layers }
}

/// Reverse pass from an output cotangent; accumulates parameter gradients
/// into `grad` (`+=`) and returns nothing else.
fn backward_accumulate<S: Scalar>(
    params: &[S],
    spec: &NetworkSpec,
    trace: &Trace<S>,
    d_output: &[S],
    grad: &mut [S],
) {
    let num_layers = spec.num_layers();
    let layer_dims: Vec<(usize, usize)> = spec.layer_dims().collect();
    let mut offsets = Vec::with_capacity(num_layers);
    let mut offset = 0usize;
    for &(in_dim, out_dim) in &layer_dims {
        offsets.push(offset);
        offset += in_dim * out_dim + out_dim;
    }

    let mut d_out: Vec<S> = d_output.to_vec();
    for l in (0..num_layers).rev() {
        let (in_dim, out_dim) = layer_dims[l];
        let base = offsets[l];
        let weights = &params[base..base + in_dim * out_dim];
        let inputs = &trace.layers[l];
        let outputs = &trace.layers[l + 1];

        let mut d_in = vec![S::from_f64(0.0); in_dim];
        for o in 0..out_dim {
            // Output layer is linear; hidden layers fold in the activation
            // derivative (expressed via the stored post-activation value).
            let dz = if l + 1 < num_layers {
                d_out[o] * spec.activation.grad_from_output(outputs[o])
            } else {
                d_out[o]
            };
            grad[base + in_dim * out_dim + o] = grad[base + in_dim * out_dim + o] + dz;
            let row = o * in_dim;
            for i in 0..in_dim {
                grad[base + row + i] = grad[base + row + i] + dz * inputs[i];
                d_in[i] = d_in[i] + weights[row + i] * dz;
            }
        }
        d_out = d_in;
    }
}

fn validate_eval(params: &ParamVector, spec: &NetworkSpec, input_len: usize) -> Result<()> {
    check_dim("parameter vector", spec.param_count(), params.len())?;
    check_dim("network input", spec.input_dim(), input_len)
}

/// Network prediction for one input.
pub fn forward(params: &ParamVector, spec: &NetworkSpec, input: &[f64]) -> Result<Vec<f64>> {
    validate_eval(params, spec, input.len())?;
    let trace = forward_trace(params.as_slice(), spec, input);
    Ok(trace.layers.last().unwrap().clone())
}

/// Predictions for a batch of inputs; element-wise, so independent of batch
/// order.
pub fn forward_batch(
    params: &ParamVector,
    spec: &NetworkSpec,
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| forward(params, spec, x)).collect()
}

/// Predictions over every row of a dataset.
pub fn forward_dataset(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<Vec<Vec<f64>>> {
    validate_eval(params, spec, dataset.input_dim())?;
    (0..dataset.len())
        .map(|r| {
            let trace = forward_trace(params.as_slice(), spec, dataset.input(r));
            Ok(trace.layers.last().unwrap().clone())
        })
        .collect()
}

/// Data loss and its parameter gradient for a single example (no L2 term).
pub fn example_loss_grad(
    params: &ParamVector,
    spec: &NetworkSpec,
    input: &[f64],
    target: TargetRef<'_>,
) -> Result<(f64, ParamVector)> {
    validate_eval(params, spec, input.len())?;
    target.check_dim(spec.output_dim())?;
    let trace = forward_trace(params.as_slice(), spec, input);
    let y = trace.layers.last().unwrap();
    let loss = spec.loss_kind.loss(y, target);
    let d_y = spec.loss_kind.grad_outputs(y, target);
    let mut grad = vec![0.0; params.len()];
    backward_accumulate(params.as_slice(), spec, &trace, &d_y, &mut grad);
    Ok((loss, ParamVector(grad)))
}

/// Data loss of a single example.
pub fn example_loss(
    params: &ParamVector,
    spec: &NetworkSpec,
    input: &[f64],
    target: TargetRef<'_>,
) -> Result<f64> {
    validate_eval(params, spec, input.len())?;
    target.check_dim(spec.output_dim())?;
    let trace = forward_trace(params.as_slice(), spec, input);
    Ok(spec.loss_kind.loss(trace.layers.last().unwrap(), target))
}

/// Mean training cost `J(theta)` (mean loss plus `l2/2 ||theta||^2`) and its
/// exact reverse-mode gradient.
pub fn cost_and_grad(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<(f64, ParamVector)> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    validate_eval(params, spec, dataset.input_dim())?;
    let n = dataset.len() as f64;
    let mut cost = 0.0;
    let mut grad = vec![0.0; params.len()];
    for r in 0..dataset.len() {
        let trace = forward_trace(params.as_slice(), spec, dataset.input(r));
        let y = trace.layers.last().unwrap();
        let target = dataset.target(r);
        target.check_dim(spec.output_dim())?;
        cost += spec.loss_kind.loss(y, target);
        let d_y: Vec<f64> = spec
            .loss_kind
            .grad_outputs(y, target)
            .into_iter()
            .map(|g| g / n)
            .collect();
        backward_accumulate(params.as_slice(), spec, &trace, &d_y, &mut grad);
    }
    cost /= n;
    if spec.l2_strength > 0.0 {
        let theta = params.as_slice();
        cost += 0.5 * spec.l2_strength * theta.iter().map(|x| x * x).sum::<f64>();
        for (g, t) in grad.iter_mut().zip(theta) {
            *g += spec.l2_strength * t;
        }
    }
    Ok((cost, ParamVector(grad)))
}

/// Exact Hessian-vector product of the cost: `grad^2 J(theta) . v`, computed
/// as the tangent of the gradient along `v` (forward-over-reverse), without
/// materializing the Hessian.
pub fn hvp(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    v: &ParamVector,
) -> Result<ParamVector> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    validate_eval(params, spec, dataset.input_dim())?;
    check_dim("hvp direction", params.len(), v.len())?;
    let n = dataset.len() as f64;
    let dual_params: Vec<Dual> = params
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(&p, &t)| Dual::new(p, t))
        .collect();
    let mut grad = vec![Dual::constant(0.0); params.len()];
    for r in 0..dataset.len() {
        let trace = forward_trace(&dual_params, spec, dataset.input(r));
        let y = trace.layers.last().unwrap();
        let target = dataset.target(r);
        target.check_dim(spec.output_dim())?;
        let d_y: Vec<Dual> = spec
            .loss_kind
            .grad_outputs(y, target)
            .into_iter()
            .map(|g| g * Dual::constant(1.0 / n))
            .collect();
        backward_accumulate(&dual_params, spec, &trace, &d_y, &mut grad);
    }
    let mut out: Vec<f64> = grad.iter().map(|g| g.d).collect();
    if spec.l2_strength > 0.0 {
        for (o, t) in out.iter_mut().zip(v.as_slice()) {
            *o += spec.l2_strength * t;
        }
    }
    Ok(ParamVector(out))
}

/// Output-Jacobian-vector product `J_{y theta} v` for one input, via forward
/// mode.
pub fn jvp_outputs(
    params: &ParamVector,
    spec: &NetworkSpec,
    input: &[f64],
    v: &ParamVector,
) -> Result<Vec<f64>> {
    validate_eval(params, spec, input.len())?;
    check_dim("jvp direction", params.len(), v.len())?;
    let dual_params: Vec<Dual> = params
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(&p, &t)| Dual::new(p, t))
        .collect();
    let trace = forward_trace(&dual_params, spec, input);
    Ok(trace.layers.last().unwrap().iter().map(|d| d.d).collect())
}

/// Output vector-Jacobian product `J^T u` for one input, via reverse mode.
pub fn vjp_outputs(
    params: &ParamVector,
    spec: &NetworkSpec,
    input: &[f64],
    u: &[f64],
) -> Result<ParamVector> {
    validate_eval(params, spec, input.len())?;
    check_dim("vjp cotangent", spec.output_dim(), u.len())?;
    let trace = forward_trace(params.as_slice(), spec, input);
    let mut grad = vec![0.0; params.len()];
    backward_accumulate(params.as_slice(), spec, &trace, u, &mut grad);
    Ok(ParamVector(grad))
}

/// Damped Gauss-Newton-Hessian-vector product:
/// `(1/N) sum_i J_i^T H_{y_i} J_i v + (damping + l2) v`,
/// computed per example as JVP, output-Hessian multiply, then VJP.
pub fn gnh_vp(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    v: &ParamVector,
    damping: f64,
) -> Result<ParamVector> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(damping.is_finite() && damping >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "damping must be finite and nonnegative, got {damping}"
        )));
    }
    validate_eval(params, spec, dataset.input_dim())?;
    check_dim("gnh direction", params.len(), v.len())?;
    let n = dataset.len() as f64;
    let dual_params: Vec<Dual> = params
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(&p, &t)| Dual::new(p, t))
        .collect();
    let mut acc = vec![0.0; params.len()];
    let f64_params = params.as_slice();
    for r in 0..dataset.len() {
        // One dual forward yields both the primal trace and u = J v.
        let dual_trace = forward_trace(&dual_params, spec, dataset.input(r));
        let y: Vec<f64> = dual_trace.layers.last().unwrap().iter().map(|d| d.v).collect();
        let u: Vec<f64> = dual_trace.layers.last().unwrap().iter().map(|d| d.d).collect();
        let h = spec.loss_kind.output_hessian_raw(&y);
        let m = y.len();
        let mut w = vec![0.0; m];
        for i in 0..m {
            w[i] = h[i * m..(i + 1) * m]
                .iter()
                .zip(&u)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n;
        }
        let primal_trace = Trace {
            layers: dual_trace
                .layers
                .iter()
                .map(|layer| layer.iter().map(|d| d.v).collect())
                .collect(),
        };
        backward_accumulate(f64_params, spec, &primal_trace, &w, &mut acc);
    }
    let shift = damping + spec.l2_strength;
    if shift > 0.0 {
        for (a, t) in acc.iter_mut().zip(v.as_slice()) {
            *a += shift * t;
        }
    }
    Ok(ParamVector(acc))
}

/// Seeded initialization: each layer's weights and biases drawn uniformly in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` in flattening order.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for (in_dim, out_dim) in spec.layer_dims() {
        let limit = 1.0 / (in_dim as f64).sqrt();
        for _ in 0..(in_dim * out_dim + out_dim) {
            values.push(rng.gen_range(-limit..limit));
        }
    }
    ParamVector(values)
}
