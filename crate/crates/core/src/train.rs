//! Deterministic optimization of the retraining objective ladder.
//!
//! Five objectives, one per rung, all sharing the downweighting factor
//! `epsilon` (1/N per removed example by default) and anchored at the trained
//! parameters `theta_s` where applicable:
//!
//! - cold / warm downweighted: `J(theta) - eps * sum_z L_z(theta)`; they
//!   differ only in initialization (original init vs `theta_s`).
//! - proximal: adds `damping/2 ||theta - theta_s||^2`.
//! - proximal Bregman: replaces the training loss with the Bregman divergence
//!   to the anchor's predictions, which makes `theta_s` optimal at eps = 0
//!   even when training stopped early. The L2 cost term is likewise replaced
//!   by its own Bregman divergence `l2/2 ||theta - theta_s||^2`, so the
//!   anchor-optimality property survives weight decay.
//! - linearized proximal Bregman: quadratic model of the above, built from
//!   output JVP/VJP composition against the anchor Jacobians; its exact
//!   minimizer is the damped Gauss-Newton influence step.
//!
//! Training is plain (mini)batch gradient descent with optional heavy-ball
//! momentum. Batch orders are seeded permutations drawn from a dedicated
//! stream, so a cold retraining run with the base seed replays the base run's
//! batch order for the first K epochs and continues the stream afterwards.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{self, NetworkSpec, ParamVector};

/// Stream ids for the per-run ChaCha generator; the init stream is the
/// default stream of `nn::init_params`.
const ORDER_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// One full-batch step per epoch.
    Gd,
    Sgd,
    SgdMomentum,
}

/// Minibatch size; `Full` makes every optimizer full-batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => serializer.serialize_str("full"),
            BatchSize::Size(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::String(s) if s == "full" => Ok(BatchSize::Full),
            serde_json::Value::Number(n) => n
                .as_u64()
                .filter(|&n| n > 0)
                .map(|n| BatchSize::Size(n as usize))
                .ok_or_else(|| D::Error::custom("batch_size must be a positive integer")),
            other => Err(D::Error::custom(format!(
                "batch_size must be \"full\" or a positive integer, got {other}"
            ))),
        }
    }
}

/// Multiply the learning rate by `factor` from epoch `epoch` (0-based) on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrStage {
    pub epoch: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: BatchSize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub lr_decay: Vec<LrStage>,
    /// Stop once the full objective gradient norm falls below this.
    #[serde(default)]
    pub grad_tol: Option<f64>,
}

fn default_batch_size() -> BatchSize {
    BatchSize::Full
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if let BatchSize::Size(0) = self.batch_size {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        for stage in &self.lr_decay {
            if !(stage.factor.is_finite() && stage.factor > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "lr decay factor must be positive, got {}",
                    stage.factor
                )));
            }
        }
        Ok(())
    }

    fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let mut lr = self.learning_rate;
        for stage in &self.lr_decay {
            if epoch >= stage.epoch {
                lr *= stage.factor;
            }
        }
        lr
    }
}

/// Table rows of the objective ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveTag {
    ColdDownweighted,
    WarmDownweighted,
    Proximal,
    ProximalBregman,
    LinearizedProximalBregman,
}

impl ObjectiveTag {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveTag::ColdDownweighted => "cold_downweighted",
            ObjectiveTag::WarmDownweighted => "warm_downweighted",
            ObjectiveTag::Proximal => "proximal",
            ObjectiveTag::ProximalBregman => "proximal_bregman",
            ObjectiveTag::LinearizedProximalBregman => "linearized_proximal_bregman",
        }
    }
}

/// Anchor-dependent caches for the Bregman objectives.
#[derive(Clone, Debug)]
struct BregmanReference {
    /// f(theta_s, x_i) per row.
    outputs: Vec<Vec<f64>>,
    /// L(y_i^s, t_i) per row.
    losses: Vec<f64>,
    /// grad_y L(y_i^s, t_i) per row.
    output_grads: Vec<Vec<f64>>,
}

/// One row of the objective ladder, fully specified: downweighting factor,
/// removed ids, damping, anchor, and the caches the Bregman rows need.
#[derive(Clone, Debug)]
pub struct ObjectiveKind {
    pub tag: ObjectiveTag,
    pub epsilon: f64,
    pub removed: Vec<u64>,
    pub damping: f64,
    pub anchor: Option<ParamVector>,
    reference: Option<BregmanReference>,
    /// Summed data-loss gradient of the removed examples at the anchor.
    removed_grad_anchor: Option<ParamVector>,
}

fn build_reference(
    anchor: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<BregmanReference> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut outputs = Vec::with_capacity(dataset.len());
    let mut losses = Vec::with_capacity(dataset.len());
    let mut output_grads = Vec::with_capacity(dataset.len());
    for r in 0..dataset.len() {
        let y = nn::forward(anchor, spec, dataset.input(r))?;
        let t = dataset.target(r);
        t.check_dim(spec.output_dim())?;
        losses.push(spec.loss_kind.loss(&y, t));
        output_grads.push(spec.loss_kind.grad_outputs(&y, t));
        outputs.push(y);
    }
    Ok(BregmanReference {
        outputs,
        losses,
        output_grads,
    })
}

impl ObjectiveKind {
    pub fn cold_downweighted(removed: Vec<u64>, epsilon: f64) -> Self {
        ObjectiveKind {
            tag: ObjectiveTag::ColdDownweighted,
            epsilon,
            removed,
            damping: 0.0,
            anchor: None,
            reference: None,
            removed_grad_anchor: None,
        }
    }

    pub fn warm_downweighted(removed: Vec<u64>, epsilon: f64) -> Self {
        ObjectiveKind {
            tag: ObjectiveTag::WarmDownweighted,
            ..Self::cold_downweighted(removed, epsilon)
        }
    }

    pub fn proximal(removed: Vec<u64>, epsilon: f64, damping: f64, anchor: ParamVector) -> Self {
        ObjectiveKind {
            tag: ObjectiveTag::Proximal,
            epsilon,
            removed,
            damping,
            anchor: Some(anchor),
            reference: None,
            removed_grad_anchor: None,
        }
    }

    pub fn proximal_bregman(
        removed: Vec<u64>,
        epsilon: f64,
        damping: f64,
        anchor: ParamVector,
        spec: &NetworkSpec,
        dataset: &Dataset,
    ) -> Result<Self> {
        let reference = build_reference(&anchor, spec, dataset)?;
        Ok(ObjectiveKind {
            tag: ObjectiveTag::ProximalBregman,
            epsilon,
            removed,
            damping,
            anchor: Some(anchor),
            reference: Some(reference),
            removed_grad_anchor: None,
        })
    }

    pub fn linearized_proximal_bregman(
        removed: Vec<u64>,
        epsilon: f64,
        damping: f64,
        anchor: ParamVector,
        spec: &NetworkSpec,
        dataset: &Dataset,
    ) -> Result<Self> {
        let reference = build_reference(&anchor, spec, dataset)?;
        let mut grad = ParamVector::zeros(anchor.len());
        for &id in &removed {
            let row = dataset.position_of(id).ok_or(Error::UnknownId { id })?;
            let (_, g) = nn::example_loss_grad(&anchor, spec, dataset.input(row), dataset.target(row))?;
            grad.add_scaled(1.0, &g);
        }
        Ok(ObjectiveKind {
            tag: ObjectiveTag::LinearizedProximalBregman,
            epsilon,
            removed,
            damping,
            anchor: Some(anchor),
            reference: Some(reference),
            removed_grad_anchor: Some(grad),
        })
    }

    fn anchor(&self) -> Result<&ParamVector> {
        self.anchor.as_ref().ok_or(Error::MissingAnchor {
            tag: self.tag.name(),
        })
    }

    fn removed_rows(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        self.removed
            .iter()
            .map(|&id| dataset.position_of(id).ok_or(Error::UnknownId { id }))
            .collect()
    }
}

/// Value and gradient of `- eps * sum_z L_z(theta)` over the removed set.
fn downweight_terms(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    rows: &[usize],
    epsilon: f64,
    want_grad: bool,
) -> Result<(f64, Option<ParamVector>)> {
    if rows.is_empty() || epsilon == 0.0 {
        return Ok((0.0, want_grad.then(|| ParamVector::zeros(params.len()))));
    }
    let mut value = 0.0;
    let mut grad = want_grad.then(|| ParamVector::zeros(params.len()));
    for &row in rows {
        if let Some(g) = &mut grad {
            let (l, gz) = nn::example_loss_grad(params, spec, dataset.input(row), dataset.target(row))?;
            value -= epsilon * l;
            g.add_scaled(-epsilon, &gz);
        } else {
            value -= epsilon * nn::example_loss(params, spec, dataset.input(row), dataset.target(row))?;
        }
    }
    Ok((value, grad))
}

/// Mean Bregman divergence to the anchor predictions over `rows` (value), and
/// optionally its gradient contribution with weight `1/denom` per row.
fn bregman_terms(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    reference: &BregmanReference,
    rows: &[usize],
    denom: f64,
    want_grad: bool,
) -> Result<(f64, Option<ParamVector>)> {
    let mut value = 0.0;
    let mut grad = want_grad.then(|| ParamVector::zeros(params.len()));
    for &row in rows {
        let t = dataset.target(row);
        let y = nn::forward(params, spec, dataset.input(row))?;
        let loss: f64 = spec.loss_kind.loss(&y, t);
        let ref_loss = reference.losses[row];
        let ref_grad = &reference.output_grads[row];
        let ref_y = &reference.outputs[row];
        let linear: f64 = ref_grad
            .iter()
            .zip(y.iter().zip(ref_y))
            .map(|(g, (yi, ysi))| g * (yi - ysi))
            .sum();
        value += (loss - ref_loss - linear) / denom;
        if let Some(acc) = &mut grad {
            // d/dy D = grad L(y, t) - grad L(y_s, t); one VJP per row.
            let gy = spec.loss_kind.grad_outputs(&y, t);
            let seed: Vec<f64> = gy
                .iter()
                .zip(ref_grad)
                .map(|(a, b)| (a - b) / denom)
                .collect();
            let contrib = nn::vjp_outputs(params, spec, dataset.input(row), &seed)?;
            acc.add_scaled(1.0, &contrib);
        }
    }
    Ok((value, grad))
}

fn objective_on_rows(
    kind: &ObjectiveKind,
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    rows: &[usize],
    want_value: bool,
    want_grad: bool,
) -> Result<(f64, Option<ParamVector>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    let removed_rows = kind.removed_rows(dataset)?;
    let denom = rows.len() as f64;

    match kind.tag {
        ObjectiveTag::ColdDownweighted | ObjectiveTag::WarmDownweighted | ObjectiveTag::Proximal => {
            let mut value = 0.0;
            let mut grad = want_grad.then(|| ParamVector::zeros(params.len()));
            for &row in rows {
                let t = dataset.target(row);
                if let Some(acc) = &mut grad {
                    let (l, g) = nn::example_loss_grad(params, spec, dataset.input(row), t)?;
                    value += l / denom;
                    acc.add_scaled(1.0 / denom, &g);
                } else {
                    value += nn::example_loss(params, spec, dataset.input(row), t)? / denom;
                }
            }
            if spec.l2_strength > 0.0 {
                value += 0.5 * spec.l2_strength * params.dot(params);
                if let Some(acc) = &mut grad {
                    acc.add_scaled(spec.l2_strength, params);
                }
            }
            let (dw_value, dw_grad) =
                downweight_terms(params, spec, dataset, &removed_rows, kind.epsilon, want_grad)?;
            value += dw_value;
            if let (Some(acc), Some(dg)) = (&mut grad, dw_grad) {
                acc.add_scaled(1.0, &dg);
            }
            if kind.tag == ObjectiveTag::Proximal {
                let anchor = kind.anchor()?;
                let diff = params.sub(anchor);
                value += 0.5 * kind.damping * diff.dot(&diff);
                if let Some(acc) = &mut grad {
                    acc.add_scaled(kind.damping, &diff);
                }
            }
            let _ = want_value;
            Ok((value, grad))
        }
        ObjectiveTag::ProximalBregman => {
            let anchor = kind.anchor()?;
            let reference = kind.reference.as_ref().expect("pbrf carries a reference");
            let (mut value, mut grad) =
                bregman_terms(params, spec, dataset, reference, rows, denom, want_grad)?;
            let (dw_value, dw_grad) =
                downweight_terms(params, spec, dataset, &removed_rows, kind.epsilon, want_grad)?;
            value += dw_value;
            if let (Some(acc), Some(dg)) = (&mut grad, dw_grad) {
                acc.add_scaled(1.0, &dg);
            }
            let diff = params.sub(anchor);
            let shift = kind.damping + spec.l2_strength;
            value += 0.5 * shift * diff.dot(&diff);
            if let Some(acc) = &mut grad {
                acc.add_scaled(shift, &diff);
            }
            Ok((value, grad))
        }
        ObjectiveTag::LinearizedProximalBregman => {
            let anchor = kind.anchor()?;
            let g_removed = kind
                .removed_grad_anchor
                .as_ref()
                .expect("linearized pbrf carries removed gradients");
            let diff = params.sub(anchor);
            // gnh_vp at the anchor adds (damping + l2) * diff, matching the
            // two proximity terms of this objective.
            let batch = if rows.len() == dataset.len() {
                None
            } else {
                Some(dataset.subset_by_rows(rows))
            };
            let ds_ref = batch.as_ref().unwrap_or(dataset);
            let quad = nn::gnh_vp(anchor, spec, ds_ref, &diff, kind.damping)?;
            let mut value = 0.0;
            if want_value {
                value = 0.5 * diff.dot(&quad) - kind.epsilon * g_removed.dot(params);
            }
            let grad = want_grad.then(|| {
                let mut g = quad;
                g.add_scaled(-kind.epsilon, g_removed);
                g
            });
            Ok((value, grad))
        }
    }
}

/// Exact scalar value of the selected objective over the full dataset.
pub fn evaluate_objective(
    kind: &ObjectiveKind,
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<f64> {
    let rows: Vec<usize> = (0..dataset.len()).collect();
    objective_on_rows(kind, params, spec, dataset, &rows, true, false).map(|(v, _)| v)
}

/// Exact gradient of the selected objective over the full dataset.
pub fn gradient_of_objective(
    kind: &ObjectiveKind,
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<ParamVector> {
    let rows: Vec<usize> = (0..dataset.len()).collect();
    objective_on_rows(kind, params, spec, dataset, &rows, false, true)
        .map(|(_, g)| g.expect("gradient requested"))
}

fn gradient_on_batch(
    kind: &ObjectiveKind,
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    rows: &[usize],
) -> Result<ParamVector> {
    objective_on_rows(kind, params, spec, dataset, rows, false, true)
        .map(|(_, g)| g.expect("gradient requested"))
}

/// Result of one training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainRun {
    pub params: ParamVector,
    /// Full objective value recorded after every epoch.
    pub epoch_costs: Vec<f64>,
    /// SHA-256 over the batch orders actually used (or "full-batch").
    pub batch_order_digest: String,
}

/// Deterministic gradient-descent training of `objective` from `init`.
///
/// Batch orders come from a ChaCha stream keyed by `config.seed`, one
/// permutation per epoch, independent of the initialization stream. The full
/// objective is evaluated after each epoch; a non-finite value aborts with a
/// divergence error naming the epoch.
pub fn train(
    objective: &ObjectiveKind,
    init: &ParamVector,
    config: &TrainConfig,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<TrainRun> {
    config.validate()?;
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    if init.len() != spec.param_count() {
        return Err(Error::ShapeMismatch {
            context: "train init",
            expected: spec.param_count(),
            got: init.len(),
        });
    }
    init.validate_finite()?;
    // Fail fast on unknown removed ids.
    objective.removed_rows(dataset)?;

    let n = dataset.len();
    let full_rows: Vec<usize> = (0..n).collect();
    let mut order_rng = ChaCha20Rng::seed_from_u64(config.seed);
    order_rng.set_stream(ORDER_STREAM);
    let mut digest = Sha256::new();

    let mut theta = init.clone();
    let mut momentum_buf = ParamVector::zeros(theta.len());
    let mut epoch_costs = Vec::with_capacity(config.epochs);

    let full_batch = match (config.optimizer, config.batch_size) {
        (Optimizer::Gd, _) | (_, BatchSize::Full) => true,
        (_, BatchSize::Size(b)) => b >= n,
    };
    if full_batch {
        digest.update(b"full-batch");
    }

    for epoch in 0..config.epochs {
        let lr = config.lr_at_epoch(epoch);

        if full_batch {
            let grad = gradient_of_objective(objective, &theta, spec, dataset)?;
            if let Some(tol) = config.grad_tol {
                if grad.norm() <= tol {
                    break;
                }
            }
            step(&mut theta, &grad, lr, config, &mut momentum_buf);
        } else {
            if let Some(tol) = config.grad_tol {
                let grad = gradient_of_objective(objective, &theta, spec, dataset)?;
                if grad.norm() <= tol {
                    break;
                }
            }
            let mut order = full_rows.clone();
            order.shuffle(&mut order_rng);
            digest.update(epoch.to_le_bytes());
            for &r in &order {
                digest.update((r as u32).to_le_bytes());
            }
            let batch_len = match config.batch_size {
                BatchSize::Full => n,
                BatchSize::Size(b) => b.min(n),
            };
            for batch in order.chunks(batch_len) {
                let grad = gradient_on_batch(objective, &theta, spec, dataset, batch)?;
                step(&mut theta, &grad, lr, config, &mut momentum_buf);
            }
        }

        let cost = evaluate_objective(objective, &theta, spec, dataset)?;
        if !cost.is_finite() {
            return Err(Error::Divergence {
                epoch,
                value: cost,
            });
        }
        epoch_costs.push(cost);
    }

    let digest_hex: String = digest
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(TrainRun {
        params: theta,
        epoch_costs,
        batch_order_digest: digest_hex,
    })
}

fn step(
    theta: &mut ParamVector,
    grad: &ParamVector,
    lr: f64,
    config: &TrainConfig,
    momentum_buf: &mut ParamVector,
) {
    match config.optimizer {
        Optimizer::Gd | Optimizer::Sgd => theta.add_scaled(-lr, grad),
        Optimizer::SgdMomentum => {
            momentum_buf.scale(config.momentum);
            momentum_buf.add_scaled(1.0, grad);
            theta.add_scaled(-lr, momentum_buf);
        }
    }
}

/// A finished base training run: initialization, final parameters, and the
/// configuration needed to replay or extend it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaseRun {
    pub init: ParamVector,
    pub params: ParamVector,
    pub config: TrainConfig,
    pub epoch_costs: Vec<f64>,
    pub batch_order_digest: String,
}

/// Train the base network on the full dataset from a seeded initialization.
pub fn train_base(spec: &NetworkSpec, dataset: &Dataset, config: &TrainConfig) -> Result<BaseRun> {
    let init = nn::init_params(spec, config.seed);
    let objective = ObjectiveKind::cold_downweighted(Vec::new(), 0.0);
    let run = train(&objective, &init, config, spec, dataset)?;
    Ok(BaseRun {
        init,
        params: run.params,
        config: config.clone(),
        epoch_costs: run.epoch_costs,
        batch_order_digest: run.batch_order_digest,
    })
}

/// Knobs of the retraining protocol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SixWayOptions {
    pub damping: f64,
    /// Downweighting factor per removed example; `None` means 1/N.
    pub epsilon_per_example: Option<f64>,
    /// Epochs for each retraining run; `None` means ceil(K/2).
    pub retrain_epochs: Option<usize>,
    /// Seed for the retraining runs' batch orders (fresh, not the base
    /// stream).
    pub retrain_seed: u64,
    /// Learning-rate factor for the Bregman and linearized-Bregman runs.
    pub pbrf_lr_factor: f64,
}

impl SixWayOptions {
    pub fn new(damping: f64, retrain_seed: u64) -> Self {
        SixWayOptions {
            damping,
            epsilon_per_example: None,
            retrain_epochs: None,
            retrain_seed,
            pbrf_lr_factor: 0.1,
        }
    }

    pub fn epsilon(&self, n: usize) -> f64 {
        self.epsilon_per_example.unwrap_or(1.0 / n as f64)
    }
}

/// The five retrained parameter sets; the sixth (influence estimation) comes
/// from the influence module.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SixWayParams {
    pub cold: ParamVector,
    pub warm: ParamVector,
    pub proximal: ParamVector,
    pub pbrf: ParamVector,
    pub lin_pbrf: ParamVector,
}

impl SixWayParams {
    /// Ladder order: cold, warm, proximal, PBRF, linearized PBRF.
    pub fn ladder(&self) -> [(&'static str, &ParamVector); 5] {
        [
            ("cold", &self.cold),
            ("warm", &self.warm),
            ("proximal", &self.proximal),
            ("pbrf", &self.pbrf),
            ("lin_pbrf", &self.lin_pbrf),
        ]
    }
}

/// Run the retraining protocol for one removed set.
///
/// Cold retrains for K + K/2 epochs from the base initialization, replaying
/// the base batch-order stream; the four warm runs retrain for K/2 epochs
/// from `theta_s` with fresh seeded orders, and the Bregman rows use the
/// decayed learning rate.
pub fn six_way_protocol(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed: &[u64],
    opts: &SixWayOptions,
) -> Result<SixWayParams> {
    let epsilon = opts.epsilon(dataset.len());
    let base_epochs = base.config.epochs;
    let retrain_epochs = opts.retrain_epochs.unwrap_or(base_epochs.div_ceil(2)).max(1);

    let run = |tag: &'static str,
               objective: ObjectiveKind,
               init: &ParamVector,
               config: &TrainConfig|
     -> Result<ParamVector> {
        train(&objective, init, config, spec, dataset)
            .map(|r| r.params)
            .map_err(|e| Error::tagged("six-way protocol", tag, e))
    };

    let mut cold_cfg = base.config.clone();
    cold_cfg.epochs = base_epochs + retrain_epochs;
    let cold = run(
        "cold",
        ObjectiveKind::cold_downweighted(removed.to_vec(), epsilon),
        &base.init,
        &cold_cfg,
    )?;

    let mut warm_cfg = base.config.clone();
    warm_cfg.epochs = retrain_epochs;
    warm_cfg.seed = opts.retrain_seed;
    let warm = run(
        "warm",
        ObjectiveKind::warm_downweighted(removed.to_vec(), epsilon),
        &base.params,
        &warm_cfg,
    )?;

    let proximal = run(
        "proximal",
        ObjectiveKind::proximal(
            removed.to_vec(),
            epsilon,
            opts.damping,
            base.params.clone(),
        ),
        &base.params,
        &warm_cfg,
    )?;

    let mut bregman_cfg = warm_cfg.clone();
    bregman_cfg.learning_rate *= opts.pbrf_lr_factor;
    let pbrf = run(
        "pbrf",
        ObjectiveKind::proximal_bregman(
            removed.to_vec(),
            epsilon,
            opts.damping,
            base.params.clone(),
            spec,
            dataset,
        )?,
        &base.params,
        &bregman_cfg,
    )?;

    let lin_pbrf = run(
        "lin_pbrf",
        ObjectiveKind::linearized_proximal_bregman(
            removed.to_vec(),
            epsilon,
            opts.damping,
            base.params.clone(),
            spec,
            dataset,
        )?,
        &base.params,
        &bregman_cfg,
    )?;

    Ok(SixWayParams {
        cold,
        warm,
        proximal,
        pbrf,
        lin_pbrf,
    })
}
