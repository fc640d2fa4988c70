//! Five-term decomposition of the discrepancy between influence estimates and
//! leave-one-out retraining, plus the analyses built on top of it.
//!
//! Each trial removes one set of examples and walks the retraining ladder:
//! cold, warm, proximal, proximal-Bregman, linearized-Bregman optima, then
//! the influence estimate. The five terms are the output-space distances
//! between adjacent rungs:
//!
//! 1. warm-start gap        cold <-> warm
//! 2. proximity gap         warm <-> proximal
//! 3. non-convergence gap   proximal <-> PBRF
//! 4. linearization error   PBRF <-> linearized PBRF
//! 5. solver error          linearized PBRF <-> influence estimate
//!
//! Distances are mean output-space L2 over the training set (the primary
//! metric); parameter-space L2 is recorded alongside for diagnostics.

mod mislabel;
mod stats;

pub use mislabel::{mislabel_detection_curve, ranking_recall_curve, MislabelScorer};
pub use stats::{average_ranks, pearson, spearman};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::influence::{self, InfluenceConfig};
use crate::nn::{self, NetworkSpec, ParamVector};
use crate::train::{self, BaseRun, ObjectiveKind, SixWayOptions, TrainConfig};

/// Mean Euclidean distance between the two parameterizations' outputs over
/// the training rows.
pub fn output_distance(
    a: &ParamVector,
    b: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    let ya = nn::forward_dataset(a, spec, dataset)?;
    let yb = nn::forward_dataset(b, spec, dataset)?;
    Ok(mean_output_distance(&ya, &yb))
}

fn mean_output_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / a.len() as f64
}

/// The five decomposition terms, in ladder order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapTerms {
    pub warm_start: f64,
    pub proximity: f64,
    pub non_convergence: f64,
    pub linearization: f64,
    pub solver: f64,
}

impl GapTerms {
    pub const NAMES: [&'static str; 5] = [
        "warm_start",
        "proximity",
        "non_convergence",
        "linearization",
        "solver",
    ];

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.warm_start,
            self.proximity,
            self.non_convergence,
            self.linearization,
            self.solver,
        ]
    }

    pub fn from_array(values: [f64; 5]) -> Self {
        GapTerms {
            warm_start: values[0],
            proximity: values[1],
            non_convergence: values[2],
            linearization: values[3],
            solver: values[4],
        }
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

/// Decomposition of one removed set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialDecomposition {
    pub trial: usize,
    pub removed: Vec<u64>,
    /// Mean output-space L2 distances along the ladder.
    pub output_gaps: GapTerms,
    /// Parameter-space L2 distances along the same ladder.
    pub param_gaps: GapTerms,
    /// Distance between the ladder's endpoints (cold optimum vs influence
    /// estimate), bounded by the sum of the five terms.
    pub end_to_end: f64,
}

/// Decomposition over all trials with per-term aggregates (mean and
/// population standard deviation).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub trials: Vec<TrialDecomposition>,
    pub mean: GapTerms,
    pub std: GapTerms,
}

impl DecompositionReport {
    fn aggregate(trials: Vec<TrialDecomposition>) -> Self {
        let n = trials.len().max(1) as f64;
        let mut mean = [0.0; 5];
        for t in &trials {
            for (m, v) in mean.iter_mut().zip(t.output_gaps.as_array()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 5];
        for t in &trials {
            for ((s, m), v) in var.iter_mut().zip(mean).zip(t.output_gaps.as_array()) {
                *s += (v - m) * (v - m) / n;
            }
        }
        DecompositionReport {
            trials,
            mean: GapTerms::from_array(mean),
            std: GapTerms::from_array(var.map(f64::sqrt)),
        }
    }
}

/// Retraining and influence settings shared by the decomposition analyses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub six_way: SixWayOptions,
    pub influence: InfluenceConfig,
}

impl DecomposeOptions {
    /// Per-trial retraining seed; trials must not share batch orders.
    fn trial_opts(&self, trial: usize) -> SixWayOptions {
        let mut opts = self.six_way.clone();
        opts.retrain_seed = opts.retrain_seed.wrapping_add(trial as u64);
        opts
    }
}

/// Run the six-parameter-set protocol for every removed set and decompose the
/// discrepancies. Trials run in parallel; results are aggregated in trial
/// order, so the report is deterministic.
pub fn decompose(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed_sets: &[Vec<u64>],
    opts: &DecomposeOptions,
) -> Result<DecompositionReport> {
    let trials: Vec<TrialDecomposition> = removed_sets
        .par_iter()
        .enumerate()
        .map(|(trial, removed)| {
            decompose_trial(base, spec, dataset, trial, removed, opts)
                .map_err(|e| Error::tagged("decompose", format!("trial {trial}"), e))
        })
        .collect::<Result<_>>()?;
    Ok(DecompositionReport::aggregate(trials))
}

fn decompose_trial(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    trial: usize,
    removed: &[u64],
    opts: &DecomposeOptions,
) -> Result<TrialDecomposition> {
    let six = train::six_way_protocol(base, spec, dataset, removed, &opts.trial_opts(trial))?;
    let mut influence_cfg = opts.influence.clone();
    if influence_cfg.epsilon.is_none() {
        influence_cfg.epsilon = Some(opts.six_way.epsilon(dataset.len()));
    }
    let estimate = influence::param_influence(&base.params, spec, dataset, removed, &influence_cfg)?;
    let mut influence_params = base.params.clone();
    influence_params.add_scaled(1.0, &estimate.delta_params);

    let ladder = [
        &six.cold,
        &six.warm,
        &six.proximal,
        &six.pbrf,
        &six.lin_pbrf,
        &influence_params,
    ];
    let outputs: Vec<Vec<Vec<f64>>> = ladder
        .iter()
        .map(|p| nn::forward_dataset(p, spec, dataset))
        .collect::<Result<_>>()?;
    let mut output_gaps = [0.0; 5];
    let mut param_gaps = [0.0; 5];
    for k in 0..5 {
        output_gaps[k] = mean_output_distance(&outputs[k], &outputs[k + 1]);
        param_gaps[k] = ladder[k].l2_distance(ladder[k + 1]);
    }
    Ok(TrialDecomposition {
        trial,
        removed: removed.to_vec(),
        output_gaps: GapTerms::from_array(output_gaps),
        param_gaps: GapTerms::from_array(param_gaps),
        end_to_end: mean_output_distance(&outputs[0], &outputs[5]),
    })
}

/// Seeded removed-set selection: `trials` distinct single examples, or
/// independent sorted groups of `group_size` ids per trial.
pub fn choose_removed_sets(
    dataset: &Dataset,
    trials: usize,
    group_size: usize,
    seed: u64,
) -> Result<Vec<Vec<u64>>> {
    let n = dataset.len();
    if group_size == 0 || group_size > n {
        return Err(Error::InvalidConfig(format!(
            "group_size {group_size} outside 1..={n}"
        )));
    }
    if group_size == 1 && trials > n {
        return Err(Error::InvalidConfig(format!(
            "cannot pick {trials} distinct examples from {n}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    if group_size == 1 {
        let mut ids = dataset.ids().to_vec();
        ids.shuffle(&mut rng);
        return Ok(ids.into_iter().take(trials).map(|id| vec![id]).collect());
    }
    let mut sets = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut ids = dataset.ids().to_vec();
        ids.shuffle(&mut rng);
        let mut group: Vec<u64> = ids.into_iter().take(group_size).collect();
        group.sort_unstable();
        sets.push(group);
    }
    Ok(sets)
}

/// Difference of two warm retrainings (with and without the removed set)
/// applied to the trained parameters, cancelling the keep-training effect:
/// `theta_s + (retrain(D \ z) - retrain(D))`.
pub fn two_stage_loo(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed: &[u64],
    opts: &SixWayOptions,
) -> Result<ParamVector> {
    let epsilon = opts.epsilon(dataset.len());
    let retrain_epochs = opts
        .retrain_epochs
        .unwrap_or(base.config.epochs.div_ceil(2))
        .max(1);
    let mut config = base.config.clone();
    config.epochs = retrain_epochs;
    config.seed = opts.retrain_seed;
    let without = train::train(
        &ObjectiveKind::warm_downweighted(removed.to_vec(), epsilon),
        &base.params,
        &config,
        spec,
        dataset,
    )
    .map_err(|e| Error::tagged("two-stage loo", "without-removed", e))?;
    let with_all = train::train(
        &ObjectiveKind::warm_downweighted(Vec::new(), 0.0),
        &base.params,
        &config,
        spec,
        dataset,
    )
    .map_err(|e| Error::tagged("two-stage loo", "full-data", e))?;
    let mut out = base.params.clone();
    out.add_scaled(1.0, &without.params);
    out.add_scaled(-1.0, &with_all.params);
    Ok(out)
}

/// Retraining baselines the influence predictions are correlated against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationBaseline {
    Cold,
    Warm,
    Pbrf,
    TwoStageLoo,
    /// Influence predictions against themselves; a sanity row that must come
    /// out at exactly 1.
    InfluenceSelf,
}

impl CorrelationBaseline {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationBaseline::Cold => "cold",
            CorrelationBaseline::Warm => "warm",
            CorrelationBaseline::Pbrf => "pbrf",
            CorrelationBaseline::TwoStageLoo => "two_stage_loo",
            CorrelationBaseline::InfluenceSelf => "influence_self",
        }
    }
}

/// One correlation-table row: agreement between influence-predicted and
/// baseline-computed test-loss deltas over all (trial, test point) pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub baseline: CorrelationBaseline,
    pub pearson: f64,
    pub spearman: f64,
    pub n_points: usize,
}

/// For each baseline: retrain per removed set, measure actual test-loss
/// deltas against the trained parameters on the fixed test points, and
/// correlate with the influence predictions (one `s_test` solve per test
/// point, shared across trials).
pub fn correlation_table(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed_sets: &[Vec<u64>],
    test_points: &[DataPoint<'_>],
    baselines: &[CorrelationBaseline],
    opts: &DecomposeOptions,
) -> Result<Vec<CorrelationRow>> {
    if removed_sets.is_empty() || test_points.is_empty() {
        return Err(Error::EmptyData);
    }
    let n_points = removed_sets.len() * test_points.len();
    if n_points < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 (trial, test point) pairs, got {n_points}"
        )));
    }

    let mut influence_cfg = opts.influence.clone();
    if influence_cfg.epsilon.is_none() {
        influence_cfg.epsilon = Some(opts.six_way.epsilon(dataset.len()));
    }
    let stest = influence::stest_batch(&base.params, spec, dataset, test_points, &influence_cfg)?;

    // predicted[trial][k]: summed over the removed set (group convention).
    let mut predicted: Vec<Vec<f64>> = Vec::with_capacity(removed_sets.len());
    for removed in removed_sets {
        let mut per_test = vec![0.0; test_points.len()];
        for &id in removed {
            let scores = stest.scores_for_example(&base.params, spec, dataset, id)?;
            for (acc, s) in per_test.iter_mut().zip(scores) {
                *acc += s;
            }
        }
        predicted.push(per_test);
    }

    let base_losses: Vec<f64> = test_points
        .iter()
        .map(|p| nn::example_loss(&base.params, spec, p.input, p.target))
        .collect::<Result<_>>()?;

    let needs_six_way = baselines.iter().any(|b| {
        matches!(
            b,
            CorrelationBaseline::Cold | CorrelationBaseline::Warm | CorrelationBaseline::Pbrf
        )
    });
    let needs_two_stage = baselines.contains(&CorrelationBaseline::TwoStageLoo);

    struct TrialParams {
        six: Option<train::SixWayParams>,
        two_stage: Option<ParamVector>,
    }

    let trial_params: Vec<TrialParams> = removed_sets
        .par_iter()
        .enumerate()
        .map(|(trial, removed)| -> Result<TrialParams> {
            let topts = opts.trial_opts(trial);
            let six = if needs_six_way {
                Some(
                    train::six_way_protocol(base, spec, dataset, removed, &topts)
                        .map_err(|e| Error::tagged("correlation", format!("trial {trial}"), e))?,
                )
            } else {
                None
            };
            let two_stage = if needs_two_stage {
                Some(two_stage_loo(base, spec, dataset, removed, &topts)?)
            } else {
                None
            };
            Ok(TrialParams { six, two_stage })
        })
        .collect::<Result<_>>()?;

    let predicted_flat: Vec<f64> = predicted.iter().flatten().copied().collect();
    let mut rows = Vec::with_capacity(baselines.len());
    for &baseline in baselines {
        let actual_flat: Vec<f64> = match baseline {
            CorrelationBaseline::InfluenceSelf => predicted_flat.clone(),
            _ => {
                let mut actual = Vec::with_capacity(n_points);
                for tp in &trial_params {
                    let params = match baseline {
                        CorrelationBaseline::Cold => &tp.six.as_ref().unwrap().cold,
                        CorrelationBaseline::Warm => &tp.six.as_ref().unwrap().warm,
                        CorrelationBaseline::Pbrf => &tp.six.as_ref().unwrap().pbrf,
                        CorrelationBaseline::TwoStageLoo => tp.two_stage.as_ref().unwrap(),
                        CorrelationBaseline::InfluenceSelf => unreachable!(),
                    };
                    for (k, point) in test_points.iter().enumerate() {
                        let loss = nn::example_loss(params, spec, point.input, point.target)?;
                        actual.push(loss - base_losses[k]);
                    }
                }
                actual
            }
        };
        rows.push(CorrelationRow {
            baseline,
            pearson: stats::pearson(&predicted_flat, &actual_flat)?,
            spearman: stats::spearman(&predicted_flat, &actual_flat)?,
            n_points,
        });
    }
    Ok(rows)
}

/// Which experimental knob a sweep varies, everything else held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFactor {
    Width,
    Depth,
    Epochs,
    WeightDecay,
    Damping,
    RemovalFraction,
}

impl SweepFactor {
    pub fn name(self) -> &'static str {
        match self {
            SweepFactor::Width => "width",
            SweepFactor::Depth => "depth",
            SweepFactor::Epochs => "epochs",
            SweepFactor::WeightDecay => "weight_decay",
            SweepFactor::Damping => "damping",
            SweepFactor::RemovalFraction => "removal_fraction",
        }
    }
}

/// Everything a sweep holds fixed: the template architecture, data, base
/// training settings, protocol options, and trial count.
#[derive(Clone, Debug)]
pub struct SweepEnv {
    pub spec: NetworkSpec,
    pub base_config: TrainConfig,
    pub opts: DecomposeOptions,
    pub trials: usize,
    pub removed_seed: u64,
}

/// One grid point: the factor value and the decomposition it produced, or the
/// error that stopped it (the sweep continues past per-point failures).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: std::result::Result<DecompositionReport, String>,
}

fn apply_factor(
    factor: SweepFactor,
    value: f64,
    spec: &NetworkSpec,
    config: &TrainConfig,
    opts: &DecomposeOptions,
) -> Result<(NetworkSpec, TrainConfig, DecomposeOptions, usize)> {
    let mut spec = spec.clone();
    let mut config = config.clone();
    let mut opts = opts.clone();
    let mut group_size = 1usize;
    match factor {
        SweepFactor::Width => {
            let width = value as usize;
            if width == 0 {
                return Err(Error::InvalidConfig("width must be >= 1".into()));
            }
            let last = spec.layer_widths.len() - 1;
            for w in &mut spec.layer_widths[1..last] {
                *w = width;
            }
        }
        SweepFactor::Depth => {
            let depth = value as usize;
            if depth == 0 {
                return Err(Error::InvalidConfig("depth must be >= 1".into()));
            }
            let input = spec.layer_widths[0];
            let output = *spec.layer_widths.last().unwrap();
            let hidden = spec.layer_widths.get(1).copied().unwrap_or(output).max(1);
            let mut widths = vec![input];
            widths.extend(std::iter::repeat_n(hidden, depth));
            widths.push(output);
            spec.layer_widths = widths;
        }
        SweepFactor::Epochs => {
            let epochs = value as usize;
            if epochs == 0 {
                return Err(Error::InvalidConfig("epochs must be >= 1".into()));
            }
            config.epochs = epochs;
        }
        SweepFactor::WeightDecay => {
            spec.l2_strength = value;
        }
        SweepFactor::Damping => {
            opts.six_way.damping = value;
            opts.influence.damping = value;
        }
        SweepFactor::RemovalFraction => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfig(format!(
                    "removal fraction {value} outside [0, 1]"
                )));
            }
            group_size = 1;
            // Resolved against N by the caller of choose_removed_sets.
        }
    }
    spec.validate()?;
    Ok((spec, config, opts, group_size))
}

/// Retrain the base model and run the decomposition at every grid value,
/// holding all other settings fixed. Per-point errors are recorded and the
/// sweep continues.
pub fn factor_sweep(
    factor: SweepFactor,
    grid: &[f64],
    dataset: &Dataset,
    env: &SweepEnv,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let result = sweep_point(factor, value, dataset, env).map_err(|e| e.to_string());
        points.push(SweepPoint { value, result });
    }
    Ok(points)
}

fn sweep_point(
    factor: SweepFactor,
    value: f64,
    dataset: &Dataset,
    env: &SweepEnv,
) -> Result<DecompositionReport> {
    let (spec, config, opts, mut group_size) =
        apply_factor(factor, value, &env.spec, &env.base_config, &env.opts)?;
    if factor == SweepFactor::RemovalFraction {
        group_size = ((value * dataset.len() as f64).round() as usize).max(1);
    }
    let removed_sets = choose_removed_sets(dataset, env.trials, group_size, env.removed_seed)?;
    let base = train::train_base(&spec, dataset, &config)?;
    decompose(&base, &spec, dataset, &removed_sets, &opts)
}

/// Spearman trend of one decomposition term across sweep values; skips failed
/// points.
pub fn sweep_trend(points: &[SweepPoint], term: usize) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in points {
        if let Ok(report) = &p.result {
            xs.push(p.value);
            ys.push(report.mean.as_array()[term]);
        }
    }
    stats::spearman(&xs, &ys)
}
