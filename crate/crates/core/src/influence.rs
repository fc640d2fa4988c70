//! Influence-function estimators.
//!
//! The parameter-space estimate is `delta = eps * (C + lambda I)^-1 g` with
//! `g` the summed data-loss gradient of the removed examples at the trained
//! parameters, and `C` the damped Hessian or Gauss-Newton curvature of the
//! cost over the full dataset. Test-loss influence contracts that step with a
//! test gradient; the `s_test` trick reuses one solve per test point across
//! all training examples.
//!
//! Sign convention: a positive test-loss score means removing the training
//! example is predicted to increase the test loss. Scores are deltas; the
//! unperturbed test loss is not included.

use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::nn::{self, NetworkSpec, ParamVector};
use crate::solvers::{
    self, CurvatureKind, CurvatureOperator, DenseFactor, LinearOperator, SolverConfigEcho,
    SolverReport,
};

/// Inverse-curvature solver choice plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    Cg {
        #[serde(default)]
        max_iter: Option<usize>,
        #[serde(default = "default_cg_tol")]
        tol: f64,
    },
    Lissa {
        depth: usize,
        repeats: usize,
        scale: f64,
        #[serde(default)]
        batch_size: Option<usize>,
        seed: u64,
    },
}

fn default_cg_tol() -> f64 {
    1e-10
}

/// Influence estimator configuration. Defaults follow the damped
/// Gauss-Newton estimator with `lambda = 1e-3` and `eps = 1/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceConfig {
    /// Downweighting factor per removed example; `None` means 1/N.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub damping: f64,
    pub curvature: CurvatureKind,
    pub solver: SolverChoice,
}

impl InfluenceConfig {
    pub fn exact_gnh(damping: f64) -> Self {
        InfluenceConfig {
            epsilon: None,
            damping,
            curvature: CurvatureKind::Gnh,
            solver: SolverChoice::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "damping must be finite and nonnegative, got {}",
                self.damping
            )));
        }
        // Iterative solvers need a positive-definite system; the Hessian of a
        // non-converged network may be indefinite without damping.
        if self.damping == 0.0
            && self.curvature == CurvatureKind::Hessian
            && !matches!(self.solver, SolverChoice::Exact)
        {
            return Err(Error::InvalidConfig(
                "cg/lissa on Hessian curvature require damping > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn epsilon(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / n as f64)
    }
}

/// Predicted parameter change for a removed set, with solver diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    pub delta_params: ParamVector,
    pub removed: Vec<u64>,
    pub report: SolverReport,
}

fn curvature_operator<'a>(
    params: &'a ParamVector,
    spec: &'a NetworkSpec,
    dataset: &'a Dataset,
    cfg: &InfluenceConfig,
) -> Result<CurvatureOperator<'a>> {
    let op = CurvatureOperator::new(cfg.curvature, params, spec, dataset, cfg.damping)?;
    match cfg.solver {
        SolverChoice::Lissa {
            batch_size: Some(b),
            ..
        } => op.with_batch_size(b),
        _ => Ok(op),
    }
}

fn solve(op: &CurvatureOperator<'_>, rhs: &ParamVector, cfg: &InfluenceConfig) -> Result<SolverReport> {
    match &cfg.solver {
        SolverChoice::Exact => solvers::solve_exact(op, rhs),
        SolverChoice::Cg { max_iter, tol } => {
            solvers::solve_cg(op, rhs, max_iter.unwrap_or(op.dim()), *tol)
        }
        SolverChoice::Lissa {
            depth,
            repeats,
            scale,
            seed,
            ..
        } => solvers::solve_lissa(op, rhs, *depth, *repeats, *scale, *seed),
    }
}

/// Summed data-loss gradient over the removed examples at `params`.
fn removed_gradient(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed: &[u64],
) -> Result<ParamVector> {
    let mut grad = ParamVector::zeros(params.len());
    for &id in removed {
        let row = dataset.position_of(id).ok_or(Error::UnknownId { id })?;
        let (_, g) = nn::example_loss_grad(params, spec, dataset.input(row), dataset.target(row))?;
        grad.add_scaled(1.0, &g);
    }
    Ok(grad)
}

/// Predicted parameter response to removing `removed`:
/// `eps * (C + lambda I)^-1 sum_z grad L_z(theta_s)`.
///
/// A zero removed gradient (an already-interpolated example) short-circuits
/// to a zero estimate without invoking the solver.
pub fn param_influence(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed: &[u64],
    cfg: &InfluenceConfig,
) -> Result<InfluenceEstimate> {
    cfg.validate()?;
    let epsilon = cfg.epsilon(dataset.len());
    let grad = removed_gradient(params, spec, dataset, removed)?;
    if grad.norm() == 0.0 || epsilon == 0.0 {
        return Ok(InfluenceEstimate {
            delta_params: ParamVector::zeros(params.len()),
            removed: removed.to_vec(),
            report: SolverReport {
                solution: ParamVector::zeros(params.len()),
                iterations: 0,
                residual_norm: 0.0,
                config: SolverConfigEcho::Exact,
            },
        });
    }
    let op = curvature_operator(params, spec, dataset, cfg)?;
    let report = solve(&op, &grad, cfg)?;
    let delta_params = report.solution.scaled(epsilon);
    Ok(InfluenceEstimate {
        delta_params,
        removed: removed.to_vec(),
        report,
    })
}

/// Predicted change in the loss at `test_point` when `removed_id` is removed:
/// `eps * grad L_test^T (C + lambda I)^-1 grad L_z`. With the default
/// `eps = 1/N` this is the removal approximation of the test loss delta.
pub fn test_loss_influence(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    removed_id: u64,
    test_point: DataPoint<'_>,
    cfg: &InfluenceConfig,
) -> Result<f64> {
    cfg.validate()?;
    let (_, test_grad) = nn::example_loss_grad(params, spec, test_point.input, test_point.target)?;
    if test_grad.norm() == 0.0 {
        return Ok(0.0);
    }
    let estimate = param_influence(params, spec, dataset, &[removed_id], cfg)?;
    Ok(test_grad.dot(&estimate.delta_params))
}

/// Influence of a training example on its own loss; ranks likely-mislabelled
/// data.
pub fn self_influence(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    id: u64,
    cfg: &InfluenceConfig,
) -> Result<f64> {
    let row = dataset.position_of(id).ok_or(Error::UnknownId { id })?;
    test_loss_influence(params, spec, dataset, id, dataset.point(row), cfg)
}

/// Precomputed `s_test = (C + lambda I)^-1 grad L_test` vectors, one per test
/// point; scoring a training example is then a dot product.
pub struct StestBatch {
    vectors: Vec<ParamVector>,
    pub reports: Vec<SolverReport>,
    epsilon: f64,
}

/// One damped solve per test point. With the exact solver the factorization
/// is built once and shared across test points.
pub fn stest_batch(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    test_points: &[DataPoint<'_>],
    cfg: &InfluenceConfig,
) -> Result<StestBatch> {
    cfg.validate()?;
    let epsilon = cfg.epsilon(dataset.len());
    let mut vectors = Vec::with_capacity(test_points.len());
    let mut reports = Vec::with_capacity(test_points.len());
    let op = curvature_operator(params, spec, dataset, cfg)?;
    let factor = match cfg.solver {
        SolverChoice::Exact => Some(DenseFactor::build(&op)?),
        _ => None,
    };
    for point in test_points {
        let (_, test_grad) = nn::example_loss_grad(params, spec, point.input, point.target)?;
        let report = match &factor {
            Some(f) => {
                let solution = f.solve(&test_grad)?;
                SolverReport {
                    iterations: 1,
                    residual_norm: 0.0,
                    config: SolverConfigEcho::Exact,
                    solution,
                }
            }
            None => solve(&op, &test_grad, cfg)?,
        };
        vectors.push(report.solution.clone());
        reports.push(report);
    }
    Ok(StestBatch {
        vectors,
        reports,
        epsilon,
    })
}

impl StestBatch {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// The precomputed solve for test point `i`.
    pub fn vector(&self, i: usize) -> &ParamVector {
        &self.vectors[i]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Scores of one training example against every test point, in test-point
    /// order. Equal to [`test_loss_influence`] up to solver tolerance.
    pub fn scores_for_example(
        &self,
        params: &ParamVector,
        spec: &NetworkSpec,
        dataset: &Dataset,
        train_id: u64,
    ) -> Result<Vec<f64>> {
        let row = dataset
            .position_of(train_id)
            .ok_or(Error::UnknownId { id: train_id })?;
        let (_, grad) = nn::example_loss_grad(params, spec, dataset.input(row), dataset.target(row))?;
        Ok(self
            .vectors
            .iter()
            .map(|s| self.epsilon * grad.dot(s))
            .collect())
    }
}

/// Self-influence of every training example, sharing one factorization when
/// the exact solver is selected.
pub fn self_influence_all(
    params: &ParamVector,
    spec: &NetworkSpec,
    dataset: &Dataset,
    cfg: &InfluenceConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let epsilon = cfg.epsilon(dataset.len());
    let op = curvature_operator(params, spec, dataset, cfg)?;
    let factor = match cfg.solver {
        SolverChoice::Exact => Some(DenseFactor::build(&op)?),
        _ => None,
    };
    let mut scores = Vec::with_capacity(dataset.len());
    for row in 0..dataset.len() {
        let (_, grad) = nn::example_loss_grad(params, spec, dataset.input(row), dataset.target(row))?;
        if grad.norm() == 0.0 {
            scores.push(0.0);
            continue;
        }
        let solution = match &factor {
            Some(f) => f.solve(&grad)?,
            None => solve(&op, &grad, cfg)?.solution,
        };
        scores.push(epsilon * grad.dot(&solution));
    }
    Ok(scores)
}
