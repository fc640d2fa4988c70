//! Damped inverse-curvature-vector products.
//!
//! Three routes to `x = (C + lambda I)^-1 v`: an exact dense solve (test
//! oracle, capped dimension), truncated conjugate gradients, and the LiSSA
//! truncated-Neumann recursion. All take the operator through
//! [`LinearOperator`], so the curvature is only ever touched through
//! matrix-vector products.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{self, NetworkSpec, ParamVector};

/// Symmetric linear map `v -> A v`. `apply_stochastic` lets operators with a
/// minibatch sampler substitute a sampled estimate; the default is the
/// deterministic product.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_stochastic(&self, v: &[f64], rng: &mut ChaCha20Rng) -> Vec<f64> {
        let _ = rng;
        self.apply(v)
    }
}

/// Which curvature matrix backs the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureKind {
    /// Full cost Hessian (includes the L2 term).
    Hessian,
    /// Gauss-Newton Hessian plus the L2 term; positive semidefinite.
    Gnh,
}

/// Damped curvature of the training cost at fixed parameters:
/// `v -> (C + damping I) v` with `C` the Hessian or GNH at `params`.
///
/// With `batch_size` set, `apply_stochastic` evaluates the curvature on a
/// seeded uniform minibatch (sampled without replacement, accumulated in
/// ascending row order); the damping and L2 shifts are exact either way.
pub struct CurvatureOperator<'a> {
    pub kind: CurvatureKind,
    pub damping: f64,
    params: &'a ParamVector,
    spec: &'a NetworkSpec,
    dataset: &'a Dataset,
    batch_size: Option<usize>,
}

impl<'a> CurvatureOperator<'a> {
    pub fn new(
        kind: CurvatureKind,
        params: &'a ParamVector,
        spec: &'a NetworkSpec,
        dataset: &'a Dataset,
        damping: f64,
    ) -> Result<Self> {
        if !(damping.is_finite() && damping >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "damping must be finite and nonnegative, got {damping}"
            )));
        }
        if dataset.is_empty() {
            return Err(Error::EmptyData);
        }
        Ok(CurvatureOperator {
            kind,
            damping,
            params,
            spec,
            dataset,
            batch_size: None,
        })
    }

    /// Enable stochastic minibatch application (LiSSA stochastic mode).
    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > self.dataset.len() {
            return Err(Error::InvalidConfig(format!(
                "batch_size {batch_size} outside 1..={}",
                self.dataset.len()
            )));
        }
        self.batch_size = Some(batch_size);
        Ok(self)
    }

    fn apply_rows(&self, rows: Option<&[usize]>, v: &ParamVector) -> ParamVector {
        match rows {
            None => self
                .apply_full(self.dataset, v)
                .expect("curvature apply on validated operator"),
            Some(rows) => {
                let batch = self.dataset.subset_by_rows(rows);
                self.apply_full(&batch, v)
                    .expect("curvature apply on validated operator")
            }
        }
    }

    fn apply_full(&self, dataset: &Dataset, v: &ParamVector) -> Result<ParamVector> {
        match self.kind {
            CurvatureKind::Hessian => {
                let mut out = nn::hvp(self.params, self.spec, dataset, v)?;
                out.add_scaled(self.damping, v);
                Ok(out)
            }
            CurvatureKind::Gnh => nn::gnh_vp(self.params, self.spec, dataset, v, self.damping),
        }
    }
}

impl LinearOperator for CurvatureOperator<'_> {
    fn dim(&self) -> usize {
        self.params.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = ParamVector(v.to_vec());
        self.apply_rows(None, &v).0
    }

    fn apply_stochastic(&self, v: &[f64], rng: &mut ChaCha20Rng) -> Vec<f64> {
        match self.batch_size {
            None => self.apply(v),
            Some(b) => {
                let n = self.dataset.len();
                let mut rows: Vec<usize> = (0..n).collect();
                rows.shuffle(rng);
                let mut chosen: Vec<usize> = rows.into_iter().take(b).collect();
                // Ascending order fixes the reduction order, so a full-size
                // batch reproduces the deterministic product bit for bit.
                chosen.sort_unstable();
                let v = ParamVector(v.to_vec());
                self.apply_rows(Some(&chosen), &v).0
            }
        }
    }
}

/// Echo of the solver invocation, for reports and manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverConfigEcho {
    Exact,
    Cg {
        max_iter: usize,
        tol: f64,
    },
    Lissa {
        depth: usize,
        repeats: usize,
        scale: f64,
        seed: u64,
    },
}

/// Solution plus convergence diagnostics. `residual_norm` is recomputed at
/// exit as `||A x - v||` with the deterministic operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    pub solution: ParamVector,
    pub iterations: usize,
    pub residual_norm: f64,
    pub config: SolverConfigEcho,
}

fn residual_norm(op: &dyn LinearOperator, x: &[f64], v: &[f64]) -> f64 {
    let ax = op.apply(x);
    ax.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub const DEFAULT_EXACT_DIM_CAP: usize = 2000;

/// Materialize the operator column by column, factorize, and solve. Test
/// oracle; O(d^3) and capped at [`DEFAULT_EXACT_DIM_CAP`].
pub fn solve_exact(op: &dyn LinearOperator, v: &ParamVector) -> Result<SolverReport> {
    solve_exact_with_cap(op, v, DEFAULT_EXACT_DIM_CAP)
}

pub fn solve_exact_with_cap(
    op: &dyn LinearOperator,
    v: &ParamVector,
    cap: usize,
) -> Result<SolverReport> {
    let factor = DenseFactor::build_with_cap(op, cap)?;
    let solution = factor.solve(v)?;
    let rn = residual_norm(op, solution.as_slice(), v.as_slice());
    Ok(SolverReport {
        solution,
        iterations: 1,
        residual_norm: rn,
        config: SolverConfigEcho::Exact,
    })
}

enum FactorKind {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Symmetric eigendecomposition fallback for indefinite-but-invertible
    /// matrices.
    Eigen {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
    },
}

/// Factorized dense operator for repeated solves against the same curvature
/// (the `s_test` trick, per-example self-influence).
pub struct DenseFactor {
    kind: FactorKind,
    dim: usize,
}

impl DenseFactor {
    pub fn build(op: &dyn LinearOperator) -> Result<Self> {
        Self::build_with_cap(op, DEFAULT_EXACT_DIM_CAP)
    }

    pub fn build_with_cap(op: &dyn LinearOperator, cap: usize) -> Result<Self> {
        let d = op.dim();
        if d > cap {
            return Err(Error::DimensionCap { dim: d, cap });
        }
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut basis = vec![0.0; d];
        for j in 0..d {
            basis[j] = 1.0;
            let col = op.apply(&basis);
            basis[j] = 0.0;
            for i in 0..d {
                a[(i, j)] = col[i];
            }
        }
        // Symmetrize to wash out round-off asymmetry between AD paths.
        let a = (&a + a.transpose()) * 0.5;

        let scale = a
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        match a.clone().cholesky() {
            Some(chol) => Ok(DenseFactor {
                kind: FactorKind::Cholesky(chol),
                dim: d,
            }),
            None => {
                let eig = a.symmetric_eigen();
                let min_eig = eig
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if eig.eigenvalues.iter().any(|&e| e.abs() <= 1e-12 * scale) {
                    return Err(Error::SingularCurvature {
                        min_eigenvalue: min_eig,
                    });
                }
                let inv_values = eig.eigenvalues.map(|e| 1.0 / e);
                Ok(DenseFactor {
                    kind: FactorKind::Eigen {
                        vectors: eig.eigenvectors,
                        inv_values,
                    },
                    dim: d,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, v: &ParamVector) -> Result<ParamVector> {
        if v.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "solver rhs",
                expected: self.dim,
                got: v.len(),
            });
        }
        let rhs = DVector::from_column_slice(v.as_slice());
        let sol = match &self.kind {
            FactorKind::Cholesky(chol) => chol.solve(&rhs),
            FactorKind::Eigen { vectors, inv_values } => {
                let projected = vectors.transpose() * rhs;
                let scaled = projected.component_mul(inv_values);
                vectors * scaled
            }
        };
        Ok(ParamVector(sol.iter().copied().collect()))
    }
}

/// Conjugate gradients from `x0 = 0`; stops when `||r|| <= tol ||v||` or at
/// `max_iter`. Exact in at most `d` iterations in exact arithmetic.
pub fn solve_cg(
    op: &dyn LinearOperator,
    v: &ParamVector,
    max_iter: usize,
    tol: f64,
) -> Result<SolverReport> {
    let d = op.dim();
    if v.len() != d {
        return Err(Error::ShapeMismatch {
            context: "cg rhs",
            expected: d,
            got: v.len(),
        });
    }
    let bnorm = v.norm();
    let mut x = vec![0.0; d];
    if bnorm == 0.0 {
        return Ok(SolverReport {
            solution: ParamVector(x),
            iterations: 0,
            residual_norm: 0.0,
            config: SolverConfigEcho::Cg { max_iter, tol },
        });
    }
    let mut r = v.as_slice().to_vec();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|a| a * a).sum();
    let threshold = tol * bnorm;
    let mut iterations = 0;
    for k in 0..max_iter {
        if rs.sqrt() <= threshold {
            break;
        }
        let ap = op.apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::IndefiniteOperator {
                quadratic: pap,
                iteration: k,
            });
        }
        let alpha = rs / pap;
        for i in 0..d {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_next: f64 = r.iter().map(|a| a * a).sum();
        let beta = rs_next / rs;
        for i in 0..d {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_next;
        iterations = k + 1;
    }
    let rn = residual_norm(op, &x, v.as_slice());
    Ok(SolverReport {
        solution: ParamVector(x),
        iterations,
        residual_norm: rn,
        config: SolverConfigEcho::Cg { max_iter, tol },
    })
}

/// LiSSA truncated-Neumann recursion `r_t = v + (I - A/scale) r_{t-1}` from
/// `r_0 = v`, returning `r_T / scale` averaged over `repeats` seeded trials.
/// With a minibatch sampler on the operator each step resamples the
/// curvature; otherwise the recursion is deterministic and the repeats are
/// identical. Requires `scale` above the largest eigenvalue of `A`;
/// divergence (norm growing 10x over a 10-step window) is reported as a
/// scale-too-small error.
pub fn solve_lissa(
    op: &dyn LinearOperator,
    v: &ParamVector,
    depth: usize,
    repeats: usize,
    scale: f64,
    seed: u64,
) -> Result<SolverReport> {
    let d = op.dim();
    if v.len() != d {
        return Err(Error::ShapeMismatch {
            context: "lissa rhs",
            expected: d,
            got: v.len(),
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig("lissa repeats must be >= 1".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lissa scale must be positive, got {scale}"
        )));
    }
    let inv_scale = 1.0 / scale;

    let run_repeat = |r_idx: usize| -> Result<Vec<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(r_idx as u64);
        let mut r = v.as_slice().to_vec();
        let mut norms: Vec<f64> = Vec::with_capacity(depth + 1);
        norms.push(r.iter().map(|a| a * a).sum::<f64>().sqrt());
        for t in 1..=depth {
            let ar = op.apply_stochastic(&r, &mut rng);
            for i in 0..d {
                r[i] = v.as_slice()[i] + r[i] - inv_scale * ar[i];
            }
            let norm = r.iter().map(|a| a * a).sum::<f64>().sqrt();
            norms.push(norm);
            if !norm.is_finite()
                || (t >= 10 && norm >= 10.0 * norms[t - 10] && norms[t - 10] > 0.0)
            {
                return Err(Error::ScaleTooSmall { step: t });
            }
        }
        Ok(r.into_iter().map(|x| x * inv_scale).collect())
    };

    let partials: Vec<Result<Vec<f64>>> = (0..repeats).into_par_iter().map(run_repeat).collect();
    // Average in fixed index order.
    let mut mean = vec![0.0; d];
    for partial in partials {
        let partial = partial?;
        for (m, x) in mean.iter_mut().zip(&partial) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= repeats as f64;
    }
    let rn = residual_norm(op, &mean, v.as_slice());
    Ok(SolverReport {
        solution: ParamVector(mean),
        iterations: depth,
        residual_norm: rn,
        config: SolverConfigEcho::Lissa {
            depth,
            repeats,
            scale,
            seed,
        },
    })
}

/// Dense symmetric operator over an explicit matrix; used by tests and the
/// LiSSA tuning probe.
pub struct MatrixOperator {
    pub matrix: Vec<f64>,
    pub dim: usize,
}

impl MatrixOperator {
    pub fn diagonal(entries: &[f64]) -> Self {
        let d = entries.len();
        let mut matrix = vec![0.0; d * d];
        for (i, &e) in entries.iter().enumerate() {
            matrix[i * d + i] = e;
        }
        MatrixOperator { matrix, dim: d }
    }

    /// Random symmetric positive definite `B B^T / d + mu I`, seeded.
    pub fn random_spd(d: usize, mu: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += b[i * d + k] * b[j * d + k];
                }
                matrix[i * d + j] = acc / d as f64 + if i == j { mu } else { 0.0 };
            }
        }
        MatrixOperator { matrix, dim: d }
    }
}

impl LinearOperator for MatrixOperator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecpar(v: &[f64]) -> ParamVector {
        ParamVector(v.to_vec())
    }

    /// Largest-eigenvalue estimate by power iteration; used to tune the LiSSA
    /// scale tightly.
    fn spectral_norm(op: &dyn LinearOperator, iters: usize) -> f64 {
        let d = op.dim();
        let mut x: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let mut lambda = 0.0;
        for _ in 0..iters {
            let ax = op.apply(&x);
            let norm = ax.iter().map(|a| a * a).sum::<f64>().sqrt();
            lambda = norm / x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x = ax.into_iter().map(|a| a / norm).collect();
        }
        lambda
    }

    #[test]
    fn exact_inverts_diagonal() {
        let op = MatrixOperator::diagonal(&[2.0, 4.0]);
        let report = solve_exact(&op, &vecpar(&[2.0, 4.0])).unwrap();
        assert!((report.solution.as_slice()[0] - 1.0).abs() < 1e-14);
        assert!((report.solution.as_slice()[1] - 1.0).abs() < 1e-14);
        assert!(report.residual_norm <= 1e-10 * 20f64.sqrt());
    }

    #[test]
    fn exact_zero_rhs_gives_zero() {
        let op = MatrixOperator::random_spd(8, 0.1, 1);
        let report = solve_exact(&op, &ParamVector::zeros(8)).unwrap();
        assert_eq!(report.solution.norm(), 0.0);
    }

    #[test]
    fn exact_damping_dominated_limit() {
        // With A = C + lambda I and lambda = 1e6 ||C||, solution -> v/lambda.
        let c = MatrixOperator::random_spd(6, 0.0, 2);
        let cnorm = c.matrix.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 6.0;
        let lambda = 1e6 * cnorm;
        let mut damped = c.matrix.clone();
        for i in 0..6 {
            damped[i * 6 + i] += lambda;
        }
        let op = MatrixOperator {
            matrix: damped,
            dim: 6,
        };
        let v: Vec<f64> = (0..6).map(|i| (i + 1) as f64).collect();
        let report = solve_exact(&op, &vecpar(&v)).unwrap();
        for (x, b) in report.solution.as_slice().iter().zip(&v) {
            let rel = (x - b / lambda).abs() / (b / lambda).abs();
            assert!(rel <= 1e-6, "rel {rel}");
        }
    }

    #[test]
    fn exact_reports_singularity_with_min_eigenvalue() {
        let op = MatrixOperator::diagonal(&[1.0, 0.0]);
        match solve_exact(&op, &vecpar(&[1.0, 1.0])) {
            Err(Error::SingularCurvature { min_eigenvalue }) => {
                assert!(min_eigenvalue.abs() < 1e-12);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn exact_respects_dimension_cap() {
        let op = MatrixOperator::diagonal(&[1.0; 8]);
        assert!(matches!(
            solve_exact_with_cap(&op, &ParamVector::zeros(8), 4),
            Err(Error::DimensionCap { dim: 8, cap: 4 })
        ));
    }

    #[test]
    fn cg_two_distinct_eigenvalues_terminates_in_two_iterations() {
        let op = MatrixOperator::diagonal(&[2.0, 4.0]);
        let report = solve_cg(&op, &vecpar(&[2.0, 4.0]), 10, 1e-12).unwrap();
        assert!(report.iterations <= 2);
        assert!((report.solution.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((report.solution.as_slice()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_exact_on_random_spd() {
        use rand::Rng;
        let op = MatrixOperator::random_spd(50, 1e-2, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = solve_exact(&op, &vecpar(&v)).unwrap();
        let cg = solve_cg(&op, &vecpar(&v), 500, 1e-14).unwrap();
        let rel = cg.solution.sub(&exact.solution).norm() / exact.solution.norm();
        assert!(rel <= 1e-8, "rel {rel}");
    }

    #[test]
    fn cg_zero_rhs_zero_iterations() {
        let op = MatrixOperator::random_spd(5, 0.1, 5);
        let report = solve_cg(&op, &ParamVector::zeros(5), 10, 1e-10).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.solution.norm(), 0.0);
    }

    #[test]
    fn cg_detects_indefiniteness() {
        let op = MatrixOperator::diagonal(&[1.0, -1.0]);
        assert!(matches!(
            solve_cg(&op, &vecpar(&[0.0, 1.0]), 10, 1e-10),
            Err(Error::IndefiniteOperator { .. })
        ));
    }

    #[test]
    fn lissa_scalar_geometric_series() {
        let op = MatrixOperator::diagonal(&[2.0]);
        let report = solve_lissa(&op, &vecpar(&[3.0]), 60, 1, 4.0, 0).unwrap();
        assert!((report.solution.as_slice()[0] - 1.5).abs() <= 1e-9);
    }

    #[test]
    fn lissa_depth_zero_returns_scaled_rhs() {
        let op = MatrixOperator::diagonal(&[2.0, 2.0]);
        let report = solve_lissa(&op, &vecpar(&[4.0, 8.0]), 0, 3, 4.0, 0).unwrap();
        assert_eq!(report.solution.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn lissa_matches_exact_with_large_depth() {
        use rand::Rng;
        let mut op = MatrixOperator::random_spd(50, 0.0, 7);
        // Compress the data spectrum and add lambda = 1e-3 damping so depth
        // 5000 with a tuned scale reaches 1e-3 relative error.
        for x in &mut op.matrix {
            *x *= 0.25;
        }
        for i in 0..50 {
            op.matrix[i * 50 + i] += 1e-3;
        }
        let scale = spectral_norm(&op, 100) * 1.05;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = solve_exact(&op, &vecpar(&v)).unwrap();
        let lissa = solve_lissa(&op, &vecpar(&v), 5000, 1, scale, 0).unwrap();
        let rel = lissa.solution.sub(&exact.solution).norm() / exact.solution.norm();
        assert!(rel <= 1e-3, "rel {rel}");
    }

    #[test]
    fn lissa_detects_scale_too_small() {
        let op = MatrixOperator::diagonal(&[100.0, 100.0]);
        assert!(matches!(
            solve_lissa(&op, &vecpar(&[1.0, 1.0]), 200, 1, 1.0, 0),
            Err(Error::ScaleTooSmall { .. })
        ));
    }

    #[test]
    fn solvers_agree_pairwise_on_small_spd() {
        use rand::Rng;
        let op = MatrixOperator::random_spd(20, 1e-2, 9);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let v: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = {
            let mut max_row = 0.0f64;
            for row in op.matrix.chunks_exact(20) {
                max_row = max_row.max(row.iter().map(|x| x.abs()).sum());
            }
            max_row * 1.1
        };
        let exact = solve_exact(&op, &vecpar(&v)).unwrap().solution;
        let cg = solve_cg(&op, &vecpar(&v), 200, 1e-14).unwrap().solution;
        let lissa = solve_lissa(&op, &vecpar(&v), 8000, 1, scale, 0)
            .unwrap()
            .solution;
        assert!(cg.sub(&exact).norm() / exact.norm() <= 1e-8);
        assert!(lissa.sub(&exact).norm() / exact.norm() <= 1e-3);
    }

    #[test]
    fn solver_solutions_are_linear_in_rhs() {
        use rand::Rng;
        let op = MatrixOperator::random_spd(12, 5e-2, 11);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
        for (a, b, tol) in [
            (
                solve_exact(&op, &vecpar(&v)).unwrap().solution,
                solve_exact(&op, &vecpar(&scaled)).unwrap().solution,
                1e-12,
            ),
            (
                solve_cg(&op, &vecpar(&v), 100, 1e-13).unwrap().solution,
                solve_cg(&op, &vecpar(&scaled), 100, 1e-13).unwrap().solution,
                1e-10,
            ),
        ] {
            let rel = b.sub(&a.scaled(3.0)).norm() / b.norm();
            assert!(rel <= tol, "rel {rel}");
        }
    }

    #[test]
    fn damping_monotonically_shrinks_solutions() {
        use rand::Rng;
        let base = MatrixOperator::random_spd(10, 0.0, 13);
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut last = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let mut damped = base.matrix.clone();
            for i in 0..10 {
                damped[i * 10 + i] += lambda;
            }
            let op = MatrixOperator {
                matrix: damped,
                dim: 10,
            };
            let norm = solve_exact(&op, &vecpar(&v)).unwrap().solution.norm();
            assert!(norm < last, "norm {norm} not below {last} at lambda {lambda}");
            last = norm;
        }
    }
}
