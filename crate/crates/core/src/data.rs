//! Dataset construction: CSV ingestion, synthetic generators, normalization,
//! deterministic label corruption, and example removal.
//!
//! Datasets are immutable after construction. Rows carry stable ids assigned
//! at load time; removal keeps the surviving rows' ids, so downstream
//! artifacts can always name the examples they refer to.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TargetRef;

/// Targets for all rows: real vectors for regression-style losses, or integer
/// class labels (one-hot expansion happens inside loss evaluation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Real { values: Vec<f64>, dim: usize },
    Labels { values: Vec<usize>, num_classes: usize },
}

/// A borrowed example: input features plus target.
#[derive(Clone, Copy, Debug)]
pub struct DataPoint<'a> {
    pub input: &'a [f64],
    pub target: TargetRef<'a>,
}

/// Immutable dataset: an N-by-p input matrix plus targets and stable row ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<f64>,
    input_dim: usize,
    targets: Targets,
    ids: Vec<u64>,
}

impl Dataset {
    pub fn from_parts(inputs: Vec<f64>, input_dim: usize, targets: Targets) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if !inputs.len().is_multiple_of(input_dim) {
            return Err(Error::ShapeMismatch {
                context: "dataset inputs",
                expected: input_dim,
                got: inputs.len(),
            });
        }
        let n = inputs.len() / input_dim;
        let target_rows = match &targets {
            Targets::Real { values, dim } => {
                if *dim == 0 || values.len() % dim != 0 {
                    return Err(Error::ShapeMismatch {
                        context: "dataset targets",
                        expected: *dim,
                        got: values.len(),
                    });
                }
                values.len() / dim
            }
            Targets::Labels { values, num_classes } => {
                if let Some(&bad) = values.iter().find(|&&c| c >= *num_classes) {
                    return Err(Error::InvalidConfig(format!(
                        "label {bad} out of range for {num_classes} classes"
                    )));
                }
                values.len()
            }
        };
        if target_rows != n {
            return Err(Error::ShapeMismatch {
                context: "dataset target rows",
                expected: n,
                got: target_rows,
            });
        }
        if let Some(i) = inputs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: i / input_dim,
                column: format!("feature {}", i % input_dim),
            });
        }
        if let Targets::Real { values, dim } = &targets {
            if let Some(i) = values.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    row: i / dim,
                    column: format!("target {}", i % dim),
                });
            }
        }
        let ids = (0..n as u64).collect();
        Ok(Dataset {
            inputs,
            input_dim,
            targets,
            ids,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Target dimension as seen by the network output layer.
    pub fn target_dim(&self) -> usize {
        match &self.targets {
            Targets::Real { dim, .. } => *dim,
            // Binary labels pair with a single logit; multi-class with one
            // logit per class.
            Targets::Labels { num_classes, .. } => *num_classes,
        }
    }

    #[inline]
    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row * self.input_dim..(row + 1) * self.input_dim]
    }

    pub fn target(&self, row: usize) -> TargetRef<'_> {
        match &self.targets {
            Targets::Real { values, dim } => TargetRef::Real(&values[row * dim..(row + 1) * dim]),
            Targets::Labels { values, .. } => TargetRef::Label(values[row]),
        }
    }

    /// Borrowed view of row `row` as a standalone data point.
    pub fn point(&self, row: usize) -> DataPoint<'_> {
        DataPoint {
            input: self.input(row),
            target: self.target(row),
        }
    }

    #[inline]
    pub fn id(&self, row: usize) -> u64 {
        self.ids[row]
    }

    #[inline]
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Labels { .. })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Labels { num_classes, .. } => Some(*num_classes),
            Targets::Real { .. } => None,
        }
    }

    pub fn label(&self, row: usize) -> Option<usize> {
        match &self.targets {
            Targets::Labels { values, .. } => Some(values[row]),
            Targets::Real { .. } => None,
        }
    }

    /// Row-subset copy used for minibatch curvature estimates.
    pub(crate) fn subset_by_rows(&self, rows: &[usize]) -> Dataset {
        self.with_rows(rows)
    }

    fn with_rows(&self, keep: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(keep.len() * self.input_dim);
        for &r in keep {
            inputs.extend_from_slice(self.input(r));
        }
        let targets = match &self.targets {
            Targets::Real { values, dim } => Targets::Real {
                values: keep
                    .iter()
                    .flat_map(|&r| values[r * dim..(r + 1) * dim].iter().copied())
                    .collect(),
                dim: *dim,
            },
            Targets::Labels { values, num_classes } => Targets::Labels {
                values: keep.iter().map(|&r| values[r]).collect(),
                num_classes: *num_classes,
            },
        };
        Dataset {
            inputs,
            input_dim: self.input_dim,
            targets,
            ids: keep.iter().map(|&r| self.ids[r]).collect(),
        }
    }
}

/// Column roles for CSV ingestion. Exactly one of `target_columns` /
/// `label_column` must be set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub target_columns: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
}

impl CsvSchema {
    fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::InvalidConfig("schema needs feature columns".into()));
        }
        match (self.target_columns.is_empty(), self.label_column.is_none()) {
            (false, true) | (true, false) => Ok(()),
            _ => Err(Error::InvalidConfig(
                "schema needs either target_columns or label_column, not both".into(),
            )),
        }
    }
}

/// Load a comma-separated file (UTF-8, header line, '.' decimal separator).
/// Row order is preserved and ids are assigned 0..N-1.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::CsvIngestion {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::CsvIngestion {
                row: 0,
                column: name.to_string(),
                message: "column not found in header".into(),
            })
    };

    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let target_idx: Vec<usize> = schema
        .target_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let label_idx = match &schema.label_column {
        Some(c) => Some(col_index(c)?),
        None => None,
    };

    let parse_cell = |field: &str, row: usize, column: &str| -> Result<f64> {
        let value: f64 = field.trim().parse().map_err(|_| Error::CsvIngestion {
            row,
            column: column.to_string(),
            message: format!("cannot parse '{field}' as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                row,
                column: column.to_string(),
            });
        }
        Ok(value)
    };

    let mut inputs = Vec::new();
    let mut real_targets = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n = 0usize;

    for (row_i, record) in reader.records().enumerate() {
        let row = row_i + 1; // 1-based data row for messages
        let record = record.map_err(|e| Error::CsvIngestion {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for &fi in &feature_idx {
            let field = record.get(fi).ok_or_else(|| Error::CsvIngestion {
                row,
                column: headers[fi].clone(),
                message: "missing field".into(),
            })?;
            inputs.push(parse_cell(field, row, &headers[fi])?);
        }
        for &ti in &target_idx {
            let field = record.get(ti).ok_or_else(|| Error::CsvIngestion {
                row,
                column: headers[ti].clone(),
                message: "missing field".into(),
            })?;
            real_targets.push(parse_cell(field, row, &headers[ti])?);
        }
        if let Some(li) = label_idx {
            let field = record.get(li).ok_or_else(|| Error::CsvIngestion {
                row,
                column: headers[li].clone(),
                message: "missing field".into(),
            })?;
            let value = parse_cell(field, row, &headers[li])?;
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::CsvIngestion {
                    row,
                    column: headers[li].clone(),
                    message: format!("label '{field}' is not a nonnegative integer"),
                });
            }
            labels.push(value as usize);
        }
        n += 1;
    }

    if n == 0 {
        return Err(Error::EmptyData);
    }

    let targets = if label_idx.is_some() {
        let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
        Targets::Labels {
            values: labels,
            num_classes,
        }
    } else {
        Targets::Real {
            values: real_targets,
            dim: target_idx.len(),
        }
    };
    Dataset::from_parts(inputs, feature_idx.len(), targets)
}

/// Per-feature (and, for regression, per-target) affine normalization
/// parameters. `inv_std` is zero for constant columns, mapping them to zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub feature_mean: Vec<f64>,
    pub feature_inv_std: Vec<f64>,
    pub target_mean: Option<Vec<f64>>,
    pub target_inv_std: Option<Vec<f64>>,
}

fn column_stats(values: &[f64], dim: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    for row in values.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // Population (1/N) variance.
    let mut var = vec![0.0; dim];
    for row in values.chunks_exact(dim) {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
            let d = x - m;
            *v += d * d;
        }
    }
    let inv_std = var
        .iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s < 1e-12 {
                0.0
            } else {
                1.0 / s
            }
        })
        .collect();
    (mean, inv_std)
}

fn apply_affine(values: &mut [f64], dim: usize, mean: &[f64], inv_std: &[f64]) {
    for row in values.chunks_exact_mut(dim) {
        for ((x, m), s) in row.iter_mut().zip(mean).zip(inv_std) {
            *x = (*x - m) * s;
        }
    }
}

/// Normalize features (and regression targets) to zero mean and unit
/// population variance. Constant columns map to zero.
pub fn normalize(dataset: &Dataset) -> Result<(Dataset, NormalizationParams)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let (feature_mean, feature_inv_std) = column_stats(&dataset.inputs, dataset.input_dim, n);
    let mut inputs = dataset.inputs.clone();
    apply_affine(&mut inputs, dataset.input_dim, &feature_mean, &feature_inv_std);

    let (targets, target_mean, target_inv_std) = match &dataset.targets {
        Targets::Real { values, dim } => {
            let (tm, ts) = column_stats(values, *dim, n);
            let mut v = values.clone();
            apply_affine(&mut v, *dim, &tm, &ts);
            (
                Targets::Real { values: v, dim: *dim },
                Some(tm),
                Some(ts),
            )
        }
        labels @ Targets::Labels { .. } => (labels.clone(), None, None),
    };

    let normalized = Dataset {
        inputs,
        input_dim: dataset.input_dim,
        targets,
        ids: dataset.ids.clone(),
    };
    Ok((
        normalized,
        NormalizationParams {
            feature_mean,
            feature_inv_std,
            target_mean,
            target_inv_std,
        },
    ))
}

/// Which rows were corrupted, their original labels, and the seed that chose
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub corrupted_ids: BTreeSet<u64>,
    pub original_labels: BTreeMap<u64, usize>,
    pub seed: u64,
}

/// Reassign `round(fraction * N)` labels, chosen uniformly without
/// replacement, to a uniformly random *different* class. Deterministic given
/// the seed.
pub fn corrupt_labels(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, CorruptionRecord)> {
    let (values, num_classes) = match &dataset.targets {
        Targets::Labels { values, num_classes } => (values.clone(), *num_classes),
        Targets::Real { .. } => return Err(Error::UnsupportedTask),
    };
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "corruption fraction {fraction} outside [0, 1]"
        )));
    }
    if num_classes < 2 && fraction > 0.0 {
        return Err(Error::InvalidConfig(
            "cannot corrupt labels with fewer than 2 classes".into(),
        ));
    }
    let n = dataset.len();
    let count = (fraction * n as f64).round() as usize;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let mut chosen: Vec<usize> = rows.into_iter().take(count).collect();
    // Draw replacement labels in sorted row order so the record is
    // independent of the shuffle's internal ordering.
    chosen.sort_unstable();

    let mut new_values = values.clone();
    let mut corrupted_ids = BTreeSet::new();
    let mut original_labels = BTreeMap::new();
    for &row in &chosen {
        let old = values[row];
        let offset = rng.gen_range(1..num_classes);
        new_values[row] = (old + offset) % num_classes;
        corrupted_ids.insert(dataset.ids[row]);
        original_labels.insert(dataset.ids[row], old);
    }

    let corrupted = Dataset {
        inputs: dataset.inputs.clone(),
        input_dim: dataset.input_dim,
        targets: Targets::Labels {
            values: new_values,
            num_classes,
        },
        ids: dataset.ids.clone(),
    };
    Ok((
        corrupted,
        CorruptionRecord {
            corrupted_ids,
            original_labels,
            seed,
        },
    ))
}

/// Restore the original labels recorded by [`corrupt_labels`].
pub fn restore_labels(dataset: &Dataset, record: &CorruptionRecord) -> Result<Dataset> {
    let (mut values, num_classes) = match &dataset.targets {
        Targets::Labels { values, num_classes } => (values.clone(), *num_classes),
        Targets::Real { .. } => return Err(Error::UnsupportedTask),
    };
    for (&id, &label) in &record.original_labels {
        let row = dataset.position_of(id).ok_or(Error::UnknownId { id })?;
        values[row] = label;
    }
    Ok(Dataset {
        inputs: dataset.inputs.clone(),
        input_dim: dataset.input_dim,
        targets: Targets::Labels {
            values,
            num_classes,
        },
        ids: dataset.ids.clone(),
    })
}

/// Remove the rows with the given ids. Surviving rows keep their original ids
/// and relative order. Removing every row yields a structurally valid empty
/// dataset; downstream operations reject it.
pub fn remove_examples(dataset: &Dataset, ids: &[u64]) -> Result<Dataset> {
    let drop: BTreeSet<u64> = ids.iter().copied().collect();
    for &id in &drop {
        if dataset.position_of(id).is_none() {
            return Err(Error::UnknownId { id });
        }
    }
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&r| !drop.contains(&dataset.ids[r]))
        .collect();
    Ok(dataset.with_rows(&keep))
}

/// Keep a seeded uniform subsample of `round(fraction * N)` rows, preserving
/// relative order and ids.
pub fn seeded_subsample(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "subsample fraction {fraction} outside [0, 1]"
        )));
    }
    let n = dataset.len();
    let count = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let mut keep: Vec<usize> = rows.into_iter().take(count).collect();
    keep.sort_unstable();
    Ok(dataset.with_rows(&keep))
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; two independent uniforms per draw keeps this reproducible
    // without a distributions dependency.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Class-conditional Gaussians with well-separated means: each class mean sits
/// at distance 4 from the origin along a seeded random direction, with unit
/// isotropic within-class noise. Classes are assigned round-robin.
pub fn synth_classification(n: usize, p: usize, classes: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 || classes == 0 {
        return Err(Error::InvalidConfig(
            "synth_classification needs n, p, classes >= 1".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut dir: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for x in &mut dir {
            *x *= 4.0 / norm;
        }
        means.push(dir);
    }
    let mut inputs = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..p {
            inputs.push(means[c][j] + standard_normal(&mut rng));
        }
        labels.push(c);
    }
    Dataset::from_parts(
        inputs,
        p,
        Targets::Labels {
            values: labels,
            num_classes: classes,
        },
    )
}

/// Linear-plus-noise regression data: `y = w . x + 0.1 * noise` with seeded
/// Gaussian `w`, inputs, and noise.
pub fn synth_regression(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig(
            "synth_regression needs n, p >= 1".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = 1.0 / (p as f64).sqrt();
    let w: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng) * scale).collect();
    let mut inputs = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
        let y: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
            + 0.1 * standard_normal(&mut rng);
        inputs.extend_from_slice(&x);
        targets.push(y);
    }
    Dataset::from_parts(
        inputs,
        p,
        Targets::Real {
            values: targets,
            dim: 1,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp_csv(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "influence_core_test_{}_{}.csv",
            std::process::id(),
            content.len()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn schema_xy() -> CsvSchema {
        CsvSchema {
            feature_columns: vec!["x1".into(), "x2".into()],
            target_columns: vec!["y".into()],
            label_column: None,
        }
    }

    #[test]
    fn load_csv_reads_rows_in_order() {
        let path = write_temp_csv("x1,x2,y\n1.0,2.0,3.0\n4.0,5.0,6.0\n7.0,8.0,9.0\n");
        let ds = load_csv(&path, &schema_xy()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.input_dim(), 2);
        assert_eq!(ds.input(1), &[4.0, 5.0]);
        assert_eq!(ds.ids(), &[0, 1, 2]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_header_only_is_empty_data() {
        let path = write_temp_csv("x1,x2,y\n");
        let err = load_csv(&path, &schema_xy()).unwrap_err();
        assert!(matches!(err, Error::EmptyData));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_reports_nan_cell_location() {
        let path = write_temp_csv("x1,x2,y\n1.0,NaN,3.0\n");
        let err = load_csv(&path, &schema_xy()).unwrap_err();
        match err {
            Error::NonFinite { row, column } => {
                assert_eq!(row, 1);
                assert_eq!(column, "x2");
            }
            other => panic!("unexpected error {other:?}"),
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_reports_parse_failure_location() {
        let path = write_temp_csv("x1,x2,y\n1.0,2.0,3.0\n1.0,abc,3.0\n");
        let err = load_csv(&path, &schema_xy()).unwrap_err();
        match err {
            Error::CsvIngestion { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x2");
            }
            other => panic!("unexpected error {other:?}"),
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn normalize_two_point_column() {
        let ds = Dataset::from_parts(
            vec![1.0, 3.0],
            1,
            Targets::Real {
                values: vec![0.0, 0.0],
                dim: 1,
            },
        )
        .unwrap();
        let (norm, params) = normalize(&ds).unwrap();
        assert!((norm.input(0)[0] + 1.0).abs() < 1e-12);
        assert!((norm.input(1)[0] - 1.0).abs() < 1e-12);
        assert!((params.feature_mean[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_column_maps_to_zero() {
        let ds = Dataset::from_parts(
            vec![5.0, 5.0, 5.0],
            1,
            Targets::Labels {
                values: vec![0, 1, 0],
                num_classes: 2,
            },
        )
        .unwrap();
        let (norm, _) = normalize(&ds).unwrap();
        for r in 0..3 {
            assert_eq!(norm.input(r)[0], 0.0);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let ds = synth_regression(40, 3, 9).unwrap();
        let (once, _) = normalize(&ds).unwrap();
        let (twice, _) = normalize(&once).unwrap();
        for (a, b) in once.inputs.iter().zip(&twice.inputs) {
            assert!((a - b).abs() < 1e-10);
        }
        if let (Targets::Real { values: a, .. }, Targets::Real { values: b, .. }) =
            (&once.targets, &twice.targets)
        {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalize_rejects_single_row() {
        let ds = synth_regression(1, 3, 9).unwrap();
        assert!(matches!(
            normalize(&ds),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn corrupt_zero_fraction_is_identity() {
        let ds = synth_classification(50, 4, 3, 7).unwrap();
        let (corrupted, record) = corrupt_labels(&ds, 0.0, 1).unwrap();
        assert_eq!(corrupted, ds);
        assert!(record.corrupted_ids.is_empty());
    }

    #[test]
    fn corrupt_count_and_changed_labels() {
        let ds = synth_classification(100, 4, 3, 7).unwrap();
        let (corrupted, record) = corrupt_labels(&ds, 0.1, 42).unwrap();
        assert_eq!(record.corrupted_ids.len(), 10);
        for (&id, &old) in &record.original_labels {
            let row = corrupted.position_of(id).unwrap();
            assert_ne!(corrupted.label(row).unwrap(), old);
        }
    }

    #[test]
    fn corrupt_is_deterministic_and_restorable() {
        let ds = synth_classification(60, 3, 4, 11).unwrap();
        let (a, ra) = corrupt_labels(&ds, 0.25, 5).unwrap();
        let (b, rb) = corrupt_labels(&ds, 0.25, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let restored = restore_labels(&a, &ra).unwrap();
        assert_eq!(restored, ds);
    }

    #[test]
    fn corrupt_rejects_regression() {
        let ds = synth_regression(10, 2, 3).unwrap();
        assert!(matches!(
            corrupt_labels(&ds, 0.1, 0),
            Err(Error::UnsupportedTask)
        ));
    }

    #[test]
    fn remove_keeps_ids_and_order() {
        let ds = synth_classification(5, 2, 2, 1).unwrap();
        let removed = remove_examples(&ds, &[3]).unwrap();
        assert_eq!(removed.ids(), &[0, 1, 2, 4]);
        assert_eq!(removed.input(3), ds.input(4));
    }

    #[test]
    fn remove_nothing_is_identity_and_remove_all_is_empty() {
        let ds = synth_classification(4, 2, 2, 1).unwrap();
        assert_eq!(remove_examples(&ds, &[]).unwrap(), ds);
        let empty = remove_examples(&ds, &[0, 1, 2, 3]).unwrap();
        assert_eq!(empty.len(), 0);
    }

    #[test]
    fn remove_unknown_id_errors() {
        let ds = synth_classification(4, 2, 2, 1).unwrap();
        assert!(matches!(
            remove_examples(&ds, &[99]),
            Err(Error::UnknownId { id: 99 })
        ));
    }

    #[test]
    fn synth_is_seed_deterministic() {
        assert_eq!(
            synth_classification(30, 5, 3, 17).unwrap(),
            synth_classification(30, 5, 3, 17).unwrap()
        );
        assert_eq!(
            synth_regression(30, 5, 17).unwrap(),
            synth_regression(30, 5, 17).unwrap()
        );
        assert_ne!(
            synth_regression(30, 5, 17).unwrap(),
            synth_regression(30, 5, 18).unwrap()
        );
    }

    #[test]
    fn synth_single_row_is_valid() {
        let ds = synth_classification(1, 3, 2, 0).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn subsample_is_deterministic_and_ordered() {
        let ds = synth_classification(40, 2, 2, 3).unwrap();
        let a = seeded_subsample(&ds, 0.5, 9).unwrap();
        let b = seeded_subsample(&ds, 0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        let mut sorted = a.ids().to_vec();
        sorted.sort_unstable();
        assert_eq!(a.ids(), sorted.as_slice());
    }
}
