//! Mislabel detection by self-influence (or PBRF) score ranking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::data::{CorruptionRecord, Dataset};
use crate::error::{Error, Result};
use crate::influence::{self, InfluenceConfig};
use crate::nn::{self, NetworkSpec};
use crate::train::{self, BaseRun, ObjectiveKind, SixWayOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MislabelScorer {
    /// Influence of each example on its own loss.
    InfluenceSelf,
    /// Loss delta on the example after a PBRF retraining without it.
    PbrfSelf,
}

/// Recall of `flagged` ids among the top-ranked examples at each inspected
/// fraction. `scored` pairs ids with scores (higher = inspect first); ties
/// break on ascending id so the curve is deterministic.
pub fn ranking_recall_curve(
    scored: &[(u64, f64)],
    flagged: &BTreeSet<u64>,
    fractions: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if scored.is_empty() {
        return Err(Error::EmptyData);
    }
    if flagged.is_empty() {
        return Err(Error::InvalidConfig(
            "no flagged examples to recover".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .1
            .partial_cmp(&scored[a].1)
            .expect("finite scores")
            .then(scored[a].0.cmp(&scored[b].0))
    });
    let n = scored.len();
    let total = flagged.len() as f64;
    let mut curve = Vec::with_capacity(fractions.len());
    for &q in fractions {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!(
                "inspected fraction {q} outside [0, 1]"
            )));
        }
        let count = ((q * n as f64).round() as usize).min(n);
        let recovered = order[..count]
            .iter()
            .filter(|&&i| flagged.contains(&scored[i].0))
            .count() as f64;
        curve.push((q, recovered / total));
    }
    Ok(curve)
}

fn default_fractions() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

/// Score every training example of a corrupted dataset and report the
/// fraction of corrupted labels recovered as a function of the fraction of
/// data inspected (highest scores first). The curve is nondecreasing and ends
/// at 1.
pub fn mislabel_detection_curve(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    record: &CorruptionRecord,
    influence_cfg: &InfluenceConfig,
    six_opts: &SixWayOptions,
    scorer: MislabelScorer,
    fractions: Option<&[f64]>,
) -> Result<Vec<(f64, f64)>> {
    for &id in &record.corrupted_ids {
        if dataset.position_of(id).is_none() {
            return Err(Error::UnknownId { id });
        }
    }
    let scores: Vec<f64> = match scorer {
        MislabelScorer::InfluenceSelf => {
            influence::self_influence_all(&base.params, spec, dataset, influence_cfg)?
        }
        MislabelScorer::PbrfSelf => pbrf_self_scores(base, spec, dataset, six_opts)?,
    };
    let scored: Vec<(u64, f64)> = dataset
        .ids()
        .iter()
        .copied()
        .zip(scores)
        .collect();
    let fractions = fractions.map(<[f64]>::to_vec).unwrap_or_else(default_fractions);
    ranking_recall_curve(&scored, &record.corrupted_ids, &fractions)
}

/// PBRF self scores: retrain under the proximal Bregman objective with each
/// example removed and measure the loss change on that example.
fn pbrf_self_scores(
    base: &BaseRun,
    spec: &NetworkSpec,
    dataset: &Dataset,
    opts: &SixWayOptions,
) -> Result<Vec<f64>> {
    let epsilon = opts.epsilon(dataset.len());
    let retrain_epochs = opts
        .retrain_epochs
        .unwrap_or(base.config.epochs.div_ceil(2))
        .max(1);
    let mut config = base.config.clone();
    config.epochs = retrain_epochs;
    config.seed = opts.retrain_seed;
    config.learning_rate *= opts.pbrf_lr_factor;

    (0..dataset.len())
        .into_par_iter()
        .map(|row| {
            let id = dataset.id(row);
            let objective = ObjectiveKind::proximal_bregman(
                vec![id],
                epsilon,
                opts.damping,
                base.params.clone(),
                spec,
                dataset,
            )?;
            let run = train::train(&objective, &base.params, &config, spec, dataset)
                .map_err(|e| Error::tagged("pbrf self score", format!("id {id}"), e))?;
            let before = nn::example_loss(&base.params, spec, dataset.input(row), dataset.target(row))?;
            let after = nn::example_loss(&run.params, spec, dataset.input(row), dataset.target(row))?;
            Ok(after - before)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn full_inspection_recovers_everything() {
        let scored: Vec<(u64, f64)> = (0..10).map(|i| (i, i as f64)).collect();
        let flagged: BTreeSet<u64> = [1, 5, 9].into_iter().collect();
        let curve = ranking_recall_curve(&scored, &flagged, &[0.5, 1.0]).unwrap();
        assert_eq!(curve.last().unwrap().1, 1.0);
    }

    #[test]
    fn curve_is_monotone_nondecreasing() {
        let scored: Vec<(u64, f64)> = (0..40).map(|i| (i, ((i * 7) % 13) as f64)).collect();
        let flagged: BTreeSet<u64> = [2, 3, 11, 19, 37].into_iter().collect();
        let fractions: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let curve = ranking_recall_curve(&scored, &flagged, &fractions).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].1 >= pair[0].1);
        }
    }

    #[test]
    fn perfect_scorer_recovers_flagged_first() {
        let flagged: BTreeSet<u64> = [0, 1, 2].into_iter().collect();
        let scored: Vec<(u64, f64)> = (0..30)
            .map(|i| (i, if flagged.contains(&i) { 1.0 } else { 0.0 }))
            .collect();
        let curve = ranking_recall_curve(&scored, &flagged, &[0.1]).unwrap();
        assert_eq!(curve[0].1, 1.0);
    }

    #[test]
    fn random_scorer_tracks_the_diagonal() {
        // Expectation of recall under a uniform ranking is the inspected
        // fraction; average over seeds to dodge sampling noise.
        let n = 200u64;
        let flagged: BTreeSet<u64> = (0..n).step_by(10).collect();
        let fractions = [0.2, 0.5, 0.8];
        let mut mean_gap = [0.0f64; 3];
        let seeds = 40;
        for seed in 0..seeds {
            let mut ids: Vec<u64> = (0..n).collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            ids.shuffle(&mut rng);
            let scored: Vec<(u64, f64)> = ids
                .iter()
                .enumerate()
                .map(|(rank, &id)| (id, rank as f64))
                .collect();
            let curve = ranking_recall_curve(&scored, &flagged, &fractions).unwrap();
            for (k, (q, r)) in curve.iter().enumerate() {
                mean_gap[k] += (r - q) / seeds as f64;
            }
        }
        for gap in mean_gap {
            assert!(gap.abs() <= 0.1, "mean deviation from diagonal {gap}");
        }
    }
}
