//! Greedy forward feature selection.

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::modelkit::{oracle_infer, train, BayesModel, DistKind, TrainOptions};

/// Keeps only the listed feature indices, in the given order.
pub fn project(samples: &[FeatureVector], indices: &[usize]) -> Vec<FeatureVector> {
    samples
        .iter()
        .map(|s| FeatureVector {
            label: s.label,
            values: indices.iter().map(|&i| s.values[i]).collect(),
        })
        .collect()
}

/// Fraction of samples whose exact float-domain posterior argmax matches the
/// label.
pub fn oracle_accuracy(model: &BayesModel, samples: &[FeatureVector]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("no samples to score".into()));
    }
    let mut hits = 0usize;
    for s in samples {
        let obs = model.addresses(&s.values)?;
        if oracle_infer(model, &obs)?.argmax == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Adds, one at a time, the feature that most raises training-set oracle
/// accuracy of a naive model with `bins` bins per feature. Ties go to the
/// lowest index.
pub fn select_features(
    samples: &[FeatureVector],
    classes: usize,
    budget: usize,
    kind: DistKind,
    bins: usize,
) -> Result<Vec<usize>> {
    let available = samples.first().map_or(0, |s| s.values.len());
    if budget > available {
        return Err(Error::Training(format!(
            "cannot select {budget} of {available} features"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(budget);
    while chosen.len() < budget {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..available).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(cand);
            let subset = project(samples, &trial);
            let model = train(
                &subset,
                classes,
                &TrainOptions::naive(kind, vec![bins; trial.len()]),
            )?;
            let acc = oracle_accuracy(&model, &subset)?;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((cand, acc));
            }
        }
        chosen.push(best.expect("candidates remain while under budget").0);
    }
    Ok(chosen)
}
