use crate::error::{Error, Result};
use crate::logprob::min_probability;
use crate::tasks::FeatureVector;

use super::fit::DEFAULT_SCALE_FLOOR;
use super::fit::{
    discretize, fit_with_floor, DistKind, RangePolicy, SCALE_FLOOR_FRACTION, SPREAD_SIGMAS,
};
use super::{BayesModel, MODEL_SCHEMA, MODEL_VERSION};

/// `transition[i][j] = (count(i→j) + α) / (count(i→·) + α·R)`.
///
/// A row with no outgoing transitions and `α = 0` falls back to uniform.
pub fn estimate_transitions(labels: &[usize], classes: usize, alpha: f64) -> Result<Vec<Vec<f64>>> {
    if labels.is_empty() {
        return Err(Error::Training("empty label sequence".into()));
    }
    if classes == 0 {
        return Err(Error::Training("need at least one class".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Training(format!("smoothing {alpha} must be >= 0")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Training(format!("label {bad} outside 0..{classes}")));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for w in labels.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    Ok(counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + alpha * classes as f64;
            if denom == 0.0 {
                vec![1.0 / classes as f64; classes]
            } else {
                row.iter().map(|&n| (n as f64 + alpha) / denom).collect()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub kind: DistKind,
    /// Bins per feature.
    pub bins: Vec<usize>,
    /// Estimate a transition matrix from the sample order (filter models).
    pub transitions: bool,
    pub smoothing: f64,
}

impl TrainOptions {
    pub fn naive(kind: DistKind, bins: Vec<usize>) -> Self {
        TrainOptions {
            kind,
            bins,
            transitions: false,
            smoothing: 1.0,
        }
    }

    pub fn filter(kind: DistKind, bins: Vec<usize>) -> Self {
        TrainOptions {
            transitions: true,
            ..Self::naive(kind, bins)
        }
    }
}

/// Fits one distribution per (feature, class), discretizes every class of a
/// feature on a shared grid spanning all classes' `±4·scale` ranges, and
/// rescales each feature's tables so their largest entry is 1. A per-feature
/// constant does not change any argmax but uses the full code range.
///
/// The prior is uniform; filter models carry the transition matrix instead.
pub fn train(samples: &[FeatureVector], classes: usize, opts: &TrainOptions) -> Result<BayesModel> {
    if samples.is_empty() {
        return Err(Error::Training("no training samples".into()));
    }
    if classes == 0 {
        return Err(Error::Training("need at least one class".into()));
    }
    let features = samples[0].values.len();
    if features == 0 || samples.iter().any(|s| s.values.len() != features) {
        return Err(Error::Training(
            "samples must share a nonzero feature count".into(),
        ));
    }
    if opts.bins.len() != features {
        return Err(Error::Training(format!(
            "{} bin counts for {features} features",
            opts.bins.len()
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(Error::Training(format!(
            "label {} outside 0..{classes}",
            s.label
        )));
    }

    let mut bin_edges = Vec::with_capacity(features);
    let mut likelihood = Vec::with_capacity(features);
    for f in 0..features {
        let per_class: Vec<Vec<f64>> = (0..classes)
            .map(|r| {
                samples
                    .iter()
                    .filter(|s| s.label == r)
                    .map(|s| s.values[f])
                    .collect()
            })
            .collect();
        let transformed = samples
            .iter()
            .map(|s| super::FittedDistribution::transform(opts.kind, s.values[f]))
            .collect::<Result<Vec<_>>>()?;
        let (zmin, zmax) = transformed
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| {
                (a.min(z), b.max(z))
            });
        let range = zmax - zmin;
        let scale_floor = if range > 0.0 {
            SCALE_FLOOR_FRACTION * range
        } else {
            DEFAULT_SCALE_FLOOR
        };
        let dists = per_class
            .iter()
            .enumerate()
            .map(|(r, xs)| {
                fit_with_floor(opts.kind, xs, scale_floor)
                    .map_err(|e| Error::Training(format!("feature {f}, class {r}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let lo = dists
            .iter()
            .map(|d| d.location - SPREAD_SIGMAS * d.scale)
            .fold(f64::INFINITY, f64::min);
        let hi = dists
            .iter()
            .map(|d| d.location + SPREAD_SIGMAS * d.scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut tables = Vec::with_capacity(classes);
        let mut edges = Vec::new();
        for d in &dists {
            let disc = discretize(d, opts.bins[f], RangePolicy::Fixed { lo, hi })?;
            edges = disc.edges;
            tables.push(disc.likelihood);
        }
        let peak = tables.iter().flatten().copied().fold(0.0f64, f64::max);
        let floor = min_probability();
        for table in &mut tables {
            for p in table.iter_mut() {
                *p = (*p / peak).clamp(floor, 1.0);
            }
        }
        bin_edges.push(edges);
        likelihood.push(tables);
    }

    let transition = if opts.transitions {
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        Some(estimate_transitions(&labels, classes, opts.smoothing)?)
    } else {
        None
    };

    let model = BayesModel {
        schema: MODEL_SCHEMA.into(),
        version: MODEL_VERSION,
        classes,
        features,
        bins: opts.bins.clone(),
        kinds: vec![opts.kind; features],
        bin_edges,
        likelihood,
        prior: vec![1.0 / classes as f64; classes],
        transition,
        inputs: None,
    };
    model.validate()?;
    Ok(model)
}
