//! Model toolchain: train float-domain Bayesian models from labeled
//! features, compile them into memory images, and compute the exact
//! float-domain reference inference.

mod compile;
mod fit;
mod oracle;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use compile::compile;
pub use fit::{
    bin_of, discretize, fit, fit_with_floor, grid, Discretized, DistKind, FittedDistribution,
    RangePolicy, DEFAULT_SCALE_FLOOR, SCALE_FLOOR_FRACTION, SPREAD_SIGMAS,
};
pub use oracle::{oracle_filter, oracle_infer, oracle_infer_with_prior, OraclePosterior};
pub use train::{estimate_transitions, train, TrainOptions};

use crate::error::{Error, Result};

pub const MODEL_SCHEMA: &str = "bayesim-model";
pub const MODEL_VERSION: u32 = 1;

/// Float-domain model before quantization.
///
/// `likelihood[c][r][v]` is the value stored for class `r` when feature `c`
/// falls in bin `v`. Tables are discretized densities: they need not sum to
/// one over bins. `transition[prev][next]` is present for filter models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub schema: String,
    pub version: u32,
    pub classes: usize,
    pub features: usize,
    pub bins: Vec<usize>,
    pub kinds: Vec<DistKind>,
    pub bin_edges: Vec<Vec<f64>>,
    pub likelihood: Vec<Vec<Vec<f64>>>,
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    /// Positions of the model's features within the raw feature vector,
    /// when the model was trained on a selected subset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<usize>>,
}

impl BayesModel {
    pub fn is_filter(&self) -> bool {
        self.transition.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(format!("model: {m}")));
        if self.schema != MODEL_SCHEMA || self.version != MODEL_VERSION {
            return bad(format!(
                "unsupported schema {} v{}",
                self.schema, self.version
            ));
        }
        if self.classes == 0 || self.features == 0 {
            return bad("needs at least one class and one feature".into());
        }
        let c = self.features;
        if self.bins.len() != c
            || self.kinds.len() != c
            || self.bin_edges.len() != c
            || self.likelihood.len() != c
        {
            return bad("per-feature arrays disagree with `features`".into());
        }
        for f in 0..c {
            if self.bin_edges[f].len() != self.bins[f] + 1 {
                return bad(format!("feature {f}: expected {} edges", self.bins[f] + 1));
            }
            if self.bin_edges[f].windows(2).any(|w| !(w[1] > w[0])) {
                return bad(format!("feature {f}: edges not ascending"));
            }
            if self.likelihood[f].len() != self.classes {
                return bad(format!(
                    "feature {f}: expected {} class tables",
                    self.classes
                ));
            }
            for (r, table) in self.likelihood[f].iter().enumerate() {
                if table.len() != self.bins[f] {
                    return bad(format!(
                        "feature {f} class {r}: expected {} bins",
                        self.bins[f]
                    ));
                }
                if table.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                    return bad(format!("feature {f} class {r}: likelihood outside (0, 1]"));
                }
            }
        }
        if self.prior.len() != self.classes || self.prior.iter().any(|&p| !(0.0..=1.0).contains(&p))
        {
            return bad("prior must hold one probability per class".into());
        }
        if let Some(idx) = &self.inputs {
            if idx.len() != c {
                return bad(format!("{} input positions for {c} features", idx.len()));
            }
        }
        if let Some(t) = &self.transition {
            if t.len() != self.classes || t.iter().any(|row| row.len() != self.classes) {
                return bad("transition matrix must be classes × classes".into());
            }
            for (i, row) in t.iter().enumerate() {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return bad(format!("transition row {i} is not a distribution"));
                }
            }
        }
        Ok(())
    }

    /// Bin address of raw feature value `x` for feature `f`.
    pub fn address_of(&self, f: usize, x: f64) -> usize {
        let z = match self.kinds[f] {
            DistKind::Gaussian => x,
            DistKind::Lognormal if x > 0.0 => x.ln(),
            DistKind::Lognormal => f64::NEG_INFINITY,
        };
        bin_of(&self.bin_edges[f], z)
    }

    /// Number of raw feature values [`BayesModel::addresses`] expects.
    pub fn raw_features(&self) -> usize {
        match &self.inputs {
            Some(idx) => idx.iter().max().map_or(0, |m| m + 1),
            None => self.features,
        }
    }

    /// Addresses for one raw feature vector. A model trained on a subset
    /// reads only its selected positions.
    pub fn addresses(&self, features: &[f64]) -> Result<Vec<usize>> {
        if let Some(idx) = &self.inputs {
            if features.len() < self.raw_features() {
                return Err(Error::Input(format!(
                    "{} feature values, model reads position {}",
                    features.len(),
                    self.raw_features() - 1
                )));
            }
            return Ok(idx
                .iter()
                .enumerate()
                .map(|(f, &i)| self.address_of(f, features[i]))
                .collect());
        }
        if features.len() != self.features {
            return Err(Error::Input(format!(
                "{} feature values for a {}-feature model",
                features.len(),
                self.features
            )));
        }
        Ok(features
            .iter()
            .enumerate()
            .map(|(f, &x)| self.address_of(f, x))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BayesModel =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
pub(crate) mod test_models {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random naive model with log-uniform likelihoods.
    pub fn random_model(classes: usize, bins: &[usize], seed: u64) -> BayesModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = bins.len();
        BayesModel {
            schema: MODEL_SCHEMA.into(),
            version: MODEL_VERSION,
            classes,
            features,
            bins: bins.to_vec(),
            kinds: vec![DistKind::Gaussian; features],
            bin_edges: bins.iter().map(|&b| grid(0.0, b as f64, b)).collect(),
            likelihood: bins
                .iter()
                .map(|&b| {
                    (0..classes)
                        .map(|_| {
                            (0..b)
                                .map(|_| (-rng.random_range(0.0..10.0f64)).exp2())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            prior: vec![1.0 / classes as f64; classes],
            transition: None,
            inputs: None,
        }
    }
}
