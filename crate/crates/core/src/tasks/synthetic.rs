//! Seeded synthetic stand-ins for the sleep and gesture datasets.

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Content, Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Markov chain over stages with log-normal emissions.
    SleepLike,
    /// i.i.d. class-conditional Gaussian features.
    GestureLike,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::SleepLike => "sleep_like",
            TaskKind::GestureLike => "gesture_like",
        }
    }

    /// Whether inference feeds the previous decision back (Bayesian filter).
    pub fn is_sequential(self) -> bool {
        self == TaskKind::SleepLike
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sleep_like" | "sleep" => Ok(TaskKind::SleepLike),
            "gesture_like" | "gesture" => Ok(TaskKind::GestureLike),
            _ => Err(Error::Config(format!("unknown task kind `{s}`"))),
        }
    }
}

pub const DEFAULT_SELF_TRANSITION: f64 = 0.95;

/// Generator description. Emission parameters are `[class][feature]`; for
/// `sleep_like` they are the mean and standard deviation of the feature's
/// natural logarithm.
///
/// `train_size`/`test_size` count sequence steps for `sleep_like` and
/// samples per class for `gesture_like`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub kind: TaskKind,
    pub classes: usize,
    pub features: usize,
    pub bins: usize,
    pub location: Vec<Vec<f64>>,
    pub scale: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_transition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl SyntheticTaskSpec {
    /// Four stages, three log-normal features (delta power, alpha power,
    /// EMG power), eight bins per feature.
    pub fn sleep_like() -> Self {
        SyntheticTaskSpec {
            kind: TaskKind::SleepLike,
            classes: 4,
            features: 3,
            bins: 8,
            location: vec![
                vec![0.0, 1.6, 1.6],
                vec![0.4, 0.4, -0.6],
                vec![1.0, 0.9, 0.4],
                vec![2.0, 0.0, 0.0],
            ],
            scale: vec![vec![0.6; 3]; 4],
            self_transition: Some(DEFAULT_SELF_TRANSITION),
            transition: None,
            train_size: 2000,
            test_size: 3000,
            seed: 1,
        }
    }

    /// Four gestures, six Gaussian features, 64 bins per feature.
    pub fn gesture_like() -> Self {
        SyntheticTaskSpec {
            kind: TaskKind::GestureLike,
            classes: 4,
            features: 6,
            bins: 64,
            location: vec![
                vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![2.5, 0.0, 1.25, 0.0, 0.0, 1.25],
                vec![0.0, 2.5, 0.0, 1.25, 1.25, 0.0],
                vec![2.5, 2.5, 1.25, 1.25, -1.25, -1.25],
            ],
            scale: vec![vec![1.0; 6]; 4],
            self_transition: None,
            transition: None,
            train_size: 100,
            test_size: 50,
            seed: 1,
        }
    }

    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::SleepLike => Self::sleep_like(),
            TaskKind::GestureLike => Self::gesture_like(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SyntheticTaskSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes == 0 || self.features == 0 || self.bins == 0 {
            return bad("classes, features and bins must be at least 1".into());
        }
        if self.train_size == 0 || self.test_size == 0 {
            return bad("train_size and test_size must be at least 1".into());
        }
        for (name, table) in [("location", &self.location), ("scale", &self.scale)] {
            if table.len() != self.classes || table.iter().any(|row| row.len() != self.features) {
                return bad(format!(
                    "{name} must be {} rows of {} values",
                    self.classes, self.features
                ));
            }
        }
        if self.location.iter().flatten().any(|x| !x.is_finite()) {
            return bad("emission locations must be finite".into());
        }
        if self
            .scale
            .iter()
            .flatten()
            .any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return bad("emission scales must be positive".into());
        }
        match self.kind {
            TaskKind::GestureLike => {
                if self.self_transition.is_some() || self.transition.is_some() {
                    return bad("gesture_like tasks take no transition parameters".into());
                }
            }
            TaskKind::SleepLike => {
                if self.self_transition.is_some() && self.transition.is_some() {
                    return bad("give either self_transition or transition, not both".into());
                }
                if let Some(s) = self.self_transition {
                    if !(0.0..=1.0).contains(&s) {
                        return bad(format!("self_transition {s} outside [0, 1]"));
                    }
                    if self.classes == 1 && s != 1.0 {
                        return bad("a single-class chain needs self_transition = 1".into());
                    }
                }
                if let Some(t) = &self.transition {
                    if t.len() != self.classes || t.iter().any(|row| row.len() != self.classes) {
                        return bad(format!("transition must be {0}x{0}", self.classes));
                    }
                    for (i, row) in t.iter().enumerate() {
                        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                            return bad(format!("transition row {i} has a negative entry"));
                        }
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > 1e-9 {
                            return bad(format!("transition row {i} sums to {sum}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Full transition matrix of a `sleep_like` spec.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        if let Some(t) = &self.transition {
            return t.clone();
        }
        let r = self.classes;
        let s = self.self_transition.unwrap_or(DEFAULT_SELF_TRANSITION);
        if r == 1 {
            return vec![vec![1.0]];
        }
        let off = (1.0 - s) / (r - 1) as f64;
        (0..r)
            .map(|i| (0..r).map(|j| if i == j { s } else { off }).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTask {
    pub train: Dataset,
    pub test: Dataset,
}

/// Draws train and test sets. Identical specs give identical datasets.
pub fn generate(spec: &SyntheticTaskSpec) -> Result<GeneratedTask> {
    spec.validate()?;
    let noise = |loc: f64, scale: f64| Normal::new(loc, scale).expect("validated scale");
    let emit = |rng: &mut ChaCha8Rng, r: usize| -> Vec<f64> {
        (0..spec.features)
            .map(|f| {
                let z = noise(spec.location[r][f], spec.scale[r][f]).sample(rng);
                match spec.kind {
                    TaskKind::SleepLike => z.exp(),
                    TaskKind::GestureLike => z,
                }
            })
            .collect()
    };
    let dataset = |samples| Dataset {
        task: spec.kind,
        classes: spec.classes,
        content: Content::Features,
        fs: None,
        dt: None,
        samples,
    };
    match spec.kind {
        TaskKind::SleepLike => {
            let t = spec.transition_matrix();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0]));
            let total = spec.train_size + spec.test_size;
            let mut state = rng.random_range(0..spec.classes);
            let mut samples = Vec::with_capacity(total);
            for step in 0..total {
                if step > 0 {
                    state = next_state(&t[state], rng.random::<f64>());
                }
                samples.push(FeatureVector {
                    label: state,
                    values: emit(&mut rng, state),
                });
            }
            let test = samples.split_off(spec.train_size);
            Ok(GeneratedTask {
                train: dataset(samples),
                test: dataset(test),
            })
        }
        TaskKind::GestureLike => {
            let draw = |split: u64, per_class: usize| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[split]));
                let mut samples = Vec::with_capacity(per_class * spec.classes);
                for r in 0..spec.classes {
                    for _ in 0..per_class {
                        samples.push(FeatureVector {
                            label: r,
                            values: emit(&mut rng, r),
                        });
                    }
                }
                samples.shuffle(&mut rng);
                samples
            };
            Ok(GeneratedTask {
                train: dataset(draw(1, spec.train_size)),
                test: dataset(draw(2, spec.test_size)),
            })
        }
    }
}

/// Inverse-CDF step of a categorical row; `u` in `[0, 1)`.
fn next_state(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // rounding left a sliver above the last cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}
