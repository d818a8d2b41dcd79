//! Feature extraction, synthetic task generators and dataset files.

mod dataset;
mod features;
mod select;
mod synthetic;

pub use dataset::{extract_features, DATASET_MAGIC, DATASET_VERSION};
pub use features::{
    gesture_features, nearest_bin, psd_at, signal_power, sleep_features, GESTURE_FEATURE_NAMES,
    SLEEP_ALPHA_HZ, SLEEP_DELTA_HZ,
};
pub use select::{oracle_accuracy, project, select_features};
pub use synthetic::{
    generate, GeneratedTask, SyntheticTaskSpec, TaskKind, DEFAULT_SELF_TRANSITION,
};

/// One labeled observation: real features, or raw samples for
/// [`Content::Signals`] datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub label: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Content {
    Features,
    /// Each row concatenates `channels` equal-length sample blocks.
    Signals {
        channels: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: TaskKind,
    pub classes: usize,
    pub content: Content,
    /// Sample rate in Hz, required for sleep signals.
    pub fs: Option<f64>,
    /// Sample period in seconds, required for gesture signals.
    pub dt: Option<f64>,
    pub samples: Vec<FeatureVector>,
}

impl Dataset {
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn feature_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.values.len())
    }
}
