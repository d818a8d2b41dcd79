//! The Bayesian machine: a grid of likelihood blocks, one per
//! (observation column, class row). Each observation addresses one entry of
//! every block in its column; each row combines its column entries either
//! with saturating log-domain adders (one cycle) or with the stochastic
//! AND-gate datapath.

mod image;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use image::{MemoryImage, IMAGE_MAGIC, IMAGE_VERSION};

use crate::energy::{count_events, EventContext, EventCounts};
use crate::error::{Error, Result};
use crate::logprob::{LogCode, Rounding};
use crate::seed::derive_seed;
use crate::stochastic::{run_stochastic, RngMode, StochasticParams, Strategy, TieBreak};
use crate::width::BitWidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Logarithmic,
    Stochastic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Logarithmic => "logarithmic",
            Mode::Stochastic => "stochastic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logarithmic" | "log" => Ok(Mode::Logarithmic),
            "stochastic" | "linear" => Ok(Mode::Stochastic),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub rows: usize,
    pub columns: usize,
    pub values_per_column: Vec<usize>,
    pub mode: Mode,
    pub likelihood_width: BitWidth,
    #[serde(default = "default_budget")]
    pub cycle_budget: u32,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub rng_mode: RngMode,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default)]
    pub seed: u64,
}

fn default_budget() -> u32 {
    255
}

impl MachineConfig {
    pub fn new(rows: usize, values_per_column: Vec<usize>, mode: Mode) -> Self {
        MachineConfig {
            rows,
            columns: values_per_column.len(),
            values_per_column,
            mode,
            likelihood_width: BitWidth::W8,
            cycle_budget: default_budget(),
            strategy: Strategy::default(),
            rng_mode: RngMode::default(),
            tie_break: TieBreak::default(),
            rounding: Rounding::default(),
            seed: 0,
        }
    }

    /// The fabricated die: 16 blocks as 4 rows × 4 columns, 8 values each.
    pub fn fabricated(mode: Mode) -> Self {
        Self::new(4, vec![8; 4], mode)
    }

    /// The scaled machine: six columns and four rows of 64-value blocks.
    pub fn scaled(mode: Mode) -> Self {
        Self::new(4, vec![64; 6], mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.columns == 0 {
            return Err(Error::Config("machine needs R >= 1 and C >= 1".into()));
        }
        if self.values_per_column.len() != self.columns {
            return Err(Error::Config(format!(
                "{} columns but {} value counts",
                self.columns,
                self.values_per_column.len()
            )));
        }
        if self.values_per_column.contains(&0) {
            return Err(Error::Config("every column needs V >= 1".into()));
        }
        if self.mode == Mode::Logarithmic && self.likelihood_width != BitWidth::W8 {
            return Err(Error::Config(
                "the logarithmic datapath uses 8-bit codes".into(),
            ));
        }
        if self.mode == Mode::Stochastic && self.cycle_budget == 0 {
            return Err(Error::Config("cycle budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn stochastic_params(&self) -> StochasticParams {
        StochasticParams {
            budget: self.cycle_budget,
            strategy: self.strategy,
            rng_mode: self.rng_mode,
            tie_break: self.tie_break,
        }
    }

    /// Checks that `image` has exactly this geometry and mode.
    pub fn check_image(&self, image: &MemoryImage) -> Result<()> {
        if image.rows() != self.rows
            || image.values_per_column() != self.values_per_column.as_slice()
            || image.mode() != self.mode
            || image.width() != self.likelihood_width
        {
            return Err(Error::Config(
                "memory image does not match machine configuration".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceResult {
    /// Log-code sums (logarithmic) or hit counters (stochastic).
    pub scores: Vec<u32>,
    pub winner: usize,
    pub cycles_used: u32,
    pub stopped_early: bool,
    pub event_counts: EventCounts,
}

fn check_obs(image: &MemoryImage, obs: &[usize]) -> Result<()> {
    if obs.len() != image.columns() {
        return Err(Error::Input(format!(
            "{} observations for {} columns",
            obs.len(),
            image.columns()
        )));
    }
    for (c, (&o, &v)) in obs.iter().zip(image.values_per_column()).enumerate() {
        if o >= v {
            return Err(Error::Input(format!(
                "column {c}: address {o} out of range 0..{v}"
            )));
        }
    }
    Ok(())
}

/// One-cycle logarithmic inference: each row's score is the saturating sum
/// of its addressed codes; the smallest score wins, lowest row on ties.
pub fn infer_logarithmic(image: &MemoryImage, obs: &[usize]) -> Result<InferenceResult> {
    if image.mode() != Mode::Logarithmic {
        return Err(Error::Config("image is not a logarithmic image".into()));
    }
    check_obs(image, obs)?;
    let rows = image.rows();
    let width = image.width();
    let scores: Vec<u32> = (0..rows)
        .map(|r| {
            obs.iter()
                .enumerate()
                .fold(LogCode::one(width), |acc, (c, &o)| {
                    acc.sat_add(image.log_code(c, r, o))
                })
                .n() as u32
        })
        .collect();
    let winner = (0..rows)
        .min_by_key(|&r| scores[r])
        .expect("at least one row");
    let event_counts = count_events(&EventContext {
        mode: Mode::Logarithmic,
        rows,
        columns: image.columns(),
        width,
        rng_mode: RngMode::ColumnShared,
        cycles_used: 1,
    });
    Ok(InferenceResult {
        scores,
        winner,
        cycles_used: 1,
        stopped_early: false,
        event_counts,
    })
}

/// Stochastic inference: latch the addressed linear codes once, then run
/// the AND-gate datapath.
pub fn infer_stochastic(
    image: &MemoryImage,
    obs: &[usize],
    params: &StochasticParams,
    seed: u64,
) -> Result<InferenceResult> {
    if image.mode() != Mode::Stochastic {
        return Err(Error::Config("image is not a stochastic image".into()));
    }
    check_obs(image, obs)?;
    let latched: Vec<Vec<_>> = (0..image.rows())
        .map(|r| {
            obs.iter()
                .enumerate()
                .map(|(c, &o)| image.linear_code(c, r, o))
                .collect()
        })
        .collect();
    let run = run_stochastic(&latched, params, seed)?;
    let event_counts = count_events(&EventContext {
        mode: Mode::Stochastic,
        rows: image.rows(),
        columns: image.columns(),
        width: image.width(),
        rng_mode: params.rng_mode,
        cycles_used: run.cycles_run,
    });
    Ok(InferenceResult {
        scores: run.counters,
        winner: run.winner,
        cycles_used: run.cycles_run,
        stopped_early: run.stopped_early,
        event_counts,
    })
}

/// Dispatches on the image's mode. `seed` is ignored by logarithmic images.
pub fn infer(
    image: &MemoryImage,
    obs: &[usize],
    params: &StochasticParams,
    seed: u64,
) -> Result<InferenceResult> {
    match image.mode() {
        Mode::Logarithmic => infer_logarithmic(image, obs),
        Mode::Stochastic => infer_stochastic(image, obs, params, seed),
    }
}

/// Returns a copy of `image` in which every stored bit has been flipped
/// independently with probability `ber`. The source is untouched.
///
/// One uniform draw is consumed per bit whatever `ber` is, so for a fixed
/// seed the flips at a lower rate are a subset of those at a higher rate.
pub fn inject_errors(image: &MemoryImage, ber: f64, seed: u64) -> Result<MemoryImage> {
    if !(0.0..=1.0).contains(&ber) {
        return Err(Error::Domain(format!(
            "bit error rate {ber} outside [0, 1]"
        )));
    }
    let mut out = image.clone();
    let bits = image.width().bits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for code in out.raw_codes_mut() {
        let mut mask = 0u16;
        for b in 0..bits {
            if rng.random::<f64>() < ber {
                mask |= 1 << b;
            }
        }
        *code ^= mask;
    }
    Ok(out)
}

/// Settings for a filter run that are not part of the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterParams {
    pub stochastic: StochasticParams,
    pub seed: u64,
}

/// Runs the machine as a Bayesian filter. Column 0 holds the transition
/// table addressed by the previous prediction; step 0 addresses
/// `unknown_row` instead. `steps[t]` carries the addresses of columns
/// 1..C for step `t`.
pub fn run_filter(
    image: &MemoryImage,
    steps: &[Vec<usize>],
    unknown_row: usize,
    params: &FilterParams,
) -> Result<Vec<InferenceResult>> {
    let rows = image.rows();
    if image.values_per_column()[0] < rows + 1 {
        return Err(Error::Config(format!(
            "filter needs V[0] >= R + 1 = {}, got {}",
            rows + 1,
            image.values_per_column()[0]
        )));
    }
    let mut obs = vec![0usize; image.columns()];
    let mut prev = unknown_row;
    let mut results = Vec::with_capacity(steps.len());
    for (t, step) in steps.iter().enumerate() {
        if step.len() + 1 != image.columns() {
            return Err(Error::Input(format!(
                "step {t}: {} observations for {} feature columns",
                step.len(),
                image.columns() - 1
            )));
        }
        obs[0] = prev;
        obs[1..].copy_from_slice(step);
        let seed = derive_seed(params.seed, &[t as u64]);
        let res = infer(image, &obs, &params.stochastic, seed)?;
        prev = res.winner;
        results.push(res);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::quantize_linear;

    fn log_image(rows: usize, values: Vec<usize>, fill: u16) -> MemoryImage {
        MemoryImage::filled(Mode::Logarithmic, BitWidth::W8, rows, values, fill).unwrap()
    }

    #[test]
    fn presets() {
        let f = MachineConfig::fabricated(Mode::Logarithmic);
        assert_eq!((f.rows, f.columns), (4, 4));
        assert_eq!(f.values_per_column, vec![8; 4]);
        assert_eq!(f.rows * f.columns, 16);
        let s = MachineConfig::scaled(Mode::Stochastic);
        assert_eq!((s.rows, s.columns), (4, 6));
        assert_eq!(s.values_per_column, vec![64; 6]);
        f.validate().unwrap();
        s.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut c = MachineConfig::fabricated(Mode::Logarithmic);
        c.likelihood_width = BitWidth::W16;
        assert!(c.validate().is_err());
        let mut c = MachineConfig::fabricated(Mode::Stochastic);
        c.values_per_column[2] = 0;
        assert!(c.validate().is_err());
        let c = MachineConfig::new(0, vec![1], Mode::Stochastic);
        assert!(c.validate().is_err());
    }

    #[test]
    fn log_inference_direct_sums() {
        let mut img = log_image(2, vec![1, 1], 0);
        img.set_code(0, 0, 0, 4).unwrap();
        img.set_code(1, 0, 0, 8).unwrap();
        img.set_code(0, 1, 0, 16).unwrap();
        img.set_code(1, 1, 0, 0).unwrap();
        let res = infer_logarithmic(&img, &[0, 0]).unwrap();
        assert_eq!(res.scores, vec![12, 16]);
        assert_eq!(res.winner, 0);
        assert_eq!(res.cycles_used, 1);
        assert_eq!(res.event_counts.add_ops, 4);
        assert_eq!(res.event_counts.mem_read_bits, 32);
    }

    #[test]
    fn log_inference_saturates() {
        let mut img = log_image(2, vec![2, 2], 10);
        img.set_code(0, 1, 1, 255).unwrap();
        img.set_code(0, 0, 1, 200).unwrap();
        img.set_code(1, 0, 1, 100).unwrap();
        let res = infer_logarithmic(&img, &[1, 1]).unwrap();
        assert_eq!(res.scores, vec![255, 255]);
        assert_eq!(res.winner, 0);
        let res = infer_logarithmic(&img, &[1, 0]).unwrap();
        assert_eq!(res.scores, vec![210, 255]);
    }

    #[test]
    fn all_zero_image_ties_to_row_zero() {
        let img = log_image(4, vec![8; 4], 0);
        let res = infer_logarithmic(&img, &[1, 2, 3, 4]).unwrap();
        assert_eq!(res.scores, vec![0; 4]);
        assert_eq!(res.winner, 0);
    }

    #[test]
    fn address_out_of_range() {
        let img = log_image(2, vec![4, 4], 0);
        assert!(matches!(
            infer_logarithmic(&img, &[0, 4]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            infer_logarithmic(&img, &[0]),
            Err(Error::Input(_))
        ));
        let p = StochasticParams::default();
        assert!(infer_stochastic(&img, &[0, 0], &p, 0).is_err());
    }

    fn linear_image(rows: usize, values: Vec<usize>, fill: u16) -> MemoryImage {
        MemoryImage::filled(Mode::Stochastic, BitWidth::W8, rows, values, fill).unwrap()
    }

    #[test]
    fn deterministic_stochastic_image_stops_first_cycle() {
        let img = linear_image(4, vec![8; 4], 255);
        let p = StochasticParams {
            budget: 100,
            strategy: Strategy::PowerConscious,
            ..StochasticParams::default()
        };
        let mut seen = [false; 4];
        let mut first = 0;
        for seed in 0..400 {
            let res = infer_stochastic(&img, &[0, 1, 2, 3], &p, seed).unwrap();
            seen[res.winner] = true;
            if res.cycles_used == 1 {
                first += 1;
                assert!(res.stopped_early);
            }
        }
        // P(any row fires in a cycle) = (255/256)^4 per row, shared draws.
        assert!(first > 380);
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn equal_rows_give_statistically_equal_counters() {
        let img = linear_image(4, vec![8, 8], 128);
        let budget = 20_000;
        let p = StochasticParams {
            budget,
            ..StochasticParams::default()
        };
        let res = infer_stochastic(&img, &[3, 5], &p, 42).unwrap();
        // Column-shared draws with identical codes: every row sees the same
        // comparator outcome, so counters are identical.
        assert!(res.scores.windows(2).all(|w| w[0] == w[1]));
        let expect = 0.25 * budget as f64;
        let sigma = (budget as f64 * 0.25 * 0.75).sqrt();
        assert!((res.scores[0] as f64 - expect).abs() < 3.0 * sigma);
        let per_cell = StochasticParams {
            rng_mode: RngMode::PerCell,
            ..p
        };
        let res = infer_stochastic(&img, &[3, 5], &per_cell, 42).unwrap();
        for &s in &res.scores {
            assert!((s as f64 - expect).abs() < 3.0 * sigma, "counter {s}");
        }
    }

    #[test]
    fn stochastic_deterministic_and_counts_events() {
        let mut img = linear_image(2, vec![4, 4], 0);
        for v in 0..4 {
            img.set_code(0, 0, v, quantize_linear(0.7, BitWidth::W8).unwrap().v())
                .unwrap();
            img.set_code(1, 0, v, 200).unwrap();
            img.set_code(0, 1, v, 60).unwrap();
            img.set_code(1, 1, v, 90).unwrap();
        }
        let p = StochasticParams {
            budget: 64,
            ..StochasticParams::default()
        };
        let a = infer_stochastic(&img, &[1, 2], &p, 5).unwrap();
        let b = infer_stochastic(&img, &[1, 2], &p, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.event_counts.rng_draws, 2 * 64);
        assert_eq!(a.event_counts.and_compare_ops, 4 * 64);
        assert_eq!(a.event_counts.mem_read_bits, 4 * 8);
    }

    #[test]
    fn inject_errors_extremes() {
        let mut img = log_image(3, vec![5, 2], 0);
        img.set_code(1, 2, 1, 0b1010_0101).unwrap();
        assert_eq!(inject_errors(&img, 0.0, 9).unwrap(), img);
        let flipped = inject_errors(&img, 1.0, 9).unwrap();
        for (a, b) in img.raw_codes().iter().zip(flipped.raw_codes()) {
            assert_eq!(a ^ b, 0xFF);
        }
        assert!(inject_errors(&img, 1.5, 0).is_err());
        assert!(inject_errors(&img, -0.1, 0).is_err());
    }

    #[test]
    fn inject_errors_rate() {
        let img = MemoryImage::filled(Mode::Stochastic, BitWidth::W16, 5, vec![1250], 0).unwrap();
        assert_eq!(img.bit_count(), 100_000);
        let flipped = inject_errors(&img, 0.5, 3).unwrap();
        let ones: u32 = flipped.raw_codes().iter().map(|c| c.count_ones()).sum();
        let frac = ones as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn inject_errors_nested_across_rates() {
        let img = log_image(4, vec![64; 6], 0);
        let low = inject_errors(&img, 1e-3, 17).unwrap();
        let high = inject_errors(&img, 1e-2, 17).unwrap();
        for (l, h) in low.raw_codes().iter().zip(high.raw_codes()) {
            assert_eq!(l & h, *l);
        }
    }

    fn filter_image() -> MemoryImage {
        // R = 2, column 0 = transition (V = 3: prev 0, prev 1, unknown),
        // column 1 = one observation with 2 values.
        log_image(2, vec![3, 2], 0)
    }

    fn filter_params() -> FilterParams {
        FilterParams {
            stochastic: StochasticParams::default(),
            seed: 0,
        }
    }

    #[test]
    fn filter_uniform_keeps_tie_row() {
        let img = filter_image();
        let steps = vec![vec![0], vec![1], vec![0], vec![1]];
        let res = run_filter(&img, &steps, 2, &filter_params()).unwrap();
        assert!(res.iter().all(|r| r.winner == 0));
    }

    #[test]
    fn filter_sticky_transitions_absorb() {
        let mut img = filter_image();
        for r in 0..2 {
            for prev in 0..2 {
                img.set_code(0, r, prev, if r == prev { 0 } else { 255 })
                    .unwrap();
            }
        }
        // step 0 favours row 1 through the observation; afterwards the
        // observation is non-informative.
        img.set_code(1, 0, 1, 8).unwrap();
        let steps = vec![vec![1], vec![0], vec![0], vec![0]];
        let res = run_filter(&img, &steps, 2, &filter_params()).unwrap();
        let winners: Vec<usize> = res.iter().map(|r| r.winner).collect();
        assert_eq!(winners, vec![1, 1, 1, 1]);
    }

    #[test]
    fn filter_three_step_hand_computed() {
        // transition codes T[r][prev]: stay 2, switch 20, unknown 8
        let mut img = filter_image();
        for r in 0..2 {
            for prev in 0..2 {
                img.set_code(0, r, prev, if r == prev { 2 } else { 20 })
                    .unwrap();
            }
            img.set_code(0, r, 2, 8).unwrap();
        }
        // observation codes L[r][o]
        img.set_code(1, 0, 0, 3).unwrap();
        img.set_code(1, 0, 1, 30).unwrap();
        img.set_code(1, 1, 0, 12).unwrap();
        img.set_code(1, 1, 1, 1).unwrap();
        // Brute force over the hard-feedback recursion:
        // t0 obs 0: row0 8+3=11, row1 8+12=20 -> 0
        // t1 obs 1: row0 2+30=32, row1 20+1=21 -> 1
        // t2 obs 0: row0 20+3=23, row1 2+12=14 -> 1
        let steps = vec![vec![0], vec![1], vec![0]];
        let res = run_filter(&img, &steps, 2, &filter_params()).unwrap();
        let got: Vec<(Vec<u32>, usize)> =
            res.iter().map(|r| (r.scores.clone(), r.winner)).collect();
        assert_eq!(
            got,
            vec![(vec![11, 20], 0), (vec![32, 21], 1), (vec![23, 14], 1)]
        );
    }

    #[test]
    fn filter_needs_prior_column() {
        let img = log_image(4, vec![4, 8], 0);
        assert!(matches!(
            run_filter(&img, &[vec![0]], 4, &filter_params()),
            Err(Error::Config(_))
        ));
    }
}
