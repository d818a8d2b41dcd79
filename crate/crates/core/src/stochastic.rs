//! Stochastic-computing datapath.
//!
//! A likelihood is stored as a linear code `v` of `k` bits representing
//! `P = v / 2^k`. Each clock cycle a uniform `k`-bit number `r` is compared
//! against the code and the comparator emits `1` iff `r < v`, producing a
//! Bernoulli bitstream of parameter `P`. AND-ing the streams of a row's
//! columns multiplies their probabilities; per-row counters accumulate the
//! products over cycles.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::width::BitWidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearCode {
    v: u16,
    width: BitWidth,
}

impl LinearCode {
    pub fn new(v: u16, width: BitWidth) -> Result<Self> {
        if v > width.max_code() {
            return Err(Error::Domain(format!(
                "linear code {v} exceeds {}-bit range",
                width.bits()
            )));
        }
        Ok(LinearCode { v, width })
    }

    pub fn v(self) -> u16 {
        self.v
    }

    pub fn width(self) -> BitWidth {
        self.width
    }

    /// `v / 2^k`; at most `1 - 2^-k`.
    pub fn probability(self) -> f64 {
        self.v as f64 / self.width.levels() as f64
    }
}

/// `v = clamp(round(p·2^k), 0, 2^k - 1)`.
pub fn quantize_linear(p: f64, width: BitWidth) -> Result<LinearCode> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let scaled = (p * width.levels() as f64).round();
    let v = scaled.clamp(0.0, width.max_code() as f64) as u16;
    Ok(LinearCode { v, width })
}

/// Comparator output for one uniform draw `r` in `0..2^k`.
#[inline]
pub fn draw_bit(code: LinearCode, r: u32) -> bool {
    r < code.v as u32
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Run the full cycle budget and pick the largest counter.
    #[default]
    Conventional,
    /// Stop at the first cycle in which any row emits a one.
    PowerConscious,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Conventional => "conventional",
            Strategy::PowerConscious => "power_conscious",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Strategy::Conventional),
            "power_conscious" | "power-conscious" => Ok(Strategy::PowerConscious),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RngMode {
    /// One draw per column per cycle, broadcast to every row of the column.
    #[default]
    ColumnShared,
    /// An independent draw for every cell.
    PerCell,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Random,
    LowestIndex,
}

/// Seeded uniform source (ChaCha8). Fully reproducible from the seed.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on `0..2^k`.
    #[inline]
    pub fn draw(&mut self, width: BitWidth) -> u32 {
        self.rng.next_u32() >> (32 - width.bits())
    }

    /// Uniform index in `0..n`.
    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StochasticParams {
    pub budget: u32,
    pub strategy: Strategy,
    pub rng_mode: RngMode,
    pub tie_break: TieBreak,
}

impl Default for StochasticParams {
    fn default() -> Self {
        StochasticParams {
            budget: 255,
            strategy: Strategy::Conventional,
            rng_mode: RngMode::ColumnShared,
            tie_break: TieBreak::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticRunResult {
    pub counters: Vec<u32>,
    pub cycles_run: u32,
    pub winner: usize,
    pub stopped_early: bool,
}

fn break_tie(candidates: &[usize], tie_break: TieBreak, rng: &mut RngState) -> usize {
    match tie_break {
        TieBreak::LowestIndex => candidates[0],
        TieBreak::Random if candidates.len() == 1 => candidates[0],
        TieBreak::Random => candidates[rng.pick(candidates.len())],
    }
}

/// Runs the stochastic datapath on latched codes, `latched[row][column]`.
///
/// Codes are read from memory once per input presentation; every cycle
/// reuses them.
pub fn run_stochastic(
    latched: &[Vec<LinearCode>],
    params: &StochasticParams,
    seed: u64,
) -> Result<StochasticRunResult> {
    let rows = latched.len();
    let columns = latched.first().map_or(0, Vec::len);
    if rows == 0 || columns == 0 {
        return Err(Error::Config(
            "stochastic run needs at least one row and one column".into(),
        ));
    }
    if latched.iter().any(|row| row.len() != columns) {
        return Err(Error::Config("ragged latched code matrix".into()));
    }
    if params.budget == 0 {
        return Err(Error::Config("cycle budget must be at least 1".into()));
    }
    let width = latched[0][0].width();
    if latched.iter().flatten().any(|c| c.width() != width) {
        return Err(Error::Config("mixed code widths in one run".into()));
    }

    let thresholds: Vec<Vec<u32>> = latched
        .iter()
        .map(|row| row.iter().map(|c| c.v() as u32).collect())
        .collect();
    let mut rng = RngState::new(seed);
    let mut counters = vec![0u32; rows];
    let mut column_draws = vec![0u32; columns];
    let mut fired = vec![false; rows];
    let mut firers: Vec<usize> = Vec::with_capacity(rows);

    for cycle in 1..=params.budget {
        match params.rng_mode {
            RngMode::ColumnShared => {
                for d in column_draws.iter_mut() {
                    *d = rng.draw(width);
                }
                for (f, row) in fired.iter_mut().zip(&thresholds) {
                    *f = row.iter().zip(&column_draws).all(|(&v, &r)| r < v);
                }
            }
            RngMode::PerCell => {
                fired.iter_mut().for_each(|f| *f = true);
                for c in 0..columns {
                    for (f, row) in fired.iter_mut().zip(&thresholds) {
                        let r = rng.draw(width);
                        *f &= r < row[c];
                    }
                }
            }
        }

        firers.clear();
        for (r, &f) in fired.iter().enumerate() {
            if f {
                counters[r] += 1;
                firers.push(r);
            }
        }

        if params.strategy == Strategy::PowerConscious && !firers.is_empty() {
            let winner = break_tie(&firers, params.tie_break, &mut rng);
            return Ok(StochasticRunResult {
                counters,
                cycles_run: cycle,
                winner,
                stopped_early: true,
            });
        }
    }

    let best = counters.iter().copied().max().unwrap_or(0);
    let leaders: Vec<usize> = (0..rows).filter(|&r| counters[r] == best).collect();
    let winner = break_tie(&leaders, params.tie_break, &mut rng);
    Ok(StochasticRunResult {
        counters,
        cycles_run: params.budget,
        winner,
        stopped_early: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const W8: BitWidth = BitWidth::W8;

    fn code(v: u16) -> LinearCode {
        LinearCode::new(v, W8).unwrap()
    }

    fn params(budget: u32, strategy: Strategy, rng_mode: RngMode) -> StochasticParams {
        StochasticParams {
            budget,
            strategy,
            rng_mode,
            tie_break: TieBreak::Random,
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_linear(0.5, W8).unwrap().v(), 128);
        assert_eq!(quantize_linear(1.0, W8).unwrap().v(), 255);
        // 0.3 · 256 = 76.8
        assert_eq!(quantize_linear(0.3, W8).unwrap().v(), 77);
        assert_eq!(quantize_linear(0.0, W8).unwrap().v(), 0);
        assert!(quantize_linear(1.5, W8).is_err());
        assert!(quantize_linear(-0.5, W8).is_err());
        assert_eq!(quantize_linear(1.0, BitWidth::W16).unwrap().v(), 65535);
    }

    #[test]
    fn draw_bit_thresholds() {
        for r in 0..256 {
            assert!(!draw_bit(code(0), r));
        }
        assert!(draw_bit(code(255), 254));
        assert!(!draw_bit(code(255), 255));
    }

    #[test]
    fn draw_bit_empirical_mean() {
        let mut rng = RngState::new(11);
        let n = 1_000_000;
        let ones = (0..n).filter(|_| draw_bit(code(128), rng.draw(W8))).count();
        let mean = ones as f64 / n as f64;
        assert!((mean - 0.5).abs() < 0.0015, "mean {mean}");
    }

    #[test]
    fn conventional_product_estimate() {
        let latched = vec![vec![code(128), code(128)]];
        let res = run_stochastic(
            &latched,
            &params(10_000, Strategy::Conventional, RngMode::ColumnShared),
            5,
        )
        .unwrap();
        let est = res.counters[0] as f64 / 10_000.0;
        assert!((est - 0.25).abs() < 0.013, "estimate {est}");
        assert_eq!(res.cycles_run, 10_000);
        assert!(!res.stopped_early);
    }

    #[test]
    fn power_conscious_near_certain_stops_first_cycle() {
        let latched = vec![vec![code(255)]];
        let p = params(16, Strategy::PowerConscious, RngMode::ColumnShared);
        let trials = 20_000;
        let first = (0..trials)
            .filter(|&s| run_stochastic(&latched, &p, s).unwrap().cycles_run == 1)
            .count();
        let frac = first as f64 / trials as f64;
        let expected = 255.0 / 256.0;
        let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!(
            (frac - expected).abs() < 3.0 * sigma + 1e-9,
            "fraction {frac}"
        );
    }

    #[test]
    fn power_conscious_two_row_race() {
        // Oracle: enumerate the four per-cycle outcomes of two independent
        // rows and condition on the first cycle where anything fires.
        let (p1, p2) = (0.5f64, 0.25f64);
        let mut win0 = 0.0;
        let mut any = 0.0;
        for (f0, f1) in [(true, true), (true, false), (false, true), (false, false)] {
            let pr = if f0 { p1 } else { 1.0 - p1 } * if f1 { p2 } else { 1.0 - p2 };
            if f0 || f1 {
                any += pr;
            }
            win0 += pr
                * match (f0, f1) {
                    (true, true) => 0.5,
                    (true, false) => 1.0,
                    _ => 0.0,
                };
        }
        let oracle = win0 / any;
        let closed_form = (p1 * (1.0 - p2) + p1 * p2 / 2.0) / (p1 + p2 - p1 * p2);
        assert!((oracle - closed_form).abs() < 1e-12);
        assert!((oracle - 0.7).abs() < 1e-12);

        let latched = vec![vec![code(128)], vec![code(64)]];
        let p = params(1_000, Strategy::PowerConscious, RngMode::PerCell);
        let trials = 40_000u64;
        let wins = (0..trials)
            .filter(|&s| run_stochastic(&latched, &p, s).unwrap().winner == 0)
            .count();
        let frac = wins as f64 / trials as f64;
        let sigma = (oracle * (1.0 - oracle) / trials as f64).sqrt();
        assert!((frac - oracle).abs() < 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn column_shared_dominance() {
        // Within one column and cycle, a larger code fires whenever a smaller
        // one does.
        for va in (0..=255u16).step_by(17) {
            for vb in (0..=va).step_by(13) {
                for r in 0..256u32 {
                    assert!(draw_bit(code(va), r) >= draw_bit(code(vb), r));
                }
            }
        }
        let latched = vec![vec![code(200), code(180)], vec![code(100), code(90)]];
        let res = run_stochastic(
            &latched,
            &params(5_000, Strategy::Conventional, RngMode::ColumnShared),
            3,
        )
        .unwrap();
        assert!(res.counters[0] >= res.counters[1]);
    }

    #[test]
    fn per_cycle_rate_matches_product_in_both_modes() {
        let latched = vec![vec![code(192), code(64)], vec![code(128), code(128)]];
        let budget = 100_000u32;
        for mode in [RngMode::ColumnShared, RngMode::PerCell] {
            let res =
                run_stochastic(&latched, &params(budget, Strategy::Conventional, mode), 9).unwrap();
            for (r, expect) in [(0usize, 0.75 * 0.25), (1, 0.25)] {
                let est = res.counters[r] as f64 / budget as f64;
                let sigma = (expect * (1.0 - expect) / budget as f64).sqrt();
                assert!(
                    (est - expect).abs() < 3.0 * sigma,
                    "{mode:?} row {r}: {est}"
                );
            }
        }
    }

    #[test]
    fn power_conscious_expected_stop() {
        // E[stop] = 1 / p for a single row with per-cycle probability p.
        let latched = vec![vec![code(64)]];
        let p = params(10_000, Strategy::PowerConscious, RngMode::ColumnShared);
        let trials = 20_000u64;
        let total: u64 = (0..trials)
            .map(|s| run_stochastic(&latched, &p, s).unwrap().cycles_run as u64)
            .sum();
        let mean = total as f64 / trials as f64;
        // geometric(0.25): mean 4, variance (1-p)/p^2 = 12
        let sigma = (12.0f64 / trials as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * sigma, "mean stop {mean}");
    }

    #[test]
    fn no_fire_within_budget() {
        let latched = vec![vec![code(0)], vec![code(0)], vec![code(0)]];
        let p = params(8, Strategy::PowerConscious, RngMode::ColumnShared);
        let res = run_stochastic(&latched, &p, 1).unwrap();
        assert!(!res.stopped_early);
        assert_eq!(res.cycles_run, 8);
        assert!(res.winner < 3);
        let lowest = StochasticParams {
            tie_break: TieBreak::LowestIndex,
            ..p
        };
        assert_eq!(run_stochastic(&latched, &lowest, 1).unwrap().winner, 0);
    }

    #[test]
    fn counters_bounded_and_deterministic() {
        let latched = vec![vec![code(30), code(250)], vec![code(220), code(17)]];
        for strategy in [Strategy::Conventional, Strategy::PowerConscious] {
            let p = params(300, strategy, RngMode::ColumnShared);
            let a = run_stochastic(&latched, &p, 77).unwrap();
            let b = run_stochastic(&latched, &p, 77).unwrap();
            assert_eq!(a, b);
            assert!(a.counters.iter().all(|&c| c <= a.cycles_run));
        }
    }

    #[test]
    fn rejects_empty_and_zero_budget() {
        let p = StochasticParams::default();
        assert!(run_stochastic(&[], &p, 0).is_err());
        assert!(run_stochastic(&[vec![]], &p, 0).is_err());
        let zero = StochasticParams { budget: 0, ..p };
        assert!(run_stochastic(&[vec![code(1)]], &zero, 0).is_err());
    }
}
