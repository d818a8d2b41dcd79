//! Event-count energy accounting.
//!
//! Each inference is reduced to a tally of hardware events. A [`CostTable`]
//! assigns a per-event energy; total energy is the dot product. The shipped
//! example table is illustrative configuration, not a measurement: only the
//! orderings and trends it produces are meaningful.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::Mode;
use crate::stochastic::{RngMode, Strategy};
use crate::width::BitWidth;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub mem_read_bits: u64,
    pub add_ops: u64,
    pub and_compare_ops: u64,
    pub rng_draws: u64,
    pub counter_increments: u64,
    pub register_writes: u64,
}

impl EventCounts {
    fn as_array(&self) -> [u64; 6] {
        [
            self.mem_read_bits,
            self.add_ops,
            self.and_compare_ops,
            self.rng_draws,
            self.counter_increments,
            self.register_writes,
        ]
    }
}

impl std::ops::Add for EventCounts {
    type Output = EventCounts;

    fn add(self, o: EventCounts) -> EventCounts {
        EventCounts {
            mem_read_bits: self.mem_read_bits + o.mem_read_bits,
            add_ops: self.add_ops + o.add_ops,
            and_compare_ops: self.and_compare_ops + o.and_compare_ops,
            rng_draws: self.rng_draws + o.rng_draws,
            counter_increments: self.counter_increments + o.counter_increments,
            register_writes: self.register_writes + o.register_writes,
        }
    }
}

/// Energy per event class, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub mem_read_bit: f64,
    pub add_op: f64,
    pub and_compare_op: f64,
    pub rng_draw: f64,
    pub counter_increment: f64,
    pub register_write: f64,
}

impl CostTable {
    /// Illustrative, non-authoritative costs: an 8-bit adder costs far more
    /// than a comparator-plus-AND, and memory reads dominate neither.
    pub fn example() -> Self {
        CostTable {
            mem_read_bit: 50e-15,
            add_op: 500e-15,
            and_compare_op: 10e-15,
            rng_draw: 40e-15,
            counter_increment: 20e-15,
            register_write: 30e-15,
        }
    }

    pub fn unit() -> Self {
        CostTable {
            mem_read_bit: 1.0,
            add_op: 1.0,
            and_compare_op: 1.0,
            rng_draw: 1.0,
            counter_increment: 1.0,
            register_write: 1.0,
        }
    }

    fn as_array(&self) -> [f64; 6] {
        [
            self.mem_read_bit,
            self.add_op,
            self.and_compare_op,
            self.rng_draw,
            self.counter_increment,
            self.register_write,
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let a = self.as_array().map(|c| c * factor);
        CostTable {
            mem_read_bit: a[0],
            add_op: a[1],
            and_compare_op: a[2],
            rng_draw: a[3],
            counter_increment: a[4],
            register_write: a[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(
                "cost table entries must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: CostTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("cost table: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("cost table serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// What `count_events` needs to know about one inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventContext {
    pub mode: Mode,
    pub rows: usize,
    pub columns: usize,
    pub width: BitWidth,
    pub rng_mode: RngMode,
    pub cycles_used: u32,
}

/// Deterministic event tally for one inference.
///
/// Logarithmic: every block is read once (`C·R·k` bits), `C·R` saturating
/// adds, `R` score registers written.
///
/// Stochastic: the same one-time read, `C·R` latch writes, then per cycle
/// `C·R` compare/AND events, one draw per column (or per cell) and `R`
/// counter updates.
pub fn count_events(ctx: &EventContext) -> EventCounts {
    let cells = (ctx.columns * ctx.rows) as u64;
    let k = ctx.width.bits() as u64;
    let rows = ctx.rows as u64;
    match ctx.mode {
        Mode::Logarithmic => EventCounts {
            mem_read_bits: cells * k,
            add_ops: cells,
            register_writes: rows,
            ..EventCounts::default()
        },
        Mode::Stochastic => {
            let cycles = ctx.cycles_used as u64;
            let draws_per_cycle = match ctx.rng_mode {
                RngMode::ColumnShared => ctx.columns as u64,
                RngMode::PerCell => cells,
            };
            EventCounts {
                mem_read_bits: cells * k,
                add_ops: 0,
                and_compare_ops: cells * cycles,
                rng_draws: draws_per_cycle * cycles,
                counter_increments: rows * cycles,
                register_writes: cells,
            }
        }
    }
}

pub fn energy_of(counts: &EventCounts, table: &CostTable) -> f64 {
    counts
        .as_array()
        .iter()
        .zip(table.as_array())
        .map(|(&n, c)| n as f64 * c)
        .sum()
}

/// Energy of a stochastic inference as an affine function of the number of
/// cycles. Exact for fractional (mean) cycle counts because every count is
/// affine in cycles.
pub fn stochastic_energy(ctx: &EventContext, table: &CostTable, cycles: f64) -> f64 {
    let fixed = energy_of(
        &count_events(&EventContext {
            cycles_used: 0,
            ..*ctx
        }),
        table,
    );
    let one = energy_of(
        &count_events(&EventContext {
            cycles_used: 1,
            ..*ctx
        }),
        table,
    );
    fixed + cycles * (one - fixed)
}

/// One measured (budget, accuracy, mean cycles) point of a stochastic sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticPoint {
    pub strategy: Strategy,
    pub budget: u32,
    pub accuracy: f64,
    pub mean_cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub strategy: String,
    pub budget: u32,
    pub accuracy: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverReport {
    pub rows: Vec<EnergyRow>,
    pub logarithmic_energy: f64,
    pub logarithmic_accuracy: f64,
    /// Smallest budget at which the stochastic strategy costs more than the
    /// logarithmic machine, per strategy present in the input.
    pub crossover: Vec<(Strategy, Option<u32>)>,
}

/// Geometry needed to price both machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyGeometry {
    pub rows: usize,
    pub columns: usize,
    pub log_width: BitWidth,
    pub stochastic_width: BitWidth,
    pub rng_mode: RngMode,
}

/// Builds the energy/accuracy table for both stochastic strategies plus the
/// single logarithmic point. Rows are ordered logarithmic first, then the
/// stochastic points in input order.
pub fn crossover(
    geometry: &EnergyGeometry,
    table: &CostTable,
    logarithmic_accuracy: f64,
    points: &[StochasticPoint],
) -> Result<CrossoverReport> {
    if points.is_empty() {
        return Err(Error::Config("crossover needs at least one budget".into()));
    }
    table.validate()?;
    let log_ctx = EventContext {
        mode: Mode::Logarithmic,
        rows: geometry.rows,
        columns: geometry.columns,
        width: geometry.log_width,
        rng_mode: geometry.rng_mode,
        cycles_used: 1,
    };
    let logarithmic_energy = energy_of(&count_events(&log_ctx), table);
    let stoch_ctx = EventContext {
        mode: Mode::Stochastic,
        width: geometry.stochastic_width,
        ..log_ctx
    };

    let mut rows = vec![EnergyRow {
        strategy: "logarithmic".into(),
        budget: 1,
        accuracy: logarithmic_accuracy,
        energy_j: logarithmic_energy,
    }];
    let mut crossover: Vec<(Strategy, Option<u32>)> = Vec::new();
    for p in points {
        let energy = stochastic_energy(&stoch_ctx, table, p.mean_cycles);
        rows.push(EnergyRow {
            strategy: p.strategy.to_string(),
            budget: p.budget,
            accuracy: p.accuracy,
            energy_j: energy,
        });
        let slot = match crossover.iter_mut().find(|(s, _)| *s == p.strategy) {
            Some(slot) => slot,
            None => {
                crossover.push((p.strategy, None));
                crossover.last_mut().unwrap()
            }
        };
        if energy > logarithmic_energy {
            slot.1 = Some(slot.1.map_or(p.budget, |b| b.min(p.budget)));
        }
    }
    Ok(CrossoverReport {
        rows,
        logarithmic_energy,
        logarithmic_accuracy,
        crossover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(mode: Mode, cycles: u32) -> EventContext {
        EventContext {
            mode,
            rows: 4,
            columns: 4,
            width: BitWidth::W8,
            rng_mode: RngMode::ColumnShared,
            cycles_used: cycles,
        }
    }

    #[test]
    fn log_counts() {
        let c = count_events(&ctx(Mode::Logarithmic, 1));
        assert_eq!(c.mem_read_bits, 128);
        assert_eq!(c.add_ops, 16);
        assert_eq!(c.register_writes, 4);
        assert_eq!(c.rng_draws + c.and_compare_ops + c.counter_increments, 0);
    }

    #[test]
    fn stochastic_counts() {
        let c = count_events(&ctx(Mode::Stochastic, 100));
        assert_eq!(c.rng_draws, 400);
        assert_eq!(c.and_compare_ops, 1600);
        assert_eq!(c.counter_increments, 400);
        assert_eq!(c.mem_read_bits, 128);
        let one = count_events(&ctx(Mode::Stochastic, 1));
        assert_eq!(one.rng_draws, 4);
        let per_cell = count_events(&EventContext {
            rng_mode: RngMode::PerCell,
            ..ctx(Mode::Stochastic, 10)
        });
        assert_eq!(per_cell.rng_draws, 160);
    }

    #[test]
    fn energy_examples() {
        let table = CostTable::example();
        assert_eq!(energy_of(&EventCounts::default(), &table), 0.0);
        let c = count_events(&ctx(Mode::Stochastic, 37));
        let total: u64 = c.as_array().iter().sum();
        assert_eq!(energy_of(&c, &CostTable::unit()), total as f64);
        let e1 = energy_of(&c, &table);
        let e2 = energy_of(&c, &table.scaled(2.0));
        assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e1);
    }

    #[test]
    fn stochastic_energy_is_affine() {
        let table = CostTable::example();
        let c = ctx(Mode::Stochastic, 0);
        for cycles in [0u32, 1, 7, 255, 4096] {
            let exact = energy_of(
                &count_events(&EventContext {
                    cycles_used: cycles,
                    ..c
                }),
                &table,
            );
            let affine = stochastic_energy(&c, &table, cycles as f64);
            assert!((exact - affine).abs() <= 1e-9 * exact.max(1e-30));
        }
    }

    fn geometry() -> EnergyGeometry {
        EnergyGeometry {
            rows: 4,
            columns: 6,
            log_width: BitWidth::W8,
            stochastic_width: BitWidth::W8,
            rng_mode: RngMode::ColumnShared,
        }
    }

    fn conventional_points(budgets: &[u32]) -> Vec<StochasticPoint> {
        budgets
            .iter()
            .map(|&b| StochasticPoint {
                strategy: Strategy::Conventional,
                budget: b,
                accuracy: 0.5,
                mean_cycles: b as f64,
            })
            .collect()
    }

    #[test]
    fn crossover_limiting_tables() {
        let budgets = [10, 50, 100, 255, 1000];
        let points = conventional_points(&budgets);
        let cheap_stochastic = CostTable {
            and_compare_op: 0.0,
            rng_draw: 0.0,
            counter_increment: 0.0,
            add_op: 1e-12,
            ..CostTable::example()
        };
        let r = crossover(&geometry(), &cheap_stochastic, 0.9, &points).unwrap();
        assert_eq!(r.crossover, vec![(Strategy::Conventional, None)]);
        assert!(r.rows[1..]
            .iter()
            .all(|row| row.energy_j < r.logarithmic_energy));

        let free_adds = CostTable {
            add_op: 0.0,
            ..CostTable::example()
        };
        let r = crossover(&geometry(), &free_adds, 0.9, &points).unwrap();
        assert_eq!(r.crossover, vec![(Strategy::Conventional, Some(10))]);
    }

    #[test]
    fn crossover_monotone_in_and_cost() {
        let budgets: Vec<u32> = (1..=300).collect();
        let points = conventional_points(&budgets);
        let mut last = u32::MAX;
        for scale in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let table = CostTable {
                and_compare_op: CostTable::example().and_compare_op * scale,
                ..CostTable::example()
            };
            let r = crossover(&geometry(), &table, 0.9, &points).unwrap();
            let b = r.crossover[0].1.expect("finite crossover");
            assert!(b <= last, "crossover {b} after {last}");
            last = b;
        }
        // example table: fixed 10320 fJ + 560 fJ/cycle against 21720 fJ
        let r = crossover(&geometry(), &CostTable::example(), 0.9, &points).unwrap();
        assert_eq!(r.crossover[0].1, Some(21));
    }

    #[test]
    fn cost_table_toml_round_trip_and_validation() {
        let t = CostTable::example();
        assert_eq!(CostTable::from_toml_str(&t.to_toml_string()).unwrap(), t);
        let bad = t.to_toml_string().replace("add_op = ", "add_op = -");
        assert!(CostTable::from_toml_str(&bad).is_err());
        assert!(crossover(&geometry(), &t, 0.9, &[]).is_err());
    }
}
