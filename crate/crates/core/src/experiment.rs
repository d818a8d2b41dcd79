//! Accuracy evaluation and Monte Carlo sweeps over compiled machines.
//!
//! Every (grid point, trial) job derives its seeds from the base seed and
//! the trial index only, so grid points share random numbers (common random
//! numbers) and worker scheduling never changes a result.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    crossover, energy_of, CostTable, CrossoverReport, EnergyGeometry, StochasticPoint,
};
use crate::error::{Error, Result};
use crate::logprob::Rounding;
use crate::machine::{
    infer, inject_errors, run_filter, FilterParams, MachineConfig, MemoryImage, Mode,
};
use crate::modelkit::{compile, BayesModel};
use crate::seed::derive_seed;
use crate::stochastic::{RngMode, StochasticParams, Strategy, TieBreak};
use crate::tasks::FeatureVector;
use crate::width::BitWidth;

const STREAM_INFER: u64 = 0;
const STREAM_FAULT: u64 = 1;

/// Environment variable capping sweep worker threads.
pub const THREADS_ENV: &str = "BAYESIM_THREADS";

/// A trained model with its test set already mapped to memory addresses.
#[derive(Debug, Clone)]
pub struct Workload {
    pub model: BayesModel,
    /// Feature-column addresses per sample or step.
    pub steps: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

impl Workload {
    /// Filter models (with a transition matrix) run as one sequence in
    /// sample order; other models classify each sample independently.
    pub fn new(model: BayesModel, samples: &[FeatureVector]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("no test samples".into()));
        }
        let steps = samples
            .iter()
            .map(|s| model.addresses(&s.values))
            .collect::<Result<Vec<_>>>()?;
        if let Some(s) = samples.iter().find(|s| s.label >= model.classes) {
            return Err(Error::Input(format!(
                "label {} outside the model's {} classes",
                s.label, model.classes
            )));
        }
        Ok(Workload {
            labels: samples.iter().map(|s| s.label).collect(),
            model,
            steps,
        })
    }

    pub fn is_sequential(&self) -> bool {
        self.model.is_filter()
    }

    /// Machine sized for this model: one row per class, a leading
    /// transition column of `R + 1` values for filter models.
    pub fn machine_config(&self, mode: Mode, width: BitWidth) -> MachineConfig {
        let mut values = Vec::with_capacity(self.model.features + 1);
        if self.is_sequential() {
            values.push(self.model.classes + 1);
        }
        values.extend(&self.model.bins);
        let mut cfg = MachineConfig::new(self.model.classes, values, mode);
        cfg.likelihood_width = width;
        cfg
    }

    pub fn compile(&self, mode: Mode, width: BitWidth, rounding: Rounding) -> Result<MemoryImage> {
        let mut cfg = self.machine_config(mode, width);
        cfg.rounding = rounding;
        cfg.validate()?;
        compile(&self.model, &cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_cycles: f64,
    /// Mean energy per inference, when a cost table was given.
    pub mean_energy: Option<f64>,
    pub predictions: Vec<usize>,
}

/// Runs every test sample (or the whole sequence) through `image`.
pub fn evaluate(
    image: &MemoryImage,
    workload: &Workload,
    params: &StochasticParams,
    seed: u64,
    table: Option<&CostTable>,
) -> Result<Evaluation> {
    let results = if workload.is_sequential() {
        run_filter(
            image,
            &workload.steps,
            workload.model.classes,
            &FilterParams {
                stochastic: *params,
                seed,
            },
        )?
    } else {
        workload
            .steps
            .iter()
            .enumerate()
            .map(|(i, obs)| infer(image, obs, params, derive_seed(seed, &[i as u64])))
            .collect::<Result<Vec<_>>>()?
    };
    let n = results.len() as f64;
    let hits = results
        .iter()
        .zip(&workload.labels)
        .filter(|(r, &l)| r.winner == l)
        .count();
    Ok(Evaluation {
        accuracy: hits as f64 / n,
        mean_cycles: results.iter().map(|r| r.cycles_used as f64).sum::<f64>() / n,
        mean_energy: table.map(|t| {
            results
                .iter()
                .map(|r| energy_of(&r.event_counts, t))
                .sum::<f64>()
                / n
        }),
        predictions: results.iter().map(|r| r.winner).collect(),
    })
}

/// Mean and one sample standard deviation across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { mean, std, n }
    }
}

/// Which datapath a sweep row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Machine {
    Logarithmic,
    Stochastic(Strategy),
}

impl Machine {
    pub fn label(self) -> &'static str {
        match self {
            Machine::Logarithmic => "logarithmic",
            Machine::Stochastic(s) => s.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub trials: usize,
    pub seed: u64,
    pub rng_mode: RngMode,
    pub tie_break: TieBreak,
    pub rounding: Rounding,
    /// Worker cap; `None` reads [`THREADS_ENV`].
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            trials: 10,
            seed: 0,
            rng_mode: RngMode::default(),
            tie_break: TieBreak::default(),
            rounding: Rounding::default(),
            threads: None,
        }
    }
}

impl SweepOptions {
    fn params(&self, strategy: Strategy, budget: u32) -> StochasticParams {
        StochasticParams {
            budget,
            strategy,
            rng_mode: self.rng_mode,
            tie_break: self.tie_break,
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("need at least one worker thread".into()));
        }
        Ok(())
    }

    fn trial_seed(&self, trial: usize, stream: u64) -> u64 {
        derive_seed(self.seed, &[trial as u64, stream])
    }
}

/// Worker count from `BAYESIM_THREADS`, or rayon's default when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn run_jobs<J, T, F>(opts: &SweepOptions, jobs: Vec<J>, f: F) -> Result<Vec<T>>
where
    J: Send + Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Send + Sync,
{
    let threads = match opts.threads {
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

/// Repeated runs of one image: each trial programs its own faulty copy at
/// `ber` and draws its own stochastic seed.
pub fn simulate(
    image: &MemoryImage,
    workload: &Workload,
    params: &StochasticParams,
    ber: f64,
    opts: &SweepOptions,
    table: Option<&CostTable>,
) -> Result<Vec<Evaluation>> {
    opts.check()?;
    if !(0.0..=1.0).contains(&ber) {
        return Err(Error::Config(format!(
            "bit error rate {ber} outside [0, 1]"
        )));
    }
    run_jobs(opts, (0..opts.trials).collect(), |&t| {
        let faulty = inject_errors(image, ber, opts.trial_seed(t, STREAM_FAULT))?;
        evaluate(
            &faulty,
            workload,
            params,
            opts.trial_seed(t, STREAM_INFER),
            table,
        )
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePoint {
    pub machine: Machine,
    pub budget: u32,
    pub accuracy: Stats,
    pub mean_cycles: f64,
}

/// Accuracy against cycle budget for each stochastic strategy, plus the
/// logarithmic machine repeated at every budget. Rows are budget-major:
/// logarithmic, then `strategies` in order.
pub fn sweep_cycles(
    workload: &Workload,
    budgets: &[u32],
    strategies: &[Strategy],
    width: BitWidth,
    opts: &SweepOptions,
) -> Result<Vec<CyclePoint>> {
    opts.check()?;
    if budgets.is_empty() || budgets.contains(&0) {
        return Err(Error::Config(
            "budgets must be a nonempty list of positive values".into(),
        ));
    }
    let log_image = workload.compile(Mode::Logarithmic, BitWidth::W8, opts.rounding)?;
    let log = evaluate(
        &log_image,
        workload,
        &opts.params(Strategy::Conventional, 1),
        0,
        None,
    )?;
    let image = workload.compile(Mode::Stochastic, width, opts.rounding)?;

    let jobs: Vec<(Strategy, u32, usize)> = budgets
        .iter()
        .flat_map(|&b| {
            strategies
                .iter()
                .flat_map(move |&s| (0..opts.trials).map(move |t| (s, b, t)))
        })
        .collect();
    let evals = run_jobs(opts, jobs, |&(s, b, t)| {
        evaluate(
            &image,
            workload,
            &opts.params(s, b),
            opts.trial_seed(t, STREAM_INFER),
            None,
        )
    })?;

    let mut out = Vec::with_capacity(budgets.len() * (strategies.len() + 1));
    let mut chunks = evals.chunks(opts.trials);
    for &budget in budgets {
        out.push(CyclePoint {
            machine: Machine::Logarithmic,
            budget,
            accuracy: Stats::of(&vec![log.accuracy; opts.trials]),
            mean_cycles: 1.0,
        });
        for &s in strategies {
            let chunk = chunks.next().expect("one chunk per grid point");
            let accs: Vec<f64> = chunk.iter().map(|e| e.accuracy).collect();
            out.push(CyclePoint {
                machine: Machine::Stochastic(s),
                budget,
                accuracy: Stats::of(&accs),
                mean_cycles: chunk.iter().map(|e| e.mean_cycles).sum::<f64>() / chunk.len() as f64,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub machine: Machine,
    pub ber: f64,
    pub accuracy: Stats,
}

/// Stochastic datapath settings for the fault-injection sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticSetup {
    pub width: BitWidth,
    pub strategy: Strategy,
    pub budget: u32,
}

/// Accuracy against memory bit error rate. Each trial programs one faulty
/// image per machine; the fault pattern seed depends only on the trial, so
/// flips at a lower rate are a subset of flips at a higher rate. Rows are
/// ber-major: logarithmic, then stochastic.
pub fn sweep_ber(
    workload: &Workload,
    bers: &[f64],
    stochastic: StochasticSetup,
    opts: &SweepOptions,
) -> Result<Vec<BerPoint>> {
    opts.check()?;
    if bers.is_empty() || bers.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::Config(
            "bit error rates must be a nonempty list in [0, 1]".into(),
        ));
    }
    let log_image = workload.compile(Mode::Logarithmic, BitWidth::W8, opts.rounding)?;
    let stoch_image = workload.compile(Mode::Stochastic, stochastic.width, opts.rounding)?;
    let machines = [
        Machine::Logarithmic,
        Machine::Stochastic(stochastic.strategy),
    ];
    let jobs: Vec<(f64, usize, usize)> = bers
        .iter()
        .flat_map(|&b| {
            (0..machines.len()).flat_map(move |m| (0..opts.trials).map(move |t| (b, m, t)))
        })
        .collect();
    let params = opts.params(stochastic.strategy, stochastic.budget);
    let accs = run_jobs(opts, jobs, |&(ber, m, t)| {
        let base = if m == 0 { &log_image } else { &stoch_image };
        let faulty = inject_errors(base, ber, opts.trial_seed(t, STREAM_FAULT))?;
        Ok(evaluate(
            &faulty,
            workload,
            &params,
            opts.trial_seed(t, STREAM_INFER),
            None,
        )?
        .accuracy)
    })?;
    let mut chunks = accs.chunks(opts.trials);
    let mut out = Vec::new();
    for &ber in bers {
        for &machine in &machines {
            out.push(BerPoint {
                machine,
                ber,
                accuracy: Stats::of(chunks.next().expect("one chunk per grid point")),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitsPoint {
    pub width: BitWidth,
    pub machine: Machine,
    pub budget: u32,
    pub accuracy: Stats,
}

/// Stochastic accuracy per (likelihood width, budget) pair for each
/// strategy. Rows are grid-major, strategies in order.
pub fn sweep_bits(
    workload: &Workload,
    grid: &[(BitWidth, u32)],
    strategies: &[Strategy],
    opts: &SweepOptions,
) -> Result<Vec<BitsPoint>> {
    opts.check()?;
    if grid.is_empty() || grid.iter().any(|&(_, b)| b == 0) {
        return Err(Error::Config(
            "bit-width grid must be nonempty with positive budgets".into(),
        ));
    }
    let images = grid
        .iter()
        .map(|&(w, _)| workload.compile(Mode::Stochastic, w, opts.rounding))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Strategy, usize)> = (0..grid.len())
        .flat_map(|g| {
            strategies
                .iter()
                .flat_map(move |&s| (0..opts.trials).map(move |t| (g, s, t)))
        })
        .collect();
    let accs = run_jobs(opts, jobs, |&(g, s, t)| {
        let params = opts.params(s, grid[g].1);
        Ok(evaluate(
            &images[g],
            workload,
            &params,
            opts.trial_seed(t, STREAM_INFER),
            None,
        )?
        .accuracy)
    })?;
    let mut chunks = accs.chunks(opts.trials);
    let mut out = Vec::new();
    for &(width, budget) in grid {
        for &s in strategies {
            out.push(BitsPoint {
                width,
                machine: Machine::Stochastic(s),
                budget,
                accuracy: Stats::of(chunks.next().expect("one chunk per grid point")),
            });
        }
    }
    Ok(out)
}

/// Prices a cycle sweep: one logarithmic point and one row per stochastic
/// (strategy, budget) point, with the smallest budget at which each
/// strategy overtakes the logarithmic energy.
pub fn energy_report(
    workload: &Workload,
    points: &[CyclePoint],
    width: BitWidth,
    rng_mode: RngMode,
    table: &CostTable,
) -> Result<CrossoverReport> {
    let log_acc = points
        .iter()
        .find(|p| p.machine == Machine::Logarithmic)
        .map(|p| p.accuracy.mean)
        .ok_or_else(|| Error::Input("cycle sweep has no logarithmic point".into()))?;
    let stochastic: Vec<StochasticPoint> = points
        .iter()
        .filter_map(|p| match p.machine {
            Machine::Stochastic(strategy) => Some(StochasticPoint {
                strategy,
                budget: p.budget,
                accuracy: p.accuracy.mean,
                mean_cycles: p.mean_cycles,
            }),
            Machine::Logarithmic => None,
        })
        .collect();
    let cfg = workload.machine_config(Mode::Stochastic, width);
    crossover(
        &EnergyGeometry {
            rows: cfg.rows,
            columns: cfg.columns,
            log_width: BitWidth::W8,
            stochastic_width: width,
            rng_mode,
        },
        table,
        log_acc,
        &stochastic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelkit::{train, DistKind, TrainOptions};
    use crate::tasks::{generate, SyntheticTaskSpec};

    fn gesture() -> Workload {
        let mut spec = SyntheticTaskSpec::gesture_like();
        spec.train_size = 60;
        spec.test_size = 15;
        let g = generate(&spec).unwrap();
        let model = train(
            &g.train.samples,
            4,
            &TrainOptions::naive(DistKind::Gaussian, vec![64; 6]),
        )
        .unwrap();
        Workload::new(model, &g.test.samples).unwrap()
    }

    fn sleep() -> Workload {
        let mut spec = SyntheticTaskSpec::sleep_like();
        spec.train_size = 400;
        spec.test_size = 60;
        let g = generate(&spec).unwrap();
        let model = train(
            &g.train.samples,
            4,
            &TrainOptions::filter(DistKind::Lognormal, vec![8; 3]),
        )
        .unwrap();
        Workload::new(model, &g.test.samples).unwrap()
    }

    fn opts(trials: usize) -> SweepOptions {
        SweepOptions {
            trials,
            seed: 11,
            threads: Some(1),
            ..SweepOptions::default()
        }
    }

    #[test]
    fn simulate_fault_free_log_is_constant() {
        let w = gesture();
        let image = w
            .compile(Mode::Logarithmic, BitWidth::W8, Rounding::default())
            .unwrap();
        let runs = simulate(
            &image,
            &w,
            &StochasticParams::default(),
            0.0,
            &opts(3),
            None,
        )
        .unwrap();
        assert_eq!(runs.len(), 3);
        assert!(runs.iter().all(|r| r == &runs[0]));
        assert!(simulate(
            &image,
            &w,
            &StochasticParams::default(),
            -0.1,
            &opts(1),
            None
        )
        .is_err());
    }

    #[test]
    fn stats_examples() {
        let s = Stats::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Stats::of(&[0.7]).std, 0.0);
    }

    #[test]
    fn machine_config_matches_model() {
        let w = sleep();
        let cfg = w.machine_config(Mode::Logarithmic, BitWidth::W8);
        assert_eq!(cfg.values_per_column, vec![5, 8, 8, 8]);
        let cfg = gesture().machine_config(Mode::Stochastic, BitWidth::W16);
        assert_eq!(cfg, {
            let mut c = MachineConfig::scaled(Mode::Stochastic);
            c.likelihood_width = BitWidth::W16;
            c
        });
    }

    #[test]
    fn evaluation_matches_direct_calls() {
        let w = gesture();
        let image = w
            .compile(Mode::Stochastic, BitWidth::W8, Rounding::default())
            .unwrap();
        let params = StochasticParams::default();
        let e = evaluate(&image, &w, &params, 3, Some(&CostTable::unit())).unwrap();
        let mut hits = 0;
        for (i, obs) in w.steps.iter().enumerate() {
            let r = infer(&image, obs, &params, derive_seed(3, &[i as u64])).unwrap();
            assert_eq!(r.winner, e.predictions[i]);
            hits += (r.winner == w.labels[i]) as usize;
        }
        assert_eq!(e.accuracy, hits as f64 / w.labels.len() as f64);
        assert_eq!(e.mean_cycles, 255.0);
        assert!(e.mean_energy.unwrap() > 0.0);

        let w = sleep();
        let image = w
            .compile(Mode::Logarithmic, BitWidth::W8, Rounding::default())
            .unwrap();
        let e = evaluate(&image, &w, &params, 0, None).unwrap();
        let direct = run_filter(
            &image,
            &w.steps,
            4,
            &FilterParams {
                stochastic: params,
                seed: 0,
            },
        )
        .unwrap();
        let winners: Vec<usize> = direct.iter().map(|r| r.winner).collect();
        assert_eq!(e.predictions, winners);
    }

    #[test]
    fn cycle_sweep_shape_and_thread_independence() {
        let w = gesture();
        let strategies = [Strategy::Conventional, Strategy::PowerConscious];
        let a = sweep_cycles(&w, &[1, 20], &strategies, BitWidth::W8, &opts(3)).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a[0].machine, Machine::Logarithmic);
        assert_eq!(a[1].machine, Machine::Stochastic(Strategy::Conventional));
        assert_eq!(a[1].mean_cycles, 1.0);
        assert!(a[5].mean_cycles <= 20.0);
        let b = sweep_cycles(
            &w,
            &[1, 20],
            &strategies,
            BitWidth::W8,
            &SweepOptions {
                threads: Some(3),
                ..opts(3)
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ber_sweep_zero_matches_fault_free() {
        let w = sleep();
        let setup = StochasticSetup {
            width: BitWidth::W8,
            strategy: Strategy::Conventional,
            budget: 50,
        };
        let pts = sweep_ber(&w, &[0.0, 0.5], setup, &opts(2)).unwrap();
        assert_eq!(pts.len(), 4);
        let log_image = w
            .compile(Mode::Logarithmic, BitWidth::W8, Rounding::default())
            .unwrap();
        let clean = evaluate(&log_image, &w, &StochasticParams::default(), 0, None).unwrap();
        assert_eq!(pts[0].accuracy.mean, clean.accuracy);
        assert_eq!(pts[0].accuracy.std, 0.0);
        assert!(sweep_ber(&w, &[1.5], setup, &opts(1)).is_err());
    }

    #[test]
    fn bits_sweep_rows() {
        let w = sleep();
        let grid = [(BitWidth::W8, 20), (BitWidth::W16, 40)];
        let pts = sweep_bits(
            &w,
            &grid,
            &[Strategy::Conventional, Strategy::PowerConscious],
            &opts(2),
        )
        .unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].width, BitWidth::W16);
        assert_eq!(
            pts[3].machine,
            Machine::Stochastic(Strategy::PowerConscious)
        );
    }

    #[test]
    fn single_class_is_always_right() {
        let samples: Vec<FeatureVector> = (0..30)
            .map(|i| FeatureVector {
                label: 0,
                values: vec![i as f64 * 0.1],
            })
            .collect();
        let model = train(
            &samples,
            1,
            &TrainOptions::naive(DistKind::Gaussian, vec![4]),
        )
        .unwrap();
        let w = Workload::new(model, &samples).unwrap();
        let pts =
            sweep_cycles(&w, &[1], &[Strategy::Conventional], BitWidth::W8, &opts(2)).unwrap();
        assert!(pts.iter().all(|p| p.accuracy.mean == 1.0));
    }

    #[test]
    fn energy_report_prices_sweep() {
        let w = gesture();
        let pts = sweep_cycles(
            &w,
            &[10, 100],
            &[Strategy::Conventional],
            BitWidth::W8,
            &opts(1),
        )
        .unwrap();
        let rep = energy_report(
            &w,
            &pts,
            BitWidth::W8,
            RngMode::ColumnShared,
            &CostTable::example(),
        )
        .unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.crossover, vec![(Strategy::Conventional, Some(100))]);
    }
}
