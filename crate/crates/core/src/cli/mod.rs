//! Command-line front end: gen → train → compile → sim / sweep / energy →
//! report.
//!
//! Exit codes: 0 on success, 2 for invalid or missing inputs, 1 for
//! failures while running.

mod config;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use config::{BitsEntry, EnergySection, MachineSection, RunConfig, SweepSection, TrainSection};
pub use manifest::{
    embedded_hash, file_sha256, manifest_line, write_csv, InputRecord, RunManifest,
};

use crate::energy::CostTable;
use crate::error::{Error, Result};
use crate::experiment::{
    energy_report, simulate, sweep_ber, sweep_bits, sweep_cycles, StochasticSetup, SweepOptions,
    Workload,
};
use crate::machine::{MemoryImage, Mode};
use crate::modelkit::{train, BayesModel, DistKind, TrainOptions};
use crate::stochastic::{StochasticParams, Strategy};
use crate::tasks::{
    extract_features, generate, project, select_features, Dataset, SyntheticTaskSpec, TaskKind,
};
use crate::width::BitWidth;

#[derive(Debug, Parser)]
#[command(
    name = "bayesim",
    version,
    about = "Simulator for logarithmic and stochastic Bayesian machines"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Output (and default input) directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// logarithmic | stochastic
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// conventional | power_conscious, comma-separated for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub strategy: Option<Vec<Strategy>>,
    /// Cycle budget(s), comma-separated for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub budget: Option<Vec<u32>>,
    /// Bit error rate(s), comma-separated for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ber: Option<Vec<f64>>,
    /// Likelihood width(s) in bits (8 or 16), comma-separated for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub width: Option<Vec<u32>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test dataset.
    Gen {
        /// Synthetic task spec (TOML).
        spec: Option<PathBuf>,
        /// Built-in generator when no spec is given.
        #[arg(long)]
        task: Option<TaskKind>,
    },
    /// Fit a model to a training dataset.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// Keep this many features (greedy forward selection).
        #[arg(long)]
        select: Option<usize>,
    },
    /// Quantize a model into memory images.
    Compile {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run one compiled image over the test set.
    Sim {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        costs: Option<PathBuf>,
    },
    /// Monte Carlo sweep over cycle budgets, bit error rates or widths.
    Sweep {
        kind: SweepKind,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Energy/accuracy table and crossover budgets.
    Energy {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        costs: Option<PathBuf>,
    },
    /// Check result files against their manifests and summarize them.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Cycles,
    Ber,
    Bits,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_BUDGETS: [u32; 4] = [10, 50, 100, 255];
pub const DEFAULT_BERS: [f64; 4] = [0.0, 1e-4, 1e-3, 1e-2];

/// Default cycle budget paired with a likelihood width in the bits sweep.
pub fn default_budget_for(width: BitWidth) -> u32 {
    match width {
        BitWidth::W8 => 255,
        BitWidth::W16 => 4096,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bayesim: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let ctx = Ctx::new(cli.global.clone())?;
    match &cli.command {
        Command::Gen { spec, task } => cmd_gen(&ctx, spec.as_deref(), *task),
        Command::Train { data, bins, select } => cmd_train(&ctx, data.as_deref(), *bins, *select),
        Command::Compile { model } => cmd_compile(&ctx, model.as_deref()),
        Command::Sim {
            model,
            data,
            image,
            costs,
        } => cmd_sim(
            &ctx,
            model.as_deref(),
            data.as_deref(),
            image.as_deref(),
            costs.as_deref(),
        ),
        Command::Sweep { kind, model, data } => {
            cmd_sweep(&ctx, *kind, model.as_deref(), data.as_deref())
        }
        Command::Energy { model, data, costs } => {
            cmd_energy(&ctx, model.as_deref(), data.as_deref(), costs.as_deref())
        }
        Command::Report => cmd_report(&ctx),
    }
}

/// Flags merged over the config file over built-in defaults.
struct Ctx {
    args: GlobalArgs,
    cfg: RunConfig,
}

fn one<T: Copy>(name: &str, values: &Option<Vec<T>>) -> Result<Option<T>> {
    match values.as_deref() {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(_) => Err(Error::Config(format!(
            "--{name} takes a single value for this command"
        ))),
    }
}

impl Ctx {
    fn new(args: GlobalArgs) -> Result<Self> {
        let cfg = match &args.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(Ctx { args, cfg })
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self
            .args
            .out
            .clone()
            .or_else(|| self.cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn input(&self, given: Option<&Path>, default_name: &str) -> Result<PathBuf> {
        match given {
            Some(p) => Ok(p.to_path_buf()),
            None => Ok(self.out_dir()?.join(default_name)),
        }
    }

    fn seed(&self) -> u64 {
        self.args.seed.or(self.cfg.seed).unwrap_or(DEFAULT_SEED)
    }

    fn trials(&self) -> usize {
        self.args
            .trials
            .or(self.cfg.trials)
            .unwrap_or(DEFAULT_TRIALS)
    }

    fn mode(&self) -> Option<Mode> {
        self.args.mode.or(self.cfg.machine.mode)
    }

    fn width(&self) -> Result<BitWidth> {
        let bits = one("width", &self.args.width)?
            .or(self.cfg.machine.width)
            .unwrap_or(8);
        BitWidth::from_bits(bits)
    }

    fn strategy(&self) -> Result<Strategy> {
        Ok(one("strategy", &self.args.strategy)?
            .or(self.cfg.machine.strategy)
            .unwrap_or_default())
    }

    fn budget(&self) -> Result<u32> {
        Ok(one("budget", &self.args.budget)?
            .or(self.cfg.machine.budget)
            .unwrap_or(255))
    }

    fn ber(&self) -> Result<f64> {
        Ok(one("ber", &self.args.ber)?
            .or(self.cfg.machine.ber)
            .unwrap_or(0.0))
    }

    fn budgets(&self) -> Vec<u32> {
        self.args
            .budget
            .clone()
            .or_else(|| self.cfg.sweep.budgets.clone())
            .unwrap_or_else(|| DEFAULT_BUDGETS.to_vec())
    }

    fn strategies(&self) -> Vec<Strategy> {
        self.args
            .strategy
            .clone()
            .or_else(|| self.cfg.sweep.strategies.clone())
            .unwrap_or_else(|| vec![Strategy::Conventional, Strategy::PowerConscious])
    }

    fn bers(&self) -> Vec<f64> {
        self.args
            .ber
            .clone()
            .or_else(|| self.cfg.sweep.bers.clone())
            .unwrap_or_else(|| DEFAULT_BERS.to_vec())
    }

    /// `--width` list paired with `--budget` (same length, or one budget for
    /// all widths, or per-width defaults).
    fn bits_grid(&self) -> Result<Vec<(BitWidth, u32)>> {
        if let Some(widths) = &self.args.width {
            let widths = widths
                .iter()
                .map(|&w| BitWidth::from_bits(w))
                .collect::<Result<Vec<_>>>()?;
            return match self.args.budget.as_deref() {
                None => Ok(widths.iter().map(|&w| (w, default_budget_for(w))).collect()),
                Some([b]) => Ok(widths.iter().map(|&w| (w, *b)).collect()),
                Some(bs) if bs.len() == widths.len() => {
                    Ok(widths.iter().copied().zip(bs.iter().copied()).collect())
                }
                Some(_) => Err(Error::Config(
                    "--budget must give one value or one per --width".into(),
                )),
            };
        }
        match &self.cfg.sweep.bits {
            Some(entries) => entries
                .iter()
                .map(|e| Ok((BitWidth::from_bits(e.width)?, e.budget)))
                .collect(),
            None => Ok(vec![(BitWidth::W8, 255), (BitWidth::W16, 4096)]),
        }
    }

    fn sweep_options(&self) -> SweepOptions {
        let m = &self.cfg.machine;
        SweepOptions {
            trials: self.trials(),
            seed: self.seed(),
            rng_mode: m.rng_mode.unwrap_or_default(),
            tie_break: m.tie_break.unwrap_or_default(),
            rounding: m.rounding.unwrap_or_default(),
            threads: None,
        }
    }

    fn stochastic_params(&self) -> Result<StochasticParams> {
        let m = &self.cfg.machine;
        Ok(StochasticParams {
            budget: self.budget()?,
            strategy: self.strategy()?,
            rng_mode: m.rng_mode.unwrap_or_default(),
            tie_break: m.tie_break.unwrap_or_default(),
        })
    }

    fn manifest(
        &self,
        command: &str,
        params: serde_json::Value,
        inputs: &[&Path],
    ) -> Result<RunManifest> {
        RunManifest::new(
            command,
            self.seed(),
            params,
            self.args.config.as_deref(),
            inputs,
        )
    }

    fn costs(&self, given: Option<&Path>) -> Result<(CostTable, Option<PathBuf>)> {
        match given
            .map(Path::to_path_buf)
            .or_else(|| self.cfg.energy.costs.clone())
        {
            Some(p) => Ok((CostTable::load(&p)?, Some(p))),
            None => Ok((CostTable::example(), None)),
        }
    }
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn load_features(path: &Path) -> Result<Dataset> {
    extract_features(&Dataset::load(path)?)
}

fn load_workload(
    ctx: &Ctx,
    model: Option<&Path>,
    data: Option<&Path>,
) -> Result<(Workload, PathBuf, PathBuf)> {
    let model_path = ctx.input(model, "model.json")?;
    let data_path = ctx.input(data, "test.csv")?;
    let model = BayesModel::load(&model_path)?;
    let test = load_features(&data_path)?;
    let workload = Workload::new(model, &test.samples)?;
    Ok((workload, model_path, data_path))
}

fn image_name(mode: Mode, width: BitWidth) -> String {
    format!("image_{mode}_w{}.bin", width.bits())
}

fn cmd_gen(ctx: &Ctx, spec_path: Option<&Path>, task: Option<TaskKind>) -> Result<()> {
    let spec_path = spec_path
        .map(Path::to_path_buf)
        .or_else(|| ctx.cfg.spec.clone());
    let mut spec = match &spec_path {
        Some(p) => SyntheticTaskSpec::load(p)?,
        None => {
            SyntheticTaskSpec::default_for(task.or(ctx.cfg.task).unwrap_or(TaskKind::SleepLike))
        }
    };
    if let Some(seed) = ctx.args.seed {
        spec.seed = seed;
    }
    let generated = generate(&spec)?;
    let out = ctx.out_dir()?;
    let inputs: Vec<&Path> = spec_path.iter().map(PathBuf::as_path).collect();
    let params = serde_json::to_value(&spec).expect("spec serializes");
    for (name, ds) in [
        ("train.csv", &generated.train),
        ("test.csv", &generated.test),
    ] {
        let manifest = ctx.manifest(&format!("gen:{name}"), params.clone(), &inputs)?;
        let path = out.join(name);
        let mut text = ds.to_csv_string();
        let eol = text.find('\n').expect("dataset header line");
        text.insert_str(eol, &format!(",manifest={}", manifest.hash));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.write_sidecar(&path)?;
        wrote(&path);
    }
    Ok(())
}

fn cmd_train(
    ctx: &Ctx,
    data: Option<&Path>,
    bins: Option<usize>,
    select: Option<usize>,
) -> Result<()> {
    let data_path = ctx.input(data, "train.csv")?;
    let ds = load_features(&data_path)?;
    let (kind, default_bins) = match ds.task {
        TaskKind::SleepLike => (DistKind::Lognormal, 8),
        TaskKind::GestureLike => (DistKind::Gaussian, 64),
    };
    let bins = bins.or(ctx.cfg.train.bins).unwrap_or(default_bins);
    let select = select.or(ctx.cfg.train.select);
    let smoothing = ctx.cfg.train.smoothing.unwrap_or(1.0);
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let (samples, inputs) = match select {
        Some(n) => {
            let idx = select_features(&ds.samples, ds.classes, n, kind, bins)?;
            (project(&ds.samples, &idx), Some(idx))
        }
        None => (ds.samples.clone(), None),
    };
    let features = samples[0].values.len();
    let mut opts = if ds.task.is_sequential() {
        TrainOptions::filter(kind, vec![bins; features])
    } else {
        TrainOptions::naive(kind, vec![bins; features])
    };
    opts.smoothing = smoothing;
    let mut model = train(&samples, ds.classes, &opts)?;
    model.inputs = inputs;
    model.validate()?;

    let path = ctx.out_dir()?.join("model.json");
    let params = json!({ "bins": bins, "select": select, "smoothing": smoothing });
    let manifest = ctx.manifest("train", params, &[&data_path])?;
    model.save(&path)?;
    manifest.write_sidecar(&path)?;
    wrote(&path);
    Ok(())
}

fn cmd_compile(ctx: &Ctx, model: Option<&Path>) -> Result<()> {
    let model_path = ctx.input(model, "model.json")?;
    let model = BayesModel::load(&model_path)?;
    // addresses are irrelevant here; an empty workload only sizes the machine
    let workload = Workload {
        model,
        steps: Vec::new(),
        labels: Vec::new(),
    };
    let rounding = ctx.cfg.machine.rounding.unwrap_or_default();
    let targets = match ctx.mode() {
        Some(Mode::Logarithmic) => vec![(Mode::Logarithmic, ctx.width()?)],
        Some(Mode::Stochastic) => vec![(Mode::Stochastic, ctx.width()?)],
        None => vec![
            (Mode::Logarithmic, BitWidth::W8),
            (Mode::Stochastic, ctx.width()?),
        ],
    };
    let out = ctx.out_dir()?;
    for (mode, width) in targets {
        let image = workload.compile(mode, width, rounding)?;
        let path = out.join(image_name(mode, width));
        let params = json!({ "mode": mode, "width": width.bits(), "rounding": rounding });
        let manifest = ctx.manifest("compile", params, &[&model_path])?;
        image.save(&path)?;
        manifest.write_sidecar(&path)?;
        let text_path = path.with_extension("json");
        std::fs::write(&text_path, image.to_text()).map_err(|e| Error::io(&text_path, e))?;
        wrote(&path);
    }
    Ok(())
}

#[derive(Serialize)]
struct SimRow {
    trial: usize,
    mode: String,
    width: u32,
    strategy: String,
    budget: u32,
    ber: f64,
    accuracy: f64,
    mean_cycles: f64,
    #[serde(rename = "energy_J")]
    energy_j: f64,
}

fn cmd_sim(
    ctx: &Ctx,
    model: Option<&Path>,
    data: Option<&Path>,
    image: Option<&Path>,
    costs: Option<&Path>,
) -> Result<()> {
    let (workload, model_path, data_path) = load_workload(ctx, model, data)?;
    let mode = ctx.mode().unwrap_or(Mode::Logarithmic);
    let width = match mode {
        Mode::Logarithmic => BitWidth::W8,
        Mode::Stochastic => ctx.width()?,
    };
    let image_path = ctx.input(image, &image_name(mode, width))?;
    let img = MemoryImage::load(&image_path)?;
    workload
        .machine_config(img.mode(), img.width())
        .check_image(&img)
        .map_err(|_| {
            Error::Config(format!(
                "{} was not compiled from this model",
                image_path.display()
            ))
        })?;
    let params = ctx.stochastic_params()?;
    let ber = ctx.ber()?;
    let (table, costs_path) = ctx.costs(costs)?;
    let runs = simulate(
        &img,
        &workload,
        &params,
        ber,
        &ctx.sweep_options(),
        Some(&table),
    )?;
    let rows: Vec<SimRow> = runs
        .iter()
        .enumerate()
        .map(|(trial, r)| SimRow {
            trial,
            mode: img.mode().to_string(),
            width: img.width().bits(),
            strategy: match img.mode() {
                Mode::Logarithmic => "-".into(),
                Mode::Stochastic => params.strategy.to_string(),
            },
            budget: match img.mode() {
                Mode::Logarithmic => 1,
                Mode::Stochastic => params.budget,
            },
            ber,
            accuracy: r.accuracy,
            mean_cycles: r.mean_cycles,
            energy_j: r.mean_energy.unwrap_or(0.0),
        })
        .collect();
    let mut inputs: Vec<&Path> = vec![&model_path, &data_path, &image_path];
    inputs.extend(costs_path.as_deref());
    let manifest = ctx.manifest(
        "sim",
        json!({ "trials": ctx.trials(), "params": params_json(&params), "ber": ber, "costs": table }),
        &inputs,
    )?;
    let path = ctx
        .out_dir()?
        .join(format!("sim_{}_w{}.csv", img.mode(), img.width().bits()));
    write_csv(&path, &rows, &manifest)?;
    wrote(&path);
    Ok(())
}

fn params_json(p: &StochasticParams) -> serde_json::Value {
    json!({
        "budget": p.budget,
        "strategy": p.strategy,
        "rng_mode": p.rng_mode,
        "tie_break": p.tie_break,
    })
}

#[derive(Serialize)]
struct CycleRow {
    strategy: String,
    budget: u32,
    mean_acc: f64,
    std_acc: f64,
    trials: usize,
}

#[derive(Serialize)]
struct BerRow {
    machine: String,
    ber: f64,
    mean_acc: f64,
    std_acc: f64,
    trials: usize,
}

#[derive(Serialize)]
struct BitsRow {
    width: u32,
    strategy: String,
    budget: u32,
    mean_acc: f64,
    std_acc: f64,
    trials: usize,
}

fn cmd_sweep(ctx: &Ctx, kind: SweepKind, model: Option<&Path>, data: Option<&Path>) -> Result<()> {
    let (workload, model_path, data_path) = load_workload(ctx, model, data)?;
    let opts = ctx.sweep_options();
    let inputs: [&Path; 2] = [&model_path, &data_path];
    let out = ctx.out_dir()?;
    let common = json!({
        "trials": opts.trials,
        "rng_mode": opts.rng_mode,
        "tie_break": opts.tie_break,
        "rounding": opts.rounding,
    });
    match kind {
        SweepKind::Cycles => {
            let (budgets, strategies, width) = (ctx.budgets(), ctx.strategies(), ctx.width()?);
            let points = sweep_cycles(&workload, &budgets, &strategies, width, &opts)?;
            let rows: Vec<CycleRow> = points
                .iter()
                .map(|p| CycleRow {
                    strategy: p.machine.label().into(),
                    budget: p.budget,
                    mean_acc: p.accuracy.mean,
                    std_acc: p.accuracy.std,
                    trials: p.accuracy.n,
                })
                .collect();
            let params = json!({ "common": common, "budgets": budgets, "strategies": strategies, "width": width.bits() });
            let path = out.join("sweep_cycles.csv");
            write_csv(
                &path,
                &rows,
                &ctx.manifest("sweep:cycles", params, &inputs)?,
            )?;
            wrote(&path);
        }
        SweepKind::Ber => {
            let bers = ctx.bers();
            let setup = StochasticSetup {
                width: ctx.width()?,
                strategy: ctx.strategy()?,
                budget: ctx.budget()?,
            };
            let points = sweep_ber(&workload, &bers, setup, &opts)?;
            let rows: Vec<BerRow> = points
                .iter()
                .map(|p| BerRow {
                    machine: match p.machine {
                        crate::experiment::Machine::Logarithmic => "logarithmic".into(),
                        crate::experiment::Machine::Stochastic(_) => "stochastic".into(),
                    },
                    ber: p.ber,
                    mean_acc: p.accuracy.mean,
                    std_acc: p.accuracy.std,
                    trials: p.accuracy.n,
                })
                .collect();
            let params = json!({
                "common": common,
                "bers": bers,
                "width": setup.width.bits(),
                "strategy": setup.strategy,
                "budget": setup.budget,
            });
            let path = out.join("sweep_ber.csv");
            write_csv(&path, &rows, &ctx.manifest("sweep:ber", params, &inputs)?)?;
            wrote(&path);
        }
        SweepKind::Bits => {
            let (grid, strategies) = (ctx.bits_grid()?, ctx.strategies());
            let points = sweep_bits(&workload, &grid, &strategies, &opts)?;
            let rows: Vec<BitsRow> = points
                .iter()
                .map(|p| BitsRow {
                    width: p.width.bits(),
                    strategy: p.machine.label().into(),
                    budget: p.budget,
                    mean_acc: p.accuracy.mean,
                    std_acc: p.accuracy.std,
                    trials: p.accuracy.n,
                })
                .collect();
            let grid_json: Vec<_> = grid.iter().map(|(w, b)| json!([w.bits(), b])).collect();
            let params = json!({ "common": common, "grid": grid_json, "strategies": strategies });
            let path = out.join("sweep_bits.csv");
            write_csv(&path, &rows, &ctx.manifest("sweep:bits", params, &inputs)?)?;
            wrote(&path);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CrossoverRow {
    strategy: String,
    crossover_budget: Option<u32>,
    #[serde(rename = "logarithmic_energy_J")]
    logarithmic_energy_j: f64,
}

fn cmd_energy(
    ctx: &Ctx,
    model: Option<&Path>,
    data: Option<&Path>,
    costs: Option<&Path>,
) -> Result<()> {
    let (workload, model_path, data_path) = load_workload(ctx, model, data)?;
    let (table, costs_path) = ctx.costs(costs)?;
    table.validate()?;
    let opts = ctx.sweep_options();
    let (budgets, strategies, width) = (ctx.budgets(), ctx.strategies(), ctx.width()?);
    let points = sweep_cycles(&workload, &budgets, &strategies, width, &opts)?;
    let report = energy_report(&workload, &points, width, opts.rng_mode, &table)?;

    let mut inputs: Vec<&Path> = vec![&model_path, &data_path];
    inputs.extend(costs_path.as_deref());
    let params = json!({
        "trials": opts.trials,
        "budgets": budgets,
        "strategies": strategies,
        "width": width.bits(),
        "rng_mode": opts.rng_mode,
        "tie_break": opts.tie_break,
        "costs": table,
    });
    let out = ctx.out_dir()?;
    let path = out.join("energy.csv");
    write_csv(
        &path,
        &report.rows,
        &ctx.manifest("energy", params.clone(), &inputs)?,
    )?;
    wrote(&path);

    let rows: Vec<CrossoverRow> = report
        .crossover
        .iter()
        .map(|&(s, b)| CrossoverRow {
            strategy: s.to_string(),
            crossover_budget: b,
            logarithmic_energy_j: report.logarithmic_energy,
        })
        .collect();
    let path = out.join("crossover.csv");
    write_csv(
        &path,
        &rows,
        &ctx.manifest("energy:crossover", params, &inputs)?,
    )?;
    wrote(&path);
    Ok(())
}

/// Result files `report` knows about, in report order, after any
/// `sim_*.csv` files.
pub const RESULT_FILES: [&str; 5] = [
    "sweep_cycles.csv",
    "sweep_ber.csv",
    "sweep_bits.csv",
    "energy.csv",
    "crossover.csv",
];

#[derive(Serialize)]
struct ReportRow {
    artifact: String,
    manifest: String,
    rows: usize,
    status: String,
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let out = ctx.out_dir()?;
    let mut rows = Vec::new();
    let mut found = Vec::new();
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .map_err(|e| Error::io(&out, e))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("sim_") && n.ends_with(".csv"))
        .collect();
    names.sort();
    names.extend(RESULT_FILES.iter().map(|s| s.to_string()));
    for name in &names {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let hash = embedded_hash(&text).unwrap_or("").to_string();
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".manifest.json");
        let status = match std::fs::read_to_string(PathBuf::from(&sidecar)) {
            Err(_) => "missing manifest".to_string(),
            Ok(s) => {
                let recorded = serde_json::from_str::<serde_json::Value>(&s)
                    .ok()
                    .and_then(|v| v.get("hash").and_then(|h| h.as_str()).map(str::to_string));
                if recorded.as_deref() == Some(hash.as_str()) && !hash.is_empty() {
                    "ok".to_string()
                } else {
                    "manifest mismatch".to_string()
                }
            }
        };
        rows.push(ReportRow {
            artifact: name.clone(),
            manifest: hash,
            rows: text.lines().count().saturating_sub(2),
            status,
        });
        found.push(path);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!(
            "no result files in {}",
            out.display()
        )));
    }
    for r in &rows {
        println!(
            "{:<18} {:>5} rows  manifest {}  {}",
            r.artifact, r.rows, r.manifest, r.status
        );
    }
    let inputs: Vec<&Path> = found.iter().map(PathBuf::as_path).collect();
    let manifest = ctx.manifest("report", json!({ "files": names }), &inputs)?;
    let path = out.join("report.csv");
    write_csv(&path, &rows, &manifest)?;
    wrote(&path);
    if let Some(bad) = rows.iter().find(|r| r.status != "ok") {
        return Err(Error::Format(format!("{}: {}", bad.artifact, bad.status)));
    }
    Ok(())
}
