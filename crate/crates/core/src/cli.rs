//! Command-line front end. `ods <command> --help` lists the flags.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::batch_em::{em_fit_with, mv_posterior, predict, EmConfig};
use crate::error::{Error, Result};
use crate::estep::posterior_all;
use crate::metrics::{
    batch_statistic, error_rate, fixed_point_residual, format_error_rate, marginal_log_likelihood,
    stationarity_gap,
};
use crate::model::{
    format_sig17, load_checkpoint, load_ground_truth, load_labels, save_checkpoint,
    write_predictions, GroundTruth, LabelSet, PosteriorMatrix,
};
use crate::online::{
    online_fit, InitMode, Initialization, OnlineConfig, OnlineFit, Sampling, ScheduleKind,
    StepSchedule, DEFAULT_BOX_EXPONENT,
};
use crate::synth::{gen_instance, SynthConfig};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "ODS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ods", version, about = "Batch and online Dawid-Skene label aggregation")]
pub struct Cli {
    /// Worker threads (defaults to $ODS_THREADS, then the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Majority vote with ties broken toward the smallest label.
    Mv(MvArgs),
    /// Batch EM.
    Em(EmArgs),
    /// Online EM over shuffled or resampled items.
    Online(OnlineArgs),
    /// Grid sweep of online step-size parameters.
    Sweep(SweepArgs),
    /// Write a seeded synthetic instance.
    Synth(SynthArgs),
    /// Evaluate a saved confusion model.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Label CSV with header `item,worker,label`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Ground-truth CSV with header `item,label`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Number of classes; defaults to the largest label seen.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Predictions CSV (`item,label`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Mv,
    Uniform,
}

impl From<InitArg> for InitMode {
    fn from(arg: InitArg) -> Self {
        match arg {
            InitArg::Mv => InitMode::MajorityVote,
            InitArg::Uniform => InitMode::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "mv")]
    pub init: InitArg,
    #[arg(long, default_value_t = crate::batch_em::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Relative log-likelihood change that stops the run.
    #[arg(long, default_value_t = crate::batch_em::DEFAULT_TOL)]
    pub tol: f64,
    /// Additive smoothing on every M-step count.
    #[arg(long, default_value_t = crate::batch_em::DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    /// Confusion checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Predictions CSV (`item,label`).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Online1,
    Online2,
}

impl From<ScheduleArg> for ScheduleKind {
    fn from(arg: ScheduleArg) -> Self {
        match arg {
            ScheduleArg::Online1 => ScheduleKind::Online1,
            ScheduleArg::Online2 => ScheduleKind::Online2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    WithReplacement,
    Shuffle,
}

impl From<SamplingArg> for Sampling {
    fn from(arg: SamplingArg) -> Self {
        match arg {
            SamplingArg::WithReplacement => Sampling::WithReplacement,
            SamplingArg::Shuffle => Sampling::Shuffle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

/// Flags shared by `online` and `sweep`.
#[derive(Debug, Args)]
pub struct OnlineOptions {
    #[arg(long, value_enum, default_value = "online2")]
    pub schedule: ScheduleArg,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value = "with-replacement")]
    pub sampling: SamplingArg,
    #[arg(long, value_enum, default_value = "on")]
    pub project: Toggle,
    #[arg(long, value_enum, default_value = "mv")]
    pub init: InitArg,
    /// First projection box is [2^-e, 1 - 2^-e].
    #[arg(long, default_value_t = DEFAULT_BOX_EXPONENT)]
    pub box_exponent: i32,
}

impl OnlineOptions {
    fn config(&self, schedule: StepSchedule, seed: u64) -> OnlineConfig {
        OnlineConfig {
            schedule,
            epochs: self.epochs,
            seed,
            sampling: self.sampling.into(),
            projection: self.project == Toggle::On,
            box_exponent: self.box_exponent,
        }
    }
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub options: OnlineOptions,
    /// Step parameter a (default 2 for online1, 0.9 for online2).
    #[arg(long)]
    pub a: Option<f64>,
    /// Step parameter b (default 1.5 for online1, 0.2 for online2).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[command(flatten)]
    pub options: OnlineOptions,
    /// Comma-separated values of a.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a_grid: Vec<f64>,
    /// Comma-separated values of b.
    #[arg(long, value_delimiter = ',', required = true)]
    pub b_grid: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.6)]
    pub acc_lo: f64,
    #[arg(long, default_value_t = 0.9)]
    pub acc_hi: f64,
    #[arg(long, default_value_t = 5)]
    pub labels_per_item: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Confusion checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Finite-difference step for the stationarity gap.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
}

/// Thread count from the flag, else from `$ODS_THREADS`.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(raw) => raw.trim().parse().map(Some).map_err(|_| {
            Error::InvalidParameter(format!("{THREADS_ENV}={raw:?} is not a thread count"))
        }),
        Err(_) => Ok(None),
    }
}

/// Runs one command, writing the human-readable report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Mv(args) => cmd_mv(args, out),
        Command::Em(args) => cmd_em(args, out),
        Command::Online(args) => cmd_online(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Synth(args) => cmd_synth(args, out),
        Command::Eval(args) => cmd_eval(args, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn load_data(
    labels: &Path,
    truth: Option<&Path>,
    classes: Option<usize>,
) -> Result<(LabelSet, Option<GroundTruth>)> {
    let labels = load_labels(open(labels)?, classes)?;
    let truth = match truth {
        Some(path) => Some(load_ground_truth(open(path)?, &labels)?),
        None => None,
    };
    Ok((labels, truth))
}

fn report_error(out: &mut dyn Write, predicted: &[usize], truth: Option<&GroundTruth>) -> Result<()> {
    if let Some(truth) = truth {
        writeln!(out, "error_rate={}", format_error_rate(error_rate(predicted, truth)?))?;
    }
    Ok(())
}

fn cmd_mv(args: &MvArgs, out: &mut dyn Write) -> Result<()> {
    let (labels, truth) = load_data(&args.data.labels, args.data.truth.as_deref(), args.data.classes)?;
    let predicted = predict(&mv_posterior(&labels));
    if let Some(path) = &args.out {
        write_predictions(&predicted, &labels, create(path)?)?;
    }
    report_error(out, &predicted, truth.as_ref())
}

fn cmd_em(args: &EmArgs, out: &mut dyn Write) -> Result<()> {
    let (labels, truth) = load_data(&args.data.labels, args.data.truth.as_deref(), args.data.classes)?;
    let config = EmConfig {
        max_iter: args.max_iter,
        tol: args.tol,
        smoothing: args.smoothing,
    };
    let init = match args.init {
        InitArg::Mv => mv_posterior(&labels),
        InitArg::Uniform => PosteriorMatrix::uniform(labels.num_items(), labels.num_classes()),
    };

    let mut rows = Vec::new();
    let mut failure = None;
    let fit = em_fit_with(&labels, &init, &config, |iter, posterior, ll| {
        let error = match &truth {
            Some(t) => match error_rate(&predict(posterior), t) {
                Ok(e) => Some(e),
                Err(e) => {
                    failure.get_or_insert(e);
                    None
                }
            },
            None => None,
        };
        rows.push((iter, ll, error));
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        if truth.is_some() {
            writeln!(w, "iter,loglik,error_rate")?;
        } else {
            writeln!(w, "iter,loglik")?;
        }
        for (iter, ll, error) in &rows {
            match error {
                Some(e) => writeln!(w, "{iter},{},{}", format_sig17(*ll), format_sig17(*e))?,
                None => writeln!(w, "{iter},{}", format_sig17(*ll))?,
            }
        }
        w.flush()?;
    }
    if let Some(path) = &args.out {
        save_checkpoint(&fit.confusion, create(path)?)?;
    }
    // predictions from the final model
    let predicted = predict(&posterior_all(&fit.confusion, &labels));
    if let Some(path) = &args.predictions {
        write_predictions(&predicted, &labels, create(path)?)?;
    }
    writeln!(out, "iterations={}", fit.iterations())?;
    writeln!(out, "converged={}", fit.converged)?;
    writeln!(out, "loglik={}", format_sig17(*fit.log_likelihood.last().unwrap()))?;
    report_error(out, &predicted, truth.as_ref())
}

fn schedule_for(kind: ScheduleArg, a: Option<f64>, b: Option<f64>) -> Result<StepSchedule> {
    let (da, db) = match kind {
        ScheduleArg::Online1 => (2.0, 1.5),
        ScheduleArg::Online2 => (0.9, 0.2),
    };
    StepSchedule::new(kind.into(), a.unwrap_or(da), b.unwrap_or(db))
}

fn final_error(fit: &OnlineFit) -> Option<f64> {
    fit.epochs.last().and_then(|r| r.error_rate)
}

fn cmd_online(args: &OnlineArgs, out: &mut dyn Write) -> Result<()> {
    let schedule = schedule_for(args.options.schedule, args.a, args.b)?;
    let (labels, truth) = load_data(&args.data.labels, args.data.truth.as_deref(), args.data.classes)?;
    let init = Initialization::new(&labels, args.options.init.into(), args.options.box_exponent)?;
    let config = args.options.config(schedule, args.seed);
    let fit = online_fit(&labels, truth.as_ref(), &init, &config)?;

    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        if truth.is_some() {
            writeln!(w, "epoch,error_rate,loglik,projections")?;
        } else {
            writeln!(w, "epoch,loglik,projections")?;
        }
        for r in &fit.epochs {
            let ll = format_sig17(r.log_likelihood);
            match r.error_rate {
                Some(e) => writeln!(w, "{},{},{ll},{}", r.epoch, format_sig17(e), r.projections)?,
                None => writeln!(w, "{},{ll},{}", r.epoch, r.projections)?,
            }
        }
        w.flush()?;
    }
    if let Some(path) = &args.out {
        save_checkpoint(&fit.confusion, create(path)?)?;
    }
    if let Some(path) = &args.predictions {
        let predicted = predict(&posterior_all(&fit.confusion, &labels));
        write_predictions(&predicted, &labels, create(path)?)?;
    }
    let last = fit.epochs.last().expect("epoch 0 is always recorded");
    writeln!(out, "schedule={} a={} b={}", schedule.kind(), schedule.a(), schedule.b())?;
    writeln!(out, "loglik={}", format_sig17(last.log_likelihood))?;
    writeln!(out, "projections={}", last.projections)?;
    if let Some(e) = final_error(&fit) {
        writeln!(out, "error_rate={}", format_error_rate(e))?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    if args.a_grid.is_empty() || args.b_grid.is_empty() || args.seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be non-empty".into()));
    }
    // validate every cell before doing any work
    let mut cells = Vec::new();
    for &a in &args.a_grid {
        for &b in &args.b_grid {
            cells.push(schedule_for(args.options.schedule, Some(a), Some(b))?);
        }
    }
    let (labels, truth) = load_data(&args.labels, Some(&args.truth), args.classes)?;
    let truth = truth.expect("truth is required");
    let init = Initialization::new(&labels, args.options.init.into(), args.options.box_exponent)?;

    let runs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| args.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let errors: Vec<f64> = runs
        .par_iter()
        .map(|&(c, seed)| {
            let fit = online_fit(&labels, Some(&truth), &init, &args.options.config(cells[c], seed))?;
            Ok(final_error(&fit).expect("truth was supplied"))
        })
        .collect::<Result<_>>()?;

    let mut w = create(&args.out)?;
    writeln!(w, "schedule,a,b,seed,final_error,mean_error")?;
    let per_cell = args.seeds.len();
    let mut best: Option<(usize, f64)> = None;
    for (c, schedule) in cells.iter().enumerate() {
        let slice = &errors[c * per_cell..(c + 1) * per_cell];
        let mean = slice.iter().sum::<f64>() / per_cell as f64;
        if best.is_none_or(|(_, m)| mean < m) {
            best = Some((c, mean));
        }
        for (seed, e) in args.seeds.iter().zip(slice) {
            writeln!(
                w,
                "{},{},{},{seed},{},{}",
                schedule.kind(),
                schedule.a(),
                schedule.b(),
                format_sig17(*e),
                format_sig17(mean)
            )?;
        }
    }
    w.flush()?;
    let (c, mean) = best.expect("grid is non-empty");
    writeln!(out, "cells={} runs={}", cells.len(), runs.len())?;
    writeln!(out, "best a={} b={} mean_error={}", cells[c].a(), cells[c].b(), format_error_rate(mean))?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let instance = gen_instance(&SynthConfig {
        workers: args.m,
        items: args.n,
        classes: args.k,
        accuracy_lo: args.acc_lo,
        accuracy_hi: args.acc_hi,
        labels_per_item: args.labels_per_item,
        seed: args.seed,
    })?;
    instance.write_to_dir(&args.out_dir)?;
    writeln!(
        out,
        "wrote {} labels for {} items from {} workers to {}",
        instance.labels.observations().len(),
        instance.labels.num_items(),
        instance.labels.num_workers(),
        args.out_dir.display()
    )?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let confusion = load_checkpoint(open(&args.model)?)?;
    let (labels, truth) = load_data(&args.data.labels, args.data.truth.as_deref(), args.data.classes)?;
    if confusion.workers() != labels.num_workers() || confusion.classes() != labels.num_classes() {
        return Err(Error::InvalidTensor(format!(
            "model is {}x{k}x{k} but the labels have {} workers and {} classes",
            confusion.workers(),
            labels.num_workers(),
            labels.num_classes(),
            k = confusion.classes()
        )));
    }
    let ll = marginal_log_likelihood(&confusion, &labels);
    let stats = batch_statistic(confusion.cube(), &labels);
    let residual = fixed_point_residual(&stats, &labels);
    let gap = stationarity_gap(&confusion, &labels, args.h)?;
    writeln!(out, "loglik={}", format_sig17(ll))?;
    writeln!(out, "residual_inf={}", format_sig17(residual.max_abs))?;
    writeln!(out, "residual_fro={}", format_sig17(residual.frobenius))?;
    writeln!(out, "stationarity_gap={}", format_sig17(gap))?;
    let predicted = predict(&posterior_all(&confusion, &labels));
    report_error(out, &predicted, truth.as_ref())
}
