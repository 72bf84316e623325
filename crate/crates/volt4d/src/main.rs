//! Command-line entry point: dataset generation, training, evaluation,
//! inference benchmarking, gradient checking, and the full comparison study.
//!
//! Settings resolve in three layers: command-line flags override the config
//! file (`--config`, key=value lines under `[section]` headers), which
//! overrides built-in defaults. Every run echoes the values it actually used
//! to `<out>/effective-config.txt` in the same format, so re-running with
//! `--config <that file>` reproduces the run.
//!
//! Exit codes: 0 success, 1 runtime failure (one-line `error: ...` on
//! stderr), 2 usage errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use volt4d::error::{Error, Result};
use volt4d::harness::{
    benchmark_inference, evaluate, full_gradcheck_suite, run_study, train, EvalReport,
    StudyConfig, TrainConfig,
};
use volt4d::layers::adam::AdamHyper;
use volt4d::layers::checkpoint::{apply_checkpoint, load_checkpoint};
use volt4d::synthgen::{build_dataset, read_dataset, DatasetConfig, Split, TRAJECTORY_SAMPLES};
use volt4d::zoo::{build_model, ArchId, ModelConfig};

#[derive(Parser)]
#[command(
    name = "volt4d",
    version,
    about = "4D spatio-temporal networks for volumetric motion estimation and forecasting"
)]
struct Cli {
    /// Config file with key=value lines under [section] headers; flags
    /// override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for all artifacts, including the echoed effective config
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads, 0 = all cores (fallback: VOLT4D_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print progress while running
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic volumetric dataset into the output directory
    GenData {
        #[arg(long)]
        rois: Option<u32>,
        #[arg(long)]
        trajectories: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        volume_size: Option<usize>,
        #[arg(long)]
        val_rois: Option<u32>,
        #[arg(long)]
        test_rois: Option<u32>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Train one architecture on a generated dataset
    Train {
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        patience: Option<usize>,
    },
    /// Evaluate a checkpoint on a dataset split
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
    },
    /// Time single-sequence inference for one architecture
    Bench {
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        volume_size: Option<usize>,
        #[arg(long)]
        sequence_length: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference gradient checks for every layer and architecture
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate all five architectures over several seeds
    Study {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Comma-separated training seeds, e.g. 1,2,3
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
// config file handling

#[derive(Debug, Default)]
struct FileConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn parse_config_text(path: &Path, text: &str) -> Result<FileConfig> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = inner.trim();
            if name.is_empty() {
                return Err(Error::format(path, format!("line {lineno}: empty section name")));
            }
            sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
        } else if let Some((key, value)) = line.split_once('=') {
            let Some(section) = &current else {
                return Err(Error::format(
                    path,
                    format!("line {lineno}: key before any [section] header"),
                ));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::format(path, format!("line {lineno}: empty key")));
            }
            let map = sections.get_mut(section).expect("section registered");
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::format(
                    path,
                    format!("line {lineno}: duplicate key '{key}' in [{section}]"),
                ));
            }
        } else {
            return Err(Error::format(
                path,
                format!("line {lineno}: expected key=value or [section]"),
            ));
        }
    }
    Ok(FileConfig { sections })
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_config_text(p, &text)
        }
    }
}

/// One subcommand's view of the config file. Tracks which keys were read so
/// leftovers (typos) are rejected.
struct Scope {
    section: String,
    keys: BTreeMap<String, String>,
}

impl Scope {
    fn new(section: &str, file: &FileConfig) -> Scope {
        Scope {
            section: section.to_string(),
            keys: file.sections.get(section).cloned().unwrap_or_default(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.keys.remove(key)
    }

    fn parse_value<T: FromStr>(&self, key: &str, value: &str) -> Result<T>
    where
        T::Err: Display,
    {
        value.parse().map_err(|e| {
            Error::Config(format!("[{}].{key}: bad value '{value}': {e}", self.section))
        })
    }

    /// Flag beats config file beats default.
    fn get<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let file_value = self.raw(key);
        if let Some(v) = flag {
            return Ok(v);
        }
        match file_value {
            Some(v) => self.parse_value(key, &v),
            None => Ok(default),
        }
    }

    /// Like `get` without a default; an empty file value means unset.
    fn get_opt<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let file_value = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match file_value.as_deref() {
            None | Some("") => Ok(None),
            Some(v) => self.parse_value(key, v).map(Some),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        self.get_opt(key, flag)?.ok_or_else(|| {
            Error::Config(format!(
                "missing --{} (or [{}].{key} in the config file)",
                key.replace('_', "-"),
                self.section
            ))
        })
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.keys.into_keys().next() {
            return Err(Error::Config(format!(
                "unknown key '{key}' in [{}]",
                self.section
            )));
        }
        Ok(())
    }
}

fn render_effective_config(
    out: &Path,
    threads: usize,
    section: &str,
    pairs: &[(&str, String)],
) -> String {
    let mut text = String::from("[run]\n");
    text.push_str(&format!("out={}\n", out.display()));
    text.push_str(&format!("threads={threads}\n"));
    text.push_str(&format!("\n[{section}]\n"));
    for (key, value) in pairs {
        text.push_str(&format!("{key}={value}\n"));
    }
    text
}

fn write_effective_config(
    out: &Path,
    threads: usize,
    section: &str,
    pairs: &[(&str, String)],
) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("effective-config.txt");
    std::fs::write(&path, render_effective_config(out, threads, section, pairs))
        .map_err(|e| Error::io(&path, e))
}

fn opt_string<T: Display>(value: &Option<T>) -> String {
    value.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// dispatch

struct Context {
    out: PathBuf,
    threads: usize,
    verbose: bool,
}

fn run(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_ref())?;
    let mut run_scope = Scope::new("run", &file);
    let out = run_scope.get("out", cli.out, PathBuf::from("volt4d-out"))?;

    let env_threads = match std::env::var("VOLT4D_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| {
            Error::Config(format!("VOLT4D_THREADS must be an integer, got '{v}'"))
        })?),
        Err(_) => None,
    };
    let threads = run_scope.get("threads", cli.threads.or(env_threads), 0usize)?;
    run_scope.finish()?;

    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    let ctx = Context {
        out,
        threads,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::GenData {
            rois,
            trajectories,
            seed,
            volume_size,
            val_rois,
            test_rois,
            noise_sigma,
        } => cmd_gen_data(
            &ctx, &file, rois, trajectories, seed, volume_size, val_rois, test_rois, noise_sigma,
        ),
        Command::Train {
            arch,
            dataset,
            epochs,
            batch_size,
            learning_rate,
            seed,
            patience,
        } => cmd_train(
            &ctx, &file, arch, dataset, epochs, batch_size, learning_rate, seed, patience,
        ),
        Command::Eval {
            checkpoint,
            dataset,
            split,
        } => cmd_eval(&ctx, &file, checkpoint, dataset, split),
        Command::Bench {
            arch,
            warmup,
            runs,
            volume_size,
            sequence_length,
            seed,
        } => cmd_bench(&ctx, &file, arch, warmup, runs, volume_size, sequence_length, seed),
        Command::Gradcheck { seed } => cmd_gradcheck(&ctx, &file, seed),
        Command::Study {
            dataset,
            seeds,
            epochs,
            batch_size,
            learning_rate,
            patience,
        } => cmd_study(&ctx, &file, dataset, seeds, epochs, batch_size, learning_rate, patience),
    }
}

// ---------------------------------------------------------------------------
// subcommands

#[allow(clippy::too_many_arguments)]
fn cmd_gen_data(
    ctx: &Context,
    file: &FileConfig,
    rois: Option<u32>,
    trajectories: Option<u32>,
    seed: Option<u64>,
    volume_size: Option<usize>,
    val_rois: Option<u32>,
    test_rois: Option<u32>,
    noise_sigma: Option<f64>,
) -> Result<()> {
    let mut scope = Scope::new("gen-data", file);
    let cfg = DatasetConfig {
        rois: scope.get("rois", rois, 16)?,
        trajectories_per_roi: scope.get("trajectories", trajectories, 25)?,
        volume_size: scope.get("volume_size", volume_size, 12)?,
        sequence_length: TRAJECTORY_SAMPLES - 2,
        val_rois: scope.get("val_rois", val_rois, 2)?,
        test_rois: scope.get("test_rois", test_rois, 2)?,
        noise_sigma: scope.get("noise_sigma", noise_sigma, 0.02)?,
        master_seed: scope.get("seed", seed, 1)?,
    };
    scope.finish()?;

    let manifest = build_dataset(&cfg, &ctx.out)?;
    write_effective_config(
        &ctx.out,
        ctx.threads,
        "gen-data",
        &[
            ("rois", cfg.rois.to_string()),
            ("trajectories", cfg.trajectories_per_roi.to_string()),
            ("volume_size", cfg.volume_size.to_string()),
            ("val_rois", cfg.val_rois.to_string()),
            ("test_rois", cfg.test_rois.to_string()),
            ("noise_sigma", cfg.noise_sigma.to_string()),
            ("seed", cfg.master_seed.to_string()),
        ],
    )?;
    println!(
        "dataset: {} samples ({} train / {} val / {} test ROIs) at {}^3 in {}",
        manifest.total_samples(),
        manifest.train.len(),
        manifest.val.len(),
        manifest.test.len(),
        manifest.volume_size,
        ctx.out.display()
    );
    Ok(())
}

/// Model dimensions follow the dataset; everything else stays at the
/// standard configuration.
fn model_config_for(manifest_volume: usize, manifest_t: usize) -> ModelConfig {
    ModelConfig {
        volume_size: manifest_volume,
        sequence_length: manifest_t,
        ..ModelConfig::desk()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    ctx: &Context,
    file: &FileConfig,
    arch: Option<String>,
    dataset: Option<PathBuf>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    patience: Option<usize>,
) -> Result<()> {
    let mut scope = Scope::new("train", file);
    let arch = ArchId::parse(&scope.require::<String>("arch", arch)?)?;
    let dataset_dir = scope.require::<PathBuf>("dataset", dataset)?;
    let epochs = scope.get("epochs", epochs, 400)?;
    let batch_size = scope.get("batch_size", batch_size, 8)?;
    let learning_rate = scope.get("learning_rate", learning_rate, 1e-3)?;
    let seed = scope.get("seed", seed, 1)?;
    let patience = scope.get_opt("patience", patience)?;
    scope.finish()?;

    let ds = read_dataset(&dataset_dir)?;
    let manifest = ds.manifest();
    let model_cfg = model_config_for(manifest.volume_size, manifest.sequence_length);
    let train_set = ds.load_split(Split::Train)?;
    let val_set = ds.load_split(Split::Val)?;

    let cfg = TrainConfig {
        arch,
        model: model_cfg.clone(),
        epochs,
        batch_size,
        adam: AdamHyper {
            learning_rate,
            ..AdamHyper::default()
        },
        master_seed: seed,
        patience,
        out_dir: Some(ctx.out.clone()),
        verbose: ctx.verbose,
    };
    write_effective_config(
        &ctx.out,
        ctx.threads,
        "train",
        &[
            ("arch", arch.name().to_string()),
            ("dataset", dataset_dir.display().to_string()),
            ("epochs", epochs.to_string()),
            ("batch_size", batch_size.to_string()),
            ("learning_rate", learning_rate.to_string()),
            ("seed", seed.to_string()),
            ("patience", opt_string(&patience)),
        ],
    )?;

    let mut model = build_model(arch, &model_cfg, seed)?;
    let history = train(&mut model, &train_set, &val_set, &cfg)?;

    let mut csv = String::from("epoch,train_loss,val_mae,wall_seconds\n");
    for (i, e) in history.epochs.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", e.train_loss, e.val_mae, e.wall_seconds));
    }
    let history_path = ctx.out.join("history.csv");
    std::fs::write(&history_path, csv).map_err(|e| Error::io(&history_path, e))?;

    let last = history.last().expect("at least one epoch");
    println!(
        "trained {arch} for {} epochs: train_loss={:.6} val_mae={:.6}",
        history.epochs.len(),
        last.train_loss,
        last.val_mae
    );
    if let Some(best) = history.best_val_epoch() {
        println!(
            "best val_mae={:.6} at epoch {best} -> {}",
            history.epochs[best].val_mae,
            ctx.out.join("best.ckpt").display()
        );
    }
    println!("final checkpoint -> {}", ctx.out.join("final.ckpt").display());
    Ok(())
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!(
            "split must be train, val, or test, got '{other}'"
        ))),
    }
}

fn print_eval_report(report: &EvalReport) {
    println!(
        "{}: {} samples, aCC {:.1}%",
        report.arch, report.samples, report.acc_percent
    );
    for (name, m) in [
        ("MAE ds_now  ", report.mae[0]),
        ("MAE ds_plus1", report.mae[1]),
        ("MAE ds_plus2", report.mae[2]),
    ] {
        println!("  {name} {:.4} \u{b1} {:.4} mm", m.mean, m.std);
    }
    println!(
        "  inference   {:.2} \u{b1} {:.2} ms",
        report.inference_ms.mean, report.inference_ms.std
    );
    if !report.skipped_components.is_empty() {
        println!(
            "  note: components {:?} skipped in aCC (zero variance)",
            report.skipped_components
        );
    }
}

fn eval_csv(report: &EvalReport) -> String {
    let mut csv = String::from(
        "arch,seed,mae_now_mean_mm,mae_now_std_mm,mae_plus1_mean_mm,mae_plus1_std_mm,\
mae_plus2_mean_mm,mae_plus2_std_mm,acc_percent,inference_ms_mean,inference_ms_std,samples\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}\n",
        report.arch,
        report.model_seed,
        report.mae[0].mean,
        report.mae[0].std,
        report.mae[1].mean,
        report.mae[1].std,
        report.mae[2].mean,
        report.mae[2].std,
        report.acc_percent,
        report.inference_ms.mean,
        report.inference_ms.std,
        report.samples
    ));
    csv
}

fn cmd_eval(
    ctx: &Context,
    file: &FileConfig,
    checkpoint: Option<PathBuf>,
    dataset: Option<PathBuf>,
    split: Option<String>,
) -> Result<()> {
    let mut scope = Scope::new("eval", file);
    let checkpoint_path = scope.require::<PathBuf>("checkpoint", checkpoint)?;
    let dataset_dir = scope.require::<PathBuf>("dataset", dataset)?;
    let split_name = scope.get("split", split, "test".to_string())?;
    scope.finish()?;
    let split = parse_split(&split_name)?;

    let loaded = load_checkpoint(&checkpoint_path)?;
    let arch = ArchId::parse(&loaded.meta.arch)?;
    let ds = read_dataset(&dataset_dir)?;
    let manifest = ds.manifest();
    let model_cfg = model_config_for(manifest.volume_size, manifest.sequence_length);
    let mut model = build_model(arch, &model_cfg, loaded.meta.seed)?;
    apply_checkpoint(&mut model.store, &loaded)?;

    let samples = ds.load_split(split)?;
    let report = evaluate(&model, &samples, manifest.master_seed)?;

    write_effective_config(
        &ctx.out,
        ctx.threads,
        "eval",
        &[
            ("checkpoint", checkpoint_path.display().to_string()),
            ("dataset", dataset_dir.display().to_string()),
            ("split", split_name.clone()),
        ],
    )?;
    let csv_path = ctx.out.join("eval.csv");
    std::fs::write(&csv_path, eval_csv(&report)).map_err(|e| Error::io(&csv_path, e))?;
    print_eval_report(&report);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    ctx: &Context,
    file: &FileConfig,
    arch: Option<String>,
    warmup: Option<usize>,
    runs: Option<usize>,
    volume_size: Option<usize>,
    sequence_length: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let mut scope = Scope::new("bench", file);
    let arch = ArchId::parse(&scope.require::<String>("arch", arch)?)?;
    let warmup = scope.get("warmup", warmup, 5)?;
    let runs = scope.get("runs", runs, 50)?;
    let volume_size = scope.get("volume_size", volume_size, 12)?;
    let sequence_length = scope.get("sequence_length", sequence_length, 5)?;
    let seed = scope.get("seed", seed, 1)?;
    scope.finish()?;

    let model_cfg = model_config_for(volume_size, sequence_length);
    let model = build_model(arch, &model_cfg, seed)?;
    let report = benchmark_inference(&model, warmup, runs)?;

    write_effective_config(
        &ctx.out,
        ctx.threads,
        "bench",
        &[
            ("arch", arch.name().to_string()),
            ("warmup", warmup.to_string()),
            ("runs", runs.to_string()),
            ("volume_size", volume_size.to_string()),
            ("sequence_length", sequence_length.to_string()),
            ("seed", seed.to_string()),
        ],
    )?;
    let csv_path = ctx.out.join("bench.csv");
    let csv = format!(
        "arch,runs,warmup,ms_mean,ms_std,hz,parallel_hz\n{},{},{},{},{},{},{}\n",
        arch, runs, warmup, report.ms.mean, report.ms.std, report.hz, report.parallel_hz
    );
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    println!(
        "{arch}: {:.2} \u{b1} {:.2} ms per sequence ({} runs), {:.1} Hz sequential, {:.1} Hz parallel",
        report.ms.mean, report.ms.std, runs, report.hz, report.parallel_hz
    );
    println!(
        "model: {} parameters at {}^3, T={}",
        model.count_parameters(),
        volume_size,
        sequence_length
    );
    Ok(())
}

fn cmd_gradcheck(ctx: &Context, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let mut scope = Scope::new("gradcheck", file);
    let seed = scope.get("seed", seed, 3)?;
    scope.finish()?;

    write_effective_config(
        &ctx.out,
        ctx.threads,
        "gradcheck",
        &[("seed", seed.to_string())],
    )?;

    let outcomes = full_gradcheck_suite(seed)?;
    println!("{:<16}{:<14}status", "check", "max_rel_err");
    let mut failures = 0;
    for outcome in &outcomes {
        println!(
            "{:<16}{:<14.2e}{}",
            outcome.name,
            outcome.max_rel_err,
            if outcome.passed { "pass" } else { "FAIL" }
        );
        if !outcome.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::Config(format!("{failures} gradient checks failed")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_study(
    ctx: &Context,
    file: &FileConfig,
    dataset: Option<PathBuf>,
    seeds: Option<String>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    patience: Option<usize>,
) -> Result<()> {
    let mut scope = Scope::new("study", file);
    let dataset_dir = scope.require::<PathBuf>("dataset", dataset)?;
    let seeds_text = scope.get("seeds", seeds, "1,2,3".to_string())?;
    let epochs = scope.get("epochs", epochs, 30)?;
    let batch_size = scope.get("batch_size", batch_size, 8)?;
    let learning_rate = scope.get("learning_rate", learning_rate, 1e-3)?;
    let patience = scope.get_opt("patience", patience)?;
    scope.finish()?;

    let seed_list: Vec<u64> = seeds_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed '{s}' in --seeds")))
        })
        .collect::<Result<_>>()?;

    let ds = read_dataset(&dataset_dir)?;
    let manifest = ds.manifest();
    let mut cfg = StudyConfig::new(dataset_dir.clone(), ctx.out.clone());
    cfg.seeds = seed_list;
    cfg.model = model_config_for(manifest.volume_size, manifest.sequence_length);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.adam = AdamHyper {
        learning_rate,
        ..AdamHyper::default()
    };
    cfg.patience = patience;
    cfg.verbose = ctx.verbose;

    write_effective_config(
        &ctx.out,
        ctx.threads,
        "study",
        &[
            ("dataset", dataset_dir.display().to_string()),
            ("seeds", seeds_text.clone()),
            ("epochs", epochs.to_string()),
            ("batch_size", batch_size.to_string()),
            ("learning_rate", learning_rate.to_string()),
            ("patience", opt_string(&patience)),
        ],
    )?;

    let outcome = run_study(&cfg)?;
    print!("{}", outcome.table);
    println!("\nreport -> {}", outcome.report_csv.display());
    for row in &outcome.rows {
        for (seed, message) in &row.failures {
            eprintln!("warning: {} seed {seed} failed: {message}", row.arch);
        }
    }
    Ok(())
}
