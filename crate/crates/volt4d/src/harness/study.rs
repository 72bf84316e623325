//! The five-architecture study: train and evaluate each architecture over
//! several seeds, aggregate, and emit CSV reports plus a text table.
//!
//! Output layout under `out_dir`:
//!   report.csv   one aggregate row per architecture (seed means)
//!   runs.csv     one row per architecture x seed evaluation
//!   history.csv  one row per architecture x seed x epoch
//!   table.txt    the rendered text table (also returned in the outcome)
//!   <arch>/seed<k>/{best,final}.ckpt per-run checkpoints
//!
//! The text table is rendered from a re-read of report.csv, so the file and
//! the printed numbers cannot drift apart. CSV fields never contain commas;
//! failure messages are sanitized before writing.

use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::layers::adam::AdamHyper;
use crate::layers::checkpoint::{apply_checkpoint, load_checkpoint};
use crate::synthgen::{read_dataset, Sample, Split};
use crate::zoo::{build_model, ArchId, ModelConfig};

use super::eval::{evaluate, EvalReport};
use super::train::{train, History, TrainConfig};

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub archs: Vec<ArchId>,
    pub seeds: Vec<u64>,
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub patience: Option<usize>,
    /// Print per-run and per-epoch progress to stderr.
    pub verbose: bool,
}

impl StudyConfig {
    pub fn new(dataset_dir: PathBuf, out_dir: PathBuf) -> Self {
        StudyConfig {
            dataset_dir,
            out_dir,
            archs: ArchId::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            model: ModelConfig::desk(),
            epochs: 30,
            batch_size: 8,
            adam: AdamHyper::default(),
            patience: None,
            verbose: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.archs.is_empty() {
            return Err(Error::Config("study needs at least one architecture".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("study needs at least one seed".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        self.model.validate()
    }
}

/// Results for one architecture across all requested seeds.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub arch: ArchId,
    /// Successful runs, one per seed that finished.
    pub runs: Vec<(u64, EvalReport)>,
    /// Seeds that failed, with the error message.
    pub failures: Vec<(u64, String)>,
}

impl StudyRow {
    /// True when no seed produced a result.
    pub fn failed(&self) -> bool {
        self.runs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub table: String,
    pub report_csv: PathBuf,
    pub runs_csv: PathBuf,
    pub history_csv: PathBuf,
}

const REPORT_HEADER: &str = "arch,seeds_used,mae_now_mean_mm,mae_now_std_mm,\
mae_plus1_mean_mm,mae_plus1_std_mm,mae_plus2_mean_mm,mae_plus2_std_mm,\
acc_percent,inference_ms_mean,inference_ms_std,status";

const RUNS_HEADER: &str = "arch,seed,mae_now_mean_mm,mae_now_std_mm,\
mae_plus1_mean_mm,mae_plus1_std_mm,mae_plus2_mean_mm,mae_plus2_std_mm,\
acc_percent,inference_ms_mean,inference_ms_std,samples";

const HISTORY_HEADER: &str = "arch,seed,epoch,train_loss,val_mae,wall_seconds";

/// Run every architecture over every seed, write the report files, and
/// return the rows plus the rendered table. A failing run is recorded and
/// skipped; the study only errors on problems outside individual runs (a
/// missing dataset, unwritable output directory, or invalid configuration).
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let dataset = read_dataset(&cfg.dataset_dir)?;
    let data_seed = dataset.manifest().master_seed;
    let train_set = dataset.load_split(Split::Train)?;
    let val_set = dataset.load_split(Split::Val)?;
    let test_set = dataset.load_split(Split::Test)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let mut rows = Vec::with_capacity(cfg.archs.len());
    let mut histories: Vec<(ArchId, u64, History)> = Vec::new();
    for &arch in &cfg.archs {
        let mut row = StudyRow {
            arch,
            runs: Vec::new(),
            failures: Vec::new(),
        };
        for &seed in &cfg.seeds {
            if cfg.verbose {
                eprintln!("study: training {arch} seed {seed}");
            }
            match run_one(cfg, arch, seed, &train_set, &val_set, &test_set, data_seed) {
                Ok((report, history)) => {
                    row.runs.push((seed, report));
                    histories.push((arch, seed, history));
                }
                Err(e) => {
                    if cfg.verbose {
                        eprintln!("study: {arch} seed {seed} failed: {e}");
                    }
                    row.failures.push((seed, e.to_string()));
                }
            }
        }
        rows.push(row);
    }

    let report_csv = cfg.out_dir.join("report.csv");
    let runs_csv = cfg.out_dir.join("runs.csv");
    let history_csv = cfg.out_dir.join("history.csv");
    write_text(&report_csv, &render_report_csv(&rows))?;
    write_text(&runs_csv, &render_runs_csv(&rows))?;
    write_text(&history_csv, &render_history_csv(&histories))?;

    let reread = fs::read_to_string(&report_csv).map_err(|e| Error::io(&report_csv, e))?;
    let table = render_table(&parse_report_csv(&report_csv, &reread)?);
    write_text(&cfg.out_dir.join("table.txt"), &table)?;

    Ok(StudyOutcome {
        rows,
        table,
        report_csv,
        runs_csv,
        history_csv,
    })
}

fn run_one(
    cfg: &StudyConfig,
    arch: ArchId,
    seed: u64,
    train_set: &[Sample],
    val_set: &[Sample],
    test_set: &[Sample],
    data_seed: u64,
) -> Result<(EvalReport, History)> {
    let run_dir = cfg.out_dir.join(arch.name()).join(format!("seed{seed}"));
    let train_cfg = TrainConfig {
        arch,
        model: cfg.model.clone(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: cfg.adam,
        master_seed: seed,
        patience: cfg.patience,
        out_dir: Some(run_dir.clone()),
        verbose: cfg.verbose,
    };
    let mut model = build_model(arch, &cfg.model, seed)?;
    let history = train(&mut model, train_set, val_set, &train_cfg)?;

    let best = run_dir.join("best.ckpt");
    let chosen = if best.exists() {
        best
    } else {
        run_dir.join("final.ckpt")
    };
    let loaded = load_checkpoint(&chosen)?;
    apply_checkpoint(&mut model.store, &loaded)?;

    let report = evaluate(&model, test_set, data_seed)?;
    Ok((report, history))
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sanitize(message: &str) -> String {
    message.replace([',', '\n'], ";")
}

/// The nine numeric report columns, in file order.
fn metric_columns(report: &EvalReport) -> [f64; 9] {
    [
        report.mae[0].mean,
        report.mae[0].std,
        report.mae[1].mean,
        report.mae[1].std,
        report.mae[2].mean,
        report.mae[2].std,
        report.acc_percent,
        report.inference_ms.mean,
        report.inference_ms.std,
    ]
}

fn seed_means(row: &StudyRow) -> [f64; 9] {
    let mut sums = [0.0; 9];
    for (_, report) in &row.runs {
        for (s, v) in sums.iter_mut().zip(metric_columns(report)) {
            *s += v;
        }
    }
    let inv = 1.0 / row.runs.len() as f64;
    sums.map(|s| s * inv)
}

fn render_report_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        if row.failed() {
            let reasons: Vec<String> = row
                .failures
                .iter()
                .map(|(seed, msg)| format!("seed {seed}: {}", sanitize(msg)))
                .collect();
            out.push_str(&format!(
                "{},0,,,,,,,,,,failed: {}\n",
                row.arch,
                reasons.join("; ")
            ));
        } else {
            let means = seed_means(row);
            let values: Vec<String> = means.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},ok\n",
                row.arch,
                row.runs.len(),
                values.join(",")
            ));
        }
    }
    out
}

fn render_runs_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for row in rows {
        for (seed, report) in &row.runs {
            let values: Vec<String> = metric_columns(report)
                .iter()
                .map(|v| v.to_string())
                .collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.arch,
                seed,
                values.join(","),
                report.samples
            ));
        }
    }
    out
}

fn render_history_csv(histories: &[(ArchId, u64, History)]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for (arch, seed, history) in histories {
        for (epoch, record) in history.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{arch},{seed},{epoch},{},{},{}\n",
                record.train_loss, record.val_mae, record.wall_seconds
            ));
        }
    }
    out
}

struct ReportLine {
    arch: String,
    metrics: Option<[f64; 9]>,
    status: String,
}

fn parse_report_csv(path: &std::path::Path, text: &str) -> Result<Vec<ReportLine>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == REPORT_HEADER => {}
        _ => return Err(Error::format(path, "missing report header")),
    }
    let mut parsed = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::format(path, format!("expected 12 fields: {line}")));
        }
        let status = fields[11].to_string();
        let metrics = if status == "ok" {
            let mut values = [0.0; 9];
            for (v, field) in values.iter_mut().zip(&fields[2..11]) {
                *v = field
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad number: {field}")))?;
            }
            Some(values)
        } else {
            None
        };
        parsed.push(ReportLine {
            arch: fields[0].to_string(),
            metrics,
            status,
        });
    }
    Ok(parsed)
}

fn render_table(lines: &[ReportLine]) -> String {
    let mut out = format!(
        "{:<14}{:<19}{:<19}{:<19}{:<9}{}\n",
        "model", "MAE ds_now (mm)", "MAE ds_plus1 (mm)", "MAE ds_plus2 (mm)", "aCC (%)", "inference (ms)"
    );
    for line in lines {
        match line.metrics {
            Some(m) => out.push_str(&format!(
                "{:<14}{:<19}{:<19}{:<19}{:<9}{}\n",
                line.arch,
                format!("{:.3} \u{b1} {:.3}", m[0], m[1]),
                format!("{:.3} \u{b1} {:.3}", m[2], m[3]),
                format!("{:.3} \u{b1} {:.3}", m[4], m[5]),
                format!("{:.1}", m[6]),
                format!("{:.2} \u{b1} {:.2}", m[7], m[8]),
            )),
            None => out.push_str(&format!("{:<14}{}\n", line.arch, line.status)),
        }
    }
    out
}
