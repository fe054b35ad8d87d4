//! Command-line front end: `estimate`, `validate`, `simulate` and `suite`.
//!
//! Every JSON file carries a `provenance` block with the tool version, a
//! SHA-256 hash of the effective configuration (including input file
//! contents), and the seed. CSV files use `.` decimals and LF line endings.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{OutputFormat, Reference, RunConfig};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind, EstimatorSpec, TrimSpec};
use crate::evaluation::backdate;
use crate::io::{read_covariates_csv, read_panel_csv, write_csv, write_json};
use crate::montecarlo::{run_cell, run_replication, SimulationSummary};
use crate::panel::{Covariates, Panel, PredictorSpec, PredictorWeighting};

#[derive(Debug, Parser)]
#[command(name = "synthcontrol", version, about = "Synthetic control estimation and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a synthetic control to a panel CSV.
    Estimate(EstimateArgs),
    /// Refit with a backdated treatment date and report hold-out error.
    Validate(ValidateArgs),
    /// Run the cells of a simulation config.
    Simulate(SimulateArgs),
    /// Run the built-in reference suite and compare against published values.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Standard,
    Shift,
    Unrestricted,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(a: EstimatorArg) -> Self {
        match a {
            EstimatorArg::Standard => EstimatorKind::Standard,
            EstimatorArg::Shift => EstimatorKind::ConstantShift,
            EstimatorArg::Unrestricted => EstimatorKind::Unrestricted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    InverseVariance,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Wide panel CSV: `unit,t1,...,tT`.
    pub panel: PathBuf,
    /// Number of pre-treatment periods.
    #[arg(long)]
    pub t0: usize,
    /// Id of the treated unit (default: first data row).
    #[arg(long)]
    pub treated: Option<String>,
    /// Covariate CSV: `unit,<name>,...`.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standard")]
    pub estimator: EstimatorArg,
    /// Keep only the N donors closest to the treated unit.
    #[arg(long, value_name = "N")]
    pub trim_keep: Option<usize>,
    /// Predictor importance weights.
    #[arg(long, value_enum, default_value = "inverse-variance")]
    pub weighting: WeightingArg,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output formats (repeat or comma-separate).
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv", "json"])]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Backdated last pre-treatment period (must be below --t0).
    #[arg(long, value_name = "T0B")]
    pub backdate: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Replications per cell (overrides the config).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory (default: the config's `output.dir`, else `.`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<FormatArg>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run config.
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Run this config instead of the built-in suite.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only run cells whose label contains this text.
    #[arg(long)]
    pub filter: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Simulate(a) => {
            let config = RunConfig::load(&a.config)?;
            cmd_simulate(config, &a.run, false)
        }
        Command::Suite(a) => {
            let mut config = match &a.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::table_a1(),
            };
            if let Some(f) = &a.filter {
                config.cells.retain(|c| c.label.contains(f.as_str()));
                if config.cells.is_empty() {
                    return Err(Error::Config(format!("no cell label contains `{f}`")));
                }
            }
            cmd_simulate(config, &a.run, true)
        }
    }
}

#[derive(Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_sha256: String,
    seed: Option<u64>,
}

impl Provenance {
    fn new(command: &'static str, config_sha256: String, seed: Option<u64>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256,
            seed,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn formats(args: &[FormatArg]) -> (bool, bool) {
    (args.contains(&FormatArg::Csv), args.contains(&FormatArg::Json))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn estimator_spec(a: &PanelArgs) -> EstimatorSpec {
    let weighting = match a.weighting {
        WeightingArg::InverseVariance => PredictorWeighting::InverseVariance,
        WeightingArg::Unit => PredictorWeighting::Unit,
    };
    let predictors = PredictorSpec {
        weighting,
        ..PredictorSpec::default()
    };
    let mut spec = EstimatorSpec::new(a.estimator.into(), predictors);
    spec.trim = a.trim_keep.map(TrimSpec::KeepCount);
    spec
}

struct Loaded {
    panel: Panel,
    covariates: Option<Covariates>,
    spec: EstimatorSpec,
    hash: String,
}

fn load_panel(a: &PanelArgs, backdate: Option<usize>) -> Result<Loaded> {
    let panel = read_panel_csv(&a.panel, a.t0, a.treated.as_deref())?;
    let covariates = a
        .covariates
        .as_deref()
        .map(|p| read_covariates_csv(p, &panel))
        .transpose()?;
    let spec = estimator_spec(a);
    spec.validate()?;
    let cov_hash = a.covariates.as_deref().map(file_sha256).transpose()?;
    let canonical = json!({
        "panel_sha256": file_sha256(&a.panel)?,
        "covariates_sha256": cov_hash,
        "t0": a.t0,
        "treated": a.treated,
        "backdate": backdate,
        "estimator": spec,
    });
    let hash = sha256_hex(canonical.to_string().as_bytes());
    Ok(Loaded {
        panel,
        covariates,
        spec,
        hash,
    })
}

#[derive(Serialize)]
struct DonorWeight<'a> {
    /// 1-based position in the input panel order (treated unit is 1).
    unit: usize,
    id: &'a str,
    weight: f64,
}

fn donor_weights<'a>(panel: &'a Panel, donor_ids: &[usize], w: &[f64]) -> Vec<DonorWeight<'a>> {
    donor_ids
        .iter()
        .zip(w)
        .map(|(&id, &weight)| DonorWeight {
            unit: id + 1,
            id: &panel.unit_labels()[id],
            weight,
        })
        .collect()
}

fn period_names(panel: &Panel) -> Vec<String> {
    match panel.period_labels() {
        Some(l) => l.iter().map(i64::to_string).collect(),
        None => (1..=panel.n_periods()).map(|t| t.to_string()).collect(),
    }
}

fn write_weights_and_paths(
    dir: &Path,
    prefix: &str,
    panel: &Panel,
    weights: &[DonorWeight<'_>],
    counterfactual: &[f64],
    effect: &[f64],
) -> Result<()> {
    let rows: Vec<Vec<String>> = weights
        .iter()
        .map(|d| vec![d.unit.to_string(), d.id.to_string(), d.weight.to_string()])
        .collect();
    write_csv(&dir.join(format!("{prefix}weights.csv")), &["unit", "id", "weight"], &rows)?;
    let rows: Vec<Vec<String>> = period_names(panel)
        .into_iter()
        .enumerate()
        .map(|(t, p)| {
            vec![
                p,
                panel.treated()[t].to_string(),
                counterfactual[t].to_string(),
                effect[t].to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join(format!("{prefix}paths.csv")),
        &["period", "observed", "counterfactual", "effect"],
        &rows,
    )
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let a = &a.panel;
    let l = load_panel(a, None)?;
    let r = estimate(&l.panel, l.covariates.as_ref(), &l.spec)?;
    let weights = donor_weights(&l.panel, &r.donor_ids, &r.weights.w);
    let (csv, json) = formats(&a.format);
    ensure_dir(&a.out)?;
    if json {
        let doc = json!({
            "provenance": Provenance::new("estimate", l.hash.clone(), None),
            "estimator": l.spec.kind.to_string(),
            "t0": l.panel.t0(),
            "treated": l.panel.unit_labels()[0],
            "weights": weights,
            "intercept": r.weights.intercept,
            "pre_rmse": r.pre_rmse,
            "post_rmse": r.post_rmse,
            "periods": period_names(&l.panel),
            "observed": l.panel.treated(),
            "counterfactual": r.counterfactual,
            "effect": r.effect,
        });
        write_json(&a.out.join("estimate.json"), &doc)?;
    }
    if csv {
        write_weights_and_paths(&a.out, "", &l.panel, &weights, &r.counterfactual, &r.effect)?;
    }
    println!(
        "{} donors, pre-RMSE {:.4}, post-RMSE {:.4}",
        weights.iter().filter(|d| d.weight > 0.0).count(),
        r.pre_rmse,
        r.post_rmse
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let p = &a.panel;
    let l = load_panel(p, Some(a.backdate))?;
    let rep = backdate(&l.panel, l.covariates.as_ref(), &l.spec, a.backdate)?;
    let weights = donor_weights(&l.panel, &rep.donor_ids, &rep.weights_backdated.w);
    let (csv, json) = formats(&p.format);
    ensure_dir(&p.out)?;
    if json {
        let doc = json!({
            "provenance": Provenance::new("validate", l.hash.clone(), None),
            "estimator": l.spec.kind.to_string(),
            "t0": l.panel.t0(),
            "t0_backdated": rep.t0_backdated,
            "treated": l.panel.unit_labels()[0],
            "weights": weights,
            "intercept": rep.weights_backdated.intercept,
            "fit_rmse": rep.fit_rmse,
            "holdout_rmse": rep.holdout_rmse,
            "pre_rmse": rep.pre_rmse,
            "post_rmse": rep.post_rmse,
            "periods": period_names(&l.panel),
            "observed": l.panel.treated(),
            "counterfactual": rep.counterfactual,
            "effect": rep.effect_path,
        });
        write_json(&p.out.join("validation.json"), &doc)?;
    }
    if csv {
        write_weights_and_paths(&p.out, "validation_", &l.panel, &weights, &rep.counterfactual, &rep.effect_path)?;
    }
    println!(
        "fit RMSE {:.4}, hold-out RMSE {:.4}, post-RMSE {:.4}",
        rep.fit_rmse, rep.holdout_rmse, rep.post_rmse
    );
    Ok(())
}

#[derive(Serialize)]
struct CellReport<'a> {
    #[serde(flatten)]
    summary: &'a SimulationSummary,
    reference: Option<Reference>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

fn cmd_simulate(config: RunConfig, run: &RunArgs, compare: bool) -> Result<()> {
    let config = config.with_overrides(run.reps, run.seed);
    config.validate()?;
    let out = run
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let (csv, json) = match &run.format {
        Some(f) => formats(f),
        None => (
            config.output.formats.contains(&OutputFormat::Csv),
            config.output.formats.contains(&OutputFormat::Json),
        ),
    };
    ensure_dir(&out)?;
    let hash = config.hash();
    let cells = config.cell_specs();

    let mut summaries = Vec::with_capacity(cells.len());
    for (cell, cfg) in cells.iter().zip(&config.cells) {
        let s = run_cell(cell, run.jobs)?;
        if compare {
            print_comparison(&s, cfg.reference.as_ref());
        } else {
            println!(
                "{}: post-RMSE {:.3} ({:.3}), pre-RMSE {:.3}{}",
                s.label,
                s.post_rmse.mean,
                s.post_rmse.se,
                s.pre_rmse.mean,
                s.mean_w2().map(|w| format!(", W2 {w:.3}")).unwrap_or_default()
            );
        }
        summaries.push(s);
    }

    if csv {
        let header = [
            "label", "J", "T0", "sigma", "rho", "estimator", "replications", "failed", "post_rmse",
            "post_rmse_se", "pre_rmse", "pre_rmse_se", "w2", "w2_se", "ref_post_rmse", "ref_pre_rmse",
            "ref_w2",
        ];
        let rows: Vec<Vec<String>> = summaries
            .iter()
            .zip(&config.cells)
            .map(|(s, c)| {
                let r = c.reference.unwrap_or_default();
                vec![
                    s.label.clone(),
                    s.n_donors.to_string(),
                    s.t0.to_string(),
                    s.sigma.to_string(),
                    opt(s.rho),
                    s.estimator.clone(),
                    s.replications_completed.to_string(),
                    s.replications_failed.to_string(),
                    s.post_rmse.mean.to_string(),
                    s.post_rmse.se.to_string(),
                    s.pre_rmse.mean.to_string(),
                    s.pre_rmse.se.to_string(),
                    opt(s.w2.as_ref().map(|w| w.mean)),
                    opt(s.w2.as_ref().map(|w| w.se)),
                    opt(r.post_rmse),
                    opt(r.pre_rmse),
                    opt(r.w2),
                ]
            })
            .collect();
        write_csv(&out.join("summary.csv"), &header, &rows)?;

        let mut rows = Vec::new();
        for s in &summaries {
            for t in 0..s.error_mean.len() {
                rows.push(vec![
                    s.label.clone(),
                    (t + 1).to_string(),
                    s.error_mean[t].to_string(),
                    s.band_lo[t].to_string(),
                    s.band_hi[t].to_string(),
                ]);
            }
        }
        write_csv(&out.join("bands.csv"), &["label", "period", "error_mean", "band_lo", "band_hi"], &rows)?;
    }
    if json {
        let reports: Vec<CellReport> = summaries
            .iter()
            .zip(&config.cells)
            .map(|(summary, c)| CellReport {
                summary,
                reference: c.reference,
            })
            .collect();
        let doc = json!({
            "provenance": Provenance::new(if compare { "suite" } else { "simulate" }, hash, Some(config.seed)),
            "config": config,
            "cells": reports,
        });
        write_json(&out.join("summary.json"), &doc)?;
    }
    if cells.iter().all(|c| c.replications == 1) {
        write_single_draws(&out, &cells)?;
    }
    Ok(())
}

/// One path file per cell for single-draw runs.
fn write_single_draws(out: &Path, cells: &[crate::montecarlo::CellSpec]) -> Result<()> {
    for cell in cells {
        let r = run_replication(cell, 0)?;
        let untreated: Vec<f64> = r.counterfactual.iter().zip(&r.error_path).map(|(c, e)| c - e).collect();
        let rows: Vec<Vec<String>> = (0..r.observed.len())
            .map(|t| {
                vec![
                    (t + 1).to_string(),
                    r.observed[t].to_string(),
                    untreated[t].to_string(),
                    r.counterfactual[t].to_string(),
                    r.donor_average[t].to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.join(format!("path_{}.csv", slug(&cell.label))),
            &["period", "observed", "untreated", "synthetic", "donor_average"],
            &rows,
        )?;
    }
    Ok(())
}

fn print_comparison(s: &SimulationSummary, reference: Option<&Reference>) {
    let r = reference.copied().unwrap_or_default();
    let cmp = |ours: Option<f64>, theirs: Option<f64>| match (ours, theirs) {
        (Some(o), Some(t)) => format!("{o:>7.3} [{t:>6.3}]"),
        (Some(o), None) => format!("{o:>7.3} [  -   ]"),
        _ => format!("{:>7} [{:>6}]", "-", "-"),
    };
    println!(
        "{:<28} post {}  pre {}  W2 {}",
        s.label,
        cmp(Some(s.post_rmse.mean), r.post_rmse),
        cmp(Some(s.pre_rmse.mean), r.pre_rmse),
        cmp(s.mean_w2(), r.w2)
    );
}
