//! The `harmctl` command-line interface.
//!
//! Subcommands: `calibrate`, `tradeoff`, `risk`, `accuracy`, `fit-mnl`,
//! `simulate`, `verify-monotonicity`, `coverage`. Options come from a flat
//! JSON config file (`--config`), overridden by CLI flags; `HARMCTL_SEED`
//! serves as a seed fallback. Every run with an output directory writes a
//! `report.json` carrying the fully resolved configuration, the library
//! version, and the seed, so equal reports imply equal outputs.
//!
//! Exit codes: 0 ok, 1 config error, 2 infeasible calibration, 3 data error.
//! Errors are emitted as one-line JSON objects on stderr, never bare stack
//! traces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calibrate::{
    harm_controlling_set_cf, harm_controlling_set_interv, select_alpha_prime, ControlMode,
};
use crate::data::{
    join_dataset, load_human_predictions, load_scores, load_set_records, read_label_space,
    write_humans_csv, write_scores_csv, Dataset, SetPredictionRecord,
};
use crate::error::{Error, Result};
use crate::experiment::{
    coverage_and_size, run_tradeoff, verify_interventional_monotonicity, AlphaPrimePolicy,
    MonotonicityReport, TradeoffReport, TradeoffSpec,
};
use crate::mnl::{estimate_accuracy, fit_confusion, stratify_difficulty};
use crate::predictor::{
    saps_select_w, SapsConfig, SetPredictor, SAPS_LAMBDA_MAX, SAPS_LAMBDA_STEP, SAPS_W_GRID,
};
use crate::risk::{benefit_loss_curve, harm_curve};
use crate::scm::{
    benefit_loss_trial, coverage_trial, generate_world, interval_subset_trial, sandwich_report,
    SyntheticWorld, WorldConfig,
};

const DEFAULT_LAMBDA_STEP: f64 = 0.001;
const DEFAULT_CALIB_FRAC: f64 = 0.1;
const DEFAULT_REPETITIONS: usize = 50;
const DEFAULT_EPSILON: f64 = 1e-6;
const DEFAULT_MIN_CELL: usize = 5;

/// Flat run configuration. Unknown keys are rejected so config typos fail
/// loudly. CLI flags override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub predictor: Option<String>,
    pub saps_w: Option<f64>,
    pub saps_w_grid: Option<Vec<f64>>,
    pub lambda_max: Option<f64>,
    pub lambda_step: Option<f64>,
    pub lambda_grid: Option<String>,
    pub alpha: Option<f64>,
    pub mode: Option<String>,
    pub alpha_prime: Option<f64>,
    pub alpha_prime_policy: Option<String>,
    pub calib_frac: Option<f64>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
    pub scores: Option<PathBuf>,
    pub humans: Option<PathBuf>,
    pub sets: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub noise: Option<u32>,
    pub strict: Option<bool>,
    pub synthetic: Option<bool>,
    pub regime: Option<String>,
    pub n_instances: Option<usize>,
    pub n_experts: Option<usize>,
    pub n_calib: Option<usize>,
    pub n_test: Option<usize>,
    pub cuts: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub min_cell: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub world: Option<WorldConfig>,
}

#[derive(Debug, Args, Default, Clone)]
struct CommonArgs {
    /// JSON config file with flat keys; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Set predictor: threshold | saps.
    #[arg(long)]
    predictor: Option<String>,
    /// Fixed SAPS ranking weight; selected from the grid when absent.
    #[arg(long)]
    saps_w: Option<f64>,
    /// Candidate SAPS weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    saps_w_grid: Option<Vec<f64>>,
    /// Upper end of the SAPS lambda domain.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Grid step over the lambda domain.
    #[arg(long)]
    lambda_step: Option<f64>,
    /// Explicit grid as start:stop:step (overrides --lambda-step).
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Scores CSV (header instance_id,noise,<labels...>).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Humans CSV (header instance_id,participant_id,true_label,prediction).
    #[arg(long)]
    humans: Option<PathBuf>,
    /// Directory holding scores.csv and humans.csv (and sets.csv).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Keep only instances with this noise level.
    #[arg(long)]
    noise: Option<u32>,
    /// Check that score rows sum to 1 within 1e-3.
    #[arg(long)]
    strict: bool,
    /// Use a generated synthetic world instead of CSV data.
    #[arg(long)]
    synthetic: bool,
    /// Synthetic regime: cf | interv.
    #[arg(long)]
    regime: Option<String>,
    /// Synthetic world size.
    #[arg(long)]
    n_instances: Option<usize>,
    /// Experts per synthetic instance.
    #[arg(long)]
    n_experts: Option<usize>,
    /// Root seed (fallback: HARMCTL_SEED, then 0).
    #[arg(long, env = "HARMCTL_SEED")]
    seed: Option<u64>,
    /// Output directory; stdout-only commands skip report.json without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let c = self.clone();
        merge(&mut cfg.predictor, c.predictor);
        merge(&mut cfg.saps_w, c.saps_w);
        merge(&mut cfg.saps_w_grid, c.saps_w_grid);
        merge(&mut cfg.lambda_max, c.lambda_max);
        merge(&mut cfg.lambda_step, c.lambda_step);
        merge(&mut cfg.lambda_grid, c.lambda_grid);
        merge(&mut cfg.scores, c.scores);
        merge(&mut cfg.humans, c.humans);
        merge(&mut cfg.data_dir, c.data_dir);
        merge(&mut cfg.noise, c.noise);
        if c.strict {
            cfg.strict = Some(true);
        }
        if c.synthetic {
            cfg.synthetic = Some(true);
        }
        merge(&mut cfg.regime, c.regime);
        merge(&mut cfg.n_instances, c.n_instances);
        merge(&mut cfg.n_experts, c.n_experts);
        merge(&mut cfg.seed, c.seed);
        merge(&mut cfg.out, c.out);
        merge(&mut cfg.jobs, c.jobs);
    }
}

fn merge<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "harmctl",
    version,
    about = "Calibrate prediction-set decision support so its counterfactual harm stays below a bound"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify a harm-controlling set of thresholds from calibration data.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Harm bound alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// counterfactual | interventional.
        #[arg(long)]
        mode: Option<String>,
        /// Fixed alpha' (interventional mode).
        #[arg(long)]
        alpha_prime: Option<f64>,
        /// Select alpha' maximizing the certified interval.
        #[arg(long)]
        auto_alpha_prime: bool,
    },
    /// Repeated-split accuracy-vs-harm trade-off tables.
    Tradeoff {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        alpha_prime: Option<f64>,
        #[arg(long)]
        auto_alpha_prime: bool,
        /// fixed | auto | pooled (interventional mode; default pooled).
        #[arg(long)]
        alpha_prime_policy: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        calib_frac: Option<f64>,
        /// Difficulty quantile cuts, comma separated.
        #[arg(long, value_delimiter = ',')]
        cuts: Option<Vec<f64>>,
        /// Confusion-matrix smoothing.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Emit lambda, harm curve, benefit-loss curve, and harm bounds as CSV.
    Risk {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Emit the modeled expert accuracy A(lambda) as CSV.
    Accuracy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        cuts: Option<Vec<f64>>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Fit the expert model and dump its confusion matrices as JSON.
    FitMnl {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        cuts: Option<Vec<f64>>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Monte Carlo validation of the calibration guarantees on a synthetic
    /// world with known counterfactuals.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        alpha: Option<f64>,
        /// Repetitions.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n_calib: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Empirical success probability per set size, stratified by label,
    /// difficulty, and expert competence.
    VerifyMonotonicity {
        #[command(flatten)]
        common: CommonArgs,
        /// Humans-with-sets CSV.
        #[arg(long)]
        sets: Option<PathBuf>,
        /// Minimum predictions per reported cell.
        #[arg(long)]
        min_cell: Option<usize>,
    },
    /// Emit empirical coverage and mean set size per lambda as CSV.
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                let _ = writeln!(
                    std::io::stderr(),
                    "{}",
                    json!({"error": {"kind": "config_invalid", "message": e.to_string()}})
                );
                return 1;
            }
            let _ = e.print();
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(
                std::io::stderr(),
                "{}",
                json!({"error": {"kind": e.kind(), "message": e.to_string()}})
            );
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Calibrate { common, alpha, mode, alpha_prime, auto_alpha_prime } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.alpha, alpha);
            merge(&mut cfg.mode, mode);
            merge(&mut cfg.alpha_prime, alpha_prime);
            if auto_alpha_prime {
                cfg.alpha_prime_policy = Some("auto".into());
            }
            setup_jobs(&cfg)?;
            cmd_calibrate(&cfg)
        }
        Command::Tradeoff {
            common,
            alpha,
            mode,
            alpha_prime,
            auto_alpha_prime,
            alpha_prime_policy,
            repetitions,
            calib_frac,
            cuts,
            epsilon,
        } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.alpha, alpha);
            merge(&mut cfg.mode, mode);
            merge(&mut cfg.alpha_prime, alpha_prime);
            merge(&mut cfg.alpha_prime_policy, alpha_prime_policy);
            if auto_alpha_prime {
                cfg.alpha_prime_policy = Some("auto".into());
            }
            merge(&mut cfg.repetitions, repetitions);
            merge(&mut cfg.calib_frac, calib_frac);
            merge(&mut cfg.cuts, cuts);
            merge(&mut cfg.epsilon, epsilon);
            setup_jobs(&cfg)?;
            cmd_tradeoff(&cfg)
        }
        Command::Risk { common } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            setup_jobs(&cfg)?;
            cmd_risk(&cfg)
        }
        Command::Accuracy { common, cuts, epsilon } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.cuts, cuts);
            merge(&mut cfg.epsilon, epsilon);
            setup_jobs(&cfg)?;
            cmd_accuracy(&cfg)
        }
        Command::FitMnl { common, cuts, epsilon } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.cuts, cuts);
            merge(&mut cfg.epsilon, epsilon);
            setup_jobs(&cfg)?;
            cmd_fit_mnl(&cfg)
        }
        Command::Simulate { common, alpha, reps, n_calib, n_test } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.alpha, alpha);
            merge(&mut cfg.repetitions, reps);
            merge(&mut cfg.n_calib, n_calib);
            merge(&mut cfg.n_test, n_test);
            setup_jobs(&cfg)?;
            cmd_simulate(&cfg)
        }
        Command::VerifyMonotonicity { common, sets, min_cell } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            merge(&mut cfg.sets, sets);
            merge(&mut cfg.min_cell, min_cell);
            setup_jobs(&cfg)?;
            cmd_verify_monotonicity(&cfg)
        }
        Command::Coverage { common } => {
            let mut cfg = load_config(&common)?;
            common.apply(&mut cfg);
            setup_jobs(&cfg)?;
            cmd_coverage(&cfg)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::ConfigInvalid(format!("bad config file: {e}")))
        }
        None => Ok(RunConfig::default()),
    }
}

fn setup_jobs(cfg: &RunConfig) -> Result<()> {
    if let Some(jobs) = cfg.jobs {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok(())
}

fn seed_of(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn mode_of(cfg: &RunConfig) -> Result<ControlMode> {
    match cfg.mode.as_deref().unwrap_or("counterfactual") {
        "counterfactual" | "cf" => Ok(ControlMode::Counterfactual),
        "interventional" | "interv" => Ok(ControlMode::Interventional),
        other => Err(Error::ConfigInvalid(format!("unknown mode `{other}`"))),
    }
}

fn require_alpha(cfg: &RunConfig) -> Result<f64> {
    cfg.alpha.ok_or_else(|| Error::ConfigInvalid("--alpha is required".into()))
}

/// Difficulty cuts: median split for real data; a single stratum for
/// synthetic worlds, whose experts carry no difficulty dependence (and whose
/// coarse accuracy values can leave a stratum empty).
fn cuts_of(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.cuts {
        Some(cuts) => cuts.clone(),
        None if cfg.synthetic.unwrap_or(false) || cfg.world.is_some() => vec![],
        None => vec![0.5],
    }
}

fn world_config(cfg: &RunConfig) -> Result<WorldConfig> {
    if let Some(world) = &cfg.world {
        let mut world = world.clone();
        if let Some(seed) = cfg.seed {
            world.seed = seed;
        }
        return Ok(world);
    }
    let mut world = match cfg.regime.as_deref().unwrap_or("cf") {
        "cf" | "counterfactual" => WorldConfig::counterfactual_default(seed_of(cfg)),
        "interv" | "interventional" => WorldConfig::interventional_default(seed_of(cfg)),
        other => return Err(Error::ConfigInvalid(format!("unknown regime `{other}`"))),
    };
    if let Some(n) = cfg.n_instances {
        world.n_instances = n;
    }
    if let Some(n) = cfg.n_experts {
        world.n_experts = n;
    }
    Ok(world)
}

/// Load the working dataset: synthetic world or CSV inputs.
fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, Option<SyntheticWorld>)> {
    if cfg.synthetic.unwrap_or(false) || cfg.world.is_some() {
        let world = generate_world(&world_config(cfg)?)?;
        let ds = world.to_dataset()?;
        return Ok((ds, Some(world)));
    }
    let scores_path = resolve_path(cfg, &cfg.scores, "scores.csv")?;
    let humans_path = resolve_path(cfg, &cfg.humans, "humans.csv")?;
    let label_space = read_label_space(&scores_path)?;
    let scores = load_scores(&scores_path, &label_space, cfg.strict.unwrap_or(false))?;
    let (predictions, truths) = load_human_predictions(&humans_path, &label_space)?;
    let ds = join_dataset(&label_space, &scores, &predictions, &truths, cfg.noise)?;
    Ok((ds, None))
}

fn resolve_path(cfg: &RunConfig, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    if let Some(dir) = &cfg.data_dir {
        return Ok(dir.join(name));
    }
    Err(Error::ConfigInvalid(format!(
        "no data source: pass --synthetic, --{}, or --data-dir",
        name.trim_end_matches(".csv")
    )))
}

/// Build the predictor. Without an explicit SAPS weight, select one from
/// the grid by smallest mean set size on a held-out tenth of the data at
/// lambda = 1 (the low end of the SAPS domain where sizes start to spread).
fn build_predictor(cfg: &RunConfig, dataset: &Dataset) -> Result<(SetPredictor, Option<f64>)> {
    match cfg.predictor.as_deref().unwrap_or("threshold") {
        "threshold" => Ok((SetPredictor::Threshold, None)),
        "saps" => {
            let lambda_max = cfg.lambda_max.unwrap_or(SAPS_LAMBDA_MAX);
            let u_seed = seed_of(cfg);
            let w = match cfg.saps_w {
                Some(w) => w,
                None => {
                    let grid = cfg.saps_w_grid.clone().unwrap_or_else(|| SAPS_W_GRID.to_vec());
                    let (validation, _) =
                        crate::data::split_dataset(dataset, 0.1, seed_of(cfg) ^ 0x5a95)?;
                    saps_select_w(&validation, 1.0, &grid, lambda_max, u_seed)?
                }
            };
            Ok((SetPredictor::Saps(SapsConfig { w, lambda_max, u_seed }), Some(w)))
        }
        other => Err(Error::ConfigInvalid(format!("unknown predictor `{other}`"))),
    }
}

fn lambda_grid_of(cfg: &RunConfig, predictor: &SetPredictor) -> Result<Vec<f64>> {
    let domain = predictor.domain_max();
    let default_step = match predictor {
        SetPredictor::Threshold => DEFAULT_LAMBDA_STEP,
        SetPredictor::Saps(_) => SAPS_LAMBDA_STEP,
    };
    let (start, stop, step) = match &cfg.lambda_grid {
        Some(spec) => parse_grid_spec(spec)?,
        None => (0.0, domain, cfg.lambda_step.unwrap_or(default_step)),
    };
    if step <= 0.0 || stop < start {
        return Err(Error::ConfigInvalid(format!("bad lambda grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    grid.retain(|&l| l <= stop + 1e-12);
    if let Some(last) = grid.last_mut() {
        if *last > stop {
            *last = stop;
        }
    }
    Ok(grid)
}

fn parse_grid_spec(spec: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::ConfigInvalid(format!(
            "lambda grid must be start:stop:step, got `{spec}`"
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::ConfigInvalid(format!("bad grid number `{s}`")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn write_report(
    cfg: &RunConfig,
    command: &str,
    outputs: &[String],
    summary: serde_json::Value,
) -> Result<()> {
    let Some(out) = &cfg.out else { return Ok(()) };
    fs::create_dir_all(out)?;
    let report = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed_of(cfg),
        "config": cfg,
        "outputs": outputs,
        "summary": summary,
    });
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<Option<PathBuf>> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.join(name)))
        }
        None => Ok(None),
    }
}

fn emit(cfg: &RunConfig, name: &str, content: &str) -> Result<()> {
    match out_file(cfg, name)? {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

// ---- subcommands -----------------------------------------------------------

fn cmd_calibrate(cfg: &RunConfig) -> Result<i32> {
    let alpha = require_alpha(cfg)?;
    let mode = mode_of(cfg)?;
    let (dataset, _) = load_dataset(cfg)?;
    let (predictor, _) = build_predictor(cfg, &dataset)?;

    let result = match mode {
        ControlMode::Counterfactual => harm_controlling_set_cf(&dataset, &predictor, alpha)?,
        ControlMode::Interventional => {
            let alpha_prime = match (cfg.alpha_prime, cfg.alpha_prime_policy.as_deref()) {
                (Some(a), _) => a,
                (None, Some("auto")) | (None, None) => {
                    let n = dataset.len();
                    select_alpha_prime(&dataset, &predictor, alpha, 1.0 / (n as f64 + 1.0))?
                }
                (None, Some(other)) => {
                    return Err(Error::ConfigInvalid(format!(
                        "alpha_prime_policy `{other}` needs --alpha-prime"
                    )))
                }
            };
            harm_controlling_set_interv(&dataset, &predictor, alpha, alpha_prime)?
        }
    };
    let text = serde_json::to_string_pretty(&result)?;
    emit(cfg, "calibration.json", &format!("{text}\n"))?;
    write_report(cfg, "calibrate", &["calibration.json".into()], serde_json::to_value(&result)?)?;
    if result.feasible {
        Ok(0)
    } else {
        let _ = writeln!(
            std::io::stderr(),
            "{}",
            json!({"error": {"kind": "infeasible", "message": "certified interval is empty"}})
        );
        Ok(2)
    }
}

fn cmd_tradeoff(cfg: &RunConfig) -> Result<i32> {
    let alpha = require_alpha(cfg)?;
    let mode = mode_of(cfg)?;
    let (dataset, _) = load_dataset(cfg)?;
    let (predictor, _) = build_predictor(cfg, &dataset)?;
    let grid = lambda_grid_of(cfg, &predictor)?;

    let alpha_prime = match (cfg.alpha_prime, cfg.alpha_prime_policy.as_deref()) {
        (Some(a), _) => AlphaPrimePolicy::Fixed(a),
        (None, Some("auto")) => AlphaPrimePolicy::PerRepetition,
        (None, Some("pooled")) | (None, None) => AlphaPrimePolicy::Pooled,
        (None, Some("fixed")) => {
            return Err(Error::ConfigInvalid("policy `fixed` needs --alpha-prime".into()))
        }
        (None, Some(other)) => {
            return Err(Error::ConfigInvalid(format!("unknown alpha' policy `{other}`")))
        }
    };
    let spec = TradeoffSpec {
        alpha,
        mode,
        alpha_prime,
        lambda_grid: grid,
        repetitions: cfg.repetitions.unwrap_or(DEFAULT_REPETITIONS),
        calib_frac: cfg.calib_frac.unwrap_or(DEFAULT_CALIB_FRAC),
        seed: seed_of(cfg),
        cuts: cuts_of(cfg),
        epsilon: cfg.epsilon.unwrap_or(DEFAULT_EPSILON),
    };
    let report = run_tradeoff(&dataset, &predictor, &spec)?;
    emit(cfg, "tradeoff.csv", &tradeoff_csv(&report))?;
    let always_certified_from = report
        .rows
        .iter()
        .find(|r| r.membership_frequency >= 1.0)
        .map(|r| r.lambda);
    let summary = json!({
        "alpha": report.alpha,
        "mode": report.mode,
        "alpha_prime": report.alpha_prime,
        "repetitions": report.repetitions,
        "rows": report.rows.len(),
        "always_certified_from": always_certified_from,
    });
    write_report(cfg, "tradeoff", &["tradeoff.csv".into()], summary)?;
    Ok(0)
}

fn tradeoff_csv(report: &TradeoffReport) -> String {
    let mut out = String::from(
        "lambda,accuracy_mean,accuracy_ci,harm_mean,harm_ci,harm_upper_mean,harm_upper_ci,\
         membership_frequency,mean_set_size,empirical_coverage\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.lambda,
            row.accuracy_mean,
            opt(row.accuracy_ci),
            row.harm_mean,
            opt(row.harm_ci),
            opt(row.harm_upper_mean),
            opt(row.harm_upper_ci),
            row.membership_frequency,
            row.mean_set_size,
            row.empirical_coverage,
        ));
    }
    out
}

fn cmd_risk(cfg: &RunConfig) -> Result<i32> {
    let (dataset, _) = load_dataset(cfg)?;
    let (predictor, _) = build_predictor(cfg, &dataset)?;
    let grid = lambda_grid_of(cfg, &predictor)?;
    let h = harm_curve(&dataset, &predictor)?;
    let g = benefit_loss_curve(&dataset, &predictor)?;
    let mut out = String::from("lambda,H_hat,G_hat,lower,upper\n");
    for &lambda in &grid {
        let h_val = h.value_at(lambda);
        let g_val = g.value_at(lambda);
        out.push_str(&format!("{lambda},{h_val},{g_val},{h_val},{}\n", h_val + g_val));
    }
    emit(cfg, "risk.csv", &out)?;
    write_report(cfg, "risk", &["risk.csv".into()], json!({"rows": grid.len()}))?;
    Ok(0)
}

fn cmd_accuracy(cfg: &RunConfig) -> Result<i32> {
    let (dataset, _) = load_dataset(cfg)?;
    let (predictor, _) = build_predictor(cfg, &dataset)?;
    let grid = lambda_grid_of(cfg, &predictor)?;
    let cuts = cuts_of(cfg);
    let strata = stratify_difficulty(&dataset, &cuts)?;
    let mixture = fit_confusion(&dataset, &strata, cfg.epsilon.unwrap_or(DEFAULT_EPSILON))?;
    let mut out = String::from("lambda,A\n");
    for &lambda in &grid {
        let a = estimate_accuracy(&mixture, &strata, &dataset, &predictor, lambda)?;
        out.push_str(&format!("{lambda},{a}\n"));
    }
    emit(cfg, "accuracy.csv", &out)?;
    write_report(cfg, "accuracy", &["accuracy.csv".into()], json!({"rows": grid.len()}))?;
    Ok(0)
}

fn cmd_fit_mnl(cfg: &RunConfig) -> Result<i32> {
    let (dataset, _) = load_dataset(cfg)?;
    let cuts = cuts_of(cfg);
    let strata = stratify_difficulty(&dataset, &cuts)?;
    let mixture = fit_confusion(&dataset, &strata, cfg.epsilon.unwrap_or(DEFAULT_EPSILON))?;
    let mut stratum_counts = vec![0usize; strata.count()];
    for s in &dataset.samples {
        stratum_counts[strata.stratum_for(&dataset, &s.instance_id)] += 1;
    }
    let dump = json!({
        "labels": dataset.label_space.names(),
        "cuts": strata.quantile_cuts,
        "cut_values": strata.cut_values,
        "epsilon": mixture.epsilon,
        "stratum_sample_counts": stratum_counts,
        "matrices": (0..mixture.strata()).map(|d| mixture.matrix(d).clone()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&dump)?;
    emit(cfg, "mnl.json", &format!("{text}\n"))?;
    write_report(
        cfg,
        "fit-mnl",
        &["mnl.json".into()],
        json!({"strata": mixture.strata(), "labels": dataset.label_space.len()}),
    )?;
    Ok(0)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let alpha = require_alpha(cfg)?;
    let world_cfg = world_config(cfg)?;
    let reps = cfg.repetitions.unwrap_or(200);
    let n_calib = cfg.n_calib.unwrap_or(500);
    let n_test = cfg.n_test.unwrap_or(2000);
    let predictor = SetPredictor::Threshold;

    let payload = match world_cfg.regime {
        crate::scm::Regime::CounterfactualMonotone => {
            let harm = coverage_trial(&world_cfg, alpha, n_calib, n_test, reps, &predictor)?;
            let benefit = benefit_loss_trial(&world_cfg, alpha, n_calib, n_test, reps, &predictor)?;
            json!({"regime": "cf", "harm_control": harm, "benefit_loss_control": benefit})
        }
        crate::scm::Regime::InterventionalOnly => {
            let step = cfg.lambda_step.unwrap_or(DEFAULT_LAMBDA_STEP);
            let subset = interval_subset_trial(&world_cfg, alpha, n_calib, reps, step, &predictor)?;
            let world = generate_world(&world_cfg)?;
            let grid = crate::scm::lambda_grid(predictor.domain_max(), step);
            let sandwich = sandwich_report(&world, &predictor, &grid)?;
            json!({"regime": "interv", "interval_subset": subset, "sandwich": sandwich})
        }
    };
    let text = serde_json::to_string_pretty(&payload)?;
    emit(cfg, "simulate.json", &format!("{text}\n"))?;
    // Dump the world as CSV next to the report for cross-checking.
    if cfg.out.is_some() {
        let world = generate_world(&world_cfg)?;
        let ds = world.to_dataset()?;
        let mut scores_buf = Vec::new();
        let mut humans_buf = Vec::new();
        write_scores_csv(&mut scores_buf, &ds)?;
        write_humans_csv(&mut humans_buf, &ds)?;
        if let Some(path) = out_file(cfg, "world_scores.csv")? {
            fs::write(path, scores_buf)?;
        }
        if let Some(path) = out_file(cfg, "world_humans.csv")? {
            fs::write(path, humans_buf)?;
        }
    }
    write_report(cfg, "simulate", &["simulate.json".into()], payload)?;
    Ok(0)
}

fn cmd_verify_monotonicity(cfg: &RunConfig) -> Result<i32> {
    let min_count = cfg.min_cell.unwrap_or(DEFAULT_MIN_CELL);
    let (dataset, world) = load_dataset(cfg)?;
    let records: Vec<SetPredictionRecord> = match (&world, &cfg.sets, &cfg.data_dir) {
        (Some(world), None, _) => {
            let lambdas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
            world.set_records(&SetPredictor::Threshold, &lambdas, seed_of(cfg) ^ 0x5e7)?
        }
        (_, Some(path), _) => load_set_records(path, &dataset.label_space)?,
        (_, None, Some(dir)) => load_set_records(dir.join("sets.csv"), &dataset.label_space)?,
        (None, None, None) => {
            return Err(Error::ConfigInvalid("verify-monotonicity needs --sets or --synthetic".into()))
        }
    };
    let report = verify_interventional_monotonicity(&records, &dataset, min_count)?;
    if let Some(dir) = &cfg.out {
        write_monotonicity_files(dir, &report)?;
    }
    let summary = json!({
        "min_count": report.min_count,
        "cells": report.cells.len(),
        "files": report.cells.iter().map(cell_file_name).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    write_report(cfg, "verify-monotonicity", &["monotonicity/".into()], summary)?;
    Ok(0)
}

fn cell_file_name(cell: &crate::experiment::MonotonicityCell) -> String {
    format!("{}_{}_{}.csv", cell.label, cell.difficulty, cell.competence)
}

fn write_monotonicity_files(dir: &Path, report: &MonotonicityReport) -> Result<()> {
    let mono = dir.join("monotonicity");
    fs::create_dir_all(&mono)?;
    for cell in &report.cells {
        let mut out = String::from("set_size,count,success_rate,standard_error\n");
        for stat in &cell.per_size {
            out.push_str(&format!(
                "{},{},{},{}\n",
                stat.size,
                stat.count,
                stat.success_rate.map(|v| v.to_string()).unwrap_or_default(),
                stat.standard_error.map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
        fs::write(mono.join(cell_file_name(cell)), out)?;
    }
    Ok(())
}

fn cmd_coverage(cfg: &RunConfig) -> Result<i32> {
    let (dataset, _) = load_dataset(cfg)?;
    let (predictor, _) = build_predictor(cfg, &dataset)?;
    let grid = lambda_grid_of(cfg, &predictor)?;
    let rows = coverage_and_size(&dataset, &predictor, &grid)?;
    let mut out = String::from("lambda,coverage,mean_set_size\n");
    for (&lambda, (cov, size)) in grid.iter().zip(rows) {
        out.push_str(&format!("{lambda},{cov},{size}\n"));
    }
    emit(cfg, "coverage.csv", &out)?;
    write_report(cfg, "coverage", &["coverage.csv".into()], json!({"rows": grid.len()}))?;
    Ok(0)
}
