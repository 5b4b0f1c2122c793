//! Subcommands. Each returns the process exit code on success.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mspec_core::analytics::{pca, sbc, sweep_cell, SeverityAxis, SeverityGrid, SweepConfig};
use mspec_core::benchmarks::{GenerativeModel, MisspecConfig, MisspecVariant, ModelFamily};
use mspec_core::data::DatasetBatch;
use mspec_core::detector::{self, mmd_draw, NullDistribution, PowerResult};
use mspec_core::mmd::{KernelSpec, MmdReference};
use mspec_core::networks::AmortizedApproximator;
use mspec_core::rng::{derive_seed, substream};
use mspec_core::training::{initialize, make_validation_summaries, train_into, Clock, TrainTrace};
use serde::Serialize;
use serde_json::{json, Value};

use crate::card::ModelCard;
use crate::config::{seed_override, RunConfig, SCHEMA};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_REJECT};
use crate::io;
use crate::manifest::{Manifest, RunRecord};
use crate::parallel::{par_map, SystemClock};

const LABEL_SIMULATE: u64 = 1;
const LABEL_VALIDATION: u64 = 2;
const LABEL_NULL: u64 = 3;
const LABEL_POWER: u64 = 4;
const LABEL_SWEEP: u64 = 5;
const LABEL_SBC: u64 = 6;
const LABEL_PCA: u64 = 7;

pub const CARD_FILE: &str = "card.json";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Parser)]
#[command(name = "mspec", version, about = "Misspecification-aware amortized Bayesian inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate datasets from the configured model.
    Simulate(SimulateArgs),
    /// Train summary and inference networks; writes a model card.
    Train(TrainArgs),
    /// Test observed data for a simulation gap (exit 3 on rejection).
    Diagnose(DiagnoseArgs),
    /// Estimate the test's power against a misspecified model.
    Power(PowerArgs),
    /// Median rMMD and rejection rate over a grid of misspecification severities.
    Sweep(SweepArgs),
    /// Simulation-based calibration ranks.
    Sbc(SbcArgs),
    /// Principal components of summary vectors.
    Pca(PcaArgs),
    /// Print the run configuration JSON schema.
    Schema,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of datasets.
    #[arg(long)]
    pub n: usize,
    /// Observations per dataset (default: the model's own).
    #[arg(long)]
    pub k: Option<usize>,
    /// Output directory (default: the configured output_dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue training the networks in this card for another `train.n_steps` steps.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Imq,
}

impl KernelArg {
    fn spec(self, s: usize) -> KernelSpec {
        match self {
            KernelArg::Gaussian => KernelSpec::gaussian_default(s),
            KernelArg::Imq => KernelSpec::imq_default(s),
        }
    }
}

/// Options shared by commands that build a null distribution.
#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    pub card: PathBuf,
    /// Validation summaries (default: validation.csv next to the card).
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Null distribution draws.
    #[arg(long = "null", default_value_t = 1000)]
    pub null_reps: usize,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    /// Seed (default: the card's; MSPEC_SEED takes precedence over both).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory (default: the card's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: DetectorArgs,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub common: DetectorArgs,
    /// Misspecification of the data-generating model, as JSON.
    #[arg(long)]
    pub misspec: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: DetectorArgs,
    /// Severity axis as `name=v1,v2,..` with name one of mu0, tau0, tau, lambda, df, pi.
    #[arg(long = "axis", required = true)]
    pub axes: Vec<String>,
    /// Variant to sweep (default: inferred from the axis names).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Posterior draws per dataset for the posterior error (models with analytic posteriors only).
    #[arg(long)]
    pub posterior_draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SbcArgs {
    #[arg(long)]
    pub card: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Posterior draws per dataset.
    #[arg(long, default_value_t = 99)]
    pub l: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    /// Summary table with columns z0, z1, ..
    #[arg(long, conflicts_with = "card", required_unless_present = "card")]
    pub summaries: Option<PathBuf>,
    /// Summarize fresh simulations with this card instead.
    #[arg(long)]
    pub card: Option<PathBuf>,
    /// Misspecification of the simulations summarized with --card, as JSON.
    #[arg(long, requires = "card")]
    pub misspec: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, required = true)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Power(a) => power(a),
        Command::Sweep(a) => sweep(a),
        Command::Sbc(a) => sbc_cmd(a),
        Command::Pca(a) => pca_cmd(a),
        Command::Schema => {
            print!("{}", SCHEMA);
            Ok(EXIT_OK)
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    io::write_text(path, &(serde_json::to_string_pretty(value).expect("reports serialize") + "\n"))
}

fn resolve_seed(flag: Option<u64>, fallback: u64) -> CliResult<u64> {
    Ok(seed_override()?.or(flag).unwrap_or(fallback))
}

fn parse_misspec(text: &str) -> CliResult<MisspecConfig> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("--misspec: {}", e)))
}

fn family_of(card: &ModelCard) -> CliResult<ModelFamily> {
    Ok(ModelFamily::from_name(&card.model.name)?)
}

fn card_dir(card: &Path) -> PathBuf {
    card.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn simulate(a: SimulateArgs) -> CliResult<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model.build()?;
    let k = a.k.unwrap_or_else(|| model.default_k());
    if a.n == 0 || k == 0 {
        return Err(CliError::Config("--n and --k must be positive".into()));
    }
    let out = a.out.unwrap_or_else(|| cfg.output_dir.clone());
    create_dir(&out)?;
    let batch = model.simulate_batch(a.n, k, &mut substream(derive_seed(cfg.seed, LABEL_SIMULATE), 0))?;
    io::write_text(&out.join("data.csv"), &io::batch_to_csv(&batch))?;
    io::write_text(&out.join("params.csv"), &io::params_to_csv(batch.params().expect("simulated batches carry parameters")))?;
    let mut rec = RunRecord::new(cfg.seed, 1, Some(&cfg), json!({ "n": a.n, "k": k }));
    rec.add_file(&out, "data.csv")?;
    rec.add_file(&out, "params.csv")?;
    Manifest::record(&out, "simulate", rec)?;
    println!("wrote {} datasets of {} observations from {} to {}", a.n, k, model.name(), out.display());
    Ok(EXIT_OK)
}

fn train(a: TrainArgs) -> CliResult<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model.build()?;
    let tcfg = cfg.train_config();
    let k = tcfg.k.unwrap_or_else(|| model.default_k());
    let out = a.out.unwrap_or_else(|| cfg.output_dir.clone());
    create_dir(&out)?;
    let (mut nets, first_step, mut trace_text) = match &a.resume {
        Some(path) => {
            let (card, nets) = ModelCard::load(path)?;
            if card.model != cfg.model || card.k != k {
                return Err(CliError::Config("the card was trained on a different model or K than the configuration".into()));
            }
            if card.summary != cfg.network.summary_config(model.obs_dim()) || card.flow != cfg.network.flow_config(model.param_dim()) {
                return Err(CliError::Config("the card's network layout differs from the configuration".into()));
            }
            let previous = card_dir(path).join(TRACE_FILE);
            let text = std::fs::read_to_string(&previous)
                .unwrap_or_else(|_| format!("{}\n", TrainTrace::CSV_HEADER));
            (nets, card.steps_completed, text)
        }
        None => {
            let nets = initialize(
                &model,
                cfg.network.summary_config(model.obs_dim()),
                cfg.network.flow_config(model.param_dim()),
                k,
                cfg.seed,
            )?;
            (nets, 0, format!("{}\n", TrainTrace::CSV_HEADER))
        }
    };
    let mut trace = TrainTrace::default();
    let clock = SystemClock::start();
    train_into(&model, &mut nets, &tcfg, first_step, &clock, &mut trace)?;
    let steps_completed = first_step + tcfg.n_steps;
    trace_text.push_str(&trace.to_csv(false));

    let validation = make_validation_summaries(
        &model,
        &nets,
        cfg.detector.validation_m,
        k,
        &mut substream(derive_seed(cfg.seed, LABEL_VALIDATION), steps_completed as u64),
    )?;
    let card = ModelCard::new(cfg.model.clone(), &nets, cfg.train.clone(), cfg.seed, k, steps_completed);
    card.save(&out.join(CARD_FILE))?;
    io::write_text(&out.join(VALIDATION_FILE), &io::matrix_to_csv(&validation, "z"))?;
    io::write_text(&out.join(TRACE_FILE), &trace_text)?;
    let args = json!({ "resume": a.resume, "first_step": first_step, "steps_completed": steps_completed });
    let mut rec = RunRecord::new(cfg.seed, 1, Some(&cfg), args);
    for f in [CARD_FILE, VALIDATION_FILE, TRACE_FILE] {
        rec.add_file(&out, f)?;
    }
    Manifest::record(&out, "train", rec)?;
    let last = trace.rows.last().map_or(f64::NAN, |r| r.loss);
    println!(
        "trained steps {}..{} in {:.1}s, final loss {:.4}; card written to {}",
        first_step,
        steps_completed,
        clock.now_ms() / 1e3,
        last,
        out.join(CARD_FILE).display()
    );
    Ok(EXIT_OK)
}

/// Card, networks and validation reference shared by the detector commands.
struct DetectorSetup {
    card: ModelCard,
    nets: AmortizedApproximator,
    reference: MmdReference,
    training_model: GenerativeModel,
    seed: u64,
    out: PathBuf,
}

fn detector_setup(a: &DetectorArgs) -> CliResult<DetectorSetup> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Config("--alpha must lie in (0, 1)".into()));
    }
    if a.null_reps < detector::MIN_NULL_DRAWS {
        return Err(CliError::Config(format!("--null must be at least {}", detector::MIN_NULL_DRAWS)));
    }
    let (card, nets) = ModelCard::load(&a.card)?;
    let validation_path = a.validation.clone().unwrap_or_else(|| card_dir(&a.card).join(VALIDATION_FILE));
    let validation = io::read_matrix(&validation_path, "z")?;
    if validation.cols() != nets.summary_dim() {
        return Err(CliError::Config(format!(
            "{} has {} columns but the card's summaries have {}",
            validation_path.display(),
            validation.cols(),
            nets.summary_dim()
        )));
    }
    let reference = MmdReference::new(a.kernel.spec(nets.summary_dim()), validation)?;
    let training_model = card.model.build()?;
    let seed = resolve_seed(a.seed, card.seed)?;
    let out = a.out.clone().unwrap_or_else(|| card_dir(&a.card));
    create_dir(&out)?;
    Ok(DetectorSetup { card, nets, reference, training_model, seed, out })
}

impl DetectorSetup {
    fn null(&self, n: usize, k: usize, reps: usize, workers: usize) -> CliResult<NullDistribution> {
        let seed = derive_seed(self.seed, LABEL_NULL);
        let draws = par_map(reps, workers, |r| mmd_draw(&self.training_model, &self.nets, &self.reference, n, k, seed, r))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NullDistribution::from_draws(draws, n, self.reference.sample().rows(), self.reference.kernel().clone(), seed)?)
    }

    fn record(&self, command: &str, workers: usize, args: Value, files: &[&str]) -> CliResult<()> {
        let mut rec = RunRecord::new(self.seed, workers, Some(&self.card.model), args);
        rec.args["card_sha256"] = Value::String(self.card.sha256.clone());
        for f in files {
            rec.add_file(&self.out, f)?;
        }
        Manifest::record(&self.out, command, rec)
    }
}

fn null_summary(dist: &NullDistribution, alpha: f64) -> Value {
    json!({
        "reps": dist.len(),
        "n_obs": dist.n_obs,
        "m": dist.m,
        "seed": dist.seed,
        "median_mmd_sq": dist.quantile(0.5),
        "critical_mmd_sq": dist.critical(alpha),
    })
}

fn diagnose(a: DiagnoseArgs) -> CliResult<i32> {
    let s = detector_setup(&a.common)?;
    let data: DatasetBatch = io::read_batch(&a.data)?;
    if data.d() != s.nets.obs_dim() {
        return Err(CliError::Config(format!("data has {} columns per observation, the card expects {}", data.d(), s.nets.obs_dim())));
    }
    let diagnosis = detector::diagnose(&s.nets, &s.reference, &data)?;
    let null = s.null(data.n(), data.k(), a.common.null_reps, a.common.workers)?;
    let result = detector::test(&diagnosis.report, &null, a.common.alpha)?;
    let report = json!({ "result": result, "null": null_summary(&null, a.common.alpha) });
    write_json(&s.out.join("diagnosis.json"), &report)?;
    io::write_text(&s.out.join("observed_summaries.csv"), &io::matrix_to_csv(&diagnosis.summaries, "z"))?;
    let args = json!({
        "data": a.data, "alpha": a.common.alpha, "null_reps": a.common.null_reps,
        "kernel": format!("{:?}", a.common.kernel), "n": data.n(), "k": data.k(),
    });
    s.record("diagnose", a.common.workers, args, &["diagnosis.json", "observed_summaries.csv"])?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(if result.reject { EXIT_REJECT } else { EXIT_OK })
}

fn power(a: PowerArgs) -> CliResult<i32> {
    let s = detector_setup(&a.common)?;
    let misspec = parse_misspec(&a.misspec)?;
    let star = GenerativeModel::new(family_of(&s.card)?, misspec)?;
    if a.n == 0 || a.trials == 0 {
        return Err(CliError::Config("--n and --trials must be positive".into()));
    }
    let k = s.card.k;
    let null = s.null(a.n, k, a.common.null_reps, a.common.workers)?;
    let seed = derive_seed(s.seed, LABEL_POWER);
    let draws = par_map(a.trials, a.common.workers, |t| mmd_draw(&star, &s.nets, &s.reference, a.n, k, seed, t))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let result = PowerResult::from_draws(draws, null.critical(a.common.alpha));
    let report = json!({
        "model": star.name(),
        "power": result.power,
        "rejections": result.rejections,
        "trials": result.trials,
        "critical_mmd_sq": result.critical_mmd_sq,
        "null": null_summary(&null, a.common.alpha),
        "draws": result.draws,
    });
    write_json(&s.out.join("power.json"), &report)?;
    let args = json!({ "misspec": star.misspec(), "n": a.n, "trials": a.trials, "alpha": a.common.alpha, "null_reps": a.common.null_reps });
    s.record("power", a.common.workers, args, &["power.json"])?;
    println!("power {:.3} ({} of {} trials rejected) against {}", result.power, result.rejections, result.trials, star.name());
    Ok(EXIT_OK)
}

const AXIS_NAMES: [&str; 6] = ["mu0", "tau0", "tau", "lambda", "df", "pi"];

fn parse_axis(text: &str) -> CliResult<SeverityAxis> {
    let bad = || CliError::Config(format!("--axis {:?}: expected name=v1,v2,.. with name in {:?}", text, AXIS_NAMES));
    let (name, values) = text.split_once('=').ok_or_else(bad)?;
    if !AXIS_NAMES.contains(&name) {
        return Err(bad());
    }
    let values = values.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<Vec<_>>>()?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok(SeverityAxis::new(name, values))
}

/// Variant matching a set of swept fields.
pub fn infer_variant(family: ModelFamily, names: &[&str]) -> CliResult<MisspecVariant> {
    let has = |n: &str| names.contains(&n);
    let v = match () {
        _ if has("mu0") && has("tau0") => MisspecVariant::PriorBoth,
        _ if has("mu0") => MisspecVariant::PriorLocation,
        _ if has("tau0") => MisspecVariant::PriorScale,
        _ if has("tau") => MisspecVariant::SimulatorScale,
        _ if has("df") => MisspecVariant::StudentTSim,
        _ if has("pi") => MisspecVariant::Necrosis,
        _ if has("lambda") => MisspecVariant::NoiseMixture,
        _ => return Err(CliError::Config("no recognised axis".into())),
    };
    if !family.supports(v) {
        return Err(CliError::Config(format!("{:?} is not available for {}; pass --variant", v, family.name())));
    }
    Ok(v)
}

pub fn misspec_at(variant: MisspecVariant, axes: &[SeverityAxis], coords: &[f64]) -> MisspecConfig {
    let mut m = MisspecConfig { variant, ..MisspecConfig::none() };
    for (axis, &c) in axes.iter().zip(coords) {
        match axis.name.as_str() {
            "mu0" => m.mu0 = vec![c],
            "tau0" => m.tau0 = c,
            "tau" => m.tau = c,
            "lambda" => m.lambda = c,
            "df" => m.df = Some(c),
            "pi" => m.pi = c,
            other => unreachable!("axis {} passed validation", other),
        }
    }
    m
}

fn sweep(a: SweepArgs) -> CliResult<i32> {
    let axes = a.axes.iter().map(|t| parse_axis(t)).collect::<CliResult<Vec<_>>>()?;
    let s = detector_setup(&a.common)?;
    let family = family_of(&s.card)?;
    let names: Vec<&str> = axes.iter().map(|x| x.name.as_str()).collect();
    let variant = match &a.variant {
        Some(v) => serde_json::from_value(Value::String(v.clone())).map_err(|e| CliError::Config(format!("--variant: {}", e)))?,
        None => infer_variant(family, &names)?,
    };
    if a.n == 0 || a.reps == 0 {
        return Err(CliError::Config("--n and --reps must be positive".into()));
    }
    let k = s.card.k;
    let null = s.null(a.n, k, a.common.null_reps, a.common.workers)?;
    let cfg = SweepConfig {
        n_obs: a.n,
        k,
        reps: a.reps,
        alpha: a.common.alpha,
        posterior_draws: a.posterior_draws,
        error_scale: None,
        seed: derive_seed(s.seed, LABEL_SWEEP),
    };
    let factory = |c: &[f64]| GenerativeModel::new(family, misspec_at(variant, &axes, c));
    let coords = SeverityGrid::coordinates(&axes);
    let cells = par_map(coords.len(), a.common.workers, |i| {
        sweep_cell(&factory, &s.nets, &s.reference, &null, &cfg, i, &coords[i])
    });
    let failed = cells.iter().filter(|c| c.failed.is_some()).count();
    let grid = SeverityGrid { axes: axes.clone(), cells };
    io::write_text(&s.out.join("sweep.csv"), &grid.to_csv())?;
    write_json(&s.out.join("sweep.json"), &json!({ "grid": grid, "null": null_summary(&null, a.common.alpha) }))?;
    let args = json!({ "axes": axes, "variant": variant, "n": a.n, "reps": a.reps, "alpha": a.common.alpha, "null_reps": a.common.null_reps });
    s.record("sweep", a.common.workers, args, &["sweep.csv", "sweep.json"])?;
    println!("evaluated {} cells ({} failed); wrote {}", grid.cells.len(), failed, s.out.join("sweep.csv").display());
    Ok(EXIT_OK)
}

fn sbc_cmd(a: SbcArgs) -> CliResult<i32> {
    let (card, nets) = ModelCard::load(&a.card)?;
    let model = card.model.build()?;
    let seed = resolve_seed(a.seed, card.seed)?;
    let out = a.out.clone().unwrap_or_else(|| card_dir(&a.card));
    create_dir(&out)?;
    let result = sbc(&model, &nets, a.n, a.l, card.k, derive_seed(seed, LABEL_SBC))?;
    let uniformity: Vec<Value> = (0..model.param_dim())
        .map(|p| {
            let u = result.uniformity(p);
            json!({
                "param": p, "chi_square": u.chi_square, "p_value": u.p_value,
                "ecdf_outside": u.ecdf_outside, "ecdf_points": u.ecdf_points,
            })
        })
        .collect();
    io::write_text(&out.join("sbc.csv"), &result.to_csv())?;
    write_json(&out.join("sbc.json"), &json!({ "n": a.n, "l": a.l, "uniformity": uniformity }))?;
    let mut rec = RunRecord::new(seed, 1, Some(&card.model), json!({ "n": a.n, "l": a.l, "card_sha256": card.sha256 }));
    rec.add_file(&out, "sbc.csv")?;
    rec.add_file(&out, "sbc.json")?;
    Manifest::record(&out, "sbc", rec)?;
    let worst = uniformity.iter().filter_map(|u| u["p_value"].as_f64()).fold(1.0, f64::min);
    println!("SBC over {} datasets with {} draws each; smallest chi-square p-value {:.3}", a.n, a.l, worst);
    Ok(EXIT_OK)
}

fn pca_cmd(a: PcaArgs) -> CliResult<i32> {
    create_dir(&a.out)?;
    let (summaries, seed, source) = match (&a.summaries, &a.card) {
        (Some(path), _) => (io::read_matrix(path, "z")?, 0, json!({ "summaries": path })),
        (None, Some(card_path)) => {
            let (card, nets) = ModelCard::load(card_path)?;
            let misspec = a.misspec.as_deref().map(parse_misspec).transpose()?.unwrap_or_else(MisspecConfig::none);
            let model = GenerativeModel::new(family_of(&card)?, misspec)?;
            let seed = resolve_seed(a.seed, card.seed)?;
            let batch = model.simulate_batch(a.n, card.k, &mut substream(derive_seed(seed, LABEL_PCA), 0))?;
            let z = nets.summarize(&batch)?;
            io::write_text(&a.out.join("pca_summaries.csv"), &io::matrix_to_csv(&z, "z"))?;
            (z, seed, json!({ "card_sha256": card.sha256, "model": model.name(), "n": a.n }))
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let result = pca(&summaries)?;
    write_json(&a.out.join("pca.json"), &result)?;
    let mut rec = RunRecord::new::<Value>(seed, 1, None, source);
    rec.add_file(&a.out, "pca.json")?;
    if a.card.is_some() {
        rec.add_file(&a.out, "pca_summaries.csv")?;
    }
    Manifest::record(&a.out, "pca", rec)?;
    let ratios: Vec<String> = result.explained_ratio.iter().map(|r| format!("{:.3}", r)).collect();
    println!("explained variance ratios: {}", ratios.join(", "));
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a = parse_axis("tau0=0.5, 1,2").unwrap();
        assert_eq!(a.name, "tau0");
        assert_eq!(a.values, vec![0.5, 1.0, 2.0]);
        assert!(parse_axis("sigma=1").is_err());
        assert!(parse_axis("tau0=").is_err());
        assert!(parse_axis("tau0").is_err());
    }

    #[test]
    fn variant_inference() {
        let g = ModelFamily::Gaussian2d;
        assert_eq!(infer_variant(g, &["mu0", "tau0"]).unwrap(), MisspecVariant::PriorBoth);
        assert_eq!(infer_variant(g, &["tau"]).unwrap(), MisspecVariant::SimulatorScale);
        assert_eq!(infer_variant(ModelFamily::CancerStromal, &["pi"]).unwrap(), MisspecVariant::Necrosis);
        assert!(infer_variant(g, &["df"]).is_err());
    }

    #[test]
    fn misspec_follows_coordinates() {
        let axes = vec![SeverityAxis::new("mu0", vec![0.0, 1.0]), SeverityAxis::new("tau0", vec![2.0])];
        let m = misspec_at(MisspecVariant::PriorBoth, &axes, &[1.0, 2.0]);
        assert_eq!(m, MisspecConfig::prior_both(1.0, 2.0));
    }
}
