//! `xbar-dse` command line.

use crate::config::{load_config, Settings};
use crate::emit::{to_csv, to_json, write_bytes};
use crate::error::{Error, Result};
use crate::exec::Pool;
use crate::formats;
use crate::manifest::RunManifest;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use xbar_core::devices::Technology;
use xbar_core::dse::{
    compare_technologies, evaluate, optimized_config, run_sweep, AccuracyEntry, CompareSpec, Knob, KnobValue, MetricSet,
    SweepSpec, VariationConfig,
};
use xbar_core::inference::{run_inference, InferenceConfig, InferenceReport, LabeledData, Mlp, MvmMode};
use xbar_core::metrics::{nf_distribution_with, o_max, sense_margin_curve, NfDistribution, NfRequest, SmMode, SmPoint};
use xbar_core::solver::ArraySolver;
use xbar_core::surrogate::{generate_dataset, train, SurrogateNet};
use xbar_core::topology::{Activation, CrossbarConfig, Topology};

#[derive(Debug, Parser)]
#[command(name = "xbar-dse", version, about = "Crossbar non-ideality analysis and design-space exploration")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file (comments allowed) or a run manifest.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `-s parasitics.wire_res=0`.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV/JSON artifacts and the run manifest.
    #[arg(short, long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: XBAR_DSE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TopologyArg {
    Gate,
    Drain,
}

#[derive(Debug, Args, Default)]
pub struct ArrayArgs {
    /// sram, reram, fefet or sot-mram.
    #[arg(long)]
    pub tech: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, value_enum)]
    pub topology: Option<TopologyArg>,
    /// fwa, or pwaN for N rows per group.
    #[arg(long)]
    pub activation: Option<String>,
    /// Start from the technology's optimized operating point.
    #[arg(long)]
    pub optimized: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SmModeArg {
    Structured,
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Ideal,
    Solver,
    Surrogate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DC-solve one input/weight pattern and print the column currents.
    Solve {
        #[command(flatten)]
        array: ArrayArgs,
        /// Input bits, one per row (a single bit is repeated).
        #[arg(long)]
        input: String,
        /// Weight bits, row-major (a single bit is repeated).
        #[arg(long)]
        weight: String,
    },
    /// Non-ideality factor distribution over random workloads.
    Nf {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sense-margin curve and O_MAX.
    Sm {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, default_value_t = 8)]
        x_max: usize,
        #[arg(long, value_enum, default_value_t = SmModeArg::Structured)]
        mode: SmModeArg,
        /// Pattern budget for exhaustive mode.
        #[arg(long, default_value_t = 1 << 20)]
        budget: u64,
        /// Extra random patterns for random mode.
        #[arg(long, default_value_t = 1000)]
        patterns: usize,
    },
    /// Sweep one knob and report NF and SM at every value.
    Sweep {
        #[command(flatten)]
        array: ArrayArgs,
        /// r_on, t_fe, t_mgo, v_bias, gap, activation or topology.
        #[arg(long)]
        knob: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Repeat the sweep for each activation scheme (e.g. fwa,pwa8).
        #[arg(long, value_delimiter = ',')]
        activations: Vec<String>,
    },
    /// NF under device-conductance variation, one run per variation seed.
    Variations {
        #[command(flatten)]
        array: ArrayArgs,
        /// Relative conductance spread s (sigma = s·G_ON).
        #[arg(long)]
        sigma: Option<f64>,
        /// Number of variation seeds.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Generate solver data and train the column surrogate.
    TrainSurrogate {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long)]
        records: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Classify a dataset with every layer product computed on crossbar tiles.
    Infer {
        #[command(flatten)]
        array: ArrayArgs,
        /// Model manifest (default: bundled desk model).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset manifest (default: bundled desk test set).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Surrogate manifest, required in surrogate mode.
        #[arg(long)]
        surrogate: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Apply conductance variation with this relative spread.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Compare technologies at their optimized settings.
    Compare {
        /// Comma-separated technologies (default: all four).
        #[arg(long, value_delimiter = ',')]
        techs: Vec<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        /// Also run desk-model inference (ideal, nominal and varied).
        #[arg(long)]
        accuracy: bool,
        /// Test samples used for accuracy.
        #[arg(long)]
        accuracy_samples: Option<usize>,
    },
    /// Repeat a recorded run from its manifest.
    Replay {
        /// `manifest.json` written by an earlier run.
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Nf { .. } => "nf",
            Command::Sm { .. } => "sm",
            Command::Sweep { .. } => "sweep",
            Command::Variations { .. } => "variations",
            Command::TrainSurrogate { .. } => "train-surrogate",
            Command::Infer { .. } => "infer",
            Command::Compare { .. } => "compare",
            Command::Replay { .. } => "replay",
        }
    }

    fn array(&self) -> Option<&ArrayArgs> {
        match self {
            Command::Solve { array, .. }
            | Command::Nf { array, .. }
            | Command::Sm { array, .. }
            | Command::Sweep { array, .. }
            | Command::Variations { array, .. }
            | Command::TrainSurrogate { array, .. }
            | Command::Infer { array, .. } => Some(array),
            Command::Compare { .. } | Command::Replay { .. } => None,
        }
    }
}

pub fn parse_activation(s: &str) -> Result<Activation> {
    let t = s.trim().to_ascii_lowercase();
    if t == "fwa" {
        return Ok(Activation::Fwa);
    }
    t.strip_prefix("pwa")
        .and_then(|g| g.trim_start_matches(['(', '-']).trim_end_matches(')').parse::<usize>().ok())
        .filter(|&g| g > 0)
        .map(Activation::Pwa)
        .ok_or_else(|| Error::Usage(format!("activation must be fwa or pwaN, got `{s}`")))
}

pub fn parse_knob_value(knob: Knob, s: &str) -> Result<KnobValue> {
    match knob {
        Knob::Activation => parse_activation(s).map(KnobValue::Activation),
        Knob::Topology => match s.trim() {
            "gate" => Ok(KnobValue::Topology(Topology::GateInput)),
            "drain" => Ok(KnobValue::Topology(Topology::DrainInput)),
            _ => Err(Error::Usage(format!("topology must be gate or drain, got `{s}`"))),
        },
        _ => s
            .trim()
            .parse::<f64>()
            .map(KnobValue::Number)
            .map_err(|_| Error::Usage(format!("knob {} needs numbers, got `{s}`", knob.name()))),
    }
}

fn parse_bits(s: &str, n: usize, what: &str) -> Result<Vec<bool>> {
    let bits: Vec<bool> = s
        .chars()
        .filter(|c| !matches!(c, ',' | '_' | ' '))
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Usage(format!("{what} must be a string of 0/1, got `{s}`"))),
        })
        .collect::<Result<_>>()?;
    match bits.len() {
        1 => Ok(vec![bits[0]; n]),
        l if l == n => Ok(bits),
        l => Err(Error::Usage(format!("{what} has {l} bits, expected 1 or {n}"))),
    }
}

fn apply_array(settings: &mut Settings, a: &ArrayArgs) -> Result<()> {
    if let Some(t) = &a.tech {
        settings.device.tech = Technology::parse(t).map_err(|e| Error::Usage(e.to_string()))?;
    }
    if let Some(r) = a.rows {
        settings.rows = r;
    }
    if let Some(c) = a.cols {
        settings.cols = c;
    }
    if a.optimized {
        let o = optimized_config(settings.device.tech, settings.rows, settings.cols);
        settings.device = o.device;
        settings.activation = o.activation;
    }
    if let Some(t) = a.topology {
        settings.topology = match t {
            TopologyArg::Gate => Topology::GateInput,
            TopologyArg::Drain => Topology::DrainInput,
        };
    }
    if let Some(act) = &a.activation {
        settings.activation = parse_activation(act)?;
    }
    Ok(())
}

/// Resolves the configuration for `cli`: defaults ← file ← `-s` ← flags.
pub fn resolve(cli: &Cli) -> Result<Settings> {
    let mut s = load_config(cli.common.config.as_deref(), &cli.common.overrides)?;
    if cli.common.seed.is_some() {
        s.seed = cli.common.seed;
    }
    if let Some(a) = cli.command.array() {
        apply_array(&mut s, a)?;
    }
    match &cli.command {
        Command::Nf { samples: Some(n), .. } => s.eval.samples = *n,
        Command::Variations { sigma, seeds, .. } => {
            if let Some(v) = sigma {
                s.variation.sigma_frac = *v;
            }
            if let Some(n) = seeds {
                s.variation_seeds = *n;
            }
        }
        Command::TrainSurrogate { records, epochs, .. } => {
            if let Some(r) = records {
                s.dataset.records = *r;
            }
            if let Some(e) = epochs {
                s.training.epochs = *e;
            }
        }
        Command::Infer { mode, limit, sigma, .. } => {
            if let Some(m) = mode {
                s.inference.mode = match m {
                    ModeArg::Ideal => MvmMode::Ideal,
                    ModeArg::Solver => MvmMode::Solver,
                    ModeArg::Surrogate => MvmMode::Surrogate,
                };
            }
            if limit.is_some() {
                s.inference.limit = *limit;
            }
            if let Some(v) = sigma {
                s.inference.variation = Some(VariationConfig {
                    sigma_frac: *v,
                    seed: 0,
                });
            }
        }
        Command::Compare { rows, cols, .. } => {
            if let Some(r) = rows {
                s.rows = *r;
            }
            if let Some(c) = cols {
                s.cols = *c;
            }
        }
        _ => {}
    }
    let seed_needed = match &cli.command {
        Command::Solve { .. } => false,
        Command::Sm { mode, .. } => matches!(mode, SmModeArg::Random),
        Command::Infer { .. } => s.inference.variation.is_some(),
        _ => true,
    };
    if seed_needed {
        s.require_seed(cli.command.name())?;
    }
    let mut s = s.seeded();
    if let (Some(seed), Some(v)) = (s.seed, s.inference.variation.as_mut()) {
        v.seed = seed;
    }
    s.crossbar().validate()?;
    Ok(s)
}

/// Files produced by a command, written only when `--out` is given.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) {
        self.files.push((name.into(), to_json(v).into_bytes()));
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.files.push((name.into(), to_csv(rows)?.into_bytes()));
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub config: CrossbarConfig,
    pub column_currents: Vec<f64>,
    pub ideal_currents: Vec<f64>,
    pub nf: Vec<Option<f64>>,
    pub iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NfReport {
    pub config: CrossbarConfig,
    pub samples: usize,
    pub seed: u64,
    pub distribution: NfDistribution,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SmReport {
    pub config: CrossbarConfig,
    pub mode: String,
    pub patterns: usize,
    pub threshold: f64,
    pub o_max: usize,
    pub points: Vec<SmPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub knob: String,
    pub value: String,
    pub tech: String,
    pub activation: String,
    pub r_on: f64,
    pub level1_available: bool,
    pub nf_median: Option<f64>,
    pub nf_q1: Option<f64>,
    pub nf_q3: Option<f64>,
    pub nf_mean: Option<f64>,
    pub sm_1: Option<f64>,
    pub o_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VariationRow {
    pub instance: usize,
    pub seed: u64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct VariationReport {
    pub config: CrossbarConfig,
    pub sigma_frac: f64,
    pub nominal: NfDistribution,
    pub instances: Vec<VariationRow>,
    pub mean_median: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_mse: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct InferSummary {
    pub config: CrossbarConfig,
    pub model: String,
    pub dataset: String,
    pub report: InferenceReport,
    pub accuracy_drop: f64,
}

fn activation_name(a: Activation) -> String {
    KnobValue::Activation(a).to_string()
}

fn default_asset(p: &Option<PathBuf>, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| formats::assets_dir().join(name))
}

/// Runs the parsed command, writing its report to `stdout`.
/// Recorded arguments minus output, configuration and threading options.
fn replayable_args(argv: &[String]) -> Vec<String> {
    const WITH_VALUE: [&str; 6] = ["-o", "--out", "-s", "--set", "--config", "--threads"];
    let mut out = Vec::new();
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if WITH_VALUE.contains(&a.as_str()) {
            it.next();
        } else if a == "--force"
            || ["--out=", "--set=", "--config=", "--threads="].iter().any(|p| a.starts_with(p))
            || ((a.starts_with("-o") || a.starts_with("-s")) && !a.starts_with("--"))
        {
            continue;
        } else {
            out.push(a.clone());
        }
    }
    out
}

/// Re-runs the command recorded in `manifest` with the manifest's resolved
/// settings. Output directory, force and threads come from the current call.
fn replay(outer: &Cli, manifest: &Path, stdout: &mut dyn Write) -> Result<()> {
    let m: RunManifest = crate::emit::read_json(manifest)?;
    if m.format != crate::manifest::FORMAT {
        return Err(Error::format(manifest, format!("expected format `{}`", crate::manifest::FORMAT)));
    }
    let mut argv = replayable_args(&m.argv);
    argv.push("--config".into());
    argv.push(manifest.display().to_string());
    if let Some(dir) = &outer.common.out {
        argv.push("--out".into());
        argv.push(dir.display().to_string());
    }
    if let Some(t) = outer.common.threads {
        argv.push("--threads".into());
        argv.push(t.to_string());
    }
    if outer.common.force {
        argv.push("--force".into());
    }
    let inner = Cli::try_parse_from(std::iter::once("xbar-dse".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Error::format(manifest, format!("recorded arguments do not parse: {e}")))?;
    if matches!(inner.command, Command::Replay { .. }) {
        return Err(Error::format(manifest, "a replay manifest cannot be replayed"));
    }
    execute(&inner, argv, stdout)
}

pub fn execute(cli: &Cli, argv: Vec<String>, stdout: &mut dyn Write) -> Result<()> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(cli, manifest, stdout);
    }
    let start = Instant::now();
    let settings = resolve(cli)?;
    let pool = Pool::new(cli.common.threads.unwrap_or(0)).map_err(|e| Error::Usage(e.to_string()))?;
    if let Some(dir) = &cli.common.out {
        // Fail before the computation rather than after it.
        let m = dir.join("manifest.json");
        if m.exists() && !cli.common.force {
            return Err(Error::Exists(m));
        }
    }
    let cfg = settings.crossbar();
    let mut out = Artifacts::default();
    let mut text = String::new();
    match &cli.command {
        Command::Replay { .. } => unreachable!("replay is dispatched before resolution"),
        Command::Solve { input, weight, .. } => {
            let inputs = parse_bits(input, cfg.rows, "--input")?;
            let weights = parse_bits(weight, cfg.rows * cfg.cols, "--weight")?;
            let solver = ArraySolver::new(&cfg, &settings.eval.solver)?;
            let r = solver.solve(&weights, &inputs, None)?;
            let ideal = solver.reference(&weights, &inputs, None)?;
            let nf = ideal
                .iter()
                .zip(&r.column_currents)
                .map(|(&i, &n)| xbar_core::metrics::nonideality_factor(i, n).map(|s| s.nf))
                .collect();
            let rep = SolveReport {
                config: cfg,
                column_currents: r.column_currents,
                ideal_currents: ideal,
                nf,
                iterations: r.iterations,
                max_residual: r.max_residual,
            };
            for (j, i) in rep.column_currents.iter().enumerate() {
                let nf = rep.nf[j].map_or("n/a".to_string(), |v| format!("{v:.4e}"));
                text += &format!(
                    "column {j}: {:.4} µA (reference {:.4} µA, NF {nf})\n",
                    i * 1e6,
                    rep.ideal_currents[j] * 1e6
                );
            }
            out.json("solve.json", &rep);
        }
        Command::Nf { .. } => {
            let req = NfRequest {
                sampler: settings.eval.sampler,
                samples: settings.eval.samples,
                seed: settings.eval.seed,
                variation: None,
                solver: settings.eval.solver,
            };
            let run = nf_distribution_with(&cfg, &req, &pool)?;
            let rep = NfReport {
                config: cfg,
                samples: req.samples,
                seed: req.seed,
                distribution: run.pooled,
            };
            text = to_json(&rep);
            out.csv("nf_samples.csv", &run.samples)?;
            out.json("nf_summary.json", &rep);
        }
        Command::Sm {
            x_max,
            mode,
            budget,
            patterns,
            ..
        } => {
            let mode = match mode {
                SmModeArg::Structured => SmMode::Structured,
                SmModeArg::Exhaustive => SmMode::Exhaustive { budget: *budget },
                SmModeArg::Random => SmMode::Random {
                    samples: *patterns,
                    seed: settings.eval.seed,
                },
            };
            let curve = sense_margin_curve(&cfg, *x_max, mode, &settings.eval.solver, &pool)?;
            let rep = SmReport {
                config: cfg,
                o_max: o_max(&curve, settings.eval.sm_threshold),
                mode: curve.mode.clone(),
                patterns: curve.patterns,
                threshold: settings.eval.sm_threshold,
                points: curve.points,
            };
            text = to_csv(&rep.points)?;
            out.csv("sm_curve.csv", &rep.points)?;
            out.json("sm_summary.json", &rep);
        }
        Command::Sweep {
            knob, values, activations, ..
        } => {
            let knob = Knob::parse(knob).map_err(|e| Error::Usage(e.to_string()))?;
            let values = values.iter().map(|v| parse_knob_value(knob, v)).collect::<Result<Vec<_>>>()?;
            let acts = if activations.is_empty() {
                vec![cfg.activation]
            } else {
                activations.iter().map(|a| parse_activation(a)).collect::<Result<_>>()?
            };
            let mut points = Vec::new();
            for a in acts {
                let spec = SweepSpec {
                    knob,
                    values: values.clone(),
                    base: CrossbarConfig { activation: a, ..cfg },
                    eval: settings.eval,
                };
                points.extend(run_sweep(&spec, &pool)?);
            }
            let rows: Vec<SweepRow> = points
                .iter()
                .map(|p| SweepRow {
                    knob: knob.name().into(),
                    value: p.value.to_string(),
                    tech: p.config.tech().name().into(),
                    activation: activation_name(p.config.activation),
                    r_on: p.metrics.bindings.r_on,
                    level1_available: p.metrics.level1_available,
                    nf_median: p.metrics.nf.map(|d| d.median),
                    nf_q1: p.metrics.nf.map(|d| d.q1),
                    nf_q3: p.metrics.nf.map(|d| d.q3),
                    nf_mean: p.metrics.nf.map(|d| d.mean),
                    sm_1: p.metrics.sm.as_ref().and_then(|c| c.sm(1)),
                    o_max: p.metrics.o_max,
                })
                .collect();
            text = to_csv(&rows)?;
            out.csv("sweep.csv", &rows)?;
            out.json("sweep.json", &points);
        }
        Command::Variations { .. } => {
            let eval = xbar_core::dse::Evaluation {
                metrics: MetricSet { nf: true, sm: false },
                ..settings.eval
            };
            let nominal = evaluate(&cfg, &eval, None, &pool)?
                .nf
                .ok_or_else(|| Error::Usage("no NF samples".into()))?;
            let mut instances = Vec::new();
            for k in 0..settings.variation_seeds {
                let vc = VariationConfig {
                    seed: settings.variation.seed.wrapping_add(k as u64),
                    ..settings.variation
                };
                let d = evaluate(&cfg, &eval, Some(vc), &pool)?
                    .nf
                    .ok_or_else(|| Error::Usage("no NF samples".into()))?;
                instances.push(VariationRow {
                    instance: k,
                    seed: vc.seed,
                    median: d.median,
                    q1: d.q1,
                    q3: d.q3,
                    mean: d.mean,
                    count: d.count,
                });
            }
            let mean_median = instances.iter().map(|r| r.median).sum::<f64>() / instances.len().max(1) as f64;
            let rep = VariationReport {
                config: cfg,
                sigma_frac: settings.variation.sigma_frac,
                nominal,
                instances,
                mean_median,
            };
            text = to_json(&rep);
            out.csv("variations.csv", &rep.instances)?;
            out.json("variations.json", &rep);
        }
        Command::TrainSurrogate { .. } => {
            let Some(dir) = &cli.common.out else {
                return Err(Error::Usage("train-surrogate needs --out DIR for the trained net".into()));
            };
            let data = generate_dataset(&cfg, &settings.dataset, &pool)?;
            let (net, report) = train(&data, &settings.training)?;
            formats::save_surrogate(&dir.join("surrogate.json"), &net, &cfg, &report, cli.common.force)?;
            let curve: Vec<EpochRow> = report
                .epoch_train_mse
                .iter()
                .enumerate()
                .map(|(epoch, &train_mse)| EpochRow { epoch, train_mse })
                .collect();
            text = to_json(&report);
            out.files.push(("surrogate.json".into(), Vec::new()));
            out.files.push(("surrogate.bin".into(), Vec::new()));
            out.csv("training.csv", &curve)?;
            out.json("train_report.json", &report);
        }
        Command::Infer {
            model,
            dataset,
            surrogate,
            ..
        } => {
            let mp = default_asset(model, "desk_mlp.json");
            let dp = default_asset(dataset, "desk_test.json");
            let m = formats::load_model(&mp)?;
            let d = formats::load_dataset(&dp)?;
            let net = load_matching_surrogate(surrogate.as_deref(), &cfg, settings.inference.mode)?;
            let report = run_inference(&m, &d, &cfg, &settings.inference, net.as_ref(), &pool)?;
            let rep = InferSummary {
                config: cfg,
                model: mp.display().to_string(),
                dataset: dp.display().to_string(),
                accuracy_drop: report.drop(),
                report,
            };
            text = to_json(&rep);
            out.json("infer.json", &rep);
        }
        Command::Compare {
            techs,
            accuracy,
            accuracy_samples,
            ..
        } => {
            let technologies = if techs.is_empty() {
                Technology::ALL.to_vec()
            } else {
                techs
                    .iter()
                    .map(|t| Technology::parse(t).map_err(|e| Error::Usage(e.to_string())))
                    .collect::<Result<_>>()?
            };
            let spec = CompareSpec {
                technologies,
                rows: cfg.rows,
                cols: cfg.cols,
                eval: settings.eval,
                variation: settings.variation,
            };
            let mut report = compare_technologies(&spec, &pool)?;
            if *accuracy {
                let m = formats::load_model(&formats::assets_dir().join("desk_mlp.json"))?;
                let d = formats::load_dataset(&formats::assets_dir().join("desk_test.json"))?;
                let ic = InferenceConfig {
                    limit: accuracy_samples.or(settings.inference.limit),
                    ..settings.inference
                };
                for e in &mut report.entries {
                    e.accuracy = Some(accuracy_entry(&m, &d, &e.config, &ic, &settings, &pool)?);
                }
            }
            text = to_json(&report);
            out.json("compare.json", &report);
        }
    }
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(dir) = &cli.common.out {
        let mut manifest = RunManifest::new(cli.command.name(), argv, &settings, pool.threads());
        for (name, bytes) in &out.files {
            if !bytes.is_empty() {
                write_bytes(&dir.join(name), bytes, cli.common.force)?;
            }
            manifest.outputs.push(name.clone());
        }
        manifest.wall_time_s = start.elapsed().as_secs_f64();
        write_bytes(&dir.join("manifest.json"), to_json(&manifest).as_bytes(), cli.common.force)?;
    }
    Ok(())
}

fn load_matching_surrogate(path: Option<&Path>, cfg: &CrossbarConfig, mode: MvmMode) -> Result<Option<SurrogateNet>> {
    let Some(p) = path else {
        if mode == MvmMode::Surrogate {
            return Err(Error::Usage("surrogate mode needs --surrogate FILE".into()));
        }
        return Ok(None);
    };
    let (net, m) = formats::load_surrogate(p)?;
    let trained = CrossbarConfig {
        activation: cfg.activation,
        ..m.config
    };
    if trained != *cfg {
        return Err(Error::Usage(format!(
            "{} was trained for a different array ({} {}x{}); retrain for this configuration",
            p.display(),
            m.config.tech(),
            m.config.rows,
            m.config.cols
        )));
    }
    Ok(Some(net))
}

/// Ideal, nominal and variation-averaged solver accuracy of `model` on `cfg`.
pub fn accuracy_entry<E: xbar_core::exec::Executor>(
    model: &Mlp,
    data: &LabeledData,
    cfg: &CrossbarConfig,
    ic: &InferenceConfig,
    settings: &Settings,
    exec: &E,
) -> Result<AccuracyEntry> {
    let run = |mode, variation| {
        let ic = InferenceConfig { mode, variation, ..*ic };
        run_inference(model, data, cfg, &ic, None, exec)
    };
    let ideal = run(MvmMode::Ideal, None)?.accuracy;
    let nominal = run(MvmMode::Solver, None)?.accuracy;
    let varied = if settings.variation.sigma_frac > 0.0 && settings.variation_seeds > 0 {
        let mut sum = 0.0;
        for k in 0..settings.variation_seeds {
            let vc = VariationConfig {
                seed: settings.variation.seed.wrapping_add(k as u64),
                ..settings.variation
            };
            sum += run(MvmMode::Solver, Some(vc))?.accuracy;
        }
        Some(sum / settings.variation_seeds as f64)
    } else {
        None
    };
    Ok(AccuracyEntry { ideal, nominal, varied })
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn main_with(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match execute(&cli, argv.into_iter().skip(1).collect(), stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
