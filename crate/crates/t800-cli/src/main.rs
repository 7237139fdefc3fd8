//! `t800` — command-line front end of the packet filter laboratory.
//!
//! Subcommands: `train`, `eval`, `synth`, `filter`, `bench`, `analyze`.
//! Data goes to files or standard output; progress and diagnostics go to
//! standard error. Every subcommand is reproducible from its flags and
//! `--seed`: identical invocations produce byte-identical primary outputs.
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use t800_core::analysis::influence_report;
use t800_core::filter::{filter_pcap, T800Config};
use t800_core::harness::{
    read_metrics_csv, responses_from_rows, run_campaign, train_policy_bank, write_metrics_csv,
    CampaignConfig, PolicyBank, RunOutcome,
};
use t800_core::packet::FEATURE_LEN;
use t800_core::policy::{load_model_from_path, save_model_to_path, PolicyModel};
use t800_core::synth::{
    export_dataset, gen_benign, gen_scan, write_pcap, Intensity, LabeledStream, ScanProfile,
    ScanTool, TrafficProfile,
};
use t800_core::trainer::{
    evaluate, split_stratified, train_dt_with, train_logistic, train_mlp, train_svm, EvalReport,
    LabeledDataset, LinearTrainConfig, MlpTrainConfig, SvmTrainConfig,
};

#[derive(Parser)]
#[command(name = "t800", version, about = "ML packet filter engine and benchmark laboratory")]
struct Cli {
    /// Master seed for all randomized steps.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Verbose diagnostics on standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a filtering policy on a labeled dataset and report held-out F1.
    Train(TrainArgs),
    /// Evaluate a model file against a labeled dataset.
    Eval(EvalArgs),
    /// Generate synthetic traffic or datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Replay a pcap through the filter and write the accepted packets.
    Filter(FilterArgs),
    /// Run the benchmark campaign over the policy and traffic grid.
    Bench(BenchArgs),
    /// Influence-of-factors analysis over a metrics CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Dt,
    Logreg,
    Svm,
    Mlp,
}

#[derive(Args)]
struct TrainArgs {
    /// Model family to train.
    #[arg(value_enum)]
    kind: ModelKind,
    /// Labeled dataset (delimited text with header, label column last).
    #[arg(long)]
    dataset: PathBuf,
    /// Output model file.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Held-out fraction for the evaluation report.
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    /// Decision tree depth bound.
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Minimum node size for a split attempt.
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Training epochs (gradient models). The MLP default matches the
    /// reference recipe.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (gradient models).
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size (gradient models).
    #[arg(long)]
    batch_size: Option<usize>,
    /// SVM inverse regularization strength.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// One benign bulk-transfer flow at a controlled intensity.
    Benign(SynthBenignArgs),
    /// A SYN port scan with per-tool header idiosyncrasies.
    Scan(SynthScanArgs),
    /// Benign traffic salted with probes from every scanner tool,
    /// exported as a labeled dataset.
    Dataset(SynthDatasetArgs),
}

#[derive(Args)]
struct SynthBenignArgs {
    /// Intensity in Mbps (8 or 16).
    #[arg(long, default_value_t = 8)]
    intensity: u64,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Output pcap path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthScanArgs {
    /// Scanner tool profile: zmap, masscan, hping3, unicornscan, nmap.
    #[arg(long, default_value = "nmap")]
    tool: String,
    /// Target ports, e.g. "1-1000" or "22,80,443".
    #[arg(long, default_value = "1-1000")]
    ports: String,
    /// Probe rate in packets per second.
    #[arg(long, default_value_t = 100)]
    rate: u64,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Output pcap path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthDatasetArgs {
    /// Benign capture length in seconds.
    #[arg(long, default_value_t = 18.0)]
    duration: f64,
    /// Probe rate per scanner tool.
    #[arg(long, default_value_t = 60)]
    scan_rate: u64,
    /// Output dataset path (delimited text).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Input pcap.
    #[arg(long)]
    input: PathBuf,
    /// Policy model file; omit with --disabled for pass-through.
    #[arg(long, conflicts_with = "disabled")]
    model: Option<PathBuf>,
    /// Run the filter in disabled (pass-through) mode.
    #[arg(long)]
    disabled: bool,
    /// Output pcap of accepted packets.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Replicas per grid cell.
    #[arg(long, default_value_t = 5)]
    replicas: usize,
    /// Run duration in seconds (one metric window per second).
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Use the reference protocol dimensions: 360 s runs, 30 replicas.
    #[arg(long)]
    paper_scale: bool,
    /// Directory with dt.json/logreg.json/svm.json/mlp.json; trains its
    /// own seeded models when omitted.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Metrics CSV output.
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
    /// Control-protocol transport for the device under test.
    #[arg(long, value_parser = ["channel", "udp"], default_value = "channel")]
    transport: String,
    /// Scan probe rate during M1 bursts.
    #[arg(long, default_value_t = 20)]
    scan_rate: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Metrics CSV produced by `bench`.
    #[arg(long)]
    metrics: PathBuf,
    /// Metric column to analyze.
    #[arg(long, default_value = "cpu_busy_fraction")]
    metric: String,
    /// Optional machine-readable report output (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Global context shared by every subcommand.
struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    verbose: u8,
}

impl Ctx {
    /// Resolve an output path against --out-dir (absolute paths win).
    fn out(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

fn intensity_from_mbps(mbps: u64) -> Result<Intensity> {
    match mbps {
        8 => Ok(Intensity::I0),
        16 => Ok(Intensity::I1),
        other => bail!("intensity must be 8 or 16 Mbps, got {other}"),
    }
}

fn parse_ports(spec: &str) -> Result<Vec<u16>> {
    let mut ports = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: u16 = lo.trim().parse().context("bad port range start")?;
            let hi: u16 = hi.trim().parse().context("bad port range end")?;
            if lo > hi {
                bail!("port range {lo}-{hi} is reversed");
            }
            ports.extend(lo..=hi);
        } else if !part.is_empty() {
            ports.push(part.parse().context("bad port number")?);
        }
    }
    if ports.is_empty() {
        bail!("port specification `{spec}` selects no ports");
    }
    Ok(ports)
}

fn report_line(kind: &str, r: &EvalReport) -> String {
    format!(
        "kind={kind} precision={} recall={} f1={} accuracy={} tn={} fp={} fn={} tp={}",
        r.precision,
        r.recall,
        r.f1,
        r.accuracy,
        r.confusion[0][0],
        r.confusion[0][1],
        r.confusion[1][0],
        r.confusion[1][1],
    )
}

fn cmd_train(ctx: &Ctx, args: TrainArgs) -> Result<()> {
    let dataset = LabeledDataset::read_csv_from_path(&args.dataset)
        .with_context(|| format!("reading dataset {}", args.dataset.display()))?;
    if dataset.is_empty() {
        bail!("dataset has no samples");
    }
    let (train, test) = split_stratified(&dataset, args.test_fraction, ctx.seed);
    let seed = ctx.seed;
    let model = match args.kind {
        ModelKind::Dt => PolicyModel::Dt(train_dt_with(&train, args.max_depth, args.min_leaf)),
        ModelKind::Logreg => {
            let cfg = LinearTrainConfig {
                epochs: args.epochs.unwrap_or(200),
                lr: args.lr.unwrap_or(0.1),
                batch_size: args.batch_size.unwrap_or(32),
                seed,
            };
            PolicyModel::Linear(train_logistic(&train, &cfg).map_err(|e| anyhow!("{e}"))?)
        }
        ModelKind::Svm => {
            let cfg = SvmTrainConfig {
                epochs: args.epochs.unwrap_or(200),
                lr: args.lr.unwrap_or(1e-3),
                c: args.c,
                batch_size: args.batch_size.unwrap_or(32),
                seed,
            };
            PolicyModel::Linear(train_svm(&train, &cfg).map_err(|e| anyhow!("{e}"))?)
        }
        ModelKind::Mlp => {
            let cfg = MlpTrainConfig {
                epochs: args.epochs.unwrap_or(2000),
                lr: args.lr.unwrap_or(1e-5),
                batch_size: args.batch_size.unwrap_or(260),
                seed,
                hidden: 16,
            };
            PolicyModel::Mlp(train_mlp(&train, &cfg).map_err(|e| anyhow!("{e}"))?)
        }
    };
    let report = if test.is_empty() {
        evaluate(&model, &train)
    } else {
        evaluate(&model, &test)
    };
    let out = ctx.out(&args.out);
    save_model_to_path(&model, &out)
        .with_context(|| format!("writing model {}", out.display()))?;
    eprintln!(
        "trained {} on {} samples, evaluated on {}",
        model.kind(),
        train.len(),
        test.len()
    );
    println!("{}", report_line(model.kind(), &report));
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dataset = LabeledDataset::read_csv_from_path(&args.dataset)?;
    let model = load_model_from_path(&args.model, dataset.feature_len)?;
    let report = evaluate(&model, &dataset);
    println!("{}", report_line(model.kind(), &report));
    Ok(())
}

fn cmd_synth(ctx: &Ctx, cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Benign(args) => {
            let profile = TrafficProfile {
                intensity: intensity_from_mbps(args.intensity)?,
                malicious: false,
                duration_s: args.duration,
                seed: ctx.seed,
            };
            let stream = gen_benign(&profile);
            let out = ctx.out(&args.out);
            write_pcap(&stream, File::create(&out)?)?;
            eprintln!("wrote {} packets to {}", stream.len(), out.display());
        }
        SynthCommand::Scan(args) => {
            let tool = ScanTool::from_name(&args.tool)
                .ok_or_else(|| anyhow!("unknown scanner tool `{}`", args.tool))?;
            let profile = ScanProfile {
                tool,
                target_ports: parse_ports(&args.ports)?,
                rate_pps: args.rate,
            };
            let stream = gen_scan(&profile, args.duration, ctx.seed);
            let out = ctx.out(&args.out);
            write_pcap(&stream, File::create(&out)?)?;
            eprintln!("wrote {} probes to {}", stream.len(), out.display());
        }
        SynthCommand::Dataset(args) => {
            let mut rng = t800_core::rng::SplitMix64::new(ctx.seed);
            let benign = LabeledStream::benign(gen_benign(&TrafficProfile {
                intensity: Intensity::I0,
                malicious: false,
                duration_s: args.duration,
                seed: rng.next_u64(),
            }));
            let mut streams = vec![benign];
            for tool in ScanTool::ALL {
                streams.push(LabeledStream::scan(gen_scan(
                    &ScanProfile {
                        tool,
                        target_ports: (1..=1000).collect(),
                        rate_pps: args.scan_rate,
                    },
                    args.duration,
                    rng.next_u64(),
                )));
            }
            let dataset = export_dataset(&streams);
            let out = ctx.out(&args.out);
            dataset.write_csv_to_path(&out)?;
            eprintln!(
                "wrote {} samples ({} malicious) to {}",
                dataset.len(),
                dataset.count_label(t800_core::Class::Malicious),
                out.display()
            );
        }
    }
    Ok(())
}

fn cmd_filter(ctx: &Ctx, args: FilterArgs) -> Result<()> {
    let config = if args.disabled {
        T800Config::disabled()
    } else {
        let path = args
            .model
            .as_ref()
            .ok_or_else(|| anyhow!("either --model or --disabled is required"))?;
        let model = load_model_from_path(path, FEATURE_LEN)?;
        T800Config::stateless(model.into_policy())
    };
    let input =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let output = File::create(ctx.out(&args.output))?;
    let counters = filter_pcap(input, config, output)?;
    eprintln!(
        "classify time: total={}ns max={}ns",
        counters.classify_time_total_ns, counters.classify_time_max_ns
    );
    println!(
        "accepted={} dropped={} classifier_errors={}",
        counters.accepted, counters.dropped, counters.classifier_errors
    );
    Ok(())
}

fn load_bank(dir: &Path) -> Result<PolicyBank> {
    let mut bank = PolicyBank::new();
    for kind in ["dt", "logreg", "svm", "mlp"] {
        let path = dir.join(format!("{kind}.json"));
        let model = load_model_from_path(&path, FEATURE_LEN)
            .with_context(|| format!("loading {}", path.display()))?;
        if model.kind() != kind {
            bail!("{} holds a {} model", path.display(), model.kind());
        }
        bank.insert_model(model);
    }
    Ok(bank)
}

fn cmd_bench(ctx: &Ctx, args: BenchArgs) -> Result<()> {
    let seed = ctx.seed;
    let bank = match &args.models {
        Some(dir) => load_bank(dir)?,
        None => {
            eprintln!("training grid policies from seeded synthetic data");
            let trained = train_policy_bank(seed);
            for (kind, report) in &trained.reports {
                eprintln!("  {}", report_line(kind, report));
            }
            trained.bank
        }
    };
    let mut cfg = if args.paper_scale {
        CampaignConfig::paper_scale(seed)
    } else {
        CampaignConfig::desk_scale(seed)
    };
    if !args.paper_scale {
        cfg.replicas = args.replicas;
        cfg.duration_s = args.duration;
    }
    cfg.scan.rate_pps = args.scan_rate;
    cfg.use_udp_transport = args.transport == "udp";
    if ctx.verbose > 0 {
        eprintln!(
            "grid: {} policies x 4 cells x {} replicas of {}s ({} transport)",
            cfg.policy_codes.len(),
            cfg.replicas,
            cfg.duration_s,
            args.transport
        );
    }
    let runs = run_campaign(&cfg, Arc::new(bank)).map_err(|e| anyhow!("{e}"))?;
    let aborted = runs
        .iter()
        .filter(|r| matches!(r.outcome, RunOutcome::Aborted(_)))
        .count();
    let out = ctx.out(&args.out);
    let mut sink = File::create(&out)?;
    write_metrics_csv(&runs, &mut sink).map_err(|e| anyhow!("{e}"))?;
    sink.flush()?;
    eprintln!(
        "campaign complete: {} runs ({aborted} aborted), metrics in {}",
        runs.len(),
        out.display()
    );
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, args: AnalyzeArgs) -> Result<()> {
    let rows = read_metrics_csv(File::open(&args.metrics)?).map_err(|e| anyhow!("{e}"))?;
    let responses = responses_from_rows(&rows, &args.metric).map_err(|e| anyhow!("{e}"))?;
    let report =
        influence_report(&responses, &["dt", "logreg", "svm", "mlp"]).map_err(|e| anyhow!("{e}"))?;
    print!("{}", report.render_table());
    if let Some(path) = &args.out {
        let path = ctx.out(path);
        std::fs::write(&path, report.to_csv())?;
        eprintln!("machine-readable report in {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
        verbose: cli.verbose,
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(cmd) => cmd_synth(&ctx, cmd),
        Command::Filter(args) => cmd_filter(&ctx, args),
        Command::Bench(args) => cmd_bench(&ctx, args),
        Command::Analyze(args) => cmd_analyze(&ctx, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
