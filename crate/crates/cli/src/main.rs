use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qutrit_qml::encoding::{EncodingSpec, RescaleMap};
use qutrit_qml::encoding_opt::{train_encoding, LossMode};
use qutrit_qml::experiment::{
    run_hardware_protocol, run_optimized, run_repeated, run_sweep, Cell, EncodingMode, ExperimentConfig,
    HardwareConfig, HardwareSummary, LabeledDataset, OptimizedSummary, RetryMetric, SweepSummary, NUM_CLASSES,
};
use qutrit_qml::io::{
    emit_boxplot_svg, emit_trajectory_svg, hardware_table_tsv, load_dataset_report, load_unitary, parse_encoding,
    parse_optimizer, parse_shots, read_json, summary_table_tsv, sweep_table_tsv, write_json, write_json_lines,
    DatasetSchema, RunManifest, Star, SEED_ENV,
};
use qutrit_qml::optim::SpsaConfig;
use qutrit_qml::su3::{decompose_su3, reconstruction_error, Su3Form};

#[derive(Parser)]
#[command(name = "qml", version, about = "Qubit and qutrit variational classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the affine data encoding on a whole dataset.
    EncodeTrain(EncodeTrainArgs),
    /// Repeated train/test splits for one cell and encoding.
    Train(TrainArgs),
    /// All feature orderings of a cell with fixed encoding.
    Sweep(SweepArgs),
    /// Shot-budgeted one-qutrit pipeline over several seeds.
    HwProtocol(HwArgs),
    /// Decompose a 3×3 unitary into qutrit rotation angles.
    Decompose(DecomposeArgs),
    /// Render SVG figures from saved summaries.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Column preset: iris or penguins (inferred from the file name by default).
    #[arg(long)]
    schema: Option<String>,
}

impl DataArgs {
    fn load(&self, fallback: Option<&Path>) -> Result<LabeledDataset> {
        let path = self.dataset.as_deref().or(fallback).context("no dataset given (use --dataset)")?;
        let schema = match &self.schema {
            Some(name) => DatasetSchema::preset(name, path)?,
            None => DatasetSchema::infer(path),
        };
        let report = load_dataset_report(&schema)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        Ok(report.dataset)
    }
}

#[derive(Args)]
struct EncodeTrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "qutrit1-nce")]
    cell: Cell,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// `exact` or `pairs,shots,seed`.
    #[arg(long, default_value = "exact")]
    shots: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Run manifest; flags given on the command line take precedence.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    cell: Option<Cell>,
    /// Number of train/test splits.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// quasi-newton or rotosolve.
    #[arg(long)]
    optimizer: Option<String>,
    /// `exact` or `pairs,shots,seed`.
    #[arg(long)]
    shots: Option<String>,
    /// Compare train instead of test accuracy against the retry threshold.
    #[arg(long)]
    retry_on_train: bool,
    /// Stop optimized-encoding training after SPSA.
    #[arg(long)]
    no_encoding_refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn manifest(&self, default_encoding: impl Fn(Cell) -> EncodingMode) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => {
                let cell = self.cell.context("either --manifest or --cell is required")?;
                let mut m = RunManifest::new(ExperimentConfig::new(cell, default_encoding(cell)));
                m.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
                m
            }
        };
        let c = &mut m.config;
        if let Some(cell) = self.cell {
            c.cell = cell;
        }
        if let Some(n) = self.seeds {
            c.repetitions = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.optimizer {
            c.optimizer = parse_optimizer(o)?;
        }
        if let Some(s) = &self.shots {
            c.shots = parse_shots(s)?;
        }
        if self.retry_on_train {
            c.retry_metric = RetryMetric::Train;
        }
        if self.no_encoding_refine {
            c.encoding_refine = false;
        }
        if let Some(o) = &self.out {
            m.output_dir = o.clone();
        }
        Ok(m)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    exp: ExperimentArgs,
    /// `optimized` or `fixed:i,j,...`.
    #[arg(long)]
    encoding: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Also run optimized-encoding trials for the box-plot star.
    #[arg(long)]
    with_optimized: bool,
}

#[derive(Args)]
struct HwArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 8)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    encoding_iterations: usize,
    #[arg(long, default_value_t = 32)]
    rotosolve_iterations: usize,
    /// Exact probabilities instead of shots.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Matrix file: three lines of `re,im` entries.
    #[arg(long)]
    matrix: PathBuf,
    /// hardware or theoretical.
    #[arg(long, default_value = "hardware")]
    form: Su3Form,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Sweep summary JSON files.
    #[arg(long, num_args = 1..)]
    sweeps: Vec<PathBuf>,
    /// Optimized-encoding summary JSON files drawn as stars.
    #[arg(long, num_args = 1..)]
    stars: Vec<PathBuf>,
    /// Hardware-protocol summary JSON for the trajectory figure.
    #[arg(long)]
    hardware: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn records_file(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}

fn encode_train(args: &EncodeTrainArgs) -> Result<()> {
    let ds = args.data.load(None)?;
    let cell = args.cell;
    if cell.features_encoded() < ds.num_features() {
        bail!("{cell} cannot hold all {} features", ds.num_features());
    }
    let map = RescaleMap::fit(&ds.points)?;
    let x = ds.points.iter().map(|p| map.rescale(p)).collect::<qutrit_qml::Result<Vec<_>>>()?;
    let spec =
        EncodingSpec::identity(cell.scheme(), cell.dim(), ds.num_features())?.with_num_qudits(cell.num_qudits())?;
    let spsa = SpsaConfig { max_iterations: args.iterations, seed: args.seed, ..SpsaConfig::default() };
    let mode = match parse_shots(&args.shots)? {
        Some(p) => LossMode::Shots(p),
        None => LossMode::Exact,
    };
    let r = train_encoding(&x, &ds.labels, NUM_CLASSES, &spec, &spsa, mode)?;
    let dir = out_dir(&args.out)?;
    write_json_lines(records_file(dir, "encoding_trajectory.jsonl")?, &r.trajectory)?;
    write_json(&dir.join("encoding.json"), &r)?;
    println!("initial loss {:.6}  trained loss {:.6}", r.initial.loss, r.trained.loss);
    println!("purities {:?}", r.trained.purities);
    Ok(())
}

fn emit_repeated(m: &RunManifest, s: &OptimizedSummary) -> Result<()> {
    let dir = out_dir(&m.output_dir)?;
    write(&dir.join("manifest.txt"), &m.to_text())?;
    if m.emit_records {
        write_json_lines(records_file(dir, "trials.jsonl")?, &s.records)?;
    }
    if m.emit_summary {
        write_json(&dir.join(format!("train_{}_{}.json", s.dataset, s.cell)), s)?;
        write(&dir.join("summary.tsv"), &summary_table_tsv(&[], std::slice::from_ref(s)))?;
    }
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let mut m = args.exp.manifest(|c| EncodingMode::Fixed((0..c.features_encoded()).collect()))?;
    if let Some(e) = &args.encoding {
        m.config.encoding = parse_encoding(e)?;
    }
    m.config.validate()?;
    let ds = args.data.load(m.dataset.as_deref())?;
    let s = run_repeated(&ds, &m.config)?;
    emit_repeated(&m, &s)?;
    println!("{} {}: test accuracy {:.4} ± {:.4} over {} splits", s.dataset, s.cell, s.mean, s.std, s.accuracies.len());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let m = args.exp.manifest(|c| EncodingMode::Fixed((0..c.features_encoded()).collect()))?;
    m.config.validate()?;
    let ds = args.data.load(m.dataset.as_deref())?;
    let s = run_sweep(&ds, &m.config)?;
    let optimized = if args.with_optimized { Some(run_optimized(&ds, &m.config)?) } else { None };
    let dir = out_dir(&m.output_dir)?;
    write(&dir.join("manifest.txt"), &m.to_text())?;
    if m.emit_records {
        write_json_lines(records_file(dir, "sweep.jsonl")?, &s.results)?;
        if let Some(o) = &optimized {
            write_json_lines(records_file(dir, "trials.jsonl")?, &o.records)?;
        }
    }
    if m.emit_summary {
        write_json(&dir.join(format!("sweep_{}_{}.json", s.dataset, s.cell)), &s)?;
        write(&dir.join("sweep.tsv"), &sweep_table_tsv(&s))?;
        write(&dir.join("summary.tsv"), &summary_table_tsv(std::slice::from_ref(&s), optimized.as_slice()))?;
        if let Some(o) = &optimized {
            write_json(&dir.join(format!("optimized_{}_{}.json", o.dataset, o.cell)), o)?;
        }
    }
    if m.emit_svg {
        let stars: Vec<Star> = optimized.iter().map(Star::from).collect();
        write(&dir.join("boxplot.svg"), &emit_boxplot_svg(std::slice::from_ref(&s), &stars)?)?;
    }
    let f = &s.summary;
    println!(
        "{} {}: {} orderings, min {:.4} median {:.4} max {:.4}",
        s.dataset,
        s.cell,
        s.results.len(),
        f.min,
        f.median,
        f.max
    );
    if let Some(o) = &optimized {
        println!("optimized encoding: {:.4} ± {:.4}", o.mean, o.std);
    }
    Ok(())
}

fn hw_protocol(args: &HwArgs) -> Result<()> {
    let ds = args.data.load(None)?;
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v.parse().with_context(|| format!("invalid {SEED_ENV}"))?,
        Err(_) => args.seed,
    };
    let config = HardwareConfig {
        seeds: args.seeds,
        master_seed: seed,
        encoding_iterations: args.encoding_iterations,
        rotosolve_iterations: args.rotosolve_iterations,
        exact: args.exact,
        ..HardwareConfig::default()
    };
    let s = run_hardware_protocol(&ds, &config)?;
    let dir = out_dir(&args.out)?;
    write_json_lines(records_file(dir, "hw_iterations.jsonl")?, &s.iteration_records())?;
    write_json(&dir.join("hw_summary.json"), &s)?;
    write(&dir.join("hw_summary.tsv"), &hardware_table_tsv(&s))?;
    write(&dir.join("trajectory.svg"), &emit_trajectory_svg(&s)?)?;
    let (first, last) = (&s.test_band[0], &s.test_band[s.test_band.len() - 1]);
    println!("test accuracy: initial {:.4} ± {:.4}, final {:.4} ± {:.4}", first.mean, first.std, last.mean, last.std);
    Ok(())
}

fn decompose(args: &DecomposeArgs) -> Result<()> {
    let u = load_unitary(&args.matrix)?;
    let d = decompose_su3(&u, args.form)?;
    if args.json {
        println!("{}", serde_json_string(&d)?);
        return Ok(());
    }
    for (i, t) in d.theta.iter().enumerate() {
        println!("theta{} = {t:.17e}", i + 1);
    }
    println!("global_phase = {:.17e}", d.global_phase);
    println!("reconstruction_error = {:.3e}", reconstruction_error(&u, &d));
    Ok(())
}

fn serde_json_string(d: &qutrit_qml::su3::Su3Decomposition) -> Result<String> {
    let mut buf = Vec::new();
    write_json_lines(&mut buf, std::slice::from_ref(d))?;
    Ok(String::from_utf8(buf)?.trim_end().to_string())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let svg = match &args.hardware {
        Some(h) => {
            if !args.sweeps.is_empty() || !args.stars.is_empty() {
                bail!("--hardware cannot be combined with --sweeps or --stars");
            }
            emit_trajectory_svg(&read_json::<HardwareSummary>(h)?)?
        }
        None => {
            let sweeps =
                args.sweeps.iter().map(|p| read_json::<SweepSummary>(p)).collect::<qutrit_qml::Result<Vec<_>>>()?;
            let stars = args
                .stars
                .iter()
                .map(|p| read_json::<OptimizedSummary>(p).map(|o| Star::from(&o)))
                .collect::<qutrit_qml::Result<Vec<_>>>()?;
            emit_boxplot_svg(&sweeps, &stars)?
        }
    };
    write(&args.output, &svg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::EncodeTrain(a) => encode_train(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::HwProtocol(a) => hw_protocol(a),
        Command::Decompose(a) => decompose(a),
        Command::Plot(a) => plot(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
