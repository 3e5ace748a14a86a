//! Dataset loading, run manifests, record emission and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::encoding_opt::ShotProtocol;
use crate::experiment::{
    Cell, ClassifierOptimizer, EncodingMode, ExperimentConfig, HardwareSummary, IterationBand, LabeledDataset,
    OptimizedSummary, RetryMetric, SweepSummary,
};
use crate::unitary::UnitaryMatrix;
use crate::{Error, Result};

/// Environment variable overriding the manifest seed.
pub const SEED_ENV: &str = "QML_SEED";

/// Column layout of a labelled CSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSchema {
    pub name: String,
    pub path: PathBuf,
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub label_map: Vec<(String, usize)>,
    /// Complete-row count of the canonical file; a mismatch only warns.
    pub expected_rows: Option<usize>,
}

impl DatasetSchema {
    pub fn iris(path: impl Into<PathBuf>) -> Self {
        Self {
            name: "iris".into(),
            path: path.into(),
            feature_columns: ["sepal_length", "sepal_width", "petal_length", "petal_width"].map(String::from).to_vec(),
            label_column: "species".into(),
            label_map: vec![("setosa".into(), 0), ("versicolor".into(), 1), ("virginica".into(), 2)],
            expected_rows: Some(150),
        }
    }

    pub fn penguins(path: impl Into<PathBuf>) -> Self {
        Self {
            name: "penguins".into(),
            path: path.into(),
            feature_columns: ["bill_length_mm", "bill_depth_mm", "flipper_length_mm", "body_mass_g"]
                .map(String::from)
                .to_vec(),
            label_column: "species".into(),
            label_map: vec![("Adelie".into(), 0), ("Chinstrap".into(), 1), ("Gentoo".into(), 2)],
            expected_rows: Some(333),
        }
    }

    /// Preset by name (`iris` or `penguins`).
    pub fn preset(name: &str, path: impl Into<PathBuf>) -> Result<Self> {
        match name {
            "iris" => Ok(Self::iris(path)),
            "penguins" => Ok(Self::penguins(path)),
            other => Err(Error::Config(format!("unknown dataset preset `{other}`"))),
        }
    }

    /// Preset guessed from the file name, `iris` when nothing matches.
    pub fn infer(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_ascii_lowercase();
        if stem.contains("penguin") {
            Self::penguins(path)
        } else {
            Self::iris(path)
        }
    }
}

/// Loaded dataset with loader diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadReport {
    pub dataset: LabeledDataset,
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan")
}

/// Parses CSV text per `schema`, keeping complete rows only: a row with a
/// missing value in any column is dropped.
pub fn parse_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Dataset(format!("missing column `{name}`")))
    };
    let feature_idx = schema.feature_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;
    let label_idx = column(&schema.label_column)?;
    let labels: BTreeMap<&str, usize> = schema.label_map.iter().map(|(k, v)| (k.as_str(), *v)).collect();

    let mut points = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let cells: Vec<&str> = feature_idx.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        let label = record.get(label_idx).unwrap_or("");
        if record.len() < headers.len() || record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let x = cells
            .iter()
            .zip(&schema.feature_columns)
            .map(|(c, name)| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Dataset(format!("line {line}: non-numeric `{name}` value `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let y = *labels.get(label).ok_or_else(|| Error::Dataset(format!("line {line}: unknown label `{label}`")))?;
        points.push(x);
        ys.push(y);
    }

    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("{}: dropped {dropped} rows with missing values", schema.name));
    }
    if let Some(expected) = schema.expected_rows {
        if points.len() != expected {
            warnings.push(format!("{}: expected {expected} complete rows, found {}", schema.name, points.len()));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let dataset = LabeledDataset::new(&schema.name, schema.feature_columns.clone(), points, ys)?;
    Ok(LoadReport { dataset, dropped_rows: dropped, warnings })
}

pub fn load_dataset_report(schema: &DatasetSchema) -> Result<LoadReport> {
    let file =
        std::fs::File::open(&schema.path).map_err(|e| Error::Dataset(format!("{}: {e}", schema.path.display())))?;
    parse_dataset(std::io::BufReader::new(file), schema)
}

pub fn load_dataset(schema: &DatasetSchema) -> Result<LabeledDataset> {
    Ok(load_dataset_report(schema)?.dataset)
}

/// Experiment configuration plus output settings, stored as `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub emit_records: bool,
    pub emit_summary: bool,
    pub emit_svg: bool,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            dataset: None,
            output_dir: PathBuf::from("out"),
            emit_records: true,
            emit_summary: true,
            emit_svg: true,
        }
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("cell", c.cell.to_string());
        kv("encoding", format_encoding(&c.encoding));
        kv("optimizer", format_optimizer(c.optimizer).into());
        kv("repetitions", c.repetitions.to_string());
        kv("train_fraction", c.train_fraction.to_string());
        kv("retry_threshold", c.retry_threshold.to_string());
        kv("max_retries", c.max_retries.to_string());
        kv("retry_metric", format_metric(c.retry_metric).into());
        kv("encoding_iterations", c.encoding_iterations.to_string());
        kv("encoding_refine", c.encoding_refine.to_string());
        kv("rotosolve_iterations", c.rotosolve_iterations.to_string());
        kv("shots", format_shots(c.shots.as_ref()));
        kv("seed", c.seed.to_string());
        if let Some(d) = &self.dataset {
            kv("dataset", d.display().to_string());
        }
        kv("output_dir", self.output_dir.display().to_string());
        kv("emit_records", self.emit_records.to_string());
        kv("emit_summary", self.emit_summary.to_string());
        kv("emit_svg", self.emit_svg.to_string());
        s
    }

    /// Parses manifest text. `cell` is required, other keys default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("manifest line {}: expected key = value", n + 1)))?;
            if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("manifest line {}: duplicate key `{}`", n + 1, k.trim())));
            }
        }
        let cell: Cell =
            entries.remove("cell").ok_or_else(|| Error::Parse("manifest is missing `cell`".into()))?.parse()?;
        let mut m = Self::new(ExperimentConfig::new(cell, EncodingMode::Fixed((0..cell.features_encoded()).collect())));
        for (k, v) in entries {
            let c = &mut m.config;
            match k.as_str() {
                "encoding" => c.encoding = parse_encoding(&v)?,
                "optimizer" => c.optimizer = parse_optimizer(&v)?,
                "repetitions" => c.repetitions = parse_num(&k, &v)?,
                "train_fraction" => c.train_fraction = parse_num(&k, &v)?,
                "retry_threshold" => c.retry_threshold = parse_num(&k, &v)?,
                "max_retries" => c.max_retries = parse_num(&k, &v)?,
                "retry_metric" => c.retry_metric = parse_metric(&v)?,
                "encoding_iterations" => c.encoding_iterations = parse_num(&k, &v)?,
                "encoding_refine" => c.encoding_refine = parse_num(&k, &v)?,
                "rotosolve_iterations" => c.rotosolve_iterations = parse_num(&k, &v)?,
                "shots" => c.shots = parse_shots(&v)?,
                "seed" => c.seed = parse_num(&k, &v)?,
                "dataset" => m.dataset = Some(PathBuf::from(v)),
                "output_dir" => m.output_dir = PathBuf::from(v),
                "emit_records" => m.emit_records = parse_num(&k, &v)?,
                "emit_summary" => m.emit_summary = parse_num(&k, &v)?,
                "emit_svg" => m.emit_svg = parse_num(&k, &v)?,
                _ => return Err(Error::Parse(format!("unknown manifest key `{k}`"))),
            }
        }
        m.config.validate()?;
        Ok(m)
    }

    /// Replaces the seed when `value` is set.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.config.seed = parse_num(SEED_ENV, v)?;
        }
        Ok(())
    }

    /// Reads a manifest file and applies the environment seed override.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m = Self::parse(&std::fs::read_to_string(path)?)?;
        m.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(m)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("invalid value `{v}` for `{key}`")))
}

fn format_encoding(e: &EncodingMode) -> String {
    match e {
        EncodingMode::Optimized => "optimized".into(),
        EncodingMode::Fixed(order) => {
            format!("fixed:{}", order.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
        }
    }
}

/// `optimized` or `fixed:i,j,...`.
pub fn parse_encoding(v: &str) -> Result<EncodingMode> {
    if v == "optimized" {
        return Ok(EncodingMode::Optimized);
    }
    let list = v.strip_prefix("fixed:").ok_or_else(|| Error::Parse(format!("invalid encoding `{v}`")))?;
    Ok(EncodingMode::Fixed(parse_list(list)?))
}

/// Comma-separated feature indices.
pub fn parse_list(v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_num("feature order", s.trim())).collect()
}

fn format_optimizer(o: ClassifierOptimizer) -> &'static str {
    match o {
        ClassifierOptimizer::QuasiNewton => "quasi-newton",
        ClassifierOptimizer::Rotosolve => "rotosolve",
    }
}

pub fn parse_optimizer(v: &str) -> Result<ClassifierOptimizer> {
    match v {
        "quasi-newton" => Ok(ClassifierOptimizer::QuasiNewton),
        "rotosolve" => Ok(ClassifierOptimizer::Rotosolve),
        _ => Err(Error::Parse(format!("invalid optimizer `{v}`"))),
    }
}

fn format_metric(m: RetryMetric) -> &'static str {
    match m {
        RetryMetric::Test => "test",
        RetryMetric::Train => "train",
    }
}

pub fn parse_metric(v: &str) -> Result<RetryMetric> {
    match v {
        "test" => Ok(RetryMetric::Test),
        "train" => Ok(RetryMetric::Train),
        _ => Err(Error::Parse(format!("invalid retry metric `{v}`"))),
    }
}

fn format_shots(s: Option<&ShotProtocol>) -> String {
    match s {
        None => "exact".into(),
        Some(p) => format!("{},{},{}", p.pair_samples, p.shots_per_pair, p.seed),
    }
}

/// `exact` or `pairs,shots,seed`.
pub fn parse_shots(v: &str) -> Result<Option<ShotProtocol>> {
    if v == "exact" {
        return Ok(None);
    }
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let [pairs, shots, seed] = parts[..] else {
        return Err(Error::Parse(format!("invalid shots `{v}`")));
    };
    Ok(Some(ShotProtocol {
        pair_samples: parse_num("shots", pairs)?,
        shots_per_pair: parse_num("shots", shots)?,
        seed: parse_num("shots", seed)?,
    }))
}

/// Writes one JSON object per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(file)?)
}

/// Parses a square complex matrix: one row per line, entries `re,im`
/// separated by whitespace. Blank lines and `#` comments are skipped.
pub fn parse_matrix_text(text: &str) -> Result<DMatrix<Complex64>> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let row = line
            .split_whitespace()
            .map(|e| {
                let (re, im) = e.split_once(',').unwrap_or((e, "0"));
                Ok(Complex64::new(parse_num("matrix entry", re)?, parse_num("matrix entry", im)?))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Reads a unitary from matrix text, checking unitarity to `1e-8`.
pub fn load_unitary(path: &Path) -> Result<UnitaryMatrix> {
    UnitaryMatrix::new(parse_matrix_text(&std::fs::read_to_string(path)?)?, 1e-8)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per feature ordering.
pub fn sweep_table_tsv(sweep: &SweepSummary) -> String {
    let mut s = String::from("dataset\tcell\tparams\torder\tmean\tstd\tfailures\n");
    for r in &sweep.results {
        let order = r.order.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{order}\t{}\t{}\t{}",
            sweep.dataset,
            sweep.cell,
            sweep.cell.param_count(),
            num(r.mean),
            num(r.std),
            r.failures
        );
    }
    s
}

/// One row per sweep (five-number summary of ordering means) and per
/// optimized-encoding run (mean and standard deviation).
pub fn summary_table_tsv(sweeps: &[SweepSummary], optimized: &[OptimizedSummary]) -> String {
    let mut s = String::from("dataset\tcell\tparams\tkind\tmin\tq1\tmedian\tq3\tmax\tmean\tstd\n");
    for w in sweeps {
        let f = &w.summary;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\tfixed\t{}\t{}\t{}\t{}\t{}\t\t",
            w.dataset,
            w.cell,
            w.cell.param_count(),
            num(f.min),
            num(f.q1),
            num(f.median),
            num(f.q3),
            num(f.max)
        );
    }
    for o in optimized {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\toptimized\t\t\t\t\t\t{}\t{}",
            o.dataset,
            o.cell,
            o.cell.param_count(),
            num(o.mean),
            num(o.std)
        );
    }
    s
}

/// One row per rotosolve iteration with the accuracy bands.
pub fn hardware_table_tsv(summary: &HardwareSummary) -> String {
    let mut s = String::from("iteration\ttrain_mean\ttrain_std\ttest_mean\ttest_std\ttest_min\ttest_max\n");
    for (i, (tr, te)) in summary.train_band.iter().zip(&summary.test_band).enumerate() {
        let _ = writeln!(
            s,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            num(tr.mean),
            num(tr.std),
            num(te.mean),
            num(te.std),
            num(te.min),
            num(te.max)
        );
    }
    s
}

/// Optimized-encoding marker drawn over a box plot.
#[derive(Clone, Debug, PartialEq)]
pub struct Star {
    pub dataset: String,
    pub cell: Cell,
    pub accuracy: f64,
}

impl From<&OptimizedSummary> for Star {
    fn from(o: &OptimizedSummary) -> Self {
        Self { dataset: o.dataset.clone(), cell: o.cell, accuracy: o.mean }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Vertical scale shared by the plot panels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub top: f64,
    pub bottom: f64,
}

impl Axis {
    pub fn y(&self, v: f64) -> f64 {
        self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)
    }

    fn ticks(&self, step: f64) -> Vec<f64> {
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step + 1e-9).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

const PANEL_W: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 300.0;
const HEIGHT: f64 = 420.0;

/// Accuracy axis of the box plot for the given data.
pub fn boxplot_axis(sweeps: &[SweepSummary], stars: &[Star]) -> Axis {
    let low = sweeps.iter().map(|s| s.summary.min).chain(stars.iter().map(|s| s.accuracy)).fold(1.0, f64::min);
    let lo = ((low - 0.02) * 10.0).floor().clamp(0.0, 9.0) / 10.0;
    Axis { lo, hi: 1.0, top: PLOT_TOP, bottom: PLOT_BOTTOM }
}

fn star_points(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|i| {
            let rad = if i % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Box plots of per-ordering mean test accuracy, one panel per dataset,
/// one box per cell, with optimized-encoding stars. Quartiles use linear
/// interpolation.
pub fn emit_boxplot_svg(sweeps: &[SweepSummary], stars: &[Star]) -> Result<String> {
    if sweeps.is_empty() {
        return Err(Error::Empty("box plot needs at least one sweep"));
    }
    let mut datasets: Vec<&str> = Vec::new();
    for d in sweeps.iter().map(|s| s.dataset.as_str()).chain(stars.iter().map(|s| s.dataset.as_str())) {
        if !datasets.contains(&d) {
            datasets.push(d);
        }
    }
    let axis = boxplot_axis(sweeps, stars);
    let width = MARGIN_L + PANEL_W * datasets.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{HEIGHT:.0}" viewBox="0 0 {width:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for t in axis.ticks(0.1) {
        let y = axis.y(t);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.1}</text>"##,
            width - 20.0,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">mean test accuracy</text>"#,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0
    );
    for (p, dataset) in datasets.iter().enumerate() {
        let x0 = MARGIN_L + PANEL_W * p as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + PANEL_W / 2.0,
            escape(dataset)
        );
        let cells: Vec<Cell> = Cell::ALL
            .iter()
            .copied()
            .filter(|c| {
                sweeps.iter().any(|w| w.dataset == *dataset && w.cell == *c)
                    || stars.iter().any(|w| w.dataset == *dataset && w.cell == *c)
            })
            .collect();
        let slot = PANEL_W / cells.len().max(1) as f64;
        for (i, cell) in cells.iter().enumerate() {
            let cx = x0 + slot * (i as f64 + 0.5);
            let half = (slot * 0.3).min(24.0);
            if let Some(w) = sweeps.iter().find(|w| w.dataset == *dataset && w.cell == *cell) {
                let f = &w.summary;
                let (ymin, yq1, ymed, yq3, ymax) =
                    (axis.y(f.min), axis.y(f.q1), axis.y(f.median), axis.y(f.q3), axis.y(f.max));
                let _ = writeln!(
                    s,
                    r##"<g class="box" data-cell="{cell}"><line x1="{cx:.2}" y1="{ymax:.2}" x2="{cx:.2}" y2="{yq3:.2}" stroke="black"/><line x1="{cx:.2}" y1="{yq1:.2}" x2="{cx:.2}" y2="{ymin:.2}" stroke="black"/><line x1="{:.2}" y1="{ymax:.2}" x2="{:.2}" y2="{ymax:.2}" stroke="black"/><line x1="{:.2}" y1="{ymin:.2}" x2="{:.2}" y2="{ymin:.2}" stroke="black"/><rect x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/><line x1="{:.2}" y1="{ymed:.2}" x2="{:.2}" y2="{ymed:.2}" stroke="#d62728" stroke-width="2"/></g>"##,
                    cx - half / 2.0,
                    cx + half / 2.0,
                    cx - half / 2.0,
                    cx + half / 2.0,
                    cx - half,
                    2.0 * half,
                    yq1 - yq3,
                    cx - half,
                    cx + half
                );
            }
            for st in stars.iter().filter(|w| w.dataset == *dataset && w.cell == *cell) {
                let cy = axis.y(st.accuracy);
                let _ = writeln!(
                    s,
                    r##"<polygon class="star" data-cy="{cy:.2}" points="{}" fill="#ffbf00" stroke="black"/>"##,
                    star_points(cx, cy, 7.0)
                );
            }
            let ly = PLOT_BOTTOM + 14.0;
            let _ = writeln!(
                s,
                r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-40 {cx:.2} {ly:.2})">{cell} ({})</text>"#,
                cell.param_count()
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

struct Series<'a> {
    label: String,
    color: &'static str,
    band: &'a [IterationBand],
}

fn line_panel(s: &mut String, x0: f64, title: &str, xlabel: &str, series: &[Series<'_>]) {
    let len = series.iter().map(|r| r.band.len()).max().unwrap_or(0);
    let axis = Axis { lo: 0.0, hi: 1.0, top: PLOT_TOP, bottom: PLOT_BOTTOM };
    let lo = series.iter().flat_map(|r| r.band.iter().map(|b| b.mean - b.std)).fold(0.0, f64::min);
    let hi = series.iter().flat_map(|r| r.band.iter().map(|b| b.mean + b.std)).fold(1.0, f64::max);
    let axis = Axis { lo: lo.floor(), hi: hi.ceil(), ..axis };
    let w = PANEL_W - 40.0;
    let x = |i: usize| x0 + w * i as f64 / (len.max(2) - 1) as f64;
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="13">{}</text>"#,
        x0 + w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{PLOT_TOP:.2}" width="{w:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        PLOT_BOTTOM - PLOT_TOP
    );
    let step = if axis.hi - axis.lo > 2.0 { 1.0 } else { 0.2 };
    for t in axis.ticks(step) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.1}</text>"#, x0 - 6.0, axis.y(t) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        PLOT_BOTTOM + 30.0,
        escape(xlabel)
    );
    for (k, r) in series.iter().enumerate() {
        if r.band.is_empty() {
            continue;
        }
        let upper = r.band.iter().enumerate().map(|(i, b)| format!("{:.2},{:.2}", x(i), axis.y(b.mean + b.std)));
        let lower = r.band.iter().enumerate().rev().map(|(i, b)| format!("{:.2},{:.2}", x(i), axis.y(b.mean - b.std)));
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            upper.chain(lower).collect::<Vec<_>>().join(" "),
            r.color
        );
        let mean = r.band.iter().enumerate().map(|(i, b)| format!("{:.2},{:.2}", x(i), axis.y(b.mean)));
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            mean.collect::<Vec<_>>().join(" "),
            r.color
        );
        let ly = PLOT_BOTTOM + 48.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            x0 + 18.0,
            ly - 4.0,
            r.color,
            x0 + 24.0,
            escape(&r.label)
        );
    }
}

const COLORS: [&str; 7] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf"];

/// Encoding-training and classifier-training curves (mean ± std across runs).
pub fn emit_trajectory_svg(summary: &HardwareSummary) -> Result<String> {
    if summary.runs.is_empty() {
        return Err(Error::Empty("trajectory plot needs at least one run"));
    }
    let width = MARGIN_L + 2.0 * PANEL_W + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{:.0}" viewBox="0 0 {width:.0} {:.0}" font-family="sans-serif" font-size="11">"#,
        HEIGHT + 40.0,
        HEIGHT + 40.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let mut enc = vec![Series { label: "loss".into(), color: COLORS[0], band: &summary.encoding_loss_band }];
    for (c, b) in summary.purity_bands.iter().enumerate() {
        enc.push(Series { label: format!("purity {c}"), color: COLORS[1 + c], band: b });
    }
    for ((i, j), b) in [(0, 1), (1, 2), (0, 2)].iter().zip(&summary.overlap_bands) {
        enc.push(Series { label: format!("overlap {i}{j}"), color: COLORS[4 + enc.len() % 3], band: b });
    }
    line_panel(&mut s, MARGIN_L, "encoding training", "SPSA iteration", &enc);
    let acc = [
        Series { label: "train accuracy".into(), color: COLORS[0], band: &summary.train_band },
        Series { label: "test accuracy".into(), color: COLORS[3], band: &summary.test_band },
    ];
    line_panel(&mut s, MARGIN_L + PANEL_W, "classifier training", "rotosolve iteration", &acc);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{five_number_summary, PermutationResult};

    const CSV: &str = "sepal_length,sepal_width,petal_length,petal_width,species\n\
        5.1,3.5,1.4,0.2,setosa\n\
        7.0,3.2,4.7,1.4,versicolor\n\
        6.3,,6.0,2.5,virginica\n\
        6.3,3.3,6.0,2.5,virginica\n";

    fn sweep(values: &[f64], cell: Cell) -> SweepSummary {
        SweepSummary {
            cell,
            dataset: "iris".into(),
            results: values
                .iter()
                .map(|&m| PermutationResult { order: vec![0], accuracies: vec![m], mean: m, std: 0.0, failures: 0 })
                .collect(),
            summary: five_number_summary(values).unwrap(),
        }
    }

    #[test]
    fn csv_rows_with_missing_cells_are_dropped() {
        let r = parse_dataset(CSV.as_bytes(), &DatasetSchema::iris("x")).unwrap();
        assert_eq!(r.dataset.len(), 3);
        assert_eq!(r.dropped_rows, 1);
        assert_eq!(r.dataset.labels, vec![0, 1, 2]);
        assert_eq!(r.dataset.points[2], vec![6.3, 3.3, 6.0, 2.5]);
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r, parse_dataset(CSV.as_bytes(), &DatasetSchema::iris("x")).unwrap());

        let extra = "species,sepal_length,sepal_width,petal_length,petal_width,note\n\
                     setosa,5.1,3.5,1.4,0.2,ok\n\
                     setosa,4.9,3.0,1.4,0.2,NA\n\
                     versicolor,7.0,3.2,4.7,1.4,ok\n\
                     virginica,6.3,3.3,6.0,2.5,ok\n";
        let r = parse_dataset(extra.as_bytes(), &DatasetSchema::iris("x")).unwrap();
        assert_eq!((r.dataset.len(), r.dropped_rows), (3, 1));
    }

    #[test]
    fn csv_errors() {
        let schema = DatasetSchema::iris("x");
        let bad_label = CSV.replace("versicolor", "rose");
        assert!(parse_dataset(bad_label.as_bytes(), &schema).is_err());
        let bad_value = CSV.replace("7.0", "seven");
        assert!(parse_dataset(bad_value.as_bytes(), &schema).is_err());
        let no_column = CSV.replace("petal_width", "width");
        assert!(parse_dataset(no_column.as_bytes(), &schema).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut config = ExperimentConfig::new(Cell::Qutrit2Npe, EncodingMode::Optimized);
        config.optimizer = ClassifierOptimizer::Rotosolve;
        config.train_fraction = 0.7;
        config.retry_metric = RetryMetric::Train;
        config.shots = Some(ShotProtocol { pair_samples: 200, shots_per_pair: 5, seed: 9 });
        config.seed = u64::MAX;
        let mut m = RunManifest::new(config);
        m.dataset = Some("data/iris.csv".into());
        m.emit_svg = false;
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
        let fixed = RunManifest::new(ExperimentConfig::new(Cell::Qubit1Nce, EncodingMode::Fixed(vec![3, 1])));
        assert_eq!(RunManifest::parse(&fixed.to_text()).unwrap(), fixed);
    }

    #[test]
    fn manifest_defaults_and_errors() {
        let m = RunManifest::parse("# comment\ncell = qutrit1-nce\n").unwrap();
        assert_eq!(m.config.repetitions, 50);
        assert_eq!(m.config.encoding, EncodingMode::Fixed(vec![0, 1, 2, 3]));
        assert!(RunManifest::parse("repetitions = 3").is_err());
        assert!(RunManifest::parse("cell = qutrit1-nce\nbogus = 1").is_err());
        assert!(RunManifest::parse("cell = qutrit1-nce\nseed = x").is_err());
        assert!(RunManifest::parse("cell = qutrit1-nce\nseed = 1\nseed = 2").is_err());
        assert!(RunManifest::parse("cell = qubit1-nce\nencoding = optimized").is_err());
    }

    #[test]
    fn seed_override() {
        let mut m = RunManifest::parse("cell = qutrit1-nce\nseed = 4").unwrap();
        m.apply_seed_override(None).unwrap();
        assert_eq!(m.config.seed, 4);
        m.apply_seed_override(Some("77")).unwrap();
        assert_eq!(m.config.seed, 77);
        assert!(m.apply_seed_override(Some("-1")).is_err());
    }

    #[test]
    fn boxplot_geometry() {
        let w = sweep(&[0.8, 0.9, 1.0, 0.85, 0.95], Cell::Qutrit1Nce);
        assert_eq!((w.summary.min, w.summary.median, w.summary.max), (0.8, 0.9, 1.0));
        let stars = [Star { dataset: "iris".into(), cell: Cell::Qutrit1Nce, accuracy: 0.974 }];
        let svg = emit_boxplot_svg(&[w.clone()], &stars).unwrap();
        let axis = boxplot_axis(&[w.clone()], &stars);
        assert!(svg.contains(&format!(r#"data-cy="{:.2}""#, axis.y(0.974))));
        assert!(svg.contains("qutrit1-nce (8)"));
        assert_eq!(svg, emit_boxplot_svg(&[w], &stars).unwrap());
        assert!(emit_boxplot_svg(&[], &stars).is_err());
    }

    #[test]
    fn degenerate_box_has_zero_height() {
        let svg = emit_boxplot_svg(&[sweep(&[0.9, 0.9, 0.9], Cell::Qubit1Nce)], &[]).unwrap();
        assert!(svg.contains(r#"height="0.00""#));
    }

    #[test]
    fn matrix_text() {
        let m = parse_matrix_text("0,0 1,0 0,0\n# c\n1,0 0,0 0,0\n0,0 0,0 0,1\n").unwrap();
        assert_eq!(m[(2, 2)], Complex64::new(0.0, 1.0));
        assert_eq!(m[(0, 1)], Complex64::new(1.0, 0.0));
        assert!(UnitaryMatrix::new(m, 1e-8).is_ok());
        assert!(parse_matrix_text("1,0 0,0\n0,0").is_err());
        assert!(parse_matrix_text("a,b").is_err());
        assert!(parse_matrix_text("").is_err());
    }

    #[test]
    fn tables_and_records() {
        let w = sweep(&[0.5, 0.75], Cell::Qubit1Nce);
        let t = sweep_table_tsv(&w);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().contains("5.0000000000000000e-1"));
        let s = summary_table_tsv(&[w.clone()], &[]);
        assert!(s.lines().all(|l| l.split('\t').count() == 11));
        let mut buf = Vec::new();
        write_json_lines(&mut buf, &w.results).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: PermutationResult = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, w.results[0]);
    }
}
