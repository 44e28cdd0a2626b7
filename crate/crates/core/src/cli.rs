//! Command-line front end. The `psfnet` binary forwards to [`run`].
//!
//! Every command that writes a file also writes `<out>.manifest`, a flat
//! `key=value` record of the resolved flags, input digests, tool version,
//! seed and wall-clock duration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::ann::{self, MlpModel, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalSummary};
use crate::psf::{FieldPoint, PsfDataset};
use crate::render::{
    checkerboard, convolve_spatially_variant, linear_depth_gradient, DefocusMap, FieldMapping, Image, Pgm,
    PgmDepth, Rendered,
};
use crate::report::sig12;
use crate::synth::{training_dataset, SamplingGrid, SynthLensSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "psfnet", version, about = "Lens PSF regression and spatially-variant rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic PSF dataset (.psfd) from a preset or explicit grid.
    SynthDataset(SynthArgs),
    /// Train a network on a dataset; writes the model and a history CSV.
    Train(TrainArgs),
    /// Write the kernel predicted at one field point as PGM plus CSV.
    Predict(PredictArgs),
    /// Blur an image with the model's spatially-variant PSF.
    Apply(ApplyArgs),
    /// Blur a checkerboard under a left-to-right defocus gradient.
    DepthApply(DepthApplyArgs),
    /// Hidden-size sweep with restarts; writes a CSV report.
    Sweep(SweepArgs),
    /// Score a model against a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    SeriesA,
    SeriesB,
    /// Both series merged (1215 samples).
    SeriesAb,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Optional synthetic lens description (key=value lines); defaults otherwise.
    lens: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with_all = ["dz", "r", "phi"])]
    preset: Option<Preset>,
    /// Comma-separated defocus values in um.
    #[arg(long, allow_hyphen_values = true)]
    dz: Option<String>,
    /// Comma-separated image heights in mm.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Comma-separated azimuths in degrees.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, default_value_t = 13)]
    grid_size: usize,
    #[arg(long, default_value_t = 6.5)]
    pitch_um: f64,
    /// Noise seed of the synthetic lens (overrides the lens file).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn config(&self, hidden: usize) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            hidden_size: hidden,
            max_epochs: self.epochs.unwrap_or(d.max_epochs),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 80)]
    hidden: usize,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    dz: f64,
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderFlags {
    /// Sensor pixel pitch of the image in um; must match the model.
    #[arg(long, default_value_t = 6.5)]
    pitch_um: f64,
    /// Optical axis column; image center by default.
    #[arg(long)]
    center_x: Option<f64>,
    /// Optical axis row; image center by default.
    #[arg(long)]
    center_y: Option<f64>,
    #[arg(long, default_value_t = 16)]
    tile_px: usize,
}

impl RenderFlags {
    fn mapping(&self, image: &Image) -> Result<FieldMapping> {
        let c = FieldMapping::centered(image);
        FieldMapping::new(self.center_x.unwrap_or(c.cx), self.center_y.unwrap_or(c.cy), self.pitch_um)
    }
}

#[derive(Debug, Args)]
struct ApplyArgs {
    model: PathBuf,
    image: PathBuf,
    /// Constant defocus in um.
    #[arg(long, conflicts_with = "dzmap", allow_negative_numbers = true)]
    dz: Option<f64>,
    /// 16-bit PGM defocus map; um = offset + scale * sample.
    #[arg(long)]
    dzmap: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    dzmap_offset: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    dzmap_scale: f64,
    #[command(flatten)]
    render: RenderFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DepthApplyArgs {
    model: PathBuf,
    /// Checkerboard width in pixels.
    #[arg(default_value_t = 640)]
    width: usize,
    /// Checkerboard height in pixels.
    #[arg(default_value_t = 480)]
    height: usize,
    /// Checkerboard cell size in pixels.
    #[arg(default_value_t = 32)]
    cell: usize,
    /// Left and right defocus in um, `LEFT,RIGHT`.
    #[arg(long, default_value = "50,-50", allow_hyphen_values = true)]
    dz: String,
    #[command(flatten)]
    render: RenderFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    dataset: PathBuf,
    #[arg(long, default_value = "8,16,32,64,96,128,192,256,448")]
    hidden_list: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    model: PathBuf,
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code reported for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFiniteLoss { .. } | Error::AllZeroGrid => EXIT_NUMERIC,
        Error::DimensionMismatch(_)
        | Error::PitchMismatch { .. }
        | Error::UpsampleNotSupported { .. }
        | Error::BadMagic { .. }
        | Error::BadVersion(_)
        | Error::TruncatedFile
        | Error::Format(_) => EXIT_CONTRACT,
        Error::InsufficientData(_) | Error::InvalidArgument(_) | Error::BehindFocalPlane { .. } | Error::Io(_) => {
            EXIT_USAGE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::SynthDataset(a) => synth_dataset(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Apply(a) => apply(a),
        Command::DepthApply(a) => depth_apply(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("--{flag}: cannot parse {t:?}")))
        })
        .collect()
}

/// Key-value run record written next to each output.
struct Manifest {
    started: Instant,
    lines: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            started: Instant::now(),
            lines: vec![
                ("command".into(), command.into()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ],
        }
    }

    fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.lines.push((format!("flag.{name}"), value.to_string()));
        self
    }

    fn seed(&mut self, seed: impl ToString) -> &mut Self {
        self.lines.push(("seed".into(), seed.to_string()));
        self
    }

    fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let digest = Sha256::digest(fs::read(path)?);
        self.lines
            .push((format!("input.{}", path.display()), format!("sha256:{}", hex::encode(digest))));
        Ok(self)
    }

    fn write_for(&self, out: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.lines {
            writeln!(text, "{k}={v}").expect("string write");
        }
        writeln!(text, "duration_ms={}", self.started.elapsed().as_millis()).expect("string write");
        fs::write(sidecar(out, "manifest"), text)?;
        Ok(())
    }
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn opt(v: &Option<impl ToString>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn synth_dataset(a: SynthArgs) -> Result<()> {
    let mut manifest = Manifest::new("synth-dataset");
    let mut spec = match &a.lens {
        Some(p) => {
            manifest.input(p)?;
            SynthLensSpec::from_kv(&fs::read_to_string(p)?)?
        }
        None => SynthLensSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let grids = match a.preset {
        Some(Preset::SeriesA) => vec![SamplingGrid::series_a()],
        Some(Preset::SeriesB) => vec![SamplingGrid::series_b()],
        Some(Preset::SeriesAb) => vec![SamplingGrid::series_a(), SamplingGrid::series_b()],
        None => {
            let list = |flag: &str, v: &Option<String>| match v {
                Some(t) => parse_list::<f64>(flag, t),
                None => Ok(vec![0.0]),
            };
            vec![SamplingGrid::new(list("dz", &a.dz)?, list("r", &a.r)?, list("phi", &a.phi)?)?]
        }
    };
    let ds = training_dataset(&spec, &grids, a.grid_size, a.pitch_um)?;
    ds.save(&a.out)?;
    println!("wrote {} samples to {}", ds.len(), a.out.display());
    manifest
        .flag("preset", opt(&a.preset.map(|p| format!("{p:?}"))))
        .flag("dz", opt(&a.dz))
        .flag("r", opt(&a.r))
        .flag("phi", opt(&a.phi))
        .flag("grid-size", a.grid_size)
        .flag("pitch-um", a.pitch_um)
        .flag("out", a.out.display())
        .seed(spec.seed);
    for (k, v) in spec.to_kv().lines().filter_map(|l| l.split_once('=')) {
        manifest.lines.push((format!("lens.{k}"), v.into()));
    }
    manifest.write_for(&a.out)
}

fn train_manifest(m: &mut Manifest, cfg: &TrainConfig) {
    m.flag("epochs", cfg.max_epochs)
        .flag("lr", cfg.learning_rate)
        .flag("momentum", cfg.momentum)
        .seed(cfg.seed);
}

fn train(a: TrainArgs) -> Result<()> {
    let mut manifest = Manifest::new("train");
    manifest.input(&a.dataset)?;
    let ds = PsfDataset::load(&a.dataset)?;
    let cfg = a.train.config(a.hidden);
    let (model, report) = ann::train(&ds, &cfg)?;
    model.save(&a.out)?;
    let history = sidecar(&a.out, "history.csv");
    fs::write(&history, report.history_csv())?;
    println!(
        "epochs={} best_epoch={} train_perf={} val_perf={}",
        report.epochs_run,
        report.best_epoch,
        sig12(report.final_train_perf),
        sig12(report.final_val_perf)
    );
    manifest.flag("hidden", a.hidden);
    train_manifest(&mut manifest, &cfg);
    manifest.flag("out", a.out.display()).write_for(&a.out)
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut manifest = Manifest::new("predict");
    manifest.input(&a.model)?;
    let model = MlpModel::load(&a.model)?;
    let kernel = model.forward(&FieldPoint::new(a.dz, a.r, a.phi));
    let image = Image::new(kernel.width(), kernel.height(), kernel.pitch_um(), kernel.values().to_vec())?;
    image.peak_normalized().write_pgm(&a.out, PgmDepth::Sixteen)?;
    let mut csv = String::from("row,col,value\n");
    for y in 0..kernel.height() {
        for x in 0..kernel.width() {
            writeln!(csv, "{y},{x},{}", sig12(kernel.get(x, y))).expect("string write");
        }
    }
    fs::write(sidecar(&a.out, "csv"), csv)?;
    manifest
        .flag("dz", a.dz)
        .flag("r", a.r)
        .flag("phi", a.phi)
        .flag("out", a.out.display())
        .seed("none")
        .write_for(&a.out)
}

fn render_manifest(m: &mut Manifest, r: &RenderFlags, mapping: &FieldMapping) {
    m.flag("pitch-um", r.pitch_um)
        .flag("center-x", mapping.cx)
        .flag("center-y", mapping.cy)
        .flag("tile-px", r.tile_px)
        .seed("none");
}

fn report_render(out: &Path, rendered: &Rendered) -> Result<()> {
    rendered.image.write_pgm(out, PgmDepth::Sixteen)?;
    if rendered.clamped_dz > 0 {
        eprintln!(
            "warning: defocus clamped to the model envelope for {} tile kernels",
            rendered.clamped_dz
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn apply(a: ApplyArgs) -> Result<()> {
    let mut manifest = Manifest::new("apply");
    manifest.input(&a.model)?.input(&a.image)?;
    let model = MlpModel::load(&a.model)?;
    let image = Image::read_pgm(&a.image, a.render.pitch_um)?;
    let dzmap = match &a.dzmap {
        Some(p) => {
            manifest.input(p)?;
            DefocusMap::from_pgm(&Pgm::read(p)?, a.dzmap_offset, a.dzmap_scale)?
        }
        None => DefocusMap::constant(image.width(), image.height(), a.dz.unwrap_or(0.0))?,
    };
    let mapping = a.render.mapping(&image)?;
    let rendered = convolve_spatially_variant(&image, &model, &mapping, &dzmap, a.render.tile_px)?;
    report_render(&a.out, &rendered)?;
    manifest
        .flag("dz", opt(&a.dz))
        .flag("dzmap-offset", a.dzmap_offset)
        .flag("dzmap-scale", a.dzmap_scale);
    render_manifest(&mut manifest, &a.render, &mapping);
    manifest.flag("out", a.out.display()).write_for(&a.out)
}

fn depth_apply(a: DepthApplyArgs) -> Result<()> {
    let mut manifest = Manifest::new("depth-apply");
    manifest.input(&a.model)?;
    let dz: Vec<f64> = parse_list("dz", &a.dz)?;
    let [left, right] = dz[..] else {
        return Err(Error::invalid("--dz takes exactly two values: LEFT,RIGHT"));
    };
    let model = MlpModel::load(&a.model)?;
    let image = checkerboard(a.width, a.height, a.cell, 0.0, 1.0, a.render.pitch_um)?;
    let dzmap = linear_depth_gradient(a.width, a.height, left, right)?;
    let mapping = a.render.mapping(&image)?;
    let rendered = convolve_spatially_variant(&image, &model, &mapping, &dzmap, a.render.tile_px)?;
    report_render(&a.out, &rendered)?;
    manifest
        .flag("width", a.width)
        .flag("height", a.height)
        .flag("cell", a.cell)
        .flag("dz", &a.dz);
    render_manifest(&mut manifest, &a.render, &mapping);
    manifest.flag("out", a.out.display()).write_for(&a.out)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut manifest = Manifest::new("sweep");
    manifest.input(&a.dataset)?;
    let ds = PsfDataset::load(&a.dataset)?;
    let hidden: Vec<usize> = parse_list("hidden-list", &a.hidden_list)?;
    let cfg = a.train.config(hidden.first().copied().unwrap_or(1));
    let report = ann::sweep(&ds, &hidden, a.restarts, &cfg)?;
    for row in report.rows.iter().filter(|r| r.restarts_failed > 0) {
        eprintln!("warning: H={} lost {} of {} restarts", row.hidden, row.restarts_failed, a.restarts);
    }
    let csv = report.to_csv();
    fs::write(&a.out, &csv)?;
    print!("{csv}");
    manifest.flag("hidden-list", &a.hidden_list).flag("restarts", a.restarts);
    train_manifest(&mut manifest, &cfg);
    manifest.flag("out", a.out.display()).write_for(&a.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = MlpModel::load(&a.model)?;
    let ds = PsfDataset::load(&a.dataset)?;
    let summary = evaluate(&model, &ds)?;
    let csv = format!("{}\n{}\n", EvalSummary::CSV_HEADER, summary.csv_row());
    print!("{csv}");
    if let Some(out) = &a.out {
        fs::write(out, &csv)?;
        let mut manifest = Manifest::new("eval");
        manifest.input(&a.model)?.input(&a.dataset)?;
        manifest.flag("out", out.display()).seed("none").write_for(out)?;
    }
    Ok(())
}
