//! `hsdemosaic` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure (non-finite values, divergence).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hsdemosaic::calibration::{
    crosstalk_correct, gaussian_smooth, white_correct, CrosstalkMatrix, WhiteCorrectOptions, CONDITION_WARN,
};
use hsdemosaic::classical::{demosaic, ClassicalMethod};
use hsdemosaic::dataset::{
    adapt_external_cube, build_corpus, compose_shifted, read_corpus, read_shift_set, simulate_shift_set,
    synthetic_scene, write_corpus, write_shift_set, CorpusConfig, SceneConfig, Source, SourceKind, Split,
};
use hsdemosaic::io::{import_pgm_mosaic, read_cube, read_mosaic, sidecar_path, write_cube, write_mosaic};
use hsdemosaic::model::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};
use hsdemosaic::render::{cube_to_rgb, write_band_pgm, write_png};
use hsdemosaic::trainer::{evaluate, evaluate_with, train, Selection, TrainConfig};
use hsdemosaic::{Cube, Error, Mosaic, MosaicPattern, Params};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "hsdemosaic", version, about = "Snapshot multispectral mosaic demosaicing toolkit")]
struct Cli {
    /// Seed for every random choice (default 42; overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-truth production and corpus assembly.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Radiometric calibration.
    #[command(subcommand)]
    Calib(CalibCmd),
    /// Demosaic a mosaic into a cube.
    Demosaic(DemosaicArgs),
    /// Train the network on a corpus.
    Train(TrainArgs),
    /// Score a demosaicer on a corpus split.
    Eval(EvalArgs),
    /// Render a cube for display.
    #[command(subcommand)]
    Render(RenderCmd),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Compose a full-resolution cube from a shift-set manifest.
    ComposeShifts {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the sixteen shifted captures of a cube.
    SimulateShifts {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Relative error of each one-pixel step.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Resample a cube onto the sensor's band grid.
    Adapt {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated target wavelengths in nm; defaults to the sensor grid.
        #[arg(long, value_delimiter = ',')]
        wavelengths: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a procedural reflectance scene.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
    },
    /// Cut every cube in a directory into aligned patch pairs.
    Build {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CalibCmd {
    /// White/dark reference correction of a raw mosaic.
    White {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        white: PathBuf,
        #[arg(long)]
        dark: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 2.0)]
        clip_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Undo linear band crosstalk in a cube.
    Crosstalk {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON file `{"size": L, "mixing": [[...]]}`.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gaussian-smooth every plane of a cube or mosaic.
    Smooth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Bilinear,
    Bicubic,
    Intdiff,
    Net,
}

#[derive(Args)]
struct DemosaicArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Mosaic (raw + sidecar) or 8/16-bit PGM with the default pattern.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    decay_epochs: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_initial: Option<f64>,
    #[arg(long)]
    lr_floor: Option<f64>,
    #[arg(long)]
    checkpoint_interval: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Disable gradient clipping.
    #[arg(long)]
    no_clip: bool,
    #[arg(long, value_enum)]
    selection: Option<SelectionArg>,
    /// Continue from a checkpoint instead of a fresh initialisation.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    HeldOut,
    Training,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "net")]
    method: Method,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, default_value_t = 1.0)]
    max_val: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum RenderCmd {
    /// 8-bit sRGB PNG under D65.
    Rgb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One band as a 16-bit PGM.
    Band {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        band: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Corpus build settings: patch sampling plus which sources skip
/// ground-truth smoothing.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct BuildConfig {
    #[serde(flatten)]
    corpus: CorpusConfig,
    /// Treat every source as flat.
    all_flat: bool,
    /// Source ids (file stems) treated as flat.
    flat: Vec<String>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self { corpus: CorpusConfig::default(), all_flat: false, flat: vec![] }
    }
}

fn print_config(command: &str, cfg: &impl Serialize) -> Result<(), Error> {
    println!("effective config [{command}]: {}", serde_json::to_string(cfg)?);
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn is_mosaic_file(path: &Path) -> Result<bool, Error> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    Ok(v.get("band_at").is_some())
}

fn load_mosaic(path: &Path) -> Result<Mosaic, Error> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        import_pgm_mosaic(path, MosaicPattern::default_4x4())
    } else {
        read_mosaic(path)
    }
}

fn load_net(checkpoint: Option<&Path>) -> Result<Params, Error> {
    let path = checkpoint.ok_or_else(|| Error::InvalidConfig("--method net needs --checkpoint".into()))?;
    load_checkpoint(path)
}

fn run_classical(method: Method, mi: &Mosaic) -> Result<Cube, Error> {
    let m = match method {
        Method::Bilinear => ClassicalMethod::Bilinear,
        Method::Bicubic => ClassicalMethod::Bicubic,
        Method::Intdiff => ClassicalMethod::IntensityDifference,
        Method::Net => unreachable!("handled by the caller"),
    };
    demosaic(mi, m)
}

fn run(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Dataset(cmd) => dataset(cmd, seed),
        Command::Calib(cmd) => calib(cmd),
        Command::Demosaic(a) => {
            print_config("demosaic", &serde_json::json!({
                "method": a.method, "checkpoint": a.checkpoint, "in": a.input, "out": a.out
            }))?;
            let mi = load_mosaic(&a.input)?;
            let cube = match a.method {
                Method::Net => load_net(a.checkpoint.as_deref())?.demosaic(&mi)?,
                m => run_classical(m, &mi)?,
            };
            write_cube(&a.out, &cube)
        }
        Command::Train(a) => train_cmd(a, seed),
        Command::Eval(a) => {
            let split = match a.split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            print_config("eval", &serde_json::json!({
                "corpus": a.corpus, "checkpoint": a.checkpoint, "method": a.method,
                "split": split, "max_val": a.max_val, "out": a.out
            }))?;
            let corpus = read_corpus::<f32>(&a.corpus)?;
            let pairs = corpus.split(split);
            let report = match a.method {
                Method::Net => evaluate(&load_net(a.checkpoint.as_deref())?, &pairs, a.max_val)?,
                m => {
                    let name = serde_json::to_value(m)?.as_str().unwrap_or("classical").to_owned();
                    evaluate_with(&name, &pairs, a.max_val, |mi| run_classical(m, mi))?
                }
            };
            println!("{}: mean PSNR {:.3} dB, mean SSIM {:.4} over {} images", report.method, report.mean_psnr, report.mean_ssim, report.images.len());
            fs::write(&a.out, report.to_json()?)?;
            Ok(())
        }
        Command::Render(RenderCmd::Rgb { input, out }) => {
            print_config("render rgb", &serde_json::json!({ "in": input, "out": out }))?;
            write_png(&cube_to_rgb(&read_cube::<f32>(&input)?)?, &out)
        }
        Command::Render(RenderCmd::Band { input, band, out }) => {
            print_config("render band", &serde_json::json!({ "in": input, "band": band, "out": out }))?;
            write_band_pgm(&read_cube::<f32>(&input)?, band, &out)
        }
    }
}

fn dataset(cmd: DatasetCmd, seed: Option<u64>) -> Result<(), Error> {
    match cmd {
        DatasetCmd::ComposeShifts { manifest, out } => {
            print_config("dataset compose-shifts", &serde_json::json!({ "manifest": manifest, "out": out }))?;
            let cube = compose_shifted(&read_shift_set::<f32>(&manifest)?)?;
            write_cube(&out, &cube)
        }
        DatasetCmd::SimulateShifts { input, out, epsilon } => {
            print_config("dataset simulate-shifts", &serde_json::json!({ "in": input, "out": out, "epsilon": epsilon }))?;
            let cube = read_cube::<f32>(&input)?;
            let pattern = MosaicPattern::canonical(4, cube.wavelengths_nm().to_vec())?;
            write_shift_set(&simulate_shift_set(&cube, &pattern, epsilon)?, &out).map(|_| ())
        }
        DatasetCmd::Adapt { input, wavelengths, out } => {
            let targets = wavelengths.unwrap_or_else(|| MosaicPattern::default_4x4().wavelengths_nm().to_vec());
            print_config("dataset adapt", &serde_json::json!({ "in": input, "wavelengths": targets, "out": out }))?;
            let adapted = adapt_external_cube(&read_cube::<f32>(&input)?, &targets)?;
            if !adapted.extrapolated_nm.is_empty() {
                eprintln!("warning: edge-held (extrapolated) bands at {:?} nm", adapted.extrapolated_nm);
            }
            write_cube(&out, &adapted.cube)
        }
        DatasetCmd::Synth { out, width, height } => {
            let cfg = SceneConfig { width, height, ..SceneConfig::default() };
            let seed = seed.unwrap_or(DEFAULT_SEED);
            print_config("dataset synth", &serde_json::json!({ "scene": cfg, "seed": seed, "out": out }))?;
            let wl = MosaicPattern::default_4x4().wavelengths_nm().to_vec();
            write_cube(&out, &synthetic_scene::<f32>(seed, &cfg, &wl)?)
        }
        DatasetCmd::Build { sources, config, out } => {
            let mut cfg: BuildConfig = read_json(config.as_deref())?;
            if let Some(s) = seed {
                cfg.corpus.seed = s;
            }
            print_config("dataset build", &cfg)?;
            let mut paths: Vec<PathBuf> = fs::read_dir(&sources)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            paths.retain(|p| p.extension().is_some_and(|e| e == "raw"));
            paths.sort();
            let mut srcs = Vec::with_capacity(paths.len());
            for p in paths {
                if is_mosaic_file(&p)? {
                    continue;
                }
                let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("source").to_owned();
                let flat = cfg.all_flat || cfg.flat.contains(&id);
                srcs.push(Source { id, cube: read_cube::<f32>(&p)?, flat, kind: SourceKind::Captured });
            }
            let first = srcs.first().ok_or(Error::EmptyInput)?;
            let pattern = MosaicPattern::canonical(4, first.cube.wavelengths_nm().to_vec())?;
            let corpus = build_corpus(&srcs, &pattern, &cfg.corpus)?;
            let (tr, te) = corpus.counts();
            let manifest = write_corpus(&corpus, &out)?;
            println!("wrote {tr} train and {te} test pairs; manifest {}", manifest.display());
            Ok(())
        }
    }
}

fn calib(cmd: CalibCmd) -> Result<(), Error> {
    match cmd {
        CalibCmd::White { input, white, dark, epsilon, clip_max, out } => {
            print_config("calib white", &serde_json::json!({
                "in": input, "white": white, "dark": dark, "epsilon": epsilon, "clip_max": clip_max, "out": out
            }))?;
            let dark = dark.as_deref().map(load_mosaic).transpose()?;
            let res = white_correct(
                &load_mosaic(&input)?,
                &load_mosaic(&white)?,
                dark.as_ref(),
                WhiteCorrectOptions { epsilon, clip_max },
            )?;
            if res.degenerate_pixels > 0 {
                eprintln!("warning: {} pixels with a degenerate white reference set to 0", res.degenerate_pixels);
            }
            write_mosaic(&out, &res.image)
        }
        CalibCmd::Crosstalk { input, matrix, out } => {
            print_config("calib crosstalk", &serde_json::json!({ "in": input, "matrix": matrix, "out": out }))?;
            let m: CrosstalkMatrix = serde_json::from_str(&fs::read_to_string(&matrix)?)?;
            let cond = m.condition_number()?;
            if cond > CONDITION_WARN {
                eprintln!("warning: crosstalk matrix condition number {cond:.3e}");
            }
            write_cube(&out, &crosstalk_correct(&read_cube::<f32>(&input)?, &m)?)
        }
        CalibCmd::Smooth { input, sigma, out } => {
            print_config("calib smooth", &serde_json::json!({ "in": input, "sigma": sigma, "out": out }))?;
            if is_mosaic_file(&input)? {
                write_mosaic(&out, &gaussian_smooth(&read_mosaic::<f32>(&input)?, sigma)?)
            } else {
                write_cube(&out, &gaussian_smooth(&read_cube::<f32>(&input)?, sigma)?)
            }
        }
    }
}

fn train_cmd(a: TrainArgs, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: TrainConfig = read_json(a.config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    } else if a.config.is_none() {
        cfg.seed = DEFAULT_SEED;
    }
    if let Some(e) = a.epochs {
        cfg.max_epochs = e;
        if a.decay_epochs.is_none() && a.config.is_none() {
            cfg.decay_epochs = e;
        }
    }
    if let Some(v) = a.decay_epochs {
        cfg.decay_epochs = v;
    }
    if let Some(v) = a.filters {
        cfg.filter_count = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr_initial {
        cfg.lr_initial = v;
    }
    if let Some(v) = a.lr_floor {
        cfg.lr_floor = v;
    }
    if let Some(v) = a.checkpoint_interval {
        cfg.checkpoint_interval = v;
    }
    if let Some(v) = a.val_fraction {
        cfg.val_fraction = v;
    }
    if a.no_clip {
        cfg.grad_clip = None;
    }
    if let Some(s) = a.selection {
        cfg.selection = match s {
            SelectionArg::HeldOut => Selection::HeldOut,
            SelectionArg::Training => Selection::Training,
        };
    }
    let corpus = read_corpus::<f32>(&a.corpus)?;
    if a.config.is_none() {
        cfg.patch_size = corpus.config.patch_size;
    }
    print_config("train", &cfg)?;
    let pairs = corpus.owned_split(Split::Train);
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let pattern = first.mosaic.pattern().clone();
    let init = match &a.resume {
        Some(p) => Some(load_checkpoint_expecting::<f32>(p, cfg.filter_count)?),
        None => None,
    };
    fs::create_dir_all(&a.out)?;
    let out = train(&pairs, &pattern, &cfg, init, Some(&a.out), |r| {
        let val = r.val_mse.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
        eprintln!("epoch {:>6}  lr {:.3e}  train {:.4e}  val {val}", r.epoch, r.lr, r.train_mse);
    })?;
    fs::write(a.out.join("loss_log.csv"), out.log.to_csv())?;
    fs::write(a.out.join("train_config.json"), serde_json::to_string_pretty(&cfg)?)?;
    save_checkpoint(&out.best, &a.out.join("best.ckpt"))?;
    save_checkpoint(&out.last, &a.out.join("last.ckpt"))?;
    println!(
        "trained {} epochs on {} pairs ({} held out); best epoch {}",
        cfg.max_epochs, out.train_count, out.val_count, out.best_epoch
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
