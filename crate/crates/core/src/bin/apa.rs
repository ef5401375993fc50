//! `apa`: light-field denoising from the command line.
//!
//! Exit status is 0 on success, 2 for invalid arguments or unusable inputs
//! (bad paths, mismatched dimensions or noise levels, incompatible
//! checkpoints) and 1 for failures while running.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use apa_core::config::{sha256_file, sha256_hex, Manifest, RunConfig};
use apa_core::features::ApaFeatures;
use apa_core::io::{load_lft, load_pgm_grid, save_lft, save_pgm_grid};
use apa_core::metrics::{default_thresholds, fmt_db, lf_quality, parallax_pr};
use apa_core::nets::{
    baseline_apa_syn, baseline_avg_all, check_pair, denoise_lf, estimate_sigma, nearest_level,
    train_syn, train_view, SynModel, ViewModel,
};
use apa_core::nn::{LogRecord, TrainSummary};
use apa_core::noise::{add_awgn, NoiseConfig};
use apa_core::seed::derive_seed;
use apa_core::selftest::run_selftest;
use apa_core::toy::{toy_scene, ToySceneParams};
use apa_core::{Error, LightField};

#[derive(Parser)]
#[command(
    name = "apa",
    version,
    about = "Light-field denoising by anisotropic parallax analysis"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded run for bit-exact reproduction.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add white Gaussian noise to a light field.
    SynthNoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Noise standard deviation on the [0,255] scale.
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write angular averages and normalized features as .lft files.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the synthesis or compensation stage.
    Train(TrainArgs),
    /// Denoise a light field with trained checkpoints or a baseline.
    Denoise(DenoiseArgs),
    /// Compare a light field against ground truth.
    Eval(EvalArgs),
    /// Estimate the noise level of a light field.
    EstimateSigma {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate procedural scenes for experiments.
    Toy(ToyArgs),
    /// Build a light field from a directory of per-view PGM/PPM files.
    ImportPgm {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        n_h: usize,
        #[arg(long)]
        n_v: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write every view of a light field as an 8-bit PGM.
    ExportPgm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Syn,
    View,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    stage: Stage,
    /// Directory of clean training light fields (*.lft).
    #[arg(long)]
    data: PathBuf,
    /// Config file or manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Trained synthesis checkpoint; required for the view stage.
    #[arg(long)]
    syn_ckpt: Option<PathBuf>,
    /// Loss log (default: <out>.log).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Override any config key, e.g. `--set alpha=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Synthesis followed by per-view compensation.
    Apa,
    /// Synthesis stage only.
    ApaSyn,
    /// Every view replaced by the mean view.
    AvgAll,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    syn: Option<PathBuf>,
    #[arg(long)]
    view: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "apa")]
    method: Method,
    /// Noise level of the input; rejected when it differs from the checkpoints'.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Also write x_avg, the synthesized and the parallax light fields here.
    #[arg(long)]
    emit_intermediates: Option<PathBuf>,
    /// Also write the denoised views as 8-bit PGM files here.
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Per-view PSNR/SSIM table (CSV); printed to stdout when absent.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Also compute the parallax precision/recall curve, with ground-truth
    /// edges at this threshold.
    #[arg(long, value_name = "TAU_GT", num_args = 0..=1, default_missing_value = "0.02")]
    pr: Option<f64>,
    /// PR table (CSV); printed to stdout when absent.
    #[arg(long)]
    pr_table: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = 1000)]
    seed: u64,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 96)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    n_h: usize,
    #[arg(long, default_value_t = 8)]
    n_v: usize,
    #[arg(long, default_value_t = 1.0)]
    disparity: f32,
    #[arg(long, default_value_t = 0.0)]
    gain: f32,
}

/// A failed command and the exit status it maps to.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Dimension(_)
            | Error::InvalidParam(_)
            | Error::Config(_)
            | Error::Checkpoint(_) => Failure::Usage(e.to_string()),
            Error::Io { .. } | Error::Format(_) | Error::Index(_) => {
                Failure::Runtime(e.to_string())
            }
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Anything that goes wrong while reading a user-supplied input is a usage error.
fn input<T>(r: apa_core::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn write_manifest(m: &Manifest, explicit: Option<&Path>, default: Option<PathBuf>) -> CmdResult {
    if let Some(path) = explicit.map(Path::to_path_buf).or(default) {
        m.write(path)?;
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.deterministic {
        Some(1)
    } else {
        cli.threads
    };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    let manifest_path = cli.manifest.as_deref();
    match &cli.command {
        Command::SynthNoise {
            input: path,
            out,
            sigma,
            seed,
        } => {
            let noise = NoiseConfig::new(*sigma, *seed)?;
            let clean = input(load_lft(path))?;
            let noisy = add_awgn(&clean, &noise);
            save_lft(&noisy, out)?;
            let n = clean.data().len() as f64;
            let var = clean
                .data()
                .iter()
                .zip(noisy.data())
                .map(|(c, y)| ((y - c) as f64).powi(2))
                .sum::<f64>()
                / n;
            println!("empirical sigma: {:.4}", var.sqrt() * 255.0);
            let mut m = Manifest::new("synth-noise");
            m.push("sigma_255", sigma.to_string());
            m.push("seed", seed.to_string());
            m.file("input", path)?;
            m.file("output", out)?;
            write_manifest(&m, manifest_path, Some(with_suffix(out, ".manifest")))
        }
        Command::Features {
            input: path,
            out_dir,
            config,
        } => {
            let cfg = match config {
                Some(c) => input(RunConfig::load(c))?,
                None => RunConfig::default(),
            };
            let lf = input(load_lft(path))?;
            let f = ApaFeatures::compute(&lf, &cfg.guided)?;
            fs::create_dir_all(out_dir)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out_dir.display())))?;
            // channels go on the angular axis they were averaged out of
            let (n_h, n_v) = (lf.n_h(), lf.n_v());
            let outputs = [
                ("x_h.lft", LightField::from_stack(n_h, 1, f.x_h.clone())?),
                ("x_v.lft", LightField::from_stack(1, n_v, f.x_v.clone())?),
                (
                    "x_avg.lft",
                    LightField::from_views(1, 1, std::slice::from_ref(&f.x_avg))?,
                ),
                (
                    "x_h_norm.lft",
                    LightField::from_stack(n_h, 1, f.x_h_norm.clone())?,
                ),
                (
                    "x_v_norm.lft",
                    LightField::from_stack(1, n_v, f.x_v_norm.clone())?,
                ),
            ];
            let mut m = Manifest::new("features");
            m.config(&cfg);
            m.file("input", path)?;
            for (name, field) in &outputs {
                let p = out_dir.join(name);
                save_lft(field, &p)?;
                m.file(&format!("output.{}", name.trim_end_matches(".lft")), &p)?;
            }
            write_manifest(&m, manifest_path, Some(out_dir.join("features.manifest")))
        }
        Command::Train(args) => train(args, cli, manifest_path),
        Command::Denoise(args) => denoise(args, manifest_path),
        Command::Eval(args) => eval(args, manifest_path),
        Command::EstimateSigma { input: path } => {
            let lf = input(load_lft(path))?;
            let s = estimate_sigma(&lf);
            println!("estimated sigma: {s:.3}");
            println!("nearest trained level: {}", nearest_level(s));
            let mut m = Manifest::new("estimate-sigma");
            m.file("input", path)?;
            m.push("estimate", format!("{s:.6}"));
            write_manifest(&m, manifest_path, None)
        }
        Command::Toy(a) => {
            let params = ToySceneParams {
                w: a.width,
                h: a.height,
                n_h: a.n_h,
                n_v: a.n_v,
                max_disparity: a.disparity,
                view_gain: a.gain,
            };
            if params.w == 0 || params.h == 0 || params.n_h == 0 || params.n_v == 0 {
                return Err(Failure::Usage(
                    "toy scene dimensions must be positive".into(),
                ));
            }
            fs::create_dir_all(&a.out_dir)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", a.out_dir.display())))?;
            let mut m = Manifest::new("toy");
            for i in 0..a.count {
                let seed = a.seed + i as u64;
                let p = a.out_dir.join(format!("scene_{seed}.lft"));
                save_lft(&toy_scene(&params, seed), &p)?;
                m.push(format!("scene.{i}.seed"), seed.to_string());
                m.file(&format!("output.{i}"), &p)?;
            }
            println!("wrote {} scenes to {}", a.count, a.out_dir.display());
            write_manifest(&m, manifest_path, Some(a.out_dir.join("toy.manifest")))
        }
        Command::ImportPgm { dir, n_h, n_v, out } => {
            let lf = input(load_pgm_grid(dir, *n_h, *n_v))?;
            save_lft(&lf, out)?;
            let mut m = Manifest::new("import-pgm");
            m.push("input.dir", dir.display().to_string());
            m.file("output", out)?;
            write_manifest(&m, manifest_path, Some(with_suffix(out, ".manifest")))
        }
        Command::ExportPgm {
            input: path,
            out_dir,
        } => {
            let lf = input(load_lft(path))?;
            save_pgm_grid(&lf, out_dir)?;
            let mut m = Manifest::new("export-pgm");
            m.file("input", path)?;
            m.push("output.dir", out_dir.display().to_string());
            write_manifest(&m, manifest_path, Some(out_dir.join("export.manifest")))
        }
        Command::Selftest => {
            let checks = run_selftest();
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Failure::Runtime(format!(
                    "{failed} of {} checks failed",
                    checks.len()
                )));
            }
            Ok(())
        }
    }
}

fn load_scenes(dir: &Path) -> std::result::Result<(Vec<PathBuf>, Vec<LightField>), Failure> {
    let entries =
        fs::read_dir(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "lft"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Usage(format!(
            "no .lft files in {}",
            dir.display()
        )));
    }
    let scenes = paths
        .iter()
        .map(load_lft)
        .collect::<apa_core::Result<Vec<_>>>();
    Ok((paths, input(scenes)?))
}

fn loss_went_down(summaries: &[TrainSummary]) -> bool {
    summaries.iter().all(|s| match s.epoch_means.as_slice() {
        [first, .., last] => last < first,
        _ => matches!((s.initial_loss(), s.final_loss()), (Some(a), Some(b)) if b < a),
    })
}

fn train(args: &TrainArgs, cli: &Cli, manifest_path: Option<&Path>) -> CmdResult {
    let mut cfg = match &args.config {
        Some(c) => input(RunConfig::load(c))?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.sigma {
        cfg.sigma_255 = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if args.max_steps.is_some() {
        cfg.max_steps = args.max_steps;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.deterministic |= cli.deterministic;
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let tcfg = cfg.train_config()?;
    let syn = match (args.stage, &args.syn_ckpt) {
        (Stage::View, None) => {
            return Err(Failure::Usage("--stage view requires --syn-ckpt".into()))
        }
        (Stage::View, Some(p)) => Some(input(SynModel::load(p))?),
        (Stage::Syn, _) => None,
    };
    if let Some(syn) = &syn {
        if syn.sigma_255 != tcfg.sigma_255 {
            return Err(Failure::Usage(format!(
                "sigma mismatch: syn checkpoint has sigma {}, view training uses {}",
                syn.sigma_255, tcfg.sigma_255
            )));
        }
    }
    let (paths, scenes) = load_scenes(&args.data)?;

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, ".log"));
    let log_file = File::create(&log_path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", log_path.display())))?;
    let mut log = BufWriter::new(log_file);
    let mut log_err = None;
    let mut on_step = |r: &LogRecord| {
        if let Err(e) = writeln!(log, "{r}") {
            log_err.get_or_insert(e);
        }
        if r.step.is_multiple_of(100) {
            eprintln!("step {} epoch {} loss {:.6e}", r.step, r.epoch, r.loss);
        }
    };
    let mut m = Manifest::new(match args.stage {
        Stage::Syn => "train --stage syn",
        Stage::View => "train --stage view",
    });
    m.config(&cfg);
    let summaries = match &syn {
        None => {
            m.push(
                "seed.syn/init",
                derive_seed(cfg.seed, "syn/init").to_string(),
            );
            m.push(
                "seed.syn/shuffle",
                derive_seed(cfg.seed, "syn/shuffle").to_string(),
            );
            let (model, summary) = train_syn(&scenes, &tcfg, &mut on_step)?;
            model.save(&args.out)?;
            vec![summary]
        }
        Some(syn) => {
            m.push(
                "seed.view/init",
                derive_seed(cfg.seed, "view/init").to_string(),
            );
            m.push(
                "seed.view/shuffle",
                derive_seed(cfg.seed, "view/shuffle").to_string(),
            );
            let (model, summaries) = train_view(&scenes, syn, &tcfg, &mut on_step)?;
            model.save(&args.out)?;
            summaries
        }
    };
    log.flush()
        .map_err(|e| Failure::Runtime(format!("{}: {e}", log_path.display())))?;
    if let Some(e) = log_err {
        return Err(Failure::Runtime(format!("{}: {e}", log_path.display())));
    }
    for i in 0..scenes.len() {
        m.push(
            format!("seed.train-noise/{i}"),
            derive_seed(cfg.seed, &format!("train-noise/{i}")).to_string(),
        );
    }
    for (i, p) in paths.iter().enumerate() {
        m.file(&format!("input.scene.{i}"), p)?;
    }
    let sums: Vec<String> = paths
        .iter()
        .map(sha256_file)
        .collect::<apa_core::Result<_>>()?;
    m.push(
        "input.data_fingerprint",
        sha256_hex(sums.join("\n").as_bytes()),
    );
    if let Some(p) = &args.syn_ckpt {
        m.file("input.syn_ckpt", p)?;
    }
    m.file("output.checkpoint", &args.out)?;
    m.file("output.log", &log_path)?;
    let first = summaries
        .first()
        .and_then(TrainSummary::initial_loss)
        .unwrap_or(f64::NAN);
    let last = summaries
        .last()
        .and_then(TrainSummary::final_loss)
        .unwrap_or(f64::NAN);
    println!("loss: {first:.6e} -> {last:.6e}");
    if !loss_went_down(&summaries) {
        eprintln!("warning: training loss did not decrease over the run");
    }
    write_manifest(&m, manifest_path, Some(with_suffix(&args.out, ".manifest")))
}

fn denoise(args: &DenoiseArgs, manifest_path: Option<&Path>) -> CmdResult {
    let noisy = input(load_lft(&args.input))?;
    let syn = match (&args.syn, args.method) {
        (_, Method::AvgAll) => None,
        (Some(p), _) => Some(input(SynModel::load(p))?),
        (None, _) => return Err(Failure::Usage("--syn is required for this method".into())),
    };
    let view = match (&args.view, args.method) {
        (Some(p), Method::Apa) => Some(input(ViewModel::load(p))?),
        (None, Method::Apa) => {
            return Err(Failure::Usage("--view is required for --method apa".into()))
        }
        _ => None,
    };
    if let (Some(s), Some(syn)) = (args.sigma, &syn) {
        if s != syn.sigma_255 {
            return Err(Failure::Usage(format!(
                "sigma mismatch: input declared sigma {s}, checkpoints trained for sigma {}",
                syn.sigma_255
            )));
        }
    }
    let mut m = Manifest::new("denoise");
    m.file("input", &args.input)?;
    let out = match (args.method, &syn, &view) {
        (Method::AvgAll, _, _) => baseline_avg_all(&noisy),
        (Method::ApaSyn, Some(syn), _) => baseline_apa_syn(&noisy, syn)?,
        (Method::Apa, Some(syn), Some(view)) => {
            check_pair(syn, view)?;
            let r = denoise_lf(&noisy, syn, view)?;
            if let Some(dir) = &args.emit_intermediates {
                fs::create_dir_all(dir)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
                let x_avg = LightField::from_views(1, 1, std::slice::from_ref(&r.x_avg))?;
                for (name, field) in [
                    ("x_avg.lft", &x_avg),
                    ("lf_syn.lft", &r.lf_syn),
                    ("x_parallax.lft", &r.x_parallax),
                ] {
                    let p = dir.join(name);
                    save_lft(field, &p)?;
                    m.file(&format!("output.{}", name.trim_end_matches(".lft")), &p)?;
                }
            }
            r.lf_denoised
        }
        _ => unreachable!("checkpoints were loaded for the chosen method"),
    };
    save_lft(&out, &args.out)?;
    if let Some(dir) = &args.pgm_dir {
        save_pgm_grid(&out, dir)?;
        m.push("output.pgm_dir", dir.display().to_string());
    }
    if let Some(p) = &args.syn {
        m.file("input.syn", p)?;
    }
    if let Some(p) = &args.view {
        m.file("input.view", p)?;
    }
    m.push(
        "method",
        match args.method {
            Method::Apa => "apa",
            Method::ApaSyn => "apa-syn",
            Method::AvgAll => "avg-all",
        },
    );
    m.file("output", &args.out)?;
    write_manifest(&m, manifest_path, Some(with_suffix(&args.out, ".manifest")))
}

fn eval(args: &EvalArgs, manifest_path: Option<&Path>) -> CmdResult {
    let gt = input(load_lft(&args.gt))?;
    let test = input(load_lft(&args.test))?;
    let report = lf_quality(&gt, &test)?;
    println!("psnr_mean {}", fmt_db(report.psnr_mean));
    println!("ssim_mean {:.6}", report.ssim_mean);
    if report.psnr_capped {
        eprintln!("note: identical views had their PSNR capped before averaging");
    }
    let mut m = Manifest::new("eval");
    m.file("input.gt", &args.gt)?;
    m.file("input.test", &args.test)?;
    m.push("psnr_mean", fmt_db(report.psnr_mean));
    m.push("ssim_mean", format!("{:.6}", report.ssim_mean));
    match &args.table {
        Some(p) => {
            fs::write(p, report.to_csv())
                .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            m.file("output.table", p)?;
        }
        None => print!("{}", report.to_csv()),
    }
    if let Some(tau_gt) = args.pr {
        let curve = parallax_pr(&gt, &test, tau_gt, &default_thresholds())?;
        m.push("tau_gt", tau_gt.to_string());
        match &args.pr_table {
            Some(p) => {
                fs::write(p, curve.to_csv())
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
                m.file("output.pr_table", p)?;
            }
            None => print!("{}", curve.to_csv()),
        }
    }
    write_manifest(
        &m,
        manifest_path,
        args.table.as_ref().map(|t| with_suffix(t, ".manifest")),
    )
}
