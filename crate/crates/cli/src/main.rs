//! `frdl`: synthetic data, preprocessing exports, training, evaluation,
//! the frame-jump benchmark and single-clip prediction.
//!
//! Exit status: 0 success, 1 data error, 2 configuration error, 3 training
//! divergence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frdl::harness::{
    bench_csv, benchmark_jump, evaluate, history_csv, preprocess_detailed, preprocess_labeled,
    preprocess_sample, train_dataset, Model, TrainConfig,
};
use frdl::ingest::{
    generate_synthetic_dataset, load_dataset, load_sample, pnm::write_pnm, save_dataset, split_dataset, Dataset,
};
use frdl::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "frdl", version, about = "Action recognition from short clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Dataset root laid out as <class>/<sample>/frame_00000.pgm
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Flat key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Keep one frame in every JUMP
    #[arg(long, global = true)]
    jump: Option<usize>,
    /// Neighbours in the KNN fallback
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Softmax top-2 margin below which KNN decides
    #[arg(long = "margin-tau", global = true)]
    margin_tau: Option<f64>,
    /// Run seed (also seeds synthetic generation)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model file to write (train) or read (eval, predict)
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset to --out
    Synth,
    /// Export masks (PGM), skeleton images (PPM) and HOG rows (CSV) to --out
    Preprocess,
    /// Train on the training split of --data and save --checkpoint
    Train,
    /// Evaluate --checkpoint on the test split of --data
    Eval,
    /// Train, evaluate and time the pipeline for each configured jump
    BenchJump,
    /// Classify one clip directory with --checkpoint
    Predict { sample_dir: PathBuf },
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn load_config(opts: &Opts) -> Result<TrainConfig> {
    let mut c = match &opts.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(j) = opts.jump {
        c.jump = j;
    }
    if let Some(k) = opts.k {
        c.knn.k = k;
    }
    if let Some(t) = opts.margin_tau {
        c.knn.margin_tau = t;
    }
    if let Some(s) = opts.seed {
        c.seed = s;
        c.synth.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| config_error(format!("--{flag} is required")))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn splits(config: &TrainConfig, data: &Path) -> Result<(Dataset, Dataset, Dataset)> {
    let ds = load_dataset(data)?;
    split_dataset(&ds, config.split, config.seed)
}

fn synth(config: &TrainConfig, opts: &Opts) -> Result<()> {
    let out = need(&opts.out, "out")?;
    let s = generate_synthetic_dataset(&config.synth)?;
    save_dataset(&s.dataset, out)?;
    println!("wrote {} clips in {} classes to {}", s.dataset.len(), s.dataset.num_classes(), out.display());
    Ok(())
}

fn preprocess(config: &TrainConfig, opts: &Opts) -> Result<()> {
    let ds = load_dataset(need(&opts.data, "data")?)?;
    let out = need(&opts.out, "out")?;
    let mut hog = String::new();
    for sample in &ds.samples {
        let p = preprocess_detailed(sample, config)?;
        let dir = out.join("masks").join(&p.sample_id);
        mkdir(&dir)?;
        for (mask, idx) in p.masks.iter().zip(&p.frame_indices) {
            write_pnm(&dir.join(format!("mask_{idx:05}.pgm")), &mask.to_frame())?;
        }
        if let Some(img) = &p.skeleton_image {
            let path = out.join("skeleton").join(format!("{}.ppm", p.sample_id));
            mkdir(path.parent().unwrap())?;
            write_pnm(&path, &img.to_frame())?;
        }
        for (step, idx) in p.features.steps.iter().zip(&p.frame_indices) {
            let _ = write!(hog, "{},{idx}", p.sample_id);
            for v in &step.hog {
                let _ = write!(hog, ",{v}");
            }
            hog.push('\n');
        }
    }
    write(&out.join("hog.csv"), &hog)?;
    println!("preprocessed {} clips into {}", ds.len(), out.display());
    Ok(())
}

fn train(config: &TrainConfig, opts: &Opts) -> Result<()> {
    let checkpoint = need(&opts.checkpoint, "checkpoint")?;
    let (tr, va, _) = splits(config, need(&opts.data, "data")?)?;
    let (model, history) = train_dataset(config, &tr, &va)?;
    model.save(checkpoint)?;
    if let Some(out) = &opts.out {
        write(&out.join("history.csv"), &history_csv(&history))?;
        write(&out.join("config.txt"), &config.to_text())?;
    }
    let last = history.last().expect("at least one epoch");
    println!("epochs {}", history.len());
    println!("train_loss {:.6}", last.train_loss);
    println!("val_accuracy {:.6}", last.val_accuracy);
    println!("checkpoint {}", checkpoint.display());
    Ok(())
}

fn eval(config: &TrainConfig, opts: &Opts) -> Result<()> {
    let model = Model::load(need(&opts.checkpoint, "checkpoint")?, config)?;
    let (_, _, test) = splits(config, need(&opts.data, "data")?)?;
    if test.class_names != model.class_names {
        return Err(Error::Data(format!(
            "dataset classes {:?} do not match the model's {:?}",
            test.class_names, model.class_names
        )));
    }
    let feats = preprocess_labeled(&test.samples, config)?;
    let (metrics, cm, _) = evaluate(&model, &config.knn, &feats)?;
    let text = metrics.to_text();
    print!("{text}");
    if let Some(out) = &opts.out {
        write(&out.join("metrics.txt"), &text)?;
        write(&out.join("confusion.csv"), &cm.to_csv())?;
    }
    Ok(())
}

fn bench(config: &TrainConfig, opts: &Opts) -> Result<()> {
    let ds = match &opts.data {
        Some(d) => load_dataset(d)?,
        None => generate_synthetic_dataset(&config.bench_spec())?.dataset,
    };
    let rows = benchmark_jump(config, &ds, &config.bench_jumps)?;
    let csv = bench_csv(&rows);
    print!("{csv}");
    if let Some(out) = &opts.out {
        write(&out.join("bench.csv"), &csv)?;
    }
    Ok(())
}

fn predict(config: &TrainConfig, opts: &Opts, dir: &Path) -> Result<()> {
    let model = Model::load(need(&opts.checkpoint, "checkpoint")?, config)?;
    let sample = load_sample(dir, 0)?;
    let feats = preprocess_sample(&sample, config)?;
    let d = model.predict(&feats, &config.knn)?;
    println!("label {}", model.class_names[d.label]);
    println!("route {}", d.route.name());
    for (name, p) in model.class_names.iter().zip(&d.probabilities) {
        println!("probability.{name} {p:.6}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(&cli.opts)?;
    let go = || match &cli.command {
        Command::Synth => synth(&config, &cli.opts),
        Command::Preprocess => preprocess(&config, &cli.opts),
        Command::Train => train(&config, &cli.opts),
        Command::Eval => eval(&config, &cli.opts),
        Command::BenchJump => bench(&config, &cli.opts),
        Command::Predict { sample_dir } => predict(&config, &cli.opts, sample_dir),
    };
    if config.threads > 0 {
        frdl::par::with_workers(config.threads, go)
    } else {
        go()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Divergence { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("frdl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
