use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcam::checkpoint::save_pcn;
use pcam::data::{ImageTensor, TensorFormat};
use pcam_harness::config::{inventory, RawConfig, Task};
use pcam_harness::experiment::{load_data, ModelCache};
use pcam_harness::grid::{difference_row, emit_grid};
use pcam_harness::{run_experiment, HarnessError, Result};

#[derive(Parser)]
#[command(name = "pcam", version, about = "Predictive coding networks as associative memories")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a PCN on the configured data and save its checkpoint.
    Train,
    /// Recall stored items from noisy copies.
    Denoise,
    /// Recall stored items from partial copies.
    Complete,
    /// Recall images from captions and captions from images.
    Hetero,
    /// Compare against modern Hopfield networks over the beta and copies grid.
    Mhn,
    /// Compare against an autoencoder trained on the same data.
    Ae,
    /// Check the analytic updates against finite differences.
    Gradcheck,
    /// Tile image files into a grid.
    Grid(GridArgs),
    /// Print every configuration key with its default.
    Keys,
}

#[derive(Args)]
struct GridArgs {
    /// One row of comma-separated image files; repeat for more rows.
    #[arg(long = "row", required = true)]
    rows: Vec<String>,
    /// Append the scaled absolute difference of two rows, given as `A,B`.
    #[arg(long)]
    diff: Option<String>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "grid.ppm")]
    name: String,
}

fn load_config(global: &Global, task: Option<Task>) -> Result<RawConfig> {
    let mut raw = match &global.config {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    if let Some(task) = task {
        raw.set("task", task.name())?;
    }
    for kv in &global.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
        raw.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = global.seed {
        raw.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &global.out {
        raw.set("out", &out.to_string_lossy())?;
    }
    Ok(raw)
}

fn run_task(global: &Global, task: Task) -> Result<()> {
    let raw = load_config(global, Some(task))?;
    let result = run_experiment(&raw);
    let artifacts = match result {
        Ok(a) => a,
        Err(HarnessError::GradCheckFailed { max_error, tolerance }) => {
            eprintln!("gradient check FAILED: max relative error {max_error:.3e} (tolerance {tolerance:.0e})");
            return Err(HarnessError::GradCheckFailed { max_error, tolerance });
        }
        Err(e) => return Err(e),
    };
    for r in &artifacts.rows {
        println!(
            "{:<9} depth={} width={} N={} {:<22} rate={:.3} ({}/{}) mean_mse={:.3e} {}",
            r.task, r.depth, r.width, r.n, r.corruption, r.rate, r.retrieved, r.total, r.mean_mse, r.params
        );
    }
    for task in ["mhn", "ae"] {
        if let Some(best) = artifacts.best(task) {
            println!("best {task}: rate={:.3} mean_mse={:.3e} {}", best.rate, best.mean_mse, best.params);
        }
    }
    println!("metrics: {}", artifacts.metrics_path.display());
    Ok(())
}

fn train(global: &Global) -> Result<()> {
    let raw = load_config(global, None)?;
    let mut cache = ModelCache::default();
    for (i, point) in raw.points().iter().enumerate() {
        let cfg = point.resolve()?;
        std::fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::Io {
            path: cfg.out.clone(),
            source: e,
        })?;
        let data = load_data(&cfg)?;
        let (model, trace) = cache.train(&cfg, &data)?;
        let path = cfg.out.join(format!("pcn_{i}.pcam"));
        save_pcn(model, &path)?;
        println!(
            "{}: {} epochs, final mean energy {:.4e}{} -> {}",
            raw.swept_values(point),
            trace.epochs.len(),
            trace.final_energy().unwrap_or(f64::NAN),
            if trace.converged { " (converged)" } else { "" },
            path.display()
        );
    }
    Ok(())
}

fn read_image(path: &str) -> Result<ImageTensor> {
    let p = PathBuf::from(path.trim());
    let format = TensorFormat::from_path(&p)
        .ok_or_else(|| HarnessError::Config(format!("{path}: unknown image extension")))?;
    Ok(ImageTensor::read(&p, format)?)
}

fn grid(global: &Global, args: &GridArgs) -> Result<()> {
    let mut rows = args
        .rows
        .iter()
        .map(|r| r.split(',').map(read_image).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    if let Some(spec) = &args.diff {
        let idx: Vec<usize> = spec
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| HarnessError::Config(format!("--diff {spec:?}"))))
            .collect::<Result<_>>()?;
        let (a, b) = match idx[..] {
            [a, b] if a < rows.len() && b < rows.len() => (a, b),
            _ => return Err(HarnessError::Config(format!("--diff {spec:?} must name two existing rows"))),
        };
        let d = difference_row(&rows[a], &rows[b])?;
        rows.push(d);
    }
    let out = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::Io {
        path: out.clone(),
        source: e,
    })?;
    let path = out.join(&args.name);
    emit_grid(&rows, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train => train(&cli.global),
        Command::Denoise => run_task(&cli.global, Task::Denoise),
        Command::Complete => run_task(&cli.global, Task::Complete),
        Command::Hetero => run_task(&cli.global, Task::Hetero),
        Command::Mhn => run_task(&cli.global, Task::MhnCompare),
        Command::Ae => run_task(&cli.global, Task::AeCompare),
        Command::Gradcheck => run_task(&cli.global, Task::GradCheck),
        Command::Grid(args) => grid(&cli.global, args),
        Command::Keys => {
            print!("{}", inventory());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
