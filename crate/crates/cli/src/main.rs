mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use log::info;
use serde_json::json;

use eigensal::eval::{self, EvalOptions};
use eigensal::imagekit::{load_image, save_binary, save_plane};
use eigensal::methods::{proposed_trace, run_method};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "eigensal",
    version,
    about = "Saliency maps in eigenvector space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute saliency maps for one or more images
    Saliency {
        #[arg(required = true, value_name = "IMAGE")]
        images: Vec<PathBuf>,
        /// Also write the mean-thresholded binary map
        #[arg(long)]
        binary: bool,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Score a method over an image/mask dataset
    Eval {
        images_dir: PathBuf,
        masks_dir: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Dump every intermediate of the eigenvector pipeline
    Inspect {
        image: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error: {}", usage_line(&e));
            return ExitCode::FAILURE;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

/// Collapses a clap diagnostic (message, hints, usage) onto one line.
fn usage_line(e: &clap::Error) -> String {
    let text = e.render().to_string();
    let body: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("error:"))
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.trim_start_matches("error:").trim())
        .collect();
    let msg = Some(body.join(" "))
        .filter(|m| !m.is_empty())
        .unwrap_or_else(|| match e.kind() {
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "missing subcommand".into(),
            _ => e.kind().to_string(),
        });
    let usage = text
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("Usage:"))
        .map(String::from)
        .unwrap_or_else(subcommand_usage);
    format!("{msg}; {usage}")
}

/// Usage of whichever subcommand appears on the command line, else of the tool.
fn subcommand_usage() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args()
        .skip(1)
        .find(|a| cmd.find_subcommand(a).is_some());
    let usage = match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|sub| sub.render_usage())) {
        Some(u) => u,
        None => cmd.render_usage(),
    };
    usage.to_string()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Saliency {
            images,
            binary,
            opts,
        } => {
            let cfg = prepare(&opts)?;
            for image in &images {
                cmd_saliency(image, binary, &cfg)?;
            }
            Ok(())
        }
        Command::Eval {
            images_dir,
            masks_dir,
            opts,
        } => cmd_eval(&images_dir, &masks_dir, &prepare(&opts)?),
        Command::Inspect { image, opts } => cmd_inspect(&image, &prepare(&opts)?),
    }
}

fn prepare(opts: &Overrides) -> Result<RunConfig> {
    let cfg = opts.resolve()?;
    if opts.print_config {
        print!("{}", cfg.to_toml()?);
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(cfg)
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .with_context(|| format!("no file name in {}", path.display()))
}

fn cmd_saliency(image: &Path, binary: bool, cfg: &RunConfig) -> Result<()> {
    let name = stem(image)?;
    let img = load_image::<f64>(image)?;
    let map = run_method(cfg.method, &img, &cfg.saliency())
        .with_context(|| format!("{} on {}", cfg.method, image.display()))?;
    let target = cfg.out.join(format!("{name}.saliency.png"));
    save_plane(&map, &target)?;
    println!("{}", target.display());
    if binary {
        let target = cfg.out.join(format!("{name}.binary.png"));
        save_binary(&eval::binarize_mean(&map), &target)?;
        println!("{}", target.display());
    }
    Ok(())
}

fn cmd_eval(images_dir: &Path, masks_dir: &Path, cfg: &RunConfig) -> Result<()> {
    let pairs = eval::discover_pairs(images_dir, masks_dir)?;
    info!("{} candidate pairs", pairs.len());
    let opts = EvalOptions {
        alpha: cfg.alpha,
        threads: cfg.threads,
    };
    let report = eval::evaluate_dataset(&pairs, cfg.method, &cfg.saliency(), &opts)?;
    report.write_csv(cfg.out.join("report.csv"))?;
    report.write_json(cfg.out.join("report.json"))?;
    println!(
        "{:<14} {:>8} {:>8} {:>8} {:>8}",
        "method", "P", "R", "F", "AUC"
    );
    println!(
        "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
        report.method,
        report.mean_precision,
        report.mean_recall,
        report.mean_f_measure,
        report.mean_auc
    );
    println!(
        "evaluated {} pairs, skipped {}",
        report.records.len(),
        report.warnings()
    );
    Ok(())
}

fn cmd_inspect(image: &Path, cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out.join(stem(image)?);
    let img = load_image::<f64>(image)?;
    let tr = proposed_trace(&img, &cfg.saliency())?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let save = |name: String, plane: &eigensal::Plane64| -> Result<String> {
        save_plane(plane, dir.join(&name))?;
        Ok(name)
    };
    let mut pct = Vec::new();
    let mut features = Vec::new();
    let mut conspicuity = Vec::new();
    for c in 0..3 {
        pct.push(save(format!("pct_{}.png", c + 1), &tr.components[c])?);
        let per_level = tr.feature_maps[c]
            .iter()
            .enumerate()
            .map(|(s, m)| save(format!("feature_{}_level_{}.png", c + 1, s + 1), m))
            .collect::<Result<Vec<_>>>()?;
        features.push(per_level);
        conspicuity.push(save(
            format!("conspicuity_{}.png", c + 1),
            &tr.conspicuity[c],
        )?);
    }
    let fused = save("fused.png".into(), &tr.saliency)?;

    let manifest = json!({
        "input": image.display().to_string(),
        "height": img.height(),
        "width": img.width(),
        "levels": tr.feature_maps[0].len(),
        "eigenvalues": tr.basis.eigvals,
        "eigenvectors": tr.basis.eigvecs,
        "channel_means": tr.basis.means,
        "epsilon": tr.weights,
        "files": {
            "pct": pct,
            "feature_maps": features,
            "conspicuity": conspicuity,
            "fused": fused,
        },
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n").context("writing manifest")?;
    let [e1, e2, e3] = tr.weights;
    println!("epsilon: {e1:.6} {e2:.6} {e3:.6}");
    println!("{}", dir.display());
    Ok(())
}
