//! `latent-edit` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on bad arguments or
//! unusable input files.

mod commands;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fail::Fail;

#[derive(Parser, Debug)]
#[command(name = "latent-edit", version)]
#[command(about = "Latent recovery, attribute hyperplanes and edit sweeps over toy or exported models")]
#[command(
    after_help = "Model specs look like `blob:seed=7,d=8,size=64`. Kinds: blob, condblob, latentlinear, brightness."
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw latents, render them and store their attribute scores
    SampleDataset {
        #[arg(long)]
        generator: String,
        #[arg(long)]
        scorer: String,
        #[arg(short = 'n', long = "count")]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Skip writing images; only samples.jsonl is produced
        #[arg(long)]
        no_images: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train a linear attribute hyperplane on the score extremes of a dataset
    TrainHyperplane {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5600)]
        pos: usize,
        #[arg(long, default_value_t = 5600)]
        neg: usize,
        #[arg(long, default_value_t = 4800)]
        val: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lambda: f64,
        #[arg(long, default_value = "beauty")]
        attribute: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a latent code whose synthesis matches an image
    Recover {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        generator: String,
        /// Recovery config JSON; omitted keys take their defaults
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-step JSONL trace
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Average latent JSON: penalty anchor and AVERAGE start point
        #[arg(long)]
        z_avg: Option<PathBuf>,
        /// Label target for a conditional generator
        #[arg(long)]
        label_target: Option<PathBuf>,
        /// Where a conditional run writes the recovered label
        #[arg(long)]
        label_out: Option<PathBuf>,
    },
    /// Render frames along a hyperplane normal
    Edit {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        hyperplane: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        end: f64,
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        step: f64,
        #[arg(long)]
        generator: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render frames with increasing beauty label and fixed identity
    BeautifyConditional {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        label: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha_step: f64,
        #[arg(long, default_value_t = 11)]
        frames: usize,
        #[arg(long)]
        generator: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fréchet distance between two feature sets or image directories
    Fid {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// BRISQUE quality score of an image or the mean over a directory
    Brisque {
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mean embedding distance between paired images or feature rows
    IdentityDistance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<(), Fail> {
    match cmd {
        Command::SampleDataset {
            generator,
            scorer,
            n,
            seed,
            out,
            no_images,
            jobs,
        } => commands::sample_dataset(&generator, &scorer, n, seed, &out, !no_images, jobs),
        Command::TrainHyperplane {
            dataset,
            pos,
            neg,
            val,
            seed,
            epochs,
            lambda,
            attribute,
            out,
        } => {
            let cfg = latent_edit::SvmConfig {
                epochs,
                lambda,
                seed,
                positives: pos,
                negatives: neg,
                validation: val,
                ..Default::default()
            };
            commands::train_hyperplane(&dataset, &cfg, &attribute, &out)
        }
        Command::Recover {
            image,
            generator,
            config,
            out,
            trace,
            eta,
            max_steps,
            seed,
            z_avg,
            label_target,
            label_out,
        } => commands::recover(commands::RecoverArgs {
            image,
            generator,
            config,
            out,
            trace,
            eta,
            max_steps,
            seed,
            z_avg,
            label_target,
            label_out,
        }),
        Command::Edit {
            latent,
            hyperplane,
            start,
            end,
            step,
            generator,
            out,
            jobs,
        } => commands::edit(&latent, &hyperplane, (start, end, step), &generator, &out, jobs),
        Command::BeautifyConditional {
            latent,
            label,
            alpha_step,
            frames,
            generator,
            out,
        } => commands::beautify(&latent, &label, alpha_step, frames, &generator, &out),
        Command::Fid { a, b, report } => commands::fid(&a, &b, report.as_deref()),
        Command::Brisque { image, model, report } => commands::brisque(&image, &model, report.as_deref()),
        Command::IdentityDistance { a, b, report } => commands::identity_distance(&a, &b, report.as_deref()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
