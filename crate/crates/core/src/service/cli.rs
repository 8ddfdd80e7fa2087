use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use super::{resolve_data_path, AppState, Registry};
use crate::dataset::{
    augment_manifest, caption_records, ingest_images, load_taxonomy, split_manifest, synthesize_corpus,
    validate_manifest, CaptionerAdapter, DatasetManifest, ExternalCaptioner, ImageSize, SyntheticCorpusSpec,
    TemplateCaptioner,
};
use crate::diffusion::{sample, SampleRequest, SamplerKind};
use crate::eval::{evaluate_pair, render_report, ConvFeatureBank, EvalConfig, EvalReport, ReportFormat, StatisticsEmbedder};
use crate::train::{finetune, Checkpoint, CodecChoice, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "ttx", version, about = "Text-guided textile pattern generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaptionerKind {
    /// Deterministic colour/structure template.
    #[value(alias = "template")]
    Stub,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodecArg {
    Identity,
    Avgpool,
    Patch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerArg {
    Ddim,
    Ddpm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Markdown,
    Csv,
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, value_enum, default_value = "identity")]
    codec: CodecArg,
    /// Diffusion steps T.
    #[arg(long, default_value_t = 200)]
    timesteps: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let mut c = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            seed: self.seed,
            hidden: self.hidden,
            codec: match self.codec {
                CodecArg::Identity => CodecChoice::Identity,
                CodecArg::Avgpool => CodecChoice::AvgPool2x,
                CodecArg::Patch => CodecChoice::Patch2x {
                    channels: crate::diffusion::PatchCodec::DEFAULT_CHANNELS,
                },
            },
            ..TrainConfig::default()
        };
        c.schedule.steps = self.timesteps;
        c
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a manifest from a directory of keyword-named image folders.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Caption every record, then append the keyword tail.
    Caption {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "stub")]
        captioner: CaptionerKind,
        /// Program for the external captioner; it receives the image path as its last argument.
        #[arg(long)]
        program: Option<String>,
        #[arg(long = "arg", allow_hyphen_values = true)]
        args: Vec<String>,
        /// Leave captions without the keyword tail.
        #[arg(long)]
        no_augment: bool,
        /// Defaults to overwriting the input manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report manifest violations.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Render the seeded tileable synthetic corpus.
    SynthCorpus {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the untrained checkpoint the trainer would start from.
    Init {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune from --init (or a fresh initialisation) and write a checkpoint.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample PNG images from a checkpoint.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 3.0)]
        guidance: f64,
        #[arg(long, value_enum, default_value = "ddim")]
        sampler: SamplerArg,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two checkpoints on both metrics per keyword.
    Evaluate {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// `all` or a comma-separated keyword list.
        #[arg(long, default_value = "all")]
        keywords: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 3.0)]
        guidance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a saved evaluation report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// `name=path`, repeatable.
        #[arg(long = "register", required = true)]
        register: Vec<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 2)]
        max_concurrent: usize,
    },
}

fn load_manifest(path: &Path) -> anyhow::Result<DatasetManifest> {
    DatasetManifest::load(&resolve_data_path(path)).with_context(|| format!("loading manifest {}", path.display()))
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(&resolve_data_path(path)).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn split(args: &TrainArgs) -> anyhow::Result<(DatasetManifest, DatasetManifest, TrainConfig)> {
    let manifest = load_manifest(&args.manifest)?;
    let (train, val) = split_manifest(&manifest, args.val_fraction, args.seed)?;
    Ok((train, val, args.config()))
}

fn execute(command: Command) -> anyhow::Result<()> {
    let taxonomy = load_taxonomy();
    match command {
        Command::Ingest { dir, size, out } => {
            let outcome = ingest_images(&resolve_data_path(&dir), &taxonomy, ImageSize::square(size))?;
            for w in &outcome.warnings {
                eprintln!("warning: {w:?}");
            }
            let path = outcome.manifest.save(&resolve_data_path(&out))?;
            println!("{} records -> {}", outcome.manifest.len(), path.display());
        }
        Command::Caption {
            manifest,
            captioner,
            program,
            args,
            no_augment,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let adapter: Box<dyn CaptionerAdapter> = match captioner {
                CaptionerKind::Stub => Box::new(TemplateCaptioner),
                CaptionerKind::External => {
                    let Some(program) = program else {
                        bail!("--captioner external needs --program");
                    };
                    Box::new(ExternalCaptioner::new(program, args))
                }
            };
            let mut captioned = caption_records(&m, adapter.as_ref())?;
            if !no_augment {
                captioned = augment_manifest(&captioned)?;
            }
            let path = captioned.save(&resolve_data_path(out.as_ref().unwrap_or(&manifest)))?;
            println!("captioned {} records with {} -> {}", captioned.len(), adapter.name(), path.display());
        }
        Command::Validate { manifest } => {
            let report = validate_manifest(&load_manifest(&manifest)?);
            for v in &report.violations {
                println!("{v}");
            }
            println!("{} violations", report.violations.len());
            if !report.is_valid() {
                bail!("manifest has {} violations", report.violations.len());
            }
        }
        Command::SynthCorpus {
            classes,
            per_class,
            size,
            seed,
            out,
        } => {
            let spec = SyntheticCorpusSpec::standard(classes, per_class, ImageSize::square(size), seed);
            if spec.classes.len() != classes {
                bail!("at most {} classes are available", spec.classes.len());
            }
            let m = synthesize_corpus(&spec, &taxonomy)?;
            let path = m.save(&resolve_data_path(&out))?;
            println!("{} records -> {}", m.len(), path.display());
        }
        Command::Init { train, out } => {
            let (train_m, _, config) = split(&train)?;
            let ckpt = Checkpoint::initialize(&train_m, &config)?;
            ckpt.save(&resolve_data_path(&out))?;
            println!("{} -> {}", ckpt.digest(), out.display());
        }
        Command::Train { train, init, out } => {
            let (train_m, val_m, config) = split(&train)?;
            let initial = init.as_deref().map(load_checkpoint).transpose()?;
            let ckpt = finetune(initial.as_ref(), &train_m, &val_m, &config)?;
            for m in ckpt.history.iter().skip(ckpt.history.len().saturating_sub(config.epochs)) {
                let val = m.val_loss.map_or("-".to_string(), |v| format!("{v:.5}"));
                println!("epoch {:>3}  train {:.5}  val {val}", m.epoch, m.train_loss);
            }
            ckpt.save(&resolve_data_path(&out))?;
            println!("{} -> {}", ckpt.digest(), out.display());
        }
        Command::Generate {
            ckpt,
            prompt,
            seed,
            count,
            steps,
            guidance,
            sampler,
            eta,
            out,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let request = SampleRequest {
                prompt,
                seed,
                steps,
                guidance,
                count,
                sampler: match sampler {
                    SamplerArg::Ddim => SamplerKind::Ddim { eta },
                    SamplerArg::Ddpm => SamplerKind::Ddpm,
                },
            };
            let images = sample(&ckpt.sampling_context(), &request)?;
            let dir = resolve_data_path(&out);
            std::fs::create_dir_all(&dir)?;
            for (i, img) in images.iter().enumerate() {
                let path = dir.join(format!("sample_{i:03}.png"));
                img.save_png(&path)?;
                println!("{}", path.display());
            }
        }
        Command::Evaluate {
            candidate,
            baseline,
            manifest,
            keywords,
            seed,
            count,
            steps,
            guidance,
            out,
        } => {
            let reference = load_manifest(&manifest)?;
            let keywords: Vec<String> = if keywords == "all" {
                reference.keywords_present()
            } else {
                keywords
                    .split(',')
                    .map(|k| {
                        let k = k.trim();
                        reference
                            .taxonomy
                            .resolve(k)
                            .map(String::from)
                            .ok_or_else(|| anyhow::anyhow!("unknown keyword {k:?}"))
                    })
                    .collect::<anyhow::Result<_>>()?
            };
            let config = EvalConfig {
                num_generated: count,
                seed,
                steps,
                guidance,
                ..EvalConfig::default()
            };
            let report = evaluate_pair(
                &load_checkpoint(&candidate)?,
                &load_checkpoint(&baseline)?,
                &keywords,
                &reference,
                &config,
                &StatisticsEmbedder::new(),
                &ConvFeatureBank::default(),
            )?;
            report.save(&resolve_data_path(&out))?;
            print!("{}", render_report(&report, ReportFormat::Text));
        }
        Command::Report { input, format, out } => {
            let report = EvalReport::load(&resolve_data_path(&input))?;
            let format = match format {
                FormatArg::Text => ReportFormat::Text,
                FormatArg::Markdown => ReportFormat::Markdown,
                FormatArg::Csv => ReportFormat::Csv,
            };
            let text = render_report(&report, format);
            match out {
                Some(p) => std::fs::write(resolve_data_path(&p), text)?,
                None => print!("{text}"),
            }
        }
        Command::Serve {
            register,
            addr,
            max_concurrent,
        } => {
            let mut registry = Registry::new();
            for spec in &register {
                registry.register(spec, resolve_data_path)?;
            }
            let state = AppState::new(registry, taxonomy, max_concurrent);
            tokio::runtime::Runtime::new()?.block_on(super::serve(state, &addr))?;
        }
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the subcommand. Returns 0 on
/// success, 1 on a domain error and 2 on a usage error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
