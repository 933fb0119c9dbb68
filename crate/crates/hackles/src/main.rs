//! Thin command-line front end over [`hackles::pipeline`]: flag parsing,
//! config-file merging, and exit-code mapping live here; everything else
//! is library code.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hackles::pipeline::{
    cmd_eval, cmd_gen, cmd_report, cmd_run, cmd_train, render_cv_text, Pathway, PipelineError,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "hackles",
    version,
    about = "Multimodal anger detection: synthetic data, training, replay, evaluation"
)]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for everything downstream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory all artifacts live under.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FusionFlags {
    /// Minimum confidence for a vote to count (inclusive).
    #[arg(long)]
    vote_threshold: Option<f64>,
    /// Maximum vote age in milliseconds (inclusive).
    #[arg(long)]
    staleness_ms: Option<u64>,
    /// Session anger threshold on the detection ratio.
    #[arg(long)]
    session_threshold: Option<f64>,
    /// Drop the rule engines' direct votes (classifier and lexicon only).
    #[arg(long)]
    no_rule_vote: bool,
    /// Merge rule and classifier votes into one slot per modality.
    #[arg(long)]
    collapse_votes: bool,
    /// Replace the built-in ruleset (JSON file).
    #[arg(long)]
    ruleset: Option<PathBuf>,
    /// Replace the built-in lexicon (XML or word-per-line file).
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl FusionFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.vote_threshold {
            cfg.vote_threshold = v;
        }
        if let Some(v) = self.staleness_ms {
            cfg.staleness_ms = v;
        }
        if let Some(v) = self.session_threshold {
            cfg.session_threshold = v;
        }
        if self.no_rule_vote {
            cfg.rule_vote_enabled = false;
        }
        if self.collapse_votes {
            cfg.collapse_rule_and_svm_votes = true;
        }
        if let Some(p) = &self.ruleset {
            cfg.ruleset = Some(p.clone());
        }
        if let Some(p) = &self.lexicon {
            cfg.lexicon = Some(p.clone());
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset under <out>/sessions.
    Gen {
        /// Number of synthetic actors.
        #[arg(long)]
        actors: Option<usize>,
        /// Enactments per actor per emotion class.
        #[arg(long)]
        acts: Option<usize>,
        /// Frames per second of the generated streams.
        #[arg(long)]
        fps: Option<f64>,
        /// Directory of gesture scripts replacing the built-in library.
        #[arg(long)]
        scripts: Option<PathBuf>,
    },
    /// Split the dataset and train per-modality classifiers.
    Train {
        /// Session directory (default <out>/sessions).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Feature layout to train: geometric, rule-augmented, or both.
        #[arg(long, default_value = "geometric")]
        pathway: String,
        /// Training rows sampled per session per modality.
        #[arg(long)]
        rows_per_session: Option<usize>,
        /// Slack penalty C.
        #[arg(long)]
        c: Option<f64>,
        /// Kernel width override, repeatable: --gamma hand=0.0625
        #[arg(long, value_name = "MODALITY=VALUE")]
        gamma: Vec<String>,
        /// Cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
        /// Fraction of sessions kept for training.
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Disable min-max feature scaling.
        #[arg(long)]
        no_scale: bool,
        /// KKT tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Outer optimization sweep cap.
        #[arg(long)]
        max_sweeps: Option<usize>,
        /// Replace the built-in ruleset (rule-augmented rows).
        #[arg(long)]
        ruleset: Option<PathBuf>,
    },
    /// Replay one session file through the full detector stack.
    Run {
        /// Session file (.jsonl).
        session: PathBuf,
        /// Model directory (default <out>/models/geometric).
        #[arg(long)]
        models: Option<PathBuf>,
        #[command(flatten)]
        fusion: FusionFlags,
    },
    /// Score the held-out split for every trained pathway.
    Eval {
        /// Session directory (default <out>/sessions).
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        fusion: FusionFlags,
    },
    /// Re-render the stored reports of a run directory.
    Report,
}

fn parse_gamma(specs: &[String], cfg: &mut RunConfig) -> Result<(), PipelineError> {
    for spec in specs {
        let Some((name, value)) = spec.split_once('=') else {
            return Err(PipelineError::Usage(format!(
                "--gamma wants MODALITY=VALUE, got `{spec}`"
            )));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| PipelineError::Usage(format!("--gamma {name}: bad number `{value}`")))?;
        cfg.gammas.insert(name.to_string(), value);
    }
    Ok(())
}

fn parse_pathways(spec: &str) -> Result<Vec<Pathway>, PipelineError> {
    match spec {
        "both" => Ok(Pathway::ALL.to_vec()),
        other => Pathway::from_name(other).map(|p| vec![p]).ok_or_else(|| {
            PipelineError::Usage(format!(
                "unknown pathway `{other}` (geometric, rule-augmented, both)"
            ))
        }),
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out;

    match cli.command {
        Command::Gen {
            actors,
            acts,
            fps,
            scripts,
        } => {
            if let Some(v) = actors {
                cfg.actors = v;
            }
            if let Some(v) = acts {
                cfg.acts_per_class = v;
            }
            if let Some(v) = fps {
                cfg.frame_rate = v;
            }
            let summary = cmd_gen(&cfg, scripts.as_deref(), &out)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "wrote {} sessions to {}",
                summary.sessions,
                summary.session_dir.display()
            );
        }
        Command::Train {
            data,
            pathway,
            rows_per_session,
            c,
            gamma,
            folds,
            train_fraction,
            no_scale,
            tolerance,
            max_sweeps,
            ruleset,
        } => {
            if let Some(v) = rows_per_session {
                cfg.rows_per_session = v;
            }
            if let Some(v) = c {
                cfg.c = v;
            }
            if let Some(v) = folds {
                cfg.folds = v;
            }
            if let Some(v) = train_fraction {
                cfg.train_fraction = v;
            }
            if no_scale {
                cfg.scale = false;
            }
            if let Some(v) = tolerance {
                cfg.tolerance = v;
            }
            if let Some(v) = max_sweeps {
                cfg.max_sweeps = v;
            }
            if let Some(p) = ruleset {
                cfg.ruleset = Some(p);
            }
            parse_gamma(&gamma, &mut cfg)?;
            let pathways = parse_pathways(&pathway)?;
            cfg.use_rules_as_features = pathways.contains(&Pathway::RuleAugmented);
            let data_dir = data.unwrap_or_else(|| out.join("sessions"));
            let summary = cmd_train(&cfg, &data_dir, &pathways, &out)?;
            println!(
                "split: {} train / {} test sessions",
                summary.split.train.len(),
                summary.split.test.len()
            );
            for report in &summary.pathways {
                print!("{}", render_cv_text(report));
            }
        }
        Command::Run {
            session,
            models,
            fusion,
        } => {
            fusion.apply(&mut cfg);
            let models_dir = models.unwrap_or_else(|| out.join("models").join("geometric"));
            let decision = cmd_run(&cfg, &session, &models_dir, &out)?;
            println!(
                "session {}: label {} predicted {} anger {} ({}/{} runs, confidence {:.3})",
                decision.session_id,
                decision.label,
                decision.predicted,
                decision.anger,
                decision.detections,
                decision.runs,
                decision.confidence
            );
        }
        Command::Eval { data, fusion } => {
            fusion.apply(&mut cfg);
            let data_dir = data.unwrap_or_else(|| out.join("sessions"));
            let summary = cmd_eval(&cfg, &data_dir, &out)?;
            for pe in &summary.pathways {
                println!(
                    "pathway {}: accuracy {:.3} macro-F {:.3} over {} sessions (reports under {})",
                    pe.pathway,
                    pe.report.accuracy,
                    pe.report.macro_f,
                    pe.sessions.len(),
                    out.join("eval").join(pe.pathway.dir_name()).display()
                );
            }
        }
        Command::Report => {
            print!("{}", cmd_report(&out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print and succeed; real parse errors are usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
