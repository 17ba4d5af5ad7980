//! `cfxplain`: train, explain, estimate footprints and report.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 a report gate failed.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cfxplain::classify::ClassifierKind;
use cfxplain::corpus::{generate_synthetic_corpus, write_transactions};
use cfxplain::explain::Metric;
use cfxplain::N_SECTORS;
use cfxplain::pipeline::{
    cmd_explain, cmd_footprint, cmd_lexicon, cmd_report, cmd_train, summary_path, Gate, PipelineConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfxplain", version, about = "Explainable transaction classification and carbon footprint")]
struct Cli {
    /// Pipeline config (JSON). Defaults to the bundled data and settings.
    #[arg(long, global = true, env = "CFXPLAIN_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings that take precedence over the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true, value_name = "svc|rf")]
    classifier: Option<ClassifierKind>,
    #[arg(long, global = true)]
    percentile: Option<u32>,
    #[arg(long, global = true, value_name = "jaccard|proximity")]
    metric: Option<Metric>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate on a labeled corpus and write the final model.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Evaluation report (JSON).
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Explain every transaction; writes JSON lines plus `<out>.summary.json`.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV with `transaction_id,judgment` for needs-review items.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Per-transaction CO2 and water estimates.
    Footprint {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge train, explain and footprint outputs and check gates.
    Report {
        #[arg(long)]
        train_report: PathBuf,
        #[arg(long)]
        explain_summary: PathBuf,
        #[arg(long)]
        footprint: PathBuf,
        /// Extra gate such as `min_validated=0.9`; repeatable.
        #[arg(long = "gate")]
        gates: Vec<Gate>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a labeled synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the sector lexicon from the enterprise corpus.
    Lexicon {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.folds {
        cfg.folds = v;
    }
    if let Some(v) = o.classifier {
        cfg.classifier = v;
    }
    if let Some(v) = o.percentile {
        cfg.percentile = v;
    }
    if let Some(v) = o.metric {
        cfg.metric = v;
    }
    if let Some(v) = o.top_k {
        cfg.top_k = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Train {
            input,
            model,
            report_out,
        } => {
            let r = cmd_train(&cfg, &input, &model, report_out.as_deref())
                .with_context(|| format!("training on {}", input.display()))?;
            let e = &r.evaluation;
            println!(
                "{} on {} rows ({} after dedup), {} folds: accuracy {:.4}, macro precision {:.4}, macro recall {:.4}",
                e.classifier, r.n_input, r.n_deduplicated, e.folds, e.accuracy, e.macro_precision, e.macro_recall
            );
            println!("model written to {}", model.display());
        }
        Command::Explain {
            model,
            input,
            out,
            annotations,
        } => {
            let r = cmd_explain(&cfg, &model, &input, &out, annotations.as_deref())
                .with_context(|| format!("explaining {}", input.display()))?;
            for (k, v) in &r.summary.percentages {
                println!("{k:<14}{v:6.2} %");
            }
            println!("explanations written to {}", out.display());
            println!("summary written to {}", summary_path(&out).display());
        }
        Command::Footprint { model, input, out } => {
            let r = cmd_footprint(&cfg, &model, &input, &out)
                .with_context(|| format!("estimating footprint of {}", input.display()))?;
            println!(
                "{} transactions: {:.3} kg CO2, {:.3} L water",
                r.estimates.len(),
                r.total_kg,
                r.water_liters
            );
        }
        Command::Report {
            train_report,
            explain_summary,
            footprint,
            gates,
            out,
        } => {
            let mut all: Vec<Gate> = cfg.gates.iter().map(|g| g.parse()).collect::<Result<_, _>>()?;
            all.extend(gates);
            let r = cmd_report(&train_report, &explain_summary, &footprint, &all)?;
            print!("{}", r.text);
            if let Some(p) = out {
                std::fs::write(&p, &r.text).with_context(|| format!("writing {}", p.display()))?;
            }
            if !r.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Synth { n, out } => {
            anyhow::ensure!(n >= N_SECTORS, "synthetic corpus needs at least {N_SECTORS} rows");
            let corpus = generate_synthetic_corpus(n, cfg.seed);
            let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_transactions(file, &corpus)?;
            println!("{n} transactions written to {}", out.display());
        }
        Command::Lexicon { out } => {
            cmd_lexicon(&cfg, &out)?;
            println!("lexicon written to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
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
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
