//! Pipeline driver: corpus ingestion, text preprocessing, topic modelling,
//! citation-graph analysis, community detection, and evaluation, wired as
//! subcommands over a single TOML run configuration.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{DanglingSetting, RunConfig, ValidationErrors};

#[derive(Parser)]
#[command(
    name = "caselaw",
    version,
    about = "Corpus topic modelling and citation-network analysis pipeline"
)]
struct Cli {
    /// Run configuration file
    #[arg(short, long, global = true, default_value = "config.toml")]
    config: PathBuf,

    /// Artifact directory override
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus and report the language/type census
    Ingest,
    /// Normalize English documents and build the vocabulary and bags of words
    Preprocess,
    /// Train the topic model and write the top-words report
    #[command(name = "lda-train")]
    LdaTrain {
        /// Topic count override
        #[arg(long)]
        k: Option<usize>,
        /// Gibbs iteration count override
        #[arg(long)]
        iterations: Option<usize>,
        /// Sampler seed override
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a range of topic counts by UMass coherence
    #[command(name = "lda-sweep")]
    LdaSweep {
        /// Lower topic-count bound override
        #[arg(long)]
        from: Option<usize>,
        /// Upper topic-count bound override
        #[arg(long)]
        to: Option<usize>,
    },
    /// Project document-topic vectors to 2D
    Embed {
        /// Perplexity override
        #[arg(long)]
        perplexity: Option<f64>,
        /// Embedding seed override
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the citation graph and extract its giant component
    #[command(name = "graph-build")]
    GraphBuild {
        /// Dangling-citation policy override
        #[arg(long, value_enum)]
        dangling: Option<DanglingSetting>,
    },
    /// Reweight giant-component edges by topic-vector cosine similarity
    Weight,
    /// Detect communities at each configured resolution
    Communities {
        /// Use the topic-weighted giant component
        #[arg(long)]
        weighted: bool,
        /// Resolution override; repeat for several values
        #[arg(long = "gamma")]
        gammas: Vec<f64>,
        /// Louvain seed override
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-tabulate partitions against annotations and score retrieval
    Evaluate {
        /// Label name override
        #[arg(long)]
        label: Option<String>,
        /// Dominant-topic share threshold override
        #[arg(long)]
        threshold: Option<f64>,
        /// Retrieval target topic override
        #[arg(long)]
        target_topic: Option<usize>,
    },
    /// Bundle every artifact into one report JSON
    Report,
    /// Run all stages in dependency order
    Pipeline,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };

    let mut config = match RunConfig::load(&cli.config) {
        Ok(config) => config,
        Err(err) => return report_error(err),
    };
    if let Some(out_dir) = cli.out_dir {
        config.paths.out_dir = out_dir;
    }
    apply_overrides(&mut config, &cli.command);
    if let Err(err) = config.validate() {
        eprintln!("{err}");
        return 1;
    }

    let result = match &cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Preprocess => commands::preprocess(&config),
        Command::LdaTrain { .. } => commands::lda_train(&config),
        Command::LdaSweep { .. } => commands::lda_sweep(&config),
        Command::Embed { .. } => commands::embed(&config),
        Command::GraphBuild { .. } => commands::graph_build(&config),
        Command::Weight => commands::weight(&config),
        Command::Communities { weighted, .. } => commands::communities(&config, *weighted),
        Command::Evaluate { .. } => commands::evaluate(&config),
        Command::Report => commands::report(&config),
        Command::Pipeline => commands::pipeline(&config),
    };
    match result {
        Ok(()) => 0,
        Err(err) => report_error(err),
    }
}

/// Command-line overrides write into the config before validation, so the
/// manifests record the values that actually ran.
fn apply_overrides(config: &mut RunConfig, command: &Command) {
    match command {
        Command::LdaTrain { k, iterations, seed } => {
            if let Some(k) = k {
                config.lda.k = *k;
            }
            if let Some(iterations) = iterations {
                config.lda.iterations = *iterations;
            }
            if let Some(seed) = seed {
                config.lda.seed = *seed;
            }
        }
        Command::LdaSweep { from, to } => {
            if from.is_some() {
                config.lda.sweep_from = *from;
            }
            if to.is_some() {
                config.lda.sweep_to = *to;
            }
        }
        Command::Embed { perplexity, seed } => {
            if let Some(perplexity) = perplexity {
                config.tsne.perplexity = *perplexity;
            }
            if let Some(seed) = seed {
                config.tsne.seed = *seed;
            }
        }
        Command::GraphBuild { dangling } => {
            if let Some(dangling) = dangling {
                config.graph.dangling = *dangling;
            }
        }
        Command::Communities { gammas, seed, .. } => {
            if !gammas.is_empty() {
                config.louvain.gammas = gammas.clone();
            }
            if let Some(seed) = seed {
                config.louvain.seed = *seed;
            }
        }
        Command::Evaluate {
            label,
            threshold,
            target_topic,
        } => {
            if label.is_some() {
                config.evaluation.label = label.clone();
            }
            if let Some(threshold) = threshold {
                config.evaluation.dominant_topic_threshold = *threshold;
            }
            if target_topic.is_some() {
                config.evaluation.target_topic = *target_topic;
            }
        }
        _ => {}
    }
}

fn report_error(err: anyhow::Error) -> i32 {
    if let Some(validation) = err.downcast_ref::<ValidationErrors>() {
        eprintln!("{validation}");
        return 1;
    }
    eprintln!("error: {err:#}");
    2
}
