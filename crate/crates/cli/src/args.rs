use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use expertfind_core::config::EngineConfig;
use expertfind_core::error::{Error, Result};

const AFTER_HELP: &str = "\
Every engine config key is also accepted as `--key value` (dashes or
underscores), for example `--scheme lm-dirichlet`, `--doc-fusion meank:3`,
`--profile-method raer --scaling sigmoid`, `--strategy 'rrm(bm25(rr), aes)'`,
`--store-dir /tmp/store`, `--seed 7`. Overrides apply on top of `--config`.
Run `expertfind config show` to list every key with its current value.";

#[derive(Debug, Parser)]
#[command(name = "expertfind", version, about = "Entity-based expert finding", after_help = AFTER_HELP)]
pub struct Cli {
    /// Engine config file (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus ingestion, entity annotation and text indexing.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Expertise profiles.
    Profile {
        #[command(subcommand)]
        action: ProfileAction,
    },
    /// Rank authors for a topic query.
    Query(QueryArgs),
    /// Run every configured strategy over a query set and evaluate it.
    BatchEval(BatchEvalArgs),
    /// Fuse TREC run files (method from `--fusion`).
    Fuse(FuseArgs),
    /// Evaluate a TREC run file against qrels.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve,
    /// Write a planted-expert corpus with queries, qrels and a config.
    GenerateSynthetic(SyntheticArgs),
    /// Inspect the effective configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexAction {
    /// Ingest documents and authors, annotate entities, build the text index.
    Build,
}

#[derive(Debug, Subcommand)]
pub enum ProfileAction {
    /// Build every author profile and the double index.
    Build,
    /// Print one author's profile.
    Show {
        author: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print every key with its effective value.
    Show,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Query text (multiple words are joined with spaces).
    #[arg(required = true, num_args = 1..)]
    pub text: Vec<String>,
    /// Number of results (default: `result_limit`).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Print the full JSON response instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BatchEvalArgs {
    /// Queries file: `query_id TAB text` lines.
    pub queries: PathBuf,
    /// TREC qrels file.
    pub qrels: PathBuf,
    /// Output directory for runs, metric tables and t-tests.
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// TREC run file; repeat for each input run.
    #[arg(long = "run", required = true, value_name = "PATH")]
    pub runs: Vec<PathBuf>,
    /// Write the fused run here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub run: PathBuf,
    pub qrels: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Output directory.
    pub dir: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub authors: usize,
    #[arg(long, default_value_t = 3)]
    pub topics: usize,
    #[arg(long, default_value_t = 3)]
    pub queries_per_topic: usize,
}

/// Config keys accepted as `--key value` overrides.
pub fn config_keys() -> Vec<String> {
    EngineConfig::default()
        .to_text()
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, _)| k.to_string()))
        .collect()
}

/// Remaining arguments and `(key, value)` overrides.
pub type SplitArgs = (Vec<String>, Vec<(String, String)>);

/// Splits `--key value` / `--key=value` pairs whose key is a config key out
/// of `args`. The first element (program name) is kept as is.
pub fn split_overrides(args: Vec<String>) -> Result<SplitArgs> {
    let keys = config_keys();
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    rest.extend(it.next());
    while let Some(arg) = it.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(it);
            break;
        }
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        let key = name.replace('-', "_");
        if !keys.contains(&key) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::Config(format!("`--{name}` needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// The config file (or defaults) with the overrides applied, validated.
pub fn load_config(path: Option<&std::path::Path>, overrides: &[(String, String)]) -> Result<EngineConfig> {
    let mut config = match path {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    for (k, v) in overrides {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}
