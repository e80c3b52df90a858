//! Command-line flags. Every subcommand's flags double as the field names
//! of its optional JSON config file; flags given on the command line win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "treedim",
    version,
    about = "Random trees under degree-dependent attachment: entropy and dimension of the leaf measure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Malthusian parameter, entropy and dimension in closed form
    Solve(SolveArgs),
    /// Grow one tree and dump it as CSV
    Grow(GrowArgs),
    /// Level-entropy estimates over independent replicas
    Entropy(EntropyArgs),
    /// Random leaf paths: ergodic entropy, local dimension, subtree-growth chain
    Leafwalk(LeafwalkArgs),
    /// Chi-square test of the discrete simulator against exact enumeration
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Discrete,
    Continuous,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Common {
    /// Maximal number of children K (rates default to 1 when --w is absent)
    #[arg(long)]
    pub k: Option<usize>,
    /// Birth rates w(0),...,w(K-1), comma separated [default: 1,1]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub w: Option<Vec<f64>>,
    /// Contraction ratio in (0,1) [default: 1/e]
    #[arg(long)]
    pub a: Option<f64>,
    /// Root-finding tolerance [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Base seed; replica r uses the stream (seed, r)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent replicas [default: 1]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Worker threads; falls back to TREEDIM_THREADS, then to all cores
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the main output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with the same field names as the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GrowArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Stop at this many vertices
    #[arg(long)]
    pub n: Option<usize>,
    /// Stop at this time
    #[arg(long)]
    pub t: Option<f64>,
    /// Embedded jump chain (birth time = attachment rank)
    #[arg(long)]
    pub discrete: bool,
    /// Per-vertex exponential construction (needs --t)
    #[arg(long)]
    pub recursive: bool,
    /// Write the summary JSON here instead of stderr
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Grow each replica to this many vertices
    #[arg(long)]
    pub size: Option<usize>,
    /// Levels n >= 1, comma separated [default: 10]
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Use complete K-ary trees, whose level entropy is exactly n log K
    #[arg(long)]
    pub selftest_uniform: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LeafwalkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Grow each replica to this many vertices
    #[arg(long)]
    pub size: Option<usize>,
    /// Path depth n [default: 10]
    #[arg(long)]
    pub level: Option<usize>,
    /// Paths per replica [default: 1000]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Walk a single chain, where every path has weight exactly 1
    #[arg(long)]
    pub selftest_chain: bool,
    /// Write the summary JSON here instead of stderr
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Tree size, at most 9 [default: 5]
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulated trees [default: 100000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Smallest passing p-value [default: 0.001]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Test a uniform-attachment simulator instead; it should fail
    #[arg(long)]
    pub negative_control: bool,
    #[arg(long, value_enum)]
    pub generator: Option<Generator>,
}

/// Fills every unset flag from the config file, if one was given.
pub fn resolve<T>(flags: &T, config: Option<&Path>) -> Result<T, CliError>
where
    T: Clone + Serialize + DeserializeOwned,
{
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: Value = serde_json::from_str(&text)?;
    let Value::Object(file) = file else {
        return Err(CliError::Usage(
            "config file must hold a JSON object".into(),
        ));
    };
    let mut merged = serde_json::to_value(flags)?;
    let slots = merged
        .as_object_mut()
        .expect("flags serialize to an object");
    for (key, value) in file {
        let Some(slot) = slots.get_mut(&key) else {
            return Err(CliError::Usage(format!("unknown config field `{key}`")));
        };
        if slot.is_null() || *slot == Value::Bool(false) {
            *slot = value;
        }
    }
    Ok(serde_json::from_value(merged)?)
}
