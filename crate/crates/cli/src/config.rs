//! Experiment configuration: a flat `key = value` text file so protocol
//! presets can ship in-repo.
//!
//! Schema (one key per line, `#` starts a comment):
//!
//! ```text
//! tag = fb15k                 # dataset tag in the report
//! source = files              # files | synth
//! entities = models/fb15k/entities.kgj1     (files only)
//! relations = models/fb15k/relations.kgj1   (files only)
//! n = 2000                    # synth only: entity count
//! d = 64                      # synth only: dimensionality
//! relations_count = 8         # synth only: relation count
//! distribution = uniform      # synth only: uniform | clustered
//! p = 2                       # Lp norm order, 1 or 2
//! seed = 42                   # subsampling, synthesis, quickjoin pivots
//! algorithms = pivot, naive   # pivot | pivot-partitioned | naive | quickjoin
//! epsilons = 2.25, 2.75       # at least one
//! fractions = 0.2, 1.0        # entity subsample fractions, default 1.0
//! group_sizes = 300000        # default 300000
//! partition_rows = 4096       # pivot-partitioned block height
//! pivot = zero                # zero | meanB
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kgcjoin_core::join::{PivotChoice, DEFAULT_MAX_GROUP_SIZE, DEFAULT_PARTITION_ROWS};
use kgcjoin_core::SyntheticDistribution;

use crate::run::Algorithm;
use crate::CliError;

#[derive(Debug, Clone)]
pub enum DataSource {
    Files {
        entities: PathBuf,
        relations: PathBuf,
    },
    Synth {
        n: usize,
        d: usize,
        relations_count: usize,
        distribution: SyntheticDistribution,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub tag: String,
    pub source: DataSource,
    pub p: u8,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub epsilons: Vec<f64>,
    pub fractions: Vec<f64>,
    pub group_sizes: Vec<usize>,
    pub partition_rows: usize,
    pub pivot: PivotChoice,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let usage = |msg: String| CliError::Usage(msg);
        let mut kv: HashMap<String, String> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            if kv.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(usage(format!("config line {}: duplicate key {key}", lineno + 1)));
            }
        }

        const KNOWN: &[&str] = &[
            "tag", "source", "entities", "relations", "n", "d", "relations_count",
            "distribution", "p", "seed", "algorithms", "epsilons", "fractions",
            "group_sizes", "partition_rows", "pivot",
        ];
        for key in kv.keys() {
            if !KNOWN.contains(&key.as_str()) {
                return Err(usage(format!("unknown config key {key}")));
            }
        }

        let get = |k: &str| kv.get(k).map(String::as_str);
        let source = match get("source").unwrap_or("files") {
            "files" => DataSource::Files {
                entities: PathBuf::from(
                    get("entities").ok_or_else(|| usage("source=files needs entities".into()))?,
                ),
                relations: PathBuf::from(
                    get("relations").ok_or_else(|| usage("source=files needs relations".into()))?,
                ),
            },
            "synth" => DataSource::Synth {
                n: parse_one(get("n"), "n")?,
                d: parse_one(get("d"), "d")?,
                relations_count: parse_one(get("relations_count"), "relations_count")?,
                distribution: match get("distribution").unwrap_or("uniform") {
                    "uniform" => SyntheticDistribution::Uniform,
                    "clustered" => SyntheticDistribution::Clustered,
                    other => return Err(usage(format!("unknown distribution {other}"))),
                },
            },
            other => return Err(usage(format!("unknown source {other}"))),
        };

        let algorithms: Vec<Algorithm> = parse_list(get("algorithms"), "algorithms")?;
        if algorithms.is_empty() {
            return Err(usage("algorithms list is empty".into()));
        }
        let epsilons: Vec<f64> = parse_list(get("epsilons"), "epsilons")?;
        if epsilons.is_empty() {
            return Err(usage("epsilons list is empty".into()));
        }
        let fractions: Vec<f64> = match get("fractions") {
            Some(s) => parse_list(Some(s), "fractions")?,
            None => vec![1.0],
        };
        let group_sizes: Vec<usize> = match get("group_sizes") {
            Some(s) => parse_list(Some(s), "group_sizes")?,
            None => vec![DEFAULT_MAX_GROUP_SIZE],
        };

        Ok(ExperimentConfig {
            tag: get("tag").unwrap_or("dataset").to_string(),
            source,
            p: parse_one(get("p").or(Some("2")), "p")?,
            seed: parse_one(get("seed").or(Some("42")), "seed")?,
            algorithms,
            epsilons,
            fractions,
            group_sizes,
            partition_rows: parse_one(
                get("partition_rows").or(Some(&DEFAULT_PARTITION_ROWS.to_string())),
                "partition_rows",
            )?,
            pivot: match get("pivot").unwrap_or("zero") {
                "zero" => PivotChoice::Zero,
                "meanB" | "meanb" => PivotChoice::MeanB,
                other => return Err(usage(format!("unknown pivot {other}"))),
            },
        })
    }
}

fn parse_one<T: FromStr>(value: Option<&str>, key: &str) -> Result<T, CliError> {
    let value = value.ok_or_else(|| CliError::Usage(format!("missing config key {key}")))?;
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value for {key}: {value:?}")))
}

fn parse_list<T: FromStr>(value: Option<&str>, key: &str) -> Result<Vec<T>, CliError> {
    let Some(value) = value else {
        return Err(CliError::Usage(format!("missing config key {key}")));
    };
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Usage(format!("bad value for {key}: {s:?}")))
        })
        .collect()
}
