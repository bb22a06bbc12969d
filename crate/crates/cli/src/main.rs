use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kgcjoin::output::{summary_line, write_triples_tsv};
use kgcjoin::{run_experiment, Algorithm, CliError, ExperimentConfig};
use kgcjoin_core::baseline::QuickjoinParams;
use kgcjoin_core::eval::{filtered_rank_metrics, top1_stats};
use kgcjoin_core::join::{JoinConfig, PivotChoice, DEFAULT_MAX_GROUP_SIZE};
use kgcjoin_core::{EmbeddingMatrix, MetricModel, Norm, SyntheticDistribution, TripleList};

#[derive(Parser)]
#[command(
    name = "kgcjoin",
    version,
    about = "Epsilon join over knowledge-graph embeddings: find all (head, relation, tail) triples within a distance threshold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Pivot,
    Naive,
    Quickjoin,
}

#[derive(Clone, Copy, ValueEnum)]
enum PivotArg {
    Zero,
    #[value(name = "meanB", alias = "meanb")]
    MeanB,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Clustered,
}

#[derive(Subcommand)]
enum Command {
    /// Run the completion join and emit qualifying triples as TSV.
    Complete {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        relations: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Lp norm order.
        #[arg(long, default_value_t = 2)]
        p: u8,
        #[arg(long, value_enum, default_value = "pivot")]
        algorithm: AlgorithmArg,
        #[arg(long, default_value_t = DEFAULT_MAX_GROUP_SIZE)]
        max_group_size: usize,
        /// Evaluate in fixed-height row blocks (pivot algorithm only).
        #[arg(long)]
        partition_rows: Option<usize>,
        #[arg(long)]
        exclude_self: bool,
        /// Triple TSV whose entries are dropped from the output.
        #[arg(long)]
        exclude_known: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "zero")]
        pivot: PivotArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config and print a TSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Cross-check that all algorithms produce identical triple sets.
        #[arg(long)]
        verify: bool,
        /// Show preprocessing time separately in the table.
        #[arg(long)]
        time_breakdown: bool,
    },
    /// Report the minimum ternary distance and entity value ranges.
    Top1 {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        relations: PathBuf,
        #[arg(long)]
        exclude_self: bool,
        #[arg(long, default_value_t = 2)]
        p: u8,
    },
    /// Filtered MRR and Hits@k over a test split.
    RankMetrics {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        relations: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        total: PathBuf,
        #[arg(long, default_value_t = 2)]
        p: u8,
    },
    /// Generate a synthetic embedding matrix.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value = "uniform")]
        dist: DistArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Version/help requests are success; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgcjoin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Complete {
            entities,
            relations,
            eps,
            p,
            algorithm,
            max_group_size,
            partition_rows,
            exclude_self,
            exclude_known,
            pivot,
            out,
        } => {
            let e = EmbeddingMatrix::load(&entities)?;
            let r = EmbeddingMatrix::load(&relations)?;
            let model = MetricModel::transe(Norm::from_order(p)?);
            let mut cfg = JoinConfig::new(eps);
            cfg.max_group_size = max_group_size;
            cfg.exclude_self = exclude_self;
            cfg.pivot = match pivot {
                PivotArg::Zero => PivotChoice::Zero,
                PivotArg::MeanB => PivotChoice::MeanB,
            };
            if let Some(path) = &exclude_known {
                cfg.exclude_known = Some(TripleList::load(path)?);
            }
            let algorithm = match (algorithm, partition_rows) {
                (AlgorithmArg::Pivot, Some(rows)) => {
                    cfg.partition_rows = rows;
                    Algorithm::PivotPartitioned
                }
                (AlgorithmArg::Pivot, None) => Algorithm::Pivot,
                (AlgorithmArg::Naive, None) => Algorithm::Naive,
                (AlgorithmArg::Quickjoin, None) => Algorithm::Quickjoin,
                _ => {
                    return Err(CliError::Usage(
                        "--partition-rows only applies to the pivot algorithm".into(),
                    ))
                }
            };
            let outcome = kgcjoin::run::run_algorithm(
                algorithm,
                &e,
                &r,
                &model,
                &cfg,
                &QuickjoinParams::default(),
            )?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|err| {
                        CliError::Data(format!("cannot create {}: {err}", path.display()))
                    })?;
                    let mut w = std::io::BufWriter::new(file);
                    write_triples_tsv(&mut w, &outcome.triples, &e, &r)
                        .and_then(|_| w.flush())
                        .map_err(|err| CliError::Data(format!("write failed: {err}")))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut w = std::io::BufWriter::new(stdout.lock());
                    write_triples_tsv(&mut w, &outcome.triples, &e, &r)
                        .and_then(|_| w.flush())
                        .map_err(|err| CliError::Data(format!("write failed: {err}")))?;
                }
            }
            eprintln!("{}", summary_line(&outcome.stats));
            Ok(())
        }
        Command::Bench { config, verify, time_breakdown } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg, verify)?;
            print!("{}", report.to_tsv());
            eprint!("{}", report.to_table(time_breakdown));
            Ok(())
        }
        Command::Top1 { entities, relations, exclude_self, p } => {
            let e = EmbeddingMatrix::load(&entities)?;
            let r = EmbeddingMatrix::load(&relations)?;
            let model = MetricModel::transe(Norm::from_order(p)?);
            let stats = top1_stats(&e, &r, &model, exclude_self)?;
            let (h, rel, t) = stats.argmin;
            println!("top1\t{:.6}", stats.top1);
            println!("argmin\t{h}\t{rel}\t{t}");
            println!("max_dim_range\t{:.6}", stats.max_range);
            Ok(())
        }
        Command::RankMetrics { entities, relations, test, total, p } => {
            let e = EmbeddingMatrix::load(&entities)?;
            let r = EmbeddingMatrix::load(&relations)?;
            let model = MetricModel::transe(Norm::from_order(p)?);
            let test = TripleList::load(&test)?;
            let total = TripleList::load(&total)?;
            let metrics = filtered_rank_metrics(&e, &r, &model, &test, &total)?;
            println!("MRR\t{:.6}", metrics.mrr);
            println!("Hits@1\t{:.6}", metrics.hits1);
            println!("Hits@3\t{:.6}", metrics.hits3);
            println!("Hits@10\t{:.6}", metrics.hits10);
            Ok(())
        }
        Command::Synth { n, d, dist, seed, out } => {
            let dist = match dist {
                DistArg::Uniform => SyntheticDistribution::Uniform,
                DistArg::Clustered => SyntheticDistribution::Clustered,
            };
            let m = EmbeddingMatrix::synthetic(n, d, dist, seed)?;
            m.save(&out)?;
            eprintln!("wrote {} ({} x {})", out.display(), m.rows(), m.dim());
            Ok(())
        }
    }
}
