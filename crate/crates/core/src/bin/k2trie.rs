use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use k2trie::bench::{self, Dataset, DumpFormat, QueryMode, VerifyOptions};
use k2trie::{GridShape, K2Trie, TrieConfig};

#[derive(Parser)]
#[command(
    name = "k2trie",
    version,
    about = "Dynamic k2-tree benchmarks and checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Edge list with one "row col" pair per line
    #[arg(required_unless_present = "clustered")]
    input: Option<PathBuf>,
    /// Use this many synthetic clustered points instead of a file
    #[arg(long, conflicts_with = "input")]
    clustered: Option<usize>,
    /// Grid side; defaults to the smallest power of two covering the data
    #[arg(long)]
    side: Option<u64>,
}

impl Input {
    fn load(&self, seed: u64) -> k2trie::Result<Dataset> {
        match (&self.input, self.clustered) {
            (Some(path), _) => bench::ingest(path, self.side),
            (None, Some(n)) => {
                let shape = GridShape::new(self.side.unwrap_or(1 << 20))?;
                Ok(Dataset {
                    name: format!("clustered-{n}"),
                    points: bench::clustered(n, shape, seed),
                    shape,
                })
            }
            (None, None) => unreachable!("clap requires one input"),
        }
    }
}

#[derive(Args)]
struct Config {
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 512)]
    nmax: usize,
    #[arg(long, default_value_t = 96)]
    n1max: usize,
    #[arg(long, default_value_t = 1)]
    n2max: usize,
    #[arg(long, default_value_t = 8)]
    d1: u32,
    #[arg(long, default_value_t = 12)]
    d2: u32,
}

impl Config {
    fn get(&self) -> TrieConfig {
        TrieConfig {
            epsilon: self.epsilon,
            n_max: self.nmax,
            n1_max: self.n1max,
            n2_max: self.n2max,
            d1: self.d1,
            d2: self.d2,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse an edge list and report its size
    IngestCheck {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Insert a dataset in shuffled order and report time and space
    BenchInsert {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        config: Config,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a dataset, then time membership queries
    BenchQuery {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        config: Config,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "existing")]
        mode: QueryMode,
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuzz the trie against a point-set oracle and static rebuilds
    Verify {
        /// Grid side is 2^grid_bits
        #[arg(long, default_value_t = 10)]
        grid_bits: u32,
        #[arg(long, default_value_t = 100_000)]
        ops: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also check block invariants after every mutation
        #[arg(long)]
        check_structure: bool,
        #[command(flatten)]
        config: Config,
    },
    /// Write the levelwise codes of a dataset's trie
    Dump {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        config: Config,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "text")]
        format: DumpFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> k2trie::Result<ExitCode> {
    match cli.cmd {
        Cmd::IngestCheck { input, seed, out } => {
            let ds = input.load(seed)?;
            let distinct: std::collections::HashSet<_> = ds.points.iter().collect();
            let mut w = csv::Writer::from_writer(output(&out)?);
            w.write_record(["dataset", "side", "points", "distinct"])?;
            w.write_record([
                ds.name.clone(),
                ds.shape.side().to_string(),
                ds.points.len().to_string(),
                distinct.len().to_string(),
            ])?;
            w.flush()?;
        }
        Cmd::BenchInsert {
            input,
            config,
            seed,
            out,
        } => {
            let ds = input.load(seed)?;
            let (_, rec) = bench::bench_insert(&ds, config.get(), seed)?;
            bench::write_csv(output(&out)?, &[rec])?;
        }
        Cmd::BenchQuery {
            input,
            config,
            seed,
            mode,
            count,
            out,
        } => {
            let ds = input.load(seed)?;
            let (t, ins) = bench::bench_insert(&ds, config.get(), seed)?;
            let mut rec = bench::bench_query(&t, &ds.name, mode, count, seed)?;
            rec.mean_insert_us = ins.mean_insert_us;
            bench::write_csv(output(&out)?, &[rec])?;
        }
        Cmd::Verify {
            grid_bits,
            ops,
            seed,
            check_structure,
            config,
        } => {
            let shape = GridShape::from_levels(grid_bits)?;
            let mut t = K2Trie::new(shape, config.get())?;
            let mut opts = VerifyOptions::new(shape, ops, seed);
            opts.check_each_mutation = check_structure;
            let rep = bench::verify(&mut t, &opts)?;
            match &rep.divergence {
                None => println!(
                    "pass: {} ops ({} inserts, {} deletes, {} lookups, {} ranges), {} checkpoints, {} points",
                    rep.ops, rep.inserts, rep.deletes, rep.lookups, rep.ranges, rep.checkpoints, rep.final_points
                ),
                Some((i, msg)) => {
                    eprintln!("FAIL at op {i} (grid bits {grid_bits}, seed {seed}): {msg}");
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Cmd::Dump {
            input,
            config,
            seed,
            format,
            out,
        } => {
            let ds = input.load(seed)?;
            let (t, _) = bench::bench_insert(&ds, config.get(), seed)?;
            bench::dump(&t, format, output(&out)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
