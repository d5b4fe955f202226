use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shieldpool_core::bloom::BloomParams;
use shieldpool_harness::bench::{bench_bloom, bench_transitivity};
use shieldpool_harness::{run_scenario, Runner, Scenario};
use shieldpool_protocol::authority::{Direction, TxGraph};

#[derive(Parser)]
#[command(name = "shieldpool", version, about = "Compliance-aware shielded pool simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and report per-step metrics.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long, env = "SHIELDPOOL_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Also write line-delimited records here.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Empirical versus analytic bloom false-positive rates.
    BenchBloom {
        #[arg(long, default_value_t = 16384)]
        m: u32,
        #[arg(long, default_value_t = 2)]
        k: u32,
        /// Insertion counts to sample.
        #[arg(long, value_delimiter = ',', default_value = "0,250,500,1000,1600,2500")]
        points: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        queries: u64,
        #[arg(long, env = "SHIELDPOOL_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Neighborhood size per hop from one address.
    BenchTransitivity {
        /// Edge list, `from to [count]` per line. Without it a uniform tree is built.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Start address; defaults to the uniform tree's root.
        #[arg(long, default_value = "r")]
        root: String,
        #[arg(long, default_value_t = 4)]
        max_hops: usize,
        #[arg(long, default_value_t = 5)]
        degree: usize,
        /// Follow funding sources instead of payees.
        #[arg(long)]
        backward: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Run a scenario, then compare the authority's records with the registry.
    Audit {
        scenario: PathBuf,
        #[arg(long, env = "SHIELDPOOL_SEED")]
        seed: Option<u64>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Scenario, ExitCode> {
    match Scenario::load(path) {
        Ok(mut s) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            Ok(s)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn print_json<T: serde::Serialize>(rows: &[T]) {
    for r in rows {
        println!("{}", serde_json::to_string(r).expect("plain data serializes"));
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            format,
            jsonl,
        } => {
            let s = match load(&scenario, seed) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let report = run_scenario(&s);
            match format {
                Format::Table => print!("{}", report.to_table()),
                Format::Jsonl => print!("{}", report.to_jsonl()),
            }
            if let Some(path) = jsonl {
                if let Err(e) = std::fs::write(&path, report.to_jsonl()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    eprintln!("assertion failed: {f}");
                }
                ExitCode::FAILURE
            }
        }
        Command::BenchBloom {
            m,
            k,
            points,
            queries,
            seed,
            format,
        } => {
            let params = match BloomParams::new(m, k) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let rows = bench_bloom(params, &points, queries, seed);
            match format {
                Format::Jsonl => print_json(&rows),
                Format::Table => {
                    println!("m={m} k={k} queries={queries} seed={seed}");
                    println!("{:>7} {:>10} {:>10} {:>8}", "n", "analytic", "empirical", "diff");
                    for r in rows {
                        println!(
                            "{:>7} {:>10.5} {:>10.5} {:>+8.5}",
                            r.n,
                            r.analytic,
                            r.empirical,
                            r.empirical - r.analytic
                        );
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::BenchTransitivity {
            graph,
            root,
            max_hops,
            degree,
            backward,
            format,
        } => {
            let g = match &graph {
                Some(path) => match std::fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| {
                    TxGraph::parse(&t).map_err(|e| e.to_string())
                }) {
                    Ok(g) => g,
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                },
                None => TxGraph::uniform_tree(degree, max_hops),
            };
            let dir = if backward { Direction::Backward } else { Direction::Forward };
            let rows = match bench_transitivity(&g, &root, max_hops, dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match format {
                Format::Jsonl => print_json(&rows),
                Format::Table => {
                    println!(
                        "nodes={} edges={} avg_out_degree={:.3}",
                        g.node_count(),
                        g.edge_count(),
                        g.average_out_degree()
                    );
                    println!("{:>4} {:>10} {:>10} {:>12} {:>7}", "hop", "|N_n|", "frontier", "edges", "ratio");
                    for r in rows {
                        let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
                        println!(
                            "{:>4} {:>10} {:>10} {:>12} {:>7}",
                            r.hop, r.size, r.frontier, r.visited_edges, ratio
                        );
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Audit { scenario, seed } => {
            let s = match load(&scenario, seed) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let mut runner = Runner::new(&s);
            for (i, step) in s.steps.iter().enumerate() {
                runner.step(i + 1, step);
            }
            let a = runner.audit();
            println!("records          {}", a.records);
            println!("flagged records  {}", a.flagged_records);
            println!("registry entries {}", a.smt_entries);
            println!("export bytes     {}", runner.authority.db().export().len());
            for k in &a.orphan_keys {
                println!("orphan key       {}", k.to_hex());
            }
            for k in &a.missing_keys {
                println!("missing key      {}", k.to_hex());
            }
            for c in &a.bad_records {
                println!("bad record       {}", c.0.to_hex());
            }
            if a.is_consistent() {
                println!("consistent");
                ExitCode::SUCCESS
            } else {
                println!("INCONSISTENT");
                ExitCode::FAILURE
            }
        }
    }
}
