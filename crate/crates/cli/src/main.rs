use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kdag::energy::{evaluate_run, RunResult};
use kdag::experiments::{build_for, k_sweep, run_grid, KChoice, ScenarioGrid};
use kdag::{
    build_spd, generate_instance, BuilderConfig, ConnectivityGraph, EnergyModelF64, InstanceFile,
    PolicyKind, RoutingPolicy,
};

#[derive(Parser)]
#[command(
    name = "kdag-sim",
    version,
    about = "Build k-DAGs for sensor networks and compare their lifetime against the SPD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random connected instance.
    Gen {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Build the k-DAG and print its sibling-edge log.
    Build {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Latency slack in hops, or `max` for saturation.
        #[arg(long, default_value = "max")]
        k: KChoice,
        /// Write every delivered protocol message as NDJSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Lifetime and balance of SPD and k-DAG on one instance.
    Simulate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "max")]
        k: KChoice,
        #[arg(long, default_value = "mpe")]
        policy: PolicyKind,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The six-scenario comparison grid.
    Grid {
        /// Base seed of the grid.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value = "max")]
        k: KChoice,
        #[arg(long, default_value = "mpe")]
        policy: PolicyKind,
        /// Instances per scenario.
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Also write per-scenario avg/max/min in long format.
        #[arg(long)]
        aggregates: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Lifetime for every k up to saturation.
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "mpe")]
        policy: PolicyKind,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Read the instance from a JSON file instead of generating one.
    #[arg(long, conflicts_with_all = ["nodes", "side", "range", "seed"])]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 100.0)]
    side: f64,
    #[arg(long, default_value_t = 50.0)]
    range: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl InstanceArgs {
    fn load(&self) -> Result<ConnectivityGraph> {
        Ok(match &self.instance {
            Some(path) => InstanceFile::read(path)
                .and_then(|f| f.to_graph())
                .with_context(|| format!("loading {}", path.display()))?,
            None => generate_instance(self.nodes, self.side, self.range, self.seed)?,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

impl OutputArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn write_json(out: &mut dyn Write, value: serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { instance, output } => {
            let graph = instance.load()?;
            let mut out = output.writer()?;
            out.write_all(graph.to_instance().to_json().as_bytes())?;
            writeln!(out)?;
        }
        Command::Build {
            instance,
            k,
            trace,
            output,
        } => {
            let graph = instance.load()?;
            let spd = build_spd(&graph);
            let config = BuilderConfig {
                keep_trace: trace.is_some(),
                ..BuilderConfig::new(0).with_seed(graph.seed())
            };
            let (k, mut build) = build_for(&graph, &spd, k, config)?;
            if let Some(path) = trace {
                let file =
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                std::mem::take(&mut build.trace).write_ndjson(BufWriter::new(file))?;
            }
            let mut out = output.writer()?;
            match output.format {
                Format::Json => write_json(
                    &mut out,
                    serde_json::json!({
                        "k": k,
                        "max_p": build.dag.max_path_len()?,
                        "edges": build.edges,
                        "rounds": build.rounds.len(),
                    }),
                )?,
                Format::Csv => {
                    writeln!(out, "round,from,to,level,ldc")?;
                    for e in &build.edges {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            e.round, e.from.0, e.to.0, e.level, e.ldc
                        )?;
                    }
                }
            }
        }
        Command::Simulate {
            instance,
            k,
            policy,
            output,
        } => {
            let graph = instance.load()?;
            let spd = build_spd(&graph);
            let (k, build) = build_for(
                &graph,
                &spd,
                k,
                BuilderConfig::new(0).with_seed(graph.seed()),
            )?;
            let model = EnergyModelF64::standard();
            let policy = RoutingPolicy::new(policy);
            let runs: Vec<RunResult> = vec![
                evaluate_run(&spd, &model, policy),
                evaluate_run(&build.dag, &model, policy),
            ];
            let mut out = output.writer()?;
            match output.format {
                Format::Json => write_json(&mut out, serde_json::json!({ "k": k, "runs": runs }))?,
                Format::Csv => {
                    writeln!(
                        out,
                        "dag_kind,k,policy,lifetime_hours,lifetime_flow,bottleneck_node,theta"
                    )?;
                    for r in &runs {
                        let bottleneck = r
                            .bottleneck_node
                            .map(|b| b.0.to_string())
                            .unwrap_or_default();
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            r.dag_kind,
                            k,
                            r.policy,
                            r.lifetime_hours,
                            r.lifetime_flow,
                            bottleneck,
                            r.theta
                        )?;
                    }
                }
            }
        }
        Command::Grid {
            seed,
            k,
            policy,
            instances,
            aggregates,
            output,
        } => {
            let grid = ScenarioGrid {
                instances_per_scenario: instances,
                ..ScenarioGrid::standard(seed)
            };
            let result = run_grid(&grid, k, policy)?;
            let mut out = output.writer()?;
            match output.format {
                Format::Json => write_json(&mut out, serde_json::to_value(&result)?)?,
                Format::Csv => result.write_csv(&mut out)?,
            }
            if let Some(path) = aggregates {
                let file =
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                result.write_aggregates_csv(BufWriter::new(file))?;
            }
        }
        Command::Sweep {
            instance,
            policy,
            output,
        } => {
            let graph = instance.load()?;
            let points = k_sweep(&graph, policy)?;
            let mut out = output.writer()?;
            match output.format {
                Format::Json => write_json(&mut out, serde_json::to_value(&points)?)?,
                Format::Csv => {
                    writeln!(out, "k,lifetime,ratio,edges_added,max_p")?;
                    for p in &points {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            p.k, p.lifetime, p.ratio, p.edges_added, p.max_p
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}
