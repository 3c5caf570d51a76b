// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! `hrgg`: sample, build, count and analyze hyperbolic random geometric graphs.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hrgg_core::experiment::{analyze_dir, constants_report, describe, regime_warnings, run_replication, VERSION};
use hrgg_core::functionals::{clustering_coefficient, compute_functionals, uniform_grid};
use hrgg_core::graph::build_graph;
use hrgg_core::limitsim::{
    limit_endpoints, simulate_bivariate_clique, simulate_limit_star, write_bivariate_samples, write_star_samples,
    DEFAULT_EPSILON,
};
use hrgg_core::sampler::{sample_cloud, RadialLaw};
use hrgg_core::theory::StableKind;
use hrgg_core::{run_experiment, Error, ExperimentConfig, ModelParams, OutputFormat, PointCloud, ReplicationData};

#[derive(Parser)]
#[command(name = "hrgg", version, about = "Hyperbolic random geometric graph simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point cloud and write it as CSV.
    Sample {
        #[command(flatten)]
        config: ConfigArgs,
        /// Replication index of the substream to sample.
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Build the graph of a cloud and write its edge list as CSV.
    Build {
        #[command(flatten)]
        config: ConfigArgs,
        /// Read the cloud from this CSV instead of sampling it.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Per-vertex degree, star and clique counts of one replication.
    Count {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Run a replicated experiment into an output directory.
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Simulate the limit processes by truncated Poisson series.
    LimitSim(LimitArgs),
    /// Recompute the analysis of a finished experiment directory.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the theory constants for the given parameters as JSON.
    Constants {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Every flag overrides the corresponding key of `--config`.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    /// Star orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Clique orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (experiment) or file (other subcommands; stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Use exactly round(n) points instead of a Poisson(n) count.
    #[arg(long)]
    fixed_size: bool,
    /// Anchor depths, comma separated.
    #[arg(long, value_delimiter = ',')]
    anchor_depth: Option<Vec<f64>>,
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Centered,
    Subordinator,
}

#[derive(Args)]
struct LimitArgs {
    /// Tail index of the star limit (required unless --bivariate).
    #[arg(long)]
    beta: Option<f64>,
    /// Defaults to centered for beta > 1 and subordinator for beta < 1.
    #[arg(long)]
    kind: Option<Kind>,
    /// Simulate the bivariate clique/star limit with this alpha.
    #[arg(long)]
    bivariate: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write full paths on this many grid points instead of endpoints.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let alpha = self.alpha.ok_or_else(|| missing("--alpha"))?;
                let n = self.n.ok_or_else(|| missing("--n"))?;
                ExperimentConfig::new(ModelParams::new(self.d.unwrap_or(2), alpha, n)?)
            }
        };
        let p = config.params;
        let params = ModelParams::new(self.d.unwrap_or(p.d()), self.alpha.unwrap_or(p.alpha()), self.n.unwrap_or(p.n()))?;
        config.params = params.with_poissonized(p.poissonized() && !self.fixed_size);
        if let Some(k) = &self.k {
            config.ks = k.clone();
        }
        if let Some(m) = &self.m {
            config.ms = m.clone();
        }
        if let Some(r) = self.reps {
            config.reps = r;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.out = o.clone();
        }
        if let Some(f) = self.format {
            config.format = match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
        }
        if let Some(a) = &self.anchor_depth {
            config.anchor_depths = a.clone();
        }
        if let Some(g) = self.grid {
            config.grid = g;
        }
        Ok(config)
    }
}

fn missing(flag: &str) -> Error {
    Error::InvalidArgument(format!("{flag} is required without --config"))
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_or_sample(config: &ExperimentConfig, input: Option<&PathBuf>, rep: u64) -> Result<PointCloud, Error> {
    match input {
        Some(p) => PointCloud::read_csv(BufReader::new(File::open(p)?)),
        None => Ok(sample_cloud(&config.params, config.seed, rep)),
    }
}

fn warn(config: &ExperimentConfig) {
    for w in regime_warnings(config.params.alpha(), &config.ks, &config.ms) {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sample { config, rep } => {
            let c = config.resolve()?;
            let cloud = sample_cloud(&c.params, c.seed, rep);
            cloud.write_csv(output(config.out.as_ref())?)
        }
        Command::Build { config, input, rep } => {
            let c = config.resolve()?;
            let graph = build_graph(load_or_sample(&c, input.as_ref(), rep)?);
            eprintln!("{} vertices, {} edges", graph.len(), graph.edge_count());
            graph.write_edges_csv(output(config.out.as_ref())?)
        }
        Command::Count { config, input, rep } => {
            let mut c = config.resolve()?;
            c.validate()?;
            warn(&c);
            let data = match &input {
                Some(_) => {
                    let cloud = load_or_sample(&c, input.as_ref(), rep)?;
                    let depths = cloud.points.iter().map(|p| p.u).collect();
                    let rep = cloud.replication_id;
                    let graph = build_graph(cloud);
                    let functionals = compute_functionals(&graph, &c.ks, &c.ms)?;
                    ReplicationData { rep, depths, functionals, clustering: clustering_coefficient(&graph) }
                }
                None => run_replication(&c, &RadialLaw::new(&c.params), rep)?,
            };
            write_counts(output(config.out.as_ref())?, &c, &data)
        }
        Command::Experiment { config } => {
            let c = config.resolve()?;
            warn(&c);
            let report = run_experiment(&c, config.workers)?;
            eprintln!("{}", describe(&report.analysis));
            let mut out = io::stdout().lock();
            for f in &report.files {
                writeln!(out, "{}", f.display())?;
            }
            Ok(())
        }
        Command::LimitSim(args) => limit_sim(&args),
        Command::Analyze { dir } => {
            let analysis = analyze_dir(&dir)?;
            Ok(writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&analysis)?)?)
        }
        Command::Constants { config } => {
            let c = config.resolve()?;
            let report = constants_report(&c.params, config.k.as_ref().and_then(|v| v.first().copied()), config.m.as_ref().and_then(|v| v.first().copied()))?;
            Ok(writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&report)?)?)
        }
    }
}

fn write_counts(mut w: Box<dyn Write>, c: &ExperimentConfig, data: &ReplicationData) -> Result<(), Error> {
    let f = &data.functionals;
    let mut header = vec!["rep".to_string(), "vertex".into(), "u".into(), "degree".into()];
    header.extend(c.ks.iter().map(|k| format!("D_{k}")));
    header.extend(c.ms.iter().map(|m| format!("C_{m}")));
    writeln!(w, "# {VERSION} config={}", serde_json::to_string(c)?)?;
    match data.clustering {
        Some(cc) => writeln!(w, "# CC={cc:.16e}")?,
        None => writeln!(w, "# CC=undefined")?,
    }
    writeln!(w, "{}", header.join(","))?;
    for v in 0..f.len() {
        write!(w, "{},{},{:.16e},{}", data.rep, v, data.depths[v], f.degree[v])?;
        for counts in f.star.values() {
            write!(w, ",{}", counts[v])?;
        }
        for counts in f.clique.values() {
            write!(w, ",{}", counts[v])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn limit_sim(args: &LimitArgs) -> Result<(), Error> {
    let mut w = output(args.out.as_ref())?;
    if args.bivariate {
        let alpha = args.alpha.ok_or_else(|| Error::InvalidArgument("--bivariate needs --alpha".into()))?;
        let samples = (0..args.samples as u64)
            .map(|r| simulate_bivariate_clique(alpha, args.epsilon, args.seed, r))
            .collect::<Result<Vec<_>, _>>()?;
        write_bivariate_samples(&mut w, &samples)?;
        return Ok(w.flush()?);
    }
    let beta = args.beta.ok_or_else(|| Error::InvalidArgument("--beta is required".into()))?;
    let kind = match args.kind {
        Some(Kind::Centered) => StableKind::Centered,
        Some(Kind::Subordinator) => StableKind::Subordinator,
        None if beta > 1.0 => StableKind::Centered,
        None => StableKind::Subordinator,
    };
    match args.grid {
        None => write_star_samples(&mut w, &limit_endpoints(beta, args.epsilon, kind, args.seed, args.samples)?)?,
        Some(points) => {
            let grid = uniform_grid(points);
            writeln!(w, "realization,t,S,Y")?;
            for r in 0..args.samples as u64 {
                let real = simulate_limit_star(beta, args.epsilon, &grid, kind, args.seed, r)?;
                for (i, t) in grid.iter().enumerate() {
                    writeln!(w, "{r},{t:.16e},{:.16e},{:.16e}", real.sum_path[i], real.max_path[i])?;
                }
            }
        }
    }
    Ok(w.flush()?)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Regime(_) => 3,
        Error::Io(_) | Error::Overflow(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let structured = matches!(cli.command, Command::Constants { .. });
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // the reader went away (`hrgg analyze ... | head`); nothing left to report
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            if structured {
                let doc = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
                println!("{}", serde_json::to_string_pretty(&doc).expect("error document serializes"));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
