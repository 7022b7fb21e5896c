//! Subcommands `learn`, `mutate`, `bench` and `compare`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 a run did not converge or
//! produced a wrong model, 3 an internal invariant was violated.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use alsharp_core::{mutate, Ablation, LearnError, LearnerConfig, MutationOp, MutationSpec};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{OracleKind, RunConfig, Seeds};
use crate::dot::{tree_to_dot, write_dot};
use crate::harness::{self, BenchPlan, ComparePlan, Failed, Row};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_LEARNING: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "alsharp", version, about = "Adaptive L# learning of Mealy machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a SUL given as a DOT file, optionally guided by references.
    Learn(LearnArgs),
    /// Apply one mutation operator to a DOT model.
    Mutate(MutateArgs),
    /// Learn mutated models under several algorithm variants.
    Bench(BenchArgs),
    /// Learn one SUL with several reference sets.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct OracleArgs {
    /// Equivalence oracle: `wp` or `perfect`.
    #[arg(long)]
    pub oracle: Option<OracleKind>,
    #[arg(long)]
    pub minimal_size: Option<usize>,
    #[arg(long)]
    pub random_length: Option<usize>,
    /// Tests per equivalence query, or `none` to test until a counterexample.
    #[arg(long)]
    pub bound: Option<String>,
    /// Seeds, e.g. `0..30` or `1,4,9`.
    #[arg(long)]
    pub seeds: Option<Seeds>,
    /// Input order used for covers and separators (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub input_order: Option<Vec<String>>,
    /// Abort a run after this many rule applications.
    #[arg(long)]
    pub step_cap: Option<u64>,
    /// Check rule postconditions and norm growth while learning. Always on
    /// in debug builds.
    #[arg(long)]
    pub check_invariants: bool,
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl OracleArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(o) = self.oracle {
            cfg.oracle = o;
        }
        if let Some(v) = self.minimal_size {
            cfg.minimal_size = v;
        }
        if let Some(v) = self.random_length {
            cfg.random_length = v;
        }
        if let Some(b) = &self.bound {
            cfg.bound = match b.as_str() {
                "none" => None,
                v => Some(v.parse().with_context(|| format!("bad --bound `{v}`"))?),
            };
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(o) = &self.input_order {
            cfg.input_order = Some(o.clone());
        }
        cfg.verbosity = cfg.verbosity.max(self.verbose);
        Ok(())
    }

    fn learner(&self) -> LearnerConfig {
        harness::learner_config(self.step_cap, self.check_invariants || cfg!(debug_assertions))
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Key = value configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sul: Option<PathBuf>,
    /// Reference model (repeatable).
    #[arg(long = "ref")]
    pub refs: Vec<PathBuf>,
    /// lsharp, R, exact, approx, R+exact or full.
    #[arg(long)]
    pub algorithm: Option<Ablation>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Per-run CSV (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the final observation tree of the first seed as DOT.
    #[arg(long)]
    pub dump_tree: Option<PathBuf>,
    /// Write long-format `keys, metric, value` rows for plotting.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    pub input: PathBuf,
    /// mut1 .. mut14
    #[arg(long)]
    pub op: MutationOp,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Host state index for mut8/mut9.
    #[arg(long)]
    pub attach_index: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Base model (repeatable).
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Mutation operators, e.g. `5,6,12` or `mut5,mut6`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mutations: Vec<MutationOp>,
    #[arg(long, value_delimiter = ',', default_value = "lsharp,full")]
    pub algorithms: Vec<Ablation>,
    #[arg(long)]
    pub attach_index: Option<usize>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Raw per-run CSV (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Summed total inputs per algorithm and mutation.
    #[arg(long)]
    pub pivot: Option<PathBuf>,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub sul: PathBuf,
    /// Reference set as comma-separated DOT paths, or `none` (repeatable).
    #[arg(long = "refs", required = true)]
    pub sets: Vec<String>,
    #[arg(long, default_value = "full")]
    pub algorithm: Ablation,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Summary CSV (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-run CSV.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Learn(a) => cmd_learn(a),
        Command::Mutate(a) => cmd_mutate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn exit_code(rows: &[Row], failed: &[Failed]) -> u8 {
    let internal = failed.iter().any(|f| !matches!(f.error, LearnError::StepCap(_)));
    for f in failed {
        eprintln!("run {} failed: {}", f.keys.join(" "), f.error);
    }
    let wrong: Vec<_> = rows.iter().filter(|r| !r.outcome.correct).collect();
    for r in &wrong {
        eprintln!("run {} learned a wrong model", r.keys.join(" "));
    }
    if internal {
        EXIT_INTERNAL
    } else if !failed.is_empty() || !wrong.is_empty() {
        EXIT_LEARNING
    } else {
        EXIT_OK
    }
}

pub fn learn_config(a: &LearnArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_text(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => match &a.sul {
            Some(s) => RunConfig::new(s),
            None => bail!("either --sul or --config is required"),
        },
    };
    if let Some(s) = &a.sul {
        cfg.sul = s.clone();
    }
    if !a.refs.is_empty() {
        cfg.refs = a.refs.clone();
    }
    if let Some(al) = a.algorithm {
        cfg.algorithm = al;
    }
    if let Some(o) = &a.output {
        cfg.output = Some(o.clone());
    }
    a.oracle.apply(&mut cfg)?;
    Ok(cfg)
}

fn cmd_learn(a: LearnArgs) -> Result<u8> {
    let cfg = learn_config(&a)?;
    let learner = a.oracle.learner();
    if cfg.verbosity > 0 {
        eprintln!("learning {} with {} over {} seeds", cfg.sul.display(), cfg.algorithm, cfg.seeds.0.len());
    }
    let (rows, failed) = harness::learn(&cfg, learner)?;
    harness::write_rows(sink(cfg.output.as_deref())?, &harness::LEARN_KEYS, &rows)?;
    if let Some(p) = &a.emit_plot_data {
        harness::write_plot_data(sink(Some(p))?, &harness::LEARN_KEYS, &rows)?;
    }
    if let Some(p) = &a.dump_tree {
        let sul = harness::read_machine(&cfg.sul)?;
        let refs = cfg.refs.iter().map(|r| harness::read_machine(r)).collect::<Result<Vec<_>>>()?;
        let (sul, pack) = harness::prepare(&sul, &refs, cfg.input_order.as_deref())?;
        let seed = cfg.seeds.0[0];
        match harness::learn_once(&sul, &pack, cfg.algorithm, cfg.eq_oracle(seed), learner) {
            Ok((_, res)) => {
                let text = tree_to_dot(&res.tree, sul.inputs(), res.hypothesis.machine.outputs());
                std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            Err(e) => eprintln!("no tree to dump: {e}"),
        }
    }
    Ok(exit_code(&rows, &failed))
}

fn cmd_mutate(a: MutateArgs) -> Result<u8> {
    let m = harness::read_machine(&a.input)?;
    let mut spec = MutationSpec::new(a.op, a.seed);
    spec.attach_index = a.attach_index;
    let out = mutate(&m, spec).with_context(|| format!("applying {}", a.op))?;
    let mut w = sink(a.output.as_deref())?;
    w.write_all(write_dot(&out).as_bytes())?;
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let models = a
        .models
        .iter()
        .map(|p| harness::read_machine(p).map(|m| (harness::model_name(p), m)))
        .collect::<Result<Vec<_>>>()?;
    let mut template = RunConfig::new("");
    a.oracle.apply(&mut template)?;
    let plan = BenchPlan {
        models,
        mutations: a.mutations.clone(),
        ablations: a.algorithms.clone(),
        attach_index: a.attach_index,
        template,
    };
    let report = harness::bench(&plan, a.oracle.learner());
    for (m, op, seed, why) in &report.skipped {
        eprintln!("skipped {m} {op} seed {seed}: {why}");
    }
    harness::write_rows(sink(a.output.as_deref())?, &harness::BENCH_KEYS, &report.rows)?;
    if let Some(p) = &a.pivot {
        harness::write_pivot(sink(Some(p))?, &plan.mutations, &harness::pivot(&plan, &report.rows))?;
    }
    if let Some(p) = &a.emit_plot_data {
        harness::write_plot_data(sink(Some(p))?, &harness::BENCH_KEYS, &report.rows)?;
    }
    Ok(exit_code(&report.rows, &report.failed))
}

fn cmd_compare(a: CompareArgs) -> Result<u8> {
    let sul = harness::read_machine(&a.sul)?;
    let mut sets = Vec::new();
    for spec in &a.sets {
        let paths: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "none").collect();
        let machines = paths.iter().map(|p| harness::read_machine(Path::new(p))).collect::<Result<Vec<_>>>()?;
        let label = if paths.is_empty() {
            "none".to_string()
        } else {
            paths.iter().map(|p| harness::model_name(Path::new(p))).collect::<Vec<_>>().join(";")
        };
        sets.push((label, machines));
    }
    let mut template = RunConfig::new(&a.sul);
    template.algorithm = a.algorithm;
    a.oracle.apply(&mut template)?;
    let plan = ComparePlan { sul, sul_name: harness::model_name(&a.sul), sets, template };
    let (rows, failed, sums) = harness::compare(&plan, a.oracle.learner())?;
    harness::write_summaries(sink(a.output.as_deref())?, &sums)?;
    if let Some(p) = &a.raw {
        harness::write_rows(sink(Some(p))?, &harness::COMPARE_KEYS, &rows)?;
    }
    if let Some(p) = &a.emit_plot_data {
        harness::write_plot_data(sink(Some(p))?, &harness::COMPARE_KEYS, &rows)?;
    }
    Ok(exit_code(&rows, &failed))
}
