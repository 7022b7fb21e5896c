//! Learning jobs, CSV reports and summary statistics.

use std::io::Write;
use std::path::Path;

use alsharp_core::learner::RunResult;
use alsharp_core::{
    build_reference_pack, language_equivalent, mutate, run_alsharp, Ablation, EqOracle, LearnError,
    LearnerConfig, MealyMachine, MutationOp, MutationSpec, ReferencePack, Rule, RunMetrics,
};
use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dot::parse_dot;

/// Column names shared by every per-run CSV, after the key columns.
pub const METRIC_COLUMNS: [&str; 7] = [
    "oq_count",
    "eq_count",
    "input_symbols_oq",
    "input_symbols_eq",
    "total_inputs",
    "learned_states",
    "correct",
];

pub fn read_machine(path: &Path) -> Result<MealyMachine> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dot(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A short name for a model file: its stem.
pub fn model_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Fixes the SUL's input order (explicit, else lexicographic) and builds the
/// reference pack against it.
pub fn prepare(
    sul: &MealyMachine,
    refs: &[MealyMachine],
    input_order: Option<&[String]>,
) -> Result<(MealyMachine, ReferencePack)> {
    let sul = match input_order {
        Some(order) => sul.with_input_order(order),
        None => sul.with_sorted_inputs(),
    };
    sul.check_complete().context("the SUL must be complete")?;
    let pack = build_reference_pack(refs, sul.inputs()).context("building the reference pack")?;
    Ok((sul, pack))
}

/// One finished run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub metrics: RunMetrics,
    pub correct: bool,
    pub phase1_basis: Option<usize>,
}

pub fn learn_once(
    sul: &MealyMachine,
    pack: &ReferencePack,
    algorithm: Ablation,
    oracle: EqOracle,
    config: LearnerConfig,
) -> Result<(Outcome, RunResult), LearnError> {
    let res = run_alsharp(sul, pack, oracle, algorithm, config)?;
    let correct = language_equivalent(&res.hypothesis.machine, sul).map(|e| e.is_equivalent()).unwrap_or(false);
    let outcome = Outcome { metrics: res.metrics.clone(), correct, phase1_basis: res.phase1_basis };
    Ok((outcome, res))
}

/// Per-run row: identifying columns followed by the metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub keys: Vec<String>,
    pub outcome: Outcome,
}

fn metric_fields(o: &Outcome) -> Vec<String> {
    let m = &o.metrics;
    let mut v = vec![
        m.oq_count.to_string(),
        m.eq_count.to_string(),
        m.input_symbols_oq.to_string(),
        m.input_symbols_eq.to_string(),
        m.total_inputs().to_string(),
        m.learned_states.to_string(),
        o.correct.to_string(),
    ];
    v.extend(Rule::ALL.iter().map(|&r| m.rule_count(r).to_string()));
    v
}

pub fn write_rows<W: Write>(out: W, key_names: &[&str], rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = key_names.iter().map(|s| s.to_string()).collect();
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(Rule::ALL.iter().map(|r| format!("rule_{}", r.id())));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = row.keys.clone();
        rec.extend(metric_fields(&row.outcome));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format rows `keys…, metric, value` for external plotting.
pub fn write_plot_data<W: Write>(out: W, key_names: &[&str], rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = key_names.to_vec();
    header.extend(["metric", "value"]);
    w.write_record(&header)?;
    let mut names: Vec<String> = METRIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    names.extend(Rule::ALL.iter().map(|r| format!("rule_{}", r.id())));
    for row in rows {
        for (name, value) in names.iter().zip(metric_fields(&row.outcome)) {
            let mut rec = row.keys.clone();
            rec.push(name.clone());
            rec.push(value);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A failed run, kept so that the exit code can reflect the worst failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failed {
    pub keys: Vec<String>,
    pub error: LearnError,
}

pub fn learner_config(step_cap: Option<u64>, check_invariants: bool) -> LearnerConfig {
    LearnerConfig {
        step_cap: step_cap.unwrap_or(LearnerConfig::default().step_cap),
        check_invariants,
        track_norm: check_invariants,
        log_events: false,
    }
}

/// Runs `cfg` once per seed, in parallel; rows come back in seed order.
pub fn learn(cfg: &RunConfig, learner: LearnerConfig) -> Result<(Vec<Row>, Vec<Failed>)> {
    let sul = read_machine(&cfg.sul)?;
    let refs = cfg.refs.iter().map(|p| read_machine(p)).collect::<Result<Vec<_>>>()?;
    let (sul, pack) = prepare(&sul, &refs, cfg.input_order.as_deref())?;
    let sul_name = model_name(&cfg.sul);
    let refs_name = cfg.refs.iter().map(|p| model_name(p)).collect::<Vec<_>>().join(";");
    let results: Vec<_> = cfg
        .seeds
        .0
        .par_iter()
        .map(|&seed| {
            let keys = vec![sul_name.clone(), refs_name.clone(), cfg.algorithm.to_string(), seed.to_string()];
            let r = learn_once(&sul, &pack, cfg.algorithm, cfg.eq_oracle(seed), learner);
            (keys, r.map(|(o, _)| o))
        })
        .collect();
    Ok(split(results))
}

fn split(results: Vec<(Vec<String>, Result<Outcome, LearnError>)>) -> (Vec<Row>, Vec<Failed>) {
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (keys, r) in results {
        match r {
            Ok(outcome) => rows.push(Row { keys, outcome }),
            Err(error) => failed.push(Failed { keys, error }),
        }
    }
    (rows, failed)
}

pub const LEARN_KEYS: [&str; 4] = ["sul", "refs", "algorithm", "seed"];
pub const BENCH_KEYS: [&str; 4] = ["model", "mutation", "algorithm", "seed"];

/// The mutation benchmark: every (model, mutation, seed) SUL learned by every
/// ablation with the unmutated model as reference.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub models: Vec<(String, MealyMachine)>,
    pub mutations: Vec<MutationOp>,
    pub ablations: Vec<Ablation>,
    pub attach_index: Option<usize>,
    pub template: RunConfig,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub failed: Vec<Failed>,
    /// (model, mutation, seed, reason) for mutations that could not be applied.
    pub skipped: Vec<(String, MutationOp, u64, String)>,
}

pub fn bench(plan: &BenchPlan, learner: LearnerConfig) -> BenchReport {
    let cells: Vec<(usize, MutationOp, u64)> = (0..plan.models.len())
        .flat_map(|m| plan.mutations.iter().flat_map(move |&op| plan.template.seeds.0.iter().map(move |&s| (m, op, s))))
        .collect();
    let per_cell: Vec<_> = cells
        .par_iter()
        .map(|&(m, op, seed)| {
            let (name, model) = &plan.models[m];
            let mut spec = MutationSpec::new(op, seed);
            spec.attach_index = plan.attach_index;
            let sul = match mutate(model, spec) {
                Ok(s) => s,
                Err(e) => return Err((name.clone(), op, seed, e.to_string())),
            };
            let (sul, pack) = match prepare(&sul, std::slice::from_ref(model), plan.template.input_order.as_deref()) {
                Ok(x) => x,
                Err(e) => return Err((name.clone(), op, seed, format!("{e:#}"))),
            };
            Ok(plan
                .ablations
                .iter()
                .map(|&a| {
                    let keys = vec![name.clone(), op.to_string(), a.to_string(), seed.to_string()];
                    let r = learn_once(&sul, &pack, a, plan.template.eq_oracle(seed), learner).map(|(o, _)| o);
                    (keys, r)
                })
                .collect::<Vec<_>>())
        })
        .collect();
    let mut report = BenchReport::default();
    let mut all = Vec::new();
    for cell in per_cell {
        match cell {
            Ok(runs) => all.extend(runs),
            Err(skip) => report.skipped.push(skip),
        }
    }
    let (rows, failed) = split(all);
    report.rows = rows;
    report.failed = failed;
    report
}

/// Summed total inputs per (algorithm, mutation): one row per ablation, one
/// column per mutation, in plan order.
pub fn pivot(plan: &BenchPlan, rows: &[Row]) -> Vec<(Ablation, Vec<u64>)> {
    plan.ablations
        .iter()
        .map(|&a| {
            let sums = plan
                .mutations
                .iter()
                .map(|op| {
                    rows.iter()
                        .filter(|r| r.keys[1] == op.to_string() && r.keys[2] == a.to_string())
                        .map(|r| r.outcome.metrics.total_inputs())
                        .sum()
                })
                .collect();
            (a, sums)
        })
        .collect()
}

pub fn write_pivot<W: Write>(out: W, mutations: &[MutationOp], table: &[(Ablation, Vec<u64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["algorithm".to_string()];
    header.extend(mutations.iter().map(|m| m.to_string()));
    w.write_record(&header)?;
    for (a, sums) in table {
        let mut rec = vec![a.to_string()];
        rec.extend(sums.iter().map(|s| s.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Learning one SUL with several reference sets.
#[derive(Debug, Clone)]
pub struct ComparePlan {
    pub sul: MealyMachine,
    pub sul_name: String,
    /// (set label, machines)
    pub sets: Vec<(String, Vec<MealyMachine>)>,
    pub template: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetSummary {
    pub set: String,
    pub runs: usize,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
}

pub const COMPARE_KEYS: [&str; 4] = ["sul", "refs", "algorithm", "seed"];

pub fn compare(plan: &ComparePlan, learner: LearnerConfig) -> Result<(Vec<Row>, Vec<Failed>, Vec<SetSummary>)> {
    let prepared = plan
        .sets
        .iter()
        .map(|(label, refs)| prepare(&plan.sul, refs, plan.template.input_order.as_deref()).map(|p| (label, p)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> =
        (0..prepared.len()).flat_map(|k| plan.template.seeds.0.iter().map(move |&s| (k, s))).collect();
    let algorithm = plan.template.algorithm;
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let (label, (sul, pack)) = &prepared[k];
            let keys = vec![plan.sul_name.clone(), (*label).clone(), algorithm.to_string(), seed.to_string()];
            let r = learn_once(sul, pack, algorithm, plan.template.eq_oracle(seed), learner).map(|(o, _)| o);
            (keys, r)
        })
        .collect();
    let (rows, failed) = split(results);
    let summaries = plan
        .sets
        .iter()
        .map(|(label, _)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| &r.keys[1] == label)
                .map(|r| r.outcome.metrics.total_inputs() as f64)
                .collect();
            SetSummary {
                set: label.clone(),
                runs: vals.len(),
                mean: mean(&vals),
                p5: percentile(&vals, 5.0),
                p95: percentile(&vals, 95.0),
            }
        })
        .collect();
    Ok((rows, failed, summaries))
}

pub fn write_summaries<W: Write>(out: W, sums: &[SetSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["refs", "runs", "mean_total_inputs", "p5_total_inputs", "p95_total_inputs"])?;
    for s in sums {
        w.write_record([
            s.set.clone(),
            s.runs.to_string(),
            format!("{:.3}", s.mean),
            format!("{:.3}", s.p5),
            format!("{:.3}", s.p95),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (rank - lo as f64)
}

pub fn median(v: &[f64]) -> f64 {
    percentile(v, 50.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_basics() {
        assert_eq!(percentile(&[4.0], 5.0), 4.0);
        assert_eq!(percentile(&[4.0], 95.0), mean(&[4.0]));
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0), 3.0);
        assert_eq!(percentile(&[10.0, 0.0], 25.0), 2.5);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }
}
