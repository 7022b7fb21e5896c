use std::path::{Path, PathBuf};

use alsharp::cli::{main_with_args, EXIT_LEARNING, EXIT_OK, EXIT_USAGE};
use alsharp::harness::{median, percentile};
use alsharp::{parse_dot, write_dot};
use alsharp_core::gen::{random_machine, GenParams};
use alsharp_core::mealy::minimize_restricted;
use alsharp_core::{language_equivalent, MealyMachine};
use proptest::prelude::*;
use tempfile::TempDir;

fn put(dir: &Path, name: &str, m: &MealyMachine) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, write_dot(m)).unwrap();
    p
}

fn run(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("alsharp").chain(args.iter().copied()))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

fn col(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap()
}

#[test]
fn learn_with_itself_as_reference() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(8, 3, 2), 4);
    let sul = put(dir.path(), "sul.dot", &m);
    let out = dir.path().join("out.csv");
    let s = sul.to_str().unwrap();
    let args = ["learn", "--sul", s, "--ref", s, "--oracle", "perfect", "--seeds", "0..3", "-o", out.to_str().unwrap()];
    assert_eq!(run(&args), EXIT_OK);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let want = minimize_restricted(&m, m.inputs()).unwrap().0.num_states().to_string();
    for r in &rows[1..] {
        assert_eq!(r[col(&rows, "learned_states")], want);
        assert_eq!(r[col(&rows, "correct")], "true");
        assert_eq!(r[col(&rows, "algorithm")], "full");
    }
    let first = std::fs::read(&out).unwrap();
    assert_eq!(run(&args), EXIT_OK);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn lsharp_ignores_supplied_references() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(7, 2, 2), 9);
    let r = random_machine(GenParams::new(5, 2, 2), 10);
    let sul = put(dir.path(), "sul.dot", &m);
    let refp = put(dir.path(), "ref.dot", &r);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let s = sul.to_str().unwrap();
    assert_eq!(run(&["learn", "--sul", s, "--algorithm", "lsharp", "--seeds", "0..4", "-o", a.to_str().unwrap()]), 0);
    assert_eq!(
        run(&["learn", "--sul", s, "--ref", refp.to_str().unwrap(), "--algorithm", "lsharp", "--seeds", "0..4", "-o", b.to_str().unwrap()]),
        0
    );
    let (ra, rb) = (csv_rows(&a), csv_rows(&b));
    let refs = col(&ra, "refs");
    for (x, y) in ra.iter().zip(&rb).skip(1) {
        let strip = |v: &Vec<String>| v.iter().enumerate().filter(|(k, _)| *k != refs).map(|(_, s)| s.clone()).collect::<Vec<_>>();
        assert_eq!(strip(x), strip(y));
    }
}

#[test]
fn config_file_and_flags() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(5, 2, 3), 1);
    let sul = put(dir.path(), "m.dot", &m);
    let out = dir.path().join("o.csv");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("sul = {}\nalgorithm = approx\nseeds = 0..2\noracle = wp\n", sul.display())).unwrap();
    assert_eq!(run(&["learn", "--config", cfg.to_str().unwrap(), "--seeds", "5", "-o", out.to_str().unwrap()]), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][col(&rows, "seed")], "5");
    assert_eq!(rows[1][col(&rows, "algorithm")], "approx");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["learn"]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["learn", "--sul", "/nonexistent/x.dot"]), EXIT_USAGE);
    let bad = dir.path().join("bad.dot");
    std::fs::write(&bad, "digraph { a -> }").unwrap();
    assert_eq!(run(&["learn", "--sul", bad.to_str().unwrap()]), EXIT_USAGE);
    let m = random_machine(GenParams::new(6, 2, 2), 3);
    let sul = put(dir.path(), "m.dot", &m);
    let out = dir.path().join("o.csv");
    assert_eq!(run(&["learn", "--sul", sul.to_str().unwrap(), "--step-cap", "2", "-o", out.to_str().unwrap()]), EXIT_LEARNING);
    assert_eq!(run(&["--help"]), EXIT_OK);
}

#[test]
fn mutate_writes_a_model() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(6, 3, 3), 2);
    let src = put(dir.path(), "m.dot", &m);
    let (a, b) = (dir.path().join("a.dot"), dir.path().join("b.dot"));
    for out in [&a, &b] {
        assert_eq!(run(&["mutate", src.to_str().unwrap(), "--op", "mut6", "--seed", "3", "-o", out.to_str().unwrap()]), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let mutated = parse_dot(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert!(!language_equivalent(&m, &mutated).unwrap().is_equivalent());
    assert_eq!(run(&["mutate", src.to_str().unwrap(), "--op", "mut99"]), EXIT_USAGE);
}

#[test]
fn bench_pivot_sums_raw_rows() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(5, 2, 3), 8);
    let model = put(dir.path(), "toy.dot", &m);
    let (raw, piv, plot) = (dir.path().join("raw.csv"), dir.path().join("pivot.csv"), dir.path().join("plot.csv"));
    let args = [
        "bench", "--model", model.to_str().unwrap(), "--mutations", "5,6,12", "--algorithms", "lsharp,full",
        "--seeds", "0..3", "-o", raw.to_str().unwrap(), "--pivot", piv.to_str().unwrap(),
        "--emit-plot-data", plot.to_str().unwrap(),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let raw_rows = csv_rows(&raw);
    let pivot = csv_rows(&piv);
    assert_eq!(pivot[0], ["algorithm", "mut5", "mut6", "mut12"]);
    assert_eq!(pivot.len(), 3);
    let (mc, ac, tc) = (col(&raw_rows, "mutation"), col(&raw_rows, "algorithm"), col(&raw_rows, "total_inputs"));
    for row in &pivot[1..] {
        for (k, m) in ["mut5", "mut6", "mut12"].iter().enumerate() {
            let sum: u64 = raw_rows[1..]
                .iter()
                .filter(|r| r[mc] == *m && r[ac] == row[0])
                .map(|r| r[tc].parse::<u64>().unwrap())
                .sum();
            assert_eq!(row[k + 1], sum.to_string());
        }
    }
    // rows appear in (mutation, seed, algorithm) order
    let order: Vec<(String, String)> = raw_rows[1..].iter().map(|r| (r[mc].clone(), r[ac].clone())).collect();
    assert_eq!(order[0], ("mut5".into(), "lsharp".into()));
    assert_eq!(order[1], ("mut5".into(), "full".into()));
    let plot_rows = csv_rows(&plot);
    assert_eq!(plot_rows[0].last().unwrap(), "value");
    assert_eq!(plot_rows.len() - 1, (raw_rows.len() - 1) * (raw_rows[0].len() - 4));
}

#[test]
fn compare_reference_sets() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(10, 3, 3), 21);
    let sul = put(dir.path(), "sul.dot", &m);
    let out = dir.path().join("cmp.csv");
    let s = sul.to_str().unwrap();
    let args = ["compare", "--sul", s, "--refs", "none", "--refs", s, "--seeds", "0..10", "-o", out.to_str().unwrap()];
    assert_eq!(run(&args), EXIT_OK);
    let rows = csv_rows(&out);
    assert_eq!(rows[1][0], "none");
    assert_eq!(rows[2][0], "sul");
    let mean = |r: &Vec<String>| r[2].parse::<f64>().unwrap();
    assert!(mean(&rows[2]) < mean(&rows[1]));
    // one seed: both percentiles equal the mean
    assert_eq!(run(&["compare", "--sul", s, "--refs", "none", "--seeds", "3", "-o", out.to_str().unwrap()]), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows[1][2], rows[1][3]);
    assert_eq!(rows[1][2], rows[1][4]);
}

#[test]
fn tree_dump() {
    let dir = TempDir::new().unwrap();
    let m = random_machine(GenParams::new(4, 2, 2), 5);
    let sul = put(dir.path(), "m.dot", &m);
    let tree = dir.path().join("tree.dot");
    let out = dir.path().join("o.csv");
    let args = ["learn", "--sul", sul.to_str().unwrap(), "--dump-tree", tree.to_str().unwrap(), "-o", out.to_str().unwrap()];
    assert_eq!(run(&args), 0);
    let text = std::fs::read_to_string(&tree).unwrap();
    assert!(text.starts_with("digraph tree"));
    assert_eq!(text.matches("fillcolor").count(), 4);
}

/// Nearest-rank bracket: the interpolated percentile lies between the two
/// order statistics around its rank.
fn bracket(v: &[f64], p: f64) -> (f64, f64) {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let r = p / 100.0 * (s.len() - 1) as f64;
    (s[r.floor() as usize], s[r.ceil() as usize])
}

proptest! {
    #[test]
    fn percentile_is_bracketed(v in prop::collection::vec(0u32..1000, 1..40), p in 0.0f64..=100.0) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let x = percentile(&v, p);
        let (lo, hi) = bracket(&v, p);
        prop_assert!(lo <= x && x <= hi);
        prop_assert!(percentile(&v, 0.0) == bracket(&v, 0.0).0);
        prop_assert!(percentile(&v, 100.0) == bracket(&v, 100.0).1);
        prop_assert!(median(&v) <= percentile(&v, 95.0));
    }

    #[test]
    fn dot_round_trip(n in 1usize..12, k in 1usize..4, o in 1usize..4, seed in 0u64..1000) {
        let m = random_machine(GenParams::new(n, k, o), seed);
        let back = parse_dot(&write_dot(&m)).unwrap();
        prop_assert!(language_equivalent(&back.with_sorted_inputs(), &m.with_sorted_inputs()).unwrap().is_equivalent());
        prop_assert_eq!(back.num_states(), m.num_states());
    }
}
