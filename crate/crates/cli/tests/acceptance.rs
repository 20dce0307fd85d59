//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! Criteria 1-5 and 7 drive the `lal` binary with the shipped configs in
//! `configs/`; criteria 6 and 8 call the library directly.

use std::cell::OnceCell;
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use lal_core::data::{gaussian_clouds, split, PoolState};
use lal_core::forest::{best_split, log_loss, log_loss_gradient, Criterion, ForestConfig};
use lal_core::harness::{parse_selections_csv, probability_histogram, run_al, AlConfig};
use lal_core::lal_training::{collect_independent, MonteCarloConfig};
use lal_core::metrics::{auc_roc, dice, iou, ConfusionCounts, Metric};
use lal_core::seed::rng_from;
use lal_core::strategies::Strategy;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lal(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lal"))
        .current_dir(dir)
        .env_remove("LAL_OUTPUT_DIR")
        .args(args)
        .output()
        .map_err(|e| format!("spawn lal: {e}"))?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "lal {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

/// A scratch copy of `configs/`, so outputs land in `<root>/out/`.
fn workspace(root: &Path) -> PathBuf {
    let dst = root.join("configs");
    fs::create_dir_all(&dst).unwrap();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            fs::copy(&path, dst.join(path.file_name().unwrap())).unwrap();
        }
    }
    root.to_path_buf()
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

// ---- motivation ----

fn motivation_peak(root: &Path, flag: &str) -> Result<(f64, usize), String> {
    lal(
        root,
        &[
            "motivate",
            "--config",
            "configs/motivate.json",
            flag,
            "--reps",
            "10000",
        ],
    )?;
    let stem = flag.trim_start_matches("--");
    let text = read(&root.join(format!("out/motivation/motivation_{stem}.csv")))?;
    let mut lines = text.lines();
    if lines.next() != Some("p0_bin,mean_delta") {
        return Err("unexpected motivation header".into());
    }
    let mut best: Option<(f64, f64)> = None;
    for line in lines {
        let (center, delta) = line.split_once(',').ok_or("malformed row")?;
        let Ok(delta) = delta.parse::<f64>() else {
            continue;
        };
        let center: f64 = center.parse().map_err(|_| "bad bin center")?;
        if best.is_none_or(|(_, d)| delta > d) {
            best = Some((center, delta));
        }
    }
    let report: serde_json::Value = serde_json::from_str(&read(
        &root.join(format!("out/motivation/motivation_{stem}.json")),
    )?)
    .map_err(|e| e.to_string())?;
    let reps = report["config"]["repetitions"].as_u64().unwrap_or(0) as usize;
    best.map(|(c, _)| (c, reps))
        .ok_or_else(|| "no non-empty bins".into())
}

fn criterion_1(root: &Path) -> Result<Outcome, String> {
    let (peak, reps) = motivation_peak(root, "--balanced")?;
    Ok(outcome(
        reps == 10_000 && (0.4..=0.6).contains(&peak),
        format!("balanced argmax bin center {peak} (want [0.4, 0.6]), {reps} repetitions"),
    ))
}

fn criterion_2(root: &Path) -> Result<Outcome, String> {
    let (peak, reps) = motivation_peak(root, "--unbalanced")?;
    Ok(outcome(
        reps == 10_000 && !(0.45..=0.55).contains(&peak),
        format!("2:1 argmax bin center {peak} (want outside [0.45, 0.55]), {reps} repetitions"),
    ))
}

// ---- benchmarks ----

const LAL: [&str; 2] = ["lal_independent", "lal_iterative"];
const FLOOR: f64 = -0.005;

fn build_strategies(root: &Path) -> Result<(), String> {
    lal(root, &["build-strategy", "configs/build_independent.json"])?;
    lal(root, &["build-strategy", "configs/build_iterative.json"])?;
    Ok(())
}

/// `label -> mean` at one budget from a run's summary.csv.
struct Summary {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Summary {
    fn load(path: &Path) -> Result<Self, String> {
        let text = read(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or("empty summary")?
            .split(',')
            .map(String::from)
            .collect();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(Summary { header, rows })
    }

    fn mean(&self, label: &str, budget: usize) -> Result<f64, String> {
        let col = self
            .header
            .iter()
            .position(|h| *h == format!("{label}_mean"))
            .ok_or_else(|| format!("no column for {label}"))?;
        let row = self
            .rows
            .iter()
            .find(|r| r[0] as usize == budget)
            .ok_or_else(|| format!("no row for budget {budget}"))?;
        Ok(row[col])
    }
}

fn repetitions(root: &Path, run: &str) -> Result<usize, String> {
    let v: serde_json::Value =
        serde_json::from_str(&read(&root.join(format!("out/{run}/summary.json")))?)
            .map_err(|e| e.to_string())?;
    Ok(v["repetitions"].as_u64().unwrap_or(0) as usize)
}

fn criterion_3(root: &Path) -> Result<Outcome, String> {
    lal(root, &["run", "configs/gaussian.json"])?;
    let s = Summary::load(&root.join("out/gaussian/summary.csv"))?;
    let reps = repetitions(root, "gaussian")?;
    let mut pass = reps >= 50;
    let mut parts = vec![format!("{reps} reps")];
    for label in LAL {
        for (baseline, budget) in [
            ("random", 20),
            ("random", 40),
            ("random", 60),
            ("uncertainty", 20),
        ] {
            let margin = s.mean(label, budget)? - s.mean(baseline, budget)?;
            pass &= margin >= FLOOR;
            parts.push(format!("{label}-{baseline}@{budget} {margin:+.4}"));
        }
    }
    Ok(outcome(
        pass,
        format!("{} (floor {FLOOR})", parts.join(", ")),
    ))
}

fn criterion_4(root: &Path) -> Result<Outcome, String> {
    lal(root, &["run", "configs/checkerboard.json"])?;
    let s = Summary::load(&root.join("out/checkerboard/summary.csv"))?;
    let reps = repetitions(root, "checkerboard")?;
    let (r, us, it) = (
        s.mean("random", 50)?,
        s.mean("uncertainty", 50)?,
        s.mean("lal_iterative", 50)?,
    );
    Ok(outcome(
        reps >= 50 && us < r && it > r,
        format!(
            "{reps} reps at budget 50: random {r:.4}, uncertainty {us:.4}, lal_iterative {it:.4}"
        ),
    ))
}

fn criterion_5(root: &Path) -> Result<Outcome, String> {
    let hist = |label: &str| -> Result<_, String> {
        let text = read(&root.join(format!("out/gaussian/selections_{label}.csv")))?;
        let traces = parse_selections_csv(&text).map_err(|e| e.to_string())?;
        if traces.len() < 10 {
            return Err(format!("only {} traces for {label}", traces.len()));
        }
        probability_histogram(&traces[..10], 10).map_err(|e| e.to_string())
    };
    let contains_half = |h: &lal_core::harness::Histogram| {
        let (lo, hi) = h.bin_range(h.mode_bin());
        lo <= 0.5 && 0.5 < hi
    };
    let us = hist("uncertainty")?;
    let mut pass = contains_half(&us);
    let mut off_center = false;
    let (lo, hi) = us.bin_range(us.mode_bin());
    let mut parts = vec![format!(
        "uncertainty mode [{lo:.1}, {hi:.1}) std {:.3}",
        us.std
    )];
    for label in LAL {
        let h = hist(label)?;
        let (lo, hi) = h.bin_range(h.mode_bin());
        off_center |= !contains_half(&h);
        pass &= h.std > us.std;
        parts.push(format!("{label} mode [{lo:.1}, {hi:.1}) std {:.3}", h.std));
    }
    Ok(outcome(pass && off_center, parts.join(", ")))
}

// ---- oracles ----

fn gini_of(t: &[f64]) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let p = t.iter().filter(|&&v| v > 0.5).count() as f64 / t.len() as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

fn variance_of(t: &[f64]) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let m = t.iter().sum::<f64>() / t.len() as f64;
    t.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / t.len() as f64
}

/// Best decrease over every threshold between adjacent distinct values.
fn exhaustive_split(x: &[f64], t: &[f64], criterion: Criterion) -> Option<f64> {
    let imp = |s: &[f64]| match criterion {
        Criterion::Gini => gini_of(s),
        Criterion::Variance => variance_of(s),
    };
    let mut values = x.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let n = t.len() as f64;
    let parent = imp(t);
    values
        .windows(2)
        .map(|w| {
            let left: Vec<f64> = x
                .iter()
                .zip(t)
                .filter(|(v, _)| **v <= w[0])
                .map(|(_, t)| *t)
                .collect();
            let right: Vec<f64> = x
                .iter()
                .zip(t)
                .filter(|(v, _)| **v > w[0])
                .map(|(_, t)| *t)
                .collect();
            parent - (left.len() as f64 * imp(&left) + right.len() as f64 * imp(&right)) / n
        })
        .reduce(f64::max)
}

fn criterion_6() -> Result<Outcome, String> {
    let mut rng = rng_from(6, &[]);
    let mut failures = Vec::new();

    for trial in 0..200 {
        let n = rng.gen_range(1..=50);
        let criterion = if trial % 2 == 0 {
            Criterion::Gini
        } else {
            Criterion::Variance
        };
        // a coarse grid forces repeated feature values
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..12) as f64 / 4.0).collect();
        let t: Vec<f64> = (0..n)
            .map(|_| match criterion {
                Criterion::Gini => rng.gen_range(0..2) as f64,
                Criterion::Variance => rng.gen_range(-3.0..3.0),
            })
            .collect();
        let ours = best_split(&x, &t, criterion);
        let oracle = exhaustive_split(&x, &t, criterion);
        let ok = match (ours, oracle) {
            (None, None) => true,
            (Some(s), Some(best)) => {
                let left: Vec<f64> = x
                    .iter()
                    .zip(&t)
                    .filter(|(v, _)| **v <= s.threshold)
                    .map(|(_, t)| *t)
                    .collect();
                let right: Vec<f64> = x
                    .iter()
                    .zip(&t)
                    .filter(|(v, _)| **v > s.threshold)
                    .map(|(_, t)| *t)
                    .collect();
                let imp = |s: &[f64]| match criterion {
                    Criterion::Gini => gini_of(s),
                    Criterion::Variance => variance_of(s),
                };
                let achieved = imp(&t)
                    - (left.len() as f64 * imp(&left) + right.len() as f64 * imp(&right))
                        / n as f64;
                (s.impurity_decrease - best).abs() < 1e-9 && (achieved - best).abs() < 1e-9
            }
            _ => false,
        };
        if !ok {
            failures.push(format!("best_split trial {trial}"));
        }
    }

    for trial in 0..200 {
        let scores: Vec<f64> = (0..20).map(|_| rng.gen_range(0..8) as f64).collect();
        let mut labels: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..20 {
            for j in 0..20 {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        let ours = auc_roc(&scores, &labels).map_err(|e| e.to_string())?;
        if (ours - wins / pairs).abs() > 1e-12 {
            failures.push(format!("auc trial {trial}: {ours} vs {}", wins / pairs));
        }
    }

    let mut worst_gradient: f64 = 0.0;
    for _ in 0..200 {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=20);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let w: Vec<f64> = (0..=dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = log_loss_gradient(&w, &x, &y);
        let h = 1e-6;
        for k in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (log_loss(&up, &x, &y) - log_loss(&down, &x, &y)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1e-3);
            worst_gradient = worst_gradient.max((g[k] - fd).abs() / scale);
        }
    }
    if worst_gradient > 1e-5 {
        failures.push(format!(
            "logistic gradient relative error {worst_gradient:e}"
        ));
    }

    for trial in 0..100 {
        let c = ConfusionCounts {
            tp: rng.gen_range(0..100),
            fp: rng.gen_range(0..100),
            tn: rng.gen_range(0..100),
            fn_: rng.gen_range(0..100),
        };
        let j = iou(&c);
        if (dice(&c) - 2.0 * j / (1.0 + j)).abs() > 1e-12 {
            failures.push(format!("dice trial {trial}"));
        }
    }

    Ok(outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("best_split 200/200, auc 200/200, gradient worst rel err {worst_gradient:.1e}, dice 100/100")
        } else {
            failures.join("; ")
        },
    ))
}

// ---- determinism ----

fn pipeline(root: &Path, workers: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let root = workspace(root);
    fs::write(
        root.join("configs/determinism.json"),
        r#"{
  "config_format": 1,
  "seed": 21,
  "data": {"generator": "checkerboard", "k": 2, "n": 400},
  "strategies": ["random", "uncertainty", "../out/strategies/lal_independent.json"],
  "budget": 20,
  "repetitions": 6,
  "classifier": {"n_trees": 20, "features_per_split": 1},
  "output_dir": "../out/determinism"
}"#,
    )
    .unwrap();
    lal(
        &root,
        &[
            "--workers",
            workers,
            "build-strategy",
            "configs/build_independent.json",
            "--q",
            "4",
        ],
    )?;
    lal(
        &root,
        &["--workers", workers, "run", "configs/determinism.json"],
    )?;
    let mut files = vec![root.join("out/strategies/lal_independent.json")];
    for label in ["random", "uncertainty", "lal_independent"] {
        files.push(root.join(format!("out/determinism/curve_{label}.csv")));
    }
    files
        .into_iter()
        .map(|p| {
            Ok((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).map_err(|e| e.to_string())?,
            ))
        })
        .collect()
}

fn criterion_7(root: &Path) -> Result<Outcome, String> {
    let one = pipeline(&root.join("workers1"), "1")?;
    let four = pipeline(&root.join("workers4"), "4")?;
    let differing: Vec<&str> = one
        .iter()
        .zip(&four)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    Ok(outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} files byte-identical across --workers 1 and 4",
                one.len()
            )
        } else {
            format!("differ: {}", differing.join(", "))
        },
    ))
}

// ---- bookkeeping ----

fn criterion_8() -> Result<Outcome, String> {
    let train = gaussian_clouds(200, 0.5, 2.0, 2, 1).map_err(|e| e.to_string())?;
    let test = gaussian_clouds(300, 0.5, 2.0, 2, 2).map_err(|e| e.to_string())?;
    let config = MonteCarloConfig {
        tau_min: 2,
        tau_max: 9,
        q: 3,
        m: 5,
        classifier: ForestConfig::classifier().with_trees(10),
        seed: 8,
        ..MonteCarloConfig::default()
    };
    let rows = collect_independent(&config, &train, &test).map_err(|e| e.to_string())?;
    let expected = config.q * config.m * (config.tau_max - config.tau_min + 1);
    let deltas_ok = rows.deltas.iter().all(|d| (-1.0..=1.0).contains(d));

    let data = gaussian_clouds(300, 0.5, 2.0, 2, 3).map_err(|e| e.to_string())?;
    let (train, test) = split(&data, 0.5, 4).map_err(|e| e.to_string())?;
    let al = AlConfig {
        budget: 40,
        metric: Metric::Accuracy,
        classifier: ForestConfig::classifier().with_trees(10),
        ..AlConfig::default()
    };
    let mut loop_ok = true;
    for (k, strategy) in [Strategy::Random, Strategy::Uncertainty].iter().enumerate() {
        let run = run_al(&train, &test, strategy, &al, 30 + k as u64).map_err(|e| e.to_string())?;
        let initial: Vec<usize> = run.final_pool.labeled()[..2].to_vec();
        let mut pool = PoolState::new(train.len(), initial).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        for (t, rec) in run.selections.records.iter().enumerate() {
            let before = pool.labeled().len();
            loop_ok &=
                rec.iteration == t && seen.insert(rec.index) && pool.query(rec.index).is_ok();
            loop_ok &= pool.labeled().len() == before + 1;
        }
        loop_ok &= run.selections.records.len() == al.budget
            && run.trace.len() == al.budget + 1
            && pool.labeled() == run.final_pool.labeled();
    }
    Ok(outcome(
        rows.len() == expected && deltas_ok && loop_ok,
        format!(
            "rows {} (Q*M*T = {expected}), deltas in [-1, 1]: {deltas_ok}, |L_t| grows by one without repeats: {loop_ok}",
            rows.len()
        ),
    ))
}

type Check<'a> = Box<dyn FnOnce() -> Result<Outcome, String> + 'a>;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let scratch = tempfile::tempdir().expect("temp dir");
    let bench = workspace(&scratch.path().join("bench"));
    let built = OnceCell::new();
    let ensure_strategies = || built.get_or_init(|| build_strategies(&bench)).clone();

    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "motivation, balanced", Box::new(|| criterion_1(&bench))),
        (
            2,
            "motivation, unbalanced",
            Box::new(|| criterion_2(&bench)),
        ),
        (
            3,
            "gaussian benchmark",
            Box::new(|| {
                ensure_strategies()?;
                criterion_3(&bench)
            }),
        ),
        (
            4,
            "checkerboard 2x2",
            Box::new(|| {
                ensure_strategies()?;
                criterion_4(&bench)
            }),
        ),
        (
            5,
            "selection distribution",
            Box::new(|| criterion_5(&bench)),
        ),
        (6, "oracle equivalences", Box::new(criterion_6)),
        (
            7,
            "determinism across workers",
            Box::new(|| criterion_7(&scratch.path().join("det"))),
        ),
        (8, "bookkeeping invariants", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!(
            "criterion {id} {verdict} {name}: {} [{:.0}s]",
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
