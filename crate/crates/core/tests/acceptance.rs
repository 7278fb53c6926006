//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print; exits non-zero if any check fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng as _;

use dodge::dataset::{self, CsvSchema};
use dodge::intrinsic_dim::{self, correlation_sum, IntrinsicDimOptions};
use dodge::metrics::{self, d2h_from_rates, Goal, GoalVector, Polarity};
use dodge::optimizers::{self, Budget, FnObjective, OptimizerKind, TpeSettings};
use dodge::option_space::{
    narrow_range, Config, Domain, NodeDef, OptionSpace, OptionTree, ParamDef, ParamValue,
};
use dodge::rigs::{self, DatasetSpec, OptimizerSpec, Rig, RunOptions, StudySpec};
use dodge::stats::{self, SampleSet};
use dodge::{seed, synthetic, Matrix};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// 1. intrinsic-dimension calibration on uniform cubes

fn calibration() -> Check {
    let mut notes = Vec::new();
    for (d, lo, hi) in [(5, 4.5, 7.5), (10, 8.0, 13.0), (20, 13.0, 19.0)] {
        let x = synthetic::uniform_cube(10_000, d, 1);
        let start = Instant::now();
        let r = intrinsic_dim::intrinsic_dimension(&x, &IntrinsicDimOptions::default()).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        notes.push(format!("d={d}: {:.2} in {:.1}s", r.dimension, took.as_secs_f64()));
        ensure(
            (lo..=hi).contains(&r.dimension),
            format!("d={d} estimate {:.3} outside [{lo}, {hi}]", r.dimension),
        )?;
        ensure(took < Duration::from_secs(60), format!("d={d} took {took:?}"))?;
    }
    Ok(notes.join(", "))
}

// 2. correlation sum against brute-force pair counting

fn brute_correlation(points: &[Vec<f64>], r: f64) -> f64 {
    let n = points.len();
    let mut ordered_pairs = 0usize;
    for i in 0..n {
        for j in 0..n {
            let dist: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).abs()).sum();
            if i != j && dist < r {
                ordered_pairs += 1;
            }
        }
    }
    ordered_pairs as f64 / (n * (n - 1)) as f64
}

fn correlation_oracle() -> Check {
    let mut rng = seed::rng(2);
    let mut compared = 0;
    for set in 0..100 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=6);
        // half the sets sit on an integer grid so many distances tie with r
        let grid = set % 2 == 0;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if grid {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        let x = Matrix::from_rows(&points).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let r = if grid {
                rng.random_range(1..=3 * d) as f64
            } else {
                rng.random_range(0.01..d as f64)
            };
            let got = correlation_sum(&x, r).map_err(|e| e.to_string())?;
            let want = brute_correlation(&points, r);
            ensure(got == want, format!("set {set}, r={r}: {got} != {want}"))?;
            compared += 1;
        }
        // the radii sweep inside the estimator counts the same pairs
        if n >= 3 {
            let opts = IntrinsicDimOptions {
                min_pairs: 1,
                ..IntrinsicDimOptions::default()
            };
            let report = intrinsic_dim::intrinsic_dimension(&x, &opts).map_err(|e| e.to_string())?;
            let normalized = intrinsic_dim::minmax_normalize(&x);
            let rows: Vec<Vec<f64>> = normalized.iter_rows().map(<[f64]>::to_vec).collect();
            for (r, c) in report.radii.iter().zip(&report.corr_sums) {
                let want = brute_correlation(&rows, *r);
                ensure(*c == want, format!("set {set}, sweep r={r}: {c} != {want}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} sums match"))
}

// 3. metric identities and the Popt brute-force oracle

/// Defects found after inspecting a fraction `x` of the effort, following
/// `order`, interpolated within each row.
fn recall_at(order: &[usize], effort: &[f64], actual: &[bool], x: f64) -> f64 {
    let total: f64 = effort.iter().sum();
    let defects = actual.iter().filter(|a| **a).count() as f64;
    let mut spent = 0.0;
    let mut found = 0.0;
    for &i in order {
        let share = effort[i] / total;
        let gain = if actual[i] { 1.0 / defects } else { 0.0 };
        if spent + share >= x {
            return found + gain * (x - spent) / share;
        }
        spent += share;
        found += gain;
    }
    found
}

/// Exact area under `recall_at` on [0, 0.2]: the curve is linear between
/// the cumulative-effort breakpoints, so the trapezoid rule on them is exact.
fn oracle_area(order: &[usize], effort: &[f64], actual: &[bool]) -> f64 {
    let total: f64 = effort.iter().sum();
    let mut xs = vec![0.0, 0.2];
    let mut acc = 0.0;
    for &i in order {
        acc += effort[i] / total;
        if acc < 0.2 {
            xs.push(acc);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.windows(2)
        .map(|w| (w[1] - w[0]) * (recall_at(order, effort, actual, w[0]) + recall_at(order, effort, actual, w[1])) / 2.0)
        .sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn metric_identities() -> Check {
    ensure(d2h_from_rates(1.0, 0.0) == 0.0, "d2h(1, 0) != 0")?;
    ensure(d2h_from_rates(0.0, 1.0) == 1.0, "d2h(0, 1) != 1")?;
    ensure((d2h_from_rates(0.8, 0.2) - 0.2).abs() < 1e-12, "d2h(0.8, 0.2) != 0.2")?;

    let mut rng = seed::rng(3);
    let mut instances = 0;
    for case in 0..60 {
        let n = 2 + case % 5;
        let effort: Vec<f64> = (0..n).map(|_| rng.random_range(1..=100) as f64).collect();
        let mut actual: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if !actual.iter().any(|a| *a) {
            actual[0] = true;
        }
        let perms = permutations(n);
        let areas: Vec<f64> = perms.iter().map(|p| oracle_area(p, &effort, &actual)).collect();
        let best = areas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let worst = areas.iter().copied().fold(f64::INFINITY, f64::min);

        let own = metrics::popt20(&effort, &actual, &actual).map_err(|e| e.to_string())?;
        ensure((own.score - 1.0).abs() < 1e-9, format!("case {case}: optimal ordering scores {}", own.score))?;

        for mask in 0..(1u32 << n) {
            let predicted: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let p = metrics::popt20(&effort, &actual, &predicted).map_err(|e| e.to_string())?;
            ensure(p.score <= own.score + 1e-12, format!("case {case}: {predicted:?} beats the optimum"))?;
            ensure((0.0..=1.0).contains(&p.score), format!("case {case}: score {} out of range", p.score))?;
            if best - worst > 1e-12 {
                let order = metrics::inspection_order(&effort, &predicted);
                let want = (1.0 - (best - oracle_area(&order, &effort, &actual)) / (best - worst)).clamp(0.0, 1.0);
                ensure((p.score - want).abs() < 1e-9, format!("case {case}: {} vs oracle {want}", p.score))?;
            }
            instances += 1;
        }

        // the worst possible prediction visits rows in the worst order
        if best - worst > 1e-12 {
            let worst_perm = &perms[areas.iter().position(|a| *a == worst).unwrap()];
            let area = oracle_area(worst_perm, &effort, &actual);
            let score = 1.0 - (best - area) / (best - worst);
            ensure(score.abs() < 1e-9, format!("case {case}: worst ordering scores {score}"))?;
        }
    }

    // worst ordering through the public metric: the only defect is the
    // largest module and the model flags exactly the clean ones
    let effort = [10.0, 20.0, 30.0, 400.0];
    let actual = [false, false, false, true];
    let predicted = [true, true, true, false];
    let p = metrics::popt20(&effort, &actual, &predicted).map_err(|e| e.to_string())?;
    ensure(p.score.abs() < 1e-9, format!("worst ordering scores {}", p.score))?;
    Ok(format!("{instances} predicted sets checked"))
}

// 4. DODGE protocol

fn line_tree() -> OptionTree {
    OptionTree::new(&OptionSpace {
        preprocessors: vec![NodeDef {
            name: "none".into(),
            params: vec![],
        }],
        learners: vec![NodeDef {
            name: "line".into(),
            params: vec![ParamDef {
                name: "x".into(),
                domain: Domain::Real { lo: 0.0, hi: 1.0 },
                when: None,
            }],
        }],
    })
    .expect("valid space")
}

fn x_of(c: &Config) -> f64 {
    match c.learner.params["x"] {
        ParamValue::Real(v) => v,
        ref other => panic!("unexpected {other:?}"),
    }
}

fn score(v: f64) -> dodge::Result<GoalVector> {
    GoalVector::new(vec![(Goal::D2h, v)])
}

fn dodge_protocol() -> Check {
    let budget = Budget::default();
    ensure(budget.n1 == 15 && budget.n2 == 15, "default budget is not 15 + 15")?;
    ensure(optimizers::DEFAULT_EPSILON == 0.2, "default epsilon is not 0.2")?;

    let calls = std::sync::atomic::AtomicUsize::new(0);
    let constant = FnObjective::new(vec![Goal::D2h], |_: &Config| {
        calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        score(0.5)
    });
    let mut tree = OptionTree::standard();
    let report = optimizers::dodge(&mut tree, &constant, budget, optimizers::DEFAULT_EPSILON, 7)
        .map_err(|e| e.to_string())?;
    let evals = calls.load(std::sync::atomic::Ordering::SeqCst);
    ensure(evals == 30, format!("{evals} objective evaluations"))?;
    ensure(report.evaluations_used == 30 && report.trials.len() == 30, "report does not show 30 trials")?;
    let redundant = report.n_redundant();
    ensure(redundant >= 29, format!("only {redundant} of 30 redundant"))?;

    ensure(narrow_range((0.0, 1.0), 0.2, 0.8).map_err(|e| e.to_string())? == (0.2, 0.5), "(0.2, 0.8) narrowing")?;
    ensure(narrow_range((0.0, 1.0), 0.8, 0.2).map_err(|e| e.to_string())? == (0.5, 0.8), "(0.8, 0.2) narrowing")?;
    Ok(format!("30 evaluations, {redundant} redundant"))
}

// 5. optimizer sanity

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn optimizer_sanity() -> Check {
    let mut dodge_scores = Vec::new();
    let mut random_scores = Vec::new();
    let space = OptionSpace::standard();
    for s in 0..20u64 {
        let data = synthetic::low_dim_classification(500, 20, s);
        let spec = StudySpec {
            rig: Rig::Rig1,
            repeats: 1,
            seed: s,
            space: None,
            datasets: vec![DatasetSpec {
                name: "synthetic".into(),
                path: "synthetic.csv".into(),
                target: "bug".into(),
                positive_label: "1".into(),
                effort: None,
                version: None,
                goal: Goal::D2h,
            }],
            optimizers: vec![
                OptimizerSpec::new(OptimizerKind::Dodge),
                OptimizerSpec::new(OptimizerKind::Random),
            ],
        };
        let result = rigs::run_study_on(&spec, &[data], &space, RunOptions::default()).map_err(|e| e.to_string())?;
        for rec in &result.records {
            ensure(rec.error.is_none(), format!("seed {s}: {:?}", rec.error))?;
            ensure(rec.evaluations == 30, format!("seed {s}: {} evaluations", rec.evaluations))?;
            match rec.optimizer.as_str() {
                "dodge" => dodge_scores.push(rec.score),
                _ => random_scores.push(rec.score),
            }
        }
    }
    let (md, mr) = (median(dodge_scores), median(random_scores));
    ensure(md <= mr, format!("DODGE median d2h {md:.4} > random {mr:.4}"))?;

    let quadratic = FnObjective::new(vec![Goal::D2h], |c: &Config| score((x_of(c) - 0.5).powi(2)));
    let tree = line_tree();
    let mut hits = 0;
    for s in 0..100 {
        let r = optimizers::tpe(&tree, &quadratic, 30, s, &TpeSettings::default()).map_err(|e| e.to_string())?;
        if (x_of(&r.best_trial().config) - 0.5).abs() <= 0.2 {
            hits += 1;
        }
    }
    ensure(hits >= 90, format!("TPE within 0.2 of the optimum in {hits}/100 seeds"))?;
    Ok(format!("median d2h dodge {md:.4} vs random {mr:.4}; TPE {hits}/100"))
}

// 6. statistics oracles

fn a12_brute(a: &[f64], b: &[f64]) -> f64 {
    let mut wins = 0.0;
    for x in a {
        for y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    wins / (a.len() * b.len()) as f64
}

fn statistics_oracles() -> Check {
    let mut rng = seed::rng(6);
    for case in 0..100 {
        let na = rng.random_range(1..=12);
        let nb = rng.random_range(1..=12);
        // small integer values force ties
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0..6) as f64).collect();
        let got = stats::a12_raw(&a, &b).map_err(|e| e.to_string())?;
        let want = a12_brute(&a, &b);
        ensure((got - want).abs() < 1e-12, format!("case {case}: a12 {got} vs {want}"))?;
    }

    let same: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    ensure(stats::a12_raw(&same, &same).map_err(|e| e.to_string())? == 0.5, "a12 of identical samples")?;

    let mut false_positives = 0;
    for s in 0..100u64 {
        let mut r = seed::rng(seed::derive(600, &[s]));
        let a: Vec<f64> = (0..20).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..20).map(|_| r.random::<f64>()).collect();
        if stats::bootstrap_test(&a, &b, stats::DEFAULT_RESAMPLES, stats::DEFAULT_CONFIDENCE, s)
            .map_err(|e| e.to_string())?
        {
            false_positives += 1;
        }
    }
    ensure(false_positives <= 10, format!("{false_positives}% false positives"))?;

    for polarity in [Polarity::LowerIsBetter, Polarity::HigherIsBetter] {
        let x = SampleSet::new("x", same.clone(), polarity).map_err(|e| e.to_string())?;
        let y = SampleSet::new("y", same.clone(), polarity).map_err(|e| e.to_string())?;
        let v = stats::verdict(&x, &y, 1).map_err(|e| e.to_string())?;
        ensure(v.winner == stats::TIE, format!("identical samples gave {}", v.winner))?;
    }
    Ok(format!("{false_positives}% bootstrap false positives"))
}

// 7. leakage guard

fn leakage_guard() -> Check {
    let mut space = OptionSpace::standard();
    space.learners.retain(|l| l.name != "random_forest");
    let mut audited = 0;
    for rig in [Rig::Rig0, Rig::Rig1] {
        let spec = StudySpec {
            rig,
            repeats: 3,
            seed: 11,
            space: None,
            datasets: vec![DatasetSpec {
                name: "tagged".into(),
                path: "tagged.csv".into(),
                target: "bug".into(),
                positive_label: "1".into(),
                effort: Some("loc".into()),
                version: Some("version".into()),
                goal: Goal::D2h,
            }],
            optimizers: OptimizerKind::ALL
                .iter()
                .map(|k| OptimizerSpec {
                    budget: Budget { n1: 5, n2: 5 },
                    ..OptimizerSpec::new(*k)
                })
                .collect(),
        };
        let data = synthetic::low_dim_classification(200, 5, 11);
        let result =
            rigs::run_study_on(&spec, &[data], &space, RunOptions { audit: true }).map_err(|e| e.to_string())?;
        for rec in &result.records {
            ensure(rec.error.is_none(), format!("{rig:?}: {:?}", rec.error))?;
            ensure(!rec.test_rows.is_empty(), format!("{rig:?}: no test rows recorded"))?;
            ensure(!rec.objective_rows.is_empty(), format!("{rig:?}: objective saw nothing"))?;
            let test: BTreeSet<usize> = rec.test_rows.iter().copied().collect();
            let leaked: Vec<&usize> = rec.objective_rows.iter().filter(|i| test.contains(i)).collect();
            ensure(
                leaked.is_empty(),
                format!("{rig:?} {} repeat {}: rows {leaked:?} leaked", rec.optimizer, rec.repeat),
            )?;
            audited += 1;
        }
    }
    Ok(format!("{audited} runs audited on rig0 and rig1"))
}

// 8. end-to-end determinism and runtime

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let schema = CsvSchema::new("bug", "1").effort("loc").version("version");
    for (name, s) in [("alpha", 21), ("beta", 22)] {
        let data = synthetic::low_dim_classification(400, 8, s);
        dataset::write_csv(dir.path().join(format!("{name}.csv")), &data, &schema).map_err(|e| e.to_string())?;
    }
    let spec = r#"
rig = "rig1"
repeats = 25
seed = 8

[[datasets]]
name = "alpha"
path = "alpha.csv"
target = "bug"
positive_label = "1"

[[datasets]]
name = "beta"
path = "beta.csv"
target = "bug"
positive_label = "1"
effort = "loc"
goal = "popt20"

[[optimizers]]
kind = "dodge"

[[optimizers]]
kind = "tpe"

[[optimizers]]
kind = "random"
"#;
    let spec_path = dir.path().join("study.toml");
    std::fs::write(&spec_path, spec).map_err(|e| e.to_string())?;

    let mut summaries = Vec::new();
    let mut times = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_dodge"))
            .arg("study")
            .arg("--spec")
            .arg(&spec_path)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure(
            status.status.success(),
            format!("study exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)),
        )?;
        ensure(took < Duration::from_secs(600), format!("study took {took:?}"))?;
        times.push(took.as_secs_f64());
        summaries.push(std::fs::read(out.join("summary.tsv")).map_err(|e| e.to_string())?);
    }
    ensure(summaries[0] == summaries[1], "summary tables differ between runs")?;
    ensure(!summaries[0].is_empty(), "empty summary")?;
    Ok(format!("identical summaries, {:.0}s and {:.0}s", times[0], times[1]))
}

fn main() -> ExitCode {
    let checks: [Criterion; 8] = [
        ("intrinsic-dimension calibration", calibration),
        ("correlation-sum oracle", correlation_oracle),
        ("metric identities", metric_identities),
        ("DODGE protocol", dodge_protocol),
        ("optimizer sanity", optimizer_sanity),
        ("statistics oracles", statistics_oracles),
        ("leakage guard", leakage_guard),
        ("end-to-end determinism", end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let label = format!("{} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("PASS {label}: {note} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {label}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
