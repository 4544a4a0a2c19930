//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use coarseset::embedding_store::{decode_emb1, decode_lab1, encode_emb1, encode_lab1};
use coarseset::harness::{hypergeometric_std, LabeledSet};
use coarseset::proxy_model::{gradient_check, Probe};
use coarseset::selector::{draw_seeds, kcenter_greedy, kcenter_greedy_with_state, SelectionState};
use coarseset::synth::{default_suite, generate, generate_split, imbalanced_suite};
use coarseset::{
    class_histogram, full_ordering, random_order, run_budget_sweep, BudgetSchedule, EmbeddingMatrix, LabelVector,
    Method, Metric, Rng, SelectionConfig, SweepConfig, TrainConfig,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sq(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for k in 0..a.len() {
        let t = a[k] as f64 - b[k] as f64;
        s += t * t;
    }
    s
}

fn nearest(e: &EmbeddingMatrix<f32>, centers: &[usize], i: usize) -> f64 {
    centers.iter().map(|&c| sq(e.row(i), e.row(c))).fold(f64::INFINITY, f64::min)
}

/// Farthest-point greedy recomputed from scratch every step; lowest index
/// wins ties.
fn brute_force_greedy(e: &EmbeddingMatrix<f32>, seeds: &[usize], picks: usize) -> Vec<usize> {
    let mut centers = seeds.to_vec();
    for _ in 0..picks {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..e.n() {
            if !centers.contains(&i) {
                let d = nearest(e, &centers, i);
                if d > best.1 {
                    best = (i, d);
                }
            }
        }
        centers.push(best.0);
    }
    centers
}

fn l2_radius(e: &EmbeddingMatrix<f32>, centers: &[usize]) -> f64 {
    (0..e.n()).map(|i| nearest(e, centers, i).sqrt()).fold(0.0, f64::max)
}

fn optimal_radius(e: &EmbeddingMatrix<f32>, k: usize) -> f64 {
    fn rec(e: &EmbeddingMatrix<f32>, k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            *best = best.min(l2_radius(e, chosen));
            return;
        }
        for i in start..e.n() {
            chosen.push(i);
            rec(e, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(e, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Random instance; every third one is on an integer grid so ties are common.
fn instance(rng: &mut Rng, max_n: usize, max_d: usize, idx: usize) -> EmbeddingMatrix<f32> {
    let n = 1 + rng.below(max_n as u64) as usize;
    let d = 1 + rng.below(max_d as u64) as usize;
    let data = (0..n * d)
        .map(|_| if idx % 3 == 2 { rng.below(4) as f32 } else { rng.uniform_in(-50.0, 50.0) as f32 })
        .collect();
    EmbeddingMatrix::new(n, d, data).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(1);
    for idx in 0..100 {
        let e = instance(&mut rng, 200, 16, idx);
        let seeds = draw_seeds(e.n(), 1, idx as u64).unwrap();
        let picks = e.n() - 1;
        let got = kcenter_greedy(&e, &seeds, picks, Metric::SquaredL2).unwrap();
        if got.as_slice() != &brute_force_greedy(&e, &seeds, picks)[..] {
            return Err(format!("instance {idx} (n={}, d={}) differs", e.n(), e.d()));
        }
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(10), format!("100/100 exact, {:.2}s", t.as_secs_f64()))
}

fn two_approximation() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(2);
    let mut worst = 0.0f64;
    for idx in 0..50 {
        let e = instance(&mut rng, 12, 3, idx);
        let k = (1 + rng.below(4) as usize).min(e.n());
        let seeds = draw_seeds(e.n(), 1, idx as u64).unwrap();
        let (_, state) = kcenter_greedy_with_state(&e, &seeds, k - 1, Metric::L2).unwrap();
        let greedy = state.coverage_radius().unwrap();
        let opt = optimal_radius(&e, k);
        if greedy > 2.0 * opt + 1e-9 {
            return Err(format!("instance {idx}: greedy {greedy} > 2 x {opt}"));
        }
        if opt > 0.0 {
            worst = worst.max(greedy / opt);
        }
    }
    let t = start.elapsed();
    check(
        t < Duration::from_secs(30),
        format!("50/50 within bound, worst ratio {worst:.3}, {:.2}s", t.as_secs_f64()),
    )
}

fn prefix_consistency() -> Outcome {
    let mut rng = Rng::new(3);
    for idx in 0..20 {
        let e = loop {
            let e = instance(&mut rng, 150, 8, idx);
            if e.n() >= 8 {
                break e;
            }
        };
        let n = e.n();
        let k = 1 + rng.below(3) as usize;
        let seeds = draw_seeds(n, k, idx as u64).unwrap();
        let b1 = 1 + rng.below((n - k - 2) as u64) as usize;
        let b2 = b1 + 1 + rng.below((n - k - 1 - b1) as u64) as usize;
        let o1 = kcenter_greedy(&e, &seeds, b1, Metric::SquaredL2).unwrap();
        let o2 = kcenter_greedy(&e, &seeds, b2, Metric::SquaredL2).unwrap();
        if o1.as_slice() != &o2.as_slice()[..b1 + k] {
            return Err(format!("instance {idx}: budgets {b1} and {b2} disagree"));
        }
        let full = kcenter_greedy(&e, &seeds, n - k, Metric::SquaredL2).unwrap();
        if !full.is_permutation_of(n) || &full.as_slice()[..b2 + k] != o2.as_slice() {
            return Err(format!("instance {idx}: full ordering is not a consistent permutation"));
        }
    }
    Ok("20/20 instances".into())
}

fn min_dist_maintenance() -> Outcome {
    let mut rng = Rng::new(4);
    let mut steps = 0usize;
    for idx in 0..12 {
        let e = instance(&mut rng, 500, 12, idx);
        let seed = draw_seeds(e.n(), 1, idx as u64).unwrap()[0];
        let mut state = SelectionState::new(e.n(), Metric::SquaredL2);
        let mut next = state.add_center(&e, seed);
        loop {
            steps += 1;
            for i in 0..e.n() {
                if state.min_dist()[i].to_bits() != nearest(&e, state.centers(), i).to_bits() {
                    return Err(format!("instance {idx}, step {steps}, point {i}"));
                }
            }
            match next {
                Some((p, _)) => next = state.add_center(&e, p),
                None => break,
            }
        }
    }
    Ok(format!("bitwise equal over {steps} steps"))
}

fn gradient_correctness() -> Outcome {
    let mut rng = Rng::new(5);
    let mut worst = 0.0f64;
    let probes = 40;
    for idx in 0..probes {
        let n = 1 + rng.below(10) as usize;
        let d = 1 + rng.below(5) as usize;
        let c = 2 + rng.below(4) as usize;
        let hidden = 1 + rng.below(4) as usize;
        let probe = Probe::random(n, d, c, idx).unwrap();
        let cfg = TrainConfig { hidden, rng_seed: idx + 100, ..Default::default() };
        worst = worst.max(gradient_check(&cfg, &probe).map_err(|e| e.to_string())?);
    }
    check(worst < 1e-4, format!("{probes} probes, max relative error {worst:.2e}"))
}

/// Shared by the better-than-random and comparability criteria.
struct SweepOutcome {
    result: coarseset::SweepResult,
    elapsed: Duration,
}

fn default_sweep() -> SweepOutcome {
    let (train, test) = generate_split(&default_suite(0)).unwrap();
    let schedule = BudgetSchedule::new(vec![20, 40, 60, 80, 100]).unwrap();
    let start = Instant::now();
    let result = run_budget_sweep(
        LabeledSet::new(&train.points, &train.labels).unwrap(),
        LabeledSet::new(&test.points, &test.labels).unwrap(),
        &schedule,
        &Method::ALL,
        &SweepConfig { trials: 20, ..Default::default() },
    )
    .unwrap();
    SweepOutcome { result, elapsed: start.elapsed() }
}

fn better_than_random(s: &SweepOutcome) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = s.elapsed < Duration::from_secs(120);
    for b in [20, 40, 60] {
        let ff = s.result.mean_accuracy(Method::FixedFeature, b).unwrap();
        let rnd = s.result.mean_accuracy(Method::Random, b).unwrap();
        ok &= ff >= rnd;
        parts.push(format!("b={b} margin {:+.4}", ff - rnd));
    }
    check(ok, format!("{}, sweep {:.1}s", parts.join(", "), s.elapsed.as_secs_f64()))
}

fn baseline_comparability(s: &SweepOutcome) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for b in [80, 100] {
        let ff = s.result.mean_accuracy(Method::FixedFeature, b).unwrap();
        let ci = s.result.mean_accuracy(Method::CoresetIterative, b).unwrap();
        ok &= ff >= ci - 0.05;
        parts.push(format!("b={b} ff-ci {:+.4}", ff - ci));
    }
    check(ok, parts.join(", "))
}

fn histogram_analog() -> Outcome {
    let ds = generate(&imbalanced_suite(1000, 0)).unwrap();
    let n = ds.points.n();
    let budget = n * 40 / 100;
    let class_sizes = class_histogram(&(0..n).collect::<Vec<_>>(), &ds.labels, n).unwrap().counts;
    let mut wins = 0;
    let mut worst_z = 0.0f64;
    for t in 0..20u64 {
        let cfg = SelectionConfig { rng_seed: t, ..Default::default() };
        let ff = class_histogram(full_ordering(&ds.points, &cfg).unwrap().as_slice(), &ds.labels, budget).unwrap();
        let rnd = class_histogram(random_order(n, t).unwrap().as_slice(), &ds.labels, budget).unwrap();
        wins += usize::from(ff.share(0) > rnd.share(0));
        for (c, &count) in rnd.counts.iter().enumerate() {
            let expected = budget as f64 * class_sizes[c] as f64 / n as f64;
            let z = (count as f64 - expected).abs() / hypergeometric_std(n, class_sizes[c], budget);
            worst_z = worst_z.max(z);
        }
    }
    check(
        wins >= 18 && worst_z <= 4.0,
        format!("hard-class wins {wins}/20, random max |z| {worst_z:.2}"),
    )
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_coarseset"))
        .env_remove("COARSESET_RNG_SEED")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)));
    }
    Ok(o.stdout)
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| {
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

/// Runs the whole CLI pipeline into `dir` and returns every file it wrote
/// plus the sweep's stdout.
fn pipeline(dir: &Path, jobs: &str) -> Result<(Vec<(String, Vec<u8>)>, Vec<u8>), String> {
    let s = |p: &str| dir.join(p).to_str().unwrap().to_owned();
    let spec = r#"{"num_classes":3,"per_class_counts":[40,40,40],"d":4,"stds":[1,1,1],"separation":5,"rng_seed":7}"#;
    run_cli(&["gen-synth", "--spec", spec, "--out-prefix", &s("train"), "--test-prefix", &s("test")])?;
    run_cli(&["order", "--embeddings", &s("train.emb"), "--out", &s("order.csv"), "--rng-seed", "3"])?;
    run_cli(&["histogram", "--order", &s("order.csv"), "--labels", &s("train.lab"), "--budget", "30", "--out", &s("hist.csv")])?;
    let stdout = run_cli(&[
        "sweep", "--train-emb", &s("train.emb"), "--train-lab", &s("train.lab"), "--test-emb", &s("test.emb"),
        "--test-lab", &s("test.lab"), "--budgets", "6,12,24", "--trials", "4", "--epochs", "20", "--jobs", jobs,
        "--out", &s("sweep"),
    ])?;
    let mut files = files_in(dir);
    files.extend(files_in(&dir.join("sweep")).into_iter().map(|(n, b)| (format!("sweep/{n}"), b)));
    Ok((files, stdout))
}

fn determinism_and_formats() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = pipeline(dirs[0].path(), "4")?;
    let b = pipeline(dirs[1].path(), "4")?;
    let c = pipeline(dirs[2].path(), "1")?;
    if a != b {
        return Err("two identical runs differ".into());
    }
    if a != c {
        return Err("--jobs 1 and --jobs 4 differ".into());
    }

    let mut rng = Rng::new(9);
    for i in 0..100 {
        let n = 1 + rng.below(64) as usize;
        let d = 1 + rng.below(32) as usize;
        // arbitrary finite bit patterns, including subnormals and -0.0
        let data: Vec<f32> = (0..n * d)
            .map(|_| loop {
                let v = f32::from_bits(rng.next_u64() as u32);
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let m = EmbeddingMatrix::new(n, d, data).unwrap();
        let bytes = encode_emb1(&m);
        let back = decode_emb1(&bytes).map_err(|e| e.to_string())?;
        let same = back.n() == n
            && back.d() == d
            && back.as_slice().iter().zip(m.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits());
        if !same || encode_emb1(&back) != bytes {
            return Err(format!("EMB1 file {i} did not round-trip"));
        }
        let labels: Vec<u32> = (0..n).map(|_| rng.below(1 << 20) as u32).collect();
        let lv = LabelVector::new(labels).unwrap();
        let lb = encode_lab1(&lv);
        let lback = decode_lab1(&lb).map_err(|e| e.to_string())?;
        if lback != lv || encode_lab1(&lback) != lb {
            return Err(format!("LAB1 file {i} did not round-trip"));
        }
    }
    Ok(format!("{} output files identical across runs and job counts; 100/100 round-trips", a.0.len()))
}

fn main() {
    let sweep = default_sweep();
    let results: [(&str, Outcome); 9] = [
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 two-approximation", two_approximation()),
        ("3 prefix consistency", prefix_consistency()),
        ("4 min-distance maintenance", min_dist_maintenance()),
        ("5 gradient correctness", gradient_correctness()),
        ("6 better than random", better_than_random(&sweep)),
        ("7 baseline comparability", baseline_comparability(&sweep)),
        ("8 histogram analog", histogram_analog()),
        ("9 determinism and formats", determinism_and_formats()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
