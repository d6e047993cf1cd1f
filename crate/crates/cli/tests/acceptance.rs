//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the report is always
//! printed.

#[path = "../../core/tests/common/gradcheck.rs"]
mod gradcheck;
#[path = "../../core/tests/common/random.rs"]
mod random;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use distillkit::data::{generate_cover, generate_synthetic, split, GrayImage, SyntheticSpec};
use distillkit::distill::{student_layers, teacher_layers, train, DistillConfig, Examples, Role};
use distillkit::metrics::{compare, evaluate, reports_to_csv, EvalReport, REPORT_CSV_HEADER};
use distillkit::residual::{
    detect, directional_residual, embed, extract_features, quantize_value, residual_first_order,
    residual_map_scan, residual_minmax, residual_predict, DetectorConfig, EmbedMode, FeatureSpec,
    MinMax, Predictor, QuantizerParams, ResidualMap,
};
use distillkit::tensor::{conv_output_size, softmax_t, ConvLayer, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

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

// ---------------------------------------------------------------- criterion 1

const GRADIENT_INSTANCES: u64 = 20;
const GRADIENT_TOL: f64 = 1e-5;
const SURROGATE_TOL: f64 = 1e-4;
const GRADIENT_BUDGET: Duration = Duration::from_secs(120);

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let worst = |f: &(dyn Fn(u64) -> f64 + Sync)| {
        (0..GRADIENT_INSTANCES)
            .into_par_iter()
            .map(f)
            .reduce(|| 0.0, f64::max)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in gradcheck::LAYER_KINDS {
        let e = worst(&|s| gradcheck::check_layer(kind, s));
        pass &= e < GRADIENT_TOL;
        parts.push(format!("{kind} {e:.1e}"));
    }
    let e = worst(&gradcheck::check_distill_loss);
    pass &= e < GRADIENT_TOL;
    parts.push(format!("distill_loss {e:.1e}"));
    let e = worst(&gradcheck::check_separation_loss);
    pass &= e < SURROGATE_TOL;
    parts.push(format!("surrogate {e:.1e}"));
    let elapsed = start.elapsed();
    pass &= elapsed < GRADIENT_BUDGET;
    outcome(
        pass,
        format!(
            "{GRADIENT_INSTANCES} instances each, worst rel. err: {} ({:.2}s)",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

const GRID: [f64; 6] = [1.0, 10.0, 20.0, 30.0, 40.0, 50.0];

fn softmax_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_norm, mut entropy_violations, mut argmax_flips) = (0.0f64, 0, 0);
    for _ in 0..10_000 {
        let n = rng.random_range(2..=10);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let top = Tensor::argmax(&z);
        let mut prev = f64::NEG_INFINITY;
        for &t in &GRID {
            let p = softmax_t(&z, t).unwrap();
            worst_norm = worst_norm.max((p.iter().sum::<f64>() - 1.0).abs());
            let h = -p
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|x| x * x.ln())
                .sum::<f64>();
            if h < prev - 1e-15 {
                entropy_violations += 1;
            }
            prev = h;
            if Tensor::argmax(&p) != top {
                argmax_flips += 1;
            }
        }
    }
    outcome(
        worst_norm < 1e-12 && entropy_violations == 0 && argmax_flips == 0,
        format!(
            "10^4 logit vectors over T in {GRID:?}: max |sum-1| {worst_norm:.1e}, \
             entropy decreases {entropy_violations}, argmax changes {argmax_flips}"
        ),
    )
}

// ------------------------------------------------------------ criteria 3 and 4

const TEACHER_EPOCHS: usize = 25;
const TEACHER_SEED: u64 = 7;
const STUDENT_EPOCHS: usize = 15;
const STUDENT_LR: f64 = 2e-3;
const DISTILL_T: u32 = 20;
const STUDENT_SEEDS: u64 = 5;
const TEACHER_LOSS_BAR: f64 = 0.02;
const DISTILL_BUDGET: Duration = Duration::from_secs(600);

struct DistillRun {
    efficacy: Outcome,
    teacher_loss: Outcome,
}

fn distillation_efficacy() -> DistillRun {
    let start = Instant::now();
    let data = generate_synthetic(&SyntheticSpec::default(), 1200).unwrap();
    let (train_ds, test_ds) = split(&data, 400.0 / 2400.0, 0).unwrap();
    let train_set = Examples::from_dataset(&train_ds, 32).unwrap();
    let test_set = Examples::from_dataset(&test_ds, 32).unwrap();

    let cfg = DistillConfig {
        epochs: TEACHER_EPOCHS,
        ..DistillConfig::default()
    };
    let mut teacher = Network::build(&[1, 32, 32], &teacher_layers(), TEACHER_SEED).unwrap();
    let log = train(&mut teacher, &train_set, &cfg, Role::Teacher, None, None).unwrap();
    let teacher_loss = log.final_train_loss().unwrap();
    let acc = |net: &Network| {
        evaluate(net, &test_set.inputs, &test_set.labels, "m")
            .unwrap()
            .accuracy_pct
            .unwrap()
    };
    let teacher_acc = acc(&teacher);

    let runs: Vec<(f64, f64)> = (0..STUDENT_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let init = Network::build(&[1, 32, 32], &student_layers(), 100 + seed).unwrap();
            let cfg = DistillConfig {
                epochs: STUDENT_EPOCHS,
                student_lr: STUDENT_LR,
                temperature: DISTILL_T,
                seed,
                ..DistillConfig::default()
            };
            let mut plain = init.clone();
            train(&mut plain, &train_set, &cfg, Role::Student, None, None).unwrap();
            let mut distilled = init;
            train(
                &mut distilled,
                &train_set,
                &cfg,
                Role::Student,
                Some(&teacher),
                None,
            )
            .unwrap();
            (acc(&plain), acc(&distilled))
        })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let plain: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let distilled: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (mp, md) = (mean(&plain), mean(&distilled));
    let elapsed = start.elapsed();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };

    DistillRun {
        efficacy: outcome(
            md - mp > 0.0 && teacher_acc > md && teacher_acc > mp && elapsed < DISTILL_BUDGET,
            format!(
                "teacher {teacher_acc:.2}%, distilled (T={DISTILL_T}) mean {md:.2}% [{}], \
                 plain mean {mp:.2}% [{}], delta {:+.2} pp ({:.0}s)",
                fmt(&distilled),
                fmt(&plain),
                md - mp,
                elapsed.as_secs_f64()
            ),
        ),
        teacher_loss: outcome(
            teacher_loss < TEACHER_LOSS_BAR,
            format!("teacher train loss {teacher_loss:.4} after {TEACHER_EPOCHS} epochs (bar {TEACHER_LOSS_BAR})"),
        ),
    }
}

// ---------------------------------------------------------------- criterion 5

const IDENTITY_CASES: usize = 100;

/// `f(M) − λM` by explicit loops over the valid window, independent of the
/// library's residual code.
fn predicted_minus_scaled(
    m: &ResidualMap,
    offsets: &[(isize, isize)],
    weights: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let top = offsets.iter().map(|o| o.0).min().unwrap().min(0);
    let bottom = offsets.iter().map(|o| o.0).max().unwrap().max(0);
    let left = offsets.iter().map(|o| o.1).min().unwrap().min(0);
    let right = offsets.iter().map(|o| o.1).max().unwrap().max(0);
    let mut out = Vec::new();
    for i in (-top)..(m.rows() as isize - bottom) {
        for j in (-left)..(m.cols() as isize - right) {
            let mut f = 0.0;
            for (&(di, dj), &w) in offsets.iter().zip(weights) {
                f += w * m.get((i + di) as usize, (j + dj) as usize);
            }
            out.push(f - lambda * m.get(i as usize, j as usize));
        }
    }
    out
}

fn residual_identities() -> Outcome {
    let mut rng = random::rng(5);
    let (mut null_fail, mut split_fail, mut dir_worst) = (0, 0, 0.0f64);
    for _ in 0..IDENTITY_CASES {
        // (a) covers the predictor reproduces exactly: flat images for the
        // directional filters and the first difference, linear ramps for the
        // min/max second differences.
        let (offsets, weights) = random::integer_taps(&mut rng);
        let level = rng.random_range(0..=255) as f64;
        let flat = ResidualMap::from_fn(9, 9, |_, _| level).unwrap();
        let (a, b) = (
            rng.random_range(-8..=8) as f64,
            rng.random_range(-8..=8) as f64,
        );
        let ramp = ResidualMap::from_fn(9, 9, |i, j| level + a * i as f64 + b * j as f64).unwrap();
        let p = Predictor::directional(offsets.clone(), weights.clone()).unwrap();
        let maps = [
            residual_predict(&flat, &p).unwrap(),
            residual_first_order(&flat).unwrap(),
            residual_minmax(&ramp, MinMax::Min).unwrap(),
            residual_minmax(&ramp, MinMax::Max).unwrap(),
        ];
        if maps.iter().any(|m| m.data().iter().any(|&v| v != 0.0)) {
            null_fail += 1;
        }

        // (b) R(Z) computed directly equals R(U) + f(E) − λE, both terms
        // evaluated by an independent loop.
        let lambda = rng.random_range(-4..=4) as f64;
        let p = Predictor::new(offsets.clone(), weights.clone(), lambda).unwrap();
        let cover = random::gray(&mut rng, 9, 9);
        let (stego, signal) = embed(
            &cover,
            rng.random_range(0.1..1.0),
            rng.random(),
            EmbedMode::Uniform,
        )
        .unwrap();
        let e = ResidualMap::from_fn(9, 9, |i, j| signal.get(i, j) as f64).unwrap();
        let direct = residual_predict(&ResidualMap::from_image(&stego), &p).unwrap();
        let cover_part =
            predicted_minus_scaled(&ResidualMap::from_image(&cover), &offsets, &weights, lambda);
        let signal_part = predicted_minus_scaled(&e, &offsets, &weights, lambda);
        let exact = direct.data().len() == cover_part.len()
            && direct
                .data()
                .iter()
                .zip(cover_part.iter().zip(&signal_part))
                .all(|(z, (u, e))| *z == u + e);
        if !exact {
            split_fail += 1;
        }

        // (c) directional form against the predictor with λ = Σ w.
        let (offsets, weights) = random::real_taps(&mut rng);
        let img = random::pixel_map(&mut rng, 10, 10);
        let a = directional_residual(&img, &offsets, &weights).unwrap();
        let b = residual_predict(&img, &Predictor::directional(offsets, weights).unwrap()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            dir_worst = dir_worst.max((x - y).abs());
        }
    }
    outcome(
        null_fail == 0 && split_fail == 0 && dir_worst <= 1e-12,
        format!(
            "{IDENTITY_CASES} cases each: null-residual failures {null_fail}, \
             stego split failures {split_fail}, directional max |diff| {dir_worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn convolution_oracle() -> Outcome {
    let mut rng = random::rng(6);
    let (mut bit_mismatch, mut dim_mismatch) = (0, 0);
    for _ in 0..200 {
        let (m, n) = (rng.random_range(1..=24), rng.random_range(1..=24));
        let k = rng.random_range(1..=m.min(n).min(7));
        let s = rng.random_range(1..=4);
        let img = ResidualMap::from_fn(m, n, |_, _| rng.random_range(-255.0..255.0)).unwrap();
        let filter = ResidualMap::from_fn(k, k, |_, _| rng.random_range(-3.0..3.0)).unwrap();
        let scan = residual_map_scan(&img, &filter, s).unwrap();
        let mut conv = ConvLayer::zeros(1, 1, k, s);
        conv.weights.data_mut().copy_from_slice(filter.data());
        let out = conv
            .forward(&Tensor::new(vec![1, m, n], img.data().to_vec()).unwrap())
            .unwrap();
        let dims = ((m - k) / s + 1, (n - k) / s + 1);
        if conv_output_size(m, n, k, s).unwrap() != dims
            || (scan.rows(), scan.cols()) != dims
            || out.shape() != [1, dims.0, dims.1]
        {
            dim_mismatch += 1;
        }
        if scan
            .data()
            .iter()
            .zip(out.data())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            bit_mismatch += 1;
        }
    }
    outcome(
        bit_mismatch == 0 && dim_mismatch == 0,
        format!(
            "200 cases: bitwise mismatches {bit_mismatch}, dimension mismatches {dim_mismatch}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn quantizer() -> Outcome {
    let mut rng = random::rng(7);
    let (mut out_of_range, mut not_odd) = (0, 0);
    for _ in 0..100_000 {
        let q = QuantizerParams {
            c: rng.random_range(0.1..10.0),
            t_trunc: rng.random_range(1..=5),
        };
        let r = rng.random_range(-1e3..1e3);
        let v = quantize_value(r, &q);
        if v.abs() > q.t_trunc as f64 {
            out_of_range += 1;
        }
        if quantize_value(-r, &q) != -v {
            not_odd += 1;
        }
    }
    let spot = quantize_value(7.0, &QuantizerParams { c: 2.0, t_trunc: 2 });
    outcome(
        out_of_range == 0 && not_odd == 0 && spot == 2.0,
        format!("10^5 reals: out of range {out_of_range}, odd-symmetry breaks {not_odd}; q(7; c=2, T=2) = {spot}"),
    )
}

// ---------------------------------------------------------------- criterion 8

const STEGO_PAIRS: usize = 200;
const STEGO_RATE: f64 = 0.4;
const STEGO_BAR: f64 = 0.65;

/// Held-out accuracy of the extract → co-occurrence → detect pipeline; a
/// rate of zero pairs every cover with an unmodified copy.
fn stego_accuracy(rate: f64) -> f64 {
    let spec = SyntheticSpec::smooth_covers(32, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let covers: Vec<GrayImage> = (0..STEGO_PAIRS)
        .map(|_| generate_cover(&spec, &mut rng))
        .collect();
    let features = FeatureSpec::default();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = covers
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let stego = if rate > 0.0 {
                embed(c, rate, 1000 + i as u64, EmbedMode::Uniform)
                    .unwrap()
                    .0
            } else {
                c.clone()
            };
            (
                extract_features(c, &features).unwrap(),
                extract_features(&stego, &features).unwrap(),
            )
        })
        .collect();
    let (train, test) = pairs.split_at(STEGO_PAIRS / 2);
    let cover: Vec<Vec<f64>> = train.iter().map(|p| p.0.clone()).collect();
    let stego: Vec<Vec<f64>> = train.iter().map(|p| p.1.clone()).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, s) in test {
        x.push(c.clone());
        y.push(0);
        x.push(s.clone());
        y.push(1);
    }
    detect(&cover, &stego, &x, Some(&y), &DetectorConfig::default())
        .unwrap()
        .accuracy
        .unwrap()
}

fn stego_detection() -> Outcome {
    let hit = stego_accuracy(STEGO_RATE);
    let chance = stego_accuracy(0.0);
    outcome(
        hit >= STEGO_BAR && (chance - 0.5).abs() <= 0.1,
        format!(
            "{STEGO_PAIRS} pairs (half held out): accuracy {hit:.3} at rate {STEGO_RATE} (bar {STEGO_BAR}), \
             {chance:.3} at rate 0 (0.5 ± 0.1)"
        ),
    )
}

// ------------------------------------------------------------ criteria 9, 10

fn cli(out: &Path, args: &[&str], threads: Option<&str>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_distillkit"));
    cmd.args(args).arg("--out").arg(out);
    match threads {
        Some(t) => cmd.env("DISTILLKIT_THREADS", t),
        None => cmd.env_remove("DISTILLKIT_THREADS"),
    };
    let result = cmd.output().expect("spawn distillkit");
    assert!(
        result.status.success(),
        "distillkit {args:?} failed: {}",
        String::from_utf8_lossy(&result.stderr)
    );
}

const SMALL_CONFIG: &str = r#"{
  "seed": 3,
  "data": {"count_per_class": 48, "test_fraction": 0.25},
  "distill": {"epochs": 2, "batch_size": 16},
  "sweep": {"temperatures": [1, 10, 20]},
  "embed": {"cover_count": 24}
}"#;

/// Runs the whole CLI pipeline into `root`.
fn pipeline(root: &Path, config: &Path, threads: Option<&str>) {
    let c = config.to_str().unwrap();
    let dir = |name: &str| root.join(name);
    let path = |name: &str, file: &str| root.join(name).join(file).to_str().unwrap().to_owned();
    cli(&dir("train"), &["train", "--config", c], threads);
    let teacher = path("train", "model.json");
    cli(
        &dir("distill"),
        &[
            "distill",
            "--config",
            c,
            "--teacher",
            &teacher,
            "--temperature",
            "10",
        ],
        threads,
    );
    cli(
        &dir("sweep"),
        &["sweep", "--config", c, "--teacher", &teacher],
        threads,
    );
    let student = format!("student={}", path("distill", "student.json"));
    let teacher_model = format!("teacher={teacher}");
    cli(
        &dir("eval"),
        &[
            "eval",
            "--config",
            c,
            "--model",
            &teacher_model,
            "--model",
            &student,
            "--baseline",
            "student",
        ],
        threads,
    );
    cli(&dir("synth"), &["synth", "--config", c], threads);
    cli(&dir("embed"), &["embed", "--config", c], threads);
    cli(
        &dir("extract"),
        &[
            "extract",
            "--config",
            c,
            "--manifest",
            &path("embed", "manifest.csv"),
        ],
        threads,
    );
    cli(
        &dir("detect"),
        &[
            "detect",
            "--config",
            c,
            "--features",
            &path("extract", "features.csv"),
        ],
        threads,
    );
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn is_pct(cell: &str) -> bool {
    cell == "NA"
        || cell.split_once('.').is_some_and(|(i, f)| {
            !i.is_empty()
                && i.bytes().all(|b| b.is_ascii_digit())
                && f.len() == 2
                && f.bytes().all(|b| b.is_ascii_digit())
        })
}

fn report_fidelity(root: &Path) -> Outcome {
    let mut problems = Vec::new();
    let sweep = fs::read_to_string(root.join("sweep/sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    let header = lines.next().unwrap_or_default();
    if header != "T,accuracy_pct,loss,specificity_pct,sensitivity_pct" {
        problems.push(format!("sweep header {header:?}"));
    }
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    if rows.len() != 4 || !rows[3][0].starts_with("best:") {
        problems.push("sweep rows".to_owned());
    }
    for r in &rows {
        if !(is_pct(r[1]) && is_pct(r[3]) && is_pct(r[4])) {
            problems.push(format!("sweep cells {r:?}"));
        }
    }
    let eval = fs::read_to_string(root.join("eval/eval.csv")).unwrap();
    let mut lines = eval.lines();
    let header = lines.next().unwrap_or_default();
    if header != REPORT_CSV_HEADER
        || header != "model,accuracy_pct,specificity_pct,sensitivity_pct,loss"
    {
        problems.push(format!("eval header {header:?}"));
    }
    for l in lines {
        let r: Vec<&str> = l.split(',').collect();
        if r.len() != 5 || !(is_pct(r[1]) && is_pct(r[2]) && is_pct(r[3])) {
            problems.push(format!("eval row {l:?}"));
        }
    }
    if !root.join("eval/delta.md").is_file() {
        problems.push("delta.md missing".to_owned());
    }

    // Published comparison: distilled small model against the plain one.
    let published = [
        EvalReport::published("Teacher Module", 93.41, 81.59, 99.78),
        EvalReport::published("AlexNet", 91.69, 80.54, 99.78),
        EvalReport::published("AlexNet_S", 95.83, 88.06, 99.78),
    ];
    let delta = compare(&published, "AlexNet").unwrap();
    let row = delta.rows.iter().find(|r| r.model == "AlexNet_S").unwrap();
    let (da, ds) = (row.accuracy_pp.unwrap(), row.specificity_pp.unwrap());
    if format!("{da:+.2}") != "+4.14" || format!("{ds:+.2}") != "+7.52" {
        problems.push(format!("published delta {da:+.2}/{ds:+.2}"));
    }
    if !reports_to_csv(&published).contains("AlexNet_S,95.83,88.06,99.78,NA") {
        problems.push("published CSV row".to_owned());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("sweep/eval schemas exact, percents 2 dp; published delta {da:+.2} pp accuracy, {ds:+.2} pp specificity")
        } else {
            problems.join("; ")
        },
    )
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let files = files_under(first);
    let mut differing = Vec::new();
    let mut compared = 0;
    for f in &files {
        if f.file_name().is_some_and(|n| n == "run.json") {
            continue;
        }
        compared += 1;
        if fs::read(first.join(f)).ok() != fs::read(second.join(f)).ok() {
            differing.push(f.display().to_string());
        }
    }
    let same_listing = files == files_under(second);
    outcome(
        differing.is_empty() && same_listing && compared > 0,
        if differing.is_empty() {
            format!("{compared} result files byte-identical across two runs (second on 1 thread)")
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!(
            "[{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o));
    };

    report("1 gradient suite", gradient_suite());
    report("2 softmax temperature suite", softmax_suite());
    let distill = distillation_efficacy();
    report("3 distillation efficacy", distill.efficacy);
    report("4 teacher loss threshold", distill.teacher_loss);
    report("5 residual identities", residual_identities());
    report("6 convolution oracle", convolution_oracle());
    report("7 quantizer", quantizer());
    report("8 stego detection", stego_detection());

    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a, &config, None);
    pipeline(&b, &config, Some("1"));
    report("9 report fidelity", report_fidelity(&a));
    report("10 determinism", determinism(&a, &b));

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
