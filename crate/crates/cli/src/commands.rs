use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use distillkit::data::{
    generate_cover, generate_synthetic, load_manifest, save_image, split, write_manifest, Dataset,
    GrayImage, Sample, SyntheticSpec,
};
use distillkit::distill::{temperature_sweep, train_observed, EpochLog, Examples, Role};
use distillkit::metrics::{compare, evaluate, reports_to_csv, EvalReport};
use distillkit::residual::{detect, embed, extract_features, features_from_csv, features_to_csv};
use distillkit::tensor::{Checkpoint, Network};
use distillkit::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{NamedModel, RunConfig};
use crate::{Command, Common};

/// Resolves the configuration, runs the subcommand and records `run.json`.
pub fn run(common: Common, command: Command) -> Result<()> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = common.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let name = apply_overrides(&mut cfg, &command)?;
    cfg.distill.seed = cfg.seed;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory; pass --out or set `out`".into()))?;
    fs::create_dir_all(&out)?;

    let started = unix_time();
    let result = match name {
        "train" => cmd_train(&cfg, &out),
        "distill" => cmd_distill(&cfg, &out),
        "sweep" => cmd_sweep(&cfg, &out),
        "eval" => cmd_eval(&cfg, &out, eval_manifest(&command)),
        "embed" => cmd_embed(&cfg, &out),
        "extract" => cmd_extract(&cfg, &out),
        "detect" => cmd_detect(&cfg, &out),
        "synth" => cmd_synth(&cfg, &out),
        _ => unreachable!("every subcommand is dispatched"),
    };
    let record = RunRecord {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        started_unix: started,
        finished_unix: unix_time(),
        status: if result.is_ok() { "ok" } else { "failed" },
        error: result.as_ref().err().map(|e| e.to_string()),
        config: &cfg,
    };
    write_json(&out.join("run.json"), &record)?;
    result
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: usize,
    started_unix: u64,
    finished_unix: u64,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: &'a RunConfig,
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) -> Result<&'static str> {
    Ok(match command {
        Command::Train { student, epochs } => {
            if *student {
                cfg.train.role = Role::Student;
            }
            if let Some(e) = epochs {
                cfg.distill.epochs = *e;
            }
            "train"
        }
        Command::Distill {
            teacher,
            temperature,
            epochs,
        } => {
            if let Some(t) = teacher {
                cfg.teacher_checkpoint = Some(t.clone());
            }
            if let Some(t) = temperature {
                cfg.distill.temperature = *t;
            }
            if let Some(e) = epochs {
                cfg.distill.epochs = *e;
            }
            "distill"
        }
        Command::Sweep {
            teacher,
            temperatures,
            epochs,
        } => {
            if let Some(t) = teacher {
                cfg.teacher_checkpoint = Some(t.clone());
            }
            if let Some(ts) = temperatures {
                cfg.sweep.temperatures = ts.clone();
            }
            if let Some(e) = epochs {
                cfg.distill.epochs = *e;
            }
            "sweep"
        }
        Command::Eval {
            models, baseline, ..
        } => {
            if !models.is_empty() {
                cfg.eval.models = models
                    .iter()
                    .map(|m| parse_named_model(m))
                    .collect::<Result<_>>()?;
            }
            if let Some(b) = baseline {
                cfg.eval.baseline = Some(b.clone());
            }
            "eval"
        }
        Command::Embed {
            covers,
            change_rate,
        } => {
            if let Some(c) = covers {
                cfg.embed.covers = Some(c.clone());
            }
            if let Some(r) = change_rate {
                cfg.embed.change_rate = *r;
            }
            "embed"
        }
        Command::Extract { manifest } => {
            if let Some(m) = manifest {
                cfg.extract.manifest = Some(m.clone());
            }
            "extract"
        }
        Command::Detect { features } => {
            if let Some(f) = features {
                cfg.detect.features = Some(f.clone());
            }
            "detect"
        }
        Command::Synth { count_per_class } => {
            if let Some(n) = count_per_class {
                cfg.data.count_per_class = *n;
            }
            "synth"
        }
    })
}

fn eval_manifest(command: &Command) -> Option<PathBuf> {
    match command {
        Command::Eval { manifest, .. } => manifest.clone(),
        _ => None,
    }
}

fn parse_named_model(raw: &str) -> Result<NamedModel> {
    let (name, path) = raw
        .split_once('=')
        .filter(|(n, p)| !n.is_empty() && !p.is_empty())
        .ok_or_else(|| Error::Config(format!("--model expects name=path, got {raw:?}")))?;
    Ok(NamedModel {
        name: name.to_owned(),
        checkpoint: PathBuf::from(path),
    })
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    require_file(path, "manifest")?;
    let (ds, report) = load_manifest(path)?;
    eprintln!(
        "loaded {} of {} rows from {} ({} annotator disagreements excluded)",
        report.loaded,
        report.rows,
        path.display(),
        report.excluded_disagreements
    );
    Ok(ds)
}

fn synthetic_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if let Some(w) = cfg.data.synthetic.degeneracy_warning() {
        eprintln!("warning: {w}");
    }
    generate_synthetic(&cfg.data.synthetic, cfg.data.count_per_class)
}

/// Train and test sets per the `data` block.
fn train_test(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let d = &cfg.data;
    let all = match &d.manifest {
        Some(m) => load_dataset(m)?,
        None => synthetic_dataset(cfg)?,
    };
    match &d.test_manifest {
        Some(t) => Ok((all, load_dataset(t)?)),
        None => split(&all, d.test_fraction, d.split_seed),
    }
}

fn examples(cfg: &RunConfig) -> Result<(Examples, Examples)> {
    let (train, test) = train_test(cfg)?;
    let size = cfg.data.image_size;
    eprintln!(
        "train {} / test {} images at {size}x{size}",
        train.len(),
        test.len()
    );
    Ok((
        Examples::from_dataset(&train, size)?,
        Examples::from_dataset(&test, size)?,
    ))
}

fn input_shape(cfg: &RunConfig) -> [usize; 3] {
    [1, cfg.data.image_size, cfg.data.image_size]
}

fn load_network(path: &Path, what: &str) -> Result<Network> {
    require_file(path, what)?;
    Ok(Checkpoint::load(path)?.network)
}

fn progress(tag: &str) -> impl FnMut(&EpochLog) + '_ {
    move |e| {
        let acc = e
            .eval
            .as_ref()
            .and_then(|r| r.accuracy_pct)
            .map_or_else(String::new, |a| format!(" test_acc {a:.2}"));
        eprintln!(
            "[{tag}] epoch {} lr {:.3e} loss {:.4}{acc}",
            e.epoch, e.lr, e.train_loss
        );
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_reports(out: &Path, reports: &[EvalReport]) -> Result<()> {
    fs::write(out.join("eval.csv"), reports_to_csv(reports))?;
    write_json(&out.join("eval.json"), &reports)
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (train_set, test_set) = examples(cfg)?;
    let role = cfg.train.role;
    let mut net = match &cfg.train.init_from {
        Some(path) => {
            let mut net = load_network(path, "init checkpoint")?;
            if net.input_shape() != input_shape(cfg) {
                return Err(Error::Config(format!(
                    "init checkpoint expects input {:?}, data is {:?}",
                    net.input_shape(),
                    input_shape(cfg)
                )));
            }
            net.reinit_head(cfg.seed)?;
            net
        }
        None => {
            let layers = match role {
                Role::Teacher => &cfg.teacher.layers,
                Role::Student => &cfg.student.layers,
            };
            Network::build(&input_shape(cfg), layers, cfg.seed)?
        }
    };
    let tag = match role {
        Role::Teacher => "teacher",
        Role::Student => "student",
    };
    let log = train_observed(
        &mut net,
        &train_set,
        &cfg.distill,
        role,
        None,
        Some(&test_set),
        progress(tag),
    )?;
    fs::write(out.join("train_log.jsonl"), log.to_jsonl()?)?;
    Checkpoint::new(net.clone(), None, cfg.seed).save(&out.join("model.json"))?;
    let report = evaluate(&net, &test_set.inputs, &test_set.labels, tag)?;
    write_reports(out, &[report])
}

fn teacher(cfg: &RunConfig) -> Result<Network> {
    let path = cfg
        .teacher_checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("no teacher checkpoint; pass --teacher".into()))?;
    load_network(path, "teacher checkpoint")
}

fn cmd_distill(cfg: &RunConfig, out: &Path) -> Result<()> {
    let teacher = teacher(cfg)?;
    let (train_set, test_set) = examples(cfg)?;
    let mut student = Network::build(&input_shape(cfg), &cfg.student.layers, cfg.seed)?;
    let log = train_observed(
        &mut student,
        &train_set,
        &cfg.distill,
        Role::Student,
        Some(&teacher),
        Some(&test_set),
        progress("distill"),
    )?;
    fs::write(out.join("train_log.jsonl"), log.to_jsonl()?)?;
    Checkpoint::new(student.clone(), None, cfg.seed).save(&out.join("student.json"))?;
    let reports = [
        evaluate(&teacher, &test_set.inputs, &test_set.labels, "teacher")?,
        evaluate(
            &student,
            &test_set.inputs,
            &test_set.labels,
            "student_distilled",
        )?,
    ];
    write_reports(out, &reports)
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<()> {
    let teacher = teacher(cfg)?;
    let (train_set, test_set) = examples(cfg)?;
    let student = Network::build(&input_shape(cfg), &cfg.student.layers, cfg.seed)?;
    eprintln!("sweeping T over {:?}", cfg.sweep.temperatures);
    let report = temperature_sweep(
        &teacher,
        &student,
        &train_set,
        &test_set,
        &cfg.sweep.temperatures,
        &cfg.distill,
    )?;
    fs::write(out.join("sweep.csv"), report.to_csv())?;
    write_json(&out.join("sweep.json"), &report)?;
    eprintln!("best T = {}", report.best.temperature);
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, out: &Path, manifest: Option<PathBuf>) -> Result<()> {
    if cfg.eval.models.is_empty() {
        return Err(Error::Config(
            "nothing to evaluate; pass --model name=path".into(),
        ));
    }
    let test = match manifest {
        Some(m) => load_dataset(&m)?,
        None => train_test(cfg)?.1,
    };
    if test.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let mut reports = Vec::new();
    for m in &cfg.eval.models {
        let net = load_network(&m.checkpoint, "checkpoint")?;
        let size = match net.input_shape() {
            [1, h, w] if h == w => *h,
            other => {
                return Err(Error::Config(format!(
                    "{}: expected a [1, s, s] input, got {other:?}",
                    m.name
                )))
            }
        };
        let ex = Examples::from_dataset(&test, size)?;
        reports.push(evaluate(&net, &ex.inputs, &ex.labels, &m.name)?);
    }
    write_reports(out, &reports)?;
    if let Some(base) = &cfg.eval.baseline {
        fs::write(out.join("delta.md"), compare(&reports, base)?.to_markdown())?;
    }
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut ds = synthetic_dataset(cfg)?;
    write_images(out, "images", &mut ds.items)?;
    write_manifest(&out.join("manifest.csv"), &ds)?;
    eprintln!("wrote {} images", ds.len());
    Ok(())
}

/// Saves each sample under `out/dir/<its path>` and rewrites the path to be
/// relative to `out`.
fn write_images(out: &Path, dir: &str, items: &mut [Sample]) -> Result<()> {
    for s in items.iter_mut() {
        let rel = Path::new(dir).join(s.path.as_ref().expect("generated samples carry paths"));
        let full = out.join(&rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        save_image(&full, &s.image)?;
        s.path = Some(rel);
    }
    Ok(())
}

#[derive(Serialize)]
struct EmbedRecord {
    cover: PathBuf,
    stego: PathBuf,
    changes: usize,
    plus: usize,
    minus: usize,
}

fn cmd_embed(cfg: &RunConfig, out: &Path) -> Result<()> {
    let e = &cfg.embed;
    let covers: Vec<GrayImage> = match &e.covers {
        Some(m) => load_dataset(m)?
            .items
            .into_iter()
            .map(|s| s.image)
            .collect(),
        None => {
            let spec = SyntheticSpec::smooth_covers(e.cover_size, e.cover_seed);
            spec.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(e.cover_seed);
            (0..e.cover_count)
                .map(|_| generate_cover(&spec, &mut rng))
                .collect()
        }
    };
    if covers.is_empty() {
        return Err(Error::Data("no cover images".into()));
    }
    let stegos = covers
        .par_iter()
        .enumerate()
        .map(|(i, c)| embed(c, e.change_rate, pair_seed(cfg.seed, i), e.mode))
        .collect::<Result<Vec<_>>>()?;
    let mut items = Vec::with_capacity(2 * covers.len());
    let mut records = Vec::with_capacity(covers.len());
    for (i, (cover, (stego, signal))) in covers.into_iter().zip(stegos).enumerate() {
        let name = format!("img{i:05}.pgm");
        let (plus, minus) = signal.sign_counts();
        records.push(EmbedRecord {
            cover: Path::new("covers").join(&name),
            stego: Path::new("stego").join(&name),
            changes: signal.payload_len(),
            plus,
            minus,
        });
        items.push(Sample {
            image: cover,
            label: 0,
            path: Some(name.clone().into()),
        });
        items.push(Sample {
            image: stego,
            label: 1,
            path: Some(name.into()),
        });
    }
    for chunk in items.chunks_mut(2) {
        write_images(out, "covers", &mut chunk[..1])?;
        write_images(out, "stego", &mut chunk[1..])?;
    }
    write_manifest(&out.join("manifest.csv"), &Dataset::new(items)?)?;
    write_json(&out.join("embed.json"), &records)?;
    eprintln!("embedded {} cover/stego pairs", records.len());
    Ok(())
}

fn pair_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
}

fn cmd_extract(cfg: &RunConfig, out: &Path) -> Result<()> {
    let manifest = cfg
        .extract
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("no manifest to extract from; pass --manifest".into()))?;
    cfg.features.validate()?;
    let ds = load_dataset(manifest)?;
    let rows = ds
        .items
        .par_iter()
        .map(|s| Ok((s.label, extract_features(&s.image, &cfg.features)?)))
        .collect::<Result<Vec<_>>>()?;
    fs::write(out.join("features.csv"), features_to_csv(&rows)?)?;
    eprintln!(
        "extracted {} features from {} images",
        cfg.features.dim(),
        rows.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct DetectRecord {
    train_pairs: usize,
    test_pairs: usize,
    accuracy: Option<f64>,
    detector: distillkit::residual::LogisticDetector,
}

fn cmd_detect(cfg: &RunConfig, out: &Path) -> Result<()> {
    let path = cfg
        .detect
        .features
        .as_ref()
        .ok_or_else(|| Error::Config("no feature file; pass --features".into()))?;
    require_file(path, "feature file")?;
    let rows = features_from_csv(&fs::read_to_string(path)?)?;
    if rows.len() % 2 != 0 || rows.chunks(2).any(|p| p[0].0 != 0 || p[1].0 != 1) {
        return Err(Error::Data(
            "feature rows must alternate cover (0) and stego (1), one pair per cover".into(),
        ));
    }
    let pairs = rows.len() / 2;
    let f = cfg.detect.test_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Config(format!(
            "detect.test_fraction {f} must lie in (0, 1)"
        )));
    }
    let n_test = ((f * pairs as f64).round() as usize).clamp(1, pairs.saturating_sub(2).max(1));
    if pairs < n_test + 2 {
        return Err(Error::Data(format!(
            "{pairs} pairs are too few to train and test"
        )));
    }
    let mut order: Vec<usize> = (0..pairs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (test_idx, train_idx) = order.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let cover: Vec<Vec<f64>> = train_idx.iter().map(|&p| rows[2 * p].1.clone()).collect();
    let stego: Vec<Vec<f64>> = train_idx
        .iter()
        .map(|&p| rows[2 * p + 1].1.clone())
        .collect();
    let mut test = Vec::new();
    let mut truth = Vec::new();
    let mut row_ids = Vec::new();
    for &p in &test_idx {
        for k in [2 * p, 2 * p + 1] {
            test.push(rows[k].1.clone());
            truth.push(rows[k].0);
            row_ids.push(k);
        }
    }
    let det = detect(&cover, &stego, &test, Some(&truth), &cfg.detect.detector)?;
    let mut csv = String::from("row,label,predicted\n");
    for ((r, t), p) in row_ids.iter().zip(&truth).zip(&det.labels) {
        csv.push_str(&format!("{r},{t},{p}\n"));
    }
    fs::write(out.join("predictions.csv"), csv)?;
    if let Some(a) = det.accuracy {
        eprintln!("held-out accuracy {a:.4} on {} pairs", test_idx.len());
    }
    write_json(
        &out.join("detect.json"),
        &DetectRecord {
            train_pairs: train_idx.len(),
            test_pairs: test_idx.len(),
            accuracy: det.accuracy,
            detector: det.detector,
        },
    )
}
