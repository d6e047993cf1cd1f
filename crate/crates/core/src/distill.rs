//! Teacher/student distillation: temperature-softened soft targets, the
//! combined soft + hard objective, a minibatch momentum-SGD training loop with
//! step learning-rate decay, and a sweep over temperatures.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::metrics::{evaluate, fmt_loss, fmt_pct, EvalReport};
use crate::tensor::{cross_entropy, softmax_t, LayerSpec, Network, Optimizer, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    /// Softening temperature, an integer >= 1.
    pub temperature: u32,
    /// Weight of the soft-target term; the hard-label term gets `1 - soft_weight`.
    pub soft_weight: f64,
    pub epochs: usize,
    pub teacher_lr: f64,
    pub student_lr: f64,
    /// Multiplier applied to the learning rate every `decay_period_epochs`.
    pub lr_decay: f64,
    pub decay_period_epochs: usize,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            temperature: 1,
            soft_weight: 0.5,
            epochs: 10,
            teacher_lr: 5e-3,
            student_lr: 2e-4,
            lr_decay: 0.9,
            decay_period_epochs: 7,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.temperature < 1 {
            return bad(format!(
                "temperature must be >= 1, got {}",
                self.temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.soft_weight) {
            return bad(format!("soft_weight {} outside [0, 1]", self.soft_weight));
        }
        for (name, lr) in [
            ("teacher_lr", self.teacher_lr),
            ("student_lr", self.student_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad(format!("lr_decay must be positive, got {}", self.lr_decay));
        }
        if self.decay_period_epochs == 0 {
            return bad("decay_period_epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        Ok(())
    }

    pub fn base_lr(&self, role: Role) -> f64 {
        match role {
            Role::Teacher => self.teacher_lr,
            Role::Student => self.student_lr,
        }
    }

    /// `base * decay^floor(epoch / period)`
    pub fn lr_at(&self, role: Role, epoch: usize) -> f64 {
        self.base_lr(role)
            * self
                .lr_decay
                .powi((epoch / self.decay_period_epochs) as i32)
    }
}

/// Which learning rate a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Teacher,
    Student,
}

/// Inputs `[N, ...]` with one class index per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.outer() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs for {} labels",
                inputs.outer(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_dataset(ds: &Dataset, size: usize) -> Result<Self> {
        let (inputs, labels) = ds.to_tensors(size)?;
        Self::new(inputs, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Row-wise temperature softmax of `[batch, classes]` teacher logits.
pub fn soften(teacher_logits: &Tensor, temperature: f64) -> Result<Tensor> {
    let (batch, classes) = matrix_dims(teacher_logits)?;
    let mut out = Vec::with_capacity(batch * classes);
    for row in teacher_logits.data().chunks(classes) {
        out.extend(softmax_t(row, temperature)?);
    }
    Tensor::new(vec![batch, classes], out)
}

fn matrix_dims(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [b, c] => Ok((*b, *c)),
        other => Err(Error::Shape(format!(
            "expected [batch, classes], got {other:?}"
        ))),
    }
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::Shape(format!(
            "{} labels for batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "class index {l} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Batch-mean cross-entropy of `softmax(logits)` against one-hot labels, with
/// its gradient `(softmax(z) - y) / batch`.
pub fn hard_loss(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (batch, classes) = matrix_dims(logits)?;
    check_labels(labels, batch, classes)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch * classes);
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        let q = softmax_t(row, 1.0)?;
        let y = one_hot(label, classes);
        loss += cross_entropy(&q, &y)?;
        grad.extend(q.iter().zip(&y).map(|(q, y)| (q - y) / batch as f64));
    }
    Ok((
        loss / batch as f64,
        Tensor::new(vec![batch, classes], grad)?,
    ))
}

fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; classes];
    y[label] = 1.0;
    y
}

/// Combined distillation objective, averaged over the batch:
///
/// ```text
/// w * T^2 * CE(softmax(z / T), soft) + (1 - w) * CE(softmax(z), one_hot(y))
/// ```
///
/// The returned gradient with respect to the student logits `z` is
/// `(w * T * (softmax(z / T) - soft) + (1 - w) * (softmax(z) - y)) / batch`,
/// exact whenever no probability falls below the log clamp.
pub fn distill_loss(
    student_logits: &Tensor,
    soft_targets: &Tensor,
    hard_labels: &[usize],
    cfg: &DistillConfig,
) -> Result<(f64, Tensor)> {
    let (batch, classes) = matrix_dims(student_logits)?;
    soft_targets.expect_shape(student_logits.shape())?;
    check_labels(hard_labels, batch, classes)?;
    let t = cfg.temperature as f64;
    let w = cfg.soft_weight;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch * classes);
    for ((row, soft), &label) in student_logits
        .data()
        .chunks(classes)
        .zip(soft_targets.data().chunks(classes))
        .zip(hard_labels)
    {
        let q_t = softmax_t(row, t)?;
        let q_1 = softmax_t(row, 1.0)?;
        let y = one_hot(label, classes);
        let soft_term = if w > 0.0 {
            cross_entropy(&q_t, soft)?
        } else {
            0.0
        };
        loss += w * t * t * soft_term + (1.0 - w) * cross_entropy(&q_1, &y)?;
        for c in 0..classes {
            let g = w * t * (q_t[c] - soft[c]) + (1.0 - w) * (q_1[c] - y[c]);
            grad.push(g / batch as f64);
        }
    }
    Ok((
        loss / batch as f64,
        Tensor::new(vec![batch, classes], grad)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Minibatch momentum-SGD training.
///
/// Without a teacher the objective is plain cross-entropy. With a teacher,
/// soft targets `soften(teacher(x), T)` are computed once from the frozen
/// teacher and the objective is [`distill_loss`]. The learning rate follows
/// [`DistillConfig::lr_at`] for `role`. Samples are reshuffled every epoch
/// from a generator seeded with `cfg.seed`.
pub fn train(
    net: &mut Network,
    data: &Examples,
    cfg: &DistillConfig,
    role: Role,
    teacher: Option<&Network>,
    eval: Option<&Examples>,
) -> Result<TrainLog> {
    train_observed(net, data, cfg, role, teacher, eval, |_| {})
}

/// [`train`], calling `observer` after every epoch.
pub fn train_observed(
    net: &mut Network,
    data: &Examples,
    cfg: &DistillConfig,
    role: Role,
    teacher: Option<&Network>,
    eval: Option<&Examples>,
    mut observer: impl FnMut(&EpochLog),
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let classes = net.num_outputs();
    check_labels(&data.labels, data.len(), classes)?;
    let mut expected_input = vec![data.len()];
    expected_input.extend_from_slice(net.input_shape());
    if data.inputs.shape() != expected_input.as_slice() {
        return Err(Error::Config(format!(
            "training inputs {:?} do not match network input {:?}",
            data.inputs.shape(),
            net.input_shape()
        )));
    }
    let soft_all = match teacher {
        Some(t) => {
            if t.num_outputs() != classes {
                return Err(Error::Config(format!(
                    "teacher has {} outputs, student has {classes}",
                    t.num_outputs()
                )));
            }
            if t.input_shape() != net.input_shape() {
                return Err(Error::Config(format!(
                    "teacher input {:?} differs from student input {:?}",
                    t.input_shape(),
                    net.input_shape()
                )));
            }
            Some(soften(&t.predict(&data.inputs)?, cfg.temperature as f64)?)
        }
        None => None,
    };

    let mut opt = Optimizer::new(net, cfg.momentum, cfg.base_lr(role))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(role, epoch);
        opt.set_lr(lr)?;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let x = data.inputs.gather_outer(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let logits = net.forward(&x)?;
            let logits = logits.reshape(&[idx.len(), classes])?;
            let (loss, grad) = match &soft_all {
                Some(soft) => distill_loss(&logits, &soft.gather_outer(idx), &labels, cfg)?,
                None => hard_loss(&logits, &labels)?,
            };
            let mut grad_shape = vec![idx.len()];
            grad_shape.extend(net.output_shape());
            let grads = net.backward(&grad.reshape(&grad_shape)?)?;
            opt.step(net, &grads)?;
            total += loss * idx.len() as f64;
        }
        net.clear_cache();
        let eval = match eval {
            Some(e) => Some(evaluate(
                net,
                &e.inputs,
                &e.labels,
                &format!("epoch{epoch}"),
            )?),
            None => None,
        };
        let entry = EpochLog {
            epoch,
            lr,
            train_loss: total / data.len() as f64,
            eval,
        };
        observer(&entry);
        log.epochs.push(entry);
    }
    Ok(log)
}

/// Default teacher: two conv/ReLU/pool stages and a two-layer head.
pub fn teacher_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            out_channels: 8,
            kernel: 3,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool {
            size: 2,
            stride: None,
        },
        LayerSpec::Conv {
            out_channels: 16,
            kernel: 3,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool {
            size: 2,
            stride: None,
        },
        LayerSpec::Dense { outputs: 32 },
        LayerSpec::Relu,
        LayerSpec::Dense { outputs: 2 },
    ]
}

/// Default student: a single strided conv stage and a linear head.
pub fn student_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            out_channels: 4,
            kernel: 5,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool {
            size: 2,
            stride: None,
        },
        LayerSpec::Dense { outputs: 2 },
    ]
}

/// One line of the temperature comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub temperature: u32,
    pub accuracy_pct: Option<f64>,
    /// Mean test cross-entropy of the distilled student.
    pub loss: f64,
    pub specificity_pct: Option<f64>,
    pub sensitivity_pct: Option<f64>,
}

impl SweepRow {
    pub fn from_report(temperature: u32, r: &EvalReport) -> Self {
        Self {
            temperature,
            accuracy_pct: r.accuracy_pct,
            loss: r.loss,
            specificity_pct: r.specificity_pct,
            sensitivity_pct: r.sensitivity_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub best: SweepRow,
}

pub const SWEEP_CSV_HEADER: &str = "T,accuracy_pct,loss,specificity_pct,sensitivity_pct";

impl SweepReport {
    /// Rows in sweep order, then the selected row again with its `T` cell
    /// written as `best:<T>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        let line = |out: &mut String, t: String, r: &SweepRow| {
            let _ = writeln!(
                out,
                "{t},{},{},{},{}",
                fmt_pct(r.accuracy_pct),
                fmt_loss(r.loss),
                fmt_pct(r.specificity_pct),
                fmt_pct(r.sensitivity_pct)
            );
        };
        for r in &self.rows {
            line(&mut out, r.temperature.to_string(), r);
        }
        line(
            &mut out,
            format!("best:{}", self.best.temperature),
            &self.best,
        );
        out
    }
}

/// Highest accuracy wins; equal accuracies go to the lower loss, then to the
/// earlier row.
pub fn select_best(rows: &[SweepRow]) -> Option<&SweepRow> {
    let acc = |r: &SweepRow| r.accuracy_pct.unwrap_or(f64::NEG_INFINITY);
    let mut best: Option<&SweepRow> = None;
    for r in rows {
        best = match best {
            None => Some(r),
            Some(b) if acc(r) > acc(b) || (acc(r) == acc(b) && r.loss < b.loss) => Some(r),
            keep => keep,
        };
    }
    best
}

/// Distils a copy of `student_template` from `teacher` at each temperature and
/// evaluates it on `test`. Every run starts from the same initial weights and
/// seed; runs for different temperatures execute in parallel.
pub fn temperature_sweep(
    teacher: &Network,
    student_template: &Network,
    train_set: &Examples,
    test_set: &Examples,
    temperatures: &[u32],
    cfg: &DistillConfig,
) -> Result<SweepReport> {
    if temperatures.is_empty() {
        return Err(Error::Config("temperature list is empty".into()));
    }
    if let Some(&t) = temperatures.iter().find(|&&t| t < 1) {
        return Err(Error::Config(format!("temperature {t} must be >= 1")));
    }
    let rows: Vec<SweepRow> = temperatures
        .par_iter()
        .map(|&t| {
            let cfg = DistillConfig {
                temperature: t,
                ..cfg.clone()
            };
            let mut student = student_template.clone();
            train(
                &mut student,
                train_set,
                &cfg,
                Role::Student,
                Some(teacher),
                None,
            )?;
            let report = evaluate(
                &student,
                &test_set.inputs,
                &test_set.labels,
                &format!("T={t}"),
            )?;
            Ok(SweepRow::from_report(t, &report))
        })
        .collect::<Result<_>>()?;
    let best = select_best(&rows).expect("non-empty").clone();
    Ok(SweepReport { rows, best })
}
