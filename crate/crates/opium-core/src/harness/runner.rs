//! Experiment orchestration: builds a hidden layer, streams a task through
//! a solver, records a trace, and reports summary metrics.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::idx::{load_idx, LabeledDataset};
use super::metrics::{classification_error, rms_error};
use super::series::{load_csv_series, synthetic_ecg};
use super::synth::{synthetic_digits, SYNTH_SIDE};
use super::task::{make_series_task, make_sine_task, SineTaskConfig, TaskItem};
use super::trace::{RunMetrics, TraceFooter, TraceHeader, TraceRecord, TraceSink, TRACE_FORMAT, TRACE_VERSION};
use crate::elm::{Activation, ElmConfig, HiddenLayer, WeightDist};
use crate::error::{Error, Result};
use crate::matrix::{vec_norm, Matrix};
use crate::pinv::batch_solve;
use crate::solvers::{
    DynamicState, GrevilleState, LightState, OnlineSolver, OpiumState, SamplePair,
};

const DEFAULT_LIGHT_G: f64 = 1.0;
const DEFAULT_GREVILLE_C_TOL: f64 = 1e-9;
const DEFAULT_SYNTH_TRAIN: usize = 600;
const DEFAULT_SYNTH_TEST: usize = 200;
const DEFAULT_ECG_BEATS: usize = 60;
const DEFAULT_ECG_SAMPLES_PER_BEAT: usize = 120;

/// Which weight-update rule drives the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Batch,
    Opium,
    Greville,
    Light,
    Dynamic,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Batch => "batch",
            SolverKind::Opium => "opium",
            SolverKind::Greville => "greville",
            SolverKind::Light => "light",
            SolverKind::Dynamic => "dynamic",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(SolverKind::Batch),
            "opium" => Ok(SolverKind::Opium),
            "greville" => Ok(SolverKind::Greville),
            "light" => Ok(SolverKind::Light),
            "dynamic" => Ok(SolverKind::Dynamic),
            other => Err(Error::InvalidParameter {
                name: "solver",
                message: format!(
                    "unknown solver {other:?}, expected batch, opium, greville, light, or dynamic"
                ),
            }),
        }
    }
}

/// Solver choice plus its hyperparameters.
///
/// Parameters not used by the chosen kind are ignored, so one spec can be
/// shared across solvers in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_tol: Option<f64>,
}

impl SolverSpec {
    pub fn new(kind: SolverKind) -> Self {
        SolverSpec {
            kind,
            epsilon: None,
            g: None,
            alpha: None,
            c_tol: None,
        }
    }

    /// Fills in defaults for the parameters the chosen kind actually uses
    /// and rejects out-of-range values before any work starts.
    pub fn normalized(&self) -> Result<SolverSpec> {
        let positive = |name: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    message: format!("must be positive and finite, got {v}"),
                })
            }
        };
        let mut out = self.clone();
        match self.kind {
            SolverKind::Batch => {}
            SolverKind::Opium => {
                let epsilon = out.epsilon.ok_or(Error::InvalidParameter {
                    name: "epsilon",
                    message: "the opium solver needs an explicit regularization epsilon".into(),
                })?;
                positive("epsilon", epsilon)?;
            }
            SolverKind::Dynamic => {
                let epsilon = out.epsilon.ok_or(Error::InvalidParameter {
                    name: "epsilon",
                    message: "the dynamic solver needs an explicit regularization epsilon".into(),
                })?;
                positive("epsilon", epsilon)?;
                let alpha = out.alpha.ok_or(Error::InvalidParameter {
                    name: "alpha",
                    message: "the dynamic solver needs a forgetting parameter alpha".into(),
                })?;
                if !(1.0..2.0).contains(&alpha) {
                    return Err(Error::InvalidParameter {
                        name: "alpha",
                        message: format!(
                            "must lie in [1, 2), got {alpha}; 1 means no forgetting, values toward 2 forget fastest"
                        ),
                    });
                }
            }
            SolverKind::Light => {
                positive("g", *out.g.get_or_insert(DEFAULT_LIGHT_G))?;
            }
            SolverKind::Greville => {
                positive("c_tol", *out.c_tol.get_or_insert(DEFAULT_GREVILLE_C_TOL))?;
            }
        }
        Ok(out)
    }
}

/// What data flows through the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskSpec {
    /// One-step-ahead sine prediction with a frequency switch.
    SineSwitch { config: SineTaskConfig },
    /// One-step-ahead prediction over a CSV series; without a path a
    /// bundled synthetic heartbeat-like signal stands in.
    CsvSeries {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        path: Option<String>,
        #[serde(default = "default_num_taps")]
        num_taps: usize,
    },
    /// Image classification over IDX files; without paths a seeded
    /// synthetic digit set stands in.
    IdxClassify {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        images: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        labels: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        test_images: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        test_labels: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        train_limit: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        test_limit: Option<usize>,
    },
    /// Random inputs and targets, used to compare online weights against
    /// the batch solution over the same stream.
    RandomEquivalence {
        #[serde(default = "default_re_input_dim")]
        input_dim: usize,
        #[serde(default = "default_re_output_dim")]
        output_dim: usize,
        #[serde(default = "default_re_steps")]
        steps: usize,
    },
}

fn default_num_taps() -> usize {
    10
}

fn default_re_input_dim() -> usize {
    10
}

fn default_re_output_dim() -> usize {
    3
}

fn default_re_steps() -> usize {
    500
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::SineSwitch { .. } => "sine-switch",
            TaskSpec::CsvSeries { .. } => "csv-series",
            TaskSpec::IdxClassify { .. } => "idx-classify",
            TaskSpec::RandomEquivalence { .. } => "random-equivalence",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::SineSwitch { config } => config.validate(),
            TaskSpec::CsvSeries { num_taps, .. } => {
                if *num_taps == 0 {
                    return Err(Error::InvalidParameter {
                        name: "num_taps",
                        message: "need at least one tap".into(),
                    });
                }
                Ok(())
            }
            TaskSpec::IdxClassify {
                images,
                labels,
                test_images,
                test_labels,
                train_limit,
                test_limit,
            } => {
                if images.is_some() != labels.is_some() {
                    return Err(Error::InvalidParameter {
                        name: "labels",
                        message: "image and label paths must be given together".into(),
                    });
                }
                if test_images.is_some() != test_labels.is_some() {
                    return Err(Error::InvalidParameter {
                        name: "test_labels",
                        message: "test image and test label paths must be given together".into(),
                    });
                }
                if test_images.is_some() && images.is_none() {
                    return Err(Error::InvalidParameter {
                        name: "test_images",
                        message: "test files need training files alongside them".into(),
                    });
                }
                if train_limit == &Some(0) || test_limit == &Some(0) {
                    return Err(Error::InvalidParameter {
                        name: "train_limit",
                        message: "sample limits must be at least 1".into(),
                    });
                }
                Ok(())
            }
            TaskSpec::RandomEquivalence {
                input_dim,
                output_dim,
                steps,
            } => {
                if *input_dim == 0 || *output_dim == 0 || *steps == 0 {
                    return Err(Error::InvalidParameter {
                        name: "random-equivalence",
                        message: format!(
                            "input_dim, output_dim, and steps must all be at least 1, got {input_dim}, {output_dim}, {steps}"
                        ),
                    });
                }
                Ok(())
            }
        }
    }
}

/// Complete description of one reproducible run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub task: TaskSpec,
    pub solver: SolverSpec,
    pub hidden_dim: usize,
    pub activation: Activation,
    /// None picks a task-appropriate default at run time.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weight_dist: Option<WeightDist>,
    pub seed: u64,
    /// Window for the final-RMS metric; None resolves to min(1000, steps).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms_window: Option<usize>,
}

/// Outcome of one run: persisted metrics plus wall-clock time.
///
/// Timing lives here and never in the trace file, so identical specs
/// write identical bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub metrics: RunMetrics,
    pub wall_ms: f64,
}

enum SolverInstance {
    Opium(OpiumState),
    Light(LightState),
    Dynamic(DynamicState),
    Greville(GrevilleState),
}

impl SolverInstance {
    fn build(spec: &SolverSpec, hidden_dim: usize, output_dim: usize) -> Result<SolverInstance> {
        match spec.kind {
            SolverKind::Opium => Ok(SolverInstance::Opium(OpiumState::new(
                hidden_dim,
                output_dim,
                spec.epsilon.expect("normalized spec"),
            )?)),
            SolverKind::Light => Ok(SolverInstance::Light(LightState::new(
                hidden_dim,
                output_dim,
                spec.g.expect("normalized spec"),
            )?)),
            SolverKind::Dynamic => Ok(SolverInstance::Dynamic(DynamicState::new(
                hidden_dim,
                output_dim,
                spec.epsilon.expect("normalized spec"),
                spec.alpha.expect("normalized spec"),
            )?)),
            SolverKind::Greville => Ok(SolverInstance::Greville(GrevilleState::new(
                hidden_dim,
                output_dim,
                spec.c_tol.expect("normalized spec"),
            )?)),
            SolverKind::Batch => Err(Error::InternalConsistency {
                context: "run_experiment",
                message: "the batch solver has no online instance".into(),
            }),
        }
    }

    fn as_online(&mut self) -> &mut dyn OnlineSolver {
        match self {
            SolverInstance::Opium(s) => s,
            SolverInstance::Light(s) => s,
            SolverInstance::Dynamic(s) => s,
            SolverInstance::Greville(s) => s,
        }
    }

    fn weights(&self) -> &Matrix {
        match self {
            SolverInstance::Opium(s) => s.weights(),
            SolverInstance::Light(s) => s.weights(),
            SolverInstance::Dynamic(s) => s.weights(),
            SolverInstance::Greville(s) => s.weights(),
        }
    }

    fn theta(&self) -> Option<&Matrix> {
        match self {
            SolverInstance::Opium(s) => Some(s.theta()),
            SolverInstance::Dynamic(s) => Some(s.theta()),
            _ => None,
        }
    }
}

struct PreparedTask {
    input_dim: usize,
    output_dim: usize,
    items: Vec<TaskItem>,
    test_set: Option<LabeledDataset>,
    /// Accumulated stream for batch solving and oracle comparison.
    keep_stream: bool,
}

fn classify_materials(
    images: &Option<String>,
    labels: &Option<String>,
    test_images: &Option<String>,
    test_labels: &Option<String>,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut subset_rng = ChaCha12Rng::seed_from_u64(seed);
    subset_rng.set_stream(2);
    let draw = |rng: &mut ChaCha12Rng, pool: usize, want: usize| -> Vec<usize> {
        let mut chosen: Vec<usize> = (0..pool).collect();
        for i in 0..want.min(pool) {
            let j = rng.gen_range(i..pool);
            chosen.swap(i, j);
        }
        chosen.truncate(want.min(pool));
        chosen
    };
    match (images, labels) {
        (Some(img), Some(lbl)) => {
            let full = load_idx(img.as_ref(), lbl.as_ref())?;
            let (train, test) = match (test_images, test_labels) {
                (Some(timg), Some(tlbl)) => (full, load_idx(timg.as_ref(), tlbl.as_ref())?),
                _ => {
                    let held = test_limit
                        .unwrap_or((full.num_samples() / 5).max(1))
                        .min(full.num_samples().saturating_sub(1));
                    let split = full.num_samples() - held;
                    let train_idx: Vec<usize> = (0..split).collect();
                    let test_idx: Vec<usize> = (split..full.num_samples()).collect();
                    (full.select(&train_idx)?, full.select(&test_idx)?)
                }
            };
            let train = match train_limit {
                Some(limit) if limit < train.num_samples() => {
                    train.select(&draw(&mut subset_rng, train.num_samples(), limit))?
                }
                _ => train,
            };
            let test = match test_limit {
                Some(limit) if limit < test.num_samples() => {
                    let idx: Vec<usize> = (0..limit).collect();
                    test.select(&idx)?
                }
                _ => test,
            };
            Ok((train, test))
        }
        _ => {
            let train_n = train_limit.unwrap_or(DEFAULT_SYNTH_TRAIN);
            let test_n = test_limit.unwrap_or(DEFAULT_SYNTH_TEST);
            let (images, labels) = synthetic_digits(train_n + test_n, seed);
            let to_dataset = |imgs: &[Vec<u8>], lbls: &[u8]| -> Result<LabeledDataset> {
                let l = SYNTH_SIDE * SYNTH_SIDE;
                let mut inputs = Matrix::zeros(l, imgs.len());
                for (j, img) in imgs.iter().enumerate() {
                    for (i, &b) in img.iter().enumerate() {
                        inputs.set(i, j, b as f64 / 255.0);
                    }
                }
                LabeledDataset::from_parts(inputs, lbls.iter().map(|&b| b as usize).collect())
            };
            let train = to_dataset(&images[..train_n], &labels[..train_n])?;
            let test = to_dataset(&images[train_n..], &labels[train_n..])?;
            Ok((train, test))
        }
    }
}

fn prepare_task(spec: &ExperimentSpec) -> Result<PreparedTask> {
    match &spec.task {
        TaskSpec::SineSwitch { config } => Ok(PreparedTask {
            input_dim: config.num_taps,
            output_dim: 1,
            items: make_sine_task(config)?.collect(),
            test_set: None,
            keep_stream: false,
        }),
        TaskSpec::CsvSeries { path, num_taps } => {
            let series = match path {
                Some(p) => load_csv_series(p.as_ref())?,
                None => synthetic_ecg(DEFAULT_ECG_BEATS, DEFAULT_ECG_SAMPLES_PER_BEAT, spec.seed)?,
            };
            let items: Vec<TaskItem> = make_series_task(&series, *num_taps)?.collect();
            Ok(PreparedTask {
                input_dim: *num_taps,
                output_dim: 1,
                items,
                test_set: None,
                keep_stream: false,
            })
        }
        TaskSpec::IdxClassify {
            images,
            labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            let (train, test) = classify_materials(
                images,
                labels,
                test_images,
                test_labels,
                *train_limit,
                *test_limit,
                spec.seed,
            )?;
            if train.input_dim() != test.input_dim() {
                return Err(Error::dims(
                    "idx-classify",
                    (train.input_dim(), train.num_samples()),
                    (test.input_dim(), test.num_samples()),
                ));
            }
            let classes = train.num_classes().max(test.num_classes()).max(1);
            let one_hot = train.one_hot(classes)?;
            let items: Vec<TaskItem> = (0..train.num_samples())
                .map(|j| TaskItem {
                    input: train.inputs().col_to_vec(j),
                    target: one_hot.col_to_vec(j),
                })
                .collect();
            Ok(PreparedTask {
                input_dim: train.input_dim(),
                output_dim: classes,
                items,
                test_set: Some(test),
                keep_stream: false,
            })
        }
        TaskSpec::RandomEquivalence {
            input_dim,
            output_dim,
            steps,
        } => {
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            rng.set_stream(1);
            let items: Vec<TaskItem> = (0..*steps)
                .map(|_| TaskItem {
                    input: (0..*input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    target: (0..*output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                })
                .collect();
            Ok(PreparedTask {
                input_dim: *input_dim,
                output_dim: *output_dim,
                items,
                test_set: None,
                keep_stream: true,
            })
        }
    }
}

/// Normalizes a spec: validates it and fills in resolved defaults so the
/// trace header echoes the effective configuration.
pub fn normalize_spec(spec: &ExperimentSpec) -> Result<ExperimentSpec> {
    if spec.hidden_dim == 0 {
        return Err(Error::InvalidParameter {
            name: "hidden_dim",
            message: "need at least one hidden unit".into(),
        });
    }
    spec.task.validate()?;
    if let Some(w) = spec.rms_window {
        if w == 0 {
            return Err(Error::InvalidParameter {
                name: "rms_window",
                message: "window must cover at least one sample".into(),
            });
        }
    }
    let mut out = spec.clone();
    out.solver = spec.solver.normalized()?;
    Ok(out)
}

fn resolve_weight_dist(spec: &ExperimentSpec, input_dim: usize) -> WeightDist {
    match &spec.weight_dist {
        Some(d) => d.clone(),
        None => match spec.task {
            TaskSpec::IdxClassify { .. } => WeightDist::scaled_normal(input_dim),
            _ => WeightDist::default_uniform(),
        },
    }
}

fn theta_diagnostics(theta: &Matrix) -> (Option<f64>, Option<f64>) {
    let m = theta.rows();
    let mut min_diag = f64::INFINITY;
    let mut max_off = 0.0f64;
    for i in 0..m {
        min_diag = min_diag.min(theta.get(i, i));
        for j in 0..m {
            if i != j {
                max_off = max_off.max(theta.get(i, j).abs());
            }
        }
    }
    let ratio = if min_diag > 0.0 { Some(max_off / min_diag) } else { None };
    (Some(min_diag), ratio)
}

fn augmented_oracle(
    epsilon: f64,
    activations: &Matrix,
    targets: &Matrix,
) -> Result<Matrix> {
    let m = activations.rows();
    let n = targets.rows();
    let aug_a = Matrix::scaled_identity(m, epsilon).hstack(activations)?;
    let aug_y = Matrix::zeros(n, m).hstack(targets)?;
    batch_solve(&aug_a, &aug_y)
}

fn oracle_rel_diff(
    solver_spec: &SolverSpec,
    weights: &Matrix,
    activations: &Matrix,
    targets: &Matrix,
) -> Result<Option<f64>> {
    let oracle = match solver_spec.kind {
        SolverKind::Opium => {
            Some(augmented_oracle(solver_spec.epsilon.expect("normalized spec"), activations, targets)?)
        }
        SolverKind::Dynamic if solver_spec.alpha == Some(1.0) => {
            Some(augmented_oracle(solver_spec.epsilon.expect("normalized spec"), activations, targets)?)
        }
        SolverKind::Greville | SolverKind::Batch => Some(batch_solve(activations, targets)?),
        _ => None,
    };
    match oracle {
        Some(w_batch) => Ok(Some(weights.rel_frobenius_diff(&w_batch)?)),
        None => Ok(None),
    }
}

/// Runs one experiment end to end, feeding the trace to `sink`.
pub fn run_experiment(spec: &ExperimentSpec, sink: &mut dyn TraceSink) -> Result<RunSummary> {
    let start = Instant::now();
    let spec = normalize_spec(spec)?;
    let task = prepare_task(&spec)?;
    let steps = task.items.len();
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "task",
            message: "task produced no samples".into(),
        });
    }
    let rms_window = spec.rms_window.unwrap_or_else(|| steps.min(1000));
    if rms_window > steps {
        return Err(Error::InvalidParameter {
            name: "rms_window",
            message: format!("window of {rms_window} exceeds {steps} stream steps"),
        });
    }
    let mut spec = spec;
    spec.rms_window = Some(rms_window);

    let layer = HiddenLayer::init(&ElmConfig {
        input_dim: task.input_dim,
        hidden_dim: spec.hidden_dim,
        activation: spec.activation,
        weight_dist: resolve_weight_dist(&spec, task.input_dim),
        seed: spec.seed,
    })?;

    sink.begin(&TraceHeader {
        format: TRACE_FORMAT.to_string(),
        version: TRACE_VERSION,
        spec: spec.clone(),
    })?;

    let is_batch = spec.solver.kind == SolverKind::Batch;
    let keep_stream = task.keep_stream || is_batch;
    let mut kept: Vec<SamplePair> = Vec::new();
    let mut errors: Vec<f64> = Vec::with_capacity(steps);
    let mut solver = if is_batch {
        None
    } else {
        Some(SolverInstance::build(&spec.solver, spec.hidden_dim, task.output_dim)?)
    };

    if let Some(solver) = solver.as_mut() {
        let mut k = 0u64;
        for item in &task.items {
            let a = layer.activate(&item.input)?;
            let prediction = solver.as_online().predict(&a)?;
            let diff: Vec<f64> = item
                .target
                .iter()
                .zip(&prediction)
                .map(|(t, p)| t - p)
                .collect();
            let error = vec_norm(&diff);
            k += 1;
            sink.record(&TraceRecord {
                k,
                target: item.target.clone(),
                prediction,
                error,
            })?;
            solver.as_online().update(&a, &item.target)?;
            errors.push(error);
            if keep_stream {
                kept.push(SamplePair::new(a, item.target.clone()));
            }
        }
    } else {
        for item in &task.items {
            let a = layer.activate(&item.input)?;
            kept.push(SamplePair::new(a, item.target.clone()));
        }
    }

    let weights = match solver.as_ref() {
        Some(s) => s.weights().clone(),
        None => {
            let m = spec.hidden_dim;
            let n = task.output_dim;
            let mut activations = Matrix::zeros(m, steps);
            let mut targets = Matrix::zeros(n, steps);
            for (j, pair) in kept.iter().enumerate() {
                activations.set_col(j, &pair.activation);
                targets.set_col(j, &pair.target);
            }
            let w = batch_solve(&activations, &targets)?;
            for (j, pair) in kept.iter().enumerate() {
                let prediction = w.mul_vec(&pair.activation)?;
                let diff: Vec<f64> = pair
                    .target
                    .iter()
                    .zip(&prediction)
                    .map(|(t, p)| t - p)
                    .collect();
                let error = vec_norm(&diff);
                sink.record(&TraceRecord {
                    k: j as u64 + 1,
                    target: pair.target.clone(),
                    prediction,
                    error,
                })?;
                errors.push(error);
            }
            w
        }
    };

    let mut metrics = RunMetrics {
        steps: steps as u64,
        rms_window: Some(rms_window),
        rms_final: Some(rms_error(&errors, rms_window)?),
        rms_all: Some(rms_error(&errors, errors.len())?),
        ..RunMetrics::default()
    };

    if let Some(test) = &task.test_set {
        let hidden = layer.activate_columns(test.inputs())?;
        let scores = weights.matmul(&hidden)?;
        metrics.classification_error = Some(classification_error(&scores, test.labels())?);
    }

    if task.keep_stream {
        let m = spec.hidden_dim;
        let n = task.output_dim;
        let mut activations = Matrix::zeros(m, kept.len());
        let mut targets = Matrix::zeros(n, kept.len());
        for (j, pair) in kept.iter().enumerate() {
            activations.set_col(j, &pair.activation);
            targets.set_col(j, &pair.target);
        }
        metrics.oracle_rel_diff = oracle_rel_diff(&spec.solver, &weights, &activations, &targets)?;
    }

    if let Some(theta) = solver.as_ref().and_then(|s| s.theta()) {
        let (min_diag, ratio) = theta_diagnostics(theta);
        metrics.theta_min_diag = min_diag;
        metrics.theta_offdiag_ratio = ratio;
    }

    sink.finish(&TraceFooter {
        metrics: metrics.clone(),
    })?;

    Ok(RunSummary {
        metrics,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Element-wise mean of summary metrics over repeated runs.
///
/// Optional metrics are averaged over the runs that report them.
pub fn mean_metrics(runs: &[RunMetrics]) -> RunMetrics {
    if runs.is_empty() {
        return RunMetrics::default();
    }
    let mean_of = |get: &dyn Fn(&RunMetrics) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = runs.iter().filter_map(get).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let steps = runs.iter().map(|r| r.steps).sum::<u64>() as f64 / runs.len() as f64;
    RunMetrics {
        steps: steps.round() as u64,
        rms_window: runs.iter().find_map(|r| r.rms_window),
        rms_final: mean_of(&|r| r.rms_final),
        rms_all: mean_of(&|r| r.rms_all),
        classification_error: mean_of(&|r| r.classification_error),
        oracle_rel_diff: mean_of(&|r| r.oracle_rel_diff),
        theta_min_diag: mean_of(&|r| r.theta_min_diag),
        theta_offdiag_ratio: mean_of(&|r| r.theta_offdiag_ratio),
    }
}

/// Runs `repeats` experiments with seeds seed..seed+repeats-1.
///
/// `sink_for` supplies a sink per seed. Returns per-run summaries and the
/// mean metrics across them.
pub fn run_repeats(
    spec: &ExperimentSpec,
    repeats: usize,
    sink_for: &mut dyn FnMut(u64) -> Result<Box<dyn TraceSink>>,
) -> Result<(Vec<RunSummary>, RunMetrics)> {
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            message: "need at least one run".into(),
        });
    }
    let mut summaries = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let seed = spec.seed + r as u64;
        let mut run_spec = spec.clone();
        run_spec.seed = seed;
        let mut sink = sink_for(seed)?;
        summaries.push(run_experiment(&run_spec, sink.as_mut())?);
    }
    let metrics: Vec<RunMetrics> = summaries.iter().map(|s| s.metrics.clone()).collect();
    Ok((summaries, mean_metrics(&metrics)))
}

#[cfg(test)]
mod tests {
    use super::super::trace::MemorySink;
    use super::*;

    fn sine_spec(kind: SolverKind) -> ExperimentSpec {
        let mut solver = SolverSpec::new(kind);
        solver.epsilon = Some(10.0);
        solver.alpha = Some(1.003);
        ExperimentSpec {
            task: TaskSpec::SineSwitch {
                config: SineTaskConfig::default(),
            },
            solver,
            hidden_dim: 30,
            activation: Activation::Tanh,
            weight_dist: None,
            seed: 11,
            rms_window: None,
        }
    }

    #[test]
    fn record_count_matches_updates_and_steps() {
        let spec = sine_spec(SolverKind::Light);
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        assert_eq!(sink.records.len(), 1000);
        assert_eq!(summary.metrics.steps, 1000);
        assert_eq!(sink.records[0].k, 1);
        assert_eq!(sink.records[999].k, 1000);
        let footer = sink.footer.unwrap();
        assert_eq!(footer.metrics, summary.metrics);
    }

    #[test]
    fn header_echoes_normalized_spec() {
        let spec = sine_spec(SolverKind::Light);
        let mut sink = MemorySink::new();
        run_experiment(&spec, &mut sink).unwrap();
        let header = sink.header.unwrap();
        assert_eq!(header.spec.solver.g, Some(1.0));
        assert_eq!(header.spec.rms_window, Some(1000));
    }

    #[test]
    fn first_prediction_comes_from_zero_weights() {
        let spec = sine_spec(SolverKind::Opium);
        let mut sink = MemorySink::new();
        run_experiment(&spec, &mut sink).unwrap();
        assert_eq!(sink.records[0].prediction, vec![0.0]);
    }

    #[test]
    fn online_learning_reduces_error() {
        let spec = sine_spec(SolverKind::Opium);
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        let errors = sink.errors();
        let early = rms_error(&errors[..100], 100).unwrap();
        let late = rms_error(&errors, 100).unwrap();
        assert!(late < early * 0.5, "early {early}, late {late}");
        assert!(summary.metrics.rms_final.unwrap() < 0.5);
    }

    #[test]
    fn metrics_recompute_from_recorded_errors() {
        let spec = sine_spec(SolverKind::Dynamic);
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        let errors = sink.errors();
        let recomputed = rms_error(&errors, 1000).unwrap();
        assert!((recomputed - summary.metrics.rms_final.unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn classification_run_reports_test_error() {
        let spec = ExperimentSpec {
            task: TaskSpec::IdxClassify {
                images: None,
                labels: None,
                test_images: None,
                test_labels: None,
                train_limit: Some(120),
                test_limit: Some(40),
            },
            solver: SolverSpec::new(SolverKind::Light),
            hidden_dim: 60,
            activation: Activation::Tanh,
            weight_dist: None,
            seed: 3,
            rms_window: None,
        };
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        assert_eq!(summary.metrics.steps, 120);
        let err = summary.metrics.classification_error.unwrap();
        assert!((0.0..=1.0).contains(&err));
        assert_eq!(sink.records[0].target.len(), 10);
    }

    #[test]
    fn random_equivalence_reports_oracle_agreement() {
        let mut solver = SolverSpec::new(SolverKind::Opium);
        solver.epsilon = Some(1e-3);
        let spec = ExperimentSpec {
            task: TaskSpec::RandomEquivalence {
                input_dim: 6,
                output_dim: 2,
                steps: 120,
            },
            solver,
            hidden_dim: 15,
            activation: Activation::Tanh,
            weight_dist: None,
            seed: 21,
            rms_window: None,
        };
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        let diff = summary.metrics.oracle_rel_diff.unwrap();
        assert!(diff <= 1e-8, "oracle diff {diff}");
        assert!(summary.metrics.theta_min_diag.is_some());
    }

    #[test]
    fn batch_solver_fits_the_whole_stream() {
        let spec = ExperimentSpec {
            solver: SolverSpec::new(SolverKind::Batch),
            ..sine_spec(SolverKind::Batch)
        };
        let mut sink = MemorySink::new();
        let summary = run_experiment(&spec, &mut sink).unwrap();
        assert_eq!(sink.records.len(), 1000);
        assert!(summary.metrics.rms_all.unwrap() < 0.2);
    }

    #[test]
    fn missing_required_params_are_rejected() {
        let mut spec = sine_spec(SolverKind::Opium);
        spec.solver.epsilon = None;
        let mut sink = MemorySink::new();
        assert!(run_experiment(&spec, &mut sink).is_err());

        let mut spec = sine_spec(SolverKind::Dynamic);
        spec.solver.alpha = None;
        assert!(run_experiment(&spec, &mut MemorySink::new()).is_err());

        let mut spec = sine_spec(SolverKind::Light);
        spec.hidden_dim = 0;
        assert!(run_experiment(&spec, &mut MemorySink::new()).is_err());
    }

    #[test]
    fn repeats_advance_the_seed_and_average() {
        let spec = sine_spec(SolverKind::Light);
        let mut seeds_seen = Vec::new();
        let (summaries, mean) = run_repeats(&spec, 3, &mut |seed| {
            seeds_seen.push(seed);
            Ok(Box::new(MemorySink::new()))
        })
        .unwrap();
        assert_eq!(seeds_seen, vec![11, 12, 13]);
        assert_eq!(summaries.len(), 3);
        let by_hand: f64 = summaries
            .iter()
            .map(|s| s.metrics.rms_final.unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((mean.rms_final.unwrap() - by_hand).abs() < 1e-15);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = sine_spec(SolverKind::Dynamic);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"task\":\"sine-switch\""));
        assert!(json.contains("\"kind\":\"dynamic\""));
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn mean_metrics_skips_missing_fields() {
        let a = RunMetrics {
            steps: 10,
            rms_final: Some(0.2),
            ..RunMetrics::default()
        };
        let b = RunMetrics {
            steps: 10,
            rms_final: Some(0.4),
            classification_error: Some(0.1),
            ..RunMetrics::default()
        };
        let mean = mean_metrics(&[a, b]);
        assert!((mean.rms_final.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(mean.classification_error, Some(0.1));
        assert_eq!(mean.steps, 10);
    }
}
