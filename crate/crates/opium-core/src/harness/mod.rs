//! Experiment harness: dataset loaders, task generators, metrics, trace
//! output, and the run orchestrator that ties layer, solver, and sink
//! together reproducibly.

pub mod idx;
pub mod metrics;
pub mod runner;
pub mod series;
pub mod synth;
pub mod task;
pub mod trace;

pub use idx::{load_idx, write_idx_images, write_idx_labels, LabeledDataset};
pub use metrics::{classification_error, rms_error};
pub use runner::{
    mean_metrics, normalize_spec, run_experiment, run_repeats, ExperimentSpec, RunSummary,
    SolverKind, SolverSpec, TaskSpec,
};
pub use series::{load_csv_series, synthetic_ecg};
pub use synth::{synthetic_digits, SYNTH_CLASSES, SYNTH_SIDE};
pub use task::{make_series_task, make_sine_task, SineTaskConfig, TaskItem};
pub use trace::{
    read_trace, FileSink, MemorySink, NullSink, RunMetrics, TraceFooter, TraceHeader, TraceRecord,
    TraceSink,
};
