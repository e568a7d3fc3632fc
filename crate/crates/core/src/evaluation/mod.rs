//! Scoring detections against gold-labelled corpora.

mod batch;
mod dataset;
mod files;
mod metrics;
mod report;

pub use batch::{
    run_batch, run_checkpointed, run_intensity_batch, BatchError, BatchItem, BatchOptions, BatchOutcome, ItemFailure,
    Keyed, PipelineConfig,
};
pub use dataset::{
    import_dataset, read_sentences, write_dataset, ColumnMatch, DatasetError, DatasetExample, ImportedDataset,
    DEFAULT_GOLD_THRESHOLD,
};
pub use files::{
    fingerprint_path, read_analyzed, read_fingerprint, read_jsonl, read_predictions, write_analyzed, write_fingerprint,
    write_jsonl, write_predictions, FileError,
};
pub use metrics::{
    compute_metrics, confusion_counts, harmonic_mean, level_distribution, ConfusionCounts, Counts, EvaluationReport,
    LevelCount, MetricsError, MicroMetrics, RunFingerprint, Scores, ValueMetrics,
};
pub use report::{render_report, PerValueReference, ReferenceAverages, ReferenceScores, ReportFormat};
