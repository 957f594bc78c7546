//! On-disk formats: raw corpora, windowed datasets, checkpoints and reports.

mod binary;
mod checkpoint;
mod corpus;
mod dataset;
mod report;
mod windows;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use corpus::{read_corpus, read_corpus_manifest, write_corpus, CorpusManifest, SequenceEntry, CORPUS_MANIFEST};
pub use dataset::{
    read_dataset, read_dataset_manifest, write_dataset, DatasetManifest, WINDOWS_FILE, WINDOWS_SIDECAR,
};
pub use report::{
    ablation_svg, accuracy_curves_svg, line_chart_svg, write_ablation_csv, write_confusion_csv,
    write_epochs_csv, write_report_toml, write_run_report, read_report_toml, Series, StoredReport, CONFUSION_CSV, CURVES_SVG,
    EPOCHS_CSV, REPORT_TOML,
};
pub use windows::{
    read_windows, read_windows_file, read_windows_header, write_windows, WindowsFile, WindowsHeader,
    WINDOWS_MAGIC,
};
