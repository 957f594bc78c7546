//! The subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use mars_core::io::{
    ablation_svg, line_chart_svg, read_checkpoint, read_corpus, read_dataset, read_report_toml,
    write_ablation_csv, write_checkpoint, write_corpus, write_dataset, write_run_report, Series,
    CORPUS_MANIFEST, REPORT_TOML, WINDOWS_FILE, WINDOWS_SIDECAR,
};
use mars_core::kinematics::Skeleton;
use mars_core::model::{ArchitectureSpec, FusionVariant, MarsModel};
use mars_core::motiongen::build_corpus;
use mars_core::pipeline::{
    ablate_sensors, evaluate, standardize_split, stratified_split, train, transfer_finetune,
    AblationSettings, Dataset, RunReport,
};
use mars_core::sigproc::{preprocess, sensor_set, ChannelLayout};
use mars_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, Config};
use crate::manifest::{InputRecord, RunManifest, Staging};

pub const CORPUS_DIR: &str = "corpus";
pub const MODEL_CKPT: &str = "model.ckpt";
pub const MODEL_SIDECAR: &str = "model.toml";
pub const EVAL_CSV: &str = "eval.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_SVG: &str = "ablation.svg";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Everything needed to rebuild a model around its checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub fusion: FusionVariant,
    pub classes: usize,
    pub class_names: Vec<String>,
    pub sensors: Vec<String>,
    pub architecture: ArchitectureSpec,
}

/// Flag values that override configuration keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fusion: Option<FusionVariant>,
    pub sensors: Option<String>,
}

pub fn load_config(path: Option<&Path>, o: &Overrides, command: &str) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(f) = o.fusion {
        cfg.training.fusion = f;
    }
    if let Some(s) = &o.sensors {
        match command {
            "synth" => cfg.corpus.sensors = s.clone(),
            "ablate" => cfg.ablation.sets = s.split(',').map(|x| x.trim().to_string()).collect(),
            _ => return Err(Error::config("sensors", format!("--sensors does not apply to `{command}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn synth(cfg: &Config, out: &Path, overwrite: bool) -> Result<()> {
    let stage = Staging::new(out, overwrite)?;
    let spec = cfg.corpus_spec()?;
    let all_sensors = sensor_set("6")?;
    let corpus = build_corpus(&spec, &Skeleton::standard(), &all_sensors)?;
    let corpus_dir = stage.path().join(CORPUS_DIR);
    fs::create_dir(&corpus_dir)?;
    write_corpus(&corpus_dir, &corpus, &spec)?;

    let layout = ChannelLayout::new(&sensor_set(&cfg.corpus.sensors)?)?;
    let options = cfg.preprocess();
    let samples = preprocess(&corpus, &layout, &options)?;
    let data = Dataset::new(layout, options.window, corpus.taxonomy.len(), samples)?;
    let (mut tr, mut te) = stratified_split(&data, cfg.corpus.test_fraction, derive_seed(cfg.seed, "split"))?;
    let stats = standardize_split(&mut tr, &mut te)?;
    let names: Vec<String> = corpus.taxonomy.iter().map(|c| c.name.clone()).collect();
    write_dataset(stage.path(), &tr, &te, &names, &options, &stats)?;
    let dir = stage.commit("synth", cfg, Vec::new())?;
    println!(
        "synth: {} sequences, {} train / {} test windows of {}x{} -> {}",
        corpus.sequences.len(),
        tr.len(),
        te.len(),
        tr.channels(),
        tr.window,
        dir.display()
    );
    Ok(())
}

/// Reads a dataset written by `synth` after checking its hashes.
fn load_dataset(dir: &Path) -> Result<(Dataset, Dataset, Vec<String>, Vec<InputRecord>)> {
    let inputs = RunManifest::verify(dir, &[WINDOWS_FILE, WINDOWS_SIDECAR])?;
    let (tr, te, manifest) = read_dataset(dir)?;
    Ok((tr, te, manifest.class_names, inputs))
}

/// Accepts either a run directory or the checkpoint file inside it.
fn checkpoint_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    } else {
        path.to_path_buf()
    }
}

fn load_model(path: &Path) -> Result<(MarsModel, ModelSidecar, Vec<InputRecord>)> {
    let dir = checkpoint_dir(path);
    let inputs = RunManifest::verify(&dir, &[MODEL_CKPT, MODEL_SIDECAR])?;
    let text = fs::read_to_string(dir.join(MODEL_SIDECAR))?;
    let sidecar: ModelSidecar =
        toml::from_str(&text).map_err(|e| Error::format("model sidecar", e.message().to_string()))?;
    let mut model = MarsModel::new(sidecar.architecture.clone(), sidecar.fusion, sidecar.classes, 0)?;
    let values = read_checkpoint(BufReader::new(File::open(dir.join(MODEL_CKPT))?))?;
    model.load_values(values)?;
    Ok((model, sidecar, inputs))
}

fn save_model(dir: &Path, model: &MarsModel, class_names: &[String], sensors: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(MODEL_CKPT))?);
    write_checkpoint(&mut w, model.params())?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    let sidecar = ModelSidecar {
        fusion: model.variant(),
        classes: model.classes(),
        class_names: class_names.to_vec(),
        sensors: sensors.to_vec(),
        architecture: model.spec().clone(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::format("model sidecar", e.to_string()))?;
    fs::write(dir.join(MODEL_SIDECAR), text)?;
    Ok(())
}

fn check_shapes(model: &MarsModel, source: &Path, data: &Dataset, data_dir: &Path) -> Result<()> {
    let s = model.spec();
    if s.channels != data.channels() || s.window != data.window {
        return Err(Error::shape(format!(
            "checkpoint {} expects {}x{} windows but dataset {} holds {}x{}",
            source.display(),
            s.channels,
            s.window,
            data_dir.display(),
            data.channels(),
            data.window
        )));
    }
    Ok(())
}

fn summarize(report: &RunReport) -> String {
    let last = report.epochs.last();
    let train = last.map_or(f64::NAN, |e| e.train.top1);
    let test = report.final_metrics.map_or(f64::NAN, |m| m.top1);
    let conv = report
        .epochs_to_convergence
        .map_or_else(|| "not converged".to_string(), |e| format!("converged at epoch {}", e + 1));
    format!(
        "{}: {} epochs, train top-1 {train:.4}, test top-1 {test:.4}, {conv}",
        report.label,
        report.epochs.len()
    )
}

pub fn train_cmd(cfg: &Config, data_dir: &Path, out: &Path, overwrite: bool) -> Result<()> {
    let stage = Staging::new(out, overwrite)?;
    let (tr, te, names, inputs) = load_dataset(data_dir)?;
    let spec = cfg.architecture(tr.channels(), tr.window)?;
    let tcfg = cfg.train_config();
    let mut model = MarsModel::new(spec, tcfg.fusion, tr.classes, derive_seed(cfg.seed, "init"))?;
    let eval = (!te.is_empty()).then_some(&te);
    let report = train(&mut model, &tr, eval, &tcfg)?;
    save_model(stage.path(), &model, &names, tr.layout.sensors())?;
    write_run_report(stage.path(), &report, &names)?;
    stage.commit("train", cfg, inputs)?;
    println!("{}", summarize(&report));
    Ok(())
}

pub fn finetune(cfg: &Config, checkpoint: &Path, data_dir: &Path, out: &Path, overwrite: bool) -> Result<()> {
    let stage = Staging::new(out, overwrite)?;
    let (pretrained, sidecar, mut inputs) = load_model(checkpoint)?;
    let (tr, te, names, data_inputs) = load_dataset(data_dir)?;
    inputs.extend(data_inputs);
    check_shapes(&pretrained, checkpoint, &tr, data_dir)?;
    if sidecar.sensors != tr.layout.sensors() {
        return Err(Error::shape(format!(
            "checkpoint sensors {:?} differ from dataset sensors {:?}",
            sidecar.sensors,
            tr.layout.sensors()
        )));
    }
    let tcfg = cfg.finetune_config();
    let eval = (!te.is_empty()).then_some(&te);
    let (model, report) = transfer_finetune(&pretrained, &tr, eval, &tcfg)?;
    save_model(stage.path(), &model, &names, tr.layout.sensors())?;
    write_run_report(stage.path(), &report, &names)?;
    stage.commit("finetune", cfg, inputs)?;
    println!("{}", summarize(&report));
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

pub fn eval_cmd(cfg: &Config, checkpoint: &Path, data_dir: &Path, split: Split, out: &Path, overwrite: bool) -> Result<()> {
    let stage = Staging::new(out, overwrite)?;
    let (model, _, mut inputs) = load_model(checkpoint)?;
    let (tr, te, _, data_inputs) = load_dataset(data_dir)?;
    inputs.extend(data_inputs);
    check_shapes(&model, checkpoint, &tr, data_dir)?;
    if model.classes() != tr.classes {
        return Err(Error::shape(format!(
            "checkpoint {} has {} classes but dataset {} has {}",
            checkpoint.display(),
            model.classes(),
            data_dir.display(),
            tr.classes
        )));
    }
    let data = match split {
        Split::Train => tr,
        Split::Test => te,
        Split::All => {
            let mut all = tr.samples;
            all.extend(te.samples);
            Dataset::new(tr.layout, tr.window, tr.classes, all)?
        }
    };
    if data.is_empty() {
        return Err(Error::invalid(format!("the {} split is empty", split.name())));
    }
    let (m, _) = evaluate(&model, &data, cfg.train_config().eval_chunk)?;
    fs::write(
        stage.path().join(EVAL_CSV),
        format!(
            "split,samples,accuracy,precision,f1,top1\n{},{},{},{},{},{}\n",
            split.name(),
            data.len(),
            m.accuracy,
            m.precision,
            m.f1,
            m.top1
        ),
    )?;
    stage.commit("eval", cfg, inputs)?;
    println!(
        "split={} samples={} accuracy={} precision={} f1={} top1={}",
        split.name(),
        data.len(),
        m.accuracy,
        m.precision,
        m.f1,
        m.top1
    );
    Ok(())
}

pub fn ablate(cfg: &Config, corpus_run: &Path, out: &Path, overwrite: bool) -> Result<()> {
    let stage = Staging::new(out, overwrite)?;
    let manifest = RunManifest::read(corpus_run)?;
    let prefix = format!("{CORPUS_DIR}/");
    let files: Vec<&str> = manifest
        .outputs
        .iter()
        .filter(|r| r.path.starts_with(&prefix))
        .map(|r| r.path.as_str())
        .collect();
    if !files.iter().any(|f| f.ends_with(CORPUS_MANIFEST)) {
        return Err(Error::invalid(format!("{} holds no corpus", corpus_run.display())));
    }
    let inputs = RunManifest::verify(corpus_run, &files)?;
    let (corpus, _) = read_corpus(&corpus_run.join(CORPUS_DIR))?;
    let settings = AblationSettings {
        preprocess: cfg.preprocess(),
        test_fraction: cfg.corpus.test_fraction,
        split_seed: derive_seed(cfg.seed, "split"),
        architecture: cfg.architecture(36, cfg.corpus.window)?,
        training: cfg.ablation_config(),
    };
    let rows = ablate_sensors(&corpus, &cfg.ablation.sets, &settings)?;
    let names: Vec<String> = corpus.taxonomy.iter().map(|c| c.name.clone()).collect();
    for row in &rows {
        let dir = stage.path().join(format!("set-{}", row.sensor_set));
        fs::create_dir(&dir)?;
        write_run_report(&dir, &row.report, &names)?;
        println!("{} (N={}): {}", row.sensor_set, row.channels, summarize(&row.report));
    }
    write_ablation_csv(&stage.path().join(ABLATION_CSV), &rows)?;
    fs::write(stage.path().join(ABLATION_SVG), ablation_svg(&rows))?;
    stage.commit("ablate", cfg, inputs)?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn report(cfg: &Config, runs: &[PathBuf], out: &Path, overwrite: bool) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::invalid("report needs at least one run directory"));
    }
    let stage = Staging::new(out, overwrite)?;
    let mut inputs = Vec::new();
    let mut reports = Vec::new();
    for dir in runs {
        inputs.extend(RunManifest::verify(dir, &[REPORT_TOML])?);
        reports.push((dir, read_report_toml(&dir.join(REPORT_TOML))?.report));
    }
    let names: Vec<String> = reports
        .iter()
        .map(|(dir, r)| {
            let base = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            format!("{} ({base})", r.label)
        })
        .collect();
    let mut train_series = Vec::new();
    let mut test_series = Vec::new();
    for (i, ((_, r), name)) in reports.iter().zip(&names).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        train_series.push(Series {
            name,
            color,
            points: r.epochs.iter().map(|e| (e.epoch as f64 + 1.0, e.train.top1)).collect(),
        });
        test_series.push(Series {
            name,
            color,
            points: r
                .epochs
                .iter()
                .filter_map(|e| e.eval.map(|m| (e.epoch as f64 + 1.0, m.top1)))
                .collect(),
        });
    }
    fs::write(
        stage.path().join("train_accuracy.svg"),
        line_chart_svg("train accuracy", "epoch", "top-1", &train_series),
    )?;
    if test_series.iter().any(|s| !s.points.is_empty()) {
        fs::write(
            stage.path().join("test_accuracy.svg"),
            line_chart_svg("test accuracy", "epoch", "top-1", &test_series),
        )?;
    }
    let mut csv = String::from("run,label,epochs,epochs_to_convergence,final_train_top1,final_test_top1\n");
    for ((dir, r), _) in reports.iter().zip(&names) {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            dir.display(),
            r.label,
            r.epochs.len(),
            r.epochs_to_convergence.map_or_else(String::new, |e| (e + 1).to_string()),
            r.epochs.last().map_or(f64::NAN, |e| e.train.top1),
            r.final_metrics.map_or_else(String::new, |m| m.top1.to_string()),
        ));
    }
    fs::write(stage.path().join(SUMMARY_CSV), csv)?;
    stage.commit("report", cfg, inputs)?;
    for (_, r) in &reports {
        println!("{}", summarize(r));
    }
    Ok(())
}
