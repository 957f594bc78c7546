//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs every criterion by default; pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --release --test acceptance -- 2 5`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use mars_core::autodiff::{symmetric_kl, Graph, Tensor};
use mars_core::io::write_checkpoint;
use mars_core::kinematics::{
    sample_virtual_imus, virtual_acceleration, ImuOptions, MotionSequence, PoseFrame, Skeleton,
};
use mars_core::model::{fairness_penalty, ArchitectureSpec, FusionVariant, MarsModel};
use mars_core::motiongen::{build_corpus, CorpusSpec, RawCorpus};
use mars_core::pipeline::{
    ablate_sensors, standardize_split, stratified_split, train, transfer_finetune, AblationSettings,
    ConfusionMatrix, Dataset, TrainConfig,
};
use mars_core::sigproc::{preprocess, sensor_set, ChannelLayout, PreprocessOptions, WindowedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{model_gradcheck, operator_suite};

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

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let ops = operator_suite(0..20);
    let (op_name, op_worst) = ops
        .iter()
        .copied()
        .fold(("", 0.0_f64), |a, b| if b.1 >= a.1 { b } else { a });
    let model_worst = (0..20).map(model_gradcheck).fold(0.0_f64, f64::max);
    let secs = started.elapsed().as_secs_f64();
    outcome(
        op_worst <= 1e-6 && model_worst <= 1e-5 && secs < 120.0,
        format!(
            "{} operators x 20 seeds worst {op_worst:.2e} ({op_name}) <= 1e-6; shrunken model x 20 seeds worst {model_worst:.2e} <= 1e-5; {secs:.1} s < 120 s",
            ops.len()
        ),
    )
}

fn shape_conformance() -> Outcome {
    let model = MarsModel::new(ArchitectureSpec::standard(36), FusionVariant::V3, 5, 1).expect("model");
    let x = Tensor::from_fn(&[2, 36, 60], |i| ((i * 7919) % 97) as f64 / 97.0 - 0.5);
    let l1 = model.encode_1d(&x).expect("encode 1d");
    let l2 = model.encode_2d(&x).expect("encode 2d");
    let r1 = model.decode_1d(&l1).expect("decode 1d");
    let r2 = model.decode_2d(&l2).expect("decode 2d");
    let got = (l1.shape().to_vec(), l2.shape().to_vec(), r1.shape().to_vec(), r2.shape().to_vec());
    let want = (vec![2, 6144], vec![2, 672], vec![2, 36, 60], vec![2, 1, 60, 36]);
    outcome(
        got == want,
        format!(
            "latents {:?} {:?}, reconstructions {:?} {:?} (batch of 2)",
            got.0, got.1, got.2, got.3
        ),
    )
}

/// Sequence of identity poses whose root follows `path`.
fn translated(path: impl Fn(f64) -> [f64; 3], frames: usize, rate: f64, joints: usize) -> MotionSequence {
    let poses = (0..frames)
        .map(|i| {
            let mut p = PoseFrame::identity(joints, i);
            p.root_translation = path(i as f64 / rate);
            p
        })
        .collect();
    MotionSequence::new(poses, rate, 0).expect("sequence")
}

fn virtual_accelerometry() -> Outcome {
    let skeleton = Skeleton::standard();
    let sensors = sensor_set("6").expect("sensor set");
    let rate = 60.0;
    let dt = 1.0 / rate;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut quad_err: f64 = 0.0;
    let mut cubic_err: f64 = 0.0;
    for _ in 0..50 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
        let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let path = |t: f64| std::array::from_fn(|k| a[k] * t * t + b[k] * t + c[k]);
        let seq = translated(path, 90, rate, skeleton.joint_count());
        let imus = sample_virtual_imus(&seq, &skeleton, &sensors, ImuOptions::default()).expect("imus");
        for stream in &imus {
            for s in stream {
                for (got, coef) in s.acceleration.iter().zip(a) {
                    quad_err = quad_err.max((got - 2.0 * coef).abs());
                }
            }
        }
        // Cubic: the central second difference equals 6·d·t + 2·a exactly.
        let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let cubic = |t: f64| -> [f64; 3] { std::array::from_fn(|k| d[k] * t * t * t + a[k] * t * t + b[k] * t + c[k]) };
        for i in 1..119 {
            let t = i as f64 * dt;
            let got = virtual_acceleration(cubic(t - dt), cubic(t), cubic(t + dt), dt).expect("acc");
            for k in 0..3 {
                cubic_err = cubic_err.max((got[k] - (6.0 * d[k] * t + 2.0 * a[k])).abs());
            }
        }
    }
    outcome(
        quad_err <= 1e-9 && cubic_err <= 1e-9,
        format!(
            "quadratic root paths through skinning: max error {quad_err:.2e} m/s^2; random cubics: max error {cubic_err:.2e} m/s^2 (limit 1e-9)"
        ),
    )
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn kl_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut asym: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..20);
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        asym = asym.max((symmetric_kl(&p, &q) - symmetric_kl(&q, &p)).abs());
    }
    let mut min_batch = f64::INFINITY;
    let mut max_equal: f64 = 0.0;
    for _ in 0..1000 {
        let (b, m) = (rng.random_range(1..9), rng.random_range(2..17));
        let f1 = Tensor::from_fn(&[b, m], |_| rng.random_range(-3.0..3.0));
        let f2 = Tensor::from_fn(&[b, m], |_| rng.random_range(-3.0..3.0));
        let mut g = Graph::new();
        let (a, c) = (g.input(f1.clone()), g.input(f2));
        let v = fairness_penalty(&mut g, a, c).expect("penalty");
        min_batch = min_batch.min(g.value(v).item());
        let mut g = Graph::new();
        let (a, c) = (g.input(f1.clone()), g.input(f1));
        let v = fairness_penalty(&mut g, a, c).expect("penalty");
        max_equal = max_equal.max(g.value(v).item().abs());
    }
    // D(p||q) + D(q||p) by hand: 0.5 ln 2 + 0.5 ln(2/3) + 0.25 ln(1/2) + 0.75 ln(3/2) = ln(3)/4.
    let oracle = 0.5 * (0.5_f64 / 0.25).ln() + 0.5 * (0.5_f64 / 0.75).ln() + 0.25 * (0.25_f64 / 0.5).ln() + 0.75 * (0.75_f64 / 0.5).ln();
    let mut g = Graph::new();
    let p = g.input(Tensor::new(vec![2], vec![0.5, 0.5]).expect("p"));
    let q = g.input(Tensor::new(vec![2], vec![0.25, 0.75]).expect("q"));
    let node = g.sdkl(p, q).expect("sdkl");
    let hand_err = (g.value(node).item() - oracle).abs().max((oracle - 3.0_f64.ln() / 4.0).abs());
    outcome(
        asym <= 1e-12 && min_batch >= 0.0 && max_equal == 0.0 && hand_err <= 1e-12,
        format!(
            "symmetry {asym:.2e} <= 1e-12; min over 1000 batches {min_batch:.3e} >= 0; equal inputs {max_equal:e}; p=(0.5,0.5) q=(0.25,0.75) error {hand_err:.2e} <= 1e-12"
        ),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..8);
        let rows: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..20)).collect()).collect();
        let m = ConfusionMatrix::from_rows(rows.clone()).expect("matrix");
        if m.total() == 0 {
            continue;
        }
        let got = m.metrics().expect("metrics");
        // Expand the matrix into individual predictions and count per class.
        let mut pairs = Vec::new();
        for (t, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                pairs.extend(std::iter::repeat_n((t, p), n as usize));
            }
        }
        let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
        let mut precision = 0.0;
        for c in 0..k {
            let (mut a, mut b, mut d, mut e) = (0.0, 0.0, 0.0, 0.0);
            for &(t, p) in &pairs {
                match (t == c, p == c) {
                    (true, true) => a += 1.0,
                    (false, true) => b += 1.0,
                    (true, false) => d += 1.0,
                    (false, false) => e += 1.0,
                }
            }
            if a + b > 0.0 {
                precision += a / (a + b);
            }
            tp += a;
            fp += b;
            fn_ += d;
            tn += e;
        }
        let accuracy = (tp + tn) / (tp + tn + fp + fn_);
        let precision = precision / k as f64;
        let f1 = 2.0 * tp / (2.0 * tp + fp + fn_);
        for (x, y) in [(got.accuracy, accuracy), (got.precision, precision), (got.f1, f1)] {
            worst = worst.max((x - y).abs());
        }
    }
    let truth: Vec<usize> = (0..50).map(|i| i % 5).collect();
    let perfect = ConfusionMatrix::from_predictions(&truth, &truth, 5).expect("matrix").metrics().expect("metrics");
    let exact = perfect.accuracy == 1.0 && perfect.precision == 1.0 && perfect.f1 == 1.0;
    outcome(
        worst <= 1e-12 && exact,
        format!("200 random matrices vs brute-force counting: worst {worst:.2e} <= 1e-12; perfect prediction exactly 1.0: {exact}"),
    )
}

fn target_data(spec: &CorpusSpec, sensors: &str, split_seed: u64) -> (Dataset, Dataset) {
    let corpus = build_corpus(spec, &Skeleton::standard(), &sensor_set("6").expect("set")).expect("corpus");
    split_corpus(&corpus, sensors, split_seed)
}

fn split_corpus(corpus: &RawCorpus, sensors: &str, split_seed: u64) -> (Dataset, Dataset) {
    let layout = ChannelLayout::new(&sensor_set(sensors).expect("set")).expect("layout");
    let options = PreprocessOptions::default();
    let samples = preprocess(corpus, &layout, &options).expect("preprocess");
    let data = Dataset::new(layout, options.window, corpus.taxonomy.len(), samples).expect("dataset");
    let (mut tr, mut te) = stratified_split(&data, 0.2, split_seed).expect("split");
    standardize_split(&mut tr, &mut te).expect("standardize");
    (tr, te)
}

fn desk_scale_learning() -> Outcome {
    let started = Instant::now();
    let (tr, te) = target_data(&CorpusSpec::target_default(), "3", 7);
    let sizes_ok = tr.len() >= 2000 && te.len() >= 500;
    let mut parts = vec![format!("{} train / {} test windows", tr.len(), te.len())];
    let mut pass = sizes_ok;
    for (i, variant) in FusionVariant::ALL.into_iter().enumerate() {
        let cfg = TrainConfig {
            fusion: variant,
            seed: 100 + i as u64,
            stop_on_convergence: false,
            stop_at_eval_accuracy: Some(0.90),
            ..TrainConfig::default()
        };
        let mut model = MarsModel::new(ArchitectureSpec::standard(36), variant, tr.classes, 200 + i as u64).expect("model");
        let report = train(&mut model, &tr, Some(&te), &cfg).expect("training");
        let acc = report.final_metrics.map_or(0.0, |m| m.top1);
        pass &= acc >= 0.90;
        parts.push(format!("{} test top-1 {acc:.4} after {} epochs", report.label, report.epochs.len()));
    }
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    pass &= minutes <= 15.0;
    parts.push(format!("{minutes:.1} min on {cores} core(s) (limit 15 min)"));
    outcome(pass, parts.join("; "))
}

/// Reduced pathway widths keeping the standard kernels, strides and window,
/// so a pretrain + two training runs per seed fit a single core.
fn transfer_architecture() -> ArchitectureSpec {
    let mut spec = ArchitectureSpec::standard(36);
    for (layer, width) in spec.conv1d.iter_mut().zip([16, 24, 28, 32]) {
        layer.out_channels = width;
    }
    for (layer, width) in spec.conv2d.iter_mut().zip([6, 12, 18, 24]) {
        layer.out_channels = width;
    }
    spec.fusion_dim = 64;
    spec
}

fn transfer_speedup() -> Outcome {
    const MAX_EPOCHS: usize = 60;
    let variant = FusionVariant::V2;
    let mut pass = true;
    let mut parts = Vec::new();
    for run in 0..3u64 {
        let source = CorpusSpec {
            sequences_per_class: 40,
            seed: 1000 + run,
            ..CorpusSpec::source_default()
        };
        let target = CorpusSpec {
            sequences_per_class: 10,
            seed: 2000 + run,
            ..CorpusSpec::target_default()
        };
        let (src_train, _) = target_data(&source, "3", 10 + run);
        let (tgt_train, tgt_test) = target_data(&target, "3", 20 + run);
        let base = TrainConfig {
            lr0: 0.01,
            fusion: variant,
            seed: 30 + run,
            ..TrainConfig::default()
        };
        let pretrain_cfg = TrainConfig {
            max_epochs: 15,
            stop_on_convergence: false,
            ..base.clone()
        };
        let mut pretrained =
            MarsModel::new(transfer_architecture(), variant, src_train.classes, 40 + run).expect("model");
        let pre = train(&mut pretrained, &src_train, None, &pretrain_cfg).expect("pretraining");
        let cfg = TrainConfig {
            max_epochs: MAX_EPOCHS,
            ..base
        };
        let (_, tuned) = transfer_finetune(&pretrained, &tgt_train, Some(&tgt_test), &cfg).expect("fine-tuning");
        let mut scratch =
            MarsModel::new(transfer_architecture(), variant, tgt_train.classes, 50 + run).expect("model");
        let fresh = train(&mut scratch, &tgt_train, Some(&tgt_test), &cfg).expect("training");
        // Epochs trained up to and including the first epoch of the stable streak.
        let ft = tuned.epochs_to_convergence.map(|i| i + 1);
        let sc = fresh.epochs_to_convergence.map(|i| i + 1);
        let ok = match (ft, sc) {
            (Some(f), Some(s)) => f as f64 <= 0.25 * s as f64,
            // A scratch run that never converges needs more than MAX_EPOCHS.
            (Some(f), None) => f as f64 <= 0.25 * (MAX_EPOCHS + 1) as f64,
            (None, _) => false,
        };
        pass &= ok;
        let show = |e: Option<usize>| e.map_or(format!(">{MAX_EPOCHS}"), |e| e.to_string());
        parts.push(format!(
            "seed {run}: source top-1 {:.3}, fine-tune {} vs scratch {} epochs",
            pre.epochs.last().map_or(0.0, |e| e.train.top1),
            show(ft),
            show(sc)
        ));
    }
    parts.push("limit 0.25x".into());
    outcome(pass, parts.join("; "))
}

fn lr_schedule() -> Outcome {
    // 100 windows with batch size 1 give 100 iterations per epoch.
    let layout = ChannelLayout::new(&sensor_set("3").expect("set")).expect("layout");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples = (0..100)
        .map(|i| WindowedSample {
            values: (0..36 * 16).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: i % 3,
            source_sequence: i,
            start_frame: 0,
        })
        .collect();
    let data = Dataset::new(layout, 16, 3, samples).expect("dataset");
    let spec = ArchitectureSpec {
        channels: 36,
        ..ArchitectureSpec::shrunken()
    };
    let mut model = MarsModel::new(spec, FusionVariant::V2, 3, 8).expect("model");
    let cfg = TrainConfig {
        batch_size: 1,
        max_epochs: 3,
        fusion: FusionVariant::V2,
        stop_on_convergence: false,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, None, &cfg).expect("training");
    let logged: Vec<(u64, f64)> = report.lr_events.iter().map(|e| (e.iteration, e.lr)).collect();
    let want: Vec<(u64, f64)> = (1..=3).map(|k| (100 * k as u64, 0.001 * 0.99_f64.powi(k))).collect();
    outcome(
        logged == want,
        format!("logged {logged:?}, expected {want:?}"),
    )
}

fn ablation_harness() -> Outcome {
    let spec = CorpusSpec {
        sequences_per_class: 4,
        duration_range: (6.0, 7.0),
        ..CorpusSpec::target_default()
    };
    let corpus = build_corpus(&spec, &Skeleton::standard(), &sensor_set("6").expect("set")).expect("corpus");
    let settings = AblationSettings {
        preprocess: PreprocessOptions::default(),
        test_fraction: 0.25,
        split_seed: 9,
        architecture: ArchitectureSpec {
            window: 60,
            ..ArchitectureSpec::shrunken()
        },
        training: TrainConfig {
            max_epochs: 2,
            batch_size: 16,
            ..TrainConfig::default()
        },
    };
    let sets = ["3", "4", "5-knee", "5-wrist", "6"];
    let rows = ablate_sensors(&corpus, &sets, &settings).expect("ablation");
    let channels: Vec<usize> = rows.iter().map(|r| r.channels).collect();
    let complete = rows.iter().all(|r| {
        r.report.epochs.len() == 2
            && r.report.final_metrics.is_some()
            && r.report.confusion.is_some()
            && r.report.channels == r.channels
    });
    outcome(
        channels == [36, 48, 60, 60, 72] && rows.len() == 5 && complete,
        format!("sets {sets:?} -> N = {channels:?}; {} complete reports: {complete}", rows.len()),
    )
}

fn determinism() -> Outcome {
    let run = || {
        let spec = CorpusSpec {
            sequences_per_class: 4,
            duration_range: (6.0, 7.0),
            seed: 10,
            ..CorpusSpec::target_default()
        };
        let (tr, te) = target_data(&spec, "3", 10);
        let arch = ArchitectureSpec {
            channels: 36,
            window: 60,
            ..ArchitectureSpec::shrunken()
        };
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 16,
            seed: 10,
            ..TrainConfig::default()
        };
        let mut model = MarsModel::new(arch, cfg.fusion, tr.classes, 10).expect("model");
        let report = train(&mut model, &tr, Some(&te), &cfg).expect("training");
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, model.params()).expect("checkpoint");
        (bytes, report.scalars())
    };
    let (a, sa) = run();
    let (b, sb) = run();
    let diff = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).fold(0.0_f64, f64::max);
    outcome(
        a == b && sa.len() == sb.len() && diff <= 1e-12,
        format!(
            "checkpoints ({} bytes) bitwise identical: {}; {} report scalars, max difference {diff:e} <= 1e-12",
            a.len(),
            a == b,
            sa.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "gradient suite", gradient_suite),
        (2, "shape conformance", shape_conformance),
        (3, "virtual accelerometry", virtual_accelerometry),
        (4, "symmetric KL", kl_suite),
        (5, "metrics oracle", metrics_oracle),
        (6, "desk-scale learning", desk_scale_learning),
        (7, "transfer speedup", transfer_speedup),
        (8, "learning-rate schedule", lr_schedule),
        (9, "ablation harness", ablation_harness),
        (10, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let o = run();
        println!(
            "[{}] criterion {id:>2} {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
