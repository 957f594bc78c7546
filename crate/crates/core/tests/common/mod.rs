//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use mars_core::autodiff::{Graph, NodeId, Tensor};
use mars_core::model::{ArchitectureSpec, FusionVariant, LossWeights, MarsModel, Reduction};
use mars_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const STEP: f64 = 1e-6;

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values in `±[0.1, 1]`, kept away from the ReLU kink.
pub fn off_zero_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random::<bool>() { m } else { -m }
    })
}

type Build = dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>;

/// Scalar loss `Σ (f(inputs) − r)²` for a fixed random target `r`, or `f`
/// itself when it is already a scalar.
fn loss_graph(build: &Build, inputs: &[Tensor], target: Option<&Tensor>) -> Result<(Graph, NodeId, Vec<NodeId>)> {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let y = build(&mut g, &ids)?;
    let loss = match target {
        Some(r) => {
            let r = g.input(r.clone());
            g.squared_error(y, r)?
        }
        None => y,
    };
    Ok((g, loss, ids))
}

/// Largest relative error between the analytic gradient and central
/// differences, over every input of `build`.
pub fn gradcheck(build: &Build, inputs: Vec<Tensor>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF00D);
    let probe = {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let y = build(&mut g, &ids).expect("forward");
        g.value(y).clone()
    };
    let target = (probe.len() > 1).then(|| random_tensor(&mut rng, probe.shape(), -1.0, 1.0));
    let (g, loss, ids) = loss_graph(build, &inputs, target.as_ref()).expect("forward");
    let grads = g.backward(loss).expect("backward");
    let eval = |xs: &[Tensor]| {
        let (g, l, _) = loss_graph(build, xs, target.as_ref()).expect("forward");
        g.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for (k, id) in ids.iter().enumerate() {
        let analytic = grads
            .get(*id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        let mut xs = inputs.clone();
        for j in 0..inputs[k].len() {
            let base = xs[k].data()[j];
            xs[k].data_mut()[j] = base + STEP;
            let up = eval(&xs);
            xs[k].data_mut()[j] = base - STEP;
            let down = eval(&xs);
            xs[k].data_mut()[j] = base;
            numeric.push((up - down) / (2.0 * STEP));
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

pub struct OpCase {
    pub name: &'static str,
    pub inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    pub build: Box<Build>,
}

fn case(
    name: &'static str,
    inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    build: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId> + 'static,
) -> OpCase {
    OpCase {
        name,
        inputs,
        build: Box::new(build),
    }
}

fn u(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    random_tensor(rng, shape, -1.0, 1.0)
}

fn positive(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    random_tensor(rng, shape, 0.2, 1.0)
}

fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    let t = positive(rng, &[n]);
    let s: f64 = t.data().iter().sum();
    Tensor::from_fn(&[n], |i| t.data()[i] / s)
}

/// Every differentiable operator of the graph, each on random inputs.
pub fn operator_cases() -> Vec<OpCase> {
    vec![
        case(
            "conv1d",
            |r| vec![u(r, &[2, 3, 9]), u(r, &[4, 3, 3]), u(r, &[4])],
            |g, x| g.conv1d(x[0], x[1], x[2], 1),
        ),
        case(
            "conv1d stride 2",
            |r| vec![u(r, &[2, 3, 9]), u(r, &[2, 3, 3]), u(r, &[2])],
            |g, x| g.conv1d(x[0], x[1], x[2], 2),
        ),
        case(
            "conv2d",
            |r| vec![u(r, &[2, 2, 6, 5]), u(r, &[3, 2, 2, 3]), u(r, &[3])],
            |g, x| g.conv2d(x[0], x[1], x[2], (1, 1)),
        ),
        case(
            "conv2d stride 2x1",
            |r| vec![u(r, &[2, 1, 7, 5]), u(r, &[2, 1, 3, 2]), u(r, &[2])],
            |g, x| g.conv2d(x[0], x[1], x[2], (2, 1)),
        ),
        case(
            "deconv1d",
            |r| vec![u(r, &[2, 3, 5]), u(r, &[3, 2, 4]), u(r, &[2])],
            |g, x| g.deconv1d(x[0], x[1], x[2], 1),
        ),
        case(
            "deconv1d stride 2",
            |r| vec![u(r, &[2, 3, 4]), u(r, &[3, 2, 3]), u(r, &[2])],
            |g, x| g.deconv1d(x[0], x[1], x[2], 2),
        ),
        case(
            "deconv2d",
            |r| vec![u(r, &[2, 2, 3, 4]), u(r, &[2, 3, 2, 2]), u(r, &[3])],
            |g, x| g.deconv2d(x[0], x[1], x[2], (1, 1)),
        ),
        case(
            "deconv2d stride 2",
            |r| vec![u(r, &[2, 2, 3, 3]), u(r, &[2, 1, 2, 3]), u(r, &[1])],
            |g, x| g.deconv2d(x[0], x[1], x[2], (2, 2)),
        ),
        case(
            "dense",
            |r| vec![u(r, &[3, 5]), u(r, &[4, 5]), u(r, &[4])],
            |g, x| g.dense(x[0], x[1], x[2]),
        ),
        case("relu", |r| vec![off_zero_tensor(r, &[3, 7])], |g, x| Ok(g.relu(x[0]))),
        case(
            "sigmoid",
            |r| vec![random_tensor(r, &[3, 7], -4.0, 4.0)],
            |g, x| Ok(g.sigmoid(x[0])),
        ),
        case(
            "sqrt_sigmoid",
            |r| vec![random_tensor(r, &[3, 7], -4.0, 4.0)],
            |g, x| Ok(g.sqrt_sigmoid(x[0])),
        ),
        case("neg", |r| vec![u(r, &[4, 3])], |g, x| Ok(g.neg(x[0]))),
        case("scale", |r| vec![u(r, &[4, 3])], |g, x| Ok(g.scale(x[0], -1.7))),
        case("add", |r| vec![u(r, &[2, 5]), u(r, &[2, 5])], |g, x| g.add(x[0], x[1])),
        case("mul", |r| vec![u(r, &[2, 5]), u(r, &[2, 5])], |g, x| g.mul(x[0], x[1])),
        case("reshape", |r| vec![u(r, &[2, 3, 4])], |g, x| g.reshape(x[0], &[2, 12])),
        case(
            "transpose_last2",
            |r| vec![u(r, &[2, 3, 4])],
            |g, x| g.transpose_last2(x[0]),
        ),
        case("concat", |r| vec![u(r, &[2, 3]), u(r, &[2, 4])], |g, x| g.concat(x[0], x[1])),
        case("mean_batch", |r| vec![u(r, &[4, 5])], |g, x| g.mean_batch(x[0])),
        case(
            "softmax",
            |r| vec![random_tensor(r, &[3, 6], -3.0, 3.0)],
            |g, x| Ok(g.softmax(x[0])),
        ),
        case("normalize_sum", |r| vec![positive(r, &[2, 6])], |g, x| g.normalize_sum(x[0])),
        case(
            "sdkl",
            |r| vec![distribution(r, 6), distribution(r, 6)],
            |g, x| g.sdkl(x[0], x[1]),
        ),
        case(
            "cross_entropy",
            |r| vec![random_tensor(r, &[4, 5], -3.0, 3.0)],
            |g, x| g.cross_entropy(x[0], &[0, 3, 4, 3]),
        ),
        case(
            "squared_error",
            |r| vec![u(r, &[3, 4]), u(r, &[3, 4])],
            |g, x| g.squared_error(x[0], x[1]),
        ),
        case("sum_squares", |r| vec![u(r, &[3, 4])], |g, x| Ok(g.sum_squares(x[0]))),
    ]
}

/// Worst gradient error of every operator over `seeds`.
pub fn operator_suite(seeds: std::ops::Range<u64>) -> Vec<(&'static str, f64)> {
    operator_cases()
        .into_iter()
        .map(|c| {
            let worst = seeds.clone().fold(0.0_f64, |acc, seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                acc.max(gradcheck(&*c.build, (c.inputs)(&mut rng), seed))
            });
            (c.name, worst)
        })
        .collect()
}

/// Relative gradient error of the whole shrunken model on a 2-window batch.
pub fn model_gradcheck(seed: u64) -> f64 {
    let variant = FusionVariant::ALL[seed as usize % 3];
    let mut model = MarsModel::new(ArchitectureSpec::shrunken(), variant, 3, seed).expect("model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
    let x = random_tensor(&mut rng, &[2, 12, 16], -1.0, 1.0);
    let labels = [rng.random_range(0..3), rng.random_range(0..3)];
    // Zero biases put ReLU inputs exactly on the kink wherever a layer input
    // vanishes; check at a generic point instead.
    for p in model.params_mut() {
        if !p.is_weight() {
            p.value = random_tensor(&mut rng, p.value.shape(), -0.2, 0.2);
        }
    }
    let weights = LossWeights {
        reconstruction_reduction: if seed.is_multiple_of(2) { Reduction::Mean } else { Reduction::Sum },
        ..Default::default()
    };
    for p in model.params_mut() {
        p.zero_grad();
    }
    model.accumulate_gradients(&x, &labels, &weights).expect("gradients");
    let analytic: Vec<f64> = model.params().iter().flat_map(|p| p.grad.data().to_vec()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..model.params().len() {
        for j in 0..model.params()[i].value.len() {
            let base = model.params()[i].value.data()[j];
            model.params_mut()[i].value.data_mut()[j] = base + STEP;
            let up = model.loss(&x, &labels, &weights).expect("loss");
            model.params_mut()[i].value.data_mut()[j] = base - STEP;
            let down = model.loss(&x, &labels, &weights).expect("loss");
            model.params_mut()[i].value.data_mut()[j] = base;
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    rel_err(&analytic, &numeric)
}
