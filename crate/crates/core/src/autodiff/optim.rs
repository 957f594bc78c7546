use super::tensor::Parameter;

/// Plain gradient descent step `p ← p − lr·∇p`, then clears the gradients.
pub fn sgd_step(params: &mut [Parameter], lr: f64) {
    for p in params {
        for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
            *v -= lr * g;
        }
        p.zero_grad();
    }
}

/// Step-decay schedule: the rate is multiplied by `factor` after every
/// `every` iterations, by repeated multiplication.
#[derive(Clone, Debug)]
pub struct StepDecay {
    lr0: f64,
    lr: f64,
    factor: f64,
    every: u64,
    iteration: u64,
}

impl StepDecay {
    pub fn new(lr0: f64, factor: f64, every: u64) -> Self {
        Self {
            lr0,
            lr: lr0,
            factor,
            every: every.max(1),
            iteration: 0,
        }
    }

    /// Rate to use for the next update.
    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Advances the iteration counter after an update and applies decay when
    /// the counter hits a multiple of `every`. Returns the rate now in force.
    pub fn tick(&mut self) -> f64 {
        self.iteration += 1;
        if self.iteration.is_multiple_of(self.every) {
            let steps = (self.iteration / self.every).min(i32::MAX as u64) as i32;
            self.lr = self.lr0 * self.factor.powi(steps);
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn arithmetic_step() {
        let mut p = vec![Parameter::new("p", Tensor::scalar(1.0))];
        p[0].grad = Tensor::scalar(2.0);
        sgd_step(&mut p, 0.1);
        assert!((p[0].value.item() - 0.8).abs() < 1e-15);
        assert_eq!(p[0].grad.item(), 0.0);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Parameter::new("w", Tensor::from_fn(&[2, 2], |i| i as f64))];
        let before = p[0].value.clone();
        sgd_step(&mut p, 0.5);
        assert_eq!(p[0].value, before);
    }

    #[test]
    fn quadratic_decreases() {
        let loss = |p: f64| 0.5 * (p - 3.0) * (p - 3.0);
        let mut p = vec![Parameter::new("p", Tensor::scalar(0.0))];
        let before = loss(p[0].value.item());
        p[0].grad = Tensor::scalar(p[0].value.item() - 3.0);
        sgd_step(&mut p, 0.1);
        assert!(loss(p[0].value.item()) < before);
    }

    #[test]
    fn decay_every_hundred() {
        let mut s = StepDecay::new(0.001, 0.99, 100);
        let mut at = Vec::new();
        for _ in 0..300 {
            let lr = s.tick();
            if s.iteration().is_multiple_of(100) {
                at.push(lr);
            }
        }
        let expected: Vec<f64> = (1..=3).map(|k| 0.001 * 0.99_f64.powi(k)).collect();
        assert_eq!(at, expected);
    }
}
