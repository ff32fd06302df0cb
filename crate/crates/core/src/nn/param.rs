use rand_distr::{Distribution, Normal};

use super::store::NamedParams;
use super::Rng;

/// Trainable weight buffer with its gradient and Adam moments.
///
/// Gradient and moment buffers are allocated on first use, so inference-only
/// models carry just their values.
#[derive(Debug, Clone)]
pub struct Param {
    shape: Vec<usize>,
    value: Vec<f32>,
    grad: Vec<f32>,
    first_moment: Vec<f32>,
    second_moment: Vec<f32>,
}

impl Param {
    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let len = shape.iter().product();
        Self::from_values(shape, vec![value; len])
    }

    /// Zero-mean Gaussian initialisation.
    pub fn normal(shape: Vec<usize>, std: f32, rng: &mut Rng) -> Self {
        let len = shape.iter().product();
        let dist = Normal::new(0.0f32, std).expect("positive standard deviation");
        let value = (0..len).map(|_| dist.sample(rng)).collect();
        Self::from_values(shape, value)
    }

    pub fn from_values(shape: Vec<usize>, value: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        Self {
            shape,
            value,
            grad: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn value(&self) -> &[f32] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [f32] {
        &mut self.value
    }

    /// Accumulated gradient; empty if no backward pass has touched this parameter.
    pub fn grad(&self) -> &[f32] {
        &self.grad
    }

    pub(crate) fn grad_mut(&mut self) -> &mut [f32] {
        if self.grad.is_empty() {
            self.grad = vec![0.0; self.value.len()];
        }
        &mut self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub(crate) fn moments(&self) -> (&[f32], &[f32]) {
        (&self.first_moment, &self.second_moment)
    }

    pub(crate) fn set_moments(&mut self, first: Vec<f32>, second: Vec<f32>) {
        self.first_moment = first;
        self.second_moment = second;
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    step: u64,
}

impl Adam {
    pub fn new(learning_rate: f32, beta1: f32, beta2: f32) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-7,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_steps(&mut self, step: u64) {
        self.step = step;
    }

    /// Applies one update to every parameter that has a gradient, then clears the gradients.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param>) {
        let (c1, c2) = self.advance();
        for p in params {
            self.update(p, c1, c2);
        }
    }

    /// [`Adam::step`] over every parameter of a model.
    pub fn step_model(&mut self, model: &mut dyn NamedParams) {
        let (c1, c2) = self.advance();
        model.visit_params_mut(&mut |_, p| self.update(p, c1, c2));
    }

    fn advance(&mut self) -> (f32, f32) {
        self.step += 1;
        let t = self.step as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn update(&self, p: &mut Param, correction1: f32, correction2: f32) {
        if p.grad.is_empty() {
            return;
        }
        if p.first_moment.is_empty() {
            p.first_moment = vec![0.0; p.value.len()];
            p.second_moment = vec![0.0; p.value.len()];
        }
        for i in 0..p.value.len() {
            let g = p.grad[i];
            let m = self.beta1 * p.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * p.second_moment[i] + (1.0 - self.beta2) * g * g;
            p.first_moment[i] = m;
            p.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            p.value[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            p.grad[i] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        // With bias correction the first step is lr · g / (|g| + eps) ≈ lr · sign(g).
        let mut p = Param::from_values(vec![2], vec![1.0, -1.0]);
        p.grad_mut().copy_from_slice(&[3.0, -0.5]);
        let mut opt = Adam::new(0.1, 0.5, 0.999);
        opt.step([&mut p]);
        assert!((p.value()[0] - 0.9).abs() < 1e-6);
        assert!((p.value()[1] + 0.9).abs() < 1e-6);
        assert!(p.grad().iter().all(|&g| g == 0.0));
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn parameters_without_gradients_are_untouched() {
        let mut p = Param::from_values(vec![1], vec![0.25]);
        let mut opt = Adam::new(0.1, 0.5, 0.999);
        opt.step([&mut p]);
        assert_eq!(p.value(), &[0.25]);
    }
}
