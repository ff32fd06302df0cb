//! Layers with hand-written backward passes.
//!
//! Each layer records what its backward pass needs during a forward call made
//! with `record = true`; `backward` consumes that record. Passing
//! `param_grads = false` propagates input gradients without touching the
//! parameter gradients, which is how a frozen sub-network is traversed.

use rand::Rng as _;

use super::ops::{col2im, gemm, im2col, Geometry, Mat};
use super::param::Param;
use super::tensor::Tensor;
use super::Rng;
use crate::error::{Error, Result};

pub const INIT_STD: f32 = 0.02;

/// 2-D convolution with "same" padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pub(crate) weight: Param,
    pub(crate) bias: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: Param::normal(
                vec![out_channels, in_channels, kernel, kernel],
                INIT_STD,
                rng,
            ),
            bias: Param::filled(vec![out_channels], 0.0),
            input: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn geometry(&self, x: &Tensor) -> Geometry {
        Geometry::same(
            self.in_channels,
            x.height(),
            x.width(),
            self.kernel,
            self.stride,
        )
    }

    pub fn forward(&mut self, x: &Tensor, record: bool) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let g = self.geometry(x);
        let mut out = Tensor::zeros([x.batch(), self.out_channels, g.out_h, g.out_w]);
        let mut cols = vec![0.0; g.rows() * g.cols()];
        let weight = Mat::new(self.weight.value(), self.out_channels, g.rows());
        for n in 0..x.batch() {
            im2col(x.item(n), &g, &mut cols);
            let dst = out.item_mut(n);
            for (plane, &b) in dst.chunks_mut(g.cols()).zip(self.bias.value()) {
                plane.fill(b);
            }
            gemm(weight, Mat::new(&cols, g.rows(), g.cols()), 1.0, dst);
        }
        self.input = record.then(|| x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let input = self
            .input
            .take()
            .expect("Conv2d::backward called without a recorded forward pass");
        let g = self.geometry(&input);
        let mut dx = Tensor::zeros(input.shape());
        let mut cols = vec![0.0; g.rows() * g.cols()];
        let mut dcols = vec![0.0; g.rows() * g.cols()];
        for n in 0..input.batch() {
            let dout = Mat::new(grad.item(n), self.out_channels, g.cols());
            if param_grads {
                im2col(input.item(n), &g, &mut cols);
                gemm(
                    dout,
                    Mat::new(&cols, g.rows(), g.cols()).t(),
                    1.0,
                    self.weight.grad_mut(),
                );
                accumulate_bias(self.bias.grad_mut(), grad.item(n), g.cols());
            }
            gemm(
                Mat::new(self.weight.value(), self.out_channels, g.rows()).t(),
                dout,
                0.0,
                &mut dcols,
            );
            col2im(&dcols, &g, dx.item_mut(n));
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Transposed 2-D convolution: the adjoint of a "same" convolution, so the
/// output is `stride` times the input size.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pub(crate) weight: Param,
    pub(crate) bias: Param,
    input: Option<Tensor>,
}

impl ConvTranspose2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: Param::normal(
                vec![in_channels, out_channels, kernel, kernel],
                INIT_STD,
                rng,
            ),
            bias: Param::filled(vec![out_channels], 0.0),
            input: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn geometry(&self, x: &Tensor) -> Geometry {
        Geometry::same(
            self.out_channels,
            x.height() * self.stride,
            x.width() * self.stride,
            self.kernel,
            self.stride,
        )
    }

    pub fn forward(&mut self, x: &Tensor, record: bool) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "transposed convolution expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let g = self.geometry(x);
        debug_assert_eq!((g.out_h, g.out_w), (x.height(), x.width()));
        let mut out = Tensor::zeros([x.batch(), self.out_channels, g.in_h, g.in_w]);
        let mut cols = vec![0.0; g.rows() * g.cols()];
        let weight = Mat::new(self.weight.value(), self.in_channels, g.rows());
        for n in 0..x.batch() {
            gemm(
                weight.t(),
                Mat::new(x.item(n), self.in_channels, g.cols()),
                0.0,
                &mut cols,
            );
            let dst = out.item_mut(n);
            for (plane, &b) in dst.chunks_mut(g.in_h * g.in_w).zip(self.bias.value()) {
                plane.fill(b);
            }
            col2im(&cols, &g, dst);
        }
        self.input = record.then(|| x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let input = self
            .input
            .take()
            .expect("ConvTranspose2d::backward called without a recorded forward pass");
        let g = self.geometry(&input);
        let mut dx = Tensor::zeros(input.shape());
        let mut dcols = vec![0.0; g.rows() * g.cols()];
        for n in 0..input.batch() {
            im2col(grad.item(n), &g, &mut dcols);
            let dcols_mat = Mat::new(&dcols, g.rows(), g.cols());
            if param_grads {
                gemm(
                    Mat::new(input.item(n), self.in_channels, g.cols()),
                    dcols_mat.t(),
                    1.0,
                    self.weight.grad_mut(),
                );
                accumulate_bias(self.bias.grad_mut(), grad.item(n), g.in_h * g.in_w);
            }
            gemm(
                Mat::new(self.weight.value(), self.in_channels, g.rows()),
                dcols_mat,
                0.0,
                dx.item_mut(n),
            );
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

fn accumulate_bias(bias_grad: &mut [f32], grad_item: &[f32], plane: usize) {
    for (b, chunk) in bias_grad.iter_mut().zip(grad_item.chunks(plane)) {
        *b += chunk.iter().sum::<f32>();
    }
}

/// Batch normalisation using the statistics of the current batch.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    channels: usize,
    epsilon: f32,
    pub(crate) gamma: Param,
    pub(crate) beta: Param,
    cache: Option<(Tensor, Vec<f32>)>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            epsilon: 1e-3,
            gamma: Param::filled(vec![channels], 1.0),
            beta: Param::filled(vec![channels], 0.0),
            cache: None,
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }

    pub fn forward(&mut self, x: &Tensor, record: bool) -> Tensor {
        let [n, c, h, w] = x.shape();
        debug_assert_eq!(c, self.channels);
        let plane = h * w;
        let count = (n * plane) as f64;
        let mut normalized = Tensor::zeros(x.shape());
        let mut out = Tensor::zeros(x.shape());
        let mut inv_stds = Vec::with_capacity(c);
        for ch in 0..c {
            let ranges: Vec<_> = (0..n)
                .map(|i| (i * c + ch) * plane..(i * c + ch + 1) * plane)
                .collect();
            let sum: f64 = ranges
                .iter()
                .flat_map(|r| x.data()[r.clone()].iter())
                .map(|&v| v as f64)
                .sum();
            let mean = sum / count;
            let var: f64 = ranges
                .iter()
                .flat_map(|r| x.data()[r.clone()].iter())
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / count;
            let inv_std = (1.0 / (var + self.epsilon as f64).sqrt()) as f32;
            let mean = mean as f32;
            let (gamma, beta) = (self.gamma.value()[ch], self.beta.value()[ch]);
            for r in &ranges {
                for j in r.clone() {
                    let xhat = (x.data()[j] - mean) * inv_std;
                    normalized.data_mut()[j] = xhat;
                    out.data_mut()[j] = gamma * xhat + beta;
                }
            }
            inv_stds.push(inv_std);
        }
        self.cache = record.then_some((normalized, inv_stds));
        out
    }

    pub fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let (normalized, inv_stds) = self
            .cache
            .take()
            .expect("BatchNorm2d::backward called without a recorded forward pass");
        let [n, c, h, w] = grad.shape();
        let plane = h * w;
        let count = (n * plane) as f32;
        let mut dx = Tensor::zeros(grad.shape());
        for (ch, &inv_std) in inv_stds.iter().enumerate() {
            let ranges: Vec<_> = (0..n)
                .map(|i| (i * c + ch) * plane..(i * c + ch + 1) * plane)
                .collect();
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for r in &ranges {
                for j in r.clone() {
                    let dy = grad.data()[j] as f64;
                    sum_dy += dy;
                    sum_dy_xhat += dy * normalized.data()[j] as f64;
                }
            }
            if param_grads {
                self.gamma.grad_mut()[ch] += sum_dy_xhat as f32;
                self.beta.grad_mut()[ch] += sum_dy as f32;
            }
            let gamma = self.gamma.value()[ch];
            let scale = gamma * inv_std / count;
            let (sum_dy, sum_dy_xhat) = (sum_dy as f32, sum_dy_xhat as f32);
            for r in &ranges {
                for j in r.clone() {
                    dx.data_mut()[j] = scale
                        * (count * grad.data()[j] - sum_dy - normalized.data()[j] * sum_dy_xhat);
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.gamma, &self.beta]
    }
}

/// Pointwise activation whose derivative can be read off its output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f32),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Identity => x.clone(),
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::LeakyRelu(slope) => x.map(|v| if v > 0.0 { v } else { slope * v }),
            Activation::Tanh => x.map(f32::tanh),
            Activation::Sigmoid => x.map(sigmoid),
        }
    }

    /// Gradient through the activation given its recorded output.
    pub fn backward(self, output: &Tensor, grad: &Tensor) -> Tensor {
        let data = output
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&y, &g)| match self {
                Activation::Identity => g,
                Activation::Relu => {
                    if y > 0.0 {
                        g
                    } else {
                        0.0
                    }
                }
                Activation::LeakyRelu(slope) => {
                    if y > 0.0 {
                        g
                    } else {
                        slope * g
                    }
                }
                Activation::Tanh => g * (1.0 - y * y),
                Activation::Sigmoid => g * y * (1.0 - y),
            })
            .collect();
        Tensor::from_vec(output.shape(), data).expect("same shape")
    }
}

pub fn sigmoid(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Inverted dropout mask: kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f32, rng: &mut Rng) -> Vec<f32> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f32>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn mul_elementwise(x: &Tensor, mask: &[f32]) -> Tensor {
    let data = x.data().iter().zip(mask).map(|(a, b)| a * b).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}
