//! Finite-difference checks of the analytic gradients of whole networks.

use ashgan_core::model::{build_discriminator, build_generator, DiscriminatorSpec, GeneratorSpec};
use ashgan_core::nn::{seeded_rng, NamedParams, Tensor};
use rand::Rng as _;

fn random(shape: [usize; 4], seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| *x as f64 * *y as f64)
        .sum()
}

/// Returns the fraction of sampled coordinates whose analytic and numeric
/// derivatives agree.
fn agreement(pairs: &[(f32, f64)]) -> f64 {
    let ok = pairs
        .iter()
        .filter(|(a, n)| {
            let tol = 5e-2 * n.abs().max(a.abs() as f64) + 5e-3;
            (*a as f64 - n).abs() <= tol
        })
        .count();
    ok as f64 / pairs.len() as f64
}

fn perturb<M: NamedParams>(model: &mut M, index: usize, delta: f32) {
    let mut seen = 0;
    model.visit_params_mut(&mut |_, p| {
        if index >= seen && index < seen + p.len() {
            p.value_mut()[index - seen] += delta;
        }
        seen += p.len();
    });
}

fn grads<M: NamedParams>(model: &M) -> Vec<f32> {
    let mut out = Vec::new();
    model.visit_params(&mut |_, p| {
        if p.grad().is_empty() {
            out.extend(std::iter::repeat_n(0.0, p.len()));
        } else {
            out.extend_from_slice(p.grad());
        }
    });
    out
}

#[test]
fn generator_parameter_gradients() {
    let spec = GeneratorSpec::scaled(16, 8).unwrap();
    let mut g = build_generator(&spec, 4).unwrap();
    // Larger weights keep the signal well above f32 rounding noise.
    g.visit_params_mut(&mut |name, p| {
        if name.ends_with("weight") {
            p.value_mut().iter_mut().for_each(|w| *w *= 8.0);
        }
    });
    let x = random(g.input_shape(2), 1);
    let y = g.forward(&x, None, true).unwrap();
    let probe = random(y.shape(), 2);
    g.zero_grad();
    g.backward(&probe);
    let analytic = grads(&g);
    let h = 2e-3;
    let mut pairs = Vec::new();
    for i in (0..analytic.len()).step_by(analytic.len() / 60) {
        perturb(&mut g, i, h);
        let lp = dot(&g.forward(&x, None, false).unwrap(), &probe);
        perturb(&mut g, i, -2.0 * h);
        let lm = dot(&g.forward(&x, None, false).unwrap(), &probe);
        perturb(&mut g, i, h);
        pairs.push((analytic[i], (lp - lm) / (2.0 * h as f64)));
    }
    let a = agreement(&pairs);
    assert!(a >= 0.95, "agreement {a}: {pairs:?}");
}

#[test]
fn discriminator_input_and_parameter_gradients() {
    let spec = DiscriminatorSpec::with_width(32, 8);
    let mut d = build_discriminator(&spec, 6).unwrap();
    d.visit_params_mut(&mut |name, p| {
        if name.ends_with("weight") {
            p.value_mut().iter_mut().for_each(|w| *w *= 8.0);
        }
    });
    let shape = [2, 3, 32, 32];
    let source = random(shape, 3);
    let candidate = random(shape, 4);
    let logits = d.forward(&source, &candidate, true).unwrap();
    let probe = random(logits.shape(), 5);
    d.zero_grad();
    let dx = d.backward(&probe);
    let analytic = grads(&d);
    let h = 2e-3;
    let mut pairs = Vec::new();
    for i in (0..analytic.len()).step_by(analytic.len() / 60) {
        perturb(&mut d, i, h);
        let lp = dot(&d.forward(&source, &candidate, false).unwrap(), &probe);
        perturb(&mut d, i, -2.0 * h);
        let lm = dot(&d.forward(&source, &candidate, false).unwrap(), &probe);
        perturb(&mut d, i, h);
        pairs.push((analytic[i], (lp - lm) / (2.0 * h as f64)));
    }
    for i in (0..candidate.len()).step_by(candidate.len() / 40) {
        let mut plus = candidate.clone();
        plus.data_mut()[i] += h;
        let mut minus = candidate.clone();
        minus.data_mut()[i] -= h;
        let lp = dot(&d.forward(&source, &plus, false).unwrap(), &probe);
        let lm = dot(&d.forward(&source, &minus, false).unwrap(), &probe);
        pairs.push((dx.data()[i], (lp - lm) / (2.0 * h as f64)));
    }
    let a = agreement(&pairs);
    assert!(a >= 0.95, "agreement {a}: {pairs:?}");
}

#[test]
fn frozen_discriminator_accumulates_no_parameter_gradients() {
    let spec = DiscriminatorSpec::with_width(32, 8);
    let mut d = build_discriminator(&spec, 6).unwrap();
    d.set_trainable(false);
    let x = random([1, 3, 32, 32], 1);
    let logits = d.forward(&x, &x, true).unwrap();
    let dx = d.backward(&logits);
    assert!(dx.data().iter().any(|&v| v != 0.0));
    assert!(grads(&d).iter().all(|&v| v == 0.0));
}
