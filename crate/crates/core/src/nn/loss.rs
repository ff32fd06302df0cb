use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Mean binary cross-entropy of `sigmoid(logits)` against a constant label,
/// with the gradient with respect to the logits.
pub fn bce_with_logits(logits: &Tensor, label: f32) -> (f32, Tensor) {
    let count = logits.len().max(1) as f64;
    let mut total = 0.0f64;
    let grad = logits.map(|z| {
        let p = super::layers::sigmoid(z);
        ((p - label) as f64 / count) as f32
    });
    for &z in logits.data() {
        let z = z as f64;
        total += z.max(0.0) - z * label as f64 + (-z.abs()).exp().ln_1p();
    }
    ((total / count) as f32, grad)
}

/// Mean absolute error and its (sub)gradient with respect to `prediction`.
pub fn l1(prediction: &Tensor, target: &Tensor) -> Result<(f32, Tensor)> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "L1 between {:?} and {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let count = prediction.len().max(1) as f64;
    let mut total = 0.0f64;
    let grad = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            total += d.abs() as f64;
            (d.signum() as f64 * (d != 0.0) as u8 as f64 / count) as f32
        })
        .collect();
    Ok((
        (total / count) as f32,
        Tensor::from_vec(prediction.shape(), grad)?,
    ))
}

/// Fraction of patch cells classified on the correct side of probability 0.5.
pub fn patch_accuracy(logits: &Tensor, label: f32) -> f32 {
    if logits.is_empty() {
        return 0.0;
    }
    let real = label > 0.5;
    let correct = logits.data().iter().filter(|&&z| (z > 0.0) == real).count();
    correct as f32 / logits.len() as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_of_zero_logit_is_ln2() {
        let z = Tensor::zeros([1, 1, 2, 2]);
        let (loss, grad) = bce_with_logits(&z, 1.0);
        assert!((loss - std::f32::consts::LN_2).abs() < 1e-6);
        assert!(grad.data().iter().all(|&g| (g + 0.125).abs() < 1e-7));
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let z = Tensor::from_vec([1, 1, 1, 2], vec![80.0, -80.0]).unwrap();
        let (loss, _) = bce_with_logits(&z, 1.0);
        assert!((loss - 40.0).abs() < 1e-4);
    }

    #[test]
    fn accuracy_uses_half_probability_threshold() {
        let z = Tensor::from_vec([1, 1, 1, 4], vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        assert_eq!(patch_accuracy(&z, 1.0), 0.5);
        assert_eq!(patch_accuracy(&z, 0.0), 0.5);
    }

    #[test]
    fn l1_rejects_mismatched_shapes() {
        assert!(l1(&Tensor::zeros([1, 1, 2, 2]), &Tensor::zeros([1, 1, 2, 1])).is_err());
    }
}
