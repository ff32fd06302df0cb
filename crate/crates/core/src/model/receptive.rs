use crate::error::{Error, Result};

/// Receptive field size and cumulative stride ("jump") of a stack of
/// `(kernel, stride)` layers: `r ← r + (k − 1)·j`, `j ← j·s`, from `r = j = 1`.
pub fn receptive_field(schedule: &[(usize, usize)]) -> Result<(usize, usize)> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument(
            "receptive field of an empty schedule".into(),
        ));
    }
    schedule
        .iter()
        .try_fold((1usize, 1usize), |(rf, jump), &(k, s)| {
            if k == 0 || s == 0 {
                return Err(Error::InvalidArgument(format!(
                    "kernel and stride must be positive, got ({k}, {s})"
                )));
            }
            Ok((rf + (k - 1) * jump, jump * s))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_layer_sees_its_kernel() {
        assert_eq!(receptive_field(&[(4, 1)]).unwrap().0, 4);
    }

    #[test]
    fn canonical_patchgan_is_70() {
        let s = [(4, 2), (4, 2), (4, 2), (4, 1), (4, 1)];
        assert_eq!(receptive_field(&s).unwrap(), (70, 8));
    }

    #[test]
    fn implemented_discriminator_is_142() {
        // 4 → 10 → 22 → 46 → 94 → 142
        let s = [(4, 2), (4, 2), (4, 2), (4, 2), (4, 1), (4, 1)];
        assert_eq!(receptive_field(&s).unwrap(), (142, 16));
    }

    #[test]
    fn invalid_schedules() {
        assert!(receptive_field(&[]).is_err());
        assert!(receptive_field(&[(0, 1)]).is_err());
        assert!(receptive_field(&[(4, 0)]).is_err());
    }
}

#[cfg(test)]
mod perturbation {
    use super::receptive_field;
    use crate::nn::{seeded_rng, Conv2d, Tensor};

    /// Brute-force receptive field of the central output unit of an all-ones
    /// linear conv stack: the span of input pixels along one axis whose
    /// perturbation changes that unit.
    fn measured(schedule: &[(usize, usize)], size: usize) -> usize {
        let mut rng = seeded_rng(0);
        let mut convs: Vec<Conv2d> = schedule
            .iter()
            .map(|&(k, s)| {
                let mut c = Conv2d::new(1, 1, k, s, &mut rng);
                c.weight.value_mut().fill(1.0);
                c
            })
            .collect();
        let mut run = |x: &Tensor| {
            let mut h = x.clone();
            for c in &mut convs {
                h = c.forward(&h, false).unwrap();
            }
            h
        };
        let base = Tensor::full([1, 1, size, size], 1.0);
        let out = run(&base);
        let (oh, ow) = (out.height() / 2, out.width() / 2);
        let probe = oh * out.width() + ow;
        let changed: Vec<usize> = (0..size)
            .filter(|&col| {
                let mut x = base.clone();
                x.data_mut()[(size / 2) * size + col] += 1.0;
                run(&x).data()[probe] != out.data()[probe]
            })
            .collect();
        changed.last().unwrap() - changed.first().unwrap() + 1
    }

    #[test]
    fn recurrence_matches_pixel_perturbation() {
        let schedules: [&[(usize, usize)]; 4] = [
            &[(4, 1)],
            &[(3, 2), (3, 1)],
            &[(4, 2), (4, 2), (4, 1)],
            &[(4, 2), (4, 2), (4, 2), (4, 1), (4, 1)],
        ];
        for schedule in schedules {
            let (rf, _) = receptive_field(schedule).unwrap();
            assert_eq!(measured(schedule, 256), rf, "{schedule:?}");
        }
    }
}
