//! Synthetic Gaussian-blob classification data, the desk-scale stand-in for
//! image datasets.

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

/// Gaussian blobs: class `c` is centered at a deterministic unit direction
/// scaled by `class_separation`, with isotropic noise of `noise_sigma`.
/// Samples are ordered class-major and fully determined by `seed`.
pub fn synth_blobs(
    num_classes: usize,
    samples_per_class: usize,
    feature_dim: usize,
    class_separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || samples_per_class == 0 || feature_dim == 0 {
        return Err(Error::InvalidConfig(
            "blob counts and feature_dim must be positive".into(),
        ));
    }
    if noise_sigma < 0.0 || class_separation < 0.0 {
        return Err(Error::InvalidConfig(
            "blob separation and sigma must be >= 0".into(),
        ));
    }

    let mut centers = Vec::with_capacity(num_classes);
    let mut center_rng = stream(seed, &[1]);
    for _ in 0..num_classes {
        let mut dir: Vec<f64> = (0..feature_dim)
            .map(|_| center_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            dir[0] = 1.0;
        } else {
            dir.iter_mut().for_each(|v| *v /= norm);
        }
        centers.push(dir.iter().map(|v| v * class_separation).collect::<Vec<f64>>());
    }

    let total = num_classes * samples_per_class;
    let mut inputs = Vec::with_capacity(total * feature_dim);
    let mut labels = Vec::with_capacity(total);
    for (c, center) in centers.iter().enumerate() {
        let mut rng = stream(seed, &[2, c as u64]);
        for _ in 0..samples_per_class {
            for &cv in center {
                let noise: f64 = rng.sample(StandardNormal);
                inputs.push(cv + noise_sigma * noise);
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(inputs, feature_dim, labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_collapses_classes_to_centers() {
        let ds = synth_blobs(3, 4, 5, 2.0, 0.0, 9).unwrap();
        for c in 0..3 {
            let first = ds.row(c * 4).to_vec();
            let norm: f64 = first.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 2.0).abs() < 1e-12);
            for s in 1..4 {
                assert_eq!(ds.row(c * 4 + s), &first[..]);
            }
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synth_blobs(4, 10, 8, 1.5, 0.7, 123).unwrap();
        let b = synth_blobs(4, 10, 8, 1.5, 0.7, 123).unwrap();
        assert_eq!(a, b);
        let c = synth_blobs(4, 10, 8, 1.5, 0.7, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn well_separated_blobs_are_learnable() {
        use crate::neural::{
            adam_step, cross_entropy_loss_and_grad, evaluate_accuracy, init_params, AdamState,
            Batch, MlpSpec,
        };
        let ds = synth_blobs(4, 30, 10, 8.0, 0.5, 5).unwrap();
        let mut inputs = Vec::new();
        for i in 0..ds.len() {
            inputs.extend_from_slice(ds.row(i));
        }
        let batch = Batch::new(inputs, 10, ds.labels().to_vec()).unwrap();
        let spec = MlpSpec::new(vec![10, 16, 4]).unwrap();
        let mut params = init_params(&spec, 1);
        let mut adam = AdamState::new(spec.param_dim(), 0.01);
        for _ in 0..150 {
            let (_, grad) = cross_entropy_loss_and_grad(&params, &spec, &batch).unwrap();
            adam_step(&mut adam, &mut params, &grad).unwrap();
        }
        let acc = evaluate_accuracy(&params, &spec, &batch).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
    }
}
