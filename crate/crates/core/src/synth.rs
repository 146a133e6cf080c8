//! Synthetic classification data with a known ground-truth model.
//!
//! The generator draws a `K x d` weight matrix with a few non-zero entries
//! per class row, then for each example draws a sparse feature vector and
//! samples the label from the softmax of the true logits. Because labels are
//! sampled (not argmaxed), the dataset has an irreducible error floor and a
//! well-defined best achievable accuracy; the returned truth model makes
//! that floor measurable with the ordinary evaluation machinery.
//!
//! Sparse weight rows give each class a small set of indicative features,
//! the shape that lets a bucketed ensemble compete with a full per-class
//! model: the evidence for a union of classes stays close to linear in the
//! features. Dense rows (`weight_nnz = dim`) are available for harder,
//! less structured problems.
//!
//! Everything is a pure function of the config: weights, feature indices,
//! feature values, and labels come from four independent ChaCha streams of
//! one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, LabelMap, SparseVector};
use crate::error::{Error, Result};
use crate::hash::HashSpec;
use crate::model::{MachConfig, MachModel};
use crate::scalar::Scalar;
use crate::softmax::SoftmaxModel;

/// Shape and sharpness of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of classes `K`.
    pub num_classes: usize,
    /// Feature dimension `d`.
    pub dim: usize,
    /// Number of examples `N`.
    pub examples: usize,
    /// Seed for all randomness.
    pub seed: u64,
    /// Non-zero features per example.
    pub nnz: usize,
    /// Non-zero weights per class row; `dim` makes the truth dense.
    pub weight_nnz: usize,
    /// Standard deviation of the non-zero true weights. Larger values
    /// sharpen the true class posteriors, raising the best achievable
    /// accuracy.
    pub scale: f64,
}

impl SynthConfig {
    /// A config with sharpness defaults calibrated for desk-scale shapes
    /// (dimensions in the tens): 8 non-zero features per example, 4
    /// indicative features per class, weight scale 3.
    pub fn new(num_classes: usize, dim: usize, examples: usize, seed: u64) -> Self {
        SynthConfig {
            num_classes,
            dim,
            examples,
            seed,
            nnz: dim.min(8),
            weight_nnz: dim.min(4),
            scale: 3.0,
        }
    }

    /// Checks that the shape is generable.
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "synthetic data needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "dimension must lie in [1, {}], got {}",
                u32::MAX,
                self.dim
            )));
        }
        if self.examples == 0 {
            return Err(Error::InvalidParameter(
                "synthetic data needs at least one example".into(),
            ));
        }
        if self.nnz == 0 || self.nnz > self.dim {
            return Err(Error::InvalidParameter(format!(
                "non-zeros per example must lie in [1, {}], got {}",
                self.dim, self.nnz
            )));
        }
        if self.weight_nnz == 0 || self.weight_nnz > self.dim {
            return Err(Error::InvalidParameter(format!(
                "non-zeros per weight row must lie in [1, {}], got {}",
                self.dim, self.weight_nnz
            )));
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weight scale must be finite and positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates a dataset and the ground-truth model that labeled it.
///
/// The truth is returned as a single-member identity-hashed ensemble
/// (`B = K, R = 1`), so its accuracy on the data (the best any classifier
/// can hope to approach) is measurable with [`crate::eval::evaluate`].
pub fn generate<F: Scalar>(cfg: &SynthConfig) -> Result<(Dataset<F>, MachModel<F>)> {
    cfg.validate()?;
    let (k, d, n) = (cfg.num_classes, cfg.dim, cfg.examples);

    let normal = StandardNormal;
    let mut weight_rng = stream_rng(cfg.seed, 0);
    let mut truth_weights = vec![0.0f64; k * d];
    for row in truth_weights.chunks_exact_mut(d) {
        for idx in rand::seq::index::sample(&mut weight_rng, d, cfg.weight_nnz) {
            let z: f64 = normal.sample(&mut weight_rng);
            row[idx] = z * cfg.scale;
        }
    }

    let mut index_rng = stream_rng(cfg.seed, 1);
    let mut value_rng = stream_rng(cfg.seed, 2);
    let mut label_rng = stream_rng(cfg.seed, 3);

    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut logits = vec![0.0f64; k];
    for _ in 0..n {
        let indices = rand::seq::index::sample(&mut index_rng, d, cfg.nnz);
        let mut pairs: Vec<(u32, f64)> = indices
            .into_iter()
            .map(|idx| {
                let v: f64 = normal.sample(&mut value_rng);
                (idx as u32, v)
            })
            .collect();
        pairs.sort_by_key(|&(i, _)| i);

        for (c, slot) in logits.iter_mut().enumerate() {
            let row = &truth_weights[c * d..(c + 1) * d];
            *slot = pairs.iter().map(|&(i, v)| row[i as usize] * v).sum();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for z in logits.iter_mut() {
            *z = (*z - max).exp();
            total += *z;
        }
        let u: f64 = rand::Rng::random::<f64>(&mut label_rng) * total;
        let mut cumulative = 0.0;
        let mut y = k - 1;
        for (c, &mass) in logits.iter().enumerate() {
            cumulative += mass;
            if u < cumulative {
                y = c;
                break;
            }
        }

        let x = SparseVector::from_pairs(pairs.into_iter().map(|(i, v)| (i, F::cast(v))))?;
        features.push(x);
        labels.push(y as u32);
    }

    let dataset = Dataset::new(features, labels, LabelMap::identity(k), d, k)?;

    let truth_sub = SoftmaxModel::from_parts(
        truth_weights.into_iter().map(F::cast).collect(),
        vec![F::zero(); k],
        k,
        d,
    )?;
    let truth_config = MachConfig {
        num_classes: k,
        buckets: k,
        reps: 1,
        seed: cfg.seed,
        hash_kind: crate::hash::HashKind::CarterWegman,
        identity_hash: true,
        train: Default::default(),
    };
    let spec = HashSpec::identity(k as u64, k as u64)?;
    let truth = MachModel::from_parts(truth_config, vec![spec], vec![truth_sub], LabelMap::identity(k))?;
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use crate::model::EstimatorKind;

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let cfg = SynthConfig::new(10, 30, 50, 7);
        let (ds1, truth1) = generate::<f64>(&cfg).unwrap();
        let (ds2, truth2) = generate::<f64>(&cfg).unwrap();
        assert_eq!(ds1, ds2);
        assert_eq!(truth1, truth2);

        let other = SynthConfig::new(10, 30, 50, 8);
        let (ds3, _) = generate::<f64>(&other).unwrap();
        assert_ne!(ds1, ds3);
    }

    #[test]
    fn generated_shapes_match_the_config() {
        let cfg = SynthConfig::new(5, 40, 25, 3);
        let (ds, truth) = generate::<f64>(&cfg).unwrap();
        assert_eq!(ds.len(), 25);
        assert_eq!(ds.dim(), 40);
        assert_eq!(ds.num_classes(), 5);
        for i in 0..ds.len() {
            assert_eq!(ds.feature(i).nnz(), cfg.nnz);
            assert!(ds.label(i) < 5);
        }
        assert_eq!(truth.num_classes(), 5);
        assert_eq!(truth.dim(), 40);
        assert_eq!(truth.config().reps, 1);
        for row in 0..5 {
            let nonzero = truth.sub_models()[0]
                .weight_row(row)
                .iter()
                .filter(|w| **w != 0.0)
                .count();
            assert_eq!(nonzero, cfg.weight_nnz);
        }
    }

    #[test]
    fn truth_model_scores_far_above_chance_on_its_own_data() {
        let cfg = SynthConfig::new(16, 64, 600, 11);
        let (ds, truth) = generate::<f64>(&cfg).unwrap();
        let report = evaluate(&truth, &ds, EstimatorKind::Unbiased).unwrap();
        let chance = 1.0 / 16.0;
        assert!(
            report.accuracy() > 6.0 * chance,
            "truth accuracy {} looks like noise",
            report.accuracy()
        );
    }

    #[test]
    fn labels_respect_the_sampled_posterior_roughly() {
        // With scale driven to near-determinism the sampled label must be
        // the argmax of the true logits almost always.
        let cfg = SynthConfig {
            scale: 50.0,
            ..SynthConfig::new(8, 32, 300, 5)
        };
        let (ds, truth) = generate::<f64>(&cfg).unwrap();
        let mut agree = 0;
        for i in 0..ds.len() {
            let pred = truth
                .predict_one(ds.feature(i), EstimatorKind::Unbiased)
                .unwrap();
            if pred.label == ds.original_label(i) {
                agree += 1;
            }
        }
        assert!(
            agree as f64 / ds.len() as f64 > 0.95,
            "only {agree}/300 labels match the near-deterministic truth"
        );
    }

    #[test]
    fn config_validation_rejects_degenerate_shapes() {
        assert!(SynthConfig::new(1, 10, 10, 0).validate().is_err());
        assert!(SynthConfig::new(5, 0, 10, 0).validate().is_err());
        assert!(SynthConfig::new(5, 10, 0, 0).validate().is_err());
        let mut bad_nnz = SynthConfig::new(5, 10, 10, 0);
        bad_nnz.nnz = 11;
        assert!(bad_nnz.validate().is_err());
        let mut bad_w = SynthConfig::new(5, 10, 10, 0);
        bad_w.weight_nnz = 0;
        assert!(bad_w.validate().is_err());
        let mut bad_scale = SynthConfig::new(5, 10, 10, 0);
        bad_scale.scale = 0.0;
        assert!(bad_scale.validate().is_err());
    }

    #[test]
    fn libsvm_round_trip_preserves_the_dataset() {
        use crate::data::{load_libsvm, save_libsvm, LoadOptions};
        let cfg = SynthConfig::new(6, 20, 40, 13);
        let (ds, _) = generate::<f64>(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.svm");
        save_libsvm(&ds, &path).unwrap();
        let opts = LoadOptions {
            expected_dim: Some(20),
            expected_classes: Some(6),
            ..LoadOptions::default()
        };
        let loaded = load_libsvm::<f64>(&path, &opts).unwrap();
        assert_eq!(ds.features(), loaded.features(), "float text is round-trip exact");
        assert_eq!(ds.labels(), loaded.labels());
        assert_eq!(ds.num_classes(), loaded.num_classes());
    }
}
