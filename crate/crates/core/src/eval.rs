//! Accuracy measurement of trained ensembles on labeled datasets.
//!
//! Comparisons happen in original-label space: the model maps its winning
//! internal id back to an original label, the dataset supplies its own
//! original label, and the two must be equal. This keeps evaluation correct
//! even when the evaluation file observes a different subset of labels than
//! the training file did.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{EstimatorKind, MachModel};
use crate::scalar::Scalar;
use crate::softmax::argmax;

/// Outcome of evaluating one estimator on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalReport {
    /// Estimator the predictions were made with.
    pub estimator: EstimatorKind,
    /// Number of examples evaluated.
    pub total: usize,
    /// Number of examples whose predicted original label was exactly right.
    pub correct: usize,
}

impl EvalReport {
    /// Fraction of examples predicted correctly.
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

fn check_compatible<F: Scalar>(model: &MachModel<F>, ds: &Dataset<F>) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::InvalidParameter(
            "evaluation needs at least one example".into(),
        ));
    }
    if ds.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "evaluation data dimension vs model dimension",
            expected: model.dim(),
            got: ds.dim(),
        });
    }
    Ok(())
}

/// Top-1 accuracy of `model` on `ds` under one estimator.
pub fn evaluate<F: Scalar>(
    model: &MachModel<F>,
    ds: &Dataset<F>,
    estimator: EstimatorKind,
) -> Result<EvalReport> {
    check_compatible(model, ds)?;
    let mut correct = 0;
    let preds = model.predict(ds.features(), estimator)?;
    for (i, pred) in preds.iter().enumerate() {
        if pred.label == ds.original_label(i) {
            correct += 1;
        }
    }
    Ok(EvalReport {
        estimator,
        total: ds.len(),
        correct,
    })
}

/// Top-1 accuracy under every estimator, sharing one forward pass per
/// example across all three.
pub fn evaluate_all<F: Scalar>(model: &MachModel<F>, ds: &Dataset<F>) -> Result<Vec<EvalReport>> {
    check_compatible(model, ds)?;
    let table = model.bucket_table();
    let k = model.num_classes();
    let mut scores = vec![F::zero(); k];
    let mut correct = [0usize; 3];
    for i in 0..ds.len() {
        let meta = model.meta_probabilities(ds.feature(i))?;
        let truth = ds.original_label(i);
        for (e, est) in EstimatorKind::ALL.into_iter().enumerate() {
            model.scores_from_meta(&meta, &table, est, &mut scores);
            let winner = argmax(&scores).expect("an ensemble always has classes");
            let label = model
                .label_map()
                .original(winner)
                .expect("the label map covers every class");
            if label == truth {
                correct[e] += 1;
            }
        }
    }
    Ok(EstimatorKind::ALL
        .into_iter()
        .zip(correct)
        .map(|(estimator, correct)| EvalReport {
            estimator,
            total: ds.len(),
            correct,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelMap, SparseVector};
    use crate::hash::HashSpec;
    use crate::model::MachConfig;
    use crate::softmax::SoftmaxModel;

    /// K=4, B=2, single member: classes {0,1} share bucket 0, {2,3} share
    /// bucket 1, and bucket 0 always wins, so the prediction is always the
    /// original label of internal class 0.
    fn fixed_winner_model(originals: [i64; 4]) -> MachModel<f64> {
        let config = MachConfig::new(4, 2, 1);
        let spec = HashSpec::carter_wegman(16, 0, 31, 2, 4).unwrap();
        let bias: Vec<f64> = [0.7f64, 0.3].iter().map(|p| p.ln()).collect();
        let sub = SoftmaxModel::from_parts(vec![0.0; 2 * 3], bias, 2, 3).unwrap();
        let map = LabelMap::from_originals(originals);
        MachModel::from_parts(config, vec![spec], vec![sub], map).unwrap()
    }

    fn labeled_dataset(originals: &[i64]) -> Dataset<f64> {
        let features = originals
            .iter()
            .map(|_| SparseVector::from_pairs([(0u32, 1.0f64)]).unwrap())
            .collect();
        let map = LabelMap::from_originals(originals.iter().copied());
        let labels = originals
            .iter()
            .map(|&l| map.internal(l).unwrap() as u32)
            .collect();
        Dataset::new(features, labels, map, 3, originals.iter().collect::<std::collections::BTreeSet<_>>().len()).unwrap()
    }

    #[test]
    fn accuracy_counts_original_label_matches() {
        let model = fixed_winner_model([10, 20, 30, 40]);
        let ds = labeled_dataset(&[10, 10, 20, 30]);
        let report = evaluate(&model, &ds, EstimatorKind::Unbiased).unwrap();
        assert_eq!(report.total, 4);
        assert_eq!(report.correct, 2);
        assert_eq!(report.accuracy(), 0.5);
    }

    #[test]
    fn evaluation_works_when_test_labels_are_a_subset() {
        let model = fixed_winner_model([10, 20, 30, 40]);
        // The test file observes only {20, 30}: its internal ids differ from
        // the model's, but original-label comparison stays correct.
        let ds = labeled_dataset(&[20, 30, 30]);
        let report = evaluate(&model, &ds, EstimatorKind::Unbiased).unwrap();
        assert_eq!(report.correct, 0);

        let ds = labeled_dataset(&[10, 30, 10]);
        let report = evaluate(&model, &ds, EstimatorKind::Unbiased).unwrap();
        assert_eq!(report.correct, 2);
    }

    #[test]
    fn evaluate_all_matches_individual_runs() {
        let model = fixed_winner_model([0, 1, 2, 3]);
        let ds = labeled_dataset(&[0, 1, 2, 3, 0, 0]);
        let all = evaluate_all(&model, &ds).unwrap();
        assert_eq!(all.len(), 3);
        for report in all {
            let single = evaluate(&model, &ds, report.estimator).unwrap();
            assert_eq!(report, single);
        }
    }

    #[test]
    fn incompatible_inputs_are_rejected() {
        let model = fixed_winner_model([0, 1, 2, 3]);
        let empty = Dataset::<f64>::new(vec![], vec![], LabelMap::identity(0), 3, 0).unwrap();
        assert!(evaluate(&model, &empty, EstimatorKind::Min).is_err());

        let features = vec![SparseVector::from_pairs([(0u32, 1.0f64)]).unwrap()];
        let wrong_dim =
            Dataset::new(features, vec![0], LabelMap::identity(1), 5, 1).unwrap();
        assert!(evaluate(&model, &wrong_dim, EstimatorKind::Min).is_err());
        assert!(evaluate_all(&model, &wrong_dim).is_err());
    }
}
