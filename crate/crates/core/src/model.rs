//! The bucketed ensemble: `R` small softmax classifiers over hashed class
//! buckets, recombined into per-class scores at inference time.
//!
//! Training hashes the `K` class ids into `B` buckets `R` independent ways
//! and fits one `B`-class softmax per hash function. Inference runs the `R`
//! classifiers, looks up each candidate class's bucket probability under each
//! hash, and combines the `R` numbers with an [`EstimatorKind`]. The default
//! estimator is constructed so that, in expectation over the hash draw, it
//! returns exactly the true class probability.

use std::time::Instant;

use rayon::prelude::*;

use crate::data::{hashed_label_view, Dataset, LabelMap, SparseVector};
use crate::error::{Error, Result};
use crate::hash::{make_hash_family, HashKind, HashSpec, DEFAULT_PRIME};
use crate::scalar::Scalar;
use crate::softmax::{argmax, mean_loss, train as train_softmax, SoftmaxModel, TrainConfig};

/// Full description of an ensemble to train.
#[derive(Debug, Clone, PartialEq)]
pub struct MachConfig {
    /// Number of classes `K`.
    pub num_classes: usize,
    /// Buckets per ensemble member `B`.
    pub buckets: usize,
    /// Number of ensemble members `R`.
    pub reps: usize,
    /// Seed for drawing the hash family.
    pub seed: u64,
    /// Which 2-universal construction to draw from.
    pub hash_kind: HashKind,
    /// Use the identity mapping instead of random hashing (requires
    /// `buckets >= num_classes`). Every member then sees the original labels,
    /// which reduces one member to a plain `K`-class softmax baseline.
    pub identity_hash: bool,
    /// Hyperparameters shared by every member's softmax training run.
    pub train: TrainConfig,
}

impl MachConfig {
    /// A config with the given shape and default training hyperparameters.
    pub fn new(num_classes: usize, buckets: usize, reps: usize) -> Self {
        MachConfig {
            num_classes,
            buckets,
            reps,
            seed: 42,
            hash_kind: HashKind::CarterWegman,
            identity_hash: false,
            train: TrainConfig::default(),
        }
    }

    /// Checks shape and hyperparameter invariants.
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "an ensemble needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.buckets < 2 {
            return Err(Error::InvalidParameter(format!(
                "an ensemble needs at least 2 buckets, got {}",
                self.buckets
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter(
                "an ensemble needs at least 1 member".into(),
            ));
        }
        if self.identity_hash && self.buckets < self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "identity hashing needs buckets >= classes, got {} < {}",
                self.buckets, self.num_classes
            )));
        }
        match self.hash_kind {
            HashKind::CarterWegman => {
                if self.num_classes as u64 >= DEFAULT_PRIME {
                    return Err(Error::InvalidParameter(format!(
                        "class count {} does not fit under the hash modulus",
                        self.num_classes
                    )));
                }
            }
            HashKind::OddMultiplier => {
                if !self.buckets.is_power_of_two() {
                    return Err(Error::InvalidParameter(format!(
                        "bucket count {} must be a power of two for the odd-multiplier construction",
                        self.buckets
                    )));
                }
            }
        }
        self.train.validate()
    }
}

/// How the `R` per-member bucket probabilities of one class are reduced to a
/// single score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// `B/(B-1) * (mean - 1/B)`: the debiased average whose expectation over
    /// the hash draw equals the true class probability. Can go negative when
    /// a class's buckets are quieter than uniform.
    Unbiased,
    /// Minimum of the `R` probabilities: the tightest of the upper bounds,
    /// since a class can never be more probable than any bucket holding it.
    Min,
    /// Median of the `R` probabilities (mean of the middle two when `R` is
    /// even): robust to a few noisy members.
    Median,
}

impl EstimatorKind {
    /// Every estimator, in a stable reporting order.
    pub const ALL: [EstimatorKind; 3] =
        [EstimatorKind::Unbiased, EstimatorKind::Min, EstimatorKind::Median];

    /// Stable lowercase name, also accepted by `FromStr`.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Unbiased => "unbiased",
            EstimatorKind::Min => "min",
            EstimatorKind::Median => "median",
        }
    }

    /// Reduces one class's gathered bucket probabilities (one per member) to
    /// a score. `buckets` is the `B` the probabilities were computed over.
    pub fn combine<F: Scalar>(self, gathered: &[F], buckets: usize) -> F {
        debug_assert!(!gathered.is_empty());
        debug_assert!(buckets >= 2);
        match self {
            EstimatorKind::Unbiased => {
                let reps = F::cast_usize(gathered.len());
                let b = F::cast_usize(buckets);
                let mean = gathered.iter().copied().sum::<F>() / reps;
                b / (b - F::one()) * (mean - F::one() / b)
            }
            EstimatorKind::Min => gathered
                .iter()
                .copied()
                .fold(F::infinity(), |a, v| if v < a { v } else { a }),
            EstimatorKind::Median => {
                let mut sorted = gathered.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("probabilities are finite"));
                let n = sorted.len();
                if n % 2 == 1 {
                    sorted[n / 2]
                } else {
                    (sorted[n / 2 - 1] + sorted[n / 2]) / F::cast(2.0)
                }
            }
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(EstimatorKind::Unbiased),
            "min" => Ok(EstimatorKind::Min),
            "median" => Ok(EstimatorKind::Median),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator `{other}` (expected unbiased, min, or median)"
            ))),
        }
    }
}

/// The `R x B` bucket-probability matrix one input induces across members.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaProbs<F> {
    rows: Vec<F>,
    reps: usize,
    buckets: usize,
}

impl<F: Scalar> MetaProbs<F> {
    /// Assembles the matrix from per-member probability rows, checking that
    /// each row has the same width and sums to 1 up to float rounding.
    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter(
                "meta probabilities need at least one row".into(),
            ));
        }
        let buckets = rows[0].len();
        if buckets == 0 {
            return Err(Error::InvalidParameter(
                "meta probability rows cannot be empty".into(),
            ));
        }
        let tolerance = F::cast(1e-6);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != buckets {
                return Err(Error::DimensionMismatch {
                    what: "meta probability row",
                    expected: buckets,
                    got: row.len(),
                });
            }
            let sum = row.iter().copied().sum::<F>();
            if (sum - F::one()).abs() > tolerance {
                return Err(Error::InvalidParameter(format!(
                    "meta probability row {j} sums to {sum}, not 1"
                )));
            }
        }
        let reps = rows.len();
        Ok(MetaProbs {
            rows: rows.into_iter().flatten().collect(),
            reps,
            buckets,
        })
    }

    /// Number of members `R`.
    pub fn reps(&self) -> usize {
        self.reps
    }

    /// Number of buckets `B`.
    pub fn buckets(&self) -> usize {
        self.buckets
    }

    /// Member `j`'s bucket probabilities.
    pub fn row(&self, j: usize) -> &[F] {
        &self.rows[j * self.buckets..(j + 1) * self.buckets]
    }
}

/// How one ensemble member's training went.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberReport {
    /// Position of the member in the ensemble.
    pub index: usize,
    /// Wall-clock spent fitting this member.
    pub wall_ms: u128,
    /// Mean cross-entropy of the fitted member over the training set.
    pub final_loss: f64,
}

/// One ranked prediction: an original label and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<F> {
    /// Original (pre-mapping) class label.
    pub label: i64,
    /// Score under the estimator that produced this prediction.
    pub score: F,
}

/// A trained ensemble, ready for scoring, prediction, and persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct MachModel<F> {
    config: MachConfig,
    specs: Vec<HashSpec>,
    models: Vec<SoftmaxModel<F>>,
    label_map: LabelMap,
}

impl<F: Scalar> MachModel<F> {
    /// Trains an ensemble sequentially. See [`MachModel::train_with_workers`].
    pub fn train(ds: &Dataset<F>, cfg: MachConfig) -> Result<Self> {
        MachModel::train_with_workers(ds, cfg, 1)
    }

    /// Trains an ensemble with up to `workers` members training concurrently.
    ///
    /// Members are independent deterministic jobs, so the result is
    /// bit-identical for every worker count; `workers` only changes the
    /// wall-clock. The dataset must carry a label for every one of
    /// `cfg.num_classes` classes (unobserved classes cannot be trained), and
    /// the dataset's class count must match the config.
    pub fn train_with_workers(ds: &Dataset<F>, cfg: MachConfig, workers: usize) -> Result<Self> {
        Ok(MachModel::train_reporting(ds, cfg, workers)?.0)
    }

    /// [`MachModel::train_with_workers`] plus a per-member training report.
    pub fn train_reporting(
        ds: &Dataset<F>,
        cfg: MachConfig,
        workers: usize,
    ) -> Result<(Self, Vec<MemberReport>)> {
        cfg.validate()?;
        if workers == 0 {
            return Err(Error::InvalidParameter(
                "training needs at least one worker".into(),
            ));
        }
        if ds.num_classes() != cfg.num_classes {
            return Err(Error::DimensionMismatch {
                what: "dataset classes vs ensemble classes",
                expected: cfg.num_classes,
                got: ds.num_classes(),
            });
        }
        if ds.label_map().len() != cfg.num_classes {
            return Err(Error::InvalidParameter(format!(
                "dataset observes {} of {} classes; every class needs at least one example",
                ds.label_map().len(),
                cfg.num_classes
            )));
        }
        if ds.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble training needs at least one example".into(),
            ));
        }
        let specs = if cfg.identity_hash {
            let spec = HashSpec::identity(cfg.num_classes as u64, cfg.buckets as u64)?;
            vec![spec; cfg.reps]
        } else {
            make_hash_family(
                cfg.num_classes as u64,
                cfg.buckets as u64,
                cfg.reps,
                cfg.seed,
                cfg.hash_kind,
            )?
        };

        let train_one = |(j, spec): (usize, &HashSpec)| -> Result<(SoftmaxModel<F>, MemberReport)> {
            let wrap = |e: Error| Error::SubModel {
                index: j,
                source: Box::new(e),
            };
            let view = hashed_label_view(ds, spec).map_err(wrap)?;
            let started = Instant::now();
            let model = train_softmax(ds, |i| view.get(i), cfg.buckets, &cfg.train).map_err(wrap)?;
            let wall_ms = started.elapsed().as_millis();
            let final_loss = mean_loss(&model, ds, |i| view.get(i)).map_err(wrap)?.as_f64();
            let report = MemberReport {
                index: j,
                wall_ms,
                final_loss,
            };
            Ok((model, report))
        };

        let trained: Vec<(SoftmaxModel<F>, MemberReport)> = if workers == 1 {
            specs
                .iter()
                .enumerate()
                .map(train_one)
                .collect::<Result<_>>()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.min(cfg.reps))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(train_one)
                    .collect::<Result<_>>()
            })?
        };

        let (models, reports) = trained.into_iter().unzip();
        let label_map = ds.label_map().clone();
        let model = MachModel::from_parts(cfg, specs, models, label_map)?;
        Ok((model, reports))
    }

    /// Reassembles an ensemble from parts, checking cross-component
    /// consistency. This is the gate every loaded model file passes through.
    pub fn from_parts(
        config: MachConfig,
        specs: Vec<HashSpec>,
        models: Vec<SoftmaxModel<F>>,
        label_map: LabelMap,
    ) -> Result<Self> {
        config.validate()?;
        if specs.len() != config.reps {
            return Err(Error::DimensionMismatch {
                what: "hash specs vs ensemble members",
                expected: config.reps,
                got: specs.len(),
            });
        }
        if models.len() != config.reps {
            return Err(Error::DimensionMismatch {
                what: "sub-models vs ensemble members",
                expected: config.reps,
                got: models.len(),
            });
        }
        if label_map.len() != config.num_classes {
            return Err(Error::DimensionMismatch {
                what: "label map vs ensemble classes",
                expected: config.num_classes,
                got: label_map.len(),
            });
        }
        let dim = models.first().map_or(0, |m| m.dim());
        for spec in &specs {
            spec.validate()?;
            if spec.universe() != config.num_classes as u64 {
                return Err(Error::DimensionMismatch {
                    what: "hash universe vs ensemble classes",
                    expected: config.num_classes,
                    got: spec.universe() as usize,
                });
            }
            if spec.buckets() != config.buckets as u64 {
                return Err(Error::DimensionMismatch {
                    what: "hash buckets vs ensemble buckets",
                    expected: config.buckets,
                    got: spec.buckets() as usize,
                });
            }
        }
        for model in &models {
            model.validate()?;
            if model.classes() != config.buckets {
                return Err(Error::DimensionMismatch {
                    what: "sub-model classes vs ensemble buckets",
                    expected: config.buckets,
                    got: model.classes(),
                });
            }
            if model.dim() != dim {
                return Err(Error::DimensionMismatch {
                    what: "sub-model feature dimension",
                    expected: dim,
                    got: model.dim(),
                });
            }
        }
        Ok(MachModel {
            config,
            specs,
            models,
            label_map,
        })
    }

    /// The configuration the ensemble was trained under.
    pub fn config(&self) -> &MachConfig {
        &self.config
    }

    /// Hash functions, one per member.
    pub fn hash_specs(&self) -> &[HashSpec] {
        &self.specs
    }

    /// Per-member softmax classifiers.
    pub fn sub_models(&self) -> &[SoftmaxModel<F>] {
        &self.models
    }

    /// Map between internal class ids and original labels.
    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    /// Input feature dimension.
    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, |m| m.dim())
    }

    /// Number of classes `K`.
    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Runs every member on `x` and collects the `R x B` probability matrix.
    pub fn meta_probabilities(&self, x: &SparseVector<F>) -> Result<MetaProbs<F>> {
        let mut rows = Vec::with_capacity(self.config.reps);
        for model in &self.models {
            rows.push(model.predict_proba(x)?);
        }
        MetaProbs::from_rows(rows)
    }

    /// Bucket of every class under every member: a flat `R x K` table with
    /// member `j`'s buckets at `table[j*K..(j+1)*K]`.
    pub fn bucket_table(&self) -> Vec<u32> {
        let k = self.config.num_classes;
        let mut table = Vec::with_capacity(self.config.reps * k);
        for spec in &self.specs {
            for i in 0..k {
                table.push(spec.bucket_unchecked(i as u64) as u32);
            }
        }
        table
    }

    /// Writes all `K` class scores for a precomputed probability matrix.
    pub(crate) fn scores_from_meta(
        &self,
        meta: &MetaProbs<F>,
        table: &[u32],
        estimator: EstimatorKind,
        out: &mut [F],
    ) {
        let k = self.config.num_classes;
        debug_assert_eq!(out.len(), k);
        debug_assert_eq!(table.len(), self.config.reps * k);
        let mut gathered = vec![F::zero(); self.config.reps];
        for (i, slot) in out.iter_mut().enumerate() {
            for j in 0..self.config.reps {
                gathered[j] = meta.row(j)[table[j * k + i] as usize];
            }
            *slot = estimator.combine(&gathered, self.config.buckets);
        }
    }

    /// Scores every class for one input under the chosen estimator.
    pub fn score_classes(&self, x: &SparseVector<F>, estimator: EstimatorKind) -> Result<Vec<F>> {
        let meta = self.meta_probabilities(x)?;
        let table = self.bucket_table();
        let mut out = vec![F::zero(); self.config.num_classes];
        self.scores_from_meta(&meta, &table, estimator, &mut out);
        Ok(out)
    }

    /// Debiased estimate of `P(class | x)` for one internal class id.
    ///
    /// Unbiased over the hash draw, not clamped: values slightly below zero
    /// or above one are legitimate outputs of the estimator.
    pub fn estimate_class_probability(&self, x: &SparseVector<F>, class: usize) -> Result<F> {
        if class >= self.config.num_classes {
            return Err(Error::ClassOutOfRange {
                class: class as u64,
                universe: self.config.num_classes as u64,
            });
        }
        let meta = self.meta_probabilities(x)?;
        let mut gathered = Vec::with_capacity(self.config.reps);
        for (j, spec) in self.specs.iter().enumerate() {
            let bucket = spec.bucket_unchecked(class as u64) as usize;
            gathered.push(meta.row(j)[bucket]);
        }
        Ok(EstimatorKind::Unbiased.combine(&gathered, self.config.buckets))
    }

    /// Predicts the best class for one input; ties go to the smallest
    /// internal id (equivalently, the smallest original label).
    pub fn predict_one(&self, x: &SparseVector<F>, estimator: EstimatorKind) -> Result<Prediction<F>> {
        let scores = self.score_classes(x, estimator)?;
        let winner = argmax(&scores).expect("an ensemble always has classes");
        Ok(Prediction {
            label: self
                .label_map
                .original(winner)
                .expect("the label map covers every class"),
            score: scores[winner],
        })
    }

    /// Predicts the best class for a batch of inputs.
    pub fn predict(
        &self,
        xs: &[SparseVector<F>],
        estimator: EstimatorKind,
    ) -> Result<Vec<Prediction<F>>> {
        let table = self.bucket_table();
        let mut scores = vec![F::zero(); self.config.num_classes];
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let meta = self.meta_probabilities(x)?;
            self.scores_from_meta(&meta, &table, estimator, &mut scores);
            let winner = argmax(&scores).expect("an ensemble always has classes");
            out.push(Prediction {
                label: self
                    .label_map
                    .original(winner)
                    .expect("the label map covers every class"),
                score: scores[winner],
            });
        }
        Ok(out)
    }

    /// The `k` best classes for one input, sorted by descending score with
    /// ties broken toward smaller internal ids. Returns fewer than `k`
    /// entries only when the ensemble has fewer than `k` classes.
    pub fn predict_topk(
        &self,
        x: &SparseVector<F>,
        estimator: EstimatorKind,
        k: usize,
    ) -> Result<Vec<Prediction<F>>> {
        let scores = self.score_classes(x, estimator)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| Prediction {
                label: self
                    .label_map
                    .original(i)
                    .expect("the label map covers every class"),
                score: scores[i],
            })
            .collect())
    }
}
