//! Sparse feature vectors, labeled datasets, and the libsvm text format.
//!
//! Labels in source files may be arbitrary integers; a [`LabelMap`] assigns
//! them dense internal ids `0..K` in sorted order and travels with every
//! trained model, so predictions always report the original labels.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hash::HashSpec;
use crate::scalar::Scalar;

/// A sparse feature vector: strictly increasing indices with finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<F> {
    indices: Vec<u32>,
    values: Vec<F>,
}

impl<F: Scalar> SparseVector<F> {
    /// Builds a vector from parallel slices already in strictly increasing
    /// index order.
    pub fn new(indices: Vec<u32>, values: Vec<F>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "sparse vector indices vs values",
                expected: indices.len(),
                got: values.len(),
            });
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "sparse vector indices must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "sparse vector values must be finite".into(),
            ));
        }
        Ok(SparseVector { indices, values })
    }

    /// Builds a vector from unordered `(index, value)` pairs, summing values
    /// that share an index.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, F)>) -> Result<Self> {
        let mut pairs: Vec<(u32, F)> = pairs.into_iter().collect();
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<F> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().expect("values parallel to indices") += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVector::new(indices, values)
    }

    /// The vector with no stored entries.
    pub fn empty() -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Stored indices, strictly increasing.
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Stored values, parallel to [`Self::indices`].
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Iterates over `(index, value)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, F)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest stored index, if any entry exists.
    pub fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }

    /// Euclidean norm of the stored values.
    pub fn l2_norm(&self) -> F {
        self.values
            .iter()
            .map(|&v| v * v)
            .fold(F::zero(), |acc, v| acc + v)
            .sqrt()
    }

    /// Scales the vector to unit Euclidean norm; zero vectors are left alone.
    pub fn l2_normalize(&mut self) {
        let norm = self.l2_norm();
        if norm > F::zero() {
            for v in &mut self.values {
                *v = *v / norm;
            }
        }
    }
}

/// Bijection between original integer labels and dense internal ids.
///
/// Internal ids are assigned in increasing original-label order, so the map
/// is a pure function of the label set and identical across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    originals: Vec<i64>,
}

impl LabelMap {
    /// Builds a map from any collection of original labels (duplicates fine).
    pub fn from_originals(labels: impl IntoIterator<Item = i64>) -> Self {
        let set: BTreeSet<i64> = labels.into_iter().collect();
        LabelMap {
            originals: set.into_iter().collect(),
        }
    }

    /// Builds the map whose original labels are already `0..k`.
    pub fn identity(k: usize) -> Self {
        LabelMap {
            originals: (0..k as i64).collect(),
        }
    }

    /// Number of distinct labels.
    pub fn len(&self) -> usize {
        self.originals.len()
    }

    /// True when the map holds no labels.
    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    /// Original label for an internal id.
    pub fn original(&self, internal: usize) -> Option<i64> {
        self.originals.get(internal).copied()
    }

    /// Internal id for an original label.
    pub fn internal(&self, original: i64) -> Option<usize> {
        self.originals.binary_search(&original).ok()
    }

    /// All original labels in internal-id order.
    pub fn originals(&self) -> &[i64] {
        &self.originals
    }
}

/// A labeled sparse dataset with consistent dimensions.
///
/// `labels` hold internal ids below `num_classes`; the [`LabelMap`] recovers
/// the original labels. `num_classes` may exceed the number of observed
/// labels when the caller knows the true class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    features: Vec<SparseVector<F>>,
    labels: Vec<u32>,
    label_map: LabelMap,
    dim: usize,
    num_classes: usize,
}

impl<F: Scalar> Dataset<F> {
    /// Assembles a dataset, checking that every feature index is below `dim`
    /// and every label below `num_classes`.
    pub fn new(
        features: Vec<SparseVector<F>>,
        labels: Vec<u32>,
        label_map: LabelMap,
        dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "dataset features vs labels",
                expected: features.len(),
                got: labels.len(),
            });
        }
        if label_map.len() > num_classes {
            return Err(Error::InvalidParameter(format!(
                "label map holds {} distinct labels but the dataset claims {} classes",
                label_map.len(),
                num_classes
            )));
        }
        for x in &features {
            if let Some(max) = x.max_index() {
                if max as usize >= dim {
                    return Err(Error::FeatureOutOfRange {
                        index: max as u64,
                        dim: dim as u64,
                    });
                }
            }
        }
        for &y in &labels {
            if y as usize >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: y as u64,
                    classes: num_classes as u64,
                });
            }
        }
        Ok(Dataset {
            features,
            labels,
            label_map,
            dim,
            num_classes,
        })
    }

    /// Number of examples.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    /// True when the dataset holds no examples.
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of classes `K` (internal ids run `0..K`).
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Map between original labels and internal ids.
    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    /// All feature vectors.
    pub fn features(&self) -> &[SparseVector<F>] {
        &self.features
    }

    /// Feature vector of one example.
    pub fn feature(&self, i: usize) -> &SparseVector<F> {
        &self.features[i]
    }

    /// Internal label ids, parallel to [`Self::features`].
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Internal label id of one example.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Original label of one example.
    pub fn original_label(&self, i: usize) -> i64 {
        self.label_map
            .original(self.labels[i] as usize)
            .expect("dataset labels stay inside the label map")
    }

    /// Scales every example to unit Euclidean norm in place.
    pub fn l2_normalize(&mut self) {
        for x in &mut self.features {
            x.l2_normalize();
        }
    }
}

/// Knobs for [`load_libsvm`] / [`read_libsvm`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Fix the feature dimension instead of inferring `max index + 1`;
    /// any index at or above this is an error.
    pub expected_dim: Option<usize>,
    /// Fix the class count instead of using the number of distinct labels;
    /// more distinct labels than this is an error.
    pub expected_classes: Option<usize>,
    /// Treat stored feature indices as 1-based and shift them down.
    pub one_based: bool,
}

/// Reads a dataset in libsvm text format from a file.
///
/// Each non-empty line is `label index:value index:value ...` with
/// whitespace-separated tokens; `#` starts a comment that runs to the end of
/// the line. Labels are integers (any sign), indices are non-negative
/// integers, and values are floats. Repeated indices on one line are summed.
/// An empty file yields a valid empty dataset.
pub fn load_libsvm<F: Scalar>(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset<F>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_libsvm(BufReader::new(file), &path.display().to_string(), opts)
}

/// Reads libsvm text from any buffered reader; `source_name` labels parse
/// errors (a file path, `"stdin"`, ...).
pub fn read_libsvm<F: Scalar>(
    reader: impl BufRead,
    source_name: &str,
    opts: &LoadOptions,
) -> Result<Dataset<F>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };

    let mut raw_labels: Vec<i64> = Vec::new();
    let mut features: Vec<SparseVector<F>> = Vec::new();
    let mut max_index: Option<u32> = None;

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let text = match line.split_once('#') {
            Some((before, _)) => before,
            None => line.as_str(),
        };
        let mut tokens = text.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: i64 = label_tok
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid label `{label_tok}`")))?;

        let mut pairs: Vec<(u32, F)> = Vec::new();
        for tok in tokens {
            let Some((idx_tok, val_tok)) = tok.split_once(':') else {
                return Err(parse_err(
                    line_no,
                    format!("expected `index:value`, found `{tok}`"),
                ));
            };
            let raw_idx: u64 = idx_tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid feature index `{idx_tok}`")))?;
            let idx = if opts.one_based {
                raw_idx
                    .checked_sub(1)
                    .ok_or_else(|| parse_err(line_no, "index 0 in 1-based input".into()))?
            } else {
                raw_idx
            };
            let idx = u32::try_from(idx).map_err(|_| {
                parse_err(line_no, format!("feature index {idx} exceeds u32 range"))
            })?;
            let val: f64 = val_tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid feature value `{val_tok}`")))?;
            if !val.is_finite() {
                return Err(parse_err(line_no, format!("non-finite feature value `{val_tok}`")));
            }
            if let Some(dim) = opts.expected_dim {
                if idx as usize >= dim {
                    return Err(parse_err(
                        line_no,
                        format!("feature index {idx} is outside dimension {dim}"),
                    ));
                }
            }
            pairs.push((idx, F::cast(val)));
        }
        let x = SparseVector::from_pairs(pairs)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        max_index = match (max_index, x.max_index()) {
            (Some(m), Some(n)) => Some(m.max(n)),
            (m, n) => m.or(n),
        };
        raw_labels.push(label);
        features.push(x);
    }

    let label_map = LabelMap::from_originals(raw_labels.iter().copied());
    if let Some(k) = opts.expected_classes {
        if label_map.len() > k {
            return Err(Error::InvalidParameter(format!(
                "{source_name} holds {} distinct labels but only {k} classes were expected",
                label_map.len()
            )));
        }
    }
    let num_classes = opts.expected_classes.unwrap_or(label_map.len());
    let dim = opts
        .expected_dim
        .unwrap_or(max_index.map_or(0, |m| m as usize + 1));
    let labels = raw_labels
        .iter()
        .map(|&l| {
            label_map
                .internal(l)
                .expect("label map was built from these labels") as u32
        })
        .collect();
    Dataset::new(features, labels, label_map, dim, num_classes)
}

/// Writes a dataset back out in libsvm text format with original labels.
pub fn save_libsvm<F: Scalar>(ds: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_libsvm(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes a dataset in libsvm text format to any writer.
pub fn write_libsvm<F: Scalar>(ds: &Dataset<F>, mut w: impl Write) -> Result<()> {
    for i in 0..ds.len() {
        write!(w, "{}", ds.original_label(i))?;
        for (idx, val) in ds.feature(i).iter() {
            write!(w, " {}:{}", idx, val)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Deterministic permutation of `0..n` for one training epoch.
///
/// Keyed by `(seed, epoch)` through independent ChaCha streams, so epochs
/// reshuffle differently while the whole schedule stays reproducible.
pub fn shuffled_indices(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order
}

/// Lazy view of a dataset's labels folded through one hash function.
///
/// Construction is O(1); each access hashes one internal label id on the fly,
/// so `R` ensemble members can share one dataset without materializing `R`
/// relabeled copies.
#[derive(Debug, Clone, Copy)]
pub struct HashedLabels<'a, F> {
    dataset: &'a Dataset<F>,
    spec: &'a HashSpec,
}

/// Builds a [`HashedLabels`] view, checking that the hash function's universe
/// covers every internal label id the dataset can produce.
pub fn hashed_label_view<'a, F: Scalar>(
    dataset: &'a Dataset<F>,
    spec: &'a HashSpec,
) -> Result<HashedLabels<'a, F>> {
    if (dataset.num_classes() as u64) > spec.universe() {
        return Err(Error::InvalidParameter(format!(
            "hash universe {} does not cover {} classes",
            spec.universe(),
            dataset.num_classes()
        )));
    }
    Ok(HashedLabels { dataset, spec })
}

impl<F: Scalar> HashedLabels<'_, F> {
    /// Bucket id of example `i`'s label.
    pub fn get(&self, i: usize) -> usize {
        self.spec.bucket_unchecked(self.dataset.labels()[i] as u64) as usize
    }

    /// Number of examples in the underlying dataset.
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    /// True when the underlying dataset is empty.
    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    /// Number of buckets labels are folded into.
    pub fn buckets(&self) -> usize {
        self.spec.buckets() as usize
    }
}
