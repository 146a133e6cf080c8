//! Planning and audit tools around the hashed ensemble's guarantees.
//!
//! Two classes are indistinguishable to an ensemble exactly when every hash
//! function sends them to the same bucket. For a 2-universal family that
//! happens with probability at most `(1/B)^R` per pair, so a union bound over
//! all `K*(K-1)/2 < K^2` pairs stays below a failure budget `delta` once
//!
//! ```text
//! R >= (2 ln K - ln delta) / ln B
//! ```
//!
//! [`plan_reps`] computes that minimum `R`, [`union_bound`] reports the bound
//! a given shape achieves, [`audit_distinguishability`] finds the colliding
//! pairs of a concrete hash family, and [`cost_report`] compares parameter
//! and inference budgets against a one-vs-all baseline.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hash::HashSpec;

fn check_plan_shape(num_classes: u64, buckets: u64) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "planning needs at least 2 classes, got {num_classes}"
        )));
    }
    if buckets < 2 {
        return Err(Error::InvalidParameter(format!(
            "planning needs at least 2 buckets, got {buckets}"
        )));
    }
    Ok(())
}

/// Smallest number of ensemble members `R` such that the union bound on any
/// two classes colliding under every hash stays at or below `delta`.
///
/// Returns `max(1, ceil((2 ln K - ln delta) / ln B))`. The ceiling is taken
/// with a `1e-9` shave so that shapes whose exact answer is an integer are
/// not bumped one step up by float rounding; an `R` short by that hairline
/// overshoots `delta` by a factor below `exp(1e-9 * ln B)`, which is noise.
pub fn plan_reps(num_classes: u64, buckets: u64, delta: f64) -> Result<u64> {
    check_plan_shape(num_classes, buckets)?;
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "failure budget must lie in (0, 1), got {delta}"
        )));
    }
    let k = num_classes as f64;
    let b = buckets as f64;
    let raw = (2.0 * k.ln() - delta.ln()) / b.ln();
    let reps = (raw - 1e-9).ceil().max(1.0);
    Ok(reps as u64)
}

/// The union bound `K^2 * (1/B)^R` on some pair of classes being
/// indistinguishable, evaluated in log space.
///
/// `K^2 / B^R` computed directly in floats can land a few ulps above the
/// mathematically exact value and spuriously exceed `delta`; the log form
/// keeps the comparison honest.
pub fn union_bound(num_classes: u64, buckets: u64, reps: u64) -> Result<f64> {
    check_plan_shape(num_classes, buckets)?;
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "the bound needs at least 1 member".into(),
        ));
    }
    let k = num_classes as f64;
    let b = buckets as f64;
    Ok((2.0 * k.ln() - reps as f64 * b.ln()).exp())
}

/// Finds every pair of classes that no hash function in the family separates.
///
/// Classes are grouped by their bucket signature (the vector of buckets they
/// map to across members); all pairs inside a group are returned, sorted
/// ascending. An empty result means every pair of classes is distinguishable
/// and the ensemble can, in principle, tell all `num_classes` apart.
pub fn audit_distinguishability(
    specs: &[HashSpec],
    num_classes: u64,
) -> Result<Vec<(u64, u64)>> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter(
            "an audit needs at least one hash function".into(),
        ));
    }
    if num_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "an audit needs at least 2 classes, got {num_classes}"
        )));
    }
    for spec in specs {
        spec.validate()?;
        if spec.universe() < num_classes {
            return Err(Error::ClassOutOfRange {
                class: num_classes - 1,
                universe: spec.universe(),
            });
        }
    }
    let mut groups: BTreeMap<Vec<u64>, Vec<u64>> = BTreeMap::new();
    for class in 0..num_classes {
        let signature: Vec<u64> = specs
            .iter()
            .map(|spec| spec.bucket_of(class).expect("class is inside the universe"))
            .collect();
        groups.entry(signature).or_default().push(class);
    }
    let mut pairs = Vec::new();
    for group in groups.values() {
        for (idx, &i) in group.iter().enumerate() {
            for &j in &group[idx + 1..] {
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// Parameter and inference cost of an ensemble shape next to the one-vs-all
/// baseline it replaces. All counts are exact; overflow is an error rather
/// than a wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// Classes `K`.
    pub num_classes: u64,
    /// Buckets per member `B`.
    pub buckets: u64,
    /// Members `R`.
    pub reps: u64,
    /// Feature dimension `d`.
    pub dim: u64,
    /// Ensemble weight floats: `B * R * d`.
    pub ensemble_weight_floats: u64,
    /// Ensemble bias floats: `B * R`.
    pub ensemble_bias_floats: u64,
    /// All ensemble floats: `B * R * (d + 1)`.
    pub ensemble_total_floats: u64,
    /// Multiply-accumulates to score one dense input: `R * B * d` for the
    /// member logits plus `K * R` to gather and combine bucket probabilities.
    pub ensemble_inference_madds: u64,
    /// One-vs-all weight floats: `K * d`.
    pub oaa_weight_floats: u64,
    /// One-vs-all bias floats: `K`.
    pub oaa_bias_floats: u64,
    /// All one-vs-all floats: `K * (d + 1)`.
    pub oaa_total_floats: u64,
    /// Multiply-accumulates for one dense one-vs-all scoring pass: `K * d`.
    pub oaa_inference_madds: u64,
    /// How many times fewer parameters the ensemble holds: `K / (B * R)`.
    pub parameter_reduction: f64,
}

impl CostReport {
    /// Ensemble parameter bytes at 8 bytes per float.
    pub fn ensemble_bytes(&self) -> u64 {
        self.ensemble_total_floats * 8
    }

    /// One-vs-all parameter bytes at 8 bytes per float.
    pub fn oaa_bytes(&self) -> u64 {
        self.oaa_total_floats * 8
    }
}

/// Computes a [`CostReport`] for the given shape with checked arithmetic.
pub fn cost_report(num_classes: u64, buckets: u64, reps: u64, dim: u64) -> Result<CostReport> {
    check_plan_shape(num_classes, buckets)?;
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "a cost report needs at least 1 member".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "a cost report needs a positive feature dimension".into(),
        ));
    }
    let mul = |a: u64, b: u64, what: &'static str| {
        a.checked_mul(b).ok_or(Error::Overflow(what))
    };
    let add = |a: u64, b: u64, what: &'static str| {
        a.checked_add(b).ok_or(Error::Overflow(what))
    };

    let bias = mul(buckets, reps, "ensemble bias floats")?;
    let weights = mul(bias, dim, "ensemble weight floats")?;
    let total = add(weights, bias, "ensemble total floats")?;
    let gather = mul(num_classes, reps, "ensemble gather ops")?;
    let inference = add(weights, gather, "ensemble inference ops")?;

    let oaa_weights = mul(num_classes, dim, "one-vs-all weight floats")?;
    let oaa_total = add(oaa_weights, num_classes, "one-vs-all total floats")?;

    Ok(CostReport {
        num_classes,
        buckets,
        reps,
        dim,
        ensemble_weight_floats: weights,
        ensemble_bias_floats: bias,
        ensemble_total_floats: total,
        ensemble_inference_madds: inference,
        oaa_weight_floats: oaa_weights,
        oaa_bias_floats: num_classes,
        oaa_total_floats: oaa_total,
        oaa_inference_madds: oaa_weights,
        parameter_reduction: num_classes as f64 / bias as f64,
    })
}
