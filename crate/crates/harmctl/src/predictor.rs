//! Set-valued predictors: build prediction sets from classifier scores.
//!
//! Two predictors ship:
//!
//! - the threshold predictor: the set holds the top-ranked label plus every
//!   label whose score is at least `1 - lambda`, for `lambda in [0, 1]`;
//! - a SAPS-style predictor: labels get a nonconformity score combining the
//!   top softmax value with the label's rank, and the set holds the labels
//!   whose score is at most `lambda`, padded to be non-empty.
//!
//! Both produce sets that are nested in `lambda`, which makes every
//! downstream risk computation exact: each label has a critical threshold
//! `lambda*` such that it belongs to the set exactly when `lambda >= lambda*`.
//! Membership is always evaluated through that critical threshold, so the
//! equivalence holds bit-for-bit rather than up to float re-association.
//!
//! Ties in the score ranking break by ascending label index. Membership at
//! equality is inclusive.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScoreVector};
use crate::error::{Error, Result};
use crate::stats::fnv1a64;

/// Default SAPS ranking-weight grid.
pub const SAPS_W_GRID: [f64; 8] = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35];
/// Default upper end of the SAPS lambda domain.
pub const SAPS_LAMBDA_MAX: f64 = 6.25;
/// Default sweep step over the SAPS lambda domain.
pub const SAPS_LAMBDA_STEP: f64 = 0.00625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Threshold,
    Saps,
}

/// An ordered prediction set for one instance at one threshold.
///
/// `members` are in rank order (best label first) and never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub members: Vec<usize>,
    pub lambda: f64,
    pub predictor: PredictorKind,
}

impl PredictionSet {
    pub fn contains(&self, label: usize) -> bool {
        self.members.contains(&label)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Label indices sorted by descending score, ties by ascending index.
pub fn rank_labels(scores: &ScoreVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores
            .get(b)
            .total_cmp(&scores.get(a))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Threshold prediction set: top-ranked label plus every other label with
/// score at least `1 - lambda`, in rank order.
pub fn threshold_set(scores: &ScoreVector, lambda: f64) -> Result<PredictionSet> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda, 1.0));
    }
    let ranked = rank_labels(scores);
    let mut members = vec![ranked[0]];
    for &label in &ranked[1..] {
        // Same comparison as `threshold_critical_lambda`, so membership and
        // the critical threshold agree exactly.
        if 1.0 - scores.get(label) <= lambda {
            members.push(label);
        } else {
            break;
        }
    }
    Ok(PredictionSet { members, lambda, predictor: PredictorKind::Threshold })
}

/// Smallest lambda at which `label` enters the threshold set: 0 for the
/// top-ranked label, `1 - score` otherwise.
pub fn threshold_critical_lambda(scores: &ScoreVector, label: usize) -> f64 {
    let ranked = rank_labels(scores);
    if ranked[0] == label {
        0.0
    } else {
        1.0 - scores.get(label)
    }
}

/// Per-instance SAPS parameters. `u` is a single uniform draw shared by all
/// labels of the instance and all lambda values, which preserves nestedness.
#[derive(Debug, Clone, Copy)]
pub struct SapsParams {
    pub w: f64,
    pub u: f64,
    pub lambda_max: f64,
}

impl SapsParams {
    pub fn new(w: f64, u: f64, lambda_max: f64) -> Result<Self> {
        if w <= 0.0 {
            return Err(Error::ConfigInvalid(format!("SAPS weight w must be > 0, got {w}")));
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::ConfigInvalid(format!("SAPS draw u must lie in (0, 1), got {u}")));
        }
        if lambda_max < 1.0 {
            return Err(Error::ConfigInvalid(format!(
                "SAPS lambda_max must be >= 1, got {lambda_max}"
            )));
        }
        Ok(Self { w, u, lambda_max })
    }
}

/// SAPS nonconformity score of a label: `u * m_top` for the top-ranked label,
/// `m_top + (i - 2 + u) * w` for the rank-`i` label (1-based rank).
pub fn saps_score(scores: &ScoreVector, label: usize, params: &SapsParams) -> f64 {
    let ranked = rank_labels(scores);
    let top = ranked[0];
    let m_top = scores.get(top);
    if label == top {
        params.u * m_top
    } else {
        let rank = ranked.iter().position(|&l| l == label).unwrap() + 1;
        m_top + ((rank - 2) as f64 + params.u) * params.w
    }
}

/// SAPS prediction set: the `k` labels with smallest nonconformity score,
/// where `k` is one plus the number of non-top labels with score at most
/// `lambda`.
///
/// The nonconformity score is strictly increasing along the classifier
/// ranking, so the set is always a rank prefix and nested in `lambda`.
pub fn saps_set(scores: &ScoreVector, lambda: f64, params: &SapsParams) -> Result<PredictionSet> {
    if !(0.0..=params.lambda_max).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda, params.lambda_max));
    }
    let ranked = rank_labels(scores);
    let m_top = scores.get(ranked[0]);
    let mut members = vec![ranked[0]];
    for (pos, &label) in ranked.iter().enumerate().skip(1) {
        let rank = pos + 1;
        let s = m_top + ((rank - 2) as f64 + params.u) * params.w;
        if s <= lambda {
            members.push(label);
        } else {
            break;
        }
    }
    Ok(PredictionSet { members, lambda, predictor: PredictorKind::Saps })
}

/// Smallest lambda at which `label` enters the SAPS set: 0 for the top-ranked
/// label (it is in every set), the label's own nonconformity score otherwise.
pub fn saps_critical_lambda(scores: &ScoreVector, label: usize, params: &SapsParams) -> f64 {
    let ranked = rank_labels(scores);
    if ranked[0] == label {
        0.0
    } else {
        saps_score(scores, label, params)
    }
}

/// SAPS predictor configuration. The per-instance uniform draw is derived
/// from `u_seed` and the instance id, so it is frozen across lambda values
/// and across calibration/test splits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SapsConfig {
    pub w: f64,
    pub lambda_max: f64,
    pub u_seed: u64,
}

impl Default for SapsConfig {
    fn default() -> Self {
        Self { w: 0.1, lambda_max: SAPS_LAMBDA_MAX, u_seed: 0 }
    }
}

/// A configured set-valued predictor.
#[derive(Debug, Clone)]
pub enum SetPredictor {
    Threshold,
    Saps(SapsConfig),
}

impl SetPredictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            SetPredictor::Threshold => PredictorKind::Threshold,
            SetPredictor::Saps(_) => PredictorKind::Saps,
        }
    }

    /// Upper end of the lambda domain: 1 for the threshold predictor,
    /// `lambda_max` for SAPS.
    pub fn domain_max(&self) -> f64 {
        match self {
            SetPredictor::Threshold => 1.0,
            SetPredictor::Saps(cfg) => cfg.lambda_max,
        }
    }

    /// The per-instance SAPS uniform draw in (0, 1).
    pub fn saps_u(&self, instance_id: &str) -> f64 {
        let seed = match self {
            SetPredictor::Threshold => 0,
            SetPredictor::Saps(cfg) => cfg.u_seed,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(instance_id.as_bytes()));
        loop {
            let u: f64 = rng.gen();
            if u > 0.0 && u < 1.0 {
                return u;
            }
        }
    }

    fn saps_params(&self, instance_id: &str) -> SapsParams {
        match self {
            SetPredictor::Saps(cfg) => SapsParams {
                w: cfg.w,
                u: self.saps_u(instance_id),
                lambda_max: cfg.lambda_max,
            },
            SetPredictor::Threshold => unreachable!("saps params requested from threshold"),
        }
    }

    pub fn set_for(
        &self,
        instance_id: &str,
        scores: &ScoreVector,
        lambda: f64,
    ) -> Result<PredictionSet> {
        match self {
            SetPredictor::Threshold => threshold_set(scores, lambda),
            SetPredictor::Saps(_) => saps_set(scores, lambda, &self.saps_params(instance_id)),
        }
    }

    /// Critical threshold of a label for this instance.
    pub fn critical_lambda(&self, instance_id: &str, scores: &ScoreVector, label: usize) -> f64 {
        match self {
            SetPredictor::Threshold => threshold_critical_lambda(scores, label),
            SetPredictor::Saps(_) => {
                saps_critical_lambda(scores, label, &self.saps_params(instance_id))
            }
        }
    }

    /// Critical thresholds of every label, sorted ascending. The set size at
    /// lambda is the number of entries at most lambda.
    pub fn critical_lambdas(&self, instance_id: &str, scores: &ScoreVector) -> Vec<f64> {
        let mut crits: Vec<f64> = (0..scores.len())
            .map(|label| self.critical_lambda(instance_id, scores, label))
            .collect();
        crits.sort_by(f64::total_cmp);
        crits
    }
}

/// Pick the SAPS weight minimizing mean prediction-set size over the unique
/// instances of `validation`, at a fixed lambda. Ties break to the smaller w.
pub fn saps_select_w(
    validation: &Dataset,
    lambda: f64,
    grid: &[f64],
    lambda_max: f64,
    u_seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut candidates = grid.to_vec();
    candidates.sort_by(f64::total_cmp);

    let mut instances: Vec<(&str, &ScoreVector)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for s in &validation.samples {
        if seen.insert(s.instance_id.as_str()) {
            instances.push((s.instance_id.as_str(), &s.scores));
        }
    }

    let mut best: Option<(f64, f64)> = None; // (mean size, w)
    for &w in &candidates {
        let predictor = SetPredictor::Saps(SapsConfig { w, lambda_max, u_seed });
        let mut total = 0usize;
        for (id, scores) in &instances {
            total += predictor.set_for(id, scores, lambda)?.size();
        }
        let mean_size = total as f64 / instances.len() as f64;
        match best {
            Some((best_size, _)) if mean_size >= best_size => {}
            _ => best = Some((mean_size, w)),
        }
    }
    Ok(best.expect("grid non-empty").1)
}
