//! Empirical risk curves over the threshold domain.
//!
//! For a calibration set of size `n`, two piecewise-constant curves drive all
//! calibration decisions:
//!
//! - the harm curve `H(lambda)`: the fraction of samples whose human-alone
//!   prediction is correct while the true label is excluded from the
//!   prediction set — nonincreasing and right-continuous in `lambda`;
//! - the benefit-loss curve `G(lambda)`: the fraction of samples whose
//!   human-alone prediction is wrong while the true label is covered —
//!   nondecreasing in `lambda`.
//!
//! Both are stored exactly as the sorted critical thresholds of the relevant
//! subpopulation, never as sampled grids, so downstream threshold searches
//! are exact. Grids appear only in test oracles and report output.

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::predictor::{PredictionSet, SetPredictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Correct-alone samples, counted while still uncovered: nonincreasing.
    HarmNonincreasing,
    /// Wrong-alone samples, counted once covered: nondecreasing.
    BenefitLossNondecreasing,
}

/// Exact piecewise-constant empirical risk curve.
#[derive(Debug, Clone)]
pub struct RiskCurve {
    kind: CurveKind,
    /// Per-sample critical thresholds of the relevant subpopulation, sorted.
    breakpoints: Vec<f64>,
    /// Total calibration size (not just the subpopulation).
    n: usize,
    domain_max: f64,
}

impl RiskCurve {
    pub fn new(
        kind: CurveKind,
        mut breakpoints: Vec<f64>,
        n: usize,
        domain_max: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        breakpoints.sort_by(f64::total_cmp);
        if let Some(&last) = breakpoints.last() {
            if last > domain_max || breakpoints[0] < 0.0 {
                return Err(Error::ConfigInvalid(format!(
                    "critical threshold {last} outside the lambda domain [0, {domain_max}]; \
                     raise lambda_max"
                )));
            }
        }
        Ok(Self { kind, breakpoints, n, domain_max })
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    /// Number of breakpoints at most `lambda`.
    fn count_le(&self, lambda: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= lambda)
    }

    /// Curve value at `lambda`. Membership at a breakpoint is inclusive, so
    /// the harm curve is right-continuous.
    pub fn value_at(&self, lambda: f64) -> f64 {
        let le = self.count_le(lambda);
        match self.kind {
            CurveKind::HarmNonincreasing => (self.breakpoints.len() - le) as f64 / self.n as f64,
            CurveKind::BenefitLossNondecreasing => le as f64 / self.n as f64,
        }
    }

    /// Number of breakpoints strictly greater than `lambda`.
    pub fn count_exceeding(&self, lambda: f64) -> usize {
        self.breakpoints.len() - self.count_le(lambda)
    }
}

/// Per-sample counterfactual harm indicator: the human-alone prediction was
/// correct and the prediction set excludes the true label.
pub fn harm_indicator(sample: &Sample, set: &PredictionSet) -> bool {
    sample.human_prediction == sample.true_label && !set.contains(sample.true_label)
}

/// Per-sample benefit-loss indicator: the human-alone prediction was wrong
/// and the prediction set covers the true label.
pub fn benefit_loss_indicator(sample: &Sample, set: &PredictionSet) -> bool {
    sample.human_prediction != sample.true_label && set.contains(sample.true_label)
}

/// Empirical harm curve of a calibration set.
pub fn harm_curve(calibration: &Dataset, predictor: &SetPredictor) -> Result<RiskCurve> {
    if calibration.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let breakpoints = calibration
        .samples
        .iter()
        .filter(|s| s.human_prediction == s.true_label)
        .map(|s| predictor.critical_lambda(&s.instance_id, &s.scores, s.true_label))
        .collect();
    RiskCurve::new(
        CurveKind::HarmNonincreasing,
        breakpoints,
        calibration.len(),
        predictor.domain_max(),
    )
}

/// Empirical benefit-loss curve of a calibration set.
pub fn benefit_loss_curve(calibration: &Dataset, predictor: &SetPredictor) -> Result<RiskCurve> {
    if calibration.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let breakpoints = calibration
        .samples
        .iter()
        .filter(|s| s.human_prediction != s.true_label)
        .map(|s| predictor.critical_lambda(&s.instance_id, &s.scores, s.true_label))
        .collect();
    RiskCurve::new(
        CurveKind::BenefitLossNondecreasing,
        breakpoints,
        calibration.len(),
        predictor.domain_max(),
    )
}

/// Lower and upper bounds on the average counterfactual harm at `lambda`
/// under interventional monotonicity: the lower bound is the harm-curve
/// value, the upper bound adds the benefit-loss value.
pub fn harm_bounds(test: &Dataset, predictor: &SetPredictor, lambda: f64) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut harmed = 0usize;
    let mut covered_wrong = 0usize;
    for s in &test.samples {
        let crit = predictor.critical_lambda(&s.instance_id, &s.scores, s.true_label);
        let covered = crit <= lambda;
        if s.human_prediction == s.true_label && !covered {
            harmed += 1;
        }
        if s.human_prediction != s.true_label && covered {
            covered_wrong += 1;
        }
    }
    let n = test.len() as f64;
    let lower = harmed as f64 / n;
    Ok((lower, lower + covered_wrong as f64 / n))
}
