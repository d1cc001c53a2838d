//! Conformal risk control over the empirical risk curves.
//!
//! Given a calibration set of size `n` and a bound `alpha`, the certified
//! condition at a threshold is
//!
//! ```text
//! n/(n+1) * R_n(lambda) + 1/(n+1) <= alpha
//! ```
//!
//! which, with `R_n = count/n`, reduces to `count + 1 <= alpha * (n + 1)`.
//! Both searches therefore run over curve breakpoints as pure order
//! statistics and are exact:
//!
//! - `lambda_hat`: the smallest threshold where the harm curve satisfies the
//!   condition (the infimum is attained because the curve is right-continuous
//!   and nonincreasing);
//! - `lambda_check`: the supremum of thresholds where the benefit-loss curve
//!   satisfies the condition. Because that curve is right-continuous and
//!   nondecreasing, the supremum itself can violate the condition; that case
//!   is surfaced through an explicit inclusivity flag instead of being
//!   silently shrunk, so downstream reports never claim an uncertified
//!   threshold.
//!
//! `alpha < 1/(n+1)` is an error rather than an infinite threshold: the
//! inflated condition is unachievable even at zero empirical risk, and
//! failing loudly prevents misuse with tiny calibration sets.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::predictor::SetPredictor;
use crate::risk::{benefit_loss_curve, harm_curve, CurveKind, RiskCurve};

/// Absolute tolerance when comparing integer counts against `alpha * (n+1)`,
/// absorbing decimal-to-binary rounding of user-supplied alpha values.
const COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Counterfactual,
    Interventional,
}

/// A certified harm-controlling interval of threshold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmControlResult {
    pub mode: ControlMode,
    pub alpha: f64,
    pub alpha_prime: Option<f64>,
    /// Inclusive lower endpoint.
    pub lower: f64,
    /// Upper endpoint; certified only when `upper_inclusive`.
    pub upper: f64,
    pub upper_inclusive: bool,
    /// False when the interval is empty; endpoints are then informational.
    pub feasible: bool,
}

impl HarmControlResult {
    /// Whether `lambda` is inside the certified interval.
    pub fn contains(&self, lambda: f64) -> bool {
        if !self.feasible {
            return false;
        }
        lambda >= self.lower
            && (lambda < self.upper || (self.upper_inclusive && lambda <= self.upper))
    }

    /// Interval length (zero when infeasible).
    pub fn length(&self) -> f64 {
        if self.feasible {
            (self.upper - self.lower).max(0.0)
        } else {
            0.0
        }
    }
}

/// Largest integer count `c >= 0` with `(c + 1) / (n + 1) <= alpha`, or
/// `None` when even `c = 0` fails (alpha below the achievable floor).
fn max_allowed_count(alpha: f64, n: usize) -> Option<usize> {
    let t = alpha * (n as f64 + 1.0) + COUNT_TOL;
    if t < 1.0 {
        return None;
    }
    let mut c = (t - 1.0).floor();
    // floor can land one off after rounding; fix by direct comparison.
    while c + 2.0 <= t {
        c += 1.0;
    }
    while c >= 1.0 && c + 1.0 > t {
        c -= 1.0;
    }
    Some(c as usize)
}

fn check_alpha(alpha: f64, n: usize) -> Result<usize> {
    max_allowed_count(alpha, n).ok_or(Error::AlphaTooSmall {
        alpha,
        n,
        floor: 1.0 / (n as f64 + 1.0),
    })
}

/// Smallest threshold certified by the harm curve.
///
/// With `K` the largest allowed exceedance count, the infimum is the smallest
/// candidate in `{0} ∪ breakpoints` at which at most `K` breakpoints remain
/// strictly above — the `(m - K)`-th smallest breakpoint, or 0 when `m <= K`.
pub fn lambda_hat(curve: &RiskCurve, alpha: f64) -> Result<f64> {
    debug_assert_eq!(curve.kind(), CurveKind::HarmNonincreasing);
    let k = check_alpha(alpha, curve.n())?;
    let b = curve.breakpoints();
    if b.len() <= k {
        Ok(0.0)
    } else {
        Ok(b[b.len() - 1 - k])
    }
}

/// Supremum of the thresholds certified by the benefit-loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaCheck {
    pub value: f64,
    /// True when the supremum itself satisfies the condition.
    pub inclusive: bool,
}

/// Largest threshold certified by the benefit-loss curve.
///
/// The feasible region is `[0, t)` with `t` the `(K+1)`-th smallest
/// breakpoint, or the whole domain when fewer than `K+1` breakpoints exist.
/// Returns `Infeasible` when even `lambda = 0` violates the condition.
pub fn lambda_check(curve: &RiskCurve, alpha: f64) -> Result<LambdaCheck> {
    debug_assert_eq!(curve.kind(), CurveKind::BenefitLossNondecreasing);
    let k = check_alpha(alpha, curve.n())?;
    let b = curve.breakpoints();
    if b.len() <= k {
        return Ok(LambdaCheck { value: curve.domain_max(), inclusive: true });
    }
    let t = b[k];
    if t <= 0.0 {
        return Err(Error::Infeasible);
    }
    Ok(LambdaCheck { value: t, inclusive: false })
}

/// Harm-controlling set under counterfactual monotonicity: everything from
/// `lambda_hat(alpha)` up to the domain maximum.
pub fn harm_controlling_set_cf(
    calibration: &Dataset,
    predictor: &SetPredictor,
    alpha: f64,
) -> Result<HarmControlResult> {
    let curve = harm_curve(calibration, predictor)?;
    cf_result_from_curve(&curve, alpha)
}

pub fn cf_result_from_curve(curve: &RiskCurve, alpha: f64) -> Result<HarmControlResult> {
    let lower = lambda_hat(curve, alpha)?;
    Ok(HarmControlResult {
        mode: ControlMode::Counterfactual,
        alpha,
        alpha_prime: None,
        lower,
        upper: curve.domain_max(),
        upper_inclusive: true,
        feasible: true,
    })
}

/// Harm-controlling interval under interventional monotonicity for a given
/// split `alpha = alpha' + (alpha - alpha')`: `[lambda_hat(alpha'),
/// lambda_check(alpha - alpha')]` with the latter's inclusivity flag.
pub fn harm_controlling_set_interv(
    calibration: &Dataset,
    predictor: &SetPredictor,
    alpha: f64,
    alpha_prime: f64,
) -> Result<HarmControlResult> {
    let h = harm_curve(calibration, predictor)?;
    let g = benefit_loss_curve(calibration, predictor)?;
    interv_result_from_curves(&h, &g, alpha, alpha_prime)
}

pub fn interv_result_from_curves(
    harm: &RiskCurve,
    benefit: &RiskCurve,
    alpha: f64,
    alpha_prime: f64,
) -> Result<HarmControlResult> {
    let n = harm.n();
    debug_assert_eq!(n, benefit.n());
    if max_allowed_count(alpha_prime, n).is_none()
        || max_allowed_count(alpha - alpha_prime, n).is_none()
    {
        return Err(Error::AlphaSplitInvalid { alpha, alpha_prime, n });
    }
    let lower = lambda_hat(harm, alpha_prime)?;
    match lambda_check(benefit, alpha - alpha_prime) {
        Ok(check) => {
            let feasible = lower < check.value || (check.inclusive && lower <= check.value);
            Ok(HarmControlResult {
                mode: ControlMode::Interventional,
                alpha,
                alpha_prime: Some(alpha_prime),
                lower,
                upper: check.value,
                upper_inclusive: check.inclusive,
                feasible,
            })
        }
        Err(Error::Infeasible) => Ok(HarmControlResult {
            mode: ControlMode::Interventional,
            alpha,
            alpha_prime: Some(alpha_prime),
            lower,
            upper: lower,
            upper_inclusive: false,
            feasible: false,
        }),
        Err(e) => Err(e),
    }
}

/// Scan `alpha'` over `[1/(n+1), alpha - 1/(n+1)]` and return the value
/// maximizing the certified interval length (zero when infeasible). Ties
/// break to the smaller `alpha'`.
pub fn select_alpha_prime(
    calibration: &Dataset,
    predictor: &SetPredictor,
    alpha: f64,
    grid_step: f64,
) -> Result<f64> {
    let h = harm_curve(calibration, predictor)?;
    let g = benefit_loss_curve(calibration, predictor)?;
    select_alpha_prime_from_curves(&h, &g, alpha, grid_step)
}

pub fn select_alpha_prime_from_curves(
    harm: &RiskCurve,
    benefit: &RiskCurve,
    alpha: f64,
    grid_step: f64,
) -> Result<f64> {
    let n = harm.n();
    let floor = 1.0 / (n as f64 + 1.0);
    let lo = floor;
    let hi = alpha - floor;
    if hi < lo - COUNT_TOL {
        return Err(Error::AlphaTooSmall { alpha, n, floor: 2.0 * floor });
    }
    if grid_step <= 0.0 {
        return Err(Error::ConfigInvalid(format!(
            "alpha' grid step must be positive, got {grid_step}"
        )));
    }
    let mut candidates = Vec::new();
    let mut a = lo;
    while a <= hi + COUNT_TOL {
        candidates.push(a.min(hi));
        a += grid_step;
    }
    if candidates.last().is_none_or(|&last| (hi - last).abs() > COUNT_TOL) {
        candidates.push(hi);
    }

    let mut best: Option<(f64, f64)> = None; // (length, alpha')
    for &cand in &candidates {
        let interval = interv_result_from_curves(harm, benefit, alpha, cand)?;
        let length = interval.length();
        match best {
            Some((best_len, _)) if length <= best_len => {}
            _ => best = Some((length, cand)),
        }
    }
    Ok(best.expect("candidate grid non-empty").1)
}
