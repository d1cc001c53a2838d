//! Synthetic structural causal model with fully known exogenous noise.
//!
//! The world realizes the assignment system behind the decision-support
//! setting: scores and the true label come from a score model, and the
//! expert's prediction is a deterministic function of frozen per-
//! (instance, expert) noise and the shown prediction set. Because every
//! exogenous draw is stored, counterfactual queries ("what would this expert
//! have predicted under a different threshold?") are evaluated exactly, with
//! no posterior inference. "No intervention" means the full label set: the
//! expert predicts alone.
//!
//! Two regimes separate the two monotonicity assumptions while keeping the
//! same marginal success probability `q(k)` per set size `k`:
//!
//! - `CounterfactualMonotone`: success on a set of size `k` containing the
//!   true label happens when `u <= q(k)`. The draw `u` is shared across
//!   thresholds and `q` is nonincreasing, so success on a larger set implies
//!   success on any nested smaller set — counterfactual monotonicity holds by
//!   construction.
//! - `InterventionalOnly`: success happens when `u` falls in a half-open
//!   interval `[o_k, o_k + q(k))` (mod 1) whose offset depends on the set
//!   size. Marginals stay `q(k)`, but the success events are not nested, so
//!   only interventional monotonicity survives. Expert draws form the lattice
//!   `(e + 0.5)/n_experts` and `q`/offsets snap to multiples of
//!   `1/n_experts`, which makes every per-instance success count exact and
//!   the population-level harm bounds hold with zero tolerance.
//!
//! Singleton sets containing the true label force a correct prediction: the
//! expert must predict from the set and has no alternative. Default profiles
//! set `q(1) = 1` accordingly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{
    interv_result_from_curves, lambda_check, lambda_hat, select_alpha_prime_from_curves,
};
use crate::data::{Dataset, LabelSpace, Sample, ScoreVector, SetPredictionRecord};
use crate::error::{Error, Result};
use crate::predictor::SetPredictor;
use crate::risk::{CurveKind, RiskCurve};
use crate::stats::{derive_seed, fnv1a64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    CounterfactualMonotone,
    InterventionalOnly,
}

/// How synthetic score vectors are produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModel {
    /// Convex mixture of a point mass on a uniformly chosen peak label and a
    /// symmetric Dirichlet draw. With `peak_mass = c`, the classifier top-1
    /// accuracy is `c + (1 - c)/L` (the true label is drawn from the score
    /// vector). `quantize` rounds scores to a grid, which turns the critical
    /// thresholds into atoms.
    PeakedSimplex {
        peak_mass: f64,
        concentration: f64,
        quantize: Option<f64>,
    },
    /// Score vectors drawn uniformly from a fixed table.
    Tabulated(Vec<Vec<f64>>),
}

impl ScoreModel {
    /// Peak mass achieving a target top-1 accuracy for `label_count` labels.
    pub fn peak_mass_for_top1(top1: f64, label_count: usize) -> f64 {
        let l = label_count as f64;
        (top1 - 1.0 / l) / (1.0 - 1.0 / l)
    }

    fn sample<R: Rng>(&self, rng: &mut R, label_count: usize) -> Vec<f64> {
        match self {
            ScoreModel::PeakedSimplex { peak_mass, concentration, quantize } => {
                let peak = rng.gen_range(0..label_count);
                let gamma = Gamma::new(*concentration, 1.0).expect("validated");
                let mut raw: Vec<f64> = (0..label_count).map(|_| gamma.sample(rng)).collect();
                let total: f64 = raw.iter().sum();
                for v in &mut raw {
                    *v = (1.0 - peak_mass) * (*v / total);
                }
                raw[peak] += peak_mass;
                if let Some(g) = quantize {
                    for v in &mut raw {
                        *v = ((*v / g).round() * g).clamp(0.0, 1.0);
                    }
                }
                raw
            }
            ScoreModel::Tabulated(rows) => rows[rng.gen_range(0..rows.len())].clone(),
        }
    }
}

/// Configuration of a synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub label_count: usize,
    pub n_instances: usize,
    pub n_experts: usize,
    pub score_model: ScoreModel,
    /// Success probability per set size, `success_profile[k - 1]` for size
    /// `k`; must be nonincreasing with entries in [0, 1].
    pub success_profile: Vec<f64>,
    pub regime: Regime,
    /// Interval offsets per set size (InterventionalOnly). Defaults to the
    /// rotation `(k - 1) mod n_experts / n_experts`.
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
    /// Optional per-expert skill multiplier range, drawn uniformly; scales
    /// `q(k)` per expert. In the interventional regime this forgoes the
    /// exact-count lattice.
    #[serde(default)]
    pub per_expert_skill: Option<(f64, f64)>,
    pub seed: u64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.label_count < 2 {
            return Err(Error::ConfigInvalid("world needs at least two labels".into()));
        }
        if self.n_instances == 0 || self.n_experts == 0 {
            return Err(Error::ConfigInvalid("world needs instances and experts".into()));
        }
        if self.success_profile.len() != self.label_count {
            return Err(Error::ConfigInvalid(format!(
                "success profile must have one entry per set size 1..={}",
                self.label_count
            )));
        }
        let mono = self
            .success_profile
            .windows(2)
            .all(|w| w[0] >= w[1]);
        let in_range = self
            .success_profile
            .iter()
            .all(|q| (0.0..=1.0).contains(q));
        if !mono || !in_range {
            return Err(Error::InvalidProfile);
        }
        if let Some(offsets) = &self.offsets {
            if offsets.len() != self.label_count {
                return Err(Error::ConfigInvalid(
                    "offsets must have one entry per set size".into(),
                ));
            }
        }
        if let ScoreModel::PeakedSimplex { peak_mass, concentration, quantize } = &self.score_model
        {
            if !(0.0..1.0).contains(peak_mass) || *concentration <= 0.0 {
                return Err(Error::ConfigInvalid("bad peaked-simplex parameters".into()));
            }
            if let Some(g) = quantize {
                if !(*g > 0.0 && *g <= 1.0) {
                    return Err(Error::ConfigInvalid("quantize step must lie in (0, 1]".into()));
                }
            }
        }
        if let ScoreModel::Tabulated(rows) = &self.score_model {
            if rows.is_empty() || rows.iter().any(|r| r.len() != self.label_count) {
                return Err(Error::ConfigInvalid("bad tabulated score rows".into()));
            }
        }
        Ok(())
    }

    /// Default world satisfying counterfactual monotonicity, tuned so the
    /// empirical harm curve binds near alpha = 0.1: top-1 accuracy 0.8,
    /// human-alone success 0.75, scores quantized to 0.02.
    pub fn counterfactual_default(seed: u64) -> Self {
        let l = 16;
        let q_last = 0.75;
        let profile = (0..l)
            .map(|i| 1.0 - (1.0 - q_last) * i as f64 / (l - 1) as f64)
            .collect();
        WorldConfig {
            label_count: l,
            n_instances: 2000,
            n_experts: 8,
            score_model: ScoreModel::PeakedSimplex {
                peak_mass: ScoreModel::peak_mass_for_top1(0.8, l),
                concentration: 1.0,
                quantize: Some(0.02),
            },
            success_profile: profile,
            regime: Regime::CounterfactualMonotone,
            offsets: None,
            per_expert_skill: None,
            seed,
        }
    }

    /// Default world where only interventional monotonicity holds: success
    /// intervals share one anchor except for size-2 sets, whose rotated
    /// interval breaks counterfactual monotonicity while keeping per-size
    /// marginals exact on the expert lattice.
    pub fn interventional_default(seed: u64) -> Self {
        let l = 16;
        let n_experts = 5;
        let mut profile = vec![0.8; l];
        profile[0] = 1.0;
        let mut offsets = vec![0.0; l];
        offsets[1] = 1.0 / n_experts as f64;
        WorldConfig {
            label_count: l,
            n_instances: 2000,
            n_experts: n_experts as usize,
            score_model: ScoreModel::PeakedSimplex {
                peak_mass: ScoreModel::peak_mass_for_top1(0.5, l),
                concentration: 1.0,
                quantize: None,
            },
            success_profile: profile,
            regime: Regime::InterventionalOnly,
            offsets: Some(offsets),
            per_expert_skill: None,
            seed,
        }
    }
}

/// One generated instance.
#[derive(Debug, Clone)]
pub struct WorldInstance {
    pub id: String,
    pub scores: ScoreVector,
    pub true_label: usize,
}

/// A generated world: a finite population of (instance, expert) pairs with
/// frozen exogenous noise. All counterfactual queries reuse that noise.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub label_space: LabelSpace,
    pub instances: Vec<WorldInstance>,
    pub config: WorldConfig,
    /// Snapped success profile actually in force.
    profile: Vec<f64>,
    /// Snapped offsets (InterventionalOnly), empty otherwise.
    offsets: Vec<f64>,
    /// Frozen uniform draw per (instance, expert).
    u: Vec<Vec<f64>>,
    /// Frozen wrong-label stream seed per (instance, expert).
    wrong_seed: Vec<Vec<u64>>,
    /// Per-expert skill multiplier (1.0 when unused).
    skill: Vec<f64>,
}

/// Success test for the rotated half-open interval `[offset, offset + q)`
/// taken modulo 1.
pub fn interval_success(u: f64, offset: f64, q: f64) -> bool {
    (u - offset).rem_euclid(1.0) < q
}

/// Generate a world. Deterministic for a fixed config.
pub fn generate_world(config: &WorldConfig) -> Result<SyntheticWorld> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let l = config.label_count;
    let n_e = config.n_experts;

    let label_space = LabelSpace::synthetic(l);
    let mut instances = Vec::with_capacity(config.n_instances);
    for i in 0..config.n_instances {
        let raw = config.score_model.sample(&mut rng, l);
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::ConfigInvalid("score model produced an all-zero row".into()));
        }
        let mut draw: f64 = rng.gen::<f64>() * total;
        let mut true_label = l - 1;
        for (j, &v) in raw.iter().enumerate() {
            draw -= v;
            if draw < 0.0 {
                true_label = j;
                break;
            }
        }
        let scores = ScoreVector::new(raw).map_err(|_| {
            Error::ConfigInvalid("score model produced values outside [0, 1]".into())
        })?;
        instances.push(WorldInstance { id: format!("inst_{i:05}"), scores, true_label });
    }

    let snap = |v: f64| ((v * n_e as f64).round() / n_e as f64).clamp(0.0, 1.0);
    let (profile, offsets) = match config.regime {
        Regime::CounterfactualMonotone => (config.success_profile.clone(), Vec::new()),
        Regime::InterventionalOnly => {
            let profile: Vec<f64> = config.success_profile.iter().map(|&q| snap(q)).collect();
            let offsets: Vec<f64> = match &config.offsets {
                Some(o) => o.iter().map(|&v| snap(v)).collect(),
                None => (0..l).map(|k| (k % n_e) as f64 / n_e as f64).collect(),
            };
            (profile, offsets)
        }
    };

    let mut u = Vec::with_capacity(config.n_instances);
    let mut wrong_seed = Vec::with_capacity(config.n_instances);
    for _ in 0..config.n_instances {
        let mut u_row = Vec::with_capacity(n_e);
        let mut seed_row = Vec::with_capacity(n_e);
        for e in 0..n_e {
            let value = match config.regime {
                Regime::CounterfactualMonotone => loop {
                    let v: f64 = rng.gen();
                    if v > 0.0 && v < 1.0 {
                        break v;
                    }
                },
                Regime::InterventionalOnly => (e as f64 + 0.5) / n_e as f64,
            };
            u_row.push(value);
            seed_row.push(rng.gen::<u64>());
        }
        u.push(u_row);
        wrong_seed.push(seed_row);
    }

    let skill: Vec<f64> = match config.per_expert_skill {
        Some((lo, hi)) => (0..n_e).map(|_| rng.gen_range(lo..=hi)).collect(),
        None => vec![1.0; n_e],
    };

    Ok(SyntheticWorld {
        label_space,
        instances,
        config: config.clone(),
        profile,
        offsets,
        u,
        wrong_seed,
        skill,
    })
}

impl SyntheticWorld {
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_experts(&self) -> usize {
        self.config.n_experts
    }

    pub fn population(&self) -> usize {
        self.n_instances() * self.n_experts()
    }

    /// Success profile actually in force (snapped in the interventional
    /// regime).
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn u_of(&self, instance: usize, expert: usize) -> f64 {
        self.u[instance][expert]
    }

    fn q_eff(&self, size: usize, expert: usize) -> f64 {
        (self.profile[size - 1] * self.skill[expert]).clamp(0.0, 1.0)
    }

    /// Whether the frozen noise of (instance, expert) yields a correct
    /// prediction from a set of this size containing the true label.
    pub fn noise_success(&self, instance: usize, expert: usize, size: usize) -> bool {
        let q = self.q_eff(size, expert);
        match self.config.regime {
            Regime::CounterfactualMonotone => self.u[instance][expert] <= q,
            Regime::InterventionalOnly => {
                interval_success(self.u[instance][expert], self.offsets[size - 1], q)
            }
        }
    }

    /// Whether the expert predicts the true label from the given set.
    pub fn set_success(&self, instance: usize, expert: usize, members: &[usize]) -> bool {
        let y = self.instances[instance].true_label;
        if !members.contains(&y) {
            return false;
        }
        if members.len() == 1 {
            return true; // no alternative in the set
        }
        self.noise_success(instance, expert, members.len())
    }

    /// Human-alone success: the full label set, no intervention.
    pub fn factual_success(&self, instance: usize, expert: usize) -> bool {
        self.noise_success(instance, expert, self.config.label_count)
    }

    fn wrong_label(&self, instance: usize, expert: usize, members: &[usize]) -> usize {
        let y = self.instances[instance].true_label;
        let candidates: Vec<usize> = members.iter().copied().filter(|&m| m != y).collect();
        let pool = if candidates.is_empty() { members.to_vec() } else { candidates };
        let mut hash_input = Vec::with_capacity(members.len() * 8);
        for &m in members {
            hash_input.extend_from_slice(&(m as u64).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.wrong_seed[instance][expert] ^ fnv1a64(&hash_input),
        );
        pool[rng.gen_range(0..pool.len())]
    }

    /// The expert's human-alone prediction (full set).
    pub fn factual_prediction(&self, instance: usize, expert: usize) -> usize {
        let y = self.instances[instance].true_label;
        if self.factual_success(instance, expert) {
            y
        } else {
            let full: Vec<usize> = (0..self.config.label_count).collect();
            self.wrong_label(instance, expert, &full)
        }
    }

    /// Counterfactual prediction under an intervention setting the threshold
    /// to `lambda`, with all exogenous noise held fixed.
    pub fn counterfactual_predict(
        &self,
        instance: usize,
        expert: usize,
        lambda: f64,
        predictor: &SetPredictor,
    ) -> Result<usize> {
        let inst = &self.instances[instance];
        let set = predictor.set_for(&inst.id, &inst.scores, lambda)?;
        if self.set_success(instance, expert, &set.members) {
            Ok(inst.true_label)
        } else {
            Ok(self.wrong_label(instance, expert, &set.members))
        }
    }

    /// Exact average counterfactual harm over the world's population: the
    /// fraction of (instance, expert) pairs whose human-alone prediction is
    /// correct but whose counterfactual prediction under `lambda` is not.
    pub fn true_harm(&self, lambda: f64, predictor: &SetPredictor) -> Result<f64> {
        Ok(self.true_harm_grid(&[lambda], predictor)?[0])
    }

    /// `true_harm` over a whole grid, sharing per-instance set computations.
    pub fn true_harm_grid(&self, lambdas: &[f64], predictor: &SetPredictor) -> Result<Vec<f64>> {
        let l = self.config.label_count;
        let per_instance: Vec<Vec<usize>> = self
            .instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let crits = predictor.critical_lambdas(&inst.id, &inst.scores);
                let crit_y = predictor.critical_lambda(&inst.id, &inst.scores, inst.true_label);
                lambdas
                    .iter()
                    .map(|&lambda| {
                        let size = crits.partition_point(|c| *c <= lambda).max(1);
                        let covered = crit_y <= lambda;
                        let mut harmed = 0usize;
                        for e in 0..self.config.n_experts {
                            let fact = self.noise_success(i, e, l);
                            let cf = covered
                                && (size == 1 || self.noise_success(i, e, size));
                            if fact && !cf {
                                harmed += 1;
                            }
                        }
                        harmed
                    })
                    .collect()
            })
            .collect();
        let pop = self.population() as f64;
        Ok((0..lambdas.len())
            .map(|j| per_instance.iter().map(|row| row[j]).sum::<usize>() as f64 / pop)
            .collect())
    }

    /// Materialize the whole population as a dataset of human-alone
    /// predictions.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let pairs: Vec<(usize, usize)> = (0..self.n_instances())
            .flat_map(|i| (0..self.n_experts()).map(move |e| (i, e)))
            .collect();
        self.dataset_from_pairs(&pairs)
    }

    /// Materialize drawn (instance, expert) pairs as a dataset.
    pub fn dataset_from_pairs(&self, pairs: &[(usize, usize)]) -> Result<Dataset> {
        let samples: Vec<Sample> = pairs
            .iter()
            .map(|&(i, e)| {
                let inst = &self.instances[i];
                Sample {
                    instance_id: inst.id.clone(),
                    noise_level: None,
                    scores: inst.scores.clone(),
                    true_label: inst.true_label,
                    human_prediction: self.factual_prediction(i, e),
                    participant_id: Some(format!("exp_{e:03}")),
                }
            })
            .collect();
        Dataset::from_samples(self.label_space.clone(), samples)
    }

    /// Draw population pairs i.i.d. (with replacement).
    pub fn draw_pairs<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<(usize, usize)> {
        (0..count)
            .map(|_| {
                (
                    rng.gen_range(0..self.n_instances()),
                    rng.gen_range(0..self.n_experts()),
                )
            })
            .collect()
    }

    /// Simulate prediction-set records: every (instance, expert) pair gets a
    /// set built at a threshold drawn from `lambdas`, and predicts from it.
    pub fn set_records(
        &self,
        predictor: &SetPredictor,
        lambdas: &[f64],
        seed: u64,
    ) -> Result<Vec<SetPredictionRecord>> {
        if lambdas.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::with_capacity(self.population());
        for (i, inst) in self.instances.iter().enumerate() {
            for e in 0..self.n_experts() {
                let lambda = lambdas[rng.gen_range(0..lambdas.len())];
                let set = predictor.set_for(&inst.id, &inst.scores, lambda)?;
                let prediction = if self.set_success(i, e, &set.members) {
                    inst.true_label
                } else {
                    self.wrong_label(i, e, &set.members)
                };
                records.push(SetPredictionRecord {
                    instance_id: inst.id.clone(),
                    participant_id: format!("exp_{e:03}"),
                    set_members: set.members,
                    human_prediction: prediction,
                });
            }
        }
        Ok(records)
    }

    fn crit_y(&self, predictor: &SetPredictor) -> Vec<f64> {
        self.instances
            .iter()
            .map(|inst| predictor.critical_lambda(&inst.id, &inst.scores, inst.true_label))
            .collect()
    }

    fn factual_table(&self) -> Vec<Vec<bool>> {
        (0..self.n_instances())
            .map(|i| (0..self.n_experts()).map(|e| self.factual_success(i, e)).collect())
            .collect()
    }
}

/// Outcome of a repeated-calibration trial controlling the harm curve.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageTrialStats {
    pub alpha: f64,
    pub repetitions: usize,
    pub n_calib: usize,
    pub n_test: usize,
    /// Grand mean of the controlled risk over all repetitions.
    pub mean_risk: f64,
    /// Fraction of repetitions whose test mean exceeded alpha.
    pub violation_rate: f64,
    pub mean_lambda: f64,
    pub infeasible_repetitions: usize,
}

/// Repeatedly draw a calibration set, compute the certified threshold from
/// the harm curve, and measure the plug-in harm on fresh test draws.
pub fn coverage_trial(
    config: &WorldConfig,
    alpha: f64,
    n_calib: usize,
    n_test: usize,
    repetitions: usize,
    predictor: &SetPredictor,
) -> Result<CoverageTrialStats> {
    if repetitions == 0 {
        return Err(Error::ConfigInvalid("repetitions must be >= 1".into()));
    }
    let world = generate_world(config)?;
    let crit_y = world.crit_y(predictor);
    let fact = world.factual_table();
    let domain = predictor.domain_max();

    let per_rep: Result<Vec<(f64, f64)>> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, r as u64));
            let calib = world.draw_pairs(n_calib, &mut rng);
            let breakpoints: Vec<f64> = calib
                .iter()
                .filter(|&&(i, e)| fact[i][e])
                .map(|&(i, _)| crit_y[i])
                .collect();
            let curve =
                RiskCurve::new(CurveKind::HarmNonincreasing, breakpoints, n_calib, domain)?;
            let lambda = lambda_hat(&curve, alpha)?;
            let test = world.draw_pairs(n_test, &mut rng);
            let harmed = test
                .iter()
                .filter(|&&(i, e)| fact[i][e] && crit_y[i] > lambda)
                .count();
            Ok((harmed as f64 / n_test as f64, lambda))
        })
        .collect();
    let per_rep = per_rep?;

    let mean_risk = per_rep.iter().map(|(h, _)| h).sum::<f64>() / repetitions as f64;
    let violation_rate =
        per_rep.iter().filter(|(h, _)| *h > alpha).count() as f64 / repetitions as f64;
    let mean_lambda = per_rep.iter().map(|(_, l)| l).sum::<f64>() / repetitions as f64;
    Ok(CoverageTrialStats {
        alpha,
        repetitions,
        n_calib,
        n_test,
        mean_risk,
        violation_rate,
        mean_lambda,
        infeasible_repetitions: 0,
    })
}

/// Repeatedly draw a calibration set, compute the certified supremum from the
/// benefit-loss curve, and measure the benefit-loss indicator on fresh test
/// draws.
///
/// The indicator is evaluated at the certified boundary: at the supremum
/// itself when it is attained, otherwise through the open-interval limit
/// (strict comparison). An uncertified supremum carries no guarantee.
pub fn benefit_loss_trial(
    config: &WorldConfig,
    alpha: f64,
    n_calib: usize,
    n_test: usize,
    repetitions: usize,
    predictor: &SetPredictor,
) -> Result<CoverageTrialStats> {
    if repetitions == 0 {
        return Err(Error::ConfigInvalid("repetitions must be >= 1".into()));
    }
    let world = generate_world(config)?;
    let crit_y = world.crit_y(predictor);
    let fact = world.factual_table();
    let domain = predictor.domain_max();

    let per_rep: Result<Vec<Option<(f64, f64)>>> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed ^ 0xb1f, r as u64));
            let calib = world.draw_pairs(n_calib, &mut rng);
            let breakpoints: Vec<f64> = calib
                .iter()
                .filter(|&&(i, e)| !fact[i][e])
                .map(|&(i, _)| crit_y[i])
                .collect();
            let curve = RiskCurve::new(
                CurveKind::BenefitLossNondecreasing,
                breakpoints,
                n_calib,
                domain,
            )?;
            let check = match lambda_check(&curve, alpha) {
                Ok(check) => check,
                Err(Error::Infeasible) => return Ok(None),
                Err(e) => return Err(e),
            };
            let test = world.draw_pairs(n_test, &mut rng);
            let lost = test
                .iter()
                .filter(|&&(i, e)| {
                    !fact[i][e]
                        && (crit_y[i] < check.value
                            || (check.inclusive && crit_y[i] <= check.value))
                })
                .count();
            Ok(Some((lost as f64 / n_test as f64, check.value)))
        })
        .collect();
    let per_rep = per_rep?;

    let feasible: Vec<(f64, f64)> = per_rep.iter().flatten().copied().collect();
    let infeasible = repetitions - feasible.len();
    let denom = feasible.len().max(1) as f64;
    Ok(CoverageTrialStats {
        alpha,
        repetitions,
        n_calib,
        n_test,
        mean_risk: feasible.iter().map(|(v, _)| v).sum::<f64>() / denom,
        violation_rate: feasible.iter().filter(|(v, _)| *v > alpha).count() as f64 / denom,
        mean_lambda: feasible.iter().map(|(_, l)| l).sum::<f64>() / denom,
        infeasible_repetitions: infeasible,
    })
}

/// Outcome of the interval-subset trial: every certified threshold must keep
/// the oracle's exact counterfactual harm below alpha.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetTrialStats {
    pub alpha: f64,
    pub repetitions: usize,
    pub n_calib: usize,
    pub infeasible_repetitions: usize,
    /// Certified (repetition, grid-threshold) pairs checked.
    pub checked: usize,
    /// Certified thresholds whose true harm exceeded alpha.
    pub violations: usize,
    pub max_certified_true_harm: f64,
    pub mean_alpha_prime: f64,
    pub mean_interval_length: f64,
}

/// Repeatedly draw a calibration set, pick alpha' maximizing the certified
/// interval, and verify that the oracle's exact harm stays below alpha at
/// every certified grid threshold.
pub fn interval_subset_trial(
    config: &WorldConfig,
    alpha: f64,
    n_calib: usize,
    repetitions: usize,
    grid_step: f64,
    predictor: &SetPredictor,
) -> Result<SubsetTrialStats> {
    if repetitions == 0 {
        return Err(Error::ConfigInvalid("repetitions must be >= 1".into()));
    }
    let world = generate_world(config)?;
    let crit_y = world.crit_y(predictor);
    let fact = world.factual_table();
    let domain = predictor.domain_max();
    let grid = lambda_grid(domain, grid_step);
    let true_harm = world.true_harm_grid(&grid, predictor)?;

    // (alpha', interval length, certified grid points, violations, max true harm)
    type RepOutcome = Option<(f64, f64, usize, usize, f64)>;
    let alpha_prime_step = 1.0 / (n_calib as f64 + 1.0);
    let per_rep: Result<Vec<RepOutcome>> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed ^ 0xc02, r as u64));
            let calib = world.draw_pairs(n_calib, &mut rng);
            let mut h_points = Vec::new();
            let mut g_points = Vec::new();
            for &(i, e) in &calib {
                if fact[i][e] {
                    h_points.push(crit_y[i]);
                } else {
                    g_points.push(crit_y[i]);
                }
            }
            let h = RiskCurve::new(CurveKind::HarmNonincreasing, h_points, n_calib, domain)?;
            let g = RiskCurve::new(
                CurveKind::BenefitLossNondecreasing,
                g_points,
                n_calib,
                domain,
            )?;
            let alpha_prime = select_alpha_prime_from_curves(&h, &g, alpha, alpha_prime_step)?;
            let interval = interv_result_from_curves(&h, &g, alpha, alpha_prime)?;
            if !interval.feasible {
                return Ok(None);
            }
            let mut checked = 0usize;
            let mut violations = 0usize;
            let mut max_true: f64 = 0.0;
            for (j, &lambda) in grid.iter().enumerate() {
                if interval.contains(lambda) {
                    checked += 1;
                    max_true = max_true.max(true_harm[j]);
                    if true_harm[j] > alpha + 1e-12 {
                        violations += 1;
                    }
                }
            }
            Ok(Some((alpha_prime, interval.length(), checked, violations, max_true)))
        })
        .collect();
    let per_rep = per_rep?;

    let feasible: Vec<_> = per_rep.iter().flatten().collect();
    let infeasible = repetitions - feasible.len();
    let denom = feasible.len().max(1) as f64;
    Ok(SubsetTrialStats {
        alpha,
        repetitions,
        n_calib,
        infeasible_repetitions: infeasible,
        checked: feasible.iter().map(|t| t.2).sum(),
        violations: feasible.iter().map(|t| t.3).sum(),
        max_certified_true_harm: feasible.iter().map(|t| t.4).fold(0.0, f64::max),
        mean_alpha_prime: feasible.iter().map(|t| t.0).sum::<f64>() / denom,
        mean_interval_length: feasible.iter().map(|t| t.1).sum::<f64>() / denom,
    })
}

/// Pointwise comparison of the population harm bounds against the oracle's
/// exact counterfactual harm.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    /// Max of `lower - true_harm` over the grid (should be <= 0).
    pub max_lower_violation: f64,
    /// Max of `true_harm - upper` over the grid (should be <= 0).
    pub max_upper_violation: f64,
    /// Grid thresholds where the lower bound is strictly below the truth.
    pub strict_gap_lambdas: usize,
    pub grid_len: usize,
}

/// Evaluate the bounds sandwich on the world's full population.
pub fn sandwich_report(
    world: &SyntheticWorld,
    predictor: &SetPredictor,
    grid: &[f64],
) -> Result<SandwichReport> {
    let crit_y = world.crit_y(predictor);
    let fact = world.factual_table();
    let pop = world.population() as f64;
    let mut lower_points = Vec::new();
    let mut gap_points = Vec::new();
    for i in 0..world.n_instances() {
        for &correct in &fact[i] {
            if correct {
                lower_points.push(crit_y[i]);
            } else {
                gap_points.push(crit_y[i]);
            }
        }
    }
    lower_points.sort_by(f64::total_cmp);
    gap_points.sort_by(f64::total_cmp);
    let true_harm = world.true_harm_grid(grid, predictor)?;

    let mut max_lower_violation = f64::NEG_INFINITY;
    let mut max_upper_violation = f64::NEG_INFINITY;
    let mut strict = 0usize;
    for (j, &lambda) in grid.iter().enumerate() {
        let lower =
            (lower_points.len() - lower_points.partition_point(|b| *b <= lambda)) as f64 / pop;
        let upper = lower + gap_points.partition_point(|b| *b <= lambda) as f64 / pop;
        max_lower_violation = max_lower_violation.max(lower - true_harm[j]);
        max_upper_violation = max_upper_violation.max(true_harm[j] - upper);
        if true_harm[j] > lower + 1e-12 {
            strict += 1;
        }
    }
    Ok(SandwichReport {
        max_lower_violation,
        max_upper_violation,
        strict_gap_lambdas: strict,
        grid_len: grid.len(),
    })
}

/// Inclusive grid `0, step, ..., domain_max`.
pub fn lambda_grid(domain_max: f64, step: f64) -> Vec<f64> {
    let count = (domain_max / step).round() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if let Some(last) = grid.last_mut() {
        if *last > domain_max {
            *last = domain_max;
        }
    }
    grid
}
