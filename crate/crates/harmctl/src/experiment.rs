//! End-to-end experiment pipelines: repeated-split trade-off curves,
//! coverage/set-size sweeps, and the interventional-monotonicity report.
//!
//! Each repetition splits the dataset by instance, fits the expert model on
//! the calibration half, certifies a harm-controlling set, and evaluates the
//! test half on a fixed threshold grid. Repetitions run as independent jobs
//! with derived seeds; aggregation is order-independent.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibrate::{
    cf_result_from_curve, interv_result_from_curves, select_alpha_prime_from_curves, ControlMode,
    HarmControlResult,
};
use crate::data::{Dataset, SetPredictionRecord};
use crate::error::{Error, Result};
use crate::mnl::{fit_confusion, stratify_difficulty, DifficultyStrata, MnlMixture};
use crate::predictor::SetPredictor;
use crate::risk::{benefit_loss_curve, harm_curve, RiskCurve};
use crate::stats::{binomial_se, ci95_halfwidth, derive_seed, mean, quantile_type7};

/// How the alpha split is chosen in interventional mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPrimePolicy {
    /// Use this alpha' in every repetition.
    Fixed(f64),
    /// Re-select alpha' on each repetition's calibration set.
    PerRepetition,
    /// Select one alpha' maximizing the mean certified interval length
    /// across repetitions, then hold it fixed. Default for replication runs.
    Pooled,
}

#[derive(Debug, Clone)]
pub struct TradeoffSpec {
    pub alpha: f64,
    pub mode: ControlMode,
    pub alpha_prime: AlphaPrimePolicy,
    pub lambda_grid: Vec<f64>,
    pub repetitions: usize,
    pub calib_frac: f64,
    pub seed: u64,
    pub cuts: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffRow {
    pub lambda: f64,
    pub accuracy_mean: f64,
    pub accuracy_ci: Option<f64>,
    /// Plug-in harm (the lower bound in interventional mode).
    pub harm_mean: f64,
    pub harm_ci: Option<f64>,
    /// Upper harm bound; populated in interventional mode.
    pub harm_upper_mean: Option<f64>,
    pub harm_upper_ci: Option<f64>,
    /// Fraction of repetitions whose certified set contains this lambda.
    pub membership_frequency: f64,
    pub mean_set_size: f64,
    pub empirical_coverage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffReport {
    pub alpha: f64,
    pub mode: ControlMode,
    /// The pooled/fixed alpha' when one applies to every repetition.
    pub alpha_prime: Option<f64>,
    pub repetitions: usize,
    pub calib_frac: f64,
    pub seed: u64,
    pub rows: Vec<TradeoffRow>,
    /// Per-repetition certified intervals, in repetition order.
    pub intervals: Vec<HarmControlResult>,
}

/// Per-instance geometry shared by every repetition: the set is always a
/// rank prefix, so one sorted entry-threshold vector gives set size, and the
/// prefix of the ranking gives the restricted expert-model mass.
struct InstanceGeometry {
    id: String,
    true_label: usize,
    ranked: Vec<usize>,
    /// Entry threshold of the rank-j label; ascending in j.
    crit_by_rank: Vec<f64>,
    crit_y: f64,
}

fn instance_geometry(dataset: &Dataset, predictor: &SetPredictor) -> Vec<InstanceGeometry> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for s in &dataset.samples {
        if seen.insert(s.instance_id.clone(), true).is_some() {
            continue;
        }
        let ranked = crate::predictor::rank_labels(&s.scores);
        let crit_by_rank: Vec<f64> = ranked
            .iter()
            .map(|&label| predictor.critical_lambda(&s.instance_id, &s.scores, label))
            .collect();
        out.push(InstanceGeometry {
            id: s.instance_id.clone(),
            true_label: s.true_label,
            crit_y: predictor.critical_lambda(&s.instance_id, &s.scores, s.true_label),
            ranked,
            crit_by_rank,
        });
    }
    out
}

struct RepetitionOutcome {
    interval: HarmControlResult,
    accuracy: Vec<f64>,
    harm: Vec<f64>,
    harm_upper: Vec<f64>,
    set_size: Vec<f64>,
    coverage: Vec<f64>,
}

fn evaluate_repetition(
    geometry: &[InstanceGeometry],
    strata: &DifficultyStrata,
    mixture: &MnlMixture,
    test: &Dataset,
    interval: HarmControlResult,
    grid: &[f64],
) -> Result<RepetitionOutcome> {
    // Sample counts per test instance.
    let mut per_instance: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in &test.samples {
        let e = per_instance.entry(s.instance_id.as_str()).or_insert((0, 0));
        e.0 += 1;
        if s.human_prediction == s.true_label {
            e.1 += 1;
        }
    }
    let n_test = test.len() as f64;

    let mut accuracy = vec![0.0; grid.len()];
    let mut harm = vec![0.0; grid.len()];
    let mut harm_upper = vec![0.0; grid.len()];
    let mut set_size = vec![0.0; grid.len()];
    let mut coverage = vec![0.0; grid.len()];

    for geo in geometry {
        let Some(&(count, correct)) = per_instance.get(geo.id.as_str()) else {
            continue;
        };
        let wrong = count - correct;
        let d = strata.stratum_for(test, &geo.id);
        let row = mixture.row(d, geo.true_label);
        let mut prefix = Vec::with_capacity(geo.ranked.len() + 1);
        prefix.push(0.0);
        for &label in &geo.ranked {
            prefix.push(prefix.last().unwrap() + row[label]);
        }
        let diag = row[geo.true_label];

        for (j, &lambda) in grid.iter().enumerate() {
            let k = geo.crit_by_rank.partition_point(|c| *c <= lambda).max(1);
            let covered = geo.crit_y <= lambda;
            set_size[j] += (k * count) as f64;
            if covered {
                coverage[j] += count as f64;
                let mass = prefix[k];
                if mass <= 0.0 {
                    return Err(Error::DegenerateRow(geo.true_label));
                }
                accuracy[j] += diag / mass * count as f64;
                harm_upper[j] += wrong as f64;
            } else {
                harm[j] += correct as f64;
            }
        }
    }
    for j in 0..grid.len() {
        accuracy[j] /= n_test;
        harm[j] /= n_test;
        harm_upper[j] = harm[j] + harm_upper[j] / n_test;
        set_size[j] /= n_test;
        coverage[j] /= n_test;
    }
    Ok(RepetitionOutcome { interval, accuracy, harm, harm_upper, set_size, coverage })
}

/// Run the repeated-split trade-off pipeline.
pub fn run_tradeoff(
    dataset: &Dataset,
    predictor: &SetPredictor,
    spec: &TradeoffSpec,
) -> Result<TradeoffReport> {
    if spec.repetitions == 0 {
        return Err(Error::ConfigInvalid("repetitions must be >= 1".into()));
    }
    if spec.lambda_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let strata = stratify_difficulty(dataset, &spec.cuts)?;
    let geometry = instance_geometry(dataset, predictor);
    let grid = &spec.lambda_grid;

    // Deterministic per-repetition splits and calibration curves.
    let splits: Result<Vec<(Dataset, Dataset, RiskCurve, RiskCurve)>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| {
            let (calib, test) =
                crate::data::split_dataset(dataset, spec.calib_frac, derive_seed(spec.seed, r as u64))?;
            let h = harm_curve(&calib, predictor)?;
            let g = benefit_loss_curve(&calib, predictor)?;
            Ok((calib, test, h, g))
        })
        .collect();
    let splits = splits?;

    // Resolve the alpha' shared across repetitions, when the policy calls
    // for one.
    let shared_alpha_prime: Option<f64> = match (spec.mode, spec.alpha_prime) {
        (ControlMode::Counterfactual, _) => None,
        (ControlMode::Interventional, AlphaPrimePolicy::Fixed(a)) => Some(a),
        (ControlMode::Interventional, AlphaPrimePolicy::PerRepetition) => None,
        (ControlMode::Interventional, AlphaPrimePolicy::Pooled) => {
            Some(pooled_alpha_prime(&splits, spec.alpha)?)
        }
    };

    let outcomes: Result<Vec<RepetitionOutcome>> = splits
        .par_iter()
        .map(|(calib, test, h, g)| {
            let mixture = fit_confusion(calib, &strata, spec.epsilon)?;
            let interval = match spec.mode {
                ControlMode::Counterfactual => cf_result_from_curve(h, spec.alpha)?,
                ControlMode::Interventional => {
                    let alpha_prime = match shared_alpha_prime {
                        Some(a) => a,
                        None => {
                            let step = 1.0 / (h.n() as f64 + 1.0);
                            select_alpha_prime_from_curves(h, g, spec.alpha, step)?
                        }
                    };
                    interv_result_from_curves(h, g, spec.alpha, alpha_prime)?
                }
            };
            evaluate_repetition(&geometry, &strata, &mixture, test, interval, grid)
        })
        .collect();
    let outcomes = outcomes?;

    let reps = spec.repetitions;
    let collect_stat =
        |f: &dyn Fn(&RepetitionOutcome) -> &Vec<f64>, j: usize| -> Vec<f64> {
            outcomes.iter().map(|o| f(o)[j]).collect()
        };
    let mut rows = Vec::with_capacity(grid.len());
    for (j, &lambda) in grid.iter().enumerate() {
        let acc = collect_stat(&|o| &o.accuracy, j);
        let harm = collect_stat(&|o| &o.harm, j);
        let upper = collect_stat(&|o| &o.harm_upper, j);
        let size = collect_stat(&|o| &o.set_size, j);
        let cov = collect_stat(&|o| &o.coverage, j);
        let member = outcomes
            .iter()
            .filter(|o| o.interval.contains(lambda))
            .count() as f64
            / reps as f64;
        rows.push(TradeoffRow {
            lambda,
            accuracy_mean: mean(&acc),
            accuracy_ci: ci95_halfwidth(&acc),
            harm_mean: mean(&harm),
            harm_ci: ci95_halfwidth(&harm),
            harm_upper_mean: (spec.mode == ControlMode::Interventional).then(|| mean(&upper)),
            harm_upper_ci: match spec.mode {
                ControlMode::Interventional => ci95_halfwidth(&upper),
                ControlMode::Counterfactual => None,
            },
            membership_frequency: member,
            mean_set_size: mean(&size),
            empirical_coverage: mean(&cov),
        });
    }
    Ok(TradeoffReport {
        alpha: spec.alpha,
        mode: spec.mode,
        alpha_prime: shared_alpha_prime,
        repetitions: reps,
        calib_frac: spec.calib_frac,
        seed: spec.seed,
        rows,
        intervals: outcomes.into_iter().map(|o| o.interval).collect(),
    })
}

/// One alpha' for all repetitions: the candidate maximizing the mean
/// certified interval length over the repetitions' calibration curves.
fn pooled_alpha_prime(
    splits: &[(Dataset, Dataset, RiskCurve, RiskCurve)],
    alpha: f64,
) -> Result<f64> {
    let min_n = splits.iter().map(|(_, _, h, _)| h.n()).min().expect("reps >= 1");
    let floor = 1.0 / (min_n as f64 + 1.0);
    let lo = floor;
    let hi = alpha - floor;
    if hi < lo - 1e-9 {
        return Err(Error::AlphaTooSmall { alpha, n: min_n, floor: 2.0 * floor });
    }
    let mut candidates = Vec::new();
    let mut a = lo;
    while a <= hi + 1e-9 {
        candidates.push(a.min(hi));
        a += floor;
    }
    if candidates.last().is_none_or(|&last| (hi - last).abs() > 1e-9) {
        candidates.push(hi);
    }
    let mut best: Option<(f64, f64)> = None;
    for &cand in &candidates {
        let mut total = 0.0;
        for (_, _, h, g) in splits {
            total += interv_result_from_curves(h, g, alpha, cand)?.length();
        }
        let mean_len = total / splits.len() as f64;
        match best {
            Some((best_len, _)) if mean_len <= best_len => {}
            _ => best = Some((mean_len, cand)),
        }
    }
    Ok(best.expect("non-empty candidates").1)
}

/// Per-threshold empirical coverage and mean set size over a dataset.
/// Both are nondecreasing in lambda by nestedness.
pub fn coverage_and_size(
    dataset: &Dataset,
    predictor: &SetPredictor,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let geometry = instance_geometry(dataset, predictor);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &dataset.samples {
        *counts.entry(s.instance_id.as_str()).or_insert(0) += 1;
    }
    let n = dataset.len() as f64;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut covered = 0usize;
        let mut size = 0usize;
        for geo in &geometry {
            let count = counts[geo.id.as_str()];
            let k = geo.crit_by_rank.partition_point(|c| *c <= lambda).max(1);
            size += k * count;
            if geo.crit_y <= lambda {
                covered += count;
            }
        }
        out.push((covered as f64 / n, size as f64 / n));
    }
    Ok(out)
}

// ---- Interventional-monotonicity verification ------------------------------

pub const DIFFICULTY_NAMES: [&str; 4] = ["high", "medium-high", "medium-low", "low"];
pub const COMPETENCE_NAMES: [&str; 3] = ["all", "low", "high"];

#[derive(Debug, Clone, Serialize)]
pub struct SizeStat {
    pub size: usize,
    pub count: usize,
    /// Empirical success probability; absent below the minimum cell count.
    pub success_rate: Option<f64>,
    pub standard_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCell {
    pub label: String,
    pub difficulty: String,
    pub competence: String,
    pub per_size: Vec<SizeStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub min_count: usize,
    pub cells: Vec<MonotonicityCell>,
}

/// Empirical success probability per prediction-set size, stratified by
/// ground-truth label, per-label difficulty quartile, and expert competence.
///
/// Only sets containing the ground truth enter a cell, and singleton sets
/// are omitted (their success probability is trivially 1). Difficulty
/// quartiles come from per-label quantiles of the instance accuracies in
/// `dataset`; competence splits each label's experts at the median of their
/// per-label accuracy over `records`.
pub fn verify_interventional_monotonicity(
    records: &[SetPredictionRecord],
    dataset: &Dataset,
    min_count: usize,
) -> Result<MonotonicityReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // Ground truth per instance.
    let mut truth: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &dataset.samples {
        truth.insert(s.instance_id.as_str(), s.true_label);
    }
    for r in records {
        if !truth.contains_key(r.instance_id.as_str()) {
            return Err(Error::OrphanPrediction(r.instance_id.clone()));
        }
    }

    // Per-label difficulty quartiles over instance accuracies.
    let mut per_label_acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (id, &label) in &truth {
        if let Some(&acc) = dataset.per_instance_accuracy.get(*id) {
            per_label_acc.entry(label).or_default().push(acc);
        }
    }
    let mut label_cuts: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
    for (label, accs) in &mut per_label_acc {
        accs.sort_by(f64::total_cmp);
        label_cuts.insert(
            *label,
            [
                quantile_type7(accs, 0.25),
                quantile_type7(accs, 0.5),
                quantile_type7(accs, 0.75),
            ],
        );
    }
    let difficulty_of = |instance: &str, label: usize| -> usize {
        let acc = dataset.per_instance_accuracy.get(instance).copied().unwrap_or(0.0);
        let cuts = &label_cuts[&label];
        cuts.iter().filter(|&&c| acc > c).count()
    };

    // Per-(expert, label) accuracy over the records, then a median split.
    let mut expert_perf: BTreeMap<(usize, &str), (usize, usize)> = BTreeMap::new();
    for r in records {
        let label = truth[r.instance_id.as_str()];
        let e = expert_perf.entry((label, r.participant_id.as_str())).or_insert((0, 0));
        e.1 += 1;
        if r.human_prediction == label {
            e.0 += 1;
        }
    }
    let mut high_experts: BTreeMap<usize, std::collections::BTreeSet<&str>> = BTreeMap::new();
    {
        let mut per_label: BTreeMap<usize, Vec<(&str, f64)>> = BTreeMap::new();
        for (&(label, expert), &(hits, total)) in &expert_perf {
            per_label
                .entry(label)
                .or_default()
                .push((expert, hits as f64 / total as f64));
        }
        for (label, mut experts) in per_label {
            experts.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let top = experts.len().div_ceil(2);
            high_experts
                .insert(label, experts.into_iter().take(top).map(|(e, _)| e).collect());
        }
    }

    // (label, difficulty, competence, size) -> (successes, count)
    let mut cells: BTreeMap<(usize, usize, usize, usize), (usize, usize)> = BTreeMap::new();
    for r in records {
        let label = truth[r.instance_id.as_str()];
        if !r.set_members.contains(&label) || r.set_members.len() < 2 {
            continue;
        }
        let difficulty = difficulty_of(&r.instance_id, label);
        let is_high = high_experts
            .get(&label)
            .is_some_and(|set| set.contains(r.participant_id.as_str()));
        let success = (r.human_prediction == label) as usize;
        let size = r.set_members.len();
        let competences: [usize; 2] = [0, if is_high { 2 } else { 1 }];
        for &group in &competences {
            let cell = cells.entry((label, difficulty, group, size)).or_insert((0, 0));
            cell.0 += success;
            cell.1 += 1;
        }
    }

    let mut grouped: BTreeMap<(usize, usize, usize), Vec<SizeStat>> = BTreeMap::new();
    for (&(label, difficulty, group, size), &(hits, count)) in &cells {
        let stat = if count >= min_count {
            let p = hits as f64 / count as f64;
            SizeStat {
                size,
                count,
                success_rate: Some(p),
                standard_error: Some(binomial_se(p, count)),
            }
        } else {
            SizeStat { size, count, success_rate: None, standard_error: None }
        };
        grouped.entry((label, difficulty, group)).or_default().push(stat);
    }

    let cells = grouped
        .into_iter()
        .map(|((label, difficulty, group), per_size)| MonotonicityCell {
            label: dataset.label_space.name(label).to_string(),
            difficulty: DIFFICULTY_NAMES[difficulty].to_string(),
            competence: COMPETENCE_NAMES[group].to_string(),
            per_size,
        })
        .collect();
    Ok(MonotonicityReport { min_count, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelSpace, Sample, ScoreVector};
    use crate::scm::{generate_world, lambda_grid, WorldConfig};

    fn sample(id: &str, scores: &[f64], truth: usize, pred: usize) -> Sample {
        Sample {
            instance_id: id.into(),
            noise_level: None,
            scores: ScoreVector::new(scores.to_vec()).unwrap(),
            true_label: truth,
            human_prediction: pred,
            participant_id: Some("p".into()),
        }
    }

    #[test]
    fn coverage_and_size_monotone_and_edge_values() {
        let mut config = WorldConfig::counterfactual_default(3);
        config.n_instances = 150;
        config.n_experts = 1;
        let world = generate_world(&config).unwrap();
        let ds = world.to_dataset().unwrap();
        let pred = SetPredictor::Threshold;
        let grid = lambda_grid(1.0, 0.01);
        let rows = coverage_and_size(&ds, &pred, &grid).unwrap();

        // Edges: singletons at 0, everything at 1.
        let top1 = ds
            .samples
            .iter()
            .filter(|s| crate::predictor::rank_labels(&s.scores)[0] == s.true_label)
            .count() as f64
            / ds.len() as f64;
        assert!((rows[0].0 - top1).abs() < 1e-12);
        assert_eq!(rows[0].1, 1.0);
        let last = rows.last().unwrap();
        assert_eq!(last.0, 1.0);
        assert_eq!(last.1, 16.0);

        for pair in rows.windows(2) {
            assert!(pair[1].0 >= pair[0].0 - 1e-12, "coverage must not decrease");
            assert!(pair[1].1 >= pair[0].1 - 1e-12, "mean size must not decrease");
        }
    }

    #[test]
    fn tradeoff_counterfactual_harm_equals_test_curve() {
        let mut config = WorldConfig::counterfactual_default(21);
        config.n_instances = 120;
        config.n_experts = 2;
        let world = generate_world(&config).unwrap();
        let ds = world.to_dataset().unwrap();
        let pred = SetPredictor::Threshold;
        let spec = TradeoffSpec {
            alpha: 0.1,
            mode: ControlMode::Counterfactual,
            alpha_prime: AlphaPrimePolicy::PerRepetition,
            lambda_grid: lambda_grid(1.0, 0.05),
            repetitions: 1,
            calib_frac: 0.2,
            seed: 5,
            // Synthetic experts carry no difficulty dependence; one stratum.
            cuts: vec![],
            epsilon: 1e-6,
        };
        let report = run_tradeoff(&ds, &pred, &spec).unwrap();

        // Recreate the single split and compare the harm column against the
        // test-side curve directly.
        let (_, test) =
            crate::data::split_dataset(&ds, 0.2, derive_seed(5, 0)).unwrap();
        let test_curve = harm_curve(&test, &pred).unwrap();
        for row in &report.rows {
            assert!((row.harm_mean - test_curve.value_at(row.lambda)).abs() < 1e-12);
            assert!(row.harm_ci.is_none(), "single repetition has no CI");
            assert!(row.harm_upper_mean.is_none(), "counterfactual mode has no upper bound");
        }

        // Membership is a step function: once a lambda is in, later ones are.
        let mut seen_member = false;
        for row in &report.rows {
            if row.membership_frequency > 0.0 {
                seen_member = true;
            }
            if seen_member {
                assert!(row.membership_frequency > 0.0);
            }
        }
    }

    #[test]
    fn tradeoff_is_deterministic() {
        let mut config = WorldConfig::counterfactual_default(22);
        config.n_instances = 80;
        let world = generate_world(&config).unwrap();
        let ds = world.to_dataset().unwrap();
        let spec = TradeoffSpec {
            alpha: 0.1,
            mode: ControlMode::Counterfactual,
            alpha_prime: AlphaPrimePolicy::PerRepetition,
            lambda_grid: lambda_grid(1.0, 0.1),
            repetitions: 4,
            calib_frac: 0.25,
            seed: 9,
            cuts: vec![0.5],
            epsilon: 1e-6,
        };
        let r1 = run_tradeoff(&ds, &SetPredictor::Threshold, &spec).unwrap();
        let r2 = run_tradeoff(&ds, &SetPredictor::Threshold, &spec).unwrap();
        let j1 = serde_json::to_string(&r1.rows).unwrap();
        let j2 = serde_json::to_string(&r2.rows).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn monotonicity_cells_by_hand() {
        // One label-0 cell: 10 predictions at size 2, 8 successes.
        let space = LabelSpace::new(vec!["bottle", "oven", "car"]).unwrap();
        let mut samples = Vec::new();
        let mut records = Vec::new();
        for i in 0..4 {
            let id = format!("i{i}");
            samples.push(sample(&id, &[0.6, 0.3, 0.1], 0, 0));
        }
        for p in 0..10 {
            records.push(SetPredictionRecord {
                instance_id: format!("i{}", p % 4),
                participant_id: format!("e{p}"),
                set_members: vec![0, 1],
                human_prediction: if p < 8 { 0 } else { 1 },
            });
        }
        // Singleton and truth-excluded records never enter cells.
        records.push(SetPredictionRecord {
            instance_id: "i0".into(),
            participant_id: "e0".into(),
            set_members: vec![0],
            human_prediction: 0,
        });
        records.push(SetPredictionRecord {
            instance_id: "i0".into(),
            participant_id: "e0".into(),
            set_members: vec![1, 2],
            human_prediction: 2,
        });
        let ds = Dataset::from_samples(space, samples).unwrap();
        let report = verify_interventional_monotonicity(&records, &ds, 5).unwrap();
        let all_cell = report
            .cells
            .iter()
            .find(|c| c.label == "bottle" && c.competence == "all")
            .expect("cell for bottle/all");
        let stat = all_cell.per_size.iter().find(|s| s.size == 2).unwrap();
        assert_eq!(stat.count, 10);
        assert!((stat.success_rate.unwrap() - 0.8).abs() < 1e-12);
        let se = stat.standard_error.unwrap();
        assert!((se - (0.8f64 * 0.2 / 10.0).sqrt()).abs() < 1e-12);
        // No cell may contain singleton sizes.
        for cell in &report.cells {
            assert!(cell.per_size.iter().all(|s| s.size >= 2));
        }
    }

    #[test]
    fn monotonicity_small_cells_stay_empty() {
        let space = LabelSpace::new(vec!["a", "b"]).unwrap();
        let samples = vec![sample("i0", &[0.6, 0.4], 0, 0)];
        let records = vec![SetPredictionRecord {
            instance_id: "i0".into(),
            participant_id: "e0".into(),
            set_members: vec![0, 1],
            human_prediction: 0,
        }];
        let ds = Dataset::from_samples(space, samples).unwrap();
        let report = verify_interventional_monotonicity(&records, &ds, 5).unwrap();
        for cell in &report.cells {
            for stat in &cell.per_size {
                assert!(stat.success_rate.is_none(), "undersized cells must stay empty");
                assert_eq!(stat.count, 1);
            }
        }
    }

    #[test]
    fn synthetic_records_show_nonincreasing_success() {
        let mut config = crate::scm::WorldConfig::interventional_default(31);
        config.n_instances = 400;
        let world = generate_world(&config).unwrap();
        let ds = world.to_dataset().unwrap();
        let pred = SetPredictor::Threshold;
        let lambdas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let records = world.set_records(&pred, &lambdas, 77).unwrap();
        let report = verify_interventional_monotonicity(&records, &ds, 30).unwrap();

        // Pool everything per size and check the trend within 3 sigma.
        let mut per_size: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for cell in report.cells.iter().filter(|c| c.competence == "all") {
            for stat in &cell.per_size {
                if let (Some(rate), Some(_)) = (stat.success_rate, stat.standard_error) {
                    let e = per_size.entry(stat.size).or_insert((0.0, 0.0));
                    e.0 += rate * stat.count as f64;
                    e.1 += stat.count as f64;
                }
            }
        }
        let rates: Vec<(usize, f64, f64)> = per_size
            .iter()
            .filter(|(_, (_, n))| *n >= 30.0)
            .map(|(&size, &(sum, n))| (size, sum / n, n))
            .collect();
        for pair in rates.windows(2) {
            let (_, p1, n1) = pair[0];
            let (_, p2, n2) = pair[1];
            let sigma = (p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2).sqrt().max(1e-6);
            assert!(
                p2 <= p1 + 3.0 * sigma,
                "success must not increase with size: {p1} -> {p2}"
            );
        }
    }
}
