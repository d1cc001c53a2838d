//! Mixture-of-multinomial-logit expert model.
//!
//! Instances are stratified by difficulty (quantiles of per-instance expert
//! accuracy), one confusion matrix is fit per stratum from human-alone
//! predictions, and a prediction from a shown set is modeled as the confusion
//! row restricted to the set and renormalized. The closed-form success
//! probability feeds the accuracy estimate `A(lambda)` without Monte Carlo
//! noise.
//!
//! Quantiles use linear interpolation (type 7). An instance moves up a
//! stratum only when its accuracy strictly exceeds a cut value, so ties at a
//! cut fall into the lower stratum.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::predictor::{PredictionSet, SetPredictor};
use crate::stats::quantile_type7;

/// Default additive smoothing for confusion rows. Small enough not to move
/// any reported quantity beyond 1e-4, large enough that restricted rows are
/// never all-zero.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default difficulty cut: two strata at the median accuracy.
pub const DEFAULT_CUTS: [f64; 1] = [0.5];

/// Difficulty stratification of instances by expert accuracy quantiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifficultyStrata {
    /// Requested quantile levels, sorted ascending.
    pub quantile_cuts: Vec<f64>,
    /// Realized accuracy thresholds at those levels.
    pub cut_values: Vec<f64>,
    /// Stratum index per instance of the fitted dataset.
    pub assignment: BTreeMap<String, usize>,
}

impl DifficultyStrata {
    /// Number of strata (one more than the number of cuts).
    pub fn count(&self) -> usize {
        self.cut_values.len() + 1
    }

    /// Stratum for an accuracy value: the number of cut values it strictly
    /// exceeds.
    pub fn stratum_for_accuracy(&self, accuracy: f64) -> usize {
        self.cut_values.iter().filter(|&&c| accuracy > c).count()
    }

    pub fn stratum_of(&self, instance_id: &str) -> Option<usize> {
        self.assignment.get(instance_id).copied()
    }

    /// Stratum of a sample from `dataset`, falling back to the accuracy rule
    /// for instances outside the fitted assignment (e.g. test instances).
    pub fn stratum_for(&self, dataset: &Dataset, instance_id: &str) -> usize {
        self.stratum_of(instance_id).unwrap_or_else(|| {
            let acc = dataset
                .per_instance_accuracy
                .get(instance_id)
                .copied()
                .unwrap_or(0.0);
            self.stratum_for_accuracy(acc)
        })
    }
}

/// Assign each instance to a difficulty stratum using quantile cuts of the
/// per-instance accuracy distribution. Empty cuts put everything in one
/// stratum.
pub fn stratify_difficulty(dataset: &Dataset, cuts: &[f64]) -> Result<DifficultyStrata> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cuts = cuts.to_vec();
    cuts.sort_by(f64::total_cmp);
    if cuts.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
        return Err(Error::ConfigInvalid(
            "difficulty cuts must lie strictly inside (0, 1)".into(),
        ));
    }
    let mut accuracies: Vec<f64> = dataset.per_instance_accuracy.values().copied().collect();
    accuracies.sort_by(f64::total_cmp);
    let cut_values: Vec<f64> = cuts.iter().map(|&p| quantile_type7(&accuracies, p)).collect();

    let strata = DifficultyStrata {
        quantile_cuts: cuts,
        cut_values,
        assignment: BTreeMap::new(),
    };
    let assignment = dataset
        .per_instance_accuracy
        .iter()
        .map(|(id, &acc)| (id.clone(), strata.stratum_for_accuracy(acc)))
        .collect();
    Ok(DifficultyStrata { assignment, ..strata })
}

/// Per-stratum confusion matrices (row = true label, column = prediction),
/// smoothed additively so rows stay usable after restriction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MnlMixture {
    /// `matrices[stratum][true_label][predicted_label]`, row-stochastic.
    matrices: Vec<Vec<Vec<f64>>>,
    pub epsilon: f64,
}

impl MnlMixture {
    /// Build a mixture directly from row-stochastic matrices.
    pub fn from_matrices(matrices: Vec<Vec<Vec<f64>>>, epsilon: f64) -> Self {
        Self { matrices, epsilon }
    }

    pub fn strata(&self) -> usize {
        self.matrices.len()
    }

    pub fn label_count(&self) -> usize {
        self.matrices[0].len()
    }

    pub fn matrix(&self, stratum: usize) -> &Vec<Vec<f64>> {
        &self.matrices[stratum]
    }

    pub fn row(&self, stratum: usize, true_label: usize) -> &[f64] {
        &self.matrices[stratum][true_label]
    }
}

/// Fit one confusion matrix per difficulty stratum from human-alone
/// predictions: `theta[y][p] = (count(p | y, d) + eps) / (count(y, d) + eps L)`.
pub fn fit_confusion(
    dataset: &Dataset,
    strata: &DifficultyStrata,
    epsilon: f64,
) -> Result<MnlMixture> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if epsilon < 0.0 {
        return Err(Error::ConfigInvalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let l = dataset.label_space.len();
    let s = strata.count();
    let mut counts = vec![vec![vec![0usize; l]; l]; s];
    let mut stratum_totals = vec![0usize; s];
    for sample in &dataset.samples {
        let d = strata.stratum_for(dataset, &sample.instance_id);
        counts[d][sample.true_label][sample.human_prediction] += 1;
        stratum_totals[d] += 1;
    }
    if let Some(empty) = stratum_totals.iter().position(|&t| t == 0) {
        return Err(Error::EmptyStratum(empty));
    }
    let matrices = counts
        .into_iter()
        .map(|per_stratum| {
            per_stratum
                .into_iter()
                .map(|row| {
                    let total: usize = row.iter().sum();
                    let denom = total as f64 + epsilon * l as f64;
                    row.into_iter()
                        .map(|c| if denom > 0.0 { (c as f64 + epsilon) / denom } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(MnlMixture { matrices, epsilon })
}

/// Probability that the modeled expert predicts the true label from a shown
/// set: zero when the set excludes the label, otherwise the diagonal mass
/// renormalized over the set members.
pub fn success_probability(
    mixture: &MnlMixture,
    true_label: usize,
    stratum: usize,
    set: &PredictionSet,
) -> Result<f64> {
    if !set.contains(true_label) {
        return Ok(0.0);
    }
    let row = mixture.row(stratum, true_label);
    let denom: f64 = set.members.iter().map(|&m| row[m]).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateRow(true_label));
    }
    Ok(row[true_label] / denom)
}

/// Distribution over the set members the modeled expert draws from.
pub fn predict_distribution(
    mixture: &MnlMixture,
    true_label: usize,
    stratum: usize,
    set: &PredictionSet,
) -> Result<Vec<(usize, f64)>> {
    let row = mixture.row(stratum, true_label);
    let denom: f64 = set.members.iter().map(|&m| row[m]).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateRow(true_label));
    }
    Ok(set.members.iter().map(|&m| (m, row[m] / denom)).collect())
}

/// Sample a prediction from the restricted, renormalized confusion row.
/// Always a member of the shown set.
pub fn sample_prediction<R: Rng>(
    mixture: &MnlMixture,
    true_label: usize,
    stratum: usize,
    set: &PredictionSet,
    rng: &mut R,
) -> Result<usize> {
    let dist = predict_distribution(mixture, true_label, stratum, set)?;
    let draw: f64 = rng.gen();
    let mut cum = 0.0;
    for (label, p) in &dist {
        cum += p;
        if draw < cum {
            return Ok(*label);
        }
    }
    Ok(dist.last().expect("set non-empty").0)
}

/// Closed-form accuracy estimate `A(lambda)`: the mean success probability
/// over test samples, with sets built per instance at `lambda`.
pub fn estimate_accuracy(
    mixture: &MnlMixture,
    strata: &DifficultyStrata,
    test: &Dataset,
    predictor: &SetPredictor,
    lambda: f64,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for sample in &test.samples {
        let set = predictor.set_for(&sample.instance_id, &sample.scores, lambda)?;
        let d = strata.stratum_for(test, &sample.instance_id);
        total += success_probability(mixture, sample.true_label, d, &set)?;
    }
    Ok(total / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelSpace, Sample, ScoreVector};
    use crate::predictor::PredictorKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(id: &str, truth: usize, pred: usize) -> Sample {
        Sample {
            instance_id: id.into(),
            noise_level: None,
            scores: ScoreVector::new(vec![0.5, 0.3, 0.2]).unwrap(),
            true_label: truth,
            human_prediction: pred,
            participant_id: None,
        }
    }

    fn accuracy_fixture() -> Dataset {
        // Four instances with accuracies 0.2, 0.4, 0.9, 1.0 over ten
        // predictions each.
        let mut samples = Vec::new();
        for (idx, acc) in [(0usize, 2usize), (1, 4), (2, 9), (3, 10)] {
            let id = format!("i{idx}");
            for p in 0..10 {
                let correct = p < acc;
                samples.push(sample(&id, 0, if correct { 0 } else { 1 }));
            }
        }
        Dataset::from_samples(LabelSpace::new(vec!["a", "b", "c"]).unwrap(), samples).unwrap()
    }

    #[test]
    fn stratify_median_cut() {
        let ds = accuracy_fixture();
        let strata = stratify_difficulty(&ds, &[0.5]).unwrap();
        // Median of {0.2, 0.4, 0.9, 1.0} by linear interpolation is 0.65.
        assert!((strata.cut_values[0] - 0.65).abs() < 1e-12);
        assert_eq!(strata.stratum_of("i0"), Some(0));
        assert_eq!(strata.stratum_of("i1"), Some(0));
        assert_eq!(strata.stratum_of("i2"), Some(1));
        assert_eq!(strata.stratum_of("i3"), Some(1));
    }

    #[test]
    fn stratify_no_cuts_single_stratum() {
        let ds = accuracy_fixture();
        let strata = stratify_difficulty(&ds, &[]).unwrap();
        assert_eq!(strata.count(), 1);
        assert!(strata.assignment.values().all(|&d| d == 0));
    }

    #[test]
    fn stratify_constant_accuracy_stays_low() {
        // Ties at the cut fall into the lower stratum.
        let samples: Vec<Sample> = (0..6).map(|i| sample(&format!("i{i}"), 0, 0)).collect();
        let ds =
            Dataset::from_samples(LabelSpace::new(vec!["a", "b", "c"]).unwrap(), samples).unwrap();
        let strata = stratify_difficulty(&ds, &[0.5]).unwrap();
        assert!(strata.assignment.values().all(|&d| d == 0));
    }

    fn one_stratum(ds: &Dataset) -> DifficultyStrata {
        stratify_difficulty(ds, &[]).unwrap()
    }

    #[test]
    fn confusion_counts_by_hand() {
        // Ten predictions for truth 0: eight hits, two confusions with 1.
        let mut samples = Vec::new();
        for p in 0..10 {
            samples.push(sample("i0", 0, if p < 8 { 0 } else { 1 }));
        }
        let ds =
            Dataset::from_samples(LabelSpace::new(vec!["dog", "cat", "truck"]).unwrap(), samples)
                .unwrap();
        let strata = one_stratum(&ds);
        let mixture = fit_confusion(&ds, &strata, 0.0).unwrap();
        let row = mixture.row(0, 0);
        assert!((row[0] - 0.8).abs() < 1e-12);
        assert!((row[1] - 0.2).abs() < 1e-12);
        assert_eq!(row[2], 0.0);
    }

    #[test]
    fn confusion_unseen_row_is_uniform() {
        let ds = Dataset::from_samples(
            LabelSpace::new(vec!["a", "b", "c"]).unwrap(),
            vec![sample("i0", 0, 0)],
        )
        .unwrap();
        let strata = one_stratum(&ds);
        let mixture = fit_confusion(&ds, &strata, 1e-6).unwrap();
        let row = mixture.row(0, 2); // truth 2 never observed
        for &v in row {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn confusion_huge_epsilon_washes_out_counts() {
        let mut samples = Vec::new();
        for _ in 0..10 {
            samples.push(sample("i0", 0, 0));
        }
        let ds =
            Dataset::from_samples(LabelSpace::new(vec!["a", "b", "c"]).unwrap(), samples).unwrap();
        let strata = one_stratum(&ds);
        let mixture = fit_confusion(&ds, &strata, 1e9).unwrap();
        let row = mixture.row(0, 0);
        for &v in row {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    fn set(members: &[usize]) -> PredictionSet {
        PredictionSet { members: members.to_vec(), lambda: 0.5, predictor: PredictorKind::Threshold }
    }

    fn hand_mixture() -> MnlMixture {
        MnlMixture {
            matrices: vec![vec![
                vec![0.8, 0.15, 0.05],
                vec![0.1, 0.8, 0.1],
                vec![0.2, 0.2, 0.6],
            ]],
            epsilon: 0.0,
        }
    }

    #[test]
    fn success_probability_cases() {
        let m = hand_mixture();
        assert_eq!(success_probability(&m, 0, 0, &set(&[0])).unwrap(), 1.0);
        assert_eq!(success_probability(&m, 0, 0, &set(&[1, 2])).unwrap(), 0.0);
        let p = success_probability(&m, 0, 0, &set(&[0, 1])).unwrap();
        assert!((p - 0.8 / 0.95).abs() < 1e-12);
    }

    #[test]
    fn success_probability_monotone_under_growth() {
        let m = hand_mixture();
        let small = success_probability(&m, 0, 0, &set(&[0, 1])).unwrap();
        let large = success_probability(&m, 0, 0, &set(&[0, 1, 2])).unwrap();
        assert!(small >= large);
    }

    #[test]
    fn sampling_matches_closed_form() {
        let m = hand_mixture();
        let shown = set(&[0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trials = 100_000;
        let mut hits = 0usize;
        for _ in 0..trials {
            let p = sample_prediction(&m, 0, 0, &shown, &mut rng).unwrap();
            assert!(shown.contains(p));
            if p == 0 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / trials as f64;
        let p = 0.8 / 0.95;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (p_hat - p).abs() < 3.0 * sigma + 1e-9,
            "empirical {p_hat} vs closed form {p}"
        );
    }

    #[test]
    fn singleton_set_is_certain() {
        let m = hand_mixture();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(sample_prediction(&m, 1, 0, &set(&[1]), &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn full_set_sampling_matches_row() {
        let m = hand_mixture();
        let shown = set(&[0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            counts[sample_prediction(&m, 2, 0, &shown, &mut rng).unwrap()] += 1;
        }
        let row = m.row(0, 2).to_vec();
        for (label, &c) in counts.iter().enumerate() {
            let p_hat = c as f64 / trials as f64;
            let sigma = (row[label] * (1.0 - row[label]) / trials as f64).sqrt();
            assert!(
                (p_hat - row[label]).abs() < 3.0 * sigma + 1e-9,
                "label {label}: empirical {p_hat} vs {}",
                row[label]
            );
        }
    }

    #[test]
    fn distribution_sums_to_one() {
        let m = hand_mixture();
        for members in [vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![2]] {
            let d = predict_distribution(&m, 0, 0, &set(&members)).unwrap();
            let total: f64 = d.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_row_at_zero_epsilon() {
        let m = MnlMixture {
            matrices: vec![vec![vec![0.0, 0.0, 0.0]; 3]],
            epsilon: 0.0,
        };
        let err = success_probability(&m, 0, 0, &set(&[0, 1])).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow(0)));
    }

    #[test]
    fn accuracy_at_extremes() {
        // Truth always top-ranked: singleton sets give accuracy 1; full sets
        // give the confusion diagonal.
        let samples: Vec<Sample> = (0..5).map(|i| sample(&format!("i{i}"), 0, 0)).collect();
        let ds =
            Dataset::from_samples(LabelSpace::new(vec!["a", "b", "c"]).unwrap(), samples).unwrap();
        let strata = one_stratum(&ds);
        let mixture = fit_confusion(&ds, &strata, 0.0).unwrap();
        let pred = SetPredictor::Threshold;
        let a0 = estimate_accuracy(&mixture, &strata, &ds, &pred, 0.0).unwrap();
        assert_eq!(a0, 1.0);
        let a1 = estimate_accuracy(&mixture, &strata, &ds, &pred, 1.0).unwrap();
        let diag = mixture.row(0, 0)[0];
        assert!((a1 - diag).abs() < 1e-12);
    }
}
