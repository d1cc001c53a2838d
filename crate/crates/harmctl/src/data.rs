//! Domain types and dataset plumbing: label spaces, score vectors, CSV
//! ingestion, joining, and reproducible calibration/test splitting.
//!
//! File schemas:
//!
//! - scores CSV: header `instance_id,noise,<label_1>,...,<label_L>`, one row
//!   per instance, scores as decimal text;
//! - humans CSV: header `instance_id,participant_id,true_label,prediction`;
//! - humans-with-sets CSV: header
//!   `instance_id,participant_id,set_members,prediction` with `set_members`
//!   pipe-separated label names.
//!
//! Labels are resolved by name through the header, never by column position.
//! Splitting is by unique instance id with a ChaCha8 generator seeded from a
//! user seed and a Fisher-Yates shuffle over the lexicographically sorted id
//! list, so a split is a function of the id set and the seed alone.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for clamping tiny score-domain violations from decimal parsing.
const SCORE_CLAMP_EPS: f64 = 1e-9;
/// `--strict` checks that each score row sums to 1 within this tolerance.
const STRICT_SUM_TOL: f64 = 1e-3;

/// Ordered set of label names. Indices are stable for a loaded dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::ConfigInvalid(
                "label space needs at least two labels".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::ConfigInvalid(format!(
                    "duplicate label name `{name}`"
                )));
            }
        }
        Ok(Self { names, index })
    }

    /// Synthetic label space `class_00 .. class_{L-1}`.
    pub fn synthetic(count: usize) -> Self {
        Self::new((0..count).map(|i| format!("class_{i:02}")).collect::<Vec<_>>())
            .expect("synthetic label space is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Classifier softmax scores for one instance, indexed by label.
///
/// Scores are accepted without renormalization: the threshold predictor only
/// compares scores against `1 - lambda`, so rescaling would silently change
/// prediction sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        for (i, &s) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::ScoreOutOfRange {
                    row: 0,
                    label: format!("#{i}"),
                    value: s,
                });
            }
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, label: usize) -> f64 {
        self.0[label]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One (instance, participant) human-alone prediction joined with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub instance_id: String,
    pub noise_level: Option<u32>,
    pub scores: ScoreVector,
    pub true_label: usize,
    pub human_prediction: usize,
    pub participant_id: Option<String>,
}

/// A prediction made from within a shown prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetPredictionRecord {
    pub instance_id: String,
    pub participant_id: String,
    pub set_members: Vec<usize>,
    pub human_prediction: usize,
}

/// A human-alone prediction before joining with scores.
#[derive(Debug, Clone)]
pub struct HumanPrediction {
    pub instance_id: String,
    pub participant_id: String,
    pub prediction: usize,
}

/// Per-instance score row from the scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub noise: Option<u32>,
    pub scores: ScoreVector,
}

/// Scores keyed by instance id.
pub type ScoreTable = BTreeMap<String, ScoreRow>;

/// A joined dataset of samples plus per-instance expert accuracy.
///
/// `per_instance_accuracy` is the unweighted mean of `1{prediction == truth}`
/// over every prediction of the instance. (Per-participant averaging first
/// would be an alternative; the unweighted mean over predictions is used
/// throughout.)
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub label_space: LabelSpace,
    pub samples: Vec<Sample>,
    pub per_instance_accuracy: BTreeMap<String, f64>,
}

impl Dataset {
    pub fn from_samples(label_space: LabelSpace, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for s in &samples {
            if s.true_label >= label_space.len() || s.human_prediction >= label_space.len() {
                return Err(Error::ConfigInvalid(format!(
                    "sample `{}` carries a label index outside the label space",
                    s.instance_id
                )));
            }
            let e = tally.entry(s.instance_id.clone()).or_insert((0, 0));
            e.1 += 1;
            if s.human_prediction == s.true_label {
                e.0 += 1;
            }
        }
        let per_instance_accuracy = tally
            .into_iter()
            .map(|(id, (hits, total))| (id, hits as f64 / total as f64))
            .collect();
        Ok(Self {
            label_space,
            samples,
            per_instance_accuracy,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Unique instance ids in first-appearance order.
    pub fn instance_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.samples {
            if seen.insert(s.instance_id.as_str()) {
                out.push(s.instance_id.as_str());
            }
        }
        out
    }

    /// Fraction of samples where the human-alone prediction is correct.
    pub fn human_accuracy(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        let hits = self
            .samples
            .iter()
            .filter(|s| s.human_prediction == s.true_label)
            .count();
        hits as f64 / self.samples.len() as f64
    }
}

/// Read the label space from the scores CSV header (columns after
/// `instance_id,noise`).
pub fn read_label_space<P: AsRef<Path>>(path: P) -> Result<LabelSpace> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?;
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[0] != "instance_id" || cols[1] != "noise" {
        return Err(Error::MissingColumn("instance_id,noise,<labels...>".into()));
    }
    LabelSpace::new(cols[2..].iter().map(|s| s.to_string()).collect::<Vec<_>>())
}

/// Load classifier scores.
///
/// Scores are clamped only when the violation is within 1e-9; anything larger
/// is rejected. With `strict`, each row must sum to 1 within 1e-3.
pub fn load_scores<P: AsRef<Path>>(
    path: P,
    label_space: &LabelSpace,
    strict: bool,
) -> Result<ScoreTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"instance_id") {
        return Err(Error::MissingColumn("instance_id".into()));
    }
    if cols.get(1) != Some(&"noise") {
        return Err(Error::MissingColumn("noise".into()));
    }
    // Map each label to its column, by name.
    let mut label_cols = Vec::with_capacity(label_space.len());
    for name in label_space.names() {
        let col = cols
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        label_cols.push(col);
    }

    let mut table = ScoreTable::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2; // 1-based, after the header
        let record = record?;
        let id = record
            .get(0)
            .ok_or_else(|| Error::MissingColumn("instance_id".into()))?
            .to_string();
        let noise_text = record.get(1).unwrap_or("");
        let noise = if noise_text.is_empty() {
            None
        } else {
            Some(noise_text.parse::<u32>().map_err(|_| {
                Error::ConfigInvalid(format!("row {row}: bad noise value `{noise_text}`"))
            })?)
        };
        let mut scores = Vec::with_capacity(label_space.len());
        for (label_idx, &col) in label_cols.iter().enumerate() {
            let text = record
                .get(col)
                .ok_or_else(|| Error::MissingColumn(label_space.name(label_idx).into()))?;
            let mut value: f64 = text.parse().map_err(|_| Error::ScoreOutOfRange {
                row,
                label: label_space.name(label_idx).into(),
                value: f64::NAN,
            })?;
            if (-SCORE_CLAMP_EPS..0.0).contains(&value) {
                value = 0.0;
            }
            if value > 1.0 && value <= 1.0 + SCORE_CLAMP_EPS {
                value = 1.0;
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ScoreOutOfRange {
                    row,
                    label: label_space.name(label_idx).into(),
                    value,
                });
            }
            scores.push(value);
        }
        if strict {
            let sum: f64 = scores.iter().sum();
            if (sum - 1.0).abs() > STRICT_SUM_TOL {
                return Err(Error::ScoreOutOfRange {
                    row,
                    label: format!("<sum {sum}>"),
                    value: sum,
                });
            }
        }
        if table
            .insert(id.clone(), ScoreRow { noise, scores: ScoreVector(scores) })
            .is_some()
        {
            return Err(Error::DuplicateInstance(id));
        }
    }
    Ok(table)
}

/// Load human-alone predictions plus the ground-truth label map.
pub fn load_human_predictions<P: AsRef<Path>>(
    path: P,
    label_space: &LabelSpace,
) -> Result<(Vec<HumanPrediction>, BTreeMap<String, usize>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let id_col = find("instance_id")?;
    let participant_col = find("participant_id")?;
    let truth_col = find("true_label")?;
    let pred_col = find("prediction")?;

    let mut predictions = Vec::new();
    let mut truths: BTreeMap<String, usize> = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record?;
        let lookup = |col: usize, name: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let id = lookup(id_col, "instance_id")?.to_string();
        let participant = lookup(participant_col, "participant_id")?.to_string();
        let truth_name = lookup(truth_col, "true_label")?;
        let pred_name = lookup(pred_col, "prediction")?;
        let truth = label_space
            .index_of(truth_name)
            .ok_or_else(|| Error::UnknownLabel { row, name: truth_name.into() })?;
        let prediction = label_space
            .index_of(pred_name)
            .ok_or_else(|| Error::UnknownLabel { row, name: pred_name.into() })?;
        if let Some(&prev) = truths.get(&id) {
            if prev != truth {
                return Err(Error::TrueLabelConflict(id));
            }
        } else {
            truths.insert(id.clone(), truth);
        }
        predictions.push(HumanPrediction { instance_id: id, participant_id: participant, prediction });
    }
    Ok((predictions, truths))
}

/// Load humans-with-sets records (`set_members` pipe-separated label names).
pub fn load_set_records<P: AsRef<Path>>(
    path: P,
    label_space: &LabelSpace,
) -> Result<Vec<SetPredictionRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let id_col = find("instance_id")?;
    let participant_col = find("participant_id")?;
    let members_col = find("set_members")?;
    let pred_col = find("prediction")?;

    let mut records = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record?;
        let id = record.get(id_col).unwrap_or("").to_string();
        let participant = record.get(participant_col).unwrap_or("").to_string();
        let members_text = record.get(members_col).unwrap_or("");
        let pred_name = record.get(pred_col).unwrap_or("");
        let mut members = Vec::new();
        for name in members_text.split('|').filter(|s| !s.is_empty()) {
            let idx = label_space
                .index_of(name)
                .ok_or_else(|| Error::UnknownLabel { row, name: name.into() })?;
            if members.contains(&idx) {
                return Err(Error::InvalidSetRecord {
                    row,
                    reason: format!("duplicate member `{name}`"),
                });
            }
            members.push(idx);
        }
        if members.is_empty() {
            return Err(Error::InvalidSetRecord { row, reason: "empty set".into() });
        }
        let prediction = label_space
            .index_of(pred_name)
            .ok_or_else(|| Error::UnknownLabel { row, name: pred_name.into() })?;
        if !members.contains(&prediction) {
            return Err(Error::InvalidSetRecord {
                row,
                reason: format!("prediction `{pred_name}` outside the shown set"),
            });
        }
        records.push(SetPredictionRecord {
            instance_id: id,
            participant_id: participant,
            set_members: members,
            human_prediction: prediction,
        });
    }
    Ok(records)
}

/// Join scores, predictions, and ground truths into a [`Dataset`].
///
/// With `noise_filter`, only instances whose score row carries that noise
/// level are retained.
pub fn join_dataset(
    label_space: &LabelSpace,
    scores: &ScoreTable,
    predictions: &[HumanPrediction],
    true_labels: &BTreeMap<String, usize>,
    noise_filter: Option<u32>,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    for p in predictions {
        let row = scores
            .get(&p.instance_id)
            .ok_or_else(|| Error::OrphanPrediction(p.instance_id.clone()))?;
        if let Some(omega) = noise_filter {
            if row.noise != Some(omega) {
                continue;
            }
        }
        let truth = *true_labels
            .get(&p.instance_id)
            .ok_or_else(|| Error::MissingTrueLabel(p.instance_id.clone()))?;
        samples.push(Sample {
            instance_id: p.instance_id.clone(),
            noise_level: row.noise,
            scores: row.scores.clone(),
            true_label: truth,
            human_prediction: p.prediction,
            participant_id: Some(p.participant_id.clone()),
        });
    }
    Dataset::from_samples(label_space.clone(), samples)
}

/// Split a dataset by unique instance id.
///
/// All predictions for one instance land on the same side. The calibration
/// side gets `round(calib_frac * #instances)` instances. Deterministic for a
/// fixed seed: ids are sorted, then shuffled with ChaCha8(seed).
pub fn split_dataset(dataset: &Dataset, calib_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(calib_frac > 0.0 && calib_frac < 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "calib_frac must lie in (0, 1), got {calib_frac}"
        )));
    }
    let mut ids: Vec<&str> = dataset
        .per_instance_accuracy
        .keys()
        .map(|s| s.as_str())
        .collect();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let take = (calib_frac * ids.len() as f64).round() as usize;
    let calib_ids: BTreeSet<&str> = ids[..take].iter().copied().collect();

    let mut calib = Vec::new();
    let mut test = Vec::new();
    for s in &dataset.samples {
        if calib_ids.contains(s.instance_id.as_str()) {
            calib.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    if calib.is_empty() || test.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "split left one side empty (calib_frac {calib_frac}, {} instances)",
            ids.len()
        )));
    }
    Ok((
        Dataset::from_samples(dataset.label_space.clone(), calib)?,
        Dataset::from_samples(dataset.label_space.clone(), test)?,
    ))
}

/// Write the scores table of a dataset back to the scores CSV schema.
pub fn write_scores_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["instance_id".to_string(), "noise".to_string()];
    header.extend(dataset.label_space.names().iter().cloned());
    w.write_record(&header)?;
    let mut written = BTreeSet::new();
    for s in &dataset.samples {
        if !written.insert(s.instance_id.as_str()) {
            continue;
        }
        let mut row = vec![
            s.instance_id.clone(),
            s.noise_level.map(|n| n.to_string()).unwrap_or_default(),
        ];
        row.extend(s.scores.as_slice().iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the human-alone predictions of a dataset back to the humans CSV schema.
pub fn write_humans_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["instance_id", "participant_id", "true_label", "prediction"])?;
    for s in &dataset.samples {
        w.write_record([
            s.instance_id.as_str(),
            s.participant_id.as_deref().unwrap_or(""),
            dataset.label_space.name(s.true_label),
            dataset.label_space.name(s.human_prediction),
        ])?;
    }
    w.flush()?;
    Ok(())
}
