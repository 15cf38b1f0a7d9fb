//! Group NER: multiclass ridge classification with weight-sorted,
//! group-nested model order selection.
//!
//! Labels are regressed onto one-hot targets; the per-class ridge
//! weights sort the features (interleaved across classes, deduplicated),
//! the chain grows by fixed-size groups of that order, and the NER test
//! with a cross-validated scale picks how many groups survive.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_value, parse_field, row_is_numeric, IndexSet};
use crate::error::{Error, Result};
use crate::model::clamp_seer;
use crate::numerics::{chi2_1_inv_cdf, clamp_probability, ridge_solve};
use crate::rng::CounterRng;
use crate::selection::ner_select;

/// Features with integer class labels in 1..=class_count.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_count: usize,
    sample_count: usize,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let feature_count = features.len();
        if feature_count == 0 {
            return Err(Error::data("labeled dataset needs at least one feature"));
        }
        let sample_count = features[0].len();
        if labels.len() != sample_count {
            return Err(Error::dims(format!(
                "{} labels for {} samples",
                labels.len(),
                sample_count
            )));
        }
        if class_count < 2 {
            return Err(Error::data("labeled dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > class_count) {
            return Err(Error::data(format!(
                "label {bad} outside 1..={class_count}"
            )));
        }
        let mut flat = Vec::with_capacity(feature_count * sample_count);
        for (j, row) in features.iter().enumerate() {
            if row.len() != sample_count {
                return Err(Error::data(format!("feature row {} length mismatch", j + 1)));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::data("labeled dataset contains a non-finite value"));
            }
            flat.extend_from_slice(row);
        }
        Ok(LabeledDataset {
            features: flat,
            labels,
            feature_count,
            sample_count,
            class_count,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// 1-based class labels, one per sample.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_row(&self, index: usize) -> &[f64] {
        let n = self.sample_count;
        &self.features[index * n..(index + 1) * n]
    }

    pub fn rows_for(&self, active: &IndexSet) -> Vec<&[f64]> {
        active.indices().iter().map(|&j| self.feature_row(j)).collect()
    }

    pub fn select_samples(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::data("sample selection is empty"));
        }
        let mut features = Vec::with_capacity(self.feature_count * keep.len());
        for j in 0..self.feature_count {
            let row = self.feature_row(j);
            features.extend(keep.iter().map(|&i| row[i]));
        }
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        Ok(LabeledDataset {
            features,
            labels,
            feature_count: self.feature_count,
            sample_count: keep.len(),
            class_count: self.class_count,
        })
    }

    /// Column of the sample's values over an active set.
    pub fn sample_values(&self, active: &IndexSet, sample: usize) -> Vec<f64> {
        active.indices().iter().map(|&j| self.feature_row(j)[sample]).collect()
    }

    /// CSV with feature columns plus an integer `label` column (the last
    /// column when there is no header).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let rows = crate::dataset::parse_csv(reader)?;
        if rows.is_empty() {
            return Err(Error::data("empty CSV"));
        }
        let (label_col, data_rows) = if row_is_numeric(&rows[0]) {
            (rows[0].len() - 1, &rows[..])
        } else {
            let pos = rows[0]
                .iter()
                .position(|h| h.eq_ignore_ascii_case("label"))
                .ok_or_else(|| Error::data("missing `label` column in CSV header"))?;
            (pos, &rows[1..])
        };
        if data_rows.is_empty() {
            return Err(Error::data("CSV has a header but no data rows"));
        }
        let width = data_rows[0].len();
        if width < 2 {
            return Err(Error::data("labeled CSV needs at least one feature column"));
        }
        let sample_count = data_rows.len();
        let feature_count = width - 1;
        let mut features = vec![0.0; feature_count * sample_count];
        let mut labels = vec![0usize; sample_count];
        for (i, row) in data_rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::data(format!("CSV row {} width mismatch", i + 1)));
            }
            let mut jf = 0;
            for (c, field) in row.iter().enumerate() {
                if c == label_col {
                    let v = parse_field(field, i, c)?;
                    if v.fract() != 0.0 || v < 1.0 {
                        return Err(Error::data(format!(
                            "label `{field}` at row {} is not a positive integer",
                            i + 1
                        )));
                    }
                    labels[i] = v as usize;
                } else {
                    features[jf * sample_count + i] = parse_field(field, i, c)?;
                    jf += 1;
                }
            }
        }
        let class_count = *labels.iter().max().expect("non-empty labels");
        Self::new(
            (0..feature_count)
                .map(|j| features[j * sample_count..(j + 1) * sample_count].to_vec())
                .collect(),
            labels,
            class_count.max(2),
        )
    }
}

/// One-hot encoding of 1-based labels: row i carries a single 1 in
/// column labels[i]. Returned as one column per class.
pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > class_count) {
        return Err(Error::invalid(format!("label {bad} outside 1..={class_count}")));
    }
    let mut cols = vec![vec![0.0; labels.len()]; class_count];
    for (i, &l) in labels.iter().enumerate() {
        cols[l - 1][i] = 1.0;
    }
    Ok(cols)
}

/// Multiclass ridge classifier over an active feature set.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    /// One weight column per class, each with one entry per active feature.
    pub weights: Vec<Vec<f64>>,
    pub active: IndexSet,
    pub tau: f64,
}

impl RidgeModel {
    /// W = (X X^T + tau I)^{-1} X Y on the active rows.
    pub fn train(data: &LabeledDataset, active: &IndexSet, tau: f64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(Error::invalid("RidgeModel: tau must be positive"));
        }
        let targets = one_hot(data.labels(), data.class_count())?;
        let rows = data.rows_for(active);
        let weights = ridge_solve(&rows, &targets, tau)?;
        Ok(RidgeModel { weights, active: active.clone(), tau })
    }

    /// Predicted 1-based class for a sample restricted to the active set;
    /// ties go to the lowest class index.
    pub fn predict(&self, sample: &[f64]) -> Result<usize> {
        if sample.len() != self.active.len() {
            return Err(Error::dims(format!(
                "sample has {} values for {} active features",
                sample.len(),
                self.active.len()
            )));
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, w) in self.weights.iter().enumerate() {
            let score: f64 = w.iter().zip(sample).map(|(a, b)| a * b).sum();
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        Ok(best + 1)
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64> {
        let mut hits = 0;
        for i in 0..data.sample_count() {
            let x = data.sample_values(&self.active, i);
            if self.predict(&x)? == data.labels()[i] {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.sample_count() as f64)
    }

    /// Weight matrix as CSV, one row per active feature (1-based index in
    /// the first column), one column per class.
    pub fn write_weights_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header: Vec<String> = std::iter::once("feature".to_string())
            .chain((1..=self.weights.len()).map(|j| format!("class{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (pos, &feat) in self.active.indices().iter().enumerate() {
            let mut fields = vec![(feat + 1).to_string()];
            fields.extend(self.weights.iter().map(|w| format_value(w[pos])));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Interleaved, deduplicated per-class weight order: sort each class by
/// descending |weight| (ties to the lower index), interleave position by
/// position across classes, and keep the first occurrence of each index.
pub fn ridge_weight_sort(model: &RidgeModel) -> crate::baselines::SortedFeatures {
    let l = model.active.len();
    let class_orders: Vec<Vec<usize>> = model
        .weights
        .iter()
        .map(|w| {
            let mut idx: Vec<usize> = (0..l).collect();
            idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut seen = vec![false; l];
    let mut order = Vec::with_capacity(l);
    for pos in 0..l {
        for class_order in &class_orders {
            let local = class_order[pos];
            if !seen[local] {
                seen[local] = true;
                order.push(model.active.indices()[local]);
            }
        }
    }
    crate::baselines::SortedFeatures {
        order,
        algorithm: crate::baselines::SortAlgorithm::RidgeWeight,
    }
}

/// Configuration of the group NER selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupNerConfig {
    pub group_size: usize,
    /// Number of groups in the nested chain.
    pub depth: usize,
    pub tau: f64,
    /// Threshold scales swept by validation; defaults to quarter-decade
    /// steps from 1e-1 to 1e3.
    pub c_grid: Vec<f64>,
    /// Held-out fraction of the stratified validation split.
    pub validation_split: f64,
    /// Features whose largest absolute weight falls below this fraction
    /// of the global maximum are pruned.
    pub prune_fraction: f64,
    pub seed: u64,
}

impl Default for GroupNerConfig {
    fn default() -> Self {
        GroupNerConfig {
            group_size: 10,
            depth: 25,
            tau: 1.0,
            c_grid: default_c_grid(),
            validation_split: 0.2,
            prune_fraction: 0.1,
            seed: 0,
        }
    }
}

/// The grid 10^-1, 10^-0.75, ..., 10^3 (17 values).
pub fn default_c_grid() -> Vec<f64> {
    (0..17).map(|i| 10f64.powf(-1.0 + 0.25 * i as f64)).collect()
}

/// Ridge empirical risk of a chain step: summed per-class squared
/// residuals over n plus tau times the squared weight norm, evaluated at
/// its exact minimizer.
fn ridge_chain_fit(
    data: &LabeledDataset,
    active: &IndexSet,
    targets: &[Vec<f64>],
    tau: f64,
) -> Result<(Vec<Vec<f64>>, f64, f64)> {
    let n = data.sample_count();
    let rows = data.rows_for(active);
    // The per-sample objective ||y - X^T w||^2 / n + tau ||w||^2 is
    // minimized by the ridge system with penalty n * tau.
    let weights = ridge_solve(&rows, targets, n as f64 * tau)?;
    let mut rss = 0.0;
    let mut wnorm2 = 0.0;
    let mut sigma2 = 0.0;
    for (w, t) in weights.iter().zip(targets) {
        let mut residual = t.clone();
        for (pos, row) in rows.iter().enumerate() {
            let c = w[pos];
            for (r, &x) in residual.iter_mut().zip(row.iter()) {
                *r -= c * x;
            }
        }
        rss += crate::numerics::norm2(&residual);
        wnorm2 += crate::numerics::norm2(w);
        let mean = residual.iter().sum::<f64>() / n as f64;
        sigma2 += residual.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
    }
    let risk = rss / n as f64 + tau * wnorm2;
    let sigma2_hat = if n > 1 { sigma2 / (n - 1) as f64 } else { 0.0 };
    Ok((weights, risk, sigma2_hat))
}

/// Result of the group NER selection.
#[derive(Debug, Clone)]
pub struct GroupSelection {
    /// Surviving feature indices after pruning.
    pub selected: IndexSet,
    pub chosen_c: f64,
    /// Selected model order (number of groups) at the chosen c.
    pub k_hat: usize,
    /// Validation accuracy of the chosen model before pruning.
    pub validation_accuracy: f64,
    /// Final classifier trained on all data over the pruned features.
    pub model: RidgeModel,
    /// Chain diagnostics: per-step ridge risks and SEERs.
    pub risks: Vec<f64>,
    pub seers: Vec<f64>,
}

/// Stratified train/validation split: within each class the samples are
/// shuffled by the seed and the head goes to training.
fn stratified_split(
    data: &LabeledDataset,
    validation_split: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 1..=data.class_count() {
        let members: Vec<usize> = (0..data.sample_count())
            .filter(|&i| data.labels()[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = CounterRng::stream(seed, class as u64);
        let order = rng.sample_distinct(members.len(), members.len());
        let n_train = (((1.0 - validation_split) * members.len() as f64).floor() as usize)
            .clamp(1, members.len());
        for (pos, &o) in order.iter().enumerate() {
            if pos < n_train {
                train.push(members[o]);
            } else {
                val.push(members[o]);
            }
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    if val.is_empty() {
        return Err(Error::data(
            "validation split is empty; reduce validation_split or add samples",
        ));
    }
    Ok((train, val))
}

/// Group NER model order selection with a validated threshold scale.
pub fn group_ner_select(
    data: &LabeledDataset,
    order: &crate::baselines::SortedFeatures,
    config: &GroupNerConfig,
) -> Result<GroupSelection> {
    let g = config.group_size;
    let depth = config.depth;
    if g == 0 || depth == 0 {
        return Err(Error::invalid("group_size and depth must be positive"));
    }
    if depth * g > order.order.len() {
        return Err(Error::invalid(format!(
            "depth {depth} x group {g} exceeds the {} sorted features",
            order.order.len()
        )));
    }
    if config.c_grid.is_empty() {
        return Err(Error::invalid("c_grid must be non-empty"));
    }
    if !(0.0 < config.validation_split && config.validation_split < 1.0) {
        return Err(Error::invalid("validation_split must be inside (0, 1)"));
    }
    let n = data.sample_count();
    let targets = one_hot(data.labels(), data.class_count())?;

    // Nested ridge chain over group prefixes of the sorted order.
    let mut risks = Vec::with_capacity(depth);
    let mut sigma2 = Vec::with_capacity(depth);
    for k in 1..=depth {
        let active = IndexSet::new(order.order[..k * g].to_vec(), data.feature_count())?;
        let (_, risk, s2) = ridge_chain_fit(data, &active, &targets, config.tau)?;
        risks.push(risk);
        sigma2.push(s2);
    }
    let seers: Vec<f64> =
        risks.windows(2).map(|w| clamp_seer(w[0] - w[1])).collect();

    // Thresholds for tests T_2..T_depth: c * (sigma2_k / n) * F1_inv(1 - sigma2_k / n).
    let threshold = |c: f64, k: usize| {
        let rate = sigma2[k] / n as f64;
        let q = chi2_1_inv_cdf(clamp_probability(1.0 - rate))
            .expect("clamped probability is inside [0, 1)");
        c * rate * q
    };

    let (train_idx, val_idx) = stratified_split(data, config.validation_split, config.seed)?;
    let train = data.select_samples(&train_idx)?;
    let val = data.select_samples(&val_idx)?;

    // Model order per grid value; identical orders share one refit.
    let k_for_c: Vec<usize> = config
        .c_grid
        .iter()
        .map(|&c| {
            let thresholds: Vec<f64> = (2..=depth).map(|k| threshold(c, k - 1)).collect();
            ner_select(&seers, &thresholds)
        })
        .collect::<Result<_>>()?;
    let mut distinct: Vec<usize> = k_for_c.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let accuracy_for_k: Vec<(usize, f64)> = distinct
        .par_iter()
        .map(|&k| {
            let active = IndexSet::new(order.order[..k * g].to_vec(), data.feature_count())?;
            let model = RidgeModel::train(&train, &active, config.tau)?;
            Ok((k, model.accuracy(&val)?))
        })
        .collect::<Result<_>>()?;
    let acc_of = |k: usize| {
        accuracy_for_k
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, a)| *a)
            .expect("every distinct order was evaluated")
    };

    // Minimum validation error; ties prefer the more parsimonious model
    // and then the smaller scale.
    let mut chosen = 0;
    for (i, &c) in config.c_grid.iter().enumerate() {
        let cand = (1.0 - acc_of(k_for_c[i]), k_for_c[i], c);
        let best = (1.0 - acc_of(k_for_c[chosen]), k_for_c[chosen], config.c_grid[chosen]);
        if cand.0 < best.0
            || (cand.0 == best.0 && (cand.1 < best.1 || (cand.1 == best.1 && cand.2 < best.2)))
        {
            chosen = i;
        }
    }
    let chosen_c = config.c_grid[chosen];
    let k_hat = k_for_c[chosen];
    let validation_accuracy = acc_of(k_hat);

    // Final model on all data, then prune small weights against the
    // global maximum and retrain on the survivors.
    let active = IndexSet::new(order.order[..k_hat * g].to_vec(), data.feature_count())?;
    let full = RidgeModel::train(data, &active, config.tau)?;
    let selected = if config.prune_fraction > 0.0 {
        let global_max = full
            .weights
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()));
        let cut = config.prune_fraction * global_max;
        let keep: IndexSet = active
            .indices()
            .iter()
            .enumerate()
            .filter(|(pos, _)| {
                full.weights.iter().any(|w| w[*pos].abs() >= cut)
            })
            .map(|(_, &j)| j)
            .collect();
        if keep.is_empty() {
            active.clone()
        } else {
            keep
        }
    } else {
        active.clone()
    };
    let model = RidgeModel::train(data, &selected, config.tau)?;

    Ok(GroupSelection {
        selected,
        chosen_c,
        k_hat,
        validation_accuracy,
        model,
        risks,
        seers,
    })
}

/// JSON export of a group selection (1-based indices).
#[derive(Debug, Serialize, Deserialize)]
pub struct GroupSelectionExport {
    pub selected_indices: Vec<usize>,
    pub chosen_c: f64,
    pub k_hat: usize,
    pub validation_accuracy: f64,
    pub group_size: usize,
    pub tau: f64,
    pub seed: u64,
}

impl GroupSelectionExport {
    pub fn new(sel: &GroupSelection, config: &GroupNerConfig) -> Self {
        GroupSelectionExport {
            selected_indices: sel.selected.to_one_based(),
            chosen_c: sel.chosen_c,
            k_hat: sel.k_hat,
            validation_accuracy: sel.validation_accuracy,
            group_size: config.group_size,
            tau: config.tau,
            seed: config.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("export serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_examples() {
        let m = one_hot(&[1, 2], 2).unwrap();
        assert_eq!(m[0], vec![1.0, 0.0]);
        assert_eq!(m[1], vec![0.0, 1.0]);
        let m3 = one_hot(&[3], 3).unwrap();
        assert_eq!(m3[2], vec![1.0]);
        let same = one_hot(&[2, 2, 2], 2).unwrap();
        assert_eq!(same[0], vec![0.0; 3]);
        assert_eq!(same[1], vec![1.0; 3]);
        assert!(one_hot(&[4], 3).is_err());
        assert!(one_hot(&[0], 3).is_err());
    }

    #[test]
    fn predict_examples() {
        let model = RidgeModel {
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            active: IndexSet::new(vec![0, 1], 2).unwrap(),
            tau: 1.0,
        };
        assert_eq!(model.predict(&[0.9, 0.1]).unwrap(), 1);
        assert_eq!(model.predict(&[0.1, 0.9]).unwrap(), 2);
        assert!(model.predict(&[1.0]).is_err());

        let zeros = RidgeModel {
            weights: vec![vec![0.0], vec![0.0], vec![0.0]],
            active: IndexSet::new(vec![0], 1).unwrap(),
            tau: 1.0,
        };
        assert_eq!(zeros.predict(&[5.0]).unwrap(), 1, "ties go to the lowest class");
    }

    #[test]
    fn interleaved_dedup_order() {
        // Per-class orders [1,2,3] and [2,1,3] (1-based) interleave to
        // [1,2,2,1,3,3] and deduplicate to [1,2,3].
        let model = RidgeModel {
            weights: vec![vec![3.0, 2.0, 1.0], vec![2.0, 3.0, 1.0]],
            active: IndexSet::new(vec![0, 1, 2], 3).unwrap(),
            tau: 1.0,
        };
        let sorted = ridge_weight_sort(&model);
        assert_eq!(sorted.order, vec![0, 1, 2]);
    }

    #[test]
    fn single_class_order_is_descending_weight() {
        let model = RidgeModel {
            weights: vec![vec![0.5, -2.0, 1.0]],
            active: IndexSet::new(vec![0, 1, 2], 3).unwrap(),
            tau: 1.0,
        };
        let sorted = ridge_weight_sort(&model);
        assert_eq!(sorted.order, vec![1, 2, 0]);
    }

    #[test]
    fn weight_ties_break_to_lower_index() {
        let model = RidgeModel {
            weights: vec![vec![1.0, -1.0, 1.0]],
            active: IndexSet::new(vec![0, 1, 2], 3).unwrap(),
            tau: 1.0,
        };
        let sorted = ridge_weight_sort(&model);
        assert_eq!(sorted.order, vec![0, 1, 2]);
    }

    /// Two well-separated classes driven by the first `informative`
    /// features (unit noise keeps them distinguishable from each other);
    /// the rest is pure noise.
    fn separable(seed: u64, n: usize, l: usize, informative: usize) -> LabeledDataset {
        let mut rng = CounterRng::new(seed);
        let labels: Vec<usize> = (0..n).map(|i| 1 + i % 2).collect();
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        let noise = rng.next_normal();
                        if j < informative {
                            let sign = if labels[i] == 1 { 1.0 } else { -1.0 };
                            sign * 2.0 + noise
                        } else {
                            noise
                        }
                    })
                    .collect()
            })
            .collect();
        LabeledDataset::new(rows, labels, 2).unwrap()
    }

    #[test]
    fn ridge_chain_risks_non_increasing() {
        let data = separable(3, 40, 30, 5);
        let targets = one_hot(data.labels(), 2).unwrap();
        let order: Vec<usize> = (0..30).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=3 {
            let active = IndexSet::new(order[..k * 10].to_vec(), 30).unwrap();
            let (_, risk, _) = ridge_chain_fit(&data, &active, &targets, 0.5).unwrap();
            assert!(risk <= prev + 1e-12, "risk grew at step {k}: {risk} > {prev}");
            prev = risk;
        }
    }

    #[test]
    fn ridge_shrinkage_monotone_in_tau() {
        let data = separable(5, 30, 12, 4);
        let active = IndexSet::new((0..12).collect(), 12).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [0.1, 1.0, 10.0] {
            let model = RidgeModel::train(&data, &active, tau).unwrap();
            let total: f64 = model.weights.iter().map(|w| crate::numerics::norm2(w)).sum();
            assert!(total < prev);
            prev = total;
        }
    }

    #[test]
    fn c_ridge_is_a_permutation_of_all_features() {
        let data = separable(7, 36, 24, 6);
        let all = IndexSet::new((0..24).collect(), 24).unwrap();
        let model = RidgeModel::train(&data, &all, 1.0).unwrap();
        let sorted = ridge_weight_sort(&model);
        let mut seen = sorted.order.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn group_selection_on_separable_data() {
        let data = separable(11, 80, 30, 5);
        let all = IndexSet::new((0..30).collect(), 30).unwrap();
        let model = RidgeModel::train(&data, &all, 1.0).unwrap();
        let sorted = ridge_weight_sort(&model);
        let config = GroupNerConfig { depth: 3, seed: 1, ..Default::default() };
        let sel = group_ner_select(&data, &sorted, &config).unwrap();
        assert_eq!(sel.k_hat, 1, "one group should explain separable data");
        assert!((sel.validation_accuracy - 1.0).abs() < 1e-12);
        // The informative features all survive pruning.
        for j in 0..5 {
            assert!(sel.selected.contains(j), "feature {j} pruned: {:?}", sel.selected);
        }
        // The mid-grid scale alone already stops after one group.
        let mid = GroupNerConfig { c_grid: vec![10.0], ..config };
        let sel_mid = group_ner_select(&data, &sorted, &mid).unwrap();
        assert_eq!(sel_mid.k_hat, 1);
        assert!((sel_mid.validation_accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn larger_c_never_selects_more_groups() {
        let data = separable(13, 60, 30, 5);
        let all = IndexSet::new((0..30).collect(), 30).unwrap();
        let model = RidgeModel::train(&data, &all, 1.0).unwrap();
        let sorted = ridge_weight_sort(&model);
        let targets = one_hot(data.labels(), 2).unwrap();
        let n = data.sample_count();
        let depth = 3;
        let mut risks = Vec::new();
        let mut sigma2 = Vec::new();
        for k in 1..=depth {
            let active = IndexSet::new(sorted.order[..k * 10].to_vec(), 30).unwrap();
            let (_, risk, s2) = ridge_chain_fit(&data, &active, &targets, 1.0).unwrap();
            risks.push(risk);
            sigma2.push(s2);
        }
        let seers: Vec<f64> = risks.windows(2).map(|w| clamp_seer(w[0] - w[1])).collect();
        let mut prev_k = usize::MAX;
        for c in default_c_grid() {
            let thresholds: Vec<f64> = (2..=depth)
                .map(|k| {
                    let rate = sigma2[k - 1] / n as f64;
                    c * rate * chi2_1_inv_cdf(clamp_probability(1.0 - rate)).unwrap()
                })
                .collect();
            let k = ner_select(&seers, &thresholds).unwrap();
            assert!(k <= prev_k, "c grew but K went {prev_k} -> {k}");
            prev_k = k;
        }
    }

    #[test]
    fn labeled_csv_round_trip() {
        let text = "f1,f2,label\n0.5,1.0,1\n-0.5,2.0,2\n0.25,3.0,1\n";
        let data = LabeledDataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(data.feature_count(), 2);
        assert_eq!(data.labels(), &[1, 2, 1]);
        assert_eq!(data.class_count(), 2);

        let headerless = "0.5,1.0,1\n-0.5,2.0,2\n";
        let d2 = LabeledDataset::from_reader(headerless.as_bytes()).unwrap();
        assert_eq!(d2.labels(), &[1, 2]);

        let bad = "f1,f2\n0.5,1.0\n";
        assert!(LabeledDataset::from_reader(bad.as_bytes()).is_err());

        let fractional = "0.5,1.5\n";
        assert!(LabeledDataset::from_reader(fractional.as_bytes()).is_err());
    }

    #[test]
    fn stratified_split_preserves_classes() {
        let data = separable(17, 50, 8, 3);
        let (train, val) = stratified_split(&data, 0.2, 9).unwrap();
        assert_eq!(train.len() + val.len(), 50);
        let train_data = data.select_samples(&train).unwrap();
        for class in 1..=2 {
            assert!(train_data.labels().contains(&class));
        }
    }
}
