//! Linear-regression specialization of S-NER: chi-square SEER
//! thresholds, residual noise estimation, response normalization,
//! cross-validated threshold scaling, and weight pruning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::numerics::{chi2_1_inv_cdf, clamp_probability, least_squares};
use crate::selection::{sner, SelectionResult, ThresholdRule};

/// Default cross-validation grid for the threshold scale c'.
pub const DEFAULT_CPRIME_GRID: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Tuning knobs of the regression pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionConfig {
    /// Threshold scale c'; usually cross-validated.
    pub c_prime: f64,
    /// Maximum number of accepted expansions.
    pub k_max: usize,
    /// Selected coefficients below this fraction of the largest selected
    /// coefficient (in absolute value) are pruned; 0 disables pruning.
    pub prune_fraction: f64,
    /// Folds for `cross_validate_cprime`.
    pub cv_folds: usize,
    /// Divide responses by their sample standard deviation first.
    pub normalize: bool,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            c_prime: 1.0,
            k_max: 20,
            prune_fraction: 0.1,
            cv_folds: 5,
            normalize: true,
        }
    }
}

impl RegressionConfig {
    fn validate(&self) -> Result<()> {
        if self.c_prime <= 0.0 {
            return Err(Error::invalid("c_prime must be positive"));
        }
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.prune_fraction) {
            return Err(Error::invalid("prune_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Residual-based noise variance estimate.
#[derive(Debug, Clone, Copy)]
pub struct NoiseEstimate {
    pub sigma2_hat: f64,
}

/// Divide responses by their sample standard deviation (n - 1
/// denominator); returns the rescaled dataset and sigma_y.
pub fn normalize_response(data: &Dataset) -> Result<(Dataset, f64)> {
    let n = data.sample_count();
    if n < 2 {
        return Err(Error::invalid("normalize_response needs at least two samples"));
    }
    let y = data.responses();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::data("normalize_response: responses are constant"));
    }
    let sigma_y = var.sqrt();
    let scaled = y.iter().map(|v| v / sigma_y).collect();
    Ok((data.with_responses(scaled)?, sigma_y))
}

/// Noise variance from the ERM residual of a candidate model:
/// sigma2_hat = ||r - mean(r)||^2 / (n - 1).
pub fn noise_variance(data: &Dataset, candidate: &IndexSet) -> Result<NoiseEstimate> {
    let n = data.sample_count();
    if n < 2 {
        return Err(Error::invalid("noise_variance needs at least two samples"));
    }
    let residual = if candidate.is_empty() {
        data.responses().to_vec()
    } else {
        let rows = data.rows_for(candidate);
        let fit = least_squares(&rows, data.responses())?;
        crate::numerics::residual(&rows, data.responses(), &fit.coefficients)
    };
    let mean = residual.iter().sum::<f64>() / n as f64;
    let sigma2_hat =
        residual.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(NoiseEstimate { sigma2_hat })
}

/// The step-k regression threshold
/// c' * k * (sigma2 / n) * F1_inv(1 - k * sigma2 / n),
/// with the quantile argument clamped away from {0, 1}.
pub fn regression_threshold(k: usize, n: usize, sigma2_hat: f64, c_prime: f64) -> f64 {
    assert!(k >= 1 && n >= 1, "step and sample count must be positive");
    assert!(sigma2_hat >= 0.0, "noise estimate must be non-negative");
    assert!(c_prime > 0.0, "c_prime must be positive");
    let rate = sigma2_hat / n as f64;
    let arg = clamp_probability(1.0 - k as f64 * rate);
    let q = chi2_1_inv_cdf(arg).expect("clamped probability is inside [0, 1)");
    c_prime * k as f64 * rate * q
}

/// Threshold rule wiring `regression_threshold` into the S-NER engine.
#[derive(Debug, Clone, Copy)]
pub struct RegressionRule {
    pub c_prime: f64,
}

impl ThresholdRule for RegressionRule {
    fn threshold(&self, step: usize, sample_count: usize, noise_estimate: f64) -> f64 {
        regression_threshold(step, sample_count, noise_estimate, self.c_prime)
    }
}

/// Output of the regression pipeline: the raw engine result plus the
/// pruned support refit on the original (unnormalized) responses.
#[derive(Debug, Clone)]
pub struct RegressionSelection {
    pub result: SelectionResult,
    /// Support after weight pruning, in selection order.
    pub support: IndexSet,
    /// Coefficients of the pruned support refit on the input scale.
    pub coefficients: Vec<f64>,
    /// Response standard deviation used for normalization (1 when off).
    pub sigma_y: f64,
    pub c_prime: f64,
}

/// Full S-NER regression pipeline: normalize, sort and test with the
/// chi-square threshold, then prune small weights.
pub fn sner_regression(data: &Dataset, config: &RegressionConfig) -> Result<RegressionSelection> {
    config.validate()?;
    let (work, sigma_y) = if config.normalize {
        normalize_response(data)?
    } else {
        (data.clone(), 1.0)
    };
    let pool: Vec<usize> = (0..data.feature_count()).collect();
    let k_max = config.k_max.min(pool.len());
    let rule = RegressionRule { c_prime: config.c_prime };
    let result = sner(&work, &pool, &rule, k_max, 1)?;

    // Prune on the selected fit of the normalized data, which makes the
    // relative rule scale invariant.
    let selected_coeffs = &result.chain.steps[result.k_hat].coefficients;
    let support: IndexSet = if result.selected.is_empty() || config.prune_fraction == 0.0 {
        result.selected.clone()
    } else {
        let max_abs = selected_coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let cut = config.prune_fraction * max_abs;
        result
            .selected
            .indices()
            .iter()
            .zip(selected_coeffs)
            .filter(|(_, c)| c.abs() >= cut)
            .map(|(&j, _)| j)
            .collect()
    };

    let coefficients = if support.is_empty() {
        Vec::new()
    } else {
        let rows = data.rows_for(&support);
        least_squares(&rows, data.responses())?.coefficients
    };

    Ok(RegressionSelection {
        result,
        support,
        coefficients,
        sigma_y,
        c_prime: config.c_prime,
    })
}

/// Mean squared prediction error of a fitted support on a dataset.
fn prediction_mse(data: &Dataset, support: &IndexSet, coefficients: &[f64]) -> f64 {
    let n = data.sample_count();
    let rows = data.rows_for(support);
    let mut total = 0.0;
    for i in 0..n {
        let pred: f64 = rows.iter().zip(coefficients).map(|(row, &c)| row[i] * c).sum();
        let e = data.responses()[i] - pred;
        total += e * e;
    }
    total / n as f64
}

/// Picks the c' grid value whose selections generalize best under
/// round-robin k-fold cross-validation; ties go to the smaller c'.
pub fn cross_validate_cprime(
    data: &Dataset,
    grid: &[f64],
    config: &RegressionConfig,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("cross_validate_cprime: empty grid"));
    }
    if config.cv_folds < 2 {
        return Err(Error::invalid("cross_validate_cprime: need at least 2 folds"));
    }
    let n = data.sample_count();
    if n < config.cv_folds {
        return Err(Error::invalid(format!(
            "cross_validate_cprime: {n} samples cannot fill {} folds",
            config.cv_folds
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let folds = config.cv_folds;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
            let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
            (train, test)
        })
        .collect();

    let scores: Vec<Result<Option<f64>>> = grid
        .par_iter()
        .map(|&c| {
            let mut total = 0.0;
            let mut used = 0;
            for (train_idx, test_idx) in &splits {
                let train = data.select_samples(train_idx)?;
                let test = data.select_samples(test_idx)?;
                let fold_config = RegressionConfig { c_prime: c, ..config.clone() };
                let sel = match sner_regression(&train, &fold_config) {
                    Ok(sel) => sel,
                    Err(Error::Data(msg)) => {
                        log::warn!("skipping degenerate CV fold: {msg}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                total += prediction_mse(&test, &sel.support, &sel.coefficients);
                used += 1;
            }
            Ok(if used == 0 { None } else { Some(total / used as f64) })
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for (&c, score) in grid.iter().zip(scores) {
        if let Some(err) = score? {
            best = match best {
                Some((be, bc)) if (be, bc) <= (err, c) => Some((be, bc)),
                _ => Some((err, c)),
            };
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::data("cross_validate_cprime: every fold was degenerate"))
}

/// JSON export of a selection run (indices are 1-based).
#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionExport {
    pub k_hat: usize,
    pub selected_indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub seers: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub noise_estimates: Vec<f64>,
    pub tests: Vec<bool>,
    pub c_prime: f64,
    pub seed: u64,
}

impl SelectionExport {
    pub fn from_selection(sel: &RegressionSelection, seed: u64) -> Self {
        SelectionExport {
            k_hat: sel.result.k_hat,
            selected_indices: sel.support.to_one_based(),
            coefficients: sel.coefficients.clone(),
            seers: sel.result.chain.seers.clone(),
            thresholds: sel.result.thresholds.clone(),
            noise_estimates: sel.result.noise_estimates.clone(),
            tests: sel.result.tests.clone(),
            c_prime: sel.c_prime,
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("export serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn normalize_matches_hand_formula() {
        let d = Dataset::new(vec![vec![1.0, 1.0]], vec![0.0, 2.0]).unwrap();
        let (nd, sigma_y) = normalize_response(&d).unwrap();
        assert!((sigma_y - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((nd.responses()[0] - 0.0).abs() < 1e-12);
        assert!((nd.responses()[1] - 2.0f64.sqrt()).abs() < 1e-12);
        // Unit-std output, and renormalizing changes nothing.
        let (nd2, s2) = normalize_response(&nd).unwrap();
        assert!((s2 - 1.0).abs() < 1e-12);
        for (a, b) in nd.responses().iter().zip(nd2.responses()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_is_scale_invariant() {
        let d = Dataset::new(vec![vec![1.0, 1.0, 1.0]], vec![0.5, 2.0, -1.0]).unwrap();
        let scaled = d.with_responses(d.responses().iter().map(|y| 7.0 * y).collect()).unwrap();
        let (a, _) = normalize_response(&d).unwrap();
        let (b, _) = normalize_response(&scaled).unwrap();
        for (x, y) in a.responses().iter().zip(b.responses()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_constant_responses() {
        let d = Dataset::new(vec![vec![1.0, 1.0]], vec![3.0, 3.0]).unwrap();
        assert!(normalize_response(&d).is_err());
    }

    #[test]
    fn noise_variance_examples() {
        // Perfect fit.
        let d = Dataset::new(vec![vec![1.0, 2.0]], vec![2.0, 4.0]).unwrap();
        let est = noise_variance(&d, &IndexSet::new(vec![0], 1).unwrap()).unwrap();
        assert!(est.sigma2_hat.abs() < 1e-20);

        // Empty candidate: sample variance of y.
        let d = Dataset::new(vec![vec![1.0, 1.0, 1.0]], vec![1.0, 2.0, 3.0]).unwrap();
        let est = noise_variance(&d, &IndexSet::empty()).unwrap();
        assert!((est.sigma2_hat - 1.0).abs() < 1e-12);

        // Hand-computed residual case.
        let d = Dataset::new(vec![vec![1.0, 0.0]], vec![3.0, 4.0]).unwrap();
        let est = noise_variance(&d, &IndexSet::new(vec![0], 1).unwrap()).unwrap();
        assert!((est.sigma2_hat - 8.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_reference_value() {
        let g = regression_threshold(1, 100, 1.0, 1.0);
        assert!((g - 0.066348966010212).abs() < 1e-5, "{g}");
        assert_eq!(regression_threshold(1, 100, 0.0, 1.0), 0.0);
        // Larger samples shrink the threshold in the operating regime.
        let g2 = regression_threshold(1, 200, 1.0, 1.0);
        assert!(g2 < g);
        let g4 = regression_threshold(1, 400, 1.0, 1.0);
        assert!(g4 < g / 2.0, "o(1/n) decay: quadrupling n gave {g4} vs {g}");
    }

    #[test]
    fn threshold_survives_degenerate_arguments() {
        // k * sigma2 / n > 1 pushes the quantile argument below zero;
        // clamping keeps the threshold finite and tiny.
        let g = regression_threshold(5, 3, 2.0, 1.0);
        assert!(g.is_finite() && g >= 0.0);
        assert!(g < 1e-20);
    }

    fn synthetic(seed: u64, n: usize, l: usize, support: &[usize], snr: f64) -> Dataset {
        let mut rng = CounterRng::new(seed);
        let rows: Vec<Vec<f64>> =
            (0..l).map(|_| (0..n).map(|_| rng.next_normal()).collect()).collect();
        let mut signal = vec![0.0; n];
        for &j in support {
            for (s, x) in signal.iter_mut().zip(&rows[j]) {
                *s += x;
            }
        }
        let p_signal = crate::numerics::norm2(&signal) / n as f64;
        let sigma = (p_signal / snr).sqrt();
        let y: Vec<f64> =
            signal.iter().map(|s| s + sigma * rng.next_normal()).collect();
        Dataset::new(rows, y).unwrap()
    }

    #[test]
    fn pipeline_recovers_strong_support() {
        let support = [2, 7, 11];
        let d = synthetic(3, 120, 16, &support, 50.0);
        let sel = sner_regression(&d, &RegressionConfig::default()).unwrap();
        let want: IndexSet = support.iter().copied().collect();
        assert!(
            sel.support.same_set(&want),
            "selected {:?}",
            sel.support.to_one_based()
        );
    }

    #[test]
    fn pruning_zero_fraction_is_noop() {
        let d = synthetic(4, 60, 8, &[1, 5], 40.0);
        let mut config = RegressionConfig { prune_fraction: 0.0, ..Default::default() };
        let a = sner_regression(&d, &config).unwrap();
        assert_eq!(a.support.indices(), a.result.selected.indices());
        config.prune_fraction = 0.1;
        let b = sner_regression(&d, &config).unwrap();
        assert!(b.support.len() <= a.support.len());
    }

    #[test]
    fn pipeline_scale_invariance() {
        let d = synthetic(9, 80, 10, &[0, 4], 30.0);
        let scaled =
            d.with_responses(d.responses().iter().map(|y| 4.0 * y).collect()).unwrap();
        let config = RegressionConfig::default();
        let a = sner_regression(&d, &config).unwrap();
        let b = sner_regression(&scaled, &config).unwrap();
        // Scaling by a power of two is exact in floating point, so the
        // whole decision sequence matches bitwise.
        assert_eq!(a.result.tests, b.result.tests);
        assert_eq!(a.support.indices(), b.support.indices());
        for (x, y) in a.result.chain.seers.iter().zip(&b.result.chain.seers) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn cv_single_grid_value_short_circuits() {
        let d = synthetic(5, 40, 6, &[1], 25.0);
        let c = cross_validate_cprime(&d, &[0.7], &RegressionConfig::default()).unwrap();
        assert_eq!(c, 0.7);
    }

    #[test]
    fn cv_strong_signal_breaks_ties_small() {
        let d = synthetic(6, 90, 8, &[2, 6], 100.0);
        let config = RegressionConfig { cv_folds: 3, ..Default::default() };
        let c = cross_validate_cprime(&d, &[0.5, 1.0, 2.0], &config).unwrap();
        // All three recover the same support, so the tie goes down.
        assert_eq!(c, 0.5);
    }

    #[test]
    fn cv_rejects_bad_setup() {
        let d = synthetic(7, 12, 4, &[0], 10.0);
        let config = RegressionConfig { cv_folds: 20, ..Default::default() };
        assert!(cross_validate_cprime(&d, &[1.0, 2.0], &config).is_err());
        assert!(cross_validate_cprime(&d, &[], &RegressionConfig::default()).is_err());
    }

    #[test]
    fn export_uses_one_based_indices() {
        let d = synthetic(8, 60, 6, &[3], 60.0);
        let sel = sner_regression(&d, &RegressionConfig::default()).unwrap();
        let export = SelectionExport::from_selection(&sel, 99);
        assert!(export.selected_indices.contains(&4));
        assert_eq!(export.seed, 99);
        let text = export.to_json();
        let back: SelectionExport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.selected_indices, export.selected_indices);
    }
}
