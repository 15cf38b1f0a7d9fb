//! The NER order test and the greedy S-NER model sorting engine.
//!
//! `ner_test` / `ner_select` decide a prepared chain; `sner` grows one:
//! at each step it scans every remaining candidate expansion, assigns
//! the one with the least minimum empirical risk, and accepts it only if
//! the risk drop clears the threshold rule. The first rejection stops
//! the run and the last approved model is returned.
//!
//! The candidate scan keeps an orthonormal basis of the accepted feature
//! rows, so evaluating one candidate costs one orthogonalization instead
//! of a fresh factorization; the resulting risks equal the full ERM fit
//! up to rounding.

use rayon::prelude::*;

use crate::dataset::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::model::{clamp_seer, ChainStep, NestedChain};
use crate::numerics::{chi2_1_inv_cdf, clamp_probability, dot, least_squares, norm2, RANK_TOL};

/// Per-step acceptance threshold gamma_k(n, sigma2_hat).
///
/// The engine hands the rule the residual-based noise estimate of the
/// step's assigned candidate; rules built from a known variance are free
/// to ignore it.
pub trait ThresholdRule: Sync {
    fn threshold(&self, step: usize, sample_count: usize, noise_estimate: f64) -> f64;
}

impl<F> ThresholdRule for F
where
    F: Fn(usize, usize, f64) -> f64 + Sync,
{
    fn threshold(&self, step: usize, sample_count: usize, noise_estimate: f64) -> f64 {
        self(step, sample_count, noise_estimate)
    }
}

/// Constant threshold, e.g. for oracle-aided or noiseless runs.
#[derive(Debug, Clone, Copy)]
pub struct FixedThreshold(pub f64);

impl ThresholdRule for FixedThreshold {
    fn threshold(&self, _step: usize, _n: usize, _noise: f64) -> f64 {
        self.0
    }
}

/// Known-variance chi-square threshold c * (sigma^2 / n) * F1_inv(1 - delta).
#[derive(Debug, Clone, Copy)]
pub struct KnownVarianceRule {
    pub sigma2: f64,
    pub c: f64,
    pub delta: f64,
}

impl ThresholdRule for KnownVarianceRule {
    fn threshold(&self, _step: usize, n: usize, _noise: f64) -> f64 {
        let q = chi2_1_inv_cdf(clamp_probability(1.0 - self.delta))
            .expect("clamped probability is inside [0, 1)");
        self.c * self.sigma2 / n as f64 * q
    }
}

/// Outcome of a selection run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Number of accepted expansions; 0 when the very first test rejects.
    pub k_hat: usize,
    /// Features of the last approved model.
    pub selected: IndexSet,
    /// Chain of approved models, starting at the empty M0 model.
    pub chain: NestedChain,
    /// Test outcomes in step order; all true except possibly the last.
    pub tests: Vec<bool>,
    /// Thresholds gamma_k evaluated per step.
    pub thresholds: Vec<f64>,
    /// Residual-based noise estimates per step (Eq. of the assigned model).
    pub noise_estimates: Vec<f64>,
}

/// The order test: does the risk drop clear the threshold?
pub fn ner_test(delta_r: f64, gamma: f64) -> bool {
    delta_r >= gamma
}

/// NER order selection on a prepared chain. `seers[i]` and
/// `thresholds[i]` belong to test T_{i+2}; T_1 is forced true, so the
/// estimate is max{k : T_k = 1} >= 1.
pub fn ner_select(seers: &[f64], thresholds: &[f64]) -> Result<usize> {
    if seers.len() != thresholds.len() {
        return Err(Error::dims(format!(
            "ner_select: {} SEERs vs {} thresholds",
            seers.len(),
            thresholds.len()
        )));
    }
    let mut k_hat = 1;
    for (i, (&s, &g)) in seers.iter().zip(thresholds).enumerate() {
        if ner_test(s, g) {
            k_hat = i + 2;
        }
    }
    Ok(k_hat)
}

/// Orthonormal expansion state for the incremental candidate scan.
struct ResidualBasis {
    vectors: Vec<Vec<f64>>,
    /// Inner products of each basis vector with the responses.
    response_coords: Vec<f64>,
}

impl ResidualBasis {
    fn new() -> Self {
        ResidualBasis { vectors: Vec::new(), response_coords: Vec::new() }
    }

    /// Orthogonalizes the group's feature rows against the basis (and each
    /// other) and returns the explained-energy gain for the responses plus
    /// the new unit vectors. Directions already inside the span are
    /// dropped, matching the minimum-norm fit's residual.
    fn candidate_gain(&self, data: &Dataset, group: &[usize], y: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let mut new_vectors: Vec<Vec<f64>> = Vec::with_capacity(group.len());
        let mut gain = 0.0;
        for &j in group {
            let row = data.feature_row(j);
            let scale = norm2(row).sqrt();
            let mut v = row.to_vec();
            // Two modified Gram-Schmidt passes keep the basis orthonormal
            // to near machine precision.
            for _ in 0..2 {
                for q in self.vectors.iter().chain(new_vectors.iter()) {
                    let c = dot(q, &v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let vnorm = norm2(&v).sqrt();
            if vnorm <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
                continue;
            }
            for vi in v.iter_mut() {
                *vi /= vnorm;
            }
            let c = dot(&v, y);
            gain += c * c;
            new_vectors.push(v);
        }
        (gain, new_vectors)
    }

    fn extend(&mut self, vectors: Vec<Vec<f64>>, y: &[f64]) {
        for v in vectors {
            self.response_coords.push(dot(&v, y));
            self.vectors.push(v);
        }
    }

    /// Residual of y against the current span plus the given extra vectors.
    fn residual_with(&self, y: &[f64], extra: &[Vec<f64>]) -> Vec<f64> {
        let mut r = y.to_vec();
        for (q, &c) in self.vectors.iter().zip(&self.response_coords) {
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        for q in extra {
            let c = dot(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        r
    }
}

/// Residual-based noise variance: mean-centered squared norm over n - 1.
fn residual_noise_estimate(residual: &[f64]) -> f64 {
    let n = residual.len();
    if n < 2 {
        return 0.0;
    }
    let mean = residual.iter().sum::<f64>() / n as f64;
    residual.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64
}

/// S-NER model sorting over a candidate pool.
///
/// The pool is consumed in groups of `group_size` (its tail group may be
/// smaller). Each step assigns the remaining group whose expansion has
/// the least ERM risk (ties go to the lowest feature index) and accepts
/// it when the SEER clears the rule's threshold; the first rejection
/// ends the run without consuming the pool further.
pub fn sner(
    data: &Dataset,
    pool: &[usize],
    rule: &dyn ThresholdRule,
    k_max: usize,
    group_size: usize,
) -> Result<SelectionResult> {
    if pool.is_empty() {
        return Err(Error::invalid("sner: empty candidate pool"));
    }
    if group_size == 0 {
        return Err(Error::invalid("sner: group_size must be positive"));
    }
    {
        let mut seen = vec![false; data.feature_count()];
        for &j in pool {
            if j >= data.feature_count() {
                return Err(Error::invalid(format!("sner: pool index {} out of range", j + 1)));
            }
            if seen[j] {
                return Err(Error::invalid(format!("sner: duplicate pool index {}", j + 1)));
            }
            seen[j] = true;
        }
    }
    let groups: Vec<&[usize]> = pool.chunks(group_size).collect();
    if k_max == 0 || k_max > groups.len() {
        return Err(Error::invalid(format!(
            "sner: k_max {} outside 1..={} available groups",
            k_max,
            groups.len()
        )));
    }

    let n = data.sample_count();
    let y = data.responses();
    let mut remaining: Vec<usize> = (0..groups.len()).collect();
    let mut basis = ResidualBasis::new();
    let mut accepted = IndexSet::empty();

    let mut steps = vec![ChainStep {
        index_set: IndexSet::empty(),
        min_emp_risk: norm2(y) / n as f64,
        coefficients: Vec::new(),
    }];
    let mut seers = Vec::new();
    let mut tests = Vec::new();
    let mut thresholds = Vec::new();
    let mut noise_estimates = Vec::new();
    let mut k_hat = 0;

    for step in 1..=k_max {
        if remaining.is_empty() {
            break;
        }
        // Deterministic parallel scan: gains land in pool order, then a
        // sequential argmax applies the (gain, lowest-index) tie rule.
        let gains: Vec<(f64, usize)> = remaining
            .par_iter()
            .map(|&gid| {
                let (gain, _) = basis.candidate_gain(data, groups[gid], y);
                let tie = *groups[gid].iter().min().expect("group is non-empty");
                (gain, tie)
            })
            .collect();
        let mut best_pos = 0;
        for (pos, &(gain, tie)) in gains.iter().enumerate() {
            let (bg, bt) = gains[best_pos];
            if gain > bg || (gain == bg && tie < bt) {
                best_pos = pos;
            }
        }
        let assigned_gid = remaining[best_pos];
        let (gain, new_vectors) = basis.candidate_gain(data, groups[assigned_gid], y);
        let delta = clamp_seer(gain / n as f64);

        let assigned_residual = basis.residual_with(y, &new_vectors);
        let sigma2_hat = residual_noise_estimate(&assigned_residual);
        let gamma = rule.threshold(step, n, sigma2_hat);
        let accept = ner_test(delta, gamma);

        tests.push(accept);
        thresholds.push(gamma);
        noise_estimates.push(sigma2_hat);

        if !accept {
            break;
        }

        basis.extend(new_vectors, y);
        for &j in groups[assigned_gid] {
            accepted = accepted.with_appended(j)?;
        }
        remaining.remove(best_pos);
        k_hat = step;
        seers.push(delta);

        let (coefficients, risk) = {
            let rows = data.rows_for(&accepted);
            let fit = least_squares(&rows, y)?;
            (fit.coefficients, fit.residual_norm2 / n as f64)
        };
        steps.push(ChainStep {
            index_set: accepted.clone(),
            min_emp_risk: risk,
            coefficients,
        });
    }

    Ok(SelectionResult {
        k_hat,
        selected: accepted,
        chain: NestedChain { steps, seers },
        tests,
        thresholds,
        noise_estimates,
    })
}
