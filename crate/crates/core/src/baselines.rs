//! Feature-sorting baselines (OMP, LARS) and information-criterion
//! order selection over sorted chains, for head-to-head benchmarks.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::numerics::{dot, least_squares, norm2, residual};

/// Correlation below which a greedy sorter treats the residual as exhausted.
const ZERO_CORR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SortAlgorithm {
    Omp,
    Lars,
    RidgeWeight,
}

/// A feature ordering produced by one of the sorters.
#[derive(Debug, Clone)]
pub struct SortedFeatures {
    /// Distinct 0-based feature indices, strongest first.
    pub order: Vec<usize>,
    pub algorithm: SortAlgorithm,
}

/// Orthogonal matching pursuit: repeatedly pick the feature most
/// correlated with the residual (normalized by the feature norm), refit
/// least squares on the selected set, and deflate. Stops at `k_max`,
/// residual exhaustion, or when no remaining feature correlates.
pub fn omp_sort(data: &Dataset, k_max: usize) -> Result<SortedFeatures> {
    if k_max == 0 {
        return Err(Error::invalid("omp_sort: k_max must be positive"));
    }
    let l = data.feature_count();
    let y = data.responses();
    let norms: Vec<f64> = (0..l).map(|j| norm2(data.feature_row(j)).sqrt()).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut res = y.to_vec();

    while selected.len() < k_max.min(l) {
        if norm2(&res).sqrt() < 1e-12 {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..l {
            if selected.contains(&j) || norms[j] <= 0.0 {
                continue;
            }
            let c = dot(data.feature_row(j), &res).abs() / norms[j];
            match best {
                Some((bc, _)) if bc >= c => {}
                _ => best = Some((c, j)),
            }
        }
        let Some((c, j)) = best else { break };
        if c <= ZERO_CORR_TOL {
            break;
        }
        selected.push(j);
        let rows: Vec<&[f64]> = selected.iter().map(|&j| data.feature_row(j)).collect();
        let fit = least_squares(&rows, y)?;
        res = residual(&rows, y, &fit.coefficients);
    }
    Ok(SortedFeatures { order: selected, algorithm: SortAlgorithm::Omp })
}

/// Least angle regression entry order. Features are normalized to unit
/// norm internally; the returned order is the sequence in which features
/// join the LARS active set. Stops at `k_max`, residual exhaustion, or
/// rank saturation of the active Gram matrix.
pub fn lars_sort(data: &Dataset, k_max: usize) -> Result<SortedFeatures> {
    if k_max == 0 {
        return Err(Error::invalid("lars_sort: k_max must be positive"));
    }
    let l = data.feature_count();
    let n = data.sample_count();
    let y = data.responses();

    // Unit-norm copies; zero-norm features can never enter.
    let mut cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(l);
    for j in 0..l {
        let row = data.feature_row(j);
        let nrm = norm2(row).sqrt();
        if nrm <= 0.0 {
            cols.push(None);
        } else {
            cols.push(Some(row.iter().map(|&v| v / nrm).collect()));
        }
    }

    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut mu = vec![0.0; n];

    'outer: while active.len() < k_max.min(l) {
        let r: Vec<f64> = y.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let mut corr: Vec<f64> = vec![0.0; l];
        for (j, col) in cols.iter().enumerate() {
            if let Some(c) = col {
                corr[j] = dot(c, &r);
            }
        }
        // Next entrant: largest absolute correlation among inactive.
        let mut entrant: Option<(f64, usize)> = None;
        for j in 0..l {
            if cols[j].is_none() || active.contains(&j) {
                continue;
            }
            let a = corr[j].abs();
            match entrant {
                Some((bc, _)) if bc >= a => {}
                _ => entrant = Some((a, j)),
            }
        }
        let Some((cmax_new, jnew)) = entrant else { break };
        if cmax_new <= ZERO_CORR_TOL {
            break;
        }
        active.push(jnew);
        signs.push(if corr[jnew] >= 0.0 { 1.0 } else { -1.0 });
        let a_len = active.len();

        // Equiangular direction: G w0 = 1 over the sign-adjusted active set.
        let mut g = vec![0.0; a_len * a_len];
        for (p, &jp) in active.iter().enumerate() {
            for (q, &jq) in active.iter().enumerate() {
                g[p * a_len + q] = signs[p]
                    * signs[q]
                    * dot(cols[jp].as_ref().unwrap(), cols[jq].as_ref().unwrap());
            }
        }
        let mut w0 = vec![1.0; a_len];
        if solve_spd(&mut g, a_len, &mut w0).is_err() {
            // Rank saturation: the entrant is collinear with the active set.
            active.pop();
            signs.pop();
            break 'outer;
        }
        let sum_w0: f64 = w0.iter().sum();
        if sum_w0 <= 0.0 {
            active.pop();
            signs.pop();
            break;
        }
        let a_norm = 1.0 / sum_w0.sqrt();
        let w: Vec<f64> = w0.iter().map(|v| v * a_norm).collect();
        let mut u = vec![0.0; n];
        for (p, &jp) in active.iter().enumerate() {
            let col = cols[jp].as_ref().unwrap();
            for i in 0..n {
                u[i] += signs[p] * w[p] * col[i];
            }
        }

        let cmax = active
            .iter()
            .map(|&j| corr[j].abs())
            .fold(f64::NEG_INFINITY, f64::max);
        // Step length: smallest positive crossing among inactive features,
        // or the full least-squares step when none remain.
        let mut gamma = cmax / a_norm;
        for j in 0..l {
            if cols[j].is_none() || active.contains(&j) {
                continue;
            }
            let aj = dot(cols[j].as_ref().unwrap(), &u);
            for cand in [(cmax - corr[j]) / (a_norm - aj), (cmax + corr[j]) / (a_norm + aj)] {
                if cand > 1e-14 && cand < gamma {
                    gamma = cand;
                }
            }
        }
        for i in 0..n {
            mu[i] += gamma * u[i];
        }
    }
    Ok(SortedFeatures { order: active, algorithm: SortAlgorithm::Lars })
}

/// Gaussian elimination with partial pivoting for the small symmetric
/// systems inside the LARS step; fails on numerically singular input.
fn solve_spd(g: &mut [f64], m: usize, b: &mut [f64]) -> Result<()> {
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if g[r * m + col].abs() > g[piv * m + col].abs() {
                piv = r;
            }
        }
        if g[piv * m + col].abs() < 1e-12 {
            return Err(Error::invalid("singular system"));
        }
        if piv != col {
            for c in 0..m {
                g.swap(col * m + c, piv * m + c);
            }
            b.swap(col, piv);
        }
        for r in col + 1..m {
            let f = g[r * m + col] / g[col * m + col];
            for c in col..m {
                g[r * m + c] -= f * g[col * m + c];
            }
            b[r] -= f * b[col];
        }
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for j in i + 1..m {
            s -= g[i * m + j] * b[j];
        }
        b[i] = s / g[i * m + i];
    }
    Ok(())
}

/// Selection aided by the true support cardinality: the first `true_k`
/// sorted features. `shortfall` is set when the sorter could not rank
/// that many features.
#[derive(Debug, Clone)]
pub struct AidedSelection {
    pub indices: IndexSet,
    pub shortfall: bool,
}

pub fn aided_select(sorted: &SortedFeatures, true_k: usize) -> AidedSelection {
    let take = true_k.min(sorted.order.len());
    AidedSelection {
        indices: sorted.order[..take].iter().copied().collect(),
        shortfall: true_k > sorted.order.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfoCriterion {
    Aic,
    Bic,
}

impl InfoCriterion {
    fn penalty(self, k: usize, n: usize) -> f64 {
        match self {
            InfoCriterion::Aic => 2.0 * k as f64,
            InfoCriterion::Bic => k as f64 * (n as f64).ln(),
        }
    }
}

/// Gaussian information-criterion selection along the prefix chain of a
/// sorted order, including the empty model; ties go to the smaller
/// prefix. AIC = n ln(RSS/n) + 2k, BIC = n ln(RSS/n) + k ln n.
pub fn ic_select(
    data: &Dataset,
    sorted: &SortedFeatures,
    criterion: InfoCriterion,
) -> Result<IndexSet> {
    if sorted.order.is_empty() {
        return Err(Error::invalid("ic_select: empty sorted order"));
    }
    let n = data.sample_count();
    let y = data.responses();
    let score = |rss: f64, k: usize| {
        n as f64 * (rss / n as f64).max(1e-300).ln() + criterion.penalty(k, n)
    };
    let mut best_k = 0;
    let mut best_score = score(norm2(y), 0);
    for k in 1..=sorted.order.len() {
        let rows: Vec<&[f64]> = sorted.order[..k].iter().map(|&j| data.feature_row(j)).collect();
        let fit = least_squares(&rows, y)?;
        let s = score(fit.residual_norm2, k);
        if s < best_score {
            best_score = s;
            best_k = k;
        }
    }
    Ok(sorted.order[..best_k].iter().copied().collect())
}
