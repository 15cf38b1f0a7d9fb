//! Empirical risk, SEER, and the nesting process.
//!
//! Models are index sets over a shared feature pool; the empty set is
//! the no-prediction model M0 with empirical risk ||y||^2 / n. The SEER
//! between two nested sets is the drop in minimum empirical risk, which
//! for least squares equals the projection form ||(P_k - P_{k-1}) y||^2 / n.

use crate::dataset::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::numerics::{least_squares, norm2};

/// Floating-point slack under which a slightly negative SEER is treated
/// as zero.
pub const SEER_TOL: f64 = 1e-12;

pub(crate) fn clamp_seer(delta: f64) -> f64 {
    if delta < 0.0 && delta > -SEER_TOL {
        0.0
    } else {
        delta
    }
}

/// One fitted model along a nested chain.
#[derive(Debug, Clone)]
pub struct ChainStep {
    pub index_set: IndexSet,
    pub min_emp_risk: f64,
    pub coefficients: Vec<f64>,
}

/// A sequentially nested model family with its fits and SEER sequence.
#[derive(Debug, Clone)]
pub struct NestedChain {
    pub steps: Vec<ChainStep>,
    /// seers[i] = min_emp_risk[i] - min_emp_risk[i+1]; one entry per
    /// consecutive pair of steps.
    pub seers: Vec<f64>,
}

impl NestedChain {
    /// Checks the nesting and monotonicity invariants.
    pub fn validate(&self) -> Result<()> {
        for w in self.steps.windows(2) {
            if !w[0].index_set.is_subset_of(&w[1].index_set) {
                return Err(Error::invalid("chain steps are not nested"));
            }
            if w[1].min_emp_risk > w[0].min_emp_risk + SEER_TOL {
                return Err(Error::invalid("chain risks are not non-increasing"));
            }
        }
        if self.seers.len() + 1 != self.steps.len().max(1) {
            return Err(Error::invalid("SEER sequence length mismatch"));
        }
        Ok(())
    }
}

/// Mean squared error of the given parameters on the active features;
/// the empty active set is the no-prediction model with risk ||y||^2 / n.
pub fn empirical_risk(data: &Dataset, active: &IndexSet, theta: &[f64]) -> Result<f64> {
    if theta.len() != active.len() {
        return Err(Error::dims(format!(
            "theta has {} entries for {} active features",
            theta.len(),
            active.len()
        )));
    }
    let y = data.responses();
    let n = data.sample_count() as f64;
    if active.is_empty() {
        return Ok(norm2(y) / n);
    }
    let rows = data.rows_for(active);
    let mut rss = 0.0;
    for i in 0..data.sample_count() {
        let pred: f64 = rows.iter().zip(theta).map(|(row, &t)| row[i] * t).sum();
        let e = y[i] - pred;
        rss += e * e;
    }
    Ok(rss / n)
}

/// Empirical risk minimizer over an active set: least-squares
/// coefficients and the minimum empirical risk ||(I - P) y||^2 / n.
pub fn erm(data: &Dataset, active: &IndexSet) -> Result<(Vec<f64>, f64)> {
    let n = data.sample_count() as f64;
    if active.is_empty() {
        return Ok((Vec::new(), norm2(data.responses()) / n));
    }
    if active.len() > data.sample_count() {
        log::warn!(
            "ERM with {} active features exceeds the {} samples; fit is rank deficient",
            active.len(),
            data.sample_count()
        );
    }
    let rows = data.rows_for(active);
    let fit = least_squares(&rows, data.responses())?;
    Ok((fit.coefficients, fit.residual_norm2 / n))
}

/// SEER between two nested index sets: risk(smaller) - risk(larger).
pub fn seer(data: &Dataset, smaller: &IndexSet, larger: &IndexSet) -> Result<f64> {
    if !smaller.is_subset_of(larger) {
        return Err(Error::invalid("seer: the first set must be nested in the second"));
    }
    let (_, risk_small) = erm(data, smaller)?;
    let (_, risk_large) = erm(data, larger)?;
    Ok(clamp_seer(risk_small - risk_large))
}

/// Nesting process: cumulative unions turn any model list into a
/// sequentially nested family.
pub fn nest(model_sets: &[IndexSet]) -> Result<Vec<IndexSet>> {
    if model_sets.is_empty() {
        return Err(Error::invalid("nest: empty model list"));
    }
    let mut out = Vec::with_capacity(model_sets.len());
    let mut acc = model_sets[0].clone();
    out.push(acc.clone());
    for set in &model_sets[1..] {
        acc = acc.union(set);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Builds a nested chain whose step k activates the first k * group_size
/// entries of `order` (0-based indices), fitting each step by ERM.
pub fn chain_from_order(
    data: &Dataset,
    order: &[usize],
    depth: usize,
    group_size: usize,
) -> Result<NestedChain> {
    if depth == 0 || group_size == 0 {
        return Err(Error::invalid("chain_from_order: depth and group_size must be positive"));
    }
    if depth * group_size > order.len() {
        return Err(Error::invalid(format!(
            "chain_from_order: depth {depth} x group {group_size} exceeds the {} ordered indices",
            order.len()
        )));
    }
    let mut steps = Vec::with_capacity(depth);
    let mut seers = Vec::with_capacity(depth.saturating_sub(1));
    let mut prev_risk = None;
    for k in 1..=depth {
        let active = IndexSet::new(order[..k * group_size].to_vec(), data.feature_count())?;
        let (coefficients, risk) = erm(data, &active)?;
        if let Some(p) = prev_risk {
            seers.push(clamp_seer(p - risk));
        }
        prev_risk = Some(risk);
        steps.push(ChainStep { index_set: active, min_emp_risk: risk, coefficients });
    }
    let chain = NestedChain { steps, seers };
    chain.validate()?;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, project_onto_rows};

    fn axis_data() -> Dataset {
        Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![3.0, 4.0]).unwrap()
    }

    #[test]
    fn empty_model_risk() {
        let d = axis_data();
        let r = empirical_risk(&d, &IndexSet::empty(), &[]).unwrap();
        assert!((r - 12.5).abs() < 1e-12);
    }

    #[test]
    fn direct_summation_example() {
        let d = Dataset::new(vec![vec![1.0, 1.0]], vec![2.0, 0.0]).unwrap();
        let active = IndexSet::new(vec![0], 1).unwrap();
        let r = empirical_risk(&d, &active, &[1.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(empirical_risk(&d, &active, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn erm_examples() {
        let d = axis_data();
        let all = IndexSet::new(vec![0, 1], 2).unwrap();
        let (_, r_full) = erm(&d, &all).unwrap();
        assert!(r_full.abs() < 1e-12);

        let first = IndexSet::new(vec![0], 2).unwrap();
        let (theta, r1) = erm(&d, &first).unwrap();
        assert!((r1 - 8.0).abs() < 1e-12);
        assert!((theta[0] - 3.0).abs() < 1e-12);

        let (_, r0) = erm(&d, &IndexSet::empty()).unwrap();
        assert!((r0 - 12.5).abs() < 1e-12);
    }

    #[test]
    fn seer_examples_and_telescoping() {
        let d = axis_data();
        let empty = IndexSet::empty();
        let first = IndexSet::new(vec![0], 2).unwrap();
        let both = IndexSet::new(vec![0, 1], 2).unwrap();
        let s01 = seer(&d, &empty, &first).unwrap();
        assert!((s01 - 4.5).abs() < 1e-12);
        let s12 = seer(&d, &first, &both).unwrap();
        let s02 = seer(&d, &empty, &both).unwrap();
        assert!((s01 + s12 - s02).abs() < 1e-10);
        assert!(seer(&d, &both, &first).is_err());
    }

    #[test]
    fn seer_zero_for_orthogonal_irrelevant_feature() {
        // Feature 2 is orthogonal to the residual of the fit on feature 1.
        let d = Dataset::new(
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![2.0, 3.0, 0.0],
        )
        .unwrap();
        let a = IndexSet::new(vec![0], 3).unwrap();
        let b = IndexSet::new(vec![0, 2], 3).unwrap();
        let s = seer(&d, &a, &b).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn seer_matches_projection_form() {
        // Correlated fixed design; SEER by risk difference must equal
        // ||(P_k - P_{k-1}) y||^2 / n computed from two projections.
        let d = Dataset::new(
            vec![
                vec![0.9, 1.1, -0.3, 0.5, -1.2, 0.7],
                vec![0.8, 0.9, 0.1, 0.6, -1.0, 0.5],
                vec![0.1, -0.2, 1.0, 0.4, 0.3, -0.5],
            ],
            vec![1.0, 1.4, 0.6, 0.9, -1.1, 0.3],
        )
        .unwrap();
        let small = IndexSet::new(vec![0], 3).unwrap();
        let large = IndexSet::new(vec![0, 2], 3).unwrap();
        let by_risk = seer(&d, &small, &large).unwrap();

        let p_small = project_onto_rows(&d.rows_for(&small), d.responses()).unwrap();
        let p_large = project_onto_rows(&d.rows_for(&large), d.responses()).unwrap();
        let diff: Vec<f64> = p_large.iter().zip(&p_small).map(|(a, b)| a - b).collect();
        let by_projection = dot(&diff, &diff) / d.sample_count() as f64;
        assert!(
            (by_risk - by_projection).abs() <= 1e-9 * by_projection.max(1e-30),
            "{by_risk} vs {by_projection}"
        );
    }

    #[test]
    fn nest_builds_cumulative_unions() {
        let sets = [
            IndexSet::new(vec![1], 8).unwrap(),
            IndexSet::new(vec![4], 8).unwrap(),
            IndexSet::new(vec![1, 6], 8).unwrap(),
        ];
        let chain = nest(&sets).unwrap();
        assert_eq!(chain[0].indices(), &[1]);
        assert_eq!(chain[1].indices(), &[1, 4]);
        assert_eq!(chain[2].indices(), &[1, 4, 6]);
        for w in chain.windows(2) {
            assert!(w[0].is_subset_of(&w[1]));
        }

        let same = [sets[0].clone(), sets[0].clone(), sets[0].clone()];
        let degenerate = nest(&same).unwrap();
        assert!(degenerate.iter().all(|s| s.same_set(&sets[0])));

        let single = nest(&sets[..1]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(nest(&[]).is_err());
    }

    #[test]
    fn chain_from_order_fits_each_prefix() {
        let d = Dataset::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![3.0, -2.0, 1.0],
        )
        .unwrap();
        let chain = chain_from_order(&d, &[2, 0, 1], 3, 1).unwrap();
        assert_eq!(chain.steps[0].index_set.indices(), &[2]);
        assert_eq!(chain.steps[1].index_set.indices(), &[2, 0]);
        assert_eq!(chain.steps[2].index_set.indices(), &[2, 0, 1]);
        assert!(chain.steps[2].min_emp_risk.abs() < 1e-12);
        for w in chain.steps.windows(2) {
            assert!(w[1].min_emp_risk <= w[0].min_emp_risk + SEER_TOL);
        }
        assert!(chain_from_order(&d, &[0, 1], 3, 1).is_err());
    }
}
