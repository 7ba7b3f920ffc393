//! Executable versions of the mechanism properties.
//!
//! Every check enumerates a finite family of deviations and compares exact
//! utilities. A clean run falsifies nothing; it does not prove the property.

mod axioms;
pub mod decomposition;
mod deviation;
mod search;
mod suite;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::market::{tree_from_profile, BuyerId, ReportProfile, ReportedType, ValuationVector};
use crate::mechanisms::{Mechanism, MechanismError};
use crate::money::Money;
use crate::removed::min_valid_mu;

pub use axioms::{
    check_non_wasteful, check_order_independence, check_removed_set_stability, compare_vs_vcg,
    Comparison, StabilityCause, StabilityViolation,
};
pub use decomposition::{check_decomposition_inequalities, payment_decomposition, DecompositionRow};
pub use deviation::{
    check_child_monotonicity, check_child_monotonicity_with, check_invitation_ic, check_ir,
    check_value_ic, ChildSubsets,
};
pub use search::{search_counterexample, Counterexample, SearchMode, SearchSummary};
pub use suite::{run_properties, MechanismSpec, Property, PropertyResult, Status};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("search budget exceeded for buyer {buyer}: {needed} cases, limit {limit}")]
    SearchBudgetExceeded {
        buyer: BuyerId,
        needed: u64,
        limit: u64,
    },
    #[error("outcome carries no layer trace")]
    TraceMissing,
    #[error("payment decomposition failed for buyer {buyer}: {detail}")]
    DecompositionMismatch { buyer: BuyerId, detail: String },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationKind {
    /// Truthful values with some invitation subset gave negative utility.
    /// `deviating_utility` is the zero outside option.
    Participation,
    /// Truthful values, fewer invitations, strictly better.
    Invitation,
    /// Misreported values against truthful values at the same invitations.
    Value,
    /// Misreported values and invitations against the fully truthful report.
    Combined,
    /// A same-layer peer's pruned child set helps `buyer` less than the full
    /// one. `truthful_report` is the peer's pruned report, `deviating_report`
    /// the full one.
    ChildMonotonicity,
}

/// A strict violation found by one of the checks, with everything needed to
/// replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationReport {
    pub kind: DeviationKind,
    pub mechanism: String,
    pub buyer: BuyerId,
    /// The buyer whose report was changed; differs from `buyer` only for
    /// child-monotonicity findings.
    pub deviator: BuyerId,
    pub truthful_report: ReportedType,
    pub deviating_report: ReportedType,
    pub truthful_utility: Money,
    pub deviating_utility: Money,
    pub instance: ReportProfile,
}

/// Limits on the enumeration size per buyer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyBudget {
    /// Largest invitation set whose subsets are enumerated.
    pub max_invitations: usize,
    /// Largest misreport grid.
    pub max_grid: u64,
}

impl Default for VerifyBudget {
    fn default() -> Self {
        VerifyBudget {
            max_invitations: 6,
            max_grid: 20_000,
        }
    }
}

/// Candidate value misreports: every non-increasing vector of length `K`
/// over `{0, step, 2·step, ..., max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MisreportGrid {
    pub step: i64,
    pub max: Option<Money>,
    /// Added to the instance's largest value when `max` is not set.
    pub headroom: i64,
}

impl Default for MisreportGrid {
    fn default() -> Self {
        MisreportGrid {
            step: 1,
            max: None,
            headroom: 2,
        }
    }
}

impl MisreportGrid {
    fn top(&self, profile: &ReportProfile) -> i64 {
        self.max
            .unwrap_or_else(|| profile.max_value() + Money(self.headroom))
            .units()
    }

    /// Number of vectors the grid yields for this profile.
    pub fn size(&self, profile: &ReportProfile) -> u64 {
        let levels = (self.top(profile) / self.step.max(1) + 1) as u64;
        // Multisets of size K from `levels` values.
        binomial(levels + profile.k as u64 - 1, profile.k as u64)
    }

    pub fn vectors(&self, profile: &ReportProfile) -> Vec<ValuationVector> {
        let levels: Vec<i64> = (0..=self.top(profile))
            .step_by(self.step.max(1) as usize)
            .collect();
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(profile.k);
        grid_rec(&levels, levels.len(), profile.k, &mut current, &mut out);
        out
    }
}

fn grid_rec(
    levels: &[i64],
    below: usize,
    k: usize,
    current: &mut Vec<i64>,
    out: &mut Vec<ValuationVector>,
) {
    if current.len() == k {
        out.push(ValuationVector::from_units(current));
        return;
    }
    for idx in (0..below).rev() {
        current.push(levels[idx]);
        grid_rec(levels, idx + 1, k, current, out);
        current.pop();
    }
}

fn binomial(n: u64, r: u64) -> u64 {
    (0..r).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// All subsets of `set`, as sorted sets, the full set last.
pub(crate) fn subsets(set: &BTreeSet<BuyerId>) -> Vec<BTreeSet<BuyerId>> {
    let items: Vec<BuyerId> = set.iter().copied().collect();
    (0u64..1 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &b)| b)
                .collect()
        })
        .collect()
}

/// Utility of `buyer` under `profile`, measured with her true valuation.
pub(crate) fn utility_under(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    buyer: BuyerId,
    true_values: &ValuationVector,
) -> Result<Money, VerifyError> {
    Ok(mechanism.run(profile)?.utility(buyer, true_values))
}

pub(crate) fn with_report(profile: &ReportProfile, buyer: BuyerId, report: ReportedType) -> ReportProfile {
    let mut p = profile.clone();
    p.reports.insert(buyer, report);
    p
}

/// A μ that stays valid under every single-buyer invitation deviation the
/// harness enumerates, so truthful and deviating runs share one μ.
pub fn deviation_safe_mu(profile: &ReportProfile, budget: &VerifyBudget) -> Result<usize, VerifyError> {
    let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
    let mut mu = min_valid_mu(&tree);
    for &i in tree.valid() {
        let report = &profile.reports[&i];
        if report.invited.len() > budget.max_invitations {
            return Err(VerifyError::SearchBudgetExceeded {
                buyer: i,
                needed: 1 << report.invited.len().min(63),
                limit: 1 << budget.max_invitations,
            });
        }
        for hidden in subsets(&report.invited) {
            let deviated = with_report(
                profile,
                i,
                ReportedType {
                    values: report.values.clone(),
                    invited: hidden,
                },
            );
            let t = tree_from_profile(deviated).map_err(MechanismError::from)?;
            mu = mu.max(min_valid_mu(&t));
        }
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size_matches_enumeration() {
        let profile = ReportProfile::new(2).with_buyer(0, &[8, 3], []);
        let grid = MisreportGrid::default();
        let vectors = grid.vectors(&profile);
        assert_eq!(vectors.len() as u64, grid.size(&profile));
        // 11 levels, K = 2: C(12, 2) = 66.
        assert_eq!(vectors.len(), 66);
        assert!(vectors
            .iter()
            .all(|v| v.marginals().windows(2).all(|w| w[0] >= w[1])));
        let distinct: BTreeSet<_> = vectors.iter().map(|v| v.marginals().to_vec()).collect();
        assert_eq!(distinct.len(), 66);
    }

    #[test]
    fn subsets_end_with_full_set() {
        let set: BTreeSet<BuyerId> = [BuyerId(1), BuyerId(4)].into_iter().collect();
        let all = subsets(&set);
        assert_eq!(all.len(), 4);
        assert_eq!(all.last(), Some(&set));
        assert!(all[0].is_empty());
    }

    #[test]
    fn safe_mu_covers_rerouted_children() {
        // Hiding 3 from 1 reroutes 3 (which has a child) to 2, which then
        // has two children with children.
        let p = ReportProfile::new(1)
            .with_seller_neighbors([1, 2])
            .with_buyer(1, &[1], [3])
            .with_buyer(2, &[1], [3, 6])
            .with_buyer(3, &[1], [4])
            .with_buyer(4, &[1], [])
            .with_buyer(6, &[1], [8])
            .with_buyer(8, &[1], []);
        let tree = tree_from_profile(p.clone()).unwrap();
        assert_eq!(min_valid_mu(&tree), 1);
        assert_eq!(deviation_safe_mu(&p, &VerifyBudget::default()).unwrap(), 2);
    }
}
