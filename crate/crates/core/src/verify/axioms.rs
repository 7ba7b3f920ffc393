use std::collections::BTreeSet;

use serde::Serialize;

use crate::market::{
    compute_market, tree_from_profile, BuyerId, Market, Node, ReportProfile, ReportedType, TreeMarket,
};
use crate::mechanisms::{
    run_ldm, run_ldm_tree, run_ldm_tree_ordered, run_vcg_first_layer, MechanismError, Outcome,
    ReservePrice, TraversalOrder,
};
use crate::money::Money;
use crate::removed::RemovedSets;

use super::{subsets, with_report, MisreportGrid, VerifyBudget, VerifyError};

/// All `K` units are placed whenever some buyer is valid.
pub fn check_non_wasteful(outcome: &Outcome, market: &Market) -> bool {
    market.valid.is_empty() || outcome.allocated() == market.k()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub ldm_welfare: Money,
    pub vcg_welfare: Money,
    pub ldm_revenue: Money,
    pub vcg_revenue: Money,
    pub welfare_dominates: bool,
    pub revenue_dominates: bool,
}

/// LDM against first-layer VCG on the same market and reserve.
pub fn compare_vs_vcg(
    profile: &ReportProfile,
    mu: usize,
    reserve: Option<ReservePrice>,
) -> Result<Comparison, VerifyError> {
    let market = compute_market(crate::market::validate_profile(profile.clone()).map_err(MechanismError::from)?);
    let ldm = run_ldm(&market, mu, reserve)?;
    let vcg = run_vcg_first_layer(&market, reserve);
    let (ldm_welfare, vcg_welfare) = (ldm.welfare(profile), vcg.welfare(profile));
    let (ldm_revenue, vcg_revenue) = (ldm.revenue(), vcg.revenue());
    Ok(Comparison {
        ldm_welfare,
        vcg_welfare,
        ldm_revenue,
        vcg_revenue,
        welfare_dominates: ldm_welfare >= vcg_welfare,
        revenue_dominates: ldm_revenue >= vcg_revenue,
    })
}

/// Reversed and seeded shuffled visiting orders inside each layer give the
/// ascending-order outcome.
pub fn check_order_independence(tree: &TreeMarket, mu: usize, seed: u64) -> Result<bool, VerifyError> {
    let base = run_ldm_tree(tree, mu)?;
    let reversed = run_ldm_tree_ordered(tree, mu, |_, layer| layer.iter().rev().copied().collect())?;
    let shuffled = run_ldm_tree_ordered(tree, mu, |l, layer| {
        TraversalOrder::Shuffled(seed).arrange(l, layer)
    })?;
    Ok(base == reversed && base == shuffled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityCause {
    /// Values changed, invitations fixed.
    Value,
    /// Invitations shrank, values fixed.
    Invitation,
}

/// `buyer` stayed in her parent's removed set but the set itself changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityViolation {
    pub cause: StabilityCause,
    pub buyer: BuyerId,
    pub parent: BuyerId,
    pub deviating_report: ReportedType,
    pub before: BTreeSet<BuyerId>,
    pub after: BTreeSet<BuyerId>,
}

/// Stability of `C_j^R` for every non-root buyer `i` with parent `j` on the
/// breadth-first tree, under value misreports from `grid` and under every
/// invitation subset.
pub fn check_removed_set_stability(
    profile: &ReportProfile,
    mu: usize,
    grid: &MisreportGrid,
    budget: &VerifyBudget,
) -> Result<Vec<StabilityViolation>, VerifyError> {
    let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
    let base = tree.to_tree_profile();
    let candidates = grid.vectors(&base);
    let mut found = Vec::new();

    for (&i, &parent) in &tree.parent {
        let Node::Buyer(j) = parent else { continue };
        let truth = base.reports[&i].clone();
        let before = removed_of(&base, mu, j)?;
        if !before.contains(&i) {
            continue;
        }
        if truth.invited.len() > budget.max_invitations {
            return Err(VerifyError::SearchBudgetExceeded {
                buyer: i,
                needed: 1 << truth.invited.len().min(63),
                limit: 1 << budget.max_invitations,
            });
        }
        let value_lies = candidates.iter().map(|v| {
            (StabilityCause::Value, ReportedType { values: v.clone(), invited: truth.invited.clone() })
        });
        let invite_lies = subsets(&truth.invited).into_iter().map(|invited| {
            (StabilityCause::Invitation, ReportedType { values: truth.values.clone(), invited })
        });
        for (cause, lie) in value_lies.chain(invite_lies) {
            let after = removed_of(&with_report(&base, i, lie.clone()), mu, j)?;
            if after.contains(&i) && after != before {
                found.push(StabilityViolation {
                    cause,
                    buyer: i,
                    parent: j,
                    deviating_report: lie,
                    before: before.clone(),
                    after,
                });
            }
        }
    }
    Ok(found)
}

fn removed_of(profile: &ReportProfile, mu: usize, j: BuyerId) -> Result<BTreeSet<BuyerId>, VerifyError> {
    let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
    let sets = RemovedSets::compute(&tree, mu).map_err(MechanismError::from)?;
    Ok(sets.removed_for(j).clone())
}
