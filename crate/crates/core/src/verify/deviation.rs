use std::collections::BTreeSet;

use serde::Serialize;

use crate::market::{tree_from_profile, BuyerId, ReportProfile, ReportedType};
use crate::mechanisms::{Mechanism, MechanismError};
use crate::money::Money;

use super::{
    subsets, utility_under, with_report, DeviationKind, DeviationReport, MisreportGrid,
    VerifyBudget, VerifyError,
};

fn valid_buyers(profile: &ReportProfile) -> Result<BTreeSet<BuyerId>, VerifyError> {
    Ok(tree_from_profile(profile.clone())
        .map_err(MechanismError::from)?
        .valid()
        .clone())
}

fn invitation_subsets(
    profile: &ReportProfile,
    buyer: BuyerId,
    budget: &VerifyBudget,
) -> Result<Vec<BTreeSet<BuyerId>>, VerifyError> {
    let invited = &profile.reports[&buyer].invited;
    if invited.len() > budget.max_invitations {
        return Err(VerifyError::SearchBudgetExceeded {
            buyer,
            needed: 1u64 << invited.len().min(63),
            limit: 1u64 << budget.max_invitations,
        });
    }
    Ok(subsets(invited))
}

#[allow(clippy::too_many_arguments)]
fn report(
    kind: DeviationKind,
    mechanism: &dyn Mechanism,
    instance: &ReportProfile,
    buyer: BuyerId,
    deviator: BuyerId,
    truthful_report: ReportedType,
    deviating_report: ReportedType,
    truthful_utility: Money,
    deviating_utility: Money,
) -> DeviationReport {
    DeviationReport {
        kind,
        mechanism: mechanism.name().to_string(),
        buyer,
        deviator,
        truthful_report,
        deviating_report,
        truthful_utility,
        deviating_utility,
        instance: instance.clone(),
    }
}

/// Utilities of `buyer` with truthful values for every invitation subset,
/// the full set last.
fn invitation_utilities(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    buyer: BuyerId,
    budget: &VerifyBudget,
) -> Result<Vec<(ReportedType, Money)>, VerifyError> {
    let truth = &profile.reports[&buyer];
    invitation_subsets(profile, buyer, budget)?
        .into_iter()
        .map(|invited| {
            let r = ReportedType {
                values: truth.values.clone(),
                invited,
            };
            let u = utility_under(mechanism, &with_report(profile, buyer, r.clone()), buyer, &truth.values)?;
            Ok((r, u))
        })
        .collect()
}

/// Individual rationality: with truthful values every invitation subset
/// yields non-negative utility.
pub fn check_ir(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    budget: &VerifyBudget,
) -> Result<Vec<DeviationReport>, VerifyError> {
    let mut found = Vec::new();
    for buyer in valid_buyers(profile)? {
        for (r, u) in invitation_utilities(mechanism, profile, buyer, budget)? {
            if u < Money::ZERO {
                found.push(report(
                    DeviationKind::Participation,
                    mechanism,
                    profile,
                    buyer,
                    buyer,
                    r.clone(),
                    r,
                    u,
                    Money::ZERO,
                ));
            }
        }
    }
    Ok(found)
}

/// Invitation incentive: with truthful values, inviting everyone is at least
/// as good as any proper subset.
pub fn check_invitation_ic(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    budget: &VerifyBudget,
) -> Result<Vec<DeviationReport>, VerifyError> {
    let mut found = Vec::new();
    for buyer in valid_buyers(profile)? {
        let mut utilities = invitation_utilities(mechanism, profile, buyer, budget)?;
        let (truth, u_truth) = utilities.pop().expect("full set is always present");
        for (r, u) in utilities {
            if u > u_truth {
                found.push(report(
                    DeviationKind::Invitation,
                    mechanism,
                    profile,
                    buyer,
                    buyer,
                    truth.clone(),
                    r,
                    u_truth,
                    u,
                ));
            }
        }
    }
    Ok(found)
}

/// Value incentive, combined with every invitation subset. For each subset
/// `r̂` and grid vector `v̂` both `u(v, r̂) ≥ u(v̂, r̂)` and `u(v, r) ≥ u(v̂, r̂)`
/// are checked; the invitation step in between is [`check_invitation_ic`].
pub fn check_value_ic(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    grid: &MisreportGrid,
    budget: &VerifyBudget,
) -> Result<Vec<DeviationReport>, VerifyError> {
    let size = grid.size(profile);
    let candidates = grid.vectors(profile);
    let mut found = Vec::new();
    for buyer in valid_buyers(profile)? {
        if size > budget.max_grid {
            return Err(VerifyError::SearchBudgetExceeded {
                buyer,
                needed: size,
                limit: budget.max_grid,
            });
        }
        let truth = &profile.reports[&buyer];
        let utilities = invitation_utilities(mechanism, profile, buyer, budget)?;
        let (full, u_full) = utilities.last().cloned().expect("full set is always present");
        for (honest, u_honest) in &utilities {
            for values in &candidates {
                if *values == truth.values {
                    continue;
                }
                let lie = ReportedType {
                    values: values.clone(),
                    invited: honest.invited.clone(),
                };
                let u = utility_under(mechanism, &with_report(profile, buyer, lie.clone()), buyer, &truth.values)?;
                if u > *u_honest {
                    found.push(report(
                        DeviationKind::Value,
                        mechanism,
                        profile,
                        buyer,
                        buyer,
                        honest.clone(),
                        lie.clone(),
                        *u_honest,
                        u,
                    ));
                }
                if u > u_full {
                    found.push(report(
                        DeviationKind::Combined,
                        mechanism,
                        profile,
                        buyer,
                        buyer,
                        full.clone(),
                        lie,
                        u_full,
                        u,
                    ));
                }
            }
        }
    }
    Ok(found)
}

/// Which pruned child sets `Ĉ_j ⊊ C_j` are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChildSubsets {
    /// Every proper subset, the empty set included.
    #[default]
    All,
    /// Non-empty proper subsets only, so `j` keeps having children.
    NonEmpty,
}

/// Same-layer monotonicity on the breadth-first tree: pruning a peer's child
/// set never lowers a buyer's utility. Every proper subset is tried.
pub fn check_child_monotonicity(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    budget: &VerifyBudget,
) -> Result<Vec<DeviationReport>, VerifyError> {
    check_child_monotonicity_with(mechanism, profile, budget, ChildSubsets::All)
}

pub fn check_child_monotonicity_with(
    mechanism: &dyn Mechanism,
    profile: &ReportProfile,
    budget: &VerifyBudget,
    scope: ChildSubsets,
) -> Result<Vec<DeviationReport>, VerifyError> {
    let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
    let base = tree.to_tree_profile();
    let full = mechanism.run(&base)?;
    let mut found = Vec::new();
    for l in 1..=tree.depth {
        let layer = tree.layer(l);
        if layer.len() < 2 {
            continue;
        }
        for &j in layer {
            let children: BTreeSet<BuyerId> = tree.children(j).iter().copied().collect();
            if children.is_empty() {
                continue;
            }
            if children.len() > budget.max_invitations {
                return Err(VerifyError::SearchBudgetExceeded {
                    buyer: j,
                    needed: 1u64 << children.len().min(63),
                    limit: 1u64 << budget.max_invitations,
                });
            }
            let full_report = base.reports[&j].clone();
            for kept in subsets(&children) {
                if kept == children || (scope == ChildSubsets::NonEmpty && kept.is_empty()) {
                    continue;
                }
                let pruned_report = ReportedType {
                    values: full_report.values.clone(),
                    invited: kept,
                };
                let pruned = mechanism.run(&with_report(&base, j, pruned_report.clone()))?;
                for &i in layer.iter().filter(|&&i| i != j) {
                    let v = tree.values(i);
                    let (u_pruned, u_full) = (pruned.utility(i, v), full.utility(i, v));
                    if u_full > u_pruned {
                        found.push(report(
                            DeviationKind::ChildMonotonicity,
                            mechanism,
                            &base,
                            i,
                            j,
                            pruned_report.clone(),
                            full_report.clone(),
                            u_pruned,
                            u_full,
                        ));
                    }
                }
            }
        }
    }
    found.sort_by_key(|r| (r.buyer, r.deviator));
    Ok(found)
}
