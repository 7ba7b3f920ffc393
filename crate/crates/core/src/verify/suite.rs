use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::market::{compute_market, tree_from_profile, validate_profile, ReportProfile};
use crate::mechanisms::{
    run_ldm_tree, run_vcg_first_layer, Mechanism, MechanismError, MechanismKind, ReservePrice,
    TraversalOrder,
};

use super::{
    check_child_monotonicity, check_child_monotonicity_with, check_decomposition_inequalities, check_invitation_ic, check_ir,
    check_non_wasteful, check_order_independence, check_removed_set_stability, check_value_ic,
    compare_vs_vcg, deviation_safe_mu, payment_decomposition, DeviationReport, MisreportGrid,
    ChildSubsets, StabilityViolation, VerifyBudget, VerifyError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Ir,
    InviteIc,
    ValueIc,
    NonWasteful,
    Dominance,
    Decomposition,
    ChildMonotonicity,
    /// [`Property::ChildMonotonicity`] over non-empty pruned child sets.
    ChildMonotonicityNonEmpty,
    OrderIndependence,
    RemovedSetStability,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::Ir,
        Property::InviteIc,
        Property::ValueIc,
        Property::NonWasteful,
        Property::Dominance,
        Property::Decomposition,
        Property::ChildMonotonicity,
        Property::ChildMonotonicityNonEmpty,
        Property::OrderIndependence,
        Property::RemovedSetStability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Ir => "ir",
            Property::InviteIc => "invite-ic",
            Property::ValueIc => "value-ic",
            Property::NonWasteful => "non-wasteful",
            Property::Dominance => "dominance",
            Property::Decomposition => "decomposition",
            Property::ChildMonotonicity => "child-monotonicity",
            Property::ChildMonotonicityNonEmpty => "child-monotonicity-nonempty",
            Property::OrderIndependence => "order-independence",
            Property::RemovedSetStability => "removed-set-stability",
        }
    }

    /// Properties stated only for the layered mechanism.
    fn layered_only(self) -> bool {
        matches!(
            self,
            Property::Dominance
                | Property::Decomposition
                | Property::OrderIndependence
                | Property::RemovedSetStability
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown property `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    BudgetExceeded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyResult {
    pub property: Property,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<DeviationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stability: Vec<StabilityViolation>,
    /// The error behind [`Status::Error`] or [`Status::BudgetExceeded`].
    #[serde(skip)]
    pub error: Option<VerifyError>,
}

impl PropertyResult {
    fn new(property: Property, status: Status, detail: Option<String>) -> Self {
        PropertyResult {
            property,
            status,
            detail,
            violations: Vec::new(),
            stability: Vec::new(),
            error: None,
        }
    }
}

/// A mechanism with its parameters; μ is resolved per instance when unset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub mu: Option<usize>,
    pub reserve: Option<ReservePrice>,
    pub order: TraversalOrder,
}

impl MechanismSpec {
    pub fn new(kind: MechanismKind) -> Self {
        MechanismSpec {
            kind,
            mu: None,
            reserve: None,
            order: TraversalOrder::Ascending,
        }
    }

    /// The fixed μ, or the deviation-safe μ of `profile`.
    pub fn resolve_mu(&self, profile: &ReportProfile, budget: &VerifyBudget) -> Result<usize, VerifyError> {
        match self.mu {
            Some(mu) => Ok(mu),
            None if self.kind.is_layered() => deviation_safe_mu(profile, budget),
            None => Ok(0),
        }
    }

    pub fn build(&self, profile: &ReportProfile, budget: &VerifyBudget) -> Result<Box<dyn Mechanism>, VerifyError> {
        Ok(self.kind.instantiate(self.resolve_mu(profile, budget)?, self.reserve, self.order))
    }
}

/// Runs each requested property on one instance. Results follow the order
/// of `properties`.
pub fn run_properties(
    spec: &MechanismSpec,
    profile: &ReportProfile,
    properties: &[Property],
    grid: &MisreportGrid,
    budget: &VerifyBudget,
) -> Vec<PropertyResult> {
    properties
        .iter()
        .map(|&p| match run_one(spec, profile, p, grid, budget) {
            Ok(r) => r,
            Err(e @ VerifyError::SearchBudgetExceeded { .. }) => PropertyResult {
                error: Some(e.clone()),
                ..PropertyResult::new(p, Status::BudgetExceeded, Some(e.to_string()))
            },
            Err(e) => PropertyResult {
                error: Some(e.clone()),
                ..PropertyResult::new(p, Status::Error, Some(e.to_string()))
            },
        })
        .collect()
}

fn from_reports(property: Property, violations: Vec<DeviationReport>) -> PropertyResult {
    let status = if violations.is_empty() { Status::Pass } else { Status::Fail };
    PropertyResult {
        violations,
        ..PropertyResult::new(property, status, None)
    }
}

fn verdict(property: Property, ok: bool, detail: String) -> PropertyResult {
    let status = if ok { Status::Pass } else { Status::Fail };
    PropertyResult::new(property, status, (!ok).then_some(detail))
}

fn run_one(
    spec: &MechanismSpec,
    profile: &ReportProfile,
    property: Property,
    grid: &MisreportGrid,
    budget: &VerifyBudget,
) -> Result<PropertyResult, VerifyError> {
    if property.layered_only() && !spec.kind.is_layered() {
        return Ok(PropertyResult::new(
            property,
            Status::Skipped,
            Some(format!("not defined for {}", spec.kind.name())),
        ));
    }
    let plain = spec.reserve.is_none();
    if !plain && matches!(property, Property::NonWasteful | Property::Decomposition) {
        return Ok(PropertyResult::new(
            property,
            Status::Skipped,
            Some("not defined with a reserve price".into()),
        ));
    }
    let mu = spec.resolve_mu(profile, budget)?;
    let mechanism = spec.kind.instantiate(mu, spec.reserve, spec.order);
    let mechanism = mechanism.as_ref();

    Ok(match property {
        Property::Ir => from_reports(property, check_ir(mechanism, profile, budget)?),
        Property::InviteIc => from_reports(property, check_invitation_ic(mechanism, profile, budget)?),
        Property::ValueIc => from_reports(property, check_value_ic(mechanism, profile, grid, budget)?),
        Property::ChildMonotonicity => {
            from_reports(property, check_child_monotonicity(mechanism, profile, budget)?)
        }
        Property::ChildMonotonicityNonEmpty => from_reports(
            property,
            check_child_monotonicity_with(mechanism, profile, budget, ChildSubsets::NonEmpty)?,
        ),
        Property::NonWasteful => {
            let market = compute_market(validate_profile(profile.clone()).map_err(MechanismError::from)?);
            let outcome = mechanism.run(profile)?;
            verdict(
                property,
                check_non_wasteful(&outcome, &market),
                format!("{} of {} units allocated", outcome.allocated(), market.k()),
            )
        }
        Property::Dominance => {
            let c = compare_vs_vcg(profile, mu, spec.reserve)?;
            verdict(
                property,
                c.welfare_dominates && c.revenue_dominates,
                format!(
                    "welfare {} vs {}, revenue {} vs {}",
                    c.ldm_welfare, c.vcg_welfare, c.ldm_revenue, c.vcg_revenue
                ),
            )
        }
        Property::Decomposition => {
            let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
            let outcome = run_ldm_tree(&tree, mu)?;
            let rows = match payment_decomposition(&outcome, &tree, mu) {
                Ok(rows) => rows,
                Err(VerifyError::DecompositionMismatch { buyer, detail }) => {
                    return Ok(verdict(property, false, format!("buyer {buyer}: {detail}")))
                }
                Err(e) => return Err(e),
            };
            let vcg = run_vcg_first_layer(&tree.market, None);
            let (first, later) = check_decomposition_inequalities(&rows, &vcg);
            verdict(
                property,
                first && later,
                format!("first-layer bound {first}, deeper-layer bound {later}"),
            )
        }
        Property::OrderIndependence => {
            let tree = tree_from_profile(profile.clone()).map_err(MechanismError::from)?;
            verdict(
                property,
                check_order_independence(&tree, mu, 0x5eed)?,
                "outcome depends on the visiting order".into(),
            )
        }
        Property::RemovedSetStability => {
            let found = check_removed_set_stability(profile, mu, grid, budget)?;
            PropertyResult {
                stability: found.clone(),
                ..verdict(property, found.is_empty(), format!("{} violations", found.len()))
            }
        }
    })
}
