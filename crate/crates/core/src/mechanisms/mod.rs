//! Auction mechanisms: first-layer VCG, DNA-MU, LDM-Tree and graph LDM.

mod dna_mu;
mod ldm;
mod vcg;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::market::{BuyerId, ModelError, ReportProfile, ValuationVector};
use crate::money::Money;
use crate::removed::{RemovalRule, RemovedSetError};
use crate::welfare::{Allocation, WelfareError};

pub use dna_mu::{run_dna_mu, DnaStep, TraversalOrder};
pub use ldm::{run_ldm, run_ldm_tree, run_ldm_tree_ordered, run_ldm_tree_with_rule, LayerTrace};
pub use vcg::run_vcg_first_layer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("mu = {given} is below the required bound {required}")]
    MuTooSmall { required: usize, given: usize },
    #[error("the reported network is not a tree")]
    NotATree,
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("removed sets: {0}")]
    RemovedSet(RemovedSetError),
}

impl From<RemovedSetError> for MechanismError {
    fn from(e: RemovedSetError) -> Self {
        match e {
            RemovedSetError::MuTooSmall { required, given } => {
                MechanismError::MuTooSmall { required, given }
            }
            other => MechanismError::RemovedSet(other),
        }
    }
}

/// Reserve price realized as `K` unit-demand first-layer dummy buyers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReservePrice {
    pub price: Money,
}

impl ReservePrice {
    pub fn new(price: Money) -> Self {
        ReservePrice { price }
    }
}

/// Per-mechanism diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trace {
    #[default]
    None,
    Ldm {
        mu: usize,
        layers: Vec<LayerTrace>,
    },
    DnaMu {
        steps: Vec<DnaStep>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub mechanism: String,
    /// Units per buyer, for every buyer of the profile.
    pub units: BTreeMap<BuyerId, usize>,
    /// Payment per buyer, negative for rewards.
    pub payments: BTreeMap<BuyerId, Money>,
    /// Units held back because a reserve dummy won them.
    pub withheld: usize,
    /// Ids of reserve dummies as they appear in the trace.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dummies: Vec<BuyerId>,
    pub trace: Trace,
}

impl Outcome {
    pub(crate) fn empty(mechanism: &str, profile: &ReportProfile) -> Self {
        Outcome {
            mechanism: mechanism.to_string(),
            units: profile.reports.keys().map(|&b| (b, 0)).collect(),
            payments: profile.reports.keys().map(|&b| (b, Money::ZERO)).collect(),
            ..Default::default()
        }
    }

    pub fn units_of(&self, id: BuyerId) -> usize {
        self.units.get(&id).copied().unwrap_or(0)
    }

    pub fn payment_of(&self, id: BuyerId) -> Money {
        self.payments.get(&id).copied().unwrap_or(Money::ZERO)
    }

    pub fn allocated(&self) -> usize {
        self.units.values().sum()
    }

    pub fn revenue(&self) -> Money {
        self.payments.values().sum()
    }

    /// Total value of the allocated units under the given valuations.
    pub fn welfare(&self, profile: &ReportProfile) -> Money {
        self.units
            .iter()
            .filter(|(_, &u)| u > 0)
            .map(|(b, &u)| profile.values(*b).value_of(u))
            .sum()
    }

    /// Quasi-linear utility of `id` given her true valuation.
    pub fn utility(&self, id: BuyerId, true_values: &ValuationVector) -> Money {
        true_values.value_of(self.units_of(id)) - self.payment_of(id)
    }

    pub fn allocation(&self) -> Allocation {
        self.units.iter().map(|(&b, &u)| (b, u)).collect()
    }

    /// Same allocation and payments, ignoring trace and labels.
    pub fn same_result(&self, other: &Outcome) -> bool {
        self.units == other.units
            && self.payments == other.payments
            && self.withheld == other.withheld
    }
}

/// A diffusion auction mechanism over report profiles.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, profile: &ReportProfile) -> Result<Outcome, MechanismError>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VcgFirstLayer {
    pub reserve: Option<ReservePrice>,
}

impl Mechanism for VcgFirstLayer {
    fn name(&self) -> &'static str {
        "vcg-l1"
    }

    fn run(&self, profile: &ReportProfile) -> Result<Outcome, MechanismError> {
        let market = crate::market::compute_market(crate::market::validate_profile(profile.clone())?);
        Ok(run_vcg_first_layer(&market, self.reserve))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DnaMu {
    pub order: TraversalOrder,
}

impl Mechanism for DnaMu {
    fn name(&self) -> &'static str {
        "dna-mu"
    }

    fn run(&self, profile: &ReportProfile) -> Result<Outcome, MechanismError> {
        let tree = crate::market::tree_from_profile(profile.clone())?;
        Ok(run_dna_mu(&tree, self.order))
    }
}

/// LDM restricted to tree-shaped reports.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LdmTree {
    pub mu: usize,
    pub rule: RemovalRule,
}

impl Mechanism for LdmTree {
    fn name(&self) -> &'static str {
        "ldm-tree"
    }

    fn run(&self, profile: &ReportProfile) -> Result<Outcome, MechanismError> {
        let tree = crate::market::tree_from_profile(profile.clone())?;
        if !tree.market.is_tree() {
            return Err(MechanismError::NotATree);
        }
        run_ldm_tree_with_rule(&tree, self.mu, self.rule)
    }
}

/// LDM on arbitrary graphs via the breadth-first tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ldm {
    pub mu: usize,
    pub reserve: Option<ReservePrice>,
}

impl Mechanism for Ldm {
    fn name(&self) -> &'static str {
        "ldm"
    }

    fn run(&self, profile: &ReportProfile) -> Result<Outcome, MechanismError> {
        let market = crate::market::compute_market(crate::market::validate_profile(profile.clone())?);
        run_ldm(&market, self.mu, self.reserve)
    }
}

/// The mechanisms by their command-line names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MechanismKind {
    #[serde(rename = "vcg-l1")]
    VcgL1,
    #[serde(rename = "dna-mu")]
    DnaMu,
    #[serde(rename = "ldm-tree")]
    LdmTree,
    #[serde(rename = "ldm")]
    Ldm,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [
        MechanismKind::VcgL1,
        MechanismKind::DnaMu,
        MechanismKind::LdmTree,
        MechanismKind::Ldm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::VcgL1 => "vcg-l1",
            MechanismKind::DnaMu => "dna-mu",
            MechanismKind::LdmTree => "ldm-tree",
            MechanismKind::Ldm => "ldm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the mechanism uses μ.
    pub fn is_layered(self) -> bool {
        matches!(self, MechanismKind::LdmTree | MechanismKind::Ldm)
    }

    /// `reserve` is ignored by DNA-MU and LDM-Tree, `order` by all but DNA-MU.
    pub fn instantiate(
        self,
        mu: usize,
        reserve: Option<ReservePrice>,
        order: TraversalOrder,
    ) -> Box<dyn Mechanism> {
        match self {
            MechanismKind::VcgL1 => Box::new(VcgFirstLayer { reserve }),
            MechanismKind::DnaMu => Box::new(DnaMu { order }),
            MechanismKind::LdmTree => Box::new(LdmTree {
                mu,
                rule: RemovalRule::Layered,
            }),
            MechanismKind::Ldm => Box::new(Ldm { mu, reserve }),
        }
    }
}

/// Adds `K` dummy first-layer buyers with unit demand at the reserve price.
/// Dummies take the ids directly after the largest real id.
pub(crate) fn with_dummies(
    profile: &ReportProfile,
    reserve: ReservePrice,
) -> (ReportProfile, Vec<BuyerId>) {
    let mut augmented = profile.clone();
    let start = profile.max_id().map(|b| b.0 + 1).unwrap_or(0);
    let dummies: Vec<BuyerId> = (0..profile.k as u32).map(|d| BuyerId(start + d)).collect();
    for (n, &d) in dummies.iter().enumerate() {
        augmented.reports.insert(
            d,
            crate::market::ReportedType {
                values: ValuationVector::unit_demand(reserve.price, profile.k),
                invited: BTreeSet::new(),
            },
        );
        augmented.seller_neighbors.insert(d);
        augmented.labels.insert(d, format!("reserve#{n}"));
    }
    (augmented, dummies)
}

/// Removes dummies from the outcome. Their units are withheld, not resold.
pub(crate) fn strip_dummies(mut outcome: Outcome, dummies: Vec<BuyerId>) -> Outcome {
    for d in &dummies {
        outcome.withheld += outcome.units.remove(d).unwrap_or(0);
        outcome.payments.remove(d);
    }
    outcome.dummies = dummies;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn t4_vcg_first_layer() {
        let out = VcgFirstLayer::default().run(&fixtures::t4()).unwrap();
        assert_eq!(out.units_of(BuyerId(2)), 1);
        assert_eq!(out.payment_of(BuyerId(2)), Money(1));
        assert_eq!(out.revenue(), Money(1));
        assert_eq!(out.units_of(BuyerId(3)), 0);
    }

    #[test]
    fn t4_ldm() {
        let out = Ldm { mu: 1, reserve: None }.run(&fixtures::t4()).unwrap();
        let pay = |b| out.payment_of(BuyerId(b));
        assert_eq!(
            (pay(1), pay(2), pay(3), pay(4), pay(5)),
            (Money(-3), Money(0), Money(8), Money(0), Money(0))
        );
        assert_eq!(out.units_of(BuyerId(3)), 1);
        assert_eq!(out.allocated(), 1);
        assert_eq!(out.revenue(), Money(5));
    }

    // Hand trace with one dummy of value 6 in layer 1. Layer 1 over
    // {1, 2, 5, dummy}: buyer 5 is tentatively best (7); buyer 1 sees
    // max(4, 6) = 6 without her subtree, so p1 = 6 - 7 = -1. Layer 2: buyer 3
    // wins and pays 8. Revenue 7.
    #[test]
    fn t4_ldm_with_reserve() {
        let reserve = Some(ReservePrice::new(Money(6)));
        let out = Ldm { mu: 1, reserve }.run(&fixtures::t4()).unwrap();
        assert_eq!(out.payment_of(BuyerId(1)), Money(-1));
        assert_eq!(out.payment_of(BuyerId(2)), Money(0));
        assert_eq!(out.payment_of(BuyerId(3)), Money(8));
        assert_eq!(out.units_of(BuyerId(3)), 1);
        assert_eq!(out.revenue(), Money(7));
        assert_eq!(out.withheld, 0);
        assert!(!out.units.contains_key(&BuyerId(6)));

        // VCG with the same reserve: the dummy outbids buyer 2 and the unit is withheld.
        let vcg = VcgFirstLayer { reserve }.run(&fixtures::t4()).unwrap();
        assert_eq!(vcg.withheld, 1);
        assert_eq!(vcg.revenue(), Money(0));
    }

    #[test]
    fn ldm_tree_rejects_graphs_and_small_mu() {
        let (graph, _) = fixtures::figure4();
        assert_eq!(
            LdmTree { mu: 2, ..Default::default() }.run(&graph),
            Err(MechanismError::NotATree)
        );
        let (tree, _) = fixtures::figure3();
        assert_eq!(
            Ldm { mu: 1, reserve: None }.run(&tree),
            Err(MechanismError::MuTooSmall { required: 2, given: 1 })
        );
    }

    #[test]
    fn kinds_round_trip_names() {
        for kind in MechanismKind::ALL {
            assert_eq!(MechanismKind::from_name(kind.name()), Some(kind));
            let built = kind.instantiate(0, None, TraversalOrder::Ascending);
            assert_eq!(built.name(), kind.name());
        }
        assert_eq!(MechanismKind::from_name("vcg"), None);
    }

    #[test]
    fn single_buyer() {
        let p = ReportProfile::new(1)
            .with_seller_neighbors([0])
            .with_buyer(0, &[5], []);
        for mech in [
            &VcgFirstLayer::default() as &dyn Mechanism,
            &DnaMu::default(),
            &LdmTree::default(),
            &Ldm::default(),
        ] {
            let out = mech.run(&p).unwrap();
            assert_eq!(out.units_of(BuyerId(0)), 1, "{}", mech.name());
            assert_eq!(out.payment_of(BuyerId(0)), Money(0), "{}", mech.name());
        }
    }

    #[test]
    fn empty_market() {
        let p = ReportProfile::new(2).with_buyer(4, &[3, 1], []);
        for mech in [
            &VcgFirstLayer::default() as &dyn Mechanism,
            &DnaMu::default(),
            &Ldm::default(),
        ] {
            let out = mech.run(&p).unwrap();
            assert_eq!(out.allocated(), 0);
            assert_eq!(out.revenue(), Money(0));
        }
    }
}
