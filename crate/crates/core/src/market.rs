//! Network and valuation model: report profiles, the valid-buyer set and its
//! layers, and the breadth-first tree the tree mechanisms run on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// Buyer identifier. The total order on ids is the tie-break order used
/// everywhere in the crate.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BuyerId(pub u32);

impl fmt::Display for BuyerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A tree node: either the seller (the root) or a buyer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Seller,
    Buyer(BuyerId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid report{}: {reason}", .buyer.map(|b| format!(" for buyer {b}")).unwrap_or_default())]
    Validation {
        buyer: Option<BuyerId>,
        reason: String,
    },
    #[error("contract violated: {0}")]
    Contract(String),
}

impl ModelError {
    fn invalid(buyer: impl Into<Option<BuyerId>>, reason: impl Into<String>) -> Self {
        ModelError::Validation {
            buyer: buyer.into(),
            reason: reason.into(),
        }
    }
}

/// Marginal values for the 1st, 2nd, ... unit. Valid vectors are
/// non-increasing and non-negative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValuationVector(Vec<Money>);

impl ValuationVector {
    pub fn new(marginals: Vec<Money>) -> Self {
        ValuationVector(marginals)
    }

    pub fn from_units(marginals: &[i64]) -> Self {
        ValuationVector(marginals.iter().copied().map(Money).collect())
    }

    /// A unit-demand vector: `value` for the first unit, zero afterwards.
    pub fn unit_demand(value: Money, k: usize) -> Self {
        let mut marginals = vec![Money::ZERO; k];
        if let Some(first) = marginals.first_mut() {
            *first = value;
        }
        ValuationVector(marginals)
    }

    pub fn marginals(&self) -> &[Money] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value of the first unit, zero for an empty vector.
    pub fn first_unit(&self) -> Money {
        self.0.first().copied().unwrap_or(Money::ZERO)
    }

    /// Value of holding `m` units. Panics if `m` exceeds the vector length;
    /// use [`cumulative_value`] for a checked variant.
    pub fn value_of(&self, m: usize) -> Money {
        self.0[..m].iter().sum()
    }

    pub fn scaled(&self, factor: i64) -> Self {
        ValuationVector(self.0.iter().map(|&v| v * factor).collect())
    }

    fn check(&self, k: usize) -> Result<(), String> {
        if self.0.len() != k {
            return Err(format!("expected {k} marginal values, got {}", self.0.len()));
        }
        if let Some(v) = self.0.iter().find(|v| v.is_negative()) {
            return Err(format!("negative marginal value {v}"));
        }
        if self.0.windows(2).any(|w| w[0] < w[1]) {
            return Err("non-increasing violated".to_string());
        }
        Ok(())
    }
}

/// Value of receiving `m` units: the sum of the first `m` marginals.
pub fn cumulative_value(v: &ValuationVector, m: usize) -> Result<Money, ModelError> {
    if m > v.len() {
        return Err(ModelError::Contract(format!(
            "cannot value {m} units with a {}-unit valuation",
            v.len()
        )));
    }
    Ok(v.value_of(m))
}

/// One buyer's report: valuation plus the set of neighbors she invites.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportedType {
    pub values: ValuationVector,
    pub invited: BTreeSet<BuyerId>,
}

impl ReportedType {
    pub fn new(values: ValuationVector, invited: impl IntoIterator<Item = BuyerId>) -> Self {
        ReportedType {
            values,
            invited: invited.into_iter().collect(),
        }
    }
}

/// All reports plus the seller's own neighbor set. Labels are only used for
/// display and serialization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportProfile {
    pub k: usize,
    pub seller_neighbors: BTreeSet<BuyerId>,
    pub reports: BTreeMap<BuyerId, ReportedType>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<BuyerId, String>,
}

impl ReportProfile {
    pub fn new(k: usize) -> Self {
        ReportProfile {
            k,
            ..Default::default()
        }
    }

    /// Builder-style insertion of a buyer report.
    pub fn with_buyer(
        mut self,
        id: u32,
        values: &[i64],
        invited: impl IntoIterator<Item = u32>,
    ) -> Self {
        self.reports.insert(
            BuyerId(id),
            ReportedType::new(
                ValuationVector::from_units(values),
                invited.into_iter().map(BuyerId),
            ),
        );
        self
    }

    pub fn with_seller_neighbors(mut self, ids: impl IntoIterator<Item = u32>) -> Self {
        self.seller_neighbors = ids.into_iter().map(BuyerId).collect();
        self
    }

    pub fn label(&self, id: BuyerId) -> String {
        self.labels
            .get(&id)
            .cloned()
            .unwrap_or_else(|| id.to_string())
    }

    pub fn values(&self, id: BuyerId) -> &ValuationVector {
        &self.reports[&id].values
    }

    pub fn max_id(&self) -> Option<BuyerId> {
        self.reports.keys().next_back().copied()
    }

    /// Largest marginal value reported by anyone.
    pub fn max_value(&self) -> Money {
        self.reports
            .values()
            .map(|r| r.values.first_unit())
            .max()
            .unwrap_or(Money::ZERO)
    }
}

/// Checks every profile invariant and returns the profile unchanged when it
/// holds. Buyers are checked in id order, so the error names the first
/// offending buyer.
pub fn validate_profile(raw: ReportProfile) -> Result<ReportProfile, ModelError> {
    if raw.k == 0 {
        return Err(ModelError::invalid(None, "item count must be at least 1"));
    }
    if let Some(&unknown) = raw
        .seller_neighbors
        .iter()
        .find(|id| !raw.reports.contains_key(id))
    {
        return Err(ModelError::invalid(unknown, "seller neighbor is not in the profile"));
    }
    for (&id, report) in &raw.reports {
        report
            .values
            .check(raw.k)
            .map_err(|reason| ModelError::invalid(id, reason))?;
        if report.invited.contains(&id) {
            return Err(ModelError::invalid(id, "buyer invites herself"));
        }
        if let Some(unknown) = report
            .invited
            .iter()
            .find(|j| !raw.reports.contains_key(j))
        {
            return Err(ModelError::invalid(
                id,
                format!("invites unknown buyer {unknown}"),
            ));
        }
    }
    Ok(raw)
}

/// A profile together with its valid-buyer set and layer structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Market {
    pub profile: ReportProfile,
    pub valid: BTreeSet<BuyerId>,
    pub layer_of: BTreeMap<BuyerId, usize>,
    /// `layers[d - 1]` holds layer `d`, sorted by id.
    pub layers: Vec<Vec<BuyerId>>,
}

impl Market {
    pub fn k(&self) -> usize {
        self.profile.k
    }

    pub fn values(&self, id: BuyerId) -> &ValuationVector {
        self.profile.values(id)
    }

    /// Buyers of layer `d` (1-based); empty beyond the deepest layer.
    pub fn layer(&self, d: usize) -> &[BuyerId] {
        d.checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Reported invitations of a buyer. Every invitee of a valid buyer is
    /// itself valid.
    pub fn invited(&self, id: BuyerId) -> &BTreeSet<BuyerId> {
        &self.profile.reports[&id].invited
    }

    /// True when every valid buyer has exactly one inviter in `{s} ∪ Q`.
    pub fn is_tree(&self) -> bool {
        let edges = self.profile.seller_neighbors.len()
            + self
                .valid
                .iter()
                .map(|&i| self.invited(i).len())
                .sum::<usize>();
        edges == self.valid.len()
    }
}

/// Derives the valid buyers and their shortest invitation-chain lengths.
///
/// Buyers without a chain from the seller stay in the profile but take no
/// part in anything computed from the market.
pub fn compute_market(profile: ReportProfile) -> Market {
    let mut layer_of = BTreeMap::new();
    let mut layers: Vec<Vec<BuyerId>> = Vec::new();
    let mut frontier: Vec<BuyerId> = profile.seller_neighbors.iter().copied().collect();
    for &b in &frontier {
        layer_of.insert(b, 1);
    }
    while !frontier.is_empty() {
        let depth = layers.len() + 1;
        let mut next = BTreeSet::new();
        for &i in &frontier {
            for &j in &profile.reports[&i].invited {
                if !layer_of.contains_key(&j) {
                    next.insert(j);
                }
            }
        }
        for &j in &next {
            layer_of.insert(j, depth + 1);
        }
        layers.push(frontier);
        frontier = next.into_iter().collect();
    }
    Market {
        valid: layer_of.keys().copied().collect(),
        profile,
        layer_of,
        layers,
    }
}

/// Rooted tree over the valid buyers with the seller at the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeMarket {
    pub market: Market,
    pub parent: BTreeMap<BuyerId, Node>,
    /// Children of every valid buyer, sorted by id (empty for leaves).
    pub children: BTreeMap<BuyerId, Vec<BuyerId>>,
    pub descendants: BTreeMap<BuyerId, BTreeSet<BuyerId>>,
    pub depth: usize,
}

impl TreeMarket {
    pub fn k(&self) -> usize {
        self.market.k()
    }

    pub fn values(&self, id: BuyerId) -> &ValuationVector {
        self.market.values(id)
    }

    pub fn layer(&self, d: usize) -> &[BuyerId] {
        self.market.layer(d)
    }

    pub fn layer_of(&self, id: BuyerId) -> Option<usize> {
        self.market.layer_of.get(&id).copied()
    }

    pub fn valid(&self) -> &BTreeSet<BuyerId> {
        &self.market.valid
    }

    pub fn children(&self, id: BuyerId) -> &[BuyerId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_children(&self, id: BuyerId) -> bool {
        !self.children(id).is_empty()
    }

    /// A profile whose invitation graph is exactly this tree. Running any
    /// mechanism on it sees the same tree.
    pub fn to_tree_profile(&self) -> ReportProfile {
        let src = &self.market.profile;
        let mut profile = ReportProfile {
            k: src.k,
            seller_neighbors: self.layer(1).iter().copied().collect(),
            reports: BTreeMap::new(),
            labels: src.labels.clone(),
        };
        for (&id, report) in &src.reports {
            let invited = if self.market.valid.contains(&id) {
                self.children(id).iter().copied().collect()
            } else {
                report.invited.clone()
            };
            profile.reports.insert(
                id,
                ReportedType {
                    values: report.values.clone(),
                    invited,
                },
            );
        }
        profile
    }
}

/// Breadth-first tree over the market graph. Layers are expanded in
/// ascending id order, so a buyer's parent is the smallest-id inviter in the
/// previous layer.
pub fn build_bfs_tree(market: Market) -> TreeMarket {
    let mut parent = BTreeMap::new();
    let mut children: BTreeMap<BuyerId, Vec<BuyerId>> =
        market.valid.iter().map(|&b| (b, Vec::new())).collect();
    for &b in market.layer(1) {
        parent.insert(b, Node::Seller);
    }
    for d in 1..market.depth() {
        for &i in market.layer(d) {
            for &j in market.invited(i) {
                if market.layer_of[&j] == d + 1 && !parent.contains_key(&j) {
                    parent.insert(j, Node::Buyer(i));
                    children.get_mut(&i).expect("valid buyer").push(j);
                }
            }
        }
    }
    for list in children.values_mut() {
        list.sort_unstable();
    }

    // Deepest layers first so every child's closure is ready.
    let mut descendants: BTreeMap<BuyerId, BTreeSet<BuyerId>> = BTreeMap::new();
    for d in (1..=market.depth()).rev() {
        for &i in market.layer(d) {
            let mut set = BTreeSet::new();
            for &c in &children[&i] {
                set.insert(c);
                set.extend(descendants[&c].iter().copied());
            }
            descendants.insert(i, set);
        }
    }

    TreeMarket {
        depth: market.depth(),
        market,
        parent,
        children,
        descendants,
    }
}

/// Validates, computes the market and builds the BFS tree in one go.
pub fn tree_from_profile(profile: ReportProfile) -> Result<TreeMarket, ModelError> {
    Ok(build_bfs_tree(compute_market(validate_profile(profile)?)))
}

/// Shortest invitation-chain lengths by a plain queue search. Kept apart from
/// [`compute_market`] so the two can be compared.
pub fn shortest_chain_lengths(profile: &ReportProfile) -> BTreeMap<BuyerId, usize> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &b in &profile.seller_neighbors {
        dist.insert(b, 1);
        queue.push_back(b);
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[&i];
        for &j in &profile.reports[&i].invited {
            dist.entry(j).or_insert_with(|| {
                queue.push_back(j);
                d + 1
            });
        }
    }
    dist
}
