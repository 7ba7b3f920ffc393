//! Competitor-exclusion sets for the layer-based mechanism.
//!
//! For a buyer `i` with children `C_i`:
//! * `C_i^P` are the children that have children of their own,
//! * `C_i^W` are the best `K + μ − |C_i^P|` remaining children by first-unit
//!   report (ties toward the smaller id),
//! * `C_i^R = C_i^P ∪ C_i^W` is everything removed on `i`'s account.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::market::{BuyerId, TreeMarket};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemovedSetError {
    #[error("buyer {0} is not a valid buyer of this market")]
    UnknownBuyer(BuyerId),
    #[error("mu = {given} is below the required bound {required}")]
    MuTooSmall { required: usize, given: usize },
}

/// How `C_i^R` is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub enum RemovalRule {
    /// `C_i^P ∪ C_i^W` with the μ-dependent winner quota.
    #[default]
    Layered,
    /// Every child is removed; the mechanism degenerates to first-layer VCG.
    AllChildren,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RemovedSets {
    pub per_buyer_p: BTreeMap<BuyerId, BTreeSet<BuyerId>>,
    pub per_buyer_w: BTreeMap<BuyerId, BTreeSet<BuyerId>>,
    pub per_buyer_r: BTreeMap<BuyerId, BTreeSet<BuyerId>>,
    pub mu: usize,
}

fn inviters_of(tree: &TreeMarket, i: BuyerId) -> BTreeSet<BuyerId> {
    tree.children(i)
        .iter()
        .copied()
        .filter(|&j| tree.has_children(j))
        .collect()
}

fn winners_of(
    tree: &TreeMarket,
    i: BuyerId,
    inviters: &BTreeSet<BuyerId>,
    mu: usize,
) -> BTreeSet<BuyerId> {
    let quota = tree.k() + mu - inviters.len();
    let mut candidates: Vec<BuyerId> = tree
        .children(i)
        .iter()
        .copied()
        .filter(|j| !inviters.contains(j))
        .collect();
    candidates.sort_by(|a, b| {
        tree.values(*b)
            .first_unit()
            .cmp(&tree.values(*a).first_unit())
            .then(a.cmp(b))
    });
    candidates.into_iter().take(quota).collect()
}

/// The smallest μ the layered rule accepts: `max_i |C_i^P|`.
pub fn min_valid_mu(tree: &TreeMarket) -> usize {
    tree.valid()
        .iter()
        .map(|&i| {
            tree.children(i)
                .iter()
                .filter(|&&j| tree.has_children(j))
                .count()
        })
        .max()
        .unwrap_or(0)
}

fn check_mu(tree: &TreeMarket, mu: usize) -> Result<(), RemovedSetError> {
    let required = min_valid_mu(tree);
    if mu < required {
        return Err(RemovedSetError::MuTooSmall { required, given: mu });
    }
    Ok(())
}

fn check_buyer(tree: &TreeMarket, i: BuyerId) -> Result<(), RemovedSetError> {
    if tree.valid().contains(&i) {
        Ok(())
    } else {
        Err(RemovedSetError::UnknownBuyer(i))
    }
}

/// `C_i^P`: children of `i` that have children.
pub fn potential_inviters(tree: &TreeMarket, i: BuyerId) -> Result<BTreeSet<BuyerId>, RemovedSetError> {
    check_buyer(tree, i)?;
    Ok(inviters_of(tree, i))
}

/// `C_i^W`: the top-ranked childless children of `i` by first-unit report.
pub fn potential_winners(
    tree: &TreeMarket,
    i: BuyerId,
    mu: usize,
) -> Result<BTreeSet<BuyerId>, RemovedSetError> {
    check_buyer(tree, i)?;
    check_mu(tree, mu)?;
    Ok(winners_of(tree, i, &inviters_of(tree, i), mu))
}

impl RemovedSets {
    pub fn compute(tree: &TreeMarket, mu: usize) -> Result<Self, RemovedSetError> {
        Self::compute_with(tree, mu, RemovalRule::Layered)
    }

    pub fn compute_with(
        tree: &TreeMarket,
        mu: usize,
        rule: RemovalRule,
    ) -> Result<Self, RemovedSetError> {
        if rule == RemovalRule::Layered {
            check_mu(tree, mu)?;
        }
        let mut sets = RemovedSets {
            per_buyer_p: BTreeMap::new(),
            per_buyer_w: BTreeMap::new(),
            per_buyer_r: BTreeMap::new(),
            mu,
        };
        for &i in tree.valid() {
            let (p, w) = match rule {
                RemovalRule::Layered => {
                    let p = inviters_of(tree, i);
                    let w = winners_of(tree, i, &p, mu);
                    (p, w)
                }
                RemovalRule::AllChildren => {
                    (tree.children(i).iter().copied().collect(), BTreeSet::new())
                }
            };
            let r = p.union(&w).copied().collect();
            sets.per_buyer_p.insert(i, p);
            sets.per_buyer_w.insert(i, w);
            sets.per_buyer_r.insert(i, r);
        }
        Ok(sets)
    }

    pub fn removed_for(&self, i: BuyerId) -> &BTreeSet<BuyerId> {
        &self.per_buyer_r[&i]
    }

    /// `R_l`: the removed sets of layer `l` plus every buyer two or more
    /// layers deeper.
    pub fn layer_removed(&self, tree: &TreeMarket, l: usize) -> BTreeSet<BuyerId> {
        let mut set: BTreeSet<BuyerId> = tree
            .layer(l)
            .iter()
            .flat_map(|i| self.per_buyer_r[i].iter().copied())
            .collect();
        for d in l + 2..=tree.depth {
            set.extend(tree.layer(d).iter().copied());
        }
        set
    }

    /// `D_i = R_l ∪ C_i ∪ {i}` for `i` in layer `l`.
    pub fn exclusion(&self, tree: &TreeMarket, layer_removed: &BTreeSet<BuyerId>, i: BuyerId) -> BTreeSet<BuyerId> {
        let mut set = layer_removed.clone();
        set.extend(tree.children(i).iter().copied());
        set.insert(i);
        set
    }
}

pub fn layer_removed_set(
    tree: &TreeMarket,
    l: usize,
    mu: usize,
) -> Result<BTreeSet<BuyerId>, RemovedSetError> {
    Ok(RemovedSets::compute(tree, mu)?.layer_removed(tree, l))
}

pub fn exclusion_set(
    tree: &TreeMarket,
    i: BuyerId,
    mu: usize,
) -> Result<BTreeSet<BuyerId>, RemovedSetError> {
    check_buyer(tree, i)?;
    let sets = RemovedSets::compute(tree, mu)?;
    let l = tree.layer_of(i).expect("valid buyer has a layer");
    let removed = sets.layer_removed(tree, l);
    Ok(sets.exclusion(tree, &removed, i))
}
