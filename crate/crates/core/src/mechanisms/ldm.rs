use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::market::{build_bfs_tree, compute_market, BuyerId, Market, TreeMarket};
use crate::money::Money;
use crate::removed::{RemovalRule, RemovedSets};
use crate::welfare::{constrained_welfare, Allocation};

use super::{strip_dummies, with_dummies, MechanismError, Outcome, ReservePrice, Trace};

/// What happened while one layer was processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub k_remain_before: usize,
    pub k_remain_after: usize,
    /// `R_l`.
    pub removed: BTreeSet<BuyerId>,
    /// `π^l`, including the committed allocations of earlier layers.
    pub tentative: Allocation,
    /// `SW_{-R_l}`.
    pub sw_removed: Money,
    /// `SW_{-D_i}` for every buyer of the layer.
    pub sw_excluded: BTreeMap<BuyerId, Money>,
}

pub fn run_ldm_tree(tree: &TreeMarket, mu: usize) -> Result<Outcome, MechanismError> {
    run_ldm_tree_with_rule(tree, mu, RemovalRule::Layered)
}

pub fn run_ldm_tree_with_rule(
    tree: &TreeMarket,
    mu: usize,
    rule: RemovalRule,
) -> Result<Outcome, MechanismError> {
    let sets = RemovedSets::compute_with(tree, mu, rule)?;
    Ok(layered(tree, &sets, |_, layer| layer.to_vec()))
}

/// LDM-Tree with a caller-chosen visiting order inside each layer. The
/// outcome does not depend on it.
pub fn run_ldm_tree_ordered(
    tree: &TreeMarket,
    mu: usize,
    order: impl Fn(usize, &[BuyerId]) -> Vec<BuyerId>,
) -> Result<Outcome, MechanismError> {
    let sets = RemovedSets::compute(tree, mu)?;
    Ok(layered(tree, &sets, order))
}

fn layered(
    tree: &TreeMarket,
    sets: &RemovedSets,
    order: impl Fn(usize, &[BuyerId]) -> Vec<BuyerId>,
) -> Outcome {
    let market = &tree.market;
    let k = market.k();
    let mut outcome = Outcome::empty("ldm", &market.profile);
    let mut committed = Allocation::new();
    let mut k_remain = k;
    let mut layers = Vec::new();

    for l in 1..=tree.depth {
        let removed = sets.layer_removed(tree, l);
        let kept = difference(&market.valid, &removed);
        let best = constrained_welfare(market, &kept, &committed, k)
            .expect("committed buyers are never removed");
        let k_remain_before = k_remain;
        let mut sw_excluded = BTreeMap::new();

        for i in order(l, tree.layer(l)) {
            let excluded = sets.exclusion(tree, &removed, i);
            let kept_i = difference(&market.valid, &excluded);
            let sw_i = constrained_welfare(market, &kept_i, &committed, k)
                .expect("committed buyers are never excluded")
                .welfare;
            let units = best.allocation.get(i);
            let payment = if units != 0 {
                k_remain -= units;
                sw_i - (best.welfare - market.values(i).value_of(units))
            } else {
                sw_i - best.welfare
            };
            outcome.units.insert(i, units);
            outcome.payments.insert(i, payment);
            sw_excluded.insert(i, sw_i);
        }
        for &i in tree.layer(l) {
            committed.set(i, best.allocation.get(i));
        }

        layers.push(LayerTrace {
            layer: l,
            k_remain_before,
            k_remain_after: k_remain,
            removed,
            tentative: best.allocation,
            sw_removed: best.welfare,
            sw_excluded,
        });
        // Deeper layers keep the zero entries from `Outcome::empty`.
        if k_remain == 0 {
            break;
        }
    }
    outcome.trace = Trace::Ldm {
        mu: sets.mu,
        layers,
    };
    outcome
}

fn difference(all: &BTreeSet<BuyerId>, minus: &BTreeSet<BuyerId>) -> BTreeSet<BuyerId> {
    all.difference(minus).copied().collect()
}

/// LDM on a general graph: LDM-Tree on the breadth-first tree. A reserve
/// price adds dummy first-layer buyers before the tree is built.
pub fn run_ldm(
    market: &Market,
    mu: usize,
    reserve: Option<ReservePrice>,
) -> Result<Outcome, MechanismError> {
    match reserve {
        None => run_ldm_tree(&build_bfs_tree(market.clone()), mu),
        Some(r) => {
            let (augmented, dummies) = with_dummies(&market.profile, r);
            let tree = build_bfs_tree(compute_market(augmented));
            Ok(strip_dummies(run_ldm_tree(&tree, mu)?, dummies))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::tree_from_profile;
    use crate::verify::decomposition::payment_decomposition;

    #[test]
    fn figure_tree_trace() {
        let (profile, names) = fixtures::figure3();
        let tree = tree_from_profile(profile).unwrap();
        let out = run_ldm_tree(&tree, 2).unwrap();
        let Trace::Ldm { layers, .. } = &out.trace else {
            panic!("missing trace")
        };
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].sw_removed, Money(12));
        assert_eq!(layers[0].sw_excluded[&names["a"]], Money(12));
        assert_eq!(layers[0].sw_excluded[&names["b"]], Money(8));
        assert_eq!(layers[0].sw_excluded[&names["c"]], Money(9));
        assert_eq!(layers[0].tentative.get(names["c"]), 2);
        assert_eq!(layers[0].tentative.get(names["i"]), 1);
        assert_eq!(layers[0].k_remain_after, 1);
        assert_eq!(layers[1].sw_removed, Money(18));
        assert_eq!(layers[1].sw_excluded[&names["d"]], Money(16));
        assert_eq!(layers[1].k_remain_after, 0);

        let pay = |s: &str| out.payment_of(names[s]);
        assert_eq!(pay("a"), Money(0));
        assert_eq!(pay("b"), Money(-4));
        assert_eq!(pay("c"), Money(4));
        assert_eq!(pay("d"), Money(9));
        for s in ["e", "f", "g", "h", "i", "j", "k", "p", "q", "r"] {
            assert_eq!(pay(s), Money(0), "{s}");
        }
        assert_eq!(out.revenue(), Money(9));
        assert_eq!(out.units_of(names["c"]), 2);
        assert_eq!(out.units_of(names["d"]), 1);
        assert_eq!(out.allocated(), 3);
    }

    #[test]
    fn graph_matches_tree() {
        let (tree_profile, _) = fixtures::figure3();
        let (graph_profile, _) = fixtures::figure4();
        let from_tree = run_ldm(&compute_market(tree_profile), 2, None).unwrap();
        let from_graph = run_ldm(&compute_market(graph_profile), 2, None).unwrap();
        assert_eq!(from_tree.units, from_graph.units);
        assert_eq!(from_tree.payments, from_graph.payments);
        assert_eq!(from_tree.trace, from_graph.trace);
    }

    #[test]
    fn t4_utility_identity_and_decomposition() {
        let tree = tree_from_profile(fixtures::t4()).unwrap();
        let out = run_ldm_tree(&tree, 1).unwrap();
        let Trace::Ldm { layers, .. } = &out.trace else {
            panic!()
        };
        // Buyer 1: utility equals SW_{-R_1} - SW_{-D_1} = 7 - 4.
        let b1 = BuyerId(1);
        assert_eq!(
            out.utility(b1, tree.values(b1)),
            layers[0].sw_removed - layers[0].sw_excluded[&b1]
        );
        let rows = payment_decomposition(&out, &tree, 1).unwrap();
        let row = rows.iter().find(|r| r.buyer == b1).unwrap();
        assert_eq!((row.m, row.q, row.t, row.p), (1, Money(4), Money(7), Money(-3)));
    }

    #[test]
    fn all_children_rule_is_first_layer_vcg() {
        let (profile, _) = fixtures::figure3();
        let tree = tree_from_profile(profile.clone()).unwrap();
        let degenerate = run_ldm_tree_with_rule(&tree, 0, RemovalRule::AllChildren).unwrap();
        let vcg = super::super::run_vcg_first_layer(&compute_market(profile), None);
        assert!(degenerate.same_result(&vcg));
    }
}
