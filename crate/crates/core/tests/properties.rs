use std::collections::BTreeSet;

use netauction::io::{GeneratorConfig, Topology};
use netauction::market::{
    build_bfs_tree, compute_market, shortest_chain_lengths, tree_from_profile, BuyerId, Market, Node,
    ReportProfile, ReportedType,
};
use netauction::mechanisms::{run_ldm, run_ldm_tree, run_ldm_tree_ordered};
use netauction::removed::{min_valid_mu, RemovedSets};
use netauction::verify::{check_non_wasteful, payment_decomposition};
use netauction::welfare::{brute_force_welfare, constrained_welfare, Allocation};
use netauction::Money;
use proptest::prelude::*;

fn profile_strategy() -> impl Strategy<Value = ReportProfile> {
    (any::<u64>(), 0u64..1_000, any::<bool>()).prop_map(|(seed, index, graph)| {
        GeneratorConfig {
            seed,
            topology: if graph { Topology::Graph } else { Topology::Tree },
            edge_density: 0.25,
            ..Default::default()
        }
        .instance(index)
    })
}

/// A market, an included set and a feasible fixed allocation inside it.
fn welfare_case() -> impl Strategy<Value = (Market, BTreeSet<BuyerId>, Allocation, usize)> {
    (1usize..=4, 1usize..=8)
        .prop_flat_map(|(k, n)| {
            (
                Just(k),
                prop::collection::vec(prop::collection::vec(0i64..=10, k), n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0usize..=k, n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(k, values, include, units, fix)| {
            let mut profile = ReportProfile::new(k);
            for (b, mut v) in values.into_iter().enumerate() {
                v.sort_unstable_by(|a, b| b.cmp(a));
                profile = profile.with_buyer(b as u32, &v, []);
                profile.seller_neighbors.insert(BuyerId(b as u32));
            }
            let market = compute_market(profile);
            let included: BTreeSet<BuyerId> = include
                .iter()
                .enumerate()
                .filter(|(_, &x)| x)
                .map(|(b, _)| BuyerId(b as u32))
                .collect();
            let mut fixed = Allocation::new();
            let mut left = k;
            for &b in &included {
                if fix[b.0 as usize] {
                    let u = units[b.0 as usize].min(left);
                    fixed.set(b, u);
                    left -= u;
                }
            }
            (market, included, fixed, k)
        })
}

fn scale(profile: &ReportProfile, c: i64) -> ReportProfile {
    let mut p = profile.clone();
    for r in p.reports.values_mut() {
        r.values = r.values.scaled(c);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn greedy_matches_brute_force((market, included, fixed, k) in welfare_case()) {
        let greedy = constrained_welfare(&market, &included, &fixed, k).unwrap();
        let brute = brute_force_welfare(&market, &included, &fixed, k).unwrap();
        prop_assert_eq!(greedy.welfare, brute.welfare);
        prop_assert!(greedy.allocation.total() <= k);
        for (b, u) in fixed.holders() {
            prop_assert_eq!(greedy.allocation.get(b), u);
        }
        let recomputed: Money = greedy
            .allocation
            .holders()
            .map(|(b, u)| market.values(b).value_of(u))
            .sum();
        prop_assert_eq!(recomputed, greedy.welfare);
    }

    #[test]
    fn welfare_grows_with_the_included_set((market, included, fixed, k) in welfare_case()) {
        let all: BTreeSet<BuyerId> = market.valid.clone();
        let small = constrained_welfare(&market, &included, &fixed, k).unwrap();
        let large = constrained_welfare(&market, &all, &fixed, k).unwrap();
        prop_assert!(large.welfare >= small.welfare);
    }

    #[test]
    fn ldm_scales_with_values(profile in profile_strategy(), c in 2i64..=5) {
        let tree = tree_from_profile(profile.clone()).unwrap();
        let mu = min_valid_mu(&tree);
        let base = run_ldm(&tree.market, mu, None).unwrap();
        let scaled_profile = scale(&profile, c);
        let scaled = run_ldm(&compute_market(scaled_profile.clone()), mu, None).unwrap();
        prop_assert_eq!(&base.units, &scaled.units);
        for (b, p) in &base.payments {
            prop_assert_eq!(scaled.payment_of(*b), *p * c);
        }
        prop_assert_eq!(scaled.welfare(&scaled_profile), base.welfare(&profile) * c);
    }

    #[test]
    fn unreachable_reports_do_not_matter(profile in profile_strategy(), v in 0i64..=10) {
        let market = compute_market(profile.clone());
        let mu = min_valid_mu(&build_bfs_tree(market.clone()));
        let out = run_ldm(&market, mu, None).unwrap();
        let mut changed = profile.clone();
        let stranger = BuyerId(profile.max_id().map_or(0, |b| b.0 + 1));
        let invited: BTreeSet<BuyerId> = profile.reports.keys().copied().collect();
        changed.reports.insert(
            stranger,
            ReportedType::new(netauction::ValuationVector::unit_demand(Money(v), profile.k), invited),
        );
        let again = run_ldm(&compute_market(changed), mu, None).unwrap();
        prop_assert_eq!(again.units_of(stranger), 0);
        prop_assert_eq!(again.payment_of(stranger), Money::ZERO);
        for b in profile.reports.keys() {
            prop_assert_eq!(again.units_of(*b), out.units_of(*b));
            prop_assert_eq!(again.payment_of(*b), out.payment_of(*b));
        }
    }

    #[test]
    fn bfs_tree_keeps_layers(profile in profile_strategy()) {
        let market = compute_market(profile.clone());
        let oracle = shortest_chain_lengths(&profile);
        prop_assert_eq!(&market.layer_of, &oracle);
        let tree = build_bfs_tree(market.clone());
        prop_assert_eq!(&tree, &build_bfs_tree(market.clone()));
        for (&b, parent) in &tree.parent {
            match *parent {
                Node::Seller => prop_assert_eq!(oracle[&b], 1),
                Node::Buyer(p) => {
                    prop_assert_eq!(oracle[&p] + 1, oracle[&b]);
                    let smallest = market
                        .valid
                        .iter()
                        .copied()
                        .filter(|i| oracle[i] + 1 == oracle[&b] && market.invited(*i).contains(&b))
                        .min();
                    prop_assert_eq!(smallest, Some(p));
                }
            }
        }
        prop_assert_eq!(tree.parent.len(), market.valid.len());
        // The tree profile reproduces the same tree.
        let again = tree_from_profile(tree.to_tree_profile()).unwrap();
        prop_assert_eq!(&again.children, &tree.children);
        prop_assert!(again.market.is_tree());
    }

    #[test]
    fn more_mu_only_adds_winners(profile in profile_strategy(), extra in 1usize..=3) {
        let tree = tree_from_profile(profile).unwrap();
        let mu = min_valid_mu(&tree);
        let low = RemovedSets::compute(&tree, mu).unwrap();
        let high = RemovedSets::compute(&tree, mu + extra).unwrap();
        for &i in tree.valid() {
            prop_assert!(low.per_buyer_w[&i].is_subset(&high.per_buyer_w[&i]));
            prop_assert_eq!(&low.per_buyer_p[&i], &high.per_buyer_p[&i]);
            prop_assert!(low.per_buyer_w[&i].len() <= tree.k() + mu - low.per_buyer_p[&i].len());
        }
    }

    #[test]
    fn ldm_tree_invariants(profile in profile_strategy()) {
        let tree = tree_from_profile(profile.clone()).unwrap();
        let mu = min_valid_mu(&tree);
        let out = run_ldm_tree(&tree, mu).unwrap();
        prop_assert!(check_non_wasteful(&out, &tree.market));
        for &b in tree.valid() {
            prop_assert!(out.utility(b, tree.values(b)) >= Money::ZERO);
        }
        for b in profile.reports.keys() {
            if !tree.valid().contains(b) {
                prop_assert_eq!(out.units_of(*b), 0);
                prop_assert_eq!(out.payment_of(*b), Money::ZERO);
            }
        }
        let rows = payment_decomposition(&out, &tree, mu).unwrap();
        let total: Money = rows.iter().map(|r| r.p).sum();
        prop_assert_eq!(total, out.revenue());
        let reversed = run_ldm_tree_ordered(&tree, mu, |_, l| l.iter().rev().copied().collect()).unwrap();
        prop_assert_eq!(reversed, out);
    }
}
