use std::collections::BTreeSet;

use crate::market::{compute_market, Market};
use crate::welfare::{constrained_welfare, Allocation};

use super::{strip_dummies, with_dummies, Outcome, ReservePrice};

/// Efficient allocation of the `K` units among the seller's neighbors with
/// Clarke pivot payments. Nobody outside the first layer takes part.
pub fn run_vcg_first_layer(market: &Market, reserve: Option<ReservePrice>) -> Outcome {
    match reserve {
        None => clarke_first_layer(market),
        Some(r) => {
            let (augmented, dummies) = with_dummies(&market.profile, r);
            let outcome = clarke_first_layer(&compute_market(augmented));
            let mut outcome = strip_dummies(outcome, dummies);
            outcome.units.retain(|b, _| market.profile.reports.contains_key(b));
            outcome
        }
    }
}

fn clarke_first_layer(market: &Market) -> Outcome {
    let mut outcome = Outcome::empty("vcg-l1", &market.profile);
    let first: BTreeSet<_> = market.layer(1).iter().copied().collect();
    if first.is_empty() {
        return outcome;
    }
    let k = market.k();
    let none = Allocation::new();
    let best = constrained_welfare(market, &first, &none, k).expect("no fixed buyers");
    for &i in &first {
        let units = best.allocation.get(i);
        let mut others = first.clone();
        others.remove(&i);
        let without = constrained_welfare(market, &others, &none, k).expect("no fixed buyers");
        let own = market.values(i).value_of(units);
        outcome.units.insert(i, units);
        outcome
            .payments
            .insert(i, without.welfare - (best.welfare - own));
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::money::Money;

    #[test]
    fn figure_tree_first_layer() {
        let (profile, names) = fixtures::figure3();
        let out = run_vcg_first_layer(&compute_market(profile), None);
        assert_eq!(out.payment_of(names["a"]), Money(0));
        assert_eq!(out.payment_of(names["b"]), Money(1));
        assert_eq!(out.payment_of(names["c"]), Money(2));
        assert_eq!(out.revenue(), Money(3));
        assert_eq!(out.units_of(names["c"]), 2);
        assert_eq!(out.units_of(names["b"]), 1);
        assert_eq!(out.units_of(names["d"]), 0);
    }

    #[test]
    fn lone_first_layer_buyer_pays_nothing() {
        let p = crate::market::ReportProfile::new(2)
            .with_seller_neighbors([1])
            .with_buyer(1, &[3, 1], [2])
            .with_buyer(2, &[9, 9], []);
        let out = run_vcg_first_layer(&compute_market(p), None);
        assert_eq!(out.units_of(crate::market::BuyerId(1)), 2);
        assert_eq!(out.revenue(), Money(0));
    }
}
