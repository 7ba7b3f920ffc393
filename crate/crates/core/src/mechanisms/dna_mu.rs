use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::market::{BuyerId, TreeMarket};
use crate::money::Money;
use crate::welfare::kth_highest_first_unit;

use super::{Outcome, Trace};

/// Visiting order of buyers inside one layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum TraversalOrder {
    #[default]
    Ascending,
    /// Seeded shuffle; the layer index selects the stream.
    Shuffled(u64),
}

impl TraversalOrder {
    pub(crate) fn arrange(self, layer: usize, buyers: &[BuyerId]) -> Vec<BuyerId> {
        let mut order = buyers.to_vec();
        if let TraversalOrder::Shuffled(seed) = self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(layer as u64);
            order.shuffle(&mut rng);
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DnaStep {
    pub buyer: BuyerId,
    pub price: Money,
    pub supply: usize,
    pub won: bool,
}

/// Sequential unit-demand mechanism: each buyer, layer by layer, is priced at
/// the `K'`-th highest first-unit report among the valid buyers outside her
/// subtree and the current winners, `K'` being the remaining supply.
pub fn run_dna_mu(tree: &TreeMarket, order: TraversalOrder) -> Outcome {
    let market = &tree.market;
    let mut outcome = Outcome::empty("dna-mu", &market.profile);
    let mut supply = market.k();
    let mut winners: BTreeSet<BuyerId> = BTreeSet::new();
    let mut steps = Vec::new();

    for l in 1..=tree.depth {
        for i in order.arrange(l, tree.layer(l)) {
            // With no supply left nobody can win.
            if supply == 0 {
                steps.push(DnaStep {
                    buyer: i,
                    price: Money::ZERO,
                    supply,
                    won: false,
                });
                continue;
            }
            let pool: BTreeSet<BuyerId> = market
                .valid
                .iter()
                .copied()
                .filter(|b| *b != i && !winners.contains(b) && !tree.descendants[&i].contains(b))
                .collect();
            let price = kth_highest_first_unit(market, &pool, supply);
            let won = market.values(i).first_unit() >= price;
            if won {
                outcome.units.insert(i, 1);
                outcome.payments.insert(i, price);
                supply -= 1;
                winners.insert(i);
            }
            steps.push(DnaStep {
                buyer: i,
                price,
                supply: if won { supply + 1 } else { supply },
                won,
            });
        }
    }
    outcome.trace = Trace::DnaMu { steps };
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{tree_from_profile, ReportProfile};

    #[test]
    fn descendants_do_not_price_their_ancestor() {
        let p = ReportProfile::new(1)
            .with_seller_neighbors([1])
            .with_buyer(1, &[5], [2])
            .with_buyer(2, &[7], []);
        let out = run_dna_mu(&tree_from_profile(p).unwrap(), TraversalOrder::Ascending);
        assert_eq!(out.units_of(BuyerId(1)), 1);
        assert_eq!(out.payment_of(BuyerId(1)), Money(0));
        assert_eq!(out.units_of(BuyerId(2)), 0);
    }

    #[test]
    fn no_supply_no_winner() {
        let p = ReportProfile::new(1)
            .with_seller_neighbors([1, 2])
            .with_buyer(1, &[5], [])
            .with_buyer(2, &[5], []);
        let out = run_dna_mu(&tree_from_profile(p).unwrap(), TraversalOrder::Ascending);
        assert_eq!(out.allocated(), 1);
        assert_eq!(out.units_of(BuyerId(1)), 1);
        assert_eq!(out.payment_of(BuyerId(1)), Money(5));
    }

    #[test]
    fn shuffled_order_is_reproducible() {
        let ids: Vec<BuyerId> = (0..6).map(BuyerId).collect();
        let a = TraversalOrder::Shuffled(9).arrange(1, &ids);
        let b = TraversalOrder::Shuffled(9).arrange(1, &ids);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, ids);
    }
}
