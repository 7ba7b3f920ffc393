//! Constrained social-welfare maximization.
//!
//! Every buyer's marginals are non-increasing, so the welfare of an
//! allocation is a sum of concave unit sequences and taking the largest free
//! marginals one at a time is exact.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{BuyerId, Market, ValuationVector};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WelfareError {
    #[error("fixed allocations hold {fixed} units but only {k} exist")]
    OverCommitted { fixed: usize, k: usize },
    #[error("buyer {0} has a fixed allocation but is not included")]
    FixedOutsideIncluded(BuyerId),
    #[error("brute force limited to 8 free buyers and 4 units ({buyers} buyers, {units} units)")]
    TooLarge { buyers: usize, units: usize },
}

/// Units per buyer. Absent buyers hold zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    pub units: BTreeMap<BuyerId, usize>,
}

impl Allocation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: BuyerId) -> usize {
        self.units.get(&id).copied().unwrap_or(0)
    }

    pub fn set(&mut self, id: BuyerId, units: usize) {
        self.units.insert(id, units);
    }

    pub fn total(&self) -> usize {
        self.units.values().sum()
    }

    pub fn holders(&self) -> impl Iterator<Item = (BuyerId, usize)> + '_ {
        self.units
            .iter()
            .filter(|(_, &u)| u > 0)
            .map(|(&b, &u)| (b, u))
    }
}

impl FromIterator<(BuyerId, usize)> for Allocation {
    fn from_iter<T: IntoIterator<Item = (BuyerId, usize)>>(iter: T) -> Self {
        Allocation {
            units: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelfareResult {
    pub welfare: Money,
    pub allocation: Allocation,
}

fn check_fixed(
    included: &BTreeSet<BuyerId>,
    fixed: &Allocation,
    k: usize,
) -> Result<usize, WelfareError> {
    if let Some(&b) = fixed.units.keys().find(|b| !included.contains(b)) {
        return Err(WelfareError::FixedOutsideIncluded(b));
    }
    let used = fixed.total();
    if used > k {
        return Err(WelfareError::OverCommitted { fixed: used, k });
    }
    Ok(used)
}

/// Greedy over a list of (buyer, valuation) pairs with `capacity` units.
/// Ties go to the larger marginal, then the smaller id, then the earlier
/// unit; with non-increasing marginals each buyer's share is a prefix.
pub(crate) fn greedy_top<'a>(
    free: impl IntoIterator<Item = (BuyerId, &'a ValuationVector)>,
    capacity: usize,
) -> (Money, Vec<(BuyerId, usize)>) {
    let mut marginals: Vec<(Money, BuyerId, usize)> = free
        .into_iter()
        .flat_map(|(b, v)| v.marginals().iter().enumerate().map(move |(u, &m)| (m, b, u)))
        .collect();
    marginals.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut counts: BTreeMap<BuyerId, usize> = BTreeMap::new();
    let mut total = Money::ZERO;
    for &(m, b, _) in marginals.iter().take(capacity) {
        total += m;
        *counts.entry(b).or_default() += 1;
    }
    (total, counts.into_iter().collect())
}

/// Maximizes total reported value over `included`, holding every fixed
/// buyer at exactly its fixed units and using at most `k` units in total.
/// Free included buyers appear in the result even when they get nothing.
pub fn constrained_welfare(
    market: &Market,
    included: &BTreeSet<BuyerId>,
    fixed: &Allocation,
    k: usize,
) -> Result<WelfareResult, WelfareError> {
    let used = check_fixed(included, fixed, k)?;
    let mut welfare: Money = fixed
        .units
        .iter()
        .map(|(&b, &u)| market.values(b).value_of(u))
        .sum();
    let free = included
        .iter()
        .filter(|b| !fixed.units.contains_key(b))
        .map(|&b| (b, market.values(b)));
    let (gained, picks) = greedy_top(free, k - used);
    welfare += gained;

    let mut allocation = fixed.clone();
    for &b in included {
        allocation.units.entry(b).or_insert(0);
    }
    for (b, u) in picks {
        allocation.set(b, u);
    }
    Ok(WelfareResult {
        welfare,
        allocation,
    })
}

/// Exhaustive search over every split of the free units. Test oracle only.
pub fn brute_force_welfare(
    market: &Market,
    included: &BTreeSet<BuyerId>,
    fixed: &Allocation,
    k: usize,
) -> Result<WelfareResult, WelfareError> {
    let used = check_fixed(included, fixed, k)?;
    let free: Vec<BuyerId> = included
        .iter()
        .filter(|b| !fixed.units.contains_key(b))
        .copied()
        .collect();
    if free.len() > 8 || k > 4 {
        return Err(WelfareError::TooLarge {
            buyers: free.len(),
            units: k,
        });
    }
    let base: Money = fixed
        .units
        .iter()
        .map(|(&b, &u)| market.values(b).value_of(u))
        .sum();

    let remaining = k - used;
    let mut best: Option<(Money, Vec<usize>)> = None;
    let mut split = vec![0usize; free.len()];
    enumerate_splits(&mut split, 0, remaining, &mut |split| {
        let value: Money = free
            .iter()
            .zip(split)
            .map(|(&b, &u)| market.values(b).value_of(u))
            .sum();
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, split.to_vec()));
        }
    });

    let mut allocation = fixed.clone();
    let (value, split) = best.unwrap_or((Money::ZERO, Vec::new()));
    for (&b, &u) in free.iter().zip(&split) {
        allocation.set(b, u);
    }
    Ok(WelfareResult {
        welfare: base + value,
        allocation,
    })
}

fn enumerate_splits(
    split: &mut [usize],
    pos: usize,
    left: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if pos == split.len() {
        visit(split);
        return;
    }
    for u in 0..=left {
        split[pos] = u;
        enumerate_splits(split, pos + 1, left - u, visit);
    }
    split[pos] = 0;
}

/// The `k`-th highest first-unit value among `set`, or zero when the set has
/// fewer than `k` buyers.
pub fn kth_highest_first_unit(market: &Market, set: &BTreeSet<BuyerId>, k: usize) -> Money {
    if k == 0 || set.len() < k {
        return Money::ZERO;
    }
    let mut firsts: Vec<Money> = set.iter().map(|&b| market.values(b).first_unit()).collect();
    firsts.sort_unstable_by(|a, b| b.cmp(a));
    firsts[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{compute_market, ReportProfile};

    fn set(v: &[u32]) -> BTreeSet<BuyerId> {
        v.iter().copied().map(BuyerId).collect()
    }

    fn t4() -> Market {
        compute_market(
            ReportProfile::new(1)
                .with_seller_neighbors([1, 2])
                .with_buyer(1, &[1], [3, 4, 5])
                .with_buyer(2, &[4], [])
                .with_buyer(3, &[9], [])
                .with_buyer(4, &[8], [])
                .with_buyer(5, &[7], []),
        )
    }

    #[test]
    fn empty_included_set() {
        let m = t4();
        let r = constrained_welfare(&m, &BTreeSet::new(), &Allocation::new(), 1).unwrap();
        assert_eq!(r.welfare, Money(0));
        assert_eq!(r.allocation.total(), 0);
    }

    #[test]
    fn single_unit_goes_to_highest() {
        let m = t4();
        let r = constrained_welfare(&m, &set(&[1, 2, 5]), &Allocation::new(), 1).unwrap();
        assert_eq!(r.welfare, Money(7));
        assert_eq!(r.allocation.get(BuyerId(5)), 1);
        let bf = brute_force_welfare(&m, &set(&[1, 2, 5]), &Allocation::new(), 1).unwrap();
        assert_eq!(bf.welfare, Money(7));
    }

    #[test]
    fn fixed_zero_buyers_cannot_absorb_units() {
        let m = t4();
        let fixed: Allocation = [(BuyerId(1), 0), (BuyerId(2), 0)].into_iter().collect();
        let r = constrained_welfare(&m, &set(&[1, 2, 3, 4, 5]), &fixed, 1).unwrap();
        assert_eq!(r.welfare, Money(9));
        assert_eq!(r.allocation.get(BuyerId(3)), 1);
        let bf = brute_force_welfare(&m, &set(&[1, 2, 3, 4, 5]), &fixed, 1).unwrap();
        assert_eq!(bf.welfare, Money(9));
    }

    #[test]
    fn contract_errors() {
        let m = t4();
        let fixed: Allocation = [(BuyerId(1), 2)].into_iter().collect();
        assert_eq!(
            constrained_welfare(&m, &set(&[1]), &fixed, 1),
            Err(WelfareError::OverCommitted { fixed: 2, k: 1 })
        );
        assert_eq!(
            constrained_welfare(&m, &set(&[2]), &fixed, 3),
            Err(WelfareError::FixedOutsideIncluded(BuyerId(1)))
        );
        assert!(matches!(
            brute_force_welfare(&m, &set(&[1]), &Allocation::new(), 5),
            Err(WelfareError::TooLarge { .. })
        ));
    }

    #[test]
    fn equal_marginals_break_toward_smaller_id() {
        let m = compute_market(
            ReportProfile::new(2)
                .with_seller_neighbors([1, 2])
                .with_buyer(1, &[5, 5], [])
                .with_buyer(2, &[5, 0], []),
        );
        let r = constrained_welfare(&m, &set(&[1, 2]), &Allocation::new(), 2).unwrap();
        assert_eq!(r.allocation.get(BuyerId(1)), 2);
        assert_eq!(r.allocation.get(BuyerId(2)), 0);
    }

    #[test]
    fn zero_marginals_fill_capacity() {
        let m = compute_market(
            ReportProfile::new(3)
                .with_seller_neighbors([1])
                .with_buyer(1, &[2, 0, 0], []),
        );
        let r = constrained_welfare(&m, &set(&[1]), &Allocation::new(), 3).unwrap();
        assert_eq!(r.allocation.get(BuyerId(1)), 3);
        assert_eq!(r.welfare, Money(2));
    }

    #[test]
    fn kth_highest() {
        let m = t4();
        assert_eq!(kth_highest_first_unit(&m, &set(&[3, 4, 5]), 2), Money(8));
        assert_eq!(kth_highest_first_unit(&m, &set(&[3]), 3), Money(0));
        assert_eq!(kth_highest_first_unit(&m, &BTreeSet::new(), 1), Money(0));
    }
}
