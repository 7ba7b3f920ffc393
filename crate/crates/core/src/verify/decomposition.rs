//! Split of every layered payment into a charge `q` and a resale credit `t`.
//!
//! For buyer `i` in layer `l` with tentative allocation `π^l`:
//! * `m_i = π_i + Σ_{c ∈ C_i} π_c`,
//! * `t_i = Σ_{c ∈ C_i} v_c(π_c)`,
//! * `q_i = SW_{-D_i} − Σ_{j ∉ C_i ∪ {i}} v_j(π_j)`,
//!
//! and `p_i = q_i − t_i`. `q_i` is cross-checked against the last `m_i` of
//! the top `K_remain` free marginals over `Q \ D_i`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::market::{BuyerId, TreeMarket};
use crate::mechanisms::{LayerTrace, Outcome, Trace};
use crate::money::Money;
use crate::removed::RemovedSets;

use super::VerifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecompositionRow {
    pub buyer: BuyerId,
    pub layer: usize,
    pub m: usize,
    pub q: Money,
    pub t: Money,
    pub p: Money,
}

/// Rows for every buyer of every processed layer, in layer then id order.
pub fn payment_decomposition(
    outcome: &Outcome,
    tree: &TreeMarket,
    mu: usize,
) -> Result<Vec<DecompositionRow>, VerifyError> {
    let Trace::Ldm { layers, .. } = &outcome.trace else {
        return Err(VerifyError::TraceMissing);
    };
    let sets = RemovedSets::compute(tree, mu).map_err(crate::mechanisms::MechanismError::from)?;
    let mut rows = Vec::new();
    for lt in layers {
        let removed = sets.layer_removed(tree, lt.layer);
        for &i in tree.layer(lt.layer) {
            let row = decompose(tree, &sets, &removed, lt, i)?;
            let paid = outcome.payment_of(i);
            if row.p != paid {
                return Err(VerifyError::DecompositionMismatch {
                    buyer: i,
                    detail: format!("q - t = {} but the mechanism charged {}", row.p, paid),
                });
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn decompose(
    tree: &TreeMarket,
    sets: &RemovedSets,
    removed: &BTreeSet<BuyerId>,
    lt: &LayerTrace,
    i: BuyerId,
) -> Result<DecompositionRow, VerifyError> {
    let pi = &lt.tentative;
    let children = tree.children(i);
    let m = pi.get(i) + children.iter().map(|&c| pi.get(c)).sum::<usize>();
    let t: Money = children
        .iter()
        .map(|&c| tree.values(c).value_of(pi.get(c)))
        .sum();
    let others: Money = pi
        .holders()
        .filter(|(j, _)| *j != i && !children.contains(j))
        .map(|(j, u)| tree.values(j).value_of(u))
        .sum();
    let sw_excluded = *lt
        .sw_excluded
        .get(&i)
        .ok_or(VerifyError::TraceMissing)?;
    let q = sw_excluded - others;

    // Dual route: free buyers of Q \ D_i are those in layers l and below.
    let excluded = sets.exclusion(tree, removed, i);
    let mut free: Vec<Money> = tree
        .valid()
        .iter()
        .filter(|b| !excluded.contains(b) && tree.layer_of(**b).is_some_and(|d| d >= lt.layer))
        .flat_map(|&b| tree.values(b).marginals().iter().copied())
        .collect();
    free.sort_unstable_by(|a, b| b.cmp(a));
    free.resize(free.len().max(lt.k_remain_before), Money::ZERO);
    let top = &free[..lt.k_remain_before];
    let dual: Money = top[lt.k_remain_before.saturating_sub(m)..].iter().sum();
    if dual != q {
        return Err(VerifyError::DecompositionMismatch {
            buyer: i,
            detail: format!("q = {q} from welfare terms but {dual} from ranked marginals"),
        });
    }

    Ok(DecompositionRow {
        buyer: i,
        layer: lt.layer,
        m,
        q,
        t,
        p: q - t,
    })
}

/// `(Σ_{L_1} q ≥ VCG revenue, Σ_{L_l} q ≥ Σ_{L_{l-1}} t for every processed l ≥ 2)`.
pub fn check_decomposition_inequalities(rows: &[DecompositionRow], vcg: &Outcome) -> (bool, bool) {
    let q_sum = |l: usize| -> Money { rows.iter().filter(|r| r.layer == l).map(|r| r.q).sum() };
    let t_sum = |l: usize| -> Money { rows.iter().filter(|r| r.layer == l).map(|r| r.t).sum() };
    let first = q_sum(1) >= vcg.revenue();
    let deepest = rows.iter().map(|r| r.layer).max().unwrap_or(0);
    let later = (2..=deepest).all(|l| q_sum(l) >= t_sum(l - 1));
    (first, later)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{compute_market, tree_from_profile, ReportProfile};
    use crate::mechanisms::{run_ldm_tree, run_vcg_first_layer};

    #[test]
    fn t4_rows() {
        let p = fixtures::t4();
        let tree = tree_from_profile(p.clone()).unwrap();
        let out = run_ldm_tree(&tree, 1).unwrap();
        let rows = payment_decomposition(&out, &tree, 1).unwrap();
        let row = |b| *rows.iter().find(|r| r.buyer == BuyerId(b)).unwrap();
        assert_eq!(row(1), DecompositionRow { buyer: BuyerId(1), layer: 1, m: 1, q: Money(4), t: Money(7), p: Money(-3) });
        assert_eq!((row(2).m, row(2).q, row(2).t), (0, Money(0), Money(0)));
        // Buyer 3 wins without children: q = p.
        assert_eq!((row(3).q, row(3).t, row(3).p), (Money(8), Money(0), Money(8)));
        let vcg = run_vcg_first_layer(&compute_market(p), None);
        assert_eq!(check_decomposition_inequalities(&rows, &vcg), (true, true));
    }

    #[test]
    fn figure_rows_sum_to_revenue() {
        let (p, names) = fixtures::figure3();
        let tree = tree_from_profile(p).unwrap();
        let out = run_ldm_tree(&tree, 2).unwrap();
        let rows = payment_decomposition(&out, &tree, 2).unwrap();
        let total: Money = rows.iter().map(|r| r.p).sum();
        assert_eq!(total, out.revenue());
        let b = rows.iter().find(|r| r.buyer == names["b"]).unwrap();
        assert_eq!(b.q - b.t, Money(-4));
    }

    #[test]
    fn single_layer_second_family_is_vacuous() {
        let p = ReportProfile::new(2)
            .with_seller_neighbors([0, 1, 2])
            .with_buyer(0, &[5, 1], [])
            .with_buyer(1, &[4, 3], [])
            .with_buyer(2, &[2, 0], []);
        let tree = tree_from_profile(p.clone()).unwrap();
        let out = run_ldm_tree(&tree, 0).unwrap();
        let rows = payment_decomposition(&out, &tree, 0).unwrap();
        assert!(rows.iter().all(|r| r.t == Money::ZERO && r.q == r.p));
        let vcg = run_vcg_first_layer(&compute_market(p), None);
        assert_eq!(check_decomposition_inequalities(&rows, &vcg), (true, true));
    }

    #[test]
    fn needs_trace() {
        let p = fixtures::t4();
        let tree = tree_from_profile(p.clone()).unwrap();
        let vcg = run_vcg_first_layer(&compute_market(p), None);
        assert_eq!(payment_decomposition(&vcg, &tree, 1), Err(VerifyError::TraceMissing));
    }
}
