//! Small hand-checked instances used by tests, examples and the CLI.

use std::collections::BTreeMap;

use crate::io::parse_instance;
use crate::market::{BuyerId, ReportProfile};

pub const FIGURE3_JSON: &str = include_str!("../fixtures/fig3.json");
pub const FIGURE4_JSON: &str = include_str!("../fixtures/fig4.json");
pub const T4_JSON: &str = include_str!("../fixtures/t4.json");
pub const DNA_MU_WITNESS_JSON: &str = include_str!("../fixtures/dna_mu_witness.json");

fn labeled(text: &str) -> (ReportProfile, BTreeMap<String, BuyerId>) {
    let inst = parse_instance(text).expect("bundled fixture parses");
    let ids = inst.ids();
    (inst.profile, ids)
}

/// The 18-buyer tree example (K = 3, μ = 2) and its label map.
pub fn figure3() -> (ReportProfile, BTreeMap<String, BuyerId>) {
    labeled(FIGURE3_JSON)
}

/// The tree example with extra non-tree edges; its BFS tree is [`figure3`].
pub fn figure4() -> (ReportProfile, BTreeMap<String, BuyerId>) {
    labeled(FIGURE4_JSON)
}

/// s→{1,2}, 1→{3,4,5}; first units 1, 4, 9, 8, 7; K = 1.
pub fn t4() -> ReportProfile {
    ReportProfile::new(1)
        .with_seller_neighbors([1, 2])
        .with_buyer(1, &[1], [3, 4, 5])
        .with_buyer(2, &[4], [])
        .with_buyer(3, &[9], [])
        .with_buyer(4, &[8], [])
        .with_buyer(5, &[7], [])
}

/// [`t4`] with the labels a parsed file carries.
pub fn t4_labeled() -> ReportProfile {
    let mut p = t4();
    p.labels = p.reports.keys().map(|&b| (b, b.to_string())).collect();
    p
}

/// A seven-buyer tree where DNA-MU rewards buyer 6 for not inviting buyer 0.
pub fn dna_mu_witness() -> ReportProfile {
    labeled(DNA_MU_WITNESS_JSON).0
}

/// s→1→2→3.
pub fn chain3() -> ReportProfile {
    ReportProfile::new(1)
        .with_seller_neighbors([1])
        .with_buyer(1, &[5], [2])
        .with_buyer(2, &[7], [3])
        .with_buyer(3, &[2], [])
}
