use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::market::{BuyerId, ReportProfile, ReportedType, ValuationVector};
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Tree,
    Graph,
}

/// How valuation vectors are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueModel {
    /// `K` uniform draws sorted non-increasing.
    #[default]
    Sorted,
    /// One uniform first-unit value, zeros after it.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub buyers: RangeInclusive<usize>,
    pub k: RangeInclusive<usize>,
    pub max_value: i64,
    pub topology: Topology,
    /// Deepest layer a random tree may reach.
    pub max_depth: usize,
    /// Probability of each extra directed edge in graph mode.
    pub edge_density: f64,
    pub values: ValueModel,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            buyers: 1..=8,
            k: 1..=3,
            max_value: 10,
            topology: Topology::Tree,
            max_depth: 4,
            edge_density: 0.15,
            values: ValueModel::Sorted,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.buyers.is_empty() || *self.buyers.start() == 0 {
            return Err("buyer count range must be non-empty and start at 1 or more".into());
        }
        if self.k.is_empty() || *self.k.start() == 0 {
            return Err("k range must be non-empty and start at 1 or more".into());
        }
        if self.max_value < 1 {
            return Err("max value must be at least 1".into());
        }
        if self.max_depth == 0 {
            return Err("max depth must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            return Err("edge density must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Instance number `index` of the stream. Each index has its own RNG
    /// stream, so instances are reproducible independently.
    pub fn instance(&self, index: u64) -> ReportProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);

        let n = rng.gen_range(self.buyers.clone());
        let k = rng.gen_range(self.k.clone());
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut rng);

        // Random attachment: position p hangs under the seller or an
        // earlier position that is not yet at the depth limit.
        let mut depth = vec![0usize; n];
        let mut invited: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut seller = vec![0usize];
        depth[0] = 1;
        for p in 1..n {
            let hosts: Vec<Option<usize>> = std::iter::once(None)
                .chain((0..p).filter(|&q| depth[q] < self.max_depth).map(Some))
                .collect();
            match *hosts.choose(&mut rng).expect("seller is always a host") {
                None => {
                    seller.push(p);
                    depth[p] = 1;
                }
                Some(q) => {
                    invited[q].push(p);
                    depth[p] = depth[q] + 1;
                }
            }
        }
        if self.topology == Topology::Graph && self.edge_density > 0.0 {
            for (a, list) in invited.iter_mut().enumerate() {
                for b in 0..n {
                    if a != b && !list.contains(&b) && rng.gen_bool(self.edge_density) {
                        list.push(b);
                    }
                }
            }
        }

        let mut profile = ReportProfile::new(k);
        profile.seller_neighbors = seller.iter().map(|&p| BuyerId(ids[p])).collect();
        for p in 0..n {
            let mut values: Vec<i64> = match self.values {
                ValueModel::Sorted => (0..k).map(|_| rng.gen_range(0..=self.max_value)).collect(),
                ValueModel::Unit => {
                    let mut v = vec![0; k];
                    v[0] = rng.gen_range(0..=self.max_value);
                    v
                }
            };
            values.sort_unstable_by(|a, b| b.cmp(a));
            profile.reports.insert(
                BuyerId(ids[p]),
                ReportedType {
                    values: ValuationVector::new(values.into_iter().map(Money).collect()),
                    invited: invited[p].iter().map(|&q| BuyerId(ids[q])).collect(),
                },
            );
        }
        profile
    }
}

/// The first instance of the configured stream.
pub fn random_instance(config: &GeneratorConfig) -> ReportProfile {
    config.instance(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{compute_market, tree_from_profile, validate_profile};

    #[test]
    fn same_seed_same_profile() {
        let cfg = GeneratorConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(random_instance(&cfg), random_instance(&cfg));
        assert_eq!(cfg.instance(17), cfg.instance(17));
        assert_ne!(cfg.instance(1), cfg.instance(2));
    }

    #[test]
    fn dna_search_shape() {
        let cfg = GeneratorConfig {
            seed: 1,
            buyers: 7..=7,
            k: 4..=4,
            max_depth: 3,
            ..Default::default()
        };
        let p = random_instance(&cfg);
        let tree = tree_from_profile(p.clone()).unwrap();
        assert_eq!(p.reports.len(), 7);
        assert_eq!(tree.valid().len(), 7);
        assert!(tree.depth <= 3);
        assert!(tree.market.is_tree());
    }

    #[test]
    fn zero_density_graph_is_a_tree() {
        let cfg = GeneratorConfig {
            seed: 5,
            topology: Topology::Graph,
            edge_density: 0.0,
            ..Default::default()
        };
        for i in 0..50 {
            assert!(compute_market(cfg.instance(i)).is_tree());
        }
    }

    #[test]
    fn generated_profiles_validate() {
        let cfg = GeneratorConfig {
            seed: 11,
            topology: Topology::Graph,
            edge_density: 0.3,
            ..Default::default()
        };
        for i in 0..200 {
            let p = cfg.instance(i);
            assert!(validate_profile(p.clone()).is_ok());
            assert!(p.max_value() <= Money(10));
        }
    }

    #[test]
    fn config_checks() {
        assert!(GeneratorConfig::default().check().is_ok());
        let bad = GeneratorConfig {
            max_value: 0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let bad = GeneratorConfig {
            buyers: 3..=2,
            ..Default::default()
        };
        assert!(bad.check().is_err());
    }
}
