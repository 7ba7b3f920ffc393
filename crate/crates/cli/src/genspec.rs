//! `key=value,...` generator specifications.

use std::ops::RangeInclusive;

use netauction::io::{GeneratorConfig, Topology, ValueModel};

/// A generator configuration plus an optional instance count.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub config: GeneratorConfig,
    pub count: Option<u64>,
}

/// `lo..hi` is inclusive; a single number is an exact value.
pub fn range(key: &str, v: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{key}` expects a number or lo..hi, got `{v}`"))
    };
    match v.split_once("..") {
        Some((lo, hi)) => Ok(num(lo)?..=num(hi.trim_start_matches('='))?),
        None => {
            let n = num(v)?;
            Ok(n..=n)
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{key}` expects a number, got `{v}`"))
}

impl GenSpec {
    pub fn parse_onto(base: GeneratorConfig, text: &str) -> Result<Self, String> {
        let mut spec = GenSpec {
            config: base,
            count: None,
        };
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let c = &mut spec.config;
            match key {
                "seed" => c.seed = number(key, v)?,
                "n" => c.buyers = range(key, v)?,
                "k" => c.k = range(key, v)?,
                "max" => c.max_value = number(key, v)?,
                "depth" => c.max_depth = number(key, v)?,
                "density" => c.edge_density = number(key, v)?,
                "topology" => {
                    c.topology = match v {
                        "tree" => Topology::Tree,
                        "graph" => Topology::Graph,
                        _ => return Err(format!("topology must be tree or graph, got `{v}`")),
                    }
                }
                "values" => {
                    c.values = match v {
                        "sorted" => ValueModel::Sorted,
                        "unit" => ValueModel::Unit,
                        _ => return Err(format!("values must be sorted or unit, got `{v}`")),
                    }
                }
                "count" => spec.count = Some(number(key, v)?),
                _ => return Err(format!("unknown generator key `{key}`")),
            }
        }
        spec.config.check()?;
        Ok(spec)
    }
}

/// `--reserve` accepts `r` or `lo..hi` (inclusive).
pub fn parse_reserves(text: &str) -> Result<Vec<i64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<i64>()
            .map_err(|_| format!("reserve expects a number or lo..hi, got `{text}`"))
    };
    let values: Vec<i64> = match text.split_once("..") {
        Some((lo, hi)) => (num(lo)?..=num(hi)?).collect(),
        None => vec![num(text)?],
    };
    if values.is_empty() || values.iter().any(|&r| r < 0) {
        return Err(format!("reserve range `{text}` is empty or negative"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys() {
        let s = GenSpec::parse_onto(GeneratorConfig::default(), "seed=7,n=6,k=1..2,topology=graph,count=5").unwrap();
        assert_eq!(s.config.seed, 7);
        assert_eq!(s.config.buyers, 6..=6);
        assert_eq!(s.config.k, 1..=2);
        assert_eq!(s.config.topology, Topology::Graph);
        assert_eq!(s.count, Some(5));
    }

    #[test]
    fn rejects_bad_input() {
        let base = GeneratorConfig::default;
        assert!(GenSpec::parse_onto(base(), "seed").is_err());
        assert!(GenSpec::parse_onto(base(), "colour=red").is_err());
        assert!(GenSpec::parse_onto(base(), "n=0").is_err());
        assert!(GenSpec::parse_onto(base(), "topology=ring").is_err());
    }

    #[test]
    fn reserves() {
        assert_eq!(parse_reserves("0..5").unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(parse_reserves("3").unwrap(), vec![3]);
        assert!(parse_reserves("5..0").is_err());
        assert!(parse_reserves("-1").is_err());
    }
}
