use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::market::{validate_profile, BuyerId, ModelError, ReportProfile, ReportedType, ValuationVector};
use crate::money::Money;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid instance: buyer {label:?}: {reason}")]
    Invalid { label: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// On-disk shape of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    pub seller_neighbors: Vec<String>,
    pub buyers: BTreeMap<String, BuyerEntry>,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuyerEntry {
    pub values: Vec<i64>,
    #[serde(default)]
    pub neighbors: Vec<String>,
}

/// A parsed instance: the validated profile plus the optional prior μ.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub profile: ReportProfile,
    pub mu: Option<usize>,
    pub meta: Map<String, Value>,
}

impl Instance {
    pub fn new(profile: ReportProfile) -> Self {
        Instance {
            profile,
            mu: None,
            meta: Map::new(),
        }
    }

    /// Label → id lookup.
    pub fn ids(&self) -> BTreeMap<String, BuyerId> {
        self.profile
            .reports
            .keys()
            .map(|&id| (self.profile.label(id), id))
            .collect()
    }
}

/// Maps labels to ids. Canonical decimal labels keep their numeric value;
/// any other label set is numbered in sorted order.
fn assign_ids(labels: &BTreeSet<&str>) -> BTreeMap<String, BuyerId> {
    let numeric: Option<BTreeMap<String, BuyerId>> = labels
        .iter()
        .map(|l| {
            l.parse::<u32>()
                .ok()
                .filter(|n| n.to_string() == *l)
                .map(|n| (l.to_string(), BuyerId(n)))
        })
        .collect();
    numeric.unwrap_or_else(|| {
        labels
            .iter()
            .enumerate()
            .map(|(n, l)| (l.to_string(), BuyerId(n as u32)))
            .collect()
    })
}

fn invalid(label: &str, reason: impl Into<String>) -> IoError {
    IoError::Invalid {
        label: label.to_string(),
        reason: reason.into(),
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    instance_from_file(file)
}

pub fn instance_from_file(file: InstanceFile) -> Result<Instance, IoError> {
    let labels: BTreeSet<&str> = file.buyers.keys().map(String::as_str).collect();
    let ids = assign_ids(&labels);
    let lookup = |owner: &str, l: &str| {
        ids.get(l)
            .copied()
            .ok_or_else(|| invalid(owner, format!("references unknown buyer {l:?}")))
    };

    let mut profile = ReportProfile::new(file.k);
    for l in &file.seller_neighbors {
        profile.seller_neighbors.insert(lookup("seller", l)?);
    }
    for (label, entry) in &file.buyers {
        let id = ids[label];
        let invited = entry
            .neighbors
            .iter()
            .map(|n| lookup(label, n))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let values = ValuationVector::new(entry.values.iter().copied().map(Money).collect());
        profile.reports.insert(id, ReportedType { values, invited });
        profile.labels.insert(id, label.clone());
    }
    let profile = validate_profile(profile).map_err(|e| match e {
        ModelError::Validation {
            buyer: Some(b),
            reason,
        } => invalid(&profile_label(&file, &ids, b), reason),
        other => IoError::Model(other),
    })?;
    Ok(Instance {
        profile,
        mu: file.mu,
        meta: file.meta,
    })
}

fn profile_label(file: &InstanceFile, ids: &BTreeMap<String, BuyerId>, b: BuyerId) -> String {
    file.buyers
        .keys()
        .find(|l| ids[*l] == b)
        .cloned()
        .unwrap_or_else(|| b.to_string())
}

pub fn to_file(instance: &Instance) -> InstanceFile {
    let p = &instance.profile;
    InstanceFile {
        k: p.k,
        mu: instance.mu,
        seller_neighbors: p.seller_neighbors.iter().map(|&b| p.label(b)).collect(),
        buyers: p
            .reports
            .iter()
            .map(|(&id, r)| {
                (
                    p.label(id),
                    BuyerEntry {
                        values: r.values.marginals().iter().map(|m| m.units()).collect(),
                        neighbors: r.invited.iter().map(|&b| p.label(b)).collect(),
                    },
                )
            })
            .collect(),
        meta: instance.meta.clone(),
    }
}

/// Canonical text form: pretty JSON, buyers keyed by label, neighbor lists
/// in id order, trailing newline.
pub fn serialize_instance(instance: &Instance) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(instance)).expect("plain data");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_figure_file() {
        let inst = parse_instance(include_str!("../../fixtures/fig3.json")).unwrap();
        assert_eq!(inst.profile.k, 3);
        assert_eq!(inst.profile.reports.len(), 18);
        assert_eq!(inst.mu, Some(2));
        let ids = inst.ids();
        assert_eq!(ids["a"], BuyerId(0));
        assert_eq!(ids["r"], BuyerId(17));
    }

    #[test]
    fn numeric_labels_keep_their_value() {
        let inst = parse_instance(include_str!("../../fixtures/t4.json")).unwrap();
        assert!(inst.profile.reports.contains_key(&BuyerId(5)));
        assert_eq!(inst.profile, crate::fixtures::t4_labeled());
    }

    #[test]
    fn empty_buyers() {
        let inst = parse_instance(r#"{"k": 2, "seller_neighbors": [], "buyers": {}}"#).unwrap();
        assert!(inst.profile.reports.is_empty());
        assert!(inst.meta.is_empty());
    }

    #[test]
    fn canonical_round_trip() {
        let messy = r#"{"meta": {"x": 1}, "buyers": {"b": {"values": [3], "neighbors": []},
            "a": {"values": [5], "neighbors": ["b", "b"]}}, "seller_neighbors": ["a"], "k": 1}"#;
        let once = serialize_instance(&parse_instance(messy).unwrap());
        let twice = serialize_instance(&parse_instance(&once).unwrap());
        assert_eq!(once, twice);
        assert!(once.contains("\"neighbors\": [\n        \"b\"\n      ]"));
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_instance("{\n  \"k\": 1.5\n}") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_instance(r#"{"k": 1, "seller_neighbors": [], "buyers": {}, "extra": 1}"#),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn validation_names_the_label() {
        let text = r#"{"k": 2, "seller_neighbors": ["x"],
            "buyers": {"x": {"values": [1, 4], "neighbors": []}}}"#;
        match parse_instance(text) {
            Err(IoError::Invalid { label, reason }) => {
                assert_eq!(label, "x");
                assert_eq!(reason, "non-increasing violated");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"k": 1, "seller_neighbors": ["x"],
            "buyers": {"x": {"values": [1], "neighbors": ["ghost"]}}}"#;
        assert!(matches!(parse_instance(text), Err(IoError::Invalid { .. })));
    }
}
