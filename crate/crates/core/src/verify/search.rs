use serde::Serialize;

use crate::io::GeneratorConfig;
use crate::par_map;

use super::suite::MechanismSpec;
use super::{check_invitation_ic, check_value_ic, DeviationReport, MisreportGrid, VerifyBudget, VerifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Invitation,
    InvitationAndValue(MisreportGrid),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Index of the instance in the generator stream.
    pub index: u64,
    pub report: DeviationReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchSummary {
    /// Instances fully checked.
    pub examined: u64,
    /// Instances skipped because a check exceeded the budget or the
    /// mechanism rejected them.
    pub skipped: u64,
    pub found: Option<Counterexample>,
}

/// Scans instances `0..count` of the generator stream and returns the
/// lowest-index violation. Instances are checked in parallel batches; the
/// result does not depend on the worker count.
pub fn search_counterexample(
    spec: &MechanismSpec,
    config: &GeneratorConfig,
    count: u64,
    mode: SearchMode,
    budget: &VerifyBudget,
) -> SearchSummary {
    let batch = (crate::worker_count() as u64 * 16).max(16);
    let mut summary = SearchSummary {
        examined: 0,
        skipped: 0,
        found: None,
    };
    let mut start = 0;
    while start < count {
        let indices: Vec<u64> = (start..count.min(start + batch)).collect();
        let results = par_map(&indices, |&index| check_instance(spec, config, index, mode, budget));
        for (index, result) in indices.into_iter().zip(results) {
            match result {
                Ok(None) => summary.examined += 1,
                Ok(Some(report)) => {
                    summary.examined += 1;
                    summary.found = Some(Counterexample { index, report });
                    return summary;
                }
                Err(_) => summary.skipped += 1,
            }
        }
        start += batch;
    }
    summary
}

fn check_instance(
    spec: &MechanismSpec,
    config: &GeneratorConfig,
    index: u64,
    mode: SearchMode,
    budget: &VerifyBudget,
) -> Result<Option<DeviationReport>, VerifyError> {
    let profile = config.instance(index);
    let mechanism = spec.build(&profile, budget)?;
    let found = check_invitation_ic(mechanism.as_ref(), &profile, budget)?;
    if let Some(first) = found.into_iter().next() {
        return Ok(Some(first));
    }
    if let SearchMode::InvitationAndValue(grid) = mode {
        return Ok(check_value_ic(mechanism.as_ref(), &profile, &grid, budget)?
            .into_iter()
            .next());
    }
    Ok(None)
}
