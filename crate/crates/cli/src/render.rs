//! Label-keyed output records. Every map is ordered, so equal inputs give
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use netauction::io::{to_file, Instance, InstanceFile};
use netauction::market::{BuyerId, ReportProfile, ReportedType};
use netauction::mechanisms::{Outcome, Trace};
use netauction::verify::{Comparison, DeviationKind, DeviationReport, PropertyResult, StabilityViolation, Status};
use netauction::Money;
use serde::Serialize;

fn label_of(profile: &ReportProfile, id: BuyerId) -> String {
    profile.label(id)
}

fn labels<'a>(profile: &ReportProfile, ids: impl IntoIterator<Item = &'a BuyerId>) -> Vec<String> {
    ids.into_iter().map(|&b| label_of(profile, b)).collect()
}

#[derive(Debug, Serialize)]
pub struct LayerOut {
    pub layer: usize,
    pub k_remain_before: usize,
    pub k_remain_after: usize,
    pub removed: Vec<String>,
    pub sw_removed: Money,
    pub sw_excluded: BTreeMap<String, Money>,
    pub tentative: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize)]
pub struct StepOut {
    pub buyer: String,
    pub price: Money,
    pub supply: usize,
    pub won: bool,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceOut {
    Ldm { layers: Vec<LayerOut> },
    DnaMu { steps: Vec<StepOut> },
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub mechanism: String,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reserve: Option<Money>,
    pub allocation: BTreeMap<String, usize>,
    pub payments: BTreeMap<String, Money>,
    pub revenue: Money,
    pub welfare: Money,
    pub withheld: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceOut>,
    /// Buyers in id order, for the text table.
    #[serde(skip)]
    order: Vec<String>,
}

impl RunReport {
    pub fn new(
        profile: &ReportProfile,
        outcome: &Outcome,
        mu: Option<usize>,
        reserve: Option<Money>,
        with_trace: bool,
    ) -> Self {
        let name = |b: &BuyerId| label_of(profile, *b);
        // Dummy ids sit past the profile; name them as the augmented profile did.
        let traced = |b: &BuyerId| match outcome.dummies.iter().position(|d| d == b) {
            Some(n) => format!("reserve#{n}"),
            None => name(b),
        };
        let trace = with_trace.then(|| match &outcome.trace {
            Trace::Ldm { layers, .. } => Some(TraceOut::Ldm {
                layers: layers
                    .iter()
                    .map(|l| LayerOut {
                        layer: l.layer,
                        k_remain_before: l.k_remain_before,
                        k_remain_after: l.k_remain_after,
                        removed: l.removed.iter().map(traced).collect(),
                        sw_removed: l.sw_removed,
                        sw_excluded: l.sw_excluded.iter().map(|(b, v)| (traced(b), *v)).collect(),
                        tentative: l
                            .tentative
                            .holders()
                            .filter(|(_, u)| *u > 0)
                            .map(|(b, u)| (traced(&b), u))
                            .collect(),
                    })
                    .collect(),
            }),
            Trace::DnaMu { steps } => Some(TraceOut::DnaMu {
                steps: steps
                    .iter()
                    .map(|s| StepOut {
                        buyer: traced(&s.buyer),
                        price: s.price,
                        supply: s.supply,
                        won: s.won,
                    })
                    .collect(),
            }),
            Trace::None => None,
        });
        RunReport {
            mechanism: outcome.mechanism.clone(),
            k: profile.k,
            mu,
            reserve,
            allocation: outcome.units.iter().map(|(b, u)| (name(b), *u)).collect(),
            payments: outcome.payments.iter().map(|(b, p)| (name(b), *p)).collect(),
            revenue: outcome.revenue(),
            welfare: outcome.welfare(profile),
            withheld: outcome.withheld,
            trace: trace.flatten(),
            order: outcome.units.keys().map(name).collect(),
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "mechanism {} (K = {}", self.mechanism, self.k);
        if let Some(mu) = self.mu {
            let _ = write!(s, ", mu = {mu}");
        }
        if let Some(r) = self.reserve {
            let _ = write!(s, ", reserve = {r}");
        }
        s.push_str(")\n");
        let width = self.order.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:<width$}  units  payment", "buyer");
        for b in &self.order {
            let _ = writeln!(s, "{:<width$}  {:>5}  {:>7}", b, self.allocation[b], self.payments[b]);
        }
        let _ = writeln!(s, "revenue {}", self.revenue);
        let _ = writeln!(s, "welfare {}", self.welfare);
        if self.withheld > 0 {
            let _ = writeln!(s, "withheld {}", self.withheld);
        }
        match &self.trace {
            Some(TraceOut::Ldm { layers }) => {
                for l in layers {
                    let _ = writeln!(
                        s,
                        "layer {}: K_remain {} -> {}, SW(-R) = {}, removed {{{}}}",
                        l.layer,
                        l.k_remain_before,
                        l.k_remain_after,
                        l.sw_removed,
                        l.removed.join(", ")
                    );
                    for (b, v) in &l.sw_excluded {
                        let _ = writeln!(s, "  SW(-D_{b}) = {v}");
                    }
                }
            }
            Some(TraceOut::DnaMu { steps }) => {
                for st in steps {
                    let _ = writeln!(
                        s,
                        "  {} price {} supply {} {}",
                        st.buyer,
                        st.price,
                        st.supply,
                        if st.won { "wins" } else { "loses" }
                    );
                }
            }
            None => {}
        }
        s
    }
}

/// The serialized name of a unit enum variant.
fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct ReportOut {
    pub values: Vec<Money>,
    pub neighbors: Vec<String>,
}

fn report_out(profile: &ReportProfile, r: &ReportedType) -> ReportOut {
    ReportOut {
        values: r.values.marginals().to_vec(),
        neighbors: labels(profile, &r.invited),
    }
}

/// A violation with its instance in the on-disk format, ready to replay.
#[derive(Debug, Serialize)]
pub struct ViolationOut {
    pub kind: DeviationKind,
    pub mechanism: String,
    pub buyer: String,
    pub deviator: String,
    pub truthful_report: ReportOut,
    pub deviating_report: ReportOut,
    pub truthful_utility: Money,
    pub deviating_utility: Money,
    pub instance: InstanceFile,
}

impl ViolationOut {
    pub fn new(r: &DeviationReport) -> Self {
        let p = &r.instance;
        ViolationOut {
            kind: r.kind,
            mechanism: r.mechanism.clone(),
            buyer: label_of(p, r.buyer),
            deviator: label_of(p, r.deviator),
            truthful_report: report_out(p, &r.truthful_report),
            deviating_report: report_out(p, &r.deviating_report),
            truthful_utility: r.truthful_utility,
            deviating_utility: r.deviating_utility,
            instance: to_file(&Instance::new(p.clone())),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} violation for buyer {} (deviator {}): utility {} -> {}",
            kebab(&self.kind),
            self.buyer, self.deviator, self.truthful_utility, self.deviating_utility
        )
    }
}

#[derive(Debug, Serialize)]
pub struct StabilityOut {
    pub cause: String,
    pub buyer: String,
    pub parent: String,
    pub deviating_report: ReportOut,
    pub before: Vec<String>,
    pub after: Vec<String>,
}

fn stability_out(p: &ReportProfile, v: &StabilityViolation) -> StabilityOut {
    StabilityOut {
        cause: kebab(&v.cause),
        buyer: label_of(p, v.buyer),
        parent: label_of(p, v.parent),
        deviating_report: report_out(p, &v.deviating_report),
        before: labels(p, &v.before),
        after: labels(p, &v.after),
    }
}

#[derive(Debug, Serialize)]
pub struct PropertyOut {
    pub property: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<ViolationOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stability: Vec<StabilityOut>,
}

impl PropertyOut {
    pub fn new(profile: &ReportProfile, r: &PropertyResult) -> Self {
        PropertyOut {
            property: r.property.name().to_string(),
            status: r.status,
            detail: r.detail.clone(),
            violations: r.violations.iter().map(ViolationOut::new).collect(),
            stability: r.stability.iter().map(|v| stability_out(profile, v)).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InstanceVerdict {
    /// Path or generator index.
    pub instance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    pub results: Vec<PropertyOut>,
}

#[derive(Debug, Default, Serialize)]
pub struct Tally {
    pub pass: u64,
    pub fail: u64,
    pub skipped: u64,
    pub budget_exceeded: u64,
    pub error: u64,
}

impl Tally {
    pub fn add(&mut self, s: Status) {
        match s {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::Skipped => self.skipped += 1,
            Status::BudgetExceeded => self.budget_exceeded += 1,
            Status::Error => self.error += 1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub mechanism: String,
    pub instances: Vec<InstanceVerdict>,
    pub summary: BTreeMap<String, Tally>,
}

impl VerifyReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mechanism {}", self.mechanism);
        for inst in &self.instances {
            let bad: Vec<&PropertyOut> = inst.results.iter().filter(|r| r.status != Status::Pass).collect();
            if bad.is_empty() && self.instances.len() > 1 {
                continue;
            }
            let _ = writeln!(s, "instance {}", inst.instance);
            for r in &inst.results {
                if self.instances.len() > 1 && r.status == Status::Pass {
                    continue;
                }
                let _ = write!(s, "  {:<28} {}", r.property, status_word(r.status));
                if let Some(d) = &r.detail {
                    let _ = write!(s, " ({d})");
                }
                s.push('\n');
                for v in &r.violations {
                    let _ = writeln!(s, "    {}", v.summary());
                }
            }
        }
        let _ = writeln!(s, "summary over {} instance(s)", self.instances.len());
        for (p, t) in &self.summary {
            let _ = writeln!(
                s,
                "  {:<28} pass {} fail {} skipped {} budget {} error {}",
                p, t.pass, t.fail, t.skipped, t.budget_exceeded, t.error
            );
        }
        s
    }
}

pub fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Skipped => "skipped",
        Status::BudgetExceeded => "budget exceeded",
        Status::Error => "error",
    }
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub instance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reserve: Option<Money>,
    pub mu: usize,
    #[serde(flatten)]
    pub comparison: Comparison,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub all_dominate: bool,
}

impl CompareReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let w = self.rows.iter().map(|r| r.instance.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(
            s,
            "{:<w$} {:>7} {:>3} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7}",
            "instance", "reserve", "mu", "ldm_welfare", "vcg_welfare", "ldm_revenue", "vcg_revenue", "sw_ok", "rev_ok"
        );
        for r in &self.rows {
            let c = &r.comparison;
            let _ = writeln!(
                s,
                "{:<w$} {:>7} {:>3} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7}",
                r.instance,
                r.reserve.map_or("-".to_string(), |m| m.to_string()),
                r.mu,
                c.ldm_welfare,
                c.vcg_welfare,
                c.ldm_revenue,
                c.vcg_revenue,
                c.welfare_dominates,
                c.revenue_dominates
            );
        }
        let _ = writeln!(s, "all rows dominate: {}", self.all_dominate);
        s
    }
}
