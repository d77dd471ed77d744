//! Link-failure taxonomy, injection and system-down analysis.
//!
//! Five link classes can fail: server-coupler (F1), coupler-AWGR (F2),
//! AWGR-AWGR (F3), AWGR-splitter (F4) and splitter-server (F5). OLT
//! attachment links are outside the taxonomy and are only failable through
//! custom scenarios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{Demand, DemandId};
use crate::topology::{
    reachable, DeviceKind, LinkDirection, LinkId, NodeId, Topology, TopologyError,
};

/// The five failable link classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl FailureKind {
    pub const ALL: [FailureKind; 5] =
        [FailureKind::F1, FailureKind::F2, FailureKind::F3, FailureKind::F4, FailureKind::F5];
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureKind::F1 => "F1",
            FailureKind::F2 => "F2",
            FailureKind::F3 => "F3",
            FailureKind::F4 => "F4",
            FailureKind::F5 => "F5",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for FailureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(FailureKind::F1),
            "F2" => Ok(FailureKind::F2),
            "F3" => Ok(FailureKind::F3),
            "F4" => Ok(FailureKind::F4),
            "F5" => Ok(FailureKind::F5),
            other => Err(format!("unknown failure kind `{other}` (expected F1..F5)")),
        }
    }
}

/// Failure class of a link, or olt-attach for the exempt OLT plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkClass {
    Failure(FailureKind),
    OltAttach,
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkClass::Failure(k) => k.fmt(f),
            LinkClass::OltAttach => f.write_str("olt-attach"),
        }
    }
}

/// Scenario label: normal mode, a single-kind sweep entry, or custom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioLabel {
    Nf,
    Kind(FailureKind),
    Custom(String),
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioLabel::Nf => f.write_str("NF"),
            ScenarioLabel::Kind(k) => k.fmt(f),
            ScenarioLabel::Custom(s) => f.write_str(s),
        }
    }
}

/// A set of failed links with a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureScenario {
    pub label: ScenarioLabel,
    pub failed_links: BTreeSet<LinkId>,
}

impl FailureScenario {
    /// The no-failure baseline.
    pub fn nf() -> Self {
        FailureScenario { label: ScenarioLabel::Nf, failed_links: BTreeSet::new() }
    }

    /// A labelled custom scenario over arbitrary links.
    pub fn custom(label: impl Into<String>, failed_links: BTreeSet<LinkId>) -> Self {
        FailureScenario { label: ScenarioLabel::Custom(label.into()), failed_links }
    }

    /// Checks the label invariants against a topology: NF iff empty, and
    /// single-kind labels only contain links of that kind.
    pub fn validate(&self, t: &Topology) -> Result<(), FailureError> {
        match &self.label {
            ScenarioLabel::Nf => {
                if !self.failed_links.is_empty() {
                    return Err(FailureError::LabelMismatch(
                        "NF scenario must not fail any link".into(),
                    ));
                }
            }
            ScenarioLabel::Kind(kind) => {
                if self.failed_links.is_empty() {
                    return Err(FailureError::LabelMismatch(format!(
                        "{kind} scenario must fail at least one link"
                    )));
                }
                for id in &self.failed_links {
                    let class = classify_link(t, id)?;
                    if class != LinkClass::Failure(*kind) {
                        return Err(FailureError::LabelMismatch(format!(
                            "link `{id}` is {class}, not {kind}"
                        )));
                    }
                }
            }
            ScenarioLabel::Custom(_) => {
                for id in &self.failed_links {
                    if t.link(id).is_none() {
                        return Err(TopologyError::UnknownLink(id.clone()).into());
                    }
                }
            }
        }
        Ok(())
    }

    /// `<label>` for NF, `<label>:<link,link,...>` otherwise.
    pub fn name(&self) -> String {
        if self.failed_links.is_empty() {
            self.label.to_string()
        } else {
            let links: Vec<String> = self.failed_links.iter().map(|l| l.0.clone()).collect();
            format!("{}:{}", self.label, links.join(","))
        }
    }
}

#[derive(Debug, Error)]
pub enum FailureError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("scenario label does not match its links: {0}")]
    LabelMismatch(String),
    #[error("failed to parse scenario document: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Classifies a link by its endpoint device kinds and direction.
pub fn classify_link(t: &Topology, id: &LinkId) -> Result<LinkClass, FailureError> {
    let link = t.link(id).ok_or_else(|| TopologyError::UnknownLink(id.clone()))?;
    let from = t.node(&link.from).expect("validated endpoints").kind;
    let to = t.node(&link.to).expect("validated endpoints").kind;
    let class = match (from, to, link.direction) {
        (DeviceKind::Server, DeviceKind::Coupler, LinkDirection::Uplink) => {
            LinkClass::Failure(FailureKind::F1)
        }
        (DeviceKind::Coupler, DeviceKind::Awgr, LinkDirection::Uplink) => {
            LinkClass::Failure(FailureKind::F2)
        }
        (DeviceKind::Awgr, DeviceKind::Awgr, LinkDirection::InterAwgr) => {
            LinkClass::Failure(FailureKind::F3)
        }
        (DeviceKind::Awgr, DeviceKind::Splitter, LinkDirection::Downlink) => {
            LinkClass::Failure(FailureKind::F4)
        }
        (DeviceKind::Splitter, DeviceKind::Server, LinkDirection::Downlink) => {
            LinkClass::Failure(FailureKind::F5)
        }
        (_, _, LinkDirection::OltAttach) => LinkClass::OltAttach,
        // Topology validation admits no other combination.
        _ => unreachable!("unclassifiable link survived validation"),
    };
    Ok(class)
}

/// One scenario per link of the given kind, ordered by link id.
pub fn enumerate_single_failures(t: &Topology, kind: FailureKind) -> Vec<FailureScenario> {
    t.links()
        .filter(|l| classify_link(t, &l.id).ok() == Some(LinkClass::Failure(kind)))
        .map(|l| FailureScenario {
            label: ScenarioLabel::Kind(kind),
            failed_links: [l.id.clone()].into_iter().collect(),
        })
        .collect()
}

/// Returns a topology with the scenario's links removed; the input is
/// unchanged. Removal is a set difference — links already absent are ignored
/// — so application is idempotent and commutes over disjoint link sets.
/// Unknown link ids are rejected by [`FailureScenario::validate`], which
/// callers run against the pre-failure topology.
pub fn apply_failure(t: &Topology, s: &FailureScenario) -> Result<Topology, FailureError> {
    let present: BTreeSet<LinkId> =
        s.failed_links.iter().filter(|id| t.link(id).is_some()).cloned().collect();
    Ok(t.without_links(&present)?)
}

/// Which servers and demands die under a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownReport {
    pub down_servers: BTreeSet<NodeId>,
    pub dead_demands: BTreeSet<DemandId>,
    pub survivable: bool,
}

/// Computes the dead demands (no surviving path) and down servers under a
/// scenario.
///
/// A server counts as down when it is an endpoint of a dead demand and has
/// lost an entire traffic direction: it can no longer source traffic to any
/// server, or no longer sink traffic from any server.
pub fn down_analysis(
    t: &Topology,
    s: &FailureScenario,
    demands: &[Demand],
) -> Result<DownReport, FailureError> {
    for d in demands {
        t.expect_server(&d.src)?;
        t.expect_server(&d.dst)?;
    }
    let failed = apply_failure(t, s)?;
    let servers = failed.servers();

    let mut reach: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
    let mut reaches = |src: &NodeId, dst: &NodeId, failed: &Topology| -> bool {
        *reach
            .entry((src.clone(), dst.clone()))
            .or_insert_with(|| reachable(failed, src, dst).unwrap_or(false))
    };

    let mut dead_demands = BTreeSet::new();
    for d in demands {
        if !reaches(&d.src, &d.dst, &failed) {
            dead_demands.insert(d.id.clone());
        }
    }

    let mut down_servers = BTreeSet::new();
    let dead_endpoints: BTreeSet<&NodeId> = demands
        .iter()
        .filter(|d| dead_demands.contains(&d.id))
        .flat_map(|d| [&d.src, &d.dst])
        .collect();
    for server in &dead_endpoints {
        let can_source = servers.iter().any(|o| *o != **server && reaches(server, o, &failed));
        let can_sink = servers.iter().any(|o| *o != **server && reaches(o, server, &failed));
        if !can_source || !can_sink {
            down_servers.insert((*server).clone());
        }
    }

    let survivable = dead_demands.is_empty();
    Ok(DownReport { down_servers, dead_demands, survivable })
}

// --- scenario document -----------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioDoc {
    label: String,
    #[serde(default)]
    failed_links: Vec<String>,
}

/// Serializes a scenario to its TOML document form.
pub fn save_scenario_str(s: &FailureScenario) -> String {
    let doc = ScenarioDoc {
        label: s.label.to_string(),
        failed_links: s.failed_links.iter().map(|l| l.0.clone()).collect(),
    };
    toml::to_string_pretty(&doc).expect("scenario document serializes")
}

/// Parses a scenario document; the label is re-derived from its string form.
pub fn load_scenario_str(text: &str) -> Result<FailureScenario, FailureError> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| FailureError::Parse(e.to_string()))?;
    let label = match doc.label.as_str() {
        "NF" => ScenarioLabel::Nf,
        k if k.parse::<FailureKind>().is_ok() => ScenarioLabel::Kind(k.parse().unwrap()),
        other => ScenarioLabel::Custom(other.to_string()),
    };
    Ok(FailureScenario {
        label,
        failed_links: doc.failed_links.into_iter().map(LinkId).collect(),
    })
}

/// Reads a scenario document from `path`.
pub fn load_scenario(path: &Path) -> Result<FailureScenario, FailureError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| FailureError::Io { path: path.display().to_string(), source })?;
    load_scenario_str(&text)
}
