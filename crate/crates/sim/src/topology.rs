//! Network shape: one utility, collectors behind it, meters hanging off
//! collectors either directly or through other meters acting as relays.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("topology needs exactly one utility node")]
    UtilityCount,
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("node {0} references unknown parent {1}")]
    UnknownParent(String, String),
    #[error("collector {0} must connect to the utility")]
    CollectorParent(String),
    #[error("meter {0} has no path to a collector")]
    DisconnectedMeter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Utility,
    Collector,
    Meter,
}

/// Declarative node description used to build a [`Topology`].
#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub parent: Option<String>,
    pub delay: u64,
    /// Meter stores its keys in the board tables instead of regenerating
    /// them on demand.
    pub static_key: bool,
}

#[derive(Debug, Clone)]
pub struct Topology {
    utility: String,
    collectors: Vec<String>,
    meters: Vec<String>,
    parents: BTreeMap<String, (String, u64)>,
    static_meters: BTreeSet<String>,
    relays: BTreeSet<String>,
}

impl Topology {
    pub fn build(specs: &[NodeSpec]) -> Result<Topology, TopologyError> {
        let mut utility = None;
        let mut collectors = Vec::new();
        let mut meters = Vec::new();
        let mut parents = BTreeMap::new();
        let mut static_meters = BTreeSet::new();
        let mut seen = BTreeSet::new();

        for spec in specs {
            if !seen.insert(spec.id.clone()) {
                return Err(TopologyError::DuplicateNode(spec.id.clone()));
            }
            match spec.kind {
                NodeKind::Utility => {
                    if utility.replace(spec.id.clone()).is_some() {
                        return Err(TopologyError::UtilityCount);
                    }
                }
                NodeKind::Collector => collectors.push(spec.id.clone()),
                NodeKind::Meter => {
                    meters.push(spec.id.clone());
                    if spec.static_key {
                        static_meters.insert(spec.id.clone());
                    }
                }
            }
            if let Some(parent) = &spec.parent {
                parents.insert(spec.id.clone(), (parent.clone(), spec.delay.max(1)));
            }
        }
        let utility = utility.ok_or(TopologyError::UtilityCount)?;
        collectors.sort();
        meters.sort();

        let topo = Topology {
            utility,
            collectors,
            meters,
            parents,
            static_meters,
            relays: BTreeSet::new(),
        };
        topo.validated()
    }

    fn validated(mut self) -> Result<Topology, TopologyError> {
        let known: BTreeSet<&String> = std::iter::once(&self.utility)
            .chain(self.collectors.iter())
            .chain(self.meters.iter())
            .collect();
        for (child, (parent, _)) in &self.parents {
            if !known.contains(parent) {
                return Err(TopologyError::UnknownParent(child.clone(), parent.clone()));
            }
        }
        for c in &self.collectors {
            match self.parents.get(c) {
                Some((p, _)) if *p == self.utility => {}
                _ => return Err(TopologyError::CollectorParent(c.clone())),
            }
        }
        let mut relays = BTreeSet::new();
        for m in &self.meters {
            let path = self
                .trace_to_collector(m)
                .ok_or_else(|| TopologyError::DisconnectedMeter(m.clone()))?;
            for (hop, _) in &path[..path.len().saturating_sub(1)] {
                relays.insert(hop.clone());
            }
        }
        self.relays = relays;
        Ok(self)
    }

    /// Hops from (but excluding) `meter` up to and including its collector,
    /// each with the link delay into it. None on a cycle or dead end.
    fn trace_to_collector(&self, meter: &str) -> Option<Vec<(String, u64)>> {
        let mut path = Vec::new();
        let mut cur = meter.to_string();
        for _ in 0..=self.parents.len() {
            let (parent, delay) = self.parents.get(&cur)?;
            path.push((parent.clone(), *delay));
            if self.collectors.iter().any(|c| c == parent) {
                return Some(path);
            }
            if *parent == self.utility {
                return None;
            }
            cur = parent.clone();
        }
        None
    }

    pub fn utility(&self) -> &str {
        &self.utility
    }

    pub fn collectors(&self) -> &[String] {
        &self.collectors
    }

    pub fn meters(&self) -> &[String] {
        &self.meters
    }

    pub fn is_static_meter(&self, id: &str) -> bool {
        self.static_meters.contains(id)
    }

    pub fn is_relay(&self, id: &str) -> bool {
        self.relays.contains(id)
    }

    pub fn has_meter(&self, id: &str) -> bool {
        self.meters.iter().any(|m| m == id)
    }

    /// Relay meters between `meter` and its collector (exclusive), plus the
    /// collector id and the total path delay in ticks.
    pub fn uplink_route(&self, meter: &str) -> Option<(Vec<String>, String, u64)> {
        let path = self.trace_to_collector(meter)?;
        let total: u64 = path.iter().map(|(_, d)| d).sum();
        let collector = path.last().unwrap().0.clone();
        let relays = path[..path.len() - 1]
            .iter()
            .map(|(h, _)| h.clone())
            .collect();
        Some((relays, collector, total))
    }

    /// Delay from the utility to a collector.
    pub fn collector_delay(&self, collector: &str) -> u64 {
        self.parents.get(collector).map(|(_, d)| *d).unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str, kind: NodeKind, parent: Option<&str>) -> NodeSpec {
        NodeSpec {
            id: id.into(),
            kind,
            parent: parent.map(String::from),
            delay: 1,
            static_key: false,
        }
    }

    #[test]
    fn four_meter_tree_with_relay() {
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("U")),
            spec("M1", NodeKind::Meter, Some("C1")),
            spec("M2", NodeKind::Meter, Some("C1")),
            spec("M3", NodeKind::Meter, Some("M2")),
            spec("M4", NodeKind::Meter, Some("C1")),
        ];
        let topo = Topology::build(&specs).unwrap();
        assert!(topo.is_relay("M2"));
        assert!(!topo.is_relay("M1"));
        let (relays, collector, delay) = topo.uplink_route("M3").unwrap();
        assert_eq!(relays, vec!["M2".to_string()]);
        assert_eq!(collector, "C1");
        assert_eq!(delay, 2);
    }

    #[test]
    fn disconnected_meter_rejected() {
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("U")),
            spec("M1", NodeKind::Meter, None),
        ];
        assert_eq!(
            Topology::build(&specs).unwrap_err(),
            TopologyError::DisconnectedMeter("M1".into())
        );
    }

    #[test]
    fn meter_cycle_rejected() {
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("U")),
            spec("M1", NodeKind::Meter, Some("M2")),
            spec("M2", NodeKind::Meter, Some("M1")),
        ];
        assert!(matches!(
            Topology::build(&specs).unwrap_err(),
            TopologyError::DisconnectedMeter(_)
        ));
    }

    #[test]
    fn collector_must_hang_off_utility() {
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("U")),
            spec("C2", NodeKind::Collector, Some("C1")),
        ];
        assert_eq!(
            Topology::build(&specs).unwrap_err(),
            TopologyError::CollectorParent("C2".into())
        );
    }

    #[test]
    fn duplicate_and_unknown_nodes_rejected() {
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("U")),
            spec("C1", NodeKind::Collector, Some("U")),
        ];
        assert_eq!(
            Topology::build(&specs).unwrap_err(),
            TopologyError::DuplicateNode("C1".into())
        );
        let specs = vec![
            spec("U", NodeKind::Utility, None),
            spec("C1", NodeKind::Collector, Some("Ux")),
        ];
        assert!(matches!(
            Topology::build(&specs).unwrap_err(),
            TopologyError::UnknownParent(_, _)
        ));
    }
}
