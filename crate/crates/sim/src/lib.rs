//! Deterministic simulator for a secured metering network, plus an
//! executable attack suite.
//!
//! [`scenario`] parses the scripted configuration files, [`sim`] runs
//! them (topology, enrollment, broadcast/uplink traffic, membership
//! changes), and [`threats`] drives attacker behavior against a running
//! simulation and reports machine-checked verdicts.

pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod threats;
pub mod topology;

pub use metrics::{EventLog, SimMetrics};
pub use scenario::{parse as parse_scenario, Scenario, ScenarioError, Secrecy, SimParams};
pub use sim::{SimError, Simulation, UplinkOutcome};
pub use threats::{AttackReport, Verdict};
