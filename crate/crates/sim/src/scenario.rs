//! Scenario configuration files: a `topology` section declaring the nodes,
//! a `params` section for knobs, and an `events` section scripting the run.
//!
//! The format is line-oriented. `#` starts a comment, sections are
//! `name { ... }`, and every event line starts with its tick:
//!
//! ```text
//! topology {
//!   utility U
//!   collector C1 -> U
//!   meter M1 -> C1
//!   meter M2 -> C1 delay=2 static
//!   meter M3 -> M2
//! }
//! params {
//!   backend = acp
//!   secrecy = forward
//! }
//! events {
//!   1 enroll M1
//!   5 broadcast * TOU-UPDATE-PEAK
//!   6 assert delivered 1
//! }
//! ```

use std::collections::BTreeMap;

use gridkey_core::bgkm::{Backend, SecurityParams};
use thiserror::Error;

use crate::threats::Verdict;
use crate::topology::{NodeKind, NodeSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Parse {
        line,
        msg: msg.into(),
    })
}

/// What re-keying guarantee a membership change should enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Secrecy {
    Forward,
    Backward,
    None,
}

impl Secrecy {
    fn parse(word: &str) -> Option<Secrecy> {
        match word {
            "forward" => Some(Secrecy::Forward),
            "backward" => Some(Secrecy::Backward),
            "none" => Some(Secrecy::None),
            _ => None,
        }
    }

    pub fn rekeys(self) -> bool {
        !matches!(self, Secrecy::None)
    }
}

/// Simulation knobs shared by scenario files and the threat harness.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub backend: Backend,
    pub security: SecurityParams,
    pub feedback_iterations: u32,
    pub secrecy: Secrecy,
    pub counters: bool,
    pub encryption: bool,
    pub session_cap: u32,
    pub throttle: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            backend: Backend::Acp,
            security: SecurityParams::default(),
            feedback_iterations: 8,
            secrecy: Secrecy::Forward,
            counters: true,
            encryption: true,
            session_cap: 10,
            throttle: false,
        }
    }
}

/// Which archived broadcast an assertion refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BroadcastRef {
    Last,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertCheck {
    /// Member meters that opened the last broadcast.
    Delivered(u64),
    /// Whether a meter can open an archived broadcast right now.
    Opens {
        meter: String,
        which: BroadcastRef,
        expect: bool,
    },
    /// A metrics counter has exactly this encoded value.
    Metric { key: String, value: String },
    /// The most recent run of an attack scenario produced this verdict.
    Verdict { scenario: String, expect: Verdict },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventOp {
    Enroll { meter: String },
    Auth { meter: String, hardened: bool },
    Broadcast { members: Option<Vec<String>>, message: String },
    Report { meter: String, reading: String },
    Revoke { meter: String, secrecy: Option<Secrecy> },
    Join { meter: String, secrecy: Option<Secrecy> },
    Rekey,
    Attack { scenario: String, modes: BTreeMap<String, String> },
    Assert(AssertCheck),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub tick: u64,
    pub op: EventOp,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub params: SimParams,
    pub events: Vec<ScenarioEvent>,
}

enum Section {
    None,
    Topology,
    Params,
    Events,
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let mut section = Section::None;
    let mut nodes = Vec::new();
    let mut params = SimParams::default();
    let mut events = Vec::new();
    let mut last_tick = 0u64;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        match section {
            Section::None => match line {
                "topology {" => section = Section::Topology,
                "params {" => section = Section::Params,
                "events {" => section = Section::Events,
                _ => return err(lineno, format!("expected a section header, got '{line}'")),
            },
            Section::Topology => {
                if line == "}" {
                    section = Section::None;
                } else {
                    nodes.push(parse_node(line, lineno)?);
                }
            }
            Section::Params => {
                if line == "}" {
                    section = Section::None;
                } else {
                    apply_param(&mut params, line, lineno)?;
                }
            }
            Section::Events => {
                if line == "}" {
                    section = Section::None;
                } else {
                    let ev = parse_event(line, lineno)?;
                    if ev.tick < last_tick {
                        return err(lineno, "event ticks must be non-decreasing");
                    }
                    last_tick = ev.tick;
                    events.push(ev);
                }
            }
        }
    }
    if !matches!(section, Section::None) {
        return err(text.lines().count(), "unterminated section");
    }
    Ok(Scenario {
        nodes,
        params,
        events,
    })
}

fn parse_node(line: &str, lineno: usize) -> Result<NodeSpec, ScenarioError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let kind = match tokens[0] {
        "utility" => NodeKind::Utility,
        "collector" => NodeKind::Collector,
        "meter" => NodeKind::Meter,
        other => return err(lineno, format!("unknown node kind '{other}'")),
    };
    let Some(id) = tokens.get(1) else {
        return err(lineno, "missing node id");
    };
    let mut parent = None;
    let mut delay = 1u64;
    let mut static_key = false;
    let mut rest = &tokens[2..];
    if rest.first() == Some(&"->") {
        let Some(p) = rest.get(1) else {
            return err(lineno, "missing parent after '->'");
        };
        parent = Some(p.to_string());
        rest = &rest[2..];
    }
    for tok in rest {
        if let Some(d) = tok.strip_prefix("delay=") {
            delay = d
                .parse()
                .map_err(|_| ScenarioError::Parse {
                    line: lineno,
                    msg: format!("bad delay '{d}'"),
                })?;
        } else if *tok == "static" {
            static_key = true;
        } else {
            return err(lineno, format!("unknown node attribute '{tok}'"));
        }
    }
    if matches!(kind, NodeKind::Utility) && parent.is_some() {
        return err(lineno, "utility takes no parent");
    }
    if !matches!(kind, NodeKind::Utility) && parent.is_none() {
        return err(lineno, "node needs a parent ('-> <id>')");
    }
    Ok(NodeSpec {
        id: id.to_string(),
        kind,
        parent,
        delay,
        static_key,
    })
}

fn apply_param(params: &mut SimParams, line: &str, lineno: usize) -> Result<(), ScenarioError> {
    let Some((key, value)) = line.split_once('=') else {
        return err(lineno, "expected 'key = value'");
    };
    let key = key.trim();
    let value = value.trim();
    let on_off = |v: &str| match v {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => err(lineno, format!("expected on/off, got '{v}'")),
    };
    match key {
        "backend" => {
            params.backend = match value {
                "acp" => Backend::Acp,
                "lock" => Backend::Lock,
                _ => return err(lineno, format!("unknown backend '{value}'")),
            }
        }
        "profile" => {
            params.security = match value {
                "default" => SecurityParams::default(),
                "toy" => SecurityParams {
                    field_prime: 97,
                    ..SecurityParams::default()
                },
                _ => return err(lineno, format!("unknown profile '{value}'")),
            }
        }
        "feedback_iterations" => {
            params.feedback_iterations = value
                .parse()
                .map_err(|_| ScenarioError::Parse {
                    line: lineno,
                    msg: format!("bad iteration count '{value}'"),
                })?
        }
        "secrecy" => {
            params.secrecy = Secrecy::parse(value)
                .ok_or_else(|| ScenarioError::Parse {
                    line: lineno,
                    msg: format!("unknown secrecy mode '{value}'"),
                })?
        }
        "counters" => params.counters = on_off(value)?,
        "encryption" => params.encryption = on_off(value)?,
        "throttle" => params.throttle = on_off(value)?,
        "session_cap" => {
            params.session_cap = value
                .parse()
                .map_err(|_| ScenarioError::Parse {
                    line: lineno,
                    msg: format!("bad session cap '{value}'"),
                })?
        }
        _ => return err(lineno, format!("unknown parameter '{key}'")),
    }
    Ok(())
}

fn parse_event(line: &str, lineno: usize) -> Result<ScenarioEvent, ScenarioError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let tick: u64 = tokens[0]
        .parse()
        .map_err(|_| ScenarioError::Parse {
            line: lineno,
            msg: format!("event line must start with a tick, got '{}'", tokens[0]),
        })?;
    let Some(&op_word) = tokens.get(1) else {
        return err(lineno, "missing event op");
    };
    let args = &tokens[2..];
    let need = |i: usize, what: &str| -> Result<String, ScenarioError> {
        args.get(i)
            .map(|s| s.to_string())
            .ok_or(ScenarioError::Parse {
                line: lineno,
                msg: format!("missing {what}"),
            })
    };

    let op = match op_word {
        "enroll" => EventOp::Enroll {
            meter: need(0, "meter id")?,
        },
        "auth" => EventOp::Auth {
            meter: need(0, "meter id")?,
            hardened: args.get(1) == Some(&"hardened"),
        },
        "broadcast" => {
            let spec = need(0, "member spec")?;
            let members = if spec == "*" {
                None
            } else {
                Some(spec.split(',').map(String::from).collect())
            };
            if args.len() < 2 {
                return err(lineno, "missing broadcast message");
            }
            EventOp::Broadcast {
                members,
                message: args[1..].join(" "),
            }
        }
        "report" => {
            let meter = need(0, "meter id")?;
            if args.len() < 2 {
                return err(lineno, "missing reading");
            }
            EventOp::Report {
                meter,
                reading: args[1..].join(" "),
            }
        }
        "revoke" | "join" => {
            let meter = need(0, "meter id")?;
            let secrecy = match args.get(1) {
                None => None,
                Some(w) => Some(Secrecy::parse(w).ok_or_else(|| ScenarioError::Parse {
                    line: lineno,
                    msg: format!("unknown secrecy mode '{w}'"),
                })?),
            };
            if op_word == "revoke" {
                EventOp::Revoke { meter, secrecy }
            } else {
                EventOp::Join { meter, secrecy }
            }
        }
        "rekey" => EventOp::Rekey,
        "attack" => {
            let scenario = need(0, "attack scenario id")?;
            let mut modes = BTreeMap::new();
            for kv in &args[1..] {
                let Some((k, v)) = kv.split_once('=') else {
                    return err(lineno, format!("attack mode must be key=value, got '{kv}'"));
                };
                modes.insert(k.to_string(), v.to_string());
            }
            EventOp::Attack { scenario, modes }
        }
        "assert" => EventOp::Assert(parse_assert(args, lineno)?),
        other => return err(lineno, format!("unknown event op '{other}'")),
    };
    Ok(ScenarioEvent { tick, op })
}

fn parse_assert(args: &[&str], lineno: usize) -> Result<AssertCheck, ScenarioError> {
    let Some(&form) = args.first() else {
        return err(lineno, "missing assert form");
    };
    match form {
        "delivered" => {
            let n = args
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or(ScenarioError::Parse {
                    line: lineno,
                    msg: "assert delivered needs a count".into(),
                })?;
            Ok(AssertCheck::Delivered(n))
        }
        "opens" => {
            let meter = args.get(1).map(|s| s.to_string());
            let which = match args.get(2) {
                Some(&"last") => Some(BroadcastRef::Last),
                Some(idx) => idx.parse().ok().map(BroadcastRef::Index),
                None => None,
            };
            let expect = match args.get(3) {
                Some(&"true") => Some(true),
                Some(&"false") => Some(false),
                _ => None,
            };
            match (meter, which, expect) {
                (Some(meter), Some(which), Some(expect)) => Ok(AssertCheck::Opens {
                    meter,
                    which,
                    expect,
                }),
                _ => err(lineno, "usage: assert opens <meter> <last|index> <true|false>"),
            }
        }
        "metric" => {
            let key = args.get(1).map(|s| s.to_string());
            let value = args.get(2).map(|s| s.to_string());
            match (key, value) {
                (Some(key), Some(value)) => Ok(AssertCheck::Metric { key, value }),
                _ => err(lineno, "usage: assert metric <key> <value>"),
            }
        }
        "verdict" => {
            let scenario = args.get(1).map(|s| s.to_string());
            let expect = match args.get(2) {
                Some(&"BLOCKED") => Some(Verdict::Blocked),
                Some(&"SUCCEEDED") => Some(Verdict::Succeeded),
                _ => None,
            };
            match (scenario, expect) {
                (Some(scenario), Some(expect)) => Ok(AssertCheck::Verdict { scenario, expect }),
                _ => err(lineno, "usage: assert verdict <scenario> <BLOCKED|SUCCEEDED>"),
            }
        }
        other => err(lineno, format!("unknown assert form '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# four meters behind one collector
topology {
  utility U
  collector C1 -> U
  meter M1 -> C1
  meter M2 -> C1 delay=2
  meter M3 -> M2
  meter M4 -> C1 static
}
params {
  backend = lock
  counters = off
}
events {
  1 enroll M1
  1 enroll M2
  3 broadcast * TOU PEAK 17
  4 assert delivered 2
  5 report M1 42.5
  6 revoke M2 forward
  7 attack replay counters=off
  8 assert verdict replay SUCCEEDED
}
";

    #[test]
    fn parses_full_scenario() {
        let s = parse(SAMPLE).unwrap();
        assert_eq!(s.nodes.len(), 6);
        assert_eq!(s.params.backend, Backend::Lock);
        assert!(!s.params.counters);
        assert_eq!(s.events.len(), 8);
        assert_eq!(
            s.events[2].op,
            EventOp::Broadcast {
                members: None,
                message: "TOU PEAK 17".into()
            }
        );
        let NodeSpec {
            static_key, delay, ..
        } = &s.nodes[3];
        assert_eq!(*delay, 2);
        assert!(!static_key);
        assert!(s.nodes[5].static_key);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "topology {\n  utility U\n  gateway G1\n}\n";
        let e = parse(bad).unwrap_err();
        assert_eq!(
            e,
            ScenarioError::Parse {
                line: 3,
                msg: "unknown node kind 'gateway'".into()
            }
        );
    }

    #[test]
    fn rejects_bad_tick_order_and_unterminated_section() {
        let bad = "events {\n  5 rekey\n  3 rekey\n}\n";
        assert!(matches!(
            parse(bad).unwrap_err(),
            ScenarioError::Parse { line: 3, .. }
        ));
        assert!(parse("events {\n 1 rekey\n").is_err());
    }

    #[test]
    fn rejects_unknown_params_and_ops() {
        assert!(parse("params {\n  color = blue\n}\n").is_err());
        assert!(parse("events {\n  1 teleport M1\n}\n").is_err());
        assert!(parse("params {\n  backend = rsa\n}\n").is_err());
    }
}
