//! Meter-board security model: password-gated operator levels, the
//! standard security tables, write-only table semantics, and the cleartext
//! internals a physical attacker can dump.
//!
//! Table roles: 42 holds the five level passwords, 43 the default access
//! rule, 44 per-table overrides, 45 the encryption/authentication keys,
//! 46 host access records. An extended application-key area is modeled
//! without a numeric id. Externally, reads of 42/45/46 always return empty
//! values; everything in the board itself is stored cleartext, and key
//! material that crosses the board-to-board serial link is logged there in
//! the clear.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub const TABLE_SECURITY: u16 = 42;
pub const TABLE_DEFAULT_ACCESS: u16 = 43;
pub const TABLE_ACCESS_OVERRIDES: u16 = 44;
pub const TABLE_KEYS: u16 = 45;
pub const TABLE_HOST_ACCESS: u16 = 46;

/// Factory default password for every level above L0.
pub const DEFAULT_PASSWORD: &str = "00000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    L0,
    L1,
    L2,
    L3,
    L4,
    L5,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::L0,
        Level::L1,
        Level::L2,
        Level::L3,
        Level::L4,
        Level::L5,
    ];

    pub fn index(self) -> usize {
        match self {
            Level::L0 => 0,
            Level::L1 => 1,
            Level::L2 => 2,
            Level::L3 => 3,
            Level::L4 => 4,
            Level::L5 => 5,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Optical,
    Wireless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ReadBasic,
    ReadMeter,
    DemandReset,
    SetDatetime,
    SetTou,
    Program,
    ConfigureDevice,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::ReadBasic,
        Command::ReadMeter,
        Command::DemandReset,
        Command::SetDatetime,
        Command::SetTou,
        Command::Program,
        Command::ConfigureDevice,
    ];

    pub fn required_level(self) -> Level {
        match self {
            Command::ReadBasic => Level::L0,
            Command::ReadMeter => Level::L1,
            Command::DemandReset => Level::L2,
            Command::SetDatetime | Command::SetTou => Level::L3,
            Command::Program => Level::L4,
            Command::ConfigureDevice => Level::L5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::ReadBasic => "read_basic",
            Command::ReadMeter => "read_meter",
            Command::DemandReset => "demand_reset",
            Command::SetDatetime => "set_datetime",
            Command::SetTou => "set_tou",
            Command::Program => "program",
            Command::ConfigureDevice => "configure_device",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeterError {
    #[error("bad password for level {0:?}")]
    BadPassword(Level),
    #[error("denied: requires level {required:?}")]
    Denied { required: Level },
    #[error("no physical access granted")]
    NoPhysicalAccess,
    #[error("unknown table {0}")]
    UnknownTable(u16),
    #[error("malformed table payload")]
    BadFormat,
}

/// An authenticated operator connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorSession {
    pub level: Level,
    pub transport: Transport,
    pub authenticated: bool,
}

/// (read, write) level requirement for a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRule {
    pub read: Level,
    pub write: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostAccessRecord {
    pub auth_key: [u8; 16],
    pub enc_key: [u8; 16],
    pub permissions: AccessRule,
}

#[derive(Debug, Clone)]
pub struct MeterSecurityTables {
    /// Level passwords L1..L5, cleartext.
    pub passwords: [String; 5],
    pub default_access: AccessRule,
    pub overrides: BTreeMap<u16, AccessRule>,
    /// Table 45: communication keys, cleartext.
    pub keys: Vec<[u8; 16]>,
    pub host_access: Vec<HostAccessRecord>,
    /// Application keys; the extended area has no numeric table id.
    pub extended_keys: Vec<Vec<u8>>,
    /// Ordinary data tables (register contents, configuration).
    pub data_tables: BTreeMap<u16, Vec<u8>>,
}

impl Default for MeterSecurityTables {
    fn default() -> Self {
        let default_pw = || DEFAULT_PASSWORD.to_string();
        let mut data_tables = BTreeMap::new();
        data_tables.insert(1, b"manufacturer=GKM-SIM model=SM100".to_vec());
        data_tables.insert(23, b"register kwh=000000.0".to_vec());
        let mut overrides = BTreeMap::new();
        // Current register data is world-readable.
        overrides.insert(
            23,
            AccessRule {
                read: Level::L0,
                write: Level::L4,
            },
        );
        MeterSecurityTables {
            passwords: [default_pw(), default_pw(), default_pw(), default_pw(), default_pw()],
            default_access: AccessRule {
                read: Level::L1,
                write: Level::L5,
            },
            overrides,
            keys: Vec::new(),
            host_access: Vec::new(),
            extended_keys: Vec::new(),
            data_tables,
        }
    }
}

fn is_protected(table_id: u16) -> bool {
    matches!(table_id, TABLE_SECURITY | TABLE_KEYS | TABLE_HOST_ACCESS)
}

/// Parse `read=Ln write=Ln`.
fn parse_rule(text: &str) -> Option<AccessRule> {
    let mut read = None;
    let mut write = None;
    for tok in text.split_whitespace() {
        let (key, value) = tok.split_once('=')?;
        let level = Level::from_index(value.strip_prefix('L')?.parse().ok()?)?;
        match key {
            "read" => read = Some(level),
            "write" => write = Some(level),
            _ => return None,
        }
    }
    Some(AccessRule {
        read: read?,
        write: write?,
    })
}

/// The meter board: security tables plus the serial link to the
/// communication board.
#[derive(Debug, Clone, Default)]
pub struct MeterBoard {
    pub tables: MeterSecurityTables,
    serial_log: Vec<u8>,
}

impl MeterBoard {
    pub fn new() -> MeterBoard {
        MeterBoard::default()
    }

    /// Start an operator session. L0 needs no password; L1..L5 check
    /// against table 42.
    pub fn login(
        &self,
        level: Level,
        password: Option<&str>,
        transport: Transport,
    ) -> Result<OperatorSession, MeterError> {
        if level == Level::L0 {
            return Ok(OperatorSession {
                level,
                transport,
                authenticated: false,
            });
        }
        let stored = &self.tables.passwords[level.index() - 1];
        match password {
            Some(p) if p == stored => Ok(OperatorSession {
                level,
                transport,
                authenticated: true,
            }),
            _ => Err(MeterError::BadPassword(level)),
        }
    }

    /// Execute a command if the session's level dominates the command's
    /// required level.
    pub fn execute_command(
        &self,
        session: &OperatorSession,
        command: Command,
    ) -> Result<&'static str, MeterError> {
        let required = command.required_level();
        if session.level >= required {
            Ok(command.name())
        } else {
            Err(MeterError::Denied { required })
        }
    }

    fn rule_for(&self, table_id: u16) -> AccessRule {
        self.tables
            .overrides
            .get(&table_id)
            .copied()
            .unwrap_or(self.tables.default_access)
    }

    /// External table read. Protected tables (42, 45, 46) return empty
    /// values at every level; other tables apply the 43/44 rules.
    pub fn table_read(
        &self,
        session: &OperatorSession,
        table_id: u16,
    ) -> Result<Vec<u8>, MeterError> {
        if is_protected(table_id) {
            return Ok(Vec::new());
        }
        let rule = self.rule_for(table_id);
        if session.level < rule.read {
            return Err(MeterError::Denied {
                required: rule.read,
            });
        }
        match table_id {
            TABLE_DEFAULT_ACCESS => Ok(format!(
                "read=L{} write=L{}",
                self.tables.default_access.read.index(),
                self.tables.default_access.write.index()
            )
            .into_bytes()),
            TABLE_ACCESS_OVERRIDES => {
                let mut out = String::new();
                for (id, rule) in &self.tables.overrides {
                    out.push_str(&format!(
                        "{id}:read=L{} write=L{}\n",
                        rule.read.index(),
                        rule.write.index()
                    ));
                }
                Ok(out.into_bytes())
            }
            id => self
                .tables
                .data_tables
                .get(&id)
                .cloned()
                .ok_or(MeterError::UnknownTable(id)),
        }
    }

    /// External table write, gated by the 43/44 rules. Writing table 42
    /// rotates the level passwords (newline-separated, exactly five).
    pub fn table_write(
        &mut self,
        session: &OperatorSession,
        table_id: u16,
        values: &[u8],
    ) -> Result<(), MeterError> {
        let rule = self.rule_for(table_id);
        if session.level < rule.write {
            return Err(MeterError::Denied {
                required: rule.write,
            });
        }
        match table_id {
            TABLE_SECURITY => {
                let text = std::str::from_utf8(values).map_err(|_| MeterError::BadFormat)?;
                let parts: Vec<&str> = text.split('\n').collect();
                if parts.len() != 5 {
                    return Err(MeterError::BadFormat);
                }
                for (slot, part) in self.tables.passwords.iter_mut().zip(parts) {
                    *slot = part.to_string();
                }
                Ok(())
            }
            TABLE_DEFAULT_ACCESS => {
                let text = std::str::from_utf8(values).map_err(|_| MeterError::BadFormat)?;
                self.tables.default_access = parse_rule(text).ok_or(MeterError::BadFormat)?;
                Ok(())
            }
            TABLE_ACCESS_OVERRIDES => {
                // One `<table>:read=Ln write=Ln` row per line, replacing the
                // whole override table (mirrors the read encoding).
                let text = std::str::from_utf8(values).map_err(|_| MeterError::BadFormat)?;
                let mut overrides = BTreeMap::new();
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let (id, rule) = line.split_once(':').ok_or(MeterError::BadFormat)?;
                    let id: u16 = id.trim().parse().map_err(|_| MeterError::BadFormat)?;
                    overrides.insert(id, parse_rule(rule).ok_or(MeterError::BadFormat)?);
                }
                self.tables.overrides = overrides;
                Ok(())
            }
            TABLE_KEYS => {
                if !values.len().is_multiple_of(16) {
                    return Err(MeterError::BadFormat);
                }
                self.tables.keys = values
                    .chunks_exact(16)
                    .map(|c| <[u8; 16]>::try_from(c).unwrap())
                    .collect();
                Ok(())
            }
            TABLE_HOST_ACCESS => {
                // auth_key(16) || enc_key(16) || read(1) || write(1) per record
                if !values.len().is_multiple_of(34) {
                    return Err(MeterError::BadFormat);
                }
                self.tables.host_access = values
                    .chunks_exact(34)
                    .map(|c| {
                        Ok(HostAccessRecord {
                            auth_key: c[..16].try_into().unwrap(),
                            enc_key: c[16..32].try_into().unwrap(),
                            permissions: AccessRule {
                                read: Level::from_index(c[32] as usize)
                                    .ok_or(MeterError::BadFormat)?,
                                write: Level::from_index(c[33] as usize)
                                    .ok_or(MeterError::BadFormat)?,
                            },
                        })
                    })
                    .collect::<Result<_, MeterError>>()?;
                Ok(())
            }
            id => {
                self.tables.data_tables.insert(id, values.to_vec());
                Ok(())
            }
        }
    }

    /// Record cleartext traffic crossing the board-to-board serial port.
    pub fn serial_transfer(&mut self, label: &str, payload: &[u8]) {
        self.serial_log.extend_from_slice(label.as_bytes());
        self.serial_log.push(b'=');
        self.serial_log.extend_from_slice(payload);
        self.serial_log.push(b'\n');
    }

    pub fn serial_log(&self) -> &[u8] {
        &self.serial_log
    }

    /// Physical-attack dump. `Memory` returns the true cleartext contents
    /// of the protected tables; `SerialBus` returns the captured
    /// board-to-board transcript. Requires the scenario to have granted
    /// physical access.
    pub fn physical_dump(
        &self,
        surface: DumpSurface,
        physical_access: bool,
    ) -> Result<Vec<u8>, MeterError> {
        if !physical_access {
            return Err(MeterError::NoPhysicalAccess);
        }
        match surface {
            DumpSurface::Memory => Ok(self.protected_contents().into_bytes()),
            DumpSurface::SerialBus => Ok(self.serial_log.clone()),
        }
    }

    fn protected_contents(&self) -> String {
        let mut out = String::new();
        out.push_str("table42:");
        out.push_str(&self.tables.passwords.join(","));
        out.push('\n');
        out.push_str("table45:");
        for k in &self.tables.keys {
            out.push_str(&hex::encode(k));
            out.push(',');
        }
        out.push('\n');
        out.push_str("table46:");
        for r in &self.tables.host_access {
            out.push_str(&hex::encode(r.auth_key));
            out.push('/');
            out.push_str(&hex::encode(r.enc_key));
            out.push(',');
        }
        out.push('\n');
        out.push_str("extended_keys:");
        for k in &self.tables.extended_keys {
            out.push_str(&hex::encode(k));
            out.push(',');
        }
        out.push('\n');
        out
    }

    /// Full board snapshot as structured text keyed by table id.
    pub fn snapshot(&self) -> String {
        let mut out = self.protected_contents();
        out.push_str(&format!(
            "table43:read=L{} write=L{}\n",
            self.tables.default_access.read.index(),
            self.tables.default_access.write.index()
        ));
        for (id, rule) in &self.tables.overrides {
            out.push_str(&format!(
                "table44:{id}:read=L{} write=L{}\n",
                rule.read.index(),
                rule.write.index()
            ));
        }
        for (id, data) in &self.tables.data_tables {
            out.push_str(&format!("table{id}:{}\n", String::from_utf8_lossy(data)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpSurface {
    Memory,
    SerialBus,
}
