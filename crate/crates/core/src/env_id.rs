//! Environment naming grammar and registry.
//!
//! An environment name is a fixed-width token sequence followed by a free-form
//! scenario tag and a version suffix:
//!
//! ```text
//! Hete Comm Coop PO Urban [Mgoal ...] MA <usid> -v<version>
//! ```
//!
//! Every token class has a fixed width, so the parse is a single left-to-right
//! scan with no backtracking.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::pomg::EnvSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvIdError {
    #[error("unknown token at offset {position}: expected {expected}")]
    UnknownToken { position: usize, expected: TokenClass },
    #[error("missing \"-v<digits>\" version suffix")]
    MissingVersion,
    #[error("empty unique scenario id")]
    EmptyUsid,
    #[error("invalid unique scenario id {0:?}: must be alphanumeric")]
    InvalidUsid(String),
    #[error("environment id {0:?} is already registered")]
    DuplicateId(String),
    #[error("environment id {0:?} is not registered")]
    NotRegistered(String),
}

impl EnvIdError {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::UnknownToken { .. } => "UnknownToken",
            Self::MissingVersion => "MissingVersion",
            Self::EmptyUsid => "EmptyUsid",
            Self::InvalidUsid(_) => "InvalidUsid",
            Self::DuplicateId(_) => "DuplicateId",
            Self::NotRegistered(_) => "NotRegistered",
        }
    }
}

/// Token classes of the grammar, in parse order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenClass {
    AgentNature,
    CommNature,
    TaskNature,
    Observability,
    MapType,
    FlagOrMultiplicity,
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::AgentNature => "agent nature (Hete|Homo)",
            Self::CommNature => "communication nature (Comm|Ncom)",
            Self::TaskNature => "task nature (Inde|Coop|Comp|Mixd)",
            Self::Observability => "observability (PO|FO)",
            Self::MapType => "map type (Bridg|Freew|Hiway|Intrx|Intst|Rural|Tunnl|Urban)",
            Self::FlagOrMultiplicity => "flag (Advrs|Async|Mgoal|Synch) or multiplicity (MA|SA)",
        };
        f.write_str(s)
    }
}

/// Fixed-width token enums share this shape: a table of (variant, literal).
macro_rules! token_enum {
    ($name:ident, $width:expr, { $($variant:ident => $lit:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const WIDTH: usize = $width;
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $lit),+ }
            }

            fn from_token(tok: &str) -> Option<Self> {
                match tok { $($lit => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::from_token(s).ok_or_else(|| format!("unknown {} {:?}", stringify!($name), s))
            }
        }
    };
}

token_enum!(AgentNature, 4, { Hete => "Hete", Homo => "Homo" });
token_enum!(CommNature, 4, { Comm => "Comm", Ncom => "Ncom" });
token_enum!(TaskNature, 4, { Inde => "Inde", Coop => "Coop", Comp => "Comp", Mixd => "Mixd" });
token_enum!(Observability, 2, { PO => "PO", FO => "FO" });
token_enum!(MapType, 5, {
    Bridg => "Bridg", Freew => "Freew", Hiway => "Hiway", Intrx => "Intrx",
    Intst => "Intst", Rural => "Rural", Tunnl => "Tunnl", Urban => "Urban",
});
// Declaration order is the canonical flag order.
token_enum!(EnvFlag, 5, { Advrs => "Advrs", Async => "Async", Mgoal => "Mgoal", Synch => "Synch" });
token_enum!(Multiplicity, 2, { MA => "MA", SA => "SA" });

/// Parsed attributes of an environment name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvId {
    pub agent_nature: AgentNature,
    pub comm_nature: CommNature,
    pub task_nature: TaskNature,
    pub observability: Observability,
    pub map_type: MapType,
    /// Strictly increasing in canonical order.
    pub flags: Vec<EnvFlag>,
    pub multiplicity: Multiplicity,
    pub usid: String,
    pub version: u64,
}

impl EnvId {
    /// Builds an id, normalizing flags to canonical order and validating the usid.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        agent_nature: AgentNature,
        comm_nature: CommNature,
        task_nature: TaskNature,
        observability: Observability,
        map_type: MapType,
        flags: impl IntoIterator<Item = EnvFlag>,
        multiplicity: Multiplicity,
        usid: impl Into<String>,
        version: u64,
    ) -> Result<Self, EnvIdError> {
        let mut flags: Vec<EnvFlag> = flags.into_iter().collect();
        flags.sort();
        flags.dedup();
        let usid = usid.into();
        validate_usid(&usid)?;
        Ok(Self { agent_nature, comm_nature, task_nature, observability, map_type, flags, multiplicity, usid, version })
    }

    pub fn has_flag(&self, flag: EnvFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn canonical(&self) -> String {
        format_env_id(self)
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_env_id(self))
    }
}

impl FromStr for EnvId {
    type Err = EnvIdError;
    fn from_str(s: &str) -> Result<Self, EnvIdError> {
        parse_env_id(s)
    }
}

fn validate_usid(usid: &str) -> Result<(), EnvIdError> {
    if usid.is_empty() {
        return Err(EnvIdError::EmptyUsid);
    }
    if !usid.bytes().all(|b| b.is_ascii_alphanumeric()) {
        return Err(EnvIdError::InvalidUsid(usid.to_string()));
    }
    Ok(())
}

fn take(s: &str, pos: usize, width: usize) -> Option<&str> {
    s.get(pos..pos + width)
}

fn expect<T>(
    s: &str,
    pos: &mut usize,
    width: usize,
    class: TokenClass,
    lookup: impl Fn(&str) -> Option<T>,
) -> Result<T, EnvIdError> {
    let tok =
        take(s, *pos, width).and_then(lookup).ok_or(EnvIdError::UnknownToken { position: *pos, expected: class })?;
    *pos += width;
    Ok(tok)
}

/// Parses an environment name such as `HomoNcomIndePOIntrxMASS3CTwn3-v0`.
pub fn parse_env_id(id: &str) -> Result<EnvId, EnvIdError> {
    if !id.is_ascii() {
        return Err(EnvIdError::UnknownToken { position: 0, expected: TokenClass::AgentNature });
    }
    let mut pos = 0;
    let agent_nature = expect(id, &mut pos, 4, TokenClass::AgentNature, AgentNature::from_token)?;
    let comm_nature = expect(id, &mut pos, 4, TokenClass::CommNature, CommNature::from_token)?;
    let task_nature = expect(id, &mut pos, 4, TokenClass::TaskNature, TaskNature::from_token)?;
    let observability = expect(id, &mut pos, 2, TokenClass::Observability, Observability::from_token)?;
    let map_type = expect(id, &mut pos, 5, TokenClass::MapType, MapType::from_token)?;

    let mut flags: Vec<EnvFlag> = Vec::new();
    let multiplicity = loop {
        if let Some(m) = take(id, pos, 2).and_then(Multiplicity::from_token) {
            pos += 2;
            break m;
        }
        match take(id, pos, 5).and_then(EnvFlag::from_token) {
            // flags must appear strictly increasing in canonical order
            Some(flag) if flags.last().is_none_or(|last| *last < flag) => {
                flags.push(flag);
                pos += 5;
            }
            _ => return Err(EnvIdError::UnknownToken { position: pos, expected: TokenClass::FlagOrMultiplicity }),
        }
    };

    let rest = &id[pos..];
    let split = rest.rfind("-v").ok_or(EnvIdError::MissingVersion)?;
    let (usid, version) = (&rest[..split], &rest[split + 2..]);
    if version.is_empty() || !version.bytes().all(|b| b.is_ascii_digit()) {
        return Err(EnvIdError::MissingVersion);
    }
    let version: u64 = version.parse().map_err(|_| EnvIdError::MissingVersion)?;
    validate_usid(usid)?;

    Ok(EnvId {
        agent_nature,
        comm_nature,
        task_nature,
        observability,
        map_type,
        flags,
        multiplicity,
        usid: usid.to_string(),
        version,
    })
}

/// Emits the canonical name in grammar order, ending with `-v<version>`.
pub fn format_env_id(id: &EnvId) -> String {
    let mut out = String::with_capacity(32 + id.usid.len());
    out.push_str(id.agent_nature.as_str());
    out.push_str(id.comm_nature.as_str());
    out.push_str(id.task_nature.as_str());
    out.push_str(id.observability.as_str());
    out.push_str(id.map_type.as_str());
    for flag in &id.flags {
        out.push_str(flag.as_str());
    }
    out.push_str(id.multiplicity.as_str());
    out.push_str(&id.usid);
    out.push_str("-v");
    out.push_str(&id.version.to_string());
    out
}

/// Partial predicate over [`EnvId`] attributes. Unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnvFilter {
    pub agent_nature: Option<AgentNature>,
    pub comm_nature: Option<CommNature>,
    pub task_nature: Option<TaskNature>,
    pub observability: Option<Observability>,
    pub map_type: Option<MapType>,
    /// Every listed flag must be present.
    pub flags: Vec<EnvFlag>,
    pub multiplicity: Option<Multiplicity>,
    pub usid: Option<String>,
    pub version: Option<u64>,
}

impl EnvFilter {
    pub fn matches(&self, id: &EnvId) -> bool {
        fn ok<T: PartialEq>(want: &Option<T>, got: &T) -> bool {
            want.as_ref().is_none_or(|w| w == got)
        }
        ok(&self.agent_nature, &id.agent_nature)
            && ok(&self.comm_nature, &id.comm_nature)
            && ok(&self.task_nature, &id.task_nature)
            && ok(&self.observability, &id.observability)
            && ok(&self.map_type, &id.map_type)
            && self.flags.iter().all(|f| id.flags.contains(f))
            && ok(&self.multiplicity, &id.multiplicity)
            && ok(&self.usid, &id.usid)
            && ok(&self.version, &id.version)
    }

    /// Applies one `key=value` clause, as accepted by `list-envs --filter`.
    pub fn apply(&mut self, clause: &str) -> Result<(), String> {
        let (key, value) =
            clause.split_once('=').ok_or_else(|| format!("filter {clause:?} is not of the form key=value"))?;
        match key.trim() {
            "agent_nature" => self.agent_nature = Some(value.parse()?),
            "comm_nature" => self.comm_nature = Some(value.parse()?),
            "task_nature" => self.task_nature = Some(value.parse()?),
            "observability" => self.observability = Some(value.parse()?),
            "map_type" => self.map_type = Some(value.parse()?),
            "flag" | "flags" => self.flags.push(value.parse()?),
            "multiplicity" => self.multiplicity = Some(value.parse()?),
            "usid" => self.usid = Some(value.to_string()),
            "version" => self.version = Some(value.parse().map_err(|e| format!("bad version: {e}"))?),
            other => return Err(format!("unknown filter key {other:?}")),
        }
        Ok(())
    }
}

/// Binds canonical environment names to environment specifications.
#[derive(Debug, Clone, Default)]
pub struct EnvRegistry {
    entries: BTreeMap<String, (EnvId, EnvSpec)>,
}

impl EnvRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn register(&mut self, id: EnvId, spec: EnvSpec) -> Result<(), EnvIdError> {
        let key = format_env_id(&id);
        if self.entries.contains_key(&key) {
            return Err(EnvIdError::DuplicateId(key));
        }
        self.entries.insert(key, (id, spec));
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&EnvSpec> {
        self.entries.get(name).map(|(_, spec)| spec)
    }

    /// Parses `name` and looks it up, distinguishing grammar errors from misses.
    pub fn resolve(&self, name: &str) -> Result<(EnvId, &EnvSpec), EnvIdError> {
        let id = parse_env_id(name)?;
        let spec = self.lookup(&format_env_id(&id)).ok_or_else(|| EnvIdError::NotRegistered(name.to_string()))?;
        Ok((id, spec))
    }

    /// Canonical names matching `filter`, sorted lexicographically.
    pub fn list(&self, filter: &EnvFilter) -> Vec<String> {
        // BTreeMap iteration is already in key order
        self.entries.iter().filter(|(_, (id, _))| filter.matches(id)).map(|(k, _)| k.clone()).collect()
    }
}

pub fn list_envs(registry: &EnvRegistry, filter: &EnvFilter) -> Vec<String> {
    registry.list(filter)
}
