//! Hierarchical device-type filters.
//!
//! A filter names a subtree of the three-level device-type hierarchy with a
//! 4-bit, 4-bit, 6-bit triple. Level value 0 is a wildcard, and a wildcard at
//! one level forces wildcards at every deeper level, so a filter is always a
//! prefix: (a, b, c), (a, b, 0), (a, 0, 0), or (0, 0, 0). Concrete device
//! types are triples with no wildcard.
//!
//! Human-readable names resolve through [`TypeRegistry`], a line-based text
//! table shipped with the crate and overridable per scenario.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Built-in name table. Category entries carry trailing wildcard zeros; leaf
/// entries are concrete and usable as scenario device types.
const BUILTIN_REGISTRY: &str = include_str!("device_types.txt");

const LEVEL1_MAX: u8 = 0xF;
const LEVEL2_MAX: u8 = 0xF;
const LEVEL3_MAX: u8 = 0x3F;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("level {level} value {value} exceeds {max}")]
    LevelOutOfRange { level: u8, value: u8, max: u8 },
    #[error("wildcard at level {wildcard} requires wildcards below, but level {set} is {value}")]
    WildcardDiscipline { wildcard: u8, set: u8, value: u8 },
    #[error("encoded filter {0:#06x} exceeds 14 bits")]
    CodeTooWide(u16),
    #[error("device type must be concrete, {0} has wildcards")]
    NotConcrete(DeviceTypeFilter),
    #[error("unknown device type name `{0}`")]
    UnknownName(String),
    #[error("registry line {line}: {msg}")]
    RegistrySyntax { line: usize, msg: String },
    #[error("registry line {line}: duplicate name `{name}`")]
    RegistryDuplicate { line: usize, name: String },
}

/// Filter triple; `0` is a wildcard and wildcards are suffix-closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceTypeFilter {
    level1: u8,
    level2: u8,
    level3: u8,
}

impl DeviceTypeFilter {
    /// Matches every device type.
    pub const WILDCARD: DeviceTypeFilter = DeviceTypeFilter { level1: 0, level2: 0, level3: 0 };

    pub fn new(level1: u8, level2: u8, level3: u8) -> Result<Self, FilterError> {
        for (level, value, max) in [(1, level1, LEVEL1_MAX), (2, level2, LEVEL2_MAX), (3, level3, LEVEL3_MAX)] {
            if value > max {
                return Err(FilterError::LevelOutOfRange { level, value, max });
            }
        }
        let levels = [level1, level2, level3];
        if let Some(i) = levels.iter().position(|&v| v == 0) {
            for (j, &value) in levels.iter().enumerate().skip(i + 1) {
                if value != 0 {
                    return Err(FilterError::WildcardDiscipline {
                        wildcard: i as u8 + 1,
                        set: j as u8 + 1,
                        value,
                    });
                }
            }
        }
        Ok(DeviceTypeFilter { level1, level2, level3 })
    }

    #[must_use]
    pub const fn levels(self) -> (u8, u8, u8) {
        (self.level1, self.level2, self.level3)
    }

    /// True if no level is a wildcard.
    #[must_use]
    pub const fn is_concrete(self) -> bool {
        self.level1 != 0 && self.level2 != 0 && self.level3 != 0
    }

    /// Packs into 14 bits: level1 in bits 13..10, level2 in bits 9..6,
    /// level3 in bits 5..0.
    #[must_use]
    pub const fn encode(self) -> u16 {
        ((self.level1 as u16) << 10) | ((self.level2 as u16) << 6) | self.level3 as u16
    }

    /// Inverse of [`encode`](Self::encode); rejects values over 14 bits and
    /// triples violating the wildcard discipline.
    pub fn decode(code: u16) -> Result<Self, FilterError> {
        if code > 0x3FFF {
            return Err(FilterError::CodeTooWide(code));
        }
        DeviceTypeFilter::new((code >> 10) as u8 & 0xF, (code >> 6) as u8 & 0xF, code as u8 & 0x3F)
    }

    /// Subtree membership: every non-wildcard level must equal the device's.
    #[must_use]
    pub fn matches(self, device: &DeviceType) -> bool {
        let (d1, d2, d3) = device.0.levels();
        (self.level1 == 0 || self.level1 == d1)
            && (self.level2 == 0 || self.level2 == d2)
            && (self.level3 == 0 || self.level3 == d3)
    }
}

impl fmt::Display for DeviceTypeFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.level1, self.level2, self.level3)
    }
}

/// Concrete device type: a filter triple with no wildcards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceType(DeviceTypeFilter);

impl DeviceType {
    pub fn new(level1: u8, level2: u8, level3: u8) -> Result<Self, FilterError> {
        let filter = DeviceTypeFilter::new(level1, level2, level3)?;
        if !filter.is_concrete() {
            return Err(FilterError::NotConcrete(filter));
        }
        Ok(DeviceType(filter))
    }

    #[must_use]
    pub const fn levels(self) -> (u8, u8, u8) {
        self.0.levels()
    }

    /// The exact-match filter for this type.
    #[must_use]
    pub const fn as_filter(self) -> DeviceTypeFilter {
        self.0
    }
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Name table mapping registry names to filter triples.
///
/// File format: one `NAME = l1.l2.l3` entry per line, decimal levels,
/// `#` starts a comment, blank lines ignored.
#[derive(Debug, Clone)]
pub struct TypeRegistry {
    entries: BTreeMap<String, DeviceTypeFilter>,
}

impl TypeRegistry {
    /// The registry shipped with the crate.
    #[must_use]
    pub fn builtin() -> Self {
        TypeRegistry::parse(BUILTIN_REGISTRY).expect("built-in registry parses")
    }

    pub fn parse(text: &str) -> Result<Self, FilterError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (name, triple) = stripped.split_once('=').ok_or_else(|| FilterError::RegistrySyntax {
                line,
                msg: format!("expected `NAME = l1.l2.l3`, got `{stripped}`"),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(FilterError::RegistrySyntax { line, msg: "empty name".into() });
            }
            let mut parts = triple.trim().split('.');
            let mut next_level = |what: &str| -> Result<u8, FilterError> {
                parts
                    .next()
                    .ok_or(())
                    .and_then(|p| p.trim().parse::<u8>().map_err(|_| ()))
                    .map_err(|_| FilterError::RegistrySyntax {
                        line,
                        msg: format!("bad {what} in `{}`", triple.trim()),
                    })
            };
            let l1 = next_level("level1")?;
            let l2 = next_level("level2")?;
            let l3 = next_level("level3")?;
            if parts.next().is_some() {
                return Err(FilterError::RegistrySyntax { line, msg: "more than three levels".into() });
            }
            let filter = DeviceTypeFilter::new(l1, l2, l3).map_err(|e| FilterError::RegistrySyntax {
                line,
                msg: e.to_string(),
            })?;
            if entries.insert(name.clone(), filter).is_some() {
                return Err(FilterError::RegistryDuplicate { line, name });
            }
        }
        Ok(TypeRegistry { entries })
    }

    /// Filter for `name`; category names resolve to wildcard-bearing filters.
    pub fn filter(&self, name: &str) -> Result<DeviceTypeFilter, FilterError> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| FilterError::UnknownName(name.to_string()))
    }

    /// Concrete type for `name`; errors if the entry carries wildcards.
    pub fn concrete(&self, name: &str) -> Result<DeviceType, FilterError> {
        let filter = self.filter(name)?;
        if !filter.is_concrete() {
            return Err(FilterError::NotConcrete(filter));
        }
        let (l1, l2, l3) = filter.levels();
        DeviceType::new(l1, l2, l3)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
