//! Host-side catalog of virtual objects and the targets they render.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weight::WeightTarget;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("catalog entry `{0}`: object id must be non-empty printable ASCII without whitespace")]
    BadId(String),
    #[error("catalog entry `{id}`: {field} must be non-negative and finite, got {value}")]
    BadValue {
        id: String,
        field: &'static str,
        value: f64,
    },
    #[error("catalog entry `{0}` is defined twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub id: String,
    /// g
    pub mass: f64,
    /// mm from the grip
    pub com_offset: f64,
    /// g/s lost while spraying; 0 for rigid objects.
    #[serde(default)]
    pub drain_rate: f64,
}

impl CatalogEntry {
    pub fn new(id: &str, mass: f64, com_offset: f64, drain_rate: f64) -> Self {
        Self {
            id: id.to_string(),
            mass,
            com_offset,
            drain_rate,
        }
    }

    pub fn target(&self) -> WeightTarget {
        WeightTarget::new(self.mass, self.com_offset)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.id.is_empty() || !self.id.bytes().all(|b| b.is_ascii_graphic()) {
            return Err(CatalogError::BadId(self.id.clone()));
        }
        for (field, value) in [("mass", self.mass), ("drain_rate", self.drain_rate)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CatalogError::BadValue {
                    id: self.id.clone(),
                    field,
                    value,
                });
            }
        }
        if !self.com_offset.is_finite() {
            return Err(CatalogError::BadValue {
                id: self.id.clone(),
                field: "com_offset",
                value: self.com_offset,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    pub fn from_entries(entries: impl IntoIterator<Item = CatalogEntry>) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for e in entries {
            e.validate()?;
            if map.contains_key(&e.id) {
                return Err(CatalogError::Duplicate(e.id));
            }
            map.insert(e.id.clone(), e);
        }
        Ok(Self { entries: map })
    }

    /// Stones, a far-weighted sword and a draining water gun. These numbers
    /// are configuration, not measurements.
    pub fn builtin() -> Self {
        Self::from_entries([
            CatalogEntry::new("ball_stone", 20.0, 30.0, 0.0),
            CatalogEntry::new("square_stone", 50.0, 30.0, 0.0),
            CatalogEntry::new("sword", 40.0, 110.0, 0.0),
            CatalogEntry::new("water_gun", 50.0, 60.0, 10.0),
        ])
        .expect("built-in catalog is valid")
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lookup() {
        let c = Catalog::builtin();
        assert_eq!(c.get("sword").unwrap().target(), WeightTarget::new(40.0, 110.0));
        assert_eq!(c.get("water_gun").unwrap().drain_rate, 10.0);
        assert!(c.get("axe").is_none());
        assert_eq!(c.iter().count(), 4);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(Catalog::from_entries([CatalogEntry::new("a b", 1.0, 0.0, 0.0)]).is_err());
        assert!(Catalog::from_entries([CatalogEntry::new("a", -1.0, 0.0, 0.0)]).is_err());
        assert!(Catalog::from_entries([CatalogEntry::new("a", 1.0, 0.0, -2.0)]).is_err());
        assert!(Catalog::from_entries([
            CatalogEntry::new("a", 1.0, 0.0, 0.0),
            CatalogEntry::new("a", 2.0, 0.0, 0.0)
        ])
        .is_err());
    }
}
