//! The 78-type semantic vocabulary.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const NUM_TYPES: usize = 78;

/// Canonical type names, lowercase and space separated. The index into this
/// table is the type id used by every model.
pub const TYPE_NAMES: [&str; NUM_TYPES] = [
    "address",
    "affiliate",
    "affiliation",
    "age",
    "album",
    "area",
    "artist",
    "birth date",
    "birth place",
    "brand",
    "capacity",
    "category",
    "city",
    "class",
    "classification",
    "club",
    "code",
    "collection",
    "command",
    "company",
    "component",
    "continent",
    "country",
    "county",
    "creator",
    "credit",
    "currency",
    "day",
    "depth",
    "description",
    "director",
    "duration",
    "education",
    "elevation",
    "family",
    "file size",
    "format",
    "gender",
    "genre",
    "grades",
    "industry",
    "isbn",
    "jockey",
    "language",
    "location",
    "manufacturer",
    "name",
    "nationality",
    "notes",
    "operator",
    "order",
    "organisation",
    "origin",
    "owner",
    "person",
    "plays",
    "position",
    "product",
    "publisher",
    "range",
    "rank",
    "ranking",
    "region",
    "religion",
    "requirement",
    "result",
    "sales",
    "service",
    "sex",
    "species",
    "state",
    "status",
    "symbol",
    "team",
    "team name",
    "type",
    "weight",
    "year",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemanticType(u8);

impl SemanticType {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < NUM_TYPES).then_some(SemanticType(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        TYPE_NAMES[self.index()]
    }

    /// Looks up a type by its canonical name (exact, case-sensitive).
    pub fn from_name(name: &str) -> Result<Self> {
        TYPE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| SemanticType(i as u8))
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn all() -> impl Iterator<Item = SemanticType> {
        (0..NUM_TYPES as u8).map(SemanticType)
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for SemanticType {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SemanticType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        SemanticType::from_name(&name).map_err(serde::de::Error::custom)
    }
}

/// Outcome of classifying one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Type(SemanticType),
    /// A matching model found no evidence for any type.
    Abstain,
    /// A probabilistic model's confidence fell below the rejection threshold.
    Rejected,
}

impl Prediction {
    pub fn semantic_type(self) -> Option<SemanticType> {
        match self {
            Prediction::Type(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Type(t) => t.fmt(f),
            Prediction::Abstain => f.write_str("<abstain>"),
            Prediction::Rejected => f.write_str("<rejected>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabulary_has_78_distinct_sorted_names() {
        let set: HashSet<_> = TYPE_NAMES.iter().collect();
        assert_eq!(set.len(), 78);
        let mut sorted = TYPE_NAMES.to_vec();
        sorted.sort();
        assert_eq!(sorted, TYPE_NAMES.to_vec());
        assert!(TYPE_NAMES.iter().all(|n| *n == n.to_lowercase()));
    }

    #[test]
    fn name_round_trip() {
        for t in SemanticType::all() {
            assert_eq!(SemanticType::from_name(t.name()).unwrap(), t);
        }
        assert!(SemanticType::from_name("City").is_err());
        assert!(SemanticType::from_index(78).is_none());
    }
}
