use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Visually similar replacements per character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, Vec<String>>",
    into = "BTreeMap<String, Vec<String>>"
)]
pub struct CharConfusionTable {
    map: BTreeMap<char, Vec<char>>,
}

const DEFAULT_TABLE: &[(char, &str)] = &[
    ('a', "àoe"),
    ('b', "h6"),
    ('c', "eo"),
    ('d', "oa"),
    ('e', "coé"),
    ('f', "t"),
    ('g', "q9"),
    ('h', "bn"),
    ('i', "1lí"),
    ('j', "i"),
    ('k', "h"),
    ('l', "1i"),
    ('m', "n"),
    ('n', "mu"),
    ('o', "0οuc"),
    ('p', "q"),
    ('q', "g9"),
    ('r', "n"),
    ('s', "5z"),
    ('t', "fl"),
    ('u', "vn"),
    ('v', "uy"),
    ('w', "v"),
    ('x', "k"),
    ('y', "v"),
    ('z', "2s"),
    ('A', "4"),
    ('B', "8R"),
    ('C', "G("),
    ('D', "O0"),
    ('E', "F3"),
    ('F', "EP"),
    ('G', "C6"),
    ('H', "N"),
    ('I', "1l"),
    ('J', "I"),
    ('K', "X"),
    ('L', "I1"),
    ('M', "N"),
    ('N', "MH"),
    ('O', "0Q"),
    ('P', "F"),
    ('Q', "O"),
    ('R', "PK"),
    ('S', "5"),
    ('T', "7I"),
    ('U', "VO"),
    ('V', "U"),
    ('W', "V"),
    ('X', "K"),
    ('Y', "V"),
    ('Z', "2"),
    // accented letters common in French text
    ('à', "a"),
    ('â', "a"),
    ('ç', "c"),
    ('é', "e"),
    ('è', "e"),
    ('ê', "e"),
    ('ë', "e"),
    ('î', "i"),
    ('ï', "i"),
    ('ô', "o"),
    ('ù', "u"),
    ('û', "u"),
    ('ü', "u"),
];

impl Default for CharConfusionTable {
    fn default() -> Self {
        let map = DEFAULT_TABLE
            .iter()
            .map(|&(c, subs)| (c, subs.chars().collect()))
            .collect();
        Self { map }
    }
}

impl CharConfusionTable {
    pub fn new(map: BTreeMap<char, Vec<char>>) -> Result<Self> {
        for (c, subs) in &map {
            if subs.is_empty() {
                return Err(Error::Config(format!(
                    "confusion entry {c:?} has no replacements"
                )));
            }
            if subs.contains(c) {
                return Err(Error::Config(format!(
                    "confusion entry {c:?} maps to itself"
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn replacements(&self, c: char) -> &[char] {
        self.map.get(&c).map_or(&[], Vec::as_slice)
    }

    /// True when every ASCII letter has at least one replacement.
    pub fn covers_ascii_letters(&self) -> bool {
        ('a'..='z')
            .chain('A'..='Z')
            .all(|c| !self.replacements(c).is_empty())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for CharConfusionTable {
    type Error = Error;

    fn try_from(raw: BTreeMap<String, Vec<String>>) -> Result<Self> {
        fn single(s: &str) -> Result<char> {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::Config(format!(
                    "confusion table keys and values must be single characters, got {s:?}"
                ))),
            }
        }
        let mut map = BTreeMap::new();
        for (k, vs) in raw {
            let subs = vs.iter().map(|v| single(v)).collect::<Result<Vec<_>>>()?;
            map.insert(single(&k)?, subs);
        }
        Self::new(map)
    }
}

impl From<CharConfusionTable> for BTreeMap<String, Vec<String>> {
    fn from(t: CharConfusionTable) -> Self {
        t.map
            .into_iter()
            .map(|(k, vs)| (k.to_string(), vs.into_iter().map(String::from).collect()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_is_total_and_never_identity() {
        let t = CharConfusionTable::default();
        assert!(t.covers_ascii_letters());
        for &(c, _) in DEFAULT_TABLE {
            assert!(!t.replacements(c).contains(&c));
        }
        assert!(t.replacements('i').contains(&'1'));
        assert!(t.replacements('o').contains(&'0'));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let t = CharConfusionTable::default();
        let json = serde_json::to_string(&t).unwrap();
        let back: CharConfusionTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);

        assert!(serde_json::from_str::<CharConfusionTable>(r#"{"a":["a"]}"#).is_err());
        assert!(serde_json::from_str::<CharConfusionTable>(r#"{"ab":["c"]}"#).is_err());
        assert!(serde_json::from_str::<CharConfusionTable>(r#"{"a":["cd"]}"#).is_err());
        let ok: CharConfusionTable = serde_json::from_str(r#"{"a":["4","o"]}"#).unwrap();
        assert_eq!(ok.replacements('a'), &['4', 'o']);
        assert!(!ok.covers_ascii_letters());
    }
}
