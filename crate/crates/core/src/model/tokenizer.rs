use std::collections::HashMap;

/// Character-level vocabulary. Id 0 is padding, id 1 is unknown.
#[derive(Debug, Clone)]
pub struct CharTokenizer {
    chars: Vec<char>,
    index: HashMap<char, u32>,
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const EXTRA_CHARS: &str = "àâäçéèêëîïôöùûüÿœæÀÂÄÇÉÈÊËÎÏÔÖÙÛÜŸŒÆíο«»’";

impl Default for CharTokenizer {
    fn default() -> Self {
        Self::from_alphabet((' '..='~').chain(EXTRA_CHARS.chars()))
    }
}

impl CharTokenizer {
    /// Build from an alphabet; duplicates keep their first position.
    pub fn from_alphabet(alphabet: impl IntoIterator<Item = char>) -> Self {
        let mut chars = Vec::new();
        let mut index = HashMap::new();
        for c in alphabet {
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(c) {
                e.insert(chars.len() as u32 + 2);
                chars.push(c);
            }
        }
        Self { chars, index }
    }

    pub fn vocab_size(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn encode(&self, s: &str) -> Vec<u32> {
        s.chars()
            .map(|c| self.index.get(&c).copied().unwrap_or(UNK_ID))
            .collect()
    }

    /// Padding is dropped; unknown ids decode to U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != PAD_ID)
            .map(|&id| {
                id.checked_sub(2)
                    .and_then(|i| self.chars.get(i as usize))
                    .copied()
                    .unwrap_or('\u{FFFD}')
            })
            .collect()
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }
}
