use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Token selection applied during ingestion.
#[derive(Debug, Clone)]
pub struct TokenFilter {
    pub min_len: usize,
    pub lowercase: bool,
    /// Stand-in for part-of-speech selection: when set, only listed tokens survive.
    pub allowlist: Option<HashSet<String>>,
}

impl Default for TokenFilter {
    fn default() -> Self {
        Self {
            min_len: 4,
            lowercase: false,
            allowlist: None,
        }
    }
}

impl TokenFilter {
    /// Load an allowlist file, one token per line (blank lines ignored).
    pub fn with_allowlist_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.allowlist = Some(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        );
        Ok(self)
    }

    pub fn accepts(&self, token: &str) -> bool {
        token.chars().count() >= self.min_len
            && token.chars().all(char::is_alphabetic)
            && self.allowlist.as_ref().is_none_or(|a| a.contains(token))
    }
}

/// Split on whitespace and punctuation. Digits stay attached to their word,
/// so the filter can discard mixed tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

/// Unique filtered tokens over all files, in first-seen order.
pub fn ingest_corpus(paths: &[PathBuf], filter: &TokenFilter) -> Result<Vec<String>> {
    if paths.is_empty() {
        return Err(Error::Empty("no corpus files given".into()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for raw in tokenize(&text) {
            let tok = if filter.lowercase {
                raw.to_lowercase()
            } else {
                raw.to_string()
            };
            if filter.accepts(&tok) && seen.insert(tok.clone()) {
                out.push(tok);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(
            "corpus yielded no tokens after filtering".into(),
        ));
    }
    Ok(out)
}

const SYLLABLES: &[&str] = &[
    "ba", "be", "bi", "bon", "ca", "ce", "cha", "che", "co", "da", "de", "di", "don", "fa", "fe",
    "fi", "ga", "ge", "gou", "la", "le", "li", "lon", "ma", "me", "mi", "mon", "na", "ne", "ni",
    "pa", "pe", "pi", "pou", "qua", "que", "ra", "re", "ri", "ron", "sa", "se", "si", "son", "ta",
    "te", "ti", "ton", "tre", "va", "ve", "vi", "vol", "ille", "ette", "ment", "tion", "eur",
];

/// `n` distinct pseudo-words of two to four syllables, for corpora that
/// need more unique tokens than a sample text provides.
pub fn pseudo_words(n: usize, rng: &RngState) -> Vec<String> {
    let mut r = rng.split("pseudo-words");
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let k = 2 + r.index(3);
        let w: String = (0..k)
            .map(|_| SYLLABLES[r.index(SYLLABLES.len())])
            .collect();
        if w.chars().count() >= 4 && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn french_sentence_example() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(&dir, "a.txt", "Le conseil municipal siège.");
        let toks = ingest_corpus(&[p], &TokenFilter::default()).unwrap();
        assert_eq!(toks, vec!["conseil", "municipal", "siège"]);
    }

    #[test]
    fn duplicate_documents_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let text = "La séance du conseil, le 12 mars 1871: conseil général et l'assemblée.";
        let a = file(&dir, "a.txt", text);
        let b = file(&dir, "b.txt", text);
        let one = ingest_corpus(std::slice::from_ref(&a), &TokenFilter::default()).unwrap();
        let two = ingest_corpus(&[a, b], &TokenFilter::default()).unwrap();
        assert_eq!(one, two);
        assert_eq!(
            one,
            vec!["séance", "conseil", "mars", "général", "assemblée"]
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ingest_corpus(&[], &TokenFilter::default()),
            Err(Error::Empty(_))
        ));
        let missing = PathBuf::from("/definitely/not/here.txt");
        let err = ingest_corpus(&[missing], &TokenFilter::default()).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.txt"));
        let dir = tempfile::tempdir().unwrap();
        let p = file(&dir, "short.txt", "a bc de 12345");
        assert!(matches!(
            ingest_corpus(&[p], &TokenFilter::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn allowlist_and_lowercase() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(&dir, "a.txt", "Maison rouge Maison bleue");
        let allow = file(&dir, "allow.txt", "maison\n\nbleue\n");
        let f = TokenFilter {
            lowercase: true,
            ..Default::default()
        }
        .with_allowlist_file(&allow)
        .unwrap();
        assert_eq!(ingest_corpus(&[p], &f).unwrap(), vec!["maison", "bleue"]);
    }

    #[test]
    fn pseudo_words_are_distinct_and_reproducible() {
        let r = RngState::new(3);
        let w = pseudo_words(3000, &r);
        assert_eq!(w.len(), 3000);
        assert_eq!(w.iter().collect::<HashSet<_>>().len(), 3000);
        assert!(w.iter().all(|t| TokenFilter::default().accepts(t)));
        assert_eq!(w, pseudo_words(3000, &r));
    }
}
